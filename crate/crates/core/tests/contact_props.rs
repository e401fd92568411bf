use chemo_contact::contact::{ncp, ncp_slant, ActiveSet, Gap, Phase};
use chemo_contact::fem::{Discretization, QuarterDisk};
use proptest::prelude::*;

fn disk_set() -> (QuarterDisk, ActiveSet) {
    let m = QuarterDisk::new(2, 2).unwrap();
    let w = m.boundary_weights();
    let set = ActiveSet::new(&m, &w, Gap::Planar([1.07, 1.07]), 1.0);
    (m, set)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 96, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn ncp_vanishes_on_complementary_pairs(x in 0.0..5.0f64, alpha in 0.1..10.0f64, which in any::<bool>()) {
        let (a, b) = if which { (-x, 0.0) } else { (0.0, x) };
        prop_assert_eq!(ncp(a, b, alpha), 0.0);
    }

    #[test]
    fn ncp_detects_penetration(a in 1e-3..5.0f64, b in 0.0..5.0f64, alpha in 0.1..10.0f64) {
        prop_assert!(ncp(a, b, alpha) < 0.0);
    }

    #[test]
    fn ncp_slant_matches_branch(a in -5.0..5.0f64, b in -5.0..5.0f64, alpha in 0.1..10.0f64) {
        let (da, db) = ncp_slant(a, b, alpha);
        let h = 1e-7;
        if (b + alpha * a).abs() > 1e-3 {
            let fa = (ncp(a + h, b, alpha) - ncp(a - h, b, alpha)) / (2.0 * h);
            let fb = (ncp(a, b + h, alpha) - ncp(a, b - h, alpha)) / (2.0 * h);
            prop_assert!((fa - da).abs() < 1e-6 && (fb - db).abs() < 1e-6);
        }
    }

    #[test]
    fn projection_is_idempotent(mask in prop::collection::vec(any::<bool>(), 64), seed in prop::collection::vec(-0.2..0.2f64, 64)) {
        let (m, mut set) = disk_set();
        for (a, &b) in set.active.iter_mut().zip(&mask) {
            *a = b;
        }
        let mut y: Vec<f64> = (0..m.n_dofs()).map(|i| seed[i % seed.len()]).collect();
        let before = y.clone();
        set.project(&mut y);
        let once = y.clone();
        prop_assert!(!set.project(&mut y));
        prop_assert_eq!(&once, &y);
        for (d, &a) in set.dofs.iter().zip(&set.active) {
            if a {
                prop_assert_eq!(y[d.dof], d.bound());
            } else {
                prop_assert_eq!(y[d.dof], before[d.dof]);
            }
        }
        let gaps = set.gaps(&y);
        for (g, &a) in gaps.iter().zip(&set.active) {
            if a {
                prop_assert!(g.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hysteresis_keeps_set_monotone(
        mask in prop::collection::vec(any::<bool>(), 64),
        lam in prop::collection::vec(-1.0..1.0f64, 64),
        seed in prop::collection::vec(-0.2..0.2f64, 64),
        lithiation in any::<bool>(),
    ) {
        let (m, mut set) = disk_set();
        for (a, &b) in set.active.iter_mut().zip(&mask) {
            *a = b;
        }
        let y: Vec<f64> = (0..m.n_dofs()).map(|i| 0.07 + seed[i % seed.len()]).collect();
        let lambda: Vec<f64> = (0..set.len()).map(|p| lam[p % lam.len()]).collect();
        let before = set.active.clone();
        let phase = if lithiation { Phase::Lithiation } else { Phase::Delithiation };
        let changed = set.update(&y, &lambda, phase);
        prop_assert_eq!(changed, before != set.active);
        for (&b, &a) in before.iter().zip(&set.active) {
            match phase {
                Phase::Lithiation => prop_assert!(!b || a),
                Phase::Delithiation => prop_assert!(b || !a),
            }
        }
        let inactive = set.active.iter().filter(|a| !**a).count();
        prop_assert_eq!(set.n_active() + inactive, set.len());
    }

    #[test]
    fn multiplier_vanishes_off_the_active_set(mask in prop::collection::vec(any::<bool>(), 64), r in prop::collection::vec(-1.0..1.0f64, 64)) {
        let (m, mut set) = disk_set();
        for (a, &b) in set.active.iter_mut().zip(&mask) {
            *a = b;
        }
        let res: Vec<f64> = (0..m.n_dofs()).map(|i| r[i % r.len()]).collect();
        let lambda = set.recover_multiplier(&res);
        for ((d, &a), l) in set.dofs.iter().zip(&set.active).zip(&lambda) {
            if a {
                prop_assert_eq!(*l, -res[d.dof]);
            } else {
                prop_assert_eq!(*l, 0.0);
            }
        }
    }
}

#[test]
fn contact_dofs_exclude_pinned_components() {
    let (m, set) = disk_set();
    let pinned = m.pinned();
    assert!(!set.is_empty());
    for d in &set.dofs {
        assert!(d.weight > 0.0 && d.gap > 0.0);
        assert!(!pinned.iter().any(|p| p.node == d.node && p.comp == d.comp));
    }
}
