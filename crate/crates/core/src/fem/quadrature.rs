//! Gauss and Gauss–Lobatto rules on the unit interval [0, 1].

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = if (1.0 - x * x).abs() < 1e-300 {
        let nf = n as f64;
        0.5 * nf * (nf + 1.0) * x.powi(n as i32 + 1)
    } else {
        n as f64 * (p0 - x * p1) / (1.0 - x * x)
    };
    (p1, dp)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rule1d {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

/// n-point Gauss–Legendre rule, exact for degree 2n-1.
pub fn gauss(n: usize) -> Rule1d {
    assert!(n >= 1);
    let mut pts = vec![0.0; n];
    let mut wts = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        pts[i] = x;
        wts[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    to_unit(pts, wts)
}

/// n-point Gauss–Lobatto rule (n >= 2), exact for degree 2n-3.
pub fn gauss_lobatto(n: usize) -> Rule1d {
    assert!(n >= 2);
    let m = n - 1;
    let mut pts = vec![-1.0; n];
    pts[m] = 1.0;
    // Interior points are roots of P'_m.
    for i in 1..m {
        let mut x = -(std::f64::consts::PI * i as f64 / m as f64).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(m, x);
            // P''_m from the Legendre ODE.
            let ddp = (2.0 * x * dp - (m * (m + 1)) as f64 * p) / (1.0 - x * x);
            let dx = dp / ddp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        pts[i] = x;
    }
    let wts = pts
        .iter()
        .map(|&x| {
            let (p, _) = legendre(m, x);
            2.0 / ((m * n) as f64 * p * p)
        })
        .collect();
    to_unit(pts, wts)
}

fn to_unit(pts: Vec<f64>, wts: Vec<f64>) -> Rule1d {
    let mut pairs: Vec<(f64, f64)> = pts.into_iter().zip(wts).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Rule1d {
        points: pairs.iter().map(|p| 0.5 * (p.0 + 1.0)).collect(),
        weights: pairs.iter().map(|p| 0.5 * p.1).collect(),
    }
}

/// Tensor rule on [0,1]^dim for dim in {1, 2}.
#[derive(Debug, Clone, PartialEq)]
pub struct RefRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl RefRule {
    pub fn tensor(rule: &Rule1d, dim: usize) -> Self {
        match dim {
            1 => Self {
                points: rule.points.iter().map(|&x| [x, 0.0]).collect(),
                weights: rule.weights.clone(),
            },
            2 => {
                let mut points = Vec::new();
                let mut weights = Vec::new();
                for (j, &y) in rule.points.iter().enumerate() {
                    for (i, &x) in rule.points.iter().enumerate() {
                        points.push([x, y]);
                        weights.push(rule.weights[i] * rule.weights[j]);
                    }
                }
                Self { points, weights }
            }
            _ => panic!("unsupported dimension {dim}"),
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integrate(rule: &Rule1d, k: i32) -> f64 {
        rule.points
            .iter()
            .zip(&rule.weights)
            .map(|(x, w)| w * x.powi(k))
            .sum()
    }

    #[test]
    fn gauss_exact_to_2n_minus_1() {
        for n in 1..=9 {
            let r = gauss(n);
            for k in 0..(2 * n as i32) {
                let exact = 1.0 / (k as f64 + 1.0);
                assert!((integrate(&r, k) - exact).abs() < 1e-14, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn lobatto_exact_to_2n_minus_3() {
        for n in 2..=6 {
            let r = gauss_lobatto(n);
            assert_eq!(r.points[0], 0.0);
            assert_eq!(r.points[n - 1], 1.0);
            for k in 0..(2 * n as i32 - 2) {
                let exact = 1.0 / (k as f64 + 1.0);
                assert!((integrate(&r, k) - exact).abs() < 1e-14, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn lobatto_five_points() {
        let r = gauss_lobatto(5);
        let s = (3.0f64 / 7.0).sqrt();
        assert!((r.points[1] - 0.5 * (1.0 - s)).abs() < 1e-15);
        assert!((r.weights[2] - 0.5 * 32.0 / 45.0).abs() < 1e-15);
    }
}
