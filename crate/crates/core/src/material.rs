//! Constitutive model for a swelling host material.
//!
//! All quantities are dimensionless unless stated otherwise. Tensors are
//! `D x D`; the spherical reduction uses `D = 3` with diagonal states and the
//! planar case uses `D = 2`.

use nalgebra::SMatrix;
use thiserror::Error;

pub type Mat<const D: usize> = SMatrix<f64, D, D>;

/// Determinant for the small sizes used here.
pub fn det<const D: usize>(m: &Mat<D>) -> f64 {
    match D {
        1 => m[(0, 0)],
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        3 => {
            m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
                - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
                + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)])
        }
        _ => unimplemented!("determinant for dimension {D}"),
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaterialError {
    #[error("OCV evaluated at non-positive filling fraction {0}")]
    OcvDomain(f64),
    #[error("OCV evaluated above full filling: {0}")]
    OcvOutOfRange(f64),
    #[error("chemical stretch undefined: 1 + v*c = {0} <= 0")]
    StretchDomain(f64),
    #[error("non-positive diffusivity: d(mu)/dc = {0}")]
    NonPositiveDiffusivity(f64),
    #[error("inverted deformation: det F = {0}")]
    InvertedElement(f64),
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
}

/// Physical parameters in SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct RawParams {
    pub r_gas: f64,
    pub faraday: f64,
    pub temperature: f64,
    pub l0: f64,
    pub diffusivity: f64,
    pub e_h: f64,
    pub nu: f64,
    pub v_pmv: f64,
    pub c_max: f64,
    pub c0: f64,
    pub c_rate: f64,
    pub u_max: f64,
    pub u_min: f64,
}

impl Default for RawParams {
    fn default() -> Self {
        Self {
            r_gas: 8.314,
            faraday: 96485.0,
            temperature: 298.15,
            l0: 50e-9,
            diffusivity: 1e-17,
            e_h: 90.13e9,
            nu: 0.22,
            v_pmv: 10.96e-6,
            c_max: 311.47e3,
            c0: 6.23e3,
            c_rate: 1.0,
            u_max: 0.5,
            u_min: 0.05,
        }
    }
}

impl RawParams {
    pub fn validate(&self) -> Result<(), MaterialError> {
        let positive = [
            ("r_gas", self.r_gas),
            ("faraday", self.faraday),
            ("temperature", self.temperature),
            ("l0", self.l0),
            ("diffusivity", self.diffusivity),
            ("e_h", self.e_h),
            ("nu", self.nu),
            ("v_pmv", self.v_pmv),
            ("c_max", self.c_max),
            ("c_rate", self.c_rate),
            ("u_max", self.u_max),
            ("u_min", self.u_min),
        ];
        for (field, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(MaterialError::InvalidParameter {
                    field,
                    reason: format!("must be positive and finite, got {value}"),
                });
            }
        }
        if self.nu >= 0.5 {
            return Err(MaterialError::InvalidParameter {
                field: "nu",
                reason: format!("must be below 0.5, got {}", self.nu),
            });
        }
        if self.u_min >= self.u_max {
            return Err(MaterialError::InvalidParameter {
                field: "u_min",
                reason: format!("must be below u_max = {}", self.u_max),
            });
        }
        if !(self.c0 >= 0.0 && self.c0 <= self.c_max) {
            return Err(MaterialError::InvalidParameter {
                field: "c0",
                reason: format!("must lie in [0, c_max], got {}", self.c0),
            });
        }
        Ok(())
    }
}

/// Which relation turns Young's modulus into the shear modulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LameConvention {
    /// `G = E / (2 (1 + nu))`
    #[default]
    Standard,
    /// `G = E / (2 (1 + 2 nu))`
    TwoNu,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaledParams {
    pub e_tilde: f64,
    pub v_tilde: f64,
    pub fo: f64,
    /// Flux magnitude for a unit SOC rate on the unit sphere (|Omega| / |Gamma|).
    pub n_ext_tilde: f64,
    pub c0_tilde: f64,
    pub lambda_lame: f64,
    pub g_lame: f64,
    pub t_cycle: f64,
    /// Pa per dimensionless stress unit.
    pub stress_scale: f64,
    /// F / (R T), turns volts into dimensionless potential.
    pub voltage_scale: f64,
}

pub fn nondimensionalize(raw: &RawParams) -> Result<ScaledParams, MaterialError> {
    nondimensionalize_with(raw, LameConvention::Standard)
}

pub fn nondimensionalize_with(
    raw: &RawParams,
    convention: LameConvention,
) -> Result<ScaledParams, MaterialError> {
    raw.validate()?;
    let rtc = raw.r_gas * raw.temperature * raw.c_max;
    let t_cycle = 3600.0 / raw.c_rate;
    let e_tilde = raw.e_h / rtc;
    let g_lame = match convention {
        LameConvention::Standard => e_tilde / (2.0 * (1.0 + raw.nu)),
        LameConvention::TwoNu => e_tilde / (2.0 * (1.0 + 2.0 * raw.nu)),
    };
    Ok(ScaledParams {
        e_tilde,
        v_tilde: raw.v_pmv * raw.c_max,
        fo: raw.diffusivity * t_cycle / (raw.l0 * raw.l0),
        n_ext_tilde: 1.0 / 3.0,
        c0_tilde: raw.c0 / raw.c_max,
        lambda_lame: 2.0 * g_lame * raw.nu / (1.0 - 2.0 * raw.nu),
        g_lame,
        t_cycle,
        stress_scale: rtc,
        voltage_scale: raw.faraday / (raw.r_gas * raw.temperature),
    })
}

// Rational cubic OCV fit for amorphous silicon, volts.
const OCV_NUM: [f64; 4] = [0.006457, 0.2477, -0.00527, -0.2453];
const OCV_DEN_SHIFT: f64 = 0.002493;

fn ocv_parts(z: f64) -> (f64, f64, f64) {
    let [n0, n1, n2, n3] = OCV_NUM;
    let d = z + OCV_DEN_SHIFT;
    let n = n0 + z * (n1 + z * (n2 + z * n3));
    let dn = n1 + z * (2.0 * n2 + 3.0 * z * n3);
    let ddn = 2.0 * n2 + 6.0 * z * n3;
    let u = n / d;
    let du = (dn - u) / d;
    let ddu = (ddn - 2.0 * du) / d;
    (u, du, ddu)
}

/// Open-circuit voltage in volts for a filling fraction in (0, 1].
pub fn ocv_eval(z: f64) -> Result<f64, MaterialError> {
    if !(z > 0.0) {
        return Err(MaterialError::OcvDomain(z));
    }
    if z > 1.0 {
        return Err(MaterialError::OcvOutOfRange(z));
    }
    Ok(ocv_parts(z).0)
}

/// Voltage and its first two derivatives. Only the lower bound is checked so
/// that states slightly above full filling stay evaluable.
pub fn ocv_derivs(z: f64) -> Result<(f64, f64, f64), MaterialError> {
    if !(z > 0.0) {
        return Err(MaterialError::OcvDomain(z));
    }
    Ok(ocv_parts(z))
}

/// Constants needed for pointwise evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub lambda: f64,
    pub g: f64,
    pub v: f64,
    pub fo: f64,
    pub voltage_scale: f64,
}

impl Material {
    pub fn from_scaled(p: &ScaledParams) -> Self {
        Self {
            lambda: p.lambda_lame,
            g: p.g_lame,
            v: p.v_tilde,
            fo: p.fo,
            voltage_scale: p.voltage_scale,
        }
    }

    pub fn lambda_ch(&self, c: f64) -> Result<f64, MaterialError> {
        let s = 1.0 + self.v * c;
        if !(s > 0.0) {
            return Err(MaterialError::StretchDomain(s));
        }
        Ok(s.cbrt())
    }

    /// `a = lambda_ch^-2` and its first three derivatives in c.
    fn stretch_factors(&self, c: f64) -> Result<[f64; 4], MaterialError> {
        let s = 1.0 + self.v * c;
        if !(s > 0.0) {
            return Err(MaterialError::StretchDomain(s));
        }
        let v = self.v;
        let a = s.powf(-2.0 / 3.0);
        Ok([
            a,
            -(2.0 * v / 3.0) * a / s,
            (10.0 / 9.0) * v * v * a / (s * s),
            -(80.0 / 27.0) * v * v * v * a / (s * s * s),
        ])
    }

    /// Scaled OCV `F U / (R T)` with derivatives.
    pub fn ocv_scaled(&self, c: f64) -> Result<(f64, f64, f64), MaterialError> {
        let (u, du, ddu) = ocv_derivs(c)?;
        let k = self.voltage_scale;
        Ok((k * u, k * du, k * ddu))
    }

    pub fn elasticity<const D: usize>(&self, e: &Mat<D>) -> Mat<D> {
        Mat::<D>::identity() * (self.lambda * e.trace()) + e * (2.0 * self.g)
    }

    pub fn elastic_strain<const D: usize>(
        &self,
        c: f64,
        grad_u: &Mat<D>,
    ) -> Result<Mat<D>, MaterialError> {
        let a = self.stretch_factors(c)?[0];
        let f = Mat::<D>::identity() + grad_u;
        Ok((f.transpose() * f * a - Mat::<D>::identity()) * 0.5)
    }

    pub fn piola_stress<const D: usize>(
        &self,
        c: f64,
        grad_u: &Mat<D>,
    ) -> Result<Mat<D>, MaterialError> {
        let a = self.stretch_factors(c)?[0];
        let f = Mat::<D>::identity() + grad_u;
        let e = self.elastic_strain(c, grad_u)?;
        Ok(f * self.elasticity(&e) * a)
    }

    /// Elastic energy density `E : C[E] / 2` per reference volume.
    pub fn elastic_energy<const D: usize>(
        &self,
        c: f64,
        grad_u: &Mat<D>,
    ) -> Result<f64, MaterialError> {
        let e = self.elastic_strain(c, grad_u)?;
        Ok(0.5 * e.dot(&self.elasticity(&e)))
    }

    pub fn chemical_potential<const D: usize>(
        &self,
        c: f64,
        grad_u: &Mat<D>,
    ) -> Result<f64, MaterialError> {
        let (u, _, _) = self.ocv_scaled(c)?;
        let [_, a1, _, _] = self.stretch_factors(c)?;
        let f = Mat::<D>::identity() + grad_u;
        let cg = f.transpose() * f;
        let e = self.elastic_strain(c, grad_u)?;
        Ok(-u + 0.5 * a1 * cg.dot(&self.elasticity(&e)))
    }

    /// `mu`, `d mu / dc` and `d2 mu / dc2` without any sign check.
    pub fn potential_derivs<const D: usize>(
        &self,
        c: f64,
        grad_u: &Mat<D>,
    ) -> Result<(f64, f64, f64), MaterialError> {
        let [a, a1, a2, a3] = self.stretch_factors(c)?;
        let (u, du, ddu) = self.ocv_scaled(c)?;
        let id = Mat::<D>::identity();
        let f = id + grad_u;
        let cg = f.transpose() * f;
        let s = self.elasticity(&((cg * a - id) * 0.5));
        let cs = cg.dot(&s);
        let c_cc = cg.dot(&self.elasticity(&cg));
        Ok((
            -u + 0.5 * a1 * cs,
            -du + 0.5 * a2 * cs + 0.25 * a1 * a1 * c_cc,
            -ddu + 0.5 * a3 * cs + 0.75 * a1 * a2 * c_cc,
        ))
    }

    pub fn mobility<const D: usize>(&self, c: f64, grad_u: &Mat<D>) -> Result<f64, MaterialError> {
        Ok(self.evaluate(c, grad_u)?.mob)
    }

    /// Full pointwise evaluation with all derivatives used by the Jacobian.
    pub fn evaluate<const D: usize>(
        &self,
        c: f64,
        grad_u: &Mat<D>,
    ) -> Result<PointEval<D>, MaterialError> {
        let [a, a1, a2, a3] = self.stretch_factors(c)?;
        let (u, du, ddu) = self.ocv_scaled(c)?;
        let id = Mat::<D>::identity();
        let d = D as f64;
        let (lam, g) = (self.lambda, self.g);

        let f = id + grad_u;
        let det = self::det(&f);
        if !(det > 0.0) {
            return Err(MaterialError::InvertedElement(det));
        }
        let cg = f.transpose() * f;
        let tr_c = cg.trace();
        let cc = cg.dot(&cg);
        let e = (cg * a - id) * 0.5;
        let s = self.elasticity(&e);
        let cs = cg.dot(&s);
        let c_cc = lam * tr_c * tr_c + 2.0 * g * cc;

        let mu = -u + 0.5 * a1 * cs;
        let dmu_dc = -du + 0.5 * a2 * cs + 0.25 * a1 * a1 * c_cc;
        let d2mu_dc2 = -ddu + 0.5 * a3 * cs + 0.75 * a1 * a2 * c_cc;

        // Derivatives of C:S and C:C[C] with respect to C.
        let q1 = id * (lam * (a * tr_c - 0.5 * d)) + (cg * (2.0 * a) - id) * g;
        let q2 = id * (2.0 * lam * tr_c) + cg * (4.0 * g);
        let dmu_dg = f * q1 * a1;
        let ddmu_dg = f * (q1 * a2 + q2 * (0.5 * a1 * a1));

        if !(dmu_dc > 0.0) {
            return Err(MaterialError::NonPositiveDiffusivity(dmu_dc));
        }
        let mob = self.fo / dmu_dc;
        let k = -self.fo / (dmu_dc * dmu_dc);
        let dmob_dc = k * d2mu_dc2;
        let dmob_dg = ddmu_dg * k;

        let p = f * s * a;
        let ccg = self.elasticity(&cg);
        let dp_dc = f * (s + ccg * (0.5 * a)) * a1;

        let fft = f * f.transpose();
        let mut dp_dg = [[Mat::<D>::zeros(); D]; D];
        for kk in 0..D {
            for ll in 0..D {
                let mut m = Mat::<D>::zeros();
                for i in 0..D {
                    for j in 0..D {
                        let mut v = a * a
                            * (lam * f[(i, j)] * f[(kk, ll)] + g * f[(i, ll)] * f[(kk, j)]);
                        if j == ll {
                            v += a * a * g * fft[(i, kk)];
                        }
                        if i == kk {
                            v += a * s[(ll, j)];
                        }
                        m[(i, j)] = v;
                    }
                }
                dp_dg[kk][ll] = m;
            }
        }

        Ok(PointEval {
            mu,
            dmu_dc,
            dmu_dg,
            mob,
            dmob_dc,
            dmob_dg,
            p,
            dp_dc,
            dp_dg,
        })
    }

    pub fn stress_measures<const D: usize>(
        &self,
        c: f64,
        grad_u: &Mat<D>,
    ) -> Result<StressRecord<D>, MaterialError> {
        let f = Mat::<D>::identity() + grad_u;
        let det = self::det(&f);
        if !(det > 0.0) {
            return Err(MaterialError::InvertedElement(det));
        }
        let p = self.piola_stress(c, grad_u)?;
        Ok(StressRecord::from_piola(p, &f))
    }
}

/// Material response at one point. `dp_dg[k][l]` is `dP / dF_kl`.
#[derive(Debug, Clone)]
pub struct PointEval<const D: usize> {
    pub mu: f64,
    pub dmu_dc: f64,
    pub dmu_dg: Mat<D>,
    pub mob: f64,
    pub dmob_dc: f64,
    pub dmob_dg: Mat<D>,
    pub p: Mat<D>,
    pub dp_dc: Mat<D>,
    pub dp_dg: [[Mat<D>; D]; D],
}

#[derive(Debug, Clone, PartialEq)]
pub struct StressRecord<const D: usize> {
    pub piola: Mat<D>,
    pub cauchy: Mat<D>,
    /// Spherical states only: `sigma_r / 3 + 2 sigma_phi / 3`.
    pub hydrostatic: Option<f64>,
    /// Planar states only.
    pub von_mises: Option<f64>,
}

impl<const D: usize> StressRecord<D> {
    pub fn from_piola(piola: Mat<D>, f: &Mat<D>) -> Self {
        let cauchy = piola * f.transpose() / det(&f);
        let (hydrostatic, von_mises) = match D {
            3 => (Some(cauchy.trace() / 3.0), None),
            2 => (None, Some(von_mises_plane(cauchy[(0, 0)], cauchy[(1, 1)], cauchy[(0, 1)]))),
            _ => (None, None),
        };
        Self {
            piola,
            cauchy,
            hydrostatic,
            von_mises,
        }
    }
}

pub fn hydrostatic_spherical(sigma_r: f64, sigma_phi: f64) -> f64 {
    sigma_r / 3.0 + 2.0 * sigma_phi / 3.0
}

pub fn von_mises_plane(s11: f64, s22: f64, s12: f64) -> f64 {
    (s11 * s11 + s22 * s22 - s11 * s22 + 3.0 * s12 * s12).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn mat() -> Material {
        Material::from_scaled(&nondimensionalize(&RawParams::default()).unwrap())
    }

    #[test]
    fn ocv_reference_values() {
        assert_relative_eq!(ocv_eval(0.02).unwrap(), 0.50713, epsilon = 1e-4);
        // Exact rational value: 0.098327 / 0.502493.
        assert_relative_eq!(ocv_eval(0.5).unwrap(), 0.098327 / 0.502493, epsilon = 1e-15);
        assert_relative_eq!(ocv_eval(0.5).unwrap(), 0.195678, epsilon = 1e-6);
        assert_relative_eq!(ocv_eval(1.0).unwrap(), 0.003578, epsilon = 1e-5);
        assert!(matches!(ocv_eval(0.0), Err(MaterialError::OcvDomain(_))));
        assert!(matches!(ocv_eval(1.01), Err(MaterialError::OcvOutOfRange(_))));
        assert!(ocv_derivs(1.01).is_ok());
    }

    #[test]
    fn ocv_derivatives_match_differences() {
        for &z in &[0.01, 0.1, 0.5, 0.95] {
            let h = 1e-6;
            let (_, du, ddu) = ocv_derivs(z).unwrap();
            let fd1 = (ocv_parts(z + h).0 - ocv_parts(z - h).0) / (2.0 * h);
            let fd2 = (ocv_parts(z + h).1 - ocv_parts(z - h).1) / (2.0 * h);
            assert_relative_eq!(du, fd1, max_relative = 1e-6);
            assert_relative_eq!(ddu, fd2, max_relative = 1e-5);
        }
    }

    #[test]
    fn lambda_ch_values() {
        let m = mat();
        assert_eq!(m.lambda_ch(0.0).unwrap(), 1.0);
        let v = m.v;
        assert_relative_eq!(m.lambda_ch(1.0).unwrap(), (1.0 + v).cbrt(), epsilon = 1e-14);
        assert!(m.lambda_ch(-1.0).is_err());
    }

    #[test]
    fn strain_hand_value() {
        let m = mat();
        let g = Mat::<3>::identity() * 0.1;
        let e = m.elastic_strain(0.0, &g).unwrap();
        assert_relative_eq!(e[(0, 0)], 0.105, epsilon = 1e-14);
        assert_relative_eq!(e[(0, 1)], 0.0);
    }

    #[test]
    fn stress_free_swelling_vanishes() {
        let m = mat();
        for &c in &[0.0, 0.02, 0.3, 1.0] {
            let l = m.lambda_ch(c).unwrap();
            let g = Mat::<3>::identity() * (l - 1.0);
            assert!(m.piola_stress(c, &g).unwrap().abs().max() < 1e-12);
            let (u, _, _) = m.ocv_scaled(c.max(1e-3)).unwrap();
            if c > 0.0 {
                assert_relative_eq!(m.chemical_potential(c, &g).unwrap(), -u, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn small_strain_limit() {
        let m = mat();
        let eps = 1e-6;
        let p = m.piola_stress(0.0, &(Mat::<2>::identity() * eps)).unwrap();
        let expected = (2.0 * m.lambda + 2.0 * m.g) * eps;
        assert_relative_eq!(p[(0, 0)], expected, max_relative = 1e-5);
    }

    #[test]
    fn initial_potential() {
        let m = mat();
        let c0 = 0.02;
        let g = Mat::<3>::identity() * (m.lambda_ch(c0).unwrap() - 1.0);
        assert_relative_eq!(m.chemical_potential(c0, &g).unwrap(), -19.74, epsilon = 0.01);
    }

    #[test]
    fn suppressed_swelling_potential() {
        // Hand evaluation with grad u = 0: C = I, E = (a - 1)/2 I.
        let m = mat();
        let c = 0.5;
        let l = (1.0 + m.v * c).cbrt();
        let e11 = 0.5 * (l.powi(-2) - 1.0);
        let trace_term = 3.0 * (m.lambda * 3.0 * e11 + 2.0 * m.g * e11);
        let expected = -m.voltage_scale * ocv_eval(c).unwrap() - m.v / 3.0 * l.powi(-5) * trace_term;
        assert_relative_eq!(
            m.chemical_potential(c, &Mat::<3>::zeros()).unwrap(),
            expected,
            max_relative = 1e-12
        );
    }

    #[test]
    fn dmu_dc_central_difference() {
        let m = mat();
        let g = Mat::<3>::identity() * 0.05;
        let h = 1e-5;
        let (_, dmu, _) = m.potential_derivs(0.3, &g).unwrap();
        let fd = (m.chemical_potential(0.3 + h, &g).unwrap()
            - m.chemical_potential(0.3 - h, &g).unwrap())
            / (2.0 * h);
        assert!((dmu - fd).abs() < 1e-6 * fd.abs().max(1.0));
    }

    #[test]
    fn mobility_scales_with_fourier() {
        let m = mat();
        let mut m2 = m;
        m2.fo *= 2.0;
        let g = Mat::<3>::identity() * (m.lambda_ch(0.5).unwrap() - 1.0);
        assert_relative_eq!(
            m2.mobility(0.5, &g).unwrap(),
            2.0 * m.mobility(0.5, &g).unwrap(),
            max_relative = 1e-14
        );
        assert!(m.mobility(0.5, &g).unwrap() > 0.0);
    }

    #[test]
    fn stress_record_cases() {
        let m = mat();
        let r = m.stress_measures(0.0, &Mat::<3>::zeros()).unwrap();
        assert_eq!(r.hydrostatic, Some(0.0));
        let f = Mat::<2>::identity();
        let s = StressRecord::from_piola(Mat::<2>::identity() * -2.0, &f);
        assert_relative_eq!(s.von_mises.unwrap(), 2.0);
        assert_relative_eq!(hydrostatic_spherical(3.0, 3.0), 3.0);
        assert!(m
            .stress_measures(0.0, &Mat::<2>::new(-1.5, 0.0, 0.0, 0.0))
            .is_err());
    }
}
