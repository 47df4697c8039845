//! Semiclassical dimer coherence from the effective Hamiltonian on the angle torus.

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{
    diagonalize_excited, reorganization_matrix, sigma0_and_partition, BathSpec, CoherenceResult, ExcitonBasis,
    Method, SiteSystem, Thermo,
};
use crate::quadrature::periodic_trapezoid;

/// Convergence threshold for the angle integral.
pub const ANGLE_TOL: f64 = 1e-12;

/// Effective Hamiltonian at unit actions as a function of `x = cos(Theta)`.
fn h_eff_cos(x: f64, e_r: &DMatrix<f64>, f: f64) -> f64 {
    let plus = (0.5 + 2.0 * f * x).powi(2);
    let minus = (0.5 - 2.0 * f * x).powi(2);
    -2.0 * e_r[(0, 1)] * (0.25 - 4.0 * f * f * x * x) - (e_r[(0, 0)] * plus + e_r[(1, 1)] * minus)
}

/// `H_eff^o(Theta)` for a dimer with mixing angle `phi`.
pub fn h_eff_theta(theta: f64, e_r: &DMatrix<f64>, phi: f64) -> f64 {
    h_eff_cos(theta.cos(), e_r, phi.cos() * phi.sin())
}

fn dimer_inputs(sys: &SiteSystem, bath: &BathSpec) -> Result<(ExcitonBasis, DMatrix<f64>, f64)> {
    if sys.n_sites() != 2 || bath.n_sites() != 2 {
        return Err(Error::Unsupported(format!(
            "semiclassical coherence is only defined for dimers, got {} sites",
            sys.n_sites()
        )));
    }
    let basis = diagonalize_excited(sys)?;
    let e_r = reorganization_matrix(bath)?;
    let phi = basis.phi.expect("dimer basis carries its mixing angle");
    Ok((basis, e_r, phi))
}

/// `C_12 = (1/Z_e) (1/2pi) ∫ exp(-beta H_eff^o) cos(Theta) dTheta`.
///
/// The integrand is folded onto one half period as
/// `x [g(x) - g(-x)]` with `x = cos(Theta)`, so symmetric reorganization
/// energies cancel exactly rather than to quadrature accuracy.
pub fn semiclassical_exact(sys: &SiteSystem, bath: &BathSpec, th: &Thermo) -> Result<CoherenceResult> {
    let (basis, e_r, phi) = dimer_inputs(sys, bath)?;
    let f = phi.cos() * phi.sin();
    let sigma0 = sigma0_and_partition(&basis, th);

    // H_eff is quadratic in x on [-1, 1]; shift by its minimum to avoid overflow.
    let a = 4.0 * f * f * (2.0 * e_r[(0, 1)] - e_r[(0, 0)] - e_r[(1, 1)]);
    let mut candidates = vec![h_eff_cos(-1.0, &e_r, f), h_eff_cos(1.0, &e_r, f)];
    if a != 0.0 {
        let b = -2.0 * f * (e_r[(0, 0)] - e_r[(1, 1)]);
        let vertex = -b / (2.0 * a);
        if vertex.abs() < 1.0 {
            candidates.push(h_eff_cos(vertex, &e_r, f));
        }
    }
    let shift = candidates.into_iter().fold(f64::INFINITY, f64::min);

    let beta = th.beta;
    let g = |x: f64| (-beta * (h_eff_cos(x, &e_r, f) - shift)).exp();
    let integrand = |theta: f64| {
        let x = theta.cos();
        x * (g(x) - g(-x))
    };
    let integral = periodic_trapezoid(integrand, PI, ANGLE_TOL, 1 << 22)?;
    let prefactor = (-beta * shift - sigma0.log_partition).exp() / TAU;
    let c12 = prefactor * integral.value;
    let err = prefactor * integral.err_est;
    if !c12.is_finite() {
        return Err(Error::NonFinite(format!("sc-exact at {} K", th.temperature_k)));
    }
    let c = DMatrix::from_row_slice(2, 2, &[0.0, c12, c12, 0.0]);
    Ok(CoherenceResult::new(Method::SemiclassicalExact, c, false, err)
        .with_meta("quadrature", "periodic trapezoid, folded half period")
        .with_meta("phi", phi))
}

/// `C_12 = (beta / Z_e) cos(phi) sin(phi) (E_11 - E_22)`.
pub fn semiclassical_second_order(sys: &SiteSystem, bath: &BathSpec, th: &Thermo) -> Result<CoherenceResult> {
    let (basis, e_r, phi) = dimer_inputs(sys, bath)?;
    let sigma0 = sigma0_and_partition(&basis, th);
    let c12 = th.beta * phi.cos() * phi.sin() * (e_r[(0, 0)] - e_r[(1, 1)]) / sigma0.partition;
    let c = DMatrix::from_row_slice(2, 2, &[0.0, c12, c12, 0.0]);
    Ok(CoherenceResult::new(Method::Semiclassical2, c, false, 0.0).with_meta("phi", phi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BathShape;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const OHMIC: BathShape = BathShape::Ohmic { cutoff: 50.0 };

    fn fig1_dimer() -> SiteSystem {
        SiteSystem::dimer(16000.0, 200.0, 200.0).unwrap()
    }

    fn bath(e1: f64, e2: f64, c: f64) -> BathSpec {
        BathSpec::uniform_correlation(OHMIC, vec![e1, e2], c).unwrap()
    }

    /// Plain midpoint sum over the full period, no folding or shifting.
    fn brute_force(sys: &SiteSystem, bath: &BathSpec, th: &Thermo, n: usize) -> f64 {
        let basis = diagonalize_excited(sys).unwrap();
        let e = reorganization_matrix(bath).unwrap();
        let phi = basis.phi.unwrap();
        let z = sigma0_and_partition(&basis, th).partition;
        let h = TAU / n as f64;
        let s: f64 = (0..n)
            .map(|i| {
                let t = (i as f64 + 0.5) * h;
                (-th.beta * h_eff_theta(t, &e, phi)).exp() * t.cos()
            })
            .sum();
        s * h / TAU / z
    }

    #[test]
    fn h_eff_examples() {
        let zero = DMatrix::zeros(2, 2);
        assert_eq!(h_eff_theta(0.3, &zero, 0.5), 0.0);
        let e = DMatrix::from_row_slice(2, 2, &[100.0, 30.0, 30.0, 60.0]);
        let flat = h_eff_theta(0.0, &e, 0.0);
        assert_abs_diff_eq!(flat, -(100.0 + 60.0) / 4.0 - 2.0 * 30.0 / 4.0, epsilon = 1e-12);
        assert_eq!(flat, h_eff_theta(1.7, &e, 0.0));
        let sym = DMatrix::from_row_slice(2, 2, &[80.0, 20.0, 20.0, 80.0]);
        assert_eq!(h_eff_theta(0.4, &sym, 0.5), h_eff_theta(PI - 0.4, &sym, 0.5));
    }

    #[test]
    fn second_order_site1_example() {
        let th = Thermo::new(300.0).unwrap();
        let r = semiclassical_second_order(&fig1_dimer(), &bath(100.0, 0.0, 0.0), &th).unwrap();
        let beta = 1.0 / (0.695_034_8 * 300.0);
        let gap = 200.0 * 5.0_f64.sqrt();
        let want = beta / (2.0 * (0.5 * beta * gap).cosh()) / 5.0_f64.sqrt() * 100.0;
        assert_abs_diff_eq!(r.c12(), want, epsilon = 1e-15);
        assert!((r.c12() - 0.0657).abs() < 5e-4);
    }

    #[test]
    fn second_order_high_temperature_limit() {
        let th = Thermo::new(1e7).unwrap();
        let r = semiclassical_second_order(&fig1_dimer(), &bath(100.0, 0.0, 0.0), &th).unwrap();
        let limit = 0.5 * th.beta * 100.0 / 5.0_f64.sqrt();
        assert!((r.c12() / limit - 1.0).abs() < 1e-6);
    }

    #[test]
    fn symmetric_reorganization_gives_zero() {
        for t in [77.0, 300.0, 800.0] {
            for c in [-1.0, -0.3, 0.0, 0.6, 1.0] {
                let r = semiclassical_exact(&fig1_dimer(), &bath(100.0, 100.0, c), &Thermo::new(t).unwrap()).unwrap();
                assert!(r.c12().abs() < 1e-12, "T={t} c={c}: {}", r.c12());
            }
        }
    }

    #[test]
    fn vanishing_reorganization_gives_zero() {
        let r = semiclassical_exact(&fig1_dimer(), &bath(0.0, 0.0, 0.0), &Thermo::new(300.0).unwrap()).unwrap();
        assert_eq!(r.c12(), 0.0);
    }

    #[test]
    fn exact_matches_brute_force_sum() {
        let th = Thermo::new(300.0).unwrap();
        let b = bath(100.0, 0.0, 0.0);
        let r = semiclassical_exact(&fig1_dimer(), &b, &th).unwrap();
        let want = brute_force(&fig1_dimer(), &b, &th, 4096);
        assert!((r.c12() - want).abs() < 1e-12 * want.abs().max(1.0));
    }

    #[test]
    fn exact_approaches_second_order_quadratically() {
        let th = Thermo::new(300.0).unwrap();
        let residual = |eps: f64| {
            let b = bath(100.0 * eps, 0.0, 0.0);
            let exact = semiclassical_exact(&fig1_dimer(), &b, &th).unwrap().c12();
            let approx = semiclassical_second_order(&fig1_dimer(), &b, &th).unwrap().c12();
            (exact - approx).abs()
        };
        let r = [residual(1.0), residual(0.5), residual(0.25)];
        for w in r.windows(2) {
            let ratio = w[0] / w[1];
            assert!((ratio / 4.0 - 1.0).abs() < 0.2, "ratio {ratio}");
        }
    }

    #[test]
    fn rejects_non_dimers() {
        let v = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let sys = SiteSystem::new(vec![1.0, 2.0, 3.0], v).unwrap();
        let b = BathSpec::uncorrelated(OHMIC, vec![1.0, 1.0, 1.0]).unwrap();
        let th = Thermo::new(300.0).unwrap();
        assert!(matches!(semiclassical_exact(&sys, &b, &th), Err(Error::Unsupported(_))));
        assert!(matches!(semiclassical_second_order(&sys, &b, &th), Err(Error::Unsupported(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn exact_is_odd_under_site_exchange(
            delta in 10.0f64..400.0, v in 10.0f64..300.0,
            e1 in 0.0f64..300.0, e2 in 0.0f64..300.0, c in -1.0f64..1.0, t in 50.0f64..2000.0,
        ) {
            let th = Thermo::new(t).unwrap();
            let a = semiclassical_exact(&SiteSystem::dimer(16000.0, delta, v).unwrap(), &bath(e1, e2, c), &th).unwrap();
            let b = semiclassical_exact(&SiteSystem::dimer(16000.0, -delta, v).unwrap(), &bath(e2, e1, c), &th).unwrap();
            prop_assert!((a.c12() + b.c12()).abs() <= 1e-12 * a.c12().abs().max(1e-3));
        }

        #[test]
        fn second_order_ignores_correlation(c1 in -1.0f64..1.0, c2 in -1.0f64..1.0, t in 50.0f64..2000.0) {
            let th = Thermo::new(t).unwrap();
            let a = semiclassical_second_order(&fig1_dimer(), &bath(120.0, 40.0, c1), &th).unwrap();
            let b = semiclassical_second_order(&fig1_dimer(), &bath(120.0, 40.0, c2), &th).unwrap();
            prop_assert_eq!(a.c12(), b.c12());
        }
    }
}
