//! Coherences from the order-hbar^3 Wigner expansion with classical Gaussian
//! bath moments.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{
    diagonalize_excited, reorganization_matrix, BathSpec, CoherenceResult, ExcitonBasis, Method, SiteSystem, Thermo,
};
use crate::oracle::DiscretizedBath;

fn zero_diagonal(mut m: DMatrix<f64>) -> DMatrix<f64> {
    m.fill_diagonal(0.0);
    m
}

/// `(1/N) u [(beta^2/2) M2 - (beta^3/6)(M2 H + H M2 + M_ehe)] u^T` given the
/// bath-averaged site-basis moments `M2` and `M_ehe`.
fn expansion(h: &DMatrix<f64>, m2: &DMatrix<f64>, m_ehe: &DMatrix<f64>, basis: &ExcitonBasis, th: &Thermo) -> DMatrix<f64> {
    let b = th.beta;
    let n = h.nrows() as f64;
    let site = m2 * (0.5 * b * b) - (m2 * h + h * m2 + m_ehe) * (b * b * b / 6.0);
    zero_diagonal(basis.to_exciton(&site) / n)
}

/// Analytic bath moments: `M2 = diag(2 E_nn / beta)`, `M_ehe = (2 E_mn / beta) H_mn`.
fn analytic_moments(e: &DMatrix<f64>, h: &DMatrix<f64>, th: &Thermo) -> (DMatrix<f64>, DMatrix<f64>) {
    let scale = 2.0 / th.beta;
    let m2 = DMatrix::from_diagonal(&e.diagonal()) * scale;
    let m_ehe = e.component_mul(h) * scale;
    (m2, m_ehe)
}

/// General-`N_S` evaluation; diagonal entries are left at zero.
pub fn hbar3_general(sys: &SiteSystem, bath: &BathSpec, th: &Thermo) -> Result<CoherenceResult> {
    if bath.n_sites() != sys.n_sites() {
        return Err(Error::Validation("bath and system site counts differ".into()));
    }
    let basis = diagonalize_excited(sys)?;
    let e = reorganization_matrix(bath)?;
    let h = sys.excited_hamiltonian();
    let (m2, m_ehe) = analytic_moments(&e, &h, th);
    let c = expansion(&h, &m2, &m_ehe, &basis, th);
    Ok(CoherenceResult::new(Method::Hbar3, c, false, 0.0).with_meta("moments", "analytic Gaussian"))
}

/// Dimer closed form
/// `(beta/2) f (E11 - E22) + (beta^2/12) Delta_S f (cos^2 - sin^2)(E11 + E22 - 2 E12)`
/// with `f = cos(phi) sin(phi)`.
pub fn hbar3_dimer(basis: &ExcitonBasis, e_r: &DMatrix<f64>, th: &Thermo) -> Result<CoherenceResult> {
    let Some(phi) = basis.phi.filter(|_| basis.n_states() == 2) else {
        return Err(Error::Unsupported("closed-form hbar^3 coherence needs a dimer basis".into()));
    };
    let (s, c) = phi.sin_cos();
    let f = c * s;
    let b = th.beta;
    let c12 = 0.5 * b * f * (e_r[(0, 0)] - e_r[(1, 1)])
        + b * b / 12.0 * basis.splitting() * f * (c * c - s * s) * (e_r[(0, 0)] + e_r[(1, 1)] - 2.0 * e_r[(0, 1)]);
    let m = DMatrix::from_row_slice(2, 2, &[0.0, c12, c12, 0.0]);
    Ok(CoherenceResult::new(Method::Hbar3, m, false, 0.0).with_meta("form", "dimer closed form"))
}

/// Bath average of the `B_2` correction, `-sum_k Omega_k^2 / 12`. It multiplies
/// the system identity and so never reaches off-diagonal coherences.
pub fn b2_term(dbath: &DiscretizedBath, _th: &Thermo) -> f64 {
    -dbath.modes.iter().map(|m| m.freq * m.freq).sum::<f64>() / 12.0
}

/// Same expansion with bath moments estimated by sampling
/// `Q_k ~ N(0, 1/(beta Omega_k^2))` over a discretized bath. `err_est` is three
/// standard errors of the largest off-diagonal entry.
pub fn hbar3_monte_carlo(
    sys: &SiteSystem,
    dbath: &DiscretizedBath,
    th: &Thermo,
    n_samples: usize,
    seed: u64,
) -> Result<CoherenceResult> {
    let n = sys.n_sites();
    if n_samples < 2 {
        return Err(Error::Validation("Monte Carlo needs at least 2 samples".into()));
    }
    if dbath.modes.iter().any(|m| m.alpha.len() != n) {
        return Err(Error::Validation(format!("every mode must couple {n} sites")));
    }
    let basis = diagonalize_excited(sys)?;
    let h = sys.excited_hamiltonian();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mean = DMatrix::zeros(n, n);
    let mut sq = DMatrix::zeros(n, n);
    let mut x = vec![0.0; n];
    for _ in 0..n_samples {
        x.iter_mut().for_each(|v| *v = 0.0);
        for mode in &dbath.modes {
            let z: f64 = StandardNormal.sample(&mut rng);
            let q = z / (th.beta.sqrt() * mode.freq);
            for (xn, a) in x.iter_mut().zip(&mode.alpha) {
                *xn += a * q;
            }
        }
        let m2 = DMatrix::from_fn(n, n, |i, j| if i == j { x[i] * x[i] } else { 0.0 });
        let m_ehe = DMatrix::from_fn(n, n, |i, j| x[i] * x[j] * h[(i, j)]);
        let sample = expansion(&h, &m2, &m_ehe, &basis, th);
        sq += sample.component_mul(&sample);
        mean += sample;
    }
    let count = n_samples as f64;
    mean /= count;
    let var = (sq / count - mean.component_mul(&mean)) * (count / (count - 1.0));
    let se = var.iter().fold(0.0_f64, |a, v| a.max(v.max(0.0).sqrt())) / count.sqrt();
    Ok(CoherenceResult::new(Method::Hbar3, mean, false, 3.0 * se)
        .with_meta("moments", "Monte Carlo")
        .with_meta("samples", n_samples))
}
