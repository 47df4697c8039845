//! Classical limit: the coherence-free equipartition state and phase-space
//! correlation estimators for normal-mode ensembles.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::model::{BathSpec, CoherenceResult, ExcitonBasis, Method, SiteSystem, Thermo};

/// `R = (pi_exc / N_S) I`.
pub fn equipartition_state(n_sites: usize, pi_exc: f64) -> Result<DMatrix<f64>> {
    if !(0.0..=1.0).contains(&pi_exc) {
        return Err(Error::Validation(format!("excited-state population {pi_exc} outside [0, 1]")));
    }
    if n_sites == 0 {
        return Err(Error::Validation("equipartition state needs at least one site".into()));
    }
    Ok(DMatrix::identity(n_sites, n_sites) * (pi_exc / n_sites as f64))
}

/// Stationary classical coherence: zero off the diagonal for every input, with
/// equal populations (`pi_exc = 1`) on it.
pub fn classical_coherence(sys: &SiteSystem, _bath: &BathSpec, th: &Thermo) -> CoherenceResult {
    let c = equipartition_state(sys.n_sites(), 1.0).expect("pi_exc = 1 is in range");
    CoherenceResult::new(Method::Classical, c, true, 0.0)
        .with_meta("temperature_k", th.temperature_k)
        .with_meta("pi_exc", 1.0)
}

/// Weighted normal-mode phase points.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSampleEnsemble {
    /// `q[s][mu]` for sample `s`.
    pub q: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub temperature_k: f64,
}

impl PhaseSampleEnsemble {
    /// Equally weighted samples.
    pub fn new(q: Vec<Vec<f64>>, p: Vec<Vec<f64>>, temperature_k: f64) -> Result<Self> {
        let n = q.len();
        Self::weighted(q, p, vec![1.0 / n.max(1) as f64; n], temperature_k)
    }

    pub fn weighted(q: Vec<Vec<f64>>, p: Vec<Vec<f64>>, weights: Vec<f64>, temperature_k: f64) -> Result<Self> {
        if q.len() != p.len() || q.len() != weights.len() {
            return Err(Error::Validation("q, p and weights must have one entry per sample".into()));
        }
        let modes = q.first().map_or(0, Vec::len);
        if q.iter().chain(&p).any(|s| s.len() != modes) {
            return Err(Error::Validation("every sample must list the same number of modes".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Validation("sample weights must be non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if !q.is_empty() && (total - 1.0).abs() > 1e-10 {
            return Err(Error::Validation(format!("sample weights sum to {total}, expected 1")));
        }
        if !(temperature_k.is_finite() && temperature_k > 0.0) {
            return Err(Error::Validation(format!("temperature must be positive, got {temperature_k} K")));
        }
        Ok(Self { q, p, weights, temperature_k })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn n_modes(&self) -> usize {
        self.q.first().map_or(0, Vec::len)
    }
}

/// Independent thermal Gaussians per mode: `q ~ N(0, kT/omega^2)`, `p ~ N(0, kT)`.
pub fn thermal_gaussian_ensemble(omega: &[f64], th: &Thermo, n_samples: usize, seed: u64) -> Result<PhaseSampleEnsemble> {
    let kt = th.thermal_energy();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let mut q = Vec::with_capacity(n_samples);
    let mut p = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        q.push(omega.iter().map(|w| std.sample(&mut rng) * kt.sqrt() / w).collect());
        p.push(omega.iter().map(|_| std.sample(&mut rng) * kt.sqrt()).collect());
    }
    PhaseSampleEnsemble::new(q, p, th.temperature_k)
}

/// Fixed actions `J_mu` with independent uniform angles:
/// `q = sqrt(2J/omega) cos(theta)`, `p = -sqrt(2J omega) sin(theta)`.
pub fn equipartition_ensemble(
    omega: &[f64],
    actions: &[f64],
    temperature_k: f64,
    n_samples: usize,
    seed: u64,
) -> Result<PhaseSampleEnsemble> {
    if omega.len() != actions.len() {
        return Err(Error::Validation("one action per mode required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = Vec::with_capacity(n_samples);
    let mut p = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let mut qs = Vec::with_capacity(omega.len());
        let mut ps = Vec::with_capacity(omega.len());
        for (w, j) in omega.iter().zip(actions) {
            let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            qs.push((2.0 * j / w).sqrt() * theta.cos());
            ps.push(-(2.0 * j * w).sqrt() * theta.sin());
        }
        q.push(qs);
        p.push(ps);
    }
    PhaseSampleEnsemble::new(q, p, temperature_k)
}

/// Correlation-function estimates of the classical coherence, one matrix entry
/// per mode pair, each with its standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationEstimate {
    /// `<p_mu p_nu> / kT`.
    pub re_from_p: DMatrix<f64>,
    /// `omega_mu omega_nu <q_mu q_nu> / kT`.
    pub re_from_q: DMatrix<f64>,
    /// `omega_nu <p_mu q_nu> / kT`.
    pub im: DMatrix<f64>,
    pub se_re_from_p: DMatrix<f64>,
    pub se_re_from_q: DMatrix<f64>,
    pub se_im: DMatrix<f64>,
}

/// Weighted mean and standard error of `x`.
fn weighted_moment(weights: &[f64], x: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let mean: f64 = weights.iter().zip(x.clone()).map(|(w, v)| w * v).sum();
    let var: f64 = weights.iter().zip(x).map(|(w, v)| w * w * (v - mean).powi(2)).sum();
    let n_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
    let correction = if n_eff > 1.0 { n_eff / (n_eff - 1.0) } else { f64::INFINITY };
    (mean, (var * correction).sqrt())
}

pub fn correlation_coherence(ens: &PhaseSampleEnsemble, basis: &ExcitonBasis) -> Result<CorrelationEstimate> {
    if ens.len() < 2 {
        return Err(Error::Validation(format!("need at least 2 samples, got {}", ens.len())));
    }
    let n = basis.n_states();
    if ens.n_modes() != n {
        return Err(Error::Validation(format!("ensemble has {} modes, basis has {n} states", ens.n_modes())));
    }
    let kt = crate::model::K_B_CM * ens.temperature_k;
    let w = &basis.omega_mu;
    let mut out = CorrelationEstimate {
        re_from_p: DMatrix::zeros(n, n),
        re_from_q: DMatrix::zeros(n, n),
        im: DMatrix::zeros(n, n),
        se_re_from_p: DMatrix::zeros(n, n),
        se_re_from_q: DMatrix::zeros(n, n),
        se_im: DMatrix::zeros(n, n),
    };
    for mu in 0..n {
        for nu in 0..n {
            let pp = ens.p.iter().map(|p| p[mu] * p[nu] / kt);
            let (m, s) = weighted_moment(&ens.weights, pp);
            out.re_from_p[(mu, nu)] = m;
            out.se_re_from_p[(mu, nu)] = s;

            let qq = ens.q.iter().map(|q| w[mu] * w[nu] * q[mu] * q[nu] / kt);
            let (m, s) = weighted_moment(&ens.weights, qq);
            out.re_from_q[(mu, nu)] = m;
            out.se_re_from_q[(mu, nu)] = s;

            let pq = ens.p.iter().zip(&ens.q).map(|(p, q)| w[nu] * p[mu] * q[nu] / kt);
            let (m, s) = weighted_moment(&ens.weights, pq);
            out.im[(mu, nu)] = m;
            out.se_im[(mu, nu)] = s;
        }
    }
    Ok(out)
}
