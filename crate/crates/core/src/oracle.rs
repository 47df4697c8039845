//! Exact-diagonalization reference: a finite harmonic bath, Fock truncation,
//! and the full thermal state of the excited manifold.

use std::io::Write;
use std::path::Path;

use faer::{Mat, Side};
use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::pivoted_cholesky;
use crate::model::{
    diagonalize_excited, reorganization_matrix, BathShape, BathSpec, CoherenceResult, Method, SiteSystem, Thermo,
};

/// Default largest Hilbert-space dimension the oracle will build.
pub const DEFAULT_DIMENSION_CAP: usize = 20_000;

/// One harmonic mode and its linear coupling to each site.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMode {
    pub freq: f64,
    /// `alpha_n`, so that the site-`n` coupling energy is `alpha_n Q`.
    pub alpha: Vec<f64>,
}

impl DiscreteMode {
    /// `alpha alpha^T / (2 Omega^2)`.
    pub fn reorganization(&self) -> DMatrix<f64> {
        let n = self.alpha.len();
        let s = 0.5 / (self.freq * self.freq);
        DMatrix::from_fn(n, n, |i, j| self.alpha[i] * self.alpha[j] * s)
    }
}

/// Finite bath approximating a target reorganization matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedBath {
    pub modes: Vec<DiscreteMode>,
    pub target_e_r: DMatrix<f64>,
    /// Max-norm deviation of the recomputed reorganization matrix from the target.
    pub residual: f64,
    /// Fraction of the continuous reorganization weight lying beyond the
    /// discretization range. The modes still carry the full target; this is
    /// the part that was folded into the last bin.
    pub tail_fraction: f64,
}

impl DiscretizedBath {
    /// Wraps explicit modes; the target is whatever they produce.
    pub fn from_modes(modes: Vec<DiscreteMode>) -> Self {
        let n = modes.first().map_or(0, |m| m.alpha.len());
        let mut bath = Self { modes, target_e_r: DMatrix::zeros(n, n), residual: 0.0, tail_fraction: 0.0 };
        bath.target_e_r = bath.recomputed_reorganization(n);
        bath
    }

    /// `sum_k alpha_mk alpha_nk / (2 Omega_k^2)`.
    pub fn recomputed_reorganization(&self, n_sites: usize) -> DMatrix<f64> {
        self.modes.iter().fold(DMatrix::zeros(n_sites, n_sites), |acc, m| acc + m.reorganization())
    }
}

/// Discretization and truncation parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    /// Number of frequency bins `K`.
    pub n_modes: usize,
    /// Fock levels `M` per mode (occupations `0..M`).
    pub fock_levels: usize,
    /// Upper end of the discretized range; `None` means six cutoffs.
    pub omega_max: Option<f64>,
    pub dimension_cap: usize,
}

impl OracleConfig {
    pub fn new(n_modes: usize, fock_levels: usize) -> Self {
        Self { n_modes, fock_levels, omega_max: None, dimension_cap: DEFAULT_DIMENSION_CAP }
    }

    fn validate(&self) -> Result<()> {
        if self.n_modes < 1 {
            return Err(Error::Validation("oracle needs at least one mode bin".into()));
        }
        if self.fock_levels < 2 {
            return Err(Error::Validation("oracle needs at least two Fock levels per mode".into()));
        }
        if let Some(w) = self.omega_max {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::Validation(format!("omega_max must be positive, got {w}")));
            }
        }
        Ok(())
    }
}

/// Splits the bath into bins of equal reorganization weight and couples every
/// bin to the sites through the Cholesky factor of the reorganization matrix.
///
/// Ohmic baths are cut at `omega_max` and each of the `K` bins carries exactly
/// `E^r/K`, the weight beyond `omega_max` being spread over the bins and
/// reported as `tail_fraction`. Discrete baths keep their own modes and ignore
/// the bin count.
pub fn discretize_bath(bath: &BathSpec, cfg: &OracleConfig) -> Result<DiscretizedBath> {
    cfg.validate()?;
    let e = reorganization_matrix(bath)?;
    let factor = pivoted_cholesky(&e, 1e-14);
    let (bins, tail_fraction): (Vec<(f64, f64)>, f64) = match &bath.shape {
        BathShape::Ohmic { cutoff } => {
            let wc = *cutoff;
            let wmax = cfg.omega_max.unwrap_or(6.0 * wc);
            let fmax = -(-wmax / wc).exp_m1();
            let k = cfg.n_modes;
            let edge = |i: usize| if i == k { wmax } else { -wc * (-(i as f64) * fmax / k as f64).ln_1p() };
            let bins = (0..k)
                .map(|i| {
                    let (a, b) = (edge(i), edge(i + 1));
                    let (ea, eb) = ((-a / wc).exp(), (-b / wc).exp());
                    (wc + (a * ea - b * eb) / (ea - eb), 1.0 / k as f64)
                })
                .collect();
            (bins, 1.0 - fmax)
        }
        BathShape::Discrete { modes } => {
            let total: f64 = modes.iter().map(|m| m.1).sum();
            (modes.iter().filter(|m| m.1 > 0.0).map(|&(w, s)| (w, s / total)).collect(), 0.0)
        }
    };
    let n = e.nrows();
    let mut modes = Vec::new();
    for &(freq, share) in &bins {
        for j in 0..factor.ncols() {
            let scale = (2.0 * share).sqrt() * freq;
            modes.push(DiscreteMode { freq, alpha: (0..n).map(|i| scale * factor[(i, j)]).collect() });
        }
    }
    let mut out = DiscretizedBath { modes, target_e_r: e.clone(), residual: 0.0, tail_fraction };
    let recomputed = out.recomputed_reorganization(n);
    out.residual = (recomputed - &e).abs().max();
    let tol = 1e-10 * e.abs().max().max(1.0);
    if out.residual > tol {
        return Err(Error::Validation(format!(
            "discretized bath misses target reorganization energy by {:.3e}",
            out.residual
        )));
    }
    Ok(out)
}

/// Exact thermal state and the spectrum it came from.
#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub result: CoherenceResult,
    pub eigenvalues: Vec<f64>,
    pub dimension: usize,
    /// Reduced density matrix in the site basis.
    pub site_density: DMatrix<f64>,
}

fn dimension(n_sites: usize, n_modes: usize, levels: usize, cap: usize) -> Result<usize> {
    let cap_err = |dim: u128| Error::DimensionCap { dimension: dim, cap, n_sites, n_modes, fock_levels: levels };
    let mut dim: u128 = n_sites as u128;
    for _ in 0..n_modes {
        dim = dim.checked_mul(levels as u128).ok_or_else(|| cap_err(u128::MAX))?;
        if dim > cap as u128 {
            // keep multiplying for an honest diagnostic, saturating on overflow
            let rest = (0..n_modes).fold(n_sites as u128, |d, _| d.saturating_mul(levels as u128));
            return Err(cap_err(rest));
        }
    }
    Ok(dim as usize)
}

/// Dense Hamiltonian on `sites ⊗ Fock(M)^K`, index `site * M^K + fock` with
/// the first mode varying slowest.
pub fn assemble_hamiltonian(sys: &SiteSystem, dbath: &DiscretizedBath, levels: usize, cap: usize) -> Result<Mat<f64>> {
    let ns = sys.n_sites();
    let nm = dbath.modes.len();
    if let Some(m) = dbath.modes.iter().find(|m| m.alpha.len() != ns) {
        return Err(Error::Validation(format!("mode at {} cm^-1 couples {} sites, expected {ns}", m.freq, m.alpha.len())));
    }
    let dim = dimension(ns, nm, levels, cap)?;
    let fock = dim / ns;
    let h_e = sys.excited_hamiltonian();
    let mut strides = vec![1usize; nm];
    for k in (0..nm.saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * levels;
    }
    let occupation = |f: usize, k: usize| (f / strides[k]) % levels;
    let mut h = Mat::<f64>::zeros(dim, dim);
    for f in 0..fock {
        let bath_energy: f64 = (0..nm).map(|k| dbath.modes[k].freq * occupation(f, k) as f64).sum();
        for n in 0..ns {
            let i = n * fock + f;
            h.write(i, i, h_e[(n, n)] + bath_energy);
            for m in 0..ns {
                if m != n && h_e[(n, m)] != 0.0 {
                    h.write(i, m * fock + f, h_e[(n, m)]);
                }
            }
        }
        for (k, mode) in dbath.modes.iter().enumerate() {
            let occ = occupation(f, k);
            if occ + 1 >= levels {
                continue;
            }
            // <occ+1| (a + a†) |occ> = sqrt(occ+1)
            let amp = ((occ + 1) as f64 / (2.0 * mode.freq)).sqrt();
            let g = f + strides[k];
            for n in 0..ns {
                let v = mode.alpha[n] * amp;
                if v != 0.0 {
                    h.write(n * fock + g, n * fock + f, v);
                    h.write(n * fock + f, n * fock + g, v);
                }
            }
        }
    }
    Ok(h)
}

/// Full thermal state, reduced onto the sites and rotated to the exciton basis.
pub fn solve(sys: &SiteSystem, dbath: &DiscretizedBath, cfg: &OracleConfig, th: &Thermo) -> Result<OracleSolution> {
    cfg.validate()?;
    let ns = sys.n_sites();
    let levels = cfg.fock_levels;
    let h = assemble_hamiltonian(sys, dbath, levels, cfg.dimension_cap)?;
    let dim = h.nrows();
    let fock = dim / ns;
    let evd = h.selfadjoint_eigendecomposition(Side::Lower);
    let s = evd.s().column_vector();
    let u = evd.u();
    let eigenvalues: Vec<f64> = (0..dim).map(|i| s.read(i)).collect();
    if eigenvalues.iter().any(|x| !x.is_finite()) {
        return Err(Error::Eigendecomposition { dimension: dim, reason: "non-finite eigenvalue".into() });
    }
    let ground = eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = eigenvalues.iter().map(|e| (-th.beta * (e - ground)).exp()).collect();
    let total: f64 = weights.iter().sum();

    let nm = dbath.modes.len();
    let top_level = |f: usize| {
        let mut r = f;
        for _ in 0..nm {
            if r % levels == levels - 1 {
                return true;
            }
            r /= levels;
        }
        false
    };

    let mut rho = DMatrix::<f64>::zeros(ns, ns);
    let mut truncation = 0.0;
    for (i, w) in weights.iter().enumerate() {
        let w = w / total;
        if w < 1e-300 {
            continue;
        }
        let col = u.col(i);
        for a in 0..ns {
            for b in a..ns {
                let mut acc = 0.0;
                for f in 0..fock {
                    acc += col.read(a * fock + f) * col.read(b * fock + f);
                }
                rho[(a, b)] += w * acc;
            }
        }
        if nm > 0 {
            let mut top = 0.0;
            for a in 0..ns {
                for f in (0..fock).filter(|&f| top_level(f)) {
                    top += col.read(a * fock + f).powi(2);
                }
            }
            truncation += w * top;
        }
    }
    for a in 0..ns {
        for b in 0..a {
            rho[(a, b)] = rho[(b, a)];
        }
    }
    let trace = rho.trace();
    rho /= trace;
    let basis = diagonalize_excited(sys)?;
    let c = basis.to_exciton(&rho);
    if c.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("oracle density matrix at {} K", th.temperature_k)));
    }
    let result = CoherenceResult::new(Method::Oracle, c, true, truncation)
        .with_meta("dimension", dim)
        .with_meta("modes", nm)
        .with_meta("fock_levels", levels)
        .with_meta("tail_fraction", dbath.tail_fraction);
    Ok(OracleSolution { result, eigenvalues, dimension: dim, site_density: rho })
}

/// Exact coherences for an already discretized bath.
pub fn exact_coherences(sys: &SiteSystem, dbath: &DiscretizedBath, cfg: &OracleConfig, th: &Thermo) -> Result<CoherenceResult> {
    solve(sys, dbath, cfg, th).map(|s| s.result)
}

/// Discretizes `bath` with `cfg` and solves.
pub fn oracle_coherence(sys: &SiteSystem, bath: &BathSpec, cfg: &OracleConfig, th: &Thermo) -> Result<CoherenceResult> {
    exact_coherences(sys, &discretize_bath(bath, cfg)?, cfg, th)
}

/// Writes eigenvalues as a little-endian `u64` count followed by `f64` values.
pub fn write_eigenvalues(path: &Path, eigenvalues: &[f64]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    out.write_all(&(eigenvalues.len() as u64).to_le_bytes())?;
    for e in eigenvalues {
        out.write_all(&e.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

/// One `(K, M)` grid point of a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergencePoint {
    pub n_modes: usize,
    pub fock_levels: usize,
    pub c12: f64,
    /// Change from the previous grid point (`None` for the first).
    pub difference: Option<f64>,
}

/// `C_12` over a sequence of `(K, M)` settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub points: Vec<ConvergencePoint>,
    /// Last value in the sequence.
    pub extrapolated: f64,
    /// Magnitude of the last successive difference.
    pub uncertainty: f64,
}

/// Runs the oracle at every `(K, M)` in `grid` (in order) and reports
/// successive differences. Grid points run concurrently; the table keeps grid
/// order.
pub fn convergence_sweep(
    sys: &SiteSystem,
    bath: &BathSpec,
    th: &Thermo,
    grid: &[(usize, usize)],
    base: &OracleConfig,
) -> Result<ConvergenceTable> {
    if grid.is_empty() {
        return Err(Error::Validation("convergence grid is empty".into()));
    }
    let values: Vec<f64> = grid
        .par_iter()
        .map(|&(k, m)| {
            let cfg = OracleConfig { n_modes: k, fock_levels: m, ..*base };
            oracle_coherence(sys, bath, &cfg, th).map(|r| r.c12())
        })
        .collect::<Result<_>>()?;
    let points: Vec<ConvergencePoint> = grid
        .iter()
        .zip(&values)
        .enumerate()
        .map(|(i, (&(k, m), &c))| ConvergencePoint {
            n_modes: k,
            fock_levels: m,
            c12: c,
            difference: (i > 0).then(|| c - values[i - 1]),
        })
        .collect();
    let extrapolated = *values.last().expect("grid is non-empty");
    let uncertainty = points.last().and_then(|p| p.difference).map_or(0.0, f64::abs);
    Ok(ConvergenceTable { points, extrapolated, uncertainty })
}
