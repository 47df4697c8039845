//! Domain types shared by every coherence method.
//!
//! Units: hbar = 1 and every frequency or energy is a wavenumber in cm^-1, so a
//! quantity quoted as `2 pi c * 200 cm^-1` is stored as `200.0`. Temperatures are
//! kelvin and are converted with [`K_B_CM`].

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg;

/// Boltzmann constant in cm^-1 / K.
pub const K_B_CM: f64 = 0.695_034_8;

/// Mean site frequency used when a configuration does not provide one.
pub const DEFAULT_OMEGA_BAR: f64 = 16_000.0;

/// Excitonic sites in the local basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteSystem {
    omega: Vec<f64>,
    coupling: DMatrix<f64>,
}

impl SiteSystem {
    pub fn new(omega: Vec<f64>, coupling: DMatrix<f64>) -> Result<Self> {
        let n = omega.len();
        if n < 2 {
            return Err(Error::Validation(format!("need at least 2 sites, got {n}")));
        }
        if coupling.nrows() != n || coupling.ncols() != n {
            return Err(Error::Validation(format!(
                "coupling is {}x{}, expected {n}x{n}",
                coupling.nrows(),
                coupling.ncols()
            )));
        }
        if omega.iter().chain(coupling.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Validation("non-finite site frequency or coupling".into()));
        }
        for i in 0..n {
            if coupling[(i, i)] != 0.0 {
                return Err(Error::Validation(format!(
                    "coupling diagonal ({i},{i}) = {} must be exactly zero",
                    coupling[(i, i)]
                )));
            }
        }
        let scale = linalg::max_abs(&coupling).max(1.0);
        let asym = linalg::asymmetry(&coupling);
        if asym > 1e-12 * scale {
            return Err(Error::Validation(format!("coupling matrix is not symmetric (max |V_nm - V_mn| = {asym:e})")));
        }
        Ok(Self { omega, coupling })
    }

    /// Dimer with `omega_1 = omega_bar - delta/2`, `omega_2 = omega_bar + delta/2`.
    pub fn dimer(omega_bar: f64, delta: f64, v12: f64) -> Result<Self> {
        let coupling = DMatrix::from_row_slice(2, 2, &[0.0, v12, v12, 0.0]);
        Self::new(vec![omega_bar - 0.5 * delta, omega_bar + 0.5 * delta], coupling)
    }

    pub fn n_sites(&self) -> usize {
        self.omega.len()
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn coupling(&self) -> &DMatrix<f64> {
        &self.coupling
    }

    pub fn omega_bar(&self) -> f64 {
        self.omega.iter().sum::<f64>() / self.omega.len() as f64
    }

    /// `H_e = H_S - omega_bar` in the site basis.
    pub fn excited_hamiltonian(&self) -> DMatrix<f64> {
        let wbar = self.omega_bar();
        let mut h = self.coupling.clone();
        for (i, w) in self.omega.iter().enumerate() {
            h[(i, i)] = w - wbar;
        }
        h
    }
}

/// Frequency profile of the bath.
#[derive(Debug, Clone, PartialEq)]
pub enum BathShape {
    /// `J(Omega) ∝ (Omega/cutoff) exp(-Omega/cutoff)`.
    Ohmic { cutoff: f64 },
    /// Explicit modes `(frequency, relative weight)`; the weights share out each
    /// reorganization-energy entry.
    Discrete { modes: Vec<(f64, f64)> },
}

impl BathShape {
    /// Largest characteristic bath frequency (cutoff or top mode).
    pub fn frequency_scale(&self) -> f64 {
        match self {
            BathShape::Ohmic { cutoff } => *cutoff,
            BathShape::Discrete { modes } => modes.iter().fold(0.0_f64, |a, m| a.max(m.0)),
        }
    }

    /// Spectral profile per unit reorganization energy, normalized so that
    /// `∫ j(Ω)/Ω dΩ = 1` on the positive axis. Only defined for Ohmic baths.
    pub fn ohmic_profile(cutoff: f64, omega: f64) -> f64 {
        (omega / cutoff) * (-omega / cutoff).exp()
    }
}

/// Per-site bath coupling strengths plus site-site correlation.
#[derive(Debug, Clone, PartialEq)]
pub struct BathSpec {
    pub shape: BathShape,
    pub reorg_diag: Vec<f64>,
    pub correlation: DMatrix<f64>,
}

impl BathSpec {
    pub fn new(shape: BathShape, reorg_diag: Vec<f64>, correlation: DMatrix<f64>) -> Result<Self> {
        let bath = Self { shape, reorg_diag, correlation };
        bath.validate()?;
        Ok(bath)
    }

    /// Independent baths (`c_mn = 0` for `m != n`).
    pub fn uncorrelated(shape: BathShape, reorg_diag: Vec<f64>) -> Result<Self> {
        let n = reorg_diag.len();
        Self::new(shape, reorg_diag, DMatrix::identity(n, n))
    }

    /// The same correlation coefficient `c` between every pair of sites.
    pub fn uniform_correlation(shape: BathShape, reorg_diag: Vec<f64>, c: f64) -> Result<Self> {
        let n = reorg_diag.len();
        let corr = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { c });
        Self::new(shape, reorg_diag, corr)
    }

    pub fn n_sites(&self) -> usize {
        self.reorg_diag.len()
    }

    fn validate(&self) -> Result<()> {
        match &self.shape {
            BathShape::Ohmic { cutoff } => {
                if !(cutoff.is_finite() && *cutoff > 0.0) {
                    return Err(Error::Validation(format!("Ohmic cutoff must be positive, got {cutoff}")));
                }
            }
            BathShape::Discrete { modes } => {
                if modes.is_empty() {
                    return Err(Error::Validation("discrete bath needs at least one mode".into()));
                }
                for (k, &(w, weight)) in modes.iter().enumerate() {
                    if !(w.is_finite() && w > 0.0) {
                        return Err(Error::Validation(format!("mode {k}: frequency {w} must be positive")));
                    }
                    if !(weight.is_finite() && weight >= 0.0) {
                        return Err(Error::Validation(format!("mode {k}: weight {weight} must be non-negative")));
                    }
                }
                if modes.iter().map(|m| m.1).sum::<f64>() <= 0.0 {
                    return Err(Error::Validation("discrete mode weights sum to zero".into()));
                }
            }
        }
        let n = self.reorg_diag.len();
        if n == 0 {
            return Err(Error::Validation("bath has no sites".into()));
        }
        if let Some(e) = self.reorg_diag.iter().find(|e| !(e.is_finite() && **e >= 0.0)) {
            return Err(Error::Validation(format!("reorganization energy {e} must be non-negative")));
        }
        if self.correlation.nrows() != n || self.correlation.ncols() != n {
            return Err(Error::Validation(format!("correlation matrix must be {n}x{n}")));
        }
        for i in 0..n {
            if self.correlation[(i, i)] != 1.0 {
                return Err(Error::Validation(format!("correlation diagonal ({i},{i}) must be 1")));
            }
            for j in 0..n {
                let c = self.correlation[(i, j)];
                if !(c.is_finite() && c.abs() <= 1.0) {
                    return Err(Error::Validation(format!("correlation ({i},{j}) = {c} outside [-1, 1]")));
                }
            }
        }
        if linalg::asymmetry(&self.correlation) > 1e-12 {
            return Err(Error::Validation("correlation matrix is not symmetric".into()));
        }
        linalg::ensure_psd(&self.reorg_from_correlation(), 1e-12)
    }

    fn reorg_from_correlation(&self) -> DMatrix<f64> {
        let n = self.reorg_diag.len();
        DMatrix::from_fn(n, n, |i, j| {
            self.correlation[(i, j)] * (self.reorg_diag[i] * self.reorg_diag[j]).sqrt()
        })
    }

    /// Copy with every reorganization energy multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.shape.clone(),
            self.reorg_diag.iter().map(|e| e * factor).collect(),
            self.correlation.clone(),
        )
    }
}

/// `E^r_mn = c_mn sqrt(E^r_mm E^r_nn)`; rejects a non-PSD result.
pub fn reorganization_matrix(bath: &BathSpec) -> Result<DMatrix<f64>> {
    let e = bath.reorg_from_correlation();
    linalg::ensure_psd(&e, 1e-12)?;
    Ok(e)
}

/// Eigenbasis of the excited-state system Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcitonBasis {
    /// Row `mu` holds the site amplitudes of `|mu>`.
    pub u: DMatrix<f64>,
    /// Eigenfrequencies, ascending.
    pub omega_mu: Vec<f64>,
    /// `omega_mu - omega_bar`.
    pub delta_omega_mu: Vec<f64>,
    /// Mixing angle of a dimer, `u = [[cos, -sin], [sin, cos]]`.
    pub phi: Option<f64>,
}

impl ExcitonBasis {
    pub fn n_states(&self) -> usize {
        self.omega_mu.len()
    }

    /// `u M u^T`: site basis to exciton basis.
    pub fn to_exciton(&self, site: &DMatrix<f64>) -> DMatrix<f64> {
        &self.u * site * self.u.transpose()
    }

    /// `u^T M u`: exciton basis to site basis.
    pub fn to_site(&self, exciton: &DMatrix<f64>) -> DMatrix<f64> {
        self.u.transpose() * exciton * &self.u
    }

    /// Dimer gap `omega_2 - omega_1`.
    pub fn splitting(&self) -> f64 {
        self.omega_mu[self.omega_mu.len() - 1] - self.omega_mu[0]
    }
}

/// Diagonalizes `H_e`.
///
/// Dimers use the closed-form rotation `tan 2phi = 2V/Delta` with
/// `Delta = omega_2 - omega_1`; larger systems use a dense symmetric
/// eigensolver with each row signed so its largest-magnitude entry is positive.
/// For a dimer with `Delta >= 0` both conventions coincide.
pub fn diagonalize_excited(sys: &SiteSystem) -> Result<ExcitonBasis> {
    let wbar = sys.omega_bar();
    if sys.n_sites() == 2 {
        let delta = sys.omega[1] - sys.omega[0];
        let v = sys.coupling[(0, 1)];
        // +0.0 folds a signed zero coupling onto the positive branch
        let phi = 0.5 * (2.0 * v + 0.0).atan2(delta);
        let (s, c) = phi.sin_cos();
        let u = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let half_gap = 0.5 * delta.hypot(2.0 * v);
        let mean = 0.5 * (sys.omega[0] + sys.omega[1]);
        let omega_mu = vec![mean - half_gap, mean + half_gap];
        let delta_omega_mu = omega_mu.iter().map(|w| w - wbar).collect();
        return Ok(ExcitonBasis { u, omega_mu, delta_omega_mu, phi: Some(phi) });
    }

    let h = sys.excited_hamiltonian();
    let eig = SymmetricEigen::new(h);
    let n = sys.n_sites();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut u = DMatrix::zeros(n, n);
    for (row, &k) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(k);
        let mut lead = 0;
        for i in 1..n {
            if col[i].abs() > col[lead].abs() + 1e-14 {
                lead = i;
            }
        }
        let sign = if col[lead] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            u[(row, i)] = sign * col[i];
        }
    }
    let delta_omega_mu: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let omega_mu = delta_omega_mu.iter().map(|d| d + wbar).collect();
    Ok(ExcitonBasis { u, omega_mu, delta_omega_mu, phi: None })
}

/// Temperature and the matching inverse thermal energy in (cm^-1)^-1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thermo {
    pub temperature_k: f64,
    pub beta: f64,
}

impl Thermo {
    pub fn new(temperature_k: f64) -> Result<Self> {
        if !(temperature_k.is_finite() && temperature_k > 0.0) {
            return Err(Error::Validation(format!("temperature must be positive, got {temperature_k} K")));
        }
        Ok(Self { temperature_k, beta: 1.0 / (K_B_CM * temperature_k) })
    }

    /// `k_B T` in cm^-1.
    pub fn thermal_energy(&self) -> f64 {
        K_B_CM * self.temperature_k
    }
}

/// Zeroth-order excited-state Boltzmann populations.
#[derive(Debug, Clone, PartialEq)]
pub struct Sigma0 {
    pub populations: Vec<f64>,
    pub partition: f64,
    pub log_partition: f64,
}

/// `sigma_e^(0) = exp(-beta H_e)/Z_e^(0)` in the exciton basis.
pub fn sigma0_and_partition(basis: &ExcitonBasis, th: &Thermo) -> Sigma0 {
    let lowest = basis.delta_omega_mu.iter().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> =
        basis.delta_omega_mu.iter().map(|d| (-th.beta * (d - lowest)).exp()).collect();
    let total: f64 = weights.iter().sum();
    let log_partition = total.ln() - th.beta * lowest;
    Sigma0 {
        populations: weights.iter().map(|w| w / total).collect(),
        partition: log_partition.exp(),
        log_partition,
    }
}

/// Violations of the adiabatic and low-temperature separations.
#[derive(Debug, Clone, PartialEq)]
pub enum RegimeWarning {
    Adiabatic { scale: &'static str, value: f64, omega_bar: f64 },
    Thermal { thermal_energy: f64, omega_bar: f64 },
}

impl fmt::Display for RegimeWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegimeWarning::Adiabatic { scale, value, omega_bar } => write!(
                f,
                "adiabatic restriction: omega_bar = {omega_bar} cm^-1 is less than 10x {scale} = {value} cm^-1"
            ),
            RegimeWarning::Thermal { thermal_energy, omega_bar } => write!(
                f,
                "thermal restriction: omega_bar = {omega_bar} cm^-1 is less than 10x k_B T = {thermal_energy} cm^-1"
            ),
        }
    }
}

/// Checks `omega_bar >> |omega_mn|, |V_mn|, Omega, E^r` and `omega_bar >> k_B T`.
/// Never fails; the computations stay defined outside the regime.
pub fn validate_regime(sys: &SiteSystem, bath: &BathSpec, th: &Thermo) -> Vec<RegimeWarning> {
    let wbar = sys.omega_bar();
    let n = sys.n_sites();
    let mut max_split = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            max_split = max_split.max((sys.omega[i] - sys.omega[j]).abs());
        }
    }
    let reorg_max = bath
        .reorg_diag
        .iter()
        .fold(0.0_f64, |a, e| a.max(*e));
    let scales = [
        ("max |omega_mn|", max_split),
        ("max |V_mn|", linalg::max_abs(&sys.coupling)),
        ("bath frequency", bath.shape.frequency_scale()),
        ("max E^r", reorg_max),
    ];
    let mut warnings = Vec::new();
    if let Some((scale, value)) = scales
        .iter()
        .copied()
        .filter(|(_, v)| wbar < 10.0 * v)
        .max_by(|a, b| a.1.total_cmp(&b.1))
    {
        warnings.push(RegimeWarning::Adiabatic { scale, value, omega_bar: wbar });
    }
    if wbar < 10.0 * th.thermal_energy() {
        warnings.push(RegimeWarning::Thermal { thermal_energy: th.thermal_energy(), omega_bar: wbar });
    }
    warnings
}

/// Which route produced a coherence matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Classical,
    SemiclassicalExact,
    Semiclassical2,
    Quantum2,
    Hbar3,
    Oracle,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Classical,
        Method::SemiclassicalExact,
        Method::Semiclassical2,
        Method::Quantum2,
        Method::Hbar3,
        Method::Oracle,
    ];

    /// Short tag used in configs and CSV output.
    pub fn tag(self) -> &'static str {
        match self {
            Method::Classical => "classical",
            Method::SemiclassicalExact => "sc-exact",
            Method::Semiclassical2 => "sc-2",
            Method::Quantum2 => "q-2",
            Method::Hbar3 => "hbar3",
            Method::Oracle => "oracle",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.tag() == tag)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Exciton-basis coherence matrix produced by one method.
///
/// Off-diagonal entries are coherences. Diagonal entries are populations when
/// `has_populations` is set and zero otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceResult {
    pub method: Method,
    pub c_matrix: DMatrix<f64>,
    pub has_populations: bool,
    pub err_est: f64,
    pub meta: BTreeMap<String, String>,
}

impl CoherenceResult {
    pub fn new(method: Method, c_matrix: DMatrix<f64>, has_populations: bool, err_est: f64) -> Self {
        Self { method, c_matrix, has_populations, err_est, meta: BTreeMap::new() }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }

    pub fn n_states(&self) -> usize {
        self.c_matrix.nrows()
    }

    /// `C_12` (first two exciton states).
    pub fn c12(&self) -> f64 {
        self.c_matrix[(0, 1)]
    }

    pub fn populations(&self) -> Option<Vec<f64>> {
        self.has_populations
            .then(|| (0..self.n_states()).map(|i| self.c_matrix[(i, i)]).collect())
    }

    pub fn asymmetry(&self) -> f64 {
        linalg::asymmetry(&self.c_matrix)
    }

    pub fn is_finite(&self) -> bool {
        self.c_matrix.iter().all(|x| x.is_finite()) && self.err_est.is_finite()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn fig1_dimer() -> SiteSystem {
        SiteSystem::dimer(DEFAULT_OMEGA_BAR, 200.0, 200.0).unwrap()
    }

    #[test]
    fn dimer_angle_matches_closed_form() {
        let basis = diagonalize_excited(&fig1_dimer()).unwrap();
        let phi = basis.phi.unwrap();
        let golden = 2.0 / (1.0 + 5.0_f64.sqrt());
        assert_abs_diff_eq!(phi.tan(), golden, epsilon = 1e-14);
        assert_abs_diff_eq!(phi, 0.553_574_358_897_045_3, epsilon = 1e-12);
    }

    #[test]
    fn dimer_angle_matches_direct_eigenvectors() {
        let sys = fig1_dimer();
        let basis = diagonalize_excited(&sys).unwrap();
        let eig = SymmetricEigen::new(sys.excited_hamiltonian());
        let low = if eig.eigenvalues[0] < eig.eigenvalues[1] { 0 } else { 1 };
        let v = eig.eigenvectors.column(low);
        let sign = if v[0] < 0.0 { -1.0 } else { 1.0 };
        assert_abs_diff_eq!(sign * v[0], basis.u[(0, 0)], epsilon = 1e-12);
        assert_abs_diff_eq!(sign * v[1], basis.u[(0, 1)], epsilon = 1e-12);
    }

    #[test]
    fn uncoupled_dimer_is_identity() {
        let sys = SiteSystem::dimer(16000.0, 150.0, 0.0).unwrap();
        let basis = diagonalize_excited(&sys).unwrap();
        assert_eq!(basis.phi, Some(0.0));
        assert_eq!(basis.u, DMatrix::identity(2, 2));
    }

    #[test]
    fn symmetric_dimer_is_quarter_turn() {
        let sys = SiteSystem::dimer(16000.0, 0.0, 80.0).unwrap();
        let basis = diagonalize_excited(&sys).unwrap();
        assert_abs_diff_eq!(basis.phi.unwrap(), std::f64::consts::FRAC_PI_4, epsilon = 1e-15);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(basis.u[(0, 0)], r, epsilon = 1e-15);
        assert_abs_diff_eq!(basis.u[(0, 1)], -r, epsilon = 1e-15);
        assert_abs_diff_eq!(basis.u[(1, 0)], r, epsilon = 1e-15);
    }

    #[test]
    fn inverted_uncoupled_dimer_orders_eigenvalues() {
        let sys = SiteSystem::dimer(16000.0, -100.0, 0.0).unwrap();
        let basis = diagonalize_excited(&sys).unwrap();
        assert!(basis.omega_mu[0] < basis.omega_mu[1]);
        let d = basis.to_exciton(&sys.excited_hamiltonian());
        assert_abs_diff_eq!(d[(0, 0)], -50.0, epsilon = 1e-12);
    }

    #[test]
    fn trimer_basis_properties() {
        let v = DMatrix::from_row_slice(3, 3, &[0.0, 80.0, -30.0, 80.0, 0.0, 55.0, -30.0, 55.0, 0.0]);
        let sys = SiteSystem::new(vec![15900.0, 16050.0, 16120.0], v).unwrap();
        let basis = diagonalize_excited(&sys).unwrap();
        let id = &basis.u * basis.u.transpose();
        assert!((id - DMatrix::identity(3, 3)).abs().max() < 1e-12);
        let h = sys.excited_hamiltonian();
        let d = basis.to_exciton(&h);
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!(d[(i, j)].abs() < 1e-10 * h.norm());
                }
            }
        }
        assert!(basis.omega_mu.windows(2).all(|w| w[0] <= w[1]));
        for row in 0..3 {
            let r = basis.u.row(row);
            let lead = r.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap();
            assert!(lead > 0.0);
        }
        assert!((basis.to_site(&d) - &h).abs().max() < 1e-12 * h.norm().max(1.0));
    }

    #[test]
    fn rejects_bad_systems() {
        let asym = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 0.0]);
        assert!(matches!(SiteSystem::new(vec![1.0, 2.0], asym), Err(Error::Validation(_))));
        let diag = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(SiteSystem::new(vec![1.0, 2.0], diag).is_err());
        assert!(SiteSystem::new(vec![1.0], DMatrix::zeros(1, 1)).is_err());
    }

    #[test]
    fn reorganization_examples() {
        let ohmic = BathShape::Ohmic { cutoff: 50.0 };
        let fig1a = BathSpec::uncorrelated(ohmic.clone(), vec![100.0, 100.0]).unwrap();
        let e = reorganization_matrix(&fig1a).unwrap();
        assert_eq!(e, DMatrix::from_row_slice(2, 2, &[100.0, 0.0, 0.0, 100.0]));

        let corr = BathSpec::uniform_correlation(ohmic, vec![40.0, 40.0], 1.0).unwrap();
        let e = reorganization_matrix(&corr).unwrap();
        assert!(e.iter().all(|x| (*x - 40.0).abs() < 1e-12));
    }

    #[test]
    fn rejects_non_psd_correlation() {
        let corr = DMatrix::from_row_slice(3, 3, &[1.0, 0.9, -0.9, 0.9, 1.0, 0.9, -0.9, 0.9, 1.0]);
        let err = BathSpec::new(BathShape::Ohmic { cutoff: 50.0 }, vec![10.0, 10.0, 10.0], corr).unwrap_err();
        match err {
            Error::NotPositiveSemidefinite { eigenvalue, .. } => assert!(eigenvalue < 0.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sigma0_limits() {
        let basis = diagonalize_excited(&fig1_dimer()).unwrap();
        let hot = sigma0_and_partition(&basis, &Thermo::new(1e12).unwrap());
        assert_abs_diff_eq!(hot.partition, 2.0, epsilon = 1e-8);
        assert_abs_diff_eq!(hot.populations[0], 0.5, epsilon = 1e-8);

        let th = Thermo::new(300.0).unwrap();
        let s = sigma0_and_partition(&basis, &th);
        let half = 0.5 * th.beta * basis.splitting();
        assert_abs_diff_eq!(s.partition, 2.0 * half.cosh(), epsilon = 1e-13);
        assert_abs_diff_eq!(s.populations.iter().sum::<f64>(), 1.0, epsilon = 1e-15);

        let cold = sigma0_and_partition(&basis, &Thermo::new(1e-3).unwrap());
        assert_eq!(cold.populations[0], 1.0);
        assert_eq!(cold.populations[1], 0.0);
        assert!(cold.log_partition.is_finite());
    }

    #[test]
    fn thermo_consistency() {
        let th = Thermo::new(300.0).unwrap();
        assert_abs_diff_eq!(th.beta * K_B_CM * th.temperature_k, 1.0, epsilon = 1e-12);
        assert!(Thermo::new(0.0).is_err());
        assert!(Thermo::new(-4.0).is_err());
    }

    #[test]
    fn regime_warnings() {
        let bath = BathSpec::uncorrelated(BathShape::Ohmic { cutoff: 50.0 }, vec![100.0, 100.0]).unwrap();
        let th = Thermo::new(300.0).unwrap();
        assert!(validate_regime(&fig1_dimer(), &bath, &th).is_empty());

        let low = SiteSystem::dimer(500.0, 200.0, 20.0).unwrap();
        let w = validate_regime(&low, &bath, &th);
        assert!(w.iter().any(|w| matches!(w, RegimeWarning::Adiabatic { .. })));

        let hot = Thermo::new(30_000.0).unwrap();
        let w = validate_regime(&fig1_dimer(), &bath, &hot);
        assert_eq!(w.len(), 1);
        assert!(matches!(w[0], RegimeWarning::Thermal { .. }));
    }

    #[test]
    fn method_tags_round_trip() {
        for m in Method::ALL {
            assert_eq!(Method::from_tag(m.tag()), Some(m));
        }
        assert_eq!(Method::from_tag("nope"), None);
    }
}
