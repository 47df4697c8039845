//! Second-order imaginary-time expansion of the excited-state reduced density
//! matrix.

use nalgebra::{DMatrix, Matrix3};

use crate::error::{Error, Result};
use crate::model::{
    diagonalize_excited, reorganization_matrix, sigma0_and_partition, BathShape, BathSpec, CoherenceResult,
    ExcitonBasis, Method, SiteSystem, Thermo,
};
use crate::oracle::DiscretizedBath;
use crate::quadrature::{integrate_adaptive, AdaptiveOptions};

/// Width in cm^-1 of the window around a removable pole reported as regularized.
pub const DEFAULT_DELTA_REG: f64 = 1e-6;

/// Ohmic integrals run over `(0, OHMIC_RANGE * cutoff]`.
pub const OHMIC_RANGE: f64 = 40.0;

/// `1/(exp(beta Omega) - 1)`, using `n(-Omega) = -(1 + n(Omega))` below zero.
pub fn bose_occupation(omega: f64, th: &Thermo) -> Result<f64> {
    if omega == 0.0 || !omega.is_finite() {
        return Err(Error::Domain(format!("Bose occupation undefined at Omega = {omega}")));
    }
    Ok(occupation(th.beta * omega))
}

fn occupation(x: f64) -> f64 {
    if x > 0.0 {
        1.0 / x.exp_m1()
    } else {
        -1.0 - 1.0 / (-x).exp_m1()
    }
}

/// Second divided difference of `exp` at `(z0, z1, z2)`, any coincidences allowed.
///
/// Read off the corner of `exp` of the bidiagonal matrix with `z` on the
/// diagonal and ones above it. Returns `(d, s)` with the value equal to `d e^s`.
pub fn exp_divided_difference(z0: f64, z1: f64, z2: f64) -> (f64, f64) {
    let s = z0.max(z1).max(z2);
    let a = Matrix3::new(z0 - s, 1.0, 0.0, 0.0, z1 - s, 1.0, 0.0, 0.0, z2 - s);
    let norm = (z0 - s).abs().max((z1 - s).abs()).max((z2 - s).abs()) + 1.0;
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = a / 2f64.powi(squarings);
    let mut term = Matrix3::identity();
    let mut sum = Matrix3::identity();
    for k in 1..=24 {
        term = term * scaled / k as f64;
        sum += term;
    }
    for _ in 0..squarings {
        sum = sum * sum;
    }
    (sum[(0, 2)], s)
}

/// Kernel value with a flag for the removable-singularity branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelEval {
    pub value: f64,
    pub regularized: bool,
}

/// Frequencies entering one `(mu, nu, kappa)` kernel.
#[derive(Debug, Clone, Copy)]
struct KernelSite {
    w_mu_nu: f64,
    w_mu_kappa: f64,
    w_nu_kappa: f64,
}

impl KernelSite {
    fn new(basis: &ExcitonBasis, kappa: usize, mu: usize, nu: usize) -> Self {
        let w = &basis.delta_omega_mu;
        Self { w_mu_nu: w[mu] - w[nu], w_mu_kappa: w[mu] - w[kappa], w_nu_kappa: w[nu] - w[kappa] }
    }

    fn near_pole(&self, omega: f64, delta_reg: f64) -> bool {
        self.w_mu_nu.abs() < delta_reg
            || (omega + self.w_mu_kappa).abs() < delta_reg
            || (omega + self.w_nu_kappa).abs() < delta_reg
    }

    /// The three-term form loses digits once the divided-difference nodes
    /// `beta w_mu_nu`, `beta (Omega + w_mu_kappa)` and 0 come within unit
    /// distance of each other.
    fn cancels(&self, omega: f64, beta: f64) -> bool {
        let (a, b) = (beta * self.w_mu_nu, beta * (omega + self.w_mu_kappa));
        a.abs().min(b.abs()).min((a - b).abs()) < 1.0
    }
}

/// `K_kappa^{mu nu}(Omega)`.
pub fn kernel(omega: f64, kappa: usize, mu: usize, nu: usize, basis: &ExcitonBasis, th: &Thermo) -> KernelEval {
    kernel_with(omega, kappa, mu, nu, basis, th, DEFAULT_DELTA_REG)
}

/// [`kernel`] with an explicit regularization width.
pub fn kernel_with(
    omega: f64,
    kappa: usize,
    mu: usize,
    nu: usize,
    basis: &ExcitonBasis,
    th: &Thermo,
    delta_reg: f64,
) -> KernelEval {
    let k = KernelSite::new(basis, kappa, mu, nu);
    let b = th.beta;
    let regularized = k.near_pole(omega, delta_reg);
    if regularized || k.cancels(omega, b) {
        let (d, s) = exp_divided_difference(b * k.w_mu_nu, b * (omega + k.w_mu_kappa), 0.0);
        let value = b * b * d * (s - 0.5 * b * k.w_mu_nu).exp();
        return KernelEval { value, regularized };
    }
    let dm = omega + k.w_mu_kappa;
    let dn = omega + k.w_nu_kappa;
    let w = &basis.delta_omega_mu;
    let value = (-0.5 * b * k.w_mu_nu).exp() / (k.w_mu_nu * dm) - (0.5 * b * k.w_mu_nu).exp() / (k.w_mu_nu * dn)
        + (b * (omega - w[kappa] + 0.5 * (w[mu] + w[nu]))).exp() / (dn * dm);
    KernelEval { value, regularized }
}

/// `n(Omega) sqrt(p_mu p_nu) K(Omega)` with the Boltzmann factors absorbed into
/// populations so nothing overflows at low temperature.
struct WeightedKernel {
    site: KernelSite,
    beta: f64,
    ln_p_mu: f64,
    p_mu: f64,
    p_nu: f64,
    p_kappa: f64,
    delta_reg: f64,
}

impl WeightedKernel {
    fn new(basis: &ExcitonBasis, th: &Thermo, ln_p: &[f64], kappa: usize, mu: usize, nu: usize, delta_reg: f64) -> Self {
        Self {
            site: KernelSite::new(basis, kappa, mu, nu),
            beta: th.beta,
            ln_p_mu: ln_p[mu],
            p_mu: ln_p[mu].exp(),
            p_nu: ln_p[nu].exp(),
            p_kappa: ln_p[kappa].exp(),
            delta_reg,
        }
    }

    fn eval(&self, omega: f64) -> f64 {
        let n = occupation(self.beta * omega);
        let k = &self.site;
        if k.near_pole(omega, self.delta_reg) || k.cancels(omega, self.beta) {
            let b = self.beta;
            let (d, s) = exp_divided_difference(b * k.w_mu_nu, b * (omega + k.w_mu_kappa), 0.0);
            return n * b * b * d * (s + self.ln_p_mu).exp();
        }
        let dm = omega + k.w_mu_kappa;
        let dn = omega + k.w_nu_kappa;
        n * (self.p_mu / (k.w_mu_nu * dm) - self.p_nu / (k.w_mu_nu * dn)) + (1.0 + n) * self.p_kappa / (dn * dm)
    }

    /// Integrand folded onto positive frequencies, per unit spectral density.
    fn folded(&self, omega: f64) -> f64 {
        self.eval(omega) - self.eval(-omega)
    }
}

/// One additive piece of the spectral density `J_mn`.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectralComponent {
    /// `J_mn = reorg_mn (Omega/cutoff) exp(-Omega/cutoff)`.
    Ohmic { cutoff: f64, reorg: DMatrix<f64> },
    /// `J_mn = reorg_mn Omega [delta(Omega - freq) - delta(Omega + freq)]`.
    Mode { freq: f64, reorg: DMatrix<f64> },
}

impl SpectralComponent {
    fn reorg(&self) -> &DMatrix<f64> {
        match self {
            SpectralComponent::Ohmic { reorg, .. } | SpectralComponent::Mode { reorg, .. } => reorg,
        }
    }
}

/// Splits a bath into spectral components sharing its reorganization matrix.
pub fn spectral_components(bath: &BathSpec) -> Result<Vec<SpectralComponent>> {
    let e = reorganization_matrix(bath)?;
    Ok(match &bath.shape {
        BathShape::Ohmic { cutoff } => vec![SpectralComponent::Ohmic { cutoff: *cutoff, reorg: e }],
        BathShape::Discrete { modes } => {
            let total: f64 = modes.iter().map(|m| m.1).sum();
            modes
                .iter()
                .filter(|m| m.1 > 0.0)
                .map(|&(freq, w)| SpectralComponent::Mode { freq, reorg: &e * (w / total) })
                .collect()
        }
    })
}

/// One component per mode of a discretized bath, `E_k = alpha_k alpha_k^T / (2 Omega_k^2)`.
pub fn discretized_components(dbath: &DiscretizedBath) -> Vec<SpectralComponent> {
    dbath
        .modes
        .iter()
        .map(|m| SpectralComponent::Mode { freq: m.freq, reorg: m.reorganization() })
        .collect()
}

/// Numerical settings for the second-order evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PerturbativeOptions {
    /// Regularization width in cm^-1; `None` uses [`DEFAULT_DELTA_REG`].
    pub delta_reg: Option<f64>,
    pub quadrature: AdaptiveOptions,
}

/// `∫ dOmega j(Omega) n(Omega) sqrt(p_mu p_nu) K(Omega)` over the real line for
/// one component with unit reorganization energy.
fn component_integral(
    comp: &SpectralComponent,
    wk: &WeightedKernel,
    opts: &PerturbativeOptions,
) -> Result<(f64, f64)> {
    match comp {
        SpectralComponent::Mode { freq, .. } => Ok((freq * wk.folded(*freq), 0.0)),
        SpectralComponent::Ohmic { cutoff, .. } => {
            let upper = OHMIC_RANGE * cutoff;
            let f = |w: f64| BathShape::ohmic_profile(*cutoff, w) * wk.folded(w);
            let k = &wk.site;
            let mut breaks = vec![k.w_mu_kappa.abs(), k.w_nu_kappa.abs()];
            breaks.extend([1.0, 4.0, 16.0].map(|m| m * cutoff));
            let r = integrate_adaptive(f, 0.0, upper, &breaks, opts.quadrature)?;
            // beyond the range the integrand decays at least as fast as exp(-Omega/cutoff)
            let tail = 2.0 * f(upper).abs() * cutoff;
            Ok((r.value, r.err_est + tail))
        }
    }
}

/// `u_mu m u_kappa m E_mn u_kappa n u_nu n` summed over sites.
fn contracted_weight(u: &DMatrix<f64>, e: &DMatrix<f64>, mu: usize, nu: usize, kappa: usize) -> f64 {
    let n = u.ncols();
    let mut s = 0.0;
    for m in 0..n {
        let left = u[(mu, m)] * u[(kappa, m)];
        if left == 0.0 {
            continue;
        }
        for k in 0..n {
            s += left * e[(m, k)] * u[(kappa, k)] * u[(nu, k)];
        }
    }
    s
}

fn log_populations(basis: &ExcitonBasis, th: &Thermo) -> Vec<f64> {
    let z = sigma0_and_partition(basis, th);
    basis.delta_omega_mu.iter().map(|d| -th.beta * d - z.log_partition).collect()
}

/// `sigma_e^(2)` as a full matrix plus its accumulated error estimate.
pub fn sigma2(
    basis: &ExcitonBasis,
    comps: &[SpectralComponent],
    th: &Thermo,
    opts: &PerturbativeOptions,
) -> Result<(DMatrix<f64>, f64)> {
    let n = basis.n_states();
    for c in comps {
        if c.reorg().nrows() != n || c.reorg().ncols() != n {
            return Err(Error::Validation(format!("spectral component is not {n}x{n}")));
        }
    }
    let delta_reg = opts.delta_reg.unwrap_or(DEFAULT_DELTA_REG);
    let ln_p = log_populations(basis, th);
    let mut s2 = DMatrix::zeros(n, n);
    let mut err = 0.0;
    for mu in 0..n {
        for nu in 0..n {
            let mut acc = 0.0;
            for kappa in 0..n {
                let wk = WeightedKernel::new(basis, th, &ln_p, kappa, mu, nu, delta_reg);
                for comp in comps {
                    let w = contracted_weight(&basis.u, comp.reorg(), mu, nu, kappa);
                    if w == 0.0 {
                        continue;
                    }
                    let (value, e) = component_integral(comp, &wk, opts)?;
                    acc += w * value;
                    err += w.abs() * e;
                }
            }
            s2[(mu, nu)] = acc;
        }
    }
    if s2.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("second-order density matrix at {} K", th.temperature_k)));
    }
    Ok((s2, err))
}

/// Coherences `(sigma_e^(2))_{mu nu}` with populations
/// `sigma_e^(0)(1 - Z_e^(2)) + sigma_e^(2)` on the diagonal.
pub fn coherence_from_components(
    basis: &ExcitonBasis,
    comps: &[SpectralComponent],
    th: &Thermo,
    opts: &PerturbativeOptions,
) -> Result<CoherenceResult> {
    let (s2, err) = sigma2(basis, comps, th, opts)?;
    let sigma0 = sigma0_and_partition(basis, th);
    let z2 = s2.trace();
    let mut c = s2;
    for (i, p) in sigma0.populations.iter().enumerate() {
        c[(i, i)] += p * (1.0 - z2);
    }
    Ok(CoherenceResult::new(Method::Quantum2, c, true, err)
        .with_meta("normalization", "raw (sigma_e^(2))_{mu nu} off diagonal")
        .with_meta("z2", z2))
}

pub fn quantum_coherence_2nd(sys: &SiteSystem, bath: &BathSpec, th: &Thermo) -> Result<CoherenceResult> {
    quantum_coherence_2nd_with(sys, bath, th, &PerturbativeOptions::default())
}

pub fn quantum_coherence_2nd_with(
    sys: &SiteSystem,
    bath: &BathSpec,
    th: &Thermo,
    opts: &PerturbativeOptions,
) -> Result<CoherenceResult> {
    if bath.n_sites() != sys.n_sites() {
        return Err(Error::Validation("bath and system site counts differ".into()));
    }
    let basis = diagonalize_excited(sys)?;
    coherence_from_components(&basis, &spectral_components(bath)?, th, opts)
}

/// Second-order result on a discretized bath, for like-for-like oracle comparison.
pub fn quantum_coherence_2nd_discretized(
    sys: &SiteSystem,
    dbath: &DiscretizedBath,
    th: &Thermo,
) -> Result<CoherenceResult> {
    let basis = diagonalize_excited(sys)?;
    coherence_from_components(&basis, &discretized_components(dbath), th, &PerturbativeOptions::default())
        .map(|r| r.with_meta("bath", format!("{} discrete modes", dbath.modes.len())))
}

/// Coherences for `J_mn = (c + (1 - c) delta_mn) J` with equal site
/// reorganization energies: `(1 - c) sum_{n kappa} u_mu n u_nu n u_kappa n^2 I_kappa`.
/// Diagonal entries are left at zero.
pub fn quantum_coherence_correlated(
    sys: &SiteSystem,
    e_diag: &[f64],
    c: f64,
    shape: &BathShape,
    th: &Thermo,
) -> Result<CoherenceResult> {
    let n = sys.n_sites();
    if e_diag.len() != n {
        return Err(Error::Validation(format!("expected {n} reorganization energies")));
    }
    let e = e_diag[0];
    if e_diag.iter().any(|x| *x != e) {
        return Err(Error::Validation(
            "correlated form requires equal reorganization energies on every site".into(),
        ));
    }
    if !(-1.0..=1.0).contains(&c) {
        return Err(Error::Validation(format!("correlation {c} outside [-1, 1]")));
    }
    // validates the shape and sign of e
    BathSpec::uniform_correlation(shape.clone(), e_diag.to_vec(), c)?;
    let basis = diagonalize_excited(sys)?;
    let unit = DMatrix::identity(n, n);
    let comps: Vec<SpectralComponent> = match shape {
        BathShape::Ohmic { cutoff } => vec![SpectralComponent::Ohmic { cutoff: *cutoff, reorg: unit }],
        BathShape::Discrete { modes } => {
            let total: f64 = modes.iter().map(|m| m.1).sum();
            modes
                .iter()
                .filter(|m| m.1 > 0.0)
                .map(|&(freq, w)| SpectralComponent::Mode { freq, reorg: &unit * (w / total) })
                .collect()
        }
    };
    let opts = PerturbativeOptions::default();
    let delta_reg = DEFAULT_DELTA_REG;
    let ln_p = log_populations(&basis, th);
    let u = &basis.u;
    let mut out = DMatrix::zeros(n, n);
    let mut err = 0.0;
    if c != 1.0 && e != 0.0 {
        for mu in 0..n {
            for nu in 0..n {
                if mu == nu {
                    continue;
                }
                let mut acc = 0.0;
                for kappa in 0..n {
                    let w: f64 = (0..n).map(|s| u[(mu, s)] * u[(nu, s)] * u[(kappa, s)].powi(2)).sum();
                    let wk = WeightedKernel::new(&basis, th, &ln_p, kappa, mu, nu, delta_reg);
                    for comp in &comps {
                        let (value, e_q) = component_integral(comp, &wk, &opts)?;
                        acc += w * comp.reorg()[(0, 0)] * value;
                        err += (w * e_q).abs();
                    }
                }
                out[(mu, nu)] = (1.0 - c) * e * acc;
            }
        }
    }
    Ok(CoherenceResult::new(Method::Quantum2, out, false, (1.0 - c).abs() * e * err)
        .with_meta("form", "correlated single spectral density")
        .with_meta("correlation", c))
}

/// Magnitude of the coherence term in the uncertainty relation together with
/// the summed magnitude of its individual contributions, which sets the
/// roundoff scale against which `value` should be judged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncertaintyBound {
    pub value: f64,
    pub scale: f64,
}

/// `1/2 |sum_k sum_{kappa mu nu} (H^{nu kappa} S_k^{kappa mu} - S_k^{nu kappa} H^{kappa mu}) C_{mu nu}|`
/// in the exciton basis, with `S_k = sum_n alpha_nk |n><n|`.
pub fn uncertainty_lower_bound(
    sys: &SiteSystem,
    dbath: &DiscretizedBath,
    c: &CoherenceResult,
) -> Result<UncertaintyBound> {
    let n = sys.n_sites();
    if c.n_states() != n {
        return Err(Error::Validation(format!("coherence matrix is {}x{0}, system has {n} sites", c.n_states())));
    }
    if let Some(m) = dbath.modes.iter().find(|m| m.alpha.len() != n) {
        return Err(Error::Validation(format!("mode at {} cm^-1 couples {} sites, expected {n}", m.freq, m.alpha.len())));
    }
    let basis = diagonalize_excited(sys)?;
    let h = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(basis.delta_omega_mu.clone()));
    let cm = &c.c_matrix;
    let mut total = 0.0;
    let mut scale = 0.0;
    for mode in &dbath.modes {
        let s = basis.to_exciton(&DMatrix::from_diagonal(&nalgebra::DVector::from_vec(mode.alpha.clone())));
        for nu in 0..n {
            for mu in 0..n {
                for k in 0..n {
                    let a = h[(nu, k)] * s[(k, mu)] * cm[(mu, nu)];
                    let b = s[(nu, k)] * h[(k, mu)] * cm[(mu, nu)];
                    total += a - b;
                    scale += a.abs() + b.abs();
                }
            }
        }
    }
    Ok(UncertaintyBound { value: 0.5 * total.abs(), scale: 0.5 * scale })
}
