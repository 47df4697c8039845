//! Phase-space representations of the single-oscillator coherence `|1><0|`:
//! classical, semiclassical (action shell) and Wigner.
//!
//! Natural coordinates are `x = q sqrt(omega)` and `y = p / sqrt(omega)`
//! (units of `sqrt(hbar/omega)` and `sqrt(hbar omega)` with hbar = 1).

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::Thermo;

/// Default radial width of the action shell in units of `sqrt(hbar omega)`.
pub const DEFAULT_DELTA_WIDTH: f64 = 0.1;

fn linear_symbol(q: f64, p: f64, omega: f64, scale: f64) -> Complex64 {
    Complex64::new(omega * q, -p) / scale
}

/// `(omega / 2 pi kT) ((omega q - i p)/sqrt(2 kT)) exp(-(omega^2 q^2 + p^2)/(2 kT))`.
pub fn rho10_classical(q: f64, p: f64, omega: f64, th: &Thermo) -> Complex64 {
    let kt = th.thermal_energy();
    let energy = 0.5 * (omega * omega * q * q + p * p);
    linear_symbol(q, p, omega, (2.0 * kt).sqrt()) * (omega / (2.0 * PI * kt) * (-energy / kt).exp())
}

/// `((omega q - i p)/sqrt(2 omega)) delta_w(J - 1)` with `J = (omega^2 q^2 + p^2)/(2 omega)`.
///
/// `delta_w` is a unit-area Gaussian in the action. `delta_width` is its
/// radial width in units of `sqrt(hbar omega)`, which on the shell `J = 1`
/// corresponds to an action width `sqrt(2) * delta_width`.
pub fn rho10_semiclassical(q: f64, p: f64, omega: f64, delta_width: f64) -> Complex64 {
    let action = 0.5 * (omega * omega * q * q + p * p) / omega;
    let sigma = std::f64::consts::SQRT_2 * delta_width;
    let shell = (-0.5 * ((action - 1.0) / sigma).powi(2)).exp() / (sigma * (2.0 * PI).sqrt());
    linear_symbol(q, p, omega, (2.0 * omega).sqrt()) * shell
}

/// Ground-state Wigner function `(1/pi) exp(-(omega^2 q^2 + p^2)/omega)`.
pub fn ground_wigner(q: f64, p: f64, omega: f64) -> f64 {
    (-(omega * omega * q * q + p * p) / omega).exp() / PI
}

/// `(2/pi) ((omega q - i p)/sqrt(2 omega)) exp(-(omega^2 q^2 + p^2)/omega)`.
pub fn rho10_quantum(q: f64, p: f64, omega: f64) -> Complex64 {
    linear_symbol(q, p, omega, (2.0 * omega).sqrt()) * (2.0 * ground_wigner(q, p, omega))
}

/// Terms of the Moyal expansion of `[a†]_W ⋆ W_0` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoyalTerms {
    pub zeroth: Complex64,
    pub first: Complex64,
    pub second: Complex64,
}

impl MoyalTerms {
    pub fn sum(&self) -> Complex64 {
        self.zeroth + self.first + self.second
    }
}

/// Expands `A ⋆ B = sum_n (i/2)^n / n! A (<-d_q ->d_p - <-d_p ->d_q)^n B` for
/// `A = [a†]_W` and `B = W_0` through second order, from the analytic
/// derivatives of each factor.
pub fn moyal_terms(q: f64, p: f64, omega: f64) -> MoyalTerms {
    let s = (2.0 * omega).sqrt();
    let a = linear_symbol(q, p, omega, s);
    let a_q = Complex64::new(omega / s, 0.0);
    let a_p = Complex64::new(0.0, -1.0 / s);
    // a linear symbol has no second derivatives
    let (a_qq, a_qp, a_pp) = (Complex64::default(), Complex64::default(), Complex64::default());

    let w = ground_wigner(q, p, omega);
    let w_q = -2.0 * omega * q * w;
    let w_p = -2.0 * p / omega * w;
    let w_qq = (4.0 * omega * omega * q * q - 2.0 * omega) * w;
    let w_pp = (4.0 * p * p / (omega * omega) - 2.0 / omega) * w;
    let w_qp = 4.0 * q * p * w;

    let i_half = Complex64::new(0.0, 0.5);
    let first = i_half * (a_q * w_p - a_p * w_q);
    let second = i_half * i_half * 0.5 * (a_qq * w_pp - 2.0 * a_qp * w_qp + a_pp * w_qq);
    MoyalTerms { zeroth: a * w, first, second }
}

/// `[a†]_W ⋆ W_0`, the Wigner function of `|1><0|`.
pub fn rho10_via_moyal(q: f64, p: f64, omega: f64) -> Complex64 {
    moyal_terms(q, p, omega).sum()
}

/// Values on a uniform `(q, p)` grid, stored with `p` varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGrid {
    /// Grid coordinates in natural units.
    pub q_values: Vec<f64>,
    pub p_values: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl PhaseGrid {
    pub fn at(&self, iq: usize, ip: usize) -> Complex64 {
        self.values[iq * self.p_values.len() + ip]
    }

    pub fn max_abs_re(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |a, v| a.max(v.re.abs()))
    }

    /// `sqrt(<x^2>)` with weight `|Re rho|`.
    pub fn q_rms_width(&self) -> f64 {
        self.weighted_mean(|x, _| x * x).sqrt()
    }

    /// `sqrt(<x^2 + y^2>)` with weight `|Re rho|`.
    pub fn radial_extent(&self) -> f64 {
        self.weighted_mean(|x, y| x * x + y * y).sqrt()
    }

    fn weighted_mean(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for (iq, x) in self.q_values.iter().enumerate() {
            for (ip, y) in self.p_values.iter().enumerate() {
                let w = self.at(iq, ip).re.abs();
                num += w * f(*x, *y);
                den += w;
            }
        }
        num / den
    }

    /// Dumps the grid as `q,p,re,im` rows with 17 significant digits.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "q,p,re,im")?;
        for (iq, q) in self.q_values.iter().enumerate() {
            for (ip, p) in self.p_values.iter().enumerate() {
                let v = self.at(iq, ip);
                writeln!(out, "{q:.16e},{p:.16e},{:.16e},{:.16e}", v.re, v.im)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Uniform square grid in units of each panel's own width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub n_q: usize,
    pub n_p: usize,
    /// Half-width of the grid, in units of the panel's characteristic width.
    pub extent: f64,
    pub delta_width: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { n_q: 101, n_p: 101, extent: 4.0, delta_width: DEFAULT_DELTA_WIDTH }
    }
}

fn axis(n: usize, half: f64) -> Vec<f64> {
    (0..n).map(|i| -half + 2.0 * half * i as f64 / (n - 1) as f64).collect()
}

/// Evaluates `f(q, p)` over natural coordinates `[-half, half]^2`.
fn sample(spec: &GridSpec, half: f64, omega: f64, f: impl Fn(f64, f64) -> Complex64) -> PhaseGrid {
    let q_values = axis(spec.n_q, half);
    let p_values = axis(spec.n_p, half);
    let root = omega.sqrt();
    let mut values = Vec::with_capacity(spec.n_q * spec.n_p);
    for x in &q_values {
        for y in &p_values {
            values.push(f(x / root, y * root));
        }
    }
    PhaseGrid { q_values, p_values, values }
}

fn normalized(mut g: PhaseGrid) -> Result<PhaseGrid> {
    let m = g.max_abs_re();
    if !(m.is_finite() && m > 0.0) {
        return Err(Error::NonFinite("phase-space grid normalization".into()));
    }
    g.values.iter_mut().for_each(|v| *v /= m);
    Ok(g)
}

/// The three panels plus the width diagnostics that compare them.
#[derive(Debug, Clone, PartialEq)]
pub struct Figure2 {
    pub classical: PhaseGrid,
    pub semiclassical: PhaseGrid,
    pub quantum: PhaseGrid,
    /// `sqrt(2 kT)` and `sqrt(hbar omega)` in cm^-1/2.
    pub classical_scale: f64,
    pub quantum_scale: f64,
    /// `sqrt(2 kT / hbar omega)`.
    pub expected_width_ratio: f64,
    /// Classical over quantum rms `q` width of `|Re rho|`.
    pub measured_width_ratio: f64,
    pub radial_extent_semiclassical: f64,
    pub radial_extent_quantum: f64,
    pub delta_profile: &'static str,
}

/// Real parts normalized to a maximum of 1 (imaginary parts share the factor).
pub fn render_figure2(omega: f64, th: &Thermo, spec: &GridSpec) -> Result<Figure2> {
    if spec.n_q < 2 || spec.n_p < 2 {
        return Err(Error::Validation("phase-space grids need at least 2 points per axis".into()));
    }
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::Validation(format!("oscillator frequency must be positive, got {omega}")));
    }
    if !(spec.extent.is_finite() && spec.extent > 0.0 && spec.delta_width > 0.0) {
        return Err(Error::Validation("grid extent and delta width must be positive".into()));
    }
    let kt = th.thermal_energy();
    let ratio = (2.0 * kt / omega).sqrt();
    let classical = normalized(sample(spec, spec.extent * ratio, omega, |q, p| rho10_classical(q, p, omega, th)))?;
    let semiclassical = normalized(sample(spec, spec.extent, omega, |q, p| {
        rho10_semiclassical(q, p, omega, spec.delta_width)
    }))?;
    let quantum = normalized(sample(spec, spec.extent, omega, |q, p| rho10_quantum(q, p, omega)))?;
    let measured_width_ratio = classical.q_rms_width() / quantum.q_rms_width();
    Ok(Figure2 {
        classical_scale: (2.0 * kt).sqrt(),
        quantum_scale: omega.sqrt(),
        expected_width_ratio: ratio,
        measured_width_ratio,
        radial_extent_semiclassical: semiclassical.radial_extent(),
        radial_extent_quantum: quantum.radial_extent(),
        delta_profile: "gaussian",
        classical,
        semiclassical,
        quantum,
    })
}
