//! Deterministic one-dimensional quadrature rules.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on `[-1, 1]`, ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre order must be positive");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    (p1, nf * (x * p1 - p0) / (x * x - 1.0))
}

const PANEL_ORDER: usize = 20;

fn panel_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(PANEL_ORDER))
}

/// Fixed-order Gauss–Legendre estimate on `[a, b]`.
pub fn gauss_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let (x, w) = panel_rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut s = 0.0;
    for (xi, wi) in x.iter().zip(w) {
        s += wi * f(mid + half * xi);
    }
    s * half
}

/// Tolerances for [`integrate_adaptive`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_depth: u32,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-13, rel_tol: 1e-11, max_depth: 40 }
    }
}

/// Value and error estimate of an integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub err_est: f64,
}

/// Adaptive Gauss–Legendre integration over `[a, b]`, with forced panel
/// boundaries at each `breaks` entry that lies strictly inside.
///
/// Each panel is compared against the sum over its two halves and bisected
/// until they agree. Traversal and summation order depend only on the inputs,
/// so results are bit-reproducible.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    opts: AdaptiveOptions,
) -> Result<Integral> {
    let mut edges = vec![a];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|x| *x > a && *x < b).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * (b - a));
    edges.extend(inner);
    edges.push(b);

    let coarse: Vec<f64> = edges.windows(2).map(|e| gauss_panel(&f, e[0], e[1])).collect();
    let scale: f64 = coarse.iter().map(|v| v.abs()).sum();
    let tol = opts.abs_tol.max(opts.rel_tol * scale);
    let n_panels = coarse.len() as f64;

    let mut total = Integral { value: 0.0, err_est: 0.0 };
    for (e, whole) in edges.windows(2).zip(coarse) {
        let part = refine(&f, e[0], e[1], whole, tol / n_panels, opts.max_depth)?;
        total.value += part.value;
        total.err_est += part.err_est;
    }
    Ok(total)
}

fn refine<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> Result<Integral> {
    let mid = 0.5 * (a + b);
    let left = gauss_panel(f, a, mid);
    let right = gauss_panel(f, mid, b);
    let split = left + right;
    let diff = (split - whole).abs();
    if !split.is_finite() {
        return Err(Error::NonFinite(format!("integrand on [{a}, {b}]")));
    }
    if diff <= tol || mid <= a || mid >= b {
        return Ok(Integral { value: split, err_est: diff });
    }
    if depth == 0 {
        return Err(Error::QuadratureNotConverged { previous: whole, last: split });
    }
    let l = refine(f, a, mid, left, 0.5 * tol, depth - 1)?;
    let r = refine(f, mid, b, right, 0.5 * tol, depth - 1)?;
    Ok(Integral { value: l.value + r.value, err_est: l.err_est + r.err_est })
}

/// Trapezoid rule for a smooth `period`-periodic integrand over one period,
/// doubling the node count until successive estimates agree to `tol`
/// (absolute, or relative to the estimate when that is larger than 1).
pub fn periodic_trapezoid<F: Fn(f64) -> f64>(f: F, period: f64, tol: f64, max_nodes: usize) -> Result<Integral> {
    let mut n = 8usize;
    let mut sum: f64 = (0..n).map(|i| f(period * i as f64 / n as f64)).sum();
    let mut estimate = sum * period / n as f64;
    loop {
        if 2 * n > max_nodes {
            return Err(Error::QuadratureNotConverged { previous: estimate, last: estimate });
        }
        let odd: f64 = (0..n).map(|i| f(period * (2 * i + 1) as f64 / (2 * n) as f64)).sum();
        sum += odd;
        n *= 2;
        let next = sum * period / n as f64;
        let diff = (next - estimate).abs();
        if !next.is_finite() {
            return Err(Error::NonFinite("periodic integrand".into()));
        }
        if diff <= tol * next.abs().max(1.0) {
            return Ok(Integral { value: next, err_est: diff });
        }
        estimate = next;
    }
}
