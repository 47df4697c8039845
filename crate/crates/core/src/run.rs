//! Subcommand drivers: temperature sweeps, oracle comparisons and the
//! phase-space panels, all rendered as CSV.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::classical::classical_coherence;
use crate::config::{ConfigError, RunConfig};
use crate::error::Error;
use crate::hbar::hbar3_general;
use crate::model::{validate_regime, BathSpec, CoherenceResult, Method, SiteSystem, Thermo};
use crate::oracle::{discretize_bath, exact_coherences, OracleConfig};
use crate::perturbative::{quantum_coherence_2nd, quantum_coherence_2nd_discretized};
use crate::phase_space::render_figure2;
use crate::semiclassical::{semiclassical_exact, semiclassical_second_order};

pub const SWEEP_HEADER: &str = "T_K,method,C12,err_est,pop1,pop2";
/// Residuals below this are treated as exact agreement.
pub const RESIDUAL_FLOOR: f64 = 1e-13;
pub const COMPARE_HEADER: &str = "T_K,method,C12,C12_oracle,residual,scaling_exponent";

/// Failure of a subcommand, split by exit status.
#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Numerical { method: Method, temperature_k: f64, source: Error },
    Io(std::io::Error),
}

impl RunError {
    /// Process exit status for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Io(_) => 2,
            RunError::Numerical { .. } => 3,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "config error: {e}"),
            RunError::Numerical { method, temperature_k, source } => {
                write!(f, "numerical error in {method} at T = {temperature_k} K: {source}")
            }
            RunError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

type RResult<T> = std::result::Result<T, RunError>;

fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn numerical(method: Method, t: f64) -> impl Fn(Error) -> RunError {
    move |source| RunError::Numerical { method, temperature_k: t, source }
}

fn checked(r: CoherenceResult, t: f64) -> RResult<CoherenceResult> {
    if r.is_finite() {
        Ok(r)
    } else {
        Err(RunError::Numerical { method: r.method, temperature_k: t, source: Error::NonFinite("coherence matrix".into()) })
    }
}

/// One method at one temperature; the result records the `omega_bar` used.
pub fn compute(
    method: Method,
    sys: &SiteSystem,
    bath: &BathSpec,
    oracle: Option<&OracleConfig>,
    th: &Thermo,
) -> crate::Result<CoherenceResult> {
    let result = match method {
        Method::Classical => Ok(classical_coherence(sys, bath, th)),
        Method::SemiclassicalExact => semiclassical_exact(sys, bath, th),
        Method::Semiclassical2 => semiclassical_second_order(sys, bath, th),
        Method::Quantum2 => quantum_coherence_2nd(sys, bath, th),
        Method::Hbar3 => hbar3_general(sys, bath, th),
        Method::Oracle => {
            let cfg = oracle.ok_or_else(|| Error::Validation("oracle method needs an oracle configuration".into()))?;
            exact_coherences(sys, &discretize_bath(bath, cfg)?, cfg, th)
        }
    }?;
    Ok(result.with_meta("omega_bar", sys.omega_bar()))
}

/// Rejects oracle settings whose Hilbert space would exceed the cap before
/// any work starts.
fn check_oracle_dimension(cfg: &RunConfig, bath: &BathSpec, n_sites: usize) -> RResult<()> {
    let Some(o) = cfg.oracle.as_ref() else { return Ok(()) };
    let d = discretize_bath(bath, o).map_err(|e| ConfigError {
        line: None,
        field: "[oracle]".into(),
        message: e.to_string(),
    })?;
    let mut dim: u128 = n_sites as u128;
    for _ in &d.modes {
        dim = dim.saturating_mul(o.fock_levels as u128);
    }
    if dim > o.dimension_cap as u128 {
        return Err(ConfigError {
            line: None,
            field: "[oracle] fock_levels".into(),
            message: format!(
                "Hilbert-space dimension {dim} ({} sites x {}^{} Fock states) exceeds cap {}",
                n_sites,
                o.fock_levels,
                d.modes.len(),
                o.dimension_cap
            ),
        }
        .into());
    }
    Ok(())
}

/// `T_K,method,C12,err_est,pop1,pop2` rows, temperature ascending and methods
/// in the configured order.
pub fn run_sweep(cfg: &RunConfig) -> RResult<String> {
    let sys = cfg.system()?;
    let bath = cfg.bath()?;
    let methods = cfg.require_methods()?;
    let temps = cfg.sweep()?.temperatures();
    if methods.contains(&Method::Oracle) {
        check_oracle_dimension(cfg, bath, sys.n_sites())?;
    }
    let rows: Vec<Vec<String>> = temps
        .par_iter()
        .map(|&t| {
            let th = Thermo::new(t).map_err(numerical(methods[0], t))?;
            methods
                .iter()
                .map(|&m| {
                    let r = compute(m, sys, bath, cfg.oracle.as_ref(), &th).map_err(numerical(m, t))?;
                    let r = checked(r, t)?;
                    let pops = r.populations().map_or([String::new(), String::new()], |p| {
                        [fmt_float(p[0]), fmt_float(p[1])]
                    });
                    Ok(format!(
                        "{},{},{},{},{},{}",
                        fmt_float(t),
                        m,
                        fmt_float(r.c12()),
                        fmt_float(r.err_est),
                        pops[0],
                        pops[1]
                    ))
                })
                .collect::<RResult<Vec<String>>>()
        })
        .collect::<RResult<_>>()?;
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for line in rows.into_iter().flatten() {
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}

/// `|C - C_oracle|` at the configured bath and at half its reorganization
/// energies, and the exponent `log2` of their ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareRow {
    pub temperature_k: f64,
    pub method: Method,
    pub c12: f64,
    pub c12_oracle: f64,
    pub residual: f64,
    pub scaling_exponent: Option<f64>,
}

fn method_on(
    method: Method,
    sys: &SiteSystem,
    bath: &BathSpec,
    oracle: &OracleConfig,
    th: &Thermo,
) -> crate::Result<f64> {
    // second-order theory is compared on the oracle's own discrete modes
    if method == Method::Quantum2 {
        let d = discretize_bath(bath, oracle)?;
        return quantum_coherence_2nd_discretized(sys, &d, th).map(|r| r.c12());
    }
    compute(method, sys, bath, Some(oracle), th).map(|r| r.c12())
}

pub fn compare_rows(cfg: &RunConfig) -> RResult<Vec<CompareRow>> {
    let sys = cfg.system()?;
    let bath = cfg.bath()?;
    let oracle = cfg.oracle()?;
    let methods: Vec<Method> = cfg.require_methods()?.iter().copied().filter(|m| *m != Method::Oracle).collect();
    if methods.is_empty() {
        return Err(ConfigError { line: None, field: "[run] methods".into(), message: "nothing to compare against the oracle".into() }.into());
    }
    check_oracle_dimension(cfg, bath, sys.n_sites())?;
    let half = bath.scaled(0.5).map_err(|e| ConfigError { line: None, field: "[bath]".into(), message: e.to_string() })?;
    let temps = cfg.sweep()?.temperatures();
    let rows: Vec<Vec<CompareRow>> = temps
        .par_iter()
        .map(|&t| {
            let th = Thermo::new(t).map_err(numerical(Method::Oracle, t))?;
            let exact = |b: &BathSpec| -> RResult<f64> {
                let r = exact_coherences(sys, &discretize_bath(b, oracle).map_err(numerical(Method::Oracle, t))?, oracle, &th)
                    .map_err(numerical(Method::Oracle, t))?;
                Ok(checked(r, t)?.c12())
            };
            let (full_oracle, half_oracle) = (exact(bath)?, exact(&half)?);
            methods
                .iter()
                .map(|&m| {
                    let c = method_on(m, sys, bath, oracle, &th).map_err(numerical(m, t))?;
                    let c_half = method_on(m, sys, &half, oracle, &th).map_err(numerical(m, t))?;
                    if !(c.is_finite() && c_half.is_finite()) {
                        return Err(numerical(m, t)(Error::NonFinite("coherence".into())));
                    }
                    let residual = (c - full_oracle).abs();
                    let residual_half = (c_half - half_oracle).abs();
                    // residuals at roundoff level carry no scaling information
                    let exponent = if residual.min(residual_half) > RESIDUAL_FLOOR {
                        Some((residual / residual_half).log2())
                    } else {
                        None
                    };
                    Ok(CompareRow {
                        temperature_k: t,
                        method: m,
                        c12: c,
                        c12_oracle: full_oracle,
                        residual,
                        scaling_exponent: exponent,
                    })
                })
                .collect()
        })
        .collect::<RResult<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

/// `T_K,method,C12,C12_oracle,residual,scaling_exponent` rows.
pub fn run_compare(cfg: &RunConfig) -> RResult<String> {
    let mut out = String::from(COMPARE_HEADER);
    out.push('\n');
    for r in compare_rows(cfg)? {
        let exponent = r.scaling_exponent.map(fmt_float).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_float(r.temperature_k),
            r.method,
            fmt_float(r.c12),
            fmt_float(r.c12_oracle),
            fmt_float(r.residual),
            exponent
        )
        .expect("writing to a String cannot fail");
    }
    Ok(out)
}

/// Writes `fig2_{classical,semiclassical,quantum}.csv` into `dir` and returns
/// a short report of the width diagnostics.
pub fn run_figure2(cfg: &RunConfig, dir: &Path) -> RResult<(Vec<PathBuf>, String)> {
    let spec = cfg
        .figure2
        .ok_or_else(|| ConfigError { line: None, field: "[figure2]".into(), message: "missing section".into() })?;
    let th = Thermo::new(spec.temperature_k).map_err(|e| ConfigError {
        line: None,
        field: "[figure2] temperature_k".into(),
        message: e.to_string(),
    })?;
    let fig = render_figure2(spec.omega, &th, &spec.grid).map_err(|e| match e {
        Error::Validation(m) => RunError::Config(ConfigError { line: None, field: "[figure2]".into(), message: m }),
        other => RunError::Numerical { method: Method::Classical, temperature_k: spec.temperature_k, source: other },
    })?;
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for (name, grid) in [("classical", &fig.classical), ("semiclassical", &fig.semiclassical), ("quantum", &fig.quantum)] {
        let path = dir.join(format!("fig2_{name}.csv"));
        grid.write_csv(&path).map_err(|e| match e {
            Error::Io(io) => RunError::Io(io),
            other => RunError::Numerical { method: Method::Classical, temperature_k: spec.temperature_k, source: other },
        })?;
        paths.push(path);
    }
    let report = format!(
        "omega = {} cm^-1, T = {} K, delta profile = {}\n\
         classical scale sqrt(2kT) = {:.6}, quantum scale sqrt(hbar omega) = {:.6}\n\
         width ratio expected = {:.6}, measured = {:.6}\n\
         radial extent semiclassical = {:.6}, quantum = {:.6}\n",
        spec.omega,
        spec.temperature_k,
        fig.delta_profile,
        fig.classical_scale,
        fig.quantum_scale,
        fig.expected_width_ratio,
        fig.measured_width_ratio,
        fig.radial_extent_semiclassical,
        fig.radial_extent_quantum
    );
    Ok((paths, report))
}

/// Checks that every block present is usable and lists regime warnings.
pub fn validate(cfg: &RunConfig) -> RResult<String> {
    let mut out = String::new();
    if let (Some(sys), Some(bath)) = (&cfg.system, &cfg.bath) {
        if cfg.methods.contains(&Method::Oracle) {
            check_oracle_dimension(cfg, bath, sys.n_sites())?;
        }
        let temps = cfg.sweep.map(|s| s.temperatures()).unwrap_or_default();
        for t in temps {
            let th = Thermo::new(t).map_err(|e| ConfigError { line: None, field: "[sweep]".into(), message: e.to_string() })?;
            for w in validate_regime(sys, bath, &th) {
                writeln!(out, "warning at {t} K: {w}").unwrap();
            }
        }
        let dimer_only = [Method::SemiclassicalExact, Method::Semiclassical2];
        if sys.n_sites() != 2 {
            if let Some(m) = cfg.methods.iter().find(|m| dimer_only.contains(m)) {
                return Err(ConfigError {
                    line: None,
                    field: "[run] methods".into(),
                    message: format!("method '{m}' is only defined for dimers"),
                }
                .into());
            }
        }
    }
    out.push_str("configuration OK\n");
    Ok(out)
}
