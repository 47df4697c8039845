//! INI-style run configuration.
//!
//! ```text
//! # comment
//! [system]
//! kind = dimer          # or: sites
//! delta = 200           # dimer: omega_2 - omega_1
//! v12 = 200
//! omega_bar = 16000     # optional, defaults to 16000
//! # sites: omega = 15900, 16100, 16050
//! #        coupling = 0, 80, 10, 80, 0, 30, 10, 30, 0   (row-major)
//!
//! [bath]
//! shape = ohmic         # or: discrete, with modes = 40:1, 120:0.5 (frequency:weight)
//! cutoff = 50
//! reorg_diag = 100, 0
//! correlation = 0       # one coefficient for every pair, or a row-major matrix
//!
//! [sweep]
//! t_min_k = 100
//! t_max_k = 800
//! n_points = 15
//! spacing = linear      # or: log
//!
//! [run]
//! methods = classical, sc-exact, sc-2, q-2, hbar3, oracle
//!
//! [oracle]
//! n_modes = 1
//! fock_levels = 40
//! omega_max = 300       # optional, defaults to six cutoffs
//! dimension_cap = 20000 # optional
//!
//! [output]
//! path = fig1a.csv
//!
//! [figure2]
//! omega = 16000
//! temperature_k = 300
//! n_q = 101
//! n_p = 101
//! extent = 4
//! delta_width = 0.1
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::model::{BathShape, BathSpec, Method, SiteSystem, DEFAULT_OMEGA_BAR};
use crate::oracle::{OracleConfig, DEFAULT_DIMENSION_CAP};
use crate::phase_space::{GridSpec, DEFAULT_DELTA_WIDTH};

/// A configuration problem, located by line and field where possible.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub field: String,
    pub message: String,
}

impl ConfigError {
    fn new(line: Option<usize>, field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { line, field: field.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}: {}", self.field, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

type CResult<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

#[derive(Debug, Clone)]
struct Section {
    name: String,
    line: usize,
    entries: BTreeMap<String, Entry>,
}

impl Section {
    fn field(&self, key: &str) -> String {
        format!("[{}] {key}", self.name)
    }

    fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.get(key)
    }

    fn require(&self, key: &str) -> CResult<&Entry> {
        self.get(key).ok_or_else(|| ConfigError::new(Some(self.line), self.field(key), "missing required key"))
    }

    fn parse<T: FromStr>(&self, key: &str, entry: &Entry) -> CResult<T> {
        entry
            .value
            .parse()
            .map_err(|_| ConfigError::new(Some(entry.line), self.field(key), format!("cannot parse '{}'", entry.value)))
    }

    fn number(&self, key: &str) -> CResult<f64> {
        let e = self.require(key)?;
        let v: f64 = self.parse(key, e)?;
        if !v.is_finite() {
            return Err(ConfigError::new(Some(e.line), self.field(key), "must be finite"));
        }
        Ok(v)
    }

    fn optional_number(&self, key: &str) -> CResult<Option<f64>> {
        self.get(key).map(|_| self.number(key)).transpose()
    }

    fn integer(&self, key: &str) -> CResult<usize> {
        let e = self.require(key)?;
        self.parse(key, e)
    }

    fn optional_integer(&self, key: &str) -> CResult<Option<usize>> {
        self.get(key).map(|_| self.integer(key)).transpose()
    }

    fn list(&self, key: &str) -> CResult<Vec<f64>> {
        let e = self.require(key)?;
        e.value
            .split(',')
            .map(|s| {
                let s = s.trim();
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| ConfigError::new(Some(e.line), self.field(key), format!("cannot parse '{s}' as a number")))
            })
            .collect()
    }

    fn error(&self, key: &str, message: impl Into<String>) -> ConfigError {
        let line = self.get(key).map_or(self.line, |e| e.line);
        ConfigError::new(Some(line), self.field(key), message)
    }

    fn reject_unknown(&self, known: &[&str]) -> CResult<()> {
        match self.entries.iter().find(|(k, _)| !known.contains(&k.as_str())) {
            Some((k, e)) => Err(ConfigError::new(Some(e.line), self.field(k), "unknown key")),
            None => Ok(()),
        }
    }
}

fn parse_ini(text: &str) -> CResult<Vec<Section>> {
    let mut sections: Vec<Section> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split(['#', ';']).next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::new(Some(line), "section header", "missing closing ']'"))?
                .trim()
                .to_ascii_lowercase();
            if sections.iter().any(|s| s.name == name) {
                return Err(ConfigError::new(Some(line), format!("[{name}]"), "duplicate section"));
            }
            sections.push(Section { name, line, entries: BTreeMap::new() });
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError::new(Some(line), "entry", format!("expected 'key = value', got '{content}'")));
        };
        let key = key.trim().to_ascii_lowercase();
        let Some(section) = sections.last_mut() else {
            return Err(ConfigError::new(Some(line), key, "entry appears before any section header"));
        };
        let field = section.field(&key);
        if section.entries.insert(key, Entry { value: value.trim().to_string(), line }).is_some() {
            return Err(ConfigError::new(Some(line), field, "duplicate key"));
        }
    }
    Ok(sections)
}

/// Temperature grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSpec {
    pub t_min_k: f64,
    pub t_max_k: f64,
    pub n_points: usize,
    pub log_spacing: bool,
}

impl SweepSpec {
    /// Ascending temperatures, endpoints included.
    pub fn temperatures(&self) -> Vec<f64> {
        if self.n_points == 1 {
            return vec![self.t_min_k];
        }
        let last = (self.n_points - 1) as f64;
        (0..self.n_points)
            .map(|i| {
                let f = i as f64 / last;
                if i + 1 == self.n_points {
                    self.t_max_k
                } else if self.log_spacing {
                    self.t_min_k * (self.t_max_k / self.t_min_k).powf(f)
                } else {
                    self.t_min_k + f * (self.t_max_k - self.t_min_k)
                }
            })
            .collect()
    }
}

/// Parameters of the phase-space panels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Figure2Spec {
    pub omega: f64,
    pub temperature_k: f64,
    pub grid: GridSpec,
}

/// Default oscillator frequency and temperature for the phase-space panels.
pub const DEFAULT_FIGURE2_OMEGA: f64 = 16_000.0;
pub const DEFAULT_FIGURE2_TEMPERATURE: f64 = 300.0;

/// Parsed configuration. Blocks that a subcommand does not need may be absent.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub system: Option<SiteSystem>,
    /// Whether `omega_bar` was filled in from the default.
    pub omega_bar_defaulted: bool,
    pub bath: Option<BathSpec>,
    pub sweep: Option<SweepSpec>,
    pub methods: Vec<Method>,
    pub oracle: Option<OracleConfig>,
    pub output: Option<PathBuf>,
    pub figure2: Option<Figure2Spec>,
}

impl RunConfig {
    pub fn system(&self) -> CResult<&SiteSystem> {
        self.system.as_ref().ok_or_else(|| ConfigError::new(None, "[system]", "missing section"))
    }

    pub fn bath(&self) -> CResult<&BathSpec> {
        self.bath.as_ref().ok_or_else(|| ConfigError::new(None, "[bath]", "missing section"))
    }

    pub fn sweep(&self) -> CResult<&SweepSpec> {
        self.sweep.as_ref().ok_or_else(|| ConfigError::new(None, "[sweep]", "missing section"))
    }

    pub fn oracle(&self) -> CResult<&OracleConfig> {
        self.oracle.as_ref().ok_or_else(|| ConfigError::new(None, "[oracle]", "missing section"))
    }

    pub fn require_methods(&self) -> CResult<&[Method]> {
        if self.methods.is_empty() {
            return Err(ConfigError::new(None, "[run] methods", "missing section or empty method list"));
        }
        Ok(&self.methods)
    }
}

impl FromStr for RunConfig {
    type Err = ConfigError;

    fn from_str(text: &str) -> CResult<Self> {
        let sections = parse_ini(text)?;
        let known = ["system", "bath", "sweep", "run", "oracle", "output", "figure2"];
        if let Some(s) = sections.iter().find(|s| !known.contains(&s.name.as_str())) {
            return Err(ConfigError::new(Some(s.line), format!("[{}]", s.name), "unknown section"));
        }
        let find = |name: &str| sections.iter().find(|s| s.name == name);

        let (system, omega_bar_defaulted) = match find("system") {
            Some(s) => {
                let (sys, defaulted) = parse_system(s)?;
                (Some(sys), defaulted)
            }
            None => (None, false),
        };
        let bath = find("bath").map(parse_bath).transpose()?;
        if let (Some(sys), Some(b), Some(s)) = (&system, &bath, find("bath")) {
            if sys.n_sites() != b.n_sites() {
                return Err(s.error(
                    "reorg_diag",
                    format!("{} entries for a {}-site system", b.n_sites(), sys.n_sites()),
                ));
            }
        }
        let sweep = find("sweep").map(parse_sweep).transpose()?;
        let methods = find("run").map(parse_methods).transpose()?.unwrap_or_default();
        let oracle = find("oracle").map(parse_oracle).transpose()?;
        let output = match find("output") {
            Some(s) => {
                s.reject_unknown(&["path"])?;
                Some(PathBuf::from(&s.require("path")?.value))
            }
            None => None,
        };
        let figure2 = find("figure2").map(parse_figure2).transpose()?;

        if methods.contains(&Method::Oracle) && oracle.is_none() {
            let line = find("run").map(|s| s.line);
            return Err(ConfigError::new(line, "[run] methods", "method 'oracle' needs an [oracle] section"));
        }
        Ok(Self { system, omega_bar_defaulted, bath, sweep, methods, oracle, output, figure2 })
    }
}

fn parse_system(s: &Section) -> CResult<(SiteSystem, bool)> {
    let kind = s.require("kind")?.value.to_ascii_lowercase();
    match kind.as_str() {
        "dimer" => {
            s.reject_unknown(&["kind", "delta", "v12", "omega_bar"])?;
            let omega_bar = s.optional_number("omega_bar")?;
            let sys = SiteSystem::dimer(omega_bar.unwrap_or(DEFAULT_OMEGA_BAR), s.number("delta")?, s.number("v12")?)
                .map_err(|e| s.error("delta", e.to_string()))?;
            Ok((sys, omega_bar.is_none()))
        }
        "sites" => {
            s.reject_unknown(&["kind", "omega", "coupling"])?;
            let omega = s.list("omega")?;
            let n = omega.len();
            let c = s.list("coupling")?;
            if c.len() != n * n {
                return Err(s.error("coupling", format!("expected {} entries for {n} sites, got {}", n * n, c.len())));
            }
            let sys = SiteSystem::new(omega, DMatrix::from_row_slice(n, n, &c))
                .map_err(|e| s.error("coupling", e.to_string()))?;
            Ok((sys, false))
        }
        other => Err(s.error("kind", format!("expected 'dimer' or 'sites', got '{other}'"))),
    }
}

fn parse_bath(s: &Section) -> CResult<BathSpec> {
    s.reject_unknown(&["shape", "cutoff", "modes", "reorg_diag", "correlation"])?;
    let shape = match s.require("shape")?.value.to_ascii_lowercase().as_str() {
        "ohmic" => BathShape::Ohmic { cutoff: s.number("cutoff")? },
        "discrete" => {
            let e = s.require("modes")?;
            let modes = e
                .value
                .split(',')
                .map(|item| {
                    let bad = || ConfigError::new(Some(e.line), s.field("modes"), format!("expected 'frequency:weight', got '{}'", item.trim()));
                    let (w, x) = item.split_once(':').ok_or_else(bad)?;
                    let w: f64 = w.trim().parse().map_err(|_| bad())?;
                    let x: f64 = x.trim().parse().map_err(|_| bad())?;
                    Ok((w, x))
                })
                .collect::<CResult<Vec<_>>>()?;
            BathShape::Discrete { modes }
        }
        other => return Err(s.error("shape", format!("expected 'ohmic' or 'discrete', got '{other}'"))),
    };
    let reorg = s.list("reorg_diag")?;
    let n = reorg.len();
    let corr = match s.get("correlation") {
        None => DMatrix::identity(n, n),
        Some(_) => {
            let c = s.list("correlation")?;
            if c.len() == 1 {
                DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { c[0] })
            } else if c.len() == n * n {
                DMatrix::from_row_slice(n, n, &c)
            } else {
                return Err(s.error("correlation", format!("expected 1 or {} entries, got {}", n * n, c.len())));
            }
        }
    };
    BathSpec::new(shape, reorg, corr).map_err(|e| {
        let key = match e {
            crate::error::Error::NotPositiveSemidefinite { .. } => "correlation",
            _ => "reorg_diag",
        };
        s.error(key, e.to_string())
    })
}

fn parse_sweep(s: &Section) -> CResult<SweepSpec> {
    s.reject_unknown(&["t_min_k", "t_max_k", "n_points", "spacing"])?;
    let t_min_k = s.number("t_min_k")?;
    let t_max_k = s.number("t_max_k")?;
    let n_points = s.integer("n_points")?;
    let log_spacing = match s.get("spacing").map(|e| e.value.to_ascii_lowercase()) {
        None => false,
        Some(v) if v == "linear" => false,
        Some(v) if v == "log" => true,
        Some(v) => return Err(s.error("spacing", format!("expected 'linear' or 'log', got '{v}'"))),
    };
    if t_min_k <= 0.0 {
        return Err(s.error("t_min_k", "must be positive"));
    }
    if t_max_k < t_min_k {
        return Err(s.error("t_max_k", "must not be below t_min_k"));
    }
    if n_points < 1 {
        return Err(s.error("n_points", "must be at least 1"));
    }
    Ok(SweepSpec { t_min_k, t_max_k, n_points, log_spacing })
}

fn parse_methods(s: &Section) -> CResult<Vec<Method>> {
    s.reject_unknown(&["methods"])?;
    let e = s.require("methods")?;
    let mut out = Vec::new();
    for tag in e.value.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let m = Method::from_tag(&tag.to_ascii_lowercase())
            .ok_or_else(|| ConfigError::new(Some(e.line), s.field("methods"), format!("unknown method '{tag}'")))?;
        if out.contains(&m) {
            return Err(ConfigError::new(Some(e.line), s.field("methods"), format!("method '{tag}' listed twice")));
        }
        out.push(m);
    }
    if out.is_empty() {
        return Err(ConfigError::new(Some(e.line), s.field("methods"), "no methods listed"));
    }
    Ok(out)
}

fn parse_oracle(s: &Section) -> CResult<OracleConfig> {
    s.reject_unknown(&["n_modes", "fock_levels", "omega_max", "dimension_cap"])?;
    let cfg = OracleConfig {
        n_modes: s.integer("n_modes")?,
        fock_levels: s.integer("fock_levels")?,
        omega_max: s.optional_number("omega_max")?,
        dimension_cap: s.optional_integer("dimension_cap")?.unwrap_or(DEFAULT_DIMENSION_CAP),
    };
    if cfg.n_modes < 1 {
        return Err(s.error("n_modes", "must be at least 1"));
    }
    if cfg.fock_levels < 2 {
        return Err(s.error("fock_levels", "must be at least 2"));
    }
    if cfg.omega_max.is_some_and(|w| w <= 0.0) {
        return Err(s.error("omega_max", "must be positive"));
    }
    Ok(cfg)
}

fn parse_figure2(s: &Section) -> CResult<Figure2Spec> {
    s.reject_unknown(&["omega", "temperature_k", "n_q", "n_p", "extent", "delta_width"])?;
    let defaults = GridSpec::default();
    let spec = Figure2Spec {
        omega: s.optional_number("omega")?.unwrap_or(DEFAULT_FIGURE2_OMEGA),
        temperature_k: s.optional_number("temperature_k")?.unwrap_or(DEFAULT_FIGURE2_TEMPERATURE),
        grid: GridSpec {
            n_q: s.optional_integer("n_q")?.unwrap_or(defaults.n_q),
            n_p: s.optional_integer("n_p")?.unwrap_or(defaults.n_p),
            extent: s.optional_number("extent")?.unwrap_or(defaults.extent),
            delta_width: s.optional_number("delta_width")?.unwrap_or(DEFAULT_DELTA_WIDTH),
        },
    };
    for (key, ok) in [
        ("omega", spec.omega > 0.0),
        ("temperature_k", spec.temperature_k > 0.0),
        ("n_q", spec.grid.n_q >= 2),
        ("n_p", spec.grid.n_p >= 2),
        ("extent", spec.grid.extent > 0.0),
        ("delta_width", spec.grid.delta_width > 0.0),
    ] {
        if !ok {
            return Err(s.error(key, "out of range"));
        }
    }
    Ok(spec)
}
