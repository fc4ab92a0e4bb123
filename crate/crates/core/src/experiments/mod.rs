//! Scenario runner behind the `lyaplab` command line.
//!
//! A run takes an [`ExperimentConfig`], produces a [`Verdict`] (one
//! [`Check`] per instantiated bound) and a set of CSV tables, and writes
//! them to the output directory.

mod lines_scenarios;
mod mc_scenarios;
mod props;
mod solver_scenarios;

use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lines::LineError;
use crate::mc::{McConfig, McError};
use crate::potential::{PotentialError, PotentialSpec, TorusPotential};
use crate::varform::{SolverOptions, VarformError};

pub use lines_scenarios::{
    cheap_path_angle, cheap_path_rate_bound, demo_mc_default, discontinuity_demo, untypical_bound, CheapPathParams,
    DemoParams, DemoRow, ThinningParams, UntypicalParams,
};
pub use mc_scenarios::{
    finite_u_planar_slope, mc_default, stripe_mc_default, LargeStripe, McCrossParams, StripeLemmaParams,
};
pub use props::{default_corpus, props_checks, PropsParams};
pub use solver_scenarios::{
    l1_constants, scaling_sandwich, ConstCheckParams, L1Constants, L1Params, SandwichRow, ScalingParams, StrictParams,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Varform(#[from] VarformError),
    #[error(transparent)]
    Mc(#[from] McError),
    #[error(transparent)]
    Line(#[from] LineError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl ExperimentError {
    pub fn is_config(&self) -> bool {
        matches!(self, ExperimentError::Config(_))
    }
}

fn config_err(msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Config(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    PropsSuite,
    ConstCheck,
    StrictInequality,
    ScalingRate,
    L1Continuity,
    McCrossCheck,
    StripeLemma,
    CheapPathDemo,
    ThinningCheck,
    UntypicalScaling,
}

impl Scenario {
    pub const ALL: [Scenario; 10] = [
        Scenario::PropsSuite,
        Scenario::ConstCheck,
        Scenario::StrictInequality,
        Scenario::ScalingRate,
        Scenario::L1Continuity,
        Scenario::McCrossCheck,
        Scenario::StripeLemma,
        Scenario::CheapPathDemo,
        Scenario::ThinningCheck,
        Scenario::UntypicalScaling,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Scenario::PropsSuite => "props-suite",
            Scenario::ConstCheck => "const-check",
            Scenario::StrictInequality => "strict-inequality",
            Scenario::ScalingRate => "scaling-rate",
            Scenario::L1Continuity => "l1-continuity",
            Scenario::McCrossCheck => "mc-cross-check",
            Scenario::StripeLemma => "stripe-lemma",
            Scenario::CheapPathDemo => "cheap-path-demo",
            Scenario::ThinningCheck => "thinning-check",
            Scenario::UntypicalScaling => "untypical-scaling",
        }
    }

    pub fn description(&self) -> &'static str {
        match self {
            Scenario::PropsSuite => "inequality suite for the variational solver over a potential corpus",
            Scenario::ConstCheck => "solver against sqrt(2c)|y| for constant potentials",
            Scenario::StrictInequality => "strict inequality, f_p scan derivative and symmetrization",
            Scenario::ScalingRate => "scaling sandwich n(Γ²_{c+V/n} − Γ²_c) and its limit 2E[V]|y|²",
            Scenario::L1Continuity => "L¹ continuity with explicit constants along V + cos(2πx)/n",
            Scenario::McCrossCheck => "Monte Carlo slopes against exact and variational values",
            Scenario::StripeLemma => "travel costs confined to a stripe",
            Scenario::CheapPathDemo => "cheap path geometry and the stripe-potential slope demo",
            Scenario::ThinningCheck => "thinning push-forward and the indicator identity 1 − e^{−2κR}",
            Scenario::UntypicalScaling => "scaled thinning identity and the √2 + √n D_n bound table",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.as_str() == s)
            .ok_or_else(|| config_err(format!("unknown scenario {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub scenario: Scenario,
    /// Scenario defaults apply when empty.
    #[serde(default)]
    pub potentials: Vec<PotentialSpec>,
    #[serde(default)]
    pub solver: SolverOptions,
    /// `mc.seed` is ignored; the top-level `seed` drives every random stream.
    #[serde(default)]
    pub mc: Option<McConfig>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    /// Scenario-specific parameters; unknown keys are rejected.
    #[serde(default)]
    pub params: serde_json::Value,
}

impl ExperimentConfig {
    pub fn new(name: &str, scenario: Scenario) -> Self {
        Self {
            name: name.to_string(),
            scenario,
            potentials: Vec::new(),
            solver: SolverOptions::default(),
            mc: None,
            output_dir: None,
            seed: 1,
            params: serde_json::Value::Null,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.name.trim().is_empty() {
            return Err(config_err("name must not be empty"));
        }
        if self.name.contains(['/', '\\']) {
            return Err(config_err("name must not contain path separators"));
        }
        if let Some(mc) = &self.mc {
            mc.validate().map_err(|e| config_err(e.to_string()))?;
        }
        if self.solver.grid_n < 4 {
            return Err(config_err("solver.grid_n must be at least 4"));
        }
        for spec in &self.potentials {
            TorusPotential::from_spec(spec).map_err(|e| config_err(e.to_string()))?;
        }
        if !(self.params.is_null() || self.params.is_object()) {
            return Err(config_err("params must be an object"));
        }
        Ok(())
    }

    pub fn potentials(&self) -> Result<Vec<TorusPotential>, ExperimentError> {
        self.potentials
            .iter()
            .map(|s| TorusPotential::from_spec(s).map_err(|e| config_err(e.to_string())))
            .collect()
    }

    pub fn params<T: DeserializeOwned + Default>(&self) -> Result<T, ExperimentError> {
        if self.params.is_null() {
            return Ok(T::default());
        }
        serde_json::from_value(self.params.clone()).map_err(|e| config_err(format!("params: {e}")))
    }

    pub fn mc_or(&self, fallback: McConfig) -> McConfig {
        let mut mc = self.mc.clone().unwrap_or(fallback);
        mc.seed = self.seed;
        mc
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `measured ≤ target + tolerance`
    AtMost,
    /// `measured ≥ target − tolerance`
    AtLeast,
    /// `|measured − target| ≤ tolerance`
    Within,
    /// `measured < target`
    Below,
    /// `measured > target`
    Above,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub check_id: String,
    pub name: String,
    pub measured: f64,
    pub target: f64,
    pub tolerance: f64,
    pub relation: Relation,
    pub pass: bool,
}

impl Check {
    pub fn new(id: &str, name: impl Into<String>, measured: f64, target: f64, tolerance: f64, relation: Relation) -> Self {
        let pass = match relation {
            Relation::AtMost => measured <= target + tolerance,
            Relation::AtLeast => measured >= target - tolerance,
            Relation::Within => (measured - target).abs() <= tolerance,
            Relation::Below => measured < target,
            Relation::Above => measured > target,
        };
        Self {
            check_id: id.to_string(),
            name: name.into(),
            measured,
            target,
            tolerance,
            relation,
            pass,
        }
    }

    pub fn at_most(id: &str, name: impl Into<String>, measured: f64, bound: f64, tol: f64) -> Self {
        Self::new(id, name, measured, bound, tol, Relation::AtMost)
    }

    pub fn at_least(id: &str, name: impl Into<String>, measured: f64, bound: f64, tol: f64) -> Self {
        Self::new(id, name, measured, bound, tol, Relation::AtLeast)
    }

    pub fn within(id: &str, name: impl Into<String>, measured: f64, target: f64, tol: f64) -> Self {
        Self::new(id, name, measured, target, tol, Relation::Within)
    }

    pub fn below(id: &str, name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Self::new(id, name, measured, bound, 0.0, Relation::Below)
    }

    pub fn above(id: &str, name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Self::new(id, name, measured, bound, 0.0, Relation::Above)
    }

    /// A yes/no condition recorded as `1 == 1`.
    pub fn holds(id: &str, name: impl Into<String>, ok: bool) -> Self {
        Self::within(id, name, if ok { 1.0 } else { 0.0 }, 1.0, 0.0)
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.relation {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
            Relation::Within => "~",
            Relation::Below => "<",
            Relation::Above => ">",
        };
        write!(
            f,
            "[{}] {} ({}): {:.6e} {} {:.6e} (tol {:.1e})",
            if self.pass { "PASS" } else { "FAIL" },
            self.check_id,
            self.name,
            self.measured,
            op,
            self.target,
            self.tolerance
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub scenario: Scenario,
    pub seed: u64,
    pub checks: Vec<Check>,
    /// Statements about what the run does not establish.
    pub notes: Vec<String>,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn find(&self, check_id: &str) -> impl Iterator<Item = &Check> {
        let id = check_id.to_string();
        self.checks.iter().filter(move |c| c.check_id == id)
    }
}

/// A CSV table with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(file: &str, header: &[&str]) -> Self {
        Self {
            file: file.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }
}

/// Formats numbers in the shortest round-trip form.
macro_rules! row {
    ($($x:expr),* $(,)?) => { vec![$(format!("{}", $x)),*] };
}
pub(crate) use row;

#[derive(Debug, Clone)]
pub struct Outcome {
    pub verdict: Verdict,
    pub tables: Vec<Table>,
}

/// Collects checks, tables and notes while a scenario runs.
#[derive(Debug, Default)]
pub(crate) struct Report {
    checks: Vec<Check>,
    tables: Vec<Table>,
    notes: Vec<String>,
}

impl Report {
    pub(crate) fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub(crate) fn extend(&mut self, cs: impl IntoIterator<Item = Check>) {
        self.checks.extend(cs);
    }

    pub(crate) fn table(&mut self, t: Table) {
        self.tables.push(t);
    }

    pub(crate) fn note(&mut self, n: impl Into<String>) {
        self.notes.push(n.into());
    }
}

/// Runs a scenario without touching the filesystem.
pub fn run(cfg: &ExperimentConfig) -> Result<Outcome, ExperimentError> {
    cfg.validate()?;
    let mut report = Report::default();
    match cfg.scenario {
        Scenario::PropsSuite => props::run(cfg, &mut report)?,
        Scenario::ConstCheck => solver_scenarios::const_check(cfg, &mut report)?,
        Scenario::StrictInequality => solver_scenarios::strict_inequality(cfg, &mut report)?,
        Scenario::ScalingRate => solver_scenarios::scaling_rate(cfg, &mut report)?,
        Scenario::L1Continuity => solver_scenarios::l1_continuity(cfg, &mut report)?,
        Scenario::McCrossCheck => mc_scenarios::mc_cross_check(cfg, &mut report)?,
        Scenario::StripeLemma => mc_scenarios::stripe_lemma(cfg, &mut report)?,
        Scenario::CheapPathDemo => lines_scenarios::cheap_path_demo(cfg, &mut report)?,
        Scenario::ThinningCheck => lines_scenarios::thinning_check(cfg, &mut report)?,
        Scenario::UntypicalScaling => lines_scenarios::untypical_scaling(cfg, &mut report)?,
    }
    let mut checks_table = Table::new(
        "checks.csv",
        &["check_id", "name", "measured", "target", "tolerance", "relation", "pass"],
    );
    for c in &report.checks {
        checks_table.push(vec![
            c.check_id.clone(),
            c.name.clone(),
            format!("{}", c.measured),
            format!("{}", c.target),
            format!("{}", c.tolerance),
            serde_json::to_value(c.relation)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default(),
            c.pass.to_string(),
        ]);
    }
    report.tables.push(checks_table);
    Ok(Outcome {
        verdict: Verdict {
            name: cfg.name.clone(),
            scenario: cfg.scenario,
            seed: cfg.seed,
            checks: report.checks,
            notes: report.notes,
        },
        tables: report.tables,
    })
}

/// Writes `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), ExperimentError> {
    let io = |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Writes every table plus `verdict.json` into `dir`; returns the paths.
pub fn write_outputs(outcome: &Outcome, dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    std::fs::create_dir_all(dir).map_err(|source| ExperimentError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();
    for t in &outcome.tables {
        let p = dir.join(&t.file);
        write_atomic(&p, t.to_csv().as_bytes())?;
        written.push(p);
    }
    let p = dir.join("verdict.json");
    let mut json = serde_json::to_string_pretty(&outcome.verdict).expect("verdict serializes");
    json.push('\n');
    write_atomic(&p, json.as_bytes())?;
    written.push(p);
    Ok(written)
}

/// Output directory: explicit override, then the config, then `out/<name>`.
pub fn resolve_output_dir(cfg: &ExperimentConfig, override_dir: Option<&Path>) -> PathBuf {
    match (override_dir, &cfg.output_dir) {
        (Some(d), _) => d.join(&cfg.name),
        (None, Some(d)) => d.clone(),
        (None, None) => Path::new("out").join(&cfg.name),
    }
}

pub(crate) fn rel_tol(tau: f64, x: f64) -> f64 {
    tau * x.abs().max(1.0)
}
