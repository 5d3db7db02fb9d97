//! Experiment driver: flag parsing, validation, execution and artifact I/O.
//!
//! Every artifact starts with one comment line
//! `# dslt <version> <spec as JSON>` followed by CSV or a JSON array of row
//! objects. Floats are written in shortest round-trip form, and files are
//! written to a temporary sibling and renamed into place.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufRead, Write as _};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::chaos::{chaos_total_norm, ChaosTotal};
use crate::covariance::HurstParams;
use crate::error::{DsltError, Result};
use crate::estimators::{alpha_prime_estimate, mc_summary, tanaka_residual_bm, EstimatorConfig};
use crate::pathgen::{path_stream, SamplerMethod, TimeGrid, CHOLESKY_MAX_STEPS};
use crate::quadrature::{
    case_bound_chain_check, chaos_norm_integral, falsify_bound_ii, scan_bound_ratio, second_moment_integral,
    CaseId,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Simulate,
    Dslt,
    Tanaka,
    Moment2,
    Chaos,
    Bounds,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Dslt => "dslt",
            Command::Tanaka => "tanaka",
            Command::Moment2 => "moment2",
            Command::Chaos => "chaos",
            Command::Bounds => "bounds",
        }
    }

    fn allowed(self) -> &'static [&'static str] {
        match self {
            Command::Simulate => &["hurst", "t", "seed", "steps", "paths", "method"],
            Command::Dslt => &["hurst", "t", "seed", "eps", "y", "steps", "paths", "method"],
            Command::Tanaka => &["hurst", "t", "seed", "eps", "bandwidth", "y", "steps", "paths", "method"],
            Command::Moment2 => &["hurst", "t", "eps", "tol"],
            Command::Chaos => &["hurst", "t", "mmax", "tol"],
            Command::Bounds => &["hurst", "seed", "case", "b", "deltas", "samples"],
        }
    }

    fn required(self) -> &'static [&'static str] {
        match self {
            Command::Simulate => &["hurst", "steps"],
            Command::Dslt | Command::Tanaka => &["hurst", "eps", "steps", "paths"],
            Command::Moment2 => &["hurst", "eps"],
            Command::Chaos => &["hurst", "mmax"],
            Command::Bounds => &["hurst", "case"],
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Parameters of one experiment; absent keys take per-command defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    /// Hurst index in (0, 1)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hurst: Option<f64>,
    /// Time horizon [default: 1]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    /// Base seed of the path substreams [default: 0]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Mollifier variance
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// Local time kernel variance [default: eps]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
    /// Spatial offset [default: 0]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
    /// Grid steps
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    /// Number of paths
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paths: Option<u64>,
    /// Absolute quadrature tolerance
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    /// Highest chaos index m (order 2m - 1)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mmax: Option<usize>,
    /// i, ii, iii, ii-counterexample, lnd, chain-i, chain-ii or chain-iii
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub case: Option<String>,
    /// Comma-separated decreasing gap sizes
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<f64>>,
    /// cholesky or circulant [default: circulant]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<SamplerMethod>,
    /// Middle gap of the counterexample [default: 1]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    /// Random geometries for bound scans [default: 100000]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

impl Params {
    fn present(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        macro_rules! chk {
            ($($f:ident),*) => { $( if self.$f.is_some() { v.push(stringify!($f)); } )* };
        }
        chk!(hurst, t, seed, eps, bandwidth, y, steps, paths, tol, mmax, case, deltas, method, b, samples);
        v
    }

    fn t(&self) -> f64 {
        self.t.unwrap_or(1.0)
    }
    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
    fn y(&self) -> f64 {
        self.y.unwrap_or(0.0)
    }
    fn method(&self) -> SamplerMethod {
        self.method.unwrap_or(SamplerMethod::Circulant)
    }
    fn bandwidth(&self) -> f64 {
        self.bandwidth.or(self.eps).unwrap_or(0.0)
    }
    fn samples(&self) -> usize {
        self.samples.unwrap_or(100_000)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    /// `None` writes to standard output.
    pub path: Option<PathBuf>,
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub command: Command,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Parser)]
#[command(name = "dslt", version, about = "Derivative of self-intersection local time of fBm: experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub params: Params,
    /// Output file [default: standard output]
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Sample fBm paths
    Simulate(RunArgs),
    /// Monte Carlo summary of the mollified estimator
    Dslt(RunArgs),
    /// Tanaka residual at H = 1/2
    Tanaka(RunArgs),
    /// Second moment by quadrature (eps = 0 gives the limit)
    Moment2(RunArgs),
    /// Chaos term norms and their sum
    Chaos(RunArgs),
    /// Variance bound checks
    Bounds(RunArgs),
    /// Run one JSON spec per line of a file
    Batch {
        #[arg(long)]
        file: PathBuf,
    },
}

impl CliCommand {
    /// The experiment spec for a single-run subcommand.
    pub fn to_spec(&self) -> Option<ExperimentSpec> {
        let (command, a) = match self {
            CliCommand::Simulate(a) => (Command::Simulate, a),
            CliCommand::Dslt(a) => (Command::Dslt, a),
            CliCommand::Tanaka(a) => (Command::Tanaka, a),
            CliCommand::Moment2(a) => (Command::Moment2, a),
            CliCommand::Chaos(a) => (Command::Chaos, a),
            CliCommand::Bounds(a) => (Command::Bounds, a),
            CliCommand::Batch { .. } => return None,
        };
        Some(ExperimentSpec {
            command,
            params: a.params.clone(),
            output: OutputSpec {
                path: a.out.clone(),
                format: a.format,
            },
        })
    }
}

const BOUND_CASES: [&str; 8] = ["i", "ii", "iii", "ii-counterexample", "lnd", "chain-i", "chain-ii", "chain-iii"];

/// Every violated precondition of `spec`, empty when it can run.
pub fn validate(spec: &ExperimentSpec) -> Vec<String> {
    let mut v = Vec::new();
    let cmd = spec.command;
    let p = &spec.params;
    for key in p.present() {
        if !cmd.allowed().contains(&key) {
            v.push(format!("--{key} is not used by {}", cmd.name()));
        }
    }
    for &key in cmd.required() {
        if !p.present().contains(&key) {
            v.push(format!("missing required flag --{key}"));
        }
    }
    if let Some(h) = p.hurst {
        if !(h > 0.0 && h < 1.0) {
            v.push("hurst must lie strictly in (0,1)".into());
        } else if cmd == Command::Tanaka && h != 0.5 {
            v.push("tanaka requires hurst = 0.5".into());
        } else if cmd == Command::Chaos && h >= 2.0 / 3.0 {
            v.push("chaos norms require hurst < 2/3".into());
        } else if matches!(p.case.as_deref(), Some(c) if c.starts_with("chain-")) && h >= 2.0 / 3.0 {
            v.push("chain checks require hurst < 2/3".into());
        }
    }
    if let Some(t) = p.t {
        if !(t > 0.0 && t.is_finite()) {
            v.push("horizon t must be positive".into());
        }
    }
    if let Some(e) = p.eps {
        if cmd == Command::Moment2 {
            if !(e >= 0.0 && e.is_finite()) {
                v.push("mollifier scale must be nonnegative".into());
            }
        } else if !(e > 0.0 && e.is_finite()) {
            v.push("mollifier scale must be positive".into());
        }
    }
    if let Some(bw) = p.bandwidth {
        if !(bw > 0.0 && bw.is_finite()) {
            v.push("bandwidth must be positive".into());
        }
    }
    if let Some(y) = p.y {
        if !y.is_finite() {
            v.push("y must be finite".into());
        }
    }
    if let Some(n) = p.steps {
        if n < 2 {
            v.push("steps must be at least 2".into());
        } else if p.method() == SamplerMethod::Cholesky && n > CHOLESKY_MAX_STEPS {
            v.push(format!("cholesky supports at most {CHOLESKY_MAX_STEPS} steps"));
        }
    }
    if let Some(k) = p.paths {
        let min = if cmd == Command::Simulate { 1 } else { 2 };
        if k < min {
            v.push(format!("paths must be at least {min}"));
        }
    }
    if let Some(tol) = p.tol {
        if !(tol > 0.0) {
            v.push("tol must be positive".into());
        }
    }
    if p.mmax == Some(0) {
        v.push("mmax must be at least 1".into());
    }
    if let Some(c) = &p.case {
        if !BOUND_CASES.contains(&c.as_str()) {
            v.push(format!("unknown case '{c}', expected one of {}", BOUND_CASES.join(", ")));
        } else if c == "ii-counterexample" && p.deltas.is_none() {
            v.push("missing required flag --deltas".into());
        }
    }
    if let Some(d) = &p.deltas {
        if d.is_empty() || d.iter().any(|&x| !(x > 0.0)) {
            v.push("deltas must be positive".into());
        } else if d.windows(2).any(|w| w[1] >= w[0]) {
            v.push("deltas must be strictly decreasing".into());
        }
    }
    if let Some(b) = p.b {
        if !(b > 0.0 && b.is_finite()) {
            v.push("b must be positive".into());
        }
    }
    if p.samples == Some(0) {
        v.push("samples must be at least 1".into());
    }
    v
}

/// A cell of an output table.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    F(f64),
    U(u64),
    S(String),
    B(bool),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::F(x)
    }
}
impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::U(x)
    }
}
impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::U(x as u64)
    }
}
impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::S(x.to_string())
    }
}
impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::S(x)
    }
}
impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::B(x)
    }
}

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-5..1e16).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::F(x) => fmt_f64(*x),
            Cell::U(x) => x.to_string(),
            Cell::S(s) => s.clone(),
            Cell::B(b) => b.to_string(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::F(x) => serde_json::Number::from_f64(*x).map_or(Value::Null, Value::Number),
            Cell::U(x) => Value::from(*x),
            Cell::S(s) => Value::from(s.as_str()),
            Cell::B(b) => Value::from(*b),
        }
    }
}

/// Tabular experiment result.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

fn hurst_of(p: &Params) -> Result<HurstParams> {
    HurstParams::new(p.hurst.unwrap_or(f64::NAN))
}

fn estimator_config(p: &Params) -> EstimatorConfig {
    EstimatorConfig {
        eps: p.eps.unwrap_or(f64::NAN),
        bandwidth: p.bandwidth(),
        y: p.y(),
        t: p.t(),
        n: p.steps.unwrap_or(0),
        reps: p.paths.unwrap_or(0),
        seed: p.seed(),
        method: p.method(),
    }
}

const ESTIMATOR_COLUMNS: [&str; 11] = ["H", "t", "eps", "h", "y", "n", "reps", "seed", "mean", "variance", "std_error"];

/// Execute a validated spec and return its result table.
pub fn execute(spec: &ExperimentSpec) -> Result<Table> {
    let violations = validate(spec);
    if !violations.is_empty() {
        return Err(DsltError::Domain(violations.join("; ")));
    }
    let p = &spec.params;
    let h = hurst_of(p)?;
    match spec.command {
        Command::Simulate => {
            let grid = TimeGrid::new(p.t(), p.steps.unwrap_or(0))?;
            let k = p.paths.unwrap_or(1);
            let mut tab = Table::new(&["path", "t", "value"]);
            for (i, path) in path_stream(h, grid, p.seed(), k, p.method())?.enumerate() {
                for (j, &v) in path.values.iter().enumerate() {
                    tab.push(vec![i.into(), grid.point(j).into(), v.into()]);
                }
            }
            if k == 1 {
                tab.columns.remove(0);
                tab.rows.iter_mut().for_each(|r| {
                    r.remove(0);
                });
            }
            Ok(tab)
        }
        Command::Dslt | Command::Tanaka => {
            let cfg = estimator_config(p);
            cfg.validate()?;
            let s = if spec.command == Command::Dslt {
                mc_summary(h, &cfg, |path| {
                    alpha_prime_estimate(path, cfg.t, cfg.eps, cfg.y).unwrap_or(f64::NAN)
                })?
            } else {
                mc_summary(h, &cfg, |path| tanaka_residual_bm(path, &cfg).unwrap_or(f64::NAN))?
            };
            if !s.mean.is_finite() {
                return Err(DsltError::Numerical("estimator produced a non-finite value".into()));
            }
            let mut cols = ESTIMATOR_COLUMNS.to_vec();
            let mut row: Vec<Cell> = vec![
                h.h().into(),
                cfg.t.into(),
                cfg.eps.into(),
                cfg.bandwidth.into(),
                cfg.y.into(),
                cfg.n.into(),
                cfg.reps.into(),
                cfg.seed.into(),
                s.mean.into(),
                s.variance.into(),
                s.std_error.into(),
            ];
            if spec.command == Command::Tanaka {
                let n = s.reps as f64;
                cols.push("rms");
                row.push((s.mean * s.mean + s.variance * (n - 1.0) / n).sqrt().into());
            }
            let mut tab = Table::new(&cols);
            tab.push(row);
            Ok(tab)
        }
        Command::Moment2 => {
            let eps = p.eps.unwrap_or(f64::NAN);
            let t = p.t();
            let tol = p.tol.unwrap_or(1e-6);
            let q = if eps == 0.0 {
                chaos_norm_integral(h, t, tol)?.quad
            } else {
                second_moment_integral(h, t, eps)?
            };
            let mut tab = Table::new(&["H", "t", "eps", "value", "abs_err", "cells", "converged"]);
            tab.push(vec![
                h.h().into(),
                t.into(),
                eps.into(),
                q.value.into(),
                q.abs_err.into(),
                q.cells.into(),
                q.converged.into(),
            ]);
            Ok(tab)
        }
        Command::Chaos => {
            let t = p.t();
            let tol = p.tol.unwrap_or(1e-4);
            let tot: ChaosTotal = chaos_total_norm(h, t, p.mmax.unwrap_or(1), tol)?;
            let reference = chaos_norm_integral(h, t, tol)?.quad;
            let mut tab = Table::new(&["H", "t", "m", "norm_sq", "abs_err"]);
            for c in &tot.terms {
                tab.push(vec![h.h().into(), t.into(), c.m.into(), c.norm_sq.into(), c.abs_err.into()]);
            }
            let mut summary = |label: &str, v: f64, e: f64| tab.push(vec![h.h().into(), t.into(), label.into(), v.into(), e.into()]);
            summary("partial", tot.partial_sum, tot.abs_err - tot.tail_err);
            summary("tail", tot.tail, tot.tail_err);
            summary("total", tot.total, tot.abs_err);
            summary("quadrature", reference.value, reference.abs_err);
            Ok(tab)
        }
        Command::Bounds => run_bounds(h, p),
    }
}

fn run_bounds(h: HurstParams, p: &Params) -> Result<Table> {
    let case = p.case.as_deref().unwrap_or("");
    let case_id = |s: &str| match s {
        "i" => CaseId::Case1,
        "ii" => CaseId::Case2,
        _ => CaseId::Case3,
    };
    match case {
        "i" | "ii" | "iii" => {
            let s = scan_bound_ratio(h, case_id(case), p.samples(), p.seed());
            let mut tab = Table::new(&["case", "H", "samples", "min_ratio", "argmin_a", "argmin_b", "argmin_c"]);
            tab.push(vec![
                case.into(),
                h.h().into(),
                s.samples.into(),
                s.min_ratio.into(),
                s.argmin[0].into(),
                s.argmin[1].into(),
                s.argmin[2].into(),
            ]);
            Ok(tab)
        }
        "ii-counterexample" => {
            let b = p.b.unwrap_or(1.0);
            let deltas = p.deltas.clone().unwrap_or_default();
            let ratios = falsify_bound_ii(h, b, &deltas)?;
            let mut tab = Table::new(&["H", "b", "delta", "ratio"]);
            for (d, r) in deltas.iter().zip(ratios) {
                tab.push(vec![h.h().into(), b.into(), (*d).into(), r.into()]);
            }
            Ok(tab)
        }
        "lnd" => {
            let (lo, hi) = crate::quadrature::bounds::lnd_scan(h, p.samples(), 8, p.seed())?;
            let mut tab = Table::new(&["H", "samples", "min_ratio", "max_ratio"]);
            tab.push(vec![h.h().into(), p.samples().into(), lo.into(), hi.into()]);
            Ok(tab)
        }
        _ => {
            let name = case.trim_start_matches("chain-");
            let r = case_bound_chain_check(h, case_id(name), p.samples(), p.seed())?;
            let mut tab = Table::new(&[
                "case",
                "H",
                "samples",
                "identity_max_err",
                "integral_form_max_err",
                "mu_bound_constant",
                "integrand_bound_constant",
            ]);
            tab.push(vec![
                name.into(),
                h.h().into(),
                r.samples.into(),
                r.identity_max_err.into(),
                r.integral_form_max_err.into(),
                r.mu_bound_constant.into(),
                r.integrand_bound_constant.into(),
            ]);
            Ok(tab)
        }
    }
}

/// Header comment line recording the spec and version.
pub fn header_line(spec: &ExperimentSpec) -> String {
    let json = serde_json::to_string(spec).expect("spec serializes");
    format!("# dslt {VERSION} {json}")
}

/// Full artifact text for a spec and its result.
pub fn render(spec: &ExperimentSpec, tab: &Table) -> String {
    let mut out = header_line(spec);
    out.push('\n');
    match spec.output.format {
        Format::Csv => {
            out.push_str(&tab.columns.join(","));
            out.push('\n');
            for row in &tab.rows {
                let cells: Vec<String> = row.iter().map(Cell::csv).collect();
                let _ = writeln!(out, "{}", cells.join(","));
            }
        }
        Format::Json => {
            let rows: Vec<Value> = tab
                .rows
                .iter()
                .map(|row| {
                    let obj: serde_json::Map<String, Value> = tab
                        .columns
                        .iter()
                        .zip(row)
                        .map(|(c, v)| (c.to_string(), v.json()))
                        .collect();
                    Value::Object(obj)
                })
                .collect();
            out.push_str(&serde_json::to_string_pretty(&Value::Array(rows)).expect("rows serialize"));
            out.push('\n');
        }
    }
    out
}

/// Write `contents` to a temporary sibling of `path`, then rename it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| DsltError::Io(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let res = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if res.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(res?)
}

/// Validate, execute and write one experiment.
pub fn run(spec: &ExperimentSpec) -> Result<()> {
    let tab = execute(spec)?;
    let text = render(spec, &tab);
    match &spec.output.path {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            io::stdout().lock().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

/// Parsed artifact: the recorded spec plus the rows as strings.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub version: String,
    pub spec: ExperimentSpec,
    pub columns: Vec<String>,
    pub rows: Vec<BTreeMap<String, String>>,
}

impl Artifact {
    /// Column `name` of every row parsed as `f64`.
    pub fn column_f64(&self, name: &str) -> Result<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| {
                r.get(name)
                    .ok_or_else(|| DsltError::Parse(format!("missing column {name}")))?
                    .parse::<f64>()
                    .map_err(|e| DsltError::Parse(format!("column {name}: {e}")))
            })
            .collect()
    }
}

pub fn parse_artifact(text: &str) -> Result<Artifact> {
    let (first, body) = text.split_once('\n').unwrap_or((text, ""));
    let rest = first
        .strip_prefix("# dslt ")
        .ok_or_else(|| DsltError::Parse("missing artifact header".into()))?;
    let (version, json) = rest
        .split_once(' ')
        .ok_or_else(|| DsltError::Parse("malformed artifact header".into()))?;
    let spec: ExperimentSpec =
        serde_json::from_str(json).map_err(|e| DsltError::Parse(format!("header spec: {e}")))?;
    let (columns, rows) = match spec.output.format {
        Format::Csv => {
            let mut lines = body.lines();
            let columns: Vec<String> = lines
                .next()
                .ok_or_else(|| DsltError::Parse("missing CSV header".into()))?
                .split(',')
                .map(str::to_string)
                .collect();
            let mut rows = Vec::new();
            for line in lines.filter(|l| !l.is_empty()) {
                let cells: Vec<&str> = line.split(',').collect();
                if cells.len() != columns.len() {
                    return Err(DsltError::Parse(format!("row has {} cells, expected {}", cells.len(), columns.len())));
                }
                rows.push(columns.iter().cloned().zip(cells.iter().map(|s| s.to_string())).collect());
            }
            (columns, rows)
        }
        Format::Json => {
            let v: Vec<serde_json::Map<String, Value>> =
                serde_json::from_str(body).map_err(|e| DsltError::Parse(format!("JSON body: {e}")))?;
            let columns = v.first().map(|o| o.keys().cloned().collect()).unwrap_or_default();
            let rows = v
                .into_iter()
                .map(|o| {
                    o.into_iter()
                        .map(|(k, val)| {
                            let s = match val {
                                Value::String(s) => s,
                                other => other.to_string(),
                            };
                            (k, s)
                        })
                        .collect()
                })
                .collect();
            (columns, rows)
        }
    };
    Ok(Artifact {
        version: version.to_string(),
        spec,
        columns,
        rows,
    })
}

pub fn read_artifact(path: &Path) -> Result<Artifact> {
    parse_artifact(&fs::read_to_string(path)?)
}

/// Exit status of a failed run: 2 for invalid input, 1 otherwise.
pub fn exit_code(err: &DsltError) -> i32 {
    match err {
        DsltError::Domain(_) | DsltError::Contract(_) | DsltError::Parse(_) => 2,
        _ => 1,
    }
}

/// Run one spec and report failures on standard error.
pub fn run_reporting(spec: &ExperimentSpec) -> i32 {
    let violations = validate(spec);
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("dslt {}: {v}", spec.command.name());
        }
        return 2;
    }
    match run(spec) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("dslt {}: {e}", spec.command.name());
            exit_code(&e)
        }
    }
}

/// Run every spec of a batch file; the exit status is the worst of the runs.
pub fn run_batch(file: &Path) -> i32 {
    let f = match fs::File::open(file) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("dslt batch: {}: {e}", file.display());
            return 2;
        }
    };
    let mut worst = 0;
    for (i, line) in io::BufReader::new(f).lines().enumerate() {
        let line = match line {
            Ok(l) => l,
            Err(e) => {
                eprintln!("dslt batch: line {}: {e}", i + 1);
                return 1;
            }
        };
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let code = match serde_json::from_str::<ExperimentSpec>(trimmed) {
            Ok(spec) => run_reporting(&spec),
            Err(e) => {
                eprintln!("dslt batch: line {}: {e}", i + 1);
                2
            }
        };
        worst = worst.max(code);
    }
    worst
}

/// Entry point shared by the binary: returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match &cli.command {
        CliCommand::Batch { file } => run_batch(file),
        other => run_reporting(&other.to_spec().expect("single-run subcommand")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(command: Command, params: Params) -> ExperimentSpec {
        ExperimentSpec {
            command,
            params,
            output: OutputSpec::default(),
        }
    }

    #[test]
    fn validation_messages() {
        let s = spec(
            Command::Dslt,
            Params {
                hurst: Some(1.0),
                eps: Some(0.0),
                steps: Some(64),
                paths: Some(10),
                ..Params::default()
            },
        );
        let v = validate(&s);
        assert!(v.contains(&"hurst must lie strictly in (0,1)".to_string()), "{v:?}");
        assert!(v.contains(&"mollifier scale must be positive".to_string()), "{v:?}");
        let ok = spec(
            Command::Dslt,
            Params {
                hurst: Some(0.5),
                eps: Some(0.1),
                steps: Some(64),
                paths: Some(10),
                ..Params::default()
            },
        );
        assert!(validate(&ok).is_empty());
        let extra = spec(
            Command::Simulate,
            Params {
                hurst: Some(0.5),
                steps: Some(8),
                mmax: Some(3),
                ..Params::default()
            },
        );
        assert_eq!(validate(&extra), vec!["--mmax is not used by simulate".to_string()]);
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.0, 1.0, -0.1, 1e-300, 123456.789, 1.0 / 3.0, 5e-6, 2.5e17, f64::MIN_POSITIVE] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(fmt_f64(0.25), "0.25");
    }

    #[test]
    fn simulate_artifact_round_trips() {
        for format in [Format::Csv, Format::Json] {
            let mut s = spec(
                Command::Simulate,
                Params {
                    hurst: Some(0.5),
                    steps: Some(8),
                    t: Some(1.0),
                    seed: Some(7),
                    method: Some(SamplerMethod::Cholesky),
                    ..Params::default()
                },
            );
            s.output.format = format;
            let tab = execute(&s).unwrap();
            let text = render(&s, &tab);
            let a = parse_artifact(&text).unwrap();
            assert_eq!(a.spec, s);
            assert_eq!(a.version, VERSION);
            let vals = a.column_f64("value").unwrap();
            assert_eq!(vals.len(), 9);
            assert_eq!(vals[0], 0.0);
            for (row, v) in tab.rows.iter().zip(&vals) {
                assert_eq!(row[1], Cell::F(*v));
            }
        }
    }

    #[test]
    fn counterexample_table() {
        let s = spec(
            Command::Bounds,
            Params {
                hurst: Some(0.5),
                case: Some("ii-counterexample".into()),
                b: Some(1.0),
                deltas: Some(vec![0.01, 0.001]),
                ..Params::default()
            },
        );
        let tab = execute(&s).unwrap();
        let a = parse_artifact(&render(&s, &tab)).unwrap();
        let r = a.column_f64("ratio").unwrap();
        assert!((r[0] - 0.0196).abs() < 1e-4 && (r[1] - 0.001996).abs() < 1e-6);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(main_with_args(["dslt", "simulate", "--hurst", "0.5"]), 2);
        assert_eq!(main_with_args(["dslt", "simulate", "--bogus"]), 2);
        assert_eq!(exit_code(&DsltError::Numerical("x".into())), 1);
    }
}
