//! Command-line front end: config parsing, orchestration, table output.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analytic::{self, OracleSettings};
use crate::axes::{Axis, AxisSet, AxisTriple};
use crate::calibration::{fit_least_squares, fit_mle, CalibrationReport, TimeSeries};
use crate::distributions::{johnson_sample, JohnsonSuParams, RandomSource};
use crate::flow::{
    solve_safe_zone, CrossingGeometry, FlowSpec, ToleranceStandard, DEFAULT_LATERAL_EXTENT, DEFAULT_SPEED_KT,
    DEFAULT_T_CROSS,
};
use crate::mc::{self, Counting, McEstimate, ScenarioConfig, ScenarioKind, CROSSING_PRESETS};
use crate::ou_process::{Monitoring, OuParams};
use crate::pmf::{EmpiricalPmf, Resolved, TaskloadPmf};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("comparison failed: {0}")]
    Comparison(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 3,
            CliError::Data(_) => 4,
            CliError::Numerical(_) => 5,
            CliError::Comparison(_) => 6,
            CliError::Io { .. } => 7,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn numerical(e: impl std::fmt::Display) -> CliError {
    CliError::Numerical(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Ls,
    Mle,
    Both,
}

#[derive(Debug, Parser)]
#[command(
    name = "flowload",
    version,
    about = "Controller taskload of stochastic aircraft flows"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct GlobalArgs {
    /// JSON config file; every field has a default.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Monte Carlo runs (or oracle paths for `analytic`).
    #[arg(long, global = true)]
    pub runs: Option<u64>,
    /// Simulation step in minutes; sampling step for `calibrate`.
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample deviations from the Johnson S_U generator.
    Generate {
        #[arg(long, default_value = "lateral")]
        axis: Axis,
        #[arg(long, default_value_t = 1000)]
        n: usize,
    },
    /// Fit OU parameters to a deviation series (one column per axis).
    Calibrate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        method: Method,
    },
    /// Analytic taskload PMFs for the configured scenario.
    Analytic,
    /// Monte Carlo taskload estimate for the configured scenario.
    Simulate,
    /// Analytic versus Monte Carlo, failing above the configured TV threshold.
    Compare,
    /// Solve safe-zone bounds for crossing geometries.
    SafeZone {
        /// Crossing angles in degrees; defaults to the configured geometry or the presets.
        #[arg(long, value_delimiter = ',')]
        alpha: Vec<f64>,
    },
}

/// Flow as written in a config file: a named standard, explicit bounds, or both
/// (explicit bounds win).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowEntry {
    pub intensity_per_hour: f64,
    #[serde(default)]
    pub standard: Option<ToleranceStandard>,
    #[serde(default)]
    pub tolerance: Option<AxisTriple<f64>>,
    #[serde(default = "d_t_cross")]
    pub t_cross: f64,
    #[serde(default = "d_speed")]
    pub speed_kt: f64,
    #[serde(default = "d_extent")]
    pub lateral_extent: f64,
}

fn d_t_cross() -> f64 {
    DEFAULT_T_CROSS
}
fn d_speed() -> f64 {
    DEFAULT_SPEED_KT
}
fn d_extent() -> f64 {
    DEFAULT_LATERAL_EXTENT
}

impl FlowEntry {
    pub fn to_spec(&self) -> FlowSpec {
        FlowSpec {
            intensity_per_hour: self.intensity_per_hour,
            t_cross: self.t_cross,
            speed_kt: self.speed_kt,
            tolerance: self
                .tolerance
                .unwrap_or_else(|| self.standard.unwrap_or(ToleranceStandard::Stringent).bounds()),
            lateral_extent: self.lateral_extent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    #[serde(default = "d_kind")]
    pub kind: ScenarioKind,
    /// Empty means the preset for `kind`: one 60/h stringent lane, four 60/h
    /// lanes from stringent to lax, or two 2.5/h stringent flows crossing.
    #[serde(default)]
    pub flows: Vec<FlowEntry>,
    /// Crossing geometry; `t_safe` is solved when absent.
    #[serde(default)]
    pub geometry: Option<CrossingGeometry>,
    #[serde(default = "d_horizon")]
    pub horizon: f64,
    #[serde(default = "d_dt")]
    pub dt: f64,
    /// Defaults to the experiment tables for the first flow's intensity.
    #[serde(default)]
    pub n_runs: Option<u64>,
    #[serde(default)]
    pub axes: AxisSet,
    #[serde(default)]
    pub counting: Counting,
    #[serde(default)]
    pub monitoring: Monitoring,
    #[serde(default)]
    pub reset: f64,
}

fn d_kind() -> ScenarioKind {
    ScenarioKind::SingleLane
}
fn d_horizon() -> f64 {
    mc::DEFAULT_HORIZON
}
fn d_dt() -> f64 {
    mc::DEFAULT_DT
}

impl Default for ScenarioSection {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields default")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    #[serde(default = "d_threshold")]
    pub tv_threshold: f64,
    /// Which MC table to compare: `lateral`, `deviation_control`, `conflict_resolution` or `total`.
    #[serde(default = "d_target")]
    pub target: String,
}

fn d_threshold() -> f64 {
    0.02
}
fn d_target() -> String {
    "total".into()
}

impl Default for CompareSection {
    fn default() -> Self {
        Self {
            tv_threshold: d_threshold(),
            target: d_target(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "JohnsonSuParams::defaults")]
    pub distributions: AxisTriple<JohnsonSuParams>,
    #[serde(default = "OuParams::defaults")]
    pub ou: AxisTriple<OuParams>,
    #[serde(default)]
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub oracle: OracleSettings,
    #[serde(default)]
    pub compare: CompareSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl Default for ConfigFile {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: 0,
            distributions: JohnsonSuParams::defaults(),
            ou: OuParams::defaults(),
            scenario: ScenarioSection::default(),
            oracle: OracleSettings::default(),
            compare: CompareSection::default(),
            output: OutputSection::default(),
        }
    }
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: ConfigFile = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "schema_version {} unsupported (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::parse(&text)
    }

    /// Applies command-line overrides.
    pub fn with_overrides(mut self, g: &GlobalArgs) -> Self {
        if let Some(s) = g.seed {
            self.seed = s;
            self.oracle.seed = s;
        }
        if let Some(dt) = g.dt {
            self.scenario.dt = dt;
            self.oracle = self.oracle.with_dt(dt);
        }
        if let Some(r) = g.runs {
            self.scenario.n_runs = Some(r);
        }
        if let Some(f) = g.format {
            self.output.format = f;
        }
        if let Some(o) = &g.out {
            self.output.dir = Some(o.clone());
        }
        self
    }

    /// Stable hash of everything that shapes the numbers; the output section is left out.
    pub fn hash(&self) -> String {
        let numeric = ConfigFile {
            output: OutputSection::default(),
            ..self.clone()
        };
        let text = serde_json::to_string(&numeric).expect("config serializes");
        Sha256::digest(text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn flows(&self) -> Vec<FlowSpec> {
        if !self.scenario.flows.is_empty() {
            return self.scenario.flows.iter().map(FlowEntry::to_spec).collect();
        }
        match self.scenario.kind {
            ScenarioKind::SingleLane => vec![FlowSpec::new(60.0, ToleranceStandard::Stringent)],
            ScenarioKind::Multilane => ToleranceStandard::ALL.iter().map(|&s| FlowSpec::new(60.0, s)).collect(),
            ScenarioKind::Crossing => vec![FlowSpec::new(2.5, ToleranceStandard::Stringent); 2],
        }
    }

    /// Geometry with `t_safe` filled in, solving when not prescribed.
    pub fn geometry(&self) -> Result<CrossingGeometry, CliError> {
        let g = self
            .scenario
            .geometry
            .clone()
            .unwrap_or_else(|| CrossingGeometry::standard(90.0));
        if g.t_safe.is_some() {
            g.validate().map_err(|e| CliError::Config(e.to_string()))?;
            return Ok(g);
        }
        let speed = self.flows().first().map_or(DEFAULT_SPEED_KT, |f| f.speed_kt);
        solve_safe_zone(&g, speed).map_err(numerical)
    }

    pub fn scenario_config(&self) -> Result<ScenarioConfig, CliError> {
        let s = &self.scenario;
        let flows = self.flows();
        let lambda = flows.first().map_or(0.0, |f| f.intensity_per_hour);
        let default_runs = match s.kind {
            ScenarioKind::SingleLane => mc::single_lane_runs(lambda),
            ScenarioKind::Multilane => mc::multilane_runs(lambda),
            ScenarioKind::Crossing => {
                let alpha = s.geometry.as_ref().map_or(90.0, |g| g.alpha_deg);
                CROSSING_PRESETS.iter().find(|p| p.0 == alpha).map_or(10_000, |p| p.2)
            }
        };
        let cfg = ScenarioConfig {
            kind: s.kind,
            flows,
            geometry: if s.kind == ScenarioKind::Crossing {
                Some(self.geometry()?)
            } else {
                None
            },
            ou: self.ou,
            horizon: s.horizon,
            dt: s.dt,
            n_runs: s.n_runs.unwrap_or(default_runs),
            seed: self.seed,
            axes: s.axes,
            counting: s.counting,
            monitoring: s.monitoring,
            reset: s.reset,
        };
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }
}

/// A named table of preformatted cells.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Extra key/value lines written with the provenance block.
    pub notes: BTreeMap<String, String>,
}

impl Table {
    fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            notes: BTreeMap::new(),
        }
    }

    fn note(mut self, k: &str, v: impl ToString) -> Self {
        self.notes.insert(k.into(), v.to_string());
        self
    }
}

pub fn analytic_table(name: &str, p: &TaskloadPmf) -> Table {
    let mut t = Table::new(name, &["n", "prob"]).note("truncation_mass", p.truncation_mass);
    for (n, v) in p.probs.iter().enumerate() {
        t.rows.push(vec![n.to_string(), v.to_string()]);
    }
    t
}

/// Bins never observed are written as `<floor` rather than as a point value.
pub fn mc_table(name: &str, e: &EmpiricalPmf) -> Table {
    let mut t = Table::new(name, &["n", "prob", "ci_lo", "ci_hi"]).note("resolution_floor", e.resolution_floor());
    for n in 0..e.counts.len() {
        let (lo, hi) = e.ci95(n);
        let prob = match e.resolved(n) {
            Resolved::Value(v) => v.to_string(),
            Resolved::BelowFloor(f) => format!("<{f}"),
        };
        t.rows.push(vec![n.to_string(), prob, lo.to_string(), hi.to_string()]);
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub command: String,
    pub schema_version: u32,
    pub seed: u64,
    pub config_hash: String,
    pub tool_version: String,
    pub n_runs: Option<u64>,
    pub horizon: Option<f64>,
}

impl Provenance {
    fn lines(&self) -> Vec<(String, String)> {
        let mut v = vec![
            ("command".into(), self.command.clone()),
            ("schema_version".into(), self.schema_version.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("config_hash".into(), self.config_hash.clone()),
            ("tool_version".into(), self.tool_version.clone()),
        ];
        if let Some(n) = self.n_runs {
            v.push(("n_runs".into(), n.to_string()));
        }
        if let Some(h) = self.horizon {
            v.push(("horizon".into(), h.to_string()));
        }
        v
    }
}

/// Writes `bytes` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(bytes).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn render_csv(prov: &Provenance, t: &Table) -> Result<Vec<u8>, CliError> {
    let mut out = Vec::new();
    for (k, v) in prov.lines() {
        writeln!(out, "# {k}: {v}").expect("vec write");
    }
    for (k, v) in &t.notes {
        writeln!(out, "# {k}: {v}").expect("vec write");
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&t.columns).map_err(|e| CliError::Data(e.to_string()))?;
    for r in &t.rows {
        w.write_record(r).map_err(|e| CliError::Data(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::Data(e.to_string()))
}

/// Writes tables under `dir`: one CSV per table, or a single JSON document.
pub fn emit(dir: &Path, format: Format, prov: &Provenance, tables: &[Table]) -> Result<Vec<PathBuf>, CliError> {
    let mut written = Vec::new();
    match format {
        Format::Csv => {
            for t in tables {
                let path = dir.join(format!("{}.csv", t.name));
                write_atomic(&path, &render_csv(prov, t)?)?;
                written.push(path);
            }
        }
        Format::Json => {
            let doc = serde_json::json!({ "provenance": prov, "tables": tables });
            let path = dir.join(format!("{}.json", prov.command));
            let mut text = serde_json::to_string_pretty(&doc).expect("json");
            text.push('\n');
            write_atomic(&path, text.as_bytes())?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Parses a CSV of deviations, skipping `#` comment lines.
pub fn read_series(path: &Path) -> Result<BTreeMap<Axis, Vec<f64>>, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
        .clone();
    let mut cols: Vec<(usize, Axis)> = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        match Axis::from_column(h.trim()) {
            Some(a) => cols.push((i, a)),
            None => {
                return Err(CliError::Data(format!(
                    "{}: unknown column `{h}` (expected lat_nm, vert_ft or long_nm)",
                    path.display()
                )))
            }
        }
    }
    let mut out: BTreeMap<Axis, Vec<f64>> = cols.iter().map(|&(_, a)| (a, Vec::new())).collect();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Data(format!("{}: row {}: {e}", path.display(), row + 1)))?;
        for &(i, a) in &cols {
            let cell = rec.get(i).unwrap_or("");
            let v: f64 = cell.trim().parse().map_err(|_| {
                CliError::Data(format!(
                    "{}: row {}, column `{}`: cannot parse `{cell}` as a number",
                    path.display(),
                    row + 1,
                    a.column()
                ))
            })?;
            out.get_mut(&a).expect("column registered").push(v);
        }
    }
    Ok(out)
}

fn calibration_row(axis: Axis, r: &CalibrationReport) -> Vec<String> {
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
    vec![
        axis.column().to_string(),
        r.method.to_string(),
        opt(r.kappa()),
        opt(r.mu()),
        opt(r.sigma()),
        r.a_hat.to_string(),
        r.b_hat.to_string(),
        r.sigma_eps_hat.to_string(),
        r.loglik.to_string(),
        opt(r.stationary_sd),
        r.flags
            .iter()
            .map(|f| {
                serde_json::to_value(f)
                    .expect("flag")
                    .as_str()
                    .unwrap_or_default()
                    .to_string()
            })
            .collect::<Vec<_>>()
            .join(";"),
    ]
}

pub fn cmd_generate(cfg: &ConfigFile, axis: Axis, n: usize) -> Vec<Table> {
    let p = cfg.distributions.get(axis);
    let xs = if n == 0 {
        Vec::new()
    } else {
        johnson_sample(p, RandomSource::new(cfg.seed, 0), n)
    };
    let mut t = Table::new(format!("fte_{axis}"), &[axis.column()]);
    t.rows = xs.into_iter().map(|x| vec![x.to_string()]).collect();
    vec![t]
}

pub fn cmd_calibrate(input: &Path, method: Method, dt: f64) -> Result<Vec<Table>, CliError> {
    let series = read_series(input)?;
    let mut t = Table::new(
        "calibration",
        &[
            "axis",
            "method",
            "kappa",
            "mu",
            "sigma",
            "a_hat",
            "b_hat",
            "sigma_eps_hat",
            "loglik",
            "stationary_sd",
            "flags",
        ],
    );
    for (axis, values) in series {
        let ts = TimeSeries::new(values, dt).map_err(|e| CliError::Data(format!("{}: {e}", axis.column())))?;
        let ls = matches!(method, Method::Ls | Method::Both)
            .then(|| fit_least_squares(&ts))
            .transpose()
            .map_err(|e| CliError::Data(format!("{}: {e}", axis.column())))?;
        let mle = matches!(method, Method::Mle | Method::Both)
            .then(|| fit_mle(&ts))
            .transpose()
            .map_err(|e| CliError::Data(format!("{}: {e}", axis.column())))?;
        for r in ls.iter().chain(mle.iter()) {
            t.rows.push(calibration_row(axis, r));
        }
        if let (Some(a), Some(b)) = (&ls, &mle) {
            let rel = |x: Option<f64>, y: Option<f64>| match (x, y) {
                (Some(x), Some(y)) => ((x - y).abs() / x.abs().max(y.abs()).max(f64::MIN_POSITIVE)).to_string(),
                _ => "undefined".into(),
            };
            t.notes
                .insert(format!("{}_kappa_rel_diff", axis.column()), rel(a.kappa(), b.kappa()));
            t.notes
                .insert(format!("{}_mu_rel_diff", axis.column()), rel(a.mu(), b.mu()));
        }
    }
    Ok(vec![t])
}

pub fn cmd_analytic(cfg: &ConfigFile) -> Result<Vec<Table>, CliError> {
    let sc = cfg.scenario_config()?;
    let s = cfg.oracle;
    let mut tables = Vec::new();
    match sc.kind {
        ScenarioKind::SingleLane => {
            let p = analytic::lane_pmf(&sc.flows[0], &sc.ou, sc.axes, sc.horizon, &s).map_err(numerical)?;
            tables.push(analytic_table("analytic_total", &p));
        }
        ScenarioKind::Multilane => {
            let ps = analytic::multilane_prefixes(&sc.flows, &sc.ou, sc.axes, sc.horizon, &s).map_err(numerical)?;
            for (k, p) in ps.iter().enumerate() {
                tables.push(analytic_table(&format!("analytic_lanes_1_to_{}", k + 1), p));
            }
            if let Some(last) = ps.last() {
                tables.push(analytic_table("analytic_total", last));
            }
        }
        ScenarioKind::Crossing => {
            let g = sc.geometry.as_ref().expect("validated");
            let (control, conflicts, total) =
                analytic::crossing_split(g, &sc.flows, &sc.ou, sc.axes, &s).map_err(numerical)?;
            tables.push(analytic_table("analytic_deviation_control", &control));
            tables.push(analytic_table("analytic_conflict_resolution", &conflicts));
            tables.push(analytic_table("analytic_total", &total));
        }
    }
    Ok(tables)
}

pub fn simulate(cfg: &ConfigFile) -> Result<McEstimate, CliError> {
    let sc = cfg.scenario_config()?;
    mc::run(&sc).map_err(numerical)
}

pub fn mc_tables(e: &McEstimate) -> Vec<Table> {
    let mut tables = vec![
        mc_table("mc_lateral", &e.lateral),
        mc_table("mc_deviation_control", &e.deviation_control),
    ];
    if let Some(c) = &e.conflict_resolution {
        tables.push(mc_table("mc_conflict_resolution", c));
    }
    if let Some(c) = &e.conflict_episodes {
        tables.push(mc_table("mc_conflict_episodes", c));
    }
    if e.lane_prefixes.len() > 1 {
        for (k, p) in e.lane_prefixes.iter().enumerate() {
            tables.push(mc_table(&format!("mc_lanes_1_to_{}", k + 1), p));
        }
    }
    tables.push(mc_table("mc_total", &e.total).note("n_aircraft", e.n_aircraft));
    tables
}

pub fn cmd_compare(cfg: &ConfigFile) -> Result<(Vec<Table>, bool), CliError> {
    let analytic = cmd_analytic_pmf(cfg)?;
    let e = simulate(cfg)?;
    let target = cfg.compare.target.as_str();
    let (mc_pmf, an) = match target {
        "lateral" => {
            let mut lat_cfg = cfg.clone();
            lat_cfg.scenario.axes = AxisSet::LateralOnly;
            (&e.lateral, cmd_analytic_pmf(&lat_cfg)?.total)
        }
        "deviation_control" => (&e.deviation_control, analytic.control.clone()),
        "conflict_resolution" => (
            e.conflict_resolution
                .as_ref()
                .ok_or_else(|| CliError::Config("conflict_resolution needs a crossing scenario".into()))?,
            analytic
                .conflicts
                .clone()
                .ok_or_else(|| CliError::Config("conflict_resolution needs a crossing scenario".into()))?,
        ),
        "total" => (&e.total, analytic.total.clone()),
        other => return Err(CliError::Config(format!("unknown compare target `{other}`"))),
    };
    let report = mc::compare(&an, mc_pmf, cfg.compare.tv_threshold).map_err(numerical)?;
    let mut t = Table::new("comparison", &["n", "analytic", "mc", "z"])
        .note("tv", report.tv)
        .note("threshold", report.threshold)
        .note("target", target)
        .note("pass", report.pass);
    for (n, z) in report.z_scores.iter().enumerate() {
        t.rows.push(vec![
            n.to_string(),
            an.prob(n).to_string(),
            mc_pmf.prob(n).to_string(),
            z.to_string(),
        ]);
    }
    Ok((vec![t], report.pass))
}

struct AnalyticSet {
    control: TaskloadPmf,
    conflicts: Option<TaskloadPmf>,
    total: TaskloadPmf,
}

fn cmd_analytic_pmf(cfg: &ConfigFile) -> Result<AnalyticSet, CliError> {
    let sc = cfg.scenario_config()?;
    let s = cfg.oracle;
    Ok(match sc.kind {
        ScenarioKind::SingleLane => {
            let p = analytic::lane_pmf(&sc.flows[0], &sc.ou, sc.axes, sc.horizon, &s).map_err(numerical)?;
            AnalyticSet {
                control: p.clone(),
                conflicts: None,
                total: p,
            }
        }
        ScenarioKind::Multilane => {
            let ps = analytic::multilane_prefixes(&sc.flows, &sc.ou, sc.axes, sc.horizon, &s).map_err(numerical)?;
            let p = ps.last().expect("flows").clone();
            AnalyticSet {
                control: p.clone(),
                conflicts: None,
                total: p,
            }
        }
        ScenarioKind::Crossing => {
            let g = sc.geometry.as_ref().expect("validated");
            let (control, conflicts, total) =
                analytic::crossing_split(g, &sc.flows, &sc.ou, sc.axes, &s).map_err(numerical)?;
            AnalyticSet {
                control,
                conflicts: Some(conflicts),
                total,
            }
        }
    })
}

pub fn cmd_safe_zone(cfg: &ConfigFile, alphas: &[f64]) -> Result<Vec<Table>, CliError> {
    let base = cfg
        .scenario
        .geometry
        .clone()
        .unwrap_or_else(|| CrossingGeometry::standard(90.0));
    let angles: Vec<f64> = if !alphas.is_empty() {
        alphas.to_vec()
    } else if cfg.scenario.geometry.is_some() {
        vec![base.alpha_deg]
    } else {
        CROSSING_PRESETS.iter().map(|p| p.0).collect()
    };
    let speed = cfg.flows().first().map_or(DEFAULT_SPEED_KT, |f| f.speed_kt);
    let mut t = Table::new(
        "safe_zone",
        &[
            "alpha_deg",
            "e1_nm",
            "e2_nm",
            "d_min_nm",
            "x1_nm",
            "x2_nm",
            "t_safe_min",
        ],
    );
    for a in angles {
        let g = CrossingGeometry {
            alpha_deg: a,
            x1: None,
            x2: None,
            t_safe: None,
            ..base.clone()
        };
        let s = solve_safe_zone(&g, speed).map_err(numerical)?;
        t.rows.push(vec![
            a.to_string(),
            s.e1.to_string(),
            s.e2.to_string(),
            s.d_min.to_string(),
            s.x1.expect("solved").to_string(),
            s.x2.expect("solved").to_string(),
            s.t_safe.expect("solved").to_string(),
        ]);
    }
    Ok(vec![t])
}

/// Runs the CLI; returns the process exit code.
pub fn run(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    let cfg = match &cli.global.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    }
    .with_overrides(&cli.global);
    let out_dir = cfg.output.dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    let mut prov = Provenance {
        command: String::new(),
        schema_version: SCHEMA_VERSION,
        seed: cfg.seed,
        config_hash: cfg.hash(),
        tool_version: TOOL_VERSION.into(),
        n_runs: None,
        horizon: None,
    };
    let mut compare_failed = None;
    let tables = match cli.command {
        Command::Generate { axis, n } => {
            prov.command = "generate".into();
            cmd_generate(&cfg, axis, n)
        }
        Command::Calibrate { input, method } => {
            prov.command = "calibrate".into();
            cmd_calibrate(&input, method, cli.global.dt.unwrap_or(1.0))?
        }
        Command::Analytic => {
            prov.command = "analytic".into();
            prov.horizon = Some(cfg.scenario.horizon);
            prov.n_runs = Some(cfg.oracle.n_paths);
            cmd_analytic(&cfg)?
        }
        Command::Simulate => {
            prov.command = "simulate".into();
            let e = simulate(&cfg)?;
            prov.n_runs = Some(e.n_runs);
            prov.horizon = Some(cfg.scenario.horizon);
            mc_tables(&e)
        }
        Command::Compare => {
            prov.command = "compare".into();
            prov.n_runs = Some(cfg.scenario_config()?.n_runs);
            prov.horizon = Some(cfg.scenario.horizon);
            let (t, pass) = cmd_compare(&cfg)?;
            if !pass {
                compare_failed = Some(t[0].notes["tv"].clone());
            }
            t
        }
        Command::SafeZone { alpha } => {
            prov.command = "safe_zone".into();
            cmd_safe_zone(&cfg, &alpha)?
        }
    };
    let mut written = emit(&out_dir, cfg.output.format, &prov, &tables)?;
    // The resolved config reproduces every file above.
    let cfg_path = out_dir.join(format!("{}.config.json", prov.command));
    let mut text = serde_json::to_string_pretty(&cfg).expect("config serializes");
    text.push('\n');
    write_atomic(&cfg_path, text.as_bytes())?;
    written.push(cfg_path);
    if let Some(tv) = compare_failed {
        return Err(CliError::Comparison(format!(
            "TV {tv} exceeds threshold {}",
            cfg.compare.tv_threshold
        )));
    }
    Ok(written)
}
