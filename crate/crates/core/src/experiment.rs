//! Configuration-driven experiments: single runs, parameter sweeps, report
//! rendering and initial-data checks.
//!
//! Every entry point returns an [`ExitStatus`]; the command-line front end
//! maps it to the process exit code.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::{cumulative_trapezoid, AuxRecord, DiagnosticsRecord, DiagnosticsSuite};
use crate::error::{Error, Result};
use crate::generators::Generator;
use crate::grid::PeriodicGrid;
use crate::init::{build_mollifier, init_distances, initial_energy, regularize, InitDistances, RawInitialData};
use crate::integrator::{run_with, RunResult, StepConfig};
use crate::invariants::{check_run, CheckConfig, Outcome};
use crate::model::{ModelParams, State};
use crate::par::map_jobs;
use crate::snapshot;

pub const SCHEMA_VERSION: u32 = 1;

/// Mollification parameters visited by `check-init` when the config names none.
pub const DEFAULT_INIT_DELTAS: [f64; 5] = [0.2, 0.1, 0.05, 0.025, 0.0125];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Pass,
    Failure,
    ConfigError,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Pass => 0,
            ExitStatus::Failure => 1,
            ExitStatus::ConfigError => 2,
        }
    }

    fn worst(self, other: Self) -> Self {
        if self.code() >= other.code() {
            self
        } else {
            other
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Eps,
    Delta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
    /// Checkpoint interval in simulation time; 0 disables checkpoints.
    #[serde(default)]
    pub checkpoint_every: f64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_out(), checkpoint_every: 0.0 }
    }
}

fn default_eta0() -> f64 {
    crate::init::DEFAULT_ETA0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    /// Exponent offset of the particle-momentum regularization.
    #[serde(default = "default_eta0")]
    pub eta0: f64,
    pub grid: GridConfig,
    #[serde(default)]
    pub params: ModelParams,
    pub step: StepConfig,
    pub initial: Generator,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub checks: CheckConfig,
}

impl ExperimentConfig {
    pub fn grid(&self) -> Result<PeriodicGrid> {
        PeriodicGrid::new(self.grid.dim, self.grid.n).map_err(|e| Error::Config(format!("grid: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.grid()?;
        self.params
            .validate()
            .map_err(|e| Error::Config(format!("params: {}", strip_prefix(&e))))?;
        self.step.validate()?;
        self.initial.validate()?;
        if !(self.eta0 > 0.0) {
            return Err(Error::Config(format!("eta0 must be positive, got {}", self.eta0)));
        }
        if !(self.output.checkpoint_every >= 0.0) {
            return Err(Error::Config("output.checkpoint_every must be nonnegative".into()));
        }
        if let Some(sw) = &self.sweep {
            if sw.values.is_empty() {
                return Err(Error::Config("sweep.values must not be empty".into()));
            }
            if sw.values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::Config("sweep.values must be positive".into()));
            }
            if sw.values.windows(2).any(|w| w[1] >= w[0]) {
                return Err(Error::Config(
                    "sweep.values must be strictly decreasing toward 0".into(),
                ));
            }
            for &v in &sw.values {
                self.with_axis(sw.axis, v)
                    .params
                    .validate()
                    .map_err(|e| Error::Config(format!("sweep value {v}: {}", strip_prefix(&e))))?;
            }
        }
        Ok(())
    }

    /// Copy with the swept parameter set to `value`.
    pub fn with_axis(&self, axis: SweepAxis, value: f64) -> Self {
        let mut c = self.clone();
        match axis {
            SweepAxis::Eps => c.params.eps = value,
            SweepAxis::Delta => c.params.delta = value,
        }
        c.sweep = None;
        c
    }
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::InvalidParams(m) | Error::Config(m) => m.clone(),
        other => other.to_string(),
    }
}

/// Parse a `key=value` override; the value is read as a TOML literal and
/// falls back to a bare string.
fn parse_override(spec: &str) -> Result<(Vec<String>, toml::Value)> {
    let (key, value) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{spec}` is not of the form key=value")))?;
    let path: Vec<String> = key.trim().split('.').map(str::to_string).collect();
    if path.iter().any(String::is_empty) {
        return Err(Error::Config(format!("override `{spec}` has an empty key segment")));
    }
    let value = value.trim();
    let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    Ok((path, parsed))
}

fn apply_override(root: &mut toml::Table, path: &[String], value: toml::Value) -> Result<()> {
    let (last, parents) = path.split_last().expect("nonempty path");
    let mut table = root;
    for seg in parents {
        let entry = table
            .entry(seg.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override: `{seg}` is not a table")))?;
    }
    table.insert(last.clone(), value);
    Ok(())
}

/// Parse and validate a configuration text. Relative snapshot paths resolve
/// against `base_dir`.
pub fn parse_config(text: &str, overrides: &[String], base_dir: &Path) -> Result<ExperimentConfig> {
    let mut cfg: ExperimentConfig = if overrides.is_empty() {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?
    } else {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for o in overrides {
            let (path, value) = parse_override(o)?;
            apply_override(&mut table, &path, value)?;
        }
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?
    };
    if let Generator::Snapshot { path } = &mut cfg.initial {
        if path.is_relative() {
            *path = base_dir.join(&*path);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path, overrides: &[String]) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config(&text, overrides, base).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Raw data and the state the run starts from. With `delta > 0` the raw data
/// are mollified and lifted; a state checkpoint is resumed as is.
pub fn prepare_initial(cfg: &ExperimentConfig) -> Result<(RawInitialData, State)> {
    let grid = cfg.grid()?;
    if let Generator::Snapshot { path } = &cfg.initial {
        let blocks = snapshot::read_blocks(path)?;
        if snapshot::is_state(&blocks) {
            let s = snapshot::state_from_blocks(&blocks)?;
            if s.grid() != grid {
                return Err(Error::Config(format!(
                    "checkpoint `{}` does not match the configured grid",
                    path.display()
                )));
            }
            return Ok((RawInitialData::from_state(&s, cfg.eta0), s));
        }
    }
    let raw = cfg.initial.build(grid, cfg.seed, cfg.eta0)?;
    let p = &cfg.params;
    let s0 = if p.delta > 0.0 {
        let j = build_mollifier(p.delta, grid, p.gamma0)?;
        regularize(&raw, p.delta, &j)?.to_state()
    } else {
        raw.to_state().map_err(|e| {
            Error::Config(format!("initial data are not strictly positive ({e}); set params.delta > 0 to regularize"))
        })?
    };
    Ok((raw, s0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub kind: String,
    pub config: ExperimentConfig,
    pub status: String,
    pub message: Option<String>,
    pub passed: bool,
    pub steps: usize,
    pub dt_largest: f64,
    pub dt_smallest: f64,
    pub invariants: Vec<Outcome>,
    pub final_record: Option<DiagnosticsRecord>,
    pub final_aux: Option<AuxRecord>,
}

pub fn aux_csv_header(dim: usize) -> String {
    let mut cols = vec!["t".to_string(), "eta_dissipation".into(), "n_w2".into()];
    for name in ["m1", "m2"] {
        for a in ["x", "y", "z"].iter().take(dim) {
            cols.push(format!("{name}_{a}"));
        }
    }
    cols.extend(["eps_source".to_string(), "eps_sink".into()]);
    cols.extend(AuxRecord::EPS_COLUMNS.iter().map(|s| s.to_string()));
    cols.extend(AuxRecord::DELTA_COLUMNS.iter().map(|s| s.to_string()));
    cols.join(",")
}

pub fn aux_csv_row(a: &AuxRecord) -> String {
    let mut vals = vec![a.t, a.eta_dissipation, a.n_w2];
    vals.extend(&a.m1);
    vals.extend(&a.m2);
    vals.extend([a.eps_source, a.eps_sink]);
    vals.extend(a.eps_columns());
    vals.extend(a.delta_columns());
    vals.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(",")
}

fn write_csv(path: &Path, header: String, rows: impl Iterator<Item = String>) -> Result<()> {
    let mut out = header;
    out.push('\n');
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    fs::write(path, out).map_err(Error::from)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(path, text + "\n").map_err(Error::from)
}

/// Integrate one configuration (no sweep) and write its artifacts into `out`.
fn execute(cfg: &ExperimentConfig, out: &Path) -> Result<(RunSummary, RunResult)> {
    fs::create_dir_all(out)?;
    let (raw, s0) = prepare_initial(cfg)?;
    let diag = DiagnosticsSuite::from_raw(&raw)?;
    let every = cfg.output.checkpoint_every;
    let mut next_ckpt = if every > 0.0 { s0.t } else { f64::INFINITY };
    let mut ckpt_index = 0usize;
    let r = run_with(&s0, &cfg.params, &cfg.step, &diag, |s| {
        if s.t + 1e-12 >= next_ckpt {
            snapshot::write_state(&out.join(format!("checkpoint_{ckpt_index:04}.txt")), s)?;
            ckpt_index += 1;
            while next_ckpt <= s.t + 1e-12 {
                next_ckpt += every;
            }
        }
        Ok(())
    })?;
    let dim = cfg.grid.dim;
    write_csv(
        &out.join("diagnostics.csv"),
        DiagnosticsRecord::csv_header(dim),
        r.records.iter().map(|x| x.csv_row()),
    )?;
    write_csv(&out.join("aux.csv"), aux_csv_header(dim), r.aux.iter().map(aux_csv_row))?;
    let invariants = check_run(&r, &s0, &cfg.params, &cfg.step, &cfg.checks);
    let summary = RunSummary {
        schema_version: SCHEMA_VERSION,
        kind: "run".into(),
        config: cfg.clone(),
        status: serde_json::to_value(r.status)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default(),
        message: r.message.clone(),
        passed: invariants.iter().all(|o| o.passed),
        steps: r.steps,
        dt_largest: r.dt_largest,
        dt_smallest: r.dt_smallest,
        invariants,
        final_record: r.records.last().cloned(),
        final_aux: r.aux.last().cloned(),
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok((summary, r))
}

fn status_of(e: &Error) -> ExitStatus {
    match e {
        Error::Config(_) | Error::InvalidParams(_) | Error::InvalidGrid(_) | Error::Snapshot(_) => {
            ExitStatus::ConfigError
        }
        _ => ExitStatus::Failure,
    }
}

/// Outcome of a command: the exit status plus a human-readable line.
#[derive(Debug, Clone)]
pub struct CommandOutcome {
    pub status: ExitStatus,
    pub message: String,
}

impl CommandOutcome {
    fn from_error(e: &Error) -> Self {
        Self { status: status_of(e), message: e.to_string() }
    }
}

pub fn run_single(cfg: &ExperimentConfig, out: &Path) -> CommandOutcome {
    match execute(cfg, out) {
        Ok((summary, _)) => {
            let failed: Vec<&str> = summary
                .invariants
                .iter()
                .filter(|o| !o.passed)
                .map(|o| o.name.as_str())
                .collect();
            if failed.is_empty() {
                CommandOutcome {
                    status: ExitStatus::Pass,
                    message: format!("run {}: all {} checks passed", summary.status, summary.invariants.len()),
                }
            } else {
                CommandOutcome {
                    status: ExitStatus::Failure,
                    message: format!("run {}: failed {}", summary.status, failed.join(", ")),
                }
            }
        }
        Err(e) => CommandOutcome::from_error(&e),
    }
}

/// Time integral of each column, by trapezoid over the samples.
fn time_integrals<const K: usize>(aux: &[AuxRecord], cols: fn(&AuxRecord) -> [f64; K]) -> [f64; K] {
    let t: Vec<f64> = aux.iter().map(|a| a.t).collect();
    let mut out = [0.0; K];
    for (k, o) in out.iter_mut().enumerate() {
        let f: Vec<f64> = aux.iter().map(|a| cols(a)[k]).collect();
        *o = cumulative_trapezoid(&t, &f).last().copied().unwrap_or(0.0);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMember {
    pub value: f64,
    pub dir: PathBuf,
    pub status: String,
    pub passed: bool,
    pub message: Option<String>,
    /// Time-integrated columns of the swept axis, in declaration order.
    pub integrated: Vec<f64>,
    pub final_record: Option<DiagnosticsRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub schema_version: u32,
    pub kind: String,
    pub config: ExperimentConfig,
    pub axis: SweepAxis,
    pub columns: Vec<String>,
    pub members: Vec<SweepMember>,
    pub passed: bool,
    pub invariants: Vec<Outcome>,
}

/// Positive and strictly decreasing along the sweep.
pub fn trend_outcomes(columns: &[String], members: &[SweepMember]) -> Vec<Outcome> {
    columns
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let vals: Vec<f64> = members.iter().map(|m| m.integrated[k]).collect();
            let positive = vals.iter().all(|v| *v > 0.0);
            let decreasing = vals.windows(2).all(|w| w[1] < w[0]);
            let worst_step = vals
                .windows(2)
                .map(|w| w[1] - w[0])
                .fold(f64::NEG_INFINITY, f64::max);
            Outcome {
                name: format!("trend-{name}"),
                anchor: "vanishing regularization".into(),
                passed: positive && decreasing,
                value: if vals.len() < 2 { 0.0 } else { worst_step },
                bound: 0.0,
                detail: vals.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(" > "),
            }
        })
        .collect()
}

pub fn run_sweep(cfg: &ExperimentConfig, out: &Path) -> CommandOutcome {
    let Some(sweep) = cfg.sweep.clone() else {
        return CommandOutcome {
            status: ExitStatus::ConfigError,
            message: "config has no [sweep] table".into(),
        };
    };
    if let Err(e) = fs::create_dir_all(out) {
        return CommandOutcome::from_error(&e.into());
    }
    let columns: Vec<String> = match sweep.axis {
        SweepAxis::Eps => AuxRecord::EPS_COLUMNS.iter().map(|s| s.to_string()).collect(),
        SweepAxis::Delta => AuxRecord::DELTA_COLUMNS.iter().map(|s| s.to_string()).collect(),
    };
    let jobs: Vec<(usize, f64)> = sweep.values.iter().copied().enumerate().collect();
    let results = map_jobs(jobs, |(i, value)| {
        let member_cfg = cfg.with_axis(sweep.axis, value);
        let dir = out.join(format!("member_{i:02}"));
        let res = execute(&member_cfg, &dir);
        (value, dir, res)
    });
    let mut members = Vec::new();
    let mut status = ExitStatus::Pass;
    for (value, dir, res) in results {
        match res {
            Ok((summary, r)) => {
                let integrated = match sweep.axis {
                    SweepAxis::Eps => time_integrals(&r.aux, AuxRecord::eps_columns).to_vec(),
                    SweepAxis::Delta => time_integrals(&r.aux, AuxRecord::delta_columns).to_vec(),
                };
                if !summary.passed {
                    status = status.worst(ExitStatus::Failure);
                }
                members.push(SweepMember {
                    value,
                    dir,
                    status: summary.status,
                    passed: summary.passed,
                    message: summary.message,
                    integrated,
                    final_record: summary.final_record,
                });
            }
            Err(e) => {
                status = status.worst(status_of(&e));
                members.push(SweepMember {
                    value,
                    dir,
                    status: "error".into(),
                    passed: false,
                    message: Some(e.to_string()),
                    integrated: vec![f64::NAN; columns.len()],
                    final_record: None,
                });
            }
        }
    }
    let mut invariants: Vec<Outcome> = members
        .iter()
        .map(|m| Outcome {
            name: format!("member-{}", m.value),
            anchor: "member run checks".into(),
            passed: m.passed,
            value: if m.passed { 0.0 } else { 1.0 },
            bound: 0.0,
            detail: m.message.clone().unwrap_or_else(|| m.status.clone()),
        })
        .collect();
    let trends = trend_outcomes(&columns, &members);
    if trends.iter().any(|o| !o.passed) {
        status = status.worst(ExitStatus::Failure);
    }
    invariants.extend(trends);

    let dim = cfg.grid.dim;
    let mut header = format!("{:?},status,passed,", sweep.axis).to_lowercase();
    header.push_str(&columns.iter().map(|c| format!("int_{c}")).collect::<Vec<_>>().join(","));
    header.push(',');
    header.push_str(
        &DiagnosticsRecord::csv_header(dim)
            .split(',')
            .map(|c| format!("final_{c}"))
            .collect::<Vec<_>>()
            .join(","),
    );
    let width = DiagnosticsRecord::csv_header(dim).split(',').count();
    let rows = members.iter().map(|m| {
        let mut row = format!("{:e},{},{},", m.value, m.status, m.passed);
        row.push_str(&m.integrated.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(","));
        row.push(',');
        row.push_str(&match &m.final_record {
            Some(r) => r.csv_row(),
            None => vec!["NaN"; width].join(","),
        });
        row
    });
    let summary = SweepSummary {
        schema_version: SCHEMA_VERSION,
        kind: "sweep".into(),
        config: cfg.clone(),
        axis: sweep.axis,
        columns: columns.clone(),
        passed: status == ExitStatus::Pass,
        members: members.clone(),
        invariants: invariants.clone(),
    };
    let written = write_csv(&out.join("sweep.csv"), header, rows)
        .and_then(|_| write_json(&out.join("summary.json"), &summary))
        .and_then(|_| fs::write(out.join("trend.md"), render_trend(&summary)).map_err(Error::from));
    if let Err(e) = written {
        return CommandOutcome::from_error(&e);
    }
    let failed: Vec<String> = invariants.iter().filter(|o| !o.passed).map(|o| o.name.clone()).collect();
    CommandOutcome {
        status,
        message: if failed.is_empty() {
            format!("sweep over {} values: all members and trends passed", members.len())
        } else {
            format!("sweep failed: {}", failed.join(", "))
        },
    }
}

fn render_trend(s: &SweepSummary) -> String {
    let mut out = String::new();
    let axis = format!("{:?}", s.axis).to_lowercase();
    let _ = writeln!(out, "# Sweep trend over {axis}\n");
    let _ = write!(out, "| column |");
    for m in &s.members {
        let _ = write!(out, " {axis}={} |", m.value);
    }
    let _ = writeln!(out, " trend |");
    let _ = writeln!(out, "|---|{}---|", "---|".repeat(s.members.len()));
    for (k, c) in s.columns.iter().enumerate() {
        let _ = write!(out, "| int {c} |");
        for m in &s.members {
            let _ = write!(out, " {:.4e} |", m.integrated[k]);
        }
        let ok = s
            .invariants
            .iter()
            .find(|o| o.name == format!("trend-{c}"))
            .map_or(false, |o| o.passed);
        let _ = writeln!(out, " {} |", if ok { "decreasing" } else { "NOT decreasing" });
    }
    out
}

/// Markdown table of summaries. Missing or unreadable files are listed as
/// SKIPPED and do not change the status.
pub fn report(paths: &[PathBuf]) -> (String, ExitStatus) {
    let mut status = ExitStatus::Pass;
    let mut table = String::from("| summary | kind | run status | checks | result |\n|---|---|---|---|---|\n");
    let mut details = String::new();
    for p in paths {
        let parsed = fs::read_to_string(p)
            .ok()
            .and_then(|t| serde_json::from_str::<serde_json::Value>(&t).ok());
        let Some(v) = parsed else {
            let _ = writeln!(table, "| {} | - | - | - | SKIPPED |", p.display());
            continue;
        };
        let invs = v["invariants"].as_array().cloned().unwrap_or_default();
        let n_pass = invs.iter().filter(|o| o["passed"].as_bool() == Some(true)).count();
        let passed = v["passed"].as_bool().unwrap_or(false);
        if !passed {
            status = status.worst(ExitStatus::Failure);
        }
        let run_status = v["status"].as_str().unwrap_or(if v["kind"] == "sweep" { "sweep" } else { "?" });
        let _ = writeln!(
            table,
            "| {} | {} | {} | {}/{} | {} |",
            p.display(),
            v["kind"].as_str().unwrap_or("?"),
            run_status,
            n_pass,
            invs.len(),
            if passed { "PASS" } else { "FAIL" }
        );
        for o in &invs {
            let _ = writeln!(
                details,
                "| {} | {} | {} | {} | {} | {} |",
                p.display(),
                o["name"].as_str().unwrap_or("?"),
                o["anchor"].as_str().unwrap_or("?"),
                fmt_num(&o["value"]),
                fmt_num(&o["bound"]),
                if o["passed"].as_bool() == Some(true) { "PASS" } else { "FAIL" }
            );
        }
    }
    if !details.is_empty() {
        table.push_str("\n| summary | invariant | property | value | bound | result |\n|---|---|---|---|---|---|\n");
        table.push_str(&details);
    }
    (table, status)
}

fn fmt_num(v: &serde_json::Value) -> String {
    match v.as_f64() {
        Some(x) => format!("{x:.3e}"),
        None => "-".into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitCheckRow {
    pub delta: f64,
    pub kernel_ok: bool,
    pub message: Option<String>,
    pub sigma: f64,
    pub witnessed_gradient_constant: f64,
    pub initial_energy: f64,
    pub distances: Option<InitDistances>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitCheckSummary {
    pub schema_version: u32,
    pub kind: String,
    pub rows: Vec<InitCheckRow>,
    pub invariants: Vec<Outcome>,
    pub passed: bool,
}

/// Mollifier constraints, regularized-data energy and the convergence of the
/// regularized data along decreasing `delta`.
pub fn check_init(cfg: &ExperimentConfig, out: &Path) -> CommandOutcome {
    let grid = match cfg.grid() {
        Ok(g) => g,
        Err(e) => return CommandOutcome::from_error(&e),
    };
    let raw = match cfg.initial.build(grid, cfg.seed, cfg.eta0) {
        Ok(r) => r,
        Err(e) => return CommandOutcome::from_error(&e),
    };
    let deltas: Vec<f64> = match &cfg.sweep {
        Some(SweepConfig { axis: SweepAxis::Delta, values }) => values.clone(),
        _ if cfg.params.delta > 0.0 => vec![cfg.params.delta],
        _ => DEFAULT_INIT_DELTAS.to_vec(),
    };
    let mut rows = Vec::new();
    for &delta in &deltas {
        let p = ModelParams { delta, ..cfg.params };
        let row = build_mollifier(delta, grid, p.gamma0).and_then(|j| {
            let reg = regularize(&raw, delta, &j)?;
            Ok(InitCheckRow {
                delta,
                kernel_ok: true,
                message: None,
                sigma: j.width(),
                witnessed_gradient_constant: j.witnessed_constant(),
                initial_energy: initial_energy(&reg, &p)?,
                distances: Some(init_distances(&raw, &reg, p.gamma)),
            })
        });
        rows.push(row.unwrap_or_else(|e| InitCheckRow {
            delta,
            kernel_ok: false,
            message: Some(e.to_string()),
            sigma: f64::NAN,
            witnessed_gradient_constant: f64::NAN,
            initial_energy: f64::NAN,
            distances: None,
        }));
    }
    let mut invariants: Vec<Outcome> = rows
        .iter()
        .map(|r| Outcome {
            name: format!("mollifier-{}", r.delta),
            anchor: "mollifier constraints".into(),
            passed: r.kernel_ok,
            value: r.witnessed_gradient_constant,
            bound: crate::init::GRADIENT_CONSTANT,
            detail: r.message.clone().unwrap_or_else(|| format!("sigma = {:e}", r.sigma)),
        })
        .collect();
    for (k, name) in InitDistances::NAMES.iter().enumerate() {
        let vals: Vec<f64> = rows
            .iter()
            .map(|r| r.distances.map_or(f64::NAN, |d| d.tracked()[k]))
            .collect();
        invariants.push(Outcome {
            name: format!("converges-{name}"),
            anchor: "regularized initial data".into(),
            passed: vals.iter().all(|v| v.is_finite()) && vals.windows(2).all(|w| w[1] < w[0]),
            // Largest consecutive change; negative when every step decreases.
            value: vals.windows(2).map(|w| w[1] - w[0]).reduce(f64::max).unwrap_or(0.0),
            bound: 0.0,
            detail: vals.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(" > "),
        });
    }
    let passed = invariants.iter().all(|o| o.passed);
    let summary = InitCheckSummary {
        schema_version: SCHEMA_VERSION,
        kind: "check-init".into(),
        rows,
        invariants,
        passed,
    };
    let written = fs::create_dir_all(out)
        .map_err(Error::from)
        .and_then(|_| write_json(&out.join("summary.json"), &summary));
    if let Err(e) = written {
        return CommandOutcome::from_error(&e);
    }
    CommandOutcome {
        status: if passed { ExitStatus::Pass } else { ExitStatus::Failure },
        message: format!(
            "check-init over {} delta values: {}",
            deltas.len(),
            if passed { "all constraints and convergences hold" } else { "FAILED" }
        ),
    }
}
