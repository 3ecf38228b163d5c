//! Command orchestration: validation, the limit curve, single solves, ε-sweeps
//! and regeneration of tables from stored records.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::diagnostics::{
    boundary_mass, concentration_report, decay_fit, omega, profile_error, refine_max, select_ground_state,
    sigma_membership, BranchSummary, ConcentrationInput, ConcentrationReport, Selection,
};
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::io::{self, ErrorRecord, Manifest, StageStatus};
use crate::localization::{
    barycenter_h, beta_map, build_boxes, solve_branch, solve_branches, BoxFamily, BranchLabel, BranchOutcome,
};
use crate::models::{validate_nonlinearity, validate_potential, NonlinearityCheck, NonlinearityReport, PotentialReport};
use crate::solver::{solve_limit, LimitSolution};
use crate::variational::Problem;

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL: &str = "fracsemi";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Check,
    Limit,
    Solve,
    Sweep,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Limit => "limit",
            Command::Solve => "solve",
            Command::Sweep => "sweep",
            Command::Report => "report",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub potential: PotentialReport,
    pub nonlinearity: Option<NonlinearityReport>,
    pub boxes: Option<BoxFamily>,
    pub failures: Vec<String>,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Runs every hypothesis validator on the configured model.
pub fn validate(cfg: &ExperimentConfig) -> ValidationReport {
    let d = cfg.problem.dim;
    let n = [256, 128, 48][d - 1];
    let mut failures = Vec::new();
    let potential = match Grid::new(d, cfg.problem.box_r0, n) {
        Ok(grid) => validate_potential(&cfg.potential, &grid),
        Err(e) => {
            return ValidationReport {
                potential: empty_potential_report(),
                nonlinearity: None,
                boxes: None,
                failures: vec![format!("grid: {e}")],
            }
        }
    };
    for (name, pass) in [("V1", potential.v1_pass), ("V2", potential.v2_pass), ("V3", potential.v3_pass)] {
        if !pass {
            failures.push(format!("{name}: {}", potential.messages.join("; ")));
        }
    }
    let nonlinearity = match cfg.nonlinearity.build() {
        Ok(spec) => {
            let check = NonlinearityCheck::new(d, cfg.problem.alpha, Some(cfg.potential.sup_abs()));
            let report = validate_nonlinearity(&spec, &check);
            for name in report.failures() {
                let detail = match name {
                    "f1" => &report.f1.detail,
                    "f2" => &report.f2.detail,
                    "f3" => &report.f3.detail,
                    "f4" => &report.f4.detail,
                    _ => &report.f5.detail,
                };
                failures.push(format!("{name}: {detail}"));
            }
            Some(report)
        }
        Err(e) => {
            failures.push(format!("nonlinearity: {e}"));
            None
        }
    };
    let boxes = match build_boxes(
        &cfg.potential,
        cfg.boxes.half_side,
        cfg.boxes.bound,
        cfg.boxes.margin,
    ) {
        Ok(b) => Some(b),
        Err(e) => {
            failures.push(format!("boxes: {e}"));
            None
        }
    };
    ValidationReport {
        potential,
        nonlinearity,
        boxes,
        failures,
    }
}

fn empty_potential_report() -> PotentialReport {
    PotentialReport {
        v0: f64::NAN,
        v0_grid: f64::NAN,
        v_inf_proxy: f64::NAN,
        margin: f64::NAN,
        minima: Vec::new(),
        v1_pass: false,
        v2_pass: false,
        v3_pass: false,
        messages: Vec::new(),
    }
}

fn require_valid(cfg: &ExperimentConfig) -> Result<(ValidationReport, BoxFamily)> {
    let report = validate(cfg);
    if !report.all_pass() {
        return Err(Error::Validation(report.failures.join(" | ")));
    }
    let boxes = report.boxes.clone().expect("validated boxes");
    Ok((report, boxes))
}

/// Rescaled grid for one ε: half width `min(R0/ε, R_cap)` at fixed spacing.
pub fn grid_for_eps(cfg: &ExperimentConfig, eps: f64) -> Result<Grid> {
    let p = &cfg.problem;
    let half = (p.box_r0 / eps).min(p.box_cap);
    let mut n = (2.0 * half / p.spacing - 1e-9).ceil().max(8.0);
    if n % 2.0 == 1.0 {
        n += 1.0;
    }
    let points = n.powi(p.dim as i32);
    if points > p.max_points as f64 {
        return Err(Error::BudgetExceeded {
            points: points.min(usize::MAX as f64) as usize,
            budget: p.max_points,
        });
    }
    Grid::with_spacing(p.dim, half, p.spacing)
}

pub fn limit_grid(cfg: &ExperimentConfig) -> Result<Grid> {
    Grid::with_spacing(cfg.problem.dim, cfg.problem.limit_half_width, cfg.problem.spacing)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitRecord {
    pub level: f64,
    pub energy: f64,
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
    pub best_seed: usize,
    pub seed_energies: Vec<Option<f64>>,
    pub max_point: Vec<f64>,
    pub negative_mass: f64,
}

impl LimitRecord {
    fn from_solution(s: &LimitSolution) -> Self {
        Self {
            level: s.level,
            energy: s.energy(),
            converged: s.best.converged,
            iterations: s.best.iterations,
            residual: s.best.residual,
            best_seed: s.best_index,
            seed_energies: s.energies.clone(),
            max_point: refine_max(&s.best.u).unwrap_or_else(|_| s.best.max_point.clone()),
            negative_mass: s.best.negative_mass,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchRecord {
    pub eps: f64,
    pub index: usize,
    pub label: BranchLabel,
    pub converged: bool,
    pub iterations: usize,
    pub residual: Option<f64>,
    pub energy: Option<f64>,
    pub nehari_residual: Option<f64>,
    pub barycenter: Option<Vec<f64>>,
    pub beta: Option<Vec<f64>>,
    /// Refined maximum point `η` in rescaled variables.
    pub max_point: Option<Vec<f64>>,
    /// `V(ε η)`.
    pub v_at_max: Option<f64>,
    pub profile_error: Option<f64>,
    pub decay_exponent: Option<f64>,
    pub decay_r2: Option<f64>,
    pub boundary_mass: Option<f64>,
    pub negative_mass: Option<f64>,
    pub probe_energy: Option<f64>,
    pub sigma_member: bool,
    pub trusted: bool,
    pub error: Option<String>,
}

impl BranchRecord {
    pub fn summary(&self) -> BranchSummary {
        BranchSummary {
            index: self.index,
            label: self.label,
            converged: self.converged,
            energy: self.energy.unwrap_or(f64::INFINITY),
            barycenter: self.barycenter.clone().unwrap_or_default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub eps: f64,
    pub half_width: f64,
    pub points_per_axis: usize,
    /// Minimum energy over the branches that produced a solution.
    pub c_eps: Option<f64>,
    pub omega: f64,
    pub branches: Vec<BranchRecord>,
    pub sigma_members: Vec<usize>,
    pub ground_state: Option<Selection>,
    pub selection_error: Option<String>,
    pub min_relative_distance: Option<f64>,
    pub distinct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecords {
    pub v0: f64,
    pub c_v0: f64,
    pub limit: LimitRecord,
    pub boxes: BoxFamily,
    pub records: Vec<SweepRecord>,
    pub concentration: ConcentrationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecords {
    pub schema_version: u32,
    pub command: Command,
    pub rng_seed: u64,
    #[serde(default)]
    pub validation: Option<ValidationReport>,
    #[serde(default)]
    pub limit: Option<Vec<LimitRecord>>,
    #[serde(default)]
    pub solve: Option<BranchRecord>,
    #[serde(default)]
    pub sweep: Option<SweepRecords>,
}

impl RunRecords {
    fn new(command: Command, rng_seed: u64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command,
            rng_seed,
            validation: None,
            limit: None,
            solve: None,
            sweep: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(text).map_err(|e| Error::Decode(e.to_string()))?;
        if r.schema_version != SCHEMA_VERSION {
            return Err(Error::Decode(format!("unsupported schema version {}", r.schema_version)));
        }
        Ok(r)
    }
}

/// Ground state of the limit problem at `V0` on the configured limit grid.
pub fn limit_ground_state(cfg: &ExperimentConfig) -> Result<LimitSolution> {
    let nl = cfg.nonlinearity.build()?;
    let grid = limit_grid(cfg)?;
    solve_limit(cfg.potential.v0(), &nl, &grid, cfg.problem.alpha, &cfg.solve_options())
}

fn branch_record(
    cfg: &ExperimentConfig,
    p: &Problem,
    outcome: &BranchOutcome,
    w_limit: &Field,
    c_v0: f64,
) -> BranchRecord {
    let eps = p.eps();
    let mut rec = BranchRecord {
        eps,
        index: outcome.index,
        label: outcome.label,
        converged: false,
        iterations: 0,
        residual: None,
        energy: None,
        nehari_residual: None,
        barycenter: outcome.barycenter.clone(),
        beta: None,
        max_point: None,
        v_at_max: None,
        profile_error: None,
        decay_exponent: None,
        decay_r2: None,
        boundary_mass: None,
        negative_mass: None,
        probe_energy: outcome.probe_energy,
        sigma_member: false,
        trusted: false,
        error: outcome.error.as_ref().map(ToString::to_string),
    };
    let Some(r) = &outcome.result else {
        return rec;
    };
    rec.converged = r.converged;
    rec.iterations = r.iterations;
    rec.residual = Some(r.residual);
    rec.energy = Some(r.report.total);
    rec.nehari_residual = Some(r.report.nehari_residual);
    rec.negative_mass = Some(r.negative_mass);
    if cfg.boxes.barycenter_exponent != 2.0 {
        rec.barycenter = barycenter_h(&r.u, cfg.boxes.barycenter_exponent, eps, cfg.boxes.bound).ok();
    }
    rec.beta = beta_map(&r.u, cfg.beta_radius(), eps).ok();
    let eta = refine_max(&r.u).unwrap_or_else(|_| r.max_point.clone());
    let original: Vec<f64> = eta.iter().map(|v| eps * v).collect();
    rec.v_at_max = Some(cfg.potential.eval(&original));
    rec.profile_error = profile_error(&r.u, w_limit, &eta, p.alpha()).ok();
    let half = p.grid().half_width();
    let [lo, hi] = cfg.diagnostics.decay_window;
    if let Ok(fit) = decay_fit(&r.u, &eta, [lo * half, hi * half], cfg.diagnostics.decay_model) {
        rec.decay_exponent = Some(fit.exponent);
        rec.decay_r2 = Some(fit.r2);
    }
    let bm = boundary_mass(&r.u);
    rec.boundary_mass = Some(bm);
    rec.sigma_member = r.converged && sigma_membership(r, c_v0, omega(eps, c_v0));
    rec.trusted = r.converged && bm < cfg.diagnostics.boundary_mass_limit;
    rec.max_point = Some(eta);
    rec
}

fn sweep_one(
    cfg: &ExperimentConfig,
    eps: f64,
    boxes: &BoxFamily,
    w_limit: &Field,
    c_v0: f64,
) -> Result<(SweepRecord, Vec<(usize, Field)>)> {
    let grid = grid_for_eps(cfg, eps)?;
    let nl = cfg.nonlinearity.build()?;
    let p = Problem::new(&grid, cfg.problem.alpha, eps, &cfg.potential, nl)?;
    let opts = cfg.solve_options();
    let report = solve_branches(&p, boxes, w_limit, &opts, &cfg.probe)?;
    let branches: Vec<BranchRecord> = report
        .branches
        .iter()
        .map(|o| branch_record(cfg, &p, o, w_limit, c_v0))
        .collect();
    let fields: Vec<(usize, Field)> = report
        .branches
        .into_iter()
        .filter_map(|o| o.result.map(|r| (o.index, r.u)))
        .collect();
    let c_eps = branches.iter().filter_map(|b| b.energy).reduce(f64::min);
    let summaries: Vec<BranchSummary> = branches.iter().map(BranchRecord::summary).collect();
    let (ground_state, selection_error) = match select_ground_state(&summaries, &boxes.centers, boxes.half_side, eps) {
        Ok(s) => (Some(s), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let sigma_members = branches.iter().filter(|b| b.sigma_member).map(|b| b.index).collect();
    Ok((
        SweepRecord {
            eps,
            half_width: grid.half_width(),
            points_per_axis: grid.points_per_axis(),
            c_eps,
            omega: omega(eps, c_v0),
            branches,
            sigma_members,
            ground_state,
            selection_error,
            min_relative_distance: report.min_relative_distance,
            distinct: report.distinct,
        },
        fields,
    ))
}

/// Solved fields per ε index, each tagged with its branch index.
pub type SweepFields = Vec<Vec<(usize, Field)>>;

/// Full ε-sweep. Returns the records, the limit profile and the branch fields.
pub fn sweep_epsilon(cfg: &ExperimentConfig) -> Result<(SweepRecords, Field, SweepFields)> {
    let (_, boxes) = require_valid(cfg)?;
    if cfg.sweep.eps.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidInput("sweep.eps must be strictly decreasing".into()));
    }
    for &eps in &cfg.sweep.eps {
        grid_for_eps(cfg, eps)?;
    }
    let limit = limit_ground_state(cfg)?;
    let c_v0 = limit.energy();
    let v0 = cfg.potential.v0();
    let w = &limit.best.u;
    let per_eps: Vec<(SweepRecord, Vec<(usize, Field)>)> = cfg
        .sweep
        .eps
        .par_iter()
        .map(|&eps| sweep_one(cfg, eps, &boxes, w, c_v0))
        .collect::<Result<_>>()?;
    let (records, fields): (Vec<SweepRecord>, Vec<Vec<(usize, Field)>>) = per_eps.into_iter().unzip();
    let inputs: Vec<ConcentrationInput> = records
        .iter()
        .filter_map(|r| {
            let j = r.ground_state.as_ref().map(|s| s.index).or_else(|| {
                r.branches
                    .iter()
                    .filter(|b| b.energy.is_some())
                    .min_by(|a, b| a.energy.unwrap().total_cmp(&b.energy.unwrap()))
                    .map(|b| b.index)
            })?;
            let b = r.branches.iter().find(|b| b.index == j)?;
            Some(ConcentrationInput {
                eps: r.eps,
                c_eps: r.c_eps?,
                v_at_max: b.v_at_max?,
                profile_error: b.profile_error,
                decay_exponent: b.decay_exponent,
                boundary_mass: b.boundary_mass.unwrap_or(1.0),
            })
        })
        .collect();
    let concentration = concentration_report(&inputs, c_v0, v0);
    Ok((
        SweepRecords {
            v0,
            c_v0,
            limit: LimitRecord::from_solution(&limit),
            boxes,
            records,
            concentration,
        },
        limit.best.u,
        fields,
    ))
}

fn fmt_f(v: f64) -> String {
    format!("{v:.12e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f).unwrap_or_default()
}

fn fmt_point(p: &Option<Vec<f64>>) -> String {
    p.as_ref()
        .map(|v| v.iter().map(|x| fmt_f(*x)).collect::<Vec<_>>().join(";"))
        .unwrap_or_default()
}

const BRANCH_COLUMNS: &str = "eps,branch,label,converged,iterations,energy,c_eps,nehari_residual,residual,\
max_point,v_at_max,barycenter,profile_error,decay_exponent,decay_r2,boundary_mass,negative_mass,\
probe_energy,sigma_member,ground_state,trusted";

fn branch_row(out: &mut String, b: &BranchRecord, c_eps: Option<f64>, ground: Option<usize>) {
    let _ = writeln!(
        out,
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        fmt_f(b.eps),
        b.index,
        b.label.tag(),
        b.converged,
        b.iterations,
        fmt_opt(b.energy),
        fmt_opt(c_eps),
        fmt_opt(b.nehari_residual),
        fmt_opt(b.residual),
        fmt_point(&b.max_point),
        fmt_opt(b.v_at_max),
        fmt_point(&b.barycenter),
        fmt_opt(b.profile_error),
        fmt_opt(b.decay_exponent),
        fmt_opt(b.decay_r2),
        fmt_opt(b.boundary_mass),
        fmt_opt(b.negative_mass),
        fmt_opt(b.probe_energy),
        b.sigma_member,
        ground == Some(b.index),
        b.trusted,
    );
}

/// The summary table, a pure function of the stored records.
pub fn summary_csv(records: &RunRecords) -> String {
    let mut out = format!(
        "# {TOOL} summary schema v{}; command={}\n",
        records.schema_version,
        records.command.name()
    );
    match records.command {
        Command::Check => {
            out.push_str("check,pass,detail\n");
            if let Some(v) = &records.validation {
                let _ = writeln!(out, "V1,{},", v.potential.v1_pass);
                let _ = writeln!(out, "V2,{},", v.potential.v2_pass);
                let _ = writeln!(out, "V3,{},", v.potential.v3_pass);
                if let Some(n) = &v.nonlinearity {
                    for (name, c) in [("f1", &n.f1), ("f2", &n.f2), ("f3", &n.f3), ("f4", &n.f4), ("f5", &n.f5)] {
                        let _ = writeln!(out, "{name},{},\"{}\"", c.pass, c.detail.replace('"', "'"));
                    }
                }
                let _ = writeln!(out, "boxes,{},", v.boxes.is_some());
            }
        }
        Command::Limit => {
            out.push_str("level,energy,converged,iterations,residual,best_seed,negative_mass\n");
            for r in records.limit.iter().flatten() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    fmt_f(r.level),
                    fmt_f(r.energy),
                    r.converged,
                    r.iterations,
                    fmt_f(r.residual),
                    r.best_seed,
                    fmt_f(r.negative_mass)
                );
            }
        }
        Command::Solve => {
            out.push_str(BRANCH_COLUMNS);
            out.push('\n');
            if let Some(b) = &records.solve {
                branch_row(&mut out, b, b.energy, None);
            }
        }
        Command::Sweep | Command::Report => {
            out.push_str(BRANCH_COLUMNS);
            out.push('\n');
            if let Some(s) = &records.sweep {
                for r in &s.records {
                    let ground = r.ground_state.as_ref().map(|g| g.index);
                    for b in &r.branches {
                        branch_row(&mut out, b, r.c_eps, ground);
                    }
                }
            }
        }
    }
    out
}

/// Plain-text concentration table for the terminal.
pub fn concentration_table(report: &ConcentrationReport) -> String {
    let mut out = format!("c_V0 = {:.10}, V0 = {:.10}\n", report.c_v0, report.v0);
    out.push_str("eps          c_eps-c_V0    V(eta)-V0     profile_err   decay_exp   trusted\n");
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{:<12} {:<13.6e} {:<13.6e} {:<13} {:<11} {}",
            r.eps,
            r.energy_gap,
            r.potential_gap,
            r.profile_error.map(|v| format!("{v:.6e}")).unwrap_or_else(|| "-".into()),
            r.decay_exponent.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into()),
            r.trusted
        );
    }
    if let Some(t) = &report.trends {
        let _ = writeln!(
            out,
            "trends: energy_gap_decreasing={} potential_gap_decreasing={} profile_error_decreasing={}",
            t.energy_gap_decreasing, t.potential_gap_decreasing, t.profile_error_decreasing
        );
    }
    out
}

/// Outcome of [`run_command`].
#[derive(Debug)]
pub struct RunStatus {
    pub exit_code: i32,
    pub out_dir: PathBuf,
    pub error: Option<Error>,
}

#[derive(Debug, Clone)]
pub struct RunRequest {
    pub command: Command,
    pub config_path: PathBuf,
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

struct Run {
    out: PathBuf,
    stages: Vec<StageStatus>,
    files: Vec<String>,
}

impl Run {
    fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let r = f();
        self.stages.push(StageStatus {
            name: name.into(),
            status: if r.is_ok() { "ok".into() } else { "failed".into() },
            seconds: t.elapsed().as_secs_f64(),
        });
        r
    }

    fn write_text(&mut self, rel: &str, text: &str) -> Result<()> {
        let path = self.out.join(rel);
        std::fs::write(&path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        self.files.push(rel.into());
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        io::write_json(&self.out.join(rel), value)?;
        self.files.push(rel.into());
        Ok(())
    }

    fn write_field(&mut self, stem: &str, u: &Field, tags: serde_json::Map<String, serde_json::Value>) -> Result<()> {
        io::write_field(&self.out.join("fields"), stem, u, tags)?;
        self.files.push(format!("fields/{stem}.f64"));
        self.files.push(format!("fields/{stem}.json"));
        Ok(())
    }
}

fn tags(pairs: &[(&str, serde_json::Value)]) -> serde_json::Map<String, serde_json::Value> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

/// Execute one CLI command end to end, writing artifacts (and an error record
/// on failure) into the output directory.
pub fn run_command(req: &RunRequest) -> RunStatus {
    let started = Instant::now();
    let text = match std::fs::read_to_string(&req.config_path) {
        Ok(t) => t,
        Err(e) => {
            let err = Error::Io(format!("{}: {e}", req.config_path.display()));
            let out = req.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
            return finish_error(req, out, err);
        }
    };
    let cfg = ExperimentConfig::from_toml_str(&text);
    let out = req
        .out_dir
        .clone()
        .or_else(|| cfg.as_ref().ok().map(|c| PathBuf::from(&c.output.dir)))
        .unwrap_or_else(|| PathBuf::from("out"));
    let mut cfg = match cfg {
        Ok(c) => c,
        Err(e) => return finish_error(req, out, e),
    };
    if let Some(seed) = req.seed {
        cfg.rng_seed = seed;
    }
    if let Err(e) = std::fs::create_dir_all(&out) {
        return finish_error(req, out.clone(), Error::Io(format!("{}: {e}", out.display())));
    }
    let mut run = Run {
        out: out.clone(),
        stages: Vec::new(),
        files: Vec::new(),
    };
    let result = execute(req.command, &cfg, &mut run);
    let manifest_path = out.join("manifest.json");
    let keep_manifest = req.command == Command::Report && manifest_path.exists();
    if !keep_manifest {
        run.files.push("manifest.json".into());
        run.files.sort();
        let manifest = Manifest {
            tool: TOOL.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: req.command.name().into(),
            rng_seed: cfg.rng_seed,
            workers: req.workers,
            config: text,
            wall_seconds: started.elapsed().as_secs_f64(),
            stages: run.stages.clone(),
            files: run.files.clone(),
        };
        if let Err(e) = io::write_json(&manifest_path, &manifest) {
            return finish_error(req, out, e);
        }
    }
    match result {
        Ok(()) => RunStatus {
            exit_code: 0,
            out_dir: out,
            error: None,
        },
        Err(e) => finish_error(req, out, e),
    }
}

fn finish_error(req: &RunRequest, out: PathBuf, err: Error) -> RunStatus {
    let code = io::exit_code(&err);
    let record = ErrorRecord {
        command: req.command.name().into(),
        exit_code: code,
        kind: io::error_kind(&err).into(),
        message: err.to_string(),
    };
    if std::fs::create_dir_all(&out).is_ok() {
        let _ = io::write_json(&out.join("error.json"), &record);
    }
    RunStatus {
        exit_code: code,
        out_dir: out,
        error: Some(err),
    }
}

fn execute(command: Command, cfg: &ExperimentConfig, run: &mut Run) -> Result<()> {
    let mut records = RunRecords::new(command, cfg.rng_seed);
    match command {
        Command::Check => {
            let report = run.stage("validate", || Ok(validate(cfg)))?;
            let pass = report.all_pass();
            let failures = report.failures.join(" | ");
            records.validation = Some(report);
            run.write_json("records.json", &records)?;
            run.write_text("summary.csv", &summary_csv(&records))?;
            if !pass {
                return Err(Error::Validation(failures));
            }
        }
        Command::Limit => {
            let (report, _) = run.stage("validate", || require_valid(cfg))?;
            records.validation = Some(report);
            let nl = cfg.nonlinearity.build()?;
            let grid = limit_grid(cfg)?;
            let opts = cfg.solve_options();
            let sols: Vec<LimitSolution> = run.stage("limit", || {
                if cfg.limit.levels.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::InvalidInput("levels must be strictly increasing".into()));
                }
                cfg.limit
                    .levels
                    .par_iter()
                    .map(|&a| solve_limit(a, &nl, &grid, cfg.problem.alpha, &opts))
                    .collect()
            })?;
            records.limit = Some(sols.iter().map(LimitRecord::from_solution).collect());
            if cfg.output.write_fields {
                for (i, s) in sols.iter().enumerate() {
                    run.write_field(
                        &format!("limit_{i}"),
                        &s.best.u,
                        tags(&[("level", s.level.into()), ("energy", s.energy().into())]),
                    )?;
                }
            }
            run.write_json("records.json", &records)?;
            run.write_text("summary.csv", &summary_csv(&records))?;
        }
        Command::Solve => {
            let (report, boxes) = run.stage("validate", || require_valid(cfg))?;
            records.validation = Some(report);
            let eps = cfg.solve.eps;
            let j = cfg.solve.branch;
            if j >= boxes.len() {
                return Err(Error::InvalidInput(format!("branch {j} but only {} boxes", boxes.len())));
            }
            let grid = grid_for_eps(cfg, eps)?;
            let limit = run.stage("limit", || limit_ground_state(cfg))?;
            let p = Problem::new(&grid, cfg.problem.alpha, eps, &cfg.potential, cfg.nonlinearity.build()?)?;
            let outcome = run.stage("solve", || {
                Ok(solve_branch(&p, &boxes, j, &limit.best.u, &cfg.solve_options(), &cfg.probe))
            })?;
            let rec = branch_record(cfg, &p, &outcome, &limit.best.u, limit.energy());
            if cfg.output.write_fields {
                if let Some(r) = &outcome.result {
                    run.write_field("solve", &r.u, tags(&[("eps", eps.into()), ("branch", j.into())]))?;
                }
            }
            records.solve = Some(rec);
            run.write_json("records.json", &records)?;
            run.write_text("summary.csv", &summary_csv(&records))?;
            if let Some(e) = outcome.error {
                if !matches!(e, Error::BranchEscaped(_)) {
                    return Err(e);
                }
            }
        }
        Command::Sweep => {
            let (sweep, w, fields) = run.stage("sweep", || sweep_epsilon(cfg))?;
            if cfg.output.write_fields {
                run.write_field(
                    "limit",
                    &w,
                    tags(&[("level", sweep.v0.into()), ("energy", sweep.c_v0.into())]),
                )?;
                for (i, per) in fields.iter().enumerate() {
                    for (j, u) in per {
                        run.write_field(
                            &format!("eps{i}_branch{j}"),
                            u,
                            tags(&[("eps", cfg.sweep.eps[i].into()), ("branch", (*j).into())]),
                        )?;
                    }
                }
            }
            records.sweep = Some(sweep);
            run.write_json("records.json", &records)?;
            run.write_text("summary.csv", &summary_csv(&records))?;
        }
        Command::Report => {
            let path = run_records_path(&run.out);
            let stored: RunRecords = run.stage("load", || {
                let text = std::fs::read_to_string(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                RunRecords::parse(&text)
            })?;
            run.write_text("summary.csv", &summary_csv(&stored))?;
            if let Some(s) = &stored.sweep {
                run.write_text("report.txt", &concentration_table(&s.concentration))?;
            }
        }
    }
    Ok(())
}

fn run_records_path(out: &Path) -> PathBuf {
    out.join("records.json")
}
