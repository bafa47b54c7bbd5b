//! Experiment configuration and the end-to-end pipeline: abstraction, robust
//! solution, controller refinement, Monte Carlo validation and result files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstraction::{default_actions, enabled_actions, AbstractAction, Abstraction, AbstractionConfig, AbstractionError};
use crate::controller::{refine, simulate_run, validate, ControllerError, FeedbackController, ValidationReport};
use crate::dynamics::{DynamicsError, LinearSystem, NoiseModel};
use crate::geometry::AxisBox;
use crate::partition::{LabelMode, Partition, PartitionError};
use crate::robust_mdp::{
    nominal_value_iteration, robust_value_iteration, write_explicit_files, ExplicitError, IntervalMDP,
    RobustSolution, SolveError, StateKind,
};
use crate::seed::derive_seed;

pub const MODEL_STEM: &str = "model";
pub const SOLUTION_FILE: &str = "solution.csv";
pub const VALIDATION_FILE: &str = "validation.json";
pub const TRACES_FILE: &str = "traces.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const TIMINGS_FILE: &str = "timings.json";
pub const CONTROLLER_FILE: &str = "controller.json";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const SWEEP_TIMINGS_FILE: &str = "sweep_timings.csv";

pub const PRESETS: &[&str] = &[
    "double-integrator-2d",
    "double-integrator-2d-triangular",
    "uav-6d",
    "uav-6d-high-turbulence",
];

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config field `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot serialize config: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("unknown preset `{0}`; available: {list}", list = PRESETS.join(", "))]
    UnknownPreset(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Abstraction(#[from] AbstractionError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error(transparent)]
    Explicit(#[from] ExplicitError),
    #[error("cannot build worker pool: {0}")]
    Workers(String),
    #[error("N = {samples}, repetition {repetition}: {source}")]
    Sweep {
        samples: usize,
        repetition: usize,
        source: Box<HarnessError>,
    },
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

fn field(path: impl Into<String>, message: impl Into<String>) -> HarnessError {
    HarnessError::Config {
        path: path.into(),
        message: message.into(),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    Zero,
    Gaussian { mean: Vec<f64>, covariance: Vec<Vec<f64>> },
    Uniform { lo: Vec<f64>, hi: Vec<f64> },
    Triangular { lo: Vec<f64>, mode: Vec<f64>, hi: Vec<f64> },
    Mixture { components: Vec<MixtureComponent> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    pub weight: f64,
    pub noise: NoiseSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxSpec {
    fn to_box(&self, path: &str) -> Result<AxisBox> {
        if self.lo.len() != self.hi.len() {
            return Err(field(path, "lo and hi have different lengths"));
        }
        AxisBox::from_slices(&self.lo, &self.hi).ok_or_else(|| field(path, "needs finite bounds with lo <= hi"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    /// Rows of `A`.
    pub a: Vec<Vec<f64>>,
    /// Rows of `B`.
    pub b: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<f64>>,
    /// Per-step input bounds; the lifted input set is their product.
    pub input: BoxSpec,
    pub noise: NoiseSpec,
    #[serde(default = "one")]
    pub lift_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSpec {
    pub domain: BoxSpec,
    pub counts: Vec<usize>,
    #[serde(default)]
    pub goal: Vec<BoxSpec>,
    #[serde(default)]
    pub critical: Vec<BoxSpec>,
    #[serde(default = "contained")]
    pub goal_mode: LabelMode,
    #[serde(default = "intersecting")]
    pub critical_mode: LabelMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbstractionSpec {
    pub samples: usize,
    /// Sample sizes for `sweep`, strictly increasing.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<usize>,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSpec {
    /// Number of (lifted) steps.
    pub horizon: usize,
    pub x0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationSpec {
    #[serde(default = "default_runs")]
    pub runs: u64,
    #[serde(default = "one")]
    pub repetitions: usize,
    /// Number of simulated runs written to the traces file.
    #[serde(default = "default_traces")]
    pub traces: usize,
}

impl Default for ValidationSpec {
    fn default() -> Self {
        ValidationSpec {
            runs: default_runs(),
            repetitions: 1,
            traces: default_traces(),
        }
    }
}

fn one() -> usize {
    1
}

fn default_runs() -> u64 {
    10_000
}

fn default_traces() -> usize {
    10
}

fn contained() -> LabelMode {
    LabelMode::Contained
}

fn intersecting() -> LabelMode {
    LabelMode::Intersecting
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    /// Master seed; abstraction and validation seeds derive from it.
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Worker threads, `0` for one per core.
    #[serde(default)]
    pub workers: usize,
    pub system: SystemSpec,
    pub partition: PartitionSpec,
    pub abstraction: AbstractionSpec,
    pub objective: ObjectiveSpec,
    #[serde(default)]
    pub validation: ValidationSpec,
}

fn matrix(rows: &[Vec<f64>], path: &str) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 {
        return Err(field(path, "matrix must be non-empty"));
    }
    if let Some(i) = rows.iter().position(|r| r.len() != ncols) {
        return Err(field(format!("{path}[{i}]"), format!("expected {ncols} columns")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn check_len(v: &[f64], n: usize, path: &str) -> Result<()> {
    if v.len() != n {
        return Err(field(path, format!("expected {n} entries, got {}", v.len())));
    }
    Ok(())
}

impl NoiseSpec {
    pub fn build(&self, n: usize, path: &str) -> Result<NoiseModel> {
        let wrap = |e: DynamicsError| field(path, e.to_string());
        match self {
            NoiseSpec::Zero => Ok(NoiseModel::zero(n)),
            NoiseSpec::Gaussian { mean, covariance } => {
                check_len(mean, n, &format!("{path}.mean"))?;
                let cov = matrix(covariance, &format!("{path}.covariance"))?;
                NoiseModel::gaussian(DVector::from_column_slice(mean), cov).map_err(wrap)
            }
            NoiseSpec::Uniform { lo, hi } => {
                check_len(lo, n, &format!("{path}.lo"))?;
                check_len(hi, n, &format!("{path}.hi"))?;
                NoiseModel::uniform_box(DVector::from_column_slice(lo), DVector::from_column_slice(hi)).map_err(wrap)
            }
            NoiseSpec::Triangular { lo, mode, hi } => {
                check_len(lo, n, &format!("{path}.lo"))?;
                check_len(mode, n, &format!("{path}.mode"))?;
                check_len(hi, n, &format!("{path}.hi"))?;
                NoiseModel::triangular(
                    DVector::from_column_slice(lo),
                    DVector::from_column_slice(mode),
                    DVector::from_column_slice(hi),
                )
                .map_err(wrap)
            }
            NoiseSpec::Mixture { components } => {
                let parts = components
                    .iter()
                    .enumerate()
                    .map(|(i, c)| Ok((c.weight, c.noise.build(n, &format!("{path}.components[{i}].noise"))?)))
                    .collect::<Result<Vec<_>>>()?;
                NoiseModel::mixture(parts).map_err(wrap)
            }
        }
    }
}

/// Everything the pipeline needs before sampling.
#[derive(Debug, Clone)]
pub struct Setup {
    /// The system as configured, one step per time unit.
    pub base: LinearSystem,
    /// The system over `lift_steps` steps; abstraction and validation use it.
    pub system: LinearSystem,
    pub partition: Partition,
    /// Actions with their enabled sets, indexed by id.
    pub actions: Vec<AbstractAction>,
    pub x0: DVector<f64>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_toml_string()?).map_err(io_err(path))
    }

    /// Seed of the abstraction samples in repetition `rep`. Independent of
    /// the sample size, so a larger sample extends a smaller one.
    pub fn abstraction_seed(&self, rep: usize) -> u64 {
        derive_seed(self.seed, 2 * rep as u64)
    }

    pub fn validation_seed(&self, rep: usize) -> u64 {
        derive_seed(self.seed, 2 * rep as u64 + 1)
    }

    /// Checks everything that can be checked without building models.
    pub fn validate(&self) -> Result<()> {
        let s = &self.system;
        let a = matrix(&s.a, "system.a")?;
        let n = a.nrows();
        if a.ncols() != n {
            return Err(field("system.a", "must be square"));
        }
        let b = matrix(&s.b, "system.b")?;
        if b.nrows() != n {
            return Err(field("system.b", format!("expected {n} rows, got {}", b.nrows())));
        }
        if let Some(q) = &s.q {
            check_len(q, n, "system.q")?;
        }
        let u = s.input.to_box("system.input")?;
        if u.dim() != b.ncols() {
            return Err(field("system.input", format!("expected {} bounds", b.ncols())));
        }
        s.noise.build(n, "system.noise")?;
        if s.lift_steps == 0 {
            return Err(field("system.lift_steps", "must be at least 1"));
        }

        let p = &self.partition;
        let domain = p.domain.to_box("partition.domain")?;
        if domain.dim() != n {
            return Err(field("partition.domain", format!("expected dimension {n}")));
        }
        if p.counts.len() != n {
            return Err(field("partition.counts", format!("expected {n} entries")));
        }
        if p.counts.contains(&0) {
            return Err(field("partition.counts", "counts must be positive"));
        }
        let mut goals = Vec::new();
        for (i, g) in p.goal.iter().enumerate() {
            let path = format!("partition.goal[{i}]");
            let bx = g.to_box(&path)?;
            if bx.dim() != n {
                return Err(field(path, format!("expected dimension {n}")));
            }
            goals.push(bx);
        }
        for (i, c) in p.critical.iter().enumerate() {
            let path = format!("partition.critical[{i}]");
            let bx = c.to_box(&path)?;
            if bx.dim() != n {
                return Err(field(path, format!("expected dimension {n}")));
            }
            if let Some(j) = goals.iter().position(|g| g.interiors_intersect(&bx)) {
                return Err(field(path, format!("overlaps partition.goal[{j}]")));
            }
        }

        let ab = &self.abstraction;
        if ab.samples == 0 {
            return Err(field("abstraction.samples", "must be at least 1"));
        }
        if ab.sweep.contains(&0) {
            return Err(field("abstraction.sweep", "sample sizes must be positive"));
        }
        if ab.sweep.windows(2).any(|w| w[0] >= w[1]) {
            return Err(field("abstraction.sweep", "must be strictly increasing"));
        }
        if !(ab.beta > 0.0 && ab.beta < 1.0) {
            return Err(field("abstraction.beta", "must lie in (0, 1)"));
        }

        let o = &self.objective;
        if o.horizon == 0 {
            return Err(field("objective.horizon", "must be at least 1"));
        }
        check_len(&o.x0, n, "objective.x0")?;
        if !domain.contains(&DVector::from_column_slice(&o.x0)) {
            return Err(field("objective.x0", "lies outside partition.domain"));
        }
        if self.validation.runs == 0 {
            return Err(field("validation.runs", "must be at least 1"));
        }
        if self.validation.repetitions == 0 {
            return Err(field("validation.repetitions", "must be at least 1"));
        }
        Ok(())
    }

    pub fn base_system(&self) -> Result<LinearSystem> {
        let s = &self.system;
        let a = matrix(&s.a, "system.a")?;
        let n = a.nrows();
        let b = matrix(&s.b, "system.b")?;
        let q = s.q.as_deref().map_or_else(|| DVector::zeros(n), DVector::from_column_slice);
        let u = s.input.to_box("system.input")?;
        let noise = s.noise.build(n, "system.noise")?;
        Ok(LinearSystem::new(a, b, q, u, noise)?)
    }

    pub fn build_partition(&self) -> Result<Partition> {
        let p = &self.partition;
        let goals = p
            .goal
            .iter()
            .enumerate()
            .map(|(i, g)| g.to_box(&format!("partition.goal[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        let criticals = p
            .critical
            .iter()
            .enumerate()
            .map(|(i, c)| c.to_box(&format!("partition.critical[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        let part = Partition::new(p.domain.to_box("partition.domain")?, p.counts.clone())?;
        Ok(part.label_regions(&goals, &criticals, p.goal_mode, p.critical_mode)?)
    }

    /// Lifted system, labeled partition and enabled actions.
    pub fn setup(&self) -> Result<Setup> {
        self.validate()?;
        let base = self.base_system()?;
        let system = base.lift(self.system.lift_steps)?;
        let partition = self.build_partition()?;
        let actions = enabled_actions(&system, &partition, default_actions(&partition))?;
        Ok(Setup {
            base,
            system,
            partition,
            actions,
            x0: DVector::from_column_slice(&self.objective.x0),
        })
    }

    pub fn abstraction_config(&self, samples: usize, rep: usize) -> AbstractionConfig {
        AbstractionConfig {
            samples,
            beta: self.abstraction.beta,
            seed: self.abstraction_seed(rep),
            lift_steps: self.system.lift_steps,
        }
    }
}

impl Setup {
    pub fn abstraction(&self, config: &AbstractionConfig) -> Result<Abstraction> {
        Ok(Abstraction::build(&self.system, &self.partition, self.actions.clone(), config)?)
    }
}

/// Deterministic record of one pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub seed: u64,
    pub abstraction_seed: u64,
    pub validation_seed: u64,
    pub samples: usize,
    pub beta: f64,
    pub beta_per_interval: f64,
    pub interval_count: usize,
    pub regions: usize,
    pub free_regions: usize,
    pub goal_regions: usize,
    pub critical_regions: usize,
    pub actions_enabled: usize,
    pub states: usize,
    pub choices: usize,
    pub distributions: usize,
    pub transitions: usize,
    pub horizon: usize,
    pub x0: Vec<f64>,
    pub certified: f64,
    pub validation: ValidationReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub abstraction_s: f64,
    pub solving_s: f64,
    pub validation_s: f64,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub summary: Summary,
    pub timings: StageTimings,
    pub imdp: IntervalMDP,
    pub solution: RobustSolution,
    pub controller: FeedbackController,
    pub dir: PathBuf,
}

/// Builds `pool` with `workers` threads (`0` = rayon default) and runs `f`
/// inside it.
fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::Workers(e.to_string()))?;
    Ok(pool.install(f))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| HarnessError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    write_file(path, &text)
}

fn state_label(kind: StateKind) -> String {
    match kind {
        StateKind::Region(r) => format!("region:{}", r.0),
        StateKind::Goal => "goal".into(),
        StateKind::Unsafe => "unsafe".into(),
        StateKind::Out => "out".into(),
    }
}

/// `step,state,label,value,action` for every step `0..=K` and state.
pub fn solution_csv(imdp: &IntervalMDP, solution: &RobustSolution) -> String {
    let mut out = String::from("step,state,label,value,action\n");
    for (k, values) in solution.values.iter().enumerate() {
        for (s, v) in values.iter().enumerate() {
            let action = solution.action(k, s).map(|a| a.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{k},{s},{},{v},{action}", state_label(imdp.kind(s)));
        }
    }
    out
}

/// `run,step,x1..xn,u1..up`; the input columns of the last state are empty.
pub fn traces_csv(setup: &Setup, controller: &FeedbackController, horizon: usize, count: usize, seed: u64) -> String {
    let n = setup.system.state_dim();
    let p = setup.system.input_dim();
    let mut out = String::from("run,step");
    for i in 1..=n {
        let _ = write!(out, ",x{i}");
    }
    for i in 1..=p {
        let _ = write!(out, ",u{i}");
    }
    out.push('\n');
    for run in 0..count as u64 {
        let trace = simulate_run(&setup.system, controller, &setup.x0, horizon, seed, run);
        for (k, x) in trace.states.iter().enumerate() {
            let _ = write!(out, "{run},{k}");
            for v in x.iter() {
                let _ = write!(out, ",{v}");
            }
            match trace.inputs.get(k) {
                Some(u) => {
                    for v in u.iter() {
                        let _ = write!(out, ",{v}");
                    }
                }
                None => out.push_str(&",".repeat(p)),
            }
            out.push('\n');
        }
    }
    out
}

fn secs(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

/// Full pipeline for `abstraction.samples` samples. Writes the model files,
/// solution table, controller, validation report, traces, summary and
/// timings into the output directory.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<PipelineOutput> {
    with_workers(cfg.workers, || run_pipeline_inner(cfg))?
}

fn run_pipeline_inner(cfg: &ExperimentConfig) -> Result<PipelineOutput> {
    let t = Instant::now();
    let setup = cfg.setup()?;
    let abs = setup.abstraction(&cfg.abstraction_config(cfg.abstraction.samples, 0))?;
    let imdp = abs.imdp()?;
    let abstraction_s = secs(t);

    let t = Instant::now();
    let horizon = cfg.objective.horizon;
    let solution = robust_value_iteration(&imdp, horizon)?;
    let controller = refine(&solution, &setup.partition, &setup.actions, &setup.system)?;
    let solving_s = secs(t);

    let t = Instant::now();
    let vseed = cfg.validation_seed(0);
    let report = validate(&setup.system, &controller, &setup.x0, horizon, cfg.validation.runs, vseed)?;
    let validation_s = secs(t);

    let dir = cfg.output.clone();
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    write_explicit_files(&imdp, &dir, MODEL_STEM).map_err(io_err(&dir))?;
    write_file(&dir.join(SOLUTION_FILE), &solution_csv(&imdp, &solution))?;
    write_json(&dir.join(CONTROLLER_FILE), &controller)?;
    write_json(&dir.join(VALIDATION_FILE), &report)?;
    write_file(
        &dir.join(TRACES_FILE),
        &traces_csv(&setup, &controller, horizon, cfg.validation.traces, vseed),
    )?;

    let part = &setup.partition;
    let summary = Summary {
        name: cfg.name.clone(),
        seed: cfg.seed,
        abstraction_seed: cfg.abstraction_seed(0),
        validation_seed: vseed,
        samples: cfg.abstraction.samples,
        beta: cfg.abstraction.beta,
        beta_per_interval: abs.significance_per_interval(),
        interval_count: abs.interval_count(),
        regions: part.num_regions(),
        free_regions: part.free_regions().len(),
        goal_regions: part.goal_regions().len(),
        critical_regions: part.critical_regions().len(),
        actions_enabled: abs.active_actions().count(),
        states: imdp.num_states(),
        choices: imdp.num_choices(),
        distributions: imdp.num_distributions(),
        transitions: imdp.num_transitions(),
        horizon,
        x0: cfg.objective.x0.clone(),
        certified: report.certified,
        validation: report,
    };
    let timings = StageTimings {
        abstraction_s,
        solving_s,
        validation_s,
    };
    write_json(&dir.join(SUMMARY_FILE), &summary)?;
    write_json(&dir.join(TIMINGS_FILE), &timings)?;
    Ok(PipelineOutput {
        summary,
        timings,
        imdp,
        solution,
        controller,
        dir,
    })
}

/// Builds the interval MDP only and writes `model.sta` / `model.tra`.
pub fn export_model(cfg: &ExperimentConfig) -> Result<(PathBuf, PathBuf)> {
    with_workers(cfg.workers, || {
        let setup = cfg.setup()?;
        let imdp = setup
            .abstraction(&cfg.abstraction_config(cfg.abstraction.samples, 0))?
            .imdp()?;
        let dir = &cfg.output;
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        write_explicit_files(&imdp, dir, MODEL_STEM).map_err(io_err(dir))
    })?
}

/// Re-runs validation of the controller stored in the output directory and
/// rewrites the validation report.
pub fn revalidate(cfg: &ExperimentConfig) -> Result<ValidationReport> {
    with_workers(cfg.workers, || {
        cfg.validate()?;
        let system = cfg.base_system()?.lift(cfg.system.lift_steps)?;
        let path = cfg.output.join(CONTROLLER_FILE);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let controller: FeedbackController =
            serde_json::from_str(&text).map_err(|source| HarnessError::Json { path, source })?;
        let x0 = DVector::from_column_slice(&cfg.objective.x0);
        let report = validate(
            &system,
            &controller,
            &x0,
            cfg.objective.horizon,
            cfg.validation.runs,
            cfg.validation_seed(0),
        )?;
        write_json(&cfg.output.join(VALIDATION_FILE), &report)?;
        Ok(report)
    })?
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Imdp,
    Mdp,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Imdp => "imdp",
            ModelKind::Mdp => "mdp",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub samples: usize,
    pub repetition: usize,
    pub model: ModelKind,
    pub certified: f64,
    pub empirical: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub std_error: f64,
    pub states: usize,
    pub transitions: usize,
    /// Median width over the model's distinct interval entries.
    pub median_width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepTiming {
    pub samples: usize,
    pub repetition: usize,
    pub abstraction_s: f64,
    pub solve_imdp_s: f64,
    pub solve_mdp_s: f64,
    pub validation_s: f64,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub timings: Vec<SweepTiming>,
}

pub const SWEEP_HEADER: &str =
    "samples,repetition,model,certified,empirical,ci_low,ci_high,std_error,states,transitions,median_width";

impl SweepResult {
    pub fn csv(&self) -> String {
        let mut out = format!("{SWEEP_HEADER}\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.samples,
                r.repetition,
                r.model.as_str(),
                r.certified,
                r.empirical,
                r.ci_low,
                r.ci_high,
                r.std_error,
                r.states,
                r.transitions,
                r.median_width
            );
        }
        out
    }

    pub fn timings_csv(&self) -> String {
        let mut out = String::from("samples,repetition,abstraction_s,solve_imdp_s,solve_mdp_s,validation_s\n");
        for t in &self.timings {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                t.samples, t.repetition, t.abstraction_s, t.solve_imdp_s, t.solve_mdp_s, t.validation_s
            );
        }
        out
    }
}

/// Median of `high − low` over all transitions of all distributions.
pub fn median_interval_width(imdp: &IntervalMDP) -> f64 {
    let mut widths: Vec<f64> = (0..imdp.num_distributions())
        .flat_map(|d| imdp.distribution(d).iter().map(|t| t.interval.width()))
        .collect();
    if widths.is_empty() {
        return 0.0;
    }
    widths.sort_by(f64::total_cmp);
    let m = widths.len() / 2;
    if widths.len() % 2 == 1 {
        widths[m]
    } else {
        0.5 * (widths[m - 1] + widths[m])
    }
}

fn sweep_cell(cfg: &ExperimentConfig, setup: &Setup, samples: usize, rep: usize) -> Result<(Vec<SweepRow>, SweepTiming)> {
    let horizon = cfg.objective.horizon;
    let t = Instant::now();
    let abs = setup.abstraction(&cfg.abstraction_config(samples, rep))?;
    let imdp = abs.imdp()?;
    let mdp = abs.point_mdp()?;
    let abstraction_s = secs(t);

    let t = Instant::now();
    let sol_i = robust_value_iteration(&imdp, horizon)?;
    let solve_imdp_s = secs(t);
    let t = Instant::now();
    let sol_m = nominal_value_iteration(&mdp, horizon)?;
    let solve_mdp_s = secs(t);

    let t = Instant::now();
    let vseed = cfg.validation_seed(rep);
    let mut rows = Vec::with_capacity(2);
    for (kind, model, sol) in [(ModelKind::Imdp, &imdp, &sol_i), (ModelKind::Mdp, &mdp, &sol_m)] {
        let ctrl = refine(sol, &setup.partition, &setup.actions, &setup.system)?;
        let rep_v = validate(&setup.system, &ctrl, &setup.x0, horizon, cfg.validation.runs, vseed)?;
        rows.push(SweepRow {
            samples,
            repetition: rep,
            model: kind,
            certified: rep_v.certified,
            empirical: rep_v.empirical,
            ci_low: rep_v.ci_low,
            ci_high: rep_v.ci_high,
            std_error: rep_v.std_error(),
            states: model.num_states(),
            transitions: model.num_transitions(),
            median_width: median_interval_width(model),
        });
    }
    let timing = SweepTiming {
        samples,
        repetition: rep,
        abstraction_s,
        solve_imdp_s,
        solve_mdp_s,
        validation_s: secs(t),
    };
    Ok((rows, timing))
}

/// For every sample size in `abstraction.sweep` (or `abstraction.samples`
/// when the list is empty) and every repetition, builds the interval MDP
/// and the point-estimate MDP from the same samples, solves and validates
/// both. Writes `sweep.csv` and `sweep_timings.csv`.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    let result = sweep_in_memory(cfg)?;
    let dir = &cfg.output;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_file(&dir.join(SWEEP_FILE), &result.csv())?;
    write_file(&dir.join(SWEEP_TIMINGS_FILE), &result.timings_csv())?;
    Ok(result)
}

/// [`run_sweep`] without writing files.
pub fn sweep_in_memory(cfg: &ExperimentConfig) -> Result<SweepResult> {
    use rayon::prelude::*;
    with_workers(cfg.workers, || {
        let setup = cfg.setup()?;
        let sizes = if cfg.abstraction.sweep.is_empty() {
            vec![cfg.abstraction.samples]
        } else {
            cfg.abstraction.sweep.clone()
        };
        let cells: Vec<(usize, usize)> = sizes
            .iter()
            .flat_map(|&n| (0..cfg.validation.repetitions).map(move |r| (n, r)))
            .collect();
        let results: Vec<_> = cells
            .par_iter()
            .map(|&(n, r)| {
                sweep_cell(cfg, &setup, n, r).map_err(|e| HarnessError::Sweep {
                    samples: n,
                    repetition: r,
                    source: Box::new(e),
                })
            })
            .collect::<Result<_>>()?;
        let mut rows = Vec::with_capacity(2 * results.len());
        let mut timings = Vec::with_capacity(results.len());
        for (r, t) in results {
            rows.extend(r);
            timings.push(t);
        }
        Ok(SweepResult { rows, timings })
    })?
}

fn double_integrator_2d(noise: NoiseSpec, name: &str) -> ExperimentConfig {
    ExperimentConfig {
        name: name.into(),
        seed: 1,
        output: PathBuf::from(format!("out/{name}")),
        workers: 0,
        system: SystemSpec {
            a: vec![vec![1.0, 1.0], vec![0.0, 1.0]],
            b: vec![vec![0.5], vec![1.0]],
            q: None,
            input: BoxSpec {
                lo: vec![-4.0],
                hi: vec![4.0],
            },
            noise,
            lift_steps: 2,
        },
        partition: PartitionSpec {
            domain: BoxSpec {
                lo: vec![-10.0, -5.0],
                hi: vec![10.0, 5.0],
            },
            counts: vec![20, 10],
            goal: vec![BoxSpec {
                lo: vec![-2.0, -3.0],
                hi: vec![2.0, 3.0],
            }],
            critical: vec![
                BoxSpec {
                    lo: vec![-6.0, -5.0],
                    hi: vec![-4.0, -2.0],
                },
                BoxSpec {
                    lo: vec![-6.0, 2.0],
                    hi: vec![-4.0, 5.0],
                },
            ],
            goal_mode: LabelMode::Contained,
            critical_mode: LabelMode::Intersecting,
        },
        abstraction: AbstractionSpec {
            samples: 3200,
            sweep: vec![50, 200, 800, 3200],
            beta: 0.01,
        },
        objective: ObjectiveSpec {
            horizon: 8,
            x0: vec![-8.5, 0.5],
        },
        validation: ValidationSpec {
            runs: 10_000,
            repetitions: 20,
            traces: 20,
        },
    }
}

fn uav_6d(sigma: f64, name: &str) -> ExperimentConfig {
    let mut a = vec![vec![0.0; 6]; 6];
    let mut b = vec![vec![0.0; 3]; 6];
    for axis in 0..3 {
        let (p, v) = (2 * axis, 2 * axis + 1);
        a[p][p] = 1.0;
        a[p][v] = 1.0;
        a[v][v] = 1.0;
        b[p][axis] = 0.5;
        b[v][axis] = 1.0;
    }
    let mut cov = vec![vec![0.0; 6]; 6];
    for (i, row) in cov.iter_mut().enumerate() {
        row[i] = sigma * sigma;
    }
    let per_axis = |pos: (f64, f64), vel: (f64, f64)| {
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        for _ in 0..3 {
            lo.extend([pos.0, vel.0]);
            hi.extend([pos.1, vel.1]);
        }
        BoxSpec { lo, hi }
    };
    let scene = |px: (f64, f64), py: (f64, f64), pz: (f64, f64)| BoxSpec {
        lo: vec![px.0, -2.25, py.0, -2.25, pz.0, -2.25],
        hi: vec![px.1, 2.25, py.1, 2.25, pz.1, 2.25],
    };
    ExperimentConfig {
        name: name.into(),
        seed: 1,
        output: PathBuf::from(format!("out/{name}")),
        workers: 0,
        system: SystemSpec {
            a,
            b,
            q: None,
            input: BoxSpec {
                lo: vec![-6.0; 3],
                hi: vec![6.0; 3],
            },
            noise: NoiseSpec::Gaussian {
                mean: vec![0.0; 6],
                covariance: cov,
            },
            lift_steps: 2,
        },
        partition: PartitionSpec {
            domain: per_axis((-15.0, 9.0), (-2.25, 2.25)),
            counts: vec![8, 2, 8, 2, 8, 2],
            goal: vec![scene((3.0, 9.0), (-3.0, 3.0), (3.0, 9.0))],
            critical: vec![
                scene((-9.0, -6.0), (-15.0, 9.0), (-3.0, 9.0)),
                scene((-3.0, 0.0), (-15.0, 0.0), (-15.0, 9.0)),
            ],
            goal_mode: LabelMode::Contained,
            critical_mode: LabelMode::Intersecting,
        },
        abstraction: AbstractionSpec {
            samples: 1000,
            sweep: Vec::new(),
            beta: 0.01,
        },
        objective: ObjectiveSpec {
            horizon: 16,
            x0: vec![-14.0, 0.0, 6.0, 0.0, -6.0, 0.0],
        },
        validation: ValidationSpec {
            runs: 1000,
            repetitions: 1,
            traces: 10,
        },
    }
}

/// Built-in experiment configurations; see [`PRESETS`].
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let gaussian = NoiseSpec::Gaussian {
        mean: vec![0.0, 0.0],
        covariance: vec![vec![0.1, 0.0], vec![0.0, 0.1]],
    };
    let triangular = NoiseSpec::Triangular {
        lo: vec![-0.8, -0.8],
        mode: vec![0.0, 0.0],
        hi: vec![0.8, 0.8],
    };
    match name {
        "double-integrator-2d" => Ok(double_integrator_2d(gaussian, name)),
        "double-integrator-2d-triangular" => Ok(double_integrator_2d(triangular, name)),
        "uav-6d" => Ok(uav_6d(0.1, name)),
        "uav-6d-high-turbulence" => Ok(uav_6d(0.3, name)),
        other => Err(HarnessError::UnknownPreset(other.into())),
    }
}
