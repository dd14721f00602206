//! Exact effective noise strength, reproducible parameter sweeps and their
//! CSV/JSON output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::analytic_bounds::{eta_dd_bound, BoundCase, ScheduleParams};
use crate::cdd_recursion::{cdd_closed_form, optimal_level, CddRegime};
use crate::error::{DdError, Result};
use crate::magnus_engine::{default_nodes, omega_low_order, omega_n_series};
use crate::noise_model::{build_custom, build_heisenberg_spin_bath, random_model, NoiseModel};
use crate::op_core::{evolve, identity, norm, serde_rows, tensor_product, Operator};
use crate::pulse_schedule::{
    build_sequence, concatenate_schedule, toggling_segments, PulseSchedule, ScheduleSpec,
    SequenceKind, DEFAULT_SUBDIVISIONS,
};
use crate::spectral_filter::{decoupling_order_moments, filter_fourier, switching_functions};
use crate::threshold_overhead::{
    default_case, default_overhead_exponent, edd_delta_threshold, edd_region, overhead_ratio,
    protected_gate_params, suppression_threshold, StrengthRatio,
};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "DDLAB_THREADS";

/// Exact toggling-frame evolution `Ũ(T)` of a schedule under a noise model.
///
/// Pulses are integrated together with the noise in the lab frame, so
/// finite-width pulses are treated exactly.
pub fn toggling_propagator(seq: &PulseSchedule, model: &NoiseModel) -> Result<Operator> {
    if seq.dim_s != model.dim_s {
        return Err(DdError::DimMismatch(format!(
            "schedule acts on dimension {}, model system has dimension {}",
            seq.dim_s, model.dim_s
        )));
    }
    let h = model.hamiltonian();
    let bath_identity = identity(model.dim_b);
    let mut u = identity(model.dim());
    let mut control = identity(seq.dim_s);
    let mut cursor = 0.0;
    for p in &seq.pulses {
        u = evolve(&h, p.start - cursor)? * u;
        match p.hamiltonian() {
            Some(hp) => {
                let total = tensor_product(&hp, &bath_identity) + &h;
                u = evolve(&total, p.width)? * u;
            }
            None => u = tensor_product(&p.unitary(), &bath_identity) * u,
        }
        control = p.unitary() * control;
        cursor = p.end();
    }
    u = evolve(&h, seq.t_total - cursor)? * u;
    Ok(tensor_product(&control, &bath_identity).adjoint() * u)
}

/// `‖Ũ e^{iH_B Γ} - e^{-iH_B(T - Γ)}‖` with `Γ` the schedule's bath prefix.
pub fn eta_exact(seq: &PulseSchedule, model: &NoiseModel) -> Result<f64> {
    let gamma = seq.gamma_prefix;
    let u = toggling_propagator(seq, model)? * evolve(&model.h_bath, -gamma)?;
    let reference = evolve(&model.h_bath, seq.t_total - gamma)?;
    Ok(norm(&(u - reference)))
}

/// Exact strength, analytic bound and Magnus term norms for one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    /// Exact effective noise strength.
    pub eta_exact: f64,
    /// Analytic bound, absent outside its validity regime.
    pub eta_bound: Option<f64>,
    /// Reason the bound is absent.
    pub bound_error: Option<String>,
    /// Bound case used.
    pub bound_case: BoundCase,
    /// `‖Ω_1'‖, ‖Ω_2‖, ‖Ω_3‖, ‖Ω_4‖`; absent if the expansion may diverge.
    pub per_order_norms: Option<[f64; 4]>,
    /// Per-order bound contributions `C_n (JT)(εT)^{n-1}`, `n = 1..5`.
    pub per_order_bounds: Option<[f64; 5]>,
    /// `‖H_err‖`.
    pub j: f64,
    /// `‖H_B‖ + ‖H_err‖`.
    pub epsilon: f64,
    /// Total duration of the schedule.
    pub t_total: f64,
}

/// Exact simulation of a protected gate with its bound.
pub fn simulate(seq: &PulseSchedule, model: &NoiseModel, case: BoundCase) -> Result<SimResult> {
    let eta = eta_exact(seq, model)?;
    let params = ScheduleParams::from_schedule(seq);
    let (eta_bound, per_order_bounds, bound_error) =
        match eta_dd_bound(model.j_strength, model.epsilon, &params, case) {
            Ok(r) => (Some(r.eta_bound), Some(r.per_order), None),
            Err(e @ DdError::Validity { .. }) => (None, None, Some(e.to_string())),
            Err(e) => return Err(e),
        };
    let segments = toggling_segments(seq, model, DEFAULT_SUBDIVISIONS)?;
    let per_order_norms = match omega_n_series(&segments, 4, default_nodes(4)) {
        Ok(series) => {
            let series = series.with_bath_reference(&model.h_bath, seq.gamma_prefix);
            Some([
                norm(&series.omega1_prime),
                norm(series.term(2)),
                norm(series.term(3)),
                norm(series.term(4)),
            ])
        }
        Err(DdError::ExpansionDivergence { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(SimResult {
        eta_exact: eta,
        eta_bound,
        bound_error,
        bound_case: case,
        per_order_norms,
        per_order_bounds,
        j: model.j_strength,
        epsilon: model.epsilon,
        t_total: seq.t_total,
    })
}

/// Experiment selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// `η_DD/η` against `ετ0` for several sequences.
    EtaCurves,
    /// Fault-tolerance overhead ratio against `ετ0`.
    Overhead,
    /// Bound over exact `‖Ω_3‖` on a spin-bath grid.
    Omega3Ratio,
    /// Best strategy among no DD, DD and Eulerian DD.
    EddMap,
    /// Optimal concatenation level.
    CddOptimal,
    /// Filter magnitudes against frequency.
    FilterCurves,
    /// Exact simulation of a configured model and schedule.
    CustomSim,
}

impl ExperimentKind {
    /// File stem used for outputs.
    pub fn name(self) -> &'static str {
        match self {
            Self::EtaCurves => "eta_curves",
            Self::Overhead => "overhead",
            Self::Omega3Ratio => "omega3_ratio",
            Self::EddMap => "edd_map",
            Self::CddOptimal => "cdd_optimal",
            Self::FilterCurves => "filter_curves",
            Self::CustomSim => "custom_sim",
        }
    }
}

/// One `S ⊗ B` term of a custom model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelTerm {
    /// System operator rows of `[re, im]`.
    #[serde(with = "serde_rows")]
    pub system: Operator,
    /// Bath operator rows of `[re, im]`.
    #[serde(with = "serde_rows")]
    pub bath: Operator,
}

/// Noise model recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// One qubit coupled to a Heisenberg spin bath.
    Heisenberg {
        /// Number of bath spins.
        n_spins: usize,
        /// Bath field strength.
        beta: f64,
        /// Coupling strength.
        j: f64,
    },
    /// Gaussian random model, redrawn per sample.
    Random {
        /// System dimension.
        dim_s: usize,
        /// Bath dimension.
        dim_b: usize,
        /// Target `‖H_B‖`.
        beta: f64,
        /// Target `‖H_err‖`.
        j: f64,
    },
    /// Explicit `Σ S_k ⊗ B_k`.
    Custom {
        /// System dimension.
        dim_s: usize,
        /// Bath dimension.
        dim_b: usize,
        /// Terms.
        terms: Vec<ModelTerm>,
    },
}

impl ModelSpec {
    /// Build the model; random models draw from `rng`.
    pub fn build(&self, rng: &mut ChaCha8Rng) -> Result<NoiseModel> {
        match self {
            Self::Heisenberg { n_spins, beta, j } => build_heisenberg_spin_bath(*n_spins, *beta, *j),
            Self::Random { dim_s, dim_b, beta, j } => {
                if *dim_s == 0 || *dim_b == 0 {
                    return Err(DdError::OutOfRange("dimensions must be positive".into()));
                }
                random_model(rng, *dim_s, *dim_b, *beta, *j)
            }
            Self::Custom { dim_s, dim_b, terms } => {
                let pairs: Vec<_> = terms.iter().map(|t| (t.system.clone(), t.bath.clone())).collect();
                build_custom(*dim_s, *dim_b, &pairs)
            }
        }
    }

    /// True if every build draws a fresh model.
    pub fn is_random(&self) -> bool {
        matches!(self, Self::Random { .. })
    }
}

/// A sweep axis given by explicit values or by a range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridAxis {
    /// Explicit values.
    Values(Vec<f64>),
    /// `points` values from `start` to `stop`, linear or logarithmic.
    Range {
        /// First value.
        start: f64,
        /// Last value.
        stop: f64,
        /// Number of points.
        points: usize,
        /// Logarithmic spacing.
        #[serde(default)]
        log: bool,
    },
}

impl GridAxis {
    fn linear(start: f64, stop: f64, points: usize) -> Self {
        Self::Range { start, stop, points, log: false }
    }

    fn logarithmic(start: f64, stop: f64, points: usize) -> Self {
        Self::Range { start, stop, points, log: true }
    }

    /// Expanded values.
    pub fn values(&self) -> Vec<f64> {
        match self {
            Self::Values(v) => v.clone(),
            Self::Range { start, stop, points, log } => {
                let n = *points;
                if n == 1 {
                    return vec![*start];
                }
                (0..n)
                    .map(|k| {
                        let f = k as f64 / (n - 1) as f64;
                        if *log {
                            (start.ln() + f * (stop.ln() - start.ln())).exp()
                        } else {
                            start + f * (stop - start)
                        }
                    })
                    .collect()
            }
        }
    }

    fn validate(&self, pointer: &str) -> Result<()> {
        let bad = |message: &str| {
            Err(DdError::Config {
                pointer: pointer.to_string(),
                message: message.to_string(),
            })
        };
        match self {
            Self::Values(v) if v.is_empty() => bad("grid must be nonempty"),
            Self::Values(v) if v.iter().any(|x| !x.is_finite()) => bad("grid values must be finite"),
            Self::Range { points: 0, .. } => bad("grid must be nonempty"),
            Self::Range { start, stop, .. } if !start.is_finite() || !stop.is_finite() => {
                bad("range ends must be finite")
            }
            Self::Range { start, stop, log: true, .. } if !(*start > 0.0 && *stop > 0.0) => {
                bad("logarithmic range needs positive ends")
            }
            _ => Ok(()),
        }
    }
}

/// Sweep axes; unset axes take experiment defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// `ετ0` values.
    #[serde(default)]
    pub eps_tau0: Option<GridAxis>,
    /// `δ/τ0` values.
    #[serde(default)]
    pub delta_ratio: Option<GridAxis>,
    /// Bath field `βτ0` values.
    #[serde(default)]
    pub beta_tau0: Option<GridAxis>,
    /// Coupling `Jτ0` values.
    #[serde(default)]
    pub j_tau0: Option<GridAxis>,
    /// Filter frequencies `ωτ0`.
    #[serde(default)]
    pub omega_tau0: Option<GridAxis>,
    /// `c̄ετ0` values.
    #[serde(default)]
    pub cbar_eps_tau0: Option<GridAxis>,
    /// Bath sizes.
    #[serde(default)]
    pub n_spins: Option<Vec<usize>>,
    /// Concatenation levels.
    #[serde(default)]
    pub levels: Option<Vec<usize>>,
    /// Pulses per concatenation level.
    #[serde(default)]
    pub r: Option<Vec<u32>>,
    /// Sequence kinds.
    #[serde(default)]
    pub kinds: Option<Vec<SequenceKind>>,
    /// Concatenation regimes.
    #[serde(default)]
    pub regimes: Option<Vec<CddRegime>>,
}

/// Scalar experiment parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentParams {
    /// `η0/η` for the overhead experiment (default 2).
    #[serde(default)]
    pub eta0_over_eta: Option<f64>,
    /// Overhead exponent (default `log2 291`).
    #[serde(default)]
    pub overhead_exponent: Option<f64>,
    /// Random draws for `custom_sim` with a random model (default 1).
    #[serde(default)]
    pub samples: Option<usize>,
    /// Bound case override.
    #[serde(default)]
    pub bound_case: Option<BoundCase>,
}

/// Complete experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Experiment to run.
    pub experiment: ExperimentKind,
    /// Noise model, used by `custom_sim`.
    #[serde(default)]
    pub model: Option<ModelSpec>,
    /// Schedule, used by `custom_sim`.
    #[serde(default)]
    pub schedule: Option<ScheduleSpec>,
    /// Sweep axes.
    #[serde(default)]
    pub grid: GridSpec,
    /// Scalar parameters.
    #[serde(default)]
    pub params: ExperimentParams,
    /// Output directory.
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Seed for random models.
    #[serde(default)]
    pub seed: u64,
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for segment in path.iter() {
        match segment {
            Segment::Seq { index } => {
                let _ = write!(out, "/{index}");
            }
            Segment::Map { key } => {
                let _ = write!(out, "/{}", key.replace('~', "~0").replace('/', "~1"));
            }
            Segment::Enum { .. } | Segment::Unknown => {}
        }
    }
    out
}

fn config_error(pointer: &str, message: impl Into<String>) -> DdError {
    DdError::Config {
        pointer: pointer.to_string(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    /// Parse JSON text; errors carry a JSON pointer to the offending value.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| DdError::Config {
            pointer: pointer_of(e.path()),
            message: e.inner().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Read and parse a JSON file.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| DdError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Default configuration of an experiment.
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            model: None,
            schedule: None,
            grid: GridSpec::default(),
            params: ExperimentParams::default(),
            output: None,
            seed: 0,
        }
    }

    /// Check grids and required sections.
    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        let axes = [
            ("eps_tau0", &g.eps_tau0),
            ("delta_ratio", &g.delta_ratio),
            ("beta_tau0", &g.beta_tau0),
            ("j_tau0", &g.j_tau0),
            ("omega_tau0", &g.omega_tau0),
            ("cbar_eps_tau0", &g.cbar_eps_tau0),
        ];
        for (name, axis) in axes {
            if let Some(a) = axis {
                a.validate(&format!("/grid/{name}"))?;
            }
        }
        let lists = [
            ("n_spins", g.n_spins.as_ref().map(Vec::len)),
            ("levels", g.levels.as_ref().map(Vec::len)),
            ("r", g.r.as_ref().map(Vec::len)),
            ("kinds", g.kinds.as_ref().map(Vec::len)),
            ("regimes", g.regimes.as_ref().map(Vec::len)),
        ];
        for (name, len) in lists {
            if len == Some(0) {
                return Err(config_error(&format!("/grid/{name}"), "grid must be nonempty"));
            }
        }
        if self.params.samples == Some(0) {
            return Err(config_error("/params/samples", "samples must be positive"));
        }
        if self.experiment == ExperimentKind::CustomSim {
            if self.model.is_none() {
                return Err(config_error("/model", "custom_sim needs a model"));
            }
            if self.schedule.is_none() {
                return Err(config_error("/schedule", "custom_sim needs a schedule"));
            }
        }
        Ok(())
    }
}

/// Table cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    /// Floating-point value.
    Float(f64),
    /// Integer value.
    Int(i64),
    /// Text.
    Text(String),
    /// Boolean.
    Bool(bool),
    /// Missing value.
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Self::Float(v) => format!("{v:.16e}"),
            Self::Int(v) => v.to_string(),
            Self::Text(s) => s.clone(),
            Self::Bool(b) => b.to_string(),
            Self::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Self::Float(v) if v.is_finite() => json!(v),
            Self::Float(v) => json!(v.to_string()),
            Self::Int(v) => json!(v),
            Self::Text(s) => json!(s),
            Self::Bool(b) => json!(b),
            Self::Empty => Value::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Self::Float(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Self::Empty, Self::Float)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Self::Int(v as i64)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Self::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Self::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Self::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Self::Text(v)
    }
}

/// Rectangular result table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// Column names.
    pub headers: Vec<String>,
    /// Rows in grid order.
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(headers: &[&str], rows: Vec<Vec<Cell>>) -> Self {
        Self {
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows,
        }
    }

    /// CSV text with LF line endings.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let io = |e: csv::Error| DdError::Io(e.to_string());
        w.write_record(&self.headers).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv)).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| DdError::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| DdError::Io(e.to_string()))
    }

    /// Rows as JSON objects.
    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    Value::Object(
                        self.headers
                            .iter()
                            .zip(row)
                            .map(|(h, c)| (h.clone(), c.json()))
                            .collect(),
                    )
                })
                .collect(),
        )
    }

    /// Index of a column by name.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }
}

/// Output format of [`write_outputs`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    /// CSV table plus JSON summary.
    Csv,
    /// JSON document with rows and summary.
    Json,
}

/// Result of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    /// Experiment run.
    pub experiment: ExperimentKind,
    /// Data rows.
    pub table: Table,
    /// Summary with echoed configuration.
    pub summary: Value,
}

/// Write outputs into `dir`, returning the created paths.
pub fn write_outputs(output: &ExperimentOutput, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| DdError::Io(format!("{}: {e}", dir.display())))?;
    let stem = output.experiment.name();
    let write = |name: String, text: String| -> Result<PathBuf> {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| DdError::Io(format!("{}: {e}", path.display())))?;
        Ok(path)
    };
    let pretty = |v: &Value| serde_json::to_string_pretty(v).expect("JSON values serialize") + "\n";
    match format {
        OutputFormat::Csv => Ok(vec![
            write(format!("{stem}.csv"), output.table.to_csv()?)?,
            write(format!("{stem}.summary.json"), pretty(&output.summary))?,
        ]),
        OutputFormat::Json => {
            let doc = json!({ "rows": output.table.to_json(), "summary": output.summary });
            Ok(vec![write(format!("{stem}.json"), pretty(&doc))?])
        }
    }
}

/// Thread pool honoring [`THREADS_ENV`].
fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 {
            builder = builder.num_threads(n);
        }
    }
    builder
        .build()
        .map_err(|e| DdError::Io(format!("cannot start worker threads: {e}")))
}

/// Evaluate `f` on every point concurrently, keeping grid order.
fn sweep<P: Sync, R: Send>(points: &[P], f: impl Fn(usize, &P) -> Result<R> + Sync) -> Result<Vec<R>> {
    thread_pool()?.install(|| {
        points
            .par_iter()
            .enumerate()
            .map(|(i, p)| f(i, p))
            .collect()
    })
}

fn axis_or(axis: &Option<GridAxis>, default: GridAxis) -> Vec<f64> {
    axis.clone().unwrap_or(default).values()
}

/// Run an experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let (table, mut summary) = match cfg.experiment {
        ExperimentKind::EtaCurves => eta_curves(cfg)?,
        ExperimentKind::Overhead => overhead(cfg)?,
        ExperimentKind::Omega3Ratio => omega3_ratio(cfg)?,
        ExperimentKind::EddMap => edd_map(cfg)?,
        ExperimentKind::CddOptimal => cdd_optimal(cfg)?,
        ExperimentKind::FilterCurves => filter_curves(cfg)?,
        ExperimentKind::CustomSim => custom_sim(cfg)?,
    };
    summary["experiment"] = json!(cfg.experiment.name());
    summary["seed"] = json!(cfg.seed);
    summary["rows"] = json!(table.rows.len());
    summary["config"] = serde_json::to_value(cfg).expect("config serializes");
    Ok(ExperimentOutput {
        experiment: cfg.experiment,
        table,
        summary,
    })
}

/// Abscissa where `values` first crosses `level` upward, by linear interpolation.
pub fn grid_crossing(xs: &[f64], values: &[f64], level: f64) -> Option<f64> {
    xs.windows(2).zip(values.windows(2)).find_map(|(x, v)| {
        (v[0] < level && v[1] >= level).then(|| x[0] + (level - v[0]) * (x[1] - x[0]) / (v[1] - v[0]))
    })
}

fn default_kinds(cfg: &ExperimentConfig) -> Vec<SequenceKind> {
    cfg.grid
        .kinds
        .clone()
        .unwrap_or_else(|| vec![SequenceKind::Universal, SequenceKind::TimeSymmetric])
}

fn kind_name(kind: SequenceKind) -> String {
    serde_json::to_value(kind)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

fn eta_curves(cfg: &ExperimentConfig) -> Result<(Table, Value)> {
    let eps = axis_or(&cfg.grid.eps_tau0, GridAxis::linear(0.0005, 0.1, 200));
    let deltas = axis_or(&cfg.grid.delta_ratio, GridAxis::Values(vec![0.0]));
    let kinds = default_kinds(cfg);
    let mut curves = Vec::new();
    for &kind in &kinds {
        for &delta in &deltas {
            let case = cfg.params.bound_case.unwrap_or_else(|| default_case(kind));
            curves.push((kind, delta, case, StrengthRatio::for_kind(kind, delta, case)?));
        }
    }
    let points: Vec<(usize, f64)> = (0..curves.len())
        .flat_map(|c| eps.iter().map(move |&e| (c, e)))
        .collect();
    let values = sweep(&points, |_, &(c, e)| {
        let ratio = &curves[c].3;
        Ok((ratio.formula(e), ratio.value(e).is_ok()))
    })?;
    let mut rows = Vec::with_capacity(points.len());
    let mut warnings = 0usize;
    for (&(c, e), &(v, valid)) in points.iter().zip(&values) {
        let (kind, delta, case, _) = curves[c];
        warnings += usize::from(!valid);
        rows.push(vec![
            kind_name(kind).into(),
            case_name(case).into(),
            delta.into(),
            e.into(),
            v.into(),
            valid.into(),
        ]);
    }
    let mut crossings = Vec::new();
    for (c, &(kind, delta, case, _)) in curves.iter().enumerate() {
        let ys: Vec<f64> = values[c * eps.len()..(c + 1) * eps.len()].iter().map(|v| v.0).collect();
        let analytic = suppression_threshold(kind, delta, case);
        crossings.push(json!({
            "kind": kind_name(kind),
            "delta_ratio": delta,
            "grid_crossing_eps_tau0": grid_crossing(&eps, &ys, 1.0),
            "threshold_eps_tau0": analytic.as_ref().ok().map(|t| t.crossing_eps_tau0),
            "threshold_delta_ratio": analytic.as_ref().ok().map(|t| t.crossing_delta_ratio).filter(|v| v.is_finite()),
            "threshold_error": analytic.err().map(|e| e.to_string()),
        }));
    }
    let table = Table::new(&["kind", "bound_case", "delta_ratio", "eps_tau0", "eta_ratio", "valid"], rows);
    Ok((table, json!({ "crossings": crossings, "rows_outside_validity": warnings })))
}

fn case_name(case: BoundCase) -> String {
    serde_json::to_value(case)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

fn overhead(cfg: &ExperimentConfig) -> Result<(Table, Value)> {
    let eps = axis_or(&cfg.grid.eps_tau0, GridAxis::logarithmic(1e-4, 1e-2, 60));
    let kinds = default_kinds(cfg);
    let eta0 = cfg.params.eta0_over_eta.unwrap_or(2.0);
    let a = cfg.params.overhead_exponent.unwrap_or_else(default_overhead_exponent);
    if !(eta0 > 0.0 && a.is_finite()) {
        return Err(config_error("/params", "need eta0_over_eta > 0 and a finite exponent"));
    }
    let mut setups = Vec::new();
    for &kind in &kinds {
        let case = cfg.params.bound_case.unwrap_or_else(|| default_case(kind));
        let n = protected_gate_params(kind, 0.0)?.n_pulses;
        setups.push((kind, n, StrengthRatio::for_kind(kind, 0.0, case)?));
    }
    let points: Vec<(usize, f64)> = (0..setups.len())
        .flat_map(|s| eps.iter().map(move |&e| (s, e)))
        .collect();
    let rows = sweep(&points, |_, &(s, e)| {
        let (kind, n, ratio) = &setups[s];
        let r = ratio.formula(e);
        let (value, status) = match overhead_ratio(*n, eta0, 1.0, r, a) {
            Ok(v) => (Some(v), "ok".to_string()),
            Err(DdError::NotScalable(side)) => (None, side.to_string()),
            Err(err) => return Err(err),
        };
        Ok(vec![
            kind_name(*kind).into(),
            Cell::from(*n),
            e.into(),
            r.into(),
            value.into(),
            status.into(),
        ])
    })?;
    let value_at = |s: usize, i: usize| match &rows[s * eps.len() + i][4] {
        Cell::Float(v) => Some(*v),
        _ => None,
    };
    let mut separation = None;
    if let (Some(u), Some(t)) = (
        kinds.iter().position(|&k| k == SequenceKind::Universal),
        kinds.iter().position(|&k| k == SequenceKind::TimeSymmetric),
    ) {
        separation = (0..eps.len())
            .filter(|&i| eps[i] < 1e-2)
            .filter_map(|i| Some(value_at(u, i)? / value_at(t, i)?))
            .reduce(f64::min);
    }
    let table = Table::new(&["kind", "n_pulses", "eps_tau0", "eta_ratio", "overhead_ratio", "status"], rows);
    Ok((
        table,
        json!({
            "eta0_over_eta": eta0,
            "exponent": a,
            "min_universal_over_time_symmetric_below_1e-2": separation,
        }),
    ))
}

/// Third-order Magnus term of the time-symmetric sequence on a spin bath.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Omega3Point {
    /// Bound with per-spin parameters summed: `J -> nJ`, `ε -> n(β + J)`.
    pub bound: f64,
    /// Bound with the exact operator norms of the model.
    pub bound_from_norms: f64,
    /// Exact `‖Ω_3‖`.
    pub exact: f64,
}

impl Omega3Point {
    /// `bound / exact`.
    pub fn ratio(&self) -> f64 {
        self.bound / self.exact
    }

    /// `bound_from_norms / exact`.
    pub fn ratio_from_norms(&self) -> f64 {
        self.bound_from_norms / self.exact
    }
}

/// `‖Ω_3‖` and its bounds for ideal pulses with `τ0 = 1`.
///
/// Each bath spin contributes a coupling of norm at most `J` and a field of
/// norm at most `β`, so `nJ` and `n(β + J)` are valid norm bounds.
pub fn omega3_point(n_spins: usize, beta_tau0: f64, j_tau0: f64) -> Result<Omega3Point> {
    let model = build_heisenberg_spin_bath(n_spins, beta_tau0, j_tau0)?;
    let seq = build_sequence(SequenceKind::TimeSymmetric, 1.0, 0.0)?;
    let segments = toggling_segments(&seq, &model, 1)?;
    let exact = norm(&omega_low_order(&segments, 3)?);
    let t = seq.t_total;
    let bound_of = |j: f64, eps: f64| 2.0 / 9.0 * (j * t) * (eps * t).powi(2);
    let n = n_spins as f64;
    Ok(Omega3Point {
        bound: bound_of(n * j_tau0.abs(), n * (beta_tau0.abs() + j_tau0.abs())),
        bound_from_norms: bound_of(model.j_strength, model.epsilon),
        exact,
    })
}

fn omega3_ratio(cfg: &ExperimentConfig) -> Result<(Table, Value)> {
    let betas = axis_or(&cfg.grid.beta_tau0, GridAxis::linear(0.01, 0.2, 20));
    let js = axis_or(&cfg.grid.j_tau0, GridAxis::Values(vec![0.01, 0.05]));
    let spins = cfg.grid.n_spins.clone().unwrap_or_else(|| vec![1, 2, 3]);
    let mut points = Vec::new();
    for &n in &spins {
        for &j in &js {
            for &b in &betas {
                points.push((n, j, b));
            }
        }
    }
    let values = sweep(&points, |_, &(n, j, b)| omega3_point(n, b, j))?;
    let rows = points
        .iter()
        .zip(&values)
        .map(|(&(n, j, b), v)| {
            vec![
                Cell::from(n),
                j.into(),
                b.into(),
                v.bound.into(),
                v.bound_from_norms.into(),
                v.exact.into(),
                v.ratio().into(),
                v.ratio_from_norms().into(),
            ]
        })
        .collect();
    let argmin = |f: fn(&Omega3Point) -> f64| {
        (0..values.len())
            .min_by(|&a, &b| f(&values[a]).total_cmp(&f(&values[b])))
            .map(|i| {
                json!({
                    "ratio": f(&values[i]),
                    "n_spins": points[i].0,
                    "j_tau0": points[i].1,
                    "beta_tau0": points[i].2,
                })
            })
    };
    let table = Table::new(
        &["n_spins", "j_tau0", "beta_tau0", "omega3_bound", "omega3_bound_from_norms", "omega3_exact", "ratio", "ratio_from_norms"],
        rows,
    );
    Ok((
        table,
        json!({ "min_ratio": argmin(Omega3Point::ratio), "min_ratio_from_norms": argmin(Omega3Point::ratio_from_norms) }),
    ))
}

fn edd_map(cfg: &ExperimentConfig) -> Result<(Table, Value)> {
    let eps = axis_or(&cfg.grid.eps_tau0, GridAxis::linear(0.001, 0.05, 50));
    let deltas = axis_or(&cfg.grid.delta_ratio, GridAxis::linear(0.0, 0.25, 26));
    let points: Vec<(f64, f64)> = deltas
        .iter()
        .flat_map(|&d| eps.iter().map(move |&e| (e, d)))
        .collect();
    let rows = sweep(&points, |_, &(e, d)| {
        let r = edd_region(e, d)?;
        Ok(vec![
            e.into(),
            d.into(),
            Cell::Int(r.region as i64),
            r.on_boundary.into(),
            r.dd.into(),
            r.edd.into(),
        ])
    })?;
    let mut counts = [0usize; 6];
    for r in &rows {
        if let Cell::Int(k) = r[2] {
            counts[(k - 1) as usize] += 1;
        }
    }
    let table = Table::new(&["eps_tau0", "delta_ratio", "region", "on_boundary", "dd_ratio", "edd_ratio"], rows);
    Ok((
        table,
        json!({ "region_counts": counts, "edd_delta_threshold": edd_delta_threshold()? }),
    ))
}

/// Optimal concatenation level with its improvement over level one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CddReport {
    /// Pulses per level.
    pub r: u32,
    /// Analysis regime.
    pub regime: CddRegime,
    /// `c̄ετ0`.
    pub cbar_eps_tau0: f64,
    /// Optimal level.
    pub k_max: u32,
    /// `η^(k_max) / (Jτ0)` from the closed form.
    pub eta_opt: f64,
    /// Bound on `η_opt / (Jτ0)` from the continuous optimum.
    pub eta_opt_bound: f64,
    /// Level-one strength `η^(1) / (Jτ0)`.
    pub eta_level_one: f64,
    /// `η^(1) / η_opt`.
    pub improvement: f64,
    /// Self-consistent `c̄`.
    pub cbar_default: f64,
}

/// Optimal level and improvement factor for one parameter set.
pub fn cdd_report(cbar_eps_tau0: f64, r: u32, regime: CddRegime) -> Result<CddReport> {
    let opt = optimal_level(cbar_eps_tau0, r, regime)?;
    let eta_level_one = cdd_closed_form(cbar_eps_tau0, r, 1.0, 1, regime);
    let eta_opt = cdd_closed_form(cbar_eps_tau0, r, 1.0, opt.k_max, regime);
    Ok(CddReport {
        r,
        regime,
        cbar_eps_tau0,
        k_max: opt.k_max,
        eta_opt,
        eta_opt_bound: opt.eta_opt_bound,
        eta_level_one,
        improvement: eta_level_one / eta_opt,
        cbar_default: opt.cbar_default,
    })
}

fn cdd_optimal(cfg: &ExperimentConfig) -> Result<(Table, Value)> {
    let xs = axis_or(&cfg.grid.cbar_eps_tau0, GridAxis::logarithmic(1e-6, 1e-2, 41));
    let rs = cfg.grid.r.clone().unwrap_or_else(|| vec![4, 8]);
    let regimes = cfg
        .grid
        .regimes
        .clone()
        .unwrap_or_else(|| vec![CddRegime::MagnusGeneral, CddRegime::MagnusTimeSymmetric]);
    let mut points = Vec::new();
    for &regime in &regimes {
        for &r in &rs {
            for &x in &xs {
                points.push((regime, r, x));
            }
        }
    }
    let rows = sweep(&points, |_, &(regime, r, x)| {
        let rep = cdd_report(x, r, regime)?;
        let regime_name = serde_json::to_value(regime).expect("regime serializes");
        Ok(vec![
            regime_name.as_str().unwrap_or_default().into(),
            Cell::from(r),
            x.into(),
            Cell::from(rep.k_max),
            rep.eta_opt.into(),
            rep.eta_opt_bound.into(),
            rep.eta_level_one.into(),
            rep.improvement.into(),
            rep.cbar_default.into(),
        ])
    })?;
    let table = Table::new(
        &["regime", "r", "cbar_eps_tau0", "k_max", "eta_opt", "eta_opt_bound", "eta_level_one", "improvement", "cbar_default"],
        rows,
    );
    Ok((table, json!({})))
}

fn filter_curves(cfg: &ExperimentConfig) -> Result<(Table, Value)> {
    let omegas = axis_or(&cfg.grid.omega_tau0, GridAxis::logarithmic(1e-3, 10.0, 81));
    let kinds = default_kinds(cfg);
    let levels = cfg.grid.levels.clone().unwrap_or_else(|| vec![1]);
    let mut sets = Vec::new();
    let mut orders = Vec::new();
    for &kind in &kinds {
        for &level in &levels {
            let seq = concatenate_schedule(&build_sequence(kind, 1.0, 0.0)?, level)?;
            let sw = switching_functions(&seq)?;
            let order = decoupling_order_moments(&sw, 12).map(|r| r.order);
            orders.push(json!({ "kind": kind_name(kind), "level": level, "decoupling_order": order }));
            sets.push((kind, level, sw));
        }
    }
    let points: Vec<(usize, f64)> = (0..sets.len())
        .flat_map(|s| omegas.iter().map(move |&w| (s, w)))
        .collect();
    let rows = sweep(&points, |_, &(s, w)| {
        let (kind, level, sw) = &sets[s];
        let f = filter_fourier(sw, w);
        Ok(vec![
            kind_name(*kind).into(),
            Cell::from(*level),
            w.into(),
            f[0].norm().into(),
            f[1].norm().into(),
            f[2].norm().into(),
        ])
    })?;
    let table = Table::new(&["kind", "level", "omega_tau0", "abs_fx", "abs_fy", "abs_fz"], rows);
    Ok((table, json!({ "filters": orders })))
}

fn custom_sim(cfg: &ExperimentConfig) -> Result<(Table, Value)> {
    let model_spec = cfg.model.as_ref().ok_or_else(|| config_error("/model", "missing model"))?;
    let schedule_spec = cfg.schedule.as_ref().ok_or_else(|| config_error("/schedule", "missing schedule"))?;
    let seq = schedule_spec.build()?;
    let case = cfg.params.bound_case.unwrap_or_else(|| default_case(seq.kind));
    let samples = if model_spec.is_random() { cfg.params.samples.unwrap_or(1) } else { 1 };
    let indices: Vec<usize> = (0..samples).collect();
    let results = sweep(&indices, |_, &i| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(i as u64));
        let model = model_spec.build(&mut rng)?;
        simulate(&seq, &model, case)
    })?;
    let mut violations = 0usize;
    let rows = results
        .iter()
        .enumerate()
        .map(|(i, r)| {
            if r.eta_bound.is_some_and(|b| r.eta_exact > b) {
                violations += 1;
            }
            let order = |k: usize| Cell::from(r.per_order_norms.map(|n| n[k]));
            vec![
                Cell::from(i),
                r.j.into(),
                r.epsilon.into(),
                r.eta_exact.into(),
                r.eta_bound.into(),
                order(0),
                order(1),
                order(2),
                order(3),
            ]
        })
        .collect();
    let table = Table::new(
        &["sample", "j", "epsilon", "eta_exact", "eta_bound", "omega1_prime", "omega2", "omega3", "omega4"],
        rows,
    );
    Ok((
        table,
        json!({
            "bound_case": case,
            "t_total": seq.t_total,
            "n_pulses": seq.n_pulses,
            "bound_violations": violations,
            "results": results,
        }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::magnus_engine::ordered_product;
    use crate::op_core::max_abs;

    #[test]
    fn zero_error_part_gives_zero() {
        let model = build_heisenberg_spin_bath(1, 0.1, 0.0).unwrap();
        let seq = build_sequence(SequenceKind::Universal, 1.0, 0.1).unwrap();
        assert!(eta_exact(&seq, &model).unwrap() < 1e-14);
    }

    #[test]
    fn ideal_pulses_match_segment_product() {
        let model = build_heisenberg_spin_bath(2, 0.05, 0.02).unwrap();
        let seq = build_sequence(SequenceKind::Universal, 1.0, 0.0).unwrap();
        let direct = toggling_propagator(&seq, &model).unwrap();
        let segments = toggling_segments(&seq, &model, 1).unwrap();
        let product = ordered_product(&segments).unwrap();
        assert!(max_abs(&(direct - product)) < 1e-13);
    }

    #[test]
    fn crossing_interpolates() {
        let x = [0.0, 1.0, 2.0];
        let y = [0.0, 0.5, 1.5];
        assert_eq!(grid_crossing(&x, &y, 1.0), Some(1.5));
        assert_eq!(grid_crossing(&x, &y, 2.0), None);
    }

    #[test]
    fn parse_error_has_pointer() {
        let err = ExperimentConfig::from_json(r#"{"experiment":"eta_curves","grid":{"eps_tau0":[0.1,"x"]}}"#)
            .unwrap_err();
        match err {
            DdError::Config { pointer, .. } => assert!(pointer.starts_with("/grid/eps_tau0"), "{pointer}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_grid_is_rejected() {
        let err = ExperimentConfig::from_json(r#"{"experiment":"edd_map","grid":{"delta_ratio":[]}}"#).unwrap_err();
        assert_eq!(
            err,
            DdError::Config {
                pointer: "/grid/delta_ratio".into(),
                message: "grid must be nonempty".into()
            }
        );
    }

    #[test]
    fn csv_uses_lf_and_full_precision() {
        let t = Table::new(&["a", "b"], vec![vec![0.1.into(), Cell::Empty]]);
        assert_eq!(t.to_csv().unwrap(), "a,b\n1.0000000000000001e-1,\n");
    }
}
