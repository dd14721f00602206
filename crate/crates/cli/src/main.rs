//! Command-line front end: bounds, thresholds, sweeps and exact simulation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ddlab_core::analytic_bounds::{
    dyson_c5, eta_dd_bound, fn_coefficients, g_constants, table_one_coeffs, to_f64, BoundCase,
    CoeffInputs, ScheduleParams, C5_TABLE, MAGNUS_VALIDITY_LIMIT,
};
use ddlab_core::cdd_recursion::CddRegime;
use ddlab_core::error::{DdError, ErrorCategory};
use ddlab_core::experiments::{
    cdd_report, run_experiment, write_outputs, ExperimentConfig, ExperimentKind, OutputFormat,
};
use ddlab_core::pulse_schedule::{append_gate, build_sequence, concatenate_schedule, named_gate, SequenceKind};
use ddlab_core::spectral_filter::{decoupling_order_moments, filter_fourier, switching_functions};
use ddlab_core::threshold_overhead::{default_case, suppression_threshold};
use serde_json::{json, Map, Value};

#[derive(Parser, Debug)]
#[command(name = "ddlab", version, about = "Bounds and exact simulation for dynamically decoupled gates")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Experiment configuration file (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; results go to stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Seed overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Kind {
    Universal,
    TimeSymmetric,
    Eulerian,
    EulerianTimeSymmetric,
}

impl From<Kind> for SequenceKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Universal => Self::Universal,
            Kind::TimeSymmetric => Self::TimeSymmetric,
            Kind::Eulerian => Self::Eulerian,
            Kind::EulerianTimeSymmetric => Self::EulerianTimeSymmetric,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Case {
    General,
    TimeSymmetric,
    Dyson,
}

impl From<Case> for BoundCase {
    fn from(c: Case) -> Self {
        match c {
            Case::General => Self::General,
            Case::TimeSymmetric => Self::TimeSymmetric,
            Case::Dyson => Self::Dyson,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Regime {
    General,
    TimeSymmetric,
}

impl From<Regime> for CddRegime {
    fn from(r: Regime) -> Self {
        match r {
            Regime::General => Self::MagnusGeneral,
            Regime::TimeSymmetric => Self::MagnusTimeSymmetric,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Effective noise strength bound for a protected gate.
    Bounds {
        /// Error-part norm J.
        #[arg(long)]
        j: f64,
        /// Total noise norm epsilon.
        #[arg(long)]
        epsilon: f64,
        /// Sequence kind.
        #[arg(long, value_enum, default_value_t = Kind::Universal)]
        kind: Kind,
        /// Pulse spacing.
        #[arg(long, default_value_t = 1.0)]
        tau0: f64,
        /// Pulse width.
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        /// Gate appended after the sequence (I, X, Y, Z, H, S, T).
        #[arg(long)]
        gate: Option<String>,
        /// Bound case; defaults to the one matching the sequence.
        #[arg(long, value_enum)]
        case: Option<Case>,
    },
    /// Noise-suppression thresholds.
    Threshold {
        /// Sequence kind; all kinds when omitted.
        #[arg(long, value_enum)]
        kind: Option<Kind>,
        /// Pulse width over spacing.
        #[arg(long, default_value_t = 0.0)]
        delta_ratio: f64,
        /// Bound case; defaults to the one matching the sequence.
        #[arg(long, value_enum)]
        case: Option<Case>,
    },
    /// Run the experiment described by --config.
    Sweep,
    /// Optimal concatenation level.
    Cdd {
        /// Pulses per level.
        #[arg(long = "R", alias = "r")]
        r: u32,
        /// Product of the consistency constant, noise norm and spacing.
        #[arg(long)]
        cbar_eps_tau0: f64,
        /// Analysis regime; time-symmetric when R = 8, general otherwise.
        #[arg(long, value_enum)]
        regime: Option<Regime>,
    },
    /// Filter transform of an ideal-pulse sequence.
    Filter {
        /// Sequence kind.
        #[arg(long, value_enum, default_value_t = Kind::Universal)]
        kind: Kind,
        /// Concatenation level.
        #[arg(long, default_value_t = 1)]
        level: usize,
        /// Frequencies in units of 1/tau0.
        #[arg(long, num_args = 1.., default_values_t = vec![1e-3, 1e-2, 1e-1, 1.0])]
        omega_tau0: Vec<f64>,
    },
    /// Exact simulation of the model and schedule in --config.
    Sim,
    /// Coefficient table, series coefficients and constants.
    Tables,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.category() {
                ErrorCategory::Config => 2,
                ErrorCategory::Validity => 3,
                ErrorCategory::Numeric => 4,
            })
        }
    }
}

fn run(cli: Cli) -> Result<(), DdError> {
    let g = &cli.global;
    match cli.command {
        Command::Bounds { j, epsilon, kind, tau0, delta, gate, case } => {
            let mut seq = build_sequence(kind.into(), tau0, delta)?;
            if let Some(name) = gate {
                let u = named_gate(&name).ok_or_else(|| DdError::OutOfRange(format!("unknown gate '{name}'")))?;
                seq = append_gate(&seq, &u)?;
            }
            let case = case.map_or_else(|| default_case(seq.kind), BoundCase::from);
            let report = eta_dd_bound(j, epsilon, &ScheduleParams::from_schedule(&seq), case)?;
            let mut rec = Map::new();
            rec.insert("case".into(), json!(report.case));
            rec.insert("t_span".into(), json!(report.inputs.t_span));
            rec.insert("n_pulses".into(), json!(report.inputs.n_pulses));
            for (n, (c, p)) in report.coefficients.iter().zip(report.per_order).enumerate() {
                rec.insert(format!("c{}", n + 1), json!(c));
                rec.insert(format!("term{}", n + 1), json!(p));
            }
            rec.insert("eta_bound".into(), json!(report.eta_bound));
            emit(g, "bounds", &[Value::Object(rec)])
        }
        Command::Threshold { kind, delta_ratio, case } => {
            let kinds: Vec<SequenceKind> = match kind {
                Some(k) => vec![k.into()],
                None => vec![
                    SequenceKind::Universal,
                    SequenceKind::TimeSymmetric,
                    SequenceKind::Eulerian,
                    SequenceKind::EulerianTimeSymmetric,
                ],
            };
            let mut records = Vec::new();
            for k in kinds {
                let c = case.map_or_else(|| default_case(k), BoundCase::from);
                let t = suppression_threshold(k, delta_ratio, c)?;
                records.push(json!({
                    "kind": t.sequence_kind,
                    "case": t.bound_case,
                    "delta_ratio": delta_ratio,
                    "threshold_eps_tau0": t.crossing_eps_tau0,
                    "max_delta_ratio": finite_or_null(t.crossing_delta_ratio),
                }));
            }
            emit(g, "threshold", &records)
        }
        Command::Sweep => {
            let cfg = load_config(g)?;
            let out = run_experiment(&cfg)?;
            let dir = g.out.clone().or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("."));
            for path in write_outputs(&out, &dir, output_format(g))? {
                write_stdout(&format!("{}\n", path.display()));
            }
            Ok(())
        }
        Command::Cdd { r, cbar_eps_tau0, regime } => {
            let regime = regime.map_or(
                if r == 8 { CddRegime::MagnusTimeSymmetric } else { CddRegime::MagnusGeneral },
                CddRegime::from,
            );
            let rep = cdd_report(cbar_eps_tau0, r, regime)?;
            let value = serde_json::to_value(rep).expect("report serializes");
            emit(g, "cdd", &[value])
        }
        Command::Filter { kind, level, omega_tau0 } => {
            let seq = concatenate_schedule(&build_sequence(kind.into(), 1.0, 0.0)?, level)?;
            let sw = switching_functions(&seq)?;
            let orders = decoupling_order_moments(&sw, 12).map(|r| r.order);
            let records: Vec<Value> = omega_tau0
                .iter()
                .map(|&w| {
                    let f = filter_fourier(&sw, w);
                    json!({
                        "omega_tau0": w,
                        "fx_re": f[0].re, "fx_im": f[0].im,
                        "fy_re": f[1].re, "fy_im": f[1].im,
                        "fz_re": f[2].re, "fz_im": f[2].im,
                        "order_x": orders[0], "order_y": orders[1], "order_z": orders[2],
                    })
                })
                .collect();
            emit(g, "filter", &records)
        }
        Command::Sim => {
            let mut cfg = load_config(g)?;
            cfg.experiment = ExperimentKind::CustomSim;
            let out = run_experiment(&cfg)?;
            match &g.out {
                Some(dir) => {
                    for path in write_outputs(&out, dir, output_format(g))? {
                        write_stdout(&format!("{}\n", path.display()));
                    }
                    Ok(())
                }
                None => {
                    let records = out.table.to_json();
                    emit(g, "sim", records.as_array().expect("rows are an array"))
                }
            }
        }
        Command::Tables => tables(g),
    }
}

/// Write to stdout, ignoring a closed pipe.
fn write_stdout(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|()| out.flush());
}

fn finite_or_null(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

fn output_format(g: &Global) -> OutputFormat {
    match g.format {
        Format::Csv => OutputFormat::Csv,
        Format::Json => OutputFormat::Json,
    }
}

fn load_config(g: &Global) -> Result<ExperimentConfig, DdError> {
    let path = g.config.as_ref().ok_or_else(|| DdError::Config {
        pointer: String::new(),
        message: "--config <file.json> is required".into(),
    })?;
    let mut cfg = ExperimentConfig::from_path(path)?;
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn scalar_text(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Number(n) => match n.as_f64() {
            Some(f) if n.is_f64() => format!("{f:.16e}"),
            _ => n.to_string(),
        },
        other => other.to_string(),
    }
}

fn csv_text(records: &[Value]) -> String {
    let Some(Value::Object(first)) = records.first() else {
        return String::new();
    };
    let headers: Vec<&String> = first.keys().collect();
    let mut out = headers.iter().map(|h| h.as_str()).collect::<Vec<_>>().join(",");
    out.push('\n');
    for r in records {
        let row: Vec<String> = headers.iter().map(|h| scalar_text(&r[h.as_str()])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn json_text(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("JSON values serialize") + "\n"
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<(), DdError> {
    std::fs::create_dir_all(dir).map_err(|e| DdError::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| DdError::Io(format!("{}: {e}", path.display())))?;
    write_stdout(&format!("{}\n", path.display()));
    Ok(())
}

fn emit(g: &Global, name: &str, records: &[Value]) -> Result<(), DdError> {
    let (file, text) = match g.format {
        Format::Csv => (format!("{name}.csv"), csv_text(records)),
        Format::Json => (format!("{name}.json"), json_text(&Value::Array(records.to_vec()))),
    };
    match &g.out {
        Some(dir) => write_file(dir, &file, &text),
        None => {
            write_stdout(&text);
            Ok(())
        }
    }
}

fn tables(g: &Global) -> Result<(), DdError> {
    let inputs = CoeffInputs {
        n_pulses: 0,
        delta: 0.0,
        t_span: 1.0,
        regular_spacing: true,
        symmetry_break: 0.0,
        epsilon_t: MAGNUS_VALIDITY_LIMIT,
    };
    let mut table_one = Vec::new();
    for (name, case) in [
        ("general", BoundCase::General),
        ("time_symmetric", BoundCase::TimeSymmetric),
        ("dyson", BoundCase::Dyson),
    ] {
        let c = table_one_coeffs(case, &inputs)?;
        table_one.push(json!({
            "case": name,
            "c2": c[1],
            "c3": c[2],
            "c4": c[3],
            "c5": c[4],
            "epsilon_t": MAGNUS_VALIDITY_LIMIT,
        }));
    }
    let fns: Vec<Value> = fn_coefficients(10)?
        .iter()
        .enumerate()
        .skip(1)
        .map(|(n, f)| json!({ "n": n, "f_n": f.to_string(), "value": to_f64(f) }))
        .collect();
    let k = g_constants();
    let constants = vec![json!({
        "zeta": k.zeta,
        "c_prime": k.c_prime,
        "c5": k.c5,
        "c5_table": C5_TABLE,
        "dyson_c5_at_limit": dyson_c5(MAGNUS_VALIDITY_LIMIT),
    })];
    match (g.format, &g.out) {
        (Format::Json, out) => {
            let doc = json!({ "table_one": table_one, "fn_coefficients": fns, "constants": constants[0] });
            match out {
                Some(dir) => write_file(dir, "tables.json", &json_text(&doc)),
                None => {
                    write_stdout(&json_text(&doc));
                    Ok(())
                }
            }
        }
        (Format::Csv, Some(dir)) => {
            write_file(dir, "table_one.csv", &csv_text(&table_one))?;
            write_file(dir, "fn_coefficients.csv", &csv_text(&fns))?;
            write_file(dir, "constants.csv", &csv_text(&constants))
        }
        (Format::Csv, None) => {
            write_stdout(&format!("{}\n{}\n{}", csv_text(&table_one), csv_text(&fns), csv_text(&constants)));
            Ok(())
        }
    }
}
