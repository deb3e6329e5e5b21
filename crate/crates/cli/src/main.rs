//! CLI front end: ingest a JSON system spec, run analyze / lie / synthesize /
//! simulate / demo, and persist a reproducible JSON report.
//!
//! Exit codes: 0 success, 1 domain result (obstruction where synthesis was
//! requested, dark transitions, unreachable targets), 2 I/O or validation
//! errors. Reports are written atomically (temp file + rename) and identical
//! configurations produce byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use sideband::evolution::{
    drive_oscillator, l0_escape_demo, simulate, DriveReport, EscapeReport, SimulationReport,
};
use sideband::graph::{build_transfer_graph, fct_verdict, GraphEdge, VerdictReport};
use sideband::lie::{closure, ClosureOptions, LieClosureReport};
use sideband::models::{build_operators, ControlOperator, Family, SystemModel};
use sideband::numeric::{basis_vector, norm, zero_vector, CVector, C64};
use sideband::report::to_json_string;
use sideband::synthesis::{sweep_to_ground, transfer, PulseSequence};

#[derive(Parser)]
#[command(name = "sideband", version, about = "transfer-graph controllability and pulse synthesis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the control operators and decide finite controllability.
    Analyze(CommonArgs),
    /// Estimate the Lie-closure dimension of the model's control operators.
    Lie(CommonArgs),
    /// Synthesize a pulse sequence (to the ground state, or to --target).
    Synthesize(CommonArgs),
    /// Synthesize and then execute the sequence, reporting the simulation.
    Simulate(CommonArgs),
    /// Run the model's demonstration (coherent drive or escape comparison).
    Demo(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// System spec JSON: {"family", "scheme", "eta", "n_max", "guard", "levels", "mu"}.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Input state JSON: {"normalize": bool, "amplitudes": [[label, re, im], ...]}.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Target state JSON (same format as --in).
    #[arg(long)]
    target: Option<PathBuf>,
    /// Report output path.
    #[arg(long, default_value = "report.json")]
    out: PathBuf,
    /// Seed recorded in the report (reserved for randomized batch modes).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Rescale input/target states to unit norm instead of rejecting them.
    #[arg(long)]
    normalize: bool,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn validation(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<sideband::Error> for Failure {
    fn from(e: sideband::Error) -> Self {
        use sideband::Error::*;
        let code = match e {
            NotFinitelyControllable { .. }
            | DarkEdge { .. }
            | NoEigenstatePath { .. }
            | SupportInGuard { .. }
            | DescentViolated { .. }
            | GuardLeakage { .. } => 1,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type Runner = fn(&CommonArgs) -> Result<String, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, run): (&CommonArgs, Runner) = match &cli.command {
        Command::Analyze(a) => (a, run_analyze),
        Command::Lie(a) => (a, run_lie),
        Command::Synthesize(a) => (a, run_synthesize),
        Command::Simulate(a) => (a, run_simulate),
        Command::Demo(a) => (a, run_demo),
    };
    match run(args) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load_model(args: &CommonArgs) -> Result<SystemModel, Failure> {
    let path = args
        .spec
        .as_ref()
        .ok_or_else(|| Failure::validation("--spec is required for this command"))?;
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::validation(format!("cannot read {}: {e}", path.display())))?;
    let model: SystemModel = serde_json::from_str(&text)
        .map_err(|e| Failure::validation(format!("invalid system spec: {e}")))?;
    model.resolved().map_err(Failure::from)
}

#[derive(Deserialize)]
struct StateSpec {
    #[serde(default)]
    normalize: bool,
    amplitudes: Vec<(String, f64, f64)>,
}

fn load_state(
    path: &Path,
    model: &SystemModel,
    force_normalize: bool,
) -> Result<CVector, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::validation(format!("cannot read {}: {e}", path.display())))?;
    let spec: StateSpec = serde_json::from_str(&text)
        .map_err(|e| Failure::validation(format!("invalid state spec: {e}")))?;
    let mut v: CVector = zero_vector(model.dim());
    for (label, re, im) in &spec.amplitudes {
        let state = model.parse_label(label).map_err(Failure::from)?;
        let idx = model.canonical_index(&state).map_err(Failure::from)?;
        if v[idx] != C64::new(0.0, 0.0) {
            return Err(Failure::validation(format!("duplicate label {label:?}")));
        }
        v[idx] = C64::new(*re, *im);
    }
    let nrm = norm(&v);
    if spec.normalize || force_normalize {
        if nrm == 0.0 {
            return Err(Failure::validation("state has zero norm"));
        }
        Ok(v.mapv(|z| z / nrm))
    } else if (nrm - 1.0).abs() > 1e-9 {
        Err(Failure::from(sideband::Error::NormNotUnit { norm: nrm }))
    } else {
        Ok(v)
    }
}

fn write_report<T: Serialize>(out: &Path, report: &T) -> Result<(), Failure> {
    let text = to_json_string(report).map_err(Failure::from)?;
    let tmp = out.with_extension("json.tmp");
    fs::write(&tmp, text.as_bytes())
        .map_err(|e| Failure::validation(format!("cannot write {}: {e}", tmp.display())))?;
    fs::rename(&tmp, out)
        .map_err(|e| Failure::validation(format!("cannot rename into {}: {e}", out.display())))?;
    Ok(())
}

#[derive(Serialize)]
struct OperatorSummary {
    id: String,
    edge_count: usize,
}

#[derive(Serialize)]
struct GraphReport {
    vertices: usize,
    edges: Vec<GraphEdge>,
}

fn operator_summaries(ops: &[ControlOperator]) -> Vec<OperatorSummary> {
    ops.iter()
        .map(|op| OperatorSummary {
            id: op.id.clone(),
            edge_count: op.edges.len(),
        })
        .collect()
}

#[derive(Serialize)]
struct AnalyzeReport {
    command: &'static str,
    seed: u64,
    model: SystemModel,
    operators: Vec<OperatorSummary>,
    graph: GraphReport,
    verdict: VerdictReport,
}

fn run_analyze(args: &CommonArgs) -> Result<String, Failure> {
    let model = load_model(args)?;
    let ops = build_operators(&model).map_err(Failure::from)?;
    let graph = build_transfer_graph(&ops).map_err(Failure::from)?;
    let verdict = fct_verdict(&model, &ops).map_err(Failure::from)?;
    let report = AnalyzeReport {
        command: "analyze",
        seed: args.seed,
        model: model.clone(),
        operators: operator_summaries(&ops),
        graph: GraphReport {
            vertices: graph.vertices,
            edges: graph.edges.clone(),
        },
        verdict: verdict.to_report(),
    };
    write_report(&args.out, &report)?;
    Ok(format!(
        "analyze: {} {} dim={} verdict={}",
        model.family,
        model
            .scheme
            .map(|s| s.to_string())
            .unwrap_or_else(|| "-".into()),
        model.dim(),
        verdict.kind()
    ))
}

#[derive(Serialize)]
struct LieReport {
    command: &'static str,
    seed: u64,
    model: SystemModel,
    closure: LieClosureReport,
}

fn run_lie(args: &CommonArgs) -> Result<String, Failure> {
    let model = load_model(args)?;
    let ops = build_operators(&model).map_err(Failure::from)?;
    let dim = model.dim();
    let bandwidth = ops
        .iter()
        .flat_map(|op| op.edges.iter().map(|(i, j, _)| j - i))
        .max()
        .unwrap_or(1);
    let interior = (dim.saturating_sub(16 * bandwidth)).max(dim / 2).min(dim - 2).max(1);
    let gens: Vec<(String, sideband::CMatrix)> =
        ops.into_iter().map(|op| (op.id, op.matrix)).collect();
    let report = closure(&gens, &ClosureOptions::new(24, 1e-9, interior)).map_err(Failure::from)?;
    let summary = format!(
        "lie: dimension_found={} saturated={} depth={} interior={}",
        report.dimension_found, report.saturated, report.depth, report.interior_dim
    );
    write_report(
        &args.out,
        &LieReport {
            command: "lie",
            seed: args.seed,
            model,
            closure: report,
        },
    )?;
    Ok(summary)
}

#[derive(Serialize)]
struct SynthesizeReport {
    command: &'static str,
    seed: u64,
    model: SystemModel,
    verdict: VerdictReport,
    sequence: Option<PulseSequence>,
    verification: Option<Verification>,
    error: Option<String>,
}

#[derive(Serialize)]
struct Verification {
    fidelity: f64,
    pulse_count: usize,
    leakage_guard: f64,
}

struct SynthesisOutcome {
    model: SystemModel,
    verdict: VerdictReport,
    verdict_kind: String,
    sequence: Option<PulseSequence>,
    simulation: Option<SimulationReport>,
    error: Option<Failure>,
}

fn synthesize_and_check(args: &CommonArgs, command: &str) -> Result<SynthesisOutcome, Failure> {
    let model = load_model(args)?;
    let input_path = args
        .input
        .as_ref()
        .ok_or_else(|| Failure::validation(format!("--in is required for {command}")))?;
    let initial = load_state(input_path, &model, args.normalize)?;
    let target = match &args.target {
        Some(path) => Some(load_state(path, &model, args.normalize)?),
        None => None,
    };
    let ops = build_operators(&model).map_err(Failure::from)?;
    let verdict = fct_verdict(&model, &ops).map_err(Failure::from)?;

    let synth = match &target {
        Some(t) => transfer(&initial, t, &verdict, &ops, &model),
        None => sweep_to_ground(&initial, &verdict, &ops, &model),
    };
    let (sequence, simulation, error) = match synth {
        Ok(seq) => {
            let reference = target.unwrap_or_else(|| basis_vector(model.dim(), 0));
            let rep =
                simulate(&model, &initial, &seq, &ops, Some(&reference)).map_err(Failure::from)?;
            (Some(seq), Some(rep), None)
        }
        Err(e) => (None, None, Some(Failure::from(e))),
    };
    Ok(SynthesisOutcome {
        verdict_kind: verdict.kind().to_string(),
        verdict: verdict.to_report(),
        model,
        sequence,
        simulation,
        error,
    })
}

fn run_synthesize(args: &CommonArgs) -> Result<String, Failure> {
    let outcome = synthesize_and_check(args, "synthesize")?;
    let verification = outcome.simulation.as_ref().map(|rep| Verification {
        fidelity: rep.fidelity_to_target.unwrap_or(0.0),
        pulse_count: rep.pulse_count,
        leakage_guard: rep.leakage_guard,
    });
    let error_text = outcome.error.as_ref().map(|f| f.message.clone());
    write_report(
        &args.out,
        &SynthesizeReport {
            command: "synthesize",
            seed: args.seed,
            model: outcome.model,
            verdict: outcome.verdict,
            sequence: outcome.sequence.clone(),
            verification,
            error: error_text,
        },
    )?;
    match outcome.error {
        Some(f) => Err(f),
        None => {
            let seq = outcome.sequence.expect("sequence present on success");
            let fid = outcome
                .simulation
                .and_then(|r| r.fidelity_to_target)
                .unwrap_or(0.0);
            Ok(format!(
                "synthesize: {} pulses, verified fidelity {fid:.12}",
                seq.pulses.len()
            ))
        }
    }
}

#[derive(Serialize)]
struct SimulateReport {
    command: &'static str,
    seed: u64,
    model: SystemModel,
    verdict: VerdictReport,
    sequence: Option<PulseSequence>,
    report: Option<SimulationReport>,
    error: Option<String>,
}

fn run_simulate(args: &CommonArgs) -> Result<String, Failure> {
    let outcome = synthesize_and_check(args, "simulate")?;
    let error_text = outcome.error.as_ref().map(|f| f.message.clone());
    write_report(
        &args.out,
        &SimulateReport {
            command: "simulate",
            seed: args.seed,
            model: outcome.model,
            verdict: outcome.verdict,
            sequence: outcome.sequence,
            report: outcome.simulation.clone(),
            error: error_text,
        },
    )?;
    match outcome.error {
        Some(f) => Err(f),
        None => {
            let rep = outcome.simulation.expect("simulation present on success");
            Ok(format!(
                "simulate: {} pulses, fidelity {:.12}, guard leakage {:.3e} (verdict {})",
                rep.pulse_count,
                rep.fidelity_to_target.unwrap_or(0.0),
                rep.leakage_guard,
                outcome.verdict_kind,
            ))
        }
    }
}

#[derive(Serialize)]
struct DemoReport {
    command: &'static str,
    seed: u64,
    model: SystemModel,
    l0_escape: Option<EscapeReport>,
    coherent_drive: Option<DriveReport>,
}

fn run_demo(args: &CommonArgs) -> Result<String, Failure> {
    let model = match &args.spec {
        Some(_) => load_model(args)?,
        None => {
            let mut m = SystemModel::new(Family::BlockExample, None, 0.0, 7)
                .map_err(Failure::from)?;
            m.guard = 0;
            m
        }
    };
    match model.family {
        Family::BlockExample => {
            let dim = if model.dim() % 2 == 0 {
                model.dim()
            } else {
                model.dim() + 1
            };
            let report = l0_escape_demo(dim, 1.0, 1.0).map_err(Failure::from)?;
            let summary = format!(
                "demo: alternating support {} vs exp(A+B) support {} at dim {}",
                report.support_alternating, report.support_sum, report.dim
            );
            write_report(
                &args.out,
                &DemoReport {
                    command: "demo",
                    seed: args.seed,
                    model,
                    l0_escape: Some(report),
                    coherent_drive: None,
                },
            )?;
            Ok(summary)
        }
        Family::HarmonicOscillator => {
            let report = drive_oscillator(&model, 0.2, 280, 0.1).map_err(Failure::from)?;
            let summary = format!(
                "demo: mean occupation {:.3}, min coherent fit {:.9}, max number-state fidelity {:.3}",
                report.mean_occupation,
                report.min_coherent_fidelity,
                report.max_number_state_fidelity
            );
            write_report(
                &args.out,
                &DemoReport {
                    command: "demo",
                    seed: args.seed,
                    model,
                    l0_escape: None,
                    coherent_drive: Some(report),
                },
            )?;
            Ok(summary)
        }
        other => Err(Failure::validation(format!(
            "demo supports block-example or harmonic-oscillator specs, got {other}"
        ))),
    }
}
