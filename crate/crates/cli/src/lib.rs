//! Command-line front end: instance files in, reports and solution files out.
//!
//! Exit codes are 0 on success, 1 when the mathematics fails (inconsistent
//! state, infeasible instance, invalid channel) and 2 when the input cannot
//! be used at all.

pub mod doc;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;

use qmarginal::channels::{kraus_from_choi, reduce_kraus_rank, sub_channel, ChannelReduceOptions};
use qmarginal::gallery::{k_subsets, maximally_mixed_klocal_instance, random_feasible_instance, ring_graph_state};
use qmarginal::hilbert::{SubsystemSet, SystemShape};
use qmarginal::marginal::{find_feasible_system, isqrt, FeasibilityOptions, ResidualReport};
use qmarginal::numerics::{eig_hermitian, HermitianMatrix, RANK_TOL};
use qmarginal::reduce::{reduce_system, ReduceOptions, ReductionTrace};
use qmarginal::sector::{bosonic_maximally_mixed_2, bosonic_sigma_p, SectorInstance};
use qmarginal::hilbert::Statistics;

use doc::*;

#[derive(Parser, Debug)]
#[command(name = "qmarginal", version, about = "Quantum marginal consistency and rank reduction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check a state against an instance.
    Check {
        instance: PathBuf,
        solution: PathBuf,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Find a consistent global state and reduce its rank.
    Solve {
        instance: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        /// Skip rank reduction.
        #[arg(long)]
        no_reduce: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print the rank bounds of an instance.
    Bounds {
        instance: PathBuf,
        #[arg(long, default_value_t = RANK_TOL)]
        rank_tol: f64,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Generate example instances and states.
    Example {
        #[command(subcommand)]
        example: Example,
    },
    /// Channel tools.
    Channel {
        #[command(subcommand)]
        command: ChannelCommand,
    },
}

#[derive(Args, Debug, Clone)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = RANK_TOL)]
    pub rank_tol: f64,
    #[arg(long, default_value_t = 5000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl SolverArgs {
    fn feasibility(&self) -> FeasibilityOptions {
        FeasibilityOptions {
            max_iters: self.max_iters,
            tol: self.tol,
            rank_tol: self.rank_tol,
            ..FeasibilityOptions::default()
        }
    }

    fn reduce(&self) -> ReduceOptions {
        ReduceOptions {
            rank_tol: self.rank_tol,
            seed: self.seed,
            ..ReduceOptions::default()
        }
    }

    fn settings(&self, reduce: bool) -> Settings {
        Settings {
            tol: self.tol,
            rank_tol: self.rank_tol,
            max_iters: self.max_iters,
            seed: self.seed,
            reduce,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Subcommand, Debug)]
pub enum Example {
    /// Pure graph state on a ring of n qubits.
    RingGraph {
        #[arg(long)]
        n: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// All k-qubit marginals of n qubits maximally mixed.
    MmKlocal {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Rank-3 N-boson qubit state with maximally mixed 2-boson marginal.
    BosonSigma {
        #[arg(long = "N")]
        particles: usize,
        #[arg(long)]
        p: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Also write the matching 2-boson instance.
        #[arg(long)]
        instance_output: Option<PathBuf>,
    },
    /// Exact k-local marginals of a seeded random n-qubit state.
    RandomFeasible {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        k: usize,
        /// Rank of the random global state; full rank by default.
        #[arg(long)]
        rank: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Also write the global state the marginals came from.
        #[arg(long)]
        witness_output: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
pub enum ChannelCommand {
    /// Find a channel with the given sub-channels and few Kraus operators.
    Reduce {
        instance: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        /// Do not add the trace-preservation constraint.
        #[arg(long)]
        no_tp: bool,
        #[arg(long, default_value_t = qmarginal::channels::TP_TOL)]
        tp_tol: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Minimal Kraus decomposition of a channel.
    Kraus {
        channel: PathBuf,
        #[arg(long, default_value_t = RANK_TOL)]
        rank_tol: f64,
        #[arg(long, default_value_t = qmarginal::channels::TP_TOL)]
        tp_tol: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Sub-channel on selected input and output factors.
    Subchannel {
        channel: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        in_keep: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        out_keep: Vec<usize>,
        #[arg(long, default_value_t = qmarginal::channels::TP_TOL)]
        tp_tol: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    fn input(error: anyhow::Error) -> Self {
        Self { code: 2, error }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        let code = error
            .chain()
            .find_map(|e| e.downcast_ref::<qmarginal::Error>())
            .map_or(2, |e| match e {
                qmarginal::Error::PossiblyInfeasible(_)
                | qmarginal::Error::RepairFailed { .. }
                | qmarginal::Error::Precondition(_)
                | qmarginal::Error::NotTracePreserving(_)
                | qmarginal::Error::NotCompletelyPositive(_) => 1,
                _ => 2,
            });
        Self { code, error }
    }
}

impl From<qmarginal::Error> for Failure {
    fn from(e: qmarginal::Error) -> Self {
        anyhow::Error::new(e).into()
    }
}

type CmdResult = Result<u8, Failure>;

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: Cli) -> u8 {
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            if let Some(qmarginal::Error::PossiblyInfeasible(report)) = f
                .error
                .chain()
                .find_map(|e| e.downcast_ref::<qmarginal::Error>())
            {
                eprintln!("best residual: {:e}", report.best_residual);
                for (i, r) in report.best_residuals.iter().enumerate() {
                    eprintln!("  constraint {i}: {r:e}");
                }
                eprintln!("iterations: {}", report.iterations);
                eprintln!("plateau: {}", if report.plateau { "yes" } else { "no" });
                eprintln!(
                    "admissible support collapsed: {}",
                    if report.empty_support { "yes" } else { "no" }
                );
                let hist: Vec<String> = report.history.iter().map(|h| format!("{h:.3e}")).collect();
                eprintln!("residual history: {}", hist.join(" "));
            }
            f.code
        }
    }
}

fn dispatch(command: Command) -> CmdResult {
    match command {
        Command::Check {
            instance,
            solution,
            tol,
            format,
        } => cmd_check(&instance, &solution, tol, format),
        Command::Solve {
            instance,
            solver,
            no_reduce,
            output,
        } => cmd_solve(&instance, &solver, !no_reduce, output.as_deref()),
        Command::Bounds {
            instance,
            rank_tol,
            format,
        } => cmd_bounds(&instance, rank_tol, format),
        Command::Example { example } => cmd_example(example),
        Command::Channel { command } => cmd_channel(command),
    }
}

/// Reads and parses a JSON document; every failure is an input failure.
pub fn read_doc<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(Failure::input)?;
    serde_json::from_str(&text)
        .map_err(|e| {
            anyhow!(
                "{}: parse error at line {}, column {}: {e}",
                path.display(),
                e.line(),
                e.column()
            )
        })
        .map_err(Failure::input)
}

fn load_instance(path: &Path) -> Result<Instance, Failure> {
    let doc: InstanceDoc = read_doc(path)?;
    doc.to_instance()
        .with_context(|| format!("invalid instance {}", path.display()))
        .map_err(Failure::input)
}

fn emit<T: Serialize>(doc: &T, output: Option<&Path>) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(doc)
        .context("serialization failed")
        .map_err(Failure::input)?;
    match output {
        Some(path) => fs::write(path, text + "\n")
            .with_context(|| format!("cannot write {}", path.display()))
            .map_err(Failure::input),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn print_report(report: &ResidualReport, tol: f64, format: Format) {
    let consistent = report.is_consistent(tol);
    match format {
        Format::Json => {
            let v = serde_json::json!({
                "residuals": report.residuals,
                "psd_violation": report.psd_violation,
                "trace_error": report.trace_error,
                "tol": tol,
                "consistent": consistent,
            });
            println!("{}", serde_json::to_string_pretty(&v).expect("plain JSON"));
        }
        Format::Text => {
            for (i, r) in report.residuals.iter().enumerate() {
                println!("constraint {i}: residual {r:.4e}");
            }
            println!("psd violation: {:.4e}", report.psd_violation);
            println!("trace error: {:.4e}", report.trace_error);
            println!(
                "{} at tol {tol:e}",
                if consistent { "consistent" } else { "inconsistent" }
            );
        }
    }
}

fn cmd_check(instance: &Path, solution: &Path, tol: f64, format: Format) -> CmdResult {
    let inst = load_instance(instance)?;
    let holder: MatrixHolder = read_doc(solution)?;
    let rho = holder
        .matrix
        .to_hermitian()
        .with_context(|| format!("invalid state in {}", solution.display()))
        .map_err(Failure::input)?;
    let system = inst.to_system().map_err(Failure::input)?;
    let report = system.residuals(&rho).map_err(|e| Failure::input(e.into()))?;
    print_report(&report, tol, format);
    Ok(if report.is_consistent(tol) { 0 } else { 1 })
}

/// `(theorem1, barvinok)` for an instance.
fn bounds_of(inst: &Instance, rank_tol: f64) -> Result<(usize, usize), Failure> {
    let system = inst.to_system().map_err(Failure::input)?;
    let dims: u64 = inst.block_dims().iter().map(|&d| (d * d) as u64).sum();
    Ok((system.rank_bound(rank_tol), isqrt(2 * dims)))
}

fn cmd_bounds(instance: &Path, rank_tol: f64, format: Format) -> CmdResult {
    let inst = load_instance(instance)?;
    let (t1, bv) = bounds_of(&inst, rank_tol)?;
    let degenerate = inst.block_dims().is_empty();
    match format {
        Format::Json => {
            let v = serde_json::json!({ "theorem1": t1, "barvinok": bv, "degenerate": degenerate });
            println!("{}", serde_json::to_string_pretty(&v).expect("plain JSON"));
        }
        Format::Text => {
            let tag = if degenerate { " (degenerate)" } else { "" };
            println!("theorem1: {t1}{tag}, barvinok: {bv}");
        }
    }
    Ok(0)
}

fn trace_rows(trace: &ReductionTrace) -> Vec<TraceRow> {
    trace
        .steps
        .iter()
        .map(|s| TraceRow {
            rank_before: s.rank_before,
            rank_after: s.rank_after,
            lambda: s.lambda,
        })
        .collect()
}

fn print_trace(trace: &ReductionTrace) {
    eprintln!("{:>5} {:>12} {:>11} {:>14}", "step", "rank before", "rank after", "lambda");
    for (i, s) in trace.steps.iter().enumerate() {
        eprintln!("{:>5} {:>12} {:>11} {:>14.6e}", i + 1, s.rank_before, s.rank_after, s.lambda);
    }
}

fn spectrum(rho: &HermitianMatrix, rank_tol: f64) -> Result<(usize, Vec<f64>), Failure> {
    let eig = eig_hermitian(rho)?;
    let mut values = eig.eigenvalues.clone();
    values.reverse();
    Ok((eig.rank(rank_tol), values))
}

fn cmd_solve(instance: &Path, args: &SolverArgs, reduce: bool, output: Option<&Path>) -> CmdResult {
    let inst = load_instance(instance)?;
    let system = inst.to_system().map_err(Failure::input)?;
    let start = find_feasible_system(&system, &args.feasibility())?;
    eprintln!(
        "feasible state found after {} iterations (residual {:.3e})",
        start.iterations, start.residual
    );
    let (state, trace) = if reduce {
        let (s, t) = reduce_system(&start.state, &system, &args.reduce())?;
        print_trace(&t);
        (s, Some(t))
    } else {
        (start.state, None)
    };
    let (rank, eigenvalues) = spectrum(&state, args.rank_tol)?;
    let (theorem1, barvinok) = bounds_of(&inst, args.rank_tol)?;
    let doc = SolutionDoc {
        matrix: MatrixDoc::from_hermitian(&state),
        rank,
        eigenvalues,
        residuals: system.constraint_residuals(state.as_matrix()),
        trace: trace.as_ref().map(trace_rows).unwrap_or_default(),
        bounds: Bounds {
            theorem1,
            barvinok,
            achieved: rank,
        },
        settings: args.settings(reduce),
    };
    eprintln!("rank {rank} (theorem1 bound {theorem1}, barvinok bound {barvinok})");
    emit(&doc, output)?;
    Ok(0)
}

fn state_doc(rho: &HermitianMatrix, dims: Vec<usize>) -> Result<StateDoc, Failure> {
    let (rank, eigenvalues) = spectrum(rho, RANK_TOL)?;
    Ok(StateDoc {
        kind: None,
        dims,
        particles: None,
        d: None,
        matrix: MatrixDoc::from_hermitian(rho),
        rank,
        eigenvalues,
    })
}

fn cmd_example(example: Example) -> CmdResult {
    match example {
        Example::RingGraph { n, output } => {
            let rho = ring_graph_state(n).map_err(|e| Failure::input(e.into()))?;
            emit(&state_doc(&rho, vec![2; n])?, output.as_deref())?;
        }
        Example::MmKlocal { n, k, output } => {
            let inst = maximally_mixed_klocal_instance(n, k).map_err(|e| Failure::input(e.into()))?;
            emit(&InstanceDoc::from_instance(&inst), output.as_deref())?;
        }
        Example::BosonSigma {
            particles,
            p,
            output,
            instance_output,
        } => {
            let sigma = bosonic_sigma_p(particles, p).map_err(|e| Failure::input(e.into()))?;
            let mut doc = state_doc(&sigma, vec![2; particles])?;
            doc.kind = Some(Kind::Bosonic);
            doc.particles = Some(particles);
            doc.d = Some(2);
            emit(&doc, output.as_deref())?;
            if let Some(path) = instance_output {
                let inst = SectorInstance::new(Statistics::Bosonic, particles, 2, 2, bosonic_maximally_mixed_2())
                    .map_err(|e| Failure::input(e.into()))?;
                emit(&InstanceDoc::from_sector(&inst), Some(&path))?;
            }
        }
        Example::RandomFeasible {
            n,
            k,
            rank,
            seed,
            output,
            witness_output,
        } => {
            let shape = SystemShape::qubits(n).map_err(|e| Failure::input(e.into()))?;
            if k == 0 || k > n {
                return Err(Failure::input(anyhow!("need 1 <= k <= n, got n = {n}, k = {k}")));
            }
            let rank = rank.unwrap_or(shape.total_dim());
            let (inst, witness) = random_feasible_instance(&shape, &k_subsets(n, k), rank, seed)
                .map_err(|e| Failure::input(e.into()))?;
            emit(&InstanceDoc::from_instance(&inst), output.as_deref())?;
            if let Some(path) = witness_output {
                emit(&state_doc(&witness, vec![2; n])?, Some(&path))?;
            }
        }
    }
    Ok(0)
}

fn cmd_channel(command: ChannelCommand) -> CmdResult {
    match command {
        ChannelCommand::Kraus {
            channel,
            rank_tol,
            tp_tol,
            output,
        } => {
            let doc: ChannelDoc = read_doc(&channel)?;
            let ch = doc.to_channel(tp_tol)?;
            let kraus = kraus_from_choi(&ch, rank_tol)?;
            eprintln!("{} Kraus operators", kraus.len());
            emit(&KrausDoc::from_kraus(&kraus, ch.in_shape(), ch.out_shape()), output.as_deref())?;
        }
        ChannelCommand::Subchannel {
            channel,
            in_keep,
            out_keep,
            tp_tol,
            output,
        } => {
            let doc: ChannelDoc = read_doc(&channel)?;
            let ch = doc.to_channel(tp_tol)?;
            let in_keep = SubsystemSet::from_unsorted(in_keep).map_err(|e| Failure::input(e.into()))?;
            let out_keep = SubsystemSet::from_unsorted(out_keep).map_err(|e| Failure::input(e.into()))?;
            let sub = sub_channel(&ch, &in_keep, &out_keep)?;
            emit(&ChannelDoc::from_channel(&sub), output.as_deref())?;
        }
        ChannelCommand::Reduce {
            instance,
            solver,
            no_tp,
            tp_tol,
            output,
        } => {
            let doc: ChannelInstanceDoc = read_doc(&instance)?;
            let ci = doc.to_instance(tp_tol)?;
            let opts = ChannelReduceOptions {
                feasibility: solver.feasibility(),
                reduce: solver.reduce(),
                include_tp: !no_tp,
                tp_tol,
            };
            let result = reduce_kraus_rank(&ci, &opts)?;
            print_trace(&result.trace);
            eprintln!(
                "kraus count: {} (local bound: {}, tp-augmented bound: {})",
                result.kraus.len(),
                result.local_bound,
                result.tp_bound
            );
            let out = ChannelReductionDoc {
                channel: ChannelDoc::from_channel(&result.channel),
                kraus: KrausDoc::from_kraus(&result.kraus, ci.in_shape(), ci.out_shape()),
                kraus_count: result.kraus.len(),
                bounds: ChannelBounds {
                    local: result.local_bound,
                    tp_augmented: result.tp_bound,
                    achieved: result.kraus.len(),
                },
                sub_channel_residuals: result.sub_channel_residuals,
                tp_deviation: result.kraus.tp_deviation(),
                trace: trace_rows(&result.trace),
                settings: solver.settings(true),
            };
            emit(&out, output.as_deref())?;
        }
    }
    let _ = std::io::stdout().flush();
    Ok(0)
}
