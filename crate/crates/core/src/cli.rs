//! The `steiner` command-line interface.
//!
//! Exit statuses: 0 success, 1 invalid input or a negative verdict,
//! 2 numerical abort (ill-conditioned Hessian, degenerate edge, optimiser
//! failure), 3 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::adaptation::{
    adapt_stepwise, sensitivity_matrix, AdaptError, AdaptMode, RunStatus, StepPolicy, StepSizing,
};
use crate::derivatives::{cost, gradient_s, hessian_ss, mixed_ts, DerivativeError};
use crate::io::{
    decode_instance, decode_perturbation, encode_derivatives, encode_report, encode_tree, matrix_rows, read_file,
    write_file, write_trace_file, DerivativesDocument, Instance, IoError, FORMAT_VERSION,
};
use crate::oracle::{compare_topologies, optimize_fixed_topology, solve_exact, OracleError, DEFAULT_GRAD_TOL};
use crate::tree_model::{check_geometric_conditions, tree_length, SteinerTree, TreeError, DEFAULT_ANGLE_TOL};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_USAGE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "steiner", version, about = "Adapt Euclidean Steiner minimal trees to terminal perturbations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Pure,
    Corrected,
}

impl From<ModeArg> for AdaptMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Pure => AdaptMode::Pure,
            ModeArg::Corrected => AdaptMode::Corrected,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Move the terminals and update the Steiner points to first order.
    Adapt {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        delta: PathBuf,
        /// Split the displacement into this many equal steps (default 1).
        #[arg(long, conflicts_with_all = ["max_step", "edge_fraction"])]
        steps: Option<usize>,
        /// Largest per-coordinate terminal move in one step.
        #[arg(long, conflicts_with = "edge_fraction")]
        max_step: Option<f64>,
        /// Per-step move as a fraction of the current shortest edge.
        #[arg(long)]
        edge_fraction: Option<f64>,
        #[arg(long, value_enum, default_value = "pure")]
        mode: ModeArg,
        #[arg(long)]
        condition_limit: Option<f64>,
        #[arg(long)]
        min_edge_fraction: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        /// Per-step CSV trace.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Exact Steiner minimal tree for 2 to 6 terminals.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Minimise the length of a tree without changing its topology.
    OracleOptimize {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_GRAD_TOL)]
        grad_tol: f64,
    },
    /// Validate a tree and report its edge and angle conditions.
    Check {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ANGLE_TOL)]
        angle_tol: f64,
    },
    /// Dump the cost, its derivatives and the sensitivity matrix.
    Derivatives {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decide whether two trees have the same topology up to relabelling.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn invalid(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INVALID,
            message: message.into(),
        }
    }

    fn numerical(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_NUMERICAL,
            message: message.into(),
        }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        Failure::invalid(e.to_string())
    }
}

impl From<TreeError> for Failure {
    fn from(e: TreeError) -> Self {
        match e {
            TreeError::CoincidentNodes { .. } => Failure::numerical(e.to_string()),
            _ => Failure::invalid(e.to_string()),
        }
    }
}

impl From<DerivativeError> for Failure {
    fn from(e: DerivativeError) -> Self {
        Failure::numerical(e.to_string())
    }
}

impl From<AdaptError> for Failure {
    fn from(e: AdaptError) -> Self {
        match e {
            AdaptError::IllConditioned { .. } | AdaptError::Derivative(_) => Failure::numerical(e.to_string()),
            AdaptError::Tree(t) => t.into(),
            AdaptError::Oracle(o) => o.into(),
            _ => Failure::invalid(e.to_string()),
        }
    }
}

impl From<OracleError> for Failure {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::NoValidTopology => Failure::numerical(e.to_string()),
            OracleError::Tree(t) => t.into(),
            _ => Failure::invalid(e.to_string()),
        }
    }
}

fn load_instance(path: &Path) -> Result<Instance, Failure> {
    decode_instance(&read_file(path)?).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
}

fn load_tree(path: &Path) -> Result<SteinerTree, Failure> {
    match load_instance(path)? {
        Instance::Tree(t) => Ok(t),
        Instance::Terminals(_) => Err(Failure::invalid(format!(
            "{}: instance has no topology (steiner and edges are required)",
            path.display()
        ))),
    }
}

/// Parses `args` (including the program name) and runs the command, writing
/// human-readable output to `stdout` and diagnostics to `stderr`. Returns
/// the exit status.
pub fn run_cli_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let rendered = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{rendered}");
                EXIT_USAGE
            } else {
                let _ = write!(stdout, "{rendered}");
                EXIT_OK
            };
        }
    };
    match execute(cli.command, stdout, stderr) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}

/// [`run_cli_with`] on the process's standard streams.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_cli_with(args, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}

fn execute(command: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, Failure> {
    match command {
        Command::Adapt {
            instance,
            delta,
            steps,
            max_step,
            edge_fraction,
            mode,
            condition_limit,
            min_edge_fraction,
            out,
            trace,
        } => {
            let tree = load_tree(&instance)?;
            let p = decode_perturbation(&read_file(&delta)?, tree.n())
                .map_err(|e| Failure::invalid(format!("{}: {e}", delta.display())))?;
            let mut policy = StepPolicy {
                mode: mode.into(),
                ..StepPolicy::default()
            };
            if let Some(limit) = condition_limit {
                policy.condition_limit = limit;
            }
            if let Some(fraction) = min_edge_fraction {
                policy.min_edge_fraction = fraction;
            }
            policy.sizing = match (steps, max_step, edge_fraction) {
                (Some(k), _, _) => StepSizing::Steps(k),
                (_, Some(h), _) => StepSizing::MaxStepNorm(h),
                (_, _, Some(f)) => StepSizing::EdgeFraction(f),
                (None, None, None) => StepSizing::Steps(1),
            };
            let report = adapt_stepwise(&tree, &p, &policy)?;
            write_file(&out, &encode_report(&report))?;
            if let Some(trace) = trace {
                write_trace_file(&report, &trace)?;
            }
            match report.status {
                RunStatus::Completed => Ok(EXIT_OK),
                status => {
                    let _ = writeln!(
                        stderr,
                        "aborted after {} steps: {status:?}",
                        report.steps_taken()
                    );
                    Ok(EXIT_NUMERICAL)
                }
            }
        }
        Command::Solve { instance, out } => {
            let inst = load_instance(&instance)?;
            let solution = solve_exact(inst.terminals())?;
            write_file(&out, &encode_tree(&solution.tree))?;
            let _ = writeln!(
                stderr,
                "length {} with k = {}; {} other optimal topologies",
                solution.length,
                solution.tree.k(),
                solution.alternatives.len()
            );
            Ok(EXIT_OK)
        }
        Command::OracleOptimize {
            instance,
            out,
            grad_tol,
        } => {
            let tree = load_tree(&instance)?;
            let result = optimize_fixed_topology(tree.terminals(), tree.topology(), tree.steiner_points(), grad_tol)?;
            write_file(&out, &encode_tree(&result.tree))?;
            let _ = writeln!(
                stderr,
                "length {} after {} iterations, gradient norm {:e}, {} collapsed edges",
                tree_length(&result.tree),
                result.iterations,
                result.gradient_norm,
                result.collapsed_edges.len()
            );
            if result.converged() {
                Ok(EXIT_OK)
            } else {
                let _ = writeln!(stderr, "optimisation did not converge: {:?}", result.status);
                Ok(EXIT_NUMERICAL)
            }
        }
        Command::Check { instance, angle_tol } => {
            let tree = load_tree(&instance)?;
            let report = check_geometric_conditions(&tree, angle_tol)?;
            let _ = writeln!(stdout, "topology: valid (n = {}, k = {})", tree.n(), tree.k());
            let _ = writeln!(stdout, "length: {}", tree_length(&tree));
            let _ = writeln!(stdout, "min_edge_length: {}", report.min_edge_length);
            let _ = writeln!(
                stdout,
                "max_steiner_angle_deviation_deg: {}",
                report.max_steiner_angle_deviation.to_degrees()
            );
            let _ = writeln!(stdout, "min_pairwise_angle_deg: {}", report.min_pairwise_angle.to_degrees());
            let _ = writeln!(
                stdout,
                "angle_condition: {}",
                if report.satisfies_angle_condition { "satisfied" } else { "violated" }
            );
            Ok(if report.satisfies_angle_condition { EXIT_OK } else { EXIT_INVALID })
        }
        Command::Derivatives { instance, out } => {
            let tree = load_tree(&instance)?;
            let sensitivity = match sensitivity_matrix(&tree) {
                Ok(x) => Some(matrix_rows(&x)),
                Err(AdaptError::IllConditioned { .. }) => None,
                Err(e) => return Err(e.into()),
            };
            let doc = DerivativesDocument {
                format_version: FORMAT_VERSION,
                cost: cost(&tree)?,
                gradient_s: gradient_s(&tree)?.iter().copied().collect(),
                hessian_ss: matrix_rows(&hessian_ss(&tree)?.to_dense()),
                mixed_ts: matrix_rows(&mixed_ts(&tree)?.to_dense()),
                sensitivity,
            };
            write_file(&out, &encode_derivatives(&doc))?;
            if doc.sensitivity.is_none() {
                let _ = writeln!(stderr, "Hessian is singular: sensitivity matrix omitted");
                return Ok(EXIT_NUMERICAL);
            }
            Ok(EXIT_OK)
        }
        Command::Compare { a, b } => {
            let (ta, tb) = (load_tree(&a)?, load_tree(&b)?);
            let equal = compare_topologies(ta.topology(), tb.topology());
            let _ = writeln!(stdout, "{}", if equal { "equal" } else { "different" });
            Ok(if equal { EXIT_OK } else { EXIT_INVALID })
        }
    }
}
