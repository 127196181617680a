use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cfnet::capacity::{evaluate, sumcut};
use cfnet::experiment::{
    run_decompose, run_sweep, snapshot, workers_from_env, write_atomic, write_outputs, Algorithm, ExperimentConfig,
    Instance, InstanceSpec,
};
use cfnet::solver_bisect::{bc2f_net_traced, write_trace_jsonl};
use cfnet::solver_bnb::{solve_p4, write_trace_csv, SolverConfig};
use cfnet::{Decomposition, NetworkLayout, Result};

#[derive(Parser)]
#[command(name = "cfnet", version, about = "Clustered cell-free network decomposition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random layout as JSON.
    GenLayout {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        l: usize,
        #[arg(long, default_value_t = 1.0)]
        area_side: f64,
        /// Output file (stdout if absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decompose one network and report capacities.
    Decompose {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long, default_value = "bc2f")]
        algo: String,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Node trace CSV of the branch-and-bound search (bnb only).
        #[arg(long)]
        trace_csv: Option<PathBuf>,
        /// Per-split JSON lines (bc2f only).
        #[arg(long)]
        bisect_trace: Option<PathBuf>,
    },
    /// Evaluate a given decomposition of a layout.
    Evaluate {
        #[arg(long)]
        layout: PathBuf,
        #[arg(long)]
        decomposition: PathBuf,
        /// Experiment config supplying the channel parameters.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        k_max: Option<usize>,
        #[arg(long)]
        mc_samples: Option<usize>,
        /// Fading seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run a sweep described by a config file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        realizations: Option<usize>,
        #[arg(long)]
        base_seed: Option<u64>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        mc_samples: Option<usize>,
        /// Comma-separated subset of bnb,bc2f,brute,kmeans-ue,kmeans-bs.
        #[arg(long, value_delimiter = ',')]
        algorithms: Option<Vec<String>>,
        /// Leave runtime_ms empty for byte-reproducible output.
        #[arg(long)]
        no_timing: bool,
        /// Exit with 0 even if some rows failed.
        #[arg(long)]
        allow_errors: bool,
    },
    /// Emit per-subnetwork membership JSON.
    Snapshot {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long, default_value = "bc2f")]
        algo: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct InstanceArgs {
    /// Layout JSON; otherwise one is generated from --seed, --k and --l.
    #[arg(long)]
    layout: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    l: Option<usize>,
    #[arg(long)]
    k_max: usize,
    /// Experiment config supplying channel, solver and sampling settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mc_samples: Option<usize>,
}

impl InstanceArgs {
    fn load(&self) -> Result<(ExperimentConfig, Instance)> {
        let layout = match &self.layout {
            Some(p) => {
                let layout: NetworkLayout = serde_json::from_str(&fs::read_to_string(p)?)?;
                layout.check()?;
                Some(layout)
            }
            None => None,
        };
        let (k, l) = match &layout {
            Some(lay) => (lay.k, lay.l),
            None => match (self.k, self.l) {
                (Some(k), Some(l)) => (k, l),
                _ => return Err(cfnet::Error::InvalidArgument("give --layout or both --k and --l".into())),
            },
        };
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::new(vec![k], vec![l], vec![self.k_max]),
        };
        if let Some(n) = self.mc_samples {
            cfg.mc_samples = n;
        }
        let seed = layout.as_ref().map(|lay| lay.seed).or(self.seed).unwrap_or(0);
        let spec = InstanceSpec { index: 0, seed, k, l, k_max: self.k_max };
        let instance = match layout {
            Some(lay) => Instance::from_layout(&cfg, spec, lay)?,
            None => Instance::generate(&cfg, spec)?,
        };
        Ok((cfg, instance))
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, |w| Ok(w.write_all(text.as_bytes())?)),
        None => print_out(text),
    }
}

/// Prints to stdout; a closed pipe (for example `| head`) is not an error.
fn print_out(text: &str) -> Result<()> {
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn solver_seed(cfg: &ExperimentConfig) -> SolverConfig {
    SolverConfig {
        seed: cfnet::rng::derive_seed(cfg.base_seed, cfnet::rng::Stream::Solver, &[0]),
        ..cfg.solver.clone()
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::GenLayout { seed, k, l, area_side, out } => {
            let layout = NetworkLayout::generate(seed, k, l, area_side)?;
            emit(&out, &serde_json::to_string_pretty(&layout)?)?;
        }
        Command::Decompose { instance, algo, out, trace_csv, bisect_trace } => {
            let algorithm: Algorithm = algo.parse()?;
            let (cfg, inst) = instance.load()?;
            let outcome = run_decompose(&cfg, &inst, algorithm)?;
            if let Some(path) = trace_csv {
                let traced = SolverConfig { trace: true, ..solver_seed(&cfg) };
                let report = solve_p4(&inst.graph, inst.spec.k_max, &traced)?;
                write_atomic(&path, |w| write_trace_csv(&report.trace, w))?;
            }
            if let Some(path) = bisect_trace {
                let (_, steps) = bc2f_net_traced(&inst.graph, inst.spec.k_max, &solver_seed(&cfg))?;
                write_atomic(&path, |w| write_trace_jsonl(&steps, w))?;
            }
            emit(&out, &serde_json::to_string_pretty(&outcome)?)?;
        }
        Command::Evaluate { layout, decomposition, config, k_max, mc_samples, seed } => {
            let layout: NetworkLayout = serde_json::from_str(&fs::read_to_string(layout)?)?;
            layout.check()?;
            let d: Decomposition = serde_json::from_str(&fs::read_to_string(decomposition)?)?;
            let mut cfg = match config {
                Some(p) => ExperimentConfig::load(&p)?,
                None => ExperimentConfig::new(vec![layout.k], vec![layout.l], vec![layout.k]),
            };
            if let Some(n) = mc_samples {
                cfg.mc_samples = n;
            }
            let spec = InstanceSpec { index: 0, seed: layout.seed, k: layout.k, l: layout.l, k_max: layout.k };
            let inst = Instance::from_layout(&cfg, spec, layout)?;
            if d.k() != inst.spec.k || d.l() != inst.spec.l {
                return Err(cfnet::Error::InvalidDecomposition("decomposition does not match the layout".into()));
            }
            let capacity = evaluate(&inst.gains, &inst.channel, &d, cfg.mc_samples, seed)?;
            let violations: Vec<String> =
                k_max.map(|c| d.validate(c).iter().map(|v| v.to_string()).collect()).unwrap_or_default();
            let body = serde_json::json!({
                "objective_sumcut": sumcut(&inst.graph, &d)?,
                "capacity": capacity,
                "violations": violations,
            });
            print_out(&serde_json::to_string_pretty(&body)?)?;
            if !violations.is_empty() {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Sweep { config, realizations, base_seed, output, mc_samples, algorithms, no_timing, allow_errors } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(r) = realizations {
                cfg.realizations = r;
            }
            if let Some(s) = base_seed {
                cfg.base_seed = s;
            }
            if let Some(o) = output {
                cfg.output_path = o;
            }
            if let Some(n) = mc_samples {
                cfg.mc_samples = n;
            }
            if let Some(list) = algorithms {
                cfg.algorithms = list.iter().map(|a| a.parse()).collect::<Result<_>>()?;
            }
            if no_timing {
                cfg.timing = false;
            }
            cfg.check()?;
            let result = run_sweep(&cfg, workers_from_env()?)?;
            let (main, summary) = write_outputs(&cfg, &result)?;
            eprintln!("wrote {} and {}", main.display(), summary.display());
            if result.has_errors() && !allow_errors {
                eprintln!("some rows failed; rerun with --allow-errors to accept them");
                return Ok(ExitCode::from(1));
            }
        }
        Command::Snapshot { instance, algo, out } => {
            let algorithm: Algorithm = algo.parse()?;
            let (cfg, inst) = instance.load()?;
            let outcome = run_decompose(&cfg, &inst, algorithm)?;
            emit(&out, &serde_json::to_string_pretty(&snapshot(&outcome))?)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
