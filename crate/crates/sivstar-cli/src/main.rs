use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use sivstar::stats::TargetDistribution;
use sivstar_cli as cli;

#[derive(Parser)]
#[command(
    name = "sivstar",
    version,
    about = "Networked SI*V* spreading models: simulation, stability analysis, and phase-type expansion"
)]
struct Cli {
    /// Cap worker threads used by ensembles, sweeps, and fit restarts.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a directed Erdős–Rényi contact graph as an edge-list file.
    GenerateGraph {
        #[arg(long)]
        nodes: usize,
        #[arg(long)]
        prob: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Retry with incremented seeds until strongly connected.
        #[arg(long)]
        require_strong: bool,
        #[arg(long, default_value_t = 1000)]
        max_tries: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Integrate the mean-field ODE system and write trajectory CSVs.
    SimulateOde {
        #[arg(long)]
        model: PathBuf,
        /// Per-node initial I^1 mass range `lo:hi` (remainder susceptible).
        #[arg(long, default_value = "0.25:0.75")]
        init_i1: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 50.0)]
        horizon: f64,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exact stochastic simulation: one event log, or ensemble frequencies.
    SimulateCtmc {
        #[arg(long)]
        model: PathBuf,
        /// Nodes that start in I^1 (comma-separated), everyone else in S.
        #[arg(long, default_value = "0")]
        init_infected: String,
        #[arg(long, default_value_t = 50.0)]
        horizon: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        runs: usize,
        /// Sampling grid spacing for ensembles (days).
        #[arg(long, default_value_t = 0.5)]
        grid_step: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Stability report of the disease-free equilibrium as JSON.
    Stability {
        #[arg(long)]
        model: PathBuf,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also dump the assembled W_xx/Q_xx matrices as CSV in this directory.
        #[arg(long)]
        dump_matrices: Option<PathBuf>,
    },
    /// Fit a phase-type distribution to a named target by EM.
    FitPh {
        #[arg(long, value_enum)]
        target: TargetKind,
        #[arg(long)]
        mean: Option<f64>,
        #[arg(long)]
        sd: Option<f64>,
        #[arg(long)]
        rate: Option<f64>,
        #[arg(long, default_value_t = 10)]
        phases: usize,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 500)]
        max_iters: usize,
        #[arg(long, default_value_t = 5)]
        restarts: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Expand a phase-type incubation pipeline into a model's infectious class.
    Expand {
        /// Base model providing the graph and vigilant-class parameters.
        #[arg(long)]
        model: PathBuf,
        /// Fitted phase-type JSON (must be of (e1, S) form).
        #[arg(long)]
        ph: PathBuf,
        /// Contagious-state infection rate for every edge.
        #[arg(long)]
        beta: Option<f64>,
        /// Contagious-state recovery rate for every node.
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep a rate multiplier and record steady-state infection levels.
    Sweep {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value_t = ParamKind::Beta)]
        param: ParamKind,
        /// Comma-separated multiplier grid (strictly increasing).
        #[arg(long, default_value = "0.25,0.5,0.75,1.0,1.5,2.0,3.0,4.0")]
        grid: String,
        #[arg(long, default_value = "0.25:0.75")]
        init_i1: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
        #[arg(long, default_value_t = 600.0)]
        max_horizon: f64,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full Ebola experiment: fit, expand, integrate, analyze, sweep.
    ReproduceEbola {
        #[arg(long, default_value_t = cli::DEFAULT_EBOLA_SEED)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        phases: usize,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 500)]
        em_iters: usize,
        #[arg(long, default_value_t = 200.0)]
        horizon: f64,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetKind {
    Lognormal,
    Exponential,
}

#[derive(Clone, Copy, ValueEnum)]
enum ParamKind {
    Beta,
    Delta,
}

fn run(args: Cli) -> sivstar::Result<()> {
    if let Some(jobs) = args.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| sivstar::Error::InvalidInput(e.to_string()))?;
    }
    match args.command {
        Command::GenerateGraph {
            nodes,
            prob,
            seed,
            require_strong,
            max_tries,
            out,
        } => cli::cmd_generate_graph(&cli::GenerateGraphOpts {
            nodes,
            prob,
            seed,
            require_strong,
            max_tries,
            out,
        }),
        Command::SimulateOde {
            model,
            init_i1,
            seed,
            horizon,
            step,
            out,
        } => cli::cmd_simulate_ode(&cli::SimulateOdeOpts {
            model,
            init_i1: cli::parse_range(&init_i1)?,
            seed,
            horizon,
            step,
            out,
        }),
        Command::SimulateCtmc {
            model,
            init_infected,
            horizon,
            seed,
            runs,
            grid_step,
            out,
        } => {
            let init_infected = init_infected
                .split(',')
                .map(|s| {
                    s.trim().parse::<usize>().map_err(|_| {
                        sivstar::Error::InvalidInput(format!("bad node index `{s}`"))
                    })
                })
                .collect::<sivstar::Result<Vec<_>>>()?;
            cli::cmd_simulate_ctmc(&cli::SimulateCtmcOpts {
                model,
                init_infected,
                horizon,
                seed,
                runs,
                grid_step,
                out,
            })
        }
        Command::Stability {
            model,
            out,
            dump_matrices,
        } => {
            let text = cli::cmd_stability(&cli::StabilityOpts {
                model,
                out: out.clone(),
                dump_matrices,
            })?;
            if out.is_none() {
                println!("{text}");
            }
            Ok(())
        }
        Command::FitPh {
            target,
            mean,
            sd,
            rate,
            phases,
            samples,
            seed,
            max_iters,
            restarts,
            out,
        } => {
            let target = match target {
                TargetKind::Lognormal => {
                    let mean = mean.ok_or_else(|| {
                        sivstar::Error::InvalidInput("--target lognormal needs --mean".into())
                    })?;
                    let sd = sd.ok_or_else(|| {
                        sivstar::Error::InvalidInput("--target lognormal needs --sd".into())
                    })?;
                    TargetDistribution::LogNormal { mean, sd }
                }
                TargetKind::Exponential => {
                    let rate = rate.ok_or_else(|| {
                        sivstar::Error::InvalidInput("--target exponential needs --rate".into())
                    })?;
                    TargetDistribution::Exponential { rate }
                }
            };
            let outcome = cli::cmd_fit_ph(&cli::FitPhOpts {
                target,
                phases,
                samples,
                seed,
                max_iterations: max_iters,
                restarts,
                out,
            })?;
            print!("{}", cli::fit_report(&outcome));
            Ok(())
        }
        Command::Expand {
            model,
            ph,
            beta,
            delta,
            out,
        } => cli::cmd_expand(&cli::ExpandOpts {
            model,
            ph,
            beta,
            delta,
            out,
        }),
        Command::Sweep {
            model,
            param,
            grid,
            init_i1,
            seed,
            tol,
            max_horizon,
            step,
            out,
        } => {
            cli::cmd_sweep(&cli::SweepOpts {
                model,
                param: match param {
                    ParamKind::Beta => cli::SweepParam::Beta,
                    ParamKind::Delta => cli::SweepParam::Delta,
                },
                grid: cli::parse_list(&grid)?,
                init_i1: cli::parse_range(&init_i1)?,
                seed,
                tolerance: tol,
                max_horizon,
                step,
                out,
            })?;
            Ok(())
        }
        Command::ReproduceEbola {
            seed,
            phases,
            samples,
            em_iters,
            horizon,
            step,
            out,
        } => {
            let summary = cli::cmd_reproduce_ebola(&cli::ReproduceEbolaOpts {
                seed,
                out,
                phases,
                samples,
                em_iterations: em_iters,
                horizon,
                step,
                ..cli::ReproduceEbolaOpts::default()
            })?;
            println!("graph_seed: {}", summary.graph_seed);
            println!("fitted_mean: {:.4}", summary.fitted_mean);
            println!("fitted_sd: {:.4}", summary.fitted_sd);
            println!("lambda_wxx: {:.6}", summary.lambda_wxx);
            println!("lambda_qxx: {:.6}", summary.lambda_qxx);
            println!("i11_peak_day: {:.2}", summary.i11_peak_day);
            println!("final_p_max: {:.3e}", summary.final_p_max);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let args = Cli::parse(); // usage errors exit with code 2
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
