use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ccl_core::config::{parse_config, RunConfig};
use ccl_core::env::write_trace_csv;
use ccl_core::heatmap::{heatmap_from_run, write_heatmap, DEFAULT_GRID, DEFAULT_ROLLOUTS};
use ccl_core::sweep::{run_sweep, GridAxis};
use ccl_core::train::{evaluate_checkpoint, load_run_checkpoint, trace_checkpoint, MetricsRow, Trainer};
use ccl_core::{verify, Error};

/// Intrinsic-reward MARL experiments: training, evaluation, heat maps and
/// sweeps.
#[derive(Parser)]
#[command(name = "ccl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML config file. Overrides are `key=value` with dotted or bare keys.
    #[arg(value_name = "CONFIG|KEY=VALUE")]
    inputs: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig, Error> {
        let (overrides, files): (Vec<String>, Vec<String>) = self.inputs.iter().cloned().partition(|s| s.contains('='));
        if files.len() > 1 {
            return Err(Error::Config(format!(
                "expected at most one config file, got {}",
                files.len()
            )));
        }
        parse_config(files.first().map(Path::new), &overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a new run, or continue one with --resume.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        /// Run directory; defaults to a name under output_dir.
        #[arg(long)]
        run_dir: Option<PathBuf>,
        /// Continue the run in this directory from its latest checkpoint.
        #[arg(long, conflicts_with = "run_dir")]
        resume: Option<PathBuf>,
        /// New iteration budget when resuming.
        #[arg(long, requires = "resume")]
        iterations: Option<usize>,
        #[arg(long)]
        quiet: bool,
    },
    /// Evaluate a checkpoint deterministically.
    Eval {
        #[arg(long)]
        run_dir: PathBuf,
        /// Checkpoint iteration; the latest when omitted.
        #[arg(long)]
        iteration: Option<usize>,
        #[arg(long)]
        episodes: Option<usize>,
        /// Also write one episode's per-step trace to this CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Occupancy heat map averaged over checkpoints.
    Heatmap {
        #[arg(long)]
        run_dir: PathBuf,
        /// Comma-separated checkpoint iterations.
        #[arg(long, value_delimiter = ',', required = true)]
        iterations: Vec<usize>,
        #[arg(long, default_value_t = DEFAULT_ROLLOUTS)]
        rollouts: usize,
        #[arg(long, default_value_t = DEFAULT_GRID)]
        grid: usize,
        /// Use mean actions instead of sampling.
        #[arg(long)]
        deterministic: bool,
        /// Output directory; defaults to the run directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "heatmap")]
        stem: String,
    },
    /// Train every grid point for every seed in `seeds`.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// Axis as `key=v1,v2,...`; repeat for more axes.
        #[arg(long = "grid", required = true)]
        grid: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check reward kernels, GAE and gradients against reference code.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn default_run_dir(cfg: &RunConfig) -> PathBuf {
    let name = format!(
        "{}_{}_seed{}_{}",
        cfg.env.build().map(|e| e.name().to_string()).unwrap_or_else(|_| "env".into()),
        cfg.intrinsic.mode.as_str(),
        cfg.seed,
        &cfg.hash()[..8]
    );
    Path::new(&cfg.output_dir).join(name)
}

fn print_row(row: &MetricsRow) {
    println!(
        "iter {:>5}  steps {:>9}  eval {:>10.4} ± {:<8.4} train {:>10.4}",
        row.iteration, row.env_steps, row.eval_mean, row.eval_std, row.train_team_return
    );
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Train {
            config,
            run_dir,
            resume,
            iterations,
            quiet,
        } => {
            let mut trainer = match resume {
                Some(dir) => {
                    if !config.inputs.is_empty() {
                        return Err(Error::Config("--resume takes its config from the run directory".into()));
                    }
                    Trainer::resume(&dir, iterations)?
                }
                None => {
                    let cfg = config.load()?;
                    let dir = run_dir.unwrap_or_else(|| default_run_dir(&cfg));
                    Trainer::create(cfg, &dir)?
                }
            };
            eprintln!("run directory: {}", trainer.run_dir.display());
            trainer.train(|row| {
                if !quiet {
                    print_row(row)
                }
            })?;
        }
        Command::Eval {
            run_dir,
            iteration,
            episodes,
            trace,
        } => {
            let (manifest, ck) = load_run_checkpoint(&run_dir, iteration)?;
            let result = evaluate_checkpoint(&manifest, &ck, episodes)?;
            println!(
                "{}",
                serde_json::json!({
                    "iteration": ck.iteration,
                    "episodes": result.returns.len(),
                    "mean": result.mean,
                    "std": result.std,
                    "returns": result.returns,
                })
            );
            if let Some(path) = trace {
                write_trace_csv(&path, &trace_checkpoint(&manifest, &ck)?)?;
                eprintln!("trace written to {}", path.display());
            }
        }
        Command::Heatmap {
            run_dir,
            iterations,
            rollouts,
            grid,
            deterministic,
            out,
            stem,
        } => {
            let map = heatmap_from_run(&run_dir, &iterations, rollouts, grid, deterministic)?;
            let out = out.unwrap_or(run_dir);
            write_heatmap(&out, &stem, &map)?;
            println!("{}", out.join(format!("{stem}.svg")).display());
        }
        Command::Sweep { config, grid, out } => {
            let base = config.load()?;
            let axes = grid.iter().map(|g| GridAxis::parse(g)).collect::<Result<Vec<_>, _>>()?;
            let out = out.unwrap_or_else(|| Path::new(&base.output_dir).join("sweep"));
            let rows = run_sweep(&base, &axes, &out, |r| {
                println!(
                    "{} seed {}: {} {}",
                    r.point,
                    r.seed,
                    r.status,
                    r.final_eval_mean.map_or(String::new(), |m| format!("{m:.4}"))
                )
            })?;
            let failed = rows.iter().filter(|r| !r.error.is_empty()).count();
            println!(
                "{} runs, {failed} failed; summary in {}",
                rows.len(),
                out.join("summary.csv").display()
            );
        }
        Command::Verify { seed } => {
            let reports = verify::run_all(seed)?;
            let mut ok = true;
            for r in &reports {
                ok &= r.passed;
                println!(
                    "{} {:<24} max error {:.3e} (tol {:.0e})  {}",
                    if r.passed { "PASS" } else { "FAIL" },
                    r.name,
                    r.max_error,
                    r.tolerance,
                    r.detail
                );
            }
            if !ok {
                return Err(Error::Training("verification failed".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
