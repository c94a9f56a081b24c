use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Result};
use ccge::run::{self, TrajectoryRecord};
use ccge::{io, svg, ExperimentConfig};
use ccge_core::trainer::Variant;
use clap::{Args, CommandFactory, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "ccge", version, about = "Contact coverage-guided exploration on Push-Box")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// TOML experiment file; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dotted `key=value` override, e.g. `train.ppo.learning_rate=1e-4`.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Total environment steps per run.
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Train one run.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Deterministic evaluation of a checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Defaults to the checkpoint's directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write every step to trajectory.jsonl.
        #[arg(long)]
        dump: bool,
    },
    /// Train every variant over several seeds and tabulate success.
    Ablate {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Use seeds 0..N instead of the configured list.
        #[arg(long)]
        seeds: Option<u64>,
        /// Comma-separated subset of ccge,single_state,task_only.
        #[arg(long, value_delimiter = ',')]
        variants: Vec<String>,
    },
    /// Hash the states a trained policy visits and report per-side purity.
    ExportClusters {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 20)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render one episode of a trajectory dump to SVG.
    Replay {
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long, default_value_t = 0)]
        episode: usize,
        /// Experiment file providing the environment geometry.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_variant(name: &str) -> Result<Variant> {
    Variant::parse(name).ok_or_else(|| anyhow!("unknown variant `{name}` (expected ccge, single_state or task_only)"))
}

fn load(args: &ConfigArgs) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(args.config.as_deref(), &args.overrides)?;
    if let Some(steps) = args.steps {
        cfg.train.total_steps = steps;
    }
    if let Some(out) = &args.out {
        cfg.output = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parent_dir(path: &Path) -> PathBuf {
    path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf)
}

fn execute(cli: Cli, w: &mut impl Write) -> Result<()> {
    match cli.command {
        Command::Train { cfg, variant, seed } => {
            let mut c = load(&cfg)?;
            if let Some(v) = variant {
                c.train.variant = parse_variant(&v)?;
            }
            if let Some(s) = seed {
                c.train.seed = s;
            }
            c.validate()?;
            let out = if cfg.out.is_some() { c.output.clone() } else { run::run_dir(&c.output, c.train.variant, c.train.seed) };
            let summary = run::train(&c, &out, !cfg.quiet)?;
            writeln!(
                w,
                "{} seed {}: success {:.3} (left {:.3}, right {:.3}) after {} steps -> {}",
                summary.variant.name(),
                summary.seed,
                summary.final_success,
                summary.success_left,
                summary.success_right,
                summary.steps,
                out.display()
            )?;
        }
        Command::Eval { checkpoint, episodes, seed, out, dump } => {
            let out = out.unwrap_or_else(|| parent_dir(&checkpoint));
            let report = run::eval(&checkpoint, episodes, seed, &out, dump)?;
            writeln!(
                w,
                "success {:.3} (left {:.3}, right {:.3}) over {} episodes",
                report.success_rate,
                report.success_left,
                report.success_right,
                report.episodes.len()
            )?;
        }
        Command::Ablate { cfg, seeds, variants } => {
            let mut c = load(&cfg)?;
            if let Some(n) = seeds {
                c.seeds = (0..n).collect();
            }
            let variants = if variants.is_empty() {
                Variant::ALL.to_vec()
            } else {
                variants.iter().map(|v| parse_variant(v)).collect::<Result<Vec<_>>>()?
            };
            let out = c.output.clone();
            let summary = run::ablate(&c, &variants, &out, !cfg.quiet)?;
            write!(w, "{}", summary.table())?;
        }
        Command::ExportClusters { checkpoint, episodes, seed, out } => {
            let out = out.unwrap_or_else(|| parent_dir(&checkpoint));
            let report = run::export_clusters(&checkpoint, episodes, seed, &out)?;
            for s in &report.sides {
                writeln!(w, "{:?}: modal {} purity {:.3} ({} samples, {} indices)", s.side, s.modal.0, s.purity, s.samples, s.distinct)?;
            }
            writeln!(w, "clusters written to {}", out.join("clusters.txt").display())?;
        }
        Command::Replay { trajectory, episode, config, out } => {
            let env = ExperimentConfig::load(config.as_deref(), &[])?.train.env;
            let records: Vec<TrajectoryRecord> = io::read_jsonl(&trajectory)?;
            let chosen: Vec<TrajectoryRecord> = records.into_iter().filter(|r| r.episode == episode).collect();
            if chosen.is_empty() {
                return Err(anyhow!("episode {episode} not found in {}", trajectory.display()));
            }
            io::write_text(&out, &svg::render_episode(&chosen, &env))?;
            writeln!(w, "wrote {}", out.display())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli, &mut std::io::stdout().lock()) {
        Ok(()) => ExitCode::SUCCESS,
        // a closed pipe downstream (`ccge ... | head`) is not a failure
        Err(e) if e.downcast_ref::<std::io::Error>().is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe) => {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            eprintln!("{}", Cli::command().render_usage());
            ExitCode::from(2)
        }
    }
}
