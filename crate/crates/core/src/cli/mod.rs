//! Command-line front end: `train`, `eval`, `replay`, `augment`, `selftest`
//! and `config`.
//!
//! Exit codes: 0 success, 1 usage error, 2 configuration error, 3 runtime
//! error (including failed self-test checks).

pub mod config;
pub mod replay;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub use config::{keys_help, EvaluationConfig, RunConfig, SessionConfig, CONFIG_KEYS};

use crate::error::Error;
use crate::expert::ExpertContext;
use crate::learning::augment::augment;
use crate::learning::{ModelWeights, WeightsFile};
use crate::selftest::{self, Sizes};
use crate::sim::{monte_carlo, run_batch, train_session, McSummary, Mode, RecordHeader};
use crate::world::EpisodeStatus;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

pub const MANIFEST_FORMAT: &str = "arcpursuit-run";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "arcpursuit", version, about = "Arc-formation pursuit simulator: train, evaluate and replay")]
pub struct Cli {
    /// TOML configuration file; unspecified keys keep their defaults.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set episode.n_defenders=8`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output directory.
    #[arg(long, global = true, env = "ARCPURSUIT_OUT", default_value = "runs", value_name = "DIR")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the attacker model and the actor over sequential episodes.
    Train {
        /// Episodes to train; overrides `session.episodes`.
        #[arg(long)]
        episodes: Option<usize>,
        /// Virtual samples added after each episode.
        #[arg(long)]
        augment: Option<usize>,
        /// Master seed; overrides `episode.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run Monte Carlo evaluation episodes with fixed weights.
    Eval {
        /// Weights file from `train`; required by the actor modes.
        #[arg(long, value_name = "PATH")]
        weights: Option<PathBuf>,
        /// expert, actor or actor_seeded_expert.
        #[arg(long, value_parser = parse_mode)]
        mode: Option<Mode>,
        /// Episodes to run; overrides `evaluation.episodes`.
        #[arg(long)]
        episodes: Option<usize>,
        /// Team size; overrides `episode.n_defenders`.
        #[arg(long)]
        n_defenders: Option<usize>,
        /// Worker threads; results do not depend on it.
        #[arg(long)]
        workers: Option<usize>,
        /// Master seed; overrides `episode.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Also write every episode as a JSONL record under `records/`.
        #[arg(long)]
        records: bool,
    },
    /// Export an episode record as CSV tables.
    Replay {
        /// JSONL episode record.
        #[arg(value_name = "RECORD")]
        record: PathBuf,
    },
    /// Write expert-labeled virtual actor samples as JSONL.
    Augment {
        /// Weights file from `train`; without it the expert uses the initial model and unseeded search.
        #[arg(long, value_name = "PATH")]
        weights: Option<PathBuf>,
        /// Samples to write.
        #[arg(long, default_value_t = 100)]
        count: usize,
        /// Master seed; overrides `episode.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the built-in numerical checks.
    Selftest,
    /// Print the effective configuration as commented TOML.
    Config,
}

fn parse_mode(s: &str) -> std::result::Result<Mode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Reproducibility record written next to every command's outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub format: &'static str,
    pub version: u32,
    pub tool_version: &'static str,
    pub command: String,
    pub args: Vec<String>,
    pub master_seed: u64,
    pub config: RunConfig,
    pub weights_in: Option<PathBuf>,
    pub weights_out: Option<PathBuf>,
    pub outputs: Vec<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Config(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => Failure::Config(m),
            other => Failure::Runtime(other),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run(args: Vec<String>) -> i32 {
    let cmd = Cli::command().after_long_help(keys_help());
    let cli = match cmd.try_get_matches_from(&args).and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(&cli, &args) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Config(m)) => {
            eprintln!("configuration error: {m}");
            EXIT_CONFIG
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

fn load_config(cli: &Cli) -> CliResult<RunConfig> {
    let base = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    Ok(base.with_overrides(&cli.overrides)?)
}

fn dispatch(cli: &Cli, args: &[String]) -> CliResult<()> {
    let mut cfg = load_config(cli)?;
    let manifest = |command: &str, cfg: &RunConfig| RunManifest {
        format: MANIFEST_FORMAT,
        version: MANIFEST_VERSION,
        tool_version: env!("CARGO_PKG_VERSION"),
        command: command.into(),
        args: args.to_vec(),
        master_seed: cfg.episode.seed,
        config: cfg.clone(),
        weights_in: None,
        weights_out: None,
        outputs: Vec::new(),
    };
    match &cli.command {
        Command::Config => {
            print!("{}", cfg.to_documented_toml()?);
            Ok(())
        }
        Command::Selftest => {
            let results = selftest::run_all(Sizes::QUICK);
            let mut ok = true;
            for r in &results {
                println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
                ok &= r.passed;
            }
            if ok {
                Ok(())
            } else {
                Err(Failure::Runtime(Error::InvalidArgument("self-test checks failed".into())))
            }
        }
        Command::Train { episodes, augment, seed } => {
            if let Some(e) = episodes {
                cfg.session.episodes = *e;
            }
            if let Some(a) = augment {
                cfg.session.augment_per_episode = *a;
            }
            if let Some(s) = seed {
                cfg.episode.seed = *s;
            }
            cfg.validate()?;
            fs::create_dir_all(&cli.out)?;
            let outcome = train_session(&cfg.episode, cfg.session.episodes, cfg.session.augment_per_episode)?;
            let weights_path = cli.out.join("weights.json");
            outcome.weights_file().save(&weights_path)?;
            let curves_path = cli.out.join("loss_curves.csv");
            outcome.learner.curves.write_csv(BufWriter::new(File::create(&curves_path)?))?;
            let episodes_path = cli.out.join("train_episodes.csv");
            write_episode_table(&episodes_path, &outcome.episodes)?;
            let summary = McSummary::from_headers(&outcome.episodes);
            let learned = outcome.learner.model.decode();
            println!(
                "trained {} episodes: captured {}, breached {}, timeout {}, failed {}",
                summary.episodes, summary.captured, summary.breached, summary.timeout, summary.failed
            );
            println!(
                "model updates {}, actor updates {}; learned k_ap {:.4} k_ad {:.4} r_safe {:.4} r_avo {:.4}",
                outcome.lineage.model_updates,
                outcome.lineage.actor_updates,
                learned.k_ap,
                learned.k_ad,
                learned.r_safe,
                learned.r_avo
            );
            let mut m = manifest("train", &cfg);
            m.weights_out = Some(weights_path.clone());
            m.outputs = vec![weights_path, curves_path, episodes_path];
            write_manifest(&cli.out, &m)
        }
        Command::Eval {
            weights,
            mode,
            episodes,
            n_defenders,
            workers,
            seed,
            records,
        } => {
            if let Some(m) = mode {
                cfg.episode.mode = *m;
            }
            if let Some(e) = episodes {
                cfg.evaluation.episodes = *e;
            }
            if let Some(n) = n_defenders {
                cfg.episode.n_defenders = *n;
            }
            if let Some(w) = workers {
                cfg.evaluation.workers = *w;
            }
            if let Some(s) = seed {
                cfg.episode.seed = *s;
            }
            cfg.episode.train = false;
            cfg.episode.record_rows = *records;
            cfg.validate()?;
            if cfg.evaluation.episodes == 0 {
                return Err(Failure::Usage("--episodes must be >= 1".into()));
            }
            let mode = cfg.episode.mode;
            if mode.needs_actor() && weights.is_none() {
                return Err(Failure::Usage(format!("mode {mode} needs --weights")));
            }
            let file = weights.as_deref().map(WeightsFile::load).transpose()?;
            let model = match &file {
                Some(f) => f.model_weights(),
                None => ModelWeights {
                    approach_reversed: cfg.episode.attacker.approach_reversed,
                    ..ModelWeights::default()
                },
            };
            let actor = file.as_ref().filter(|_| mode.needs_actor()).map(|f| &f.actor);
            fs::create_dir_all(&cli.out)?;
            let mut outputs = Vec::new();
            let headers: Vec<RecordHeader> = if *records {
                let dir = cli.out.join("records");
                fs::create_dir_all(&dir)?;
                let recs = run_batch(&cfg.episode, &model, actor, cfg.evaluation.episodes, cfg.evaluation.workers)?;
                for r in &recs {
                    outputs.push(r.save(&dir)?);
                }
                recs.into_iter().map(|r| r.header).collect()
            } else {
                monte_carlo(&cfg.episode, &model, actor, cfg.evaluation.episodes, cfg.evaluation.workers)?.headers
            };
            let summary = McSummary::from_headers(&headers);
            print_summary_table(mode, cfg.episode.n_defenders, &summary);
            let summary_path = cli.out.join("eval_summary.csv");
            summary.write_csv(BufWriter::new(File::create(&summary_path)?))?;
            let episodes_path = cli.out.join("eval_episodes.csv");
            write_episode_table(&episodes_path, &headers)?;
            outputs.splice(0..0, [summary_path, episodes_path]);
            let mut m = manifest("eval", &cfg);
            m.weights_in = weights.clone();
            m.outputs = outputs;
            write_manifest(&cli.out, &m)
        }
        Command::Replay { record } => {
            fs::create_dir_all(&cli.out)?;
            let rec = crate::sim::EpisodeRecord::load(record)?;
            let outputs = replay::export(&rec, &cli.out)?;
            println!(
                "{}: {} rows, {} defenders, {} -> {}",
                record.display(),
                rec.rows.len(),
                rec.header.n_defenders,
                rec.header.status.label(),
                cli.out.display()
            );
            let mut m = manifest("replay", &cfg);
            m.master_seed = rec.header.seed;
            m.outputs = outputs;
            write_manifest(&cli.out, &m)
        }
        Command::Augment { weights, count, seed } => {
            if let Some(s) = seed {
                cfg.episode.seed = *s;
            }
            cfg.validate()?;
            let file = weights.as_deref().map(WeightsFile::load).transpose()?;
            let model = match &file {
                Some(f) => f.model_weights(),
                None => ModelWeights {
                    approach_reversed: cfg.episode.attacker.approach_reversed,
                    ..ModelWeights::default()
                },
            };
            let ep = &cfg.episode;
            let ctx = ExpertContext {
                env: &ep.env,
                cfg: &ep.expert,
                shape_bounds: &ep.shape_bounds,
                n: ep.n_defenders,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(ep.seed);
            let samples = augment(&ctx, &model, file.as_ref().map(|f| &f.actor), *count, &mut rng)?;
            fs::create_dir_all(&cli.out)?;
            let path = cli.out.join("augment_samples.jsonl");
            let mut w = BufWriter::new(File::create(&path)?);
            for s in &samples {
                serde_json::to_writer(&mut w, s).map_err(Error::from)?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
            println!("wrote {} samples to {}", samples.len(), path.display());
            let mut m = manifest("augment", &cfg);
            m.weights_in = weights.clone();
            m.outputs = vec![path];
            write_manifest(&cli.out, &m)
        }
    }
}

fn write_manifest(dir: &Path, m: &RunManifest) -> CliResult<()> {
    let path = dir.join(format!("{}_manifest.json", m.command));
    let text = serde_json::to_string_pretty(m).map_err(Error::from)?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// `index,seed,status,event_time_s,duration_s,error`, one row per episode.
pub fn write_episode_table(path: &Path, headers: &[RecordHeader]) -> crate::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["index", "seed", "status", "event_time_s", "duration_s", "error"])?;
    for (i, h) in headers.iter().enumerate() {
        let event = match h.status {
            EpisodeStatus::Captured(t) | EpisodeStatus::Breached(t) => t.to_string(),
            _ => String::new(),
        };
        w.write_record([
            i.to_string(),
            h.seed.to_string(),
            h.status.label().to_string(),
            event,
            h.duration.to_string(),
            h.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn print_summary_table(mode: Mode, n: usize, s: &McSummary) {
    println!(
        "{:<20} {:>3} {:>8} {:>8} {:>8} {:>8} {:>7} {:>14}",
        "mode", "n", "episodes", "success", "breach", "timeout", "failed", "mean_capture_s"
    );
    println!(
        "{:<20} {:>3} {:>8} {:>8.3} {:>8.3} {:>8.3} {:>7} {:>14.2}",
        mode.as_str(),
        n,
        s.episodes,
        s.success_rate,
        s.breach_rate,
        s.timeout_rate,
        s.failed,
        s.mean_capture_time
    );
}
