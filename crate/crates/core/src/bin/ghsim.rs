use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use ghsim::engine::{partition_graph, InteractionGraph, Placement};
use ghsim::ingest::{build_slice, load_events, save_events, LogFormat, Metadata};
use ghsim::manifest::{config_hash, RunManifest};
use ghsim::metrics::{evaluate, read_community, EvalConfig};
use ghsim::models::{FittedModel, ModelKind};
use ghsim::snapshot::{load_snapshot, save_snapshot};
use ghsim::synth::{generate, Variant};
use ghsim::types::{EventLog, TimeWindow};
use ghsim::{fit_model, run, Config, Error};

/// Partitioned agent-based simulator for GitHub-style event logs.
///
/// Exit codes: 0 success, 2 usage or configuration error, 3 data or
/// runtime error. Every command writes `<out>.manifest.json`.
#[derive(Parser)]
#[command(name = "ghsim", version)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// TOML configuration file; `ghsim config` prints every key.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct MetaArgs {
    /// Repository side table: repo_id, owner_id, created_at, language.
    #[arg(long)]
    repos: Option<PathBuf>,
    /// User side table: user_id, created_at.
    #[arg(long)]
    users: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model and write a snapshot.
    Fit {
        /// null, baseline, ground, pref, lpe or bayes.
        #[arg(long)]
        model: String,
        /// Training log (.jsonl or .csv).
        #[arg(long)]
        train: PathBuf,
        /// START..END. The training window, or the test window for null.
        #[arg(long)]
        window: TimeWindow,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Add S3D-driven exploration of unseen repositories.
        #[arg(long)]
        new_entity: bool,
        /// Skip malformed records instead of failing.
        #[arg(long)]
        lenient: bool,
        #[command(flatten)]
        meta: MetaArgs,
    },
    /// Run a snapshot forward over a window.
    Simulate {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        window: TimeWindow,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        partitions: Option<usize>,
        /// graph or hash.
        #[arg(long)]
        placement: Option<String>,
        /// Output log; the extension picks JSON-lines or CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a simulated log against ground truth.
    Evaluate {
        #[arg(long)]
        sim: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Defaults to the span of the truth log.
        #[arg(long)]
        window: Option<TimeWindow>,
        /// Community files, one user id per line; the file stem names it.
        #[arg(long, num_args = 1..)]
        communities: Vec<PathBuf>,
        #[command(flatten)]
        meta: MetaArgs,
        /// Report prefix: writes PREFIX.json and PREFIX.txt.
        #[arg(long)]
        out: PathBuf,
    },
    /// Partition the user-repo interaction graph of a log.
    Partition {
        #[arg(long)]
        train: PathBuf,
        /// Defaults to the span of the log.
        #[arg(long)]
        window: Option<TimeWindow>,
        #[arg(short, long)]
        k: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// CSV of vertex label and part.
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic log with a ground-truth parameter record.
    Synth {
        /// Output log; also writes .params.json, .repos.csv and .users.csv.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// frozen or attachment.
        #[arg(long)]
        variant: Option<String>,
    },
    /// Print the effective configuration as TOML.
    Config,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::InvalidArgument(_)
        | Error::InfeasibleBalance { .. }
        | Error::BadPersistence(_)
        | Error::BetaTooLarge { .. } => 2,
        _ => 3,
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn read_log(path: &Path, strict: bool) -> ghsim::Result<EventLog> {
    let report = load_events(path, LogFormat::from_path(path), strict)?;
    if !report.malformed.is_empty() {
        eprintln!("{}: skipped {} malformed records", path.display(), report.malformed.len());
    }
    Ok(report.log)
}

fn read_meta(args: &MetaArgs, manifest: &mut RunManifest) -> ghsim::Result<Option<Metadata>> {
    if args.repos.is_none() && args.users.is_none() {
        return Ok(None);
    }
    let mut meta = Metadata::default();
    if let Some(p) = &args.repos {
        meta.read_repos(File::open(p)?)?;
        manifest.input("repos", p)?;
    }
    if let Some(p) = &args.users {
        meta.read_users(File::open(p)?)?;
        manifest.input("users", p)?;
    }
    Ok(Some(meta))
}

fn span(log: &EventLog) -> ghsim::Result<TimeWindow> {
    match (log.iter().next(), log.iter().last()) {
        (Some(a), Some(b)) => Ok(TimeWindow::new(a.timestamp, b.timestamp + 1)),
        _ => Err(Error::EmptyWindow),
    }
}

fn execute(cli: Cli, started: Instant) -> ghsim::Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let args: Vec<String> = std::env::args().skip(1).collect();

    match cli.command {
        Command::Config => {
            print!("{}", cfg.to_toml());
            Ok(())
        }
        Command::Fit { model, train, window, out, seed, new_entity, lenient, meta } => {
            let kind: ModelKind = model.parse()?;
            if let Some(s) = seed {
                cfg.fit.seed = s;
            }
            cfg.fit.new_entity |= new_entity;
            let mut m = RunManifest::new("fit", args);
            m.seed = Some(cfg.fit.seed);
            m.config_hash = config_hash(&(&cfg.fit, kind, window));
            m.input("train", &train)?;
            let log = read_log(&train, !lenient)?;
            let meta = read_meta(&meta, &mut m)?;
            let fitted = fit_model(kind, &log, window, meta.as_ref(), &cfg.fit)?;
            save_snapshot(&out, &fitted, window, &m.config_hash)?;
            m.output("snapshot", &out)?;
            if let FittedModel::Bayesian(b) = &fitted.model {
                let p = with_suffix(&out, ".params.json");
                serde_json::to_writer_pretty(BufWriter::new(File::create(&p)?), &b.config)?;
                m.output("params", &p)?;
            }
            m.detail("fit", &cfg.fit);
            m.finish(started);
            m.save(&with_suffix(&out, ".manifest.json"))
        }
        Command::Simulate { snapshot, window, seed, partitions, placement, out } => {
            if let Some(s) = seed {
                cfg.simulate.seed = s;
            }
            if let Some(k) = partitions {
                cfg.simulate.partitions = k;
            }
            if let Some(p) = placement {
                cfg.simulate.placement = match p.as_str() {
                    "graph" => Placement::Graph,
                    "hash" => Placement::Hash,
                    other => return Err(Error::Config(format!("unknown placement {other:?}"))),
                };
            }
            let sim_cfg = cfg.simulate.for_window(window);
            sim_cfg.validate()?;
            let mut m = RunManifest::new("simulate", args);
            m.seed = Some(sim_cfg.seed);
            m.config_hash = config_hash(&sim_cfg);
            m.input("snapshot", &snapshot)?;
            let snap = load_snapshot(&snapshot)?;
            let output = run(&sim_cfg, &snap.fitted.slice, &snap.fitted.model)?;
            save_events(&out, &output.log, LogFormat::from_path(&out))?;
            m.output("log", &out)?;
            m.messages = Some(output.stats.messages);
            m.detail("stats", &output.stats);
            m.detail("model", &snap.header);
            m.finish(started);
            m.save(&with_suffix(&out, ".manifest.json"))
        }
        Command::Evaluate { sim, truth, window, communities, meta, out } => {
            let mut m = RunManifest::new("evaluate", args);
            m.input("sim", &sim)?;
            m.input("truth", &truth)?;
            let sim_log = read_log(&sim, true)?;
            let truth_log = read_log(&truth, true)?;
            let window = match window {
                Some(w) => w,
                None => span(&truth_log)?,
            };
            let mut ecfg = EvalConfig::new(window);
            ecfg.rbo_p = cfg.evaluate.rbo_p;
            ecfg.rbo_depth = cfg.evaluate.rbo_depth;
            if let Some(meta) = read_meta(&meta, &mut m)? {
                ecfg = ecfg.with_metadata(&meta);
            }
            for p in &communities {
                let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                ecfg.communities.insert(name.clone(), read_community(&std::fs::read_to_string(p)?));
                m.input(&format!("community:{name}"), p)?;
            }
            m.config_hash = config_hash(&(&cfg.evaluate, window));
            let report = evaluate(&sim_log, &truth_log, &ecfg);
            let json = with_suffix(&out, ".json");
            let txt = with_suffix(&out, ".txt");
            std::fs::write(&json, report.to_json()?)?;
            std::fs::write(&txt, report.to_table())?;
            print!("{}", report.to_table());
            m.output("json", &json)?;
            m.output("text", &txt)?;
            m.finish(started);
            m.save(&with_suffix(&out, ".manifest.json"))
        }
        Command::Partition { train, window, k, seed, out } => {
            let seed = seed.unwrap_or(cfg.simulate.seed);
            let mut m = RunManifest::new("partition", args);
            m.seed = Some(seed);
            m.input("train", &train)?;
            let log = read_log(&train, true)?;
            let window = match window {
                Some(w) => w,
                None => span(&log)?,
            };
            m.config_hash = config_hash(&(k, window));
            let slice = build_slice(&log, window, None)?;
            let g = InteractionGraph::from_slice(&slice);
            let a = partition_graph(&g, k, seed)?;
            let mut w = csv::Writer::from_writer(BufWriter::new(File::create(&out)?));
            w.write_record(["vertex", "part"]).map_err(Error::from)?;
            for (label, part) in g.labels.iter().zip(&a.parts) {
                w.write_record([label.as_str(), &part.to_string()]).map_err(Error::from)?;
            }
            w.flush()?;
            drop(w);
            eprintln!("k={} cut={} sizes={:?}", a.k, a.cut, a.sizes);
            m.output("assignment", &out)?;
            m.detail("cut", a.cut);
            m.detail("sizes", &a.sizes);
            m.finish(started);
            m.save(&with_suffix(&out, ".manifest.json"))
        }
        Command::Synth { out, seed, variant } => {
            if let Some(s) = seed {
                cfg.synth.seed = s;
            }
            if let Some(v) = variant {
                cfg.synth.variant = match v.as_str() {
                    "frozen" => Variant::Frozen,
                    "attachment" => Variant::Attachment,
                    other => return Err(Error::Config(format!("unknown variant {other:?}"))),
                };
            }
            let mut m = RunManifest::new("synth", args);
            m.seed = Some(cfg.synth.seed);
            m.config_hash = config_hash(&cfg.synth);
            let g = generate(&cfg.synth)?;
            save_events(&out, &g.log, LogFormat::from_path(&out))?;
            let params = with_suffix(&out, ".params.json");
            serde_json::to_writer(BufWriter::new(File::create(&params)?), &g.params)?;
            let repos = with_suffix(&out, ".repos.csv");
            let users = with_suffix(&out, ".users.csv");
            g.metadata.write_repos(BufWriter::new(File::create(&repos)?))?;
            g.metadata.write_users(BufWriter::new(File::create(&users)?))?;
            let mut outputs = BTreeMap::new();
            outputs.insert("log", &out);
            outputs.insert("params", &params);
            outputs.insert("repos", &repos);
            outputs.insert("users", &users);
            for (role, p) in outputs {
                m.output(role, p)?;
            }
            m.detail("events", g.log.len());
            m.finish(started);
            m.save(&with_suffix(&out, ".manifest.json"))
        }
    }
}

fn main() -> ExitCode {
    let started = Instant::now();
    let cli = Cli::parse();
    match execute(cli, started) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "ghsim: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
