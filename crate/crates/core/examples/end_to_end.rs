//! Tutorial pipeline through files, as the command-line tool runs it:
//! synthesize, save, reload, fit, snapshot, simulate and evaluate.
//!
//! cargo run --release --example end_to_end -- [dir]
//!
//! The same steps from the shell:
//!
//! ghsim synth --out truth.jsonl
//! ghsim fit --model pref --train truth.jsonl --window 2017-01-01..2017-01-31 --out pref.snap \
//!     --repos truth.jsonl.repos.csv --users truth.jsonl.users.csv
//! ghsim simulate --snapshot pref.snap --window 2017-01-31..2017-03-02 --out sim.jsonl
//! ghsim evaluate --sim sim.jsonl --truth truth.jsonl --window 2017-01-31..2017-03-02 --out report

use std::path::PathBuf;

use ghsim::ingest::Metadata;
use ghsim::snapshot::{load_snapshot, save_snapshot};
use ghsim::types::DAY;
use ghsim::{
    evaluate, fit_model, generate, load_events, run, save_events, EvalConfig, FitConfig, LogFormat, ModelKind,
    SimulationConfig, SynthConfig, TimeWindow,
};

fn main() -> ghsim::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| std::env::temp_dir().display().to_string()));
    let truth_path = dir.join("truth.jsonl");

    let synth = generate(&SynthConfig { days: 60, ..SynthConfig::default() })?;
    save_events(&truth_path, &synth.log, LogFormat::Jsonl)?;
    let repos = dir.join("truth.repos.csv");
    synth.metadata.write_repos(std::fs::File::create(&repos)?)?;
    println!("wrote {} events to {}", synth.log.len(), truth_path.display());

    let truth = load_events(&truth_path, LogFormat::Jsonl, true)?.log;
    let mut meta = Metadata::default();
    meta.read_repos(std::fs::File::open(&repos)?)?;
    let w = synth.params.window;
    let train = TimeWindow::new(w.start, w.start + 30 * DAY);
    let test = TimeWindow::new(train.end, w.end);

    let snap = dir.join("pref.snap");
    let fitted = fit_model(ModelKind::Pref, &truth, train, Some(&meta), &FitConfig::default())?;
    let header = save_snapshot(&snap, &fitted, train, "")?;
    println!("snapshot {} ({} bytes of payload)", snap.display(), header.payload_len);

    let loaded = load_snapshot(&snap)?;
    let out = run(&SimulationConfig::new(test, 42, 2), &loaded.fitted.slice, &loaded.fitted.model)?;
    let sim_path = dir.join("sim.jsonl");
    save_events(&sim_path, &out.log, LogFormat::Jsonl)?;
    println!("simulated {} events over {test} ({} messages)", out.log.len(), out.stats.messages);

    let report = evaluate(&out.log, &truth, &EvalConfig::new(test).with_metadata(&meta));
    print!("{}", report.to_table());
    Ok(())
}
