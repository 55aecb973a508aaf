//! Scale benchmark: synthesize a population, fit a per-user model on the
//! first half of the log and simulate the second half.
//!
//! cargo run --release --example scale -- [users] [partitions] [model]
//!
//! Defaults are 100000 users, one partition per thread and the baseline
//! model. The nightly benchmark passes 3000000.

use std::time::Instant;

use ghsim::manifest::peak_memory_bytes;
use ghsim::types::DAY;
use ghsim::{fit_model, generate, run, FitConfig, ModelKind, SimulationConfig, SynthConfig, TimeWindow};

fn main() -> ghsim::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let users: usize = args.first().and_then(|s| s.parse().ok()).unwrap_or(100_000);
    let partitions: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(rayon::current_num_threads());
    let kind: ModelKind = args.get(2).map(|s| s.parse()).transpose()?.unwrap_or(ModelKind::Baseline);

    // about ten events per user per month
    let cfg = SynthConfig { n_users: users, n_repos: users, days: 60, rate_median: 0.3, ..SynthConfig::default() };
    let t = Instant::now();
    let synth = generate(&cfg)?;
    let w = synth.params.window;
    let train = TimeWindow::new(w.start, w.start + 30 * DAY);
    let test = TimeWindow::new(train.end, w.end);
    println!("synth   {:>9} events  {:>7.1}s", synth.log.len(), t.elapsed().as_secs_f64());

    let t = Instant::now();
    let fitted = fit_model(kind, &synth.log, train, Some(&synth.metadata), &FitConfig::default())?;
    let fit_s = t.elapsed().as_secs_f64();
    println!("fit     {:>9} agents  {:>7.1}s", fitted.slice.histories.len(), fit_s);

    let t = Instant::now();
    let out = run(&SimulationConfig::new(test, 1, partitions), &fitted.slice, &fitted.model)?;
    let sim_s = t.elapsed().as_secs_f64();
    println!("simulate {:>8} events  {:>7.1}s  messages {}", out.log.len(), sim_s, out.stats.messages);

    let peak = peak_memory_bytes().unwrap_or(0) as f64 / (1u64 << 30) as f64;
    println!("fit+simulate {:.1}s  peak {:.2} GiB  threads {}", fit_s + sim_s, peak, rayon::current_num_threads());
    Ok(())
}
