//! Recover the planted parameters of the attachment generator with the
//! population-level Bayesian model, then run it forward a week.
//!
//! cargo run --release --example bayesian

use ghsim::ingest::build_slice;
use ghsim::models::bayesian::fit_bayesian;
use ghsim::models::FittedModel;
use ghsim::types::DAY;
use ghsim::{generate, run, SimulationConfig, SynthConfig, TimeWindow, Variant};

fn main() -> ghsim::Result<()> {
    let cfg = SynthConfig {
        variant: Variant::Attachment,
        n_users: 5000,
        n_repos: 3000,
        days: 60,
        rate_median: 0.5,
        ..SynthConfig::default()
    };
    let synth = generate(&cfg)?;
    let slice = build_slice(&synth.log, synth.params.window, Some(&synth.metadata))?;
    let model = fit_bayesian(&slice)?;
    let c = &model.config;

    println!("                 planted   fitted");
    let d = cfg.discovery;
    for (name, i) in [("watch", 0), ("fork", 1), ("create", 2)] {
        println!("discovery {name:<6} {:>8.3} {:>8.3}", d[i] / d.iter().sum::<f64>(), c.discovery[i]);
    }
    println!("new-user share   {:>8.3} {:>8.3}", cfg.new_user_share, c.p_new_user);
    if let Some(f) = &c.watch_fit {
        println!("watch gamma      {:>8.3} {:>8.3}  (xmin {})", cfg.gamma, f.gamma, f.xmin);
    }

    let w = synth.params.window;
    let next = TimeWindow::new(w.end, w.end + 7 * DAY);
    let out = run(&SimulationConfig::new(next, 3, 1), &slice, &FittedModel::Bayesian(model))?;
    let fresh = out.log.iter().filter(|e| e.user_id.starts_with('n')).count();
    println!("simulated week: {} events, {fresh} by minted users", out.log.len());
    Ok(())
}
