//! Fit the three stationary per-user models on a month of synthetic
//! activity and score their simulations of the following month.
//!
//! cargo run --release --example stationary

use ghsim::types::DAY;
use ghsim::{
    evaluate, fit_model, generate, run, EvalConfig, FitConfig, ModelKind, SimulationConfig, SynthConfig, TimeWindow,
};

fn main() -> ghsim::Result<()> {
    let synth = generate(&SynthConfig { n_users: 2000, n_repos: 3000, days: 60, ..SynthConfig::default() })?;
    let w = synth.params.window;
    let train = TimeWindow::new(w.start, w.start + 30 * DAY);
    let test = TimeWindow::new(train.end, w.end);
    let truth = synth.log.restrict(test);

    for kind in [ModelKind::Baseline, ModelKind::Ground, ModelKind::Pref] {
        let fitted = fit_model(kind, &synth.log, train, Some(&synth.metadata), &FitConfig::default())?;
        let out = run(&SimulationConfig::new(test, 1, 1), &fitted.slice, &fitted.model)?;
        let report = evaluate(&out.log, &truth, &EvalConfig::new(test).with_metadata(&synth.metadata));
        println!("== {kind}: {} simulated, {} observed", out.log.len(), truth.len());
        print!("{}", report.to_table());
    }
    Ok(())
}
