//! The null model on a synthetic log: the fortnight before the test
//! window is replayed, shifted forward, until the window is covered.
//!
//! cargo run --release --example synth_null

use ghsim::types::DAY;
use ghsim::{fit_model, generate, run, FitConfig, ModelKind, SimulationConfig, SynthConfig, TimeWindow};

fn main() -> ghsim::Result<()> {
    let synth = generate(&SynthConfig { n_users: 500, n_repos: 800, days: 42, ..SynthConfig::default() })?;
    let w = synth.params.window;
    let test = TimeWindow::new(w.start + 14 * DAY, w.end);

    let fitted = fit_model(ModelKind::Null, &synth.log, test, None, &FitConfig::default())?;
    let out = run(&SimulationConfig::new(test, 0, 1), &fitted.slice, &fitted.model)?;

    let source = synth.log.restrict(TimeWindow::new(w.start, test.start));
    println!("replayed {} events into {} over {test}", source.len(), out.log.len());
    for (a, b) in source.iter().zip(out.log.iter()).take(3) {
        println!("{} {} {}  ->  {}", a.timestamp, a.user_id, a.repo_id, b.timestamp);
    }
    Ok(())
}
