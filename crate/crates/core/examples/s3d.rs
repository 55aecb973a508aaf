//! S3D on user-repository pairs: which features predict that a user
//! forks a repository it has not touched before.
//!
//! cargo run --release --example s3d

use ghsim::ingest::build_slice;
use ghsim::models::newentity::{cv_r2, extract_features, feature_names, fit_s3d, select_lambda, training_pairs};
use ghsim::{generate, EventType, SynthConfig, Variant};

fn main() -> ghsim::Result<()> {
    let cfg = SynthConfig { variant: Variant::Attachment, n_users: 3000, n_repos: 2000, days: 60, ..SynthConfig::default() };
    let synth = generate(&cfg)?;
    let slice = build_slice(&synth.log, synth.params.window, Some(&synth.metadata))?;

    let (pairs, y) = training_pairs(&slice, EventType::Fork, 1);
    let table = extract_features(&slice, &pairs);
    let lambda = select_lambda(&table, &y, &[1e-4, 1e-3, 1e-2], 5)?;
    let model = fit_s3d(&table, &y, lambda, 6)?;
    let names = feature_names();
    println!("{} pairs, {:.1}% positive, lambda {lambda}", pairs.len(), 100.0 * y.iter().sum::<f64>() / y.len() as f64);
    for (j, gain) in model.selected().iter().zip(model.step_gains()) {
        println!("  {:<28} +{gain:.4}", names[*j]);
    }
    println!("train R2 {:.4}, 5-fold R2 {:.4}", model.r2(), cv_r2(&table, &y, lambda, 5, 6));
    Ok(())
}
