//! The evaluation metrics on small hand-made logs.
//!
//! cargo run --example metrics

use ghsim::metrics::{rbo, DEFAULT_RBO_P};
use ghsim::{evaluate, EvalConfig, Event, EventLog, EventType, TimeWindow};

fn main() {
    println!("rbo(abc, abc)  = {:.4}", rbo(&["a", "b", "c"], &["a", "b", "c"], 0.9, 3).unwrap());
    println!("rbo(abc, acb)  = {:.4}", rbo(&["a", "b", "c"], &["a", "c", "b"], 0.9, 3).unwrap());
    println!("rbo(abc, xyz)  = {:.4}", rbo(&["a", "b", "c"], &["x", "y", "z"], 0.9, 3).unwrap());
    println!("default persistence p = {DEFAULT_RBO_P}");

    let day = 86_400;
    let truth = EventLog::from_events(vec![
        Event::new(0, EventType::Watch, "ann", "bob/lib"),
        Event::new(day, EventType::Watch, "cid", "bob/lib"),
        Event::new(day, EventType::Issues, "ann", "bob/lib"),
        Event::new(2 * day, EventType::Push, "bob", "bob/lib"),
        Event::new(2 * day, EventType::Fork, "ann", "cid/app"),
    ]);
    let sim = EventLog::from_events(vec![
        Event::new(0, EventType::Fork, "ann", "cid/app"),
        Event::new(day, EventType::Watch, "bob", "cid/app"),
        Event::new(day, EventType::Issues, "cid", "bob/lib"),
        Event::new(2 * day, EventType::Push, "bob", "bob/lib"),
        Event::new(2 * day, EventType::Push, "ann", "bob/lib"),
    ]);
    let mut cfg = EvalConfig::new(TimeWindow::new(0, 3 * day));
    cfg.communities.insert("core".into(), ["ann", "bob"].iter().map(|s| s.to_string()).collect());
    print!("{}", evaluate(&sim, &truth, &cfg).to_table());
}
