//! Link prediction on a planted two-block bipartite graph: GF, LE and
//! HOPE against random vectors, scored by MAP on a resampled graph.
//!
//! cargo run --release --example embeddings

use rand::Rng;

use ghsim::ingest::BipartiteGraph;
use ghsim::models::embedding::{default_beta, map_score, train_gf, train_hope, train_le, Embedding, GfParams};
use ghsim::sampling::rng_for;
use ghsim::EventType;

fn blocks(label: &str) -> BipartiteGraph {
    let mut rng = rng_for(7, &[label]);
    let mut t = Vec::new();
    for u in 0..200 {
        for r in 0..200 {
            let p = if (u < 100) == (r < 100) { 0.3 } else { 0.02 };
            if rng.random::<f64>() < p {
                t.push((format!("u{u}"), format!("r{r}"), 1.0));
            }
        }
    }
    BipartiteGraph::from_triples(EventType::Watch, t)
}

fn main() -> ghsim::Result<()> {
    let train = blocks("train");
    let held = blocks("held");
    let gf = train_gf(&train, &GfParams::default())?;
    println!("gf loss {:.1} -> {:.1}", gf.losses[0], gf.losses.last().unwrap());
    let beta = default_beta(&train)?;
    let runs = [
        ("random", Embedding::random(&train, 8, 0)),
        ("gf", gf.embedding),
        ("le", train_le(&train, 4)?),
        ("hope", train_hope(&train, 4, beta)?),
    ];
    for (name, emb) in &runs {
        let r = map_score(emb, &held, Some(&train), 100);
        println!("{name:<7} MAP {:.3} over {} nodes", r.map, r.nodes);
    }
    Ok(())
}
