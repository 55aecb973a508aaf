//! Partition the user-repository interaction graph of a synthetic log and
//! compare the cut with random balanced placements.
//!
//! cargo run --release --example partition

use ghsim::engine::partition::random_bisection_cut;
use ghsim::engine::{partition_graph, InteractionGraph};
use ghsim::ingest::build_slice;
use ghsim::{generate, SynthConfig};

fn main() -> ghsim::Result<()> {
    let synth = generate(&SynthConfig { n_users: 5000, n_repos: 5000, ..SynthConfig::default() })?;
    let slice = build_slice(&synth.log, synth.params.window, None)?;
    let g = InteractionGraph::from_slice(&slice);
    println!("{} vertices, total edge weight {:.0}", g.len(), g.total_edge_weight());
    println!("random bisection cut {:.0}", random_bisection_cut(&g, 20, 0));
    for k in [2, 4, 8] {
        let a = partition_graph(&g, k, 0)?;
        println!("k={k}: cut {:.0}, part sizes {:?}", a.cut, a.sizes);
    }
    Ok(())
}
