//! Partitioned discrete-event simulation: placement of agents on
//! partitions, per-agent wake clocks and the tick/barrier driver.

pub mod partition;
pub mod run;
pub mod schedule;

pub use partition::{partition_graph, InteractionGraph, PartitionAssignment};
pub use run::{run, Placement, RunOutput, RunStats, SimulationConfig};
pub use schedule::{schedule_agents, WakeClock};
