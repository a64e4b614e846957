//! Deterministic simulator for symbol-synchronous pulse flooding in
//! multi-hop wireless sensor networks.
//!
//! Nodes on a square grid flood a packet by relaying each detected symbol
//! immediately, within the symbol interval, instead of storing and
//! forwarding whole frames. Transmission is on-off keyed: a short pulse
//! carries a 1-bit, silence carries a 0-bit. The channel is modelled at
//! complex baseband with free-space path loss, exact carrier phase per
//! path, and per-sample receiver noise; reception uses a windowed
//! majority-vote energy detector with a hard amplitude threshold.
//!
//! The crate is organised bottom-up:
//!
//! * [`config`]: simulation parameters, unit helpers, validation
//! * [`rng`]: one master seed fanned out to per-trial, per-node streams
//! * [`waveform`]: complex-baseband sample buffers
//! * [`topology`]: grid construction, distances, hop counts
//! * [`phy`]: pulse shaping, path model, superposition, receiver noise
//! * [`detector`]: per-buffer majority vote, windowed symbol decisions
//! * [`engine`]: per-node relay state machines on a shared sample clock
//! * [`metrics`]: bit error rate, end-to-end latency, aggregation
//! * [`experiments`]: named parameter sweeps, CSV output, SVG plots
//!
//! Every run is reproducible: the same seed yields byte-identical traces
//! and result tables regardless of thread count.

pub mod config;
pub mod detector;
pub mod engine;
pub mod experiments;
pub mod metrics;
pub mod phy;
pub mod plot;
pub mod rng;
pub mod topology;
pub mod waveform;

pub use config::{dbm_to_watts, watts_to_dbm, ConfigError, SimConfig};
pub use engine::{run_packet, run_trials, DetectionEvent, PacketTrace, RunOptions, TxEvent};
pub use experiments::{run_experiment, ExperimentSpec, ResultTable};
pub use metrics::{aggregate, compute_metrics, frame_delivery_ratio, AggregateMetrics, TrialMetrics};
pub use topology::Topology;
pub use waveform::{ComplexSample, Waveform};
