//! Reported quantities derived from packet traces: bit error rate,
//! end-to-end latency, per-hop latency, frame delivery ratio.
//!
//! BER scores payload bits only (the preamble is a sync symbol), but
//! latency starts at the initiator's preamble emission. A node that
//! never synchronized contributes an all-zero decode, so its errors
//! equal the payload's 1-bits; it has no latency sample. End-to-end
//! latency is the time until the last node decodes the last symbol.

use crate::engine::PacketTrace;
use crate::topology::Topology;
use std::collections::BTreeMap;
use thiserror::Error;

/// A metrics precondition failure.
#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("cannot aggregate an empty list of trials")]
    EmptyInput,
}

/// Per-trial quantities for one packet.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialMetrics {
    /// Payload bit error fraction per non-initiator node.
    pub ber_per_node: BTreeMap<usize, f64>,
    /// Mean of `ber_per_node` over non-initiator nodes.
    pub ber_avg: f64,
    /// Time from the initiator's first emission until the last node
    /// decoded the last symbol. Falls back to the packet's airtime
    /// (n-1 symbol intervals) when nothing synchronized.
    pub latency_e2e_s: f64,
    /// Last-symbol decode latency per node that synchronized.
    pub latency_per_node: BTreeMap<usize, f64>,
    /// Grid hop count per non-initiator node.
    pub hops_per_node: BTreeMap<usize, usize>,
}

/// Summary across trials.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateMetrics {
    pub trials: usize,
    pub ber_avg: f64,
    pub latency_mean_s: f64,
    pub latency_p99_s: f64,
    /// Mean last-symbol decode latency of the nodes at each hop
    /// count, pooled across trials; sorted by hop count.
    pub per_hop: Vec<(usize, f64)>,
}

/// Probability that a whole frame of `frame_bits` bits is decoded
/// without error, assuming independent bit errors.
pub fn frame_delivery_ratio(ber: f64, frame_bits: u32) -> f64 {
    (1.0 - ber).powi(frame_bits as i32)
}

fn node_payload_errors(decoded: &[u8], tx_bits: &[u8]) -> usize {
    let payload = &tx_bits[1..];
    if decoded.is_empty() {
        // Never synchronized: all-zero output against the payload.
        return payload.iter().filter(|&&b| b == 1).count();
    }
    payload
        .iter()
        .enumerate()
        .filter(|&(i, &b)| decoded.get(i + 1).copied().unwrap_or(0) != b)
        .count()
}

/// Derives one trial's metrics from its trace.
pub fn compute_metrics(trace: &PacketTrace, topo: &Topology) -> TrialMetrics {
    let payload_len = trace.tx_bits.len() - 1;
    let mut ber_per_node = BTreeMap::new();
    let mut latency_per_node = BTreeMap::new();
    let mut hops_per_node = BTreeMap::new();
    for nt in &trace.nodes {
        if nt.node == topo.initiator() {
            continue;
        }
        let errors = node_payload_errors(&nt.bits, &trace.tx_bits);
        ber_per_node.insert(nt.node, errors as f64 / payload_len as f64);
        hops_per_node.insert(nt.node, topo.hop_count(nt.node));
        if nt.sync.is_some() {
            let last = nt
                .events
                .last()
                .expect("synced nodes carry one event per symbol");
            latency_per_node.insert(nt.node, last.decision_time_s - trace.initiator_start_s);
        }
    }
    let ber_avg = if ber_per_node.is_empty() {
        0.0
    } else {
        ber_per_node.values().sum::<f64>() / ber_per_node.len() as f64
    };
    let airtime = (trace.tx_bits.len() - 1) as f64 * trace.symbol_interval_s;
    let latency_e2e_s = latency_per_node
        .values()
        .cloned()
        .fold(airtime, f64::max);
    TrialMetrics {
        ber_per_node,
        ber_avg,
        latency_e2e_s,
        latency_per_node,
        hops_per_node,
    }
}

/// Pools trials into a summary: mean BER, mean and 99th-percentile
/// end-to-end latency, and the latency-vs-hops table.
pub fn aggregate(trials: &[TrialMetrics]) -> Result<AggregateMetrics, MetricsError> {
    if trials.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let ber_avg = trials.iter().map(|t| t.ber_avg).sum::<f64>() / trials.len() as f64;
    let mut latencies: Vec<f64> = trials.iter().map(|t| t.latency_e2e_s).collect();
    latencies.sort_by(|a, b| a.partial_cmp(b).expect("latencies are finite"));
    let latency_mean_s = latencies.iter().sum::<f64>() / latencies.len() as f64;
    let p99_index = ((0.99 * latencies.len() as f64).ceil() as usize).max(1) - 1;
    let latency_p99_s = latencies[p99_index];

    let mut by_hop: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for t in trials {
        for (&node, &lat) in &t.latency_per_node {
            let hops = t.hops_per_node[&node];
            let entry = by_hop.entry(hops).or_insert((0.0, 0));
            entry.0 += lat;
            entry.1 += 1;
        }
    }
    let per_hop = by_hop
        .into_iter()
        .map(|(h, (sum, n))| (h, sum / n as f64))
        .collect();
    Ok(AggregateMetrics {
        trials: trials.len(),
        ber_avg,
        latency_mean_s,
        latency_p99_s,
        per_hop,
    })
}
