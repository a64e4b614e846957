//! Symbol-synchronous flood engine.
//!
//! One packet is simulated on a single global timeline quantized to
//! detection buffers: a tick covers one buffer's worth of samples, and
//! every emission, detection, and window boundary is integer sample
//! arithmetic on that grid (the symbol interval is an exact multiple
//! of the buffer duration at the defaults). The initiator emits one
//! shaped pulse per 1-bit at each symbol-interval start. Every other
//! node scans buffer by buffer until a pulse fires, anchors its symbol
//! windows at the start of that buffer, then per symbol listens
//! through its window and - on detecting a pulse - immediately
//! schedules its own emission at the end of the deciding buffer and
//! sleeps until its next window.
//!
//! Receive buffers are synthesized per tick from all audible
//! emissions (each one placed sample-accurately through its
//! transmitter-to-receiver paths with exact carrier phase plus a
//! per-node random carrier phase), and per-node white Gaussian noise
//! is added from a dedicated stream. Because relays committed during
//! tick t cannot touch the air before tick t+1, the tick loop is
//! causally exact: mid-window relays are heard by every node whose own
//! window still covers later buffers, with all clock skew preserved.
//!
//! Everything derives deterministically from one trial seed: per-node
//! carrier phases, per-node noise, and (in [`run_trials`]) per-trial
//! payloads, so identical seeds give byte-identical traces regardless
//! of thread count or trial scheduling.

use crate::config::{ConfigError, SimConfig};
pub use crate::detector::DetectionEvent;
use crate::detector::{buffer_vote, comparator_amplitudes};
use crate::phy;
use crate::rng;
use crate::topology::Topology;
use crate::waveform::ComplexSample;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use std::io::Write;
use thiserror::Error;

/// One pulse emission on the shared timeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TxEvent {
    pub node: usize,
    pub symbol_index: usize,
    /// Envelope reference time in samples on the global grid. The
    /// physical turn-on begins half a shaping filter earlier; for
    /// relays that is exactly the end of the deciding buffer.
    pub emit_sample: i64,
    pub emit_time_s: f64,
    /// The emitting node's carrier phase for this trial, radians.
    pub phase0: f64,
}

/// Synchronization record for one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncInfo {
    /// Global tick index of the buffer whose vote fired.
    pub anchor_tick: u64,
    /// Start time of that buffer; symbol window k opens at
    /// `window_anchor_s + k * Ts`.
    pub window_anchor_s: f64,
    /// End time of that buffer: when the sync decision existed.
    pub detection_time_s: f64,
}

/// Everything one node did during a packet.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeTrace {
    pub node: usize,
    pub sync: Option<SyncInfo>,
    /// Decoded bits including the preamble slot; empty when the node
    /// never synchronized (scored as total loss by metrics). The
    /// initiator's row carries the transmitted bits.
    pub bits: Vec<u8>,
    pub events: Vec<DetectionEvent>,
}

/// Full record of one simulated packet.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketTrace {
    pub trial_seed: u64,
    pub config_hash: String,
    /// When the initiator emitted the preamble: the latency origin.
    pub initiator_start_s: f64,
    pub symbol_interval_s: f64,
    pub tx_bits: Vec<u8>,
    pub nodes: Vec<NodeTrace>,
    pub tx_events: Vec<TxEvent>,
}

/// Debug switches for a run.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// When true a node also hears its own emissions. Off by default:
    /// nodes are half-duplex and never process samples they emitted.
    pub self_reception: bool,
}

/// An engine precondition failure.
#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("payload must hold at least one bit")]
    EmptyPayload,
    #[error("payload bit {index} is {value}, expected 0 or 1")]
    BadBit { index: usize, value: u8 },
}

/// One propagation arm of an ordered node pair, pre-quantized to the
/// sample grid: where the pulse template lands relative to the
/// emission's envelope reference, and with what complex gain.
#[derive(Clone, Copy)]
struct Link {
    src_off: i64,
    gain: Complex64,
}

enum Mode {
    Scanning,
    Sleeping { until_tick: u64, symbol: usize },
    InWindow { symbol: usize, buffer: usize },
    Done,
}

struct NodeState {
    mode: Mode,
    anchor_tick: u64,
    events: Vec<DetectionEvent>,
    noise_rng: rand_chacha::ChaCha8Rng,
}

/// Simulates one packet: a preamble 1 is prepended to `payload` and
/// flooded from the topology's initiator. All randomness (carrier
/// phases, noise) derives from `seed`.
pub fn run_packet(
    topo: &Topology,
    payload: &[u8],
    cfg: &SimConfig,
    seed: u64,
) -> Result<PacketTrace, EngineError> {
    run_packet_opts(topo, payload, cfg, seed, &RunOptions::default())
}

/// As [`run_packet`] with explicit debug options.
pub fn run_packet_opts(
    topo: &Topology,
    payload: &[u8],
    cfg: &SimConfig,
    seed: u64,
    opts: &RunOptions,
) -> Result<PacketTrace, EngineError> {
    cfg.validate()?;
    if payload.is_empty() {
        return Err(EngineError::EmptyPayload);
    }
    if let Some(index) = payload.iter().position(|&b| b > 1) {
        return Err(EngineError::BadBit {
            index,
            value: payload[index],
        });
    }
    let mut tx_bits = Vec::with_capacity(payload.len() + 1);
    tx_bits.push(1u8);
    tx_bits.extend_from_slice(payload);

    let fs = cfg.baseband_sample_rate_hz;
    let spb = cfg.samples_per_buffer();
    let bps = cfg.buffers_per_symbol() as u64;
    let sps = cfg.samples_per_symbol() as i64;
    let wbuf = cfg.detections_per_window as usize;
    let n_sym = tx_bits.len();
    let n_nodes = topo.len();
    let initiator = topo.initiator();
    let threshold = cfg.detection_threshold();
    let sigma_c = (cfg.noise_power_watts() / 2.0).sqrt();

    let template = phy::make_pulse(cfg);
    let tsam = template.samples();
    let tlen = tsam.len() as i64;
    let lead = (-template.start_time_s() * fs).round() as i64;

    // Per-node carrier phase, fixed for the whole trial.
    let phase_rot: Vec<Complex64> = (0..n_nodes)
        .map(|n| {
            let phi: f64 = rng::stream(seed, &[rng::PHASE, n as u64]).gen::<f64>()
                * std::f64::consts::TAU;
            Complex64::from_polar(1.0, phi)
        })
        .collect();

    // Quantize every ordered pair's paths once so a given transmitter
    // always lands on the same samples at a given receiver.
    let mut links: Vec<Vec<Vec<Link>>> = vec![vec![Vec::new(); n_nodes]; n_nodes];
    let mut min_off = i64::MAX;
    let mut max_off = i64::MIN;
    for (tx, row) in links.iter_mut().enumerate() {
        for (rx, link) in row.iter_mut().enumerate() {
            if tx == rx {
                continue;
            }
            let t = &topo.nodes()[tx];
            let r = &topo.nodes()[rx];
            let paths = phy::path_model((t.x_m, t.y_m), (r.x_m, r.y_m), cfg)
                .expect("grid nodes are distinct");
            *link = paths
                .iter()
                .map(|p| {
                    let src_off = (p.delay_s * fs).round() as i64 - lead;
                    min_off = min_off.min(src_off);
                    max_off = max_off.max(src_off);
                    Link {
                        src_off,
                        gain: p.gain,
                    }
                })
                .collect();
        }
    }
    if n_nodes < 2 {
        min_off = 0;
        max_off = 0;
    }
    let horizon = max_off + tlen;

    // The initiator's schedule is known up front: one emission per
    // 1-bit at each symbol-interval start.
    let init_events: Vec<TxEvent> = tx_bits
        .iter()
        .enumerate()
        .filter(|&(_, &b)| b == 1)
        .map(|(k, _)| TxEvent {
            node: initiator,
            symbol_index: k,
            emit_sample: k as i64 * sps,
            emit_time_s: k as f64 * cfg.symbol_interval_s,
            phase0: phase_rot[initiator].arg(),
        })
        .collect();
    let mut relay_events: Vec<TxEvent> = Vec::new();

    let mut states: Vec<NodeState> = (0..n_nodes)
        .map(|n| NodeState {
            mode: if n == initiator { Mode::Done } else { Mode::Scanning },
            anchor_tick: 0,
            events: Vec::new(),
            noise_rng: rng::stream(seed, &[rng::NOISE, n as u64]),
        })
        .collect();

    // One spare symbol plus slack covers propagation, per-hop relay
    // lag, and the last window of the farthest node.
    let total_ticks = (n_sym as u64 + 1) * bps + 64;
    let mut init_cursor = 0usize;
    let mut relay_cursor = 0usize;
    let mut buf: Vec<ComplexSample> = vec![Complex64::new(0.0, 0.0); spb];
    let mut pending: Vec<(usize, usize)> = Vec::new();

    for tick in 0..total_ticks {
        let lo = tick as i64 * spb as i64;
        let hi = lo + spb as i64;
        while init_cursor < init_events.len()
            && init_events[init_cursor].emit_sample + horizon <= lo
        {
            init_cursor += 1;
        }
        while relay_cursor < relay_events.len()
            && relay_events[relay_cursor].emit_sample + horizon <= lo
        {
            relay_cursor += 1;
        }
        pending.clear();

        for x in 0..n_nodes {
            let state = &mut states[x];
            if let Mode::Sleeping { until_tick, symbol } = state.mode {
                if tick == until_tick {
                    state.mode = Mode::InWindow { symbol, buffer: 0 };
                }
            }
            let listening = matches!(state.mode, Mode::Scanning | Mode::InWindow { .. });
            if !listening {
                continue;
            }

            buf.fill(Complex64::new(0.0, 0.0));
            for (events, cursor) in [
                (&init_events, init_cursor),
                (&relay_events, relay_cursor),
            ] {
                for e in &events[cursor..] {
                    if e.emit_sample + min_off >= hi {
                        break;
                    }
                    if e.node == x && !opts.self_reception {
                        continue;
                    }
                    let rot = phase_rot[e.node];
                    for l in &links[e.node][x] {
                        let s0 = e.emit_sample + l.src_off;
                        if s0 < hi && s0 + tlen > lo {
                            phy::accumulate(&mut buf, lo, tsam, s0, l.gain * rot);
                        }
                    }
                }
            }
            phy::add_noise_into(&mut buf, sigma_c, &mut state.noise_rng);

            let fired = buffer_vote(&comparator_amplitudes(&buf), threshold);
            let buffer_end_s = hi as f64 / fs;
            match state.mode {
                Mode::Scanning => {
                    if fired {
                        state.anchor_tick = tick;
                        state.events.push(DetectionEvent {
                            node: x,
                            symbol_index: 0,
                            bit: 1,
                            decision_time_s: buffer_end_s,
                            buffer_index: None,
                        });
                        pending.push((x, 0));
                        state.mode = next_symbol(state.anchor_tick, 0, n_sym, bps);
                    }
                }
                Mode::InWindow { symbol, buffer } => {
                    if fired {
                        state.events.push(DetectionEvent {
                            node: x,
                            symbol_index: symbol,
                            bit: 1,
                            decision_time_s: buffer_end_s,
                            buffer_index: Some(buffer),
                        });
                        pending.push((x, symbol));
                        state.mode = next_symbol(state.anchor_tick, symbol, n_sym, bps);
                    } else if buffer + 1 == wbuf {
                        let window_start =
                            (state.anchor_tick + symbol as u64 * bps) as f64 * spb as f64 / fs;
                        state.events.push(DetectionEvent {
                            node: x,
                            symbol_index: symbol,
                            bit: 0,
                            decision_time_s: window_start + cfg.window_s,
                            buffer_index: None,
                        });
                        state.mode = next_symbol(state.anchor_tick, symbol, n_sym, bps);
                    } else {
                        state.mode = Mode::InWindow {
                            symbol,
                            buffer: buffer + 1,
                        };
                    }
                }
                _ => {}
            }
        }

        for &(node, symbol) in &pending {
            let emit_sample = hi + lead;
            relay_events.push(TxEvent {
                node,
                symbol_index: symbol,
                emit_sample,
                emit_time_s: emit_sample as f64 / fs,
                phase0: phase_rot[node].arg(),
            });
        }
    }

    let nodes = assemble_node_traces(topo, &tx_bits, states, cfg);
    let mut tx_events = init_events;
    tx_events.extend_from_slice(&relay_events);
    tx_events.sort_by_key(|e| (e.emit_sample, e.node, e.symbol_index));

    Ok(PacketTrace {
        trial_seed: seed,
        config_hash: cfg.hash_hex(),
        initiator_start_s: 0.0,
        symbol_interval_s: cfg.symbol_interval_s,
        tx_bits,
        nodes,
        tx_events,
    })
}

fn next_symbol(anchor_tick: u64, symbol: usize, n_sym: usize, bps: u64) -> Mode {
    if symbol + 1 < n_sym {
        Mode::Sleeping {
            until_tick: anchor_tick + (symbol as u64 + 1) * bps,
            symbol: symbol + 1,
        }
    } else {
        Mode::Done
    }
}

fn assemble_node_traces(
    topo: &Topology,
    tx_bits: &[u8],
    states: Vec<NodeState>,
    cfg: &SimConfig,
) -> Vec<NodeTrace> {
    let n_sym = tx_bits.len();
    let spb = cfg.samples_per_buffer() as f64;
    let bps = cfg.buffers_per_symbol() as u64;
    let fs = cfg.baseband_sample_rate_hz;
    states
        .into_iter()
        .enumerate()
        .map(|(n, mut state)| {
            if n == topo.initiator() {
                return NodeTrace {
                    node: n,
                    sync: None,
                    bits: tx_bits.to_vec(),
                    events: Vec::new(),
                };
            }
            if state.events.is_empty() {
                return NodeTrace {
                    node: n,
                    sync: None,
                    bits: Vec::new(),
                    events: Vec::new(),
                };
            }
            let anchor = state.anchor_tick;
            let window_anchor_s = anchor as f64 * spb / fs;
            // Windows that ran past the end of the timeline decide 0
            // at their nominal close, keeping one event per symbol.
            for s in state.events.len()..n_sym {
                let window_start = (anchor + s as u64 * bps) as f64 * spb / fs;
                state.events.push(DetectionEvent {
                    node: n,
                    symbol_index: s,
                    bit: 0,
                    decision_time_s: window_start + cfg.window_s,
                    buffer_index: None,
                });
            }
            let bits = state.events.iter().map(|e| e.bit).collect();
            NodeTrace {
                node: n,
                sync: Some(SyncInfo {
                    anchor_tick: anchor,
                    window_anchor_s,
                    detection_time_s: window_anchor_s + cfg.buffer_duration_s,
                }),
                bits,
                events: state.events,
            }
        })
        .collect()
}

/// Runs `n_packets` independent trials with random payloads. Trial k
/// uses the sub-seed `derive(seed, [TRIAL, k])` and a payload drawn
/// from its own stream, so results are identical however trials are
/// scheduled across threads.
pub fn run_trials(
    topo: &Topology,
    payload_len: usize,
    n_packets: usize,
    cfg: &SimConfig,
    seed: u64,
) -> Result<Vec<PacketTrace>, EngineError> {
    (0..n_packets)
        .into_par_iter()
        .map(|k| {
            let trial_seed = rng::derive(seed, &[rng::TRIAL, k as u64]);
            let mut payload_rng = rng::stream(seed, &[rng::TRIAL, k as u64, rng::PAYLOAD]);
            let payload: Vec<u8> = (0..payload_len)
                .map(|_| payload_rng.gen_range(0..=1u8))
                .collect();
            run_packet(topo, &payload, cfg, trial_seed)
        })
        .collect()
}

/// Packs bits (values 0/1) into hex, most significant bit first.
pub fn bits_to_hex(bits: &[u8]) -> String {
    let mut out = String::with_capacity(bits.len().div_ceil(8) * 2);
    for chunk in bits.chunks(8) {
        let mut byte = 0u8;
        for (i, &b) in chunk.iter().enumerate() {
            byte |= (b & 1) << (7 - i);
        }
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

/// Serializes one trace as a single JSON line: seed, config hash,
/// per-node bits in hex, and per-node decision times in microseconds
/// to three decimals.
pub fn trace_json_line(trace: &PacketTrace) -> String {
    let nodes: Vec<serde_json::Value> = trace
        .nodes
        .iter()
        .map(|nt| {
            let times: Vec<String> = nt
                .events
                .iter()
                .map(|e| format!("{:.3}", e.decision_time_s * 1e6))
                .collect();
            serde_json::json!({
                "node": nt.node,
                "synced": nt.sync.is_some(),
                "bits_hex": bits_to_hex(&nt.bits),
                "n_bits": nt.bits.len(),
                "decision_times_us": times,
            })
        })
        .collect();
    serde_json::json!({
        "seed": trace.trial_seed,
        "config_hash": trace.config_hash,
        "tx_bits_hex": bits_to_hex(&trace.tx_bits),
        "n_bits": trace.tx_bits.len(),
        "nodes": nodes,
    })
    .to_string()
}

/// Writes traces as line-oriented JSON, one trial per line.
pub fn write_traces_jsonl<W: Write>(mut w: W, traces: &[PacketTrace]) -> std::io::Result<()> {
    for t in traces {
        writeln!(w, "{}", trace_json_line(t))?;
    }
    Ok(())
}
