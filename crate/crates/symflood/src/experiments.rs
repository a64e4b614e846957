//! Named, reproducible experiment scenarios: parameter sweeps over
//! grid size, spacing, and packet length, each cell running a batch of
//! packet trials and aggregating metrics into a CSV result table.
//!
//! Cells are enumerated in a fixed order and each gets its own seed
//! derived from the master seed and the cell index, so any row of the
//! output can be reproduced in isolation from the seed column alone.
//! Four built-in experiments cover the standard studies: BER versus
//! grid distance, latency versus packet size, latency versus hop
//! count, and BER versus network density.

use crate::config::{ConfigError, SimConfig};
use crate::engine::{run_trials, EngineError, PacketTrace};
use crate::metrics::{aggregate, compute_metrics, MetricsError};
use crate::plot::{render_svg, PlotError, PlotSpec, Series};
use crate::rng::{derive, CELL};
use crate::topology::{build_grid, TopologyError};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// One sweep axis: either grid shapes or numeric values for a named
/// config field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepAxis {
    Grids(Vec<(usize, usize)>),
    Numbers(Vec<f64>),
}

/// A declarative experiment: base parameters plus sweep axes. The
/// file format is TOML with these field names; `base_config` and
/// `sweep` are optional tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub id: String,
    pub grid: (usize, usize),
    pub distances_m: Vec<f64>,
    pub packet_bits_list: Vec<usize>,
    pub n_packets: usize,
    #[serde(default)]
    pub base_config: SimConfig,
    #[serde(default)]
    pub sweep: BTreeMap<String, SweepAxis>,
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment: {0}")]
    BadSpec(String),
    #[error("sweep key {0:?} does not name a sweepable parameter")]
    InvalidSweepKey(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Plot(#[from] PlotError),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for ExperimentError {
    fn from(e: std::io::Error) -> Self {
        ExperimentError::Io(e.to_string())
    }
}

/// Numeric config fields addressable from a sweep, in config-file key
/// spelling. Swept combinations still pass full config validation.
const SWEEPABLE: [&str; 12] = [
    "carrier_freq_hz",
    "symbol_interval_Ts_s",
    "pulse_duration_Tp_s",
    "window_L_s",
    "buffer_duration_s",
    "tx_power_dbm",
    "noise_power_dbm",
    "noise_figure_db",
    "rx_sensitivity_dbm",
    "signal_bandwidth_hz",
    "baseband_sample_rate_hz",
    "data_rate_bps",
];

fn apply_field(cfg: &mut SimConfig, key: &str, value: f64) {
    match key {
        "carrier_freq_hz" => cfg.carrier_freq_hz = value,
        "symbol_interval_Ts_s" => cfg.symbol_interval_s = value,
        "pulse_duration_Tp_s" => cfg.pulse_duration_s = value,
        "window_L_s" => cfg.window_s = value,
        "buffer_duration_s" => cfg.buffer_duration_s = value,
        "tx_power_dbm" => cfg.tx_power_dbm = value,
        "noise_power_dbm" => cfg.noise_power_dbm = value,
        "noise_figure_db" => cfg.noise_figure_db = value,
        "rx_sensitivity_dbm" => cfg.rx_sensitivity_dbm = value,
        "signal_bandwidth_hz" => cfg.signal_bandwidth_hz = value,
        "baseband_sample_rate_hz" => cfg.baseband_sample_rate_hz = value,
        "data_rate_bps" => cfg.data_rate_bps = value,
        _ => unreachable!("validated sweep key"),
    }
}

/// One point of the sweep, fully resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub grid: (usize, usize),
    pub distance_m: f64,
    pub packet_bits: usize,
    pub overrides: Vec<(String, f64)>,
    pub seed: u64,
}

impl ExperimentSpec {
    /// Checks structural invariants and sweep keys.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.n_packets == 0 {
            return Err(ExperimentError::BadSpec("n_packets must be at least 1".into()));
        }
        if self.distances_m.is_empty() {
            return Err(ExperimentError::BadSpec("distances_m must be non-empty".into()));
        }
        if self.packet_bits_list.is_empty() {
            return Err(ExperimentError::BadSpec(
                "packet_bits_list must be non-empty".into(),
            ));
        }
        if let Some(&bits) = self.packet_bits_list.iter().find(|&&b| b < 2) {
            return Err(ExperimentError::BadSpec(format!(
                "packet_bits must be at least 2 (sync symbol plus payload), got {bits}"
            )));
        }
        for (key, axis) in &self.sweep {
            match (key.as_str(), axis) {
                ("grid", SweepAxis::Grids(g)) if !g.is_empty() => {}
                ("grid", _) => {
                    return Err(ExperimentError::BadSpec(
                        "sweep.grid must be a non-empty list of [rows, cols] pairs".into(),
                    ))
                }
                (k, SweepAxis::Numbers(v)) if SWEEPABLE.contains(&k) => {
                    if v.is_empty() {
                        return Err(ExperimentError::BadSpec(format!(
                            "sweep.{k} must be non-empty"
                        )));
                    }
                }
                (k, _) => return Err(ExperimentError::InvalidSweepKey(k.to_string())),
            }
        }
        self.base_config.validate()?;
        Ok(())
    }

    /// Enumerates the Cartesian product of all axes in a fixed order:
    /// grids, then distances, then packet sizes, then numeric sweep
    /// axes in key order. Cell seeds derive from the master seed and
    /// the cell index.
    pub fn cells(&self) -> Result<Vec<Cell>, ExperimentError> {
        self.validate()?;
        let grids: Vec<(usize, usize)> = match self.sweep.get("grid") {
            Some(SweepAxis::Grids(g)) => g.clone(),
            _ => vec![self.grid],
        };
        let numeric: Vec<(&String, &Vec<f64>)> = self
            .sweep
            .iter()
            .filter(|(k, _)| k.as_str() != "grid")
            .map(|(k, axis)| match axis {
                SweepAxis::Numbers(v) => (k, v),
                SweepAxis::Grids(_) => unreachable!("validated sweep axis"),
            })
            .collect();
        let mut combos: Vec<Vec<(String, f64)>> = vec![Vec::new()];
        for (key, values) in &numeric {
            let mut next = Vec::with_capacity(combos.len() * values.len());
            for combo in &combos {
                for &v in values.iter() {
                    let mut c = combo.clone();
                    c.push(((*key).clone(), v));
                    next.push(c);
                }
            }
            combos = next;
        }
        let mut cells = Vec::new();
        let mut index = 0usize;
        for &grid in &grids {
            for &distance_m in &self.distances_m {
                for &packet_bits in &self.packet_bits_list {
                    for overrides in &combos {
                        // Masked to the i64 range so the seed column of the
                        // CSV can be pasted back into a TOML spec file.
                        let seed =
                            derive(self.base_config.rng_seed, &[CELL, index as u64]) >> 1;
                        cells.push(Cell {
                            index,
                            grid,
                            distance_m,
                            packet_bits,
                            overrides: overrides.clone(),
                            seed,
                        });
                        index += 1;
                    }
                }
            }
        }
        Ok(cells)
    }

    /// The effective config for one cell: base config, numeric
    /// overrides applied, seeded with the cell's own seed.
    pub fn cell_config(&self, cell: &Cell) -> Result<SimConfig, ExperimentError> {
        let mut cfg = self.base_config.clone();
        for (key, value) in &cell.overrides {
            apply_field(&mut cfg, key, *value);
        }
        cfg.rng_seed = cell.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses a spec file (TOML) and validates it.
    pub fn from_toml(text: &str) -> Result<ExperimentSpec, ExperimentError> {
        let spec: ExperimentSpec = toml::from_str(text)
            .map_err(|e| ExperimentError::BadSpec(format!("parse error: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    /// Loads a spec file from disk.
    pub fn load(path: &Path) -> Result<ExperimentSpec, ExperimentError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))?;
        ExperimentSpec::from_toml(&text)
    }
}

/// One summary row of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment_id: String,
    pub grid: (usize, usize),
    pub grid_d_m: f64,
    pub n_nodes: usize,
    pub packet_bits: usize,
    pub trials: usize,
    pub seed: u64,
    pub ber_avg: f64,
    pub latency_mean_us: f64,
    pub latency_p99_us: f64,
    /// Mean last-symbol latency by hop count, microseconds.
    pub per_hop: Vec<(usize, f64)>,
}

/// All rows of one experiment, in cell order.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub experiment_id: String,
    pub rows: Vec<ResultRow>,
}

pub const CSV_HEADER: &str =
    "experiment_id,grid_d_m,n_nodes,packet_bits,trials,seed,ber_avg,latency_mean_us,latency_p99_us";

impl ResultTable {
    /// Renders the summary CSV. Formatting is fixed so identical runs
    /// are byte-identical.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            writeln!(
                out,
                "{},{:.1},{},{},{},{},{:.6e},{:.3},{:.3}",
                r.experiment_id,
                r.grid_d_m,
                r.n_nodes,
                r.packet_bits,
                r.trials,
                r.seed,
                r.ber_avg,
                r.latency_mean_us,
                r.latency_p99_us
            )
            .expect("string write");
        }
        out
    }

    /// Renders the hop-count table for single-cell experiments, where
    /// one latency-vs-hops curve is meaningful.
    pub fn hops_csv(&self) -> Option<String> {
        if self.rows.len() != 1 {
            return None;
        }
        let mut out = String::from("hops,latency_mean_us\n");
        for (h, lat) in &self.rows[0].per_hop {
            writeln!(out, "{h},{lat:.3}").expect("string write");
        }
        Some(out)
    }

    /// Parses a summary CSV produced by [`ResultTable::to_csv`]. Hop
    /// tables live in a separate file; parsed rows carry none.
    pub fn parse_csv(text: &str) -> Result<ResultTable, ExperimentError> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| ExperimentError::BadSpec("empty CSV".into()))?;
        if header.trim() != CSV_HEADER {
            return Err(ExperimentError::BadSpec(format!(
                "unexpected CSV header: {header}"
            )));
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 9 {
                return Err(ExperimentError::BadSpec(format!(
                    "CSV row {}: expected 9 fields, got {}",
                    i + 2,
                    f.len()
                )));
            }
            fn field<T: std::str::FromStr>(s: &str, what: &str) -> Result<T, ExperimentError> {
                s.trim()
                    .parse()
                    .map_err(|_| ExperimentError::BadSpec(format!("bad {what}: {s:?}")))
            }
            rows.push(ResultRow {
                experiment_id: f[0].to_string(),
                grid: (0, 0),
                grid_d_m: field(f[1], "grid_d_m")?,
                n_nodes: field(f[2], "n_nodes")?,
                packet_bits: field(f[3], "packet_bits")?,
                trials: field(f[4], "trials")?,
                seed: field(f[5], "seed")?,
                ber_avg: field(f[6], "ber_avg")?,
                latency_mean_us: field(f[7], "latency_mean_us")?,
                latency_p99_us: field(f[8], "latency_p99_us")?,
                per_hop: Vec::new(),
            });
        }
        let experiment_id = rows
            .first()
            .map(|r| r.experiment_id.clone())
            .ok_or_else(|| ExperimentError::BadSpec("CSV has no data rows".into()))?;
        Ok(ResultTable {
            experiment_id,
            rows,
        })
    }

    /// Parses a hop-count table written next to the summary CSV.
    pub fn parse_hops_csv(text: &str) -> Result<Vec<(usize, f64)>, ExperimentError> {
        let mut lines = text.lines();
        match lines.next() {
            Some("hops,latency_mean_us") => {}
            other => {
                return Err(ExperimentError::BadSpec(format!(
                    "unexpected hop table header: {other:?}"
                )))
            }
        }
        let mut out = Vec::new();
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let (h, lat) = line.split_once(',').ok_or_else(|| {
                ExperimentError::BadSpec(format!("bad hop table row: {line:?}"))
            })?;
            let h = h
                .trim()
                .parse()
                .map_err(|_| ExperimentError::BadSpec(format!("bad hop count: {h:?}")))?;
            let lat = lat
                .trim()
                .parse()
                .map_err(|_| ExperimentError::BadSpec(format!("bad latency: {lat:?}")))?;
            out.push((h, lat));
        }
        Ok(out)
    }

    /// Writes `<id>.csv` (and `<id>_hops.csv` when applicable) into
    /// `out_dir`. Returns the paths written.
    pub fn write_files(&self, out_dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
        std::fs::create_dir_all(out_dir)?;
        let mut written = Vec::new();
        let csv_path = out_dir.join(format!("{}.csv", self.experiment_id));
        std::fs::write(&csv_path, self.to_csv())?;
        written.push(csv_path);
        if let Some(hops) = self.hops_csv() {
            let hops_path = out_dir.join(format!("{}_hops.csv", self.experiment_id));
            std::fs::write(&hops_path, hops)?;
            written.push(hops_path);
        }
        Ok(written)
    }
}

fn run_cell(
    spec: &ExperimentSpec,
    cell: &Cell,
) -> Result<(ResultRow, Vec<PacketTrace>), ExperimentError> {
    let cfg = spec.cell_config(cell)?;
    let topo = build_grid(cell.grid.0, cell.grid.1, cell.distance_m)?;
    let traces = run_trials(&topo, cell.packet_bits - 1, spec.n_packets, &cfg, cell.seed)?;
    let metrics: Vec<_> = traces.iter().map(|t| compute_metrics(t, &topo)).collect();
    let agg = aggregate(&metrics)?;
    let row = ResultRow {
        experiment_id: spec.id.clone(),
        grid: cell.grid,
        grid_d_m: cell.distance_m,
        n_nodes: topo.len(),
        packet_bits: cell.packet_bits,
        trials: spec.n_packets,
        seed: cell.seed,
        ber_avg: agg.ber_avg,
        latency_mean_us: agg.latency_mean_s * 1e6,
        latency_p99_us: agg.latency_p99_s * 1e6,
        per_hop: agg.per_hop.iter().map(|&(h, s)| (h, s * 1e6)).collect(),
    };
    Ok((row, traces))
}

/// Runs every cell of the experiment and returns the result table.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultTable, ExperimentError> {
    run_experiment_with(spec, None)
}

/// Like [`run_experiment`], optionally dumping per-cell packet traces
/// as JSON lines files into `trace_dir`.
pub fn run_experiment_with(
    spec: &ExperimentSpec,
    trace_dir: Option<&Path>,
) -> Result<ResultTable, ExperimentError> {
    let cells = spec.cells()?;
    if let Some(dir) = trace_dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut rows = Vec::with_capacity(cells.len());
    for cell in &cells {
        let (row, traces) = run_cell(spec, cell)?;
        if let Some(dir) = trace_dir {
            let path = dir.join(format!("{}_cell{:03}.jsonl", spec.id, cell.index));
            let file = std::fs::File::create(&path)?;
            crate::engine::write_traces_jsonl(std::io::BufWriter::new(file), &traces)?;
        }
        rows.push(row);
    }
    Ok(ResultTable {
        experiment_id: spec.id.clone(),
        rows,
    })
}

fn distinct<T: PartialEq + Copy>(values: impl Iterator<Item = T>) -> Vec<T> {
    let mut out: Vec<T> = Vec::new();
    for v in values {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

/// Builds the figure for a result table. The plot shape follows the
/// table shape: a single cell plots latency versus hop count; varying
/// node counts plot BER versus network size per distance; varying
/// packet sizes plot latency versus bits per distance; otherwise BER
/// versus grid distance.
pub fn table_plot(table: &ResultTable) -> Result<PlotSpec, ExperimentError> {
    if table.rows.is_empty() {
        return Err(PlotError::Empty.into());
    }
    let id = &table.experiment_id;
    if table.rows.len() == 1 && !table.rows[0].per_hop.is_empty() {
        let r = &table.rows[0];
        return Ok(PlotSpec {
            title: format!("{id}: flood latency vs hop count"),
            x_label: "hops".into(),
            y_label: "mean decode latency (us)".into(),
            log_y: false,
            series: vec![Series {
                label: format!("{} nodes, d = {} m", r.n_nodes, r.grid_d_m),
                points: r.per_hop.iter().map(|&(h, l)| (h as f64, l)).collect(),
            }],
        });
    }
    let distances = distinct(table.rows.iter().map(|r| r.grid_d_m));
    let sizes = distinct(table.rows.iter().map(|r| r.n_nodes));
    let bits = distinct(table.rows.iter().map(|r| r.packet_bits));
    if sizes.len() > 1 {
        let series = distances
            .iter()
            .map(|&d| Series {
                label: format!("d = {d} m"),
                points: table
                    .rows
                    .iter()
                    .filter(|r| r.grid_d_m == d)
                    .map(|r| (r.n_nodes as f64, r.ber_avg))
                    .collect(),
            })
            .collect();
        return Ok(PlotSpec {
            title: format!("{id}: BER vs network size"),
            x_label: "nodes".into(),
            y_label: "average BER".into(),
            log_y: true,
            series,
        });
    }
    if bits.len() > 1 {
        let series = distances
            .iter()
            .map(|&d| Series {
                label: format!("d = {d} m"),
                points: table
                    .rows
                    .iter()
                    .filter(|r| r.grid_d_m == d)
                    .map(|r| (r.packet_bits as f64, r.latency_mean_us))
                    .collect(),
            })
            .collect();
        return Ok(PlotSpec {
            title: format!("{id}: flood latency vs packet size"),
            x_label: "packet bits".into(),
            y_label: "mean latency (us)".into(),
            log_y: false,
            series,
        });
    }
    Ok(PlotSpec {
        title: format!("{id}: BER vs grid distance"),
        x_label: "grid distance (m)".into(),
        y_label: "average BER".into(),
        log_y: true,
        series: vec![Series {
            label: format!("{} bits", bits.first().copied().unwrap_or(0)),
            points: table.rows.iter().map(|r| (r.grid_d_m, r.ber_avg)).collect(),
        }],
    })
}

/// Renders the table's figure to `<id>.svg` in `out_dir` and returns
/// the path. Errors on an empty table; writes nothing in that case.
pub fn emit_plots(table: &ResultTable, out_dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    let spec = table_plot(table)?;
    let svg = render_svg(&spec)?;
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join(format!("{}.svg", table.experiment_id));
    std::fs::write(&path, svg)?;
    Ok(vec![path])
}

/// The built-in experiment specs.
pub fn built_in(id: &str) -> Option<ExperimentSpec> {
    let base = ExperimentSpec {
        id: id.to_string(),
        grid: (4, 4),
        distances_m: vec![50.0],
        packet_bits_list: vec![64],
        n_packets: 100,
        base_config: SimConfig::default(),
        sweep: BTreeMap::new(),
    };
    match id {
        "fig5" => Some(ExperimentSpec {
            distances_m: vec![50.0, 75.0, 100.0, 125.0, 150.0, 175.0, 200.0],
            ..base
        }),
        "fig7" => Some(ExperimentSpec {
            distances_m: vec![100.0, 200.0],
            packet_bits_list: vec![64, 128, 256, 512],
            ..base
        }),
        "fig8" => Some(ExperimentSpec {
            grid: (8, 8),
            distances_m: vec![100.0],
            ..base
        }),
        "fig9" => {
            let mut sweep = BTreeMap::new();
            sweep.insert(
                "grid".to_string(),
                SweepAxis::Grids(vec![(4, 4), (5, 5), (6, 6), (7, 7), (8, 8), (9, 9)]),
            );
            Some(ExperimentSpec {
                distances_m: vec![50.0, 75.0, 100.0, 125.0],
                sweep,
                ..base
            })
        }
        _ => None,
    }
}

/// Built-in experiment ids with one-line descriptions.
pub fn list_builtins() -> Vec<(&'static str, &'static str)> {
    vec![
        ("fig5", "4x4 grid, BER vs grid distance 50..200 m, 100 packets of 64 bits"),
        ("fig7", "4x4 grid, latency vs packet size {64,128,256,512} at 100 m and 200 m"),
        ("fig8", "8x8 grid at 100 m, latency vs hop count, 100 packets of 64 bits"),
        ("fig9", "BER vs network size 16..81 nodes at 50..125 m spacing"),
    ]
}
