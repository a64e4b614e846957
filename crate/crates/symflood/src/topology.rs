//! Node placement on a square grid.
//!
//! Nodes sit on a row-major grid anchored at the origin inside a fixed
//! square deployment area. Node 0, at the origin, always initiates the
//! flood. Hop count is the Chebyshev distance in grid coordinates: one
//! hop reaches the eight surrounding grid positions.

use std::io::Write;
use thiserror::Error;

/// Side length of the square deployment area, meters.
pub const AREA_SIDE_M: f64 = 2000.0;

/// One node: a stable id and a position in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub id: usize,
    pub x_m: f64,
    pub y_m: f64,
    row: usize,
    col: usize,
}

/// A grid of nodes with a designated initiator.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    nodes: Vec<Node>,
    rows: usize,
    cols: usize,
    spacing_m: f64,
    initiator: usize,
}

/// A topology construction error.
#[derive(Debug, Error, PartialEq)]
pub enum TopologyError {
    #[error("grid must contain at least one node")]
    Empty,
    #[error(
        "grid extent {extent_m} m exceeds the {area_m} m deployment area side"
    )]
    ExceedsArea { extent_m: f64, area_m: f64 },
    #[error("grid spacing must be positive, got {0}")]
    BadSpacing(f64),
}

/// Builds a rows x cols grid with the given spacing. Node ids are
/// row-major from the origin; node 0 is the initiator.
pub fn build_grid(rows: usize, cols: usize, spacing_m: f64) -> Result<Topology, TopologyError> {
    if rows == 0 || cols == 0 {
        return Err(TopologyError::Empty);
    }
    // Rejects NaN as well as zero and negatives.
    if !spacing_m.is_finite() || spacing_m <= 0.0 {
        return Err(TopologyError::BadSpacing(spacing_m));
    }
    let extent = spacing_m * (rows.max(cols) - 1) as f64;
    if extent > AREA_SIDE_M {
        return Err(TopologyError::ExceedsArea {
            extent_m: extent,
            area_m: AREA_SIDE_M,
        });
    }
    let mut nodes = Vec::with_capacity(rows * cols);
    for row in 0..rows {
        for col in 0..cols {
            nodes.push(Node {
                id: row * cols + col,
                x_m: col as f64 * spacing_m,
                y_m: row as f64 * spacing_m,
                row,
                col,
            });
        }
    }
    Ok(Topology {
        nodes,
        rows,
        cols,
        spacing_m,
        initiator: 0,
    })
}

impl Topology {
    /// All nodes, ordered by id.
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// True only for a topology that lost all nodes, which
    /// construction forbids.
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Index of the initiating node (always 0 for grids).
    pub fn initiator(&self) -> usize {
        self.initiator
    }

    /// Grid rows.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Grid columns.
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Grid spacing in meters.
    pub fn spacing_m(&self) -> f64 {
        self.spacing_m
    }

    /// Euclidean distance between two nodes, meters. Panics on an
    /// invalid id.
    pub fn pairwise_distance(&self, a: usize, b: usize) -> f64 {
        let (na, nb) = (&self.nodes[a], &self.nodes[b]);
        ((na.x_m - nb.x_m).powi(2) + (na.y_m - nb.y_m).powi(2)).sqrt()
    }

    /// Hops from the initiator to a node: the Chebyshev distance in
    /// grid coordinates. Panics on an invalid id.
    pub fn hop_count(&self, node: usize) -> usize {
        let n = &self.nodes[node];
        let i = &self.nodes[self.initiator];
        let dr = n.row.abs_diff(i.row);
        let dc = n.col.abs_diff(i.col);
        dr.max(dc)
    }

    /// Largest hop count over all nodes.
    pub fn max_hops(&self) -> usize {
        (0..self.len()).map(|n| self.hop_count(n)).max().unwrap_or(0)
    }

    /// Writes `node_id,x_m,y_m,hops` rows.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "node_id,x_m,y_m,hops")?;
        for node in &self.nodes {
            writeln!(
                out,
                "{},{:.3},{:.3},{}",
                node.id,
                node.x_m,
                node.y_m,
                self.hop_count(node.id)
            )?;
        }
        Ok(())
    }
}
