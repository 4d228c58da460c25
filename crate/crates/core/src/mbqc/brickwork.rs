use serde::{Deserialize, Serialize};

use super::MbqcError;

/// Node label, 1-based: the node in row `r` and column `c` (both 1-based) of
/// an `n`-row graph is `(c − 1)·n + r`.
pub type Node = usize;

/// A brickwork graph with `n_wires` rows and `n_columns` columns.
///
/// Column 1 holds the inputs `1..=n` and the last column holds the outputs
/// `q+1..=q+n`, where `q = n·(n_columns − 1)` is the number of measured nodes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BrickworkGraph {
    n_wires: usize,
    n_columns: usize,
    edges: Vec<(Node, Node)>,
}

/// Vertical (brick) edges of a column, as pairs of 0-based rows.
///
/// Bricks occupy columns 2–3 and 4–5 of every 4-column period; the upper rung
/// of each brick sits in the brick's first column. Even periods start bricks
/// on even rows, odd periods on odd rows.
pub fn brick_rows(n_wires: usize, column: usize) -> Vec<(usize, usize)> {
    if column < 2 || (column - 2) % 2 != 0 {
        return Vec::new();
    }
    let period = (column - 2) / 4;
    (0..n_wires.saturating_sub(1))
        .filter(|r| r % 2 == period % 2)
        .map(|r| (r, r + 1))
        .collect()
}

fn valid_depth(n_columns: usize) -> bool {
    n_columns == 1 || n_columns == 2 || n_columns % 4 == 1
}

impl BrickworkGraph {
    /// Builds the brickwork graph for an even wire count `≥ 2` and a depth of
    /// 1, 2, or `1 mod 4` columns.
    pub fn build(n_wires: usize, n_columns: usize) -> Result<Self, MbqcError> {
        if n_wires < 2 || n_wires % 2 != 0 {
            return Err(MbqcError::InvalidDimensions(format!(
                "brickwork requires an even wire count of at least 2, got {n_wires}"
            )));
        }
        if !valid_depth(n_columns) {
            return Err(MbqcError::InvalidDimensions(format!(
                "column count must be 1, 2, or 1 mod 4, got {n_columns}"
            )));
        }
        Self::with_layout(n_wires, n_columns)
    }

    /// A single-row graph: a line of `n_columns ≥ 1` nodes with no bricks.
    pub fn line(n_columns: usize) -> Result<Self, MbqcError> {
        Self::with_layout(1, n_columns)
    }

    fn with_layout(n_wires: usize, n_columns: usize) -> Result<Self, MbqcError> {
        if n_columns == 0 {
            return Err(MbqcError::InvalidDimensions(format!(
                "a graph needs at least one column"
            )));
        }
        let node = |r: usize, c: usize| (c - 1) * n_wires + r + 1;
        let mut edges = Vec::new();
        for c in 1..=n_columns {
            for r in 0..n_wires {
                if c < n_columns {
                    edges.push((node(r, c), node(r, c + 1)));
                }
            }
            for (r0, r1) in brick_rows(n_wires, c) {
                edges.push((node(r0, c), node(r1, c)));
            }
        }
        edges.sort_unstable();
        Ok(BrickworkGraph {
            n_wires,
            n_columns,
            edges,
        })
    }

    pub fn n_wires(&self) -> usize {
        self.n_wires
    }

    pub fn n_columns(&self) -> usize {
        self.n_columns
    }

    /// Number of measured nodes.
    pub fn q(&self) -> usize {
        self.n_wires * (self.n_columns - 1)
    }

    pub fn num_nodes(&self) -> usize {
        self.n_wires * self.n_columns
    }

    pub fn edges(&self) -> &[(Node, Node)] {
        &self.edges
    }

    /// Label of the node at 1-based `row` and `column`.
    pub fn node(&self, row: usize, column: usize) -> Node {
        (column - 1) * self.n_wires + row
    }

    pub fn row(&self, j: Node) -> usize {
        (j - 1) % self.n_wires + 1
    }

    pub fn column(&self, j: Node) -> usize {
        (j - 1) / self.n_wires + 1
    }

    pub fn nodes(&self) -> impl Iterator<Item = Node> {
        1..=self.num_nodes()
    }

    pub fn inputs(&self) -> impl Iterator<Item = Node> {
        1..=self.n_wires
    }

    pub fn outputs(&self) -> impl Iterator<Item = Node> {
        let q = self.q();
        q + 1..=q + self.n_wires
    }

    /// Nodes outside the output column, in measurement order.
    pub fn measured(&self) -> impl Iterator<Item = Node> {
        1..=self.q()
    }

    pub fn contains(&self, j: Node) -> bool {
        (1..=self.num_nodes()).contains(&j)
    }

    pub fn is_input(&self, j: Node) -> bool {
        (1..=self.n_wires).contains(&j)
    }

    pub fn is_output(&self, j: Node) -> bool {
        j > self.q() && j <= self.num_nodes()
    }

    pub fn neighbors(&self, j: Node) -> Vec<Node> {
        let mut out: Vec<Node> = self
            .edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == j {
                    Some(b)
                } else if b == j {
                    Some(a)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out
    }

    pub fn vertical_edges(&self) -> impl Iterator<Item = (Node, Node)> + '_ {
        self.edges
            .iter()
            .copied()
            .filter(|&(a, b)| self.column(a) == self.column(b))
    }

    pub fn horizontal_edges(&self) -> impl Iterator<Item = (Node, Node)> + '_ {
        self.edges
            .iter()
            .copied()
            .filter(|&(a, b)| self.column(a) != self.column(b))
    }
}
