use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{compute_flow, BrickworkGraph, Flow, MbqcError, Node};
use crate::quantum::Octant;

/// A brickwork graph together with a measurement angle for every node
/// outside the output column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PatternDocument", into = "PatternDocument")]
pub struct MeasurementPattern {
    graph: BrickworkGraph,
    flow: Flow,
    angles: BTreeMap<Node, Octant>,
}

impl MeasurementPattern {
    pub fn new(graph: BrickworkGraph, angles: BTreeMap<Node, Octant>) -> Result<Self, MbqcError> {
        for &j in angles.keys() {
            if !graph.contains(j) || graph.is_output(j) {
                return Err(MbqcError::UnexpectedAngle(j));
            }
        }
        if let Some(j) = graph.measured().find(|j| !angles.contains_key(j)) {
            return Err(MbqcError::MissingAngle(j));
        }
        let flow = compute_flow(&graph);
        Ok(MeasurementPattern { graph, flow, angles })
    }

    pub fn zero(graph: BrickworkGraph) -> Self {
        let angles = graph.measured().map(|j| (j, Octant::ZERO)).collect();
        let flow = compute_flow(&graph);
        MeasurementPattern { graph, flow, angles }
    }

    pub fn random<R: Rng + ?Sized>(graph: BrickworkGraph, rng: &mut R) -> Self {
        let angles = graph.measured().map(|j| (j, Octant::random(rng))).collect();
        let flow = compute_flow(&graph);
        MeasurementPattern { graph, flow, angles }
    }

    pub fn graph(&self) -> &BrickworkGraph {
        &self.graph
    }

    pub fn flow(&self) -> &Flow {
        &self.flow
    }

    pub fn angles(&self) -> &BTreeMap<Node, Octant> {
        &self.angles
    }

    /// `φ_j`; zero for outputs.
    pub fn angle(&self, j: Node) -> Octant {
        self.angles.get(&j).copied().unwrap_or_default()
    }

    pub fn n_wires(&self) -> usize {
        self.graph.n_wires()
    }

    pub fn same_size(&self, other: &MeasurementPattern) -> bool {
        self.graph == other.graph
    }
}

/// JSON form of a pattern. A single wire denotes a line graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternDocument {
    pub n_wires: usize,
    pub n_columns: usize,
    pub angles: Vec<AngleEntry>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleEntry {
    pub node: Node,
    pub octant: Octant,
}

impl TryFrom<PatternDocument> for MeasurementPattern {
    type Error = MbqcError;

    fn try_from(doc: PatternDocument) -> Result<Self, MbqcError> {
        let graph = if doc.n_wires == 1 {
            BrickworkGraph::line(doc.n_columns)?
        } else {
            BrickworkGraph::build(doc.n_wires, doc.n_columns)?
        };
        let mut angles = BTreeMap::new();
        for e in doc.angles {
            if angles.insert(e.node, e.octant).is_some() {
                return Err(MbqcError::DuplicateAngle(e.node));
            }
        }
        MeasurementPattern::new(graph, angles)
    }
}

impl From<MeasurementPattern> for PatternDocument {
    fn from(p: MeasurementPattern) -> Self {
        PatternDocument {
            n_wires: p.graph.n_wires(),
            n_columns: p.graph.n_columns(),
            angles: p
                .angles
                .iter()
                .map(|(&node, &octant)| AngleEntry { node, octant })
                .collect(),
        }
    }
}
