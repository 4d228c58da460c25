use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Body, Network, Party, PartyError, Phase, QubitLabel, ServerInbound};
use crate::mbqc::{BrickworkGraph, Node};
use crate::quantum::{Basis, Gate, Octant, Outcome, Pauli, PureState, QubitId};
use crate::rsp::{aux_schedule, execute_schedule, input_schedule, OutcomeVector};

/// Deviations of a dishonest server. Every one acts on qubits or values
/// the server legitimately holds. The default is honest.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServerStrategy {
    /// Measure node `j` at `δ_j + offset` instead of `δ_j`.
    pub measure_offsets: BTreeMap<Node, Octant>,
    /// Announce `b_j ⊕ 1` instead of `b_j`.
    pub flip_announcements: BTreeSet<Node>,
    /// Paulis applied to output qubits just before release.
    pub output_paulis: Vec<(Node, Pauli)>,
}

impl ServerStrategy {
    pub fn honest() -> Self {
        Self::default()
    }

    pub fn is_honest(&self) -> bool {
        *self == Self::default()
    }
}

/// The server. It knows the graph's shape and what it is sent, nothing
/// more.
#[derive(Clone, Debug)]
pub struct ServerState {
    graph: BrickworkGraph,
    strategy: ServerStrategy,
    peer: Party,
    audience: Vec<Party>,
    phase: Phase,
    inputs: BTreeMap<Node, QubitId>,
    copies: BTreeMap<(Node, usize, usize), QubitId>,
    pending_tests: Vec<(Node, usize, usize, Octant)>,
    survivors: BTreeMap<(Node, usize), usize>,
    held: BTreeMap<Node, QubitId>,
    deltas: BTreeMap<Node, Octant>,
    t_log: BTreeMap<Node, OutcomeVector>,
    b_log: Vec<(Node, Outcome)>,
}

impl ServerState {
    /// `peer` receives test outcomes, outcome vectors and results; the
    /// `audience` also receives results.
    pub fn new(graph: BrickworkGraph, strategy: ServerStrategy, peer: Party, audience: Vec<Party>) -> Self {
        ServerState {
            graph,
            strategy,
            peer,
            audience,
            phase: Phase::Preparation,
            inputs: BTreeMap::new(),
            copies: BTreeMap::new(),
            pending_tests: Vec::new(),
            survivors: BTreeMap::new(),
            held: BTreeMap::new(),
            deltas: BTreeMap::new(),
            t_log: BTreeMap::new(),
            b_log: Vec::new(),
        }
    }

    pub fn graph(&self) -> &BrickworkGraph {
        &self.graph
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Qubits currently kept for graph nodes.
    pub fn held(&self) -> &BTreeMap<Node, QubitId> {
        &self.held
    }

    pub fn deltas(&self) -> &BTreeMap<Node, Octant> {
        &self.deltas
    }

    pub fn t_log(&self) -> &BTreeMap<Node, OutcomeVector> {
        &self.t_log
    }

    /// Announced results, in measurement order.
    pub fn b_log(&self) -> &[(Node, Outcome)] {
        &self.b_log
    }

    fn expect(&self, phase: Phase) -> Result<(), PartyError> {
        if self.phase == phase {
            Ok(())
        } else {
            Err(PartyError::WrongPhase {
                party: Party::Server,
                expected: phase,
                actual: self.phase,
            })
        }
    }

    pub(crate) fn accept(&mut self, msg: ServerInbound) -> Result<(), PartyError> {
        match msg {
            ServerInbound::QubitTransfer { label, qubit } => {
                self.expect(Phase::Preparation)?;
                let n = self.graph.n_wires();
                match label {
                    QubitLabel::PaddedInput { node } if self.graph.is_input(node) => {
                        self.inputs.insert(node, qubit);
                    }
                    QubitLabel::TestCopy {
                        node,
                        contributor,
                        copy,
                    } if self.graph.contains(node) && !self.graph.is_output(node) && (1..=n).contains(&contributor) => {
                        self.copies.insert((node, contributor, copy), qubit);
                    }
                    _ => return Err(PartyError::BadLabel(label)),
                }
            }
            ServerInbound::TestBasis {
                node,
                contributor,
                copy,
                basis,
            } => {
                self.pending_tests.push((node, contributor, copy, basis));
            }
            ServerInbound::TestVerdict {
                node,
                contributor,
                survivor,
                ..
            } => {
                self.survivors.insert((node, contributor), survivor);
            }
            ServerInbound::DeltaAnnounce { node, delta } => {
                self.deltas.insert(node, delta);
            }
        }
        Ok(())
    }

    /// Measures every copy whose basis has been announced and reports the
    /// outcomes to the peer.
    pub fn run_tests<R: Rng + ?Sized>(&mut self, net: &mut Network, rng: &mut R) -> Result<Vec<Outcome>, PartyError> {
        self.expect(Phase::Preparation)?;
        let pending = std::mem::take(&mut self.pending_tests);
        let mut results = Vec::with_capacity(pending.len());
        for (node, contributor, copy, basis) in pending {
            let id = self
                .copies
                .remove(&(node, contributor, copy))
                .ok_or(PartyError::MissingQubit {
                    node,
                    what: "test copy",
                })?;
            let outcome = net
                .register_mut()
                .measure(&Party::Server, id, Basis::Rotated(basis), rng)?;
            net.post(
                Party::Server,
                self.peer,
                Body::TestOutcome {
                    node,
                    contributor,
                    copy,
                    outcome,
                },
            );
            results.push(outcome);
        }
        Ok(results)
    }

    /// Fuses the qubits received for `node` and keeps the survivor. A
    /// single client's qubit is kept as it is.
    pub fn prepare_node<R: Rng + ?Sized>(
        &mut self,
        net: &mut Network,
        node: Node,
        rng: &mut R,
    ) -> Result<OutcomeVector, PartyError> {
        self.expect(Phase::Preparation)?;
        let n = self.graph.n_wires();
        let input = self.graph.is_input(node);
        let mut regs = BTreeMap::new();
        for k in 1..=n {
            let id = if input && k == node {
                self.inputs.remove(&node).ok_or(PartyError::MissingQubit {
                    node,
                    what: "padded input",
                })?
            } else {
                let copy = *self.survivors.get(&(node, k)).ok_or(PartyError::MissingQubit {
                    node,
                    what: "surviving copy",
                })?;
                self.copies.remove(&(node, k, copy)).ok_or(PartyError::MissingQubit {
                    node,
                    what: "surviving copy",
                })?
            };
            regs.insert(k, id);
        }
        let t = if n == 1 {
            OutcomeVector::new()
        } else {
            let schedule = if input {
                input_schedule(node, n)?
            } else {
                aux_schedule(n)?
            };
            execute_schedule(net.register_mut(), &Party::Server, &regs, &schedule, |reg, _, id| {
                reg.measure(&Party::Server, id, Basis::Computational, rng)
            })?
        };
        let keep = if input { node } else { n };
        self.held.insert(node, regs[&keep]);
        if n > 1 {
            let mut receivers = vec![self.peer];
            receivers.extend(&self.audience);
            net.broadcast(Party::Server, &receivers, Body::OutcomeVector { node, t: t.clone() });
        }
        self.t_log.insert(node, t.clone());
        Ok(t)
    }

    /// Adds `|+⟩` output qubits and applies CZ on every edge.
    pub fn entangle(&mut self, net: &mut Network) -> Result<(), PartyError> {
        self.expect(Phase::Preparation)?;
        for j in self.graph.measured() {
            if !self.held.contains_key(&j) {
                return Err(PartyError::MissingQubit {
                    node: j,
                    what: "prepared qubit",
                });
            }
        }
        for j in self.graph.outputs() {
            let id = net
                .register_mut()
                .alloc_one(Party::Server, PureState::plus(Octant::ZERO))?;
            self.held.insert(j, id);
        }
        for &(a, b) in self.graph.edges() {
            net.register_mut()
                .apply(&Party::Server, Gate::Cz(self.held[&a], self.held[&b]))?;
        }
        self.phase = Phase::Computation;
        Ok(())
    }

    /// Measures `node` at the received angle and announces the result.
    pub fn measure_node<R: Rng + ?Sized>(
        &mut self,
        net: &mut Network,
        node: Node,
        rng: &mut R,
    ) -> Result<Outcome, PartyError> {
        self.expect(Phase::Computation)?;
        let delta = *self.deltas.get(&node).ok_or(PartyError::MissingDelta(node))?;
        let id = self.held.remove(&node).ok_or(PartyError::MissingQubit {
            node,
            what: "graph qubit",
        })?;
        let offset = self.strategy.measure_offsets.get(&node).copied().unwrap_or_default();
        let b = net
            .register_mut()
            .measure(&Party::Server, id, Basis::Rotated(delta + offset), rng)?;
        let announced = b ^ Outcome::from(self.strategy.flip_announcements.contains(&node));
        self.b_log.push((node, announced));
        let mut receivers = vec![self.peer];
        receivers.extend(&self.audience);
        net.broadcast(Party::Server, &receivers, Body::ResultBroadcast { node, b: announced });
        if self.b_log.len() == self.graph.q() {
            self.phase = Phase::Output;
        }
        Ok(announced)
    }

    /// Sends output qubit `node` to `to`.
    pub fn release_output(&mut self, net: &mut Network, node: Node, to: Party) -> Result<QubitId, PartyError> {
        self.expect(Phase::Output)?;
        let id = self.held.remove(&node).ok_or(PartyError::MissingQubit {
            node,
            what: "output qubit",
        })?;
        for &(j, p) in &self.strategy.output_paulis {
            if j == node {
                net.register_mut().apply(&Party::Server, p.on(id))?;
            }
        }
        net.move_qubit(Party::Server, to, id, |amplitudes| Body::OutputQubit {
            node,
            qubit: id,
            amplitudes,
        })?;
        if self.held.is_empty() {
            self.phase = Phase::Done;
        }
        Ok(id)
    }
}
