//! Worlds the server cannot tell apart from a real run.
//!
//! Every world drives the same [`ServerState`], so a deviating server acts
//! identically in all of them. In the EPR worlds each qubit the server
//! would receive is half of an EPR pair. With [`World::Teleport`] the
//! partner halves are measured at once, which turns the server's half into
//! the padded qubit it would have been sent. With [`World::Delayed`] the
//! oracle announces uniform angles and the pads are chosen afterwards
//! through [`solve_share`]. [`World::SimulatedServer`] splits the delayed
//! world between a simulator, which faces the server and runs the
//! honesty test on stand-in copies, and the ideal resource, which holds
//! the inputs and partner halves and settles the pads after the server is
//! done.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use super::HarnessError;
use crate::mbqc::{MeasurementPattern, Node};
use crate::oracle::{compose_delta, output_keys, phi_prime, solve_share, theta_term};
use crate::parties::{
    Body, Network, Party, Protocol, ProtocolConfig, QubitLabel, ServerInbound, ServerState, ServerStrategy, Transcript,
};
use crate::quantum::{Basis, Gate, Octant, Outcome, PureState, QubitId, MAX_QUBITS};
use crate::rsp::{theta_aux, theta_input, OutcomeVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum World {
    /// The full protocol with its honesty test.
    Real,
    /// Pads applied by teleportation.
    Teleport,
    /// Uniform angles first, pads solved afterwards.
    Delayed,
    /// Simulator plus ideal resource.
    SimulatedServer,
}

impl World {
    pub const ALL: [World; 4] = [World::Real, World::Teleport, World::Delayed, World::SimulatedServer];

    pub fn name(self) -> &'static str {
        match self {
            World::Real => "real",
            World::Teleport => "teleport",
            World::Delayed => "delayed",
            World::SimulatedServer => "simulated",
        }
    }
}

/// The classical record visible to the server.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ClassicalLog {
    pub t: BTreeMap<Node, OutcomeVector>,
    /// Announced angles in measurement order.
    pub deltas: Vec<(Node, Octant)>,
    /// Announced results in measurement order.
    pub b: Vec<(Node, Outcome)>,
}

impl ClassicalLog {
    pub fn from_server(server: &ServerState, order: &[Node]) -> Self {
        ClassicalLog {
            t: server.t_log().clone(),
            deltas: order
                .iter()
                .filter_map(|j| server.deltas().get(j).map(|&d| (*j, d)))
                .collect(),
            b: server.b_log().to_vec(),
        }
    }

    pub fn delta(&self, j: Node) -> Option<Octant> {
        self.deltas.iter().find(|(i, _)| *i == j).map(|&(_, d)| d)
    }

    pub fn result(&self, j: Node) -> Option<Outcome> {
        self.b.iter().find(|(i, _)| *i == j).map(|&(_, b)| b)
    }
}

/// One run of a world.
#[derive(Clone, Debug)]
pub struct WorldSample {
    pub world: World,
    pub log: ClassicalLog,
    /// Decrypted outputs of clients `1..=n`, then the reference.
    pub output: PureState,
    pub transcript: Transcript,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Timing {
    Immediate,
    Delayed,
    Deferred,
}

struct EprWorld<'a, R: ?Sized> {
    timing: Timing,
    pattern: &'a MeasurementPattern,
    net: Network,
    server: ServerState,
    rng: &'a mut R,
    m: usize,
    inputs: Vec<QubitId>,
    reference: Vec<QubitId>,
    partners: BTreeMap<(Node, usize), QubitId>,
    contributions: BTreeMap<(Node, usize), Octant>,
    theta: BTreeMap<Node, Octant>,
    teleported: BTreeMap<Node, Outcome>,
    a: BTreeMap<Node, Outcome>,
    r: BTreeMap<Node, Outcome>,
    s: BTreeMap<Node, Outcome>,
    outputs: Vec<QubitId>,
}

impl<'a, R: Rng + ?Sized> EprWorld<'a, R> {
    fn new(
        timing: Timing,
        inputs: &PureState,
        pattern: &'a MeasurementPattern,
        strategy: &ServerStrategy,
        m: usize,
        rng: &'a mut R,
    ) -> Result<Self, HarnessError> {
        let graph = pattern.graph();
        let n = graph.n_wires();
        if n < 2 {
            return Err(HarnessError::InvalidInput(
                "the EPR worlds need at least 2 clients".into(),
            ));
        }
        if inputs.num_qubits() < n {
            return Err(HarnessError::InvalidInput(format!(
                "{n} clients need {n} input qubits, got {}",
                inputs.num_qubits()
            )));
        }
        if timing != Timing::Immediate {
            // Every contribution's partner half stays entangled with the
            // graph until its node is settled.
            let needed = graph.num_nodes() + n * graph.q() + inputs.num_qubits() - n;
            if needed > MAX_QUBITS {
                return Err(HarnessError::BudgetExceeded(format!(
                    "this world holds {needed} qubits at once, above the simulator limit of {MAX_QUBITS}"
                )));
            }
        }
        let mut net = Network::new(false);
        let ids = net.register_mut().alloc(Party::Environment, inputs.clone());
        for k in 1..=n {
            let owner = if timing == Timing::Deferred {
                Party::Resource
            } else {
                Party::Client(k)
            };
            net.register_mut().transfer(&Party::Environment, owner, ids[k - 1])?;
        }
        let (peer, audience) = match timing {
            Timing::Deferred => (Party::Simulator, Vec::new()),
            _ => (Party::Oracle, (1..=n).map(Party::Client).collect()),
        };
        Ok(EprWorld {
            timing,
            pattern,
            net,
            server: ServerState::new(graph.clone(), strategy.clone(), peer, audience),
            rng,
            m,
            inputs: ids[..n].to_vec(),
            reference: ids[n..].to_vec(),
            partners: BTreeMap::new(),
            contributions: BTreeMap::new(),
            theta: BTreeMap::new(),
            teleported: BTreeMap::new(),
            a: BTreeMap::new(),
            r: BTreeMap::new(),
            s: BTreeMap::new(),
            outputs: Vec::new(),
        })
    }

    fn n(&self) -> usize {
        self.pattern.n_wires()
    }

    /// Who creates the EPR pairs on the client side.
    fn holder(&self, k: usize) -> Party {
        if self.timing == Timing::Deferred {
            Party::Simulator
        } else {
            Party::Client(k)
        }
    }

    /// Who talks classically to the server.
    fn classical(&self) -> Party {
        if self.timing == Timing::Deferred {
            Party::Simulator
        } else {
            Party::Oracle
        }
    }

    /// Who measures the partner halves.
    fn measurer(&self, k: usize) -> Party {
        if self.timing == Timing::Deferred {
            Party::Resource
        } else {
            Party::Client(k)
        }
    }

    fn epr(&mut self, owner: Party) -> (QubitId, QubitId) {
        let ids = self.net.register_mut().alloc(owner, PureState::epr());
        (ids[0], ids[1])
    }

    fn measure(&mut self, who: Party, id: QubitId, basis: Basis) -> Result<Outcome, HarnessError> {
        Ok(self.net.register_mut().measure(&who, id, basis, &mut *self.rng)?)
    }

    fn apply(&mut self, who: Party, gate: Gate<QubitId>) -> Result<(), HarnessError> {
        Ok(self.net.register_mut().apply(&who, gate)?)
    }

    fn prepare(&mut self) -> Result<(), HarnessError> {
        let graph = self.pattern.graph().clone();
        let n = self.n();
        for j in graph.measured() {
            for k in 1..=n {
                let holder = self.holder(k);
                if graph.is_input(j) && k == j {
                    let (ours, partner) = self.epr(holder);
                    let msg = ServerInbound::QubitTransfer {
                        label: QubitLabel::PaddedInput { node: j },
                        qubit: ours,
                    };
                    self.net.deliver(holder, &mut self.server, msg)?;
                    let psi = self.inputs[j - 1];
                    match self.timing {
                        Timing::Immediate => {
                            let theta = Octant::random(self.rng);
                            self.apply(holder, Gate::ZRot(psi, theta))?;
                            self.apply(
                                holder,
                                Gate::Cnot {
                                    control: psi,
                                    target: partner,
                                },
                            )?;
                            let a = self.measure(holder, partner, Basis::Computational)?;
                            let r = self.measure(holder, psi, Basis::Rotated(Octant::ZERO))?;
                            self.a.insert(j, a);
                            *self.teleported.entry(j).or_default() ^= r;
                            self.contributions.insert((j, k), theta + Octant::pi_times(r));
                        }
                        Timing::Delayed => {
                            self.apply(
                                holder,
                                Gate::Cnot {
                                    control: psi,
                                    target: partner,
                                },
                            )?;
                            let a = self.measure(holder, partner, Basis::Computational)?;
                            self.a.insert(j, a);
                        }
                        Timing::Deferred => {
                            self.partners.insert((j, k), partner);
                        }
                    }
                } else {
                    let copies = if self.timing == Timing::Deferred { self.m } else { 1 };
                    let mut halves = Vec::with_capacity(copies);
                    for copy in 0..copies {
                        let (ours, partner) = self.epr(holder);
                        let msg = ServerInbound::QubitTransfer {
                            label: QubitLabel::TestCopy {
                                node: j,
                                contributor: k,
                                copy,
                            },
                            qubit: ours,
                        };
                        self.net.deliver(holder, &mut self.server, msg)?;
                        halves.push(partner);
                    }
                    let survivor = self.stand_in_test(j, k, &halves)?;
                    let partner = halves[survivor];
                    if self.timing == Timing::Immediate {
                        let theta = Octant::random(self.rng);
                        let r = self.measure(holder, partner, Basis::Rotated(-theta))?;
                        *self.teleported.entry(j).or_default() ^= r;
                        self.contributions.insert((j, k), theta + Octant::pi_times(r));
                    } else {
                        self.partners.insert((j, k), partner);
                    }
                }
            }
            let t = self.server.prepare_node(&mut self.net, j, &mut *self.rng)?;
            if self.timing == Timing::Immediate {
                self.settle_teleported(j, &t)?;
            }
        }
        self.server.entangle(&mut self.net)?;
        Ok(())
    }

    /// Tests all but one copy; measuring a partner at `−β` with outcome `r`
    /// leaves the server's half in `|+_{β+πr}⟩`, so announcing `β + πr`
    /// always passes. Returns the survivor.
    fn stand_in_test(&mut self, j: Node, k: usize, halves: &[QubitId]) -> Result<usize, HarnessError> {
        let survivor = if halves.len() > 1 {
            self.rng.random_range(0..halves.len())
        } else {
            0
        };
        let holder = self.holder(k);
        for (copy, &partner) in halves.iter().enumerate() {
            if copy == survivor {
                continue;
            }
            let beta = Octant::random(self.rng);
            let r = self.measure(holder, partner, Basis::Rotated(-beta))?;
            let msg = ServerInbound::TestBasis {
                node: j,
                contributor: k,
                copy,
                basis: beta + Octant::pi_times(r),
            };
            self.net.deliver(self.classical(), &mut self.server, msg)?;
            self.server.run_tests(&mut self.net, &mut *self.rng)?;
        }
        let msg = ServerInbound::TestVerdict {
            node: j,
            contributor: k,
            survivor,
            accepted: true,
        };
        self.net.deliver(self.classical(), &mut self.server, msg)?;
        Ok(survivor)
    }

    fn settle_teleported(&mut self, j: Node, t: &OutcomeVector) -> Result<(), HarnessError> {
        let n = self.n();
        let shares: Vec<Octant> = (1..=n).map(|k| self.contributions[&(j, k)]).collect();
        let a = self.pad(j);
        let theta = if self.pattern.graph().is_input(j) {
            theta_input(j, &shares, t, a)?
        } else {
            theta_aux(&shares, t)?
        };
        self.theta.insert(j, theta);
        self.r.insert(j, self.teleported[&j]);
        Ok(())
    }

    fn pad(&self, j: Node) -> Outcome {
        self.a.get(&j).copied().unwrap_or_default()
    }

    fn phi_prime(&self, j: Node) -> Octant {
        phi_prime(
            self.pattern,
            j,
            |i| self.pad(i),
            |i| self.s.get(&i).copied().unwrap_or_default(),
        )
    }

    /// Chooses pads consistent with the announced `δ_j` and measures the
    /// partner halves in them.
    fn resolve(&mut self, j: Node) -> Result<(), HarnessError> {
        let n = self.n();
        let input = self.pattern.graph().is_input(j);
        if self.timing == Timing::Deferred && input {
            let (psi, partner) = (self.inputs[j - 1], self.partners[&(j, j)]);
            self.apply(
                Party::Resource,
                Gate::Cnot {
                    control: psi,
                    target: partner,
                },
            )?;
            let a = self.measure(Party::Resource, partner, Basis::Computational)?;
            self.a.insert(j, a);
        }
        let delta = self.server.deltas()[&j];
        let b = self
            .server
            .b_log()
            .iter()
            .find(|(i, _)| *i == j)
            .map(|&(_, b)| b)
            .unwrap_or_default();
        let target = delta - self.phi_prime(j);
        let mut shares: Vec<Octant> = (0..n).map(|_| Octant::random(self.rng)).collect();
        let node_input = input.then_some(j);
        let t = self.server.t_log()[&j].clone();
        let position = node_input.unwrap_or(n);
        shares[position - 1] = solve_share(node_input, &shares, &t, self.pad(j), target)?;
        let mut r = Outcome::ZERO;
        for k in 1..=n {
            let id = if input && k == j {
                self.inputs[j - 1]
            } else {
                self.partners[&(j, k)]
            };
            r ^= self.measure(self.measurer(k), id, Basis::Rotated(-shares[k - 1]))?;
        }
        self.r.insert(j, r);
        self.s.insert(j, b ^ r);
        Ok(())
    }

    fn compute(&mut self) -> Result<(), HarnessError> {
        let order = self.pattern.flow().order().to_vec();
        for &j in &order {
            let delta = match self.timing {
                Timing::Immediate => {
                    let theta = self.theta[&j];
                    compose_delta(self.phi_prime(j), theta_term(theta, self.pad(j)), self.r[&j])
                }
                _ => Octant::random(self.rng),
            };
            let msg = ServerInbound::DeltaAnnounce { node: j, delta };
            self.net.deliver(self.classical(), &mut self.server, msg)?;
            if self.timing != Timing::Deferred {
                let audience: Vec<Party> = (1..=self.n()).map(Party::Client).collect();
                self.net.broadcast(Party::Oracle, &audience, msg.body(None));
            }
            let b = self.server.measure_node(&mut self.net, j, &mut *self.rng)?;
            match self.timing {
                Timing::Immediate => {
                    self.s.insert(j, b ^ self.r[&j]);
                }
                Timing::Delayed => self.resolve(j)?,
                Timing::Deferred => {}
            }
        }
        Ok(())
    }

    fn deliver(&mut self) -> Result<(), HarnessError> {
        let graph = self.pattern.graph().clone();
        let q = graph.q();
        let mut received = Vec::new();
        for j in graph.outputs() {
            let k = j - q;
            let to = if self.timing == Timing::Deferred {
                Party::Simulator
            } else {
                Party::Client(k)
            };
            let id = self.server.release_output(&mut self.net, j, to)?;
            received.push((j, k, id));
        }
        let deferred = self.timing == Timing::Deferred;
        let owner = |k: usize| if deferred { Party::Resource } else { Party::Client(k) };
        if self.timing == Timing::Deferred {
            for &(node, _, id) in &received {
                self.net
                    .move_qubit(Party::Simulator, Party::Resource, id, |amplitudes| Body::OutputQubit {
                        node,
                        qubit: id,
                        amplitudes,
                    })?;
            }
            let partners: Vec<QubitId> = self.partners.values().copied().collect();
            for id in partners {
                self.net
                    .register_mut()
                    .transfer(&Party::Simulator, Party::Resource, id)?;
            }
            for j in self.pattern.flow().order().to_vec() {
                self.resolve(j)?;
            }
        }
        for (j, k, id) in received {
            let (sx, sz) = output_keys(
                self.pattern,
                j,
                |i| self.pad(i),
                |i| self.s.get(&i).copied().unwrap_or_default(),
            );
            let who = owner(k);
            if sx.is_one() {
                self.apply(who, Gate::X(id))?;
            }
            if sz.is_one() {
                self.apply(who, Gate::Z(id))?;
            }
            if self.timing == Timing::Deferred {
                self.net
                    .register_mut()
                    .transfer(&Party::Resource, Party::Client(k), id)?;
            } else {
                self.net
                    .post(Party::Oracle, Party::Client(k), Body::OutputKeys { node: j, sx, sz });
            }
            self.outputs.push(id);
        }
        Ok(())
    }

    fn run(mut self, world: World) -> Result<WorldSample, HarnessError> {
        self.prepare()?;
        self.compute()?;
        self.deliver()?;
        let mut ids = self.outputs.clone();
        ids.extend(&self.reference);
        let output = self.net.register().joint_state(&ids)?;
        let log = ClassicalLog::from_server(&self.server, self.pattern.flow().order());
        Ok(WorldSample {
            world,
            log,
            output,
            transcript: self.net.into_transcript(),
        })
    }
}

/// One run of `world` against a server following `strategy`. `m` is the
/// copy count of the honesty test, used by the real and simulated worlds.
pub fn run_world<R: Rng + ?Sized>(
    world: World,
    inputs: &PureState,
    pattern: &MeasurementPattern,
    strategy: &ServerStrategy,
    m: usize,
    mut rng: &mut R,
) -> Result<WorldSample, HarnessError> {
    let timing = match world {
        World::Real => {
            let config = ProtocolConfig {
                m_copies: m,
                server: strategy.clone(),
                ..ProtocolConfig::default()
            };
            let run = Protocol::new(inputs, pattern.clone(), &config, ChaCha20Rng::from_rng(&mut rng))?.run()?;
            return Ok(WorldSample {
                world,
                log: ClassicalLog::from_server(&run.server, pattern.flow().order()),
                output: run.output,
                transcript: run.transcript,
            });
        }
        World::Teleport => Timing::Immediate,
        World::Delayed => Timing::Delayed,
        World::SimulatedServer => {
            if m < 2 {
                return Err(HarnessError::InvalidInput(format!(
                    "the honesty test needs at least 2 copies, got {m}"
                )));
            }
            Timing::Deferred
        }
    };
    EprWorld::new(timing, inputs, pattern, strategy, m, rng)?.run(world)
}

/// Which EPR-based variant of the protocol to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum IntermediateVersion {
    Teleport,
    Delayed,
}

/// Runs an intermediate protocol with an honest server.
pub fn run_intermediate_protocol<R: Rng + ?Sized>(
    version: IntermediateVersion,
    inputs: &PureState,
    pattern: &MeasurementPattern,
    rng: &mut R,
) -> Result<WorldSample, HarnessError> {
    let world = match version {
        IntermediateVersion::Teleport => World::Teleport,
        IntermediateVersion::Delayed => World::Delayed,
    };
    run_world(world, inputs, pattern, &ServerStrategy::honest(), 2, rng)
}

/// Runs the simulator and ideal resource against `adversary`.
pub fn run_simulated_server_world<R: Rng + ?Sized>(
    adversary: &ServerStrategy,
    inputs: &PureState,
    pattern: &MeasurementPattern,
    m: usize,
    rng: &mut R,
) -> Result<WorldSample, HarnessError> {
    run_world(World::SimulatedServer, inputs, pattern, adversary, m, rng)
}

/// Samples a computational-basis measurement of `qubits`; bit `i` of the
/// result is the outcome of `qubits[i]`.
pub fn measure_bits<R: Rng + ?Sized>(state: &PureState, qubits: &[usize], rng: &mut R) -> u64 {
    let probs = state.amplitudes().iter().map(|c| c.norm_sqr()).collect::<Vec<_>>();
    let mut u: f64 = rng.random();
    let mut index = probs.len() - 1;
    for (i, p) in probs.iter().enumerate() {
        if u < *p {
            index = i;
            break;
        }
        u -= p;
    }
    let n = state.num_qubits();
    qubits.iter().enumerate().fold(0u64, |acc, (pos, &q)| {
        acc | (((index >> (n - 1 - q)) & 1) as u64) << pos
    })
}
