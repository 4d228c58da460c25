//! Dishonest client coalitions: what they see in a real run, and a
//! simulator that produces the same view from the ideal functionality.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use super::HarnessError;
use crate::mbqc::{reference_execute, BrickworkGraph, MeasurementPattern, Node};
use crate::oracle::{output_keys, share_secret, verify_client, OracleLedger, SecretShare, SecretTag, SecretValue};
use crate::parties::{
    AbortReason, AbortRecord, AbortedRun, Body, ClientScript, ClientState, Network, Party, PartyError, Phase,
    ProtocolConfig, QubitLabel, Transcript,
};
use crate::quantum::{Basis, Gate, Octant, Outcome, PureState, QubitId};
use crate::rsp::{measured_registers, OutcomeVector};

/// Clients controlled by the adversary, with their deviations.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Coalition {
    members: BTreeSet<usize>,
    scripts: BTreeMap<usize, ClientScript>,
}

impl Coalition {
    /// A coalition of at least one and at most `n − 1` of clients `1..=n`.
    pub fn new(members: impl IntoIterator<Item = usize>, n: usize) -> Result<Self, HarnessError> {
        let members: BTreeSet<usize> = members.into_iter().collect();
        if members.is_empty() || members.len() >= n {
            return Err(HarnessError::InvalidCoalition(format!(
                "a coalition needs between 1 and {} of {n} clients, got {}",
                n.saturating_sub(1),
                members.len()
            )));
        }
        if let Some(&k) = members.iter().find(|&&k| k == 0 || k > n) {
            return Err(HarnessError::InvalidCoalition(format!("no client {k}")));
        }
        Ok(Coalition {
            members,
            scripts: BTreeMap::new(),
        })
    }

    pub fn with_script(mut self, k: usize, script: ClientScript) -> Result<Self, HarnessError> {
        if !self.members.contains(&k) {
            return Err(HarnessError::InvalidCoalition(format!(
                "client {k} is not in the coalition"
            )));
        }
        self.scripts.insert(k, script);
        Ok(self)
    }

    pub fn members(&self) -> &BTreeSet<usize> {
        &self.members
    }

    pub fn contains(&self, k: usize) -> bool {
        self.members.contains(&k)
    }

    pub fn script(&self, k: usize) -> ClientScript {
        self.scripts.get(&k).cloned().unwrap_or_default()
    }

    fn parties(&self) -> Vec<Party> {
        self.members.iter().map(|&k| Party::Client(k)).collect()
    }
}

/// The classical messages a coalition receives, beyond shares.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CoalitionView {
    pub t: Vec<(Node, OutcomeVector)>,
    pub deltas: Vec<(Node, Octant)>,
    pub b: Vec<(Node, Outcome)>,
    /// `(output node, s_X, s_Z)` for every coalition output.
    pub keys: Vec<(Node, Outcome, Outcome)>,
    /// `(node, contributor, accepted)` for every tested coalition copy set.
    pub verdicts: Vec<(Node, usize, bool)>,
    pub aborted: bool,
}

/// Extracts the coalition's view. Broadcast values are read from the
/// lowest-numbered member.
pub fn coalition_view(transcript: &Transcript, coalition: &Coalition) -> CoalitionView {
    let mut view = CoalitionView {
        aborted: transcript.abort().is_some(),
        ..CoalitionView::default()
    };
    let first = coalition.members.iter().next().copied().map(Party::Client);
    for msg in transcript.messages() {
        let Party::Client(k) = msg.receiver else { continue };
        if !coalition.contains(k) {
            continue;
        }
        let is_first = Some(msg.receiver) == first;
        match &msg.body {
            Body::OutcomeVector { node, t } if is_first => view.t.push((*node, t.clone())),
            Body::DeltaAnnounce { node, delta } if is_first => view.deltas.push((*node, *delta)),
            Body::ResultBroadcast { node, b } if is_first => view.b.push((*node, *b)),
            Body::OutputKeys { node, sx, sz } => view.keys.push((*node, *sx, *sz)),
            Body::TestVerdict {
                node,
                contributor,
                accepted,
                ..
            } => view.verdicts.push((*node, *contributor, *accepted)),
            _ => {}
        }
    }
    view
}

/// One run of a coalition world.
#[derive(Clone, Debug)]
pub struct CoalitionRun {
    pub view: CoalitionView,
    /// Outputs of clients `1..=n` then the reference; `None` after an abort.
    pub output: Option<PureState>,
    pub transcript: Transcript,
}

/// The real protocol with the coalition following its scripts.
pub fn run_real_coalition_world<R: Rng + ?Sized>(
    coalition: &Coalition,
    inputs: &PureState,
    pattern: &MeasurementPattern,
    m: usize,
    mut rng: &mut R,
) -> Result<CoalitionRun, HarnessError> {
    let config = ProtocolConfig {
        m_copies: m,
        client_scripts: coalition.scripts.clone(),
        ..ProtocolConfig::default()
    };
    let rng = ChaCha20Rng::from_rng(&mut rng);
    match crate::parties::run_protocol_with_rng(inputs, pattern, &config, rng) {
        Ok(run) => Ok(CoalitionRun {
            view: coalition_view(&run.transcript, coalition),
            output: Some(run.output),
            transcript: run.transcript,
        }),
        Err(PartyError::Aborted(aborted)) => Ok(CoalitionRun {
            view: coalition_view(&aborted.transcript, coalition),
            output: None,
            transcript: aborted.transcript,
        }),
        Err(e) => Err(e.into()),
    }
}

/// Plays the server, the oracle and every honest client towards the
/// coalition, knowing only the graph's shape. It learns the coalition's
/// inputs by undoing their pads, obtains their outputs from the ideal
/// resource and re-encrypts them under keys consistent with the results it
/// announced. Angles are uniform, shifted by `π` times the coalition's own
/// masks so that a chosen mask moves the angle exactly as in a real run.
struct ClientSimulator<'a, R: ?Sized> {
    pattern: &'a MeasurementPattern,
    coalition: &'a Coalition,
    net: Network,
    clients: BTreeMap<usize, ClientState>,
    ledger: OracleLedger,
    rng: &'a mut R,
    m: usize,
    padded: BTreeMap<usize, QubitId>,
    honest_inputs: BTreeMap<usize, QubitId>,
    reference: Vec<QubitId>,
    s: BTreeMap<Node, Outcome>,
}

impl<'a, R: Rng + ?Sized> ClientSimulator<'a, R> {
    fn n(&self) -> usize {
        self.pattern.n_wires()
    }

    fn share_holder(&self, owner: usize) -> Party {
        if self.coalition.contains(owner) {
            Party::Client(owner)
        } else {
            Party::Simulator
        }
    }

    fn deal(&mut self, dealer: usize, tag: SecretTag, value: SecretValue) -> Result<(), HarnessError> {
        let shares = share_secret(tag, value, self.n(), &mut *self.rng)?;
        let from = self.share_holder(dealer);
        for share in shares {
            let owner = share.owner;
            let to = self.share_holder(owner);
            if owner != dealer && (self.coalition.contains(owner) || self.coalition.contains(dealer)) {
                self.net.post(from, to, Body::ShareDistribution { share });
            }
            if let Some(c) = self.clients.get_mut(&owner) {
                c.hold(share);
                self.net.post(to, Party::Simulator, Body::ShareDistribution { share });
            }
            self.ledger.register(share)?;
        }
        Ok(())
    }

    fn abort(&mut self, record: AbortRecord) -> HarnessError {
        let members = self.coalition.parties();
        self.net
            .broadcast(Party::Simulator, &members, Body::Abort { record: record.clone() });
        self.net.transcript_mut().set_abort(record.clone());
        HarnessError::Party(PartyError::Aborted(Box::new(AbortedRun {
            record,
            transcript: self.net.transcript().clone(),
        })))
    }

    fn test(&mut self, node: Node, k: usize, copies: &BTreeMap<usize, QubitId>) -> Result<(), HarnessError> {
        let shares: Vec<Vec<SecretShare>> = (0..self.m)
            .map(|copy| {
                self.ledger.shares(SecretTag::CopyAngle {
                    node,
                    contributor: k,
                    copy,
                })
            })
            .collect();
        let mut pick = ChaCha20Rng::from_rng(&mut self.rng);
        let ClientSimulator { net, rng, .. } = self;
        let verdict = verify_client(
            &shares,
            |copy, basis| {
                let id = copies[&copy];
                Ok(net
                    .register_mut()
                    .measure(&Party::Simulator, id, Basis::Rotated(basis), &mut **rng)?)
            },
            &mut pick,
        )?;
        let accepted = verdict.accepted();
        self.net.post(
            Party::Simulator,
            Party::Client(k),
            Body::TestVerdict {
                node,
                contributor: k,
                survivor: verdict.survivor,
                accepted,
            },
        );
        if accepted {
            Ok(())
        } else {
            Err(self.abort(AbortRecord {
                step: format!("preparation of node {node}"),
                reason: AbortReason::ClientRejected {
                    client: k,
                    node,
                    failed_copies: verdict.rejections(),
                },
            }))
        }
    }

    fn prepare(&mut self) -> Result<(), HarnessError> {
        let graph = self.pattern.graph().clone();
        let n = self.n();
        let members = self.coalition.parties();
        for j in graph.measured() {
            let input = graph.is_input(j);
            for k in 1..=n {
                if let Some(client) = self.clients.get_mut(&k) {
                    let me = client.party();
                    let mut copies = BTreeMap::new();
                    if input && k == j {
                        let id = client.pad_input(&mut self.net)?;
                        self.net
                            .transfer(me, Party::Simulator, QubitLabel::PaddedInput { node: j }, id)?;
                        self.padded.insert(k, id);
                    } else {
                        for (copy, id) in client.prepare_copies(&mut self.net, j)? {
                            let label = QubitLabel::TestCopy {
                                node: j,
                                contributor: k,
                                copy,
                            };
                            self.net.transfer(me, Party::Simulator, label, id)?;
                            copies.insert(copy, id);
                        }
                    }
                    for (tag, value) in self.clients[&k].preparation_secrets(j) {
                        self.deal(k, tag, value)?;
                    }
                    if !(input && k == j) {
                        self.test(j, k, &copies)?;
                    }
                } else {
                    let mut secrets: Vec<(SecretTag, SecretValue)> = Vec::new();
                    if input && k == j {
                        secrets.push((SecretTag::InputPad { node: j }, Outcome::random(self.rng).into()));
                        secrets.push((SecretTag::InputAngle { node: j }, Octant::random(self.rng).into()));
                    } else {
                        for copy in 0..self.m {
                            let tag = SecretTag::CopyAngle {
                                node: j,
                                contributor: k,
                                copy,
                            };
                            secrets.push((tag, Octant::random(self.rng).into()));
                        }
                    }
                    for (tag, value) in secrets {
                        self.deal(k, tag, value)?;
                    }
                }
            }
            let mut t = OutcomeVector::new();
            for reg in measured_registers(input.then_some(j), n)? {
                t.insert(reg, Outcome::random(self.rng));
            }
            self.net
                .broadcast(Party::Simulator, &members, Body::OutcomeVector { node: j, t });
        }
        for c in self.clients.values_mut() {
            c.set_phase(Phase::Computation);
        }
        Ok(())
    }

    fn compute(&mut self) -> Result<(), HarnessError> {
        let members = self.coalition.parties();
        for j in self.pattern.flow().order().to_vec() {
            let mut coalition_mask = Outcome::ZERO;
            for k in 1..=self.n() {
                let r = match self.clients.get(&k) {
                    Some(c) => {
                        coalition_mask ^= c.mask(j);
                        c.mask(j)
                    }
                    None => Outcome::random(self.rng),
                };
                self.deal(
                    k,
                    SecretTag::MaskBit {
                        node: j,
                        contributor: k,
                    },
                    r.into(),
                )?;
            }
            let delta = Octant::random(self.rng) + Octant::pi_times(coalition_mask);
            self.net
                .broadcast(Party::Simulator, &members, Body::DeltaAnnounce { node: j, delta });
            let b = Outcome::random(self.rng);
            self.net
                .broadcast(Party::Simulator, &members, Body::ResultBroadcast { node: j, b });
            for c in self.clients.values_mut() {
                c.record_result(j, b);
            }
            self.s.insert(j, b ^ self.ledger.mask(j)?);
        }
        for c in self.clients.values_mut() {
            c.set_phase(Phase::Output);
        }
        Ok(())
    }

    /// Undoes the coalition's pads, evaluates the ideal functionality and
    /// returns the coalition's outputs, re-encrypted.
    fn deliver(&mut self) -> Result<Vec<QubitId>, HarnessError> {
        let n = self.n();
        let q = self.pattern.graph().q();
        for (&k, &id) in &self.padded {
            let a = self.ledger.bit(SecretTag::InputPad { node: k })?;
            let theta = self.ledger.angle(SecretTag::InputAngle { node: k })?;
            let reg = self.net.register_mut();
            if a.is_one() {
                reg.apply(&Party::Simulator, Gate::X(id))?;
            }
            reg.apply(&Party::Simulator, Gate::ZRot(id, -theta))?;
            reg.transfer(&Party::Simulator, Party::Resource, id)?;
        }
        let mut ids: Vec<QubitId> = (1..=n)
            .map(|k| {
                self.padded
                    .get(&k)
                    .or(self.honest_inputs.get(&k))
                    .copied()
                    .expect("every client has an input")
            })
            .collect();
        for &id in &self.reference {
            self.net
                .register_mut()
                .transfer(&Party::Environment, Party::Resource, id)?;
        }
        ids.extend(&self.reference);
        let joint = self.net.register_mut().take(&Party::Resource, &ids)?;
        let result = reference_execute(self.pattern, &joint, &mut *self.rng)?;
        let fresh = self.net.register_mut().alloc(Party::Resource, result);
        self.reference = fresh[n..].to_vec();
        for &id in &self.reference {
            self.net
                .register_mut()
                .transfer(&Party::Resource, Party::Environment, id)?;
        }
        let skeleton = self.ledger.pattern().clone();
        for k in 1..=n {
            let id = fresh[k - 1];
            let Some(client) = self.clients.get_mut(&k) else {
                self.net
                    .register_mut()
                    .transfer(&Party::Resource, Party::Client(k), id)?;
                continue;
            };
            let j = q + k;
            self.net
                .register_mut()
                .transfer(&Party::Resource, Party::Simulator, id)?;
            let ledger = &self.ledger;
            let s = &self.s;
            let (sx, sz) = output_keys(
                &skeleton,
                j,
                |i| ledger.pad(i).unwrap_or_default(),
                |i| s.get(&i).copied().unwrap_or_default(),
            );
            let reg = self.net.register_mut();
            if sz.is_one() {
                reg.apply(&Party::Simulator, Gate::Z(id))?;
            }
            if sx.is_one() {
                reg.apply(&Party::Simulator, Gate::X(id))?;
            }
            self.net
                .move_qubit(Party::Simulator, Party::Client(k), id, |amplitudes| Body::OutputQubit {
                    node: j,
                    qubit: id,
                    amplitudes,
                })?;
            client.receive_output(id);
            self.net
                .post(Party::Simulator, Party::Client(k), Body::OutputKeys { node: j, sx, sz });
            client.decrypt(&mut self.net, sx, sz)?;
        }
        Ok(fresh[..n].to_vec())
    }
}

/// The ideal world: the coalition faces the simulator.
pub fn run_simulated_client_world<R: Rng + ?Sized>(
    coalition: &Coalition,
    inputs: &PureState,
    pattern: &MeasurementPattern,
    m: usize,
    rng: &mut R,
) -> Result<CoalitionRun, HarnessError> {
    let graph = pattern.graph();
    let n = graph.n_wires();
    if inputs.num_qubits() < n {
        return Err(HarnessError::InvalidInput(format!(
            "{n} clients need {n} input qubits, got {}",
            inputs.num_qubits()
        )));
    }
    if m < 2 {
        return Err(HarnessError::InvalidInput(format!(
            "the honesty test needs at least 2 copies, got {m}"
        )));
    }
    if coalition.members.iter().any(|&k| k > n) || coalition.members.len() >= n {
        return Err(HarnessError::InvalidCoalition(format!(
            "coalition does not fit {n} clients"
        )));
    }
    let mut net = Network::new(false);
    let ids = net.register_mut().alloc(Party::Environment, inputs.clone());
    let mut clients = BTreeMap::new();
    let mut honest_inputs = BTreeMap::new();
    for k in 1..=n {
        if coalition.contains(k) {
            net.register_mut()
                .transfer(&Party::Environment, Party::Client(k), ids[k - 1])?;
            clients.insert(
                k,
                ClientState::new(k, ids[k - 1], graph, m, coalition.script(k), &mut *rng),
            );
        } else {
            net.register_mut()
                .transfer(&Party::Environment, Party::Resource, ids[k - 1])?;
            honest_inputs.insert(k, ids[k - 1]);
        }
    }
    let mut sim = ClientSimulator {
        pattern,
        coalition,
        net,
        clients,
        ledger: OracleLedger::new(n, MeasurementPattern::zero(graph.clone()))?,
        rng,
        m,
        padded: BTreeMap::new(),
        honest_inputs,
        reference: ids[n..].to_vec(),
        s: BTreeMap::new(),
    };
    let outcome = sim.prepare().and_then(|_| sim.compute()).and_then(|_| sim.deliver());
    match outcome {
        Ok(outputs) => {
            let mut all = outputs;
            all.extend(&sim.reference);
            let output = sim.net.register().joint_state(&all)?;
            let transcript = sim.net.into_transcript();
            Ok(CoalitionRun {
                view: coalition_view(&transcript, coalition),
                output: Some(output),
                transcript,
            })
        }
        Err(HarnessError::Party(PartyError::Aborted(aborted))) => Ok(CoalitionRun {
            view: coalition_view(&aborted.transcript, coalition),
            output: None,
            transcript: aborted.transcript,
        }),
        Err(e) => Err(e),
    }
}

/// Structural check of a transcript: the coalition holds fewer than `n`
/// shares of every secret dealt by an honest client, and no qubit reaches
/// it other than its own outputs.
pub fn assert_coalition_blind(
    transcript: &Transcript,
    coalition: &Coalition,
    graph: &BrickworkGraph,
) -> Result<(), String> {
    let (n, q) = (graph.n_wires(), graph.q());
    let mut held: BTreeMap<SecretTag, BTreeSet<usize>> = BTreeMap::new();
    for msg in transcript.messages() {
        let Party::Client(k) = msg.receiver else { continue };
        if !coalition.contains(k) {
            continue;
        }
        match &msg.body {
            Body::ShareDistribution { share } if !coalition.contains(share.tag.dealer()) => {
                held.entry(share.tag).or_default().insert(share.owner);
            }
            Body::QubitTransfer { label, .. } => {
                return Err(format!("client {k} was sent a qubit labelled {label:?}"));
            }
            Body::OutputQubit { node, .. } if *node != q + k => {
                return Err(format!("client {k} was sent output {node}"));
            }
            _ => {}
        }
    }
    match held.iter().find(|(_, owners)| owners.len() >= n) {
        Some((tag, owners)) => Err(format!("coalition holds {} of {n} shares of {tag}", owners.len())),
        None => Ok(()),
    }
}
