use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::{
    AbortReason, AbortRecord, AbortedRun, Body, ClientScript, ClientState, Network, Party, PartyError, Phase,
    QubitLabel, ServerInbound, ServerState, ServerStrategy, Transcript,
};
use crate::mbqc::{MeasurementPattern, Node};
use crate::oracle::{
    oracle_delta, oracle_output_keys, share_secret, verify_client, OracleError, OracleLedger, SecretShare, SecretTag,
    SecretValue, DEFAULT_COPIES,
};
use crate::quantum::{Outcome, PureState, QubitId};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolConfig {
    /// Copies per contribution in the honesty test.
    pub m_copies: usize,
    pub seed: u64,
    /// Log qubit amplitudes in the transcript. Reveals client data.
    pub debug_secrets: bool,
    pub client_scripts: BTreeMap<usize, ClientScript>,
    pub server: ServerStrategy,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            m_copies: DEFAULT_COPIES,
            seed: 0,
            debug_secrets: false,
            client_scripts: BTreeMap::new(),
            server: ServerStrategy::honest(),
        }
    }
}

/// A completed run.
#[derive(Clone, Debug)]
pub struct ProtocolRun {
    /// Decrypted outputs of clients `1..=n`, then the untouched reference.
    pub output: PureState,
    pub transcript: Transcript,
    pub ledger: OracleLedger,
    pub clients: Vec<ClientState>,
    pub server: ServerState,
}

/// One protocol run, driven phase by phase.
pub struct Protocol<R> {
    pattern: MeasurementPattern,
    net: Network,
    clients: Vec<ClientState>,
    server: ServerState,
    ledger: OracleLedger,
    reference: Vec<QubitId>,
    m: usize,
    rng: R,
}

impl<R: Rng> Protocol<R> {
    /// Qubit `k − 1` of `inputs` is client `k`'s input; any further qubits
    /// form a reference held by the environment.
    pub fn new(
        inputs: &PureState,
        pattern: MeasurementPattern,
        config: &ProtocolConfig,
        mut rng: R,
    ) -> Result<Self, PartyError> {
        let graph = pattern.graph().clone();
        let n = graph.n_wires();
        if graph.n_columns() < 2 {
            return Err(PartyError::InvalidConfig("the graph needs at least 2 columns".into()));
        }
        if config.m_copies < 2 {
            return Err(PartyError::InvalidConfig(format!(
                "the honesty test needs at least 2 copies, got {}",
                config.m_copies
            )));
        }
        if inputs.num_qubits() < n {
            return Err(PartyError::InvalidConfig(format!(
                "{n} clients need {n} input qubits, got {}",
                inputs.num_qubits()
            )));
        }
        if let Some(&k) = config.client_scripts.keys().find(|&&k| k == 0 || k > n) {
            return Err(PartyError::InvalidConfig(format!("script for unknown client {k}")));
        }
        let mut net = Network::new(config.debug_secrets);
        let ids = net.register_mut().alloc(Party::Environment, inputs.clone());
        let mut clients = Vec::with_capacity(n);
        for k in 1..=n {
            net.register_mut()
                .transfer(&Party::Environment, Party::Client(k), ids[k - 1])?;
            let script = config.client_scripts.get(&k).cloned().unwrap_or_default();
            clients.push(ClientState::new(
                k,
                ids[k - 1],
                &graph,
                config.m_copies,
                script,
                &mut rng,
            ));
        }
        let audience = (1..=n).map(Party::Client).collect();
        let server = ServerState::new(graph, config.server.clone(), Party::Oracle, audience);
        let ledger = OracleLedger::new(n, pattern.clone())?;
        Ok(Protocol {
            pattern,
            net,
            clients,
            server,
            ledger,
            reference: ids[n..].to_vec(),
            m: config.m_copies,
            rng,
        })
    }

    pub fn pattern(&self) -> &MeasurementPattern {
        &self.pattern
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn server(&self) -> &ServerState {
        &self.server
    }

    pub fn clients(&self) -> &[ClientState] {
        &self.clients
    }

    pub fn ledger(&self) -> &OracleLedger {
        &self.ledger
    }

    pub fn reference(&self) -> &[QubitId] {
        &self.reference
    }

    fn n(&self) -> usize {
        self.clients.len()
    }

    fn client_parties(&self) -> Vec<Party> {
        self.clients.iter().map(ClientState::party).collect()
    }

    /// Splits `value` among the clients; every holder commits its share to
    /// the oracle.
    fn deal(&mut self, dealer: usize, tag: SecretTag, value: SecretValue) -> Result<(), PartyError> {
        let n = self.n();
        let shares = if n == 1 {
            vec![SecretShare { owner: 1, tag, value }]
        } else {
            share_secret(tag, value, n, &mut self.rng)?
        };
        for share in shares {
            let owner = share.owner;
            if owner != dealer {
                self.net.post(
                    Party::Client(dealer),
                    Party::Client(owner),
                    Body::ShareDistribution { share },
                );
            }
            self.clients[owner - 1].hold(share);
            self.net
                .post(Party::Client(owner), Party::Oracle, Body::ShareDistribution { share });
            self.ledger.register(share)?;
        }
        Ok(())
    }

    fn abort(&mut self, record: AbortRecord) -> PartyError {
        let mut receivers = self.client_parties();
        receivers.push(Party::Server);
        self.net
            .broadcast(Party::Oracle, &receivers, Body::Abort { record: record.clone() });
        self.net.transcript_mut().set_abort(record.clone());
        PartyError::Aborted(Box::new(AbortedRun {
            record,
            transcript: self.net.transcript().clone(),
        }))
    }

    /// Honesty test of client `k`'s copies for `node`.
    fn test_copies(&mut self, node: Node, k: usize) -> Result<(), PartyError> {
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
        let mut failure = None;
        let Protocol { net, server, rng, .. } = self;
        let verdict = verify_client(
            &shares,
            |copy, basis| {
                let msg = ServerInbound::TestBasis {
                    node,
                    contributor: k,
                    copy,
                    basis,
                };
                match net
                    .deliver(Party::Oracle, server, msg)
                    .and_then(|_| server.run_tests(net, rng))
                {
                    Ok(outcomes) => Ok(outcomes.last().copied().unwrap_or_default()),
                    Err(e) => {
                        failure = Some(e);
                        Err(OracleError::NotMeasured(node))
                    }
                }
            },
            &mut pick,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        let verdict = verdict?;
        self.ledger.record_survivor(node, k, verdict.survivor);
        let accepted = verdict.accepted();
        let msg = ServerInbound::TestVerdict {
            node,
            contributor: k,
            survivor: verdict.survivor,
            accepted,
        };
        self.net.deliver(Party::Oracle, &mut self.server, msg)?;
        self.net.post(Party::Oracle, Party::Client(k), msg.body(None));
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

    /// Sends every qubit, tests the copies, runs the fusion chains and builds
    /// the graph state.
    pub fn prepare(&mut self) -> Result<(), PartyError> {
        let graph = self.pattern.graph().clone();
        let n = self.n();
        for j in graph.measured() {
            for k in 1..=n {
                let me = Party::Client(k);
                if graph.is_input(j) && k == j {
                    let id = self.clients[k - 1].pad_input(&mut self.net)?;
                    let msg = ServerInbound::QubitTransfer {
                        label: QubitLabel::PaddedInput { node: j },
                        qubit: id,
                    };
                    self.net.deliver(me, &mut self.server, msg)?;
                } else {
                    for (copy, id) in self.clients[k - 1].prepare_copies(&mut self.net, j)? {
                        let msg = ServerInbound::QubitTransfer {
                            label: QubitLabel::TestCopy {
                                node: j,
                                contributor: k,
                                copy,
                            },
                            qubit: id,
                        };
                        self.net.deliver(me, &mut self.server, msg)?;
                    }
                }
                for (tag, value) in self.clients[k - 1].preparation_secrets(j) {
                    self.deal(k, tag, value)?;
                }
                if !(graph.is_input(j) && k == j) {
                    self.test_copies(j, k)?;
                }
            }
            let t = self.server.prepare_node(&mut self.net, j, &mut self.rng)?;
            if n > 1 {
                self.ledger.record_t(j, t);
            }
        }
        self.server.entangle(&mut self.net)?;
        for c in &mut self.clients {
            c.set_phase(Phase::Computation);
        }
        Ok(())
    }

    /// One measurement round for node `j`.
    pub fn compute_round(&mut self, j: Node) -> Result<Outcome, PartyError> {
        for k in 1..=self.n() {
            let r = self.clients[k - 1].mask(j);
            self.deal(
                k,
                SecretTag::MaskBit {
                    node: j,
                    contributor: k,
                },
                r.into(),
            )?;
        }
        let delta = oracle_delta(&self.ledger, j)?.delta;
        let msg = ServerInbound::DeltaAnnounce { node: j, delta };
        self.net.deliver(Party::Oracle, &mut self.server, msg)?;
        let clients = self.client_parties();
        self.net.broadcast(Party::Oracle, &clients, msg.body(None));
        let b = self.server.measure_node(&mut self.net, j, &mut self.rng)?;
        self.ledger.record_outcome(j, b)?;
        for c in &mut self.clients {
            c.record_result(j, b);
        }
        Ok(b)
    }

    pub fn compute(&mut self) -> Result<(), PartyError> {
        let order = self.pattern.flow().order().to_vec();
        for j in order {
            self.compute_round(j)?;
        }
        for c in &mut self.clients {
            c.set_phase(Phase::Output);
        }
        Ok(())
    }

    /// Hands output `q + k` to client `k` together with its keys.
    pub fn deliver_outputs(&mut self) -> Result<(), PartyError> {
        let graph = self.pattern.graph().clone();
        for j in graph.outputs() {
            let k = j - graph.q();
            let id = self.server.release_output(&mut self.net, j, Party::Client(k))?;
            self.clients[k - 1].receive_output(id);
            let (sx, sz) = oracle_output_keys(&self.ledger, j)?;
            self.net
                .post(Party::Oracle, Party::Client(k), Body::OutputKeys { node: j, sx, sz });
            self.clients[k - 1].decrypt(&mut self.net, sx, sz)?;
        }
        Ok(())
    }

    /// Joint state of the decrypted outputs and the reference.
    pub fn finish(mut self) -> Result<ProtocolRun, PartyError> {
        let mut outputs = Vec::with_capacity(self.n());
        for c in &self.clients {
            let id = c.output().ok_or(PartyError::MissingQubit {
                node: c.index(),
                what: "client output",
            })?;
            outputs.push((c.index(), id));
        }
        let mut ids: Vec<QubitId> = outputs.iter().map(|&(_, id)| id).collect();
        ids.extend(&self.reference);
        let output = self.net.register().joint_state(&ids)?;
        self.net.transcript_mut().set_outputs(outputs);
        Ok(ProtocolRun {
            output,
            transcript: self.net.into_transcript(),
            ledger: self.ledger,
            clients: self.clients,
            server: self.server,
        })
    }

    pub fn run(mut self) -> Result<ProtocolRun, PartyError> {
        self.prepare()?;
        self.compute()?;
        self.deliver_outputs()?;
        self.finish()
    }
}

/// Runs the whole protocol with randomness seeded from `config.seed`.
pub fn run_full_protocol(
    inputs: &PureState,
    pattern: &MeasurementPattern,
    config: &ProtocolConfig,
) -> Result<ProtocolRun, PartyError> {
    Protocol::new(inputs, pattern.clone(), config, ChaCha20Rng::seed_from_u64(config.seed))?.run()
}

/// As [`run_full_protocol`], drawing randomness from `rng` instead.
pub fn run_protocol_with_rng<R: Rng>(
    inputs: &PureState,
    pattern: &MeasurementPattern,
    config: &ProtocolConfig,
    rng: R,
) -> Result<ProtocolRun, PartyError> {
    Protocol::new(inputs, pattern.clone(), config, rng)?.run()
}
