use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Network, Party, PartyError, Phase};
use crate::mbqc::{BrickworkGraph, Node};
use crate::oracle::{SecretShare, SecretTag, SecretValue};
use crate::quantum::{Gate, Octant, Outcome, PureState, QubitId};

/// Deviations of a dishonest client.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClientScript {
    /// Sent test copies are `|+_{θ + offset}⟩` while `θ` is what gets shared.
    pub copy_offset: Octant,
    /// Chosen output masks `r_j^k` in place of random ones.
    pub r_override: BTreeMap<Node, Outcome>,
}

impl ClientScript {
    pub fn is_honest(&self) -> bool {
        *self == Self::default()
    }
}

/// A client's private randomness, drawn once per run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ClientSecrets {
    /// `a_k`.
    pub a: Outcome,
    /// `θ_k^k`.
    pub theta: Octant,
    /// Test copy angles by `(node, copy)`.
    pub copies: BTreeMap<(Node, usize), Octant>,
    /// `r_j^k` by node.
    pub masks: BTreeMap<Node, Outcome>,
}

#[derive(Clone, Debug)]
pub struct ClientState {
    k: usize,
    input: Option<QubitId>,
    secrets: ClientSecrets,
    script: ClientScript,
    held: Vec<SecretShare>,
    results: Vec<(Node, Outcome)>,
    output: Option<QubitId>,
    phase: Phase,
}

impl ClientState {
    /// Client `k` owning `input`, contributing `m` copies to every node
    /// other than its own input and the outputs.
    pub fn new<R: Rng + ?Sized>(
        k: usize,
        input: QubitId,
        graph: &BrickworkGraph,
        m: usize,
        script: ClientScript,
        rng: &mut R,
    ) -> Self {
        let a = Outcome::random(rng);
        let theta = Octant::random(rng);
        let mut copies = BTreeMap::new();
        let mut masks = BTreeMap::new();
        for j in graph.measured() {
            if j != k {
                for c in 0..m {
                    copies.insert((j, c), Octant::random(rng));
                }
            }
            let r = Outcome::random(rng);
            masks.insert(j, script.r_override.get(&j).copied().unwrap_or(r));
        }
        ClientState {
            k,
            input: Some(input),
            secrets: ClientSecrets {
                a,
                theta,
                copies,
                masks,
            },
            script,
            held: Vec::new(),
            results: Vec::new(),
            output: None,
            phase: Phase::Preparation,
        }
    }

    pub fn index(&self) -> usize {
        self.k
    }

    pub fn party(&self) -> Party {
        Party::Client(self.k)
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub(crate) fn set_phase(&mut self, phase: Phase) {
        self.phase = phase;
    }

    pub fn secrets(&self) -> &ClientSecrets {
        &self.secrets
    }

    pub fn script(&self) -> &ClientScript {
        &self.script
    }

    /// Shares of other clients' secrets (and its own portion of its own).
    pub fn held_shares(&self) -> &[SecretShare] {
        &self.held
    }

    pub fn results(&self) -> &[(Node, Outcome)] {
        &self.results
    }

    pub fn output(&self) -> Option<QubitId> {
        self.output
    }

    fn expect(&self, phase: Phase) -> Result<(), PartyError> {
        if self.phase == phase {
            Ok(())
        } else {
            Err(PartyError::WrongPhase {
                party: self.party(),
                expected: phase,
                actual: self.phase,
            })
        }
    }

    /// Pads the input with `X^a Z(θ)` and gives up its handle.
    pub fn pad_input(&mut self, net: &mut Network) -> Result<QubitId, PartyError> {
        self.expect(Phase::Preparation)?;
        let id = self.input.take().ok_or(PartyError::MissingQubit {
            node: self.k,
            what: "client input",
        })?;
        let me = self.party();
        net.register_mut().apply(&me, Gate::ZRot(id, self.secrets.theta))?;
        if self.secrets.a.is_one() {
            net.register_mut().apply(&me, Gate::X(id))?;
        }
        Ok(id)
    }

    /// Fresh test copies for `node`, still owned by this client.
    pub fn prepare_copies(&self, net: &mut Network, node: Node) -> Result<Vec<(usize, QubitId)>, PartyError> {
        self.expect(Phase::Preparation)?;
        self.secrets
            .copies
            .range((node, 0)..(node + 1, 0))
            .map(|(&(_, c), &theta)| {
                let id = net
                    .register_mut()
                    .alloc_one(self.party(), PureState::plus(theta + self.script.copy_offset))?;
                Ok((c, id))
            })
            .collect()
    }

    /// The secrets this client deals for `node` during preparation.
    pub fn preparation_secrets(&self, node: Node) -> Vec<(SecretTag, SecretValue)> {
        let mut out = Vec::new();
        if node == self.k {
            out.push((SecretTag::InputPad { node }, self.secrets.a.into()));
            out.push((SecretTag::InputAngle { node }, self.secrets.theta.into()));
        }
        for (&(_, copy), &theta) in self.secrets.copies.range((node, 0)..(node + 1, 0)) {
            out.push((
                SecretTag::CopyAngle {
                    node,
                    contributor: self.k,
                    copy,
                },
                theta.into(),
            ));
        }
        out
    }

    /// `r_j^k` for `node`.
    pub fn mask(&self, node: Node) -> Outcome {
        self.secrets.masks.get(&node).copied().unwrap_or_default()
    }

    pub(crate) fn hold(&mut self, share: SecretShare) {
        self.held.push(share);
    }

    pub(crate) fn record_result(&mut self, node: Node, b: Outcome) {
        self.results.push((node, b));
    }

    pub(crate) fn receive_output(&mut self, id: QubitId) {
        self.output = Some(id);
    }

    /// Applies `X^{s_X}` then `Z^{s_Z}` to the received output.
    pub fn decrypt(&mut self, net: &mut Network, sx: Outcome, sz: Outcome) -> Result<(), PartyError> {
        self.expect(Phase::Output)?;
        let id = self.output.ok_or(PartyError::MissingQubit {
            node: self.k,
            what: "client output",
        })?;
        let me = self.party();
        if sx.is_one() {
            net.register_mut().apply(&me, Gate::X(id))?;
        }
        if sz.is_one() {
            net.register_mut().apply(&me, Gate::Z(id))?;
        }
        self.phase = Phase::Done;
        Ok(())
    }
}
