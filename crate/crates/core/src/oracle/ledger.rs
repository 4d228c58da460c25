use std::collections::BTreeMap;

use serde_json::{Map, Value};

use super::{OracleError, SecretShare, SecretTag, SecretValue};
use crate::mbqc::{MeasurementPattern, Node};
use crate::quantum::{Octant, Outcome};
use crate::rsp::{theta_aux, theta_input, OutcomeVector};

/// Everything the trusted oracle has been told: registered shares, which
/// test copy survived for each contribution, the preparation outcome
/// vectors, and the announced measurement results.
#[derive(Clone, Debug)]
pub struct OracleLedger {
    n: usize,
    pattern: MeasurementPattern,
    shares: BTreeMap<SecretTag, BTreeMap<usize, SecretValue>>,
    survivors: BTreeMap<(Node, usize), usize>,
    t: BTreeMap<Node, OutcomeVector>,
    outcomes: Vec<(Node, Outcome)>,
}

impl OracleLedger {
    pub fn new(n: usize, pattern: MeasurementPattern) -> Result<Self, OracleError> {
        if n == 0 {
            return Err(OracleError::TooFewParties(n));
        }
        Ok(OracleLedger {
            n,
            pattern,
            shares: BTreeMap::new(),
            survivors: BTreeMap::new(),
            t: BTreeMap::new(),
            outcomes: Vec::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pattern(&self) -> &MeasurementPattern {
        &self.pattern
    }

    pub fn register(&mut self, share: SecretShare) -> Result<(), OracleError> {
        if share.owner == 0 || share.owner > self.n {
            return Err(OracleError::UnknownClient(share.owner));
        }
        if share.tag.is_angle() != matches!(share.value, SecretValue::Angle(_)) {
            return Err(OracleError::DomainMismatch(share.tag));
        }
        let slot = self.shares.entry(share.tag).or_default();
        if slot.contains_key(&share.owner) {
            return Err(OracleError::DuplicateShare {
                tag: share.tag,
                owner: share.owner,
            });
        }
        slot.insert(share.owner, share.value);
        Ok(())
    }

    /// The secret behind `tag`, once all `n` clients have registered a share.
    pub fn secret(&self, tag: SecretTag) -> Result<SecretValue, OracleError> {
        let slot = self.shares.get(&tag);
        let have = slot.map_or(0, BTreeMap::len);
        if have < self.n {
            return Err(OracleError::MissingShares {
                tag,
                have,
                need: self.n,
            });
        }
        super::reconstruct(&self.shares(tag))
    }

    /// The shares registered so far for `tag`, in owner order.
    pub fn shares(&self, tag: SecretTag) -> Vec<SecretShare> {
        self.shares
            .get(&tag)
            .into_iter()
            .flatten()
            .map(|(&owner, &value)| SecretShare { owner, tag, value })
            .collect()
    }

    pub fn angle(&self, tag: SecretTag) -> Result<Octant, OracleError> {
        self.secret(tag)?.angle().ok_or(OracleError::DomainMismatch(tag))
    }

    pub fn bit(&self, tag: SecretTag) -> Result<Outcome, OracleError> {
        self.secret(tag)?.bit().ok_or(OracleError::DomainMismatch(tag))
    }

    pub fn record_survivor(&mut self, node: Node, contributor: usize, copy: usize) {
        self.survivors.insert((node, contributor), copy);
    }

    pub fn survivor(&self, node: Node, contributor: usize) -> Result<usize, OracleError> {
        self.survivors
            .get(&(node, contributor))
            .copied()
            .ok_or(OracleError::MissingSurvivor { node, contributor })
    }

    pub fn record_t(&mut self, node: Node, t: OutcomeVector) {
        self.t.insert(node, t);
    }

    pub fn t(&self, node: Node) -> Result<&OutcomeVector, OracleError> {
        self.t.get(&node).ok_or(OracleError::MissingOutcomeVector(node))
    }

    /// Appends `b_j`; results must arrive in measurement order.
    pub fn record_outcome(&mut self, node: Node, b: Outcome) -> Result<(), OracleError> {
        let order = self.pattern.flow().order();
        match order.get(self.outcomes.len()) {
            Some(&expected) if expected == node => {
                self.outcomes.push((node, b));
                Ok(())
            }
            Some(&expected) => Err(OracleError::OutOfOrder { expected, got: node }),
            None => Err(OracleError::NotMeasured(node)),
        }
    }

    pub fn outcome(&self, node: Node) -> Result<Outcome, OracleError> {
        self.outcomes
            .iter()
            .find(|(j, _)| *j == node)
            .map(|&(_, b)| b)
            .ok_or(OracleError::MissingOutcome(node))
    }

    pub fn outcomes(&self) -> &[(Node, Outcome)] {
        &self.outcomes
    }

    /// Client `k`'s angle for `node`: its input pad on its own input node,
    /// otherwise the surviving test copy.
    pub fn contribution(&self, node: Node, k: usize) -> Result<Octant, OracleError> {
        if self.pattern.graph().is_input(node) && k == node {
            self.angle(SecretTag::InputAngle { node })
        } else {
            let copy = self.survivor(node, k)?;
            self.angle(SecretTag::CopyAngle {
                node,
                contributor: k,
                copy,
            })
        }
    }

    /// `a_j` for input nodes, 0 elsewhere.
    pub fn pad(&self, node: Node) -> Result<Outcome, OracleError> {
        if self.pattern.graph().is_input(node) {
            self.bit(SecretTag::InputPad { node })
        } else {
            Ok(Outcome::ZERO)
        }
    }

    /// Combined rotation `θ_j` the server's qubit carries after preparation.
    /// A single client's qubit goes to the server without fusion.
    pub fn theta(&self, node: Node) -> Result<Octant, OracleError> {
        if self.n == 1 {
            return self.contribution(node, 1);
        }
        let shares = (1..=self.n)
            .map(|k| self.contribution(node, k))
            .collect::<Result<Vec<_>, _>>()?;
        let t = self.t(node)?;
        Ok(if self.pattern.graph().is_input(node) {
            theta_input(node, &shares, t, self.pad(node)?)?
        } else {
            theta_aux(&shares, t)?
        })
    }

    /// `r_j = ⊕_k r_j^k`.
    pub fn mask(&self, node: Node) -> Result<Outcome, OracleError> {
        (1..=self.n).try_fold(Outcome::ZERO, |acc, k| {
            Ok(acc ^ self.bit(SecretTag::MaskBit { node, contributor: k })?)
        })
    }

    /// `s_i = b_i ⊕ r_i`.
    pub fn signal(&self, node: Node) -> Result<Outcome, OracleError> {
        Ok(self.outcome(node)? ^ self.mask(node)?)
    }

    /// Reconstructed value of every complete secret, keyed by a readable
    /// tag. Reveals all client secrets.
    pub fn debug_dump(&self) -> Value {
        let mut map = Map::new();
        for &tag in self.shares.keys() {
            if let Ok(v) = self.secret(tag) {
                map.insert(tag.to_string(), Value::String(v.to_string()));
            }
        }
        Value::Object(map)
    }
}
