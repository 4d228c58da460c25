use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::OracleError;
use crate::mbqc::Node;
use crate::quantum::{Octant, Outcome};

/// Names a client secret. The dealer is the client that chose it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SecretTag {
    /// `a_j`: X pad of client `j`'s input, on node `j`.
    InputPad { node: Node },
    /// `θ_j^j`: Z pad of client `j`'s input.
    InputAngle { node: Node },
    /// Angle of one test copy sent by `contributor` for `node`.
    CopyAngle {
        node: Node,
        contributor: usize,
        copy: usize,
    },
    /// `r_j^k`: outcome mask contributed by client `k` for node `j`.
    MaskBit { node: Node, contributor: usize },
}

impl SecretTag {
    pub fn dealer(&self) -> usize {
        match *self {
            SecretTag::InputPad { node } | SecretTag::InputAngle { node } => node,
            SecretTag::CopyAngle { contributor, .. } | SecretTag::MaskBit { contributor, .. } => contributor,
        }
    }

    pub fn node(&self) -> Node {
        match *self {
            SecretTag::InputPad { node }
            | SecretTag::InputAngle { node }
            | SecretTag::CopyAngle { node, .. }
            | SecretTag::MaskBit { node, .. } => node,
        }
    }

    pub fn is_angle(&self) -> bool {
        matches!(self, SecretTag::InputAngle { .. } | SecretTag::CopyAngle { .. })
    }
}

impl fmt::Display for SecretTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            SecretTag::InputPad { node } => write!(f, "a[{node}]"),
            SecretTag::InputAngle { node } => write!(f, "theta[{node}][{node}]"),
            SecretTag::CopyAngle {
                node,
                contributor,
                copy,
            } => write!(f, "theta[{node}][{contributor}]#{copy}"),
            SecretTag::MaskBit { node, contributor } => write!(f, "r[{node}][{contributor}]"),
        }
    }
}

/// A secret value: an angle shared mod 8 or a bit shared mod 2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecretValue {
    Angle(Octant),
    Bit(Outcome),
}

impl SecretValue {
    fn same_domain(&self, other: &SecretValue) -> bool {
        matches!(
            (self, other),
            (SecretValue::Angle(_), SecretValue::Angle(_)) | (SecretValue::Bit(_), SecretValue::Bit(_))
        )
    }

    pub fn angle(self) -> Option<Octant> {
        match self {
            SecretValue::Angle(a) => Some(a),
            SecretValue::Bit(_) => None,
        }
    }

    pub fn bit(self) -> Option<Outcome> {
        match self {
            SecretValue::Bit(b) => Some(b),
            SecretValue::Angle(_) => None,
        }
    }
}

impl fmt::Display for SecretValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SecretValue::Angle(a) => write!(f, "{}", a.value()),
            SecretValue::Bit(b) => write!(f, "{b}"),
        }
    }
}

impl From<Octant> for SecretValue {
    fn from(a: Octant) -> Self {
        SecretValue::Angle(a)
    }
}

impl From<Outcome> for SecretValue {
    fn from(b: Outcome) -> Self {
        SecretValue::Bit(b)
    }
}

/// One additive share, held by client `owner`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SecretShare {
    pub owner: usize,
    pub tag: SecretTag,
    pub value: SecretValue,
}

/// Splits `value` into `n` additive shares for clients `1..=n`: the first
/// `n − 1` are uniform and the last fixes the sum.
pub fn share_secret<R: Rng + ?Sized>(
    tag: SecretTag,
    value: SecretValue,
    n: usize,
    rng: &mut R,
) -> Result<Vec<SecretShare>, OracleError> {
    if n < 2 {
        return Err(OracleError::TooFewParties(n));
    }
    if tag.is_angle() != matches!(value, SecretValue::Angle(_)) {
        return Err(OracleError::DomainMismatch(tag));
    }
    let mut shares = Vec::with_capacity(n);
    let mut rest = value;
    for owner in 1..n {
        let v = match (&mut rest, value) {
            (SecretValue::Angle(acc), _) => {
                let s = Octant::random(rng);
                *acc = *acc - s;
                SecretValue::Angle(s)
            }
            (SecretValue::Bit(acc), _) => {
                let s = Outcome::random(rng);
                *acc ^= s;
                SecretValue::Bit(s)
            }
        };
        shares.push(SecretShare { owner, tag, value: v });
    }
    shares.push(SecretShare {
        owner: n,
        tag,
        value: rest,
    });
    Ok(shares)
}

/// Sum of the shares; all must carry the same tag and domain.
pub fn reconstruct(shares: &[SecretShare]) -> Result<SecretValue, OracleError> {
    let first = shares.first().ok_or(OracleError::TooFewParties(0))?;
    let mut acc = first.value;
    for s in &shares[1..] {
        if s.tag != first.tag || !s.value.same_domain(&acc) {
            return Err(OracleError::DomainMismatch(s.tag));
        }
        acc = match (acc, s.value) {
            (SecretValue::Angle(a), SecretValue::Angle(b)) => SecretValue::Angle(a + b),
            (SecretValue::Bit(a), SecretValue::Bit(b)) => SecretValue::Bit(a ^ b),
            _ => unreachable!("domains checked above"),
        };
    }
    Ok(acc)
}
