use serde::{Deserialize, Serialize};

use super::{OracleError, OracleLedger};
use crate::mbqc::{corrected_angle, dependency_signals, MeasurementPattern, Node};
use crate::quantum::{Octant, Outcome};
use crate::rsp::{theta_aux, theta_input, OutcomeVector};

/// `φ'_j` from the pads `a` and signals `s = b ⊕ r` of earlier nodes.
pub fn phi_prime(
    pattern: &MeasurementPattern,
    j: Node,
    a: impl Fn(Node) -> Outcome,
    s: impl Fn(Node) -> Outcome,
) -> Octant {
    let flow = pattern.flow();
    let (sx, sz) = dependency_signals(flow, j, s);
    let a_pred = flow.f_inv(j).map(&a).unwrap_or_default();
    corrected_angle(pattern.angle(j), a(j), a_pred, sx, sz)
}

/// Rotation entering the measurement angle of a node whose qubit is
/// `X^a Z(θ)|ψ⟩ = Z((−1)^a θ) X^a|ψ⟩` up to phase.
pub fn theta_term(theta: Octant, a: Outcome) -> Octant {
    theta.flip_if(a)
}

/// `δ = φ' + θ_term + 4r`.
pub fn compose_delta(phi_prime: Octant, theta_term: Octant, r: Outcome) -> Octant {
    phi_prime + theta_term + Octant::pi_times(r)
}

/// Output keys `(s_X, s_Z)` for output node `j`. An input predecessor's X
/// pad reaches its successor as a Z through the entangling gates.
pub fn output_keys(
    pattern: &MeasurementPattern,
    j: Node,
    a: impl Fn(Node) -> Outcome,
    s: impl Fn(Node) -> Outcome,
) -> (Outcome, Outcome) {
    let flow = pattern.flow();
    let (sx, sz) = dependency_signals(flow, j, s);
    let carried = flow.f_inv(j).map(a).unwrap_or_default();
    (sx, sz ^ carried)
}

/// Value of the share at `position` (1-based) that makes the combined
/// angle's rotation term equal `target`, the other shares being fixed.
/// `node_input` is `Some(j)` for client `j`'s input node; the solved share
/// is then `θ^j`, otherwise `θ^n`.
pub fn solve_share(
    node_input: Option<usize>,
    shares: &[Octant],
    t: &OutcomeVector,
    a: Outcome,
    target: Octant,
) -> Result<Octant, OracleError> {
    let mut s = shares.to_vec();
    let position = node_input.unwrap_or(s.len());
    s[position - 1] = Octant::ZERO;
    let rest = match node_input {
        Some(j) => theta_input(j, &s, t, a)?,
        None => theta_aux(&s, t)?,
    };
    Ok(target.flip_if(a) - rest)
}

/// The parts of one measurement angle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeltaBreakdown {
    pub phi_prime: Octant,
    pub theta: Octant,
    pub theta_term: Octant,
    pub r: Outcome,
    pub delta: Octant,
}

/// `δ_j` from the registered shares and the results announced so far.
pub fn oracle_delta(ledger: &OracleLedger, j: Node) -> Result<DeltaBreakdown, OracleError> {
    let pattern = ledger.pattern();
    if !pattern.graph().contains(j) || pattern.graph().is_output(j) {
        return Err(OracleError::NotMeasured(j));
    }
    let flow = pattern.flow();
    let deps = flow.sx(j).iter().chain(flow.sz(j));
    let mut signals = std::collections::BTreeMap::new();
    for &i in deps {
        signals.insert(i, ledger.signal(i)?);
    }
    let mut pads = std::collections::BTreeMap::new();
    for i in std::iter::once(j).chain(flow.f_inv(j)) {
        pads.insert(i, ledger.pad(i)?);
    }
    let phi_prime = phi_prime(
        pattern,
        j,
        |i| pads.get(&i).copied().unwrap_or_default(),
        |i| signals.get(&i).copied().unwrap_or_default(),
    );
    let theta = ledger.theta(j)?;
    let a = ledger.pad(j)?;
    let r = ledger.mask(j)?;
    let term = theta_term(theta, a);
    Ok(DeltaBreakdown {
        phi_prime,
        theta,
        theta_term: term,
        r,
        delta: compose_delta(phi_prime, term, r),
    })
}

/// `(s_X, s_Z)` for output node `j`.
pub fn oracle_output_keys(ledger: &OracleLedger, j: Node) -> Result<(Outcome, Outcome), OracleError> {
    let pattern = ledger.pattern();
    if !pattern.graph().is_output(j) {
        return Err(OracleError::NotOutput(j));
    }
    let flow = pattern.flow();
    let mut signals = std::collections::BTreeMap::new();
    for &i in flow.sx(j).iter().chain(flow.sz(j)) {
        signals.insert(i, ledger.signal(i)?);
    }
    let carried = match flow.f_inv(j) {
        Some(i) => ledger.pad(i)?,
        None => Outcome::ZERO,
    };
    let (sx, sz) = output_keys(
        pattern,
        j,
        |_| carried,
        |i| signals.get(&i).copied().unwrap_or_default(),
    );
    Ok((sx, sz))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mbqc::BrickworkGraph;
    use crate::oracle::{share_secret, SecretTag, SecretValue};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;
    use std::collections::BTreeMap;

    fn o(v: i64) -> Octant {
        Octant::new(v)
    }

    fn bit(v: u8) -> Outcome {
        Outcome::try_from(v).unwrap()
    }

    fn deal(ledger: &mut OracleLedger, tag: SecretTag, value: SecretValue, rng: &mut ChaCha20Rng) {
        for s in share_secret(tag, value, ledger.n(), rng).unwrap() {
            ledger.register(s).unwrap();
        }
    }

    /// Two clients on a 2×2 brickwork with fully scripted secrets.
    fn scripted(phi: [i64; 2], rng: &mut ChaCha20Rng) -> OracleLedger {
        let g = BrickworkGraph::build(2, 2).unwrap();
        let p = MeasurementPattern::new(g, BTreeMap::from([(1, o(phi[0])), (2, o(phi[1]))])).unwrap();
        let mut l = OracleLedger::new(2, p).unwrap();
        deal(&mut l, SecretTag::InputPad { node: 1 }, bit(1).into(), rng);
        deal(&mut l, SecretTag::InputAngle { node: 1 }, o(2).into(), rng);
        deal(&mut l, SecretTag::InputPad { node: 2 }, bit(0).into(), rng);
        deal(&mut l, SecretTag::InputAngle { node: 2 }, o(6).into(), rng);
        deal(
            &mut l,
            SecretTag::CopyAngle {
                node: 1,
                contributor: 2,
                copy: 0,
            },
            o(1).into(),
            rng,
        );
        deal(
            &mut l,
            SecretTag::CopyAngle {
                node: 2,
                contributor: 1,
                copy: 0,
            },
            o(7).into(),
            rng,
        );
        l.record_survivor(1, 2, 0);
        l.record_survivor(2, 1, 0);
        let mut t1 = OutcomeVector::new();
        t1.insert(2, bit(1));
        l.record_t(1, t1);
        let mut t2 = OutcomeVector::new();
        t2.insert(1, bit(0));
        l.record_t(2, t2);
        for (node, k, r) in [(1, 1, 1), (1, 2, 0), (2, 1, 1), (2, 2, 1)] {
            deal(&mut l, SecretTag::MaskBit { node, contributor: k }, bit(r).into(), rng);
        }
        l
    }

    #[test]
    fn hand_evaluated_two_by_two_trace() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let mut l = scripted([3, 5], &mut rng);
        // θ_1 = 2 + (−1)^{t²⊕a₁}·1 = 3, term = −3 = 5, φ'_1 = −3 = 5, r_1 = 1.
        let d1 = oracle_delta(&l, 1).unwrap();
        assert_eq!(
            (d1.theta, d1.theta_term, d1.phi_prime, d1.r),
            (o(3), o(5), o(5), bit(1))
        );
        assert_eq!(d1.delta, o(6));
        // b_1 is not announced yet, but node 2 has no dependency on it.
        let d2 = oracle_delta(&l, 2).unwrap();
        assert_eq!((d2.theta, d2.phi_prime, d2.r, d2.delta), (o(5), o(5), bit(0), o(2)));
        assert!(oracle_output_keys(&l, 3).is_err());
        l.record_outcome(1, bit(0)).unwrap();
        l.record_outcome(2, bit(1)).unwrap();
        // s_1 = 1, s_2 = 1; node 3 additionally carries a_1 = 1, node 4 carries a_2 = 0.
        assert_eq!(oracle_output_keys(&l, 3).unwrap(), (bit(1), bit(0)));
        assert_eq!(oracle_output_keys(&l, 4).unwrap(), (bit(1), bit(1)));
        assert!(oracle_output_keys(&l, 1).is_err());
        assert!(matches!(oracle_delta(&l, 3), Err(OracleError::NotMeasured(3))));
    }

    #[test]
    fn trivial_delta_and_mask_shift() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let g = BrickworkGraph::build(2, 2).unwrap();
        let p = MeasurementPattern::new(g, BTreeMap::from([(1, o(3)), (2, o(0))])).unwrap();
        let base = |r1: u8, rng: &mut ChaCha20Rng| {
            let mut l = OracleLedger::new(2, p.clone()).unwrap();
            for node in [1, 2] {
                deal(&mut l, SecretTag::InputPad { node }, bit(0).into(), rng);
                deal(&mut l, SecretTag::InputAngle { node }, o(0).into(), rng);
                let other = 3 - node;
                deal(
                    &mut l,
                    SecretTag::CopyAngle {
                        node,
                        contributor: other,
                        copy: 4,
                    },
                    o(0).into(),
                    rng,
                );
                l.record_survivor(node, other, 4);
                l.record_t(node, all_zero_t(node));
                deal(&mut l, SecretTag::MaskBit { node, contributor: 1 }, bit(r1).into(), rng);
                deal(&mut l, SecretTag::MaskBit { node, contributor: 2 }, bit(0).into(), rng);
            }
            l
        };
        let zero = oracle_delta(&base(0, &mut rng), 1).unwrap().delta;
        assert_eq!(zero, o(3));
        let one = oracle_delta(&base(1, &mut rng), 1).unwrap().delta;
        assert_eq!(one - zero, Octant::PI);
    }

    fn all_zero_t(node: usize) -> OutcomeVector {
        let mut t = OutcomeVector::new();
        t.insert(if node == 1 { 2 } else { 1 }, Outcome::ZERO);
        t
    }

    #[test]
    fn missing_data_is_reported() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let g = BrickworkGraph::build(2, 5).unwrap();
        let mut l = OracleLedger::new(2, MeasurementPattern::zero(g)).unwrap();
        assert!(matches!(oracle_delta(&l, 1), Err(OracleError::MissingShares { .. })));
        let tag = SecretTag::InputPad { node: 1 };
        let shares = share_secret(tag, bit(1).into(), 2, &mut rng).unwrap();
        l.register(shares[0]).unwrap();
        assert!(matches!(l.register(shares[0]), Err(OracleError::DuplicateShare { .. })));
        assert!(matches!(
            l.bit(tag),
            Err(OracleError::MissingShares { have: 1, need: 2, .. })
        ));
        l.register(shares[1]).unwrap();
        assert_eq!(l.bit(tag).unwrap(), bit(1));
        assert!(matches!(
            l.record_outcome(2, bit(0)),
            Err(OracleError::OutOfOrder { expected: 1, got: 2 })
        ));
        assert!(l.debug_dump().get("a[1]").is_some());
    }

    proptest! {
        #[test]
        fn delta_decomposes(seed: u64) {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let phi = [rng.random_range(0..8), rng.random_range(0..8)];
            let l = scripted(phi, &mut rng);
            for j in [1, 2] {
                let d = oracle_delta(&l, j).unwrap();
                let a = l.pad(j).unwrap();
                let expected = corrected_angle(l.pattern().angle(j), a, Outcome::ZERO, Outcome::ZERO, Outcome::ZERO);
                prop_assert_eq!(d.delta - d.theta_term - Octant::pi_times(d.r), expected);
                prop_assert_eq!(oracle_delta(&l, j).unwrap(), d);
            }
        }

        #[test]
        fn solved_share_hits_target(n in 2usize..5, j_raw in 0usize..5, input: bool, seed: u64, target in 0i64..8) {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let j = j_raw % n + 1;
            let shares: Vec<Octant> = (0..n).map(|_| Octant::random(&mut rng)).collect();
            let node_input = input.then_some(j);
            let a = if input { Outcome::random(&mut rng) } else { Outcome::ZERO };
            let t = crate::rsp::all_outcome_vectors(node_input, n).unwrap().swap_remove(rng.random_range(0..1 << (n - 1)));
            let solved = solve_share(node_input, &shares, &t, a, o(target)).unwrap();
            let mut s = shares.clone();
            s[node_input.unwrap_or(n) - 1] = solved;
            let theta = match node_input {
                Some(j) => theta_input(j, &s, &t, a).unwrap(),
                None => theta_aux(&s, &t).unwrap(),
            };
            prop_assert_eq!(theta_term(theta, a), o(target));
        }
    }
}
