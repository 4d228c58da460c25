use std::collections::BTreeMap;

use rand::Rng;

use super::{Flow, MbqcError, MeasurementPattern, Node};
use crate::quantum::{parity, Basis, Gate, Octant, Outcome, PureState, QubitId, Register};

/// `((−1)^{a ⊕ s_X}·φ + 4·s_Z + 4·a_pred) mod 8`.
pub fn corrected_angle(phi: Octant, a: Outcome, a_pred: Outcome, sx: Outcome, sz: Outcome) -> Octant {
    phi.flip_if(a ^ sx) + Octant::pi_times(sz) + Octant::pi_times(a_pred)
}

/// `(s_X, s_Z)` for node `j`, with `s` giving the signal of each earlier node.
pub fn dependency_signals(flow: &Flow, j: Node, s: impl Fn(Node) -> Outcome) -> (Outcome, Outcome) {
    (
        parity(flow.sx(j).iter().map(|&i| s(i))),
        parity(flow.sz(j).iter().map(|&i| s(i))),
    )
}

/// Executes `pattern` on `input` without pads: the first `n` qubits of
/// `input` are the input wires and any further qubits are an untouched
/// reference. Returns the corrected outputs (rows ascending) followed by the
/// reference qubits.
pub fn reference_execute<R: Rng + ?Sized>(
    pattern: &MeasurementPattern,
    input: &PureState,
    rng: &mut R,
) -> Result<PureState, MbqcError> {
    let graph = pattern.graph();
    let flow = pattern.flow();
    let n = graph.n_wires();
    if input.num_qubits() < n {
        return Err(MbqcError::InputSize {
            expected: n,
            got: input.num_qubits(),
        });
    }
    let mut reg: Register<()> = Register::new();
    let ids = reg.alloc((), input.clone());
    let (wires, reference) = ids.split_at(n);
    let mut qubit: BTreeMap<Node, QubitId> = graph.inputs().zip(wires.iter().copied()).collect();
    for j in graph.nodes().skip(n) {
        qubit.insert(j, reg.alloc_one((), PureState::plus(Octant::ZERO))?);
    }
    for &(a, b) in graph.edges() {
        reg.apply(&(), Gate::Cz(qubit[&a], qubit[&b]))?;
    }
    let mut s: BTreeMap<Node, Outcome> = BTreeMap::new();
    let signal = |s: &BTreeMap<Node, Outcome>, i: Node| s.get(&i).copied().unwrap_or_default();
    for &j in flow.order() {
        let (sx, sz) = dependency_signals(flow, j, |i| signal(&s, i));
        let angle = corrected_angle(pattern.angle(j), Outcome::ZERO, Outcome::ZERO, sx, sz);
        let b = reg.measure(&(), qubit[&j], Basis::Rotated(angle), rng)?;
        s.insert(j, b);
    }
    let mut out = Vec::new();
    for j in graph.outputs() {
        let (sx, sz) = dependency_signals(flow, j, |i| signal(&s, i));
        if sx.is_one() {
            reg.apply(&(), Gate::X(qubit[&j]))?;
        }
        if sz.is_one() {
            reg.apply(&(), Gate::Z(qubit[&j]))?;
        }
        out.push(qubit[&j]);
    }
    out.extend_from_slice(reference);
    Ok(reg.joint_state(&out)?)
}
