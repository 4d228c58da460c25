//! Remote state preparation.
//!
//! Each of the `n` clients sends one qubit per graph node. The server fuses
//! them with a chain of CNOTs and computational-basis measurements so that a
//! single qubit survives, carrying a rotation that combines every client's
//! secret angle. Registers are numbered `S_1..S_n` after the contributing
//! clients; `CNOT(S_c → S_t)` followed by measuring `S_t` passes `S_t`'s angle
//! into `S_c` with sign `(−1)^t`.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quantum::{Basis, Gate, Octant, Outcome, PureState, QuantumError, QubitId, Register};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RspError {
    #[error("remote state preparation needs at least 2 registers, got {0}")]
    TooFewRegisters(usize),
    #[error("client index {j} out of range 1..={n}")]
    IndexOutOfRange { j: usize, n: usize },
    #[error("expected {expected} {what}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("register {0} must hold a single qubit")]
    NotSingleQubit(usize),
    #[error("outcome recorded for register {0}, which is never measured")]
    UnexpectedOutcome(usize),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
}

/// Measurement outcomes `t^k`, keyed by the 1-based register index `k`.
/// Registers that are never measured read as 0.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OutcomeVector(BTreeMap<usize, Outcome>);

impl OutcomeVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// `t^k = bits[k−1]`.
    pub fn positional(bits: &[Outcome]) -> Self {
        OutcomeVector(bits.iter().enumerate().map(|(i, &b)| (i + 1, b)).collect())
    }

    pub fn insert(&mut self, k: usize, t: Outcome) {
        self.0.insert(k, t);
    }

    pub fn get(&self, k: usize) -> Outcome {
        self.0.get(&k).copied().unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, Outcome)> + '_ {
        self.0.iter().map(|(&k, &t)| (k, t))
    }

    /// `⊕_{i=from}^{to} t^i`.
    pub fn parity(&self, from: usize, to: usize) -> Outcome {
        self.0.range(from..=to).fold(Outcome::ZERO, |acc, (_, &t)| acc ^ t)
    }
}

/// One server action of a preparation chain, on 1-based register indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RspStep {
    Cnot { control: usize, target: usize },
    Measure(usize),
}

/// Chain for a node without quantum input: fold `S_1` into `S_2`, then into
/// `S_3`, up to `S_n`, which survives.
pub fn aux_schedule(n: usize) -> Result<Vec<RspStep>, RspError> {
    if n < 2 {
        return Err(RspError::TooFewRegisters(n));
    }
    Ok((1..n)
        .flat_map(|k| {
            [
                RspStep::Cnot {
                    control: k + 1,
                    target: k,
                },
                RspStep::Measure(k),
            ]
        })
        .collect())
}

/// Chain for client `j`'s input node: the other clients' qubits are folded
/// together, skipping over `S_j`, and the last one is folded into `S_j`,
/// which survives.
pub fn input_schedule(j: usize, n: usize) -> Result<Vec<RspStep>, RspError> {
    if n < 2 {
        return Err(RspError::TooFewRegisters(n));
    }
    if j == 0 || j > n {
        return Err(RspError::IndexOutOfRange { j, n });
    }
    let mut steps = Vec::new();
    for k in 1..n {
        if k == j {
            continue;
        }
        if k == n - 1 && j == n {
            break;
        }
        let control = if k + 1 == j { k + 2 } else { k + 1 };
        steps.push(RspStep::Cnot { control, target: k });
        steps.push(RspStep::Measure(k));
    }
    let last = if j == n { n - 1 } else { n };
    steps.push(RspStep::Cnot {
        control: j,
        target: last,
    });
    steps.push(RspStep::Measure(last));
    Ok(steps)
}

/// Runs `schedule` on `registers` (indexed `1..=n`) held by `actor`.
/// `measure` performs each computational-basis measurement, which lets the
/// caller sample or force branches.
pub fn execute_schedule<O, F>(
    reg: &mut Register<O>,
    actor: &O,
    registers: &BTreeMap<usize, QubitId>,
    schedule: &[RspStep],
    mut measure: F,
) -> Result<OutcomeVector, RspError>
where
    O: Clone + PartialEq + std::fmt::Debug,
    F: FnMut(&mut Register<O>, usize, QubitId) -> Result<Outcome, QuantumError>,
{
    let q = |k: usize| {
        registers.get(&k).copied().ok_or(RspError::IndexOutOfRange {
            j: k,
            n: registers.len(),
        })
    };
    let mut t = OutcomeVector::new();
    for step in schedule {
        match *step {
            RspStep::Cnot { control, target } => reg.apply(
                actor,
                Gate::Cnot {
                    control: q(control)?,
                    target: q(target)?,
                },
            )?,
            RspStep::Measure(k) => {
                let b = measure(reg, k, q(k)?)?;
                t.insert(k, b);
            }
        }
    }
    Ok(t)
}

/// Outcome vector and surviving register of a preparation chain.
#[derive(Clone, Debug, PartialEq)]
pub struct RspResult {
    pub t: OutcomeVector,
    pub remaining_state: PureState,
}

fn single(states: &[PureState]) -> Result<(), RspError> {
    match states.iter().position(|s| s.num_qubits() != 1) {
        Some(i) => Err(RspError::NotSingleQubit(i + 1)),
        None => Ok(()),
    }
}

/// How measurements are resolved: sampled, or forced to a fixed branch.
enum Resolve<'a, R: ?Sized> {
    Sample(&'a mut R),
    Force(&'a OutcomeVector, &'a mut f64),
}

impl<R: Rng + ?Sized> Resolve<'_, R> {
    fn measure(&mut self, reg: &mut Register<()>, k: usize, id: QubitId) -> Result<Outcome, QuantumError> {
        match self {
            Resolve::Sample(rng) => reg.measure(&(), id, Basis::Computational, *rng),
            Resolve::Force(t, p) => {
                let b = t.get(k);
                **p *= reg.collapse(&(), id, Basis::Computational, b)?;
                Ok(b)
            }
        }
    }
}

fn run_aux<R: Rng + ?Sized>(states: &[PureState], mut how: Resolve<'_, R>) -> Result<RspResult, RspError> {
    let n = states.len();
    let schedule = aux_schedule(n)?;
    single(states)?;
    let mut reg = Register::new();
    let regs: BTreeMap<usize, QubitId> = states
        .iter()
        .enumerate()
        .map(|(i, s)| (i + 1, reg.alloc((), s.clone())[0]))
        .collect();
    let t = execute_schedule(&mut reg, &(), &regs, &schedule, |r, k, id| how.measure(r, k, id))?;
    Ok(RspResult {
        t,
        remaining_state: reg.joint_state(&[regs[&n]])?,
    })
}

fn run_input<R: Rng + ?Sized>(
    padded_input: &PureState,
    aux_states: &[PureState],
    j: usize,
    n: usize,
    mut how: Resolve<'_, R>,
) -> Result<RspResult, RspError> {
    let schedule = input_schedule(j, n)?;
    if aux_states.len() != n - 1 {
        return Err(RspError::LengthMismatch {
            what: "auxiliary states",
            expected: n - 1,
            got: aux_states.len(),
        });
    }
    single(aux_states)?;
    if padded_input.num_qubits() == 0 {
        return Err(RspError::NotSingleQubit(j));
    }
    let mut reg = Register::new();
    let input_ids = reg.alloc((), padded_input.clone());
    let mut regs = BTreeMap::from([(j, input_ids[0])]);
    let others = (1..=n).filter(|&k| k != j);
    for (k, s) in others.zip(aux_states) {
        regs.insert(k, reg.alloc((), s.clone())[0]);
    }
    let t = execute_schedule(&mut reg, &(), &regs, &schedule, |r, k, id| how.measure(r, k, id))?;
    Ok(RspResult {
        t,
        remaining_state: reg.joint_state(&input_ids)?,
    })
}

/// Fuses `n ≥ 2` single-qubit states; the survivor is the last register.
pub fn run_rsp_aux<R: Rng + ?Sized>(states: &[PureState], rng: &mut R) -> Result<RspResult, RspError> {
    run_aux(states, Resolve::Sample(rng))
}

/// Fuses client `j`'s padded input (qubit 0 of `padded_input`; any further
/// qubits are a reference left untouched) with the other `n − 1` clients'
/// qubits, given in ascending client order.
pub fn run_rsp_input<R: Rng + ?Sized>(
    padded_input: &PureState,
    aux_states: &[PureState],
    j: usize,
    n: usize,
    rng: &mut R,
) -> Result<RspResult, RspError> {
    run_input(padded_input, aux_states, j, n, Resolve::Sample(rng))
}

/// The branch of [`run_rsp_aux`] with outcomes `t`, and its probability.
/// `Ok(None)` if the branch cannot occur.
pub fn rsp_aux_branch(states: &[PureState], t: &OutcomeVector) -> Result<Option<(f64, PureState)>, RspError> {
    let mut p = 1.0;
    forced(
        run_aux::<rand_chacha::ChaCha20Rng>(states, Resolve::Force(t, &mut p)),
        p,
    )
}

/// The branch of [`run_rsp_input`] with outcomes `t`, and its probability.
pub fn rsp_input_branch(
    padded_input: &PureState,
    aux_states: &[PureState],
    j: usize,
    n: usize,
    t: &OutcomeVector,
) -> Result<Option<(f64, PureState)>, RspError> {
    let mut p = 1.0;
    let r = run_input::<rand_chacha::ChaCha20Rng>(padded_input, aux_states, j, n, Resolve::Force(t, &mut p));
    forced(r, p)
}

fn forced(r: Result<RspResult, RspError>, p: f64) -> Result<Option<(f64, PureState)>, RspError> {
    match r {
        Ok(res) => Ok(Some((p, res.remaining_state))),
        Err(RspError::Quantum(QuantumError::ImpossibleOutcome)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Registers measured by the chain for client `j`'s input node (`None` for
/// a node without input).
pub fn measured_registers(j: Option<usize>, n: usize) -> Result<Vec<usize>, RspError> {
    let schedule = match j {
        Some(j) => input_schedule(j, n)?,
        None => aux_schedule(n)?,
    };
    Ok(schedule
        .into_iter()
        .filter_map(|s| match s {
            RspStep::Measure(k) => Some(k),
            RspStep::Cnot { .. } => None,
        })
        .collect())
}

fn check_t(t: &OutcomeVector, allowed: &[usize]) -> Result<(), RspError> {
    match t.iter().find(|(k, _)| !allowed.contains(k)) {
        Some((k, _)) => Err(RspError::UnexpectedOutcome(k)),
        None => Ok(()),
    }
}

/// Combined angle of a node without input:
/// `θ = θ^n + Σ_{k<n} (−1)^{⊕_{i=k}^{n−1} t^i} θ^k`.
pub fn theta_aux(shares: &[Octant], t: &OutcomeVector) -> Result<Octant, RspError> {
    let n = shares.len();
    check_t(t, &measured_registers(None, n)?)?;
    Ok(shares[n - 1]
        + (1..n)
            .map(|k| shares[k - 1].flip_if(t.parity(k, n - 1)))
            .sum::<Octant>())
}

/// Combined pad angle of client `j`'s input node:
/// `θ = θ^j + Σ_{k≠j} (−1)^{⊕_{i=k}^{n} t^i ⊕ a} θ^k`.
pub fn theta_input(j: usize, shares: &[Octant], t: &OutcomeVector, a: Outcome) -> Result<Octant, RspError> {
    let n = shares.len();
    check_t(t, &measured_registers(Some(j), n)?)?;
    Ok(shares[j - 1]
        + (1..=n)
            .filter(|&k| k != j)
            .map(|k| shares[k - 1].flip_if(t.parity(k, n) ^ a))
            .sum::<Octant>())
}

/// Every outcome vector the chain can produce.
pub fn all_outcome_vectors(j: Option<usize>, n: usize) -> Result<Vec<OutcomeVector>, RspError> {
    let regs = measured_registers(j, n)?;
    Ok((0..1u32 << regs.len())
        .map(|bits| {
            let mut t = OutcomeVector::new();
            for (i, &k) in regs.iter().enumerate() {
                t.insert(k, Outcome::from(bits >> i & 1 == 1));
            }
            t
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{trace_distance, DensityMatrix};
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn plus(shares: &[Octant]) -> Vec<PureState> {
        shares.iter().map(|&t| PureState::plus(t)).collect()
    }

    fn random_shares(n: usize, rng: &mut ChaCha20Rng) -> Vec<Octant> {
        (0..n).map(|_| Octant::random(rng)).collect()
    }

    #[test]
    fn schedules_follow_the_chain_rules() {
        use RspStep::*;
        assert_eq!(
            aux_schedule(3).unwrap(),
            vec![
                Cnot { control: 2, target: 1 },
                Measure(1),
                Cnot { control: 3, target: 2 },
                Measure(2)
            ]
        );
        assert_eq!(
            input_schedule(2, 3).unwrap(),
            vec![
                Cnot { control: 3, target: 1 },
                Measure(1),
                Cnot { control: 2, target: 3 },
                Measure(3)
            ]
        );
        assert_eq!(
            input_schedule(3, 3).unwrap(),
            vec![
                Cnot { control: 2, target: 1 },
                Measure(1),
                Cnot { control: 3, target: 2 },
                Measure(2)
            ]
        );
        assert_eq!(
            input_schedule(1, 2).unwrap(),
            vec![Cnot { control: 1, target: 2 }, Measure(2)]
        );
        assert!(input_schedule(0, 3).is_err() && input_schedule(4, 3).is_err());
        assert!(aux_schedule(1).is_err());
        for n in 2..=5 {
            for j in 1..=n {
                let regs = measured_registers(Some(j), n).unwrap();
                assert_eq!(regs.len(), n - 1);
                assert!(!regs.contains(&j));
            }
        }
    }

    #[test]
    fn two_register_base_case() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for _ in 0..20 {
            let s = random_shares(2, &mut rng);
            let res = run_rsp_aux(&plus(&s), &mut rng).unwrap();
            let expected = s[1] + s[0].flip_if(res.t.get(1));
            assert!(res.remaining_state.approx_eq(&PureState::plus(expected)));
            assert_eq!(theta_aux(&s, &res.t).unwrap(), expected);
        }
        let zero = [Octant::ZERO; 4];
        for t in all_outcome_vectors(None, 4).unwrap() {
            let (_, s) = rsp_aux_branch(&plus(&zero), &t).unwrap().unwrap();
            assert!(s.approx_eq(&PureState::plus(Octant::ZERO)));
        }
    }

    #[test]
    fn aux_chain_matches_closed_form_on_every_branch() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        for n in 2..=5 {
            for _ in 0..50 {
                let s = random_shares(n, &mut rng);
                let mut total = 0.0;
                for t in all_outcome_vectors(None, n).unwrap() {
                    let (p, state) = rsp_aux_branch(&plus(&s), &t).unwrap().unwrap();
                    total += p;
                    let f = state.fidelity(&PureState::plus(theta_aux(&s, &t).unwrap())).unwrap();
                    assert!(f >= 1.0 - 1e-9, "n={n} t={t:?} fidelity {f}");
                }
                assert!((total - 1.0).abs() < 1e-12);
            }
        }
    }

    fn unpad(state: &PureState, a: Outcome, theta: Octant) -> PureState {
        let mut s = state.clone();
        if a.is_one() {
            s.apply(Gate::X(0)).unwrap();
        }
        s.with(Gate::ZRot(0, -theta)).unwrap()
    }

    fn pad(state: &PureState, a: Outcome, theta: Octant) -> PureState {
        let s = state.clone().with(Gate::ZRot(0, theta)).unwrap();
        if a.is_one() {
            s.with(Gate::X(0)).unwrap()
        } else {
            s
        }
    }

    #[test]
    fn input_chain_matches_closed_form_on_every_branch() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        // Input entangled with a reference qubit so that phases are checked too.
        let psi = PureState::normalized(vec![
            Complex64::new(0.5, 0.1),
            Complex64::new(0.0, 0.3),
            Complex64::new(-0.2, 0.4),
            Complex64::new(0.5, -0.4),
        ])
        .unwrap();
        for n in 2..=5 {
            for j in 1..=n {
                for _ in 0..50 {
                    let s = random_shares(n, &mut rng);
                    let a = Outcome::random(&mut rng);
                    let padded = pad(&psi, a, s[j - 1]);
                    let aux: Vec<_> = (1..=n).filter(|&k| k != j).map(|k| PureState::plus(s[k - 1])).collect();
                    let mut total = 0.0;
                    for t in all_outcome_vectors(Some(j), n).unwrap() {
                        let (p, out) = rsp_input_branch(&padded, &aux, j, n, &t).unwrap().unwrap();
                        total += p;
                        let theta = theta_input(j, &s, &t, a).unwrap();
                        let f = unpad(&out, a, theta).fidelity(&psi).unwrap();
                        assert!(f >= 1.0 - 1e-9, "n={n} j={j} t={t:?} fidelity {f}");
                    }
                    assert!((total - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn sampled_input_chain_stays_padded() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let psi = PureState::plus(Octant::new(3));
        for _ in 0..20 {
            let s = random_shares(2, &mut rng);
            let a = Outcome::random(&mut rng);
            let res = run_rsp_input(&pad(&psi, a, s[0]), &plus(&s[1..]), 1, 2, &mut rng).unwrap();
            let predicted = s[0] + s[1].flip_if(res.t.get(2) ^ a);
            assert_eq!(theta_input(1, &s, &res.t, a).unwrap(), predicted);
            assert!(unpad(&res.remaining_state, a, predicted).approx_eq(&psi));
        }
    }

    #[test]
    fn closed_form_identities() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for n in 2..=4 {
            for j in 1..=n {
                let s = random_shares(n, &mut rng);
                for t in all_outcome_vectors(Some(j), n).unwrap() {
                    let plain = theta_input(j, &s, &t, Outcome::ZERO).unwrap();
                    let flipped = theta_input(j, &s, &t, Outcome::ONE).unwrap();
                    assert_eq!(flipped, s[j - 1] + s[j - 1] - plain);
                }
            }
            let zero_t = OutcomeVector::positional(&vec![Outcome::ZERO; n - 1]);
            let s = random_shares(n, &mut rng);
            assert_eq!(theta_aux(&s, &zero_t).unwrap(), s.iter().copied().sum());
        }
        let mut t = OutcomeVector::new();
        t.insert(2, Outcome::ONE);
        assert!(matches!(
            theta_input(2, &[Octant::ZERO; 3], &t, Outcome::ZERO),
            Err(RspError::UnexpectedOutcome(2))
        ));
        assert!(run_rsp_input(&PureState::zero(1).unwrap(), &[], 1, 2, &mut rng).is_err());
    }

    #[test]
    fn outcomes_are_unbiased() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        for n in 2..=4 {
            let s = random_shares(n, &mut rng);
            let states = plus(&s);
            for t in all_outcome_vectors(None, n).unwrap() {
                let (p, _) = rsp_aux_branch(&states, &t).unwrap().unwrap();
                assert!((p - 0.5f64.powi(n as i32 - 1)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn averaging_one_share_hides_the_angle() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        for n in 2..=4 {
            let mut s = random_shares(n, &mut rng);
            let t = all_outcome_vectors(None, n).unwrap().pop().unwrap();
            for k in 0..n {
                let parts: Vec<DensityMatrix> = Octant::all()
                    .map(|v| {
                        s[k] = v;
                        PureState::plus(theta_aux(&s, &t).unwrap()).to_density()
                    })
                    .collect();
                let avg = DensityMatrix::mixture(parts.iter().map(|r| (0.125, r))).unwrap();
                assert!(trace_distance(&avg, &DensityMatrix::maximally_mixed(1)).unwrap() < 1e-9);
            }
        }
    }
}
