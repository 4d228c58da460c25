//! What the server holds at each point of an honest run, averaged over all
//! client randomness.
//!
//! A view is a classical-quantum state: for every classical record the
//! server could have seen (the angles `δ` and results `b` so far) it stores
//! `p(record) ρ_record` on the qubits the server still holds. The fusion
//! outcomes `t` and the honesty-test bookkeeping are left out: honest test
//! outcomes are always 0, the survivor is uniform and `t` is uniform and
//! independent of the combined angle, so both are the same fixed factor in
//! every scenario of a given size.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use super::HarnessError;
use crate::mbqc::{MeasurementPattern, Node};
use crate::oracle::{compose_delta, phi_prime, theta_term};
use crate::parties::{Protocol, ProtocolConfig};
use crate::quantum::{
    trace_norm, Basis, DensityMatrix, Gate, Octant, Outcome, PureState, QuantumError, QubitId, Register,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(tag = "checkpoint", content = "round", rename_all = "snake_case")]
pub enum Checkpoint {
    /// Graph state built, before any angle is announced.
    AfterPreparation,
    /// After `k` measurement rounds.
    AfterRound(usize),
    /// Outputs handed over; only the classical record remains.
    OutputDelivery,
}

impl Checkpoint {
    /// Every checkpoint of a run with `q` rounds, in time order.
    pub fn all(q: usize) -> Vec<Checkpoint> {
        let mut v = vec![Checkpoint::AfterPreparation];
        v.extend((1..=q).map(Checkpoint::AfterRound));
        v.push(Checkpoint::OutputDelivery);
        v
    }

    fn index(self, q: usize) -> usize {
        match self {
            Checkpoint::AfterPreparation => 0,
            Checkpoint::AfterRound(k) => k.min(q),
            Checkpoint::OutputDelivery => q + 1,
        }
    }
}

/// Classical record seen by the server, in measurement order.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ViewKey {
    pub deltas: Vec<Octant>,
    pub b: Vec<Outcome>,
}

impl ViewKey {
    fn extended(&self, delta: Octant, b: Outcome) -> ViewKey {
        let mut k = self.clone();
        k.deltas.push(delta);
        k.b.push(b);
        k
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ViewMethod {
    Exact,
    Sampled { samples: usize },
}

#[derive(Clone, Debug)]
pub struct ServerView {
    checkpoint: Checkpoint,
    method: ViewMethod,
    qubits: usize,
    branches: BTreeMap<ViewKey, DMatrix<Complex64>>,
}

impl ServerView {
    fn new(checkpoint: Checkpoint, method: ViewMethod, qubits: usize) -> Self {
        ServerView {
            checkpoint,
            method,
            qubits,
            branches: BTreeMap::new(),
        }
    }

    fn add(&mut self, key: ViewKey, weight: f64, rho: &DMatrix<Complex64>) {
        let w = Complex64::new(weight, 0.0);
        match self.branches.get_mut(&key) {
            Some(m) => *m += rho * w,
            None => {
                self.branches.insert(key, rho * w);
            }
        }
    }

    pub fn checkpoint(&self) -> Checkpoint {
        self.checkpoint
    }

    pub fn method(&self) -> ViewMethod {
        self.method
    }

    /// Qubits the server holds at this checkpoint.
    pub fn num_qubits(&self) -> usize {
        self.qubits
    }

    /// Probability of each classical record.
    pub fn classical_distribution(&self) -> BTreeMap<ViewKey, f64> {
        self.branches.iter().map(|(k, m)| (k.clone(), m.trace().re)).collect()
    }

    /// The server's quantum state with the classical record forgotten.
    pub fn reduced_state(&self) -> Result<DensityMatrix, HarnessError> {
        let dim = 1usize << self.qubits;
        let sum = self
            .branches
            .values()
            .fold(DMatrix::zeros(dim, dim), |acc: DMatrix<Complex64>, m| acc + m);
        Ok(DensityMatrix::from_matrix(self.qubits, sum)?)
    }

    /// Trace distance between two classical-quantum views:
    /// `½ Σ_k ‖p(k)ρ_k − p'(k)ρ'_k‖₁`.
    pub fn distance(&self, other: &ServerView) -> Result<f64, HarnessError> {
        if self.qubits != other.qubits {
            return Err(HarnessError::SizeMismatch);
        }
        let mut total = 0.0;
        for (k, m) in &self.branches {
            total += match other.branches.get(k) {
                Some(o) => trace_norm(&(m - o)),
                None => trace_norm(m),
            };
        }
        for (k, o) in &other.branches {
            if !self.branches.contains_key(k) {
                total += trace_norm(o);
            }
        }
        Ok(total / 2.0)
    }
}

/// Limits on exact enumeration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ExactBudget {
    /// Graph plus reference qubits.
    pub max_qubits: usize,
    /// Secret assignments times measurement branches.
    pub max_branches: u128,
}

impl Default for ExactBudget {
    fn default() -> Self {
        ExactBudget {
            max_qubits: 12,
            max_branches: 1 << 22,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Averaging {
    Exact(ExactBudget),
    /// Monte Carlo over full protocol runs with `m` test copies.
    Sampled {
        samples: usize,
        m: usize,
        seed: u64,
    },
}

/// Effective secrets of one node: combined angle, pad and mask.
#[derive(Clone, Copy, Debug, Default)]
struct NodeSecrets {
    theta: Octant,
    a: Outcome,
    r: Outcome,
}

struct Enumerator<'a> {
    pattern: &'a MeasurementPattern,
    secrets: BTreeMap<Node, NodeSecrets>,
    qubit: BTreeMap<Node, QubitId>,
    views: Vec<ServerView>,
}

impl Enumerator<'_> {
    fn remaining(&self, measured: usize) -> Vec<QubitId> {
        let done = &self.pattern.flow().order()[..measured];
        self.qubit
            .iter()
            .filter(|(j, _)| !done.contains(j))
            .map(|(_, &id)| id)
            .collect()
    }

    fn explore(
        &mut self,
        reg: &Register<()>,
        idx: usize,
        s: &mut BTreeMap<Node, Outcome>,
        key: &ViewKey,
        weight: f64,
    ) -> Result<(), HarnessError> {
        let order = self.pattern.flow().order();
        let q = order.len();
        if idx == q {
            self.views[q + 1].add(key.clone(), weight, &DMatrix::identity(1, 1));
            return Ok(());
        }
        let j = order[idx];
        let sec = self.secrets[&j];
        let pad = |i: Node| self.secrets.get(&i).map(|x| x.a).unwrap_or_default();
        let signal = |i: Node| s.get(&i).copied().unwrap_or_default();
        let delta = compose_delta(
            phi_prime(self.pattern, j, pad, signal),
            theta_term(sec.theta, sec.a),
            sec.r,
        );
        for b in Outcome::both() {
            let mut next = reg.clone();
            let p = match next.collapse(&(), self.qubit[&j], Basis::Rotated(delta), b) {
                Ok(p) => p,
                Err(QuantumError::ImpossibleOutcome) => continue,
                Err(e) => return Err(e.into()),
            };
            let key = key.extended(delta, b);
            let held = self.remaining(idx + 1);
            if !held.is_empty() {
                let rho = next.reduced_density(&held)?;
                self.views[idx + 1].add(key.clone(), weight * p, rho.matrix());
            }
            s.insert(j, b ^ sec.r);
            self.explore(&next, idx + 1, s, &key, weight * p)?;
            s.remove(&j);
        }
        Ok(())
    }
}

fn check_inputs(inputs: &PureState, pattern: &MeasurementPattern) -> Result<(), HarnessError> {
    let n = pattern.n_wires();
    if inputs.num_qubits() < n {
        return Err(HarnessError::InvalidInput(format!(
            "{n} clients need {n} input qubits, got {}",
            inputs.num_qubits()
        )));
    }
    Ok(())
}

fn empty_views(pattern: &MeasurementPattern, method: ViewMethod) -> Vec<ServerView> {
    let graph = pattern.graph();
    let total = graph.num_nodes();
    Checkpoint::all(graph.q())
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            let held = match c {
                Checkpoint::OutputDelivery => 0,
                _ => total - i,
            };
            ServerView::new(c, method, held)
        })
        .collect()
}

/// Exact views at every checkpoint, enumerating each measured node's
/// effective `(θ_j, a_j, r_j)` and every measurement branch.
pub fn exact_server_views(
    inputs: &PureState,
    pattern: &MeasurementPattern,
    budget: ExactBudget,
) -> Result<Vec<ServerView>, HarnessError> {
    check_inputs(inputs, pattern)?;
    let graph = pattern.graph();
    let n = graph.n_wires();
    let qubits = graph.num_nodes() + inputs.num_qubits() - n;
    if qubits > budget.max_qubits {
        return Err(HarnessError::BudgetExceeded(format!(
            "{qubits} qubits exceed the exact budget of {}",
            budget.max_qubits
        )));
    }
    let measured: Vec<Node> = graph.measured().collect();
    let radix = |j: Node| if graph.is_input(j) { 32u128 } else { 16 };
    let combos: u128 = measured.iter().map(|&j| radix(j)).product();
    let leaves = combos.saturating_mul(1 << measured.len());
    if leaves > budget.max_branches {
        return Err(HarnessError::BudgetExceeded(format!(
            "{leaves} branches exceed the exact budget of {}",
            budget.max_branches
        )));
    }
    let mut e = Enumerator {
        pattern,
        secrets: BTreeMap::new(),
        qubit: BTreeMap::new(),
        views: empty_views(pattern, ViewMethod::Exact),
    };
    let weight = 1.0 / combos as f64;
    for c in 0..combos {
        let mut rest = c;
        for &j in &measured {
            let digit = (rest % radix(j)) as u8;
            rest /= radix(j);
            e.secrets.insert(
                j,
                NodeSecrets {
                    theta: Octant::new(i64::from(digit % 8)),
                    r: Outcome::from(digit / 8 % 2 == 1),
                    a: Outcome::from(digit / 16 == 1),
                },
            );
        }
        let mut reg: Register<()> = Register::new();
        let ids = reg.alloc((), inputs.clone());
        e.qubit.clear();
        for j in graph.inputs() {
            let (id, sec) = (ids[j - 1], e.secrets[&j]);
            reg.apply(&(), Gate::ZRot(id, sec.theta))?;
            if sec.a.is_one() {
                reg.apply(&(), Gate::X(id))?;
            }
            e.qubit.insert(j, id);
        }
        for j in graph.nodes().skip(n) {
            let theta = e.secrets.get(&j).map(|s| s.theta).unwrap_or_default();
            e.qubit.insert(j, reg.alloc_one((), PureState::plus(theta))?);
        }
        for &(a, b) in graph.edges() {
            reg.apply(&(), Gate::Cz(e.qubit[&a], e.qubit[&b]))?;
        }
        let held = e.remaining(0);
        let rho = reg.reduced_density(&held)?;
        e.views[0].add(ViewKey::default(), weight, rho.matrix());
        e.explore(&reg, 0, &mut BTreeMap::new(), &ViewKey::default(), weight)?;
    }
    Ok(e.views)
}

/// Monte Carlo estimate of the views from real protocol runs.
pub fn sampled_server_views<R: Rng>(
    inputs: &PureState,
    pattern: &MeasurementPattern,
    samples: usize,
    m: usize,
    rng: &mut R,
) -> Result<Vec<ServerView>, HarnessError> {
    check_inputs(inputs, pattern)?;
    if samples == 0 {
        return Err(HarnessError::TooFewTrials { got: 0, need: 1 });
    }
    let mut views = empty_views(pattern, ViewMethod::Sampled { samples });
    let order = pattern.flow().order().to_vec();
    let q = order.len();
    let config = ProtocolConfig {
        m_copies: m,
        ..ProtocolConfig::default()
    };
    let weight = 1.0 / samples as f64;
    for _ in 0..samples {
        let mut run = Protocol::new(inputs, pattern.clone(), &config, ChaCha20Rng::from_rng(&mut *rng))?;
        run.prepare()?;
        let held = |run: &Protocol<ChaCha20Rng>| run.server().held().values().copied().collect::<Vec<_>>();
        let rho = run.network().register().reduced_density(&held(&run))?;
        views[0].add(ViewKey::default(), weight, rho.matrix());
        for (idx, &j) in order.iter().enumerate() {
            run.compute_round(j)?;
            let server = run.server();
            let key = ViewKey {
                deltas: order[..=idx].iter().map(|i| server.deltas()[i]).collect(),
                b: server.b_log().iter().map(|&(_, b)| b).collect(),
            };
            let ids = held(&run);
            if idx + 1 == q {
                views[q + 1].add(key.clone(), weight, &DMatrix::identity(1, 1));
            }
            let rho = run.network().register().reduced_density(&ids)?;
            views[idx + 1].add(key, weight, rho.matrix());
        }
    }
    Ok(views)
}

/// The server's view at one checkpoint.
pub fn server_view(
    inputs: &PureState,
    pattern: &MeasurementPattern,
    checkpoint: Checkpoint,
    averaging: Averaging,
) -> Result<ServerView, HarnessError> {
    let views = match averaging {
        Averaging::Exact(budget) => exact_server_views(inputs, pattern, budget)?,
        Averaging::Sampled { samples, m, seed } => {
            sampled_server_views(inputs, pattern, samples, m, &mut ChaCha20Rng::seed_from_u64(seed))?
        }
    };
    let q = pattern.graph().q();
    if let Checkpoint::AfterRound(k) = checkpoint {
        if k == 0 || k > q {
            return Err(HarnessError::InvalidInput(format!("round {k} outside 1..={q}")));
        }
    }
    Ok(views[checkpoint.index(q)].clone())
}

/// A computation the server might be asked to run blind.
#[derive(Clone, Debug)]
pub struct Scenario {
    /// Client inputs, optionally followed by a reference.
    pub inputs: PureState,
    pub pattern: MeasurementPattern,
}

#[derive(Clone, Debug, Serialize)]
pub struct BlindnessReport {
    pub distances: Vec<(Checkpoint, f64)>,
}

impl BlindnessReport {
    pub fn max_distance(&self) -> f64 {
        self.distances.iter().map(|&(_, d)| d).fold(0.0, f64::max)
    }
}

/// Exact distance between the server's views of two scenarios at every
/// checkpoint. The scenarios must agree on everything the server is
/// allowed to learn: graph dimensions and input size.
pub fn blindness_check(a: &Scenario, b: &Scenario, budget: ExactBudget) -> Result<BlindnessReport, HarnessError> {
    if !a.pattern.same_size(&b.pattern) || a.inputs.num_qubits() != b.inputs.num_qubits() {
        return Err(HarnessError::SizeMismatch);
    }
    let va = exact_server_views(&a.inputs, &a.pattern, budget)?;
    let vb = exact_server_views(&b.inputs, &b.pattern, budget)?;
    let distances = va
        .iter()
        .zip(&vb)
        .map(|(x, y)| Ok((x.checkpoint(), x.distance(y)?)))
        .collect::<Result<_, HarnessError>>()?;
    Ok(BlindnessReport { distances })
}
