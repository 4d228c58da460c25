use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::Rng;

use super::{Basis, DensityMatrix, Gate, Octant, Outcome, QuantumError};

/// Registers larger than this are refused.
pub const MAX_QUBITS: usize = 24;

/// Tolerance for normalization checks on amplitude vectors.
pub const NORM_TOLERANCE: f64 = 1e-9;

/// Fidelity threshold for "same state up to global phase".
pub const STATE_EQ_TOLERANCE: f64 = 1e-9;

pub(crate) fn phase(theta: Octant) -> Complex64 {
    Complex64::from_polar(1.0, theta.radians())
}

/// Projection coefficients `(⟨v|0⟩, ⟨v|1⟩)` for the basis vector selected by `outcome`.
fn bra(basis: Basis, outcome: Outcome) -> (Complex64, Complex64) {
    let s = Complex64::new(FRAC_1_SQRT_2, 0.0);
    match (basis, outcome.is_one()) {
        (Basis::Computational, false) => (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)),
        (Basis::Computational, true) => (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)),
        (Basis::Rotated(d), false) => (s, s * phase(d).conj()),
        (Basis::Rotated(d), true) => (s, -s * phase(d).conj()),
    }
}

/// A normalized pure state of a small qubit register.
///
/// Qubit 0 is the most significant bit of the amplitude index, so
/// `a.tensor(&b)` places the qubits of `a` before those of `b`.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    num_qubits: usize,
    amps: Vec<Complex64>,
}

impl PureState {
    /// `|0…0⟩` on `n` qubits.
    pub fn zero(n: usize) -> Result<Self, QuantumError> {
        check_size(n)?;
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(PureState { num_qubits: n, amps })
    }

    /// The empty register (one amplitude, zero qubits).
    pub fn empty() -> Self {
        PureState {
            num_qubits: 0,
            amps: vec![Complex64::new(1.0, 0.0)],
        }
    }

    pub fn basis_state(bits: &[Outcome]) -> Result<Self, QuantumError> {
        let mut s = PureState::zero(bits.len())?;
        let idx = bits.iter().fold(0usize, |acc, b| (acc << 1) | usize::from(b.value()));
        s.amps[0] = Complex64::new(0.0, 0.0);
        s.amps[idx] = Complex64::new(1.0, 0.0);
        Ok(s)
    }

    /// `(|0⟩ + e^{iθ}|1⟩)/√2`.
    pub fn plus(theta: Octant) -> Self {
        let s = Complex64::new(FRAC_1_SQRT_2, 0.0);
        PureState {
            num_qubits: 1,
            amps: vec![s, s * phase(theta)],
        }
    }

    /// `(|00⟩ + |11⟩)/√2`.
    pub fn epr() -> Self {
        let s = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let z = Complex64::new(0.0, 0.0);
        PureState {
            num_qubits: 2,
            amps: vec![s, z, z, s],
        }
    }

    /// Builds a state from amplitudes, which must already be normalized.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self, QuantumError> {
        let len = amps.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(QuantumError::BadAmplitudeCount(len));
        }
        let n = len.trailing_zeros() as usize;
        check_size(n)?;
        let s = PureState { num_qubits: n, amps };
        let norm = s.norm();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(QuantumError::NotNormalized(norm));
        }
        Ok(s)
    }

    /// Like [`PureState::from_amplitudes`] but rescales instead of rejecting.
    pub fn normalized(amps: Vec<Complex64>) -> Result<Self, QuantumError> {
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-300 {
            return Err(QuantumError::NotNormalized(norm));
        }
        PureState::from_amplitudes(amps.into_iter().map(|a| a / norm).collect())
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    fn shift(&self, q: usize) -> usize {
        self.num_qubits - 1 - q
    }

    fn check(&self, q: usize) -> Result<(), QuantumError> {
        if q >= self.num_qubits {
            Err(QuantumError::QubitOutOfRange {
                qubit: q,
                num_qubits: self.num_qubits,
            })
        } else {
            Ok(())
        }
    }

    pub fn tensor(&self, other: &PureState) -> Result<PureState, QuantumError> {
        let n = self.num_qubits + other.num_qubits;
        check_size(n)?;
        let mut amps = Vec::with_capacity(1 << n);
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        Ok(PureState { num_qubits: n, amps })
    }

    pub fn apply(&mut self, gate: Gate) -> Result<(), QuantumError> {
        for q in gate.qubits() {
            self.check(q)?;
        }
        match gate {
            Gate::X(q) => {
                let m = 1 << self.shift(q);
                for i in 0..self.amps.len() {
                    if i & m == 0 {
                        self.amps.swap(i, i | m);
                    }
                }
            }
            Gate::Z(q) => self.apply_phase(q, phase(Octant::PI)),
            Gate::ZRot(q, t) => self.apply_phase(q, phase(t)),
            Gate::H(q) => {
                let m = 1 << self.shift(q);
                for i in 0..self.amps.len() {
                    if i & m == 0 {
                        let (a, b) = (self.amps[i], self.amps[i | m]);
                        self.amps[i] = (a + b) * FRAC_1_SQRT_2;
                        self.amps[i | m] = (a - b) * FRAC_1_SQRT_2;
                    }
                }
            }
            Gate::Cnot { control, target } => {
                if control == target {
                    return Err(QuantumError::SameQubit(control));
                }
                let (mc, mt) = (1 << self.shift(control), 1 << self.shift(target));
                for i in 0..self.amps.len() {
                    if i & mc != 0 && i & mt == 0 {
                        self.amps.swap(i, i | mt);
                    }
                }
            }
            Gate::Cz(a, b) => {
                if a == b {
                    return Err(QuantumError::SameQubit(a));
                }
                let mask = (1 << self.shift(a)) | (1 << self.shift(b));
                for (i, amp) in self.amps.iter_mut().enumerate() {
                    if i & mask == mask {
                        *amp = -*amp;
                    }
                }
            }
        }
        Ok(())
    }

    fn apply_phase(&mut self, q: usize, p: Complex64) {
        let m = 1 << self.shift(q);
        for (i, amp) in self.amps.iter_mut().enumerate() {
            if i & m != 0 {
                *amp *= p;
            }
        }
    }

    pub fn with(mut self, gate: Gate) -> Result<Self, QuantumError> {
        self.apply(gate)?;
        Ok(self)
    }

    /// The unnormalized state of the other qubits after projecting `q` onto
    /// the basis vector `outcome`, together with its squared norm.
    fn project(&self, q: usize, basis: Basis, outcome: Outcome) -> (f64, Vec<Complex64>) {
        let (c0, c1) = bra(basis, outcome);
        let low_bits = self.shift(q);
        let low_mask = (1usize << low_bits) - 1;
        let half = self.amps.len() / 2;
        let mut out = Vec::with_capacity(half);
        for r in 0..half {
            let i0 = ((r & !low_mask) << 1) | (r & low_mask);
            let i1 = i0 | (1 << low_bits);
            out.push(c0 * self.amps[i0] + c1 * self.amps[i1]);
        }
        let p = out.iter().map(|a| a.norm_sqr()).sum();
        (p, out)
    }

    /// Probabilities of outcomes 0 and 1 when measuring `q` in `basis`.
    pub fn probabilities(&self, q: usize, basis: Basis) -> Result<[f64; 2], QuantumError> {
        self.check(q)?;
        let p0 = self.project(q, basis, Outcome::ZERO).0;
        let p1 = self.project(q, basis, Outcome::ONE).0;
        Ok([p0, p1])
    }

    /// Forces the measurement branch `outcome`. Returns the branch probability
    /// and the normalized post-measurement state with `q` removed, or `None`
    /// for the state when the branch has probability zero.
    pub fn collapse(&self, q: usize, basis: Basis, outcome: Outcome) -> Result<(f64, Option<PureState>), QuantumError> {
        self.check(q)?;
        let (p, amps) = self.project(q, basis, outcome);
        if p < 1e-14 {
            return Ok((p, None));
        }
        let norm = p.sqrt();
        Ok((
            p,
            Some(PureState {
                num_qubits: self.num_qubits - 1,
                amps: amps.into_iter().map(|a| a / norm).collect(),
            }),
        ))
    }

    /// Samples a measurement of `q` in `basis`; the measured qubit is removed
    /// and the remaining qubits are re-indexed downward.
    pub fn measure<R: Rng + ?Sized>(
        &self,
        q: usize,
        basis: Basis,
        rng: &mut R,
    ) -> Result<(Outcome, PureState), QuantumError> {
        let [p0, _] = self.probabilities(q, basis)?;
        let u: f64 = rng.random();
        let first = Outcome::from(u >= p0);
        match self.collapse(q, basis, first)? {
            (_, Some(s)) => Ok((first, s)),
            (_, None) => {
                let other = first ^ Outcome::ONE;
                let (_, s) = self.collapse(q, basis, other)?;
                s.map(|s| (other, s)).ok_or(QuantumError::ImpossibleOutcome)
            }
        }
    }

    pub fn measure_rotated<R: Rng + ?Sized>(
        &self,
        q: usize,
        delta: Octant,
        rng: &mut R,
    ) -> Result<(Outcome, PureState), QuantumError> {
        self.measure(q, Basis::Rotated(delta), rng)
    }

    pub fn measure_computational<R: Rng + ?Sized>(
        &self,
        q: usize,
        rng: &mut R,
    ) -> Result<(Outcome, PureState), QuantumError> {
        self.measure(q, Basis::Computational, rng)
    }

    pub fn inner(&self, other: &PureState) -> Result<Complex64, QuantumError> {
        if self.num_qubits != other.num_qubits {
            return Err(QuantumError::DimensionMismatch(self.num_qubits, other.num_qubits));
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &PureState) -> Result<f64, QuantumError> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// Equality up to global phase.
    pub fn approx_eq(&self, other: &PureState) -> bool {
        matches!(self.fidelity(other), Ok(f) if f >= 1.0 - STATE_EQ_TOLERANCE)
    }

    /// New state whose qubit `k` is the old qubit `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Result<PureState, QuantumError> {
        let n = self.num_qubits;
        let mut seen = vec![false; n];
        if order.len() != n {
            return Err(QuantumError::DimensionMismatch(order.len(), n));
        }
        for &q in order {
            self.check(q)?;
            if std::mem::replace(&mut seen[q], true) {
                return Err(QuantumError::SameQubit(q));
            }
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        for (old, a) in self.amps.iter().enumerate() {
            let mut new = 0usize;
            for &src in order {
                new = (new << 1) | ((old >> (n - 1 - src)) & 1);
            }
            amps[new] = *a;
        }
        Ok(PureState { num_qubits: n, amps })
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix::from_pure(self)
    }

    /// Reduced density matrix on `keep`, in the order given.
    pub fn reduced_density(&self, keep: &[usize]) -> Result<DensityMatrix, QuantumError> {
        if keep.is_empty() {
            return Err(QuantumError::EmptyKeep);
        }
        let rest: Vec<usize> = (0..self.num_qubits).filter(|q| !keep.contains(q)).collect();
        let mut order = keep.to_vec();
        order.extend(&rest);
        let p = self.permuted(&order)?;
        let dk = 1usize << keep.len();
        let dr = 1usize << rest.len();
        let mut m = nalgebra::DMatrix::<Complex64>::zeros(dk, dk);
        for i in 0..dk {
            for j in 0..dk {
                let mut acc = Complex64::new(0.0, 0.0);
                for c in 0..dr {
                    acc += p.amps[i * dr + c] * p.amps[j * dr + c].conj();
                }
                m[(i, j)] = acc;
            }
        }
        Ok(DensityMatrix::from_matrix_unchecked(keep.len(), m))
    }
}

fn check_size(n: usize) -> Result<(), QuantumError> {
    if n > MAX_QUBITS {
        Err(QuantumError::TooManyQubits(n))
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn plus_state_examples() {
        let s = FRAC_1_SQRT_2;
        let p0 = PureState::plus(Octant::new(0));
        assert!(close(p0.amps[0], c(s, 0.0)) && close(p0.amps[1], c(s, 0.0)));
        let p4 = PureState::plus(Octant::new(4));
        assert!(close(p4.amps[1], c(-s, 0.0)));
        let p1 = PureState::plus(Octant::new(1));
        assert!(close(p1.amps[1], c(0.5, 0.5)));
    }

    #[test]
    fn zrot_on_plus_is_rotated_plus() {
        let s = PureState::plus(Octant::ZERO)
            .with(Gate::ZRot(0, Octant::new(2)))
            .unwrap();
        assert!(s.approx_eq(&PureState::plus(Octant::new(2))));
    }

    #[test]
    fn x_then_zrot_matches_conjugated_order() {
        // Direct 2x2 products: Z(θ)X and X Z(−θ) differ by the phase e^{iθ}.
        for t in Octant::all() {
            let e = phase(t);
            let zx = [[c(0.0, 0.0), c(1.0, 0.0)], [e, c(0.0, 0.0)]];
            let xz = [[c(0.0, 0.0), e.conj()], [c(1.0, 0.0), c(0.0, 0.0)]];
            for r in 0..2 {
                for k in 0..2 {
                    assert!(close(zx[r][k], e * xz[r][k]));
                }
            }
            let psi = PureState::from_amplitudes(vec![c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
            let a = psi.clone().with(Gate::X(0)).unwrap().with(Gate::ZRot(0, t)).unwrap();
            let b = psi.with(Gate::ZRot(0, -t)).unwrap().with(Gate::X(0)).unwrap();
            assert!(a.approx_eq(&b));
            let ph = b.inner(&a).unwrap();
            assert!(close(ph, e));
        }
    }

    #[test]
    fn cnot_propagates_rotations() {
        // CNOT(control 1, target 0) on |+θ1⟩|+θ2⟩.
        for (t1, t2) in [(1, 3), (2, 5), (7, 6)] {
            let (t1, t2) = (Octant::new(t1), Octant::new(t2));
            let s = PureState::plus(t1)
                .tensor(&PureState::plus(t2))
                .unwrap()
                .with(Gate::Cnot { control: 1, target: 0 })
                .unwrap();
            let zero = PureState::basis_state(&[Outcome::ZERO]).unwrap();
            let one = PureState::basis_state(&[Outcome::ONE]).unwrap();
            let a = zero.tensor(&PureState::plus(t2 + t1)).unwrap();
            let b = one.tensor(&PureState::plus(t2 - t1)).unwrap();
            let e = phase(t1);
            let expected: Vec<_> = a
                .amps
                .iter()
                .zip(&b.amps)
                .map(|(x, y)| (x + e * y) * FRAC_1_SQRT_2)
                .collect();
            let expected = PureState::from_amplitudes(expected).unwrap();
            assert!(s.approx_eq(&expected));
        }
    }

    #[test]
    fn rotated_measurement_examples() {
        let s = PureState::plus(Octant::new(3));
        assert!((s.probabilities(0, Basis::Rotated(Octant::new(3))).unwrap()[0] - 1.0).abs() < 1e-12);
        let s = PureState::plus(Octant::new(7));
        assert!((s.probabilities(0, Basis::Rotated(Octant::new(3))).unwrap()[1] - 1.0).abs() < 1e-12);
        // |⟨+|+_{π/4}⟩|² = |1 + e^{iπ/4}|²/4.
        let s = PureState::plus(Octant::new(1));
        let direct = (c(1.0, 0.0) + phase(Octant::new(1))).norm_sqr() / 4.0;
        let p = s.probabilities(0, Basis::Rotated(Octant::ZERO)).unwrap();
        assert!((p[0] - direct).abs() < 1e-12);
        assert!((p[0] - 0.853_553_390_593_273_7).abs() < 1e-12);
    }

    #[test]
    fn computational_measurement_examples() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let (b, rest) = PureState::zero(1).unwrap().measure_computational(0, &mut rng).unwrap();
        assert_eq!(b, Outcome::ZERO);
        assert_eq!(rest.num_qubits(), 0);
        let p = PureState::plus(Octant::ZERO)
            .probabilities(0, Basis::Computational)
            .unwrap();
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);

        let bell = PureState::plus(Octant::ZERO)
            .tensor(&PureState::zero(1).unwrap())
            .unwrap()
            .with(Gate::Cnot { control: 0, target: 1 })
            .unwrap();
        for o in Outcome::both() {
            let (p, post) = bell.collapse(0, Basis::Computational, o).unwrap();
            assert!((p - 0.5).abs() < 1e-12);
            assert!(post.unwrap().approx_eq(&PureState::basis_state(&[o]).unwrap()));
        }
    }

    #[test]
    fn measurement_removes_the_right_qubit() {
        let s = PureState::basis_state(&[Outcome::ONE, Outcome::ZERO, Outcome::ONE]).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let (b, rest) = s.measure_computational(1, &mut rng).unwrap();
        assert_eq!(b, Outcome::ZERO);
        assert!(rest.approx_eq(&PureState::basis_state(&[Outcome::ONE, Outcome::ONE]).unwrap()));
    }

    #[test]
    fn index_errors() {
        let mut s = PureState::zero(2).unwrap();
        assert!(matches!(s.apply(Gate::H(2)), Err(QuantumError::QubitOutOfRange { .. })));
        assert!(matches!(
            s.apply(Gate::Cnot { control: 1, target: 1 }),
            Err(QuantumError::SameQubit(1))
        ));
        assert!(s.probabilities(5, Basis::Computational).is_err());
        assert!(PureState::from_amplitudes(vec![c(1.0, 0.0), c(1.0, 0.0)]).is_err());
    }

    fn arb_state(n: usize) -> impl Strategy<Value = PureState> {
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1 << n).prop_filter_map("nonzero", |v| {
            PureState::normalized(v.into_iter().map(|(a, b)| c(a, b)).collect()).ok()
        })
    }

    fn arb_gate(n: usize) -> impl Strategy<Value = Gate> {
        (0..6u8, 0..n, 0..n, 0i64..8).prop_filter_map("distinct", move |(k, a, b, t)| {
            let g = match k {
                0 => Gate::X(a),
                1 => Gate::Z(a),
                2 => Gate::ZRot(a, Octant::new(t)),
                3 => Gate::H(a),
                4 if a != b => Gate::Cnot { control: a, target: b },
                5 if a != b => Gate::Cz(a, b),
                _ => return None,
            };
            Some(g)
        })
    }

    proptest! {
        #[test]
        fn gates_preserve_norm(s in arb_state(3), gates in proptest::collection::vec(arb_gate(3), 0..40)) {
            let mut s = s;
            for g in gates {
                s.apply(g).unwrap();
            }
            prop_assert!((s.norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn rotations_add(s in arb_state(2), a in 0i64..8, b in 0i64..8) {
            let (a, b) = (Octant::new(a), Octant::new(b));
            let two = s.clone().with(Gate::ZRot(1, a)).unwrap().with(Gate::ZRot(1, b)).unwrap();
            let one = s.with(Gate::ZRot(1, a + b)).unwrap();
            for (x, y) in two.amps.iter().zip(&one.amps) {
                prop_assert!((x - y).norm() < 1e-12);
            }
        }

        #[test]
        fn x_conjugation_negates_rotation(s in arb_state(2), t in 0i64..8) {
            let t = Octant::new(t);
            let xzx = s.clone().with(Gate::X(0)).unwrap().with(Gate::ZRot(0, t)).unwrap().with(Gate::X(0)).unwrap();
            let z = s.with(Gate::ZRot(0, -t)).unwrap();
            prop_assert!(xzx.approx_eq(&z));
        }

        #[test]
        fn measurement_is_complete(s in arb_state(3), q in 0usize..3, d in 0i64..8, rotated: bool, seed: u64) {
            let basis = if rotated { Basis::Rotated(Octant::new(d)) } else { Basis::Computational };
            let [p0, p1] = s.probabilities(q, basis).unwrap();
            prop_assert!((p0 + p1 - 1.0).abs() < 1e-12);
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let (_, post) = s.measure(q, basis, &mut rng).unwrap();
            prop_assert_eq!(post.num_qubits(), 2);
            prop_assert!((post.norm() - 1.0).abs() < 1e-12);
        }
    }
}
