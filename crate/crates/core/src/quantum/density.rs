use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{PureState, QuantumError};

/// Tolerance for the Hermitian, unit-trace and positivity checks.
pub const DENSITY_TOLERANCE: f64 = 1e-10;
const PSD_TOLERANCE: f64 = 1e-9;

/// A density matrix on a small register, with the same qubit ordering as
/// [`PureState`].
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    num_qubits: usize,
    matrix: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// Checks all invariants before accepting the matrix.
    pub fn from_matrix(num_qubits: usize, matrix: DMatrix<Complex64>) -> Result<Self, QuantumError> {
        let dim = 1usize << num_qubits;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(QuantumError::DimensionMismatch(matrix.nrows(), dim));
        }
        let rho = DensityMatrix { num_qubits, matrix };
        rho.validate()?;
        Ok(rho)
    }

    pub(crate) fn from_matrix_unchecked(num_qubits: usize, matrix: DMatrix<Complex64>) -> Self {
        DensityMatrix { num_qubits, matrix }
    }

    pub fn from_pure(state: &PureState) -> Self {
        let v = nalgebra::DVector::from_column_slice(state.amplitudes());
        DensityMatrix {
            num_qubits: state.num_qubits(),
            matrix: &v * v.adjoint(),
        }
    }

    pub fn maximally_mixed(num_qubits: usize) -> Self {
        let dim = 1usize << num_qubits;
        let w = Complex64::new(1.0 / dim as f64, 0.0);
        DensityMatrix {
            num_qubits,
            matrix: DMatrix::from_diagonal_element(dim, dim, w),
        }
    }

    /// Convex combination `Σ wᵢ ρᵢ`; the weights must sum to one.
    pub fn mixture<'a, I>(parts: I) -> Result<Self, QuantumError>
    where
        I: IntoIterator<Item = (f64, &'a DensityMatrix)>,
    {
        let mut acc: Option<DensityMatrix> = None;
        for (w, rho) in parts {
            match &mut acc {
                None => {
                    acc = Some(DensityMatrix {
                        num_qubits: rho.num_qubits,
                        matrix: rho.matrix.scale(w),
                    })
                }
                Some(a) => {
                    if a.num_qubits != rho.num_qubits {
                        return Err(QuantumError::DimensionMismatch(a.num_qubits, rho.num_qubits));
                    }
                    a.matrix += rho.matrix.scale(w);
                }
            }
        }
        let rho = acc.ok_or(QuantumError::EmptyMixture)?;
        rho.validate()?;
        Ok(rho)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues(&self.matrix)
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn validate(&self) -> Result<(), QuantumError> {
        let herm = (&self.matrix - self.matrix.adjoint()).camax();
        if herm > DENSITY_TOLERANCE {
            return Err(QuantumError::NotHermitian(herm));
        }
        let tr = self.trace();
        if (tr - Complex64::new(1.0, 0.0)).norm() > DENSITY_TOLERANCE {
            return Err(QuantumError::BadTrace(tr.re));
        }
        let min = self.min_eigenvalue();
        if min < -PSD_TOLERANCE {
            return Err(QuantumError::NotPositive(min));
        }
        Ok(())
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        DensityMatrix {
            num_qubits: self.num_qubits + other.num_qubits,
            matrix: self.matrix.kronecker(&other.matrix),
        }
    }

    /// Reduced state on `keep`, listed in the order they should appear.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix, QuantumError> {
        if keep.is_empty() {
            return Err(QuantumError::EmptyKeep);
        }
        let n = self.num_qubits;
        for (i, &q) in keep.iter().enumerate() {
            if q >= n {
                return Err(QuantumError::QubitOutOfRange {
                    qubit: q,
                    num_qubits: n,
                });
            }
            if keep[..i].contains(&q) {
                return Err(QuantumError::SameQubit(q));
            }
        }
        let rest: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
        let index = |k: usize, e: usize| -> usize {
            let mut full = 0usize;
            for (pos, &q) in keep.iter().enumerate() {
                let bit = (k >> (keep.len() - 1 - pos)) & 1;
                full |= bit << (n - 1 - q);
            }
            for (pos, &q) in rest.iter().enumerate() {
                let bit = (e >> (rest.len() - 1 - pos)) & 1;
                full |= bit << (n - 1 - q);
            }
            full
        };
        let dk = 1usize << keep.len();
        let de = 1usize << rest.len();
        let mut out = DMatrix::<Complex64>::zeros(dk, dk);
        for e in 0..de {
            let idx: Vec<usize> = (0..dk).map(|k| index(k, e)).collect();
            for i in 0..dk {
                for j in 0..dk {
                    out[(i, j)] += self.matrix[(idx[i], idx[j])];
                }
            }
        }
        Ok(DensityMatrix {
            num_qubits: keep.len(),
            matrix: out,
        })
    }

    /// `⟨ψ|ρ|ψ⟩`.
    pub fn fidelity_with(&self, state: &PureState) -> Result<f64, QuantumError> {
        if state.num_qubits() != self.num_qubits {
            return Err(QuantumError::DimensionMismatch(self.num_qubits, state.num_qubits()));
        }
        let v = nalgebra::DVector::from_column_slice(state.amplitudes());
        Ok((v.adjoint() * &self.matrix * &v)[(0, 0)].re)
    }
}

fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Vec<f64> {
    let sym = (m + m.adjoint()).scale(0.5);
    sym.symmetric_eigenvalues().iter().copied().collect()
}

/// Trace norm of a Hermitian matrix (sum of absolute eigenvalues).
pub fn trace_norm(m: &DMatrix<Complex64>) -> f64 {
    hermitian_eigenvalues(m).into_iter().map(f64::abs).sum()
}

/// `½‖a − b‖₁`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64, QuantumError> {
    if a.num_qubits != b.num_qubits {
        return Err(QuantumError::DimensionMismatch(a.num_qubits, b.num_qubits));
    }
    Ok((0.5 * trace_norm(&(&a.matrix - &b.matrix))).clamp(0.0, 1.0))
}
