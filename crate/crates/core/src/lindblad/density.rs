use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::fock::{OccupationState, SectorBasis};
use crate::linalg::hermitian_eigenvalues;

/// Largest tolerated `max |ρ - ρ†|`.
pub const HERMITICITY_TOL: f64 = 1e-10;
/// Largest tolerated `|tr ρ - 1|`.
pub const TRACE_TOL: f64 = 1e-8;
/// Most negative tolerated eigenvalue magnitude.
pub const POSITIVITY_TOL: f64 = 1e-8;

/// Deviations of a matrix from being a valid density matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InvariantReport {
    pub trace_error: f64,
    pub hermiticity_residual: f64,
    /// Smallest eigenvalue, when it was computed.
    pub min_eigenvalue: Option<f64>,
}

impl InvariantReport {
    pub fn measure(m: &DMatrix<Complex64>, with_spectrum: bool) -> Self {
        let trace = m.trace();
        let trace_error = (trace - Complex64::new(1.0, 0.0)).norm();
        let mut herm: f64 = 0.0;
        for i in 0..m.nrows() {
            for j in i..m.ncols() {
                herm = herm.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        let min_eigenvalue = with_spectrum.then(|| hermitian_eigenvalues(m).first().copied().unwrap_or(0.0));
        Self { trace_error, hermiticity_residual: herm, min_eigenvalue }
    }

    pub fn is_valid(&self) -> bool {
        self.trace_error <= TRACE_TOL
            && self.hermiticity_residual <= HERMITICITY_TOL
            && self.min_eigenvalue.is_none_or(|e| e >= -POSITIVITY_TOL)
    }

    pub fn describe(&self) -> String {
        format!(
            "|tr ρ - 1| = {:.3e}, max|ρ - ρ†| = {:.3e}, min eig = {}",
            self.trace_error,
            self.hermiticity_residual,
            self.min_eigenvalue.map_or("n/a".to_string(), |e| format!("{e:.3e}"))
        )
    }
}

/// Hermitian, unit-trace, positive semidefinite matrix (within the tolerances above).
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(DMatrix<Complex64>);

impl DensityMatrix {
    /// Validates all invariants, including positivity.
    pub fn new(m: DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(invalid(format!("density matrix must be square and non-empty, got {}x{}", m.nrows(), m.ncols())));
        }
        let report = InvariantReport::measure(&m, true);
        if !report.is_valid() {
            return Err(invalid(format!("not a density matrix: {}", report.describe())));
        }
        Ok(Self(m))
    }

    /// Wraps a matrix whose invariants the caller has already established.
    pub fn new_unchecked(m: DMatrix<Complex64>) -> Self {
        Self(m)
    }

    pub fn pure(basis: &SectorBasis, state: &OccupationState) -> Result<Self> {
        let k = basis.index_of(state)? - 1;
        let mut m = DMatrix::zeros(basis.dim(), basis.dim());
        m[(k, k)] = Complex64::new(1.0, 0.0);
        Ok(Self(m))
    }

    /// `|ψ⟩⟨ψ|` for a normalized vector.
    pub fn from_pure_vector(psi: &[Complex64]) -> Result<Self> {
        let n: f64 = psi.iter().map(|x| x.norm_sqr()).sum();
        if (n - 1.0).abs() > TRACE_TOL {
            return Err(invalid(format!("state vector has norm² {n}")));
        }
        let d = psi.len();
        Ok(Self(DMatrix::from_fn(d, d, |i, j| psi[i] * psi[j].conj())))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim) * Complex64::new(1.0 / dim as f64, 0.0))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.0
    }

    pub fn report(&self, with_spectrum: bool) -> InvariantReport {
        InvariantReport::measure(&self.0, with_spectrum)
    }

    /// Real diagonal in storage order.
    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.0[(i, i)].re).collect()
    }

    /// `½ Σ |λ_i(ρ - σ)|`
    pub fn trace_distance(&self, other: &Self) -> f64 {
        let diff = &self.0 - &other.0;
        0.5 * hermitian_eigenvalues(&diff).iter().map(|e| e.abs()).sum::<f64>()
    }
}
