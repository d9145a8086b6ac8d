//! Lindblad dynamics on a fixed-filling basis.
//!
//! The generator is
//!
//! ```text
//! dρ/dt = -i[H, ρ] + Σ_j Γ_j (O_j ρ O_j† - ½{O_j† O_j, ρ})
//! ```
//!
//! evaluated matrix-free as `-i H_eff ρ + i ρ H_eff† + Σ_j Γ_j O_j ρ O_j†` with
//! `H_eff = H - (i/2) Σ_j Γ_j O_j† O_j`. The vectorized superoperator is only
//! assembled for the null-space steady-state solver.

mod density;
mod propagate;
mod steady;

pub use density::{DensityMatrix, InvariantReport, HERMITICITY_TOL, POSITIVITY_TOL, TRACE_TOL};
pub use propagate::{propagate, propagate_with, Method, PropagatorParams, Trajectory};
pub use steady::{steady_state_evolve, steady_state_nullspace, SteadyState, MAX_NULLSPACE_DIM};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::fock::{build_quadratic_operator, QuadraticTerm, SectorBasis};
use crate::gauge::Boundary;
use crate::sparse::SparseOperator;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Rates `Γ_j` attached to the jump operators.
#[derive(Clone, Debug, PartialEq)]
pub enum Rates {
    Uniform(f64),
    PerOperator(Vec<f64>),
}

/// Pair-hopping dissipation
/// `O_j = n_j - e^{iα} c†_j c_{j+l} + e^{-iα} c†_{j+l} c_j - n_{j+l}`.
#[derive(Clone, Debug, PartialEq)]
pub struct DissipationSpec {
    pub range: usize,
    pub phase: f64,
    pub rates: Rates,
    pub boundary: Boundary,
}

impl DissipationSpec {
    pub fn uniform(range: usize, phase: f64, rate: f64, boundary: Boundary) -> Self {
        Self { range, phase, rates: Rates::Uniform(rate), boundary }
    }

    /// Site pairs `(j, j + l)`, one-based, wrapping for periodic chains.
    pub fn pairs(&self, sites: usize) -> Result<Vec<(usize, usize)>> {
        if self.range == 0 {
            return Err(invalid("jump range must be at least 1"));
        }
        if self.range >= sites {
            return Err(invalid(format!("jump range {} must be smaller than the chain length {sites}", self.range)));
        }
        Ok(match self.boundary {
            Boundary::Periodic => (1..=sites).map(|j| (j, (j - 1 + self.range) % sites + 1)).collect(),
            Boundary::Open => (1..=sites - self.range).map(|j| (j, j + self.range)).collect(),
        })
    }

    pub fn rate_list(&self, count: usize) -> Result<Vec<f64>> {
        let rates = match &self.rates {
            Rates::Uniform(g) => vec![*g; count],
            Rates::PerOperator(v) if v.len() == count => v.clone(),
            Rates::PerOperator(v) => {
                return Err(invalid(format!("{} rates given for {count} jump operators", v.len())));
            }
        };
        if rates.iter().any(|g| !(*g >= 0.0) || !g.is_finite()) {
            return Err(invalid("dissipation rates must be finite and non-negative"));
        }
        Ok(rates)
    }
}

/// One jump operator per site pair.
pub fn build_jump_operators(basis: &SectorBasis, spec: &DissipationSpec) -> Result<Vec<SparseOperator>> {
    let phase = Complex64::from_polar(1.0, spec.phase);
    spec.pairs(basis.sites())?
        .into_iter()
        .map(|(j, k)| {
            build_quadratic_operator(
                basis,
                &[
                    QuadraticTerm::number(1.0, j),
                    QuadraticTerm::new(-phase, j, k),
                    QuadraticTerm::new(phase.conj(), k, j),
                    QuadraticTerm::number(-1.0, k),
                ],
            )
        })
        .collect()
}

/// Hamiltonian plus weighted jump operators; the generator of the dynamics.
#[derive(Clone, Debug)]
pub struct Lindbladian {
    hamiltonian: SparseOperator,
    jumps: Vec<(f64, SparseOperator)>,
    effective: SparseOperator,
}

impl Lindbladian {
    pub fn new(hamiltonian: SparseOperator, jumps: Vec<SparseOperator>, rates: &[f64]) -> Result<Self> {
        if jumps.len() != rates.len() {
            return Err(invalid(format!("{} rates for {} jump operators", rates.len(), jumps.len())));
        }
        let dim = hamiltonian.dim();
        if let Some(bad) = jumps.iter().find(|o| o.dim() != dim) {
            return Err(invalid(format!("jump operator of dimension {} with a Hamiltonian of dimension {dim}", bad.dim())));
        }
        if rates.iter().any(|g| !(*g >= 0.0) || !g.is_finite()) {
            return Err(invalid("dissipation rates must be finite and non-negative"));
        }
        let jumps: Vec<(f64, SparseOperator)> = rates.iter().copied().zip(jumps).filter(|(g, _)| *g > 0.0).collect();
        let mut effective = hamiltonian.clone();
        for (g, o) in &jumps {
            effective = effective.add(&o.adjoint().matmul(o).scale(Complex64::new(0.0, -0.5 * g)));
        }
        Ok(Self { hamiltonian, jumps, effective })
    }

    /// Closed-system generator.
    pub fn unitary(hamiltonian: SparseOperator) -> Self {
        Self { effective: hamiltonian.clone(), hamiltonian, jumps: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    pub fn hamiltonian(&self) -> &SparseOperator {
        &self.hamiltonian
    }

    pub fn is_dissipative(&self) -> bool {
        !self.jumps.is_empty()
    }

    /// `out = ℒ[ρ]`; `scratch` must have the shape of `ρ`.
    pub fn apply_into(&self, rho: &DMatrix<Complex64>, out: &mut DMatrix<Complex64>, scratch: &mut DMatrix<Complex64>) {
        out.fill(Complex64::new(0.0, 0.0));
        self.effective.left_mul_acc(-I, rho, out);
        self.effective.right_mul_adjoint_acc(I, rho, out);
        for (g, o) in &self.jumps {
            scratch.fill(Complex64::new(0.0, 0.0));
            o.left_mul_acc(Complex64::new(1.0, 0.0), rho, scratch);
            o.right_mul_adjoint_acc(Complex64::new(*g, 0.0), scratch, out);
        }
    }

    pub fn apply(&self, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let mut out = DMatrix::zeros(rho.nrows(), rho.ncols());
        let mut scratch = out.clone();
        self.apply_into(rho, &mut out, &mut scratch);
        out
    }

    /// Superoperator on row-major vectorized matrices, `vec(ρ)[i·d + j] = ρ_ij`:
    /// `-i(H⊗I - I⊗Hᵀ) + Σ_j Γ_j (O_j⊗conj(O_j) - ½ O_j†O_j⊗I - ½ I⊗(O_j†O_j)ᵀ)`.
    pub fn superoperator(&self) -> SparseOperator {
        let d = self.dim();
        let mut triplets = Vec::new();
        for (a, b, v) in self.effective.iter() {
            for j in 0..d {
                triplets.push((a * d + j, b * d + j, -I * v));
                triplets.push((j * d + a, j * d + b, I * v.conj()));
            }
        }
        for (g, o) in &self.jumps {
            let entries: Vec<_> = o.iter().collect();
            for &(i, a, x) in &entries {
                for &(j, b, y) in &entries {
                    triplets.push((i * d + j, a * d + b, x * y.conj() * *g));
                }
            }
        }
        SparseOperator::from_triplets(d * d, triplets)
    }
}

/// `-i[H, ρ] + Σ_j Γ_j (O_j ρ O_j† - ½{O_j† O_j, ρ})`, evaluated matrix-free.
pub fn lindblad_rhs(
    rho: &DMatrix<Complex64>,
    hamiltonian: &SparseOperator,
    jumps: &[SparseOperator],
    rates: &[f64],
) -> Result<DMatrix<Complex64>> {
    if rho.nrows() != hamiltonian.dim() || rho.ncols() != hamiltonian.dim() {
        return Err(invalid("density matrix and Hamiltonian shapes differ"));
    }
    Ok(Lindbladian::new(hamiltonian.clone(), jumps.to_vec(), rates)?.apply(rho))
}
