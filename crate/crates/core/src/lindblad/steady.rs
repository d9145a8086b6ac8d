use nalgebra::DMatrix;
use num_complex::Complex64;

use super::density::DensityMatrix;
use super::propagate::{PropagatorParams, Stepper};
use super::Lindbladian;
use crate::error::{Error, Result};
use crate::linalg::{gmres, max_abs_diff};

/// Largest Hilbert-space dimension accepted by [`steady_state_nullspace`]; the
/// superoperator has `dim⁴` potential entries.
pub const MAX_NULLSPACE_DIM: usize = 256;

const GMRES_RESTART: usize = 80;
const GMRES_TOL: f64 = 1e-12;
const GMRES_MAX_ITER: usize = 20_000;
const DEGENERACY_TOL: f64 = 1e-6;
const EXTRA_PROBES: usize = 4;

#[derive(Clone, Debug)]
pub struct SteadyState {
    pub state: DensityMatrix,
    /// `‖ℒ[ρ]‖_F` of the returned state.
    pub residual: f64,
    pub converged: bool,
    /// Evolution time spent relaxing; zero for a pure linear solve.
    pub time: f64,
    /// Estimated dimension of the stationary manifold (1 when unique).
    pub multiplicity: usize,
}

/// Relaxes `rho0` under `ℒ` until `‖ℒ[ρ]‖_F < steady_threshold` or `t_max` is reached.
/// The result carries `converged = false` in the latter case.
pub fn steady_state_evolve(rho0: &DensityMatrix, generator: &Lindbladian, params: &PropagatorParams) -> Result<SteadyState> {
    params.validate()?;
    if !generator.is_dissipative() {
        return Err(Error::NoSteadyState("closed dynamics has no unique attractor; use time averages instead".into()));
    }
    let mut stepper = Stepper::new(generator, params);
    let mut rho = rho0.matrix().clone();
    let mut t = 0.0;
    let mut checks = 0usize;
    loop {
        let residual = generator.apply(&rho).norm();
        if residual < params.steady_threshold || t >= params.t_max {
            return Ok(SteadyState {
                state: DensityMatrix::new_unchecked(hermitize(rho)),
                residual,
                converged: residual < params.steady_threshold,
                time: t,
                multiplicity: 1,
            });
        }
        let span = params.steady_check_interval.min(params.t_max - t);
        checks += 1;
        let with_spectrum = params.spectrum_check_stride > 0 && checks.is_multiple_of(params.spectrum_check_stride);
        stepper.advance_checked(&mut rho, span, t + span, with_spectrum)?;
        t += span;
    }
}

/// Solves `ℒ[ρ] = 0, tr ρ = 1` directly as the bordered system `(ℒ + u⟨vec I|) x = u`
/// with `tr u = 1`, by Jacobi-preconditioned GMRES on the sparse superoperator.
///
/// A second right-hand side probes uniqueness: distinct solutions mean a degenerate
/// stationary manifold, whose dimension is estimated from a few further probes. In that
/// case the state reached from `I/dim` is returned, i.e. the stationary projection of
/// the maximally mixed state.
pub fn steady_state_nullspace(generator: &Lindbladian, params: &PropagatorParams) -> Result<SteadyState> {
    params.validate()?;
    let d = generator.dim();
    if d > MAX_NULLSPACE_DIM {
        return Err(Error::Capacity(format!("nullspace solve limited to dimension {MAX_NULLSPACE_DIM}, got {d}; use steady_state_evolve")));
    }
    if !generator.is_dissipative() {
        return Err(Error::NoSteadyState("closed dynamics has no unique attractor; use time averages instead".into()));
    }
    let sup = generator.superoperator();
    let n = d * d;
    let trace_slots: Vec<usize> = (0..d).map(|i| i * d + i).collect();
    let diag = sup.diagonal_values();

    // one preconditioner for every probe, so that probes differ only in the right-hand side
    let d_inv = Complex64::new(1.0 / d as f64, 0.0);
    let precond: Vec<Complex64> = (0..n)
        .map(|k| {
            let p = diag[k] + if trace_slots.binary_search(&k).is_ok() { d_inv } else { Complex64::new(0.0, 0.0) };
            if p.norm() > 1e-12 {
                p.inv()
            } else {
                Complex64::new(1.0, 0.0)
            }
        })
        .collect();
    let solve = |weights: &[f64]| -> (DMatrix<Complex64>, bool) {
        let mut u = vec![Complex64::new(0.0, 0.0); n];
        for (&k, &w) in trace_slots.iter().zip(weights) {
            u[k] = Complex64::new(w, 0.0);
        }
        let apply = |x: &[Complex64], y: &mut [Complex64]| {
            sup.mul_vec(x, y);
            let tr: Complex64 = trace_slots.iter().map(|&k| x[k]).sum();
            for (&k, &w) in trace_slots.iter().zip(weights) {
                y[k] += tr * w;
            }
        };
        let out = gmres(apply, &u, Some(&precond), GMRES_RESTART, GMRES_TOL, GMRES_MAX_ITER);
        (DMatrix::from_row_slice(d, d, &out.x), out.converged)
    };

    let uniform = vec![1.0 / d as f64; d];
    let (first, converged) = solve(&uniform);
    let first = normalize(hermitize(first));
    let probe = |seed: usize| -> Vec<f64> {
        let raw: Vec<f64> = (0..d).map(|i| 1.0 + 0.5 * ((i * (2 * seed + 3) + seed) as f64 * 1.618).sin()).collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / s).collect()
    };
    let (second, _) = solve(&probe(0));
    let second = normalize(hermitize(second));
    if max_abs_diff(&first, &second) <= DEGENERACY_TOL {
        let residual = generator.apply(&first).norm();
        return Ok(SteadyState { state: DensityMatrix::new_unchecked(first), residual, converged, time: 0.0, multiplicity: 1 });
    }

    let mut solutions = vec![first, second];
    for seed in 1..=EXTRA_PROBES {
        solutions.push(normalize(hermitize(solve(&probe(seed)).0)));
    }
    let multiplicity = affine_rank(&solutions) + 1;
    let mut relaxed = steady_state_evolve(&DensityMatrix::maximally_mixed(d), generator, params)?;
    relaxed.multiplicity = multiplicity;
    Ok(relaxed)
}

fn hermitize(m: DMatrix<Complex64>) -> DMatrix<Complex64> {
    (&m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

fn normalize(m: DMatrix<Complex64>) -> DMatrix<Complex64> {
    let tr = m.trace().re;
    m / Complex64::new(tr, 0.0)
}

/// Rank of `{x_k - x_0}`, a lower bound on the dimension of their affine span.
fn affine_rank(xs: &[DMatrix<Complex64>]) -> usize {
    let diffs: Vec<Vec<Complex64>> = xs[1..].iter().map(|x| (x - &xs[0]).iter().copied().collect()).collect();
    let k = diffs.len();
    let gram = DMatrix::from_fn(k, k, |i, j| diffs[i].iter().zip(&diffs[j]).map(|(a, b)| a.conj() * b).sum::<Complex64>());
    let eig = crate::linalg::hermitian_eigenvalues(&gram);
    let top = eig.last().copied().unwrap_or(0.0);
    eig.iter().filter(|&&e| e > 1e-8 * top.max(1e-300)).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::SectorBasis;
    use crate::gauge::{build_sector_hamiltonian, Boundary, ChargeConfig, ModelParams};
    use crate::lindblad::{build_jump_operators, DissipationSpec};
    use crate::sparse::SparseOperator;

    fn generator(q: &str, rate: f64) -> Lindbladian {
        let b = SectorBasis::enumerate(6, 3).unwrap();
        let q: ChargeConfig = q.parse().unwrap();
        let h = build_sector_hamiltonian(&b, &q, &ModelParams::with_field(0.5).unwrap()).unwrap();
        let jumps = build_jump_operators(&b, &DissipationSpec::uniform(2, 0.0, rate, Boundary::Periodic)).unwrap();
        Lindbladian::new(h, jumps, &[rate; 6]).unwrap()
    }

    #[test]
    fn nullspace_and_evolution_agree() {
        let l = generator("+--+-+", 1.0);
        let ns = steady_state_nullspace(&l, &PropagatorParams::default()).unwrap();
        assert!(ns.converged);
        assert_eq!(ns.multiplicity, 1);
        assert!(ns.residual < 1e-9, "{}", ns.residual);
        assert!(ns.state.report(true).is_valid());
        let ev = steady_state_evolve(&DensityMatrix::maximally_mixed(l.dim()), &l, &PropagatorParams::default()).unwrap();
        assert!(ev.converged);
        assert!(ns.state.trace_distance(&ev.state) < 1e-7);
    }

    #[test]
    fn closed_dynamics_is_rejected() {
        let l = generator("+--+-+", 0.0);
        assert!(matches!(steady_state_nullspace(&l, &PropagatorParams::default()), Err(Error::NoSteadyState(_))));
        let rho = DensityMatrix::maximally_mixed(l.dim());
        assert!(matches!(steady_state_evolve(&rho, &l, &PropagatorParams::default()), Err(Error::NoSteadyState(_))));
    }

    #[test]
    fn degenerate_manifold_is_detected() {
        // dephasing in a fixed basis: every diagonal state is stationary
        let h = SparseOperator::zeros(3);
        let proj = |k: usize| SparseOperator::from_triplets(3, [(k, k, Complex64::new(1.0, 0.0))]);
        let l = Lindbladian::new(h, vec![proj(0), proj(1), proj(2)], &[1.0; 3]).unwrap();
        let ss = steady_state_nullspace(&l, &PropagatorParams::default()).unwrap();
        assert_eq!(ss.multiplicity, 3);
        assert!(max_abs_diff(ss.state.matrix(), DensityMatrix::maximally_mixed(3).matrix()) < 1e-12);
    }

    #[test]
    fn capacity_limit() {
        let h = SparseOperator::zeros(MAX_NULLSPACE_DIM + 1);
        let l = Lindbladian::new(h.clone(), vec![SparseOperator::identity(MAX_NULLSPACE_DIM + 1)], &[1.0]).unwrap();
        assert!(matches!(steady_state_nullspace(&l, &PropagatorParams::default()), Err(Error::Capacity(_))));
    }
}
