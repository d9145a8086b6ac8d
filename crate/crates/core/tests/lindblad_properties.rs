use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use z2dfl_core::gauge::build_sector_hamiltonian;
use z2dfl_core::linalg::{hermitian_eigen, max_abs_diff};
use z2dfl_core::lindblad::{build_jump_operators, propagate, steady_state_nullspace};
use z2dfl_core::{
    Boundary, ChargeConfig, DensityMatrix, DissipationSpec, Lindbladian, Method, ModelParams, OccupationState, PropagatorParams,
    SectorBasis,
};

fn generator(sites: usize, particles: usize, q: &[i8], h: f64, gamma: f64, alpha: f64, range: usize) -> Lindbladian {
    let basis = SectorBasis::enumerate(sites, particles).unwrap();
    let ham = build_sector_hamiltonian(&basis, &ChargeConfig::new(q.to_vec()).unwrap(), &ModelParams::with_field(h).unwrap()).unwrap();
    let spec = DissipationSpec::uniform(range, alpha, gamma, Boundary::Periodic);
    let jumps = build_jump_operators(&basis, &spec).unwrap();
    let rates = vec![gamma; jumps.len()];
    Lindbladian::new(ham, jumps, &rates).unwrap()
}

fn random_hermitian(dim: usize, rng: &mut ChaCha8Rng) -> DMatrix<Complex64> {
    let a = DMatrix::from_fn(dim, dim, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    (&a + a.adjoint()).scale(0.5)
}

fn random_density(dim: usize, rng: &mut ChaCha8Rng) -> DensityMatrix {
    let a = DMatrix::from_fn(dim, dim, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let m = &a * a.adjoint();
    let tr = m.trace();
    DensityMatrix::new(m.unscale(tr.re)).unwrap()
}

#[test]
fn liouvillian_spectrum_lies_in_the_left_half_plane() {
    let gen = generator(4, 2, &[1, -1, 1, -1], 0.7, 0.8, 0.9, 1);
    let superop = gen.superoperator().to_dense();
    let eig = superop.schur().eigenvalues().expect("complex Schur converges");
    let max_re = eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    assert!(max_re <= 1e-10, "max Re = {max_re}");
    assert!(eig.iter().any(|z| z.norm() < 1e-10), "no stationary eigenvalue");
}

#[test]
fn superoperator_matches_the_matrix_free_action() {
    let gen = generator(5, 2, &[1, 1, -1, 1, -1], 0.4, 1.3, 0.3, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let d = gen.dim();
    let rho = random_hermitian(d, &mut rng);
    let direct = gen.apply(&rho);
    // row-major vectorization
    let v: Vec<Complex64> = (0..d * d).map(|k| rho[(k / d, k % d)]).collect();
    let mut out = vec![Complex64::default(); d * d];
    gen.superoperator().mul_vec(&v, &mut out);
    let via = DMatrix::from_fn(d, d, |i, j| out[i * d + j]);
    assert!(max_abs_diff(&direct, &via) < 1e-12);
}

#[test]
fn trajectory_stays_a_density_matrix() {
    let gen = generator(6, 3, &[1, -1, -1, 1, 1, -1], 0.5, 1.0, 0.0, 1);
    let basis = SectorBasis::enumerate(6, 3).unwrap();
    let rho0 = DensityMatrix::pure(&basis, &OccupationState::from_bitstring("101010").unwrap()).unwrap();
    let times: Vec<f64> = (0..=20).map(f64::from).collect();
    for method in [Method::Rk4, Method::KrylovExp] {
        let params = PropagatorParams { method, ..PropagatorParams::default() };
        let traj = propagate(&rho0, &gen, &times, &params).unwrap();
        for (t, state) in traj.times.iter().zip(&traj.states) {
            let m = state.matrix();
            assert!((m.trace().re - 1.0).abs() < 1e-8, "{method} t={t}");
            assert!(max_abs_diff(m, &m.adjoint()) < 1e-10, "{method} t={t}");
            let (vals, _) = hermitian_eigen(m);
            assert!(vals.iter().all(|&x| x >= -1e-8), "{method} t={t}: {vals:?}");
        }
    }
}

#[test]
fn weak_dissipation_converges_to_the_closed_limit() {
    let q = [1, -1, -1, 1, -1, 1];
    let basis = SectorBasis::enumerate(6, 3).unwrap();
    let rho0 = DensityMatrix::pure(&basis, &OccupationState::from_bitstring("101010").unwrap()).unwrap();
    let times: Vec<f64> = (0..=10).map(f64::from).collect();
    let params = PropagatorParams { method: Method::KrylovExp, ..PropagatorParams::default() };
    let closed = propagate(&rho0, &generator(6, 3, &q, 0.5, 0.0, 0.0, 1), &times, &params).unwrap();
    let gaps: Vec<f64> = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&g| {
            let open = propagate(&rho0, &generator(6, 3, &q, 0.5, g, 0.0, 1), &times, &params).unwrap();
            closed.states.iter().zip(&open.states).map(|(a, b)| max_abs_diff(a.matrix(), b.matrix())).fold(0.0, f64::max)
        })
        .collect();
    // first order in Γ
    assert!(gaps.windows(2).all(|w| w[1] < 0.2 * w[0]), "{gaps:?}");
    assert!(gaps[2] < 5e-3, "{gaps:?}");
}

#[test]
fn three_site_steady_state_is_annihilated_by_the_generator() {
    let gen = generator(3, 1, &[1, -1, -1], 0.3, 1.0, 0.4, 1);
    let ss = steady_state_nullspace(&gen, &PropagatorParams::default()).unwrap();
    assert!(ss.converged);
    assert!(ss.residual < 1e-12, "{}", ss.residual);
    assert!(max_abs_diff(&gen.apply(ss.state.matrix()), &DMatrix::zeros(3, 3)) < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn generator_is_trace_free_and_hermiticity_preserving(
        seed in any::<u64>(), h in 0.0f64..1.5, gamma in 0.0f64..2.0, alpha in 0.0f64..std::f64::consts::PI, range in 1usize..3,
    ) {
        let gen = generator(5, 2, &[1, -1, 1, 1, -1], h, gamma, alpha, range);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_hermitian(gen.dim(), &mut rng);
        let out = gen.apply(&rho);
        prop_assert!(out.trace().norm() < 1e-12);
        prop_assert!(max_abs_diff(&out, &out.adjoint()) < 1e-12);
    }

    #[test]
    fn trace_distance_is_a_bounded_metric(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = (random_density(8, &mut rng), random_density(8, &mut rng));
        let d = a.trace_distance(&b);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&d));
        prop_assert!((d - b.trace_distance(&a)).abs() < 1e-12);
        prop_assert!(a.trace_distance(&a) < 1e-12);
    }
}
