use z2dfl_core::sectors::{ensemble_evolve, enumerate_sectors, EnsembleResult};
use z2dfl_core::{Boundary, DissipationSpec, EnsembleParams, Method, ModelParams, OccupationState, PropagatorParams, SectorMode};

fn state(bits: &str) -> OccupationState {
    OccupationState::from_bitstring(bits).unwrap()
}

fn grid(stop: u32) -> Vec<f64> {
    (0..=stop).map(f64::from).collect()
}

fn dissipative(h: f64, gamma: f64) -> EnsembleParams {
    let mut p =
        EnsembleParams::dissipative(ModelParams::with_field(h).unwrap(), DissipationSpec::uniform(1, 0.0, gamma, Boundary::Periodic));
    p.propagator = PropagatorParams { method: Method::KrylovExp, ..PropagatorParams::default() };
    p
}

fn max_gap(a: &EnsembleResult, b: &EnsembleResult) -> f64 {
    a.fidelity.values.iter().zip(&b.fidelity.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn averaging_over_all_sectors_is_translation_invariant() {
    let (a, b) = (state("110100"), state("011010"));
    let unitary = EnsembleParams::unitary(ModelParams::with_field(0.6).unwrap());
    let times = grid(30);
    let ra = ensemble_evolve(&a, &unitary, &SectorMode::All, &times).unwrap();
    let rb = ensemble_evolve(&b, &unitary, &SectorMode::All, &times).unwrap();
    assert!(max_gap(&ra, &rb) < 1e-10, "closed: {}", max_gap(&ra, &rb));

    let open = dissipative(0.6, 0.5);
    let times = grid(8);
    let ra = ensemble_evolve(&a, &open, &SectorMode::All, &times).unwrap();
    let rb = ensemble_evolve(&b, &open, &SectorMode::All, &times).unwrap();
    assert!(max_gap(&ra, &rb) < 1e-10, "dissipative: {}", max_gap(&ra, &rb));
}

#[test]
fn zero_field_average_equals_any_single_sector() {
    let psi0 = state("10101010");
    let params = EnsembleParams::unitary(ModelParams::with_field(0.0).unwrap());
    let times = grid(20);
    let avg = ensemble_evolve(&psi0, &params, &SectorMode::Sample { count: 9, seed: 1 }, &times).unwrap();
    let one = ensemble_evolve(&psi0, &params, &"single:+-++--+-".parse().unwrap(), &times).unwrap();
    assert!(max_gap(&avg, &one) < 1e-12);
}

#[test]
fn results_do_not_depend_on_the_thread_count() {
    let psi0 = state("1010101");
    let params = dissipative(0.8, 1.0);
    let mode = SectorMode::Sample { count: 11, seed: 5 };
    let times = grid(5);
    let run = |n: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
        pool.install(|| ensemble_evolve(&psi0, &params, &mode, &times).unwrap())
    };
    let (one, three) = (run(1), run(3));
    assert_eq!(one.fidelity, three.fidelity);
    assert_eq!(one.trace, three.trace);
    assert_eq!(one.final_state.matrix(), three.final_state.matrix());
}

#[test]
fn sampled_averages_agree_within_their_standard_error() {
    let psi0 = state("10101010");
    let params = EnsembleParams::unitary(ModelParams::with_field(0.5).unwrap());
    let times: Vec<f64> = (0..=12).map(|k| 5.0 * f64::from(k)).collect();

    // per-sector return probabilities p_q(t) for each sample, plus the library average
    let stats = |count: usize, seed: u64| {
        let mode = SectorMode::Sample { count, seed };
        let sectors = enumerate_sectors(8, 4, &mode).unwrap();
        let per_sector: Vec<Vec<f64>> = sectors
            .into_iter()
            .map(|q| {
                let r = ensemble_evolve(&psi0, &params, &SectorMode::Single(q), &times).unwrap();
                r.fidelity.values.iter().map(|f| f * f).collect()
            })
            .collect();
        let avg = ensemble_evolve(&psi0, &params, &mode, &times).unwrap();
        (per_sector, avg.fidelity.values)
    };
    let (p256, f256) = stats(256, 11);
    let (p512, f512) = stats(512, 12);

    let summary = |p: &[Vec<f64>], k: usize| {
        let n = p.len() as f64;
        let mean = p.iter().map(|row| row[k]).sum::<f64>() / n;
        let var = p.iter().map(|row| (row[k] - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let f = mean.sqrt();
        // standard error of √mean by the delta method
        (f, (var / n).sqrt() / (2.0 * f))
    };
    for k in 0..times.len() {
        let (fa, sa) = summary(&p256, k);
        let (fb, sb) = summary(&p512, k);
        assert!((fa - f256[k]).abs() < 1e-12 && (fb - f512[k]).abs() < 1e-12, "t={}", times[k]);
        let se = sa.hypot(sb);
        assert!((fa - fb).abs() < 3.0 * se.max(1e-12), "t={}: {fa} vs {fb}, se {se}", times[k]);
    }
}
