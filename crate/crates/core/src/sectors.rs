use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::fock::{OccupationState, SectorBasis};
use crate::gauge::{build_sector_hamiltonian, ChargeConfig, ModelParams};
use crate::linalg::symmetric_eigen;
use crate::lindblad::{
    build_jump_operators, propagate_with, steady_state_evolve, steady_state_nullspace, DensityMatrix, DissipationSpec, InvariantReport,
    Lindbladian, PropagatorParams, MAX_NULLSPACE_DIM,
};
use crate::observables::FidelityTrace;
use crate::sparse::SparseOperator;

/// Largest `L` for which all / parity modes enumerate the full list.
pub const MAX_ENUMERATED_SITES: usize = 14;

/// Which charge sectors enter the ensemble average.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SectorMode {
    All,
    /// Only sectors with `Π q_j = (−1)^Nf`.
    ParityConstrained,
    /// `count` configurations drawn uniformly (with replacement).
    Sample {
        count: usize,
        seed: u64,
    },
    Single(ChargeConfig),
}

impl fmt::Display for SectorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SectorMode::All => f.write_str("all"),
            SectorMode::ParityConstrained => f.write_str("parity"),
            SectorMode::Sample { count, seed } => write!(f, "sample:{count}:{seed}"),
            SectorMode::Single(q) => write!(f, "single:{q}"),
        }
    }
}

/// Accepts `all`, `parity`, `sample:COUNT:SEED` and `single:+-+-`.
impl FromStr for SectorMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let mut parts = s.splitn(2, ':');
        let head = parts.next().unwrap_or_default().to_ascii_lowercase();
        let rest = parts.next();
        match (head.as_str(), rest) {
            ("all", None) => Ok(SectorMode::All),
            ("parity" | "parity_constrained", None) => Ok(SectorMode::ParityConstrained),
            ("sample", Some(rest)) => {
                let (count, seed) = rest.split_once(':').ok_or_else(|| invalid(format!("expected sample:COUNT:SEED, got {s:?}")))?;
                let count = count.trim().parse().map_err(|_| invalid(format!("bad sample count in {s:?}")))?;
                let seed = seed.trim().parse().map_err(|_| invalid(format!("bad sample seed in {s:?}")))?;
                if count == 0 {
                    return Err(invalid("sample count must be at least 1"));
                }
                Ok(SectorMode::Sample { count, seed })
            }
            ("single", Some(q)) => Ok(SectorMode::Single(q.parse()?)),
            _ => Err(invalid(format!("unknown sector mode {s:?}"))),
        }
    }
}

fn config_from_index(sites: usize, k: u64) -> ChargeConfig {
    let charges = (0..sites).map(|i| if (k >> (sites - 1 - i)) & 1 == 1 { -1 } else { 1 }).collect();
    ChargeConfig::new(charges).expect("charges are ±1")
}

/// Charge configurations in a fixed order: lexicographic with `+` before `−` for all / parity,
/// draw order for samples.
pub fn enumerate_sectors(sites: usize, particles: usize, mode: &SectorMode) -> Result<Vec<ChargeConfig>> {
    if sites == 0 {
        return Err(invalid("at least one site required"));
    }
    if particles > sites {
        return Err(invalid(format!("{particles} particles on {sites} sites")));
    }
    match mode {
        SectorMode::All | SectorMode::ParityConstrained => {
            if sites > MAX_ENUMERATED_SITES {
                return Err(Error::Capacity(format!(
                    "enumerating 2^{sites} sectors exceeds the limit of L = {MAX_ENUMERATED_SITES}; use sample mode"
                )));
            }
            let target = if particles.is_multiple_of(2) { 1 } else { -1 };
            Ok((0..1u64 << sites)
                .map(|k| config_from_index(sites, k))
                .filter(|q| *mode == SectorMode::All || q.product() == target)
                .collect())
        }
        SectorMode::Sample { count, seed } => {
            if *count == 0 {
                return Err(invalid("sample count must be at least 1"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            Ok((0..*count)
                .map(|_| ChargeConfig::new((0..sites).map(|_| if rng.random::<bool>() { -1 } else { 1 }).collect()).expect("±1"))
                .collect())
        }
        SectorMode::Single(q) => {
            if q.len() != sites {
                return Err(invalid(format!("charge configuration of length {} for {sites} sites", q.len())));
            }
            Ok(vec![q.clone()])
        }
    }
}

/// Model, optional dissipation and numerical settings for an ensemble run.
#[derive(Clone, Debug)]
pub struct EnsembleParams {
    pub model: ModelParams,
    /// `None`, or rates that are all zero, selects the closed-system path.
    pub dissipation: Option<DissipationSpec>,
    pub propagator: PropagatorParams,
    /// Keep `ρ̄(t)` at every output time; otherwise only the final one is kept.
    pub keep_states: bool,
}

impl EnsembleParams {
    pub fn unitary(model: ModelParams) -> Self {
        Self { model, dissipation: None, propagator: PropagatorParams::default(), keep_states: false }
    }

    pub fn dissipative(model: ModelParams, dissipation: DissipationSpec) -> Self {
        Self { model, dissipation: Some(dissipation), propagator: PropagatorParams::default(), keep_states: false }
    }

    fn active_dissipation(&self, sites: usize) -> Result<Option<(&DissipationSpec, Vec<f64>)>> {
        match &self.dissipation {
            None => Ok(None),
            Some(spec) => {
                let rates = spec.rate_list(spec.pairs(sites)?.len())?;
                Ok(rates.iter().any(|g| *g > 0.0).then_some((spec, rates)))
            }
        }
    }
}

/// Sector-averaged dynamics.
#[derive(Clone, Debug)]
pub struct EnsembleResult {
    pub mode: SectorMode,
    pub sectors: Vec<ChargeConfig>,
    pub weights: Vec<f64>,
    pub fidelity: FidelityTrace,
    /// `tr ρ̄(t)`.
    pub trace: Vec<f64>,
    /// Per output time: measured on `ρ̄` when states are kept, otherwise the worst value over
    /// sectors, which bounds the trace error and Hermiticity residual of `ρ̄` from above and
    /// its smallest eigenvalue from below.
    pub reports: Vec<InvariantReport>,
    /// `ρ̄(t)` at each output time when requested.
    pub states: Vec<DensityMatrix>,
    /// `ρ̄` at the last output time.
    pub final_state: DensityMatrix,
}

impl EnsembleResult {
    pub fn times(&self) -> &[f64] {
        &self.fidelity.times
    }
}

struct SectorOutcome {
    overlaps: Vec<f64>,
    traces: Vec<f64>,
    reports: Vec<InvariantReport>,
    states: Vec<DMatrix<Complex64>>,
}

fn check_inputs(basis: &SectorBasis, psi0: &OccupationState, times: &[f64]) -> Result<usize> {
    if times.is_empty() {
        return Err(invalid("at least one output time required"));
    }
    basis.index_of(psi0).map(|k| k - 1)
}

fn worst(a: &InvariantReport, b: &InvariantReport) -> InvariantReport {
    InvariantReport {
        trace_error: a.trace_error.max(b.trace_error),
        hermiticity_residual: a.hermiticity_residual.max(b.hermiticity_residual),
        min_eigenvalue: match (a.min_eigenvalue, b.min_eigenvalue) {
            (Some(x), Some(y)) => Some(x.min(y)),
            (x, y) => x.or(y),
        },
    }
}

fn unitary_sector(
    basis: &SectorBasis,
    q: &ChargeConfig,
    model: &ModelParams,
    k0: usize,
    times: &[f64],
    keep_all: bool,
) -> Result<SectorOutcome> {
    let h = build_sector_hamiltonian(basis, q, model)?;
    let (energies, v) = symmetric_eigen(h.to_dense_real());
    let d = basis.dim();
    let amp: Vec<f64> = (0..d).map(|n| v[(k0, n)]).collect();
    let mut out = SectorOutcome {
        overlaps: Vec::with_capacity(times.len()),
        traces: Vec::with_capacity(times.len()),
        reports: Vec::with_capacity(times.len()),
        states: Vec::new(),
    };
    for (ti, &t) in times.iter().enumerate() {
        let cos = DVector::from_iterator(d, energies.iter().zip(&amp).map(|(e, a)| a * (e * t).cos()));
        let sin = DVector::from_iterator(d, energies.iter().zip(&amp).map(|(e, a)| -a * (e * t).sin()));
        let re = &v * cos;
        let im = &v * sin;
        let psi: Vec<Complex64> = re.iter().zip(im.iter()).map(|(r, i)| Complex64::new(*r, *i)).collect();
        let norm: f64 = psi.iter().map(|x| x.norm_sqr()).sum();
        out.overlaps.push(psi[k0].norm_sqr());
        out.traces.push(norm);
        out.reports.push(InvariantReport {
            trace_error: (norm - 1.0).abs(),
            hermiticity_residual: 0.0,
            min_eigenvalue: Some(if d > 1 { 0.0 } else { norm }),
        });
        if keep_all || ti + 1 == times.len() {
            out.states.push(DMatrix::from_fn(d, d, |i, j| psi[i] * psi[j].conj()));
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn dissipative_sector(
    basis: &SectorBasis,
    q: &ChargeConfig,
    model: &ModelParams,
    jumps: &[SparseOperator],
    rates: &[f64],
    rho0: &DensityMatrix,
    k0: usize,
    times: &[f64],
    params: &PropagatorParams,
    keep_all: bool,
) -> Result<SectorOutcome> {
    let h = build_sector_hamiltonian(basis, q, model)?;
    let generator = Lindbladian::new(h, jumps.to_vec(), rates)?;
    let mut out = SectorOutcome {
        overlaps: Vec::with_capacity(times.len()),
        traces: Vec::with_capacity(times.len()),
        reports: Vec::with_capacity(times.len()),
        states: Vec::new(),
    };
    let last = times.len() - 1;
    let mut idx = 0;
    propagate_with(rho0, &generator, times, params, |_, rho, report| {
        out.overlaps.push(rho[(k0, k0)].re);
        out.traces.push(rho.trace().re);
        out.reports.push(*report);
        if keep_all || idx == last {
            out.states.push(rho.clone());
        }
        idx += 1;
        Ok(())
    })
    .map_err(|e| match e {
        Error::PropagationFailure { time, reason } => Error::PropagationFailure { time, reason: format!("sector {q}: {reason}") },
        other => other,
    })?;
    Ok(out)
}

/// Evolves `|ψ0⟩⟨ψ0|` in every sector of `mode` and averages with uniform weights.
///
/// Sectors are processed in parallel on the current rayon pool; the reduction runs in
/// enumeration order, so results do not depend on the thread count. The fidelity is
/// `√⟨ψ0|ρ̄(t)|ψ0⟩` of the averaged state.
pub fn ensemble_evolve(psi0: &OccupationState, params: &EnsembleParams, mode: &SectorMode, times: &[f64]) -> Result<EnsembleResult> {
    let (sites, particles) = (psi0.sites(), psi0.particles());
    params.model.validate()?;
    let basis = SectorBasis::enumerate(sites, particles)?;
    let k0 = check_inputs(&basis, psi0, times)?;
    let sectors = enumerate_sectors(sites, particles, mode)?;
    let d = basis.dim();
    let dissipation = params.active_dissipation(sites)?;
    let jumps = match &dissipation {
        Some((spec, _)) => build_jump_operators(&basis, spec)?,
        None => Vec::new(),
    };
    let rho0 = DensityMatrix::pure(&basis, psi0)?;
    if dissipation.is_some() {
        params.propagator.validate()?;
        if times.first().is_some_and(|t| !(*t >= 0.0)) || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("output times must be non-negative and strictly ascending"));
        }
    }

    let weight = 1.0 / sectors.len() as f64;
    let n_t = times.len();
    let mut overlap = vec![0.0; n_t];
    let mut trace = vec![0.0; n_t];
    let mut reports: Vec<Option<InvariantReport>> = vec![None; n_t];
    let kept = if params.keep_states { n_t } else { 1 };
    let mut sums = vec![DMatrix::<Complex64>::zeros(d, d); kept];
    let w = Complex64::new(weight, 0.0);

    let chunk = 2 * rayon::current_num_threads().max(1);
    for block in sectors.chunks(chunk) {
        let outcomes: Vec<Result<SectorOutcome>> = block
            .par_iter()
            .map(|q| match &dissipation {
                None => unitary_sector(&basis, q, &params.model, k0, times, params.keep_states),
                Some((_, rates)) => {
                    dissipative_sector(&basis, q, &params.model, &jumps, rates, &rho0, k0, times, &params.propagator, params.keep_states)
                }
            })
            .collect();
        for outcome in outcomes {
            let outcome = outcome?;
            for (acc, o) in overlap.iter_mut().zip(&outcome.overlaps) {
                *acc += weight * o;
            }
            for (acc, t) in trace.iter_mut().zip(&outcome.traces) {
                *acc += weight * t;
            }
            for (acc, r) in reports.iter_mut().zip(&outcome.reports) {
                *acc = Some(acc.as_ref().map_or(*r, |a| worst(a, r)));
            }
            for (acc, s) in sums.iter_mut().zip(&outcome.states) {
                acc.zip_apply(s, |a, b| *a += b * w);
            }
        }
    }

    let fidelity = FidelityTrace { times: times.to_vec(), values: overlap.iter().map(|p| p.max(0.0).sqrt()).collect() };
    let mut reports: Vec<InvariantReport> = reports.into_iter().map(|r| r.expect("one report per time")).collect();
    let states: Vec<DensityMatrix> = if params.keep_states {
        let stride = params.propagator.spectrum_check_stride;
        for (k, (rep, s)) in reports.iter_mut().zip(&sums).enumerate() {
            *rep = InvariantReport::measure(s, stride > 0 && k % stride == 0);
        }
        sums.iter().cloned().map(DensityMatrix::new_unchecked).collect()
    } else {
        Vec::new()
    };
    let final_state = DensityMatrix::new_unchecked(sums.pop().expect("final state kept"));
    Ok(EnsembleResult { mode: mode.clone(), weights: vec![weight; sectors.len()], sectors, fidelity, trace, reports, states, final_state })
}

/// How per-sector steady states are obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SteadyMethod {
    /// Nullspace solve up to [`MAX_NULLSPACE_DIM`], relaxation in time beyond.
    #[default]
    Auto,
    Nullspace,
    /// Relaxation from `|ψ0⟩⟨ψ0|`.
    Evolve,
}

impl FromStr for SteadyMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "auto" => Ok(SteadyMethod::Auto),
            "nullspace" => Ok(SteadyMethod::Nullspace),
            "evolve" => Ok(SteadyMethod::Evolve),
            other => Err(invalid(format!("unknown steady-state method {other:?}"))),
        }
    }
}

impl fmt::Display for SteadyMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SteadyMethod::Auto => "auto",
            SteadyMethod::Nullspace => "nullspace",
            SteadyMethod::Evolve => "evolve",
        })
    }
}

/// Convergence record of one sector's steady state.
#[derive(Clone, Debug, PartialEq)]
pub struct SectorRecord {
    pub charges: ChargeConfig,
    pub converged: bool,
    pub residual: f64,
    pub multiplicity: usize,
    pub relaxation_time: f64,
}

#[derive(Clone, Debug)]
pub struct EnsembleSteadyState {
    pub mode: SectorMode,
    pub weights: Vec<f64>,
    /// Sector average of the per-sector steady states.
    pub state: DensityMatrix,
    /// `√⟨ψ0|ρ̄_ss|ψ0⟩`.
    pub fidelity: f64,
    pub records: Vec<SectorRecord>,
}

impl EnsembleSteadyState {
    pub fn all_converged(&self) -> bool {
        self.records.iter().all(|r| r.converged)
    }
}

/// Per-sector steady states of the dissipative dynamics, averaged like [`ensemble_evolve`].
pub fn ensemble_steady_state(
    psi0: &OccupationState,
    params: &EnsembleParams,
    mode: &SectorMode,
    method: SteadyMethod,
) -> Result<EnsembleSteadyState> {
    let (sites, particles) = (psi0.sites(), psi0.particles());
    params.model.validate()?;
    let basis = SectorBasis::enumerate(sites, particles)?;
    let k0 = basis.index_of(psi0)? - 1;
    let Some((spec, rates)) = params.active_dissipation(sites)? else {
        return Err(Error::NoSteadyState("no dissipation configured".into()));
    };
    let jumps = build_jump_operators(&basis, spec)?;
    let sectors = enumerate_sectors(sites, particles, mode)?;
    let rho0 = DensityMatrix::pure(&basis, psi0)?;
    let use_nullspace = match method {
        SteadyMethod::Auto => basis.dim() <= MAX_NULLSPACE_DIM,
        SteadyMethod::Nullspace => true,
        SteadyMethod::Evolve => false,
    };
    let d = basis.dim();
    let weight = 1.0 / sectors.len() as f64;
    let w = Complex64::new(weight, 0.0);
    let mut sum = DMatrix::<Complex64>::zeros(d, d);
    let mut records = Vec::with_capacity(sectors.len());
    let chunk = 2 * rayon::current_num_threads().max(1);
    for block in sectors.chunks(chunk) {
        let solved: Vec<Result<_>> = block
            .par_iter()
            .map(|q| {
                let h = build_sector_hamiltonian(&basis, q, &params.model)?;
                let generator = Lindbladian::new(h, jumps.clone(), &rates)?;
                if use_nullspace {
                    steady_state_nullspace(&generator, &params.propagator)
                } else {
                    steady_state_evolve(&rho0, &generator, &params.propagator)
                }
            })
            .collect();
        for (q, ss) in block.iter().zip(solved) {
            let ss = ss?;
            sum.zip_apply(ss.state.matrix(), |a, b| *a += b * w);
            records.push(SectorRecord {
                charges: q.clone(),
                converged: ss.converged,
                residual: ss.residual,
                multiplicity: ss.multiplicity,
                relaxation_time: ss.time,
            });
        }
    }
    let fidelity = sum[(k0, k0)].re.max(0.0).sqrt();
    Ok(EnsembleSteadyState {
        mode: mode.clone(),
        weights: vec![weight; sectors.len()],
        state: DensityMatrix::new_unchecked(sum),
        fidelity,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauge::Boundary;

    #[test]
    fn enumeration_order() {
        let all = enumerate_sectors(2, 1, &SectorMode::All).unwrap();
        let shown: Vec<String> = all.iter().map(|q| q.to_string()).collect();
        assert_eq!(shown, ["++", "+-", "-+", "--"]);
        let parity = enumerate_sectors(4, 2, &SectorMode::ParityConstrained).unwrap();
        assert_eq!(parity.len(), 8);
        assert!(parity.iter().all(|q| q.product() == 1));
        let odd = enumerate_sectors(5, 1, &SectorMode::ParityConstrained).unwrap();
        assert!(odd.iter().all(|q| q.product() == -1));
    }

    #[test]
    fn sampling_is_reproducible() {
        let m = SectorMode::Sample { count: 64, seed: 7 };
        let a = enumerate_sectors(10, 5, &m).unwrap();
        assert_eq!(a, enumerate_sectors(10, 5, &m).unwrap());
        assert_eq!(a.len(), 64);
        assert_ne!(a, enumerate_sectors(10, 5, &SectorMode::Sample { count: 64, seed: 8 }).unwrap());
    }

    #[test]
    fn capacity_and_arguments() {
        assert!(matches!(enumerate_sectors(15, 7, &SectorMode::All), Err(Error::Capacity(_))));
        assert!(enumerate_sectors(20, 10, &SectorMode::Sample { count: 3, seed: 1 }).is_ok());
        assert!(enumerate_sectors(4, 2, &SectorMode::Single("+-+".parse().unwrap())).is_err());
        assert!(enumerate_sectors(4, 2, &SectorMode::Sample { count: 0, seed: 1 }).is_err());
    }

    #[test]
    fn mode_round_trip() {
        for text in ["all", "parity", "sample:128:7", "single:+-+-"] {
            let m: SectorMode = text.parse().unwrap();
            assert_eq!(m.to_string(), text);
        }
        assert!("sample:0:1".parse::<SectorMode>().is_err());
        assert!("sometimes".parse::<SectorMode>().is_err());
    }

    #[test]
    fn single_sector_overlap() {
        let psi0 = OccupationState::from_bitstring("101010").unwrap();
        let q: ChargeConfig = "+-++-+".parse().unwrap();
        let model = ModelParams::with_field(0.5).unwrap();
        let times = [0.0, 0.5, 2.0];
        let res = ensemble_evolve(&psi0, &EnsembleParams::unitary(model), &SectorMode::Single(q.clone()), &times).unwrap();
        assert!((res.fidelity.values[0] - 1.0).abs() < 1e-12);
        let basis = SectorBasis::enumerate(6, 3).unwrap();
        let h = build_sector_hamiltonian(&basis, &q, &model).unwrap().to_dense();
        let k0 = basis.index_of(&psi0).unwrap() - 1;
        for (t, f) in times.iter().zip(&res.fidelity.values) {
            let u = crate::linalg::expm(&(&h * Complex64::new(0.0, -t)));
            assert!((u[(k0, k0)].norm() - f).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_rates_take_the_closed_path() {
        let psi0 = OccupationState::from_bitstring("1100").unwrap();
        let model = ModelParams::new(1.0, 0.5, Boundary::Periodic).unwrap();
        let closed = ensemble_evolve(&psi0, &EnsembleParams::unitary(model), &SectorMode::All, &[0.0, 1.0]).unwrap();
        let zero = EnsembleParams::dissipative(model, DissipationSpec::uniform(1, 0.0, 0.0, Boundary::Periodic));
        let res = ensemble_evolve(&psi0, &zero, &SectorMode::All, &[0.0, 1.0]).unwrap();
        assert_eq!(closed.fidelity, res.fidelity);
    }
}
