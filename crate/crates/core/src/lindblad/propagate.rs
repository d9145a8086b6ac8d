use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::density::{DensityMatrix, InvariantReport};
use super::Lindbladian;
use crate::error::{invalid, Error, Result};
use crate::linalg::expm;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    /// Fixed-step classical fourth-order Runge-Kutta.
    Rk4,
    /// Adaptive Arnoldi approximation of `exp(ℒ Δt)` on the vectorized state.
    KrylovExp,
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rk4" => Ok(Method::Rk4),
            "krylov" | "krylov-exp" | "krylov_exp" => Ok(Method::KrylovExp),
            other => Err(invalid(format!("unknown propagation method {other:?}"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Rk4 => "rk4",
            Method::KrylovExp => "krylov-exp",
        })
    }
}

/// Numerical knobs shared by propagation and the steady-state solvers. Times in units of `1/J`.
#[derive(Clone, Debug, PartialEq)]
pub struct PropagatorParams {
    pub method: Method,
    /// Runge-Kutta step.
    pub dt: f64,
    /// Maximum Arnoldi subspace dimension.
    pub krylov_dim: usize,
    /// Accepted local error of one Krylov step, relative to `‖ρ‖_F`.
    pub krylov_tol: f64,
    /// Positivity (a full eigendecomposition) is checked at every `n`-th output time; 0 disables it.
    pub spectrum_check_stride: usize,
    /// How many times an output interval is retried with a halved step before giving up.
    pub max_halvings: u32,
    /// Evolution horizon of [`super::steady_state_evolve`].
    pub t_max: f64,
    /// `‖ℒ[ρ]‖_F` below which a state counts as stationary.
    pub steady_threshold: f64,
    /// Interval between residual evaluations while relaxing to the steady state.
    pub steady_check_interval: f64,
}

impl Default for PropagatorParams {
    fn default() -> Self {
        Self {
            method: Method::Rk4,
            dt: 0.02,
            krylov_dim: 30,
            krylov_tol: 1e-12,
            spectrum_check_stride: 1,
            max_halvings: 6,
            t_max: 1000.0,
            steady_threshold: 1e-8,
            steady_check_interval: 1.0,
        }
    }
}

impl PropagatorParams {
    /// Krylov propagation from dimension 200 upward, Runge-Kutta below. Positivity
    /// is checked at every output for small bases and roughly every 30th otherwise.
    pub fn for_dim(dim: usize) -> Self {
        Self {
            method: if dim >= 200 { Method::KrylovExp } else { Method::Rk4 },
            spectrum_check_stride: if dim <= 100 { 1 } else { 30 },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(invalid(format!("time step must be positive, got {}", self.dt)));
        }
        if self.krylov_dim < 2 {
            return Err(invalid("Krylov dimension must be at least 2"));
        }
        for (name, v) in [
            ("Krylov tolerance", self.krylov_tol),
            ("steady-state threshold", self.steady_threshold),
            ("steady-state check interval", self.steady_check_interval),
        ] {
            if !(v > 0.0) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.t_max >= 0.0) {
            return Err(invalid(format!("t_max must be non-negative, got {}", self.t_max)));
        }
        Ok(())
    }
}

/// States at the requested output times.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub reports: Vec<InvariantReport>,
}

/// Advances a state under a fixed generator, retrying intervals with smaller steps
/// when the density-matrix invariants drift.
pub(crate) struct Stepper<'a> {
    generator: &'a Lindbladian,
    params: &'a PropagatorParams,
    out: DMatrix<Complex64>,
    scratch: DMatrix<Complex64>,
    krylov_tau: Option<f64>,
}

impl<'a> Stepper<'a> {
    pub(crate) fn new(generator: &'a Lindbladian, params: &'a PropagatorParams) -> Self {
        let d = generator.dim();
        Self { generator, params, out: DMatrix::zeros(d, d), scratch: DMatrix::zeros(d, d), krylov_tau: None }
    }

    fn apply(&mut self, x: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        self.generator.apply_into(x, &mut self.out, &mut self.scratch);
        self.out.clone()
    }

    /// Evolves `rho` by `span` and checks invariants; `time` is only used for diagnostics.
    pub(crate) fn advance_checked(
        &mut self,
        rho: &mut DMatrix<Complex64>,
        span: f64,
        time: f64,
        with_spectrum: bool,
    ) -> Result<InvariantReport> {
        let start = rho.clone();
        let mut last = None;
        for refinement in 0..=self.params.max_halvings {
            if refinement > 0 {
                rho.copy_from(&start);
            }
            self.advance(rho, span, refinement)?;
            let report = InvariantReport::measure(rho, with_spectrum);
            if report.is_valid() {
                return Ok(report);
            }
            last = Some(report);
        }
        Err(Error::PropagationFailure {
            time,
            reason: format!(
                "density-matrix invariants violated after {} step halvings: {}",
                self.params.max_halvings,
                last.map(|r| r.describe()).unwrap_or_default()
            ),
        })
    }

    fn advance(&mut self, rho: &mut DMatrix<Complex64>, span: f64, refinement: u32) -> Result<()> {
        if span <= 0.0 {
            return Ok(());
        }
        let scale = 0.5f64.powi(refinement as i32);
        match self.params.method {
            Method::Rk4 => {
                self.rk4(rho, span, self.params.dt * scale);
                Ok(())
            }
            Method::KrylovExp => self.krylov(rho, span, self.params.krylov_tol * scale.powi(4), span * scale),
        }
    }

    fn rk4(&mut self, rho: &mut DMatrix<Complex64>, span: f64, dt: f64) {
        let steps = ((span / dt) - 1e-9).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        let half = Complex64::new(h / 2.0, 0.0);
        let full = Complex64::new(h, 0.0);
        let sixth = Complex64::new(h / 6.0, 0.0);
        let two = Complex64::new(2.0, 0.0);
        for _ in 0..steps {
            let k1 = self.apply(rho);
            let k2 = self.apply(&(&*rho + &k1 * half));
            let k3 = self.apply(&(&*rho + &k2 * half));
            let k4 = self.apply(&(&*rho + &k3 * full));
            *rho += (k1 + (k2 + k3) * two + k4) * sixth;
        }
    }

    fn krylov(&mut self, rho: &mut DMatrix<Complex64>, span: f64, tol: f64, max_step: f64) -> Result<()> {
        let m = self.params.krylov_dim;
        let mut elapsed = 0.0;
        let mut tau = self.krylov_tau.unwrap_or(span).min(max_step);
        while elapsed < span * (1.0 - 1e-12) {
            tau = tau.min(span - elapsed).min(max_step);
            let beta = rho.norm();
            if beta == 0.0 {
                return Ok(());
            }
            let (basis, hess, happy) = self.arnoldi(rho, beta, m);
            let k = basis.len();
            let h_next = if happy { 0.0 } else { hess[(k, k - 1)].re };
            let mut attempts = 0;
            loop {
                attempts += 1;
                // exp of [[τH_k, 0], [τh_{k+1,k} e_kᵀ, 0]] gives e^{τH_k} e_1 in its first
                // column and the local error estimate in entry (k, 0)
                let mut aug = DMatrix::<Complex64>::zeros(k + 1, k + 1);
                for i in 0..k {
                    for j in 0..k {
                        aug[(i, j)] = hess[(i, j)] * tau;
                    }
                }
                aug[(k, k - 1)] = Complex64::new(tau * h_next, 0.0);
                let e = expm(&aug);
                let err = beta * e[(k, 0)].norm();
                if happy || err <= tol * beta {
                    rho.fill(ZERO);
                    for (i, v) in basis.iter().enumerate() {
                        rho.zip_apply(v, |r, x| *r += x * e[(i, 0)] * beta);
                    }
                    elapsed += tau;
                    let grow = if err == 0.0 { 5.0 } else { (0.9 * (tol * beta / err).powf(1.0 / k as f64)).min(5.0) };
                    tau *= grow.max(1.0);
                    break;
                }
                if attempts > 60 {
                    return Err(Error::PropagationFailure { time: elapsed, reason: format!("Krylov step size collapsed below {tau:.3e}") });
                }
                tau *= (0.9 * (tol * beta / err).powf(1.0 / k as f64)).clamp(0.1, 0.8);
            }
        }
        self.krylov_tau = Some(tau);
        Ok(())
    }

    /// Arnoldi basis of `span{ρ, ℒρ, …}` with the Hessenberg matrix; the flag marks an
    /// invariant subspace (exact exponential).
    fn arnoldi(&mut self, rho: &DMatrix<Complex64>, beta: f64, m: usize) -> (Vec<DMatrix<Complex64>>, DMatrix<Complex64>, bool) {
        let mut basis = vec![rho / Complex64::new(beta, 0.0)];
        let mut hess = DMatrix::<Complex64>::zeros(m + 1, m);
        for j in 0..m {
            let mut w = self.apply(&basis[j]);
            let wnorm0 = w.norm();
            for pass in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let h = v.dotc(&w);
                    if pass == 0 {
                        hess[(i, j)] = h;
                    } else {
                        hess[(i, j)] += h;
                    }
                    w.zip_apply(v, |wi, vi| *wi -= h * vi);
                }
            }
            let hn = w.norm();
            hess[(j + 1, j)] = Complex64::new(hn, 0.0);
            if hn <= 1e-13 * wnorm0.max(1e-300) || hn == 0.0 {
                let k = j + 1;
                let trimmed = DMatrix::from_fn(k + 1, k, |r, c| if r < k { hess[(r, c)] } else { ZERO });
                return (basis, trimmed, true);
            }
            if j + 1 < m {
                basis.push(w / Complex64::new(hn, 0.0));
            }
        }
        (basis, hess, false)
    }
}

/// Evolves `rho0` (the state at `t = 0`) and returns it at each time in `times`.
pub fn propagate(rho0: &DensityMatrix, generator: &Lindbladian, times: &[f64], params: &PropagatorParams) -> Result<Trajectory> {
    let mut traj = Trajectory { times: Vec::new(), states: Vec::new(), reports: Vec::new() };
    propagate_with(rho0, generator, times, params, |t, rho, report| {
        traj.times.push(t);
        traj.states.push(DensityMatrix::new_unchecked(rho.clone()));
        traj.reports.push(*report);
        Ok(())
    })?;
    Ok(traj)
}

/// Like [`propagate`] but hands each output state to `visit` instead of storing it.
pub fn propagate_with(
    rho0: &DensityMatrix,
    generator: &Lindbladian,
    times: &[f64],
    params: &PropagatorParams,
    mut visit: impl FnMut(f64, &DMatrix<Complex64>, &InvariantReport) -> Result<()>,
) -> Result<()> {
    params.validate()?;
    if rho0.dim() != generator.dim() {
        return Err(invalid(format!("state of dimension {} with a generator of dimension {}", rho0.dim(), generator.dim())));
    }
    if let Some(&first) = times.first() {
        if !(first >= 0.0) {
            return Err(invalid(format!("output times must start at or after 0, got {first}")));
        }
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("output times must be strictly ascending"));
    }
    let mut stepper = Stepper::new(generator, params);
    let mut rho = rho0.matrix().clone();
    let mut t = 0.0;
    for (k, &target) in times.iter().enumerate() {
        let with_spectrum = params.spectrum_check_stride > 0 && k % params.spectrum_check_stride == 0;
        let report = if target > t {
            stepper.advance_checked(&mut rho, target - t, target, with_spectrum)?
        } else {
            InvariantReport::measure(&rho, with_spectrum)
        };
        t = target;
        visit(target, &rho, &report)?;
    }
    Ok(())
}
