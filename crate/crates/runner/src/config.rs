//! Scenario configuration: flat `key = value` files, command-line overrides and presets.

use std::f64::consts::PI;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use z2dfl_core::lindblad::{DissipationSpec, Method, PropagatorParams};
use z2dfl_core::sectors::SteadyMethod;
use z2dfl_core::{Boundary, ChargeConfig, ModelParams, OccupationState, SectorBasis, SectorMode};

use crate::error::RunError;

/// What a scenario computes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    /// Fidelity trajectories for every (h, Γ) pair, plus steady states when enabled.
    Evolve,
    /// Ensemble steady-state fidelity over a grid of dissipation phases.
    AlphaSweep,
}

impl FromStr for Task {
    type Err = RunError;
    fn from_str(s: &str) -> Result<Self, RunError> {
        match s {
            "evolve" => Ok(Task::Evolve),
            "alpha_sweep" => Ok(Task::AlphaSweep),
            _ => Err(RunError::config(format!("unknown task {s:?} (expected evolve or alpha_sweep)"))),
        }
    }
}

impl Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Task::Evolve => "evolve",
            Task::AlphaSweep => "alpha_sweep",
        })
    }
}

/// `auto` resolves per run: all sectors for closed runs up to L = 10 and dissipative runs up
/// to L = 8, otherwise `sample` with `sector_count` draws.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ModeChoice {
    Auto,
    All,
    Parity,
    Sample,
    Single(ChargeConfig),
}

/// `auto` picks krylov-exp from dimension 200 upward and rk4 below.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MethodChoice {
    Auto,
    Fixed(Method),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub task: Task,
    pub sites: usize,
    pub particles: usize,
    pub fields: Vec<f64>,
    pub gammas: Vec<f64>,
    pub alpha: f64,
    pub alphas: Vec<f64>,
    pub range: usize,
    pub boundary: Boundary,
    pub initial_pattern: String,
    pub sector_mode: ModeChoice,
    pub sector_count: usize,
    pub seed: u64,
    pub t_start: f64,
    pub t_stop: f64,
    pub t_stride: f64,
    pub method: MethodChoice,
    pub dt: f64,
    pub krylov_dim: usize,
    pub krylov_tol: f64,
    /// 0 selects the dimension-dependent default.
    pub spectrum_check_stride: Option<usize>,
    pub steady_state: bool,
    pub steady_method: SteadyMethod,
    pub steady_threshold: f64,
    pub steady_t_max: f64,
    pub window_start: f64,
    pub window_stop: f64,
    pub threads: Option<usize>,
    /// Free-text remarks carried into the manifest.
    pub notes: Vec<String>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let p = PropagatorParams::default();
        Self {
            name: "custom".into(),
            task: Task::Evolve,
            sites: 10,
            particles: 5,
            fields: vec![0.5],
            gammas: vec![0.0],
            alpha: 0.0,
            alphas: Vec::new(),
            range: 2,
            boundary: Boundary::Periodic,
            initial_pattern: "1010101010".into(),
            sector_mode: ModeChoice::Auto,
            sector_count: 128,
            seed: 7,
            t_start: 0.0,
            t_stop: 150.0,
            t_stride: 1.0,
            method: MethodChoice::Auto,
            dt: p.dt,
            krylov_dim: p.krylov_dim,
            krylov_tol: p.krylov_tol,
            spectrum_check_stride: None,
            steady_state: false,
            steady_method: SteadyMethod::Auto,
            steady_threshold: p.steady_threshold,
            steady_t_max: p.t_max,
            window_start: 110.0,
            window_stop: 150.0,
            threads: None,
            notes: Vec::new(),
        }
    }
}

/// Parses a real number that may be written with `pi`, e.g. `pi/8`, `3*pi/4`, `0.25`.
pub fn parse_angle(text: &str) -> Result<f64, RunError> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_ascii_lowercase();
    let bad = || RunError::config(format!("cannot parse number {text:?}"));
    if let Ok(v) = s.parse::<f64>() {
        return Ok(v);
    }
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n, d.parse::<f64>().map_err(|_| bad())?),
        None => (s.as_str(), 1.0),
    };
    let value = match num {
        "pi" => PI,
        "-pi" => -PI,
        _ => match num.strip_suffix("*pi").or_else(|| num.strip_suffix("pi")) {
            Some(k) => k.parse::<f64>().map_err(|_| bad())? * PI,
            None => num.parse::<f64>().map_err(|_| bad())?,
        },
    };
    Ok(value / den)
}

/// `start:stop:count`, inclusive of both ends.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, RunError> {
    let parts: Vec<&str> = text.split(':').collect();
    let [start, stop, count] = parts[..] else {
        return Err(RunError::config(format!("expected start:stop:count, got {text:?}")));
    };
    let (a, b) = (parse_angle(start)?, parse_angle(stop)?);
    let n: usize = count.trim().parse().map_err(|_| RunError::config(format!("bad point count in {text:?}")))?;
    Ok(match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
    })
}

fn parse_list(value: &str) -> Result<Vec<f64>, RunError> {
    if value.contains(':') {
        return parse_grid(value);
    }
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(parse_angle).collect()
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T, RunError> {
    value.parse().map_err(|_| RunError::config(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, RunError> {
    match value {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(RunError::config(format!("{key}: expected true or false, got {value:?}"))),
    }
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl ScenarioConfig {
    /// Sets one key; see [`ScenarioConfig::pairs`] for the key names.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), RunError> {
        let value = value.trim();
        match key.trim() {
            "name" => self.name = value.to_string(),
            "task" => self.task = value.parse()?,
            "L" => self.sites = parse_num(key, value)?,
            "Nf" => self.particles = parse_num(key, value)?,
            "h_over_J" => self.fields = parse_list(value)?,
            "gamma_over_J" => self.gammas = parse_list(value)?,
            "alpha" => self.alpha = parse_angle(value)?,
            "alphas" => self.alphas = parse_list(value)?,
            "l" => self.range = parse_num(key, value)?,
            "bc" => self.boundary = value.parse().map_err(RunError::config_from)?,
            "initial_pattern" => self.initial_pattern = value.to_string(),
            "sector_mode" => {
                self.sector_mode = match value {
                    "auto" => ModeChoice::Auto,
                    "all" => ModeChoice::All,
                    "parity" => ModeChoice::Parity,
                    "sample" => ModeChoice::Sample,
                    other => match other.strip_prefix("single:") {
                        Some(q) => ModeChoice::Single(q.parse().map_err(RunError::config_from)?),
                        None => return Err(RunError::config(format!("unknown sector_mode {other:?}"))),
                    },
                }
            }
            "sector_count" => self.sector_count = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "t_start" => self.t_start = parse_num(key, value)?,
            "t_stop" => self.t_stop = parse_num(key, value)?,
            "t_stride" => self.t_stride = parse_num(key, value)?,
            "method" => {
                self.method = match value {
                    "auto" => MethodChoice::Auto,
                    other => MethodChoice::Fixed(other.parse().map_err(RunError::config_from)?),
                }
            }
            "dt" => self.dt = parse_num(key, value)?,
            "krylov_dim" => self.krylov_dim = parse_num(key, value)?,
            "krylov_tol" => self.krylov_tol = parse_num(key, value)?,
            "spectrum_check_stride" => self.spectrum_check_stride = if value == "auto" { None } else { Some(parse_num(key, value)?) },
            "steady_state" => self.steady_state = parse_bool(key, value)?,
            "steady_method" => self.steady_method = value.parse().map_err(RunError::config_from)?,
            "steady_threshold" => self.steady_threshold = parse_num(key, value)?,
            "steady_t_max" => self.steady_t_max = parse_num(key, value)?,
            "window_start" => self.window_start = parse_num(key, value)?,
            "window_stop" => self.window_stop = parse_num(key, value)?,
            "threads" => self.threads = if value == "auto" { None } else { Some(parse_num(key, value)?) },
            "note" => self.notes.push(value.to_string()),
            other => return Err(RunError::config(format!("unknown configuration key {other:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<(), RunError> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) =
                line.split_once('=').ok_or_else(|| RunError::config(format!("line {}: expected key = value, got {line:?}", n + 1)))?;
            self.set(k, v).map_err(|e| RunError::config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), RunError> {
        let text = std::fs::read_to_string(path).map_err(|e| RunError::config(format!("{}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    /// Applies a `key=value` override as given on the command line.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), RunError> {
        let (k, v) = assignment.split_once('=').ok_or_else(|| RunError::config(format!("expected key=value, got {assignment:?}")))?;
        self.set(k, v)
    }

    /// All settings as key/value pairs, in a fixed order; feeding them back through
    /// [`ScenarioConfig::apply_text`] reproduces the configuration.
    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        let mode = match &self.sector_mode {
            ModeChoice::Auto => "auto".to_string(),
            ModeChoice::All => "all".to_string(),
            ModeChoice::Parity => "parity".to_string(),
            ModeChoice::Sample => "sample".to_string(),
            ModeChoice::Single(q) => format!("single:{q}"),
        };
        let method = match self.method {
            MethodChoice::Auto => "auto".to_string(),
            MethodChoice::Fixed(m) => m.to_string(),
        };
        vec![
            ("name", self.name.clone()),
            ("task", self.task.to_string()),
            ("L", self.sites.to_string()),
            ("Nf", self.particles.to_string()),
            ("h_over_J", join(&self.fields)),
            ("gamma_over_J", join(&self.gammas)),
            ("alpha", self.alpha.to_string()),
            ("alphas", join(&self.alphas)),
            ("l", self.range.to_string()),
            ("bc", self.boundary.to_string()),
            ("initial_pattern", self.initial_pattern.clone()),
            ("sector_mode", mode),
            ("sector_count", self.sector_count.to_string()),
            ("seed", self.seed.to_string()),
            ("t_start", self.t_start.to_string()),
            ("t_stop", self.t_stop.to_string()),
            ("t_stride", self.t_stride.to_string()),
            ("method", method),
            ("dt", self.dt.to_string()),
            ("krylov_dim", self.krylov_dim.to_string()),
            ("krylov_tol", self.krylov_tol.to_string()),
            ("spectrum_check_stride", self.spectrum_check_stride.map_or("auto".into(), |s| s.to_string())),
            ("steady_state", self.steady_state.to_string()),
            ("steady_method", self.steady_method.to_string()),
            ("steady_threshold", self.steady_threshold.to_string()),
            ("steady_t_max", self.steady_t_max.to_string()),
            ("window_start", self.window_start.to_string()),
            ("window_stop", self.window_stop.to_string()),
            ("threads", self.threads.map_or("auto".into(), |t| t.to_string())),
        ]
    }

    pub fn to_text(&self) -> String {
        let mut out: String = self.pairs().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        for n in &self.notes {
            out.push_str(&format!("note = {n}\n"));
        }
        out
    }

    pub fn initial_state(&self) -> Result<OccupationState, RunError> {
        let s = OccupationState::from_bitstring(&self.initial_pattern).map_err(RunError::config_from)?;
        if s.sites() != self.sites || s.particles() != self.particles {
            return Err(RunError::config(format!(
                "initial_pattern {} has {} sites and {} particles, expected L = {} and Nf = {}",
                self.initial_pattern,
                s.sites(),
                s.particles(),
                self.sites,
                self.particles
            )));
        }
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), RunError> {
        self.initial_state()?;
        SectorBasis::enumerate(self.sites, self.particles).map_err(RunError::config_from)?;
        if self.fields.is_empty() {
            return Err(RunError::config("h_over_J needs at least one value"));
        }
        for h in &self.fields {
            ModelParams::new(1.0, *h, self.boundary).map_err(RunError::config_from)?;
        }
        if self.gammas.iter().any(|g| !(*g >= 0.0) || !g.is_finite()) {
            return Err(RunError::config("gamma_over_J values must be finite and non-negative"));
        }
        if self.task == Task::Evolve && self.gammas.is_empty() {
            return Err(RunError::config("gamma_over_J needs at least one value"));
        }
        if self.task == Task::AlphaSweep && !self.gammas.iter().any(|g| *g > 0.0) {
            return Err(RunError::config("an alpha sweep needs a positive gamma_over_J"));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(-1e-12..=PI + 1e-12).contains(*a)) {
            return Err(RunError::config(format!("alphas must lie in [0, pi], got {a}")));
        }
        if self.range == 0 || self.range >= self.sites {
            return Err(RunError::config(format!("jump range l must be in 1..L, got {}", self.range)));
        }
        if !(self.t_stride > 0.0) || !(self.t_start >= 0.0) || !(self.t_stop >= self.t_start) {
            return Err(RunError::config("time grid needs 0 <= t_start <= t_stop and t_stride > 0"));
        }
        if self.sector_count == 0 {
            return Err(RunError::config("sector_count must be at least 1"));
        }
        if let ModeChoice::Single(q) = &self.sector_mode {
            if q.len() != self.sites {
                return Err(RunError::config(format!("single sector {q} does not have L = {} charges", self.sites)));
            }
        }
        if self.threads == Some(0) {
            return Err(RunError::config("threads must be at least 1"));
        }
        self.propagator(1).validate().map_err(RunError::config_from)?;
        Ok(())
    }

    /// Output times `t_start, t_start + stride, …` up to `t_stop` (inclusive within 1e-9).
    pub fn times(&self) -> Vec<f64> {
        let n = ((self.t_stop - self.t_start) / self.t_stride + 1e-9).floor() as usize;
        (0..=n).map(|k| self.t_start + k as f64 * self.t_stride).collect()
    }

    pub fn model(&self, field: f64) -> Result<ModelParams, RunError> {
        ModelParams::new(1.0, field, self.boundary).map_err(RunError::config_from)
    }

    pub fn dissipation(&self, gamma: f64, alpha: f64) -> DissipationSpec {
        DissipationSpec::uniform(self.range, alpha, gamma, self.boundary)
    }

    pub fn sector_mode_for(&self, gamma: f64) -> SectorMode {
        let sample = SectorMode::Sample { count: self.sector_count, seed: self.seed };
        match &self.sector_mode {
            ModeChoice::All => SectorMode::All,
            ModeChoice::Parity => SectorMode::ParityConstrained,
            ModeChoice::Sample => sample,
            ModeChoice::Single(q) => SectorMode::Single(q.clone()),
            ModeChoice::Auto => {
                let limit = if gamma > 0.0 { 8 } else { 10 };
                if self.sites <= limit {
                    SectorMode::All
                } else {
                    sample
                }
            }
        }
    }

    pub fn propagator(&self, dim: usize) -> PropagatorParams {
        let auto = PropagatorParams::for_dim(dim);
        PropagatorParams {
            method: match self.method {
                MethodChoice::Auto => auto.method,
                MethodChoice::Fixed(m) => m,
            },
            dt: self.dt,
            krylov_dim: self.krylov_dim,
            krylov_tol: self.krylov_tol,
            spectrum_check_stride: self.spectrum_check_stride.unwrap_or(auto.spectrum_check_stride),
            t_max: self.steady_t_max,
            steady_threshold: self.steady_threshold,
            ..auto
        }
    }
}

/// Preset names accepted by [`preset`].
pub const PRESETS: [&str; 6] = ["fig1", "fig2", "fig3", "fig4", "fig5", "ci_small"];

/// Ready-made scenarios. Times are in `1/J`, rates in units of `J`.
pub fn preset(name: &str) -> Result<ScenarioConfig, RunError> {
    let base = ScenarioConfig { name: name.to_string(), ..ScenarioConfig::default() };
    let cfg = match name {
        "fig1" => ScenarioConfig {
            fields: vec![0.25, 0.5, 1.0],
            gammas: vec![0.0],
            sector_mode: ModeChoice::All,
            notes: vec!["h_over_J values 0.25, 0.5, 1.0 are representative choices".into()],
            ..base
        },
        "fig2" => ScenarioConfig { gammas: vec![0.0, 1.0], steady_state: true, ..base },
        "fig3" => ScenarioConfig {
            task: Task::AlphaSweep,
            sites: 8,
            particles: 4,
            initial_pattern: "10101010".into(),
            gammas: vec![1.0, 0.5],
            alphas: parse_grid("0:pi:17")?,
            sector_mode: ModeChoice::Sample,
            sector_count: 32,
            notes: vec!["alpha sweep reduced to L = 8 and 32 sampled sectors; override L, Nf and initial_pattern for larger systems".into()],
            ..base
        },
        "fig4" => ScenarioConfig {
            sites: 12,
            particles: 4,
            range: 3,
            initial_pattern: "100100100100".into(),
            gammas: vec![0.0, 1.0],
            sector_mode: ModeChoice::Sample,
            sector_count: 32,
            steady_state: true,
            ..base
        },
        "fig5" => ScenarioConfig {
            sites: 12,
            particles: 3,
            range: 4,
            initial_pattern: "100010001000".into(),
            gammas: vec![0.0, 1.0],
            sector_mode: ModeChoice::Sample,
            sector_count: 32,
            steady_state: true,
            ..base
        },
        "ci_small" => ScenarioConfig {
            sites: 8,
            particles: 4,
            initial_pattern: "10101010".into(),
            gammas: vec![0.0, 1.0],
            sector_mode: ModeChoice::Sample,
            sector_count: 16,
            steady_state: true,
            ..base
        },
        other => return Err(RunError::config(format!("unknown preset {other:?}; known: {}", PRESETS.join(", ")))),
    };
    cfg.validate()?;
    Ok(cfg)
}
