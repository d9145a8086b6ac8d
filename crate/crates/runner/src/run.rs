//! Scenario execution and persistence.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};
use z2dfl_core::observables::{diagonal_profile, DiagonalProfile};
use z2dfl_core::sectors::{ensemble_evolve, ensemble_steady_state, EnsembleParams, EnsembleResult, EnsembleSteadyState};
use z2dfl_core::SectorBasis;

use crate::config::{ScenarioConfig, Task};
use crate::error::RunError;

/// Number of largest steady-state diagonals listed in the manifest.
const TOP_K: usize = 6;

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SectorConvergence {
    pub charges: String,
    pub converged: bool,
    pub residual: f64,
    pub multiplicity: usize,
    pub relaxation_time: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SteadyRecord {
    pub fidelity: f64,
    /// Largest diagonals as (1-based index, bitstring, value).
    pub top: Vec<(usize, String, f64)>,
    pub all_converged: bool,
    pub sectors: Vec<SectorConvergence>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunRecord {
    pub h_over_j: f64,
    pub gamma_over_j: f64,
    pub sector_mode: String,
    pub sector_count: usize,
    pub method: String,
    pub late_window_mean: Option<f64>,
    pub final_top: Vec<(usize, String, f64)>,
    pub steady: Option<SteadyRecord>,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct AlphaRow {
    pub alpha: f64,
    pub gamma_over_j: f64,
    pub f_ss: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub name: String,
    pub task: String,
    pub code_version: String,
    pub config: Vec<(String, String)>,
    pub notes: Vec<String>,
    pub threads: usize,
    pub wall_time_s: f64,
    pub runs: Vec<RunRecord>,
    pub alpha_sweep: Vec<AlphaRow>,
    pub outputs: Vec<OutputFile>,
}

/// Collects data files, checking every numeric cell and recording checksums.
struct OutputSink {
    dir: PathBuf,
    files: Vec<OutputFile>,
}

impl OutputSink {
    fn new(dir: &Path) -> Result<Self, RunError> {
        fs::create_dir_all(dir).map_err(|e| RunError::io(dir, e))?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    /// Writes `header` and `rows`; every cell that parses as a number must be finite.
    fn write_table(&mut self, name: &str, header: &str, rows: &[String]) -> Result<(), RunError> {
        for (i, row) in rows.iter().enumerate() {
            let bad = row.split(',').any(|cell| cell.parse::<f64>().is_ok_and(|v| !v.is_finite()));
            if bad {
                return Err(RunError::NonFinite { file: name.to_string(), row: i + 1 });
            }
        }
        let mut text = String::with_capacity(rows.len() * 64);
        text.push_str(header);
        text.push('\n');
        for row in rows {
            text.push_str(row);
            text.push('\n');
        }
        self.write_bytes(name, text.into_bytes())
    }

    fn write_bytes(&mut self, name: &str, bytes: Vec<u8>) -> Result<(), RunError> {
        let path = self.dir.join(name);
        fs::write(&path, &bytes).map_err(|e| RunError::io(&path, e))?;
        self.files.push(OutputFile { path: name.to_string(), sha256: hex::encode(Sha256::digest(&bytes)), bytes: bytes.len() });
        Ok(())
    }
}

fn label(h: f64, gamma: f64) -> String {
    format!("h{h}_g{gamma}")
}

fn profile_rows(profile: &DiagonalProfile) -> Result<Vec<String>, RunError> {
    let mut buf = Vec::new();
    profile.write_csv(&mut buf).map_err(|e| RunError::io("<memory>", e))?;
    let text = String::from_utf8(buf).expect("ascii output");
    Ok(text.lines().skip(1).map(str::to_string).collect())
}

fn top_entries(profile: &DiagonalProfile, basis: &SectorBasis) -> Vec<(usize, String, f64)> {
    profile.top(TOP_K).into_iter().map(|(i, v)| (i, basis.state(i).map(|s| s.bitstring()).unwrap_or_default(), v)).collect()
}

/// Trajectory rows `t,trace,min_eig,hermiticity_residual,fidelity`; `min_eig` is empty at
/// times where no spectrum was computed.
pub fn fidelity_rows(result: &EnsembleResult) -> Vec<String> {
    result
        .times()
        .iter()
        .zip(&result.trace)
        .zip(&result.reports)
        .zip(&result.fidelity.values)
        .map(|(((t, tr), rep), f)| {
            let eig = rep.min_eigenvalue.map_or(String::new(), |e| format!("{e:e}"));
            format!("{t},{tr:e},{eig},{:e},{f:e}", rep.hermiticity_residual)
        })
        .collect()
}

fn ensemble_params(cfg: &ScenarioConfig, h: f64, gamma: f64, alpha: f64, dim: usize) -> Result<EnsembleParams, RunError> {
    Ok(EnsembleParams {
        model: cfg.model(h)?,
        dissipation: (gamma > 0.0).then(|| cfg.dissipation(gamma, alpha)),
        propagator: cfg.propagator(dim),
        keep_states: false,
    })
}

/// Ensemble trajectory for one (h, Γ) pair.
pub fn evolve_pair(cfg: &ScenarioConfig, h: f64, gamma: f64) -> Result<EnsembleResult, RunError> {
    let psi0 = cfg.initial_state()?;
    let dim = SectorBasis::enumerate(cfg.sites, cfg.particles).map_err(RunError::config_from)?.dim();
    let params = ensemble_params(cfg, h, gamma, cfg.alpha, dim)?;
    Ok(ensemble_evolve(&psi0, &params, &cfg.sector_mode_for(gamma), &cfg.times())?)
}

/// Ensemble steady state for one (h, Γ, α).
pub fn steady_pair(cfg: &ScenarioConfig, h: f64, gamma: f64, alpha: f64) -> Result<EnsembleSteadyState, RunError> {
    let psi0 = cfg.initial_state()?;
    let dim = SectorBasis::enumerate(cfg.sites, cfg.particles).map_err(RunError::config_from)?.dim();
    let params = ensemble_params(cfg, h, gamma, alpha, dim)?;
    Ok(ensemble_steady_state(&psi0, &params, &cfg.sector_mode_for(gamma), cfg.steady_method)?)
}

/// Steady-state fidelity for every α and every positive Γ in the configuration, at the first
/// field value. Rows are ordered by Γ (config order), then α.
pub fn run_alpha_sweep(cfg: &ScenarioConfig, alphas: &[f64]) -> Result<Vec<AlphaRow>, RunError> {
    cfg.validate()?;
    let h = cfg.fields[0];
    let mut rows = Vec::new();
    for &gamma in cfg.gammas.iter().filter(|g| **g > 0.0) {
        for &alpha in alphas {
            let ss = steady_pair(cfg, h, gamma, alpha)?;
            rows.push(AlphaRow { alpha, gamma_over_j: gamma, f_ss: ss.fidelity, converged: ss.all_converged() });
        }
    }
    Ok(rows)
}

fn with_pool<T: Send>(threads: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<(T, usize), RunError> {
    match threads {
        None => Ok((job(), rayon::current_num_threads())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| RunError::config(format!("cannot start {n} worker threads: {e}")))?;
            Ok((pool.install(job), n))
        }
    }
}

fn steady_record(ss: &EnsembleSteadyState, basis: &SectorBasis) -> Result<(SteadyRecord, DiagonalProfile), RunError> {
    let profile = diagonal_profile(&ss.state, basis)?;
    let record = SteadyRecord {
        fidelity: ss.fidelity,
        top: top_entries(&profile, basis),
        all_converged: ss.all_converged(),
        sectors: ss
            .records
            .iter()
            .map(|r| SectorConvergence {
                charges: r.charges.to_string(),
                converged: r.converged,
                residual: r.residual,
                multiplicity: r.multiplicity,
                relaxation_time: r.relaxation_time,
            })
            .collect(),
    };
    Ok((record, profile))
}

/// Runs the configured task, writes its tables into `out` and returns the manifest, which is
/// also written as `manifest.json`. Data files are byte-identical for identical configurations,
/// whatever the thread count.
pub fn run_scenario(cfg: &ScenarioConfig, out: &Path) -> Result<RunManifest, RunError> {
    cfg.validate()?;
    let started = Instant::now();
    let mut sink = OutputSink::new(out)?;
    let basis = SectorBasis::enumerate(cfg.sites, cfg.particles).map_err(RunError::config_from)?;
    let dim = basis.dim();

    let (outcome, threads) = with_pool(cfg.threads, || -> Result<_, RunError> {
        let mut runs = Vec::new();
        let mut sweep = Vec::new();
        match cfg.task {
            Task::Evolve => {
                for &h in &cfg.fields {
                    for &gamma in &cfg.gammas {
                        let tag = label(h, gamma);
                        let result = evolve_pair(cfg, h, gamma)?;
                        sink.write_table(
                            &format!("fidelity_{tag}.csv"),
                            "t,trace,min_eig,hermiticity_residual,fidelity",
                            &fidelity_rows(&result),
                        )?;
                        let final_profile = diagonal_profile(&result.final_state, &basis)?;
                        sink.write_table(&format!("final_diag_{tag}.csv"), "index,bitstring,value", &profile_rows(&final_profile)?)?;
                        let steady = if cfg.steady_state && gamma > 0.0 {
                            let ss = steady_pair(cfg, h, gamma, cfg.alpha)?;
                            let (record, profile) = steady_record(&ss, &basis)?;
                            sink.write_table(&format!("steady_diag_{tag}.csv"), "index,bitstring,value", &profile_rows(&profile)?)?;
                            Some(record)
                        } else {
                            None
                        };
                        let mode = cfg.sector_mode_for(gamma);
                        runs.push(RunRecord {
                            h_over_j: h,
                            gamma_over_j: gamma,
                            sector_mode: mode.to_string(),
                            sector_count: result.sectors.len(),
                            method: if gamma > 0.0 { cfg.propagator(dim).method.to_string() } else { "eigendecomposition".into() },
                            late_window_mean: result.fidelity.window_mean(cfg.window_start, cfg.window_stop),
                            final_top: top_entries(&final_profile, &basis),
                            steady,
                        });
                    }
                }
            }
            Task::AlphaSweep => {
                sweep = run_alpha_sweep(cfg, &cfg.alphas)?;
                let rows: Vec<String> =
                    sweep.iter().map(|r| format!("{},{},{:e},{}", r.alpha, r.gamma_over_j, r.f_ss, r.converged)).collect();
                sink.write_table("alpha_sweep.csv", "alpha,gamma_over_J,f_ss,converged", &rows)?;
            }
        }
        Ok((runs, sweep))
    })?;
    let (runs, sweep) = outcome?;

    let manifest = RunManifest {
        name: cfg.name.clone(),
        task: cfg.task.to_string(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.pairs().into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        notes: cfg.notes.clone(),
        threads,
        wall_time_s: started.elapsed().as_secs_f64(),
        runs,
        alpha_sweep: sweep,
        outputs: sink.files.clone(),
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    let path = out.join("manifest.json");
    fs::write(&path, json).map_err(|e| RunError::io(&path, e))?;
    Ok(manifest)
}
