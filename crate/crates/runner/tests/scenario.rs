use std::path::PathBuf;

use z2dfl_runner::config::parse_grid;
use z2dfl_runner::run::steady_pair;
use z2dfl_runner::{preset, run_alpha_sweep, run_scenario, ScenarioConfig};

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("z2dfl-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn small() -> ScenarioConfig {
    let mut cfg = preset("ci_small").unwrap();
    cfg.apply_text(
        "name = small\nL = 6\nNf = 3\ninitial_pattern = 101010\nsector_mode = sample\nsector_count = 5\n\
         t_stop = 6\nwindow_start = 2\nwindow_stop = 6\nsteady_state = true\n",
    )
    .unwrap();
    cfg
}

#[test]
fn data_files_are_reproducible_across_thread_counts() {
    let mut cfg = small();
    cfg.threads = Some(1);
    let a = run_scenario(&cfg, &scratch("det1")).unwrap();
    cfg.threads = Some(3);
    let b = run_scenario(&cfg, &scratch("det3")).unwrap();
    assert!(!a.outputs.is_empty());
    assert_eq!(a.outputs, b.outputs);
    let names: Vec<&str> = a.outputs.iter().map(|o| o.path.as_str()).collect();
    for expected in ["fidelity_h0.5_g0.csv", "fidelity_h0.5_g1.csv", "final_diag_h0.5_g1.csv", "steady_diag_h0.5_g1.csv"] {
        assert!(names.contains(&expected), "{names:?}");
    }
}

#[test]
fn written_tables_match_the_manifest() {
    let dir = scratch("manifest");
    let manifest = run_scenario(&small(), &dir).unwrap();
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(json["outputs"].as_array().unwrap().len(), manifest.outputs.len());
    let text = std::fs::read_to_string(dir.join("fidelity_h0.5_g1.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,trace,min_eig,hermiticity_residual,fidelity"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|c| if c.is_empty() { 0.0 } else { c.parse().unwrap() }).collect()).collect();
    assert_eq!(rows.len(), 7);
    assert!(rows.iter().all(|r| (r[1] - 1.0).abs() < 1e-8 && r[3] < 1e-10));
    assert!((rows[0][4] - 1.0).abs() < 1e-12);
}

#[test]
fn empty_alpha_grid_gives_an_empty_table() {
    let mut cfg = small();
    cfg.set("task", "alpha_sweep").unwrap();
    cfg.alphas = Vec::new();
    assert!(run_alpha_sweep(&cfg, &[]).unwrap().is_empty());
    let dir = scratch("empty");
    run_scenario(&cfg, &dir).unwrap();
    let text = std::fs::read_to_string(dir.join("alpha_sweep.csv")).unwrap();
    assert_eq!(text, "alpha,gamma_over_J,f_ss,converged\n");
}

#[test]
fn zero_phase_sweep_entry_matches_the_steady_state_run() {
    let cfg = small();
    let rows = run_alpha_sweep(&cfg, &parse_grid("0:pi:3").unwrap()).unwrap();
    assert_eq!(rows.len(), 3);
    let direct = steady_pair(&cfg, cfg.fields[0], 1.0, 0.0).unwrap();
    assert_eq!(rows[0].alpha, 0.0);
    assert!((rows[0].f_ss - direct.fidelity).abs() < 1e-12);
    assert!(rows.iter().all(|r| r.converged && (0.0..=1.0).contains(&r.f_ss)));
}
