use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use z2dfl_runner::checks::quick_suite;
use z2dfl_runner::config::parse_grid;
use z2dfl_runner::{preset, run_scenario, RunError, ScenarioConfig, PRESETS};

/// Default worker count when neither `--threads` nor the configuration sets one.
const THREADS_ENV: &str = "Z2DFL_THREADS";

#[derive(Parser, Debug)]
#[command(name = "z2dfl", version, about = "Disorder-free localization in the Z2 lattice gauge model: closed and Lindblad dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct ScenarioArgs {
    /// Starting preset (fig1, fig2, fig3, fig4, fig5, ci_small).
    #[arg(long)]
    preset: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Seed for sampled sector lists.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to $Z2DFL_THREADS, then to the number of cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Flat key = value file applied on top of the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Single override, applied last; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a scenario and write its tables and manifest.
    Simulate(ScenarioArgs),
    /// Steady-state fidelity over a grid of dissipation phases (defaults to the fig3 preset).
    SweepAlpha {
        /// start:stop:count, e.g. 0:pi:17.
        #[arg(long, default_value = "0:pi:17")]
        grid: String,
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
    /// Run the fast oracle and invariant checks.
    Verify,
    /// Print a preset as a configuration file.
    ShowPreset { name: String },
}

fn resolve(args: &ScenarioArgs, default_preset: &str) -> Result<ScenarioConfig, RunError> {
    let mut cfg = preset(args.preset.as_deref().unwrap_or(default_preset))?;
    if let Some(path) = &args.config {
        cfg.apply_file(path)?;
    }
    if cfg.threads.is_none() {
        if let Ok(v) = std::env::var(THREADS_ENV) {
            cfg.set("threads", &v).map_err(|e| RunError::config(format!("{THREADS_ENV}: {e}")))?;
        }
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(t) = args.threads {
        cfg.threads = Some(t);
    }
    for o in &args.overrides {
        cfg.apply_override(o)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn simulate(cfg: &ScenarioConfig, args: &ScenarioArgs) -> Result<(), RunError> {
    let manifest = run_scenario(cfg, &args.out)?;
    for run in &manifest.runs {
        let window = run.late_window_mean.map_or("n/a".to_string(), |f| format!("{f:.4}"));
        println!(
            "h/J={} gamma/J={} sectors={} ({}) late-window F={window}",
            run.h_over_j, run.gamma_over_j, run.sector_count, run.sector_mode
        );
        if let Some(ss) = &run.steady {
            let top: Vec<String> = ss.top.iter().take(3).map(|(i, b, v)| format!("{i}:{b}={v:.4}")).collect();
            println!("  steady state: F_ss={:.4} converged={} top {}", ss.fidelity, ss.all_converged, top.join(" "));
        }
    }
    for row in &manifest.alpha_sweep {
        println!("alpha={:.4} gamma/J={} F_ss={:.5} converged={}", row.alpha, row.gamma_over_j, row.f_ss, row.converged);
    }
    println!("wrote {} files and manifest.json to {}", manifest.outputs.len(), args.out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<bool, RunError> {
    match cli.command {
        Command::Simulate(args) => {
            let cfg = resolve(&args, "fig2")?;
            simulate(&cfg, &args)?;
            Ok(true)
        }
        Command::SweepAlpha { grid, scenario } => {
            let mut cfg = resolve(&scenario, "fig3")?;
            cfg.task = z2dfl_runner::Task::AlphaSweep;
            cfg.alphas = parse_grid(&grid)?;
            cfg.validate()?;
            simulate(&cfg, &scenario)?;
            Ok(true)
        }
        Command::Verify => {
            let results = quick_suite();
            for r in &results {
                println!("{r}");
            }
            Ok(results.iter().all(|r| r.passed))
        }
        Command::ShowPreset { name } => {
            print!("{}", preset(&name)?.to_text());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("z2dfl: {e}");
            if matches!(e, RunError::Config(_)) {
                eprintln!("known presets: {}", PRESETS.join(", "));
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
