use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use geosph::config::{load_config, LoadedConfig, Scenario};
use geosph::io::{create_run_dir, curves_csv, safety_report_csv, sweep_report_csv, write_text, RunWriter};
use geosph::scenarios::{
    apply_sweep_value, block_simulation, collapse_sweep, run_collapse, run_for, strength_reduction_trials, Observer,
    Outcome, RunSummary, SafetyReport, SweepParam, SweepReport, SweepValue,
};
use geosph::verify::run_all;
use geosph::Error;

#[derive(Parser)]
#[command(name = "geosph", version, about = "Plane-strain SPH for large deformation of soils")]
struct Cli {
    /// Seed for randomised inputs; overrides `numerics.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output base directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a configuration file.
    Run { config: PathBuf },
    /// Repeat the scenario for several values of one parameter.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        param: String,
        /// Comma-separated values; `none` switches the configuration update off.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
    /// Run the built-in oracle checks.
    Verify,
}

enum Fault {
    Error(Error),
    /// The command ran but must report failure, e.g. a solver fatality.
    Failed(String),
}

impl From<Error> for Fault {
    fn from(e: Error) -> Self {
        Fault::Error(e)
    }
}

fn configure_threads() -> Result<(), Error> {
    let Ok(v) = std::env::var("GEOSPH_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Config {
            key: "GEOSPH_THREADS".into(),
            message: format!("`{v}` is not a positive integer"),
        })?;
    // only fails when a pool already exists
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    info!("worker threads capped at {n}");
    Ok(())
}

fn load(path: &Path, cli: &Cli) -> Result<LoadedConfig, Error> {
    let mut loaded = load_config(path)?;
    if let Some(seed) = cli.seed {
        loaded.config.seed = seed;
        loaded.effective = loaded.config.to_toml();
    }
    if let Some(out) = &cli.out {
        loaded.config.output.dir = out.clone();
        loaded.effective = loaded.config.to_toml();
    }
    Ok(loaded)
}

fn writer(dir: &Path, loaded: &LoadedConfig) -> Result<Box<dyn Observer<f64>>, Error> {
    write_text(&dir.join("config.toml"), &loaded.effective)?;
    let out = &loaded.config.output;
    Ok(Box::new(RunWriter::new(dir, out.progress_every, out.snapshot_interval)?))
}

fn check_outcome(summary: &RunSummary<f64>) -> Result<(), Fault> {
    match &summary.outcome {
        Outcome::Completed => Ok(()),
        Outcome::NegativeJacobian { message, .. } | Outcome::Aborted { message, .. } => {
            Err(Fault::Failed(message.clone()))
        }
    }
}

fn summary_line(s: &RunSummary<f64>) -> String {
    format!(
        "{} at t = {:.4} s, {} steps, {} configuration updates, max displacement {:.4} m",
        s.outcome.label(),
        s.time,
        s.steps,
        s.updates,
        s.max_displacement
    )
}

fn write_safety(dir: &Path, report: &SafetyReport<f64>) -> Result<(), Error> {
    write_text(&dir.join("safety.csv"), &safety_report_csv(report))?;
    let curves: Vec<_> = report.trials.iter().map(|t| (t.factor, &t.curve)).collect();
    write_text(&dir.join("curves.csv"), &curves_csv(&curves))
}

fn cmd_run(path: &Path, cli: &Cli) -> Result<(), Fault> {
    let loaded = load(path, cli)?;
    let cfg = &loaded.config;
    let dir = create_run_dir(&cfg.output.dir, &cfg.hash())?;
    info!("run directory {}", dir.display());
    match cfg.scenario {
        Scenario::Collapse(setup) => {
            let mut obs = writer(&dir, &loaded)?;
            let s = run_collapse(&setup, &cfg.material, &cfg.numerics, obs.as_mut())?;
            println!("{}", summary_line(&s));
            check_outcome(&s)
        }
        Scenario::Block { width, height } => {
            let mut obs = writer(&dir, &loaded)?;
            let mut sim = block_simulation(width, height, cfg.dp, &cfg.material, &cfg.numerics)?;
            let s = run_for(&mut sim, cfg.t_end, 0.05, obs.as_mut())?;
            println!("{}", summary_line(&s));
            check_outcome(&s)
        }
        Scenario::Slope(setup) => {
            write_text(&dir.join("config.toml"), &loaded.effective)?;
            let out = cfg.output.clone();
            let trial_dir = dir.clone();
            let report = strength_reduction_trials(&setup, &cfg.material, &cfg.numerics, &[setup.fs_start], false, |_| {
                Ok(Box::new(RunWriter::new(&trial_dir, out.progress_every, out.snapshot_interval)?) as Box<dyn Observer<f64>>)
            })?;
            write_safety(&dir, &report)?;
            for t in &report.trials {
                println!("f_s = {}: {} ({})", t.factor, t.class.name(), t.outcome.label());
            }
            Ok(())
        }
    }
}

fn cmd_sweep(path: &Path, param: &str, values: &[String], cli: &Cli) -> Result<(), Fault> {
    let loaded = load(path, cli)?;
    let cfg = &loaded.config;
    let param = SweepParam::parse(param)?;
    let values: Vec<SweepValue<f64>> = values.iter().map(|v| SweepValue::parse(v)).collect::<Result<_, _>>()?;
    let sweep_dir = create_run_dir(&cfg.output.dir, &format!("{}-sweep-{}", cfg.hash(), param.name()))?;
    info!("sweep directory {}", sweep_dir.display());
    match (param, cfg.scenario) {
        (SweepParam::Gamma | SweepParam::K, Scenario::Collapse(setup)) => {
            let report: SweepReport<f64> =
                collapse_sweep(&setup, &cfg.material, &cfg.numerics, param, &values, |value| {
                    let mut point = loaded.clone();
                    point.config.numerics = apply_sweep_value(&cfg.numerics, param, value)?;
                    point.effective = point.config.to_toml();
                    let dir = create_run_dir(&sweep_dir, &point.config.hash())?;
                    writer(&dir, &point)
                })?;
            write_text(&sweep_dir.join("sweep.csv"), &sweep_report_csv(&report))?;
            for p in &report.points {
                println!("{} = {}: {}", param.name(), p.value.label(), summary_line(&p.summary));
            }
            Ok(())
        }
        (SweepParam::SafetyFactor, Scenario::Slope(setup)) => {
            let factors: Vec<f64> = values
                .iter()
                .map(|v| {
                    v.0.ok_or_else(|| Error::Config {
                        key: "values".into(),
                        message: "fs values must be numbers".into(),
                    })
                })
                .collect::<Result<_, _>>()?;
            write_text(&sweep_dir.join("config.toml"), &loaded.effective)?;
            let out = cfg.output.clone();
            let report = strength_reduction_trials(&setup, &cfg.material, &cfg.numerics, &factors, false, |f| {
                let dir = create_run_dir(&sweep_dir, &format!("fs{f}"))?;
                Ok(Box::new(RunWriter::new(&dir, out.progress_every, out.snapshot_interval)?) as Box<dyn Observer<f64>>)
            })?;
            write_safety(&sweep_dir, &report)?;
            for t in &report.trials {
                println!("f_s = {}: {} ({})", t.factor, t.class.name(), t.outcome.label());
            }
            match report.factor {
                Some(f) => println!("safety factor {f} ({:?})", report.status),
                None => println!("no failure found"),
            }
            Ok(())
        }
        (p, s) => Err(Error::Config {
            key: "param".into(),
            message: format!("cannot sweep `{}` on a {} scenario", p.name(), s.name()),
        }
        .into()),
    }
}

fn cmd_verify(cli: &Cli) -> Result<(), Fault> {
    let checks = run_all(cli.seed.unwrap_or(0));
    let mut failed = 0;
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        if !c.passed {
            failed += 1;
        }
    }
    if failed > 0 {
        return Err(Fault::Failed(format!("{failed} of {} checks failed", checks.len())));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = configure_threads().map_err(Fault::from).and_then(|_| match &cli.command {
        Command::Run { config } => cmd_run(config, &cli),
        Command::Sweep { config, param, values } => cmd_sweep(config, param, values, &cli),
        Command::Verify => cmd_verify(&cli),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fault::Error(e)) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
        Err(Fault::Failed(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
