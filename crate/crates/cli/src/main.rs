//! `crawler`: run simulated goal-seeking and characterization experiments.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use crawler_core::harness::{
    run_sweep, write_outputs, ExperimentConfig, ExperimentReport, Scenario,
};

#[derive(Debug, Parser)]
#[command(
    name = "crawler",
    version,
    about = "Closed-loop soft robot testbed simulation"
)]
struct Args {
    /// JSON experiment config. Missing fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// stationary, floating or characterize. Without --config this selects
    /// the bundled preset.
    #[arg(long)]
    scenario: Option<Scenario>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    max_steps: Option<usize>,
    /// Also write plot.svg.
    #[arg(long)]
    plot: bool,
    /// Record every serial frame to transcript.log.
    #[arg(long)]
    transcript: bool,
    /// Run N consecutive seeds in parallel, one subdirectory each.
    #[arg(long, value_name = "N")]
    sweep: Option<u64>,
    /// Print the effective config as JSON and exit.
    #[arg(long)]
    print_config: bool,
}

fn load_config(args: &Args) -> Result<ExperimentConfig> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let mut c = ExperimentConfig::from_json(&text)
                .with_context(|| format!("loading {}", path.display()))?;
            if let Some(s) = args.scenario {
                c.scenario = s;
            }
            c
        }
        None => ExperimentConfig::preset(args.scenario.unwrap_or(Scenario::Stationary)),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(dir) = &args.out_dir {
        config.out_dir = dir.to_string_lossy().into_owned();
    }
    if let Some(n) = args.max_steps {
        config.planner.max_steps = n;
    }
    config.plot |= args.plot;
    config.protocol.record_transcript |= args.transcript;
    config.validate()?;
    Ok(config)
}

fn describe(report: &ExperimentReport) -> String {
    let s = &report.summary;
    if report.characterization.is_some() {
        return format!(
            "seed {}: characterized {} steps over {:.2} s",
            s.seed, s.steps, s.sim_time_s
        );
    }
    let status = if s.converged {
        "converged"
    } else {
        "not converged"
    };
    format!(
        "seed {}: {status} after {} steps, {:.2} s, final cost {:.2} cm",
        s.seed, s.steps, s.sim_time_s, s.final_cost_cm
    )
}

fn run(args: &Args) -> Result<bool> {
    let config = load_config(args)?;
    let mut out = std::io::stdout().lock();
    if args.print_config {
        writeln!(out, "{}", config.to_json())?;
        return Ok(true);
    }
    let out_dir = PathBuf::from(&config.out_dir);
    let seeds: Vec<u64> = match args.sweep {
        Some(n) => (0..n).map(|k| config.seed.wrapping_add(k)).collect(),
        None => vec![config.seed],
    };
    let mut all_converged = true;
    for (seed, result) in seeds.iter().zip(run_sweep(&config, &seeds)) {
        let report = result.with_context(|| format!("experiment with seed {seed}"))?;
        let dir = if args.sweep.is_some() {
            out_dir.join(format!("seed-{seed}"))
        } else {
            out_dir.clone()
        };
        write_outputs(&report, &dir, config.plot)?;
        writeln!(out, "{}", describe(&report))?;
        if let Some(table) = &report.characterization {
            writeln!(out, "  id  offset_deg  configured_cm  mean_cm  stderr_cm")?;
            for p in table {
                writeln!(
                    out,
                    "  {:>2}  {:>10.1}  {:>13.3}  {:>7.3}  {:>9.4}",
                    p.id, p.heading_offset_deg, p.configured_mean_cm, p.mean_cm, p.stderr_cm
                )?;
            }
        }
        all_converged &= report.converged();
    }
    Ok(all_converged)
}

fn main() -> ExitCode {
    // clap's own usage-error status is 2, which here means non-convergence.
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
