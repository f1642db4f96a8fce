use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use escort_hvac::artifacts::{self, Summary};
use escort_hvac::metrics::{self, RunReport, SETTLING_BAND};
use escort_hvac::scenario::{Overrides, ScenarioFile};
use escort_hvac::simulation::{run, SimError, Trace};
use escort_hvac::ControllerKind;

#[derive(Parser)]
#[command(
    name = "escort",
    version,
    about = "Distributed power allocation for building thermal control"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its trace, summary and plot data.
    Simulate {
        scenario: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
        /// Controller to run.
        #[arg(long)]
        controller: Option<ControllerKind>,
    },
    /// Run the scenario under two controllers and compare them.
    Compare {
        scenario: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
        /// First controller.
        #[arg(long, default_value = "ded")]
        controller: ControllerKind,
        /// Second controller.
        #[arg(long, default_value = "dip")]
        against: ControllerKind,
    },
    /// Check a scenario without running it.
    Validate { scenario: PathBuf },
}

#[derive(Args)]
struct RunFlags {
    /// Output directory.
    #[arg(long, short, default_value = "output")]
    output: PathBuf,
    /// Time step in hours.
    #[arg(long)]
    dt: Option<f64>,
    /// Horizon in hours.
    #[arg(long)]
    horizon: Option<f64>,
    /// Seed for a random initial allocation.
    #[arg(long)]
    seed: Option<u64>,
}

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate {
            scenario,
            flags,
            controller,
        } => simulate(&scenario, &flags, controller),
        Command::Compare {
            scenario,
            flags,
            controller,
            against,
        } => compare(&scenario, &flags, controller, against),
        Command::Validate { scenario } => validate(&scenario),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, message }) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

fn validation(message: impl ToString) -> Failure {
    Failure {
        code: EXIT_VALIDATION,
        message: message.to_string(),
    }
}

fn runtime(message: impl ToString) -> Failure {
    Failure {
        code: EXIT_RUNTIME,
        message: message.to_string(),
    }
}

fn load(
    path: &Path,
    flags: &RunFlags,
    controller: Option<ControllerKind>,
) -> Result<ScenarioFile, Failure> {
    let mut file = ScenarioFile::load(path).map_err(validation)?;
    file.apply(&Overrides {
        dt: flags.dt,
        horizon: flags.horizon,
        controller,
        seed: flags.seed,
    });
    Ok(file)
}

/// Runs one controller and writes its artifacts into `dir`.
fn execute(
    file: &ScenarioFile,
    kind: ControllerKind,
    dir: &Path,
) -> Result<(Trace, RunReport), Failure> {
    let scenario = file.scenario(kind).map_err(validation)?;
    let fingerprint = file.fingerprint();
    let name = if file.name.is_empty() {
        "unnamed"
    } else {
        file.name.as_str()
    };
    let steps = scenario.steps();
    match run(&scenario) {
        Ok(trace) => {
            let report = metrics::report(
                &trace,
                &scenario.geometry,
                &fingerprint,
                kind.name(),
                SETTLING_BAND,
            )
            .map_err(runtime)?;
            let summary = Summary {
                scenario_name: name,
                status: "ok",
                error: None,
                steps,
                dt: scenario.dt,
                report: Some(&report),
            };
            artifacts::write_run(dir, &trace, &summary).map_err(runtime)?;
            Ok((trace, report))
        }
        Err(err @ SimError::Aborted { .. }) => {
            let SimError::Aborted { ref partial, .. } = err else {
                unreachable!()
            };
            let summary = Summary {
                scenario_name: name,
                status: "aborted",
                error: Some(err.to_string()),
                steps,
                dt: scenario.dt,
                report: None,
            };
            artifacts::write_run(dir, partial, &summary).map_err(runtime)?;
            Err(runtime(format!("{kind}: {err}")))
        }
        Err(other) => Err(runtime(other)),
    }
}

fn simulate(
    path: &Path,
    flags: &RunFlags,
    controller: Option<ControllerKind>,
) -> Result<(), Failure> {
    let file = load(path, flags, controller)?;
    let kind = file.controller_kind();
    let (_, report) = execute(&file, kind, &flags.output)?;
    println!(
        "{kind}: rmse {:.4} C, peak overshoot {:.4} C, crossings {}, violations {}, final residual {:.3e}",
        report.rmse.aggregate, report.peak_overshoot, report.crossings, report.constraint_violations, report.final_residual
    );
    println!("artifacts written to {}", flags.output.display());
    Ok(())
}

fn compare(
    path: &Path,
    flags: &RunFlags,
    a: ControllerKind,
    b: ControllerKind,
) -> Result<(), Failure> {
    let file = load(path, flags, None)?;
    // Reject structural problems before starting either run.
    file.scenario(a).map_err(validation)?;
    file.scenario(b).map_err(validation)?;
    let (label_a, label_b) = if a == b {
        (format!("{a}_a"), format!("{b}_b"))
    } else {
        (a.name().to_owned(), b.name().to_owned())
    };
    let dir_a = flags.output.join(&label_a);
    let dir_b = flags.output.join(&label_b);
    let (ra, rb) = std::thread::scope(|s| {
        let ha = s.spawn(|| execute(&file, a, &dir_a));
        let hb = s.spawn(|| execute(&file, b, &dir_b));
        (
            ha.join().expect("run thread panicked"),
            hb.join().expect("run thread panicked"),
        )
    });
    let (trace_a, report_a) = ra?;
    let (trace_b, report_b) = rb?;
    let comparison = metrics::compare(&report_a, &report_b).map_err(validation)?;
    artifacts::write_comparison(
        &flags.output,
        &comparison,
        (&label_a, &trace_a),
        (&label_b, &trace_b),
    )
    .map_err(runtime)?;
    println!(
        "{:<30} {:>14} {:>14} {:>14}",
        "metric", label_a, label_b, "delta"
    );
    let show = |v: Option<f64>| v.map_or("-".to_owned(), |v| format!("{v:.6}"));
    for (name, m) in &comparison.metrics {
        println!(
            "{name:<30} {:>14} {:>14} {:>14}",
            show(m.a),
            show(m.b),
            show(m.delta)
        );
    }
    println!("artifacts written to {}", flags.output.display());
    Ok(())
}

fn validate(path: &Path) -> Result<(), Failure> {
    let file = ScenarioFile::load(path).map_err(validation)?;
    let checks = file.checks();
    let mut failed = 0;
    for c in &checks {
        println!(
            "[{}] {}: {}",
            if c.passed { "pass" } else { "FAIL" },
            c.name,
            c.detail
        );
        failed += usize::from(!c.passed);
    }
    if failed > 0 {
        Err(validation(format!("{failed} check(s) failed")))
    } else {
        println!("all {} checks passed", checks.len());
        Ok(())
    }
}
