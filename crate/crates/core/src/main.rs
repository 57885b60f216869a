use std::path::{Path, PathBuf};
use std::process::ExitCode;

use armctl::harness::{run, summary, HarnessError, RunOutput};
use armctl::log::TrajectoryLog;
use armctl::metrics::{comparison_table, RunMetrics};
use armctl::passivity::{audit, AuditConfig};
use armctl::scenario::Scenario;
use armctl_control::Variant;
use armctl_kinematics::RobotModel;
use clap::{Parser, Subcommand};
use log::info;

#[derive(Parser)]
#[command(name = "armctl", version, about = "Simulate and compare interactive arm controllers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario; writes <name>.csv and <name>.summary.txt
    Run {
        scenario: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Override the scenario's controller variant
        #[arg(long)]
        variant: Option<Variant>,
    },
    /// Run a scenario under several controller variants and tabulate metrics
    Compare {
        scenario: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "proposed,baseline,classical")]
        variants: Vec<Variant>,
        /// Average over k runs with seeds seed, seed+1, ...
        #[arg(long, default_value_t = 1)]
        repeat: u64,
        /// Also write per-variant logs and <name>_compare.csv here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Passivity report for a trajectory log
    Audit {
        log: PathBuf,
        /// Absolute tolerance floor, W
        #[arg(long)]
        floor: Option<f64>,
        /// Tolerance as a fraction of the peak supply
        #[arg(long)]
        relative: Option<f64>,
        /// Low-pass cut-off, Hz
        #[arg(long)]
        cutoff: Option<f64>,
    },
    /// Check a robot model file
    Validate { model: PathBuf },
}

enum Failure {
    Config(String),
    Divergence(String),
    Audit(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Config(_) => 2,
            Failure::Divergence(_) => 3,
            Failure::Audit(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Divergence(m) | Failure::Audit(m) | Failure::Io(m) => m,
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Divergence { .. } => Failure::Divergence(e.to_string()),
            other => Failure::Config(other.to_string()),
        }
    }
}

fn io(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn load(path: &Path) -> Result<Scenario, Failure> {
    Scenario::from_file(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn write_log(dir: &Path, file: &str, log: &TrajectoryLog) -> Result<PathBuf, Failure> {
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let path = dir.join(file);
    let f = std::fs::File::create(&path).map_err(|e| io(&path, e))?;
    log.write_csv(std::io::BufWriter::new(f)).map_err(|e| io(&path, e))?;
    Ok(path)
}

fn cmd_run(path: &Path, out: &Path, variant: Option<Variant>) -> Result<(), Failure> {
    let mut scenario = load(path)?;
    if let Some(v) = variant {
        scenario = scenario.with_variant(v);
    }
    info!("running {} ({})", scenario.name, scenario.controller.variant);
    let result = run(&scenario)?;
    let csv = write_log(out, &format!("{}.csv", scenario.name), &result.log)?;
    let text = summary(&scenario, &result);
    let summary_path = out.join(format!("{}.summary.txt", scenario.name));
    std::fs::write(&summary_path, &text).map_err(|e| io(&summary_path, e))?;
    print!("{text}");
    info!("wrote {} and {}", csv.display(), summary_path.display());
    match &result.audit {
        Some(a) if !a.passed => Err(Failure::Audit(format!(
            "passivity margin below tolerance on {:.2} % of samples",
            100.0 * a.violation_fraction
        ))),
        _ => Ok(()),
    }
}

fn cmd_compare(path: &Path, variants: &[Variant], repeat: u64, out: Option<&Path>) -> Result<(), Failure> {
    let scenario = load(path)?;
    if variants.is_empty() {
        return Err(Failure::Config("--variants is empty".into()));
    }
    let repeat = repeat.max(1);
    // one thread per variant
    let results: Vec<Result<Vec<RunOutput>, HarnessError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = variants
            .iter()
            .map(|&v| {
                let base = scenario.with_variant(v);
                scope.spawn(move || {
                    (0..repeat)
                        .map(|k| {
                            let mut s = base.clone();
                            s.seed = base.seed.wrapping_add(k);
                            run(&s)
                        })
                        .collect::<Result<Vec<_>, _>>()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("simulation thread panicked")).collect()
    });

    let mut rows = Vec::with_capacity(variants.len());
    for (v, result) in variants.iter().zip(results) {
        let runs = result?;
        if let Some(dir) = out {
            write_log(dir, &format!("{}_{}.csv", scenario.name, v), &runs[0].log)?;
        }
        let metrics: Vec<RunMetrics> = runs
            .iter()
            .map(|r| r.metrics.clone())
            .collect::<Result<_, _>>()
            .map_err(|e| Failure::Config(format!("{v}: {e}")))?;
        rows.push(RunMetrics::mean(&metrics).expect("at least one run"));
    }
    let table = comparison_table(&rows);
    println!("{} ({} run{} per variant)", scenario.name, repeat, if repeat == 1 { "" } else { "s" });
    println!("z NMAE normalised by the circle diameter");
    print!("{}", table.text);
    if let Some(dir) = out {
        let p = dir.join(format!("{}_compare.csv", scenario.name));
        std::fs::write(&p, &table.csv).map_err(|e| io(&p, e))?;
        info!("wrote {}", p.display());
    }
    Ok(())
}

fn cmd_audit(path: &Path, floor: Option<f64>, relative: Option<f64>, cutoff: Option<f64>) -> Result<(), Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| io(path, e))?;
    let log = TrajectoryLog::from_csv_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let d = AuditConfig::default();
    let cfg = AuditConfig {
        floor: floor.unwrap_or(d.floor),
        relative_tolerance: relative.unwrap_or(d.relative_tolerance),
        cutoff_hz: cutoff.unwrap_or(d.cutoff_hz),
        ..d
    };
    let report = audit(
        &log.column(|r| r.t),
        &log.column(|r| r.storage.s),
        &log.column(|r| r.storage.supply),
        &cfg,
    )
    .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let negative_dissipation = log.rows.iter().filter(|r| r.storage.dissipation < 0.0).count();
    println!("log                 {}", path.display());
    println!("samples             {}", log.rows.len());
    println!("tolerance           {:.6} W", report.tolerance);
    println!("min margin          {:.6} W", report.min_margin);
    println!("violations          {} ({:.3} %)", report.violations, 100.0 * report.violation_fraction);
    println!("supplied energy     {:.6} J", report.supplied_energy);
    println!("dissipated energy   {:.6} J", report.dissipated_energy);
    println!("negative dissipation samples {negative_dissipation}");
    println!("result              {}", if report.passed { "pass" } else { "VIOLATION" });
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Audit("passivity margin below tolerance".into()))
    }
}

fn cmd_validate(path: &Path) -> Result<(), Failure> {
    let model = RobotModel::from_file(path).map_err(|e| Failure::Config(e.to_string()))?;
    println!(
        "{}: {} joints, {:.2} kg, tool offset {:?}",
        model.name,
        model.dof(),
        model.total_mass(),
        model.tool_offset.as_slice()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { scenario, out, variant } => cmd_run(scenario, out, *variant),
        Command::Compare {
            scenario,
            variants,
            repeat,
            out,
        } => cmd_compare(scenario, variants, *repeat, out.as_deref()),
        Command::Audit {
            log,
            floor,
            relative,
            cutoff,
        } => cmd_audit(log, *floor, *relative, *cutoff),
        Command::Validate { model } => cmd_validate(model),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("armctl: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
