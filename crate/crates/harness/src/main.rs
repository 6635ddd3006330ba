use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use handoff_core::budget::ClockKind;
use handoff_core::geometry::Scene;
use handoff_core::plan::Plan;
use handoff_core::validate::validate_plan;
use handoff_harness::bench::{aggregate, run_benchmark, write_results, BenchmarkSpec};
use handoff_harness::planners::{run_trial, PlannerId, TrialSettings};
use handoff_harness::render::{render_plan, DEFAULT_FRAMES};
use handoff_harness::scene_io::load_scene;

#[derive(Parser)]
#[command(name = "handoff", about = "Multi-arm handoff planning", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::ValueEnum, Clone, Copy)]
enum Clock {
    Work,
    Wall,
}

#[derive(Subcommand)]
enum Command {
    /// Plans one trial and writes record.json, plus plan.json on success.
    Plan {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, value_enum, default_value = "mmdrrt")]
        planner: PlannerId,
        /// Transition samples per category.
        #[arg(long, default_value_t = 10)]
        s: usize,
        /// Time limit (s).
        #[arg(long, default_value_t = 30.0)]
        time: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "work")]
        clock: Clock,
        #[arg(long)]
        out: PathBuf,
    },
    /// Runs a benchmark spec and writes NDJSON records and CSV tables.
    Bench {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Writes SVG frames of a plan.
    Render {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_FRAMES)]
        frames: usize,
    },
    /// Checks a plan against a scene.
    Validate {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        plan: PathBuf,
    },
}

/// Outcome classes mapped to exit codes 1 and 2.
enum Failure {
    Infeasible(anyhow::Error),
    BadInput(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::BadInput(e.into())
    }
}

fn scene(path: &Path) -> Result<Scene, Failure> {
    load_scene(path).map_err(|e| {
        if e.is_infeasible() {
            Failure::Infeasible(e.into())
        } else {
            Failure::BadInput(e.into())
        }
    })
}

fn read_plan(path: &Path) -> Result<Plan, Failure> {
    let text = fs::read_to_string(path).with_context(|| path.display().to_string())?;
    Ok(serde_json::from_str(&text).with_context(|| format!("{}: not a plan", path.display()))?)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> anyhow::Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s).with_context(|| path.display().to_string())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Plan {
            scene: path,
            planner,
            s,
            time,
            seed,
            clock,
            out,
        } => {
            let scene = scene(&path)?;
            if time.is_nan() || time <= 0.0 || s == 0 {
                return Err(Failure::BadInput(anyhow::anyhow!(
                    "--time and --s must be positive"
                )));
            }
            let mut settings = TrialSettings::new(planner, s, seed, time);
            settings.clock = match clock {
                Clock::Work => ClockKind::Work,
                Clock::Wall => ClockKind::Wall,
            };
            let record = run_trial(&scene, &settings, None);
            fs::create_dir_all(&out).with_context(|| out.display().to_string())?;
            write_json(&out.join("record.json"), &record)?;
            match &record.plan {
                Some(plan) => {
                    write_json(&out.join("plan.json"), plan)?;
                    println!(
                        "{planner}: cost {:.4} s, first solution at {:.3} s",
                        plan.cost,
                        record.initial_solution_time_s.unwrap_or(0.0)
                    );
                    Ok(())
                }
                None => Err(Failure::Infeasible(anyhow::anyhow!(
                    "{planner}: no plan within {time} s{}",
                    record.error.map(|e| format!(" ({e})")).unwrap_or_default()
                ))),
            }
        }
        Command::Bench { spec, out } => {
            let base = spec.parent().unwrap_or(Path::new(".")).to_path_buf();
            let spec = BenchmarkSpec::load(&spec)?;
            let records = run_benchmark(&spec, &base)?;
            write_results(&out, &records)?;
            for row in aggregate(&records).success {
                println!(
                    "{} s={} n={}: {}/{} solved",
                    row.planner, row.s, row.n, row.successes, row.trials
                );
            }
            Ok(())
        }
        Command::Render {
            scene: path,
            plan,
            out,
            frames,
        } => {
            let scene = scene(&path)?;
            let plan = read_plan(&plan)?;
            validate_plan(&scene, &plan).context("plan is not valid for the scene")?;
            let files = render_plan(&scene, &plan, frames, &out)
                .with_context(|| out.display().to_string())?;
            println!("wrote {} frames to {}", files.len(), out.display());
            Ok(())
        }
        Command::Validate { scene: path, plan } => {
            let scene = scene(&path)?;
            let plan = read_plan(&plan)?;
            match validate_plan(&scene, &plan) {
                Ok(()) => {
                    println!("valid, cost {:.4} s", plan.cost);
                    Ok(())
                }
                Err(e) => Err(Failure::Infeasible(anyhow::anyhow!("invalid plan: {e}"))),
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Infeasible(e)) => {
            eprintln!("{e:#}");
            ExitCode::from(1)
        }
        Err(Failure::BadInput(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
