//! `occsafe` command-line tool.
//!
//! Exit codes: 0 safe / no collision, 2 unsafe / collision, 1 error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};
use serde_json::json;

use occsafe::planner::{resample, verify, TrajectorySample};
use occsafe::render::emit_snapshots;
use occsafe::scenario::{load_scenario, Scenario};
use occsafe::sim::{perceive, run, RunFlags};

#[derive(Parser)]
#[command(
    name = "occsafe",
    version,
    about = "Occlusion-aware occupancy prediction and fail-safe planning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario in closed loop.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = true, action = ArgAction::Set)]
        occlusion_aware: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write per-step JSON/SVG snapshots and `simlog.json` here.
        #[arg(long)]
        emit: Option<PathBuf>,
        /// Write the SimLog JSON to this file.
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Check a trajectory file against the occupancies predicted at `--time`.
    Verify {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        time: f64,
        #[arg(long, default_value_t = true, action = ArgAction::Set)]
        occlusion_aware: bool,
    },
    /// Print the occupancy timeline seen from the ego's initial state at `--time`.
    Predict {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        time: f64,
        #[arg(long, default_value_t = true, action = ArgAction::Set)]
        occlusion_aware: bool,
    },
}

fn verbose() -> bool {
    std::env::var("OCCSAFE_LOG").is_ok_and(|v| v.eq_ignore_ascii_case("debug"))
}

fn load(path: &Path) -> Result<Scenario, String> {
    load_scenario(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn simulate(
    scenario: PathBuf,
    occlusion_aware: bool,
    seed: u64,
    emit: Option<PathBuf>,
    log: Option<PathBuf>,
    duration: Option<f64>,
) -> Result<ExitCode, String> {
    let scn = load(&scenario)?;
    let flags = RunFlags {
        occlusion_aware,
        seed,
        record_snapshots: emit.is_some(),
        duration,
    };
    let out = run(&scn, &flags).map_err(|e| e.to_string())?;
    if verbose() {
        for r in &out.log.records {
            eprintln!(
                "t={:.1} s={:.2} v={:.2} kind={:?} collision={}",
                r.t_s,
                r.ego.s_m,
                r.ego.v_mps,
                r.plan.as_ref().map(|p| &p.kind),
                r.collision
            );
        }
    }
    let text = out.log.to_json();
    if let Some(dir) = &emit {
        emit_snapshots(&out.snapshots, dir).map_err(|e| format!("{}: {e}", dir.display()))?;
        let p = dir.join("simlog.json");
        std::fs::write(&p, &text).map_err(|e| format!("{}: {e}", p.display()))?;
    }
    if let Some(p) = &log {
        std::fs::write(p, &text).map_err(|e| format!("{}: {e}", p.display()))?;
    }
    let m = &out.log.metrics;
    let summary = json!({
        "schema_version": 1,
        "scenario": out.log.scenario,
        "occlusion_aware": occlusion_aware,
        "collision": m.collision,
        "first_collision_s": m.first_collision_s,
        "min_distance_m": m.min_distance_m,
        "time_to_stop_s": m.time_to_stop_s,
        "min_speed_mps": m.min_speed_mps,
        "distance_travelled_m": m.distance_travelled_m,
        "emergency_steps": m.emergency_steps,
        "fallback_steps": m.fallback_steps,
    });
    println!(
        "{}",
        serde_json::to_string_pretty(&summary).expect("summary serializes")
    );
    Ok(if m.collision {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

fn verify_cmd(
    scenario: PathBuf,
    trajectory: PathBuf,
    time: f64,
    occlusion_aware: bool,
) -> Result<ExitCode, String> {
    let scn = load(&scenario)?;
    let text = std::fs::read_to_string(&trajectory)
        .map_err(|e| format!("{}: {e}", trajectory.display()))?;
    let samples: Vec<TrajectorySample> =
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", trajectory.display()))?;
    let steps = scn.prediction.steps();
    let traj = resample(&samples, time, scn.dt, steps).map_err(|e| e.to_string())?;
    let start = traj.states[0].ego.pose;
    let (s, _, _) = scn.ego.path.project(start.position);
    let p = perceive(&scn, start, s, time, occlusion_aware).map_err(|e| e.to_string())?;
    let verdict = verify(&traj, &p.timeline, &scn.ego.shape).map_err(|e| e.to_string())?;
    let out = json!({ "schema_version": 1, "time_s": time, "result": verdict });
    println!(
        "{}",
        serde_json::to_string_pretty(&out).expect("verdict serializes")
    );
    Ok(if verdict.is_safe() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn predict_cmd(scenario: PathBuf, time: f64, occlusion_aware: bool) -> Result<ExitCode, String> {
    let scn = load(&scenario)?;
    let s = scn.ego.s0;
    let pose = occsafe::geom::Pose2::new(scn.ego.path.point_at(s), scn.ego.path.heading_at(s));
    let p = perceive(&scn, pose, s, time, occlusion_aware).map_err(|e| e.to_string())?;
    let out = json!({
        "schema_version": 1,
        "time_s": time,
        "edges": p.edges,
        "visible": p.visible,
        "timeline": p.timeline,
    });
    println!(
        "{}",
        serde_json::to_string(&out).expect("timeline serializes")
    );
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate {
            scenario,
            occlusion_aware,
            seed,
            emit,
            log,
            duration,
        } => simulate(scenario, occlusion_aware, seed, emit, log, duration),
        Command::Verify {
            scenario,
            trajectory,
            time,
            occlusion_aware,
        } => verify_cmd(scenario, trajectory, time, occlusion_aware),
        Command::Predict {
            scenario,
            time,
            occlusion_aware,
        } => predict_cmd(scenario, time, occlusion_aware),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
