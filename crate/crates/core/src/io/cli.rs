//! Command-line front end. Every subcommand writes one run directory with a manifest.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use super::artifacts::{sha256_hex, RunWriter};
use super::scenario::{parse_scenario, ConfigSource, ScenarioFile};
use super::schema::{
    cost_breakdown, envelope_csv, history_csv, loads_csv, opt_summary, parse_schedule_csv, schedule_csv, sweep_csv,
    trajectory_csv, ARTIFACT_SCHEMA_VERSION,
};
use crate::actuation::{control_work, power_study, StudySettings};
use crate::error::{Error, Result};
use crate::flightdyn::{SimOptions, Simulator, TrimPoint};
use crate::ocp::{
    control_point_sweep, make_scenario, reachability_bisection, solve, solve_pair, sweep_change, ControlSchedule,
    OptResult, ScenarioKind,
};
use crate::trim::{classify, dynamic_trim, static_trim, trim_envelope};
use crate::vehicle::config::{load_config, refine_lattice, AircraftConfig};

/// Environment variable read when `--workers` is absent.
pub const WORKERS_ENV: &str = "MORPHWING_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "morphwing", version, about = "Morphing-winglet aircraft simulation and trajectory optimization")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CommonArgs {
    /// Aircraft config: `hale`, `hale_elastic` or a TOML file
    #[arg(long, global = true)]
    pub config: Option<String>,
    /// Worker threads for gradient and envelope sweeps
    #[arg(long, global = true, env = WORKERS_ENV)]
    #[serde(skip)]
    pub workers: Option<usize>,
    /// Run directory; defaults to runs/<command>-<run id>
    #[arg(long, global = true)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// Multiplier on the wake-convection time step
    #[arg(long, global = true, default_value_t = 1.0)]
    pub dt_scale: f64,
    /// Multiplier on every panel count
    #[arg(long, global = true, default_value_t = 1.0)]
    pub lattice_scale: f64,
    #[arg(long, global = true, value_enum, default_value_t = Switch::On)]
    pub morphing: Switch,
    /// Reserved; no stochastic components
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Write per-panel loads at every step
    #[arg(long, global = true)]
    pub dump_loads: bool,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Static then dynamic trim at one speed
    Trim {
        #[arg(long)]
        speed: Option<f64>,
    },
    /// Trim classification over a speed grid, with and without morphing
    Envelope {
        #[arg(long, value_delimiter = ',', default_values_t = [25.0, 27.5, 30.0, 32.5, 35.0, 37.5])]
        speeds: Vec<f64>,
    },
    /// Open-loop run from trim, holding trim or following a schedule file
    Simulate {
        #[arg(long)]
        speed: Option<f64>,
        #[arg(long, default_value_t = 2.0)]
        horizon: f64,
        /// Schedule CSV with absolute controls on a uniform grid
        #[arg(long)]
        schedule: Option<PathBuf>,
    },
    /// Frozen and morphing optimum of one scenario
    Optimize {
        #[arg(long)]
        scenario: PathBuf,
        /// Reachability only: bisect the climb target with at most this many probes
        #[arg(long)]
        bisect: Option<usize>,
    },
    /// Same scenario at several control-point counts
    #[command(name = "sweep-N")]
    #[serde(rename = "sweep-N")]
    SweepN {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [25, 30])]
        points: Vec<usize>,
    },
    /// Aileron and winglet strokes, alone and coupled
    PowerStudy {
        #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
        aileron_deg: f64,
        #[arg(long, default_value_t = -10.0, allow_hyphen_values = true)]
        winglet_deg: f64,
        #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
        coupled_winglet_deg: f64,
        #[arg(long, default_value_t = 1.0)]
        stroke_time: f64,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Trim { .. } => "trim",
            Command::Envelope { .. } => "envelope",
            Command::Simulate { .. } => "simulate",
            Command::Optimize { .. } => "optimize",
            Command::SweepN { .. } => "sweep-N",
            Command::PowerStudy { .. } => "power-study",
        }
    }

    fn scenario_path(&self) -> Option<&Path> {
        match self {
            Command::Optimize { scenario, .. } | Command::SweepN { scenario, .. } => Some(scenario),
            _ => None,
        }
    }
}

#[derive(Debug, Serialize)]
struct Invocation<'a> {
    schema_version: u32,
    command: &'a Command,
    options: &'a CommonArgs,
    config_source: &'a str,
}

/// Inputs shared by every subcommand after resolution.
struct Context {
    config: AircraftConfig,
    sim: Simulator,
    morphing: bool,
    dump_loads: bool,
}

impl Context {
    fn nominal_trim(&self) -> Result<TrimPoint> {
        Ok(static_trim(&self.sim, self.config.trim.nominal_speed, 0.0)?.point())
    }
}

fn usage_check(cli: &Cli) -> std::result::Result<(), String> {
    let c = &cli.common;
    if !(c.dt_scale > 0.0 && c.dt_scale.is_finite()) {
        return Err(format!("--dt-scale must be positive, got {}", c.dt_scale));
    }
    if !(c.lattice_scale > 0.0 && c.lattice_scale.is_finite()) {
        return Err(format!("--lattice-scale must be positive, got {}", c.lattice_scale));
    }
    if c.workers == Some(0) {
        return Err("--workers must be at least 1".into());
    }
    match &cli.command {
        Command::Envelope { speeds } if speeds.is_empty() || speeds.iter().any(|v| !(*v > 0.0)) => {
            Err("--speeds must be positive".into())
        }
        Command::SweepN { points, .. } if points.is_empty() || points.iter().any(|&n| n < 2) => {
            Err("--points must all be at least 2".into())
        }
        Command::Simulate { horizon, .. } if !(*horizon > 0.0) => Err("--horizon must be positive".into()),
        _ => Ok(()),
    }
}

/// Parse `argv` (program name first) and run. Returns the process exit code.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
        }
    };
    if let Err(msg) = usage_check(&cli) {
        eprintln!("error: {msg}\n\nFor more information, try '--help'.");
        return 2;
    }
    match execute(&cli) {
        Ok(dir) => {
            println!("{}", dir.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Run a parsed command and return its run directory.
pub fn execute(cli: &Cli) -> Result<PathBuf> {
    let started = Instant::now();
    let workers = cli.common.workers.unwrap_or_else(default_workers);
    let scenario = match cli.command.scenario_path() {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            Some((parse_scenario(&text)?, text, p.parent().map(Path::to_path_buf)))
        }
        None => None,
    };
    let source = match (&cli.common.config, &scenario) {
        (Some(name), _) => ConfigSource::resolve(name, None)?,
        (None, Some((ScenarioFile { config: Some(name), .. }, _, base))) => ConfigSource::resolve(name, base.as_deref())?,
        _ => ConfigSource::shipped(),
    };
    let invocation = Invocation {
        schema_version: ARTIFACT_SCHEMA_VERSION,
        command: &cli.command,
        options: &cli.common,
        config_source: &source.label,
    };
    let invocation_json = super::schema::json(&invocation)?;
    let mut id_input = invocation_json.clone();
    id_input.extend_from_slice(source.text.as_bytes());
    if let Some((_, text, _)) = &scenario {
        id_input.extend_from_slice(text.as_bytes());
    }
    let run_id = sha256_hex(&id_input)[..12].to_string();
    let dir = cli.common.out.clone().unwrap_or_else(|| PathBuf::from("runs").join(format!("{}-{run_id}", cli.command.name())));

    let mut config = load_config(&source.text)?;
    if cli.common.lattice_scale != 1.0 {
        config = refine_lattice(&config, cli.common.lattice_scale)?;
    }
    let mut w = RunWriter::create(&dir)?;
    w.write("invocation.json", &invocation_json)?;
    w.write("config.toml", source.text.as_bytes())?;
    if let Some((_, text, _)) = &scenario {
        w.write("scenario.toml", text.as_bytes())?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
    pool.install(|| -> Result<()> {
        let sim = Simulator::new(&config, cli.common.dt_scale)?;
        let ctx = Context { config, sim, morphing: cli.common.morphing == Switch::On, dump_loads: cli.common.dump_loads };
        match &cli.command {
            Command::Trim { speed } => run_trim(&ctx, *speed, &mut w),
            Command::Envelope { speeds } => run_envelope(&ctx, speeds, &mut w),
            Command::Simulate { speed, horizon, schedule } => run_simulate(&ctx, *speed, *horizon, schedule.as_deref(), &mut w),
            Command::Optimize { bisect, .. } => {
                let (file, _, _) = scenario.as_ref().expect("optimize reads a scenario");
                run_optimize(&ctx, file, *bisect, &mut w)
            }
            Command::SweepN { points, .. } => {
                let (file, _, _) = scenario.as_ref().expect("sweep reads a scenario");
                run_sweep(&ctx, file, points, &mut w)
            }
            Command::PowerStudy { aileron_deg, winglet_deg, coupled_winglet_deg, stroke_time } => {
                let settings = StudySettings {
                    aileron_deg: *aileron_deg,
                    winglet_deg: *winglet_deg,
                    coupled_winglet_deg: *coupled_winglet_deg,
                    stroke_time: *stroke_time,
                };
                run_power_study(&ctx, &settings, &mut w)
            }
        }
    })?;
    w.finish(&run_id, cli.command.name(), workers, started.elapsed().as_secs_f64())?;
    Ok(dir)
}

fn write_trajectory(w: &mut RunWriter, prefix: &str, ctx: &Context, traj: &crate::flightdyn::Trajectory) -> Result<crate::actuation::PowerTrace> {
    let power = control_work(traj, ctx.config.aero.power_model)?;
    w.write(&format!("{prefix}trajectory.csv"), &trajectory_csv(traj, &power)?)?;
    if !traj.load_dump.is_empty() {
        w.write(&format!("{prefix}loads.csv"), &loads_csv(traj)?)?;
    }
    Ok(power)
}

fn run_trim(ctx: &Context, speed: Option<f64>, w: &mut RunWriter) -> Result<()> {
    let speed = speed.unwrap_or(ctx.config.trim.nominal_speed);
    let s = static_trim(&ctx.sim, speed, 0.0)?;
    let d = dynamic_trim(&ctx.sim, &s, ctx.morphing)?;
    let sim = ctx.sim.at_speed(speed);
    let opts = SimOptions { dump_loads: ctx.dump_loads, ..SimOptions::default() };
    let p = d.point();
    let traj = sim.simulate_with(&p, &crate::flightdyn::HoldControls(p.controls), ctx.config.trim.horizon, &opts)?;
    write_trajectory(w, "", ctx, &traj)?;
    #[derive(Serialize)]
    struct TrimSummary {
        schema_version: u32,
        speed: f64,
        morphing: bool,
        static_trim: crate::trim::TrimSolution,
        dynamic_trim: crate::trim::TrimSolution,
        classification: crate::trim::Classification,
    }
    w.write_json(
        "summary.json",
        &TrimSummary {
            schema_version: ARTIFACT_SCHEMA_VERSION,
            speed,
            morphing: ctx.morphing,
            static_trim: s,
            dynamic_trim: d,
            classification: classify(d.residual_w, d.residual_q_deg, &ctx.config),
        },
    )
}

fn run_envelope(ctx: &Context, speeds: &[f64], w: &mut RunWriter) -> Result<()> {
    let fixed = trim_envelope(&ctx.sim, speeds, false);
    let morph = ctx.morphing.then(|| trim_envelope(&ctx.sim, speeds, true));
    let mut tables = vec![&fixed];
    let mut text = fixed.to_text();
    if let Some(m) = &morph {
        tables.push(m);
        text.push('\n');
        text.push_str(&m.to_text());
    }
    w.write("envelope.csv", &envelope_csv(&tables)?)?;
    w.write("envelope.txt", text.as_bytes())?;
    #[derive(Serialize)]
    struct EnvelopeSummary {
        schema_version: u32,
        speeds: Vec<f64>,
        fixed_trimmed: Vec<f64>,
        morphing_trimmed: Option<Vec<f64>>,
        morphing_contains_fixed: Option<bool>,
    }
    let ft = fixed.trimmed_speeds();
    let mt = morph.as_ref().map(|m| m.trimmed_speeds());
    let contains = mt.as_ref().map(|m| ft.iter().all(|v| m.contains(v)));
    w.write_json(
        "summary.json",
        &EnvelopeSummary {
            schema_version: ARTIFACT_SCHEMA_VERSION,
            speeds: speeds.to_vec(),
            fixed_trimmed: ft,
            morphing_trimmed: mt,
            morphing_contains_fixed: contains,
        },
    )
}

fn run_simulate(ctx: &Context, speed: Option<f64>, horizon: f64, schedule: Option<&Path>, w: &mut RunWriter) -> Result<()> {
    let speed = speed.unwrap_or(ctx.config.trim.nominal_speed);
    let trim = static_trim(&ctx.sim, speed, 0.0)?.point();
    let sched = match schedule {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            w.write("input_schedule.csv", text.as_bytes())?;
            parse_schedule_csv(&text, trim.controls)?
        }
        None => ControlSchedule::hold(trim.controls, horizon, 2)?,
    };
    let sim = ctx.sim.at_speed(speed);
    let opts = SimOptions { dump_loads: ctx.dump_loads, ..SimOptions::default() };
    let traj = sim.simulate_with(&trim, &sched, sched.horizon, &opts)?;
    let power = write_trajectory(w, "", ctx, &traj)?;
    w.write("schedule.csv", &schedule_csv(&sched)?)?;
    w.write_json("cost_breakdown.json", &cost_breakdown(&power, Some(&sched))?)?;
    #[derive(Serialize)]
    struct SimSummary {
        schema_version: u32,
        trim: TrimPoint,
        horizon: f64,
        steps: usize,
        climb: f64,
        final_position: [f64; 3],
        final_euler: [f64; 3],
        total_work: f64,
    }
    let first = traj.samples[0].rigid;
    let last = traj.last().rigid;
    w.write_json(
        "summary.json",
        &SimSummary {
            schema_version: ARTIFACT_SCHEMA_VERSION,
            trim,
            horizon: sched.horizon,
            steps: traj.samples.len() - 1,
            climb: last.altitude() - first.altitude(),
            final_position: last.position.into(),
            final_euler: last.euler.into(),
            total_work: power.total,
        },
    )
}

fn write_result(w: &mut RunWriter, prefix: &str, ctx: &Context, r: &OptResult) -> Result<()> {
    let traj = if ctx.dump_loads {
        let opts = SimOptions { dump_loads: true, ..SimOptions::default() };
        let trim = ctx.nominal_trim()?;
        ctx.sim.at_speed(trim.speed).simulate_with(&trim, &r.schedule, r.schedule.horizon, &opts)?
    } else {
        r.trajectory.clone()
    };
    write_trajectory(w, prefix, ctx, &traj)?;
    w.write(&format!("{prefix}schedule.csv"), &schedule_csv(&r.schedule)?)?;
    w.write(&format!("{prefix}history.csv"), &history_csv(&r.history)?)?;
    w.write_json(&format!("{prefix}summary.json"), &opt_summary(r))?;
    w.write_json(&format!("{prefix}cost_breakdown.json"), &cost_breakdown(&r.work, Some(&r.schedule))?)
}

fn run_optimize(ctx: &Context, file: &ScenarioFile, bisect: Option<usize>, w: &mut RunWriter) -> Result<()> {
    let trim = ctx.nominal_trim()?;
    let mut params = file.params.clone();
    params.morphing &= ctx.morphing;
    if let Some(probes) = bisect {
        if file.kind != ScenarioKind::Reachability {
            return Err(Error::InvalidArgument("--bisect applies to reachability scenarios".into()));
        }
        let study = reachability_bisection(&ctx.sim, &trim, &params, &file.solver, probes)?;
        w.write_json("reachability.json", &study)?;
        if params.z_goal.is_none() {
            return w.write_json("summary.json", &BisectSummary::from(&study));
        }
    }
    let problem = make_scenario(file.kind, &params, &ctx.sim, &trim, &file.solver)?;
    #[derive(Serialize)]
    struct Summary<'a> {
        schema_version: u32,
        scenario: &'a str,
        frozen: super::schema::OptSummary<'a>,
        morphing: Option<super::schema::OptSummary<'a>>,
        morphing_dominates: Option<bool>,
        relative_improvement: Option<f64>,
    }
    if problem.morphing() {
        let c = solve_pair(&problem)?;
        write_result(w, "frozen/", ctx, &c.frozen)?;
        write_result(w, "morphing/", ctx, &c.morphing)?;
        w.write_json(
            "summary.json",
            &Summary {
                schema_version: ARTIFACT_SCHEMA_VERSION,
                scenario: file.kind.name(),
                frozen: opt_summary(&c.frozen),
                morphing: Some(opt_summary(&c.morphing)),
                morphing_dominates: Some(c.dominates(1e-3)),
                relative_improvement: Some(c.improvement()),
            },
        )
    } else {
        let r = solve(&problem, &problem.hold())?;
        write_result(w, "frozen/", ctx, &r)?;
        w.write_json(
            "summary.json",
            &Summary {
                schema_version: ARTIFACT_SCHEMA_VERSION,
                scenario: file.kind.name(),
                frozen: opt_summary(&r),
                morphing: None,
                morphing_dominates: None,
                relative_improvement: None,
            },
        )
    }
}

#[derive(Serialize)]
struct BisectSummary {
    schema_version: u32,
    frozen_ceiling: f64,
    morphing_ceiling: f64,
    separating_goal: Option<f64>,
    probes: usize,
}

impl From<&crate::ocp::ReachabilityStudy> for BisectSummary {
    fn from(s: &crate::ocp::ReachabilityStudy) -> Self {
        BisectSummary {
            schema_version: ARTIFACT_SCHEMA_VERSION,
            frozen_ceiling: s.frozen_ceiling,
            morphing_ceiling: s.morphing_ceiling,
            separating_goal: s.separating_goal,
            probes: s.probes.len(),
        }
    }
}

fn run_sweep(ctx: &Context, file: &ScenarioFile, points: &[usize], w: &mut RunWriter) -> Result<()> {
    let trim = ctx.nominal_trim()?;
    let mut params = file.params.clone();
    params.morphing &= ctx.morphing;
    let entries = control_point_sweep(&ctx.sim, &trim, file.kind, &params, &file.solver, points)?;
    w.write("sweep.csv", &sweep_csv(&entries)?)?;
    #[derive(Serialize)]
    struct SweepSummary<'a> {
        schema_version: u32,
        scenario: &'a str,
        morphing: bool,
        entries: &'a [crate::ocp::SweepEntry],
        relative_change: Option<f64>,
    }
    w.write_json(
        "summary.json",
        &SweepSummary {
            schema_version: ARTIFACT_SCHEMA_VERSION,
            scenario: file.kind.name(),
            morphing: params.morphing,
            entries: &entries,
            relative_change: sweep_change(&entries),
        },
    )
}

fn run_power_study(ctx: &Context, settings: &StudySettings, w: &mut RunWriter) -> Result<()> {
    let trim = ctx.nominal_trim()?;
    let study = power_study(&ctx.sim, &trim, settings)?;
    for case in &study.cases {
        w.write(&format!("{}/trajectory.csv", case.name), &trajectory_csv(&case.trajectory, &case.trace)?)?;
        w.write(&format!("{}/schedule.csv", case.name), &schedule_csv(&case.schedule)?)?;
        w.write_json(&format!("{}/cost_breakdown.json", case.name), &cost_breakdown(&case.trace, Some(&case.schedule))?)?;
    }
    w.write_json("power_study.json", &study)?;
    #[derive(Serialize)]
    struct PowerSummary {
        schema_version: u32,
        aileron_out_work: f64,
        aileron_return_work: f64,
        winglet_out_work: f64,
        winglet_return_work: f64,
        coupled_aileron_out_work: f64,
        coupling_reduces_aileron_work: bool,
    }
    let get = |name: &str| study.case(name).expect("study has its three cases");
    let (a, m, c) = (get("aileron"), get("winglet"), get("coupled"));
    let (al, wl) = (crate::flightdyn::AILERON_LEFT, crate::flightdyn::MORPH_LEFT);
    w.write_json(
        "summary.json",
        &PowerSummary {
            schema_version: ARTIFACT_SCHEMA_VERSION,
            aileron_out_work: a.out_work[al],
            aileron_return_work: a.return_work[al],
            winglet_out_work: m.out_work[wl],
            winglet_return_work: m.return_work[wl],
            coupled_aileron_out_work: c.out_work[al],
            coupling_reduces_aileron_work: c.out_work[al] + c.return_work[al] < a.out_work[al] + a.return_work[al],
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn code(args: &[&str]) -> i32 {
        run_command(std::iter::once("morphwing").chain(args.iter().copied()))
    }

    #[test]
    fn unknown_subcommand_is_a_usage_error() {
        assert_eq!(code(&["fly"]), 2);
        assert_eq!(code(&[]), 2);
    }

    #[test]
    fn bad_flag_values_are_usage_errors() {
        assert_eq!(code(&["trim", "--dt-scale", "0"]), 2);
        assert_eq!(code(&["trim", "--morphing", "maybe"]), 2);
        assert_eq!(code(&["sweep-N", "--scenario", "x.toml", "--points", "1"]), 2);
    }

    #[test]
    fn help_exits_cleanly() {
        assert_eq!(code(&["--help"]), 0);
    }

    #[test]
    fn every_subcommand_parses() {
        for args in [
            vec!["trim", "--speed", "30"],
            vec!["envelope", "--speeds", "25,27.5"],
            vec!["simulate", "--horizon", "1"],
            vec!["optimize", "--scenario", "a.toml", "--workers", "8"],
            vec!["sweep-N", "--scenario", "a.toml", "--points", "25,30"],
            vec!["power-study", "--winglet-deg", "-5"],
        ] {
            let cli = Cli::try_parse_from(std::iter::once("morphwing").chain(args.iter().copied())).unwrap();
            assert_eq!(cli.command.name(), args[0]);
        }
    }

    #[test]
    fn missing_scenario_file_is_a_runtime_error() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("run");
        assert_eq!(code(&["optimize", "--scenario", "/nonexistent/s.toml", "--out", out.to_str().unwrap()]), 1);
    }
}
