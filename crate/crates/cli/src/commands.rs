use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use airpid::controller::extract_steady_gains;
use airpid::episode::{classify_leg, evaluate, judged_metrics, steady_state_probe, success_rate, EpisodeResult, LegRecord, LegStatus};
use airpid::metrics::{improvement_report, summarize, ImprovementReport, MetricSummary, TrajectoryLog};
use airpid::neural::{read_checkpoint, write_checkpoint, CheckpointError, NetworkParams};
use airpid::planner::{a_star_with, build_grid, emit_setpoints, CostMode, PlanError};
use airpid::ppo::{train as ppo_train, PpoError, TrainReport};
use airpid::{ControllerMode, ErrorSignal, Exec, Gains, Vec3};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::RunConfig;
use crate::csvio::{self, num, opt, CsvWriter};
use crate::error::AppError;
use crate::map::Map;
use crate::plot::{chart_for, render_svg, PlotKind};

#[derive(Debug, Parser)]
#[command(name = "airpid", version, about = "Adaptive PID drone control: train, evaluate, compare, plan, plot")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the gain-scheduling policy with PPO.
    Train(TrainArgs),
    /// Evaluate one controller on seeded episodes.
    Eval(EvalArgs),
    /// Evaluate adaptive, frozen-gain and fixed-gain controllers on the same targets.
    Compare(CompareArgs),
    /// Plan a collision-free path through an obstacle map.
    Plan(PlanArgs),
    /// Render a CSV written by another subcommand as SVG.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Flat TOML run config; defaults are used when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (overrides AIRPID_OUT and `out_dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub total_timesteps: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Adaptive,
    Fixed,
    Frozen,
}

impl ModeArg {
    fn name(self) -> &'static str {
        match self {
            ModeArg::Adaptive => "adaptive",
            ModeArg::Fixed => "fixed",
            ModeArg::Frozen => "frozen",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Policy checkpoint; required for adaptive and frozen modes.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "adaptive")]
    pub mode: ModeArg,
    #[arg(long)]
    pub episodes: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub episodes: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CostArg {
    Euclidean,
    Uniform,
}

fn parse_point(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected x,y,z, got {s:?}"));
    }
    let mut p = [0.0f64; 3];
    for (slot, part) in p.iter_mut().zip(&parts) {
        *slot = part.parse().map_err(|_| format!("bad coordinate {part:?}"))?;
        if !slot.is_finite() {
            return Err(format!("coordinate {part:?} is not finite"));
        }
    }
    Ok(p)
}

#[derive(Debug, Clone, Args)]
pub struct PlanArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Obstacle map (TOML).
    #[arg(long)]
    pub map: PathBuf,
    /// Start position `x,y,z` in meters.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    pub start: [f64; 3],
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    pub goal: [f64; 3],
    #[arg(long, value_enum)]
    pub mode: Option<CostArg>,
    /// Setpoint rate in Hz.
    #[arg(long)]
    pub rate: Option<f64>,
    /// Fly the setpoint schedule in the simulator and report tracking.
    #[arg(long)]
    pub simulate: bool,
    #[arg(long, value_enum, default_value = "fixed")]
    pub controller: ModeArg,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PlotArgs {
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub kind: PlotKind,
    pub output: PathBuf,
}

/// Runs a parsed command line and returns the text to print.
pub fn run(cli: Cli) -> Result<String, AppError> {
    match cli.command {
        Command::Train(a) => cmd_train(&a).map(|o| o.report_text()),
        Command::Eval(a) => cmd_eval(&a).map(|o| o.report_text()),
        Command::Compare(a) => cmd_compare(&a).map(|o| o.report_text()),
        Command::Plan(a) => cmd_plan(&a).map(|o| o.report_text()),
        Command::Plot(a) => cmd_plot(&a).map(|()| format!("wrote {}", a.output.display())),
    }
}

fn resolve(common: &CommonArgs, tweak: impl FnOnce(&mut RunConfig)) -> Result<RunConfig, AppError> {
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    tweak(&mut cfg);
    cfg.resolve_out(common.out.as_deref());
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_policy(path: &Path) -> Result<NetworkParams, AppError> {
    let file = File::open(path).map_err(AppError::io(path))?;
    read_checkpoint(std::io::BufReader::new(file)).map_err(|e| match e {
        CheckpointError::Io(io) if io.kind() != std::io::ErrorKind::UnexpectedEof => AppError::Io { path: path.to_path_buf(), source: io },
        other => AppError::corrupt(path, other.to_string()),
    })
}

fn save_policy(params: &NetworkParams, path: &Path) -> Result<(), AppError> {
    let file = File::create(path).map_err(AppError::io(path))?;
    let mut w = BufWriter::new(file);
    write_checkpoint(params, &mut w).map_err(AppError::io(path))?;
    std::io::Write::flush(&mut w).map_err(AppError::io(path))
}

// ---------------------------------------------------------------- train

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub out_dir: PathBuf,
    pub report: TrainReport,
    pub policy: PathBuf,
    pub checkpoints: usize,
}

impl TrainOutcome {
    pub fn report_text(&self) -> String {
        let last = self.report.iterations.last();
        let steps = last.map_or(0, |r| r.timestep);
        let legs = self.report.legs.len();
        let done = self.report.legs.iter().filter(|l| l.leg.status == LegStatus::Completed).count();
        let speed = last.and_then(|r| r.mean_leg_effective_speed).map_or("n/a".into(), |v| format!("{v:.3} m/s"));
        format!(
            "train: {} iterations, {steps} steps, {legs} legs ({done} completed), last-iteration leg speed {speed}; policy {}",
            self.report.iterations.len(),
            self.policy.display()
        )
    }
}

pub fn cmd_train(args: &TrainArgs) -> Result<TrainOutcome, AppError> {
    let cfg = resolve(&args.common, |c| {
        if let Some(t) = args.total_timesteps {
            c.total_timesteps = t;
        }
    })?;
    train(&cfg)
}

/// Trains with `cfg`, writing the snapshot, CSVs and one checkpoint per
/// iteration into `cfg.out_dir`.
pub fn train(cfg: &RunConfig) -> Result<TrainOutcome, AppError> {
    let dir = cfg.prepare_out_dir()?;
    let ckpt_dir = dir.join("checkpoints");
    fs::create_dir_all(&ckpt_dir).map_err(AppError::io(&ckpt_dir))?;
    let training_path = dir.join("training.csv");
    let legs_path = dir.join("train_legs.csv");
    let mut training = csvio::create(&training_path, &csvio::TRAINING)?;
    let mut legs = csvio::create(&legs_path, &csvio::TRAIN_LEGS)?;
    let mut checkpoints = 0usize;

    let result = ppo_train(cfg.sim(), cfg.ppo(), cfg.bounds(), Exec::default(), |rec, closed, params| {
        let row = vec![
            rec.iteration.to_string(),
            rec.timestep.to_string(),
            num(rec.mean_reward_raw),
            opt(rec.mean_leg_effective_speed),
            opt(rec.settling_time_s),
            opt(rec.overshoot_m),
            num(rec.surrogate),
            num(rec.value_loss),
            num(rec.entropy),
            num(rec.clip_fraction),
            opt(rec.mean_episode_length),
            rec.legs_closed.to_string(),
            rec.legs_completed.to_string(),
        ];
        let mut step = || -> Result<(), AppError> {
            csvio::write_row(&mut training, &training_path, &row)?;
            training.flush().map_err(AppError::io(&training_path))?;
            for l in closed {
                csvio::write_row(&mut legs, &legs_path, &train_leg_row(l.iteration, l.timestep, &l.leg))?;
            }
            legs.flush().map_err(AppError::io(&legs_path))?;
            save_policy(params, &ckpt_dir.join(format!("iter_{:04}.ckpt", rec.iteration)))?;
            checkpoints += 1;
            Ok(())
        };
        step().map_err(|e| e.to_string())
    });

    let (params, report) = match result {
        Ok(v) => v,
        Err(PpoError::NonFiniteLoss { iteration, epoch, minibatch, dump }) => {
            let path = dir.join("nonfinite_minibatch.txt");
            fs::write(&path, &dump).map_err(AppError::io(&path))?;
            return Err(AppError::Other(format!(
                "non-finite loss at iteration {iteration}, epoch {epoch}, minibatch {minibatch}; minibatch dumped to {}",
                path.display()
            )));
        }
        Err(PpoError::InvalidConfig(msg)) => return Err(AppError::Config(msg)),
        Err(e) => return Err(AppError::Other(e.to_string())),
    };
    csvio::finish(training, &training_path)?;
    csvio::finish(legs, &legs_path)?;
    let policy = dir.join("policy.ckpt");
    save_policy(&params, &policy)?;
    Ok(TrainOutcome { out_dir: dir, report, policy, checkpoints })
}

fn status_name(s: LegStatus) -> &'static str {
    match s {
        LegStatus::Completed => "completed",
        LegStatus::Truncated => "truncated",
        LegStatus::Aborted => "aborted",
    }
}

fn train_leg_row(iteration: usize, timestep: usize, leg: &LegRecord) -> Vec<String> {
    let m = &leg.metrics;
    vec![
        iteration.to_string(),
        timestep.to_string(),
        leg.meta.leg_id.to_string(),
        status_name(leg.status).into(),
        leg.steps.to_string(),
        num((leg.meta.target - leg.meta.start).norm()),
        num(m.effective_speed),
        opt(m.settling_time),
        opt(m.overshoot),
        num(m.final_error),
    ]
}

// ---------------------------------------------------------------- eval

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerReport {
    pub name: String,
    /// Constant gains for fixed and frozen controllers.
    pub gains: Option<Gains>,
    /// Probe signal the frozen gains were extracted at.
    pub probe: Option<ErrorSignal>,
    pub episodes: Vec<EpisodeResult>,
    pub legs: usize,
    pub judged_legs: usize,
    pub success_rate: Option<f64>,
    pub summary: Option<MetricSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutcome {
    pub out_dir: PathBuf,
    pub controllers: Vec<ControllerReport>,
    /// Adaptive against each baseline, for comparisons.
    pub improvements: Vec<(String, Option<ImprovementReport>)>,
}

fn pct(v: Option<f64>) -> String {
    v.map_or("n/a".into(), |x| format!("{x:+.1}%"))
}

impl EvalOutcome {
    pub fn controller(&self, name: &str) -> Option<&ControllerReport> {
        self.controllers.iter().find(|c| c.name == name)
    }

    pub fn report_text(&self) -> String {
        let mut s = String::new();
        for c in &self.controllers {
            let gains = c.gains.map_or(String::new(), |g| format!(" gains ({:.4}, {:.4}, {:.4})", g.kp, g.ki, g.kd));
            let _ = write!(s, "{}:{gains} legs {} judged {}", c.name, c.legs, c.judged_legs);
            if let Some(r) = c.success_rate {
                let _ = write!(s, " success {:.1}%", 100.0 * r);
            }
            if let Some(m) = &c.summary {
                let settle = m.settling_time.map_or("n/a".into(), |t| format!("{t:.2} s"));
                let _ = write!(s, " speed {:.3} m/s settling {settle} overshoot {:.3} m", m.effective_speed, m.overshoot);
            }
            s.push('\n');
        }
        for (vs, imp) in &self.improvements {
            match imp {
                Some(r) => {
                    let _ = writeln!(
                        s,
                        "adaptive vs {vs}: speed {} settling {} overshoot {}",
                        pct(r.speed_pct),
                        pct(r.settling_pct),
                        pct(r.overshoot_pct)
                    );
                }
                None => {
                    let _ = writeln!(s, "adaptive vs {vs}: no judged legs");
                }
            }
        }
        let _ = write!(s, "outputs in {}", self.out_dir.display());
        s
    }
}

pub fn cmd_eval(args: &EvalArgs) -> Result<EvalOutcome, AppError> {
    let cfg = resolve(&args.common, |c| {
        if let Some(n) = args.episodes {
            c.eval_episodes = n;
        }
    })?;
    let policy = match (args.mode, &args.checkpoint) {
        (ModeArg::Fixed, _) => None,
        (_, Some(p)) => Some(load_policy(p)?),
        (m, None) => return Err(AppError::Config(format!("--checkpoint is required for {} mode", m.name()))),
    };
    eval(&cfg, args.mode, policy)
}

fn run_controller(cfg: &RunConfig, name: &str, mode: &ControllerMode, gains: Option<Gains>) -> Result<ControllerReport, AppError> {
    let episodes = evaluate(mode, &cfg.sim(), &cfg.bounds(), cfg.eval_episodes, cfg.seed, Exec::default())
        .map_err(|e| AppError::Other(e.to_string()))?;
    let all: Vec<&LegRecord> = episodes.iter().flat_map(|e| &e.legs).collect();
    let judged = judged_metrics(all.iter().copied(), cfg.settle_tolerance, cfg.eval_leg_timeout);
    Ok(ControllerReport {
        name: name.to_string(),
        gains,
        probe: None,
        legs: all.len(),
        judged_legs: judged.len(),
        success_rate: success_rate(all.iter().copied(), cfg.settle_tolerance, cfg.eval_leg_timeout),
        summary: summarize(&judged, cfg.aggregate),
        episodes,
    })
}

fn frozen_from(cfg: &RunConfig, params: &NetworkParams, adaptive_episode: &EpisodeResult) -> (Gains, ErrorSignal) {
    let probe = steady_state_probe(adaptive_episode, cfg.settle_tolerance);
    (extract_steady_gains(params, &probe, &cfg.bounds()), probe)
}

fn run_frozen(cfg: &RunConfig, params: &NetworkParams, adaptive_episode: &EpisodeResult) -> Result<ControllerReport, AppError> {
    let (gains, probe) = frozen_from(cfg, params, adaptive_episode);
    let mut r = run_controller(cfg, "frozen", &ControllerMode::FrozenSteadyState(gains), Some(gains))?;
    r.probe = Some(probe);
    Ok(r)
}

/// The probe episode: adaptive, deterministic, first evaluation seed.
fn probe_episode(cfg: &RunConfig, params: &NetworkParams) -> Result<EpisodeResult, AppError> {
    let seed = airpid::rng::derive_seed(cfg.seed, 0);
    airpid::episode::run_episode(&ControllerMode::adaptive(params.clone()), &cfg.sim(), &cfg.bounds(), seed)
        .map_err(|e| AppError::Other(e.to_string()))
}

/// Evaluates one controller and writes trajectories, legs, summary and the
/// first episode's gain trace.
pub fn eval(cfg: &RunConfig, mode: ModeArg, policy: Option<NetworkParams>) -> Result<EvalOutcome, AppError> {
    let report = match (mode, policy) {
        (ModeArg::Fixed, _) => run_controller(cfg, "fixed", &ControllerMode::FixedPid(cfg.baseline()), Some(cfg.baseline()))?,
        (ModeArg::Adaptive, Some(p)) => run_controller(cfg, "adaptive", &ControllerMode::adaptive(p), None)?,
        (ModeArg::Frozen, Some(p)) => run_frozen(cfg, &p, &probe_episode(cfg, &p)?)?,
        (m, None) => return Err(AppError::Config(format!("a policy is required for {} mode", m.name()))),
    };
    let dir = cfg.prepare_out_dir()?;
    let traj_dir = dir.join("trajectories");
    fs::create_dir_all(&traj_dir).map_err(AppError::io(&traj_dir))?;
    for (k, ep) in report.episodes.iter().enumerate() {
        write_trajectory(&ep.log, &traj_dir.join(format!("{}_ep{k:03}.csv", report.name)))?;
    }
    let out = EvalOutcome { out_dir: dir, controllers: vec![report], improvements: Vec::new() };
    write_eval_tables(cfg, &out)?;
    Ok(out)
}

pub fn cmd_compare(args: &CompareArgs) -> Result<EvalOutcome, AppError> {
    let cfg = resolve(&args.common, |c| {
        if let Some(n) = args.episodes {
            c.eval_episodes = n;
        }
    })?;
    let policy = load_policy(&args.checkpoint)?;
    compare(&cfg, &policy)
}

/// Adaptive, frozen-gain and fixed-gain controllers on identical target
/// sequences.
pub fn compare(cfg: &RunConfig, policy: &NetworkParams) -> Result<EvalOutcome, AppError> {
    let adaptive = run_controller(cfg, "adaptive", &ControllerMode::adaptive(policy.clone()), None)?;
    let frozen = run_frozen(cfg, policy, &adaptive.episodes[0])?;
    let fixed = run_controller(cfg, "fixed", &ControllerMode::FixedPid(cfg.baseline()), Some(cfg.baseline()))?;
    let judged = |r: &ControllerReport| {
        judged_metrics(r.episodes.iter().flat_map(|e| &e.legs), cfg.settle_tolerance, cfg.eval_leg_timeout)
    };
    let a = judged(&adaptive);
    let improvements = vec![
        ("frozen".to_string(), improvement_report(&a, &judged(&frozen), cfg.aggregate)),
        ("fixed".to_string(), improvement_report(&a, &judged(&fixed), cfg.aggregate)),
    ];
    let dir = cfg.prepare_out_dir()?;
    let out = EvalOutcome { out_dir: dir, controllers: vec![adaptive, frozen, fixed], improvements };
    write_eval_tables(cfg, &out)?;
    let path = out.out_dir.join("improvement.csv");
    let mut w = csvio::create(&path, &csvio::IMPROVEMENT)?;
    for (vs, imp) in &out.improvements {
        let row = vec![
            vs.clone(),
            opt(imp.and_then(|r| r.speed_pct)),
            opt(imp.and_then(|r| r.settling_pct)),
            opt(imp.and_then(|r| r.overshoot_pct)),
        ];
        csvio::write_row(&mut w, &path, &row)?;
    }
    csvio::finish(w, &path)?;
    Ok(out)
}

fn write_eval_tables(cfg: &RunConfig, out: &EvalOutcome) -> Result<(), AppError> {
    let legs_path = out.out_dir.join("legs.csv");
    let mut legs = csvio::create(&legs_path, &csvio::EVAL_LEGS)?;
    let summary_path = out.out_dir.join("summary.csv");
    let mut summary = csvio::create(&summary_path, &csvio::SUMMARY)?;
    for c in &out.controllers {
        for (k, ep) in c.episodes.iter().enumerate() {
            for leg in &ep.legs {
                write_eval_leg(&mut legs, &legs_path, cfg, &c.name, k, leg)?;
            }
        }
        let m = c.summary.as_ref();
        let row = vec![
            c.name.clone(),
            opt(c.gains.map(|g| g.kp)),
            opt(c.gains.map(|g| g.ki)),
            opt(c.gains.map(|g| g.kd)),
            c.legs.to_string(),
            c.judged_legs.to_string(),
            opt(c.success_rate),
            opt(m.map(|m| m.effective_speed)),
            opt(m.and_then(|m| m.settling_time)),
            opt(m.map(|m| m.overshoot)),
            opt(m.map(|m| m.failure_rate)),
        ];
        csvio::write_row(&mut summary, &summary_path, &row)?;
    }
    csvio::finish(legs, &legs_path)?;
    csvio::finish(summary, &summary_path)?;

    // gain trace of the first episode of the first controller
    if let Some(ep) = out.controllers.first().and_then(|c| c.episodes.first()) {
        write_gains(&ep.log, &out.out_dir.join("gains.csv"))?;
    }
    Ok(())
}

fn write_eval_leg(w: &mut CsvWriter, path: &Path, cfg: &RunConfig, name: &str, episode: usize, leg: &LegRecord) -> Result<(), AppError> {
    let outcome = match classify_leg(leg, cfg.settle_tolerance, cfg.eval_leg_timeout) {
        airpid::episode::LegOutcome::Success => "success",
        airpid::episode::LegOutcome::Failure => "failure",
        airpid::episode::LegOutcome::Censored => "censored",
    };
    let (s, t, m) = (leg.meta.start, leg.meta.target, &leg.metrics);
    let row = vec![
        name.to_string(),
        episode.to_string(),
        leg.meta.leg_id.to_string(),
        status_name(leg.status).into(),
        outcome.into(),
        leg.steps.to_string(),
        num(s.x),
        num(s.y),
        num(s.z),
        num(t.x),
        num(t.y),
        num(t.z),
        num(m.effective_speed),
        opt(m.settling_time),
        opt(m.overshoot),
        num(m.final_error),
    ];
    csvio::write_row(w, path, &row)
}

pub fn write_trajectory(log: &TrajectoryLog, path: &Path) -> Result<(), AppError> {
    let mut w = csvio::create(path, &csvio::TRAJECTORY)?;
    for s in &log.steps {
        let row = vec![
            num(s.t),
            num(s.position.x),
            num(s.position.y),
            num(s.position.z),
            num(s.velocity.x),
            num(s.velocity.y),
            num(s.velocity.z),
            num(s.gains.kp),
            num(s.gains.ki),
            num(s.gains.kd),
            num(s.command.x),
            num(s.command.y),
            num(s.command.z),
            num(s.pe),
            s.leg_id.to_string(),
        ];
        csvio::write_row(&mut w, path, &row)?;
    }
    csvio::finish(w, path)
}

fn write_gains(log: &TrajectoryLog, path: &Path) -> Result<(), AppError> {
    let mut w = csvio::create(path, &csvio::GAINS)?;
    for (t, leg, pe, g) in airpid::episode::gain_trace(log) {
        csvio::write_row(&mut w, path, &[num(t), leg.to_string(), num(pe), num(g.kp), num(g.ki), num(g.kd)])?;
    }
    csvio::finish(w, path)
}

// ---------------------------------------------------------------- plan

#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutcome {
    pub out_dir: PathBuf,
    pub waypoints: Vec<Vec3>,
    pub cost: f64,
    pub setpoint_times: Vec<f64>,
    pub follow: Option<airpid::episode::FollowReport>,
}

impl PlanOutcome {
    pub fn report_text(&self) -> String {
        let mut s = format!(
            "plan: {} waypoints, cost {:.3} voxel lengths, schedule {:.1} s",
            self.waypoints.len(),
            self.cost,
            self.setpoint_times.last().copied().unwrap_or(0.0)
        );
        if let Some(f) = &self.follow {
            let arrival = f.arrival_time.map_or("not reached".into(), |t| format!("{t:.2} s"));
            let _ = write!(
                s,
                "\nfollow: arrival {arrival}, final error {:.3} m, mean tracking error {:.3} m",
                f.final_error, f.mean_tracking_error
            );
        }
        let _ = write!(s, "\noutputs in {}", self.out_dir.display());
        s
    }
}

pub fn cmd_plan(args: &PlanArgs) -> Result<PlanOutcome, AppError> {
    let cfg = resolve(&args.common, |c| {
        if let Some(m) = args.mode {
            c.plan_cost = match m {
                CostArg::Euclidean => CostMode::Euclidean,
                CostArg::Uniform => CostMode::Uniform,
            };
        }
        if let Some(r) = args.rate {
            c.setpoint_rate = r;
        }
    })?;
    let map = Map::load(&args.map)?;
    let controller = if args.simulate {
        Some(match args.controller {
            ModeArg::Fixed => ControllerMode::FixedPid(cfg.baseline()),
            m => {
                let p = args
                    .checkpoint
                    .as_deref()
                    .ok_or_else(|| AppError::Config(format!("--checkpoint is required for the {} controller", m.name())))?;
                let params = load_policy(p)?;
                if m == ModeArg::Adaptive {
                    ControllerMode::adaptive(params)
                } else {
                    let ep = probe_episode(&cfg, &params)?;
                    ControllerMode::FrozenSteadyState(frozen_from(&cfg, &params, &ep).0)
                }
            }
        })
    } else {
        None
    };
    plan(&cfg, &map, Vec3::from_array(args.start), Vec3::from_array(args.goal), controller.as_ref())
}

/// Plans, writes waypoint and setpoint CSVs, and optionally flies the
/// schedule with `controller`.
pub fn plan(cfg: &RunConfig, map: &Map, start: Vec3, goal: Vec3, controller: Option<&ControllerMode>) -> Result<PlanOutcome, AppError> {
    let half = Vec3::from_array(cfg.plan_half_extent);
    let grid = build_grid(&map.obstacles, &map.workspace, cfg.plan_resolution, half).map_err(|e| AppError::Config(e.to_string()))?;
    let locate = |p: Vec3, which: &str| {
        grid.locate(p).ok_or_else(|| AppError::Config(format!("{which} {:?} lies outside the map", p.to_array())))
    };
    let (s, g) = (locate(start, "start")?, locate(goal, "goal")?);
    let result = a_star_with(s, g, &grid, cfg.plan_cost, cfg.plan_clearance).map_err(|e| match e {
        PlanError::NoPath => AppError::NoPath(format!("goal {:?} is unreachable from start {:?}", goal.to_array(), start.to_array())),
        other => AppError::Config(other.to_string()),
    })?;
    let schedule = emit_setpoints(&result.path, cfg.setpoint_rate).map_err(|e| AppError::Config(e.to_string()))?;

    let dir = cfg.prepare_out_dir()?;
    let wp_path = dir.join("waypoints.csv");
    let mut w = csvio::create(&wp_path, &csvio::WAYPOINTS)?;
    for (k, (v, p)) in result.voxels.iter().zip(&result.path).enumerate() {
        let row = vec![k.to_string(), v.x.to_string(), v.y.to_string(), v.z.to_string(), num(p.x), num(p.y), num(p.z)];
        csvio::write_row(&mut w, &wp_path, &row)?;
    }
    csvio::finish(w, &wp_path)?;
    let sp_path = dir.join("setpoints.csv");
    let mut w = csvio::create(&sp_path, &csvio::SETPOINTS)?;
    for sp in &schedule {
        csvio::write_row(&mut w, &sp_path, &[num(sp.t), num(sp.position.x), num(sp.position.y), num(sp.position.z)])?;
    }
    csvio::finish(w, &sp_path)?;

    let follow = match controller {
        Some(mode) => {
            let sim = airpid::SimConfig { workspace: map.workspace, ..cfg.sim() };
            let report = airpid::episode::follow_schedule(mode, &sim, &cfg.bounds(), &schedule, cfg.follow_extra_time)
                .map_err(|e| AppError::Other(e.to_string()))?;
            write_trajectory(&report.log, &dir.join("follow_trajectory.csv"))?;
            Some(report)
        }
        None => None,
    };
    Ok(PlanOutcome {
        out_dir: dir,
        waypoints: result.path.clone(),
        cost: result.cost,
        setpoint_times: schedule.iter().map(|s| s.t).collect(),
        follow,
    })
}

// ---------------------------------------------------------------- plot

/// Renders `input` to SVG. Nothing is written when the CSV is rejected.
pub fn cmd_plot(args: &PlotArgs) -> Result<(), AppError> {
    let chart = chart_for(args.kind, &args.input)?;
    let svg = render_svg(&chart);
    fs::write(&args.output, svg).map_err(AppError::io(&args.output))
}
