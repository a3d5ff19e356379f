use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use airpid::controller::extract_steady_gains;
use airpid::episode::{run_episode, steady_state_probe};
use airpid::rng::derive_seed;
use airpid::ControllerMode;
use airpid_cli::commands::load_policy;
use airpid_cli::RunConfig;
use tempfile::TempDir;

fn airpid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_airpid"))
        .args(args)
        .env_remove("AIRPID_OUT")
        .output()
        .expect("spawn airpid")
}

fn ok(args: &[&str]) -> String {
    let out = airpid(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Data rows of a versioned CSV (tag and header skipped).
fn rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(2)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

/// A short training run shared by the tests that need a checkpoint.
fn trained() -> &'static Path {
    static DIR: OnceLock<TempDir> = OnceLock::new();
    DIR.get_or_init(|| {
        let d = tempfile::tempdir().unwrap();
        ok(&["train", "--seed", "3", "--total-timesteps", "2048", "--out", s(d.path())]);
        d
    })
    .path()
}

fn write_map(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

const OPEN_MAP: &str = "workspace_min = [0.0, 0.0, 0.0]\nworkspace_max = [6.0, 2.0, 2.0]\n";
const SEALED_MAP: &str = "workspace_min = [0.0, 0.0, 0.0]
workspace_max = [6.0, 6.0, 2.0]
[[obstacle]]
min = [2.8, 0.0, 0.0]
max = [3.2, 6.0, 2.0]
";

#[test]
fn missing_config_exits_2_without_outputs() {
    let d = tempfile::tempdir().unwrap();
    let out_dir = d.path().join("run");
    let out = airpid(&["train", "--config", s(&d.path().join("nope.toml")), "--out", s(&out_dir)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_dir.exists());
}

#[test]
fn invalid_config_value_names_the_key() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_map(d.path(), "bad.toml", "tau_v = -1.0\n");
    let out = airpid(&["train", "--config", s(&cfg), "--out", s(&d.path().join("run"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tau_v"));
}

#[test]
fn corrupt_checkpoint_exits_4() {
    let d = tempfile::tempdir().unwrap();
    let ckpt = write_map(d.path(), "bad.ckpt", "not a checkpoint");
    let out = airpid(&["eval", "--checkpoint", s(&ckpt), "--out", s(&d.path().join("run"))]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn sealed_goal_exits_3() {
    let d = tempfile::tempdir().unwrap();
    let map = write_map(d.path(), "sealed.toml", SEALED_MAP);
    let out = airpid(&["plan", "--map", s(&map), "--start", "1,1,1", "--goal", "5,1,1", "--out", s(&d.path().join("p"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unreachable"));
}

#[test]
fn one_horizon_trains_one_iteration() {
    let d = tempfile::tempdir().unwrap();
    ok(&["train", "--seed", "1", "--total-timesteps", "1024", "--out", s(d.path())]);
    assert_eq!(rows(&d.path().join("training.csv")).len(), 1);
    assert!(d.path().join("policy.ckpt").exists());
    assert!(d.path().join("config.toml").exists());
}

#[test]
fn default_training_writes_a_checkpoint_per_iteration() {
    let d = tempfile::tempdir().unwrap();
    ok(&["train", "--seed", "0", "--out", s(d.path())]);
    let ckpts = fs::read_dir(d.path().join("checkpoints")).unwrap().count();
    assert_eq!(ckpts, 20);
    let training = rows(&d.path().join("training.csv"));
    assert_eq!(training.len(), 20);
    assert_eq!(training.last().unwrap()[1], "20000");
}

#[test]
fn fixed_mode_needs_no_checkpoint() {
    let d = tempfile::tempdir().unwrap();
    ok(&["eval", "--mode", "fixed", "--episodes", "2", "--out", s(d.path())]);
    assert!(d.path().join("trajectories/fixed_ep001.csv").exists());
    let summary = rows(&d.path().join("summary.csv"));
    assert_eq!(summary[0][..4], ["fixed", "4", "0.5", "0"]);

    let out = airpid(&["eval", "--mode", "adaptive", "--out", s(&d.path().join("a"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn trajectory_columns_are_stable() {
    let d = tempfile::tempdir().unwrap();
    ok(&["eval", "--mode", "fixed", "--episodes", "1", "--out", s(d.path())]);
    let text = fs::read_to_string(d.path().join("trajectories/fixed_ep000.csv")).unwrap();
    let header = text.lines().nth(1).unwrap();
    assert_eq!(header, "t,x,y,z,vx,vy,vz,kp,ki,kd,cmd_x,cmd_y,cmd_z,pe,leg_id");
}

#[test]
fn frozen_gains_come_from_the_steady_state_probe() {
    let d = tempfile::tempdir().unwrap();
    let ckpt = trained().join("policy.ckpt");
    ok(&["eval", "--mode", "frozen", "--seed", "5", "--episodes", "2", "--checkpoint", s(&ckpt), "--out", s(d.path())]);
    let summary = rows(&d.path().join("summary.csv"));
    let got: Vec<f64> = summary[0][1..4].iter().map(|c| c.parse().unwrap()).collect();

    let cfg = RunConfig { seed: 5, ..RunConfig::default() };
    let params = load_policy(&ckpt).unwrap();
    let ep = run_episode(&ControllerMode::adaptive(params.clone()), &cfg.sim(), &cfg.bounds(), derive_seed(5, 0)).unwrap();
    let g = extract_steady_gains(&params, &steady_state_probe(&ep, cfg.settle_tolerance), &cfg.bounds());
    assert_eq!(got, vec![g.kp, g.ki, g.kd]);
}

#[test]
fn compare_writes_all_three_controllers() {
    let d = tempfile::tempdir().unwrap();
    let ckpt = trained().join("policy.ckpt");
    ok(&["compare", "--episodes", "2", "--checkpoint", s(&ckpt), "--out", s(d.path())]);
    let names: Vec<String> = rows(&d.path().join("summary.csv")).into_iter().map(|r| r[0].clone()).collect();
    assert_eq!(names, ["adaptive", "frozen", "fixed"]);
    let imp = rows(&d.path().join("improvement.csv"));
    assert_eq!(imp.iter().map(|r| r[0].as_str()).collect::<Vec<_>>(), ["frozen", "fixed"]);
    assert!(d.path().join("gains.csv").exists());
}

#[test]
fn adaptive_against_itself_is_zero_percent() {
    use airpid::episode::{evaluate, judged_metrics};
    use airpid::metrics::{improvement_report, Aggregate};
    let cfg = RunConfig::default();
    let params = load_policy(&trained().join("policy.ckpt")).unwrap();
    let eps = evaluate(&ControllerMode::adaptive(params), &cfg.sim(), &cfg.bounds(), 3, 9, airpid::Exec::default()).unwrap();
    let legs = judged_metrics(eps.iter().flat_map(|e| &e.legs), cfg.settle_tolerance, cfg.eval_leg_timeout);
    let r = improvement_report(&legs, &legs, Aggregate::Median).unwrap();
    assert_eq!(r.speed_pct, Some(0.0));
}

#[test]
fn setpoint_rate_sets_spacing() {
    let d = tempfile::tempdir().unwrap();
    let map = write_map(d.path(), "open.toml", OPEN_MAP);
    for (rate, dt) in [("1", 1.0), ("4", 0.25)] {
        let out = d.path().join(format!("rate{rate}"));
        ok(&["plan", "--map", s(&map), "--start", "0.5,1,1", "--goal", "5.5,1,1", "--rate", rate, "--out", s(&out)]);
        let ts: Vec<f64> = rows(&out.join("setpoints.csv")).iter().map(|r| r[0].parse().unwrap()).collect();
        assert!(ts.len() > 2);
        for (k, t) in ts.iter().enumerate() {
            assert_eq!(*t, k as f64 / (1.0 / dt));
        }
    }
}

#[test]
fn empty_map_gives_a_straight_path() {
    let d = tempfile::tempdir().unwrap();
    let map = write_map(d.path(), "open.toml", OPEN_MAP);
    ok(&["plan", "--map", s(&map), "--start", "0.5,1,1", "--goal", "5.5,1,1", "--out", s(d.path())]);
    let wp = rows(&d.path().join("waypoints.csv"));
    assert!(wp.iter().all(|r| r[2] == wp[0][2] && r[3] == wp[0][3]));
    let xs: Vec<i64> = wp.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(xs.windows(2).all(|w| w[1] == w[0] + 1));
}

#[test]
fn simulate_follows_the_schedule() {
    let d = tempfile::tempdir().unwrap();
    let map = write_map(d.path(), "open.toml", OPEN_MAP);
    let text = ok(&["plan", "--map", s(&map), "--start", "0.5,1,1", "--goal", "3.5,1,1", "--simulate", "--out", s(d.path())]);
    assert!(text.contains("follow: arrival"), "{text}");
    assert!(d.path().join("follow_trajectory.csv").exists());
}

#[test]
fn plot_rejects_empty_data_without_writing() {
    let d = tempfile::tempdir().unwrap();
    let csv = write_map(d.path(), "g.csv", "#schema=airpid-gains/1\nt,leg_id,pe,kp,ki,kd\n");
    let svg = d.path().join("g.svg");
    let out = airpid(&["plot", s(&csv), "--kind", "gains", s(&svg)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no data rows"));
    assert!(!svg.exists());
}

#[test]
fn plot_names_the_bad_row() {
    let d = tempfile::tempdir().unwrap();
    let csv = write_map(d.path(), "g.csv", "#schema=airpid-gains/1\nt,leg_id,pe,kp,ki,kd\n0,0,1,2,0.1,0.3\n0.04,0,1,oops,0.1,0.3\n");
    let out = airpid(&["plot", s(&csv), "--kind", "gains", s(&d.path().join("g.svg"))]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 2"));
}

#[test]
fn unknown_schema_version_is_rejected() {
    let d = tempfile::tempdir().unwrap();
    let csv = write_map(d.path(), "g.csv", "#schema=airpid-gains/99\nt,leg_id,pe,kp,ki,kd\n0,0,1,2,0.1,0.3\n");
    let out = airpid(&["plot", s(&csv), "--kind", "gains", s(&d.path().join("g.svg"))]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("version 99"));
}

#[test]
fn plots_carry_their_series() {
    let d = tempfile::tempdir().unwrap();
    let training = d.path().join("training.svg");
    ok(&["plot", s(&trained().join("training.csv")), "--kind", "training", s(&training)]);
    let text = fs::read_to_string(&training).unwrap();
    for name in ["effective speed", "settling time", "overshoot"] {
        assert!(text.contains(name), "missing {name}");
    }

    ok(&["eval", "--mode", "fixed", "--episodes", "1", "--out", s(&d.path().join("ev"))]);
    let gains = d.path().join("gains.svg");
    ok(&["plot", s(&d.path().join("ev/gains.csv")), "--kind", "gains", s(&gains)]);
    let text = fs::read_to_string(&gains).unwrap();
    assert!(text.starts_with("<svg") || text.starts_with("<?xml"));
    for name in [">kp<", ">ki<", ">kd<"] {
        assert!(text.contains(name), "missing {name}");
    }
    // same input, same bytes
    let again = d.path().join("gains2.svg");
    ok(&["plot", s(&d.path().join("ev/gains.csv")), "--kind", "gains", s(&again)]);
    assert_eq!(fs::read(&gains).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn out_env_var_and_flag_precedence() {
    let d = tempfile::tempdir().unwrap();
    let env_dir = d.path().join("from_env");
    let flag_dir = d.path().join("from_flag");
    let run = |extra: &[&str]| {
        let mut args = vec!["eval", "--mode", "fixed", "--episodes", "1"];
        args.extend_from_slice(extra);
        let out = Command::new(env!("CARGO_BIN_EXE_airpid")).args(&args).env("AIRPID_OUT", &env_dir).output().unwrap();
        assert!(out.status.success());
    };
    run(&[]);
    assert!(env_dir.join("summary.csv").exists());
    run(&["--out", s(&flag_dir)]);
    assert!(flag_dir.join("summary.csv").exists());
}

#[test]
fn config_snapshot_reproduces_the_run() {
    let d = tempfile::tempdir().unwrap();
    let snap = trained().join("config.toml");
    ok(&["train", "--config", s(&snap), "--out", s(d.path())]);
    for f in ["training.csv", "train_legs.csv", "policy.ckpt"] {
        assert_eq!(fs::read(trained().join(f)).unwrap(), fs::read(d.path().join(f)).unwrap(), "{f}");
    }
}
