use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = "\
env.side_s = 20
env.road_spacing = 10
env.obstacle.0 = 5, 15, 2, 10
env.t_max = 30
obs.mode = vector
net.hidden = 8
train.episodes = 3
train.warmup = 10
";

fn uav_track(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uav-track")).args(args).env("UAVTRACK_LOG", "warn").output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = uav_track(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_config(dir: &Path, name: &str, extra: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, format!("{TINY}{extra}")).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn train_eval_metrics_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "tiny.cfg", "");
    let run = tmp.path().join("run");
    ok(&["train", "--config", &cfg, "--algo", "ddqn", "--seed", "3", "--out", p(&run)]);
    for f in ["manifest.json", "weights.tfdq", "train_stats.csv"] {
        assert!(run.join(f).is_file(), "missing {f}");
    }
    let weights = fs::read(run.join("weights.tfdq")).unwrap();
    assert_eq!(&weights[..4], b"TFDQ");
    let first = fs::read_to_string(run.join("trajectories/episode_00000.csv")).unwrap();
    assert!(first.lines().any(|l| l == "t,xD,yD,zD,xT,yT,reward,visible,branch"));

    let eval = tmp.path().join("eval");
    let text = ok(&["eval", "--config", &cfg, "--model", p(&run), "--episodes", "2", "--seed", "4", "--out", p(&eval)]);
    assert!(text.contains("dis:") && text.contains("time_in_fov"));
    assert!(eval.join("report.json").is_file() && eval.join("report.txt").is_file());

    let base = tmp.path().join("base");
    ok(&["eval", "--config", &cfg, "--algo", "baseline", "--episodes", "2", "--seed", "4", "--out", p(&base)]);
    let cmp = tmp.path().join("cmp");
    let compare = base.join("report.json");
    ok(&[
        "eval",
        "--config",
        &cfg,
        "--model",
        p(&run),
        "--episodes",
        "2",
        "--seed",
        "4",
        "--out",
        p(&cmp),
        "--compare",
        p(&compare),
    ]);
    assert!(fs::read_to_string(cmp.join("compare.txt")).unwrap().contains("winner"));

    let again = tmp.path().join("again");
    ok(&["metrics", "--trajectories", p(&eval), "--label", "ddqn", "--out", p(&again)]);
    let strip = |path: &Path| {
        let mut v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(path.join("report.json")).unwrap()).unwrap();
        for k in ["t_tr_hours", "t_ev_seconds", "ct"] {
            v.as_object_mut().unwrap().remove(k);
        }
        v
    };
    assert_eq!(strip(&eval), strip(&again));
}

#[test]
fn hash_mismatch_is_refused_unless_forced() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "tiny.cfg", "");
    let other = write_config(tmp.path(), "other.cfg", "reward.r_nv = -30\n");
    let run = tmp.path().join("run");
    ok(&["train", "--config", &cfg, "--out", p(&run)]);
    let out = uav_track(&[
        "eval",
        "--config",
        &other,
        "--model",
        p(&run),
        "--episodes",
        "1",
        "--out",
        p(&tmp.path().join("e")),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("hash"));
    ok(&[
        "eval",
        "--config",
        &other,
        "--model",
        p(&run),
        "--episodes",
        "1",
        "--force",
        "--out",
        p(&tmp.path().join("f")),
    ]);
}

#[test]
fn invalid_config_names_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.cfg", "train.gamma = 1.5\n");
    let out = uav_track(&["train", "--config", &cfg, "--out", p(&tmp.path().join("r"))]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("gamma"), "{err}");
}

#[test]
fn sweep_and_curriculum() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "tiny.cfg", "");
    let bigger = write_config(tmp.path(), "bigger.cfg", "env.obstacle.1 = 15, 5, 2, 12\n");
    let run = tmp.path().join("run");
    ok(&["train", "--config", &cfg, "--out", p(&run)]);

    let sweep = tmp.path().join("sweep");
    let csv = ok(&["sweep-drift", "--config", &cfg, "--speeds", "0,1", "--episodes", "1", "--out", p(&sweep)]);
    assert!(csv.starts_with("wind,agent,DIS,TIME,REW"));
    assert_eq!(csv.lines().count(), 3);
    assert!(sweep.join("sweep.csv").is_file());

    let cur = tmp.path().join("cur");
    ok(&["curriculum", "--config", &bigger, "--from", p(&run), "--episodes", "1", "--out", p(&cur)]);
    assert!(cur.join("weights.tfdq").is_file() && cur.join("eval/report.json").is_file());
}

#[test]
fn random_is_not_trainable() {
    let tmp = tempfile::tempdir().unwrap();
    let out = uav_track(&["train", "--algo", "random", "--out", p(&tmp.path().join("r"))]);
    assert!(!out.status.success());
}
