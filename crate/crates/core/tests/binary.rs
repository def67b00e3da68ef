//! The shipped binary: exit codes, artifacts and the registers verb.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn netadapt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netadapt"))
        .args(args)
        .output()
        .expect("spawn netadapt")
}

fn scenario(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(netadapt(&[]).status.code(), Some(2));
    assert_eq!(netadapt(&["run", "--config", "/does/not/exist.cfg"]).status.code(), Some(2));
    assert_eq!(netadapt(&["train", "--kind", "svm", "--dataset", "x", "--out", "y"]).status.code(), Some(2));
}

#[test]
fn help_exits_0() {
    let out = netadapt(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for verb in ["run", "train", "predict", "roc", "psnr", "gen-trace", "registers"] {
        assert!(text.contains(verb), "help lacks {verb}");
    }
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "name = \"x\"\nseed = 1\nduration_s = 1\nbogus_key = 3\n").unwrap();
    let out = netadapt(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn run_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir: PathBuf = dir.path().join("baseline");
    let cfg = scenario("dumbbell.cfg");
    let out = netadapt(&["run", "--config", &cfg, "--arm", "baseline", "--seed", "3", "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["dataset.csv", "adjustments.csv", "flow_stats.csv", "report.json"] {
        assert!(out_dir.join(f).is_file(), "missing {f}");
    }
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["arm"], "baseline");
    let adjustments = std::fs::read_to_string(out_dir.join("adjustments.csv")).unwrap();
    assert!(adjustments.starts_with("# run=dumbbell-baseline-"));
    assert_eq!(adjustments.lines().count(), 2, "header only when nothing is adjusted");
}

#[test]
fn registers_script_applies_verbs_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("verbs.txt");
    std::fs::write(
        &script,
        "# raise the video flow, then look\n\
         2000000 s1 set-priority 0 5\n\
         2000001 s1 dump-registers\n\
         3000000 s1 set-mirror-interval 20000\n\
         3000001 s1 dump-registers\n",
    )
    .unwrap();
    let out = netadapt(&["registers", "--config", &scenario("dumbbell.cfg"), "--script", script.to_str().unwrap()]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(text.contains("prio_reg[0]=5"), "{text}");
    assert!(text.contains("mirror_interval_us=20000"), "{text}");
}

#[test]
fn gen_trace_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n).to_string_lossy().into_owned();
    for (name, seed) in [("a.csv", "5"), ("b.csv", "5"), ("c.csv", "6")] {
        let out = netadapt(&["gen-trace", "--seed", seed, "--packets-per-class", "50", "--out", &p(name)]);
        assert!(out.status.success());
    }
    let read = |n: &str| std::fs::read(p(n)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_ne!(read("a.csv"), read("c.csv"));
}
