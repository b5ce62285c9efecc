use std::fs;
use std::process::Command;

fn scalestat() -> Command {
    Command::new(env!("CARGO_BIN_EXE_scalestat"))
}

const SMALL_CUT: &str = "experiment = tradeoff-cut-matrix
seed = 3
threads = 2
convex.p = 4
convex.trials = 200
convex.footnote_p = 16
";

#[test]
fn validate_prints_canonical_config() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ok.conf");
    fs::write(&path, SMALL_CUT).unwrap();
    let out = scalestat().args(["validate", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("convex.trials = 200"), "{text}");
    assert!(text.contains("seed = 3"), "{text}");
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = dir.path().join("unknown.conf");
    fs::write(&unknown, "experiment = blb-curve\nseed = 1\nblb.bogus = 3\n").unwrap();
    let bad_value = dir.path().join("bad.conf");
    fs::write(&bad_value, "experiment = blb-curve\nseed = 1\nblb.gamma = 1.5\n").unwrap();
    for path in [&unknown, &bad_value] {
        let out = scalestat().args(["validate", "--config"]).arg(path).output().unwrap();
        assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
        let out = scalestat().args(["blb-curve", "--config"]).arg(path).output().unwrap();
        assert_eq!(out.status.code(), Some(2));
    }
    let out = scalestat().args(["validate", "--config", "/nonexistent/x.conf"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_writes_schema_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cut.conf");
    fs::write(&cfg, SMALL_CUT).unwrap();
    let mut outputs = Vec::new();
    for (threads, sub) in [("1", "a"), ("3", "b")] {
        let out_dir = dir.path().join(sub);
        let out = scalestat()
            .args(["tradeoff-cut-matrix", "--config"])
            .arg(&cfg)
            .args(["--threads", threads, "--out"])
            .arg(&out_dir)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let main = fs::read_to_string(out_dir.join("tradeoff-cut-matrix.csv")).unwrap();
        let timing = fs::read_to_string(out_dir.join("tradeoff-cut-matrix.timing.csv")).unwrap();
        let mut lines = main.lines();
        assert_eq!(lines.next(), Some("# scalestat-schema v1"));
        assert_eq!(lines.next(), Some("experiment,procedure,config,step,work_units,metric,value,status"));
        assert!(timing.starts_with("# scalestat-schema v1\nexperiment,procedure,config,step,wallclock_seconds,task_seconds\n"));
        outputs.push(main);
    }
    assert_eq!(outputs[0], outputs[1]);

    // a different seed changes the Monte Carlo rows
    let out_dir = dir.path().join("c");
    let out = scalestat()
        .args(["tradeoff-cut-matrix", "--config"])
        .arg(&cfg)
        .args(["--seed", "4", "--out"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_ne!(fs::read_to_string(out_dir.join("tradeoff-cut-matrix.csv")).unwrap(), outputs[0]);
}
