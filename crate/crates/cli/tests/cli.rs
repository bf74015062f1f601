use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn molgrad(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_molgrad"))
        .args(args)
        .arg("--output-dir")
        .arg(out)
        .env_remove("MOLGRAD_OUT")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    names
}

fn summary(dir: &Path, name: &str) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

#[test]
fn gen_signal_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = molgrad(
            &["gen-signal", "--n", "256", "--pieces", "8", "--seed", "7"],
            d.path(),
        );
        assert_eq!(code(&o), 0);
    }
    let name = "gen-signal-x_true-7.csv";
    let x = fs::read(a.path().join(name)).unwrap();
    assert_eq!(x, fs::read(b.path().join(name)).unwrap());
    assert_eq!(String::from_utf8(x).unwrap().lines().count(), 256);
}

#[test]
fn manifest_rerun_is_bit_identical() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let o = molgrad(
        &["disagree", "--iters", "500", "--seed", "4", "--gnuplot"],
        first.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = first.path().join("disagree-manifest.json");
    let o = molgrad(
        &[
            "disagree",
            "--config",
            manifest.to_str().unwrap(),
            "--gnuplot",
        ],
        second.path(),
    );
    assert_eq!(code(&o), 0);
    let names = listing(first.path());
    assert_eq!(names, listing(second.path()));
    for n in &names {
        assert_eq!(
            fs::read(first.path().join(n)).unwrap(),
            fs::read(second.path().join(n)).unwrap(),
            "{n} differs"
        );
    }
}

#[test]
fn solve_pd_writes_trace_solution_and_manifest() {
    let d = tempfile::tempdir().unwrap();
    let o = molgrad(&["solve-pd", "--max-iter", "200"], d.path());
    assert_eq!(code(&o), 0);
    assert_eq!(
        listing(d.path()),
        [
            "solve-pd-manifest.json",
            "solve-pd-trace-0.csv",
            "solve-pd-x-0.csv"
        ]
    );
    let trace = fs::read_to_string(d.path().join("solve-pd-trace-0.csv")).unwrap();
    assert!(trace.starts_with("iter,residual,objective,discrepancy\n"));
}

#[test]
fn derive_params_prints_without_writing() {
    let d = tempfile::tempdir().unwrap();
    let o = molgrad(&["solve-pd", "--derive-params"], d.path());
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["sigma"].as_f64().unwrap() > 0.0);
    assert!(v["tau"].as_f64().unwrap() > 0.0);
    assert!(listing(d.path()).is_empty());
}

#[test]
fn exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let run = |args: &[&str]| code(&molgrad(args, d.path()));
    assert_eq!(run(&["solve-fbs", "--mu", "50"]), 3);
    assert_eq!(run(&["solve-pd", "--sigma", "10"]), 3);
    assert_eq!(run(&["certify", "--denoiser", "hard"]), 2);
    assert_eq!(
        run(&[
            "certify",
            "--denoiser",
            "firm",
            "--lambda1",
            "3",
            "--lambda2",
            "2"
        ]),
        2
    );
    assert_eq!(run(&["gen-signal", "--n", "4", "--pieces", "9"]), 2);
    assert_eq!(run(&["no-such-command"]), 2);
    assert_eq!(
        run(&[
            "certify",
            "--denoiser",
            "garrote",
            "--lambda",
            "1",
            "--n-pairs",
            "500"
        ]),
        0
    );
}

#[test]
fn failed_runs_leave_no_output() {
    let d = tempfile::tempdir().unwrap();
    let o = molgrad(&["solve-fbs", "--mu", "50"], d.path());
    assert_eq!(code(&o), 3);
    assert!(listing(d.path()).is_empty());
}

#[test]
fn certify_reads_weights_and_config() {
    let d = tempfile::tempdir().unwrap();
    let w = d.path().join("w.csv");
    fs::write(&w, "1,0\n0,2\n").unwrap();
    let out = d.path().join("out");
    let o = molgrad(
        &[
            "certify",
            "--denoiser",
            "tied-relu",
            "--weights",
            w.to_str().unwrap(),
            "--n-pairs",
            "2000",
        ],
        &out,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let cfg = d.path().join("cfg.json");
    fs::write(&cfg, r#"{"denoiser": {"name": "firm", "lambda1": 1.0, "lambda2": 2.0}, "domain_dim": 2, "n_pairs": 200}"#).unwrap();
    let o = molgrad(&["certify", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(code(&o), 0);
}

#[test]
fn output_dir_falls_back_to_env() {
    let d = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_molgrad"))
        .args(["gen-signal", "--seed", "2"])
        .env("MOLGRAD_OUT", d.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(d.path().join("gen-signal-x_true-2.csv").exists());
    assert!(d.path().join("gen-signal-manifest.json").exists());
}

#[test]
fn unknown_config_keys_are_rejected() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("cfg.json");
    fs::write(&cfg, r#"{"pieces": 4, "typo": 1}"#).unwrap();
    let o = molgrad(&["gen-signal", "--config", cfg.to_str().unwrap()], d.path());
    assert_eq!(code(&o), 2);
    let other = d.path().join("m.json");
    fs::write(&other, r#"{"command": "sweep", "config": {}}"#).unwrap();
    let o = molgrad(
        &["gen-signal", "--config", other.to_str().unwrap()],
        d.path(),
    );
    assert_eq!(code(&o), 2);
}

#[test]
fn agreement_command_desk_summary() {
    let d = tempfile::tempdir().unwrap();
    let o = molgrad(&["verify-theorem3"], d.path());
    assert_eq!(code(&o), 0);
    let s = summary(d.path(), "agreement-summary-0.json");
    assert!(s["final_joint_discrepancy"].as_f64().unwrap() <= 1e-6);
    let curve = fs::read_to_string(d.path().join("agreement-joint-0.csv")).unwrap();
    assert_eq!(curve.lines().count(), 10_002);
}

#[test]
fn sweep_summary_prefers_firm() {
    let d = tempfile::tempdir().unwrap();
    let o = molgrad(&["sweep", "--trials", "6", "--max-iter", "2000"], d.path());
    assert_eq!(code(&o), 0);
    let s = summary(d.path(), "sweep-summary-0.json");
    assert!(s["best_firm"].as_f64().unwrap() <= s["best_l1"].as_f64().unwrap());
    assert!(d.path().join("sweep-firm-0.csv").exists());
    assert!(d.path().join("sweep-l1-0.csv").exists());
}
