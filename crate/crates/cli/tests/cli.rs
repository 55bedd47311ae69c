use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn hk(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hk"))
        .args(args)
        .current_dir(dir)
        .env_remove("HK_JOBS")
        .output()
        .expect("hk runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit status")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn simulate_fragmentation_example() {
    let dir = tempfile::tempdir().unwrap();
    let o = hk(
        dir.path(),
        &[
            "simulate",
            "--n",
            "6",
            "--opinions",
            "0,0,1,2,3,3",
            "--steps",
            "1",
            "--mode",
            "rational",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = rows(&dir.path().join("traj.csv"));
    assert_eq!(r[0], ["t", "i", "opinion_lo", "opinion_hi"]);
    let second: Vec<&str> = r
        .iter()
        .filter(|row| row[0] == "1")
        .map(|row| row[2].as_str())
        .collect();
    assert_eq!(second, ["1/3", "1/3", "3/4", "9/4", "8/3", "8/3"]);
    assert!(r.iter().skip(1).all(|row| row[2] == row[3]));

    let m = json(&dir.path().join("traj.csv.manifest.json"));
    assert_eq!(m["subcommand"], "simulate");
    assert_eq!(m["config"]["arith.mode"], "rational");
    assert_eq!(m["outputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn simulate_writes_envelopes() {
    let dir = tempfile::tempdir().unwrap();
    let o = hk(
        dir.path(),
        &[
            "simulate",
            "--n",
            "11",
            "--L",
            "2",
            "--steps",
            "3",
            "--envelope",
            "env.csv",
            "--eps",
            "1/50",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let env = rows(&dir.path().join("env.csv"));
    assert_eq!(env[0], ["t", "i", "e_l", "e_r"]);
    let traj = rows(&dir.path().join("traj.csv"));
    assert_eq!(env.len(), traj.len());
    let m = json(&dir.path().join("traj.csv.manifest.json"));
    assert_eq!(m["outputs"].as_array().unwrap().len(), 2);
    assert_eq!(m["arith"]["bits"], 128);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.conf"),
        "# small campaign\nsample.n = 300\nsample.L = 0.5\nsample.trials = 4\nsample.seed = 3\n",
    )
    .unwrap();
    let o = hk(dir.path(), &["--config", "run.conf", "sample", "--trials", "6"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = rows(&dir.path().join("mc.csv"));
    assert_eq!(r[0], ["trial", "clusters", "freeze_t", "diameter_final"]);
    assert_eq!(r.len(), 7);
    assert!(r[1..].iter().all(|row| row[1] == "1"));
    let m = json(&dir.path().join("mc.csv.manifest.json"));
    assert_eq!(m["config"]["sample.trials"], "6");
    assert_eq!(m["config"]["sample.n"], "300");
    assert_eq!(m["summary"]["consensus_fraction"], 1.0);
}

#[test]
fn malformed_input_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&hk(dir.path(), &["simulate", "--bogus"])), 1);
    assert_eq!(code(&hk(dir.path(), &["certify-grid", "--n", "11"])), 1);
    assert_eq!(
        code(&hk(dir.path(), &["simulate", "--n", "3", "--opinions", "0,x,1"])),
        1
    );
    std::fs::write(dir.path().join("bad.conf"), "sample.L 3\n").unwrap();
    assert_eq!(code(&hk(dir.path(), &["--config", "bad.conf", "sample"])), 1);
    std::fs::write(dir.path().join("typo.conf"), "sample.L = 3\nsample.trails = 4\n").unwrap();
    assert_eq!(code(&hk(dir.path(), &["--config", "typo.conf", "sample"])), 1);
    // certificates refuse uncertified arithmetic
    let o = hk(
        dir.path(),
        &["certify-l6", "--n", "101", "--t0", "1", "--mode", "float"],
    );
    assert_eq!(code(&o), 1);
    assert_eq!(code(&hk(dir.path(), &["--help"])), 0);
}

#[test]
fn verdicts_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = hk(
        dir.path(),
        &[
            "certify-grid",
            "--l-lo",
            "0.1",
            "--l-hi",
            "0.9",
            "--n",
            "101",
            "--eps",
            "1/20",
            "--delta",
            "1/20",
            "--steps",
            "2",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let c = json(&dir.path().join("cert.json"));
    assert_eq!(c["verdict"], "Certified");
    assert_eq!(c["criterion"], "grid");
    assert_eq!(c["arith"]["mode"], "ball");

    // a wide profile never gets the extremist envelopes under delta in one step
    let o = hk(
        dir.path(),
        &[
            "certify-grid",
            "--l-lo",
            "3",
            "--l-hi",
            "3.1",
            "--n",
            "101",
            "--eps",
            "1/20",
            "--steps",
            "1",
            "--out",
            "wide.json",
        ],
    );
    assert_eq!(code(&o), 2);
    assert_eq!(json(&dir.path().join("wide.json"))["verdict"], "Inconclusive");

    let o = hk(
        dir.path(),
        &["certify-l6", "--n", "1001", "--t0", "2", "--out", "l6.json"],
    );
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stdout));
    let c = json(&dir.path().join("l6.json"));
    assert_eq!(c["verdict"], "Refuted");
    assert!(c["evidence"]["inequalities"]
        .as_array()
        .unwrap()
        .iter()
        .any(|q| q["name"] == "diameter_with_envelope"));
}

#[test]
fn replay_reproduces_exact_runs_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let o = hk(
        dir.path(),
        &[
            "simulate", "--n", "15", "--L", "5/2", "--steps", "6", "--mode", "rational", "--out", "a.csv",
        ],
    );
    assert_eq!(code(&o), 0);
    let o = hk(dir.path(), &["replay", "a.csv.manifest.json", "--out-dir", "again"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        std::fs::read(dir.path().join("a.csv")).unwrap(),
        std::fs::read(dir.path().join("again/a.csv")).unwrap()
    );
    let a = json(&dir.path().join("a.csv.manifest.json"));
    let b = json(&dir.path().join("again/a.csv.manifest.json"));
    assert_eq!(a["outputs"][0]["sha256"], b["outputs"][0]["sha256"]);
}

#[test]
fn replay_reproduces_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let o = hk(
        dir.path(),
        &["certify-l6", "--n", "1001", "--t0", "4", "--precision-bits", "96"],
    );
    assert_eq!(code(&o), 2);
    let o = hk(dir.path(), &["replay", "cert.json.manifest.json", "--out-dir", "r"]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    let c = json(&dir.path().join("r/cert.json"));
    assert_eq!(c["arith"]["bits"], 96);

    // a tampered manifest no longer reproduces
    let p = dir.path().join("cert.json.manifest.json");
    let text = std::fs::read_to_string(&p)
        .unwrap()
        .replace("\"exit_code\": 2", "\"exit_code\": 0");
    std::fs::write(&p, text).unwrap();
    let o = hk(dir.path(), &["replay", "cert.json.manifest.json", "--out-dir", "r2"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn jobs_do_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let run = |jobs: &str, out: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_hk"))
            .args([
                "sample", "--n", "400", "--L", "3.5", "--trials", "8", "--seed", "11", "--out", out,
            ])
            .current_dir(dir.path())
            .env("HK_JOBS", jobs)
            .output()
            .unwrap();
        assert_eq!(code(&o), 0);
        std::fs::read(dir.path().join(out)).unwrap()
    };
    assert_eq!(run("1", "one.csv"), run("3", "three.csv"));
    let m = json(&dir.path().join("three.csv.manifest.json"));
    assert_eq!(m["config"]["run.jobs"], "3");
}

#[test]
fn oracle_check_small() {
    let dir = tempfile::tempdir().unwrap();
    let o = hk(
        dir.path(),
        &["oracle-check", "--n-max", "40", "--trials", "50", "--seed", "2"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let r = json(&dir.path().join("oracle.json"));
    assert_eq!(r["update_mismatches"], 0);
    assert_eq!(r["closed_form_mismatches"], 0);
    assert_eq!(r["random_profiles"], 50);
}
