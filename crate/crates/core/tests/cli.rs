//! The command-line front end end to end: outputs, reports and exit codes.

use std::path::Path;
use std::process::{Command, Output};

use bec_ilc::harness::ScenarioConfig;
use bec_ilc::inputmap::OptimizerConfig;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bec-ilc")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn quick_config(dir: &Path) -> String {
    let mut cfg = ScenarioConfig::default();
    cfg.lut.n_nu = 11;
    cfg.lut.optimizer = OptimizerConfig { population: 24, generations: 20, max_iterations: 60, ..cfg.lut.optimizer };
    cfg.iterations = 3;
    let p = dir.join("config.json");
    std::fs::write(&p, cfg.to_json()).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn pipeline_runs_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config(dir.path());
    let path = |name: &str| dir.path().join(name).to_str().unwrap().to_string();

    let o = bin(&["build-lut", "--config", &cfg, "--out", &path("lut.json"), "--seed", "5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let o = bin(&["design-kernel", "--config", &cfg, "--out", &path("kernel.csv")]);
    assert_eq!(code(&o), 0);
    let kernel = std::fs::read_to_string(path("kernel.csv")).unwrap();
    assert!(kernel.starts_with("z,kernel"));

    let o = bin(&["groundstate", "--config", &cfg, "--potential", "desired", "--out", &path("gs.csv")]);
    assert_eq!(code(&o), 0);
    std::fs::copy(path("gs.csv"), path("v.csv")).unwrap();
    let o = bin(&["groundstate", "--config", &cfg, "--potential", "file", &path("v.csv"), "--out", &path("gs2.csv")]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let o = bin(&["run", "--config", &cfg, "--lut", &path("lut.json"), "--iterations", "2", "--out", &path("run")]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = bin(&["report", "--in", &path("run")]);
    assert_eq!(code(&o), 0);
    let table = String::from_utf8_lossy(&o.stdout);
    let mismatch: f64 = table
        .lines()
        .find_map(|l| l.strip_prefix("max |recomputed - recorded| = "))
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    assert!(mismatch < 1e-12, "{table}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config(dir.path());
    let out = dir.path().join("x").to_str().unwrap().to_string();

    // configuration errors
    assert_eq!(code(&bin(&["groundstate", "--config", &cfg, "--potential", "flat", "--out", &out])), 1);
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"iterations": 0}"#).unwrap();
    assert_eq!(code(&bin(&["design-kernel", "--config", bad.to_str().unwrap(), "--out", &out])), 1);
    let unknown = dir.path().join("unknown.json");
    std::fs::write(&unknown, r#"{"no_such_field": 1}"#).unwrap();
    assert_eq!(code(&bin(&["design-kernel", "--config", unknown.to_str().unwrap(), "--out", &out])), 1);

    // missing files
    assert_eq!(code(&bin(&["design-kernel", "--config", "/nonexistent/c.json", "--out", &out])), 3);
    assert_eq!(code(&bin(&["report", "--in", "/nonexistent/run"])), 3);

    // a solver starved of steps does not converge
    let mut starved = ScenarioConfig::default();
    starved.solver.max_steps = 10;
    let p = dir.path().join("starved.json");
    std::fs::write(&p, starved.to_json()).unwrap();
    assert_eq!(code(&bin(&["groundstate", "--config", p.to_str().unwrap(), "--potential", "desired", "--out", &out])), 2);
}
