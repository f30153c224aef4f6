use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn hglk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hglk")).args(args).output().expect("binary runs")
}

fn error_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("error line on stderr");
    serde_json::from_str(line).expect("stderr carries JSON")
}

#[test]
fn malformed_exponent_is_rejected_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[sim]\np = 0.5\ndt = -1.0\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = hglk(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = error_json(&out);
    assert_eq!(err["error"], "config");
    let msgs = err["messages"].as_array().unwrap();
    assert!(msgs.iter().any(|m| m.as_str().unwrap().contains("p > 1 required")));
    // both problems are reported together
    assert!(msgs.iter().any(|m| m.as_str().unwrap().contains("sim.dt")));
    assert!(!out_dir.exists());
}

#[test]
fn unknown_subcommand_and_unparsable_config() {
    let out = hglk(&["integrate"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"], "config");

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("broken.toml");
    fs::write(&cfg, "[grid\nn = 3").unwrap();
    let out = hglk(&["spectrum", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(error_json(&out)["messages"][0].as_str().unwrap().contains("unparsable"));

    fs::write(&cfg, "[grid]\nn = 100\n[sim]\nweight_a = 2.0\n").unwrap();
    let err = error_json(&hglk(&["spectrum", "--config", cfg.to_str().unwrap()]));
    assert_eq!(err["messages"].as_array().unwrap().len(), 2);
}

fn check_manifest(dir: &Path) -> serde_json::Value {
    let m: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap();
    for f in m["files"].as_array().unwrap() {
        let bytes = fs::read(dir.join(f["name"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&bytes)));
    }
    m
}

#[test]
fn large_data_blows_up_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let out = hglk(&["simulate", "--out", d.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let report: serde_json::Value = serde_json::from_slice(&fs::read(a.join("simulate.json")).unwrap()).unwrap();
    assert_eq!(report["status"]["status"], "blown_up");
    assert_eq!(report["certificate"]["predicted"], true);
    let trace = fs::read_to_string(a.join("trace.csv")).unwrap();
    assert!(trace.starts_with("t,mass,lp1,weighted_mass,dF_dt_measured,rhs_lower,linf\n"));

    let m = check_manifest(&a);
    assert_eq!(m["command"], "simulate");
    assert_eq!(m["seed"], 7);
    let names: Vec<&str> = m["files"].as_array().unwrap().iter().map(|f| f["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["trace.csv", "simulate.json"]);
    for name in ["trace.csv", "simulate.json", "manifest.json"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn json_only_output_skips_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "[grid]\nn = 32\nlength = 8.0\n[output]\nformats = [\"json\"]\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = hglk(&["spectrum", "-c", cfg.to_str().unwrap(), "-o", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!out_dir.join("spectrum.csv").exists());
    let m = check_manifest(&out_dir);
    assert_eq!(m["files"].as_array().unwrap().len(), 1);
}

#[test]
fn default_config_round_trips() {
    let out = hglk(&["default-config"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(hglk_core::app::RunConfig::from_toml(&text).unwrap(), hglk_core::app::RunConfig::default());
}
