// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_routeplace"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    let out = bin().current_dir(dir).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "routeplace {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn hash(path: &Path) -> String {
    format!("{:x}", Sha256::digest(std::fs::read(path).unwrap()))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const SPEC: &str = "cells = 150\nnets = 156\n";
const TRAIN: &str = "epochs = 5\nsteps_per_epoch = 2\nlr = 2e-3\n";

#[test]
fn help_exits_zero() {
    let out = bin().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in ["gen", "route", "collect", "train", "predict", "eval", "place", "report"] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
}

#[test]
fn missing_netlist_is_usage_error() {
    let out = bin().args(["place", "--seed", "1", "-o", "x.pl"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--netlist"));
}

#[test]
fn unknown_flag_is_usage_error() {
    let out = bin().args(["gen", "--seed", "1", "-o", "x", "--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_file_is_reported_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .current_dir(dir.path())
        .args(["route", "--netlist", "nope.txt", "--placement", "nope.pl", "-o", "m.cg"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("nope.txt") && err.lines().count() == 1, "{err}");
}

#[test]
fn bad_config_key_is_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "bad.cfg", "no_such_key = 3\n");
    write(d, "spec.txt", SPEC);
    run(d, &["gen", "--spec", "spec.txt", "--seed", "1", "-o", "n.txt"]);
    let out = bin()
        .current_dir(d)
        .args(["place", "--netlist", "n.txt", "--config", "bad.cfg", "--seed", "1", "-o", "p.pl"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no_such_key"));
}

#[test]
fn positive_eta_without_model_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "spec.txt", SPEC);
    run(d, &["gen", "--spec", "spec.txt", "--seed", "1", "-o", "n.txt"]);
    let out = bin()
        .current_dir(d)
        .args(["place", "--netlist", "n.txt", "--eta", "1", "--seed", "1", "-o", "p.pl"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

/// gen → place → collect → train → place with the congestion term → route
/// → predict → eval → report, run twice to check the artifacts repeat.
fn pipeline(d: &Path) -> Vec<(String, String)> {
    write(d, "spec.txt", SPEC);
    write(d, "train.cfg", TRAIN);
    for s in ["1", "2", "3"] {
        run(d, &["gen", "--spec", "spec.txt", "--seed", s, "-o", &format!("n{s}.txt")]);
        run(d, &["collect", "--netlist", &format!("n{s}.txt"), "--seed", s, "-o", &format!("data/n{s}")]);
    }
    run(d, &["place", "--netlist", "n1.txt", "--seed", "7", "-o", "base.pl", "--trace", "base.csv"]);
    run(
        d,
        &["train", "--data", "data", "--config", "train.cfg", "--seed", "3", "-o", "model.ckpt", "--history", "hist.csv"],
    );
    run(
        d,
        &[
            "place", "--netlist", "n1.txt", "--model", "model.ckpt", "--eta", "0.05", "--eta-start-eo", "0.5", "--seed",
            "7", "-o", "rp.pl", "--trace", "rp.csv",
        ],
    );
    run(
        d,
        &[
            "place", "--netlist", "n1.txt", "--model", "model.ckpt", "--inflate", "--feedback", "gnn", "--seed", "7",
            "-o", "infl.pl",
        ],
    );
    run(d, &["route", "--netlist", "n1.txt", "--placement", "base.pl", "-o", "base.cg"]);
    run(d, &["route", "--netlist", "n1.txt", "--placement", "rp.pl", "-o", "rp.cg", "--labels", "rp.labels"]);
    run(d, &["predict", "--model", "model.ckpt", "--netlist", "n1.txt", "--placement", "rp.pl", "-o", "rp.pred"]);
    run(d, &["eval", "--pred", "rp.pred", "--labels", "rp.labels", "--report", "eval.txt"]);
    run(
        d,
        &[
            "report", "--map", "base=base.cg", "--map", "rp=rp.cg", "--trace", "base=base.csv", "--trace", "rp=rp.csv",
            "-o", "report.txt", "--heatmap", "heat",
        ],
    );
    let artifacts = [
        "n1.txt",
        "data/n1/meta.txt",
        "data/n2/snap_0/labels.txt",
        "data/n3/trace.csv",
        "base.pl",
        "base.csv",
        "model.ckpt",
        "hist.csv",
        "rp.pl",
        "infl.pl",
        "base.cg",
        "rp.labels",
        "rp.pred",
        "eval.txt",
        "report.txt",
        "heat/base.ppm",
        "heat/rp.ppm",
    ];
    artifacts.iter().map(|a| (a.to_string(), hash(&d.join(a)))).collect()
}

#[test]
fn full_pipeline_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ha = pipeline(a.path());
    let hb = pipeline(b.path());
    assert_eq!(ha, hb);

    let d = a.path();
    let report = std::fs::read_to_string(d.join("report.txt")).unwrap();
    assert!(report.contains("TOF") && report.contains("diff rp - base"), "{report}");
    assert!(report.contains("trace rp:"), "{report}");
    let eval = std::fs::read_to_string(d.join("eval.txt")).unwrap();
    assert!(eval.lines().any(|l| l.starts_with("pearson ")), "{eval}");
    assert!(std::fs::read_to_string(d.join("heat/rp.ppm")).unwrap().starts_with("P3\n"));
}

#[test]
fn manifests_record_verifiable_hashes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "spec.txt", SPEC);
    run(d, &["gen", "--spec", "spec.txt", "--seed", "4", "-o", "n.txt"]);
    run(d, &["place", "--netlist", "n.txt", "--seed", "4", "-o", "p.pl"]);
    run(d, &["route", "--netlist", "n.txt", "--placement", "p.pl", "-o", "m.cg", "--labels", "l.txt"]);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("m.cg.manifest.json")).unwrap()).unwrap();
    assert_eq!(json["subcommand"], "route");
    assert!(json["wall_time_s"].as_f64().unwrap() >= 0.0);
    let mut checked = 0;
    for key in ["inputs", "outputs"] {
        for (path, h) in json[key].as_object().unwrap() {
            assert_eq!(&hash(&d.join(path)), h.as_str().unwrap(), "{path}");
            checked += 1;
        }
    }
    assert_eq!(checked, 4);
    let gen: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("n.txt.manifest.json")).unwrap()).unwrap();
    assert_eq!(gen["seed"], 4);
    assert!(gen["config"].as_str().unwrap().contains("cells = 150"));
    // no temporaries left behind
    assert!(std::fs::read_dir(d).unwrap().all(|e| !e.unwrap().file_name().to_string_lossy().contains(".tmp")));
}
