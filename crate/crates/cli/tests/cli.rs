use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn rrbsight(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rrbsight"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SIM: &str = r#"{
  "ues": [
    {"crnti": 17921, "profile": "youtube-live-hd"},
    {"crnti": 300, "profile": "voice-messenger"},
    {"profile": "shop-etsy"}
  ],
  "duration_subframes": 1500,
  "seed": 9
}"#;

fn simulate_into(dir: &Path) -> Output {
    let cfg = dir.join("sim.json");
    fs::write(&cfg, SIM).unwrap();
    rrbsight(&["simulate", "--config", p(&cfg), "--out", p(&dir.join("out"))])
}

#[test]
fn simulate_writes_log_truth_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let o = simulate_into(tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = tmp.path().join("out");
    for f in ["dci_log.csv", "rar_events.csv", "ground_truth.csv", "labels.csv", "manifest.json"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let log = fs::read_to_string(out.join("dci_log.csv")).unwrap();
    assert!(log.starts_with("subframe,rnti,direction,bitmap_hex,tbs_bytes\n"));
    assert!(!log.contains('\r'));

    let manifest: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(manifest["seeds"]["simulation"], 9);
    let listed = manifest["artifacts"].as_array().unwrap();
    assert_eq!(listed.len(), 4);
    for a in listed {
        let bytes = fs::read(out.join(a["path"].as_str().unwrap())).unwrap();
        assert_eq!(a["bytes"], bytes.len());
        assert_eq!(a["sha256"].as_str().unwrap().len(), 64);
    }
}

#[test]
fn simulate_is_reproducible_and_seed_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("sim.json");
    fs::write(&cfg, SIM).unwrap();
    let digests = |out: &str, seed: Option<&str>| {
        let mut args = vec!["simulate", "--config", p(&cfg), "--out", out];
        if let Some(s) = seed {
            args.extend(["--seed", s]);
        }
        let o = rrbsight(&args);
        assert_eq!(code(&o), 0);
        let m: Value = serde_json::from_slice(&o.stdout).unwrap();
        m["artifacts"].clone()
    };
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let c = tmp.path().join("c");
    assert_eq!(digests(p(&a), None), digests(p(&b), None));
    assert_ne!(digests(p(&a), None), digests(p(&c), Some("10")));
}

#[test]
fn simulate_rejects_zero_duration() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    fs::write(&cfg, r#"{"ues":[{"profile":"shop-ebay"}],"duration_subframes":0}"#).unwrap();
    let o = rrbsight(&["simulate", "--config", p(&cfg), "--out", p(&tmp.path().join("o"))]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("duration_subframes"));
}

#[test]
fn sniff_bin_one_totals_match_grants() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&simulate_into(tmp.path())), 0);
    let log = tmp.path().join("out/dci_log.csv");
    let trace = tmp.path().join("t.csv");
    let o = rrbsight(&["sniff", "--log", p(&log), "--rnti", "0x4601", "--bin", "1", "--out", p(&trace)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let text = fs::read_to_string(&trace).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("bin_index,ul_bytes,dl_bytes"));
    let mut sniffed = [0u64; 2];
    let mut rows = 0;
    for l in lines {
        let f: Vec<u64> = l.split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(f[0], rows);
        sniffed[0] += f[1];
        sniffed[1] += f[2];
        rows += 1;
    }
    assert_eq!(rows, 1500);

    let mut granted = [0u64; 2];
    for l in fs::read_to_string(&log).unwrap().lines().skip(1) {
        let f: Vec<&str> = l.split(',').collect();
        if f[1] == "17921" {
            granted[usize::from(f[2] == "DL")] += f[4].parse::<u64>().unwrap();
        }
    }
    assert_eq!(sniffed, granted);
    assert!(granted[1] > 0);
}

#[test]
fn sniff_errors() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&simulate_into(tmp.path())), 0);
    let log = tmp.path().join("out/dci_log.csv");
    let out = tmp.path().join("t.csv");
    let unknown = rrbsight(&["sniff", "--log", p(&log), "--rnti", "5", "--out", p(&out)]);
    assert_eq!(code(&unknown), 2);
    assert!(!out.exists());
    let missing = rrbsight(&["sniff", "--log", "/nonexistent/dci.csv", "--rnti", "5", "--out", p(&out)]);
    assert_eq!(code(&missing), 2);
    let bad_rnti = rrbsight(&["sniff", "--log", p(&log), "--rnti", "0xZZ", "--out", p(&out)]);
    assert_eq!(code(&bad_rnti), 1);
}

#[test]
fn rntis_lists_every_ue() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&simulate_into(tmp.path())), 0);
    let o = rrbsight(&["rntis", "--log", p(&tmp.path().join("out/dci_log.csv"))]);
    assert_eq!(code(&o), 0);
    let listed: Vec<String> = String::from_utf8(o.stdout).unwrap().lines().map(String::from).collect();
    assert_eq!(listed.len(), 3);
    assert!(listed.contains(&"300".to_string()) && listed.contains(&"17921".to_string()));
}

const CORPUS: &str = r#"{
  "seed": 5,
  "traces_per_class": 6,
  "duration_subframes": 4000,
  "classes": ["shop-amazon", "voice-zoom", "youtube-vod-fhd", "ott-prime"]
}"#;

#[test]
fn run_then_dataset_then_train_eval() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("corpus.json");
    fs::write(&cfg, CORPUS).unwrap();
    let run = tmp.path().join("run");
    let o = rrbsight(&["run", "--config", p(&cfg), "--out", p(&run), "--trees", "20"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("Random Forest") && stdout.contains("Extra Trees"));

    let manifest: Value = serde_json::from_str(&fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    let artifacts = manifest["artifacts"].as_array().unwrap();
    // 24 traces, features, two models, two reports, the resolved config
    assert_eq!(artifacts.len(), 24 + 6);
    assert!(manifest["stage_seconds"]["features"].is_number());

    let features = tmp.path().join("features.csv");
    let o = rrbsight(&["dataset", "--traces", p(&run.join("traces")), "--out", p(&features)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(fs::read(&features).unwrap(), fs::read(run.join("features.csv")).unwrap());
    let text = fs::read_to_string(&features).unwrap();
    assert!(text.starts_with("label,ul_mean,ul_std,ul_slope,ul_q1,ul_q3,dl_mean,dl_std,dl_slope,dl_q1,dl_q3\n"));
    assert_eq!(text.lines().count(), 1 + 24);

    let again = tmp.path().join("features2.csv");
    rrbsight(&["dataset", "--traces", p(&run.join("traces")), "--out", p(&again)]);
    assert_eq!(fs::read(&features).unwrap(), fs::read(&again).unwrap());

    let averaged = tmp.path().join("avg.csv");
    let o = rrbsight(&["dataset", "--traces", p(&run.join("traces")), "--out", p(&averaged), "--average", "3"]);
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read_to_string(&averaged).unwrap().lines().count(), 1 + 8);

    let mut models = Vec::new();
    for variant in ["rf", "et"] {
        let model = tmp.path().join(format!("{variant}.json"));
        let report = tmp.path().join(format!("{variant}_report.json"));
        let mut args = vec![
            "train-eval",
            "--dataset",
            p(&features),
            "--variant",
            variant,
            "--model",
            p(&model),
            "--report",
            p(&report),
            "--trees",
            "30",
        ];
        if variant == "et" {
            args.push("--serial");
        }
        let o = rrbsight(&args);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        assert!(String::from_utf8(o.stdout).unwrap().contains("macro avg"));
        let r: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
        assert_eq!(r["classes"].as_array().unwrap().len(), 4);
        models.push(fs::read(&model).unwrap());
    }
    assert_ne!(models[0], models[1]);
}

#[test]
fn train_eval_single_class_and_bad_variant() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("one.csv");
    let mut text = String::from("label,ul_mean,ul_std,ul_slope,ul_q1,ul_q3,dl_mean,dl_std,dl_slope,dl_q1,dl_q3\n");
    for i in 0..10 {
        text.push_str(&format!("solo,{i},1,0,1,2,3,1,0,1,2\n"));
    }
    fs::write(&ds, text).unwrap();
    let model = tmp.path().join("m.json");
    let report = tmp.path().join("r.json");
    let o = rrbsight(&[
        "train-eval", "--dataset", p(&ds), "--variant", "rf", "--model", p(&model), "--report", p(&report),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["accuracy"], 1.0);

    let o = rrbsight(&[
        "train-eval", "--dataset", p(&ds), "--variant", "svm", "--model", p(&model), "--report", p(&report),
    ]);
    assert_eq!(code(&o), 1);
}

#[test]
fn dataset_rejects_empty_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let o = rrbsight(&["dataset", "--traces", p(tmp.path()), "--out", p(&tmp.path().join("f.csv"))]);
    assert_eq!(code(&o), 2);
}

#[test]
fn cdf_outputs_end_at_one() {
    let tmp = tempfile::tempdir().unwrap();
    let trace = tmp.path().join("t.csv");
    fs::write(&trace, "bin_index,ul_bytes,dl_bytes\n0,10,400\n1,0,800\n2,30,1200\n3,20,400\n4,50,0\n").unwrap();
    for raw in [false, true] {
        let out = tmp.path().join(if raw { "raw" } else { "norm" });
        let mut args = vec!["cdf", "--trace", p(&trace), "--out", p(&out)];
        if raw {
            args.push("--raw");
        }
        let o = rrbsight(&args);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        for f in ["ul_cdf.csv", "dl_cdf.csv"] {
            let text = fs::read_to_string(out.join(f)).unwrap();
            let mut lines = text.lines();
            assert_eq!(lines.next(), Some("value,probability"));
            let probs: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
            assert!(probs.windows(2).all(|w| w[0] <= w[1]));
            assert_eq!(probs.last(), Some(&1.0));
        }
    }

    let empty = tmp.path().join("empty.csv");
    fs::write(&empty, "bin_index,ul_bytes,dl_bytes\n").unwrap();
    let o = rrbsight(&["cdf", "--trace", p(&empty), "--out", p(&tmp.path().join("e"))]);
    assert_eq!(code(&o), 2);
}

#[test]
fn usage_exit_codes() {
    assert_eq!(code(&rrbsight(&[])), 1);
    assert_eq!(code(&rrbsight(&["--help"])), 0);
    assert_eq!(code(&rrbsight(&["--version"])), 0);
    assert_eq!(code(&rrbsight(&["frobnicate"])), 1);
    let o = rrbsight(&["profiles"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 22);
}
