use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use irpf::review::ReviewBundle;
use irpf::SqiReport64;
use tempfile::TempDir;

fn irpf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_irpf"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Short synthetic corpus shared by the tests: 120 s, 2 s epochs.
fn synth(dir: &Path, seed: u64) -> Output {
    irpf(&[
        "synth",
        "--length",
        "120",
        "--duration",
        "2",
        "--seed",
        &seed.to_string(),
        "--out",
        path(dir),
    ])
}

fn lines(p: &Path) -> usize {
    fs::read_to_string(p).unwrap().lines().count()
}

#[test]
fn synth_is_deterministic_and_uses_the_full_montage() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    assert!(synth(a.path(), 7).status.success());
    assert!(synth(b.path(), 7).status.success());
    for f in ["recording.csv", "labels.txt", "field.json", "events.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let header = fs::read_to_string(a.path().join("recording.csv")).unwrap();
    let header = header.lines().next().unwrap();
    assert_eq!(header.split(',').count(), 21);
    assert_eq!(lines(&a.path().join("labels.txt")), 60);
}

#[test]
fn synth_rejects_a_full_mix() {
    let dir = TempDir::new().unwrap();
    let out = irpf(&["synth", "--artifacts", "1.0", "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.trim_end().lines().count(), 1);
}

#[test]
fn reject_writes_one_mask_line_per_epoch_for_each_method() {
    let dir = TempDir::new().unwrap();
    assert!(synth(dir.path(), 1).status.success());
    let rec = dir.path().join("recording.csv");
    let config = dir.path().join("field.json");
    for method in ["irpf", "rpf", "rp"] {
        let out_dir = dir.path().join(method);
        let out = irpf(&[
            "reject",
            path(&rec),
            "--config",
            path(&config),
            "--rate",
            "200",
            "--duration",
            "2",
            "--method",
            method,
            "--out",
            path(&out_dir),
        ]);
        assert!(out.status.success(), "{method}: {}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(lines(&out_dir.join("mask.txt")), 60, "{method}");
        let report: SqiReport64 =
            serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
        assert_eq!(report.method.as_str(), method);
        assert_eq!(report.sqi.len(), 60);
        let timing: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out_dir.join("timing.json")).unwrap()).unwrap();
        assert_eq!(timing["n_epochs"], 60);
        assert!(timing["per_epoch_ms"].as_f64().unwrap() > 0.0);
    }
}

#[test]
fn rp_threshold_flag_is_honored() {
    let dir = TempDir::new().unwrap();
    assert!(synth(dir.path(), 2).status.success());
    let rec = dir.path().join("recording.csv");
    let run = |z: &str, sub: &str| {
        let out_dir = dir.path().join(sub);
        let out = irpf(&[
            "reject", path(&rec), "--rate", "200", "--duration", "2", "--method", "rp", "--z-th", z, "--out",
            path(&out_dir),
        ]);
        assert!(out.status.success());
        let report: SqiReport64 =
            serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
        report
    };
    let default = run("2.0", "a");
    let strict = run("100", "b");
    // Upper-tail p of z = 2.
    assert!((default.threshold - 0.022_750_131_948_179_2).abs() < 1e-12);
    // A huge z threshold leaves only the gate rejecting.
    assert_eq!(strict.rejected, strict.gate_rejected);
    assert!(default.n_rejected() >= strict.n_rejected());
}

#[test]
fn reject_reports_input_errors_with_exit_2() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.csv");
    let out = irpf(&["reject", path(&missing), "--rate", "200", "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(String::from_utf8(out.stderr).unwrap().trim_end().lines().count(), 1);

    assert!(synth(dir.path(), 3).status.success());
    let rec = dir.path().join("recording.csv");
    let bad = dir.path().join("bad.json");
    fs::write(
        &bad,
        r#"{"potatoes":[{"channels":["Cz","X9"],"band_low":1.0,"band_high":20.0,"distance":"riemannian"}]}"#,
    )
    .unwrap();
    let out = irpf(&["reject", path(&rec), "--config", path(&bad), "--rate", "200", "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("X9"));

    let out = irpf(&["reject", path(&rec), "--rate", "200", "--duration", "1000", "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn too_few_clean_epochs_exits_3() {
    // Twelve 1 s epochs, eight of them with a large spike: four survive the
    // gate, one short of what a potato needs.
    let dir = TempDir::new().unwrap();
    let mut state = 12345u64;
    let mut noise = move || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let mut csv = String::from("Fp1,Fp2,Cz\n");
    for t in 0..12 * 200 {
        let spike = t / 200 < 8 && t % 200 == 100;
        let row: Vec<String> = (0..3)
            .map(|_| if spike { 1e4 } else { 10.0 * noise() }.to_string())
            .collect();
        csv += &(row.join(",") + "\n");
    }
    let rec = dir.path().join("spiky.csv");
    fs::write(&rec, csv).unwrap();
    let out = irpf(&["reject", path(&rec), "--rate", "200", "--duration", "1", "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8(out.stderr).unwrap().contains("survive"));
}

#[test]
fn eval_fixture_and_errors() {
    let dir = TempDir::new().unwrap();
    // tp = 8, fn = 2, fp = 1, tn = 9.
    let truth = "1\n".repeat(10) + &"0\n".repeat(10);
    let mask = "1\n".repeat(8) + "0\n0\n1\n" + &"0\n".repeat(9);
    let t = dir.path().join("truth.txt");
    let m = dir.path().join("mask.txt");
    let out_json = dir.path().join("metrics.json");
    fs::write(&t, &truth).unwrap();
    fs::write(&m, &mask).unwrap();
    let out = irpf(&["eval", path(&m), path(&t), "--out", path(&out_json)]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out_json).unwrap()).unwrap();
    // Oracle: precision 8/9, recall 8/10, F1 = 16/19.
    assert!((v["metrics"]["f1"].as_f64().unwrap() - 16.0 / 19.0).abs() < 1e-12);
    assert!((v["metrics"]["precision"].as_f64().unwrap() - 8.0 / 9.0).abs() < 1e-12);
    assert_eq!(v["counts"]["tp"], 8);
    let printed: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(printed, v);

    let out = irpf(&["eval", path(&t), path(&t)]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    for k in ["recall", "specificity", "precision", "f1"] {
        assert_eq!(v["metrics"][k], 1.0, "{k}");
    }

    let short = dir.path().join("short.txt");
    fs::write(&short, "1\n0\n").unwrap();
    assert_eq!(irpf(&["eval", path(&short), path(&t)]).status.code(), Some(2));
    let empty = dir.path().join("empty.txt");
    fs::write(&empty, "").unwrap();
    assert_eq!(irpf(&["eval", path(&m), path(&empty)]).status.code(), Some(2));
}

#[test]
fn export_review_bundle_matches_reject() {
    let dir = TempDir::new().unwrap();
    assert!(synth(dir.path(), 4).status.success());
    let rec = dir.path().join("recording.csv");
    let labels = dir.path().join("labels.txt");
    let bundle_path = dir.path().join("review/bundle.json");
    let common = ["--rate", "200", "--duration", "2"];
    let mut args = vec!["export-review", path(&rec)];
    args.extend(common);
    args.extend(["--labels", path(&labels), "--out", path(&bundle_path)]);
    let out = irpf(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let bundle = ReviewBundle::from_json(&fs::read_to_string(&bundle_path).unwrap()).unwrap();

    assert_eq!(bundle.sqi.len(), 60);
    assert_eq!(bundle.channel_names.len(), 21);
    assert!(bundle.sorted_order.windows(2).all(|w| bundle.sqi[w[0]] <= bundle.sqi[w[1]]));
    if let Some(k) = bundle.knee_index {
        assert_eq!(bundle.sqi[bundle.sorted_order[k]], bundle.suggested_threshold);
    }
    assert!(bundle.waveforms.iter().flatten().all(|ch| ch.len() <= 256));
    let truth = fs::read_to_string(&labels).unwrap();
    let embedded: Vec<String> = bundle.labels.clone().unwrap().iter().map(u8::to_string).collect();
    assert_eq!(embedded.join("\n") + "\n", truth);

    let mut args = vec!["reject", path(&rec)];
    args.extend(common);
    let out_dir = dir.path().join("irpf");
    args.extend(["--out", path(&out_dir)]);
    assert!(irpf(&args).status.success());
    let mask: Vec<u8> = fs::read_to_string(out_dir.join("mask.txt"))
        .unwrap()
        .lines()
        .map(|l| l.parse().unwrap())
        .collect();
    assert_eq!(bundle.default_mask(), mask);
}
