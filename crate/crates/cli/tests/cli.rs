use std::path::Path;
use std::process::{Command, Output};

fn rezone(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_rezone")).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "rezone {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn synth_solve_batch_report() {
    let dir = tempfile::tempdir().unwrap();
    let districts = dir.path().join("districts");
    std::fs::create_dir(&districts).unwrap();
    for seed in 0..3 {
        let file = districts.join(format!("d{seed}.json"));
        rezone(&["synth", "--blocks", "9", "--schools", "3", "--level", "0.8", "--seed", &seed.to_string(), "--out", p(&file)]);
    }

    let out = rezone(&[
        "solve", "--district", p(&districts.join("d0.json")), "--tau", "2.0", "--sigma", "1.2", "--time", "5", "--mode", "exact",
    ]);
    let result: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(result["status"], "optimal");
    assert!(result["objective"].as_f64().unwrap() <= result["report"]["dissimilarity_status_quo"].as_f64().unwrap());

    let archives = dir.path().join("archives");
    let out = rezone(&["batch", "--districts", p(&districts), "--out", p(&archives), "--parallel", "2", "--budget", "4"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("3 districts, 0 failed"));
    assert!(archives.join("summary.csv").exists());

    let archive = std::fs::read_dir(&archives)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.file_name().unwrap().to_str().unwrap() != "summary.json" && p.extension().unwrap() == "json")
        .unwrap();
    let text = String::from_utf8(rezone(&["report", "--archive", p(&archive)]).stdout).unwrap();
    assert_eq!(text.lines().count(), 6, "{text}");
    let json: serde_json::Value = serde_json::from_slice(&rezone(&["report", "--archive", p(&archive), "--json"]).stdout).unwrap();
    assert_eq!(json["scenarios"].as_array().unwrap().len(), 4);
}

#[test]
fn lab_assign_and_negbin() {
    let dir = tempfile::tempdir().unwrap();
    let values = dir.path().join("values.csv");
    let mut csv = String::from("district_id,dissimilarity\n");
    for i in 0..30 {
        csv += &format!("d{i:02},{}\n", (i * 37 % 30) as f64 / 30.0);
    }
    std::fs::write(&values, csv).unwrap();
    let out = rezone(&["lab", "assign", "--districts", p(&values), "--seed", "42"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), "district_id,stratum,arm_id");
    assert_eq!(text.lines().count(), 31);

    let counts = dir.path().join("counts.csv");
    let mut csv = String::from("district_id,explorations,dissimilarity\n");
    for i in 0..40 {
        let d = i as f64 / 40.0;
        csv += &format!("d{i},{},{d}\n", 1 + (3.0 * d * d * 4.0) as u32 + i % 3);
    }
    std::fs::write(&counts, csv).unwrap();
    let fit: serde_json::Value =
        serde_json::from_slice(&rezone(&["lab", "negbin", "--counts", p(&counts)]).stdout).unwrap();
    assert_eq!(fit["columns"], serde_json::json!(["intercept", "dissimilarity"]));
    assert!(fit["coefficients"][1].as_f64().unwrap() > 0.0);
    assert_eq!(fit["bonferroni_significant"][0][0], "dissimilarity");
}

#[test]
fn lab_fit_logistic() {
    let dir = tempfile::tempdir().unwrap();
    let design = dir.path().join("design.csv");
    let mut csv = String::from("district,treated,opened,clicked\n");
    for i in 0..400u32 {
        let treated = i % 2;
        // Deterministic pattern: 30% open in control, 60% when treated.
        let opened = u32::from((i / 2) % 10 < 3 + 3 * treated);
        csv += &format!("g{},{treated},{opened},0\n", i % 20);
    }
    std::fs::write(&design, csv).unwrap();
    let fit: serde_json::Value =
        serde_json::from_slice(&rezone(&["lab", "fit", "--design", p(&design), "--outcome", "opened"]).stdout).unwrap();
    assert_eq!(fit["columns"], serde_json::json!(["intercept", "treated"]));
    let expected = (0.6f64 / 0.4).ln() - (0.3f64 / 0.7).ln();
    assert!((fit["coefficients"][1].as_f64().unwrap() - expected).abs() < 1e-6);
}
