use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use vinewatch_core::ingest::CATEGORY_COUNT;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vinewatch"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn small_config(dir: &Path) -> PathBuf {
    let p = dir.join("vinewatch.conf");
    std::fs::write(&p, "# quick settings\nsynth_preset = small\nsampling_divisions = 16\nforest_trees = 10\nfolds = 5\n").unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = small_config(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["synth", "--seed", "7", "--config", s(&conf), "--out", s(&a)]);
    ok(&["synth", "--seed", "7", "--config", s(&conf), "--out", s(&b)]);
    for f in ["observations.csv", "landuse.geojson", "elevation.asc", "areas.geojson"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let c = tmp.path().join("c");
    ok(&["synth", "--seed", "8", "--config", s(&conf), "--out", s(&c)]);
    assert_ne!(std::fs::read(a.join("observations.csv")).unwrap(), std::fs::read(c.join("observations.csv")).unwrap());
}

#[test]
fn full_chain_renders_glyphs() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    let conf = small_config(t);
    let c = s(&conf);
    ok(&["synth", "--config", c, "--out", s(&t.join("data"))]);
    let labeling = ok(&["build-instances", "--config", c, "--data", s(&t.join("data")), "--out", s(&t.join("inst"))]);
    assert!(labeling.contains("instances = 300"), "{labeling}");
    assert!(t.join("inst/labeling.txt").exists());
    let inst = t.join("inst/instances.csv");
    ok(&["train", "--config", c, "--instances", s(&inst), "--out", s(&t.join("model.json"))]);
    ok(&["predict", "--config", c, "--model", s(&t.join("model.json")), "--data", s(&t.join("data")), "--out", s(&t.join("cat"))]);
    let catalog = std::fs::read_to_string(t.join("cat/catalog.csv")).unwrap();
    assert!(catalog.starts_with("area_id,month,endangered,certainty\n"));
    assert_eq!(catalog.lines().count(), 1 + 80 * 12);
    ok(&["render", "--config", c, "--catalog", s(&t.join("cat")), "--out", s(&t.join("svg")), "--cell-size-m", "5000", "--radius-px", "24"]);
    let svgs: Vec<_> = std::fs::read_dir(t.join("svg")).unwrap().filter_map(|e| e.ok()).filter(|e| e.path().extension().is_some_and(|x| x == "svg")).collect();
    assert!(!svgs.is_empty());
    let summaries = std::fs::read_to_string(t.join("svg/summaries.csv")).unwrap();
    assert_eq!(summaries.lines().count(), 1 + 12 * svgs.len());

    // same inputs and seed give the same model
    ok(&["train", "--config", c, "--instances", s(&inst), "--out", s(&t.join("model2.json"))]);
    assert_eq!(std::fs::read(t.join("model.json")).unwrap(), std::fs::read(t.join("model2.json")).unwrap());
}

fn separable_instances(path: &Path) {
    let mut text = String::from("station_id,year,month,score,label,height_m");
    for k in 1..=CATEGORY_COUNT {
        text.push_str(&format!(",lu_{k}"));
    }
    text.push('\n');
    let zeros = ",0".repeat(CATEGORY_COUNT - 1);
    for n in 0..60 {
        let positive = n % 3 == 0;
        let height = if positive { 900 + n } else { 100 + n };
        text.push_str(&format!("S{n:03},2015,6,{},{},{height},1{zeros}\n", if positive { 1.0 } else { 0.0 }, positive as u8));
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn evaluate_on_separable_fixture_is_perfect() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = small_config(tmp.path());
    let inst = tmp.path().join("sep.csv");
    separable_instances(&inst);
    let out = tmp.path().join("report");
    let text = ok(&["evaluate", "--config", s(&conf), "--instances", s(&inst), "--out", s(&out)]);
    assert!(text.contains("stacked_ensemble"));
    let csv = std::fs::read_to_string(out.join("kappa_report.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 9);
    for r in rows {
        let kappa: f64 = r.split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(kappa, 1.0, "{r}");
    }
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    // missing input file
    let out = run(&["build-instances", "--data", s(&t.join("nowhere")), "--out", s(&t.join("x"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not found"));
    // malformed config
    let bad = t.join("bad.conf");
    std::fs::write(&bad, "min_radius_px = 2\n").unwrap();
    assert_eq!(run(&["synth", "--config", s(&bad), "--out", s(&t.join("d"))]).status.code(), Some(2));
    // unknown subcommand
    assert_eq!(run(&["explode"]).status.code(), Some(2));
    let conf = small_config(t);
    ok(&["synth", "--config", s(&conf), "--out", s(&t.join("data"))]);
    // catalog with an impossible month
    let corrupt = t.join("cat");
    std::fs::create_dir_all(&corrupt).unwrap();
    std::fs::write(corrupt.join("catalog.csv"), "area_id,month,endangered,certainty\nA,13,1,0.9\n").unwrap();
    std::fs::write(corrupt.join("areas.json"), r#"{"model_fingerprint":"x","areas":[],"warnings":[]}"#).unwrap();
    assert_eq!(run(&["render", "--catalog", s(&corrupt), "--out", s(&t.join("svg"))]).status.code(), Some(2));
    // radius outside the configured range
    let sep = t.join("sep.csv");
    separable_instances(&sep);
    ok(&["train", "--config", s(&conf), "--instances", s(&sep), "--out", s(&t.join("m.json"))]);
    ok(&["predict", "--config", s(&conf), "--model", s(&t.join("m.json")), "--data", s(&t.join("data")), "--out", s(&t.join("good"))]);
    let out = run(&["render", "--catalog", s(&t.join("good")), "--out", s(&t.join("svg")), "--radius-px", "8"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("radius"));
    // output location that cannot be created
    let blocker = t.join("file");
    std::fs::write(&blocker, "").unwrap();
    let out = run(&["synth", "--config", s(&conf), "--out", s(&blocker.join("sub"))]);
    assert_eq!(out.status.code(), Some(1));
}
