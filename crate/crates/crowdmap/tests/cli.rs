use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use crowdmap::dmf::{read_density_map, write_density_map};
use crowdmap::pgm;
use crowdmap_core::DensityMap;
use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crowdmap"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn crowdmap")
}

fn json_line(out: &Output) -> Value {
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    assert_eq!(text.lines().count(), 1, "expected one JSON line, got {text:?}");
    serde_json::from_str(text.trim()).unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Value {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stdout));
    json_line(&out)
}

fn fails(dir: &Path, args: &[&str]) -> Value {
    let out = run(dir, args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    let v = json_line(&out);
    assert!(v["error"]["kind"].is_string() && v["error"]["message"].is_string(), "{v}");
    v
}

const FIVE_HEADS: &str = r#"{"width":96,"height":64,"points":[[10,10],[40,20],[80,50],[20,50],[60,8]]}"#;

fn five_heads(dir: &Path) {
    fs::write(dir.join("ann.json"), FIVE_HEADS).unwrap();
}

#[test]
fn gen_conserves_count() {
    let tmp = tempfile::tempdir().unwrap();
    five_heads(tmp.path());
    let v = ok(tmp.path(), &["gen", "--annotations", "ann.json", "--out", "d.dmf"]);
    assert_eq!(v["n"], 5);
    assert!((v["integral"].as_f64().unwrap() - 5.0).abs() < 1e-9);
    let map = read_density_map(tmp.path().join("d.dmf")).unwrap();
    assert_eq!(map.dims(), (96, 64));
    assert!((map.integral() - 5.0).abs() < 1e-4);
}

#[test]
fn gen_honors_fixed_sigma() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("one.json"), r#"{"width":101,"height":101,"points":[[50,50]]}"#).unwrap();
    ok(tmp.path(), &["gen", "--annotations", "one.json", "--sigma", "fixed:15", "--out", "a.dmf"]);
    ok(tmp.path(), &["gen", "--annotations", "one.json", "--sigma", "fixed:3", "--out", "b.dmf"]);
    let wide = read_density_map(tmp.path().join("a.dmf")).unwrap();
    let narrow = read_density_map(tmp.path().join("b.dmf")).unwrap();
    // Peak of a centered, untruncated Gaussian is 1 / (2 pi sigma^2).
    let peak = |s: f64| 1.0 / (2.0 * std::f64::consts::PI * s * s);
    assert!((wide.get(50, 50) / peak(15.0) - 1.0).abs() < 0.02);
    assert!((narrow.get(50, 50) / peak(3.0) - 1.0).abs() < 0.02);
    // Truncated at ceil(3 sigma): 10 px out is inside the wide kernel only.
    assert!(wide.get(60, 50) > 0.0);
    assert_eq!(narrow.get(60, 50), 0.0);
}

#[test]
fn missing_input_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let v = fails(tmp.path(), &["gen", "--annotations", "nope.json", "--out", "d.dmf"]);
    assert_eq!(v["error"]["kind"], "io");
    assert!(!tmp.path().join("d.dmf").exists());
}

#[test]
fn bad_flags_are_usage_errors() {
    let tmp = tempfile::tempdir().unwrap();
    five_heads(tmp.path());
    let v = fails(tmp.path(), &["gen", "--annotations", "ann.json"]);
    assert_eq!(v["error"]["kind"], "usage");
    let v = fails(tmp.path(), &["gen", "--annotations", "ann.json", "--sigma", "wide", "--out", "d.dmf"]);
    assert_eq!(v["error"]["kind"], "usage");
    let v = fails(tmp.path(), &["gen", "--annotations", "ann.json", "--beta=0", "--out", "d.dmf"]);
    assert_eq!(v["error"]["kind"], "validation");
}

#[test]
fn invalid_annotations_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.json"), r#"{"width":10,"height":10,"points":[[12,3]]}"#).unwrap();
    let v = fails(tmp.path(), &["gen", "--annotations", "bad.json", "--out", "d.dmf"]);
    assert_eq!(v["error"]["kind"], "validation");
    fs::write(tmp.path().join("junk.json"), "{").unwrap();
    let v = fails(tmp.path(), &["gen", "--annotations", "junk.json", "--out", "d.dmf"]);
    assert_eq!(v["error"]["kind"], "json");
}

#[test]
fn attention_modes() {
    let tmp = tempfile::tempdir().unwrap();
    five_heads(tmp.path());
    ok(tmp.path(), &["gen", "--annotations", "ann.json", "--out", "d.dmf"]);
    let v = ok(tmp.path(), &["attention", "--annotations", "ann.json", "--window", "5", "--out", "w.dmf"]);
    assert_eq!(v["pixels"], 96 * 64);
    // Five disjoint 5x5 squares.
    assert_eq!(v["foreground"], 125);
    let v = ok(tmp.path(), &["attention", "--density", "d.dmf", "--out", "t.dmf"]);
    let fg = v["foreground"].as_u64().unwrap();
    assert!(fg > 0 && fg < 96 * 64);
    let w = read_density_map(tmp.path().join("w.dmf")).unwrap();
    assert!(w.values().iter().all(|&x| x == 0.0 || x == 1.0));
    let v = fails(tmp.path(), &["attention", "--annotations", "ann.json", "--window", "4", "--out", "x.dmf"]);
    assert_eq!(v["error"]["kind"], "validation");
}

#[test]
fn localize_empty_map() {
    let tmp = tempfile::tempdir().unwrap();
    write_density_map(&DensityMap::zeros(20, 10), tmp.path().join("z.dmf")).unwrap();
    for method in ["kmeans", "isolated"] {
        let v = ok(tmp.path(), &["localize", "--density", "z.dmf", "--method", method, "--out", "c.json"]);
        assert_eq!(v["K"], 0);
        let text = fs::read_to_string(tmp.path().join("c.json")).unwrap();
        assert_eq!(text, r#"{"K":0,"width":20,"height":10,"centers":[]}"#);
    }
}

#[test]
fn localize_is_seed_deterministic_and_sorted() {
    let tmp = tempfile::tempdir().unwrap();
    five_heads(tmp.path());
    ok(tmp.path(), &["gen", "--annotations", "ann.json", "--out", "d.dmf"]);
    for method in ["kmeans", "isolated"] {
        ok(tmp.path(), &["localize", "--density", "d.dmf", "--method", method, "--seed", "7", "--out", "a.json"]);
        ok(tmp.path(), &["localize", "--density", "d.dmf", "--method", method, "--seed", "7", "--out", "b.json"]);
        let a = fs::read(tmp.path().join("a.json")).unwrap();
        assert_eq!(a, fs::read(tmp.path().join("b.json")).unwrap());
        let doc: Value = serde_json::from_slice(&a).unwrap();
        assert_eq!(doc["K"], 5);
        let masses: Vec<f64> = doc["centers"]
            .as_array()
            .unwrap()
            .iter()
            .map(|c| c[2].as_f64().unwrap())
            .collect();
        assert!(masses.windows(2).all(|w| w[0] >= w[1]));
    }
}

#[test]
fn eval_of_ground_truth_is_perfect() {
    let tmp = tempfile::tempdir().unwrap();
    five_heads(tmp.path());
    let centers = r#"{"K":5,"width":96,"height":64,"centers":[[10,10,1],[40,20,1],[80,50,1],[20,50,1],[60,8,1]]}"#;
    fs::write(tmp.path().join("c.json"), centers).unwrap();
    let v = ok(tmp.path(), &["eval", "--centers", "c.json", "--annotations", "ann.json"]);
    assert_eq!(v["ap"]["10"], 1.0);
    assert_eq!(v["ap"]["20"], 1.0);
    assert_eq!(v["ap"]["40"], 1.0);
    assert_eq!(v["ap"].as_object().unwrap().len(), 3);
    assert_eq!(v["count_est"], 5);
    assert_eq!(v["count_gt"], 5);
    let v = ok(tmp.path(), &["eval", "--centers", "c.json", "--annotations", "ann.json", "--deltas", "8"]);
    assert_eq!(v["ap"].as_object().unwrap().len(), 1);
}

#[test]
fn eval_rejects_mismatched_frames() {
    let tmp = tempfile::tempdir().unwrap();
    five_heads(tmp.path());
    fs::write(tmp.path().join("c.json"), r#"{"K":0,"width":95,"height":64,"centers":[]}"#).unwrap();
    let v = fails(tmp.path(), &["eval", "--centers", "c.json", "--annotations", "ann.json"]);
    assert_eq!(v["error"]["kind"], "validation");
}

#[test]
fn bench_far_apart_heads_are_found() {
    let tmp = tempfile::tempdir().unwrap();
    let args = [
        "bench", "--trials", "1", "--seed", "4", "--width", "600", "--height", "600", "--min-heads", "10",
        "--max-heads", "10", "--sigma", "fixed:2", "--noise", "0", "--csv", "rows.csv",
    ];
    let v = ok(tmp.path(), &args);
    assert_eq!(v["methods"]["isolated"]["ap"]["40"], 1.0);
    assert_eq!(v["methods"]["isolated"]["mae"], 0.0);
    assert!(v["methods"]["kmeans"].is_object());
    let csv = fs::read_to_string(tmp.path().join("rows.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("trial,seed,method,n_gt,k,ap@10,ap@20,ap@40"));
    assert_eq!(lines.count(), 2);
}

#[test]
fn bench_csv_is_seed_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let base = ["bench", "--trials", "4", "--seed", "11", "--components", "2", "--noise", "0.0001"];
    let a: Vec<&str> = base.iter().copied().chain(["--csv", "a.csv"]).collect();
    let b: Vec<&str> = base.iter().copied().chain(["--csv", "b.csv"]).collect();
    assert_eq!(run(tmp.path(), &a).stdout, run(tmp.path(), &b).stdout);
    assert_eq!(
        fs::read(tmp.path().join("a.csv")).unwrap(),
        fs::read(tmp.path().join("b.csv")).unwrap()
    );
    let v = fails(tmp.path(), &["bench", "--trials", "0"]);
    assert_eq!(v["error"]["kind"], "usage");
    let v = fails(tmp.path(), &["bench", "--methods", "kmeans,dbscan"]);
    assert_eq!(v["error"]["kind"], "usage");
}

#[test]
fn viz_renders_valid_pgm() {
    let tmp = tempfile::tempdir().unwrap();
    write_density_map(&DensityMap::zeros(7, 5), tmp.path().join("z.dmf")).unwrap();
    ok(tmp.path(), &["viz", "--density", "z.dmf", "--out", "z.pgm"]);
    let bytes = fs::read(tmp.path().join("z.pgm")).unwrap();
    let (w, h, px) = pgm::parse(&bytes).unwrap();
    assert_eq!((w, h), (7, 5));
    assert!(px.iter().all(|&p| p == 0));

    let map = DensityMap::from_fn(7, 5, |x, y| (x + y) as f64);
    write_density_map(&map, tmp.path().join("m.dmf")).unwrap();
    fs::write(tmp.path().join("c.json"), r#"{"K":1,"width":7,"height":5,"centers":[[1,1,1]]}"#).unwrap();
    ok(tmp.path(), &["viz", "--density", "m.dmf", "--centers", "c.json", "--out", "m.pgm"]);
    let bytes = fs::read(tmp.path().join("m.pgm")).unwrap();
    assert!(bytes.starts_with(b"P5\n7 5\n255\n"));
    let (_, _, px) = pgm::parse(&bytes).unwrap();
    assert_eq!(px[4 * 7 + 6], 255);
    for (x, y) in [(1, 1), (0, 1), (2, 1), (1, 0), (1, 2)] {
        assert_eq!(px[y * 7 + x], 255);
    }
    assert_eq!(px[2 * 7 + 2], (4.0f64 / 10.0 * 255.0).round() as u8);
}

#[test]
fn losses_report() {
    let tmp = tempfile::tempdir().unwrap();
    five_heads(tmp.path());
    ok(tmp.path(), &["gen", "--annotations", "ann.json", "--out", "gt.dmf"]);
    ok(tmp.path(), &["attention", "--annotations", "ann.json", "--out", "att.dmf"]);
    let v = ok(
        tmp.path(),
        &["losses", "--pred", "gt.dmf", "--gt", "gt.dmf", "--pred-attention", "att.dmf", "--gt-attention", "att.dmf", "--epoch", "3"],
    );
    for key in ["mse", "sal_max", "sal_avg", "msdlc", "ssim", "attention", "total", "weighted_mse"] {
        let x = v[key].as_f64().unwrap_or_else(|| panic!("missing {key}"));
        assert!((0.0..=1e-9).contains(&x), "{key} = {x}");
    }
    let v = ok(tmp.path(), &["losses", "--pred", "gt.dmf", "--gt", "att.dmf"]);
    assert!(v["mse"].as_f64().unwrap() > 0.0);
    assert!(v.get("attention").is_none());

    write_density_map(&DensityMap::zeros(8, 8), tmp.path().join("small.dmf")).unwrap();
    let v = fails(tmp.path(), &["losses", "--pred", "small.dmf", "--gt", "gt.dmf"]);
    assert_eq!(v["error"]["kind"], "validation");
    fs::write(tmp.path().join("bad.dmf"), b"DMF2\0\0\0\0\0\0\0\0").unwrap();
    let v = fails(tmp.path(), &["losses", "--pred", "bad.dmf", "--gt", "gt.dmf"]);
    assert_eq!(v["error"]["kind"], "format");
}
