use std::path::Path;
use std::process::{Command, Output};

use beamkit::design::FirBeamformer;
use beamkit::sim::{ScenarioConfig, SweepReport};
use beamkit::steering::HrtfSet;
use tempfile::TempDir;

fn beamkit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_beamkit"))
        .current_dir(dir)
        .args(args)
        .env_remove("BEAMKIT_THREADS")
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = beamkit(dir, args);
    assert!(out.status.success(), "{args:?} failed:\n{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

/// `(freq, residual, lambda)` rows of the logged design table.
fn logged_table(stderr: &[u8]) -> Vec<(f64, f64, f64)> {
    String::from_utf8_lossy(stderr)
        .lines()
        .filter_map(|line| {
            let fields: Vec<f64> = line.split_once(']')?.1.split_whitespace().map(|t| t.parse().ok()).collect::<Option<_>>()?;
            (fields.len() == 4).then(|| (fields[0], fields[1], fields[2]))
        })
        .collect()
}

fn parse_csv(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn design_writes_a_loadable_beamformer() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(d, &["design", "--model", "freefield", "--gamma-db", "-10", "--look-az", "90", "--wav", "taps.wav"]);
    let text = read(d, "beamformer.json");
    let bf = FirBeamformer::from_json(&text).unwrap();
    assert_eq!(bf.to_json(), text);
    assert_eq!((bf.channels(), bf.length), (5, 1024));

    let wav = std::fs::read(d.join("taps.wav")).unwrap();
    assert_eq!(&wav[..4], b"RIFF");
    assert_eq!(u16::from_le_bytes([wav[22], wav[23]]), 5);
    assert_eq!(wav.len(), 58 + 5 * 1024 * 8);
    let first = f64::from_le_bytes(wav[58..66].try_into().unwrap());
    assert_eq!(first, bf.taps[0][0]);
}

#[test]
fn infeasible_gamma_exits_with_user_error() {
    let tmp = TempDir::new().unwrap();
    let out = beamkit(tmp.path(), &["design", "--model", "freefield", "--gamma-db", "7.1"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("maximum achievable WNG is 6.990 dB"), "{err}");
    assert!(!tmp.path().join("beamformer.json").exists());
}

#[test]
fn looser_bound_logs_lower_residuals() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let strict = ok(d, &["design", "--gamma-db", "-10", "--out", "a.json", "--table", "a.csv"]);
    let loose = ok(d, &["design", "--gamma-db", "-20", "--out", "b.json"]);
    let (a, b) = (logged_table(&strict.stderr), logged_table(&loose.stderr));
    assert_eq!(a.len(), 129);
    assert_eq!(b.len(), 129);
    let (_, table) = parse_csv(&read(d, "a.csv"));
    for ((x, y), row) in a.iter().zip(&b).zip(&table) {
        assert_eq!(x.0, y.0);
        assert!((row[1] - x.1).abs() <= 1e-6 * x.1, "table and log disagree at {} Hz", x.0);
        // At DC every direction has the same response and the design is fixed.
        if x.2 > 0.0 {
            assert!(y.1 < x.1, "{} Hz: {} vs {}", x.0, y.1, x.1);
        } else {
            assert!(y.1 <= x.1 * (1.0 + 1e-9));
        }
    }
}

#[test]
fn beampattern_default_grid_and_round_trip() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(d, &["design"]);
    ok(d, &["beampattern", "--beamformer", "beamformer.json"]);
    let text = read(d, "beampattern.csv");
    let (header, rows) = parse_csv(&text);
    assert_eq!(header.len(), 182);
    assert_eq!(rows.len(), 512);
    assert!(rows.iter().all(|r| r.len() == 182));
    let look = header.iter().position(|h| h == "90").unwrap();
    for r in &rows {
        assert!(r[look].abs() <= 0.5, "{} Hz: {} dB", r[0], r[look]);
    }
    // Reformatting the parsed numbers reproduces the file exactly.
    let mut again = header.join(",") + "\n";
    for r in &rows {
        again += &r.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        again.push('\n');
    }
    assert_eq!(again, text);
}

#[test]
fn missing_inputs_are_user_errors() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    assert_eq!(beamkit(d, &["beampattern", "--beamformer", "missing.json"]).status.code(), Some(2));
    assert_eq!(beamkit(d, &["wng"]).status.code(), Some(2));
    assert_eq!(beamkit(d, &["design", "--model", "hrtf"]).status.code(), Some(2));
    assert_eq!(beamkit(d, &["design", "--geometry", "nope.json"]).status.code(), Some(2));
    assert_eq!(beamkit(d, &["frobnicate"]).status.code(), Some(2));
}

#[test]
fn config_file_supersedes_flags() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    std::fs::write(d.join("c.json"), r#"{"gamma-db": 7.1}"#).unwrap();
    let out = beamkit(d, &["design", "--gamma-db", "-10", "--config", "c.json"]);
    assert_eq!(out.status.code(), Some(2));
    std::fs::write(d.join("c.json"), r#"{"look_az": 60, "out": "cfg.json"}"#).unwrap();
    ok(d, &["--config", "c.json", "design", "--look-az", "90"]);
    let bf = FirBeamformer::load(&d.join("cfg.json")).unwrap();
    for f in [1000.0, 2000.0] {
        let w = bf.response(f);
        let g = beamkit::steering::freefield_response(
            &beamkit::spatial::ArrayGeometry::default_head(),
            &beamkit::spatial::Direction::new(60.0, 90.0).unwrap(),
            f,
        );
        let b: num_complex::Complex64 = w.iter().zip(&g).map(|(a, b)| a * b).sum();
        assert!((b.norm() - 1.0).abs() < 0.06, "config look direction was not used");
    }
    std::fs::write(d.join("c.json"), r#"{"gama_db": 1}"#).unwrap();
    assert_eq!(beamkit(d, &["design", "--config", "c.json"]).status.code(), Some(2));
}

#[test]
fn invalid_thread_count_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_beamkit"))
        .current_dir(tmp.path())
        .args(["wng"])
        .env("BEAMKIT_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn synth_hrtf_writes_one_set_per_distance() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(d, &["synth-hrtf", "--distance", "1.1", "--distance", "2.0", "--out", "sets"]);
    let near_text = read(d, "sets/hrtf_1.1m.json");
    let near = HrtfSet::from_json(&near_text).unwrap();
    let far = HrtfSet::load(&d.join("sets/hrtf_2m.json")).unwrap();
    assert_eq!(near.to_json(), near_text);
    assert!((near.source_distance_m - 1.1f64.hypot(0.73)).abs() < 1e-12);
    assert!((far.source_distance_m - 2.0f64.hypot(0.73)).abs() < 1e-12);
    assert_eq!(near.directions.len(), 72);
    assert_eq!(near.mics, 5);

    // A design from the synthesized set runs end to end through the analysis commands.
    ok(d, &["design", "--model", "hrtf", "--hrtf", "sets/hrtf_1.1m.json", "--out", "h.json"]);
    ok(d, &["wng", "--model", "hrtf", "--hrtf", "sets/hrtf_1.1m.json", "--beamformer", "h.json"]);
    let (_, wng) = parse_csv(&read(d, "wng.csv"));
    assert_eq!(wng.len(), 512);
    assert!(wng.iter().all(|r| r[1] >= -11.0), "FIR WNG below the bound minus 1 dB");
    ok(d, &["beampattern", "--model", "hrtf", "--hrtf", "sets/hrtf_1.1m.json", "--beamformer", "h.json"]);
    let (header, _) = parse_csv(&read(d, "beampattern.csv"));
    assert_eq!(header.len(), 38);
}

#[test]
fn doa_sweep_from_scenario_file_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let mut scen = ScenarioConfig::standard(70.0, 11).unwrap();
    scen.duration_s = 0.5;
    scen.save(&d.join("scen1.json")).unwrap();
    assert_eq!(ScenarioConfig::load(&d.join("scen1.json")).unwrap(), scen);

    ok(d, &["sweep", "--mode", "doa", "--scenario", "scen1.json", "--out", "a"]);
    ok(d, &["sweep", "--mode", "doa", "--scenario", "scen1.json", "--out", "b"]);
    for name in ["sweep_doa.json", "sweep_doa.csv"] {
        assert_eq!(read(d, &format!("a/{name}")), read(d, &format!("b/{name}")));
    }
    let text = read(d, "a/sweep_doa.json");
    let report = SweepReport::from_json(&text).unwrap();
    assert_eq!(report.to_json(), text);
    assert_eq!(report.to_csv(), read(d, "a/sweep_doa.csv"));
    assert_eq!(report.rows.len(), 5);
    assert_eq!(report.seed, 11);
    let steer: Vec<f64> = report.rows.iter().map(|r| r.steer_azimuth_deg).collect();
    assert_eq!(steer, vec![80.0, 85.0, 90.0, 95.0, 100.0]);
}

#[test]
fn averaged_sweep_collapses_to_five_rows() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(d, &["sweep", "--mode", "doa", "--average", "--duration", "0.25"]);
    let report = SweepReport::from_json(&read(d, "sweep_doa.json")).unwrap();
    assert_eq!(report.rows.len(), 5);
    assert!(report.rows.iter().all(|r| r.scenarios == 8 && r.interferer_azimuth_deg.is_none()));
}

#[test]
fn distance_sweep_covers_both_designs() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(d, &["sweep", "--mode", "distance", "--duration", "0.25", "--distance", "1.1", "--distance", "2.0"]);
    let report = SweepReport::from_json(&read(d, "sweep_distance.json")).unwrap();
    assert_eq!(report.mode, "distance");
    let labels: Vec<(&str, &str)> = report.rows.iter().map(|r| (r.design.as_str(), r.error_label.as_str())).collect();
    assert_eq!(
        labels,
        vec![("hrtf", "d=1.1m"), ("hrtf", "d=2m"), ("freefield", "d=1.1m"), ("freefield", "d=2m")]
    );
    assert!(report.rows.iter().all(|r| (r.steer_polar_deg - 56.4303).abs() < 1e-3));
}

#[test]
fn simulate_writes_metrics_and_audio() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(d, &["simulate", "--duration", "0.5", "--design", "freefield", "--doa-error", "5", "--wav", "out.wav"]);
    let first = read(d, "simulate.json");
    let v: serde_json::Value = serde_json::from_str(&first).unwrap();
    assert_eq!(v["design"], "freefield");
    assert_eq!(v["steer_azimuth_deg"], 95.0);
    assert!(v["metrics"]["fwsegsnr_out_db"].as_f64().unwrap().is_finite());
    let wav = std::fs::read(d.join("out.wav")).unwrap();
    assert_eq!(u16::from_le_bytes([wav[22], wav[23]]), 2);
    // Signal, HRIR tail and FIR tail.
    assert_eq!(wav.len(), 58 + 2 * 8 * (8000 + 255 + 1023));
    ok(d, &["simulate", "--duration", "0.5", "--design", "freefield", "--doa-error", "5"]);
    assert_eq!(read(d, "simulate.json"), first);
}
