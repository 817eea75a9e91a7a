use std::path::Path;
use std::process::{Command, Output};

use harmonic_fem::codec::Payload;
use harmonic_fem::Image;
use tempfile::TempDir;

fn hfem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hfem")).args(args).output().expect("hfem runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_test_image(dir: &Path, name: &str, w: usize, h: usize) -> std::path::PathBuf {
    let f = Image::from_fn(w, h, |x, y| 120.0 + 80.0 * ((x as f64 / 4.0).sin() * (y as f64 / 6.0).cos())).unwrap();
    let path = dir.join(name);
    f.save(&path).unwrap();
    path
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn densify_tonal_decode_round_trip() {
    let dir = TempDir::new().unwrap();
    let input = write_test_image(dir.path(), "in.pgm", 40, 30);
    let (payload, optimised) = (dir.path().join("a.femi"), dir.path().join("b.femi"));
    let (densify_json, tonal_json) = (dir.path().join("d.json"), dir.path().join("t.json"));
    let (recon, decoded) = (dir.path().join("r.pgm"), dir.path().join("dec.pgm"));

    let out = hfem(&[
        "densify",
        "--input",
        s(&input),
        "--density",
        "0.05",
        "--iters",
        "10",
        "--seed",
        "3",
        "--out",
        s(&payload),
        "--report",
        s(&densify_json),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&densify_json);
    assert_eq!(report["m"], 60);
    assert_eq!(report["p"], 60);
    assert_eq!(report["seed"], 3);
    assert!(report["mse_before"].as_f64().unwrap() > 0.0);
    assert!(report["timings"]["spatial"].as_f64().unwrap() >= 0.0);

    let out = hfem(&[
        "tonal",
        "--input",
        s(&input),
        "--payload",
        s(&payload),
        "--out",
        s(&optimised),
        "--reconstruction",
        s(&recon),
        "--report",
        s(&tonal_json),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&tonal_json);
    let (before, after) = (report["mse_before"].as_f64().unwrap(), report["mse_after"].as_f64().unwrap());
    assert!(after <= before + 1e-9, "{before} -> {after}");
    assert_eq!(
        report["payload_bytes"].as_u64().unwrap() as usize,
        std::fs::metadata(&optimised).unwrap().len() as usize
    );

    let out = hfem(&["decode", "--payload", s(&optimised), "--out", s(&decoded)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    // The decoder rebuilds exactly what the tonal step reported for the
    // quantised values.
    let (a, b) = (Image::load(&recon).unwrap(), Image::load(&decoded).unwrap());
    assert_eq!(a.quantized(), b.quantized());
}

#[test]
fn colour_images_are_supported() {
    let dir = TempDir::new().unwrap();
    let planes: Vec<Vec<f64>> = (0..3).map(|c| (0..24 * 20).map(|i| ((i * (c + 3)) % 256) as f64).collect()).collect();
    let input = dir.path().join("in.ppm");
    Image::from_planes(24, 20, &planes).unwrap().save(&input).unwrap();
    let payload = dir.path().join("p.femi");
    let out = hfem(&["densify", "--input", s(&input), "--mask-count", "30", "--iters", "5", "--out", s(&payload)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let p = Payload::decode(&std::fs::read(&payload).unwrap()).unwrap();
    assert_eq!(p.channels(), 3);
    assert_eq!(p.values().len(), 90);
}

#[test]
fn densify_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let input = write_test_image(dir.path(), "in.pgm", 32, 32);
    let run = |name: &str| {
        let path = dir.path().join(name);
        let out = hfem(&[
            "densify",
            "--input",
            s(&input),
            "--density",
            "0.04",
            "--iters",
            "8",
            "--seed",
            "9",
            "--out",
            s(&path),
        ]);
        assert!(out.status.success());
        std::fs::read(path).unwrap()
    };
    assert_eq!(run("a.femi"), run("b.femi"));
}

#[test]
fn bad_density_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let input = write_test_image(dir.path(), "in.pgm", 16, 16);
    let out_path = dir.path().join("p.femi");
    for density in ["0", "1", "-0.5"] {
        let out = hfem(&["densify", "--input", s(&input), &format!("--density={density}"), "--out", s(&out_path)]);
        assert_eq!(out.status.code(), Some(2), "density {density}");
    }
    let out = hfem(&["densify", "--input", s(&input), "--out", s(&out_path)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_path.exists());
}

#[test]
fn missing_input_is_an_io_error() {
    let dir = TempDir::new().unwrap();
    let out = hfem(&["densify", "--input", s(&dir.path().join("nope.pgm")), "--density", "0.1", "--out", "x.femi"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn corrupt_payload_fails() {
    let dir = TempDir::new().unwrap();
    let input = write_test_image(dir.path(), "in.pgm", 16, 16);
    let payload = dir.path().join("p.femi");
    assert!(hfem(&["densify", "--input", s(&input), "--mask-count", "10", "--iters", "3", "--out", s(&payload)])
        .status
        .success());
    let mut bytes = std::fs::read(&payload).unwrap();
    bytes.truncate(bytes.len() - 3);
    std::fs::write(&payload, &bytes).unwrap();
    let out = hfem(&["decode", "--payload", s(&payload), "--out", s(&dir.path().join("o.pgm"))]);
    assert_eq!(out.status.code(), Some(3));

    std::fs::write(&payload, b"not a payload at all, really").unwrap();
    let out = hfem(&["decode", "--payload", s(&payload), "--out", s(&dir.path().join("o.pgm"))]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn tonal_rejects_mismatched_image() {
    let dir = TempDir::new().unwrap();
    let small = write_test_image(dir.path(), "small.pgm", 16, 16);
    let other = write_test_image(dir.path(), "other.pgm", 20, 16);
    let payload = dir.path().join("p.femi");
    assert!(hfem(&["densify", "--input", s(&small), "--mask-count", "10", "--iters", "3", "--out", s(&payload)])
        .status
        .success());
    let out = hfem(&["tonal", "--input", s(&other), "--payload", s(&payload), "--out", s(&dir.path().join("q.femi"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("20x16"));
}

#[test]
fn single_mask_pixel_decodes_to_a_constant() {
    let dir = TempDir::new().unwrap();
    let payload = Payload::new(9, 7, 1, &[31], &[0, 8, 54, 62], &[77]).unwrap();
    let path = dir.path().join("one.femi");
    std::fs::write(&path, payload.encode()).unwrap();
    let out_path = dir.path().join("one.pgm");
    let out = hfem(&["decode", "--payload", s(&path), "--out", s(&out_path)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let img = Image::load(&out_path).unwrap();
    assert!(img.data().iter().all(|&v| v == 77.0));
}

#[test]
fn bench_single_size_has_no_ratios() {
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("bench.json");
    let out = hfem(&["bench", "--sizes", "32", "--report", s(&report)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&report);
    assert_eq!(v["rows"].as_array().unwrap().len(), 1);
    assert!(v["ratios"].as_array().unwrap().is_empty());
    assert_eq!(v["rows"][0]["m"], 41);
}

#[test]
fn bench_reports_ratios_for_resampled_input() {
    let dir = TempDir::new().unwrap();
    let input = write_test_image(dir.path(), "in.pgm", 70, 64);
    let report = dir.path().join("bench.json");
    let out = hfem(&["bench", "--input", s(&input), "--sizes", "16,32,64", "--repeats", "2", "--report", s(&report)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&report);
    let ratios = v["ratios"].as_array().unwrap();
    assert_eq!(ratios.len(), 2);
    assert_eq!(ratios[0]["pixel_ratio"], 4.0);
    let out = hfem(&["bench", "--input", s(&input), "--sizes", "128"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn report_to_stdout() {
    let dir = TempDir::new().unwrap();
    let input = write_test_image(dir.path(), "in.pgm", 16, 16);
    let out = hfem(&[
        "densify",
        "--input",
        s(&input),
        "--mask-count",
        "8",
        "--iters",
        "2",
        "--out",
        s(&dir.path().join("p.femi")),
        "--report",
        "-",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let start = text.find('{').unwrap();
    let v: serde_json::Value = serde_json::from_str(&text[start..]).unwrap();
    assert_eq!(v["n"], 2);
}
