use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_motionfuse"))
}

fn repo(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn data(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(rel)
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = bin().args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_pgm(path: &Path, w: usize, h: usize, px: &[u8]) {
    let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
    bytes.extend_from_slice(px);
    fs::write(path, bytes).unwrap();
}

fn field<'a>(summary: &'a str, key: &str) -> &'a str {
    summary
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("{key} missing from {summary:?}"))
}

#[test]
fn detect_matches_golden_masks() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("run");
    let pattern = data("moving_square/frames/*.pgm");
    let (code, stdout, stderr) = run(&["detect", "--input", s(&pattern), "--out", s(&out), "--min-area", "1"]);
    assert_eq!(code, 0, "{stderr}");
    assert_eq!(field(&stdout, "frames"), "8");
    assert_eq!(field(&stdout, "masks"), "6");
    let golden_dir = data("moving_square/golden");
    let mut golden: Vec<_> = fs::read_dir(&golden_dir).unwrap().map(|e| e.unwrap().file_name()).collect();
    golden.sort();
    assert_eq!(golden.len(), 6);
    for name in golden {
        let want = fs::read(golden_dir.join(&name)).unwrap();
        let got = fs::read(out.join("masks").join(&name)).unwrap();
        assert!(want == got, "{name:?} differs from golden");
    }
    let blobs = fs::read_to_string(out.join("blobs.csv")).unwrap();
    // trailing and leading edge of the square, 2x6 each
    assert_eq!(blobs.lines().count(), 1 + 2 * 6);
    assert!(blobs.lines().skip(1).all(|l| l.split(',').nth(2) == Some("12")));
}

#[test]
fn workers_do_not_change_results() {
    let tmp = TempDir::new().unwrap();
    let pattern = data("moving_square/frames/*.pgm");
    let mut outputs = Vec::new();
    for workers in ["1", "3"] {
        let out = tmp.path().join(workers);
        let (code, _, stderr) = run(&["detect", "--input", s(&pattern), "--out", s(&out), "--workers", workers]);
        assert_eq!(code, 0, "{stderr}");
        outputs.push((
            fs::read_to_string(out.join("blobs.csv")).unwrap(),
            fs::read_to_string(out.join("motion.csv")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn detect_identical_frames_is_quiet() {
    let tmp = TempDir::new().unwrap();
    for k in 0..3 {
        write_pgm(&tmp.path().join(format!("f{k}.pgm")), 4, 4, &[90; 16]);
    }
    let (code, stdout, _) = run(&["detect", "--input", s(&tmp.path().join("*.pgm"))]);
    assert_eq!(code, 0);
    assert_eq!(field(&stdout, "mean_motion_pixels"), "0.000");
}

#[test]
fn detect_error_statuses() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    write_pgm(&dir.join("a0.pgm"), 4, 4, &[0; 16]);
    write_pgm(&dir.join("a1.pgm"), 4, 4, &[0; 16]);
    assert_eq!(run(&["detect", "--input", s(&dir.join("a*.pgm"))]).0, 3);
    assert_eq!(run(&["detect", "--input", s(&dir.join("none*.pgm"))]).0, 3);

    write_pgm(&dir.join("a2.pgm"), 5, 4, &[0; 20]);
    let (code, _, stderr) = run(&["detect", "--input", s(&dir.join("a*.pgm"))]);
    assert_eq!(code, 4, "{stderr}");

    fs::write(dir.join("b0.pgm"), b"P6\n1 1\n255\n\0\0\0").unwrap();
    write_pgm(&dir.join("b1.pgm"), 1, 1, &[0]);
    write_pgm(&dir.join("b2.pgm"), 1, 1, &[0]);
    assert_eq!(run(&["detect", "--input", s(&dir.join("b*.pgm"))]).0, 5);

    let busy = dir.join("busy");
    fs::create_dir(&busy).unwrap();
    fs::write(busy.join("keep"), "x").unwrap();
    let pattern = data("moving_square/frames/*.pgm");
    assert_eq!(run(&["detect", "--input", s(&pattern), "--out", s(&busy)]).0, 2);
    assert_eq!(run(&["detect", "--input", s(&pattern), "--out", s(&busy), "--overwrite"]).0, 0);
    assert_eq!(run(&["detect", "--input", s(&pattern), "--connectivity", "6"]).0, 2);
}

fn bimodal_image(path: &Path, means: (f64, f64), sigma: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (160, 120);
    let px: Vec<u8> = (0..w * h)
        .map(|i| {
            let m = if i % 2 == 0 { means.0 } else { means.1 };
            Normal::new(m, sigma).unwrap().sample(&mut rng).round().clamp(0.0, 255.0) as u8
        })
        .collect();
    write_pgm(path, w, h, &px);
}

#[test]
fn threshold_curve_and_image() {
    let tmp = TempDir::new().unwrap();
    let img = tmp.path().join("bimodal.pgm");
    bimodal_image(&img, (60.0, 180.0), 10.0, 4);
    let out = tmp.path().join("t");
    let (code, stdout, stderr) = run(&["threshold", "--input", s(&img), "--out", s(&out)]);
    assert_eq!(code, 0, "{stderr}");
    let t: u8 = field(&stdout, "threshold").parse().unwrap();
    let x_j: u8 = field(&stdout, "x_j").parse().unwrap();
    let x_r: u8 = field(&stdout, "x_r").parse().unwrap();
    assert!(x_j < t && t < x_r);

    let csv = fs::read_to_string(out.join("curve.csv")).unwrap();
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), (x_r - x_j - 1) as usize);
    let levels: Vec<u8> = rows.iter().map(|r| r[0] as u8).collect();
    assert_eq!(levels, (x_j + 1..x_r).collect::<Vec<_>>());
    // the chosen row is a minimum of the gap between the curves
    let gap = |r: &Vec<f64>| (r[3] - r[2]).abs();
    let best = rows.iter().map(gap).fold(f64::INFINITY, f64::min);
    let chosen = rows.iter().find(|r| r[0] as u8 == t).unwrap();
    assert!(gap(chosen) - best < 1e-6);

    let bin = fs::read(out.join("binarized.pgm")).unwrap();
    let header = b"P5\n160 120\n255\n";
    assert_eq!(&bin[..header.len()], header);
    assert!(bin[header.len()..].iter().all(|&p| p == 0 || p == 255));
}

#[test]
fn threshold_flat_and_symmetric() {
    let tmp = TempDir::new().unwrap();
    let flat = tmp.path().join("flat.pgm");
    write_pgm(&flat, 8, 8, &[128; 64]);
    let (code, _, stderr) = run(&["threshold", "--input", s(&flat)]);
    assert_eq!(code, 6);
    assert!(stderr.contains("no contrast"));

    let sym = tmp.path().join("sym.pgm");
    let px: Vec<u8> = (0..64 * 64).map(|i| if i % 2 == 0 { 28 } else { 228 }).collect();
    write_pgm(&sym, 64, 64, &px);
    let (code, stdout, _) = run(&["threshold", "--input", s(&sym)]);
    assert_eq!(code, 0);
    let t: i32 = field(&stdout, "threshold").parse().unwrap();
    assert!((t - 128).abs() <= 1, "{t}");
}

#[test]
fn simulate_writes_run_directory() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("run");
    let cfg = repo("scenarios/front_walker.toml");
    let (code, stdout, stderr) = run(&["simulate", "--config", s(&cfg), "--out", s(&out), "--ticks", "40", "--dump-frames"]);
    assert_eq!(code, 0, "{stderr}");
    field(&stdout, "time_to_acquire");
    field(&stdout, "lock_fraction");
    for f in ["sim.csv", "pir.csv", "camera.csv", "decisions.csv", "summary.txt"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    assert_eq!(fs::read_dir(out.join("frames")).unwrap().count(), 40);
    assert_eq!(fs::read_dir(out.join("masks")).unwrap().count(), 38);
    assert_eq!(fs::read_dir(out.join("overlays")).unwrap().count(), 40);
    assert_eq!(fs::read_to_string(out.join("sim.csv")).unwrap().lines().count(), 41);
}

#[test]
fn simulate_rejects_bad_configs() {
    let tmp = TempDir::new().unwrap();
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "ticks = 10\n[camera]\nfov_deg = 200.0\n").unwrap();
    let (code, _, stderr) = run(&["simulate", "--config", s(&bad)]);
    assert_eq!(code, 7);
    assert!(stderr.contains("fov_deg"), "{stderr}");

    fs::write(&bad, "ticks = 10\n[camera]\nzoom = 2\n").unwrap();
    let (code, _, stderr) = run(&["simulate", "--config", s(&bad)]);
    assert_eq!(code, 7);
    assert!(stderr.contains("zoom"), "{stderr}");

    assert_eq!(run(&["simulate", "--config", s(&tmp.path().join("missing.toml"))]).0, 5);
}

fn csv_columns(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn seed_changes_only_noise_columns() {
    let tmp = TempDir::new().unwrap();
    // in view from the start, with lossy sensors
    let cfg = tmp.path().join("noisy.toml");
    let mut text = String::from("name = \"noisy\"\nticks = 60\n[person]\nwaypoints = [[4.0, -0.5], [4.0, 2.0]]\nspeed = 1.0\n");
    for axis in [0.0, -120.0, 120.0] {
        text.push_str(&format!("[[sensors]]\naxis_deg = {axis}\nfalse_negative_prob = 0.5\n"));
    }
    fs::write(&cfg, text).unwrap();
    let mut logs = Vec::new();
    for seed in ["1", "2"] {
        let out = tmp.path().join(seed);
        let (code, _, stderr) = run(&["simulate", "--config", s(&cfg), "--out", s(&out), "--seed", seed]);
        assert_eq!(code, 0, "{stderr}");
        logs.push(fs::read_to_string(out.join("sim.csv")).unwrap());
    }
    let (header, a) = csv_columns(&logs[0]);
    let (_, b) = csv_columns(&logs[1]);
    let mut changed = BTreeSet::new();
    for (ra, rb) in a.iter().zip(&b) {
        for (i, (x, y)) in ra.iter().zip(rb).enumerate() {
            if x != y {
                changed.insert(header[i].as_str());
            }
        }
    }
    assert!(changed.contains("infer1"), "{changed:?}");
    // the rate columns are blank unless the command is CameraTracking
    let allowed: BTreeSet<&str> =
        ["infer1", "infer2", "infer3", "rule_index", "command", "pan_rate_dps", "tilt_rate_dps"].into();
    assert!(changed.is_subset(&allowed), "{changed:?}");
}

fn write_logs(dir: &Path, rows: &[(u64, [u8; 3], Option<(f64, f64)>, f64)]) -> (PathBuf, PathBuf) {
    let mut pir = String::from("tick,infer1,infer2,infer3\n");
    let mut cam = String::from("tick,cam_found,centroid_x,centroid_y,image_width,image_height,alpha_deg\n");
    for (t, i, c, alpha) in rows {
        pir.push_str(&format!("{t},{},{},{}\n", i[0], i[1], i[2]));
        match c {
            Some((x, y)) => cam.push_str(&format!("{t},1,{x},{y},320,240,{alpha}\n")),
            None => cam.push_str(&format!("{t},0,,,320,240,{alpha}\n")),
        }
    }
    let (p, c) = (dir.join("pir.csv"), dir.join("camera.csv"));
    fs::write(&p, pir).unwrap();
    fs::write(&c, cam).unwrap();
    (p, c)
}

fn decisions(dir: &Path) -> Vec<Vec<String>> {
    csv_columns(&fs::read_to_string(dir.join("decisions.csv")).unwrap()).1
}

#[test]
fn fuse_handcrafted_logs() {
    let tmp = TempDir::new().unwrap();
    let rows: Vec<_> = (0..10).map(|t| (t, [0, 0, 0], None, 0.0)).collect();
    let (p, c) = write_logs(tmp.path(), &rows);
    let out = tmp.path().join("zero");
    let (code, stdout, _) = run(&["fuse", "--pir", s(&p), "--camera", s(&c), "--out", s(&out)]);
    assert_eq!(code, 0);
    assert_eq!(field(&stdout, "turn_to_zero"), "10");
    assert!(decisions(&out).iter().all(|r| r[6] == "7" && r[7] == "TurnToZero"));

    let rows: Vec<_> = (0..10).map(|t| (t, [1, 0, 0], None, -50.0)).collect();
    let (p, c) = write_logs(tmp.path(), &rows);
    let out = tmp.path().join("right");
    assert_eq!(run(&["fuse", "--pir", s(&p), "--camera", s(&c), "--out", s(&out)]).0, 0);
    assert!(decisions(&out).iter().all(|r| r[6] == "2" && r[7] == "TurnRight"));
}

#[test]
fn fuse_rejects_misaligned_logs() {
    let tmp = TempDir::new().unwrap();
    let rows: Vec<_> = (0..5).map(|t| (t, [0, 0, 0], None, 0.0)).collect();
    let (p, c) = write_logs(tmp.path(), &rows);
    let text = fs::read_to_string(&c).unwrap().replace("\n3,", "\n7,");
    fs::write(&c, text).unwrap();
    assert_eq!(run(&["fuse", "--pir", s(&p), "--camera", s(&c)]).0, 8);

    let shorter: String = fs::read_to_string(&p).unwrap().lines().take(3).map(|l| format!("{l}\n")).collect();
    fs::write(&p, shorter).unwrap();
    assert_eq!(run(&["fuse", "--pir", s(&p), "--camera", s(&c)]).0, 8);
}

#[test]
fn fuse_replays_simulation_decisions() {
    let tmp = TempDir::new().unwrap();
    let sim = tmp.path().join("sim");
    let (pir_log, cam_log) = (sim.join("pir.csv"), sim.join("camera.csv"));
    for name in ["front_walker.toml", "empty.toml"] {
        let cfg = repo(&format!("scenarios/{name}"));
        assert_eq!(run(&["simulate", "--config", s(&cfg), "--out", s(&sim), "--overwrite"]).0, 0);
        for extra in [&[][..], &["--integrate"][..]] {
            let replay = tmp.path().join("replay");
            let mut args = vec![
                "fuse",
                "--pir",
                s(&pir_log),
                "--camera",
                s(&cam_log),
                "--config",
                s(&cfg),
                "--out",
                s(&replay),
                "--overwrite",
            ];
            args.extend_from_slice(extra);
            let (code, _, stderr) = run(&args);
            assert_eq!(code, 0, "{stderr}");
            assert_eq!(
                fs::read_to_string(replay.join("decisions.csv")).unwrap(),
                fs::read_to_string(sim.join("decisions.csv")).unwrap(),
                "{name} {extra:?}"
            );
        }
    }
}
