use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn evas(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evas")).args(args).output().unwrap()
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn frame() -> PathBuf {
    fixtures().join("demo/frames/frame_000001.ppm")
}

#[test]
fn identity_reprojection_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g.ppm");
    let o = evas(&["reproject", s(&frame()), s(&out), "--yaw", "0", "--pitch", "0", "--roll", "0", "--nearest"]);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(std::fs::read(frame()).unwrap(), std::fs::read(&out).unwrap());
}

#[test]
fn negative_angles_parse_and_inverse_restores_whole_pixel_yaw() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.ppm"), dir.path().join("b.ppm"));
    // 120 px wide: 30° is exactly 10 columns.
    let o = evas(&["reproject", s(&frame()), s(&a), "--yaw", "-30", "--degrees", "--nearest"]);
    assert!(o.status.success(), "{o:?}");
    let o = evas(&["reproject", s(&a), s(&b), "--yaw", "-30", "--degrees", "--nearest", "--inverse"]);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(std::fs::read(frame()).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn psnr_of_a_frame_with_itself_is_inf() {
    let o = evas(&["metrics", "psnr", s(&frame()), s(&frame())]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "inf");
    let o = evas(&["metrics", "ssim", s(&frame()), s(&frame())]);
    assert_eq!(stdout(&o).trim(), "1.000000");
}

#[test]
fn pack_unpack_reconstruct_keeps_the_fov() {
    let dir = tempfile::tempdir().unwrap();
    let (vbm, rec, parts) = (dir.path().join("v.ppm"), dir.path().join("r.ppm"), dir.path().join("parts"));
    assert!(evas(&["pack", s(&frame()), s(&vbm)]).status.success());
    assert!(dir.path().join("v.vbm").exists());
    assert!(evas(&["unpack", s(&vbm), s(&parts)]).status.success());
    for p in ["fov.ppm", "base.ppm", "margin.ppm"] {
        assert!(parts.join(p).exists(), "{p}");
    }
    assert!(evas(&["reconstruct", s(&vbm), s(&rec)]).status.success());
    let o = evas(&["metrics", "psnr", s(&frame()), s(&rec)]);
    let v: f64 = stdout(&o).trim().parse().unwrap();
    assert!(v.is_finite() && v > 15.0, "{v}");
}

#[test]
fn usage_errors_exit_one_and_name_the_flag() {
    let o = evas(&["reproject", "a.ppm", "b.ppm", "--yawn", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--yawn"));
    assert_eq!(evas(&["metrics", "psnr", "only-one.ppm"]).status.code(), Some(1));
    assert_eq!(evas(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(evas(&["--help"]).status.code(), Some(0));
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.ppm");
    std::fs::write(&junk, b"P6\n4 4\n255\nshort").unwrap();
    let o = evas(&["metrics", "psnr", s(&junk), s(&frame())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
    assert_eq!(evas(&["pack", s(&dir.path().join("missing.ppm")), s(&junk)]).status.code(), Some(2));
    let odd = dir.path().join("odd.ppm");
    std::fs::write(&odd, [b"P6\n10 4\n255\n".as_slice(), &[0u8; 120]].concat()).unwrap();
    assert_eq!(evas(&["pack", s(&odd), s(&junk)]).status.code(), Some(2));
}

#[test]
fn predict_eval_and_cluster_on_demo_traces() {
    let t = fixtures().join("demo/traces");
    let traces: Vec<String> = (0..6).map(|i| s(&t.join(format!("user{i}.csv"))).to_string()).collect();
    let mut args = vec!["predict", "eval", "--lr", "--history", "5", "--horizon", "0.5", "--rate", "10", "--traces"];
    args.extend(traces.iter().map(String::as_str));
    let o = evas(&args);
    assert!(o.status.success(), "{o:?}");
    let text = stdout(&o);
    assert!(text.starts_with("predictor lr"), "{text}");
    assert_eq!(text.lines().count(), 4);

    let mut args = vec!["cluster", "--t", "1.0", "--rate", "10", "--traces"];
    args.extend(traces.iter().map(String::as_str));
    let o = evas(&args);
    assert!(o.status.success(), "{o:?}");
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "user_id,label,center_yaw,center_pitch");
    assert_eq!(lines.len(), 7);
    let label = |i: usize| lines[i + 1].split(',').nth(1).unwrap().to_string();
    assert_eq!(label(0), label(1));
    assert_eq!(label(3), label(4));
    assert_ne!(label(0), label(3));
    assert_eq!(label(5), "noise");
}

#[test]
fn predict_train_then_eval_with_gru() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.gru");
    let tr = fixtures().join("demo/traces/user5.csv");
    let common = ["--history", "5", "--horizon", "0.5", "--rate", "10", "--traces", s(&tr)];
    let mut args = vec!["predict", "train", "--model", s(&model), "--hidden", "4", "--epochs", "2"];
    args.extend(common);
    let o = evas(&args);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(stdout(&o).lines().count(), 3);
    let mut args = vec!["predict", "eval", "--gru", "--model", s(&model)];
    args.extend(common);
    let o = evas(&args);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).starts_with("predictor gru"));
    assert_eq!(evas(&["predict", "eval", "--gru", "--traces", s(&tr)]).status.code(), Some(1));
}

#[test]
fn simulate_twice_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let conf = fixtures().join("demo/demo.conf");
    let mut outs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let o = evas(&["simulate", "--config", s(&conf), "--output", s(&out)]);
        assert!(o.status.success(), "{o:?}");
        outs.push((out, stdout(&o)));
    }
    assert_eq!(outs[0].1, outs[1].1);
    for f in ["bandwidth.csv", "quality.csv", "ticks.csv", "summary.txt"] {
        let a = std::fs::read(outs[0].0.join(f)).unwrap();
        assert_eq!(a, std::fs::read(outs[1].0.join(f)).unwrap(), "{f}");
    }
    let bad = dir.path().join("bad.conf");
    std::fs::write(&bad, "frames_dir = nowhere\ntraces = none.csv\n").unwrap();
    assert_eq!(evas(&["simulate", "--config", s(&bad)]).status.code(), Some(2));
}
