use std::f64::consts::PI;
use std::path::PathBuf;

use evas_core::clustering::cluster_users;
use evas_core::geometry::{remap, reproject, rotation_from_viewport};
use evas_core::imagery::{downsample_box, load_ppm, paste, save_ppm, to_luma, upsample_bilinear, frame_path};
use evas_core::metrics::{mse, parse_encoded_sizes, Scheme};
use evas_core::pipeline::*;
use evas_core::prediction::{format_trace, HoldLast, Oracle, Sample, Trace};
use evas_core::vbm::{make_vbm, unpack_vbm, vbm_layout};
use evas_core::{Frame, Sampling, Viewport};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

/// The coffee photo at 240×128.
fn small_photo() -> Frame {
    downsample_box(&load_ppm(fixture("images/coffee_960x512.ppm")).unwrap(), 4, 4).unwrap()
}

fn static_trace(id: &str, n: usize, rate: f64, vp: Viewport) -> Trace {
    Trace::new(id, (0..n).map(|i| Sample::new(i as f64 / rate, vp)).collect()).unwrap()
}

fn cfg(n_traces: usize) -> SimConfig {
    let mut c = SimConfig {
        traces: (0..n_traces).map(|i| PathBuf::from(format!("u{i}"))).collect(),
        tick_rate: 10.0,
        sampling: Sampling::Nearest,
        ..SimConfig::default()
    };
    c.prediction.sample_rate = 10.0;
    c.prediction.history = 3;
    c.prediction.horizon = 0.2;
    c.clustering.motion_dt = 0.1;
    c
}

fn frames(n: usize) -> Vec<Frame> {
    vec![small_photo(); n]
}

#[test]
fn single_static_user_is_noise_and_costs_seven_twentyfourths() {
    let tr = static_trace("solo", 8, 10.0, Viewport::new(0.4, 0.1, 0.0));
    let res = simulate(&cfg(1), &frames(8), &[tr], &Oracle, None).unwrap();
    assert!(!res.ticks.is_empty());
    let full = 3 * 240 * 128;
    for t in &res.ticks {
        assert_eq!((t.k, t.noise), (0, 1));
    }
    for r in res.bandwidth.iter().filter(|r| r.scheme == Scheme::Evas) {
        assert_eq!(r.bytes * 24, 7 * full as u64);
        assert_eq!(r.transmissions, 1);
    }
    let s = res.summary.savings(Scheme::Evas, Scheme::NonViewport).unwrap();
    assert!((s - 17.0 / 24.0).abs() < 1e-12);
}

#[test]
fn identical_users_share_one_lossless_stream() {
    let vp = Viewport::new(-1.1, 0.3, 0.0);
    let traces: Vec<Trace> = (0..4).map(|i| static_trace(&format!("u{i}"), 8, 10.0, vp)).collect();
    let mut c = cfg(4);
    c.variants = GroupingRule::ALL.to_vec();
    let res = simulate(&c, &frames(8), &traces, &Oracle, None).unwrap();
    for t in &res.ticks {
        assert_eq!((t.k, t.noise), (1, 0));
    }
    assert!(res.bandwidth.iter().filter(|r| r.scheme == Scheme::Evas).all(|r| r.transmissions == 1));
    assert_eq!(res.quality.len(), 3 * 4 * res.ticks.len());
    assert!(res.quality.iter().all(|q| q.fov_mse == 0.0), "{:?}", res.quality.iter().map(|q| q.fov_mse).fold(0.0, f64::max));
}

#[test]
fn antipodal_users_are_both_noise() {
    let traces = [
        static_trace("a", 8, 10.0, Viewport::new(0.0, 0.0, 0.0)),
        static_trace("b", 8, 10.0, Viewport::new(PI, 0.0, 0.0)),
    ];
    let res = simulate(&cfg(2), &frames(8), &traces, &HoldLast, None).unwrap();
    let full = 3 * 240 * 128u64;
    for t in &res.ticks {
        assert_eq!((t.k, t.noise), (0, 2));
    }
    for r in &res.bandwidth {
        match r.scheme {
            Scheme::Evas | Scheme::EvasUnicast => assert_eq!(r.bytes * 24, 2 * 7 * full),
            Scheme::NonViewport => assert_eq!(r.bytes, 2 * full),
            Scheme::TwoLayer => assert_eq!(r.bytes * 48, 2 * 11 * full),
        }
        assert!(r.transmissions <= r.recipients);
    }
}

#[test]
fn user_at_cluster_center_sees_no_loss() {
    let f = small_photo();
    for vp in [Viewport::new(0.0, 0.0, 0.0), Viewport::new(2.0, -0.4, 0.3)] {
        let vbm = make_vbm(&reproject(&f, &vp, Sampling::Nearest)).unwrap();
        assert_eq!(fov_quality_loss(&vp, &vp, &f, &vbm, Sampling::Nearest).unwrap(), 0.0);
    }
}

#[test]
fn loss_grows_as_the_user_leaves_the_margin() {
    let f = small_photo();
    let center = Viewport::new(0.5, 0.0, 0.0);
    let vbm = make_vbm(&reproject(&f, &center, Sampling::Bilinear)).unwrap();
    let loss = |deg: f64| {
        let user = Viewport::new(0.5 + deg.to_radians(), 0.0, 0.0);
        fov_quality_loss(&user, &center, &f, &vbm, Sampling::Bilinear).unwrap()
    };
    let (near, far) = (loss(10.0), loss(80.0));
    assert!(near < far, "10°: {near}, 80°: {far}");
}

#[test]
fn beyond_the_margin_only_the_base_is_seen() {
    let f = small_photo();
    let layout = vbm_layout(240, 128).unwrap();
    let center = Viewport::new(0.2, 0.0, 0.0);
    let user = Viewport::new(0.2 + PI, 0.0, 0.0);
    let vbm = make_vbm(&reproject(&f, &center, Sampling::Bilinear)).unwrap();
    let loss = fov_quality_loss(&user, &center, &f, &vbm, Sampling::Bilinear).unwrap();

    let base_only = upsample_bilinear(&unpack_vbm(&vbm).unwrap().base, 4, 4).unwrap();
    let truth = true_fov(&f, &user, &layout, Sampling::Bilinear);
    let seen = rendered_fov(&base_only, &user, &center, layout.fov_src, Sampling::Bilinear);
    let expected = mse(&to_luma(&truth), &to_luma(&seen)).unwrap();
    assert_eq!(loss, expected);
    assert!(loss > 0.0);
}

#[test]
fn relative_rotation_composes_in_the_right_order() {
    // With yaw and pitch on both sides the two orders differ; rendering from
    // an unpacked cluster frame must agree with recentering at the user.
    let f = small_photo();
    let layout = vbm_layout(240, 128).unwrap();
    let user = Viewport::new(0.9, 0.35, 0.1);
    let cluster = Viewport::new(0.6, -0.2, 0.0);
    let cluster_frame = reproject(&f, &cluster, Sampling::Bilinear);
    let direct = to_luma(&true_fov(&f, &user, &layout, Sampling::Bilinear));

    let good = to_luma(&rendered_fov(&cluster_frame, &user, &cluster, layout.fov_src, Sampling::Bilinear));
    let (wu, wc) = (rotation_from_viewport(&user), rotation_from_viewport(&cluster));
    let flipped = to_luma(&remap(&cluster_frame, &wu.mul(&wc.transpose()), layout.fov_src, Sampling::Bilinear));
    let (mg, mf) = (mse(&direct, &good).unwrap(), mse(&direct, &flipped).unwrap());
    assert!(mg < 0.25 * mf, "W(c)ᵀW(u): {mg}, W(u)W(c)ᵀ: {mf}");
    assert!(relative_rotation(&user, &cluster).orthonormality_residual() < 1e-12);
}

fn two_groups(n_each: usize, ticks: usize) -> Vec<Trace> {
    let mut out = Vec::new();
    for g in 0..2 {
        for i in 0..n_each {
            let yaw = if g == 0 { -1.5 } else { 1.5 } + 0.02 * i as f64;
            out.push(static_trace(&format!("g{g}u{i}"), ticks, 10.0, Viewport::new(yaw, 0.05 * i as f64, 0.0)));
        }
    }
    out
}

#[test]
fn clustering_beats_one_big_multicast() {
    let traces = two_groups(3, 7);
    let mut c = cfg(6);
    c.variants = GroupingRule::ALL.to_vec();
    c.sampling = Sampling::Bilinear;
    let res = simulate(&c, &frames(7), &traces, &Oracle, None).unwrap();
    let table = variant_table(&res).unwrap();
    let get = |r| table.iter().find(|(x, _)| *x == r).unwrap().1;
    assert!(get(GroupingRule::Joint) < get(GroupingRule::Multicast));
    assert!(get(GroupingRule::Position) < get(GroupingRule::Multicast));
    assert!(res.ticks.iter().all(|t| t.k == 2 && t.noise == 0));
}

#[test]
fn static_users_cluster_the_same_for_any_omega() {
    use evas_core::clustering::{ClusterConfig, UserState};
    let users: Vec<UserState> = two_groups(4, 2)
        .iter()
        .map(|t| UserState {
            user_id: t.user_id.clone(),
            position: t.samples()[0].vp.direction(),
            motion: [0.0; 3],
        })
        .collect();
    let a = cluster_users(&users, &ClusterConfig { omega: 1.0, ..Default::default() }).unwrap();
    let b = cluster_users(&users, &ClusterConfig { omega: 0.8, ..Default::default() }).unwrap();
    assert_eq!(a.labels, b.labels);
}

#[test]
fn encoded_sizes_override_the_raw_proxy() {
    let traces = [static_trace("a", 6, 10.0, Viewport::default())];
    let mut c = cfg(1);
    c.schemes = vec![Scheme::Evas, Scheme::NonViewport];
    c.score_quality = false;
    let first = simulate(&c, &frames(6), &traces, &Oracle, None).unwrap();
    let ticks: Vec<usize> = first.ticks.iter().map(|t| t.tick).collect();
    let mut table = String::from("frame_id,bytes\n");
    for t in &ticks {
        table.push_str(&format!("{t}/evas/u0,100\n{t}/nonviewport/u0,400\n"));
    }
    let sizes = parse_encoded_sizes(&table).unwrap();
    let res = simulate(&c, &frames(6), &traces, &Oracle, Some(&sizes)).unwrap();
    assert_eq!(res.summary.savings(Scheme::Evas, Scheme::NonViewport), Some(0.75));

    let partial = parse_encoded_sizes("frame_id,bytes\n2/evas/u0,5\n").unwrap();
    assert!(matches!(
        simulate(&c, &frames(6), &traces, &Oracle, Some(&partial)),
        Err(PipelineError::MissingEncodedSize(_))
    ));
}

#[test]
fn misaligned_inputs_are_rejected() {
    let short = [static_trace("a", 4, 10.0, Viewport::default())];
    assert!(matches!(simulate(&cfg(1), &frames(6), &short, &Oracle, None), Err(PipelineError::Misaligned(_))));
    let tiny = [static_trace("a", 2, 10.0, Viewport::default())];
    assert!(matches!(simulate(&cfg(1), &frames(2), &tiny, &Oracle, None), Err(PipelineError::Misaligned(_))));
    let odd = vec![Frame::filled(100, 50, [0, 0, 0]).unwrap(); 6];
    let ok = [static_trace("a", 6, 10.0, Viewport::default())];
    assert!(matches!(simulate(&cfg(1), &odd, &ok, &Oracle, None), Err(PipelineError::Vbm(_))));
}

#[test]
fn run_from_files_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let fdir = dir.path().join("frames");
    std::fs::create_dir(&fdir).unwrap();
    let photo = small_photo();
    for i in 0..10 {
        // Shift the picture a little every frame so ticks differ.
        let shifted = paste(&photo, &Frame::filled(12, 8, [i as u8 * 20, 0, 0]).unwrap(), 0, 0).unwrap();
        save_ppm(&shifted, frame_path(&fdir, i + 1)).unwrap();
    }
    let mut names = Vec::new();
    for (i, yaw) in [0.1, 0.15, 2.0].iter().enumerate() {
        let tr = Trace::new(
            format!("u{i}"),
            (0..10).map(|k| Sample::new(k as f64 * 0.1, Viewport::new(yaw + 0.05 * k as f64, 0.0, 0.0))).collect(),
        )
        .unwrap();
        let name = format!("u{i}.csv");
        std::fs::write(dir.path().join(&name), format_trace(&tr)).unwrap();
        names.push(name);
    }
    let conf = format!(
        "frames_dir = frames\ntraces = {}\ntick_rate = 10\nhistory = 3\nhorizon = 0.2\npredictor = lr\nvariants = joint, position, multicast\noutput_dir = out\nseed = 3\n",
        names.join(", ")
    );
    std::fs::write(dir.path().join("sim.conf"), conf).unwrap();
    let cfg = load_sim_config(dir.path().join("sim.conf")).unwrap();

    let a = run_simulation(&cfg).unwrap();
    let b = run_simulation(&cfg).unwrap();
    assert_eq!(a, b);
    write_outputs(&a, dir.path().join("run1")).unwrap();
    write_outputs(&b, dir.path().join("run2")).unwrap();
    for f in ["bandwidth.csv", "quality.csv", "ticks.csv", "summary.txt"] {
        let x = std::fs::read(dir.path().join("run1").join(f)).unwrap();
        let y = std::fs::read(dir.path().join("run2").join(f)).unwrap();
        assert_eq!(x, y, "{f}");
        assert!(!x.is_empty());
    }
    let q = std::fs::read_to_string(dir.path().join("run1/quality.csv")).unwrap();
    assert_eq!(q.lines().count(), 1 + 3 * 3 * a.ticks.len());
    let table = compare_clustering_variants(&cfg).unwrap();
    assert_eq!(table.len(), 3);
}
