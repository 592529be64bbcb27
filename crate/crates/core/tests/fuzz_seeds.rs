//! Replays the checked-in fuzz corpus through the same checks the fuzz
//! targets make, so parser regressions show up without libFuzzer.

use std::path::{Path, PathBuf};

use evas_core::imagery::{decode_ppm, encode_ppm};
use evas_core::metrics::parse_encoded_sizes;
use evas_core::pipeline::parse_sim_config;
use evas_core::prediction::{decode_models, encode_models, format_trace, gru_forward, parse_trace, resample_trace, TraceFormat};
use evas_core::vbm::{reconstruct, unpack_vbm, VbmFrame, VbmLayout};

fn seeds(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .map(|p| {
            let bytes = std::fs::read(&p).unwrap();
            (p, bytes)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn name(p: &Path) -> String {
    p.file_name().unwrap().to_string_lossy().into_owned()
}

#[test]
fn ppm_decode_seeds() {
    let mut ok = 0;
    for (p, data) in seeds("ppm_decode") {
        if let Ok(frame) = decode_ppm(&data) {
            assert_eq!(decode_ppm(&encode_ppm(&frame)).unwrap(), frame, "{}", name(&p));
            ok += 1;
        }
    }
    assert!(ok >= 2);
}

#[test]
fn vbm_sidecar_seeds() {
    let mut reconstructed = 0;
    for (p, data) in seeds("vbm_sidecar") {
        let split = data.iter().position(|&b| b == b'\n').map_or(data.len(), |i| i + 1);
        let Ok(text) = std::str::from_utf8(&data[..split]) else { continue };
        let Ok(layout) = VbmLayout::from_sidecar(text) else { continue };
        assert_eq!(VbmLayout::from_sidecar(&layout.to_sidecar()).unwrap(), layout, "{}", name(&p));
        let Ok(packed) = decode_ppm(&data[split..]) else { continue };
        if let Ok(vbm) = VbmFrame::new(layout, packed) {
            unpack_vbm(&vbm).unwrap();
            let rec = reconstruct(&vbm).unwrap();
            assert_eq!((rec.width(), rec.height()), (layout.src_w, layout.src_h));
            reconstructed += 1;
        }
    }
    assert_eq!(reconstructed, 1);
}

#[test]
fn trace_parse_seeds() {
    let mut ok = 0;
    for (p, data) in seeds("trace_parse") {
        let Some((&sel, body)) = data.split_first() else { continue };
        let Ok(text) = std::str::from_utf8(body) else { continue };
        let spec = ["t,yaw,pitch,roll", "t,q0,q1,q2,q3", "t,_,q0,q1,q2,q3", "time,roll,yaw,pitch"][sel as usize % 4];
        let fmt = TraceFormat::parse(spec, sel & 4 != 0).unwrap();
        if let Ok(tr) = parse_trace("fuzz", text, &fmt) {
            let back = parse_trace("fuzz", &format_trace(&tr), &TraceFormat::default()).unwrap();
            assert_eq!(back.len(), tr.len(), "{}", name(&p));
            let _ = resample_trace(&tr, 30.0);
            ok += 1;
        }
    }
    assert_eq!(ok, 4);
}

#[test]
fn model_load_seeds() {
    let mut ok = 0;
    for (p, data) in seeds("model_load") {
        let Ok(text) = std::str::from_utf8(&data) else { continue };
        if let Ok(models) = decode_models(text) {
            assert_eq!(decode_models(&encode_models(&models)).unwrap(), models, "{}", name(&p));
            for m in &models {
                gru_forward(m, &vec![0.1; m.history]).unwrap();
            }
            ok += 1;
        }
    }
    assert_eq!(ok, 1);
}

#[test]
fn sim_config_seeds() {
    let mut ok = 0;
    for (_, data) in seeds("sim_config") {
        let Ok(text) = std::str::from_utf8(&data) else { continue };
        if let Ok(cfg) = parse_sim_config(text, Path::new("/fuzz")) {
            cfg.validate().unwrap();
            ok += 1;
        }
    }
    assert_eq!(ok, 3);
}

#[test]
fn encoded_sizes_seeds() {
    let results: Vec<bool> = seeds("encoded_sizes")
        .iter()
        .map(|(_, d)| parse_encoded_sizes(std::str::from_utf8(d).unwrap()).is_ok())
        .collect();
    assert!(results.iter().any(|&r| r));
}
