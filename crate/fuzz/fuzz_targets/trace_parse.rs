#![no_main]

use evas_core::prediction::{format_trace, parse_trace, resample_trace, TraceFormat};
use libfuzzer_sys::fuzz_target;

// First byte picks the column mapping; the rest is the file body.
fuzz_target!(|data: &[u8]| {
    let Some((&sel, body)) = data.split_first() else { return };
    let Ok(text) = std::str::from_utf8(body) else { return };
    let spec = ["t,yaw,pitch,roll", "t,q0,q1,q2,q3", "t,_,q0,q1,q2,q3", "time,roll,yaw,pitch"][sel as usize % 4];
    let fmt = TraceFormat::parse(spec, sel & 4 != 0).unwrap();
    if let Ok(tr) = parse_trace("fuzz", text, &fmt) {
        let back = parse_trace("fuzz", &format_trace(&tr), &TraceFormat::default()).unwrap();
        assert_eq!(back.len(), tr.len());
        let _ = resample_trace(&tr, 30.0);
    }
});
