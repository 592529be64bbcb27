#![no_main]

use evas_core::imagery::decode_ppm;
use evas_core::vbm::{reconstruct, unpack_vbm, VbmFrame, VbmLayout};
use libfuzzer_sys::fuzz_target;

// Input: sidecar text, a newline, then the packed PPM.
fuzz_target!(|data: &[u8]| {
    let split = data.iter().position(|&b| b == b'\n').map_or(data.len(), |i| i + 1);
    let Ok(text) = std::str::from_utf8(&data[..split]) else { return };
    let Ok(layout) = VbmLayout::from_sidecar(text) else { return };
    assert_eq!(VbmLayout::from_sidecar(&layout.to_sidecar()).unwrap(), layout);
    let Ok(packed) = decode_ppm(&data[split..]) else { return };
    if let Ok(vbm) = VbmFrame::new(layout, packed) {
        unpack_vbm(&vbm).unwrap();
        let rec = reconstruct(&vbm).unwrap();
        assert_eq!((rec.width(), rec.height()), (layout.src_w, layout.src_h));
    }
});
