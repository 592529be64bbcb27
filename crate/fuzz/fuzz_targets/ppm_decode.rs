#![no_main]

use evas_core::imagery::{decode_ppm, encode_ppm};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(frame) = decode_ppm(data) {
        assert_eq!(decode_ppm(&encode_ppm(&frame)).unwrap(), frame);
    }
});
