#![no_main]

use evas_core::metrics::parse_encoded_sizes;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = parse_encoded_sizes(text);
});
