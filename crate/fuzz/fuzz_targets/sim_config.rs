#![no_main]

use evas_core::pipeline::parse_sim_config;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = parse_sim_config(text, std::path::Path::new("/fuzz")) {
        cfg.validate().unwrap();
    }
});
