#![no_main]

use evas_core::prediction::{decode_models, encode_models, gru_forward};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(models) = decode_models(text) {
        assert_eq!(decode_models(&encode_models(&models)).unwrap(), models);
        for m in &models {
            if m.history <= 64 && m.hidden <= 64 {
                let _ = gru_forward(m, &vec![0.1; m.history]);
            }
        }
    }
});
