#![no_main]

use libfuzzer_sys::fuzz_target;
use tmsk_core::io::parse_pn_model;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_pn_model(text);
    }
});
