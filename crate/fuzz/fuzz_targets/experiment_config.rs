#![no_main]

use libfuzzer_sys::fuzz_target;
use tmsk_harness::config::parse_spec;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(spec) = parse_spec(text, None) {
            let _ = spec.validate();
            let _ = spec.config_hash();
        }
    }
});
