#![no_main]

use libfuzzer_sys::fuzz_target;
use tmsk_core::io::parse_tdl_profile;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(p) = parse_tdl_profile(text) {
            let sum: f64 = p.linear_powers().iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "powers sum to {sum}");
        }
    }
});
