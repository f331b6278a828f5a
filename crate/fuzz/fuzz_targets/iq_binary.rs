#![no_main]

use libfuzzer_sys::fuzz_target;
use tmsk_core::io::{read_iq_binary, write_iq_binary};

fuzz_target!(|data: &[u8]| {
    if let Ok(samples) = read_iq_binary(data) {
        let mut out = Vec::new();
        write_iq_binary(&mut out, &samples).unwrap();
        assert_eq!(out, data);
    }
});
