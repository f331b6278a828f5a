#![no_main]

use libfuzzer_sys::fuzz_target;
use tmsk_core::MappingTable;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(table) = MappingTable::parse(text) {
            // an accepted table must survive its own text form
            assert_eq!(MappingTable::parse(&table.to_text()).expect("round trip"), table);
        }
    }
});
