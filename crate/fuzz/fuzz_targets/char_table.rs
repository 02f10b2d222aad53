#![no_main]

use cosearch::ip_catalog::CharTable;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(t) = CharTable::from_json_str(s) {
            // A table that loads must survive its own round-trip.
            CharTable::from_json_str(&t.to_json()).expect("re-parse");
        }
    }
});
