#![no_main]

use cosearch::scd::TraceRecord;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(r) = TraceRecord::parse_line(s) {
            let again = TraceRecord::parse_line(&r.to_line()).expect("re-parse");
            assert_eq!(again.to_line(), r.to_line());
        }
    }
});
