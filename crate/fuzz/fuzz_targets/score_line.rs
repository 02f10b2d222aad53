#![no_main]

use cosearch::evaluation::parse_score_line;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(v) = parse_score_line(s) {
            assert!((0.0..=1.0).contains(&v));
        }
    }
});
