#![no_main]

use cosearch::pipeline::RunReport;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = serde_json::from_slice::<RunReport>(data);
});
