#![no_main]

use cosearch::bundle::BundleList;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(list) = BundleList::from_json_str(s) {
            let _ = list.to_bundles();
        }
    }
});
