#![no_main]

use cosearch::pipeline::{ResolvedTarget, RunConfig};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(cfg) = RunConfig::from_json_str(s) {
            for t in &cfg.targets {
                let r = ResolvedTarget::resolve(t, &cfg).expect("validated target resolves");
                assert!(r.latency_ms > 0.0 && r.epsilon_ms > 0.0);
            }
        }
    }
});
