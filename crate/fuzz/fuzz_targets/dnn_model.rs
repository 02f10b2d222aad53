#![no_main]

use cosearch::device::DeviceSpec;
use cosearch::dnn::{dnn_latency, dnn_resource, DnnModel};
use cosearch::ip_catalog::CharTable;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    let Ok(m) = DnnModel::from_json_str(s) else { return };
    // Keep per-input work bounded.
    if m.layer_count() > 512 {
        return;
    }
    let table = CharTable::builtin();
    let _ = dnn_latency(&m, &DeviceSpec::pynq_z1(), table);
    let _ = dnn_resource(&m, table);
});
