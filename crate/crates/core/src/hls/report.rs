use serde::{Deserialize, Serialize};

use crate::device::DeviceSpec;
use crate::dnn::{dnn_latency, dnn_resource, DnnModel};
use crate::error::Result;
use crate::ip_catalog::{CharTable, ResourceVector};
use crate::sim::{simulate_dnn, SimOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub device: String,
    pub clock_mhz: f64,
    pub latency_cycles: f64,
    pub latency_ms: f64,
    pub resource: ResourceVector,
    /// Percent of the device budget per class: dsp, lut, ff, bram.
    pub utilization_pct: [f64; 4],
    pub fits: bool,
    pub sim_cycles: u64,
    pub sim_ms: f64,
    /// |estimate − simulated| / simulated.
    pub sim_rel_error: f64,
}

/// Usage as a percentage of `budget`, per resource class.
pub fn utilization_pct(usage: &ResourceVector, budget: &ResourceVector) -> [f64; 4] {
    usage.utilization(budget)
}

/// Analytical latency and resources for `m`, cross-checked against the simulator.
pub fn estimate_report(m: &DnnModel, device: &DeviceSpec, table: &CharTable, sim: &SimOptions) -> Result<EstimateReport> {
    let lat = dnn_latency(m, device, table)?;
    let res = dnn_resource(m, table)?;
    let trace = simulate_dnn(m, device, table, sim)?;
    let sim_cycles = trace.total_cycles;
    Ok(EstimateReport {
        device: device.name.clone(),
        clock_mhz: device.clock_mhz,
        latency_cycles: lat.cycles,
        latency_ms: lat.ms,
        utilization_pct: utilization_pct(&res, &device.budget),
        fits: res.fits_within(&device.budget),
        resource: res,
        sim_cycles,
        sim_ms: device.cycles_to_ms(sim_cycles as f64),
        sim_rel_error: (lat.cycles - sim_cycles as f64).abs() / sim_cycles as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{Bundle, BundleId};
    use crate::dnn::DnnCalibration;
    use crate::ip_catalog::{FeatureDims, IpKind, QuantScheme, TileShape};

    #[test]
    fn utilization_against_pynq() {
        let d = DeviceSpec::pynq_z1();
        let u = utilization_pct(&ResourceVector::new(187.0, 26_600.0, 10_640.0, 0.49 * 1024.0), &d.budget);
        assert!((u[0] - 85.0).abs() < 1e-9);
        assert!((u[1] - 50.0).abs() < 1e-9);
        assert!((u[2] - 10.0).abs() < 1e-9);
        assert!((u[3] - 10.0).abs() < 1e-9);
    }

    #[test]
    fn report_latency_is_the_model_estimate() {
        let t = CharTable::builtin();
        let d = DeviceSpec::pynq_z1();
        let b = Bundle::new(BundleId(4), &[IpKind::Dwconv3x3, IpKind::Normalization, IpKind::Activation]).with_config(8, QuantScheme::default());
        let m = DnnModel::plain(b, 2, FeatureDims::new(32, 32, 16), TileShape::default(), DnnCalibration::from_table(t)).unwrap();
        let r = estimate_report(&m, &d, t, &SimOptions::default()).unwrap();
        assert_eq!(r.latency_cycles, dnn_latency(&m, &d, t).unwrap().cycles);
        assert_eq!(r.resource, dnn_resource(&m, t).unwrap());
        assert!(r.fits);
        assert!(r.sim_cycles > 0);
    }
}
