use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ip_catalog::ResourceVector;

/// Target FPGA: resource budget, clock and off-chip bandwidth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSpec {
    pub name: String,
    pub budget: ResourceVector,
    pub clock_mhz: f64,
    /// Off-chip bandwidth in bytes per cycle.
    pub bw: f64,
}

impl DeviceSpec {
    /// PYNQ-Z1 (Zynq-7020): 220 DSP, 53,200 LUT, 106,400 FF, 4.9 Mbit BRAM,
    /// one 64-bit HP port at the fabric clock.
    pub fn pynq_z1() -> Self {
        DeviceSpec {
            name: "pynq-z1".to_string(),
            budget: ResourceVector::new(220.0, 53_200.0, 106_400.0, 4.9 * 1024.0),
            clock_mhz: 100.0,
            bw: 8.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = self.budget.components().iter().all(|v| *v > 0.0 && v.is_finite());
        if !positive || !(self.clock_mhz > 0.0 && self.clock_mhz.is_finite()) || !(self.bw > 0.0 && self.bw.is_finite()) {
            return Err(Error::Config(format!("device `{}` needs positive budget, clock and bandwidth", self.name)));
        }
        Ok(())
    }

    pub fn cycles_to_ms(&self, cycles: f64) -> f64 {
        cycles_to_ms(cycles, self.clock_mhz)
    }

    pub fn bram_bytes(&self) -> u64 {
        (self.budget.bram_kbit * 1024.0 / 8.0).floor() as u64
    }
}

impl Default for DeviceSpec {
    fn default() -> Self {
        DeviceSpec::pynq_z1()
    }
}

pub fn cycles_to_ms(cycles: f64, clock_mhz: f64) -> f64 {
    cycles / (clock_mhz * 1_000.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pynq_budget() {
        let d = DeviceSpec::pynq_z1();
        d.validate().unwrap();
        assert_eq!(d.budget.dsp, 220.0);
        assert_eq!(d.budget.lut, 53_200.0);
        assert_eq!(d.budget.ff, 106_400.0);
        assert_eq!(d.cycles_to_ms(5_000_000.0), 50.0);
    }

    #[test]
    fn zero_budget_rejected() {
        let mut d = DeviceSpec::pynq_z1();
        d.budget.dsp = 0.0;
        assert!(d.validate().is_err());
    }
}
