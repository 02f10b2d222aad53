//! Bundles: short layer sequences that DNNs are built from, and their cost model.
//!
//! A bundle's resources are the sum of its instances' plus a structural
//! overhead Γ. Its latency on one replication is
//! `α · Σ Comp_j + β · Θ / bw`, with `Comp_j = reuse_j · lat_j` per instance
//! and Θ the bytes crossing the bundle boundary (input map, output map and
//! weights; intra-bundle tiles stay on chip).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ip_catalog::{
    reuse_count, CharTable, FeatureDims, IpInstance, IpKind, IpTemplate, LayerDims, QuantScheme, ResourceVector,
    TileShape,
};

/// Most computational IPs a bundle may hold.
pub const MAX_COMPUTATIONAL: usize = 2;

/// Fitted overlap factors are expected in `(0, CALIB_MAX]`.
pub const CALIB_MAX: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BundleId(pub u32);

impl fmt::Display for BundleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "b{:02}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleCalibration {
    pub alpha: f64,
    pub beta: f64,
    pub gamma_res: ResourceVector,
}

impl Default for BundleCalibration {
    fn default() -> Self {
        BundleCalibration {
            alpha: 1.0,
            beta: 1.0,
            gamma_res: ResourceVector::zero(),
        }
    }
}

impl BundleCalibration {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) || !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Calibration(format!(
                "alpha must be > 0 and beta >= 0 (got {}, {})",
                self.alpha, self.beta
            )));
        }
        if !self.gamma_res.is_non_negative() {
            return Err(Error::Calibration("gamma must be non-negative".into()));
        }
        Ok(())
    }

    /// Messages for factors outside the expected range.
    pub fn range_warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if !(self.alpha > 0.0 && self.alpha <= CALIB_MAX) {
            w.push(format!("alpha {:.4} outside (0, {CALIB_MAX}]", self.alpha));
        }
        if !(self.beta >= 0.0 && self.beta <= CALIB_MAX) {
            w.push(format!("beta {:.4} outside [0, {CALIB_MAX}]", self.beta));
        }
        w
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bundle {
    pub id: BundleId,
    /// Layer order, top to bottom.
    pub instances: Vec<IpInstance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calib: Option<BundleCalibration>,
}

impl Bundle {
    /// An uncalibrated bundle at pf 1 and the default quantization.
    pub fn new(id: BundleId, kinds: &[IpKind]) -> Bundle {
        Bundle {
            id,
            instances: kinds
                .iter()
                .map(|k| IpInstance::new(*k, 1, QuantScheme::default()))
                .collect(),
            calib: None,
        }
    }

    pub fn kinds(&self) -> Vec<IpKind> {
        self.instances.iter().map(|i| i.template).collect()
    }

    pub fn computational_count(&self) -> usize {
        self.instances.iter().filter(|i| i.template.is_computational()).count()
    }

    pub fn pf(&self) -> u32 {
        self.instances.first().map_or(1, |i| i.pf)
    }

    pub fn quant(&self) -> QuantScheme {
        self.instances.first().map_or_else(QuantScheme::default, |i| i.quant)
    }

    pub fn calibration(&self) -> BundleCalibration {
        self.calib.unwrap_or_default()
    }

    /// Same layers with every instance set to `pf` and `quant`.
    pub fn with_config(&self, pf: u32, quant: QuantScheme) -> Bundle {
        Bundle {
            id: self.id,
            instances: self
                .instances
                .iter()
                .map(|i| IpInstance::new(i.template, pf, quant))
                .collect(),
            calib: self.calib,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.instances.is_empty() {
            return Err(Error::Model(format!("bundle {} has no layers", self.id)));
        }
        if self.computational_count() > MAX_COMPUTATIONAL {
            return Err(Error::Model(format!(
                "bundle {} has {} computational IPs (max {MAX_COMPUTATIONAL})",
                self.id,
                self.computational_count()
            )));
        }
        let (pf, quant) = (self.pf(), self.quant());
        for inst in &self.instances {
            inst.validate()?;
            if inst.pf != pf || inst.quant != quant {
                return Err(Error::Model(format!(
                    "bundle {} mixes parallel factors or quantization schemes",
                    self.id
                )));
            }
        }
        if let Some(c) = &self.calib {
            c.validate()?;
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        let kinds: Vec<&str> = self.instances.iter().map(|i| i.template.name()).collect();
        format!("{}:{}", self.id, kinds.join("+"))
    }
}

/// How bundle candidates are generated from a catalog.
///
/// Every computational template alone, plus every ordered pair drawn from
/// `pair_firsts × pair_seconds`; each candidate is followed by `tail`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnumerationRule {
    pub pair_firsts: Vec<IpKind>,
    pub pair_seconds: Vec<IpKind>,
    pub tail: Vec<IpKind>,
}

impl Default for EnumerationRule {
    fn default() -> Self {
        EnumerationRule {
            pair_firsts: vec![IpKind::Conv1x1, IpKind::Conv3x3, IpKind::Conv5x5],
            pair_seconds: vec![IpKind::Dwconv3x3, IpKind::Dwconv5x5, IpKind::Dwconv7x7, IpKind::MaxPool],
            tail: vec![IpKind::Normalization, IpKind::Activation],
        }
    }
}

/// The bundle candidates for `catalog` under the default rule.
pub fn enumerate_bundles(catalog: &[IpTemplate]) -> Vec<Bundle> {
    enumerate_with_rule(catalog, &EnumerationRule::default())
}

pub fn enumerate_with_rule(catalog: &[IpTemplate], rule: &EnumerationRule) -> Vec<Bundle> {
    let has = |k: &IpKind| catalog.iter().any(|t| t.kind == *k);
    let computational: Vec<IpKind> = catalog.iter().filter(|t| t.computational).map(|t| t.kind).collect();
    if computational.is_empty() {
        return Vec::new();
    }
    let tail: Vec<IpKind> = rule.tail.iter().copied().filter(|k| has(k)).collect();

    let mut heads: Vec<Vec<IpKind>> = computational.iter().map(|k| vec![*k]).collect();
    for first in rule.pair_firsts.iter().filter(|k| has(k)) {
        for second in rule.pair_seconds.iter().filter(|k| has(k)) {
            heads.push(vec![*first, *second]);
        }
    }

    heads
        .into_iter()
        .filter(|h| h.iter().filter(|k| k.is_computational()).count() <= MAX_COMPUTATIONAL)
        .enumerate()
        .map(|(i, mut kinds)| {
            kinds.extend_from_slice(&tail);
            Bundle::new(BundleId(i as u32 + 1), &kinds)
        })
        .collect()
}

/// Spatial size and channel counts of one bundle replication.
///
/// `width`/`height` are the map size the replication works on (after any
/// down-sampling on load); `in_channels` is what is read from off-chip memory
/// and `out_channels` what the replication produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplicationShape {
    pub width: u32,
    pub height: u32,
    pub in_channels: u32,
    pub out_channels: u32,
}

impl ReplicationShape {
    pub fn square(size: u32, in_channels: u32, out_channels: u32) -> Self {
        ReplicationShape {
            width: size,
            height: size,
            in_channels,
            out_channels,
        }
    }
}

/// Per-instance layer dimensions for one replication.
///
/// The first standard convolution maps `in_channels` to `out_channels`.
/// Bundles that start with a channel-preserving layer receive the expanded
/// channel count directly from the load path.
pub fn layer_dims(bundle: &Bundle, shape: &ReplicationShape) -> Vec<LayerDims> {
    let (w, h) = (shape.width, shape.height);
    let starts_with_conv = bundle
        .instances
        .first()
        .is_some_and(|i| i.template.is_standard_conv());
    let mut channels = if starts_with_conv { shape.in_channels } else { shape.out_channels };
    bundle
        .instances
        .iter()
        .map(|inst| {
            let out = if inst.template.is_standard_conv() { shape.out_channels } else { channels };
            let dims = LayerDims {
                input: FeatureDims::new(w, h, channels),
                output: FeatureDims::new(w, h, out),
            };
            channels = out;
            dims
        })
        .collect()
}

/// Off-chip bytes moved by one execution of a layer sequence.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataFootprint {
    pub bytes_in: u64,
    pub bytes_out: u64,
    pub bytes_weights: u64,
}

impl DataFootprint {
    pub fn total(&self) -> u64 {
        self.bytes_in + self.bytes_out + self.bytes_weights
    }
}

/// Weight bytes of one full layer.
pub fn layer_weight_bytes(inst: &IpInstance, dims: &LayerDims, table: &CharTable) -> Result<u64> {
    if !inst.template.is_computational() {
        return Ok(0);
    }
    let k = u64::from(table.coefficients(inst.template)?.kernel);
    let per_out = if inst.template.is_standard_conv() { u64::from(dims.input.channels) } else { 1 };
    Ok(k * k * per_out * u64::from(dims.output.channels) * inst.quant.weight_bytes())
}

/// Footprint of a layer sequence whose first layer reads `read` from off-chip memory.
pub fn sequence_footprint(
    layers: &[(IpInstance, LayerDims)],
    read: FeatureDims,
    table: &CharTable,
) -> Result<DataFootprint> {
    let (first, last) = match (layers.first(), layers.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Ok(DataFootprint::default()),
    };
    let act = first.0.quant.activation_bytes();
    let mut weights = 0;
    for (inst, dims) in layers {
        weights += layer_weight_bytes(inst, dims, table)?;
    }
    Ok(DataFootprint {
        bytes_in: read.elements() * act,
        bytes_out: last.1.output.elements() * act,
        bytes_weights: weights,
    })
}

pub fn bundle_footprint(bundle: &Bundle, shape: &ReplicationShape, table: &CharTable) -> Result<DataFootprint> {
    let dims = layer_dims(bundle, shape);
    let layers: Vec<_> = bundle.instances.iter().copied().zip(dims).collect();
    let read = FeatureDims::new(shape.width, shape.height, shape.in_channels);
    sequence_footprint(&layers, read, table)
}

/// Resources of a bundle: instance sum plus Γ.
pub fn bundle_resource(bundle: &Bundle, tile: &TileShape, table: &CharTable) -> Result<ResourceVector> {
    let mut sum = ResourceVector::zero();
    for inst in &bundle.instances {
        sum += table.resources(inst, tile)?;
    }
    Ok(sum + bundle.calibration().gamma_res)
}

/// Glue logic and inter-stage tile buffers of a bundle's pipeline: the
/// structural part of Γ.
pub fn structural_overhead(bundle: &Bundle, tile: &TileShape, table: &CharTable) -> ResourceVector {
    let n = bundle.instances.len() as f64;
    let o = &table.overheads;
    let tile_kbit = (tile.points() * bundle.quant().activation_bytes()) as f64 * 8.0 / 1024.0;
    ResourceVector::new(0.0, o.bundle_lut_per_instance * n, o.bundle_ff_per_instance * n, (n + 1.0) * tile_kbit)
}

/// Computation latency of one layer: invocations times cycles per invocation.
pub fn comp_latency(inst: &IpInstance, dims: &LayerDims, tile: &TileShape, table: &CharTable) -> Result<u64> {
    let reuse = reuse_count(inst.template, dims, tile)?;
    Ok(reuse * table.lat_cycles(inst, tile)?)
}

/// `α · comp + β · Θ / bw`, in cycles.
pub fn eq2_latency(alpha: f64, beta: f64, comp_cycles: f64, theta_bytes: f64, bw: f64) -> Result<f64> {
    if !bw.is_finite() || bw <= 0.0 {
        return Err(Error::Domain(format!("bandwidth must be positive, got {bw}")));
    }
    Ok(alpha * comp_cycles + beta * theta_bytes / bw)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BundleLatency {
    /// Σ Comp_j in cycles.
    pub comp_sum: u64,
    /// Θ / bw in cycles.
    pub transfer_cycles: f64,
    pub footprint: DataFootprint,
    /// Calibrated estimate in cycles.
    pub total: f64,
}

/// Unscaled regressors of a layer sequence: Σ Comp_j and Θ / bw.
pub fn sequence_terms(
    layers: &[(IpInstance, LayerDims)],
    read: FeatureDims,
    tile: &TileShape,
    bw: f64,
    table: &CharTable,
) -> Result<(u64, f64, DataFootprint)> {
    if !bw.is_finite() || bw <= 0.0 {
        return Err(Error::Domain(format!("bandwidth must be positive, got {bw}")));
    }
    let mut comp = 0;
    for (inst, dims) in layers {
        comp += comp_latency(inst, dims, tile, table)?;
    }
    let fp = sequence_footprint(layers, read, table)?;
    Ok((comp, fp.total() as f64 / bw, fp))
}

pub fn bundle_latency(
    bundle: &Bundle,
    shape: &ReplicationShape,
    tile: &TileShape,
    bw: f64,
    table: &CharTable,
) -> Result<BundleLatency> {
    let dims = layer_dims(bundle, shape);
    let layers: Vec<_> = bundle.instances.iter().copied().zip(dims).collect();
    let read = FeatureDims::new(shape.width, shape.height, shape.in_channels);
    let (comp, transfer, fp) = sequence_terms(&layers, read, tile, bw, table)?;
    let c = bundle.calibration();
    Ok(BundleLatency {
        comp_sum: comp,
        transfer_cycles: transfer,
        footprint: fp,
        total: eq2_latency(c.alpha, c.beta, comp as f64, fp.total() as f64, bw)?,
    })
}

/// One entry of the exported bundle list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleListEntry {
    pub id: BundleId,
    pub kinds: Vec<IpKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calib: Option<BundleCalibration>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleList {
    pub schema_version: u32,
    pub bundles: Vec<BundleListEntry>,
}

impl BundleList {
    pub fn from_bundles(bundles: &[Bundle]) -> Self {
        BundleList {
            schema_version: crate::SCHEMA_VERSION,
            bundles: bundles
                .iter()
                .map(|b| BundleListEntry {
                    id: b.id,
                    kinds: b.kinds(),
                    calib: b.calib,
                })
                .collect(),
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let list: BundleList = serde_json::from_str(s)?;
        if list.schema_version != crate::SCHEMA_VERSION {
            return Err(Error::Parse(format!("unsupported schema_version {}", list.schema_version)));
        }
        for entry in &list.bundles {
            entry.to_bundle().validate()?;
        }
        Ok(list)
    }

    pub fn to_bundles(&self) -> Vec<Bundle> {
        self.bundles.iter().map(BundleListEntry::to_bundle).collect()
    }
}

impl BundleListEntry {
    pub fn to_bundle(&self) -> Bundle {
        Bundle {
            calib: self.calib,
            ..Bundle::new(self.id, &self.kinds)
        }
    }
}
