//! DNNs built by replicating one bundle, and the whole-network cost model.
//!
//! A model is a bundle repeated `n_rep` times. Between consecutive
//! replications sits a down-sampling spot (`x_ds`, factor `f_ds`) and a
//! channel-expansion factor (`pi_ch`). Optional fixed head and tail layers
//! wrap the replications for evaluation networks.
//!
//! Latency is the sum of each replication's bundle latency at its own
//! dimensions plus `φ · Lat_DM`. Resources do not depend on the replication
//! count: every replication reuses the same IP instances.

use serde::{Deserialize, Serialize};

use crate::bundle::{
    bundle_resource, eq2_latency, layer_dims, layer_weight_bytes, sequence_terms, Bundle, ReplicationShape,
};
use crate::device::DeviceSpec;
use crate::error::{Error, Result};
use crate::ip_catalog::{CharTable, FeatureDims, IpInstance, IpKind, LayerDims, QuantScheme, ResourceVector, TileShape, PF_CANDIDATES};

/// Channel-expansion factors in move order; 1 only appears at initialization.
pub const CHANNEL_FACTORS: [f64; 6] = [1.0, 1.2, 1.3, 1.5, 1.75, 2.0];
const FACTOR_RATIOS: [(u64, u64); 6] = [(1, 1), (6, 5), (13, 10), (3, 2), (7, 4), (2, 1)];

pub const MAX_REPLICATIONS: u32 = 64;
pub const MAX_CHANNELS: u32 = 4096;

/// Index of `factor` in [`CHANNEL_FACTORS`].
pub fn factor_index(factor: f64) -> Option<usize> {
    CHANNEL_FACTORS.iter().position(|f| (f - factor).abs() < 1e-9)
}

/// `ceil(factor · channels)` rounded up to a multiple of the tile depth.
pub fn expand_channels(channels: u32, factor: f64, tile_channels: u32) -> Result<u32> {
    let (num, den) = factor_index(factor)
        .map(|i| FACTOR_RATIOS[i])
        .ok_or_else(|| Error::Model(format!("channel factor {factor} not in {CHANNEL_FACTORS:?}")))?;
    let raw = (u64::from(channels) * num).div_ceil(den);
    let aligned = raw.div_ceil(u64::from(tile_channels)) * u64::from(tile_channels);
    u32::try_from(aligned).map_err(|_| Error::Model("channel count overflow".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DnnCalibration {
    pub phi: f64,
    /// Inter-bundle data-movement unit latency, cycles.
    pub lat_dm: f64,
    pub gamma_ctl: f64,
    pub res_ctl: ResourceVector,
}

impl DnnCalibration {
    /// Uncalibrated defaults: no data-movement term, the table's controller at γ = 1.
    pub fn from_table(table: &CharTable) -> Self {
        DnnCalibration {
            phi: 0.0,
            lat_dm: 0.0,
            gamma_ctl: 1.0,
            res_ctl: table.overheads.controller(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.phi, self.lat_dm, self.gamma_ctl]
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0)
            && self.res_ctl.is_non_negative();
        if !ok {
            return Err(Error::Calibration("DNN calibration constants must be non-negative".into()));
        }
        Ok(())
    }
}

/// A layer outside the replicated body (evaluation head/tail).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedLayer {
    pub kind: IpKind,
    #[serde(default = "one")]
    pub stride: u32,
    /// Output channels; only standard convolutions may change the count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_channels: Option<u32>,
    /// Reduce the spatial map to 1×1.
    #[serde(default)]
    pub global: bool,
}

fn one() -> u32 {
    1
}

impl FixedLayer {
    pub fn new(kind: IpKind) -> Self {
        FixedLayer {
            kind,
            stride: 1,
            out_channels: None,
            global: false,
        }
    }

    fn output(&self, input: FeatureDims) -> Result<FeatureDims> {
        if self.stride == 0 {
            return Err(Error::Model("fixed layer stride must be >= 1".into()));
        }
        if self.out_channels.is_some() && !self.kind.is_standard_conv() {
            return Err(Error::Model(format!("{} cannot change the channel count", self.kind)));
        }
        let (w, h) = if self.global {
            (1, 1)
        } else {
            (input.width / self.stride, input.height / self.stride)
        };
        let out = FeatureDims::new(w, h, self.out_channels.unwrap_or(input.channels));
        if out.is_empty() {
            return Err(Error::Model(format!("{} collapses {input} to {out}", self.kind)));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Head(usize),
    Replication(usize),
    Tail(usize),
}

impl std::fmt::Display for SegmentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SegmentKind::Head(i) => write!(f, "head{i}"),
            SegmentKind::Replication(i) => write!(f, "rep{i}"),
            SegmentKind::Tail(i) => write!(f, "tail{i}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelLayer {
    pub index: usize,
    /// Position in [`DnnModel::accelerator_instances`].
    pub instance: usize,
    pub inst: IpInstance,
    pub dims: LayerDims,
}

/// A run of layers executed back to back from one off-chip input map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub layers: Vec<ModelLayer>,
    /// Map read from off-chip memory (after down-sampling on load).
    pub read: FeatureDims,
    /// Factor applied to the source map while loading.
    pub load_stride: u32,
    pub alpha: f64,
    pub beta: f64,
}

impl Segment {
    pub fn instances_and_dims(&self) -> Vec<(IpInstance, LayerDims)> {
        self.layers.iter().map(|l| (l.inst, l.dims)).collect()
    }

    pub fn output(&self) -> FeatureDims {
        self.layers.last().map_or(self.read, |l| l.dims.output)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DnnModel {
    pub schema_version: u32,
    /// The replicated bundle, instantiated at the accelerator's pf and quantization.
    pub bundle: Bundle,
    pub n_rep: u32,
    /// Down-sampling spots between replications (0/1), length `n_rep - 1`.
    pub x_ds: Vec<u8>,
    /// Down-sampling factor per spot, length `n_rep - 1`.
    pub f_ds: Vec<u32>,
    /// Channel-expansion factor per spot, length `n_rep - 1`.
    pub pi_ch: Vec<f64>,
    pub input_dims: FeatureDims,
    pub tile: TileShape,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub head: Vec<FixedLayer>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tail: Vec<FixedLayer>,
    /// For each accelerator instance, the layer indices it executes.
    pub layer_assignment: Vec<Vec<usize>>,
    pub calib: DnnCalibration,
}

impl DnnModel {
    /// Builds and validates a model without head or tail layers.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        bundle: Bundle,
        n_rep: u32,
        x_ds: Vec<u8>,
        f_ds: Vec<u32>,
        pi_ch: Vec<f64>,
        input_dims: FeatureDims,
        tile: TileShape,
        calib: DnnCalibration,
    ) -> Result<Self> {
        let mut m = DnnModel {
            schema_version: crate::SCHEMA_VERSION,
            bundle,
            n_rep,
            x_ds,
            f_ds,
            pi_ch,
            input_dims,
            tile,
            head: Vec::new(),
            tail: Vec::new(),
            layer_assignment: Vec::new(),
            calib,
        };
        m.refresh()?;
        Ok(m)
    }

    /// `n_rep` plain replications: no down-sampling, no expansion.
    pub fn plain(bundle: Bundle, n_rep: u32, input_dims: FeatureDims, tile: TileShape, calib: DnnCalibration) -> Result<Self> {
        let spots = n_rep.saturating_sub(1) as usize;
        DnnModel::new(bundle, n_rep, vec![0; spots], vec![2; spots], vec![1.0; spots], input_dims, tile, calib)
    }

    pub fn pf(&self) -> u32 {
        self.bundle.pf()
    }

    pub fn quant(&self) -> QuantScheme {
        self.bundle.quant()
    }

    pub fn layers_per_bundle(&self) -> usize {
        self.bundle.instances.len()
    }

    pub fn layer_count(&self) -> usize {
        self.head.len() + self.n_rep as usize * self.layers_per_bundle() + self.tail.len()
    }

    /// Bundle instances followed by one instance per head/tail kind the bundle lacks.
    pub fn accelerator_instances(&self) -> Vec<IpInstance> {
        let mut out = self.bundle.instances.clone();
        let (pf, quant) = (self.pf(), self.quant());
        for layer in self.head.iter().chain(&self.tail) {
            if !out.iter().any(|i| i.template == layer.kind) {
                out.push(IpInstance::new(layer.kind, pf, quant));
            }
        }
        out
    }

    fn instance_of(instances: &[IpInstance], kind: IpKind) -> usize {
        instances
            .iter()
            .position(|i| i.template == kind)
            .expect("head/tail kinds are present in the instance list")
    }

    pub fn derive_assignment(&self) -> Vec<Vec<usize>> {
        let instances = self.accelerator_instances();
        let mut out = vec![Vec::new(); instances.len()];
        let mut layer = 0;
        for h in &self.head {
            out[Self::instance_of(&instances, h.kind)].push(layer);
            layer += 1;
        }
        for _ in 0..self.n_rep {
            for slot in out.iter_mut().take(self.layers_per_bundle()) {
                slot.push(layer);
                layer += 1;
            }
        }
        for t in &self.tail {
            out[Self::instance_of(&instances, t.kind)].push(layer);
            layer += 1;
        }
        out
    }

    /// Recomputes the layer assignment and validates.
    pub fn refresh(&mut self) -> Result<()> {
        self.bundle.validate()?;
        self.layer_assignment = self.derive_assignment();
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != crate::SCHEMA_VERSION {
            return Err(Error::Model(format!("unsupported schema_version {}", self.schema_version)));
        }
        self.bundle.validate()?;
        self.tile.validate()?;
        self.calib.validate()?;
        if self.n_rep == 0 || self.n_rep > MAX_REPLICATIONS {
            return Err(Error::Model(format!("n_rep {} outside 1..={MAX_REPLICATIONS}", self.n_rep)));
        }
        let spots = self.n_rep as usize - 1;
        if self.x_ds.len() != spots || self.f_ds.len() != spots || self.pi_ch.len() != spots {
            return Err(Error::Model(format!(
                "x_ds/f_ds/pi_ch must have {spots} entries for n_rep {}",
                self.n_rep
            )));
        }
        if self.x_ds.iter().any(|x| *x > 1) {
            return Err(Error::Model("x_ds entries must be 0 or 1".into()));
        }
        if self.f_ds.iter().any(|f| *f < 2) {
            return Err(Error::Model("down-sampling factors must be >= 2".into()));
        }
        if self.pi_ch.iter().any(|p| factor_index(*p).is_none()) {
            return Err(Error::Model(format!("channel factors must be in {CHANNEL_FACTORS:?}")));
        }
        if self.input_dims.is_empty() {
            return Err(Error::Model("input dims must be non-zero".into()));
        }
        if self.layer_assignment != self.derive_assignment() {
            return Err(Error::Model("layer assignment does not cover every layer exactly once".into()));
        }
        self.segments().map(|_| ())
    }

    /// Layers grouped into off-chip-to-off-chip segments, with dims threaded through.
    pub fn segments(&self) -> Result<Vec<Segment>> {
        let instances = self.accelerator_instances();
        let mut cur = self.input_dims;
        let mut index = 0;
        let mut out = Vec::new();

        let fixed = |kind: SegmentKind, layer: &FixedLayer, cur: &mut FeatureDims, index: &mut usize| -> Result<Segment> {
            let output = layer.output(*cur)?;
            let instance = Self::instance_of(&instances, layer.kind);
            let seg = Segment {
                kind,
                layers: vec![ModelLayer {
                    index: *index,
                    instance,
                    inst: instances[instance],
                    dims: LayerDims { input: *cur, output },
                }],
                read: *cur,
                load_stride: 1,
                alpha: 1.0,
                beta: 1.0,
            };
            *cur = output;
            *index += 1;
            Ok(seg)
        };

        for (i, h) in self.head.iter().enumerate() {
            out.push(fixed(SegmentKind::Head(i), h, &mut cur, &mut index)?);
        }

        let calib = self.bundle.calibration();
        for rep in 0..self.n_rep as usize {
            let mut stride = 1;
            let mut out_channels = cur.channels;
            if rep > 0 {
                let spot = rep - 1;
                if self.x_ds[spot] == 1 {
                    stride = self.f_ds[spot];
                    cur.width /= stride;
                    cur.height /= stride;
                    if cur.width == 0 || cur.height == 0 {
                        return Err(Error::Model(format!("down-sampling before replication {rep} collapses the feature map")));
                    }
                }
                out_channels = expand_channels(cur.channels, self.pi_ch[spot], self.tile.channels)?;
            }
            if out_channels > MAX_CHANNELS {
                return Err(Error::Model(format!("replication {rep} needs {out_channels} channels (max {MAX_CHANNELS})")));
            }
            let shape = ReplicationShape {
                width: cur.width,
                height: cur.height,
                in_channels: cur.channels,
                out_channels,
            };
            let dims = layer_dims(&self.bundle, &shape);
            let layers = dims
                .into_iter()
                .enumerate()
                .map(|(pos, d)| {
                    let l = ModelLayer {
                        index,
                        instance: pos,
                        inst: self.bundle.instances[pos],
                        dims: d,
                    };
                    index += 1;
                    l
                })
                .collect::<Vec<_>>();
            let seg = Segment {
                kind: SegmentKind::Replication(rep),
                layers,
                read: cur,
                load_stride: stride,
                alpha: calib.alpha,
                beta: calib.beta,
            };
            cur = seg.output();
            out.push(seg);
        }

        for (i, t) in self.tail.iter().enumerate() {
            out.push(fixed(SegmentKind::Tail(i), t, &mut cur, &mut index)?);
        }
        Ok(out)
    }

    /// Flat layer list in execution order.
    pub fn layers(&self) -> Result<Vec<ModelLayer>> {
        Ok(self.segments()?.into_iter().flat_map(|s| s.layers).collect())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let m: DnnModel = serde_json::from_str(s)?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        DnnModel::from_json_str(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DnnLatency {
    pub cycles: f64,
    pub ms: f64,
    /// Per-segment estimates in cycles, execution order.
    pub segments: Vec<f64>,
    /// φ · Lat_DM.
    pub data_movement: f64,
}

/// Whole-network latency at the device's bandwidth and clock.
pub fn dnn_latency(m: &DnnModel, device: &DeviceSpec, table: &CharTable) -> Result<DnnLatency> {
    let mut segments = Vec::new();
    for seg in m.segments()? {
        let layers = seg.instances_and_dims();
        let (comp, _, fp) = sequence_terms(&layers, seg.read, &m.tile, device.bw, table)?;
        segments.push(eq2_latency(seg.alpha, seg.beta, comp as f64, fp.total() as f64, device.bw)?);
    }
    let data_movement = m.calib.phi * m.calib.lat_dm;
    let cycles = segments.iter().sum::<f64>() + data_movement;
    Ok(DnnLatency {
        cycles,
        ms: device.cycles_to_ms(cycles),
        segments,
        data_movement,
    })
}

/// Whole-network resources: the bundle's, any head/tail-only instances, and γ · Res_ctl.
pub fn dnn_resource(m: &DnnModel, table: &CharTable) -> Result<ResourceVector> {
    let mut total = bundle_resource(&m.bundle, &m.tile, table)?;
    for inst in m.accelerator_instances().iter().skip(m.bundle.instances.len()) {
        total += table.resources(inst, &m.tile)?;
    }
    Ok(total + m.calib.res_ctl.scale(m.calib.gamma_ctl))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelStats {
    pub layers: usize,
    /// Weight count.
    pub params: u64,
    /// Multiply-accumulates per inference.
    pub macs: u64,
}

pub fn model_stats(m: &DnnModel, table: &CharTable) -> Result<ModelStats> {
    let mut params = 0;
    let mut macs = 0;
    let layers = m.layers()?;
    for l in &layers {
        let weights = layer_weight_bytes(&l.inst, &l.dims, table)? / l.inst.quant.weight_bytes();
        params += weights;
        if l.inst.template.is_computational() {
            let spatial = u64::from(l.dims.output.width) * u64::from(l.dims.output.height);
            macs += weights * spatial;
        }
    }
    Ok(ModelStats {
        layers: layers.len(),
        params,
        macs,
    })
}

/// Knobs for building the initial model of a search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitOptions {
    pub n_rep: u32,
    pub f_ds: u32,
    pub input_dims: FeatureDims,
    pub tile: TileShape,
}

impl Default for InitOptions {
    fn default() -> Self {
        InitOptions {
            n_rep: 3,
            f_ds: 2,
            input_dims: FeatureDims::new(96, 48, 8),
            tile: TileShape::default(),
        }
    }
}

/// Initial model for `bundle`: `n_rep` replications, every spot down-sampled,
/// channels doubled after each down-sampling, and the largest uniform pf that
/// keeps the whole accelerator within the device budget.
pub fn initialize_dnn(
    bundle: &Bundle,
    device: &DeviceSpec,
    quant: QuantScheme,
    opts: &InitOptions,
    calib: DnnCalibration,
    table: &CharTable,
) -> Result<DnnModel> {
    let spots = opts.n_rep.saturating_sub(1) as usize;
    let x_ds = vec![1u8; spots];
    let pi_ch: Vec<f64> = x_ds.iter().map(|x| if *x == 1 { 2.0 } else { 1.0 }).collect();
    let mut best = None;
    for pf in PF_CANDIDATES {
        let m = DnnModel::new(
            bundle.with_config(pf, quant),
            opts.n_rep,
            x_ds.clone(),
            vec![opts.f_ds; spots],
            pi_ch.clone(),
            opts.input_dims,
            opts.tile,
            calib,
        )?;
        let res = dnn_resource(&m, table)?;
        if let Some((resource, required, budget)) = res.first_exceeding(&device.budget) {
            if best.is_none() {
                return Err(Error::Infeasible { resource, required, budget });
            }
            break;
        }
        best = Some(m);
    }
    Ok(best.expect("loop either errors or records a model"))
}
