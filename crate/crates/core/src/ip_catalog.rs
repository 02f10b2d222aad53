//! IP templates, configured instances and their characterization.
//!
//! Every higher-level estimate bottoms out in two numbers per instance: the
//! resources it occupies and the cycles one invocation on a tile takes. Both
//! come from a [`CharTable`], a JSON document of per-kind coefficients. The
//! shipped table is embedded; [`CharTable::from_path`] loads an override.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign};
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parallel factors an instance may be configured with.
pub const PF_CANDIDATES: [u32; 6] = [1, 2, 4, 8, 16, 32];

/// Supported fixed-point widths for weights and activations.
pub const QUANT_BITS: [u8; 2] = [8, 16];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IpKind {
    Conv1x1,
    Conv3x3,
    Conv5x5,
    Dwconv3x3,
    Dwconv5x5,
    Dwconv7x7,
    MaxPool,
    AvgPool,
    Normalization,
    Activation,
}

impl IpKind {
    pub const ALL: [IpKind; 10] = [
        IpKind::Conv1x1,
        IpKind::Conv3x3,
        IpKind::Conv5x5,
        IpKind::Dwconv3x3,
        IpKind::Dwconv5x5,
        IpKind::Dwconv7x7,
        IpKind::MaxPool,
        IpKind::AvgPool,
        IpKind::Normalization,
        IpKind::Activation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IpKind::Conv1x1 => "conv1x1",
            IpKind::Conv3x3 => "conv3x3",
            IpKind::Conv5x5 => "conv5x5",
            IpKind::Dwconv3x3 => "dwconv3x3",
            IpKind::Dwconv5x5 => "dwconv5x5",
            IpKind::Dwconv7x7 => "dwconv7x7",
            IpKind::MaxPool => "max_pool",
            IpKind::AvgPool => "avg_pool",
            IpKind::Normalization => "normalization",
            IpKind::Activation => "activation",
        }
    }

    /// Convolutions (standard and depth-wise) are the computational kinds.
    pub fn is_computational(self) -> bool {
        self.is_standard_conv() || self.is_depthwise()
    }

    pub fn is_standard_conv(self) -> bool {
        matches!(self, IpKind::Conv1x1 | IpKind::Conv3x3 | IpKind::Conv5x5)
    }

    pub fn is_depthwise(self) -> bool {
        matches!(self, IpKind::Dwconv3x3 | IpKind::Dwconv5x5 | IpKind::Dwconv7x7)
    }

    pub fn is_pool(self) -> bool {
        matches!(self, IpKind::MaxPool | IpKind::AvgPool)
    }

    /// Layers that act point-wise on a feature map and can be fused into the
    /// preceding layer's call.
    pub fn is_elementwise(self) -> bool {
        matches!(self, IpKind::Normalization | IpKind::Activation)
    }
}

impl fmt::Display for IpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for IpKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        IpKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown IP template `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IpTemplate {
    pub id: String,
    pub kind: IpKind,
    pub computational: bool,
}

impl IpTemplate {
    pub fn new(kind: IpKind) -> Self {
        IpTemplate {
            id: kind.name().to_string(),
            kind,
            computational: kind.is_computational(),
        }
    }
}

/// The ten built-in templates, in catalog order.
pub fn builtin_templates() -> Vec<IpTemplate> {
    IpKind::ALL.into_iter().map(IpTemplate::new).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationClip {
    Relu,
    Relu4,
    Relu8,
}

impl ActivationClip {
    pub const ALL: [ActivationClip; 3] = [ActivationClip::Relu, ActivationClip::Relu4, ActivationClip::Relu8];

    pub fn name(self) -> &'static str {
        match self {
            ActivationClip::Relu => "relu",
            ActivationClip::Relu4 => "relu4",
            ActivationClip::Relu8 => "relu8",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantScheme {
    pub weight_bits: u8,
    pub activation_bits: u8,
    pub activation_clip: ActivationClip,
}

impl Default for QuantScheme {
    fn default() -> Self {
        QuantScheme {
            weight_bits: 8,
            activation_bits: 8,
            activation_clip: ActivationClip::Relu,
        }
    }
}

impl QuantScheme {
    pub fn validate(&self) -> Result<()> {
        for (what, bits) in [("weight", self.weight_bits), ("activation", self.activation_bits)] {
            if !QUANT_BITS.contains(&bits) {
                return Err(Error::Config(format!("{what} bit-width {bits} not in {QUANT_BITS:?}")));
            }
        }
        Ok(())
    }

    pub fn weight_bytes(&self) -> u64 {
        u64::from(self.weight_bits / 8)
    }

    pub fn activation_bytes(&self) -> u64 {
        u64::from(self.activation_bits / 8)
    }
}

/// A template fixed to a parallel factor and quantization scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IpInstance {
    pub template: IpKind,
    pub pf: u32,
    pub quant: QuantScheme,
}

impl IpInstance {
    pub fn new(template: IpKind, pf: u32, quant: QuantScheme) -> Self {
        IpInstance { template, pf, quant }
    }

    pub fn validate(&self) -> Result<()> {
        if !PF_CANDIDATES.contains(&self.pf) {
            return Err(Error::Config(format!(
                "parallel factor {} not in {PF_CANDIDATES:?}",
                self.pf
            )));
        }
        self.quant.validate()
    }
}

/// Usage per FPGA resource class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourceVector {
    pub dsp: f64,
    pub lut: f64,
    pub ff: f64,
    pub bram_kbit: f64,
}

impl ResourceVector {
    pub const NAMES: [&'static str; 4] = ["dsp", "lut", "ff", "bram_kbit"];

    pub fn new(dsp: f64, lut: f64, ff: f64, bram_kbit: f64) -> Self {
        ResourceVector { dsp, lut, ff, bram_kbit }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn components(&self) -> [f64; 4] {
        [self.dsp, self.lut, self.ff, self.bram_kbit]
    }

    pub fn scale(&self, k: f64) -> Self {
        ResourceVector::new(self.dsp * k, self.lut * k, self.ff * k, self.bram_kbit * k)
    }

    pub fn is_non_negative(&self) -> bool {
        self.components().iter().all(|v| *v >= 0.0)
    }

    /// Component-wise `self <= other`.
    pub fn fits_within(&self, other: &ResourceVector) -> bool {
        self.components()
            .iter()
            .zip(other.components())
            .all(|(a, b)| *a <= b)
    }

    /// First resource class (in [`Self::NAMES`] order) where `self` exceeds `budget`.
    pub fn first_exceeding(&self, budget: &ResourceVector) -> Option<(&'static str, f64, f64)> {
        Self::NAMES
            .into_iter()
            .zip(self.components().into_iter().zip(budget.components()))
            .find(|(_, (used, cap))| used > cap)
            .map(|(name, (used, cap))| (name, used, cap))
    }

    /// Usage over budget per class, in percent.
    pub fn utilization(&self, budget: &ResourceVector) -> [f64; 4] {
        let used = self.components();
        let cap = budget.components();
        std::array::from_fn(|i| if cap[i] > 0.0 { 100.0 * used[i] / cap[i] } else { f64::INFINITY })
    }
}

impl Add for ResourceVector {
    type Output = ResourceVector;

    fn add(self, rhs: ResourceVector) -> ResourceVector {
        ResourceVector::new(
            self.dsp + rhs.dsp,
            self.lut + rhs.lut,
            self.ff + rhs.ff,
            self.bram_kbit + rhs.bram_kbit,
        )
    }
}

impl AddAssign for ResourceVector {
    fn add_assign(&mut self, rhs: ResourceVector) {
        *self = *self + rhs;
    }
}

impl std::iter::Sum for ResourceVector {
    fn sum<I: Iterator<Item = ResourceVector>>(iter: I) -> Self {
        iter.fold(ResourceVector::zero(), Add::add)
    }
}

impl fmt::Display for ResourceVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "dsp={} lut={} ff={} bram_kbit={:.2}",
            self.dsp, self.lut, self.ff, self.bram_kbit
        )
    }
}

/// Feature-map tile processed by one IP invocation; shared by all layers of an accelerator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TileShape {
    pub width: u32,
    pub height: u32,
    pub channels: u32,
}

impl TileShape {
    pub fn new(width: u32, height: u32, channels: u32) -> Self {
        TileShape { width, height, channels }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.channels == 0 {
            return Err(Error::Domain(format!("tile {self:?} has a zero dimension")));
        }
        Ok(())
    }

    pub fn points(&self) -> u64 {
        u64::from(self.width) * u64::from(self.height) * u64::from(self.channels)
    }
}

impl Default for TileShape {
    fn default() -> Self {
        TileShape::new(8, 8, 8)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureDims {
    pub width: u32,
    pub height: u32,
    pub channels: u32,
}

impl FeatureDims {
    pub fn new(width: u32, height: u32, channels: u32) -> Self {
        FeatureDims { width, height, channels }
    }

    pub fn elements(&self) -> u64 {
        u64::from(self.width) * u64::from(self.height) * u64::from(self.channels)
    }

    pub fn is_empty(&self) -> bool {
        self.width == 0 || self.height == 0 || self.channels == 0
    }
}

impl fmt::Display for FeatureDims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.width, self.height, self.channels)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LayerDims {
    pub input: FeatureDims,
    pub output: FeatureDims,
}

impl LayerDims {
    pub fn same(dims: FeatureDims) -> Self {
        LayerDims { input: dims, output: dims }
    }
}

/// Per-kind coefficients of the closed-form characterization model.
///
/// With `lanes = kernel² · pf · bytes_per_word`:
/// `dsp = dsp_per_lane · lanes`, `lut = lut_base + lut_per_lane · lanes`,
/// `ff = ff_base + ff_per_lane · lanes`, and BRAM holds one tile of weights
/// plus `bram_per_lane_kbit · lanes`. One invocation takes
/// `invoke_overhead + ceil(tile points · depth · kernel² · ops_per_point / pf)`
/// cycles, where `depth` is the tile's channel count for standard
/// convolutions and 1 otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KindCoefficients {
    pub kernel: u32,
    pub input_depth: bool,
    pub ops_per_point: f64,
    pub dsp_per_lane: f64,
    pub lut_base: f64,
    pub lut_per_lane: f64,
    pub ff_base: f64,
    pub ff_per_lane: f64,
    pub bram_per_lane_kbit: f64,
    pub invoke_overhead_cycles: u64,
}

impl KindCoefficients {
    fn validate(&self, kind: IpKind) -> Result<()> {
        let values = [
            self.ops_per_point,
            self.dsp_per_lane,
            self.lut_base,
            self.lut_per_lane,
            self.ff_base,
            self.ff_per_lane,
            self.bram_per_lane_kbit,
        ];
        if self.kernel == 0 || values.iter().any(|v| !v.is_finite() || *v < 0.0) || self.ops_per_point == 0.0 {
            return Err(Error::Config(format!("invalid coefficients for `{kind}`")));
        }
        Ok(())
    }
}

/// Structural overheads: bundle glue logic and the DNN-level controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overheads {
    pub bundle_lut_per_instance: f64,
    pub bundle_ff_per_instance: f64,
    pub ctl_dsp: f64,
    pub ctl_lut: f64,
    pub ctl_ff: f64,
    pub ctl_bram_kbit: f64,
}

impl Overheads {
    pub fn controller(&self) -> ResourceVector {
        ResourceVector::new(self.ctl_dsp, self.ctl_lut, self.ctl_ff, self.ctl_bram_kbit)
    }
}

/// Characterization table: per-kind coefficients plus structural overheads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CharTable {
    pub schema_version: u32,
    pub kinds: BTreeMap<IpKind, KindCoefficients>,
    pub overheads: Overheads,
}

const DEFAULT_TABLE: &str = include_str!("../data/char_table.json");

impl CharTable {
    /// The shipped table.
    pub fn builtin() -> &'static CharTable {
        static TABLE: OnceLock<CharTable> = OnceLock::new();
        TABLE.get_or_init(|| CharTable::from_json_str(DEFAULT_TABLE).expect("embedded characterization table is valid"))
    }

    pub fn from_json_str(s: &str) -> Result<CharTable> {
        let table: CharTable = serde_json::from_str(s)?;
        table.validate()?;
        Ok(table)
    }

    pub fn from_path(path: &Path) -> Result<CharTable> {
        CharTable::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != crate::SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported characterization schema_version {}",
                self.schema_version
            )));
        }
        for (kind, c) in &self.kinds {
            c.validate(*kind)?;
        }
        let o = &self.overheads;
        let ok = [
            o.bundle_lut_per_instance,
            o.bundle_ff_per_instance,
            o.ctl_dsp,
            o.ctl_lut,
            o.ctl_ff,
            o.ctl_bram_kbit,
        ]
        .iter()
        .all(|v| v.is_finite() && *v >= 0.0);
        if !ok {
            return Err(Error::Config("overheads must be finite and non-negative".into()));
        }
        Ok(())
    }

    pub fn coefficients(&self, kind: IpKind) -> Result<&KindCoefficients> {
        self.kinds
            .get(&kind)
            .ok_or_else(|| Error::Config(format!("no characterization entry for template `{kind}`")))
    }

    fn lanes(&self, inst: &IpInstance) -> Result<f64> {
        let c = self.coefficients(inst.template)?;
        let word = if inst.template.is_computational() {
            inst.quant.weight_bytes()
        } else {
            inst.quant.activation_bytes()
        };
        Ok(f64::from(c.kernel * c.kernel) * f64::from(inst.pf) * word as f64)
    }

    /// Bytes of weights one invocation needs on chip.
    pub fn weight_tile_bytes(&self, inst: &IpInstance, tile: &TileShape) -> Result<u64> {
        let c = self.coefficients(inst.template)?;
        if !inst.template.is_computational() {
            return Ok(0);
        }
        let k2 = u64::from(c.kernel * c.kernel);
        let depth = if c.input_depth { u64::from(tile.channels) } else { 1 };
        Ok(k2 * u64::from(tile.channels) * depth * inst.quant.weight_bytes())
    }

    pub fn resources(&self, inst: &IpInstance, tile: &TileShape) -> Result<ResourceVector> {
        let c = self.coefficients(inst.template)?;
        let lanes = self.lanes(inst)?;
        let weight_kbit = self.weight_tile_bytes(inst, tile)? as f64 * 8.0 / 1024.0;
        Ok(ResourceVector::new(
            c.dsp_per_lane * lanes,
            c.lut_base + c.lut_per_lane * lanes,
            c.ff_base + c.ff_per_lane * lanes,
            weight_kbit + c.bram_per_lane_kbit * lanes,
        ))
    }

    /// Cycles for one invocation of `inst` on one tile.
    pub fn lat_cycles(&self, inst: &IpInstance, tile: &TileShape) -> Result<u64> {
        let c = self.coefficients(inst.template)?;
        let depth = if c.input_depth { u64::from(tile.channels) } else { 1 };
        let ops = tile.points() * depth * u64::from(c.kernel * c.kernel);
        let work = (ops as f64 * c.ops_per_point / f64::from(inst.pf)).ceil() as u64;
        Ok(c.invoke_overhead_cycles + work)
    }
}

/// Resources and per-invocation cycles of `inst` on `tile`.
pub fn characterize(inst: &IpInstance, tile: &TileShape, table: &CharTable) -> Result<(ResourceVector, u64)> {
    inst.validate()?;
    tile.validate()?;
    Ok((table.resources(inst, tile)?, table.lat_cycles(inst, tile)?))
}

fn ceil_div(a: u32, b: u32) -> u64 {
    u64::from(a.div_ceil(b))
}

/// Number of invocations of an instance needed to cover a layer.
///
/// Partial tiles cost a full invocation. Computational layers are tiled over
/// their output map; the others over their input map (a global pool reads the
/// whole map but writes one point per channel).
pub fn reuse_count(kind: IpKind, dims: &LayerDims, tile: &TileShape) -> Result<u64> {
    tile.validate()?;
    if dims.input.is_empty() || dims.output.is_empty() {
        return Err(Error::Domain(format!(
            "layer {} -> {} has a zero dimension",
            dims.input, dims.output
        )));
    }
    let spatial = if kind.is_computational() { dims.output } else { dims.input };
    Ok(ceil_div(spatial.width, tile.width)
        * ceil_div(spatial.height, tile.height)
        * ceil_div(dims.output.channels, tile.channels))
}
