use serde::{Deserialize, Serialize};

use crate::device::DeviceSpec;
use crate::dnn::{DnnModel, SegmentKind};
use crate::error::{Error, Result};
use crate::ip_catalog::{reuse_count, CharTable, FeatureDims, IpKind, LayerDims, QuantScheme, TileShape};

/// Optional plan passes; both off by default.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlanOptions {
    /// Alternate two on-chip tile buffers instead of one per pipeline edge.
    pub reuse_buffers: bool,
    /// Fold elementwise layers into the call of the layer before them.
    pub fuse_elementwise: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceDecl {
    pub index: usize,
    pub function: String,
    pub kind: IpKind,
    pub pf: u32,
    pub kernel: u32,
    pub lat_cycles: u64,
    /// On-chip weight slice for one output-channel tile.
    pub weight_tile_bytes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BufferLocation {
    OnChip,
    OffChip,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BufferDecl {
    pub name: String,
    pub location: BufferLocation,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerCall {
    pub layer: usize,
    pub instance: usize,
    pub dims: LayerDims,
    pub input: String,
    pub output: String,
    /// Weight buffer, for computational layers.
    pub weights: Option<String>,
    /// Elementwise layers folded into this call, in order.
    pub fused: Vec<FusedLayer>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusedLayer {
    pub layer: usize,
    pub instance: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightLoad {
    pub layer: usize,
    pub instance: usize,
    /// Offset of the layer's packed weights in the weight blob.
    pub offset: u64,
    pub slice_bytes: u64,
    pub slices: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentPlan {
    pub label: String,
    /// Off-chip array read, with the dims it is stored at.
    pub src: String,
    pub src_dims: FeatureDims,
    pub dst: String,
    pub dst_dims: FeatureDims,
    /// Subsampling applied while loading tiles.
    pub load_stride: u32,
    /// Start input-channel slices at the output-channel tile (false for
    /// standard convolutions, which read the first input-depth tile).
    pub slice_input_channels: bool,
    /// The tile loop reduces to one point per channel.
    pub global_reduce: bool,
    /// Tile loop bounds: x, y, output-channel tiles.
    pub tiles: [u32; 3],
    pub calls: Vec<LayerCall>,
    pub weight_loads: Vec<WeightLoad>,
}

impl SegmentPlan {
    pub fn reuse(&self) -> u64 {
        self.tiles.iter().map(|t| u64::from(*t)).product()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodegenPlan {
    pub schema_version: u32,
    pub model: String,
    pub tile: TileShape,
    pub quant: QuantScheme,
    pub instances: Vec<InstanceDecl>,
    pub buffers: Vec<BufferDecl>,
    pub segments: Vec<SegmentPlan>,
    pub layer_count: usize,
    pub weight_blob_bytes: u64,
    pub onchip_bytes: u64,
    pub bram_bytes: u64,
    pub options: PlanOptions,
}

impl CodegenPlan {
    pub fn schedule_len(&self) -> usize {
        self.segments.iter().map(|s| s.calls.len()).sum()
    }

    /// Every layer index the schedule executes, called or fused, in order.
    pub fn scheduled_layers(&self) -> Vec<usize> {
        self.segments
            .iter()
            .flat_map(|s| s.calls.iter())
            .flat_map(|c| std::iter::once(c.layer).chain(c.fused.iter().map(|f| f.layer)))
            .collect()
    }

    /// Checks coverage, buffer sizing and on-chip routing.
    pub fn validate(&self) -> Result<()> {
        let mut layers = self.scheduled_layers();
        layers.sort_unstable();
        if layers != (0..self.layer_count).collect::<Vec<_>>() {
            return Err(Error::Model("schedule does not cover every layer exactly once".into()));
        }
        let tile_bytes = self.tile.points() * self.quant.activation_bytes();
        for seg in &self.segments {
            for c in &seg.calls {
                for name in [&c.input, &c.output] {
                    let b = self
                        .buffers
                        .iter()
                        .find(|b| &b.name == name)
                        .ok_or_else(|| Error::Model(format!("call uses undeclared buffer `{name}`")))?;
                    if b.location != BufferLocation::OnChip {
                        return Err(Error::Model(format!("intra-segment edge routed through off-chip `{name}`")));
                    }
                    if b.bytes < tile_bytes {
                        return Err(Error::Model(format!("buffer `{name}` smaller than a tile")));
                    }
                }
                if let Some(w) = &c.weights {
                    let b = self
                        .buffers
                        .iter()
                        .find(|b| &b.name == w)
                        .ok_or_else(|| Error::Model(format!("call uses undeclared buffer `{w}`")))?;
                    if b.bytes < self.instances[c.instance].weight_tile_bytes {
                        return Err(Error::Model(format!("weight buffer `{w}` smaller than its slice")));
                    }
                }
            }
        }
        if self.onchip_bytes > self.bram_bytes {
            return Err(Error::Model("plan exceeds on-chip memory".into()));
        }
        Ok(())
    }
}

fn tile_buffer(i: usize) -> String {
    format!("t{i}")
}

fn tiles_of(dims: FeatureDims, channels: u32, tile: &TileShape) -> [u32; 3] {
    [
        dims.width.div_ceil(tile.width),
        dims.height.div_ceil(tile.height),
        channels.div_ceil(tile.channels),
    ]
}

/// Lays out calls, buffers and weight loads for `m` and checks them against the device's BRAM.
pub fn plan(m: &DnnModel, device: &DeviceSpec, table: &CharTable, opts: &PlanOptions) -> Result<CodegenPlan> {
    m.validate()?;
    let tile = m.tile;
    let quant = m.quant();
    let instances = m
        .accelerator_instances()
        .iter()
        .enumerate()
        .map(|(i, inst)| {
            Ok(InstanceDecl {
                index: i,
                function: format!("ip{i}_{}", inst.template.name()),
                kind: inst.template,
                pf: inst.pf,
                kernel: table.coefficients(inst.template)?.kernel,
                lat_cycles: table.lat_cycles(inst, &tile)?,
                weight_tile_bytes: table.weight_tile_bytes(inst, &tile)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let segments = m.segments()?;
    let mut plans = Vec::with_capacity(segments.len());
    let mut max_edges = 0;
    let mut weight_offset = 0;
    let mut src = ("fmap_in".to_string(), m.input_dims);
    let last = segments.len() - 1;

    for (si, seg) in segments.iter().enumerate() {
        let first = &seg.layers[0];
        let global_reduce = matches!(seg.kind, SegmentKind::Tail(i) if m.tail[i].global);
        let grid_dims = if first.inst.template.is_computational() {
            first.dims.output
        } else {
            first.dims.input
        };
        let out = seg.output();
        let tiles = tiles_of(grid_dims, out.channels, &tile);
        let reuse: u64 = tiles.iter().map(|t| u64::from(*t)).product();
        for l in &seg.layers {
            if reuse_count(l.inst.template, &l.dims, &tile)? != reuse {
                return Err(Error::Domain(format!("{}: layers do not share one tile grid", seg.kind)));
            }
        }
        let load_stride = if global_reduce { 1 } else { (src.1.width / grid_dims.width).max(1) };

        let mut calls: Vec<LayerCall> = Vec::new();
        let mut edge = 0;
        for l in &seg.layers {
            if opts.fuse_elementwise && l.inst.template.is_elementwise() {
                if let Some(prev) = calls.last_mut() {
                    prev.fused.push(FusedLayer {
                        layer: l.index,
                        instance: l.instance,
                    });
                    continue;
                }
            }
            let (input, output) = if opts.reuse_buffers {
                (tile_buffer(edge % 2), tile_buffer((edge + 1) % 2))
            } else {
                (tile_buffer(edge), tile_buffer(edge + 1))
            };
            calls.push(LayerCall {
                layer: l.index,
                instance: l.instance,
                dims: l.dims,
                input,
                output,
                weights: l.inst.template.is_computational().then(|| format!("w{}", l.instance)),
                fused: Vec::new(),
            });
            edge += 1;
        }
        max_edges = max_edges.max(edge);

        let mut weight_loads = Vec::new();
        for c in &calls {
            let decl = &instances[c.instance];
            if decl.weight_tile_bytes == 0 {
                continue;
            }
            let slices = u64::from(tiles[2]);
            weight_loads.push(WeightLoad {
                layer: c.layer,
                instance: c.instance,
                offset: weight_offset,
                slice_bytes: decl.weight_tile_bytes,
                slices,
            });
            weight_offset += slices * decl.weight_tile_bytes;
        }

        let dst = if si == last {
            "fmap_out".to_string()
        } else if si % 2 == 0 {
            "dram_a".to_string()
        } else {
            "dram_b".to_string()
        };
        plans.push(SegmentPlan {
            label: seg.kind.to_string(),
            src: src.0.clone(),
            src_dims: src.1,
            dst: dst.clone(),
            dst_dims: out,
            load_stride,
            slice_input_channels: !first.inst.template.is_standard_conv(),
            global_reduce,
            tiles,
            calls,
            weight_loads,
        });
        src = (dst, out);
    }

    let act = quant.activation_bytes();
    let tile_bytes = tile.points() * act;
    let mut buffers = Vec::new();
    let tile_buffers = if opts.reuse_buffers { 2 } else { max_edges + 1 };
    for i in 0..tile_buffers {
        buffers.push(BufferDecl {
            name: tile_buffer(i),
            location: BufferLocation::OnChip,
            bytes: tile_bytes,
        });
    }
    for d in &instances {
        if d.weight_tile_bytes > 0 {
            buffers.push(BufferDecl {
                name: format!("w{}", d.index),
                location: BufferLocation::OnChip,
                bytes: d.weight_tile_bytes,
            });
        }
    }
    let largest_map = |pick: &dyn Fn(&SegmentPlan) -> Option<FeatureDims>| -> u64 {
        plans.iter().filter_map(pick).map(|d| d.elements() * act).max().unwrap_or(0)
    };
    let dram_a = largest_map(&|s| (s.dst == "dram_a").then_some(s.dst_dims));
    let dram_b = largest_map(&|s| (s.dst == "dram_b").then_some(s.dst_dims));
    let off_chip = [
        ("fmap_in", m.input_dims.elements() * act),
        ("fmap_out", plans[last].dst_dims.elements() * act),
        ("dram_a", dram_a),
        ("dram_b", dram_b),
        ("weights", weight_offset),
    ];
    for (name, bytes) in off_chip {
        if bytes > 0 {
            buffers.push(BufferDecl {
                name: name.into(),
                location: BufferLocation::OffChip,
                bytes,
            });
        }
    }

    let bram_bytes = device.bram_bytes();
    let mut onchip = 0;
    for b in buffers.iter().filter(|b| b.location == BufferLocation::OnChip) {
        onchip += b.bytes;
        if onchip > bram_bytes {
            return Err(Error::Planning {
                buffer: b.name.clone(),
                needed: onchip,
                available: bram_bytes,
            });
        }
    }

    let plan = CodegenPlan {
        schema_version: crate::SCHEMA_VERSION,
        model: format!("{}x{}", m.bundle.label(), m.n_rep),
        tile,
        quant,
        instances,
        buffers,
        segments: plans,
        layer_count: m.layer_count(),
        weight_blob_bytes: weight_offset,
        onchip_bytes: onchip,
        bram_bytes,
        options: *opts,
    };
    plan.validate()?;
    Ok(plan)
}
