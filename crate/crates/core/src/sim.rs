//! Discrete-event simulation of the tiled accelerator, and calibration of the
//! analytical models against it.
//!
//! A segment (one bundle replication, or one head/tail layer) runs as a
//! linear pipeline: an off-chip load stage, one stage per layer and an
//! off-chip store stage. Tiles flow through stages separated by bounded
//! buffers; a stage that finishes a tile holds it until the downstream
//! buffer has room. Weights stream over the read channel before the first
//! input tile, and the next segment's weights are prefetched as soon as the
//! current segment's last input tile is loaded.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bundle::{eq2_latency, layer_dims, sequence_terms, structural_overhead, Bundle, BundleCalibration, BundleId, ReplicationShape};
use crate::device::DeviceSpec;
use crate::dnn::{dnn_latency, DnnCalibration, DnnModel, Segment};
use crate::error::{Error, Result};
use crate::ip_catalog::{reuse_count, CharTable, FeatureDims, IpInstance, LayerDims, QuantScheme, TileShape};
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimOptions {
    /// Model off-chip loads and stores. Disabled, only compute stages run.
    pub transfers: bool,
    /// Tiles each inter-stage buffer holds.
    pub buffer_depth: usize,
    /// Fixed DMA setup charged when a network starts and when it finishes.
    pub dma_setup_cycles: u64,
    /// Load the next segment's weights while the current one computes.
    pub prefetch_weights: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            transfers: true,
            buffer_depth: 1,
            dma_setup_cycles: 2_000,
            prefetch_weights: true,
        }
    }
}

impl SimOptions {
    pub fn validate(&self) -> Result<()> {
        if self.buffer_depth == 0 {
            return Err(Error::Config("buffer_depth must be >= 1".into()));
        }
        Ok(())
    }
}

/// One pipeline stage of a segment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineStage {
    pub name: String,
    pub instance: Option<IpInstance>,
    pub per_tile_cycles: u64,
}

/// Tile-level schedule of a linear pipeline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineSchedule {
    /// `start[k][s]`: cycle at which stage `s` begins tile `k`.
    pub start: Vec<Vec<u64>>,
    pub finish: Vec<Vec<u64>>,
    /// Cycle at which the tile left the stage (entered the next buffer).
    pub place: Vec<Vec<u64>>,
    /// Tiles each stage had to hold because its output buffer was full.
    pub stalls: Vec<u64>,
    pub end: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Finish {
    stage: usize,
    tile: usize,
}

/// Runs `tiles` tiles through stages with the given per-tile cycles.
///
/// The first stage may not begin before `release`.
pub fn run_pipeline(stage_cycles: &[u64], tiles: usize, depth: usize, release: u64) -> PipelineSchedule {
    let n = stage_cycles.len();
    let mut start = vec![vec![0; n]; tiles];
    let mut finish = vec![vec![0; n]; tiles];
    let mut place = vec![vec![0; n]; tiles];
    let mut stalls = vec![0; n];
    if n == 0 || tiles == 0 {
        return PipelineSchedule { start, finish, place, stalls, end: release };
    }

    let mut busy: Vec<Option<usize>> = vec![None; n];
    let mut holding: Vec<Option<usize>> = vec![None; n];
    let mut buffers: Vec<VecDeque<usize>> = vec![VecDeque::new(); n - 1];
    let mut next_source = 0;
    let mut done = 0;
    let mut events = BinaryHeap::new();
    let mut now = release;

    loop {
        // Propagate until nothing else can move at `now`.
        let mut moved = true;
        while moved {
            moved = false;
            for s in (0..n).rev() {
                if let Some(k) = holding[s] {
                    if s + 1 == n || buffers[s].len() < depth {
                        if s + 1 < n {
                            buffers[s].push_back(k);
                        } else {
                            done += 1;
                        }
                        place[k][s] = now;
                        if now > finish[k][s] {
                            stalls[s] += 1;
                        }
                        holding[s] = None;
                        moved = true;
                    }
                }
                if busy[s].is_none() && holding[s].is_none() {
                    let next = if s == 0 {
                        (next_source < tiles).then(|| {
                            next_source += 1;
                            next_source - 1
                        })
                    } else {
                        buffers[s - 1].pop_front()
                    };
                    if let Some(k) = next {
                        busy[s] = Some(k);
                        start[k][s] = now;
                        events.push(Reverse((now + stage_cycles[s], Finish { stage: s, tile: k })));
                        moved = true;
                    }
                }
            }
        }
        if done == tiles {
            break;
        }
        let Reverse((t, first)) = events.pop().expect("pipeline cannot deadlock with free sinks");
        now = t;
        let mut batch = vec![first];
        while let Some(Reverse((t2, _))) = events.peek() {
            if *t2 != now {
                break;
            }
            let Reverse((_, e)) = events.pop().expect("peeked");
            batch.push(e);
        }
        for e in batch {
            busy[e.stage] = None;
            holding[e.stage] = Some(e.tile);
            finish[e.tile][e.stage] = now;
        }
    }
    let end = place[tiles - 1][n - 1];
    PipelineSchedule { start, finish, place, stalls, end }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentTrace {
    pub label: String,
    pub tiles: usize,
    pub stages: Vec<PipelineStage>,
    pub weights_start: u64,
    pub weights_end: u64,
    pub begin: u64,
    pub end: u64,
    pub schedule: PipelineSchedule,
}

impl SegmentTrace {
    pub fn cycles(&self) -> u64 {
        self.end - self.begin
    }

    pub fn last_load_finish(&self) -> u64 {
        self.schedule.finish.last().map_or(self.begin, |row| row[0])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub segments: Vec<SegmentTrace>,
    pub total_cycles: u64,
    /// Cycles the read and write channels spent moving data.
    pub transfer_cycles: u64,
    pub stall_count: u64,
}

impl SimTrace {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }

    /// One-line summary for terminals.
    pub fn summary(&self) -> String {
        format!(
            "segments={} total_cycles={} transfer_cycles={} stalls={}",
            self.segments.len(),
            self.total_cycles,
            self.transfer_cycles,
            self.stall_count
        )
    }

    /// Checks the ordering invariants of every segment schedule.
    pub fn check_causality(&self) -> Result<()> {
        for seg in &self.segments {
            let sch = &seg.schedule;
            for k in 0..seg.tiles {
                for (s, stage) in seg.stages.iter().enumerate() {
                    let bad = |what: &str| Error::Domain(format!("{}: tile {k} stage {s} {what}", seg.label));
                    if sch.finish[k][s] != sch.start[k][s] + stage.per_tile_cycles {
                        return Err(bad("duration mismatch"));
                    }
                    if sch.place[k][s] < sch.finish[k][s] {
                        return Err(bad("left before finishing"));
                    }
                    if s == 0 && sch.start[k][s] < seg.weights_end.max(seg.begin) {
                        return Err(bad("started before its release"));
                    }
                    if s > 0 && sch.start[k][s] < sch.place[k][s - 1] {
                        return Err(bad("started before the previous stage handed it over"));
                    }
                    if k > 0 && sch.start[k][s] < sch.place[k - 1][s] {
                        return Err(bad("started while the stage held the previous tile"));
                    }
                }
            }
        }
        for pair in self.segments.windows(2) {
            if pair[1].begin < pair[0].end {
                return Err(Error::Domain(format!("{} overlaps {}", pair[1].label, pair[0].label)));
            }
        }
        Ok(())
    }
}

fn transfer_cycles(bytes: u64, bw: f64) -> u64 {
    (bytes as f64 / bw).ceil() as u64
}

/// Stages and tile count of a layer sequence.
fn build_stages(
    layers: &[(IpInstance, LayerDims)],
    read: FeatureDims,
    tile: &TileShape,
    bw: f64,
    table: &CharTable,
    opts: &SimOptions,
) -> Result<(Vec<PipelineStage>, usize, u64)> {
    if layers.is_empty() {
        return Err(Error::Domain("segment has no layers".into()));
    }
    if !bw.is_finite() || bw <= 0.0 {
        return Err(Error::Domain(format!("bandwidth must be positive, got {bw}")));
    }
    let mut reuse = Vec::with_capacity(layers.len());
    for (inst, dims) in layers {
        reuse.push(reuse_count(inst.template, dims, tile)?);
    }
    // Layers of one segment normally share a tile grid; when they do not,
    // each stage's work is spread evenly over the largest grid.
    let tiles = *reuse.iter().max().expect("non-empty");
    let (_, _, fp) = sequence_terms(layers, read, tile, bw, table)?;

    let mut stages = Vec::with_capacity(layers.len() + 2);
    if opts.transfers {
        stages.push(PipelineStage {
            name: "load".into(),
            instance: None,
            per_tile_cycles: transfer_cycles(fp.bytes_in.div_ceil(tiles), bw).max(1),
        });
    }
    for ((inst, _), r) in layers.iter().zip(&reuse) {
        let lat = table.lat_cycles(inst, tile)?;
        stages.push(PipelineStage {
            name: inst.template.name().into(),
            instance: Some(*inst),
            per_tile_cycles: (lat * r).div_ceil(tiles).max(1),
        });
    }
    if opts.transfers {
        stages.push(PipelineStage {
            name: "store".into(),
            instance: None,
            per_tile_cycles: transfer_cycles(fp.bytes_out.div_ceil(tiles), bw).max(1),
        });
    }
    let weights = if opts.transfers { transfer_cycles(fp.bytes_weights, bw) } else { 0 };
    Ok((stages, tiles as usize, weights))
}

fn simulate_segment(
    label: String,
    stages: Vec<PipelineStage>,
    tiles: usize,
    weights_start: u64,
    weights_end: u64,
    begin: u64,
    depth: usize,
) -> SegmentTrace {
    let cycles: Vec<u64> = stages.iter().map(|s| s.per_tile_cycles).collect();
    let schedule = run_pipeline(&cycles, tiles, depth, begin.max(weights_end));
    SegmentTrace {
        label,
        tiles,
        stages,
        weights_start,
        weights_end,
        begin,
        end: schedule.end,
        schedule,
    }
}

fn finish_trace(segments: Vec<SegmentTrace>, total: u64, bw_transfers: u64) -> SimTrace {
    let stall_count = segments.iter().flat_map(|s| s.schedule.stalls.iter()).sum();
    SimTrace {
        segments,
        total_cycles: total,
        transfer_cycles: bw_transfers,
        stall_count,
    }
}

fn io_cycles(stages: &[PipelineStage], tiles: usize, weights: u64) -> u64 {
    weights
        + stages
            .iter()
            .filter(|s| s.instance.is_none())
            .map(|s| s.per_tile_cycles * tiles as u64)
            .sum::<u64>()
}

/// Simulates one execution of `bundle` on a replication of the given shape.
pub fn simulate_bundle(
    bundle: &Bundle,
    shape: &ReplicationShape,
    tile: &TileShape,
    bw: f64,
    table: &CharTable,
    opts: &SimOptions,
) -> Result<SimTrace> {
    opts.validate()?;
    bundle.validate()?;
    let dims = layer_dims(bundle, shape);
    let layers: Vec<_> = bundle.instances.iter().copied().zip(dims).collect();
    let read = FeatureDims::new(shape.width, shape.height, shape.in_channels);
    let (stages, tiles, weights) = build_stages(&layers, read, tile, bw, table, opts)?;
    let io = io_cycles(&stages, tiles, weights);
    let seg = simulate_segment(bundle.label(), stages, tiles, 0, weights, 0, opts.buffer_depth);
    let total = seg.end;
    Ok(finish_trace(vec![seg], total, io))
}

/// Simulates a whole network: segments back to back, weights prefetched,
/// DMA setup charged at both ends.
pub fn simulate_dnn(m: &DnnModel, device: &DeviceSpec, table: &CharTable, opts: &SimOptions) -> Result<SimTrace> {
    opts.validate()?;
    m.validate()?;
    let segs: Vec<Segment> = m.segments()?;
    let mut built = Vec::with_capacity(segs.len());
    for seg in &segs {
        built.push(build_stages(&seg.instances_and_dims(), seg.read, &m.tile, device.bw, table, opts)?);
    }

    let setup = if opts.transfers { opts.dma_setup_cycles } else { 0 };
    let mut traces: Vec<SegmentTrace> = Vec::with_capacity(segs.len());
    let mut io = 0;
    let mut prev_end = setup;
    let mut weights_ready: Option<(u64, u64)> = None;
    for (i, (seg, (stages, tiles, weights))) in segs.iter().zip(built.iter().cloned()).enumerate() {
        io += io_cycles(&stages, tiles, weights);
        let (w_start, w_end) = match weights_ready.take() {
            Some(w) => w,
            None => (prev_end, prev_end + weights),
        };
        let trace = simulate_segment(seg.kind.to_string(), stages, tiles, w_start, w_end, prev_end.max(w_end), opts.buffer_depth);
        if let Some((_, _, next_w)) = built.get(i + 1) {
            if opts.prefetch_weights {
                // The read channel is free once the last input tile is in.
                let from = trace.last_load_finish();
                weights_ready = Some((from, from + next_w));
            }
        }
        prev_end = trace.end;
        traces.push(trace);
    }
    Ok(finish_trace(traces, prev_end + setup, io + 2 * setup))
}

/// Regressors and simulated total of one calibration run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSample {
    /// Σ Comp_j, cycles.
    pub comp: f64,
    /// Θ / bw, cycles.
    pub transfer: f64,
    /// Simulated total, cycles.
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaBetaFit {
    pub alpha: f64,
    pub beta: f64,
    /// Largest |predicted − total| / total over the fitted samples.
    pub max_rel_residual: f64,
    /// β was clamped to zero.
    pub clamped: bool,
}

impl AlphaBetaFit {
    pub fn predict(&self, comp: f64, transfer: f64) -> f64 {
        self.alpha * comp + self.beta * transfer
    }
}

/// Least squares for `total ≈ α · comp + β · transfer`, no intercept.
///
/// A negative β is refit with β = 0 (and likewise α).
pub fn fit_alpha_beta(samples: &[CalibrationSample]) -> Result<AlphaBetaFit> {
    if samples.len() < 4 {
        return Err(Error::Calibration(format!("need at least 4 samples, got {}", samples.len())));
    }
    if samples.iter().any(|s| !(s.comp.is_finite() && s.transfer.is_finite() && s.total.is_finite())) {
        return Err(Error::Calibration("non-finite calibration sample".into()));
    }
    // Normalize columns so the 2×2 system is well conditioned.
    let nc = samples.iter().map(|s| s.comp * s.comp).sum::<f64>().sqrt();
    let nt = samples.iter().map(|s| s.transfer * s.transfer).sum::<f64>().sqrt();
    if nc == 0.0 || nt == 0.0 {
        return Err(Error::Calibration("rank-deficient samples: a regressor is identically zero".into()));
    }
    let (mut scc, mut sct, mut stt, mut scy, mut sty) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for s in samples {
        let (c, t) = (s.comp / nc, s.transfer / nt);
        scc += c * c;
        sct += c * t;
        stt += t * t;
        scy += c * s.total;
        sty += t * s.total;
    }
    let det = scc * stt - sct * sct;
    if det.abs() < 1e-10 {
        return Err(Error::Calibration("rank-deficient samples: regressors are collinear".into()));
    }
    let mut alpha = (stt * scy - sct * sty) / det / nc;
    let mut beta = (scc * sty - sct * scy) / det / nt;
    let mut clamped = false;
    if beta < 0.0 {
        beta = 0.0;
        alpha = scy / scc / nc;
        clamped = true;
    } else if alpha < 0.0 {
        alpha = 0.0;
        beta = sty / stt / nt;
    }
    let max_rel_residual = samples
        .iter()
        .map(|s| ((alpha * s.comp + beta * s.transfer) - s.total).abs() / s.total.abs().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    Ok(AlphaBetaFit { alpha, beta, max_rel_residual, clamped })
}

/// One calibration configuration: instantiation plus replication shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleConfig {
    pub pf: u32,
    pub quant: QuantScheme,
    pub shape: ReplicationShape,
}

const SAMPLE_PF: [u32; 4] = [1, 2, 4, 8];

/// Random compute-bound configurations: maps of 32–96 pixels a side, 8–32
/// input channels and at least as many output channels.
pub fn sample_configs(count: usize, seed: u64) -> Vec<SampleConfig> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let pf = SAMPLE_PF[rng.random_range(0..SAMPLE_PF.len())];
            let bits = if rng.random_bool(0.5) { 8 } else { 16 };
            let width = 8 * rng.random_range(4..=12u32);
            let height = 8 * rng.random_range(4..=12u32);
            let in_channels = 8 * rng.random_range(1..=4u32);
            let out_channels = 8 * rng.random_range(in_channels / 8..=8u32).max(2);
            SampleConfig {
                pf,
                quant: QuantScheme {
                    weight_bits: bits,
                    activation_bits: bits,
                    ..QuantScheme::default()
                },
                shape: ReplicationShape {
                    width,
                    height,
                    in_channels,
                    out_channels,
                },
            }
        })
        .collect()
}

/// Runs the simulator on one configuration and returns the regression sample.
pub fn measure(bundle: &Bundle, cfg: &SampleConfig, tile: &TileShape, bw: f64, table: &CharTable, opts: &SimOptions) -> Result<CalibrationSample> {
    let b = bundle.with_config(cfg.pf, cfg.quant);
    let dims = layer_dims(&b, &cfg.shape);
    let layers: Vec<_> = b.instances.iter().copied().zip(dims).collect();
    let read = FeatureDims::new(cfg.shape.width, cfg.shape.height, cfg.shape.in_channels);
    let (comp, transfer, _) = sequence_terms(&layers, read, tile, bw, table)?;
    let trace = simulate_bundle(&b, &cfg.shape, tile, bw, table, opts)?;
    Ok(CalibrationSample {
        comp: comp as f64,
        transfer,
        total: trace.total_cycles as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibOptions {
    pub samples_per_bundle: usize,
    /// Held-out configurations used only to report prediction error.
    pub holdout_per_bundle: usize,
    pub seed: u64,
}

impl Default for CalibOptions {
    fn default() -> Self {
        CalibOptions {
            samples_per_bundle: 8,
            holdout_per_bundle: 8,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleCalibEntry {
    pub id: BundleId,
    pub label: String,
    pub calib: BundleCalibration,
    pub fit_max_rel_residual: f64,
    pub holdout_max_rel_error: f64,
    pub beta_clamped: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub bundles: Vec<BundleCalibEntry>,
    pub dnn: DnnCalibration,
}

impl CalibrationReport {
    pub fn calibrated(&self, bundle: &Bundle) -> Bundle {
        let mut out = bundle.clone();
        if let Some(e) = self.bundles.iter().find(|e| e.id == bundle.id) {
            out.calib = Some(e.calib);
        }
        out
    }

    pub fn worst_holdout_error(&self) -> f64 {
        self.bundles.iter().map(|e| e.holdout_max_rel_error).fold(0.0, f64::max)
    }
}

fn calibrate_bundle(
    index: usize,
    bundle: &Bundle,
    copts: &CalibOptions,
    tile: &TileShape,
    device: &DeviceSpec,
    table: &CharTable,
    opts: &SimOptions,
) -> Result<BundleCalibEntry> {
    let configs = sample_configs(copts.samples_per_bundle + copts.holdout_per_bundle, derive_seed(copts.seed, index as u64));
    let (train, test) = configs.split_at(copts.samples_per_bundle);
    let samples = train
        .iter()
        .map(|c| measure(bundle, c, tile, device.bw, table, opts))
        .collect::<Result<Vec<_>>>()?;
    let fit = fit_alpha_beta(&samples)
        .map_err(|e| Error::Calibration(format!("{}: {e}", bundle.label())))?;
    let mut holdout = 0.0f64;
    for c in test {
        let s = measure(bundle, c, tile, device.bw, table, opts)?;
        holdout = holdout.max((fit.predict(s.comp, s.transfer) - s.total).abs() / s.total);
    }
    let calib = BundleCalibration {
        alpha: fit.alpha,
        beta: fit.beta,
        gamma_res: structural_overhead(&bundle.with_config(1, QuantScheme::default()), tile, table),
    };
    let warnings = calib.range_warnings();
    for w in &warnings {
        log::warn!("{}: {w}", bundle.label());
    }
    Ok(BundleCalibEntry {
        id: bundle.id,
        label: bundle.label(),
        calib,
        fit_max_rel_residual: fit.max_rel_residual,
        holdout_max_rel_error: holdout,
        beta_clamped: fit.clamped,
        warnings,
    })
}

/// Fits α, β per bundle against the simulator, sets Γ from the structural
/// overhead, and fits φ for the network-level data-movement term.
pub fn calibrate(
    bundles: &[Bundle],
    copts: &CalibOptions,
    tile: &TileShape,
    device: &DeviceSpec,
    table: &CharTable,
    opts: &SimOptions,
) -> Result<CalibrationReport> {
    if copts.samples_per_bundle < 4 {
        return Err(Error::Calibration(format!(
            "need at least 4 samples per bundle, got {}",
            copts.samples_per_bundle
        )));
    }
    let entries = bundles
        .par_iter()
        .enumerate()
        .map(|(i, b)| calibrate_bundle(i, b, copts, tile, device, table, opts))
        .collect::<Result<Vec<_>>>()?;
    let mut report = CalibrationReport {
        bundles: entries,
        dnn: DnnCalibration {
            phi: 0.0,
            lat_dm: if opts.transfers { opts.dma_setup_cycles as f64 } else { 0.0 },
            gamma_ctl: 1.0,
            res_ctl: table.overheads.controller(),
        },
    };
    let probes = bundles
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let cfg = sample_configs(1, derive_seed(copts.seed ^ 0x5eed, i as u64))[0];
            let input = FeatureDims::new(cfg.shape.width, cfg.shape.height, cfg.shape.in_channels);
            DnnModel::new(
                report.calibrated(&b.with_config(cfg.pf, cfg.quant)),
                3,
                vec![1, 0],
                vec![2, 2],
                vec![1.0, 1.5],
                input,
                *tile,
                report.dnn,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    report.dnn.phi = fit_phi(&probes, report.dnn.lat_dm, device, table, opts)?;
    Ok(report)
}

/// φ such that `φ · lat_dm` is the mean gap between simulated network totals
/// and the sum of per-segment estimates.
pub fn fit_phi(models: &[DnnModel], lat_dm: f64, device: &DeviceSpec, table: &CharTable, opts: &SimOptions) -> Result<f64> {
    if lat_dm <= 0.0 || models.is_empty() {
        return Ok(0.0);
    }
    let residuals = models
        .par_iter()
        .map(|m| {
            let mut m = m.clone();
            m.calib.phi = 0.0;
            let est = dnn_latency(&m, device, table)?.cycles;
            let sim = simulate_dnn(&m, device, table, opts)?.total_cycles as f64;
            Ok(sim - est)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = residuals.iter().sum::<f64>() / residuals.len() as f64;
    Ok((mean / lat_dm).max(0.0))
}

/// Relative error of the analytical network estimate against the simulator.
pub fn dnn_model_error(m: &DnnModel, device: &DeviceSpec, table: &CharTable, opts: &SimOptions) -> Result<f64> {
    let est = dnn_latency(m, device, table)?.cycles;
    let sim = simulate_dnn(m, device, table, opts)?.total_cycles as f64;
    Ok((est - sim).abs() / sim)
}

/// Calibrated bundle-latency estimate of one configuration under `calib`, for fidelity checks.
pub fn estimate_config(bundle: &Bundle, cfg: &SampleConfig, calib: &BundleCalibration, tile: &TileShape, bw: f64, table: &CharTable) -> Result<f64> {
    let b = bundle.with_config(cfg.pf, cfg.quant);
    let dims = layer_dims(&b, &cfg.shape);
    let layers: Vec<_> = b.instances.iter().copied().zip(dims).collect();
    let read = FeatureDims::new(cfg.shape.width, cfg.shape.height, cfg.shape.in_channels);
    let (comp, _, fp) = sequence_terms(&layers, read, tile, bw, table)?;
    eq2_latency(calib.alpha, calib.beta, comp as f64, fp.total() as f64, bw)
}
