//! Bundle evaluation and Pareto-based selection.
//!
//! Coarse evaluation scores every (bundle, pf) pair on a small evaluation
//! network; records are grouped into DSP bands and the latency/accuracy Pareto
//! front of each band is kept. Fine evaluation ranks the survivors over
//! replication counts and activation clips.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::process::{Command, Stdio};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bundle::{Bundle, BundleId};
use crate::device::DeviceSpec;
use crate::dnn::{dnn_latency, dnn_resource, model_stats, DnnCalibration, DnnModel, FixedLayer};
use crate::error::{Error, Result};
use crate::ip_catalog::{ActivationClip, CharTable, FeatureDims, IpKind, QuantScheme, ResourceVector, TileShape};
use crate::seed::mix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstructionMethod {
    /// Fixed stem, one bundle replication, fixed pooling + pointwise tail.
    FixedHeadTail,
    /// `n` bare replications.
    PureReplication,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub bundle_id: BundleId,
    pub method: ConstructionMethod,
    pub n_rep: u32,
    pub pf: u32,
    pub quant: QuantScheme,
    pub latency_ms: f64,
    pub resource: ResourceVector,
    pub accuracy: f64,
    /// False when the evaluator failed; such records never enter a Pareto front.
    pub valid: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// What the evaluator is asked to score against.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskDescriptor {
    pub name: String,
    pub seed: u64,
}

impl Default for TaskDescriptor {
    fn default() -> Self {
        TaskDescriptor {
            name: "detection".into(),
            seed: 0,
        }
    }
}

/// Scores a model on a task, in [0, 1]. Must be deterministic for a fixed seed.
pub trait AccuracyEvaluator: Send + Sync {
    fn evaluate(&self, model: &DnnModel, task: &TaskDescriptor) -> Result<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProxyCoefficients {
    pub a_params: f64,
    pub b_ops: f64,
    /// Bonus for bundles mixing standard and depth-wise convolution.
    pub c_mixed: f64,
    pub d_bias: f64,
    pub relu4: f64,
    pub relu8: f64,
    pub wide_quant: f64,
    pub noise_std: f64,
}

impl Default for ProxyCoefficients {
    fn default() -> Self {
        ProxyCoefficients {
            a_params: 0.15,
            b_ops: 0.1,
            c_mixed: 0.2,
            d_bias: -3.0,
            relu4: 0.03,
            relu8: 0.05,
            wide_quant: 0.1,
            noise_std: 0.05,
        }
    }
}

/// Training-free stand-in: a logistic function of model size and structure
/// with seeded noise. Independent of pf.
#[derive(Debug, Clone)]
pub struct SyntheticProxy {
    pub coeffs: ProxyCoefficients,
    table: CharTable,
}

impl SyntheticProxy {
    pub fn new(coeffs: ProxyCoefficients, table: &CharTable) -> Self {
        SyntheticProxy {
            coeffs,
            table: table.clone(),
        }
    }

    /// Hash of everything the score depends on; pf is deliberately absent.
    fn structure_key(m: &DnnModel, task_seed: u64) -> u64 {
        let q = m.quant();
        let mut h = mix64(task_seed ^ u64::from(m.bundle.id.0));
        let mut fold = |v: u64| h = mix64(h ^ v);
        for k in m.bundle.kinds() {
            fold(k as u64);
        }
        fold(u64::from(m.n_rep));
        for x in &m.x_ds {
            fold(u64::from(*x));
        }
        for p in &m.pi_ch {
            fold(p.to_bits());
        }
        for l in m.head.iter().chain(&m.tail) {
            fold(l.kind as u64 | u64::from(l.stride) << 8);
        }
        fold(u64::from(q.weight_bits) | u64::from(q.activation_bits) << 8 | (q.activation_clip as u64) << 16);
        fold(u64::from(m.input_dims.width) | u64::from(m.input_dims.height) << 20 | u64::from(m.input_dims.channels) << 40);
        h
    }
}

impl AccuracyEvaluator for SyntheticProxy {
    fn evaluate(&self, m: &DnnModel, task: &TaskDescriptor) -> Result<f64> {
        let c = &self.coeffs;
        let stats = model_stats(m, &self.table)?;
        let kinds = m.bundle.kinds();
        let mixed = kinds.iter().any(|k| k.is_standard_conv()) && kinds.iter().any(|k| k.is_depthwise());
        let q = m.quant();
        let clip = match q.activation_clip {
            ActivationClip::Relu => 0.0,
            ActivationClip::Relu4 => c.relu4,
            ActivationClip::Relu8 => c.relu8,
        };
        let wide = if q.weight_bits > 8 { c.wide_quant } else { 0.0 };
        let noise = if c.noise_std > 0.0 {
            let dist = Normal::new(0.0, c.noise_std).map_err(|e| Error::Evaluator(e.to_string()))?;
            dist.sample(&mut ChaCha8Rng::seed_from_u64(Self::structure_key(m, task.seed)))
        } else {
            0.0
        };
        let z = c.a_params * (stats.params.max(1) as f64).ln()
            + c.b_ops * (stats.macs.max(1) as f64).ln()
            + if mixed { c.c_mixed } else { 0.0 }
            + c.d_bias
            + clip
            + wide
            + noise;
        Ok(1.0 / (1.0 + (-z).exp()))
    }
}

/// Runs a command with the model JSON on stdin and reads one score line back.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalEvaluator {
    pub program: String,
    #[serde(default)]
    pub args: Vec<String>,
}

impl AccuracyEvaluator for ExternalEvaluator {
    fn evaluate(&self, m: &DnnModel, task: &TaskDescriptor) -> Result<f64> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .env("COSEARCH_TASK", &task.name)
            .env("COSEARCH_SEED", task.seed.to_string())
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| Error::Evaluator(format!("cannot start `{}`: {e}", self.program)))?;
        {
            let mut stdin = child.stdin.take().expect("stdin is piped");
            // A scorer that exits without reading is reported through its output.
            let _ = stdin.write_all(m.to_json().as_bytes());
        }
        let mut out = String::new();
        child
            .stdout
            .take()
            .expect("stdout is piped")
            .read_to_string(&mut out)
            .map_err(|e| Error::Evaluator(e.to_string()))?;
        let status = child.wait().map_err(|e| Error::Evaluator(e.to_string()))?;
        if !status.success() {
            return Err(Error::Evaluator(format!("`{}` exited with {status}", self.program)));
        }
        let line = out
            .lines()
            .find(|l| !l.trim().is_empty())
            .ok_or_else(|| Error::Evaluator(format!("`{}` printed no score", self.program)))?;
        parse_score_line(line)
    }
}

/// Parses `0.73`, `score=0.73` or `score: 0.73`; the value must lie in [0, 1].
pub fn parse_score_line(line: &str) -> Result<f64> {
    let t = line.trim();
    let value = match t.strip_prefix("score") {
        Some(rest) => rest
            .trim_start()
            .strip_prefix(['=', ':'])
            .ok_or_else(|| Error::Parse(format!("expected `=` or `:` after `score` in {t:?}")))?
            .trim(),
        None => t,
    };
    let v: f64 = value
        .parse()
        .map_err(|_| Error::Parse(format!("not a number: {value:?}")))?;
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Parse(format!("score {v} outside [0, 1]")));
    }
    Ok(v)
}

/// Shapes of the evaluation networks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalNetOptions {
    /// Input of the replicated body; the fixed stem sees twice the spatial size and 3 channels.
    pub body_input: FeatureDims,
    pub tile: TileShape,
    /// Channels produced by the pointwise tail.
    pub outputs: u32,
}

impl Default for EvalNetOptions {
    fn default() -> Self {
        EvalNetOptions {
            body_input: FeatureDims::new(160, 80, 16),
            tile: TileShape::default(),
            outputs: 16,
        }
    }
}

/// Evaluation network for `bundle` (already at its pf and quantization).
pub fn build_eval_dnn(
    bundle: &Bundle,
    method: ConstructionMethod,
    reps: u32,
    net: &EvalNetOptions,
    calib: DnnCalibration,
) -> Result<DnnModel> {
    if reps == 0 {
        return Err(Error::Model("evaluation network needs at least one replication".into()));
    }
    match method {
        ConstructionMethod::PureReplication => DnnModel::plain(bundle.clone(), reps, net.body_input, net.tile, calib),
        ConstructionMethod::FixedHeadTail => {
            let mut m = DnnModel::plain(bundle.clone(), 1, net.body_input, net.tile, calib)?;
            let body = net.body_input;
            m.input_dims = FeatureDims::new(body.width * 2, body.height * 2, 3);
            m.head = vec![FixedLayer {
                stride: 2,
                out_channels: Some(body.channels),
                ..FixedLayer::new(IpKind::Conv3x3)
            }];
            m.tail = vec![
                FixedLayer {
                    global: true,
                    ..FixedLayer::new(IpKind::AvgPool)
                },
                FixedLayer {
                    out_channels: Some(net.outputs),
                    ..FixedLayer::new(IpKind::Conv1x1)
                },
            ];
            m.refresh()?;
            Ok(m)
        }
    }
}

/// Shared inputs of coarse and fine evaluation.
pub struct EvalContext<'a> {
    pub evaluator: &'a dyn AccuracyEvaluator,
    pub task: TaskDescriptor,
    pub device: &'a DeviceSpec,
    pub table: &'a CharTable,
    pub net: EvalNetOptions,
    pub calib: DnnCalibration,
}

fn record(
    ctx: &EvalContext<'_>,
    model: &DnnModel,
    method: ConstructionMethod,
    reps: u32,
    accuracy: &std::result::Result<f64, String>,
) -> Result<EvalRecord> {
    let latency = dnn_latency(model, ctx.device, ctx.table)?;
    let resource = dnn_resource(model, ctx.table)?;
    let (accuracy, valid, error) = match (accuracy, resource.first_exceeding(&ctx.device.budget)) {
        (acc, Some((name, used, cap))) => (
            acc.as_ref().copied().unwrap_or(0.0),
            false,
            Some(format!("{name} {used} exceeds device budget {cap}")),
        ),
        (Ok(a), None) => (*a, true, None),
        (Err(e), None) => (0.0, false, Some(e.clone())),
    };
    Ok(EvalRecord {
        bundle_id: model.bundle.id,
        method,
        n_rep: reps,
        pf: model.pf(),
        quant: model.quant(),
        latency_ms: latency.ms,
        resource,
        accuracy,
        valid,
        error,
    })
}

fn score(ctx: &EvalContext<'_>, model: &DnnModel) -> std::result::Result<f64, String> {
    match ctx.evaluator.evaluate(model, &ctx.task) {
        Ok(a) if (0.0..=1.0).contains(&a) => Ok(a),
        Ok(a) => Err(format!("evaluator returned {a}, outside [0, 1]")),
        Err(e) => {
            log::warn!("bundle {}: {e}", model.bundle.id);
            Err(e.to_string())
        }
    }
}

/// One record per (bundle, pf). Accuracy is scored once per bundle and shared
/// by all of its pf variants.
pub fn coarse_evaluate(
    bundles: &[Bundle],
    pf_set: &[u32],
    method: ConstructionMethod,
    quant: QuantScheme,
    ctx: &EvalContext<'_>,
) -> Result<Vec<EvalRecord>> {
    if pf_set.is_empty() {
        return Err(Error::Config("coarse evaluation needs at least one pf".into()));
    }
    let per_bundle = bundles
        .par_iter()
        .map(|b| {
            let mut out = Vec::with_capacity(pf_set.len());
            let mut accuracy = None;
            for &pf in pf_set {
                let m = build_eval_dnn(&b.with_config(pf, quant), method, 1, &ctx.net, ctx.calib)?;
                let acc = accuracy.get_or_insert_with(|| score(ctx, &m));
                out.push(record(ctx, &m, method, 1, acc)?);
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_bundle.into_iter().flatten().collect())
}

/// Records over bundles × replication counts × activation clips.
pub fn fine_evaluate(
    bundles: &[Bundle],
    rep_counts: &[u32],
    clips: &[ActivationClip],
    pf: u32,
    quant: QuantScheme,
    ctx: &EvalContext<'_>,
) -> Result<Vec<EvalRecord>> {
    if bundles.is_empty() {
        return Err(Error::Config("fine evaluation needs at least one bundle".into()));
    }
    let mut grid = Vec::new();
    for b in bundles {
        for &n in rep_counts {
            for &clip in clips {
                grid.push((b, n, clip));
            }
        }
    }
    grid.par_iter()
        .map(|(b, n, clip)| {
            let q = QuantScheme {
                activation_clip: *clip,
                ..quant
            };
            let m = build_eval_dnn(&b.with_config(pf, q), ConstructionMethod::PureReplication, *n, &ctx.net, ctx.calib)?;
            let acc = score(ctx, &m);
            record(ctx, &m, ConstructionMethod::PureReplication, *n, &acc)
        })
        .collect()
}

/// DSP band of a record.
pub fn dsp_band(r: &EvalRecord, band_width: f64) -> i64 {
    (r.resource.dsp / band_width).floor() as i64
}

/// Indices of the (latency ↓, accuracy ↑) Pareto front of `records[idx]`.
///
/// Sorts by latency and sweeps, keeping the best accuracy seen at strictly
/// lower latency; equal-latency records are handled as one group.
pub fn pareto_front(records: &[EvalRecord], idx: &[usize]) -> Vec<usize> {
    let mut order: Vec<usize> = idx.to_vec();
    order.sort_by(|&a, &b| records[a].latency_ms.total_cmp(&records[b].latency_ms).then(a.cmp(&b)));
    let mut front = Vec::new();
    let mut best_before = f64::NEG_INFINITY;
    let mut i = 0;
    while i < order.len() {
        let lat = records[order[i]].latency_ms;
        let mut j = i;
        while j < order.len() && records[order[j]].latency_ms == lat {
            j += 1;
        }
        let group = &order[i..j];
        let gmax = group.iter().map(|&k| records[k].accuracy).fold(f64::NEG_INFINITY, f64::max);
        if gmax > best_before {
            front.extend(group.iter().copied().filter(|&k| records[k].accuracy == gmax));
        }
        best_before = best_before.max(gmax);
        i = j;
    }
    front.sort_unstable();
    front
}

/// Valid record indices grouped by DSP band, bands in ascending order.
fn bands(records: &[EvalRecord], band_width: f64) -> Vec<Vec<usize>> {
    let mut keys: Vec<i64> = records
        .iter()
        .filter(|r| r.valid)
        .map(|r| dsp_band(r, band_width))
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys.iter()
        .map(|k| {
            (0..records.len())
                .filter(|&i| records[i].valid && dsp_band(&records[i], band_width) == *k)
                .collect()
        })
        .collect()
}

/// Indices of every record on its band's Pareto front.
pub fn pareto_front_records(records: &[EvalRecord], band_width: f64) -> Vec<usize> {
    let mut out: Vec<usize> = bands(records, band_width)
        .iter()
        .flat_map(|b| pareto_front(records, b))
        .collect();
    out.sort_unstable();
    out
}

/// Bundle ids owning at least one front record in some band.
pub fn pareto_select(records: &[EvalRecord], band_width: f64) -> Vec<BundleId> {
    let ids: BTreeSet<BundleId> = pareto_front_records(records, band_width)
        .into_iter()
        .map(|i| records[i].bundle_id)
        .collect();
    ids.into_iter().collect()
}

/// Successive Pareto layers: front 0, then the front of what remains, and so on.
pub fn peel_fronts(records: &[EvalRecord], band_width: f64) -> Vec<Vec<usize>> {
    let mut remaining = bands(records, band_width);
    let mut layers = Vec::new();
    while remaining.iter().any(|b| !b.is_empty()) {
        let mut layer = Vec::new();
        for band in remaining.iter_mut() {
            if band.is_empty() {
                continue;
            }
            let front = pareto_front(records, band);
            band.retain(|i| !front.contains(i));
            layer.extend(front);
        }
        layer.sort_unstable();
        layers.push(layer);
    }
    layers
}

/// At least `want` bundle ids (when available): the Pareto union first,
/// topped up from deeper fronts.
pub fn candidate_bundles(records: &[EvalRecord], band_width: f64, want: usize) -> Vec<BundleId> {
    let mut chosen = BTreeSet::new();
    for layer in peel_fronts(records, band_width) {
        chosen.extend(layer.iter().map(|&i| records[i].bundle_id));
        if chosen.len() >= want {
            break;
        }
    }
    chosen.into_iter().collect()
}

/// Bundles by mean valid accuracy, best first; ties by id.
pub fn rank_bundles(records: &[EvalRecord]) -> Vec<(BundleId, f64)> {
    let mut sums: std::collections::BTreeMap<BundleId, (f64, usize)> = std::collections::BTreeMap::new();
    for r in records.iter().filter(|r| r.valid) {
        let e = sums.entry(r.bundle_id).or_default();
        e.0 += r.accuracy;
        e.1 += 1;
    }
    let mut out: Vec<(BundleId, f64)> = sums.into_iter().map(|(id, (s, n))| (id, s / n as f64)).collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    out
}

pub fn records_to_csv(records: &[EvalRecord]) -> String {
    let mut s = String::from("bundle_id,method,n_rep,pf,weight_bits,activation_clip,latency_ms,dsp,lut,ff,bram_kbit,accuracy,valid\n");
    for r in records {
        let method = match r.method {
            ConstructionMethod::FixedHeadTail => "fixed_head_tail",
            ConstructionMethod::PureReplication => "pure_replication",
        };
        s.push_str(&format!(
            "{},{},{},{},{},{},{:.6},{},{},{},{:.3},{:.6},{}\n",
            r.bundle_id.0,
            method,
            r.n_rep,
            r.pf,
            r.quant.weight_bits,
            r.quant.activation_clip.name(),
            r.latency_ms,
            r.resource.dsp,
            r.resource.lut,
            r.resource.ff,
            r.resource.bram_kbit,
            r.accuracy,
            r.valid
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::enumerate_bundles;
    use crate::ip_catalog::builtin_templates;
    use proptest::prelude::{prop, prop_assert_eq, proptest};

    fn rec(id: u32, lat: f64, acc: f64, dsp: f64) -> EvalRecord {
        EvalRecord {
            bundle_id: BundleId(id),
            method: ConstructionMethod::FixedHeadTail,
            n_rep: 1,
            pf: 1,
            quant: QuantScheme::default(),
            latency_ms: lat,
            resource: ResourceVector::new(dsp, 0.0, 0.0, 0.0),
            accuracy: acc,
            valid: true,
            error: None,
        }
    }

    fn dominates(a: &EvalRecord, b: &EvalRecord) -> bool {
        a.latency_ms <= b.latency_ms && a.accuracy >= b.accuracy && (a.latency_ms < b.latency_ms || a.accuracy > b.accuracy)
    }

    fn brute(records: &[EvalRecord], width: f64) -> Vec<usize> {
        (0..records.len())
            .filter(|&i| {
                !(0..records.len()).any(|j| {
                    dsp_band(&records[j], width) == dsp_band(&records[i], width) && dominates(&records[j], &records[i])
                })
            })
            .collect()
    }

    #[test]
    fn dominated_record_is_dropped() {
        let r = vec![rec(1, 10.0, 0.8, 5.0), rec(2, 12.0, 0.7, 5.0)];
        assert_eq!(pareto_select(&r, 44.0), vec![BundleId(1)]);
    }

    #[test]
    fn identical_records_all_kept() {
        let r: Vec<_> = (1..=4).map(|i| rec(i, 10.0, 0.5, 5.0)).collect();
        assert_eq!(pareto_front_records(&r, 44.0), vec![0, 1, 2, 3]);
    }

    #[test]
    fn bands_are_independent() {
        let r = vec![rec(1, 10.0, 0.8, 5.0), rec(2, 12.0, 0.7, 100.0)];
        assert_eq!(pareto_select(&r, 44.0), vec![BundleId(1), BundleId(2)]);
    }

    #[test]
    fn invalid_records_never_selected() {
        let mut r = vec![rec(1, 10.0, 0.8, 5.0), rec(2, 5.0, 0.9, 5.0)];
        r[1].valid = false;
        assert_eq!(pareto_select(&r, 44.0), vec![BundleId(1)]);
    }

    proptest! {
        #[test]
        fn sweep_matches_pairwise_oracle(pts in prop::collection::vec((0u8..20, 0u8..20, 0u8..4), 1..120)) {
            // Small integer grids force many latency and accuracy ties.
            let r: Vec<_> = pts.iter().enumerate()
                .map(|(i, (l, a, d))| rec(i as u32, f64::from(*l) + 1.0, f64::from(*a) / 20.0, f64::from(*d) * 30.0))
                .collect();
            prop_assert_eq!(pareto_front_records(&r, 44.0), brute(&r, 44.0));
        }
    }

    #[test]
    fn peeling_partitions_valid_records() {
        let r: Vec<_> = (0..30).map(|i| rec(i, f64::from(i % 7) + 1.0, f64::from((i * 13) % 11) / 11.0, f64::from(i % 3) * 50.0)).collect();
        let layers = peel_fronts(&r, 44.0);
        let mut all: Vec<usize> = layers.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..30).collect::<Vec<_>>());
        assert_eq!(layers[0], pareto_front_records(&r, 44.0));
    }

    #[test]
    fn score_lines() {
        assert_eq!(parse_score_line("0.73\n").unwrap(), 0.73);
        assert_eq!(parse_score_line(" score=1").unwrap(), 1.0);
        assert_eq!(parse_score_line("score: 0.5").unwrap(), 0.5);
        for bad in ["", "score", "score 0.5", "1.5", "-0.1", "NaN", "nope"] {
            assert!(parse_score_line(bad).is_err(), "{bad:?}");
        }
    }

    fn ctx<'a>(proxy: &'a SyntheticProxy, device: &'a DeviceSpec) -> EvalContext<'a> {
        EvalContext {
            evaluator: proxy,
            task: TaskDescriptor::default(),
            device,
            table: CharTable::builtin(),
            net: EvalNetOptions::default(),
            calib: DnnCalibration::from_table(CharTable::builtin()),
        }
    }

    #[test]
    fn eval_networks() {
        let t = CharTable::builtin();
        let b = enumerate_bundles(&builtin_templates())[10].clone();
        let calib = DnnCalibration::from_table(t);
        let net = EvalNetOptions::default();
        let one = build_eval_dnn(&b, ConstructionMethod::PureReplication, 1, &net, calib).unwrap();
        assert_eq!(one.n_rep, 1);
        assert!(one.head.is_empty() && one.tail.is_empty());
        let ht = build_eval_dnn(&b, ConstructionMethod::FixedHeadTail, 1, &net, calib).unwrap();
        assert_eq!(ht.layer_count(), 1 + b.instances.len() + 2);
        let out = ht.segments().unwrap().last().unwrap().output();
        assert_eq!(out, FeatureDims::new(1, 1, net.outputs));

        let d = DeviceSpec::pynq_z1();
        let three = build_eval_dnn(&b, ConstructionMethod::PureReplication, 3, &net, calib).unwrap();
        let l1 = dnn_latency(&one, &d, t).unwrap();
        let l3 = dnn_latency(&three, &d, t).unwrap();
        let body = l3.cycles - l3.data_movement;
        assert!((body - 3.0 * (l1.cycles - l1.data_movement)).abs() < 1e-6);
        assert!(build_eval_dnn(&b, ConstructionMethod::PureReplication, 0, &net, calib).is_err());
    }

    #[test]
    fn coarse_accuracy_shared_across_pf() {
        let d = DeviceSpec::pynq_z1();
        let proxy = SyntheticProxy::new(ProxyCoefficients::default(), CharTable::builtin());
        let c = ctx(&proxy, &d);
        let bundles = enumerate_bundles(&builtin_templates());
        let recs = coarse_evaluate(&bundles, &[1, 2, 4], ConstructionMethod::FixedHeadTail, QuantScheme::default(), &c).unwrap();
        assert_eq!(recs.len(), 54);
        for chunk in recs.chunks(3) {
            assert!(chunk.iter().all(|r| r.accuracy == chunk[0].accuracy && r.bundle_id == chunk[0].bundle_id));
            assert!(chunk[0].latency_ms > chunk[1].latency_ms && chunk[1].latency_ms > chunk[2].latency_ms);
        }
        let again = coarse_evaluate(&bundles, &[1, 2, 4], ConstructionMethod::FixedHeadTail, QuantScheme::default(), &c).unwrap();
        assert_eq!(recs, again);
    }

    #[test]
    fn over_budget_configs_are_invalid() {
        let d = DeviceSpec::pynq_z1();
        let proxy = SyntheticProxy::new(ProxyCoefficients::default(), CharTable::builtin());
        let c = ctx(&proxy, &d);
        let bundles = enumerate_bundles(&builtin_templates());
        let recs = coarse_evaluate(&bundles, &[1, 32], ConstructionMethod::FixedHeadTail, QuantScheme::default(), &c).unwrap();
        for r in &recs {
            let fits = r.resource.fits_within(&d.budget);
            assert_eq!(r.valid, fits, "{} pf {}", r.bundle_id, r.pf);
            if !fits {
                assert!(r.error.as_deref().unwrap().contains("exceeds device budget"));
            }
        }
        assert!(recs.iter().any(|r| !r.valid));
    }

    struct Constant(f64);
    impl AccuracyEvaluator for Constant {
        fn evaluate(&self, _: &DnnModel, _: &TaskDescriptor) -> Result<f64> {
            Ok(self.0)
        }
    }

    struct Failing;
    impl AccuracyEvaluator for Failing {
        fn evaluate(&self, _: &DnnModel, _: &TaskDescriptor) -> Result<f64> {
            Err(Error::Evaluator("boom".into()))
        }
    }

    #[test]
    fn evaluator_swap_changes_only_accuracy() {
        let d = DeviceSpec::pynq_z1();
        let proxy = SyntheticProxy::new(ProxyCoefficients::default(), CharTable::builtin());
        let bundles = &enumerate_bundles(&builtin_templates())[..4];
        let a = coarse_evaluate(bundles, &[2], ConstructionMethod::FixedHeadTail, QuantScheme::default(), &ctx(&proxy, &d)).unwrap();
        let constant = Constant(0.25);
        let mut c = ctx(&proxy, &d);
        c.evaluator = &constant;
        let b = coarse_evaluate(bundles, &[2], ConstructionMethod::FixedHeadTail, QuantScheme::default(), &c).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!((x.latency_ms, x.resource), (y.latency_ms, y.resource));
            assert_eq!(y.accuracy, 0.25);
        }
        c.evaluator = &Failing;
        let f = coarse_evaluate(bundles, &[2], ConstructionMethod::FixedHeadTail, QuantScheme::default(), &c).unwrap();
        assert!(f.iter().all(|r| !r.valid && r.error.is_some()));
    }

    #[test]
    fn fine_grid_and_latency_growth() {
        let d = DeviceSpec::pynq_z1();
        let proxy = SyntheticProxy::new(ProxyCoefficients::default(), CharTable::builtin());
        let bundles = &enumerate_bundles(&builtin_templates())[..5];
        let recs = fine_evaluate(bundles, &[1, 2, 3], &ActivationClip::ALL, 4, QuantScheme::default(), &ctx(&proxy, &d)).unwrap();
        assert_eq!(recs.len(), 45);
        for b in bundles {
            let lat: Vec<f64> = recs
                .iter()
                .filter(|r| r.bundle_id == b.id && r.quant.activation_clip == ActivationClip::Relu)
                .map(|r| r.latency_ms)
                .collect();
            assert!(lat.windows(2).all(|w| w[0] < w[1]));
        }
        let ranked = rank_bundles(&recs);
        assert_eq!(ranked.len(), 5);
        assert!(ranked.windows(2).all(|w| w[0].1 >= w[1].1));
    }

    #[test]
    fn bigger_bundles_score_higher_without_noise() {
        let t = CharTable::builtin();
        let coeffs = ProxyCoefficients { noise_std: 0.0, ..ProxyCoefficients::default() };
        let proxy = SyntheticProxy::new(coeffs, t);
        let net = EvalNetOptions::default();
        let calib = DnnCalibration::from_table(t);
        let bundles = enumerate_bundles(&builtin_templates());
        let small = build_eval_dnn(&bundles[0].with_config(2, QuantScheme::default()), ConstructionMethod::FixedHeadTail, 1, &net, calib).unwrap();
        let large = build_eval_dnn(&bundles[2].with_config(2, QuantScheme::default()), ConstructionMethod::FixedHeadTail, 1, &net, calib).unwrap();
        let task = TaskDescriptor::default();
        let d = DeviceSpec::pynq_z1();
        assert!(proxy.evaluate(&large, &task).unwrap() > proxy.evaluate(&small, &task).unwrap());
        assert!(dnn_latency(&large, &d, t).unwrap().ms > dnn_latency(&small, &d, t).unwrap().ms);
        assert!(dnn_resource(&large, t).unwrap().lut > dnn_resource(&small, t).unwrap().lut);
    }

    #[test]
    fn csv_has_one_row_per_record() {
        let r = vec![rec(1, 10.0, 0.8, 5.0), rec(2, 12.0, 0.7, 5.0)];
        let csv = records_to_csv(&r);
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.lines().nth(1).unwrap().starts_with("1,fixed_head_tail,1,1,8,relu,"));
    }
}
