//! End-to-end co-design run driven by one JSON config.
//!
//! Calibrate the analytical models against the simulator, evaluate and select
//! bundles, then search each selected bundle toward each latency target and
//! generate code and estimates for every accepted model. All outputs live
//! under one directory; `report.json` indexes them.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bundle::{enumerate_bundles, Bundle, BundleId, BundleList};
use crate::device::DeviceSpec;
use crate::dnn::{dnn_latency, dnn_resource, initialize_dnn, DnnModel, InitOptions};
use crate::error::{Error, Result};
use crate::evaluation::{
    candidate_bundles, coarse_evaluate, fine_evaluate, pareto_select, rank_bundles, records_to_csv, AccuracyEvaluator,
    ConstructionMethod, EvalContext, EvalNetOptions, EvalRecord, ExternalEvaluator, ProxyCoefficients, SyntheticProxy,
    TaskDescriptor,
};
use crate::hls::{emit, estimate_report, plan, EstimateReport, PlanOptions};
use crate::ip_catalog::{
    builtin_templates, ActivationClip, CharTable, FeatureDims, QuantScheme, ResourceVector, TileShape, PF_CANDIDATES,
};
use crate::scd::{same_structure, scd_search, AnalyticalModel, CostModel, MoveSet, SearchConfig};
use crate::seed::derive_seed;
use crate::sim::{calibrate, fit_phi, CalibOptions, CalibrationReport, SimOptions};

/// A latency goal, given either as frames per second or directly in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<f64>,
    /// Clock the target is stated at; defaults to the device clock.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clock_mhz: Option<f64>,
    /// Absolute tolerance; defaults to `search.epsilon_frac` of the target.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_ms: Option<f64>,
}

impl TargetSpec {
    pub fn fps(fps: f64) -> Self {
        TargetSpec {
            fps: Some(fps),
            latency_ms: None,
            clock_mhz: None,
            epsilon_ms: None,
        }
    }

    pub fn latency_ms(&self) -> Result<f64> {
        let ms = match (self.fps, self.latency_ms) {
            (Some(f), None) => 1000.0 / f,
            (None, Some(ms)) => ms,
            _ => return Err(Error::Config("each target needs exactly one of `fps` and `latency_ms`".into())),
        };
        if !(ms > 0.0 && ms.is_finite()) {
            return Err(Error::Config(format!("target latency {ms} ms must be positive")));
        }
        Ok(ms)
    }

    pub fn label(&self) -> Result<String> {
        Ok(match self.fps {
            Some(f) => format!("{f}fps"),
            None => format!("{}ms", self.latency_ms()?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchSettings {
    pub k: usize,
    pub max_iters: usize,
    pub epsilon_frac: f64,
    pub moves: MoveSet,
    /// Search rounds per run; each later round refits φ against the simulator
    /// on the previous round's models and searches again.
    pub feedback_rounds: usize,
}

impl Default for SearchSettings {
    fn default() -> Self {
        SearchSettings {
            k: 3,
            max_iters: 1000,
            epsilon_frac: 0.05,
            moves: MoveSet::default(),
            feedback_rounds: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSettings {
    pub n_rep: u32,
    pub f_ds: u32,
    pub input_dims: FeatureDims,
}

impl Default for ModelSettings {
    fn default() -> Self {
        let d = InitOptions::default();
        ModelSettings {
            n_rep: d.n_rep,
            f_ds: d.f_ds,
            input_dims: d.input_dims,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationSettings {
    pub pf_set: Vec<u32>,
    pub method: ConstructionMethod,
    /// DSP band width as a fraction of the device DSP budget.
    pub band_frac: f64,
    pub top_n: usize,
    pub fine_reps: Vec<u32>,
    pub fine_clips: Vec<ActivationClip>,
    pub fine_pf: u32,
    pub net: EvalNetOptions,
    pub task: TaskDescriptor,
}

impl Default for EvaluationSettings {
    fn default() -> Self {
        EvaluationSettings {
            pf_set: PF_CANDIDATES.to_vec(),
            method: ConstructionMethod::FixedHeadTail,
            band_frac: 0.2,
            top_n: 5,
            fine_reps: vec![1, 2, 3],
            fine_clips: ActivationClip::ALL.to_vec(),
            fine_pf: 2,
            net: EvalNetOptions::default(),
            task: TaskDescriptor::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EvaluatorConfig {
    Proxy {
        #[serde(default)]
        coefficients: ProxyCoefficients,
    },
    External {
        program: String,
        #[serde(default)]
        args: Vec<String>,
    },
}

impl Default for EvaluatorConfig {
    fn default() -> Self {
        EvaluatorConfig::Proxy {
            coefficients: ProxyCoefficients::default(),
        }
    }
}

impl EvaluatorConfig {
    pub fn build(&self, table: &CharTable) -> Box<dyn AccuracyEvaluator> {
        match self {
            EvaluatorConfig::Proxy { coefficients } => Box::new(SyntheticProxy::new(*coefficients, table)),
            EvaluatorConfig::External { program, args } => Box::new(ExternalEvaluator {
                program: program.clone(),
                args: args.clone(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub device: DeviceSpec,
    pub targets: Vec<TargetSpec>,
    pub tile: TileShape,
    pub quant: QuantScheme,
    pub model: ModelSettings,
    pub search: SearchSettings,
    pub evaluation: EvaluationSettings,
    pub evaluator: EvaluatorConfig,
    pub calibration: CalibOptions,
    pub sim: SimOptions,
    pub codegen: PlanOptions,
    /// Characterization table replacing the built-in one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub char_table: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: crate::SCHEMA_VERSION,
            seed: 1,
            device: DeviceSpec::pynq_z1(),
            targets: [10.0, 15.0, 20.0].into_iter().map(TargetSpec::fps).collect(),
            tile: TileShape::default(),
            quant: QuantScheme::default(),
            model: ModelSettings::default(),
            search: SearchSettings::default(),
            evaluation: EvaluationSettings::default(),
            evaluator: EvaluatorConfig::default(),
            calibration: CalibOptions::default(),
            sim: SimOptions::default(),
            codegen: PlanOptions::default(),
            char_table: None,
            output_dir: None,
        }
    }
}

impl RunConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        RunConfig::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != crate::SCHEMA_VERSION {
            return Err(Error::Config(format!("unsupported schema_version {}", self.schema_version)));
        }
        self.device.validate()?;
        self.tile.validate()?;
        self.quant.validate()?;
        self.sim.validate()?;
        if self.targets.is_empty() {
            return Err(Error::Config("at least one target is required".into()));
        }
        for t in &self.targets {
            t.latency_ms()?;
            if let Some(c) = t.clock_mhz {
                if !(c > 0.0 && c.is_finite()) {
                    return Err(Error::Config("target clock must be positive".into()));
                }
            }
            if let Some(e) = t.epsilon_ms {
                if !(e > 0.0 && e.is_finite()) {
                    return Err(Error::Config("target epsilon must be positive".into()));
                }
            }
        }
        let s = &self.search;
        if s.k == 0 || s.max_iters == 0 || s.feedback_rounds == 0 {
            return Err(Error::Config("search k, max_iters and feedback_rounds must be >= 1".into()));
        }
        if !(s.epsilon_frac > 0.0 && s.epsilon_frac < 1.0) {
            return Err(Error::Config("epsilon_frac must lie in (0, 1)".into()));
        }
        let e = &self.evaluation;
        if e.pf_set.is_empty() || e.fine_reps.is_empty() || e.fine_clips.is_empty() || e.top_n == 0 {
            return Err(Error::Config("evaluation grids and top_n must be non-empty".into()));
        }
        if !(e.band_frac > 0.0 && e.band_frac.is_finite()) {
            return Err(Error::Config("band_frac must be positive".into()));
        }
        if self.calibration.samples_per_bundle < 4 {
            return Err(Error::Config("calibration needs at least 4 samples per bundle".into()));
        }
        Ok(())
    }

    /// Loads the override table, or the built-in one.
    pub fn table(&self) -> Result<CharTable> {
        match &self.char_table {
            Some(p) => CharTable::from_path(p),
            None => Ok(CharTable::builtin().clone()),
        }
    }

    fn init_options(&self) -> InitOptions {
        InitOptions {
            n_rep: self.model.n_rep,
            f_ds: self.model.f_ds,
            input_dims: self.model.input_dims,
            tile: self.tile,
        }
    }
}

/// Latency goal with every default resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedTarget {
    pub label: String,
    pub latency_ms: f64,
    pub epsilon_ms: f64,
    pub clock_mhz: f64,
}

impl ResolvedTarget {
    pub fn resolve(t: &TargetSpec, cfg: &RunConfig) -> Result<Self> {
        let ms = t.latency_ms()?;
        Ok(ResolvedTarget {
            label: t.label()?,
            latency_ms: ms,
            epsilon_ms: t.epsilon_ms.unwrap_or(cfg.search.epsilon_frac * ms),
            clock_mhz: t.clock_mhz.unwrap_or(cfg.device.clock_mhz),
        })
    }

    pub fn device(&self, base: &DeviceSpec) -> DeviceSpec {
        DeviceSpec {
            clock_mhz: self.clock_mhz,
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateEntry {
    pub index: usize,
    pub model_path: String,
    pub code_dir: String,
    pub n_rep: u32,
    pub pf: u32,
    pub latency_ms: f64,
    pub resource: ResourceVector,
    pub estimate: EstimateReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchRun {
    pub bundle_id: BundleId,
    pub label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub phi: f64,
    pub iterations: usize,
    pub complete: bool,
    pub trace_path: String,
    pub candidates: Vec<CandidateEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetResult {
    pub target: ResolvedTarget,
    pub runs: Vec<SearchRun>,
    pub accepted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSummary {
    pub coarse_records: usize,
    pub band_width_dsp: f64,
    pub pareto: Vec<BundleId>,
    pub candidates: Vec<BundleId>,
    pub fine_records: usize,
    pub ranking: Vec<(BundleId, f64)>,
    pub selected: Vec<BundleId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    /// Seconds since the Unix epoch; the only field that differs between identical runs.
    pub generated_unix: u64,
    pub seed: u64,
    pub device: DeviceSpec,
    pub bundles: usize,
    pub calibration_worst_holdout_error: f64,
    pub phi: f64,
    pub selection: SelectionSummary,
    pub targets: Vec<TargetResult>,
    /// Every target produced at least one model.
    pub success: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

fn write_json<T: Serialize>(dir: &Path, rel: &str, value: &T) -> Result<()> {
    let path = dir.join(rel);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

fn write_text(dir: &Path, rel: &str, body: &str) -> Result<()> {
    let path = dir.join(rel);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, body)?;
    Ok(())
}

/// Bundles to search, best first, with the evaluation that chose them.
pub fn select_bundles(
    bundles: &[Bundle],
    cfg: &RunConfig,
    ctx: &EvalContext<'_>,
) -> Result<(Vec<EvalRecord>, Vec<EvalRecord>, SelectionSummary)> {
    let e = &cfg.evaluation;
    let coarse = coarse_evaluate(bundles, &e.pf_set, e.method, cfg.quant, ctx)?;
    let band = e.band_frac * cfg.device.budget.dsp;
    let pareto = pareto_select(&coarse, band);
    let candidates = candidate_bundles(&coarse, band, e.top_n);
    let chosen: Vec<Bundle> = bundles.iter().filter(|b| candidates.contains(&b.id)).cloned().collect();
    let (fine, ranking) = if chosen.is_empty() {
        (Vec::new(), Vec::new())
    } else {
        let fine = fine_evaluate(&chosen, &e.fine_reps, &e.fine_clips, e.fine_pf, cfg.quant, ctx)?;
        let ranking = rank_bundles(&fine);
        (fine, ranking)
    };
    let selected = ranking.iter().take(e.top_n).map(|(id, _)| *id).collect();
    let summary = SelectionSummary {
        coarse_records: coarse.len(),
        band_width_dsp: band,
        pareto,
        candidates,
        fine_records: fine.len(),
        ranking,
        selected,
    };
    Ok((coarse, fine, summary))
}

/// Shared inputs of the per-bundle searches.
pub struct RunEnv<'a> {
    pub cfg: &'a RunConfig,
    pub table: &'a CharTable,
    pub calib: &'a CalibrationReport,
    pub out: &'a Path,
}

/// Searches one calibrated bundle toward target `ti`, writing the trace,
/// models and generated code under `targets/` in the output directory.
/// An infeasible starting point is reported in the run, not as an error.
pub fn search_bundle(env: &RunEnv<'_>, ti: usize, target: &ResolvedTarget, bundle: &Bundle) -> Result<SearchRun> {
    let cfg = env.cfg;
    let device = target.device(&cfg.device);
    let dir = format!("targets/{ti}_{}/{}", target.label, bundle.id);
    let trace_path = format!("{dir}/search_trace.log");
    let mut run = SearchRun {
        bundle_id: bundle.id,
        label: bundle.label(),
        error: None,
        phi: env.calib.dnn.phi,
        iterations: 0,
        complete: false,
        trace_path: trace_path.clone(),
        candidates: Vec::new(),
    };
    let mut initial = match initialize_dnn(bundle, &device, cfg.quant, &cfg.init_options(), env.calib.dnn, env.table) {
        Ok(m) => m,
        Err(e @ Error::Infeasible { .. }) => {
            run.error = Some(e.to_string());
            return Ok(run);
        }
        Err(e) => return Err(e),
    };
    let cost = AnalyticalModel { device: &device, table: env.table };
    let search = SearchConfig {
        lat_targ_ms: target.latency_ms,
        epsilon_ms: target.epsilon_ms,
        res_max: device.budget,
        k: cfg.search.k,
        seed: derive_seed(cfg.seed, (ti as u64) << 32 | u64::from(bundle.id.0)),
        max_iters: cfg.search.max_iters,
        moves: cfg.search.moves,
    };
    let mut trace = String::new();
    let mut outcome: Option<crate::scd::SearchOutcome> = None;
    let mut earlier: Vec<DnnModel> = Vec::new();
    for round in 0..cfg.search.feedback_rounds {
        if round > 0 {
            let prev = outcome.as_ref().expect("previous round ran");
            if prev.models.is_empty() {
                break;
            }
            let phi = fit_phi(&prev.models, initial.calib.lat_dm, &device, env.table, &cfg.sim)?;
            if (phi - initial.calib.phi).abs() < 1e-12 {
                break;
            }
            initial.calib.phi = phi;
            earlier.extend(prev.models.iter().cloned());
        }
        let o = scd_search(&initial, &search, &cost)?;
        trace.push_str(&format!("# round {round} phi={}\n", initial.calib.phi));
        trace.push_str(&o.trace_text());
        outcome = Some(o);
    }
    let mut outcome = outcome.expect("at least one round");
    // Earlier-round models that still meet the target under the refit φ fill
    // any slots the last round left open.
    for mut m in earlier {
        if outcome.models.len() >= cfg.search.k {
            break;
        }
        m.calib.phi = initial.calib.phi;
        let lat = cost.latency_ms(&m)?;
        if search.accepts(lat, &cost.resource(&m)?) && !outcome.models.iter().any(|a| same_structure(a, &m)) {
            outcome.models.push(m);
            outcome.latencies_ms.push(lat);
        }
    }
    outcome.complete = outcome.models.len() == cfg.search.k;
    write_text(env.out, &trace_path, &trace)?;
    run.phi = initial.calib.phi;
    run.iterations = outcome.iterations;
    run.complete = outcome.complete;

    for (i, m) in outcome.models.iter().enumerate() {
        let model_path = format!("{dir}/model_{i}.json");
        let code_dir = format!("{dir}/code_{i}");
        write_text(env.out, &model_path, &(m.to_json() + "\n"))?;
        let estimate = estimate_report(m, &device, env.table, &cfg.sim)?;
        let p = plan(m, &device, env.table, &cfg.codegen)?;
        emit(&p, Some(&estimate)).write(&env.out.join(&code_dir))?;
        run.candidates.push(CandidateEntry {
            index: i,
            model_path,
            code_dir,
            n_rep: m.n_rep,
            pf: m.pf(),
            latency_ms: estimate.latency_ms,
            resource: estimate.resource,
            estimate,
        });
    }
    Ok(run)
}

/// Runs the whole flow and writes every artifact under `out`.
pub fn run_pipeline(cfg: &RunConfig, out: &Path) -> Result<RunReport> {
    cfg.validate()?;
    let table = cfg.table()?;
    std::fs::create_dir_all(out)?;
    write_text(out, "config.json", &(cfg.to_json() + "\n"))?;
    write_text(out, "char_table.json", &(table.to_json() + "\n"))?;

    let bundles = enumerate_bundles(&builtin_templates());
    write_json(out, "bundles.json", &BundleList::from_bundles(&bundles))?;
    log::info!("calibrating {} bundles", bundles.len());
    let calib = calibrate(&bundles, &cfg.calibration, &cfg.tile, &cfg.device, &table, &cfg.sim)?;
    write_json(out, "calibration.json", &calib)?;
    let calibrated: Vec<Bundle> = bundles.iter().map(|b| calib.calibrated(b)).collect();

    log::info!("evaluating bundles");
    let evaluator = cfg.evaluator.build(&table);
    let ctx = EvalContext {
        evaluator: evaluator.as_ref(),
        task: cfg.evaluation.task.clone(),
        device: &cfg.device,
        table: &table,
        net: cfg.evaluation.net,
        calib: calib.dnn,
    };
    let (coarse, fine, selection) = select_bundles(&calibrated, cfg, &ctx)?;
    write_json(out, "evaluation/coarse.json", &coarse)?;
    write_text(out, "evaluation/coarse.csv", &records_to_csv(&coarse))?;
    write_json(out, "evaluation/fine.json", &fine)?;
    write_text(out, "evaluation/fine.csv", &records_to_csv(&fine))?;

    let targets = cfg
        .targets
        .iter()
        .map(|t| ResolvedTarget::resolve(t, cfg))
        .collect::<Result<Vec<_>>>()?;
    let selected: Vec<Bundle> = selection
        .selected
        .iter()
        .filter_map(|id| calibrated.iter().find(|b| b.id == *id).cloned())
        .collect();
    let env = RunEnv { cfg, table: &table, calib: &calib, out };
    log::info!("searching {} bundles for {} targets", selected.len(), targets.len());
    let results = targets
        .par_iter()
        .enumerate()
        .map(|(ti, t)| {
            let runs = selected
                .par_iter()
                .map(|b| search_bundle(&env, ti, t, b))
                .collect::<Result<Vec<_>>>()?;
            let accepted = runs.iter().map(|r| r.candidates.len()).sum();
            Ok(TargetResult {
                target: t.clone(),
                runs,
                accepted,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let success = !results.is_empty() && results.iter().all(|r| r.accepted > 0);
    let note = selection.selected.is_empty().then(|| "no candidates: evaluation selected no bundles".to_string());
    let report = RunReport {
        schema_version: crate::SCHEMA_VERSION,
        generated_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
        seed: cfg.seed,
        device: cfg.device.clone(),
        bundles: bundles.len(),
        calibration_worst_holdout_error: calib.worst_holdout_error(),
        phi: calib.dnn.phi,
        selection,
        targets: results,
        success,
        note,
    };
    write_text(out, "report.json", &report.to_json())?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOutcome {
    pub checked: usize,
    pub violations: Vec<String>,
}

impl VerifyOutcome {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Re-checks every model listed in `out/report.json` from its saved JSON:
/// latency within ε of its target and resources within the device budget.
pub fn verify_report(out: &Path) -> Result<VerifyOutcome> {
    let report: RunReport = serde_json::from_str(&std::fs::read_to_string(out.join("report.json"))?)?;
    let table = CharTable::from_path(&out.join("char_table.json"))?;
    let mut checked = 0;
    let mut violations = Vec::new();
    for t in &report.targets {
        let device = t.target.device(&report.device);
        for run in &t.runs {
            for c in &run.candidates {
                checked += 1;
                let m = match DnnModel::from_path(&out.join(&c.model_path)) {
                    Ok(m) => m,
                    Err(e) => {
                        violations.push(format!("{}: {e}", c.model_path));
                        continue;
                    }
                };
                let lat = dnn_latency(&m, &device, &table)?.ms;
                let res = dnn_resource(&m, &table)?;
                let gap = (t.target.latency_ms - lat).abs();
                if gap >= t.target.epsilon_ms {
                    violations.push(format!(
                        "{}: latency {lat:.3} ms misses {} ms by {gap:.3} (epsilon {:.3})",
                        c.model_path, t.target.latency_ms, t.target.epsilon_ms
                    ));
                }
                if let Some((name, used, cap)) = res.first_exceeding(&device.budget) {
                    violations.push(format!("{}: {name} {used} exceeds budget {cap}", c.model_path));
                }
                if (lat - c.latency_ms).abs() > 1e-9 * lat.max(1.0) {
                    violations.push(format!("{}: reported latency {} differs from {lat}", c.model_path, c.latency_ms));
                }
            }
        }
    }
    Ok(VerifyOutcome { checked, violations })
}
