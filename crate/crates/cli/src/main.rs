use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use cosearch::bundle::{enumerate_bundles, Bundle, BundleId, BundleList};
use cosearch::dnn::{dnn_latency, dnn_resource, model_stats, DnnModel};
use cosearch::evaluation::EvalContext;
use cosearch::hls::{describe, emit, estimate_report, plan};
use cosearch::ip_catalog::{builtin_templates, CharTable};
use cosearch::pipeline::{
    run_pipeline, search_bundle, select_bundles, verify_report, ResolvedTarget, RunConfig, RunEnv,
};
use cosearch::sim::{calibrate, simulate_dnn, CalibrationReport};

#[derive(Parser)]
#[command(name = "cosearch", version, about = "Hardware-aware DNN and accelerator co-design")]
struct Cli {
    /// Run configuration (JSON). Defaults apply to omitted fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, or output file for single-artifact commands.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Characterization table replacing the built-in one.
    #[arg(long = "char-table", global = true)]
    char_table: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the enumerated bundles as JSON.
    EnumerateBundles,
    /// Fit the analytical models of every bundle against the simulator.
    Calibrate,
    /// Evaluate bundles and select candidates.
    Evaluate,
    /// Search one bundle toward every configured target.
    Search {
        #[arg(long)]
        bundle: u32,
    },
    /// Generate accelerator source for a model.
    Codegen {
        #[arg(long)]
        model: PathBuf,
    },
    /// Run the cycle simulator on a model.
    Simulate {
        #[arg(long)]
        model: PathBuf,
    },
    /// Run the whole flow.
    Pipeline,
    /// Re-check every model of a finished run against its target and budget.
    Verify,
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_path(p).with_context(|| format!("reading config {}", p.display()))?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = &cli.char_table {
        cfg.char_table = Some(t.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: &RunConfig) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("cosearch_out"))
}

fn write_or_print(out: Option<&Path>, body: &str) -> Result<()> {
    match out {
        Some(p) => {
            if let Some(parent) = p.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(p, body).with_context(|| format!("writing {}", p.display()))?;
        }
        None => println!("{body}"),
    }
    Ok(())
}

fn calibrated(cfg: &RunConfig, table: &CharTable) -> Result<(Vec<Bundle>, CalibrationReport)> {
    let bundles = enumerate_bundles(&builtin_templates());
    let report = calibrate(&bundles, &cfg.calibration, &cfg.tile, &cfg.device, table, &cfg.sim)?;
    let calibrated = bundles.iter().map(|b| report.calibrated(b)).collect();
    Ok((calibrated, report))
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::EnumerateBundles => {
            let list = BundleList::from_bundles(&enumerate_bundles(&builtin_templates()));
            write_or_print(cli.out.as_deref(), &serde_json::to_string_pretty(&list)?)?;
            Ok(true)
        }
        Command::Calibrate => {
            let cfg = load_config(cli)?;
            let table = cfg.table()?;
            let (_, report) = calibrated(&cfg, &table)?;
            for b in &report.bundles {
                eprintln!(
                    "{} {:<40} alpha={:.4} beta={:.4} holdout_err={:.4}",
                    b.id, b.label, b.calib.alpha, b.calib.beta, b.holdout_max_rel_error
                );
            }
            eprintln!("phi={:.4} worst holdout error {:.4}", report.dnn.phi, report.worst_holdout_error());
            write_or_print(cli.out.as_deref(), &serde_json::to_string_pretty(&report)?)?;
            Ok(true)
        }
        Command::Evaluate => {
            let cfg = load_config(cli)?;
            let table = cfg.table()?;
            let (bundles, report) = calibrated(&cfg, &table)?;
            let evaluator = cfg.evaluator.build(&table);
            let ctx = EvalContext {
                evaluator: evaluator.as_ref(),
                task: cfg.evaluation.task.clone(),
                device: &cfg.device,
                table: &table,
                net: cfg.evaluation.net,
                calib: report.dnn,
            };
            let (coarse, fine, summary) = select_bundles(&bundles, &cfg, &ctx)?;
            for (id, acc) in &summary.ranking {
                let mark = if summary.selected.contains(id) { "*" } else { " " };
                eprintln!("{mark} {id} mean accuracy {acc:.4}");
            }
            let body = serde_json::json!({ "summary": summary, "coarse": coarse, "fine": fine });
            write_or_print(cli.out.as_deref(), &serde_json::to_string_pretty(&body)?)?;
            Ok(!summary.selected.is_empty())
        }
        Command::Search { bundle } => {
            let cfg = load_config(cli)?;
            let table = cfg.table()?;
            let out = out_dir(cli, &cfg);
            let (bundles, report) = calibrated(&cfg, &table)?;
            let Some(b) = bundles.iter().find(|b| b.id == BundleId(*bundle)) else {
                bail!("no bundle with id {bundle}; run enumerate-bundles for the list");
            };
            std::fs::create_dir_all(&out)?;
            let env = RunEnv {
                cfg: &cfg,
                table: &table,
                calib: &report,
                out: &out,
            };
            let mut all_found = true;
            let mut runs = Vec::new();
            for (ti, t) in cfg.targets.iter().enumerate() {
                let target = ResolvedTarget::resolve(t, &cfg)?;
                let run = search_bundle(&env, ti, &target, b)?;
                match &run.error {
                    Some(e) => eprintln!("{}: {e}", target.label),
                    None => eprintln!(
                        "{}: {} models in {} iterations{}",
                        target.label,
                        run.candidates.len(),
                        run.iterations,
                        if run.complete { "" } else { " (incomplete)" }
                    ),
                }
                all_found &= !run.candidates.is_empty();
                runs.push(serde_json::json!({ "target": target, "run": run }));
            }
            std::fs::write(out.join("search.json"), serde_json::to_string_pretty(&runs)? + "\n")?;
            Ok(all_found)
        }
        Command::Codegen { model } => {
            let cfg = load_config(cli)?;
            let table = cfg.table()?;
            let m = DnnModel::from_path(model).with_context(|| format!("reading model {}", model.display()))?;
            let estimates = estimate_report(&m, &cfg.device, &table, &cfg.sim)?;
            let p = plan(&m, &cfg.device, &table, &cfg.codegen)?;
            let out = out_dir(cli, &cfg);
            let tree = emit(&p, Some(&estimates));
            tree.write(&out)?;
            eprintln!("{}", describe(&tree));
            eprintln!("wrote {}", out.display());
            Ok(true)
        }
        Command::Simulate { model } => {
            let cfg = load_config(cli)?;
            let table = cfg.table()?;
            let m = DnnModel::from_path(model).with_context(|| format!("reading model {}", model.display()))?;
            let trace = simulate_dnn(&m, &cfg.device, &table, &cfg.sim)?;
            let est = dnn_latency(&m, &cfg.device, &table)?;
            let res = dnn_resource(&m, &table)?;
            let stats = model_stats(&m, &table)?;
            eprintln!("{}", trace.summary());
            eprintln!(
                "estimate {:.3} ms, {} layers, {} params, {} MACs, resources {res}",
                est.ms, stats.layers, stats.params, stats.macs
            );
            if let Some(p) = &cli.out {
                write_or_print(Some(p), &trace.to_json())?;
            }
            Ok(true)
        }
        Command::Pipeline => {
            let cfg = load_config(cli)?;
            let out = out_dir(cli, &cfg);
            let report = run_pipeline(&cfg, &out)?;
            if let Some(note) = &report.note {
                eprintln!("{note}");
            }
            for t in &report.targets {
                let failed: Vec<String> = t
                    .runs
                    .iter()
                    .filter_map(|r| r.error.as_ref().map(|e| format!("{}: {e}", r.bundle_id)))
                    .collect();
                eprintln!(
                    "{} ({:.3} ms +/- {:.3}): {} models{}",
                    t.target.label,
                    t.target.latency_ms,
                    t.target.epsilon_ms,
                    t.accepted,
                    if failed.is_empty() { String::new() } else { format!("; {}", failed.join("; ")) }
                );
            }
            eprintln!("report: {}", out.join("report.json").display());
            Ok(report.success)
        }
        Command::Verify => {
            let cfg = load_config(cli)?;
            let out = out_dir(cli, &cfg);
            let v = verify_report(&out)?;
            for line in &v.violations {
                eprintln!("violation: {line}");
            }
            println!("checked {} models, {} violations", v.checked, v.violations.len());
            Ok(v.ok())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
