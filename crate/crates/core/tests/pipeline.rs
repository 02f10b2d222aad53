use std::collections::BTreeMap;
use std::path::Path;

use cosearch::ip_catalog::ResourceVector;
use cosearch::pipeline::{run_pipeline, verify_report, RunConfig, TargetSpec};

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(base: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(base, &p, out);
            } else {
                let rel = p.strip_prefix(base).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

fn report_without_timestamp(dir: &Path) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("report.json")).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("generated_unix").expect("timestamp field present");
    v
}

#[test]
fn default_run_is_sound_and_reproducible() {
    let cfg = RunConfig::default();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = run_pipeline(&cfg, a.path()).unwrap();
    run_pipeline(&cfg, b.path()).unwrap();

    assert!(ra.success);
    assert_eq!(ra.bundles, 18);
    assert_eq!(ra.selection.selected.len(), 5);
    assert_eq!(ra.targets.len(), 3);

    assert_eq!(report_without_timestamp(a.path()), report_without_timestamp(b.path()));
    let mut ta = tree(a.path());
    let mut tb = tree(b.path());
    ta.remove("report.json");
    tb.remove("report.json");
    assert_eq!(ta.keys().collect::<Vec<_>>(), tb.keys().collect::<Vec<_>>());
    for (k, v) in &ta {
        assert!(tb[k] == *v, "{k} differs between runs");
    }

    let v = verify_report(a.path()).unwrap();
    assert!(v.checked > 0);
    assert!(v.ok(), "{:?}", v.violations);
}

#[test]
fn verify_flags_a_tampered_model() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        targets: vec![TargetSpec::fps(20.0)],
        ..RunConfig::default()
    };
    let report = run_pipeline(&cfg, dir.path()).unwrap();
    let c = report.targets[0].runs.iter().flat_map(|r| &r.candidates).next().unwrap();
    let path = dir.path().join(&c.model_path);
    let mut m: serde_json::Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    let n = m["n_rep"].as_u64().unwrap();
    // Two more replications, with matching per-spot vectors, push latency off target.
    m["n_rep"] = (n + 2).into();
    for (key, fill) in [("x_ds", serde_json::json!(0)), ("f_ds", serde_json::json!(2)), ("pi_ch", serde_json::json!(1.0))] {
        let arr = m[key].as_array_mut().unwrap();
        arr.push(fill.clone());
        arr.push(fill);
    }
    m["layer_assignment"] = serde_json::Value::Array(Vec::new());
    std::fs::write(&path, serde_json::to_string(&m).unwrap()).unwrap();
    let v = verify_report(dir.path()).unwrap();
    assert!(!v.ok());
    assert!(v.violations.iter().any(|l| l.contains(&c.model_path)));
}

#[test]
fn empty_selection_reports_no_candidates() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.device.budget = ResourceVector::new(1.0, 100.0, 100.0, 1.0);
    let report = run_pipeline(&cfg, dir.path()).unwrap();
    assert!(report.selection.selected.is_empty());
    assert!(!report.success);
    assert!(report.note.as_deref().unwrap().contains("no candidates"));
    assert!(report.targets.iter().all(|t| t.runs.is_empty() && t.accepted == 0));
    assert!(dir.path().join("report.json").exists());
}

#[test]
fn unreachable_target_is_a_per_target_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        targets: vec![
            TargetSpec::fps(20.0),
            TargetSpec {
                latency_ms: Some(0.01),
                fps: None,
                clock_mhz: None,
                epsilon_ms: None,
            },
        ],
        search: cosearch::pipeline::SearchSettings {
            max_iters: 200,
            ..Default::default()
        },
        ..RunConfig::default()
    };
    let report = run_pipeline(&cfg, dir.path()).unwrap();
    assert!(report.targets[0].accepted > 0);
    assert_eq!(report.targets[1].accepted, 0);
    assert!(!report.success);
}
