//! Generated sources for three frozen models must match the checked-in
//! goldens byte for byte. Regenerate with `UPDATE_GOLDEN=1 cargo test --test golden`.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;

use cosearch::device::DeviceSpec;
use cosearch::dnn::DnnModel;
use cosearch::hls::{emit, estimate_report, plan, top_call_count, PlanOptions, SourceTree};
use cosearch::ip_catalog::CharTable;
use cosearch::sim::SimOptions;

const FIXTURES: [(&str, PlanOptions); 3] = [
    (
        "small_plain",
        PlanOptions {
            reuse_buffers: false,
            fuse_elementwise: false,
        },
    ),
    (
        "downsampled_pf8",
        PlanOptions {
            reuse_buffers: true,
            fuse_elementwise: false,
        },
    ),
    (
        "head_tail_16bit",
        PlanOptions {
            reuse_buffers: true,
            fuse_elementwise: true,
        },
    ),
];

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests")
}

fn generate(name: &str, opts: &PlanOptions) -> (DnnModel, SourceTree) {
    let table = CharTable::builtin();
    let device = DeviceSpec::pynq_z1();
    let m = DnnModel::from_path(&root().join("fixtures").join(format!("{name}.json"))).unwrap();
    let p = plan(&m, &device, table, opts).unwrap();
    let est = estimate_report(&m, &device, table, &SimOptions::default()).unwrap();
    (m, emit(&p, Some(&est)))
}

fn files_in(dir: &Path) -> BTreeSet<String> {
    std::fs::read_dir(dir)
        .map(|rd| rd.map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect())
        .unwrap_or_default()
}

#[test]
fn codegen_matches_goldens() {
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    for (name, opts) in &FIXTURES {
        let (_, tree) = generate(name, opts);
        let dir = root().join("golden").join(name);
        if update {
            let _ = std::fs::remove_dir_all(&dir);
            tree.write(&dir).unwrap();
        }
        let expected = files_in(&dir);
        let got: BTreeSet<String> = tree.files.keys().cloned().collect();
        assert_eq!(got, expected, "{name}: file set differs from golden");
        for (file, body) in &tree.files {
            let golden = std::fs::read(dir.join(file)).unwrap();
            assert!(golden == body.as_bytes(), "{name}/{file} differs from golden");
        }
    }
}

#[test]
fn codegen_is_deterministic() {
    for (name, opts) in &FIXTURES {
        let (_, a) = generate(name, opts);
        let (_, b) = generate(name, opts);
        assert_eq!(a.files, b.files, "{name}");
    }
}

#[test]
fn schedule_covers_every_layer_once() {
    let table = CharTable::builtin();
    let device = DeviceSpec::pynq_z1();
    for (name, opts) in &FIXTURES {
        let (m, tree) = generate(name, opts);
        let p = plan(&m, &device, table, opts).unwrap();
        let mut layers = p.scheduled_layers();
        layers.sort_unstable();
        assert_eq!(layers, (0..m.layer_count()).collect::<Vec<_>>(), "{name}");
        // Fused layers run inside their host's call, so the top function has
        // one call line per unfused call.
        assert_eq!(top_call_count(&tree), p.schedule_len(), "{name}");
    }
}

fn cc_available() -> bool {
    Command::new("cc").arg("--version").output().is_ok_and(|o| o.status.success())
}

#[test]
fn emitted_c_passes_syntax_check() {
    if !cc_available() {
        eprintln!("cc not found; skipping C syntax check");
        return;
    }
    for (name, opts) in &FIXTURES {
        let (_, tree) = generate(name, opts);
        let dir = tempfile::tempdir().unwrap();
        tree.write(dir.path()).unwrap();
        for file in tree.c_files() {
            let out = Command::new("cc")
                .args(["-fsyntax-only", "-std=c99", "-Wall", "-Wextra", "-pedantic", "-Werror"])
                .arg(dir.path().join(file))
                .output()
                .unwrap();
            assert!(
                out.status.success(),
                "{name}/{file}:\n{}",
                String::from_utf8_lossy(&out.stderr)
            );
        }
    }
}
