use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::plan::{BufferLocation, CodegenPlan, InstanceDecl, LayerCall, SegmentPlan};
use super::report::EstimateReport;
use crate::error::Result;
use crate::ip_catalog::{ActivationClip, IpKind};

/// Generated files keyed by relative path.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SourceTree {
    pub files: BTreeMap<String, String>,
}

impl SourceTree {
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, body) in &self.files {
            std::fs::write(dir.join(name), body)?;
        }
        Ok(())
    }

    pub fn c_files(&self) -> impl Iterator<Item = &String> {
        self.files.keys().filter(|k| k.ends_with(".c"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub files: Vec<String>,
    pub schedule_len: usize,
    pub plan: CodegenPlan,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimates: Option<EstimateReport>,
}

struct Code {
    out: String,
    depth: usize,
}

impl Code {
    fn new() -> Self {
        Code { out: String::new(), depth: 0 }
    }

    fn line(&mut self, s: &str) {
        if s.is_empty() {
            self.out.push('\n');
            return;
        }
        if s.starts_with('}') {
            self.depth -= 1;
        }
        for _ in 0..self.depth {
            self.out.push_str("    ");
        }
        self.out.push_str(s);
        self.out.push('\n');
        if s.ends_with('{') {
            self.depth += 1;
        }
    }
}

fn c_int(bits: u8) -> &'static str {
    if bits > 8 {
        "int16_t"
    } else {
        "int8_t"
    }
}

fn signature(d: &InstanceDecl) -> String {
    if d.weight_tile_bytes > 0 {
        format!("void {}(const data_t in[TILE_ELEMS], data_t out[TILE_ELEMS], const weight_t w[])", d.function)
    } else {
        format!("void {}(const data_t *in, data_t *out)", d.function)
    }
}

fn header(plan: &CodegenPlan) -> String {
    let q = plan.quant;
    let frac = if q.activation_bits > 8 { 8 } else { 4 };
    let clip = match q.activation_clip {
        ActivationClip::Relu => "DATA_MAX".to_string(),
        ActivationClip::Relu4 => "(4 << FRAC_BITS < DATA_MAX ? 4 << FRAC_BITS : DATA_MAX)".to_string(),
        ActivationClip::Relu8 => "(8 << FRAC_BITS < DATA_MAX ? 8 << FRAC_BITS : DATA_MAX)".to_string(),
    };
    let (min, max) = if q.activation_bits > 8 { ("(-32768)", "32767") } else { ("(-128)", "127") };
    let mut c = Code::new();
    c.line(&format!("/* Accelerator interface for {}. Generated; do not edit. */", plan.model));
    c.line("#ifndef ACCEL_H");
    c.line("#define ACCEL_H");
    c.line("");
    c.line("#include <stddef.h>");
    c.line("#include <stdint.h>");
    c.line("");
    c.line(&format!("typedef {} data_t;", c_int(q.activation_bits)));
    c.line(&format!("typedef {} weight_t;", c_int(q.weight_bits)));
    c.line("typedef int32_t acc_t;");
    c.line("");
    c.line(&format!("#define TILE_W {}", plan.tile.width));
    c.line(&format!("#define TILE_H {}", plan.tile.height));
    c.line(&format!("#define TILE_C {}", plan.tile.channels));
    c.line("#define TILE_ELEMS (TILE_W * TILE_H * TILE_C)");
    c.line(&format!("#define FRAC_BITS {frac}"));
    c.line(&format!("#define DATA_MIN {min}"));
    c.line(&format!("#define DATA_MAX {max}"));
    c.line(&format!("#define CLIP_MAX {clip}"));
    c.line("#define NORM_SCALE (1 << FRAC_BITS)");
    c.line("");
    c.line("static inline data_t saturate(acc_t v)");
    c.line("{");
    c.line("if (v > DATA_MAX) {");
    c.line("return DATA_MAX;");
    c.line("}");
    c.line("if (v < DATA_MIN) {");
    c.line("return DATA_MIN;");
    c.line("}");
    c.line("return (data_t)v;");
    c.line("}");
    c.line("");
    for d in &plan.instances {
        c.line(&format!("{};", signature(d)));
    }
    c.line("");
    c.line("void load_tile(const data_t *src, data_t *dst, int width, int height, int channels, int x0, int y0, int c0, int stride);");
    c.line("void store_tile(data_t *dst, const data_t *src, int width, int height, int channels, int x0, int y0, int c0);");
    c.line("void load_weights(const weight_t *src, weight_t *dst, int count);");
    c.line("void accel_top(const data_t *fmap_in, data_t *fmap_out, const weight_t *weights, data_t *dram_a, data_t *dram_b);");
    c.line("");
    c.line("#endif");
    c.out
}

fn window_loops(c: &mut Code, k: u32, pf: u32) {
    let pad = k / 2;
    c.line(&format!("for (int ky = 0; ky < {k}; ky++) {{"));
    c.line(&format!("for (int kx = 0; kx < {k}; kx++) {{"));
    c.line(&format!("/* HLS UNROLL factor={pf} */"));
    c.line(&format!("int iy = y + ky - {pad};"));
    c.line(&format!("int ix = x + kx - {pad};"));
    c.line("if (iy >= 0 && iy < TILE_H && ix >= 0 && ix < TILE_W) {");
}

fn close(c: &mut Code, n: usize) {
    for _ in 0..n {
        c.line("}");
    }
}

fn kernel(d: &InstanceDecl) -> String {
    let k = d.kernel;
    let mut c = Code::new();
    c.line("#include \"accel.h\"");
    c.line("");
    c.line(&format!("/* {} at pf {}: {} cycles per tile. */", d.kind, d.pf, d.lat_cycles));
    c.line(&signature(d));
    c.line("{");
    match d.kind {
        IpKind::Conv1x1 | IpKind::Conv3x3 | IpKind::Conv5x5 => {
            c.line("for (int co = 0; co < TILE_C; co++) {");
            c.line("for (int y = 0; y < TILE_H; y++) {");
            c.line("for (int x = 0; x < TILE_W; x++) {");
            c.line("/* HLS PIPELINE II=1 */");
            c.line("acc_t acc = 0;");
            c.line("for (int ci = 0; ci < TILE_C; ci++) {");
            window_loops(&mut c, k, d.pf);
            c.line(&format!(
                "acc += (acc_t)in[(ci * TILE_H + iy) * TILE_W + ix] * w[((co * TILE_C + ci) * {k} + ky) * {k} + kx];"
            ));
            close(&mut c, 4);
            c.line("out[(co * TILE_H + y) * TILE_W + x] = saturate(acc >> FRAC_BITS);");
            close(&mut c, 3);
        }
        IpKind::Dwconv3x3 | IpKind::Dwconv5x5 | IpKind::Dwconv7x7 => {
            c.line("for (int ch = 0; ch < TILE_C; ch++) {");
            c.line("for (int y = 0; y < TILE_H; y++) {");
            c.line("for (int x = 0; x < TILE_W; x++) {");
            c.line("/* HLS PIPELINE II=1 */");
            c.line("acc_t acc = 0;");
            window_loops(&mut c, k, d.pf);
            c.line(&format!("acc += (acc_t)in[(ch * TILE_H + iy) * TILE_W + ix] * w[(ch * {k} + ky) * {k} + kx];"));
            close(&mut c, 3);
            c.line("out[(ch * TILE_H + y) * TILE_W + x] = saturate(acc >> FRAC_BITS);");
            close(&mut c, 3);
        }
        IpKind::MaxPool | IpKind::AvgPool => {
            let max = d.kind == IpKind::MaxPool;
            c.line("for (int ch = 0; ch < TILE_C; ch++) {");
            c.line("for (int y = 0; y < TILE_H; y++) {");
            c.line("for (int x = 0; x < TILE_W; x++) {");
            c.line("/* HLS PIPELINE II=1 */");
            if max {
                c.line("acc_t best = DATA_MIN;");
            } else {
                c.line("acc_t sum = 0;");
                c.line("acc_t count = 0;");
            }
            window_loops(&mut c, k, d.pf);
            c.line("acc_t v = in[(ch * TILE_H + iy) * TILE_W + ix];");
            if max {
                c.line("best = v > best ? v : best;");
            } else {
                c.line("sum += v;");
                c.line("count++;");
            }
            close(&mut c, 3);
            if max {
                c.line("out[(ch * TILE_H + y) * TILE_W + x] = saturate(best);");
            } else {
                c.line("out[(ch * TILE_H + y) * TILE_W + x] = saturate(sum / count);");
            }
            close(&mut c, 3);
        }
        IpKind::Normalization | IpKind::Activation => {
            c.line("for (int i = 0; i < TILE_ELEMS; i++) {");
            c.line(&format!("/* HLS UNROLL factor={} */", d.pf));
            if d.kind == IpKind::Normalization {
                c.line("out[i] = saturate(((acc_t)in[i] * NORM_SCALE) >> FRAC_BITS);");
            } else {
                c.line("acc_t v = in[i];");
                c.line("out[i] = saturate(v < 0 ? 0 : (v > CLIP_MAX ? CLIP_MAX : v));");
            }
            c.line("}");
        }
    }
    c.line("}");
    c.out
}

fn fused_name(plan: &CodegenPlan, call: &LayerCall) -> String {
    format!("fused_l{}_{}", call.layer, plan.instances[call.instance].function)
}

fn call_line(plan: &CodegenPlan, call: &LayerCall) -> String {
    let f = if call.fused.is_empty() {
        plan.instances[call.instance].function.clone()
    } else {
        fused_name(plan, call)
    };
    match &call.weights {
        Some(w) => format!("{f}({}, {}, {w});", call.input, call.output),
        None => format!("{f}({}, {});", call.input, call.output),
    }
}

fn seg_block(c: &mut Code, plan: &CodegenPlan, seg: &SegmentPlan) {
    let first = &seg.calls[0];
    let last = seg.calls.last().expect("non-empty segment");
    let kinds: Vec<String> = seg
        .calls
        .iter()
        .map(|call| plan.instances[call.instance].kind.to_string())
        .collect();
    c.line(&format!(
        "/* {}: {} -> {}, {} */",
        seg.label,
        seg.src_dims,
        seg.dst_dims,
        kinds.join(" + ")
    ));
    let [tx, ty, tcn] = seg.tiles;
    let in_c0 = if seg.slice_input_channels { "tc * TILE_C" } else { "0" };
    let s = seg.load_stride;
    let src = seg.src_dims;
    let dst = seg.dst_dims;
    c.line(&format!("for (int tc = 0; tc < {tcn}; tc++) {{"));
    // The plan counts bytes; the C side indexes weight_t elements.
    let wb = plan.quant.weight_bytes();
    for wl in &seg.weight_loads {
        c.line(&format!(
            "load_weights(weights + {} + (size_t)tc * {}, w{}, {});",
            wl.offset / wb,
            wl.slice_bytes / wb,
            wl.instance,
            wl.slice_bytes / wb
        ));
    }
    if seg.global_reduce {
        c.line("for (int c = 0; c < TILE_C; c++) {");
        c.line("gacc[c] = 0;");
        c.line("}");
    }
    c.line(&format!("for (int ty = 0; ty < {ty}; ty++) {{"));
    c.line(&format!("for (int tx = 0; tx < {tx}; tx++) {{"));
    c.line("/* HLS DATAFLOW */");
    c.line(&format!(
        "load_tile({}, {}, {}, {}, {}, tx * TILE_W * {s}, ty * TILE_H * {s}, {in_c0}, {s});",
        seg.src, first.input, src.width, src.height, src.channels
    ));
    for call in &seg.calls {
        c.line(&call_line(plan, call));
    }
    if seg.global_reduce {
        c.line(&format!("reduce_tile({}, gacc);", last.output));
    } else {
        c.line(&format!(
            "store_tile({}, {}, {}, {}, {}, tx * TILE_W, ty * TILE_H, tc * TILE_C);",
            seg.dst, last.output, dst.width, dst.height, dst.channels
        ));
    }
    c.line("}");
    c.line("}");
    if seg.global_reduce {
        let area = u64::from(src.width) * u64::from(src.height);
        c.line(&format!("store_mean({}, gacc, {}, tc * TILE_C, {area});", seg.dst, dst.channels));
    }
    c.line("}");
}

fn top(plan: &CodegenPlan) -> String {
    let mut c = Code::new();
    let global = plan.segments.iter().any(|s| s.global_reduce);
    c.line("#include \"accel.h\"");
    c.line("");
    c.line(&format!(
        "/* {}: {} layers in {} calls over {} segments. */",
        plan.model,
        plan.layer_count,
        plan.schedule_len(),
        plan.segments.len()
    ));
    c.line("");
    for b in plan.buffers.iter().filter(|b| b.location == BufferLocation::OnChip) {
        if b.name.starts_with('t') {
            c.line(&format!("static data_t {}[TILE_ELEMS];", b.name));
        } else {
            c.line(&format!("static weight_t {}[{}];", b.name, b.bytes / plan.quant.weight_bytes()));
        }
    }
    c.line("");
    c.line("void load_tile(const data_t *src, data_t *dst, int width, int height, int channels, int x0, int y0, int c0, int stride)");
    c.line("{");
    c.line("for (int c = 0; c < TILE_C; c++) {");
    c.line("for (int y = 0; y < TILE_H; y++) {");
    c.line("for (int x = 0; x < TILE_W; x++) {");
    c.line("/* HLS PIPELINE II=1 */");
    c.line("int sc = c0 + c;");
    c.line("int sy = y0 + y * stride;");
    c.line("int sx = x0 + x * stride;");
    c.line("data_t v = 0;");
    c.line("if (sc < channels && sy < height && sx < width) {");
    c.line("v = src[((size_t)sc * height + sy) * width + sx];");
    c.line("}");
    c.line("dst[(c * TILE_H + y) * TILE_W + x] = v;");
    close(&mut c, 4);
    c.line("");
    c.line("void store_tile(data_t *dst, const data_t *src, int width, int height, int channels, int x0, int y0, int c0)");
    c.line("{");
    c.line("for (int c = 0; c < TILE_C; c++) {");
    c.line("for (int y = 0; y < TILE_H; y++) {");
    c.line("for (int x = 0; x < TILE_W; x++) {");
    c.line("/* HLS PIPELINE II=1 */");
    c.line("int dc = c0 + c;");
    c.line("int dy = y0 + y;");
    c.line("int dx = x0 + x;");
    c.line("if (dc < channels && dy < height && dx < width) {");
    c.line("dst[((size_t)dc * height + dy) * width + dx] = src[(c * TILE_H + y) * TILE_W + x];");
    c.line("}");
    close(&mut c, 4);
    c.line("");
    c.line("void load_weights(const weight_t *src, weight_t *dst, int count)");
    c.line("{");
    c.line("for (int i = 0; i < count; i++) {");
    c.line("/* HLS PIPELINE II=1 */");
    c.line("dst[i] = src[i];");
    c.line("}");
    c.line("}");
    if global {
        c.line("");
        c.line("static void reduce_tile(const data_t *tile, acc_t acc[TILE_C])");
        c.line("{");
        c.line("for (int c = 0; c < TILE_C; c++) {");
        c.line("for (int i = 0; i < TILE_W * TILE_H; i++) {");
        c.line("acc[c] += tile[c * TILE_W * TILE_H + i];");
        close(&mut c, 3);
        c.line("");
        c.line("static void store_mean(data_t *dst, const acc_t acc[TILE_C], int channels, int c0, int count)");
        c.line("{");
        c.line("for (int c = 0; c < TILE_C && c0 + c < channels; c++) {");
        c.line("dst[c0 + c] = saturate(acc[c] / count);");
        c.line("}");
        c.line("}");
    }

    let mut wrappers = BTreeMap::new();
    for seg in &plan.segments {
        for call in seg.calls.iter().filter(|c| !c.fused.is_empty()) {
            let name = fused_name(plan, call);
            if wrappers.contains_key(&name) {
                continue;
            }
            let head = &plan.instances[call.instance];
            let mut w = Code::new();
            let params = if call.weights.is_some() {
                "const data_t *in, data_t *out, const weight_t *w"
            } else {
                "const data_t *in, data_t *out"
            };
            w.line(&format!("static void {name}({params})"));
            w.line("{");
            if call.weights.is_some() {
                w.line(&format!("{}(in, out, w);", head.function));
            } else {
                w.line(&format!("{}(in, out);", head.function));
            }
            for f in &call.fused {
                w.line(&format!("{}(out, out);", plan.instances[f.instance].function));
            }
            w.line("}");
            wrappers.insert(name, w.out);
        }
    }
    for body in wrappers.values() {
        c.out.push('\n');
        c.out.push_str(body);
    }

    c.line("");
    c.line("void accel_top(const data_t *fmap_in, data_t *fmap_out, const weight_t *weights, data_t *dram_a, data_t *dram_b)");
    c.line("{");
    for port in ["fmap_in", "fmap_out", "weights", "dram_a", "dram_b"] {
        c.line(&format!("/* HLS INTERFACE m_axi port={port} */"));
    }
    let used = |name: &str| plan.buffers.iter().any(|b| b.name == name);
    for port in ["weights", "dram_a", "dram_b"] {
        if !used(port) {
            c.line(&format!("(void){port};"));
        }
    }
    if global {
        c.line("acc_t gacc[TILE_C];");
    }
    for seg in &plan.segments {
        c.line("");
        seg_block(&mut c, plan, seg);
    }
    c.line("}");
    c.out
}

/// Renders the plan as C sources plus a manifest. Output depends only on the inputs.
pub fn emit(plan: &CodegenPlan, estimates: Option<&EstimateReport>) -> SourceTree {
    let mut files = BTreeMap::new();
    files.insert("accel.h".to_string(), header(plan));
    files.insert("accel_top.c".to_string(), top(plan));
    for d in &plan.instances {
        files.insert(format!("ip_{}.c", d.kind.name()), kernel(d));
    }
    let mut names: Vec<String> = files.keys().cloned().collect();
    names.push("manifest.json".into());
    names.sort();
    let manifest = Manifest {
        schema_version: crate::SCHEMA_VERSION,
        files: names,
        schedule_len: plan.schedule_len(),
        plan: plan.clone(),
        estimates: estimates.cloned(),
    };
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    files.insert("manifest.json".to_string(), json);
    SourceTree { files }
}

/// Kernel and fused-wrapper call statements inside `accel_top`.
pub fn top_call_count(tree: &SourceTree) -> usize {
    let Some(src) = tree.files.get("accel_top.c") else {
        return 0;
    };
    let Some(start) = src.find("void accel_top(") else {
        return 0;
    };
    src[start..]
        .lines()
        .map(str::trim_start)
        .filter(|l| {
            let name: String = l.chars().take_while(|ch| ch.is_ascii_alphanumeric() || *ch == '_').collect();
            let kernel = name.strip_prefix("ip").is_some_and(|r| r.starts_with(|ch: char| ch.is_ascii_digit()));
            (kernel || name.starts_with("fused_l")) && l[name.len()..].starts_with('(')
        })
        .count()
}

/// Compact summary for logs.
pub fn describe(tree: &SourceTree) -> String {
    let mut s = String::new();
    for (name, body) in &tree.files {
        let _ = writeln!(s, "{name}: {} bytes", body.len());
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{Bundle, BundleId};
    use crate::device::DeviceSpec;
    use crate::dnn::{DnnCalibration, DnnModel};
    use crate::hls::plan::{plan, PlanOptions};
    use crate::ip_catalog::{CharTable, FeatureDims, QuantScheme, TileShape};

    fn tree(opts: PlanOptions) -> (CodegenPlan, SourceTree) {
        let b = Bundle::new(BundleId(11), &[IpKind::Conv3x3, IpKind::Dwconv3x3, IpKind::Normalization, IpKind::Activation])
            .with_config(4, QuantScheme::default());
        let m = DnnModel::new(b, 3, vec![1, 0], vec![2, 2], vec![1.5, 1.2], FeatureDims::new(64, 32, 16), TileShape::default(), DnnCalibration::from_table(CharTable::builtin())).unwrap();
        let p = plan(&m, &DeviceSpec::pynq_z1(), CharTable::builtin(), &opts).unwrap();
        let t = emit(&p, None);
        (p, t)
    }

    #[test]
    fn layout_and_call_count() {
        let (p, t) = tree(PlanOptions::default());
        let names: Vec<&str> = t.files.keys().map(String::as_str).collect();
        assert_eq!(
            names,
            ["accel.h", "accel_top.c", "ip_activation.c", "ip_conv3x3.c", "ip_dwconv3x3.c", "ip_normalization.c", "manifest.json"]
        );
        assert_eq!(top_call_count(&t), p.schedule_len());
        let m: Manifest = serde_json::from_str(&t.files["manifest.json"]).unwrap();
        assert_eq!(m.schema_version, 1);
        assert_eq!(m.plan, p);
    }

    #[test]
    fn fused_calls_go_through_wrappers() {
        let (p, t) = tree(PlanOptions { fuse_elementwise: true, reuse_buffers: true });
        assert_eq!(top_call_count(&t), p.schedule_len());
        let top = &t.files["accel_top.c"];
        assert!(top.contains("static void fused_l1_ip1_dwconv3x3(const data_t *in, data_t *out, const weight_t *w)"));
        assert!(top.contains("ip2_normalization(out, out);"));
        assert!(!top.contains("static data_t t2["));
    }

    #[test]
    fn emission_is_deterministic() {
        assert_eq!(tree(PlanOptions::default()).1, tree(PlanOptions::default()).1);
    }

    #[test]
    fn braces_balance() {
        let (_, t) = tree(PlanOptions::default());
        for (name, body) in &t.files {
            if name.ends_with(".c") || name.ends_with(".h") {
                assert_eq!(body.matches('{').count(), body.matches('}').count(), "{name}");
            }
        }
    }
}
