//! Browser playground: thin wasm-bindgen shims over the core crate.
//!
//! Every entry point takes plain strings (DIMACS text, one-variable-per-line
//! order files) and hands back a JSON string, so the page needs nothing
//! beyond the wasm-bindgen loader. Failures are reported as
//! `{"error": "..."}` values instead of thrown exceptions; the page shows
//! them verbatim. The predictor uses the checkpoint committed under
//! `assets/`, embedded into the binary at compile time.
//!
//! The same functions compile natively, which is how the test suite runs
//! without a wasm toolchain: `wasm-bindgen` reduces to a no-op attribute on
//! non-wasm targets.

use std::sync::OnceLock;

use hyperbdd::bdd::{parse_order, validate_order, BddManager, NodeId, TERM0};
use hyperbdd::cnf::{parse_dimacs, Cnf, VarId};
use hyperbdd::hmpnn::{depth_to_order, load_model, predict, Model};
use hyperbdd::hypergraph::{cnf_to_hypergraph, feature_rank};
use hyperbdd::reorder::{
    compression_ratio, exhaustive, genetic, obdd_size_under, random_swaps, sift, window_k,
    GaConfig, ReorderResult, EXHAUSTIVE_CAP, SIFT_MAX_GROWTH,
};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Checkpoint shipped with the repository, trained on the committed corpus.
const CHECKPOINT: &str = include_str!("../../../assets/model.ckpt.json");

fn model() -> Result<&'static Model, String> {
    static MODEL: OnceLock<Result<Model, String>> = OnceLock::new();
    MODEL
        .get_or_init(|| load_model(CHECKPOINT).map_err(|e| e.to_string()))
        .as_ref()
        .map_err(Clone::clone)
}

/// A small formula the page loads on startup: the CNF expansion of the
/// chain (x1∨x2)(x3∨x4)(x5∨x6), whose size under the natural order
/// (8 nodes) versus the pair-splitting order 1,3,5,2,4,6 (16 nodes) makes
/// reordering visible at a glance.
#[wasm_bindgen]
pub fn demo_formula() -> String {
    let pairs = 3u32;
    let mut text = String::from("c chain (x1 v x2)(x3 v x4)(x5 v x6), expanded\np cnf 6 8\n");
    for choice in 0..(1u32 << pairs) {
        for p in 0..pairs {
            text.push_str(&format!("{} ", 2 * p + 1 + ((choice >> p) & 1)));
        }
        text.push_str("0\n");
    }
    text
}

/// Build the OBDD for `dimacs` under `order_text` (frequency order when the
/// text is blank) and return `{size, num_vars, num_clauses, order, svg}`.
#[wasm_bindgen]
pub fn build(dimacs: &str, order_text: &str) -> String {
    respond(build_impl(dimacs, order_text))
}

/// Run one reordering algorithm (`win2`, `win3`, `sift`, `rand`, `ga`, or
/// `exhaustive`) from the given starting order and return
/// `{alg, initial_size, final_size, eta, seconds, order, svg}`.
#[wasm_bindgen]
pub fn reorder(dimacs: &str, alg: &str, order_text: &str, seed: u32) -> String {
    respond(reorder_impl(dimacs, alg, order_text, u64::from(seed)))
}

/// Predict a variable order with the embedded model and return
/// `{order, initial_size, predicted_size, eta, svg}`. `eta` compares the
/// predicted order against the frequency order, negative when it shrinks
/// the diagram.
#[wasm_bindgen]
pub fn predict_order(dimacs: &str) -> String {
    respond(predict_impl(dimacs))
}

fn respond(result: Result<Value, String>) -> String {
    match result {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

fn starting_order(cnf: &Cnf, order_text: &str) -> Result<Vec<VarId>, String> {
    if order_text.trim().is_empty() {
        return Ok(cnf.frequency_order());
    }
    let order = parse_order(order_text).map_err(|e| e.to_string())?;
    validate_order(cnf.num_vars(), &order).map_err(|e| e.to_string())?;
    Ok(order)
}

fn order_lines(order: &[VarId]) -> String {
    hyperbdd::bdd::format_order(order)
}

fn build_impl(dimacs: &str, order_text: &str) -> Result<Value, String> {
    let cnf = parse_dimacs(dimacs).map_err(|e| e.to_string())?;
    let order = starting_order(&cnf, order_text)?;
    let mut mgr = BddManager::new(cnf.num_vars(), &order).map_err(|e| e.to_string())?;
    let root = mgr.build_cnf(&cnf).map_err(|e| e.to_string())?;
    Ok(json!({
        "size": mgr.size(root),
        "num_vars": cnf.num_vars(),
        "num_clauses": cnf.clauses().len(),
        "order": order_lines(&order),
        "svg": render_svg(&mgr, root),
    }))
}

fn reorder_impl(dimacs: &str, alg: &str, order_text: &str, seed: u64) -> Result<Value, String> {
    let cnf = parse_dimacs(dimacs).map_err(|e| e.to_string())?;
    let initial = starting_order(&cnf, order_text)?;
    let prebuild = |order: &[VarId]| -> Result<(BddManager, NodeId), String> {
        let mut mgr = BddManager::new(cnf.num_vars(), order).map_err(|e| e.to_string())?;
        let root = mgr.build_cnf(&cnf).map_err(|e| e.to_string())?;
        Ok((mgr, root))
    };

    let alg = alg.trim().to_ascii_lowercase();
    let result: ReorderResult = match alg.as_str() {
        "win2" | "win3" => {
            let (mut mgr, root) = prebuild(&initial)?;
            let k = if alg == "win2" { 2 } else { 3 };
            window_k(&mut mgr, root, k).map_err(|e| e.to_string())?
        }
        "sift" => {
            let (mut mgr, root) = prebuild(&initial)?;
            sift(&mut mgr, root, SIFT_MAX_GROWTH)
        }
        "rand" => {
            let (mut mgr, root) = prebuild(&initial)?;
            random_swaps(&mut mgr, root, 50, seed)
        }
        "ga" => genetic(&cnf, &initial, &GaConfig::default(), seed).map_err(|e| e.to_string())?,
        "exhaustive" => {
            exhaustive(&cnf, &initial, EXHAUSTIVE_CAP).map_err(|e| e.to_string())?
        }
        other => return Err(format!("unknown algorithm `{other}`")),
    };

    let (mgr, root) = prebuild(&result.order)?;
    Ok(json!({
        "alg": alg,
        "initial_size": result.initial_size,
        "final_size": result.final_size,
        "eta": result.eta,
        "seconds": result.elapsed,
        "order": order_lines(&result.order),
        "svg": render_svg(&mgr, root),
    }))
}

fn predict_impl(dimacs: &str) -> Result<Value, String> {
    let cnf = parse_dimacs(dimacs).map_err(|e| e.to_string())?;
    let model = model()?;
    let hg = cnf_to_hypergraph(&cnf);
    let feats = feature_rank(&cnf, model.d_feat);
    let depths = predict(model, &hg, &feats).map_err(|e| e.to_string())?;
    let order = depth_to_order(&depths);

    let initial = cnf.frequency_order();
    let initial_size = obdd_size_under(&cnf, &initial).map_err(|e| e.to_string())?;
    let predicted_size = obdd_size_under(&cnf, &order).map_err(|e| e.to_string())?;
    let (eta, _) = compression_ratio(initial_size, predicted_size);

    let mut mgr = BddManager::new(cnf.num_vars(), &order).map_err(|e| e.to_string())?;
    let root = mgr.build_cnf(&cnf).map_err(|e| e.to_string())?;
    Ok(json!({
        "order": order_lines(&order),
        "initial_size": initial_size,
        "predicted_size": predicted_size,
        "eta": eta,
        "svg": render_svg(&mgr, root),
    }))
}

// --- SVG rendering ---------------------------------------------------------

const ROW_GAP: f64 = 72.0;
const MARGIN: f64 = 40.0;
const NODE_R: f64 = 16.0;
const TERM_HALF: f64 = 14.0;

/// Layered drawing of the diagram reachable from `root`: one row per
/// variable level that has nodes, terminals on a bottom row, dashed low
/// edges and solid high edges. Node handles are assigned deterministically
/// by the manager, so the layout is reproducible for a given build.
fn render_svg(mgr: &BddManager, root: NodeId) -> String {
    // Reachable interior nodes grouped by level, plus reachable terminals.
    let mut by_level: Vec<Vec<NodeId>> = Vec::new();
    let mut terms: Vec<NodeId> = Vec::new();
    let mut seen: Vec<NodeId> = Vec::new();
    let mut stack = vec![root];
    while let Some(id) = stack.pop() {
        if seen.contains(&id) {
            continue;
        }
        seen.push(id);
        if id.is_terminal() {
            terms.push(id);
            continue;
        }
        let node = mgr.node(id);
        let level = node.level as usize;
        if by_level.len() <= level {
            by_level.resize(level + 1, Vec::new());
        }
        by_level[level].push(id);
        stack.push(node.low);
        stack.push(node.high);
    }
    for row in &mut by_level {
        row.sort();
    }
    terms.sort();

    // Rows in drawing order: occupied levels top-down, then terminals.
    let rows: Vec<Vec<NodeId>> = by_level
        .into_iter()
        .filter(|row| !row.is_empty())
        .chain(std::iter::once(terms))
        .collect();
    let widest = rows.iter().map(Vec::len).max().unwrap_or(1);
    let width = (widest as f64).mul_add(90.0, 2.0 * MARGIN);
    let height = (rows.len().max(1) as f64 - 1.0).mul_add(ROW_GAP, 2.0 * MARGIN);

    let mut pos: Vec<(NodeId, f64, f64)> = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let y = MARGIN + (i as f64) * ROW_GAP;
        for (j, &id) in row.iter().enumerate() {
            let x = width * (j as f64 + 1.0) / (row.len() as f64 + 1.0);
            pos.push((id, x, y));
        }
    }
    let at = |id: NodeId| -> (f64, f64) {
        pos.iter().find(|(p, _, _)| *p == id).map(|&(_, x, y)| (x, y)).expect("laid out")
    };

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {width:.0} {height:.0}\" \
         width=\"{width:.0}\" height=\"{height:.0}\" font-family=\"sans-serif\" \
         font-size=\"13\">\n"
    );

    // Edges first so nodes paint over the line ends.
    for &(id, x, y) in &pos {
        if id.is_terminal() {
            continue;
        }
        let node = mgr.node(id);
        for (child, dashed) in [(node.low, true), (node.high, false)] {
            let (cx, cy) = at(child);
            let dash = if dashed { " stroke-dasharray=\"5 4\"" } else { "" };
            svg.push_str(&format!(
                "  <line x1=\"{x:.1}\" y1=\"{:.1}\" x2=\"{cx:.1}\" y2=\"{:.1}\" \
                 stroke=\"#678\" stroke-width=\"1.4\"{dash}/>\n",
                y + NODE_R,
                cy - NODE_R,
            ));
        }
    }

    for &(id, x, y) in &pos {
        if id.is_terminal() {
            let (label, fill) = if id == TERM0 { ("0", "#f6dddd") } else { ("1", "#ddf0dd") };
            svg.push_str(&format!(
                "  <rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" \
                 fill=\"{fill}\" stroke=\"#445\" stroke-width=\"1.4\"/>\n",
                x - TERM_HALF,
                y - TERM_HALF,
                2.0 * TERM_HALF,
                2.0 * TERM_HALF,
            ));
            svg.push_str(&format!(
                "  <text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\" \
                 fill=\"#223\">{label}</text>\n",
                y + 4.5,
            ));
        } else {
            let var = mgr.var_at_level(mgr.node(id).level);
            svg.push_str(&format!(
                "  <circle cx=\"{x:.1}\" cy=\"{y:.1}\" r=\"{NODE_R:.1}\" fill=\"#dfe9f7\" \
                 stroke=\"#3a5a8c\" stroke-width=\"1.4\"/>\n"
            ));
            svg.push_str(&format!(
                "  <text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\" \
                 fill=\"#223\">x{}</text>\n",
                y + 4.5,
                var.0,
            ));
        }
    }

    svg.push_str("</svg>\n");
    svg
}
