//! Browser bindings for the demo page. Every export takes plain numbers or
//! strings and returns a JSON document; failures come back as
//! `{"error": "..."}`.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use infosieve::codec::{harden, positional_value, truncate, BinaryCode, MaskSequence, MAX_CODE_LEN};
use infosieve::datagen::HierParams;
use infosieve::losses::loss_length_value;
use infosieve::runner::{extract_tree, prepare, train_on, DataSource, RunConfig};
use infosieve::treelab::{is_valid_encoding, oracle_optimal_encoding, trie_from_codes, DEFAULT_MAX_N};

fn respond(r: Result<Value, String>) -> String {
    match r {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| format!("not a number: {t:?}")))
        .collect()
}

/// Hardened code, positional value and length loss of one code/mask pair.
///
/// `soft` holds generator outputs in [-1, 1], `mask` masker outputs in
/// [0, 1], both as comma or space separated lists.
#[wasm_bindgen]
pub fn explore_code(soft: &str, mask: &str, base: f64) -> String {
    respond(explore_code_value(soft, mask, base))
}

fn explore_code_value(soft: &str, mask: &str, base: f64) -> Result<Value, String> {
    let soft = parse_list(soft)?;
    let mask = parse_list(mask)?;
    if soft.is_empty() || soft.len() > MAX_CODE_LEN {
        return Err(format!("code length must be in 1..={MAX_CODE_LEN}"));
    }
    if soft.iter().any(|s| !(-1.0..=1.0).contains(s)) {
        return Err("code values must lie in [-1, 1]".into());
    }
    if mask.iter().any(|m| !(0.0..=1.0).contains(m)) {
        return Err("mask values must lie in [0, 1]".into());
    }
    if !(1.0..=2.0).contains(&base) {
        return Err("base must lie in [1, 2]".into());
    }
    let code = BinaryCode::from_soft(soft);
    let seq = MaskSequence::new(mask.clone(), base);
    let kept = truncate(&code, &seq).map_err(|e| e.to_string())?;
    Ok(json!({
        "hard": harden(&code, &seq),
        "eff_length": seq.eff_length,
        "bits": code.bits,
        "truncated": kept,
        "weighted_mask": seq.weighted,
        "positional_value": positional_value(&code, &seq, base),
        "length_loss": loss_length_value(&[mask], base, 1.0),
    }))
}

/// Shortest valid encoding for a small labeled set.
///
/// `labels` is either comma separated (`cat,cat,dog`) or, without commas,
/// one label per character (`AABB`). At most eight samples.
#[wasm_bindgen]
pub fn oracle(labels: &str) -> String {
    respond(oracle_value(labels))
}

fn oracle_value(labels: &str) -> Result<Value, String> {
    let labels: Vec<String> = if labels.contains(',') {
        labels.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
    } else {
        labels.chars().filter(|c| !c.is_whitespace()).map(String::from).collect()
    };
    let r = oracle_optimal_encoding(&labels, DEFAULT_MAX_N).map_err(|e| e.to_string())?;
    let best = &r.optima[0];
    let tree = trie_from_codes(best).map_err(|e| e.to_string())?;
    let mut cats: Vec<&String> = Vec::new();
    for l in &labels {
        if !cats.contains(&l) {
            cats.push(l);
        }
    }
    Ok(json!({
        "min_total": r.min_total,
        "optima": r.optima.len(),
        "shapes_examined": r.shapes_examined,
        "valid": is_valid_encoding(best, &labels).valid,
        "samples": labels.iter().zip(best.codes()).map(|(l, c)| json!({ "label": l, "code": c })).collect::<Vec<_>>(),
        "prefixes": cats.iter().zip(&r.category_prefixes).map(|(l, p)| json!({ "label": l, "prefix": p })).collect::<Vec<_>>(),
        "tree": tree.dump_text(Some(&labels)),
    }))
}

/// The configuration the page trains: four leaf classes, two of them known.
pub fn demo_config(seed: u64, epochs: usize) -> RunConfig {
    RunConfig {
        data: DataSource::Synthetic(HierParams {
            seed,
            depth: 2,
            per_leaf: 12,
            dim: 16,
            ..HierParams::default()
        }),
        seed,
        n_epochs: epochs,
        batch_size: 16,
        hidden: 32,
        feat_dim: 16,
        head_hidden: 16,
        cat_hidden: 16,
        code_len: 8,
        deterministic: true,
        ..RunConfig::default()
    }
}

/// Trains `demo_config(seed, epochs)` and reports accuracy, the loss curve
/// and the learned codes.
#[wasm_bindgen]
pub fn train_demo(seed: u64, epochs: usize) -> String {
    respond(train_demo_value(seed, epochs))
}

fn train_demo_value(seed: u64, epochs: usize) -> Result<Value, String> {
    if epochs > 500 {
        return Err("at most 500 epochs".into());
    }
    let cfg = demo_config(seed, epochs);
    let (ds, split) = prepare(&cfg).map_err(|e| e.to_string())?;
    let r = train_on(&cfg, &ds, &split).map_err(|e| e.to_string())?;
    let model = r.model.as_ref().ok_or("training returned no model")?;
    let tree = extract_tree(model, &ds);
    let acc = |m: &infosieve::cluster::GcdMetrics| json!({ "all": m.acc_all, "known": m.acc_known, "novel": m.acc_novel });
    let classes: Vec<Value> = tree
        .stats
        .iter()
        .map(|(c, s)| {
            json!({ "class": c, "known": split.is_known(*c), "prefix": s.lcp, "purity": s.purity, "members": s.members })
        })
        .collect();
    let samples: Vec<Value> = tree
        .encoding
        .codes()
        .iter()
        .zip(&ds.labels)
        .map(|(c, l)| json!({ "label": l, "code": c }))
        .collect();
    Ok(json!({
        "summary": r.summary_line(),
        "code": acc(&r.metrics.code),
        "feature": acc(&r.metrics.feature),
        "purity": r.tree.mean_purity,
        "binarization": r.binarization,
        "loss": r.history.iter().map(|h| h.loss.total).collect::<Vec<_>>(),
        "classes": classes,
        "samples": samples,
        "tree": tree.text(&ds.labels),
    }))
}
