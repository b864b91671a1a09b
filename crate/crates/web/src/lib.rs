//! Browser demo over the built-in four-class scenario: explain the output
//! with a chosen method, compare deletion curves, and preview RISE masks.

use serde::Serialize;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use cwox_core::contrast::{explain, ExplainConfig, ExplanationBundle, Method};
use cwox_core::metrics::{compare_methods, MetricConfig};
use cwox_core::render::{image_to_rgb8, overlay, DEFAULT_ALPHA};
use cwox_core::rise::mask_at;
use cwox_core::scenario::{disjoint_evidence, DisjointEvidence};
use cwox_core::{Error, ModelOracle, Result, Rise, RiseConfig, SaliencyMap};

#[derive(Serialize)]
struct MapView {
    title: String,
    width: usize,
    height: usize,
    rgba: Vec<u8>,
}

fn view(s: &DisjointEvidence, title: String, map: &SaliencyMap) -> Result<MapView> {
    let img = overlay(&s.image, map, DEFAULT_ALPHA)?;
    Ok(MapView {
        title,
        width: img.width,
        height: img.height,
        rgba: img.to_rgba(),
    })
}

fn bundle(s: &DisjointEvidence, method: Method, masks: usize, seed: u64) -> Result<ExplanationBundle> {
    let cfg = RiseConfig {
        num_masks: masks,
        seed,
        ..Default::default()
    };
    let rise = Rise::new(&s.model, cfg)?;
    explain(method, &s.model, &rise, Some(&s.tree), &s.image, &ExplainConfig::default())
}

/// Explanation of the scenario output as overlay images plus the top-K
/// distribution and its partition.
pub fn explain_view(method: &str, masks: usize, seed: u64) -> Result<Value> {
    let method: Method = method.parse()?;
    let s = disjoint_evidence();
    let b = bundle(&s, method, masks, seed)?;
    let mut maps = Vec::new();
    for (cluster, m) in b.partition.clusters().iter().zip(&b.cluster_maps) {
        maps.push(view(&s, format!("{{{}}}", cluster.join(", ")), m)?);
    }
    for (label, m) in &b.class_maps {
        maps.push(view(&s, label.clone(), m)?);
    }
    let top: Vec<Value> = b
        .top
        .labels()
        .iter()
        .zip(b.top.probabilities())
        .map(|(l, p)| json!({ "label": l, "probability": p }))
        .collect();
    Ok(json!({
        "method": method.as_str(),
        "top": top,
        "partition": b.partition.clusters(),
        "maps": maps,
    }))
}

/// Deletion curves of the two-stage and plain maps for `label` against the
/// rest of its cluster.
pub fn curves_view(label: &str, masks: usize, seed: u64) -> Result<Value> {
    let s = disjoint_evidence();
    let two = bundle(&s, Method::Cwox2s, masks, seed)?;
    let plain = bundle(&s, Method::Swox, masks, seed)?;
    let cluster = two
        .partition
        .cluster_of(label)
        .ok_or_else(|| Error::UnknownLabel(label.to_string()))?;
    let foil: Vec<String> = two.partition.clusters()[cluster]
        .iter()
        .filter(|l| *l != label)
        .cloned()
        .collect();
    let cmp = compare_methods(&s.model, &s.image, &[&two, &plain], label, &foil, &MetricConfig::default())?;
    Ok(serde_json::to_value(cmp)?)
}

/// RGBA preview of mask `index` at the scenario resolution.
pub fn mask_view(seed: u64, index: usize, grid: usize, keep_prob: f64) -> Result<Vec<u8>> {
    let cfg = RiseConfig {
        num_masks: index + 1,
        cell_grid: grid,
        keep_prob,
        seed,
        ..Default::default()
    };
    cfg.validate()?;
    let (h, w, _) = disjoint_evidence().model.input_shape();
    let m = mask_at(&cfg, index, h, w);
    Ok(m.data
        .iter()
        .flat_map(|&v| {
            let b = (v * 255.0).round() as u8;
            [b, b, b, 255]
        })
        .collect())
}

fn js(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub fn scenario_size() -> u32 {
    disjoint_evidence().image.width() as u32
}

#[wasm_bindgen]
pub fn scenario_rgba() -> Vec<u8> {
    image_to_rgb8(&disjoint_evidence().image).to_rgba()
}

#[wasm_bindgen]
pub fn explain_scenario(method: &str, masks: u32, seed: u32) -> Result<String, JsError> {
    let v = explain_view(method, masks as usize, seed as u64).map_err(js)?;
    serde_json::to_string(&v).map_err(js)
}

#[wasm_bindgen]
pub fn deletion_curves(label: &str, masks: u32, seed: u32) -> Result<String, JsError> {
    let v = curves_view(label, masks as usize, seed as u64).map_err(js)?;
    serde_json::to_string(&v).map_err(js)
}

#[wasm_bindgen]
pub fn rise_mask(seed: u32, index: u32, grid: u32, keep_prob: f64) -> Result<Vec<u8>, JsError> {
    mask_view(seed as u64, index as usize, grid as usize, keep_prob).map_err(js)
}
