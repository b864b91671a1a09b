//! Explanation bundles on disk: `manifest.json` plus one NPY file per map
//! (`cluster_<i>.npy`, `class_<i>_<label>.npy`).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::contrast::{ExplainConfig, ExplanationBundle, Method, Provenance};
use crate::error::{Error, Result};
use crate::io::{read_npy, write_atomic, write_npy};
use crate::output::TopKSelection;
use crate::tree::ConfusionPartition;

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterEntry {
    pub index: usize,
    pub labels: Vec<String>,
    pub file: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub label: String,
    pub probability: f64,
    pub cluster: usize,
    pub file: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
    pub partition: ConfusionPartition,
    pub clusters: Vec<ClusterEntry>,
    pub classes: Vec<ClassEntry>,
    pub provenance: Provenance,
    pub config: ExplainConfig,
}

fn file_safe(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

pub fn manifest_of(bundle: &ExplanationBundle, image: Option<&str>) -> Manifest {
    let clusters = bundle
        .cluster_maps
        .iter()
        .enumerate()
        .map(|(i, _)| ClusterEntry {
            index: i,
            labels: bundle.partition.clusters()[i].clone(),
            file: format!("cluster_{i}.npy"),
        })
        .collect();
    let classes = bundle
        .class_maps
        .iter()
        .enumerate()
        .map(|(i, (label, _))| ClassEntry {
            label: label.clone(),
            probability: bundle.top.probabilities()[i],
            cluster: bundle.partition.cluster_of(label).unwrap_or(0),
            file: format!("class_{i}_{}.npy", file_safe(label)),
        })
        .collect();
    Manifest {
        method: bundle.method,
        image: image.map(str::to_string),
        partition: bundle.partition.clone(),
        clusters,
        classes,
        provenance: bundle.provenance.clone(),
        config: bundle.config.clone(),
    }
}

/// Write the bundle; each file lands atomically.
pub fn save_bundle(dir: &Path, bundle: &ExplanationBundle, image: Option<&str>) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    let manifest = manifest_of(bundle, image);
    for (entry, map) in manifest.clusters.iter().zip(&bundle.cluster_maps) {
        write_npy(&dir.join(&entry.file), map)?;
    }
    for (entry, (_, map)) in manifest.classes.iter().zip(&bundle.class_maps) {
        write_npy(&dir.join(&entry.file), map)?;
    }
    let text = serde_json::to_string_pretty(&manifest)?;
    write_atomic(&dir.join(MANIFEST), text.as_bytes())?;
    Ok(manifest)
}

pub fn load_manifest(dir: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(dir.join(MANIFEST))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn load_bundle(dir: &Path) -> Result<(ExplanationBundle, Manifest)> {
    let manifest = load_manifest(dir)?;
    let cluster_maps = manifest
        .clusters
        .iter()
        .map(|e| read_npy(&dir.join(&e.file)))
        .collect::<Result<Vec<_>>>()?;
    let class_maps = manifest
        .classes
        .iter()
        .map(|e| Ok((e.label.clone(), read_npy(&dir.join(&e.file))?)))
        .collect::<Result<Vec<_>>>()?;
    let top = top_from_entries(&manifest.classes)?;
    let bundle = ExplanationBundle {
        method: manifest.method,
        top,
        partition: ConfusionPartition::new(manifest.partition.clusters().to_vec())?,
        cluster_maps,
        class_maps,
        provenance: manifest.provenance.clone(),
        config: manifest.config.clone(),
    };
    Ok((bundle, manifest))
}

fn top_from_entries(classes: &[ClassEntry]) -> Result<TopKSelection> {
    TopKSelection::from_parts(
        classes.iter().map(|c| c.label.clone()).collect(),
        classes.iter().map(|c| c.probability).collect(),
    )
    .map_err(|e| Error::Format(format!("manifest classes: {e}")))
}
