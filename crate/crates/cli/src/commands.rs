use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;

use cwox_core::bundle::{load_bundle, save_bundle};
use cwox_core::contrast::{explain, ExplainConfig, Method};
use cwox_core::cooccur::{build_tree, extract_documents, CooccurrenceStats, Document};
use cwox_core::io::{read_npy, read_png, write_atomic, write_png};
use cwox_core::metrics::{evaluate_bundles, MetricConfig};
use cwox_core::oracle::{RemoteExplainer, RemoteOracle};
use cwox_core::render::{overlay, write_rgb8_png};
use cwox_core::rise::ScoreKind;
use cwox_core::scenario::disjoint_evidence;
use cwox_core::{BaseExplainer, ClusterTree, Fill, ModelOracle, Rise, RiseConfig, SyntheticClassifier};

use crate::{BaselineArg, BaselineArgs, Cli, Command, ScoreArg};

/// Per-item failure reported in the exit summary.
#[derive(Debug, Serialize)]
pub struct Failure {
    pub item: String,
    pub error: String,
}

pub fn run(cli: &Cli) -> Result<Vec<Failure>> {
    match &cli.command {
        Command::ExtractDocs(a) => extract_docs(cli, a),
        Command::ClusterBuild(a) => cluster_build(cli, a),
        Command::Explain(a) => explain_images(cli, a),
        Command::Evaluate(a) => evaluate(cli, a),
        Command::Render(a) => render(cli, a),
        Command::Scenario => scenario(cli),
    }
}

enum Oracle {
    Synthetic(SyntheticClassifier),
    Remote(RemoteOracle),
}

impl Oracle {
    fn as_dyn(&self) -> &dyn ModelOracle {
        match self {
            Oracle::Synthetic(m) => m,
            Oracle::Remote(r) => r,
        }
    }
}

fn load_oracle(cli: &Cli) -> Result<Oracle> {
    let source = match &cli.oracle {
        Some(s) => s.clone(),
        None => match std::env::var("CWOX_MODEL_URL") {
            Ok(url) if !url.is_empty() => format!("remote:{url}"),
            _ => bail!("no classifier: pass --oracle or set CWOX_MODEL_URL"),
        },
    };
    if let Some(path) = source.strip_prefix("synthetic:") {
        let text = fs::read_to_string(path).with_context(|| format!("reading model {path}"))?;
        Ok(Oracle::Synthetic(SyntheticClassifier::from_json(&text)?))
    } else if let Some(url) = source.strip_prefix("remote:") {
        Ok(Oracle::Remote(
            RemoteOracle::connect(url).with_context(|| format!("connecting to {url}"))?,
        ))
    } else {
        bail!("unknown oracle {source:?}; expected synthetic:<path> or remote:<url>")
    }
}

fn out_path(cli: &Cli, default: &str) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

/// Per-subsystem seed derived from the master seed (SplitMix64 finalizer).
fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const RISE_STREAM: u64 = 1;

fn fill_of(b: &BaselineArgs) -> Result<Fill> {
    Ok(match b.baseline {
        BaselineArg::Zero => Fill::Zero,
        BaselineArg::Mean => Fill::Mean,
        BaselineArg::Color => {
            if b.baseline_color.is_empty() {
                bail!("--baseline color needs --baseline-color");
            }
            Fill::Color(b.baseline_color.clone())
        }
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    ensure_parent(path)?;
    write_atomic(path, text.as_bytes())?;
    Ok(())
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}

fn list_pngs(dir: &Path) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) {
            names.push(path.file_name().unwrap().to_string_lossy().into_owned());
        }
    }
    names.sort();
    if names.is_empty() {
        bail!("no PNG images in {}", dir.display());
    }
    Ok(names)
}

fn extract_docs(cli: &Cli, a: &crate::ExtractArgs) -> Result<Vec<Failure>> {
    let oracle = load_oracle(cli)?;
    let names = list_pngs(&a.images)?;
    let load = |name: &str| read_png(&a.images.join(name));
    let results = extract_documents(oracle.as_dyn(), &names, load, a.top.k_cap, a.top.mass)?;

    let mut text = String::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(doc) => {
                text.push_str(&doc.to_jsonl_line());
                text.push('\n');
            }
            Err(f) => {
                log::warn!("{}: {}", f.image, f.error);
                failures.push(Failure {
                    item: f.image,
                    error: f.error,
                });
            }
        }
    }
    let out = out_path(cli, "docs.jsonl");
    ensure_parent(&out)?;
    write_atomic(&out, text.as_bytes())?;
    Ok(failures)
}

fn cluster_build(cli: &Cli, a: &crate::ClusterArgs) -> Result<Vec<Failure>> {
    let text = fs::read_to_string(&a.docs).with_context(|| format!("reading {}", a.docs.display()))?;
    let mut stats = CooccurrenceStats::default();
    let mut failures = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match Document::from_jsonl_line(line) {
            Ok(doc) => stats.add(&doc.labels),
            Err(e) => {
                log::warn!("line {}: {e}", i + 1);
                failures.push(Failure {
                    item: format!("line {}", i + 1),
                    error: e.to_string(),
                });
            }
        }
    }
    let tree = build_tree(&stats, a.theta)?;
    let out = out_path(cli, "tree.json");
    ensure_parent(&out)?;
    write_atomic(&out, format!("{}\n", tree.to_json()).as_bytes())?;
    Ok(failures)
}

fn build_explainer<'a>(
    cli: &Cli,
    a: &crate::ExplainArgs,
    oracle: &'a Oracle,
) -> Result<Box<dyn BaseExplainer + 'a>> {
    if a.explainer == "rise" {
        let cfg = RiseConfig {
            num_masks: a.rise.rise_masks,
            cell_grid: a.rise.rise_grid,
            keep_prob: a.rise.rise_keep_prob,
            seed: a
                .rise
                .rise_seed
                .unwrap_or_else(|| derive_seed(cli.seed, RISE_STREAM)),
            score: match a.rise.rise_score {
                ScoreArg::Prob => ScoreKind::Prob,
                ScoreArg::Logit => ScoreKind::Logit,
            },
            baseline: fill_of(&a.baseline)?,
        };
        return Ok(Box::new(Rise::new(oracle.as_dyn(), cfg)?));
    }
    if let Some(name) = a.explainer.strip_prefix("remote:") {
        let Oracle::Remote(remote) = oracle else {
            bail!("--explainer {} needs a remote oracle", a.explainer);
        };
        let params: serde_json::Value =
            serde_json::from_str(&a.explainer_params).context("parsing --explainer-params")?;
        return Ok(Box::new(RemoteExplainer::new(remote.clone(), name, params)));
    }
    bail!("unknown explainer {:?}; expected rise or remote:<name>", a.explainer)
}

fn explain_images(cli: &Cli, a: &crate::ExplainArgs) -> Result<Vec<Failure>> {
    let method: Method = a.method.parse()?;
    let tree = match &a.tree {
        Some(p) => Some(ClusterTree::from_json(
            &fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        )?),
        None if method == Method::Cwox2s => bail!("--method cwox2s needs --tree"),
        None => None,
    };
    let oracle = load_oracle(cli)?;
    let explainer = build_explainer(cli, a, &oracle)?;
    let cfg = ExplainConfig {
        k_cap: a.top.k_cap,
        mass: a.top.mass,
        epsilon: a.epsilon,
        normalize: !a.no_normalize,
    };
    cfg.validate()?;

    let out = out_path(cli, "bundles");
    let mut failures = Vec::new();
    for path in &a.images {
        let item = path.display().to_string();
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "image".into());
        let result = read_png(path).and_then(|x| {
            let bundle = explain(method, oracle.as_dyn(), explainer.as_ref(), tree.as_ref(), &x, &cfg)?;
            save_bundle(&out.join(&stem), &bundle, Some(&item))
        });
        match result {
            Ok(m) => log::info!("{item}: {} clusters, {} classes", m.partition.len(), m.classes.len()),
            Err(e) => {
                log::warn!("{item}: {e}");
                failures.push(Failure {
                    item,
                    error: e.to_string(),
                });
            }
        }
    }
    Ok(failures)
}

fn evaluate(cli: &Cli, a: &crate::EvaluateArgs) -> Result<Vec<Failure>> {
    let loaded = a
        .bundles
        .iter()
        .map(|d| load_bundle(d).with_context(|| format!("loading bundle {}", d.display())))
        .collect::<Result<Vec<_>>>()?;
    let image = match &a.image {
        Some(p) => p.clone(),
        None => loaded[0]
            .1
            .image
            .clone()
            .map(PathBuf::from)
            .ok_or_else(|| anyhow!("bundle records no image; pass --image"))?,
    };
    let x = read_png(&image).with_context(|| format!("reading {}", image.display()))?;
    let oracle = load_oracle(cli)?;
    let cfg = MetricConfig {
        delta: a.delta,
        tau_frac: a.tau_frac,
        baseline: fill_of(&a.baseline)?,
        batch: a.batch,
    };
    let bundles: Vec<_> = loaded.iter().map(|(b, _)| b).collect();
    let report = evaluate_bundles(oracle.as_dyn(), &x, &bundles, &cfg, a.curves)?;
    if report.pairs.is_empty() {
        log::warn!("partition has no cluster with two or more classes; nothing to compare");
    }

    let out = out_path(cli, "report.json");
    write_json(&out, &report)?;
    write_atomic(&out.with_extension("csv"), report.summary_csv().as_bytes())?;
    Ok(Vec::new())
}

fn render(cli: &Cli, a: &crate::RenderArgs) -> Result<Vec<Failure>> {
    let x = read_png(&a.image).with_context(|| format!("reading {}", a.image.display()))?;
    let mut jobs: Vec<(PathBuf, PathBuf)> = Vec::new();
    match (&a.bundle, &a.map) {
        (Some(dir), None) => {
            let out = out_path(cli, "overlays");
            let manifest = cwox_core::bundle::load_manifest(dir)?;
            let files = manifest
                .clusters
                .iter()
                .map(|c| &c.file)
                .chain(manifest.classes.iter().map(|c| &c.file));
            for f in files {
                jobs.push((dir.join(f), out.join(Path::new(f).with_extension("png"))));
            }
        }
        (None, Some(map)) => jobs.push((map.clone(), out_path(cli, "overlay.png"))),
        _ => bail!("pass exactly one of --bundle or --map"),
    }

    let mut failures = Vec::new();
    for (src, dst) in jobs {
        let result = read_npy(&src).and_then(|m| overlay(&x, &m, a.alpha)).and_then(|img| {
            ensure_parent(&dst).map_err(|e| cwox_core::Error::Format(e.to_string()))?;
            write_rgb8_png(&dst, &img)
        });
        if let Err(e) = result {
            log::warn!("{}: {e}", src.display());
            failures.push(Failure {
                item: src.display().to_string(),
                error: e.to_string(),
            });
        }
    }
    Ok(failures)
}

fn scenario(cli: &Cli) -> Result<Vec<Failure>> {
    let s = disjoint_evidence();
    let out = out_path(cli, "scenario");
    fs::create_dir_all(&out)?;
    write_atomic(&out.join("model.json"), s.model.to_json().as_bytes())?;
    write_atomic(&out.join("tree.json"), format!("{}\n", s.tree.to_json()).as_bytes())?;
    write_png(&out.join("image.png"), &s.image)?;
    Ok(Vec::new())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_differ_by_stream_and_master() {
        assert_ne!(derive_seed(0, 1), derive_seed(0, 2));
        assert_ne!(derive_seed(0, 1), derive_seed(1, 1));
        assert_eq!(derive_seed(7, 1), derive_seed(7, 1));
    }
}
