//! Contrastive whole-output explanations.
//!
//! Two-stage composition (`cwox2s`): each confusion cluster is contrasted
//! against the union of the other clusters, then each class is contrasted
//! against its cluster mates inside the cluster's support. The single-stage
//! variants and the plain per-class baseline share the same bundle type.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Image, SaliencyMap};
use crate::oracle::{BaseExplainer, ModelOracle};
use crate::output::{log_sum_exp, select_top_k, ClassOutput, TopKSelection};
use crate::tree::{restrict_and_cut, ClusterTree, ConfusionPartition};

fn member_indices(out: &ClassOutput, cluster: &[String]) -> Result<Vec<usize>> {
    if cluster.is_empty() {
        return Err(Error::EmptyLabelSet);
    }
    cluster
        .iter()
        .map(|l| out.index_of(l).ok_or_else(|| Error::UnknownLabel(l.clone())))
        .collect()
}

/// `log sum_{c in C} exp(z_c)`.
pub fn compound_logit(out: &ClassOutput, cluster: &[String]) -> Result<f64> {
    let idx = member_indices(out, cluster)?;
    Ok(log_sum_exp(idx.iter().map(|&i| out.logits()[i])))
}

/// `sum_{c in C} P(c | x)`, clamped to `[0, 1]`.
pub fn compound_prob(out: &ClassOutput, cluster: &[String]) -> Result<f64> {
    let idx = member_indices(out, cluster)?;
    Ok(idx
        .iter()
        .map(|&i| out.probabilities()[i])
        .sum::<f64>()
        .clamp(0.0, 1.0))
}

/// Cluster-vs-rest heatmap: `ReLU(h_cluster - h_rest)` when there is more
/// than one cluster, otherwise `h_cluster` itself.
pub fn cluster_contrast(
    h_cluster: &SaliencyMap,
    h_rest: &SaliencyMap,
    num_clusters: usize,
) -> Result<SaliencyMap> {
    if num_clusters <= 1 {
        return Ok(h_cluster.clone());
    }
    h_cluster.zip_with(h_rest, |a, b| (a - b).max(0.0))
}

/// Binary support of a heatmap at a relative threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportMask {
    pub height: usize,
    pub width: usize,
    pub data: Vec<u8>,
    pub epsilon: f64,
}

impl SupportMask {
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }

    pub fn as_map(&self) -> SaliencyMap {
        SaliencyMap::new(
            self.height,
            self.width,
            self.data.iter().map(|&v| v as f64).collect(),
        )
        .expect("mask shape")
    }
}

/// `1` where `map > epsilon * max(map)`. An all-zero map has empty support.
pub fn support_mask(map: &SaliencyMap, epsilon: f64) -> SupportMask {
    let threshold = epsilon * map.max();
    let data = map.data().iter().map(|&v| u8::from(v > threshold)).collect();
    SupportMask {
        height: map.height(),
        width: map.width(),
        data,
        epsilon,
    }
}

/// Class-vs-cluster-mates heatmap restricted to the cluster support:
/// `support * ReLU(h_class - h_rest)` for clusters of two or more classes,
/// `support * h_class` for singletons.
pub fn class_contrast(
    support: &SupportMask,
    h_class: &SaliencyMap,
    h_rest_in_cluster: Option<&SaliencyMap>,
    cluster_size: usize,
) -> Result<SaliencyMap> {
    if support.height != h_class.height() || support.width != h_class.width() {
        return Err(Error::mismatch(
            format!("{}x{}", support.height, support.width),
            format!("{}x{}", h_class.height(), h_class.width()),
        ));
    }
    let raw = if cluster_size > 1 {
        let rest = h_rest_in_cluster.ok_or_else(|| {
            Error::InvalidInput("contrast against cluster mates needs their map".into())
        })?;
        h_class.zip_with(rest, |a, b| (a - b).max(0.0))?
    } else {
        h_class.clone()
    };
    let data = raw
        .data()
        .iter()
        .zip(&support.data)
        .map(|(&v, &m)| if m == 1 { v } else { 0.0 })
        .collect();
    SaliencyMap::new(raw.height(), raw.width(), data)
}

/// Rescale to `[0, 1]`. Constant maps become all ones when positive and
/// all zeros otherwise.
pub fn normalize_minmax(map: &SaliencyMap) -> SaliencyMap {
    let (min, max) = (map.min(), map.max());
    if map.is_empty() {
        map.clone()
    } else if max > min {
        map.map(|v| (v - min) / (max - min))
    } else if max > 0.0 {
        map.map(|_| 1.0)
    } else {
        map.map(|_| 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "cwox2s")]
    Cwox2s,
    #[serde(rename = "swox")]
    Swox,
    #[serde(rename = "cwox1sA")]
    Cwox1sA,
    #[serde(rename = "cwox1sB")]
    Cwox1sB,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Cwox2s => "cwox2s",
            Method::Swox => "swox",
            Method::Cwox1sA => "cwox1sA",
            Method::Cwox1sB => "cwox1sB",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cwox2s" | "cwox-2s" => Ok(Method::Cwox2s),
            "swox" => Ok(Method::Swox),
            "cwox1sa" | "cwox-1sa" => Ok(Method::Cwox1sA),
            "cwox1sb" | "cwox-1sb" => Ok(Method::Cwox1sB),
            other => Err(Error::InvalidInput(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplainConfig {
    pub k_cap: usize,
    pub mass: f64,
    /// Relative threshold for cluster supports.
    pub epsilon: f64,
    /// Min-max normalize base maps before they are subtracted or masked.
    pub normalize: bool,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig {
            k_cap: 5,
            mass: 0.95,
            epsilon: 0.0,
            normalize: true,
        }
    }
}

impl ExplainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_cap == 0 {
            return Err(Error::InvalidInput("k_cap must be >= 1".into()));
        }
        if !(self.mass > 0.0 && self.mass <= 1.0) {
            return Err(Error::InvalidInput("mass must lie in (0, 1]".into()));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::InvalidInput("epsilon must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub explainer: String,
    pub params: serde_json::Value,
}

/// Heatmaps explaining every top class of one input.
#[derive(Clone, Debug, PartialEq)]
pub struct ExplanationBundle {
    pub method: Method,
    pub top: TopKSelection,
    pub partition: ConfusionPartition,
    /// One map per cluster for `cwox2s`; empty for single-stage methods.
    pub cluster_maps: Vec<SaliencyMap>,
    /// One map per top class, in top-K order.
    pub class_maps: Vec<(String, SaliencyMap)>,
    pub provenance: Provenance,
    pub config: ExplainConfig,
}

impl ExplanationBundle {
    pub fn class_map(&self, label: &str) -> Option<&SaliencyMap> {
        self.class_maps
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, m)| m)
    }
}

/// Base-map requests deduplicated by target set.
struct Requests {
    targets: Vec<Vec<String>>,
    slot: HashMap<Vec<String>, usize>,
}

impl Requests {
    fn new() -> Self {
        Requests {
            targets: Vec::new(),
            slot: HashMap::new(),
        }
    }

    fn want(&mut self, target: Vec<String>) -> usize {
        let mut key = target.clone();
        key.sort();
        *self.slot.entry(key).or_insert_with(|| {
            self.targets.push(target);
            self.targets.len() - 1
        })
    }

    fn fetch(
        self,
        explainer: &dyn BaseExplainer,
        x: &Image,
        normalize: bool,
        stage: &str,
    ) -> Result<Vec<SaliencyMap>> {
        if self.targets.is_empty() {
            return Ok(Vec::new());
        }
        let maps = explainer
            .explain(x, &self.targets)
            .map_err(|e| e.at_stage(format!("{stage}: base explainer {}", explainer.name())))?;
        if maps.len() != self.targets.len() {
            return Err(Error::InvalidInput(format!(
                "{stage}: explainer returned {} maps for {} targets",
                maps.len(),
                self.targets.len()
            )));
        }
        Ok(if normalize {
            maps.iter().map(normalize_minmax).collect()
        } else {
            maps
        })
    }
}

fn without(set: &[String], drop: &[String]) -> Vec<String> {
    set.iter().filter(|l| !drop.contains(l)).cloned().collect()
}

fn classify_top<O: ModelOracle + ?Sized>(
    oracle: &O,
    x: &Image,
    cfg: &ExplainConfig,
) -> Result<TopKSelection> {
    cfg.validate()?;
    let out = oracle.classify(x).map_err(|e| e.at_stage("classify"))?;
    Ok(select_top_k(&out, cfg.k_cap, cfg.mass))
}

fn provenance(explainer: &dyn BaseExplainer) -> Provenance {
    Provenance {
        explainer: explainer.name().to_string(),
        params: explainer.params(),
    }
}

/// Two-stage contrastive explanation of the top-K output.
pub fn explain_cwox2s<O: ModelOracle + ?Sized>(
    oracle: &O,
    explainer: &dyn BaseExplainer,
    tree: &ClusterTree,
    x: &Image,
    cfg: &ExplainConfig,
) -> Result<ExplanationBundle> {
    let top = classify_top(oracle, x, cfg)?;
    let partition = restrict_and_cut(tree, &top);
    compose_cwox2s(explainer, x, top, partition, cfg)
}

/// Two-stage composition for a given partition of the top classes.
pub fn compose_cwox2s(
    explainer: &dyn BaseExplainer,
    x: &Image,
    top: TopKSelection,
    partition: ConfusionPartition,
    cfg: &ExplainConfig,
) -> Result<ExplanationBundle> {
    let all = top.labels().to_vec();
    let num_clusters = partition.len();

    let mut stage1 = Requests::new();
    let cluster_slots: Vec<(usize, Option<usize>)> = partition
        .clusters()
        .iter()
        .map(|c| {
            let own = stage1.want(c.clone());
            let rest = (num_clusters > 1).then(|| stage1.want(without(&all, c)));
            (own, rest)
        })
        .collect();
    let maps1 = stage1.fetch(explainer, x, cfg.normalize, "cluster stage")?;
    let cluster_maps = cluster_slots
        .iter()
        .map(|&(own, rest)| match rest {
            Some(r) => cluster_contrast(&maps1[own], &maps1[r], num_clusters),
            None => Ok(maps1[own].clone()),
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.at_stage("cluster stage"))?;

    let mut stage2 = Requests::new();
    let mut class_slots = Vec::new();
    for (i, c) in partition.clusters().iter().enumerate() {
        for label in c {
            let own = stage2.want(vec![label.clone()]);
            let rest = (c.len() > 1).then(|| stage2.want(without(c, std::slice::from_ref(label))));
            class_slots.push((i, label.clone(), own, rest));
        }
    }
    let maps2 = stage2.fetch(explainer, x, cfg.normalize, "class stage")?;
    let supports: Vec<SupportMask> = cluster_maps
        .iter()
        .map(|m| support_mask(m, cfg.epsilon))
        .collect();
    let mut by_label = HashMap::new();
    for (i, label, own, rest) in class_slots {
        let size = partition.clusters()[i].len();
        let map = class_contrast(&supports[i], &maps2[own], rest.map(|r| &maps2[r]), size)
            .map_err(|e| e.at_stage(format!("class stage ({label})")))?;
        by_label.insert(label, map);
    }
    let class_maps = all
        .iter()
        .map(|l| (l.clone(), by_label.remove(l).expect("every top label has a map")))
        .collect();

    Ok(ExplanationBundle {
        method: Method::Cwox2s,
        top,
        partition,
        cluster_maps,
        class_maps,
        provenance: provenance(explainer),
        config: cfg.clone(),
    })
}

fn single_stage<O: ModelOracle + ?Sized>(
    method: Method,
    oracle: &O,
    explainer: &dyn BaseExplainer,
    x: &Image,
    partition: Option<&ClusterTree>,
    cfg: &ExplainConfig,
) -> Result<ExplanationBundle> {
    let top = classify_top(oracle, x, cfg)?;
    let partition = match partition {
        Some(tree) => restrict_and_cut(tree, &top),
        None => ConfusionPartition::single(top.labels()),
    };
    compose_single_stage(method, explainer, x, top, partition, cfg)
}

/// Single-stage composition; `partition` is recorded for evaluation only.
pub fn compose_single_stage(
    method: Method,
    explainer: &dyn BaseExplainer,
    x: &Image,
    top: TopKSelection,
    partition: ConfusionPartition,
    cfg: &ExplainConfig,
) -> Result<ExplanationBundle> {
    let all = top.labels().to_vec();
    let mut req = Requests::new();
    let slots: Vec<(usize, Option<usize>)> = all
        .iter()
        .map(|c| {
            let own = req.want(vec![c.clone()]);
            let foil = without(&all, std::slice::from_ref(c));
            let rest = (method != Method::Swox && !foil.is_empty()).then(|| req.want(foil));
            (own, rest)
        })
        .collect();
    // Per-class baseline maps are reported exactly as the explainer produced them.
    let normalize = cfg.normalize && method != Method::Swox;
    let maps = req.fetch(explainer, x, normalize, method.as_str())?;

    let class_maps = all
        .iter()
        .zip(slots)
        .map(|(c, (own, rest))| {
            let h = &maps[own];
            let map = match (method, rest) {
                (Method::Swox, _) | (_, None) => h.clone(),
                (Method::Cwox1sA, Some(r)) => h.zip_with(&maps[r], |a, b| (a - b).max(0.0))?,
                (Method::Cwox1sB, Some(r)) => h.zip_with(&inverse(&maps[r]), |a, b| a * b)?,
                (Method::Cwox2s, _) => unreachable!("two-stage handled separately"),
            };
            Ok((c.clone(), map))
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ExplanationBundle {
        method,
        top,
        partition,
        cluster_maps: Vec::new(),
        class_maps,
        provenance: provenance(explainer),
        config: cfg.clone(),
    })
}

/// `1 - h / max(h)` clamped to `[0, 1]`; all ones when `max(h) <= 0`.
pub fn inverse(h: &SaliencyMap) -> SaliencyMap {
    let max = h.max();
    if max <= 0.0 {
        return h.map(|_| 1.0);
    }
    h.map(|v| (1.0 - v / max).clamp(0.0, 1.0))
}

/// One base map per top class, no contrasting.
pub fn explain_swox<O: ModelOracle + ?Sized>(
    oracle: &O,
    explainer: &dyn BaseExplainer,
    x: &Image,
    tree: Option<&ClusterTree>,
    cfg: &ExplainConfig,
) -> Result<ExplanationBundle> {
    single_stage(Method::Swox, oracle, explainer, x, tree, cfg)
}

/// Each class against all other top classes by subtraction.
pub fn explain_cwox1s_a<O: ModelOracle + ?Sized>(
    oracle: &O,
    explainer: &dyn BaseExplainer,
    x: &Image,
    tree: Option<&ClusterTree>,
    cfg: &ExplainConfig,
) -> Result<ExplanationBundle> {
    single_stage(Method::Cwox1sA, oracle, explainer, x, tree, cfg)
}

/// Each class map multiplied by the inverse of the other top classes' map.
pub fn explain_cwox1s_b<O: ModelOracle + ?Sized>(
    oracle: &O,
    explainer: &dyn BaseExplainer,
    x: &Image,
    tree: Option<&ClusterTree>,
    cfg: &ExplainConfig,
) -> Result<ExplanationBundle> {
    single_stage(Method::Cwox1sB, oracle, explainer, x, tree, cfg)
}

/// Dispatch on `method`. `cwox2s` requires a tree.
pub fn explain<O: ModelOracle + ?Sized>(
    method: Method,
    oracle: &O,
    explainer: &dyn BaseExplainer,
    tree: Option<&ClusterTree>,
    x: &Image,
    cfg: &ExplainConfig,
) -> Result<ExplanationBundle> {
    match method {
        Method::Cwox2s => {
            let tree = tree.ok_or_else(|| {
                Error::InvalidInput("cwox2s needs a cluster tree".into())
            })?;
            explain_cwox2s(oracle, explainer, tree, x, cfg)
        }
        other => single_stage(other, oracle, explainer, x, tree, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(h: usize, w: usize, v: &[f64]) -> SaliencyMap {
        SaliencyMap::new(h, w, v.to_vec()).unwrap()
    }

    fn out3() -> ClassOutput {
        ClassOutput::from_logits(vec!["a".into(), "b".into(), "c".into()], vec![1.0, 2.0, 3.0]).unwrap()
    }

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn compound_logit_cases() {
        let out = out3();
        assert_eq!(compound_logit(&out, &s(&["b"])).unwrap(), 2.0);
        let eq = ClassOutput::from_logits(s(&["a", "b"]), vec![0.3, 0.3]).unwrap();
        assert!((compound_logit(&eq, &s(&["a", "b"])).unwrap() - (0.3 + 2f64.ln())).abs() < 1e-15);
        // ln(e + e^2 + e^3) = 3 + ln(1 + e^-1 + e^-2), evaluated with terms
        // summed smallest-first.
        let reference = 3.0 + (((-2f64).exp() + (-1f64).exp()) + 1.0).ln();
        let got = compound_logit(&out, &s(&["a", "b", "c"])).unwrap();
        assert!((got - reference).abs() < 1e-14);
        assert!((got - 3.40760596444438).abs() < 1e-13);
        assert!(matches!(compound_logit(&out, &[]), Err(Error::EmptyLabelSet)));
        assert!(matches!(compound_logit(&out, &s(&["q"])), Err(Error::UnknownLabel(_))));
    }

    #[test]
    fn compound_prob_cases() {
        let out = out3();
        assert_eq!(compound_prob(&out, &s(&["a"])).unwrap(), out.probabilities()[0]);
        assert!((compound_prob(&out, &s(&["a", "b", "c"])).unwrap() - 1.0).abs() < 1e-6);
        let cello = ClassOutput::from_logits(
            s(&["cello", "violin", "other"]),
            vec![0.839f64.ln(), 0.021f64.ln(), 0.14f64.ln()],
        )
        .unwrap();
        assert!((compound_prob(&cello, &s(&["cello", "violin"])).unwrap() - 0.860).abs() < 1e-12);
    }

    #[test]
    fn cluster_contrast_cases() {
        let any = map(1, 3, &[0.5, -1.0, 2.0]);
        assert_eq!(cluster_contrast(&any, &map(1, 3, &[9.0; 3]), 1).unwrap(), any);
        let got = cluster_contrast(&map(1, 2, &[2.0, 0.0]), &map(1, 2, &[1.0, 1.0]), 2).unwrap();
        assert_eq!(got.data(), &[1.0, 0.0]);
        assert_eq!(cluster_contrast(&any, &any, 3).unwrap().data(), &[0.0; 3]);
        assert!(cluster_contrast(&any, &map(1, 2, &[0.0; 2]), 2).is_err());
    }

    #[test]
    fn support_mask_cases() {
        let m = map(1, 3, &[0.0, 1.0, 2.0]);
        assert_eq!(support_mask(&m, 0.0).data, vec![0, 1, 1]);
        assert_eq!(support_mask(&m, 0.6).data, vec![0, 0, 1]);
        assert_eq!(support_mask(&SaliencyMap::zeros(2, 2), 0.0).data, vec![0; 4]);
    }

    #[test]
    fn class_contrast_cases() {
        let ones = support_mask(&SaliencyMap::constant(1, 2, 1.0), 0.0);
        let h = map(1, 2, &[3.0, 7.0]);
        assert_eq!(class_contrast(&ones, &h, None, 1).unwrap(), h);

        let half = SupportMask {
            height: 1,
            width: 2,
            data: vec![1, 0],
            epsilon: 0.0,
        };
        let got = class_contrast(&half, &map(1, 2, &[5.0, 5.0]), Some(&map(1, 2, &[1.0, 9.0])), 2).unwrap();
        assert_eq!(got.data(), &[4.0, 0.0]);

        let none = support_mask(&SaliencyMap::zeros(1, 2), 0.0);
        assert_eq!(class_contrast(&none, &h, Some(&h), 2).unwrap().data(), &[0.0, 0.0]);
        assert!(class_contrast(&ones, &h, None, 2).is_err());
        assert!(class_contrast(&ones, &map(1, 3, &[0.0; 3]), None, 1).is_err());
    }

    #[test]
    fn inverse_cases() {
        let out = map(1, 2, &[4.0, 4.0]).zip_with(&inverse(&map(1, 2, &[0.0, 2.0])), |a, b| a * b).unwrap();
        assert_eq!(out.data(), &[4.0, 0.0]);
        assert_eq!(inverse(&SaliencyMap::constant(1, 2, 3.0)).data(), &[0.0, 0.0]);
        assert_eq!(inverse(&SaliencyMap::zeros(1, 2)).data(), &[1.0, 1.0]);
    }

    #[test]
    fn normalize_cases() {
        assert_eq!(normalize_minmax(&map(1, 3, &[1.0, 2.0, 3.0])).data(), &[0.0, 0.5, 1.0]);
        assert_eq!(normalize_minmax(&SaliencyMap::constant(1, 2, 0.4)).data(), &[1.0, 1.0]);
        assert_eq!(normalize_minmax(&SaliencyMap::zeros(1, 2)).data(), &[0.0, 0.0]);
    }

    #[test]
    fn method_names_round_trip() {
        for m in [Method::Cwox2s, Method::Swox, Method::Cwox1sA, Method::Cwox1sB] {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("nope".parse::<Method>().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn grid() -> impl Strategy<Value = Vec<f64>> {
            prop::collection::vec(-5.0f64..5.0, 12)
        }

        proptest! {
            #[test]
            fn contrast_outputs_nonnegative(a in grid(), b in grid(), sup in prop::collection::vec(0u8..2, 12)) {
                let (ha, hb) = (map(3, 4, &a), map(3, 4, &b));
                let c = cluster_contrast(&ha, &hb, 2).unwrap();
                prop_assert!(c.data().iter().all(|v| *v >= 0.0));
                let mask = SupportMask { height: 3, width: 4, data: sup.clone(), epsilon: 0.0 };
                let k = class_contrast(&mask, &ha, Some(&hb), 2).unwrap();
                for (v, m) in k.data().iter().zip(&sup) {
                    prop_assert!(*v >= 0.0);
                    if *m == 0 { prop_assert_eq!(*v, 0.0); }
                }
            }

            #[test]
            fn cluster_contrast_positively_homogeneous(a in grid(), b in grid(), lambda in 0.01f64..50.0) {
                let base = cluster_contrast(&map(3, 4, &a), &map(3, 4, &b), 2).unwrap();
                let scaled = cluster_contrast(
                    &map(3, 4, &a.iter().map(|v| v * lambda).collect::<Vec<_>>()),
                    &map(3, 4, &b.iter().map(|v| v * lambda).collect::<Vec<_>>()),
                    2,
                ).unwrap();
                for (x, y) in base.data().iter().zip(scaled.data()) {
                    prop_assert!((x * lambda - y).abs() <= 1e-9 * (1.0 + y.abs()));
                }
            }

            #[test]
            fn exp_of_compound_logit(z in prop::collection::vec(-20.0f64..20.0, 2..8), pick in prop::collection::vec(any::<bool>(), 8)) {
                let names: Vec<String> = (0..z.len()).map(|i| format!("c{i}")).collect();
                let out = ClassOutput::from_logits(names.clone(), z.clone()).unwrap();
                let mut cluster: Vec<String> = names.iter().zip(&pick).filter(|(_, p)| **p).map(|(n, _)| n.clone()).collect();
                if cluster.is_empty() { cluster.push(names[0].clone()); }
                let direct: f64 = cluster.iter().map(|c| out.logit(c).unwrap().exp()).sum();
                let got = compound_logit(&out, &cluster).unwrap().exp();
                prop_assert!(((got - direct) / direct).abs() < 1e-9);
            }
        }
    }
}
