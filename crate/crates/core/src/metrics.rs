//! Contrastive faithfulness: delete pixels in heatmap order and watch the
//! contrastive score `P(c) * (1 - P(foil))` fall.

use serde::{Deserialize, Serialize};

use crate::contrast::{compound_prob, ExplanationBundle, Method};
use crate::error::{Error, Result};
use crate::image::{pixel_order, Fill, Image, SaliencyMap};
use crate::oracle::ModelOracle;
use crate::output::ClassOutput;
use crate::tree::ConfusionPartition;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    /// A pixel is salient when its value is at least `delta * max`.
    pub delta: f64,
    /// `tau = ceil(tau_frac * n)`.
    pub tau_frac: f64,
    pub baseline: Fill,
    /// Pixels deleted between oracle calls. 1 is exact.
    pub batch: usize,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            delta: 0.5,
            tau_frac: 0.05,
            baseline: Fill::Mean,
            batch: 1,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::InvalidInput("delta must lie in (0, 1]".into()));
        }
        if !(self.tau_frac > 0.0 && self.tau_frac <= 1.0) {
            return Err(Error::InvalidInput("tau_frac must lie in (0, 1]".into()));
        }
        if self.batch == 0 {
            return Err(Error::InvalidInput("batch must be >= 1".into()));
        }
        Ok(())
    }

    pub fn tau(&self, n: usize) -> usize {
        ((self.tau_frac * n as f64).ceil() as usize).max(1)
    }
}

/// Number of pixels with saliency `>= delta * max`. An all-zero map has no
/// salient pixels.
pub fn n_delta(map: &SaliencyMap, delta: f64) -> usize {
    if map.data().iter().all(|&v| v == 0.0) {
        return 0;
    }
    let threshold = delta * map.max();
    map.data().iter().filter(|&&v| v >= threshold).count()
}

/// Copy of `x` with `order[..r-1]` replaced by the fill value.
pub fn delete_pixels(x: &Image, order: &[usize], r: usize, fill: &Fill) -> Result<Image> {
    if r == 0 || r > order.len() + 1 {
        return Err(Error::InvalidInput(format!(
            "deletion step {r} outside 1..={}",
            order.len() + 1
        )));
    }
    let values = fill.values_for(x)?;
    let mut out = x.clone();
    for &p in &order[..r - 1] {
        out.pixel_mut(p).copy_from_slice(&values);
    }
    Ok(out)
}

/// `s(r) = P(c | x_r) * (1 - P(foil | x_r))`, always within `[0, 1]`.
pub fn contrastive_score(out: &ClassOutput, c: &str, foil: &[String]) -> Result<f64> {
    let p_c = out.probability(c)?;
    let p_foil = compound_prob(out, foil)?;
    Ok((p_c * (1.0 - p_foil)).clamp(0.0, 1.0))
}

/// Scores `s(1..=n_delta + 1)` under progressive deletion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeletionCurve {
    pub scores: Vec<f64>,
    pub n_total: usize,
    pub n_delta: usize,
    /// Set when scores between batch boundaries were filled step-wise.
    pub approximate: bool,
}

impl DeletionCurve {
    pub fn new(scores: Vec<f64>, n_total: usize, n_delta: usize) -> Result<Self> {
        if scores.len() != n_delta + 1 {
            return Err(Error::mismatch(n_delta + 1, scores.len()));
        }
        if n_delta > n_total {
            return Err(Error::InvalidInput("n_delta exceeds pixel count".into()));
        }
        if scores.iter().any(|s| !(0.0..=1.0).contains(s)) {
            return Err(Error::InvalidInput("scores must lie in [0, 1]".into()));
        }
        Ok(DeletionCurve {
            scores,
            n_total,
            n_delta,
            approximate: false,
        })
    }

    /// `s(r)`, 1-based.
    pub fn score(&self, r: usize) -> f64 {
        self.scores[r - 1]
    }
}

pub fn contrastive_curve<O: ModelOracle + ?Sized>(
    oracle: &O,
    x: &Image,
    map: &SaliencyMap,
    c: &str,
    foil: &[String],
    cfg: &MetricConfig,
) -> Result<DeletionCurve> {
    cfg.validate()?;
    if foil.is_empty() {
        return Err(Error::EmptyLabelSet);
    }
    if foil.iter().any(|f| f == c) {
        return Err(Error::InvalidInput(format!("{c:?} cannot be its own foil")));
    }
    let map = map.resized(x.height(), x.width())?;
    let order = pixel_order(&map);
    let nd = n_delta(&map, cfg.delta);
    let fill = cfg.baseline.values_for(x)?;

    let mut scores = Vec::with_capacity(nd + 1);
    let mut current = x.clone();
    let mut deleted = 0usize;
    let mut last = 0.0;
    for r in 1..=nd + 1 {
        while deleted < r - 1 {
            current.pixel_mut(order[deleted]).copy_from_slice(&fill);
            deleted += 1;
        }
        if cfg.batch == 1 || (r - 1) % cfg.batch == 0 || r == nd + 1 {
            let out = oracle
                .classify(&current)
                .map_err(|e| e.at_stage(format!("deletion step {r}")))?;
            last = contrastive_score(&out, c, foil)?;
        }
        scores.push(last);
    }
    let mut curve = DeletionCurve::new(scores, x.num_pixels(), nd)?;
    curve.approximate = cfg.batch > 1;
    Ok(curve)
}

/// Area under the contrastive score curve: `(1/n) sum_{r=1}^{n_delta} s(r)`.
pub fn cauc(curve: &DeletionCurve) -> f64 {
    cauc_over(curve, curve.n_delta)
}

/// CAUC summed over the first `steps` deletions only.
pub fn cauc_over(curve: &DeletionCurve, steps: usize) -> f64 {
    let steps = steps.min(curve.n_delta);
    curve.scores[..steps].iter().sum::<f64>() / curve.n_total as f64
}

/// Weighted drop: `(s(1) - s(n_delta + 1)) / log2(1 + max(n_delta, tau) / tau)`.
pub fn cdrop(curve: &DeletionCurve, tau: usize) -> f64 {
    let tau = tau.max(1) as f64;
    let drop = curve.score(1) - curve.score(curve.n_delta + 1);
    drop / (1.0 + (curve.n_delta as f64).max(tau) / tau).log2()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodScore {
    pub method: Method,
    pub cauc: f64,
    pub cdrop: f64,
    pub n_delta: usize,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curve: Option<Vec<f64>>,
    pub approximate: bool,
}

/// Scores of several heatmaps for one `(class, foil)` pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairComparison {
    pub label: String,
    pub foil: Vec<String>,
    /// Steps every CAUC in this comparison was summed over.
    pub shared_n_delta: usize,
    pub tau: usize,
    pub scores: Vec<MethodScore>,
}

/// CAUC over the smallest `n_delta` among the heatmaps (so the areas are
/// comparable); CDROP over each heatmap's own `n_delta`.
pub fn compare_methods<O: ModelOracle + ?Sized>(
    oracle: &O,
    x: &Image,
    bundles: &[&ExplanationBundle],
    c: &str,
    foil: &[String],
    cfg: &MetricConfig,
) -> Result<PairComparison> {
    let curves = bundles
        .iter()
        .map(|b| {
            let map = b.class_map(c).ok_or_else(|| {
                Error::InvalidInput(format!("{} bundle has no map for {c:?}", b.method))
            })?;
            contrastive_curve(oracle, x, map, c, foil, cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(bundles.iter().map(|b| b.method), curves, c, foil, cfg, true))
}

fn summarize(
    methods: impl Iterator<Item = Method>,
    curves: Vec<DeletionCurve>,
    c: &str,
    foil: &[String],
    cfg: &MetricConfig,
    keep_curves: bool,
) -> PairComparison {
    let shared = curves.iter().map(|k| k.n_delta).min().unwrap_or(0);
    let n = curves.first().map_or(0, |k| k.n_total);
    let tau = cfg.tau(n);
    let scores = methods
        .zip(curves)
        .map(|(method, curve)| MethodScore {
            method,
            cauc: cauc_over(&curve, shared),
            cdrop: cdrop(&curve, tau),
            n_delta: curve.n_delta,
            n: curve.n_total,
            approximate: curve.approximate,
            curve: keep_curves.then_some(curve.scores),
        })
        .collect();
    PairComparison {
        label: c.to_string(),
        foil: foil.to_vec(),
        shared_n_delta: shared,
        tau,
        scores,
    }
}

/// Evaluation pairs: each class against the rest of its confusion cluster.
/// Singleton clusters contribute nothing.
pub fn contrast_pairs(partition: &ConfusionPartition) -> Vec<(String, Vec<String>)> {
    partition
        .clusters()
        .iter()
        .filter(|c| c.len() > 1)
        .flat_map(|cluster| {
            cluster.iter().map(move |c| {
                let foil = cluster.iter().filter(|l| *l != c).cloned().collect();
                (c.clone(), foil)
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub config: MetricConfig,
    pub pairs: Vec<PairComparison>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub pairs: usize,
    pub mean_n_delta: f64,
    pub mean_cauc: f64,
    pub mean_cdrop: f64,
}

impl EvaluationReport {
    pub fn summary(&self) -> Vec<MethodSummary> {
        let mut out: Vec<MethodSummary> = Vec::new();
        for pair in &self.pairs {
            for s in &pair.scores {
                let entry = match out.iter_mut().find(|m| m.method == s.method) {
                    Some(e) => e,
                    None => {
                        out.push(MethodSummary {
                            method: s.method,
                            pairs: 0,
                            mean_n_delta: 0.0,
                            mean_cauc: 0.0,
                            mean_cdrop: 0.0,
                        });
                        out.last_mut().unwrap()
                    }
                };
                entry.pairs += 1;
                entry.mean_n_delta += s.n_delta as f64;
                entry.mean_cauc += s.cauc;
                entry.mean_cdrop += s.cdrop;
            }
        }
        for m in &mut out {
            let k = m.pairs as f64;
            m.mean_n_delta /= k;
            m.mean_cauc /= k;
            m.mean_cdrop /= k;
        }
        out
    }

    /// One row per method: mean CAUC and CDROP over all pairs.
    pub fn summary_csv(&self) -> String {
        let mut s = String::from("method,pairs,mean_n_delta,mean_cauc,mean_cdrop\n");
        for m in self.summary() {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                m.method, m.pairs, m.mean_n_delta, m.mean_cauc, m.mean_cdrop
            ));
        }
        s
    }
}

/// Evaluate every same-cluster pair of the first bundle's partition across
/// all bundles.
pub fn evaluate_bundles<O: ModelOracle + ?Sized>(
    oracle: &O,
    x: &Image,
    bundles: &[&ExplanationBundle],
    cfg: &MetricConfig,
    keep_curves: bool,
) -> Result<EvaluationReport> {
    let first = bundles
        .first()
        .ok_or_else(|| Error::InvalidInput("no bundles to evaluate".into()))?;
    let mut pairs = Vec::new();
    for (c, foil) in contrast_pairs(&first.partition) {
        let mut cmp = compare_methods(oracle, x, bundles, &c, &foil, cfg)?;
        if !keep_curves {
            for s in &mut cmp.scores {
                s.curve = None;
            }
        }
        pairs.push(cmp);
    }
    Ok(EvaluationReport {
        config: cfg.clone(),
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(scores: Vec<f64>, n: usize) -> DeletionCurve {
        let nd = scores.len() - 1;
        DeletionCurve::new(scores, n, nd).unwrap()
    }

    #[test]
    fn n_delta_cases() {
        let m = SaliencyMap::new(1, 3, vec![1.0, 2.0, 4.0]).unwrap();
        assert_eq!(n_delta(&m, 0.5), 2);
        assert_eq!(n_delta(&SaliencyMap::constant(3, 3, 0.2), 1.0), 9);
        assert_eq!(n_delta(&SaliencyMap::constant(3, 3, 0.2), 0.3), 9);
        assert_eq!(n_delta(&SaliencyMap::zeros(3, 3), 0.5), 0);
    }

    #[test]
    fn delete_pixels_cases() {
        let x = Image::new(8, 8, 1, (0..64).map(|i| (i as f64 + 1.0) / 100.0).collect()).unwrap();
        let order: Vec<usize> = (0..64).rev().collect();
        assert_eq!(delete_pixels(&x, &order, 1, &Fill::Mean).unwrap(), x);
        let gone = delete_pixels(&x, &order, 65, &Fill::Zero).unwrap();
        assert!(gone.data().iter().all(|&v| v == 0.0));
        let four = delete_pixels(&x, &order, 5, &Fill::Zero).unwrap();
        let changed = x.data().iter().zip(four.data()).filter(|(a, b)| a != b).count();
        assert_eq!(changed, 4);
        assert!(delete_pixels(&x, &order, 66, &Fill::Zero).is_err());
        assert!(delete_pixels(&x, &order, 0, &Fill::Zero).is_err());
    }

    #[test]
    fn cauc_cases() {
        assert_eq!(cauc(&curve(vec![0.0; 11], 100)), 0.0);
        assert_eq!(cauc(&curve(vec![1.0; 11], 100)), 0.1);
        assert_eq!(cauc_over(&curve(vec![1.0; 11], 100), 4), 0.04);
    }

    #[test]
    fn cdrop_cases() {
        // n_delta <= tau: plain drop.
        let c = curve(vec![0.9, 0.5, 0.3], 1000);
        assert_eq!(cdrop(&c, 50), 0.9 - 0.3);
        // n_delta = 3 tau: denominator log2(4) = 2.
        let mut scores = vec![0.5; 31];
        scores[0] = 0.8;
        scores[30] = 0.2;
        let c = curve(scores, 1000);
        assert_eq!(cdrop(&c, 10), (0.8 - 0.2) / 2.0);
    }

    #[test]
    fn curve_validation() {
        assert!(DeletionCurve::new(vec![0.1, 0.2], 10, 3).is_err());
        assert!(DeletionCurve::new(vec![1.2], 10, 0).is_err());
    }

    #[test]
    fn tau_rounds_up() {
        let cfg = MetricConfig::default();
        assert_eq!(cfg.tau(100), 5);
        assert_eq!(cfg.tau(101), 6);
        assert_eq!(cfg.tau(224 * 224), 2509);
    }

    #[test]
    fn pairs_skip_singletons() {
        let p = ConfusionPartition::new(vec![
            vec!["a".into(), "b".into()],
            vec!["c".into()],
            vec!["d".into(), "e".into(), "f".into()],
        ])
        .unwrap();
        let pairs = contrast_pairs(&p);
        assert_eq!(pairs.len(), 5);
        assert_eq!(pairs[0], ("a".to_string(), vec!["b".to_string()]));
        assert_eq!(pairs[3], ("e".to_string(), vec!["d".to_string(), "f".to_string()]));
        let singles = ConfusionPartition::new(vec![vec!["a".into()], vec!["b".into()]]).unwrap();
        assert!(contrast_pairs(&singles).is_empty());
    }

    #[test]
    fn min_rule_truncates_every_cauc() {
        let a = curve(vec![0.5; 101], 1000);
        let b = curve(vec![0.5; 41], 1000);
        let cfg = MetricConfig::default();
        let cmp = summarize([Method::Swox, Method::Cwox2s].into_iter(), vec![a, b], "c", &["f".into()], &cfg, false);
        assert_eq!(cmp.shared_n_delta, 40);
        assert_eq!(cmp.scores[0].cauc, cmp.scores[1].cauc);
        assert_eq!(cmp.scores[0].cauc, 40.0 * 0.5 / 1000.0);
        assert_eq!(cmp.scores[0].n_delta, 100);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn cauc_is_monotone(scores in prop::collection::vec(0.0f64..1.0, 2..40), idx in 0usize..40, bump in 0.0f64..1.0) {
                let n = 100;
                let base = curve(scores.clone(), n);
                let mut raised = scores;
                let i = idx % raised.len();
                raised[i] = (raised[i] + bump).min(1.0);
                prop_assert!(cauc(&curve(raised, n)) >= cauc(&base));
            }

            #[test]
            fn cdrop_bounded_by_raw_drop(scores in prop::collection::vec(0.0f64..1.0, 1..60), tau in 1usize..30) {
                let c = curve(scores, 100);
                let raw = c.score(1) - c.score(c.n_delta + 1);
                let v = cdrop(&c, tau);
                prop_assert!(v.abs() <= raw.abs() + 1e-15);
                prop_assert!(v.abs() <= 1.0);
            }
        }
    }
}
