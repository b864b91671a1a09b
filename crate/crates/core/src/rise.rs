//! Randomized input sampling: score many randomly masked copies of the
//! input and average the masks weighted by the target's score.
//!
//! Mask `k` is a pure function of `(seed, k)`, so masks never need to be
//! stored and can be scored in any order. Accumulation always runs in
//! ascending mask index, which keeps results bit-identical regardless of
//! thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{bilinear, Fill, Image, SaliencyMap};
use crate::oracle::{BaseExplainer, ModelOracle};
use crate::output::{log_sum_exp, ClassOutput};
use crate::par::map_indexed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    /// `P(target | x)`, summed over target members.
    #[default]
    Prob,
    /// Compound logit: log-sum-exp of member logits.
    Logit,
}

impl std::str::FromStr for ScoreKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prob" => Ok(ScoreKind::Prob),
            "logit" => Ok(ScoreKind::Logit),
            other => Err(Error::InvalidInput(format!("unknown score kind {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiseConfig {
    pub num_masks: usize,
    /// Side length of the coarse Bernoulli grid.
    pub cell_grid: usize,
    pub keep_prob: f64,
    pub seed: u64,
    pub score: ScoreKind,
    /// Value shown through masked-out regions.
    pub baseline: Fill,
}

impl Default for RiseConfig {
    fn default() -> Self {
        RiseConfig {
            num_masks: 4000,
            cell_grid: 7,
            keep_prob: 0.5,
            seed: 0,
            score: ScoreKind::Prob,
            baseline: Fill::Mean,
        }
    }
}

impl RiseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_masks == 0 {
            return Err(Error::InvalidInput("num_masks must be >= 1".into()));
        }
        if self.cell_grid == 0 {
            return Err(Error::InvalidInput("cell_grid must be >= 1".into()));
        }
        if !(self.keep_prob > 0.0 && self.keep_prob < 1.0) {
            return Err(Error::InvalidInput("keep_prob must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Soft mask at image resolution with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mask {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

/// Coarse grid plus the random shift used to crop it.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskDraw {
    pub grid: Vec<bool>,
    pub shift_y: f64,
    pub shift_x: f64,
}

fn mask_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

pub fn draw(cfg: &RiseConfig, index: usize) -> MaskDraw {
    let mut rng = mask_rng(cfg.seed, index);
    let s = cfg.cell_grid;
    let grid = (0..s * s).map(|_| rng.random_bool(cfg.keep_prob)).collect();
    MaskDraw {
        grid,
        shift_y: rng.random::<f64>(),
        shift_x: rng.random::<f64>(),
    }
}

/// Upsample the `s x s` grid to `(s + 1)` cells per side and crop an
/// `h x w` window shifted by up to one cell.
pub fn render(draw: &MaskDraw, cell_grid: usize, h: usize, w: usize) -> Mask {
    let s = cell_grid;
    let cell_h = h.div_ceil(s);
    let cell_w = w.div_ceil(s);
    let (big_h, big_w) = ((s + 1) * cell_h, (s + 1) * cell_w);
    let grid: Vec<f64> = draw.grid.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let big = bilinear(&grid, s, s, big_h, big_w);
    let dy = ((draw.shift_y * cell_h as f64) as usize).min(cell_h - 1);
    let dx = ((draw.shift_x * cell_w as f64) as usize).min(cell_w - 1);
    let mut data = Vec::with_capacity(h * w);
    for r in 0..h {
        let row = &big[(r + dy) * big_w + dx..];
        data.extend(row[..w].iter().map(|v| v.clamp(0.0, 1.0)));
    }
    Mask {
        height: h,
        width: w,
        data,
    }
}

pub fn mask_at(cfg: &RiseConfig, index: usize, h: usize, w: usize) -> Mask {
    render(&draw(cfg, index), cfg.cell_grid, h, w)
}

pub fn generate_masks(cfg: &RiseConfig, h: usize, w: usize) -> Result<Vec<Mask>> {
    cfg.validate()?;
    Ok(map_indexed(cfg.num_masks, |k| mask_at(cfg, k, h, w)))
}

/// Resolve target label sets to class indices once.
fn target_indices(labels: &[String], targets: &[Vec<String>]) -> Result<Vec<Vec<usize>>> {
    targets
        .iter()
        .map(|t| {
            if t.is_empty() {
                return Err(Error::EmptyLabelSet);
            }
            t.iter()
                .map(|l| {
                    labels
                        .iter()
                        .position(|x| x == l)
                        .ok_or_else(|| Error::UnknownLabel(l.clone()))
                })
                .collect()
        })
        .collect()
}

fn target_score(out: &ClassOutput, members: &[usize], kind: ScoreKind) -> f64 {
    match kind {
        ScoreKind::Prob => members.iter().map(|&i| out.probabilities()[i]).sum(),
        ScoreKind::Logit => log_sum_exp(members.iter().map(|&i| out.logits()[i])),
    }
}

/// Saliency maps for several targets from one shared set of masks.
pub fn rise_saliency_multi<O: ModelOracle + ?Sized>(
    oracle: &O,
    x: &Image,
    targets: &[Vec<String>],
    cfg: &RiseConfig,
) -> Result<Vec<SaliencyMap>> {
    cfg.validate()?;
    let members = target_indices(oracle.labels(), targets)?;
    let (h, w) = (x.height(), x.width());
    let fill = cfg.baseline.values_for(x)?;

    let scored: Vec<Result<Vec<f64>>> = map_indexed(cfg.num_masks, |k| {
        let mask = mask_at(cfg, k, h, w);
        let out = oracle.classify(&x.blend_with_fill(&mask.data, &fill)?)?;
        Ok(members
            .iter()
            .map(|m| target_score(&out, m, cfg.score))
            .collect())
    });
    let failures = scored.iter().filter(|r| r.is_err()).count();
    let mut scores = Vec::with_capacity(scored.len());
    for (k, r) in scored.into_iter().enumerate() {
        match r {
            Ok(s) => scores.push(s),
            Err(e) => {
                return Err(e.at_stage(format!(
                    "RISE: mask {k} failed ({failures} of {} masks failed, {} scored)",
                    cfg.num_masks,
                    cfg.num_masks - failures
                )))
            }
        }
    }

    let mut acc = vec![vec![0.0; h * w]; targets.len()];
    for (k, per_target) in scores.iter().enumerate() {
        let mask = mask_at(cfg, k, h, w);
        for (sum, &score) in acc.iter_mut().zip(per_target) {
            for (a, m) in sum.iter_mut().zip(&mask.data) {
                *a += score * m;
            }
        }
    }
    let norm = 1.0 / (cfg.num_masks as f64 * cfg.keep_prob);
    acc.into_iter()
        .map(|sum| SaliencyMap::new(h, w, sum.into_iter().map(|v| v * norm).collect()))
        .collect()
}

pub fn rise_saliency<O: ModelOracle + ?Sized>(
    oracle: &O,
    x: &Image,
    target: &[String],
    cfg: &RiseConfig,
) -> Result<SaliencyMap> {
    Ok(rise_saliency_multi(oracle, x, &[target.to_vec()], cfg)?.remove(0))
}

/// RISE bound to an oracle, usable wherever a base explainer is expected.
pub struct Rise<O> {
    oracle: O,
    cfg: RiseConfig,
}

impl<O: ModelOracle> Rise<O> {
    pub fn new(oracle: O, cfg: RiseConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Rise { oracle, cfg })
    }

    pub fn config(&self) -> &RiseConfig {
        &self.cfg
    }
}

impl<O: ModelOracle> BaseExplainer for Rise<O> {
    fn name(&self) -> &str {
        "rise"
    }

    fn params(&self) -> serde_json::Value {
        serde_json::to_value(&self.cfg).expect("config serializes")
    }

    fn explain(&self, x: &Image, targets: &[Vec<String>]) -> Result<Vec<SaliencyMap>> {
        rise_saliency_multi(&self.oracle, x, targets, &self.cfg)
    }
}
