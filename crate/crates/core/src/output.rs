//! Classifier outputs and top-K selection.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on probability normalization and softmax consistency for
/// outputs computed in double precision.
pub const OUTPUT_TOLERANCE: f64 = 1e-6;

pub fn log_sum_exp(values: impl IntoIterator<Item = f64>) -> f64 {
    let values: Vec<f64> = values.into_iter().collect();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|v| v / total).collect()
}

/// Full output distribution of a classifier on one input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassOutput {
    labels: Vec<String>,
    probabilities: Vec<f64>,
    logits: Vec<f64>,
}

impl ClassOutput {
    /// Build from logits; probabilities are their softmax.
    pub fn from_logits(labels: Vec<String>, logits: Vec<f64>) -> Result<Self> {
        let probabilities = softmax(&logits);
        Self::with_tolerance(labels, probabilities, logits, OUTPUT_TOLERANCE)
    }

    /// Validate an externally produced output. `tol` bounds both
    /// `|sum(p) - 1|` and `|p - softmax(z)|`.
    pub fn with_tolerance(
        labels: Vec<String>,
        probabilities: Vec<f64>,
        logits: Vec<f64>,
        tol: f64,
    ) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidInput("output has no classes".into()));
        }
        if labels.len() != probabilities.len() || labels.len() != logits.len() {
            return Err(Error::mismatch(
                format!("{} probabilities and logits", labels.len()),
                format!("{} / {}", probabilities.len(), logits.len()),
            ));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = labels.iter().find(|l| !seen.insert(l.as_str())) {
            return Err(Error::InvalidInput(format!("duplicate label {dup:?}")));
        }
        if logits.iter().any(|z| !z.is_finite()) {
            return Err(Error::InvalidInput("logits must be finite".into()));
        }
        if probabilities
            .iter()
            .any(|p| !p.is_finite() || *p < -tol || *p > 1.0 + tol)
        {
            return Err(Error::InvalidInput("probabilities must lie in [0, 1]".into()));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > tol {
            return Err(Error::InvalidInput(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        let expected = softmax(&logits);
        if let Some((i, _)) = probabilities
            .iter()
            .zip(&expected)
            .enumerate()
            .find(|(_, (p, q))| (*p - *q).abs() > tol)
        {
            return Err(Error::InvalidInput(format!(
                "probability of {:?} ({}) is not the softmax of the logits ({})",
                labels[i], probabilities[i], expected[i]
            )));
        }
        let probabilities = probabilities.into_iter().map(|p| p.clamp(0.0, 1.0)).collect();
        Ok(ClassOutput {
            labels,
            probabilities,
            logits,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn probability(&self, label: &str) -> Result<f64> {
        self.index_of(label)
            .map(|i| self.probabilities[i])
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn logit(&self, label: &str) -> Result<f64> {
        self.index_of(label)
            .map(|i| self.logits[i])
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    /// Class indices by descending probability; equal probabilities keep
    /// vocabulary order.
    pub fn ranked(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.labels.len()).collect();
        idx.sort_by(|&a, &b| {
            self.probabilities[b]
                .total_cmp(&self.probabilities[a])
                .then(a.cmp(&b))
        });
        idx
    }
}

/// The top classes selected for explanation, in descending probability.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopKSelection {
    labels: Vec<String>,
    probabilities: Vec<f64>,
}

impl TopKSelection {
    /// Rebuild a stored selection; probabilities must be non-increasing.
    pub fn from_parts(labels: Vec<String>, probabilities: Vec<f64>) -> Result<Self> {
        if labels.is_empty() || labels.len() != probabilities.len() {
            return Err(Error::InvalidInput("selection needs one probability per label".into()));
        }
        if probabilities.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidInput("selection is not in descending probability".into()));
        }
        let mut seen = HashSet::new();
        if labels.iter().any(|l| !seen.insert(l.as_str())) {
            return Err(Error::InvalidInput("duplicate label in selection".into()));
        }
        Ok(TopKSelection {
            labels,
            probabilities,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn k(&self) -> usize {
        self.labels.len()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.labels.iter().any(|l| l == label)
    }
}

/// `K = min(k_cap, smallest prefix whose cumulative probability exceeds mass)`.
pub fn select_top_k(out: &ClassOutput, k_cap: usize, mass: f64) -> TopKSelection {
    let k_cap = k_cap.max(1);
    let mut labels = Vec::new();
    let mut probabilities = Vec::new();
    let mut cumulative = 0.0;
    for i in out.ranked() {
        labels.push(out.labels[i].clone());
        probabilities.push(out.probabilities[i]);
        cumulative += out.probabilities[i];
        if cumulative > mass || labels.len() == k_cap {
            break;
        }
    }
    TopKSelection {
        labels,
        probabilities,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    /// Output whose softmax reproduces `probs` exactly enough for the tests.
    fn from_probs(names: &[&str], probs: &[f64]) -> ClassOutput {
        let logits = probs.iter().map(|p| p.ln()).collect();
        ClassOutput::from_logits(labels(names), logits).unwrap()
    }

    #[test]
    fn top_k_single_dominant_class() {
        let out = from_probs(&["a", "b", "c"], &[0.97, 0.02, 0.01]);
        assert_eq!(select_top_k(&out, 5, 0.95).labels(), &labels(&["a"])[..]);
    }

    #[test]
    fn top_k_cello_example() {
        let names = [
            "violin",
            "cello",
            "banjo",
            "acoustic-guitar",
            "electric-guitar",
            "harp",
            "oboe",
        ];
        let probs = [0.021, 0.839, 0.036, 0.081, 0.008, 0.0075, 0.0075];
        let out = from_probs(&names, &probs);
        // Cumulative mass passes 0.95 after three classes (0.956).
        assert_eq!(
            select_top_k(&out, 5, 0.95).labels(),
            &labels(&["cello", "acoustic-guitar", "banjo"])[..]
        );
        // A fixed K of 5 (no mass cut-off) yields the five-class document.
        assert_eq!(
            select_top_k(&out, 5, 1.0).labels(),
            &labels(&["cello", "acoustic-guitar", "banjo", "violin", "electric-guitar"])[..]
        );
    }

    #[test]
    fn top_k_needs_full_prefix() {
        // Cumulative sums 0.49, 0.87, 1.00.
        let out = from_probs(&["a", "b", "c"], &[0.49, 0.38, 0.13]);
        assert_eq!(select_top_k(&out, 5, 0.95).labels(), &labels(&["a", "b", "c"])[..]);
        assert_eq!(select_top_k(&out, 2, 0.95).k(), 2);
    }

    #[test]
    fn strict_mass_comparison() {
        let out = from_probs(&["a", "b"], &[0.5, 0.5]);
        // 0.5 is not > 0.5, so a second class is needed.
        assert_eq!(select_top_k(&out, 5, 0.5).k(), 2);
    }

    #[test]
    fn validation_rejects_bad_outputs() {
        let l = labels(&["a", "b"]);
        assert!(ClassOutput::with_tolerance(l.clone(), vec![0.5, 0.3], vec![0.0, 0.0], 1e-6).is_err());
        assert!(ClassOutput::with_tolerance(l.clone(), vec![0.7, 0.3], vec![0.0, 0.0], 1e-6).is_err());
        assert!(ClassOutput::with_tolerance(labels(&["a", "a"]), vec![0.5, 0.5], vec![0.0, 0.0], 1e-6).is_err());
        let z = [0.7f64.ln(), 0.3f64.ln()];
        assert!(ClassOutput::with_tolerance(l, vec![0.7, 0.3], z.to_vec(), 1e-6).is_ok());
    }

    #[test]
    fn log_sum_exp_is_stable() {
        let v = log_sum_exp([1000.0, 1000.0]);
        assert!((v - (1000.0 + 2f64.ln())).abs() < 1e-9);
        assert_eq!(log_sum_exp(std::iter::empty()), f64::NEG_INFINITY);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn top_k_size_and_mass(logits in prop::collection::vec(-6.0f64..6.0, 1..12), k_cap in 1usize..8, mass in 0.05f64..1.0) {
                let names: Vec<String> = (0..logits.len()).map(|i| format!("c{i}")).collect();
                let out = ClassOutput::from_logits(names, logits).unwrap();
                let top = select_top_k(&out, k_cap, mass);
                prop_assert!(top.k() >= 1 && top.k() <= k_cap);
                let total: f64 = top.probabilities().iter().sum();
                prop_assert!(total > mass || top.k() == k_cap || top.k() == out.labels().len());
                prop_assert!(top.probabilities().windows(2).all(|w| w[0] >= w[1]));
            }
        }
    }
}
