use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Image, SaliencyMap};
use crate::output::ClassOutput;

use super::{BaseExplainer, ModelOracle};

/// Linear-softmax classifier: `logit_c = (<w_c, x> + b_c) / temperature`.
///
/// Each class's per-pixel influence is exactly its weight map, which makes
/// it a ground truth for attribution tests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticClassifier {
    labels: Vec<String>,
    height: usize,
    width: usize,
    channels: usize,
    /// One `height * width * channels` grid per class, same layout as [`Image`].
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
    #[serde(default = "one")]
    temperature: f64,
}

fn one() -> f64 {
    1.0
}

impl SyntheticClassifier {
    pub fn new(
        labels: Vec<String>,
        (height, width, channels): (usize, usize, usize),
        weights: Vec<Vec<f64>>,
        biases: Vec<f64>,
        temperature: f64,
    ) -> Result<Self> {
        let model = SyntheticClassifier {
            labels,
            height,
            width,
            channels,
            weights,
            biases,
            temperature,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: SyntheticClassifier = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    fn validate(&self) -> Result<()> {
        let k = self.labels.len();
        if k < 2 {
            return Err(Error::InvalidInput("synthetic model needs at least 2 classes".into()));
        }
        if self.weights.len() != k || self.biases.len() != k {
            return Err(Error::mismatch(
                format!("{k} weight maps and biases"),
                format!("{} / {}", self.weights.len(), self.biases.len()),
            ));
        }
        let size = self.height * self.width * self.channels;
        if size == 0 || (self.channels != 1 && self.channels != 3) {
            return Err(Error::InvalidInput("bad synthetic input shape".into()));
        }
        for w in &self.weights {
            if w.len() != size {
                return Err(Error::mismatch(size, w.len()));
            }
            if w.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("weights must be finite".into()));
            }
        }
        if self.biases.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidInput("biases must be finite".into()));
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::InvalidInput("temperature must be positive".into()));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = self.labels.iter().find(|l| !seen.insert(l.as_str())) {
            return Err(Error::InvalidInput(format!("duplicate label {dup:?}")));
        }
        Ok(())
    }

    pub fn weights(&self, class: usize) -> &[f64] {
        &self.weights[class]
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn with_biases(&self, biases: Vec<f64>) -> Result<Self> {
        let mut m = self.clone();
        m.biases = biases;
        m.validate()?;
        Ok(m)
    }

    pub fn logits(&self, x: &Image) -> Result<Vec<f64>> {
        let shape = (x.height(), x.width(), x.channels());
        if shape != self.input_shape() {
            return Err(Error::mismatch(
                format!("{:?}", self.input_shape()),
                format!("{shape:?}"),
            ));
        }
        Ok(self
            .weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| {
                let dot: f64 = w.iter().zip(x.data()).map(|(w, v)| w * v).sum();
                (dot + b) / self.temperature
            })
            .collect())
    }
}

impl ModelOracle for SyntheticClassifier {
    fn labels(&self) -> &[String] {
        &self.labels
    }

    fn input_shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    fn classify(&self, x: &Image) -> Result<ClassOutput> {
        ClassOutput::from_logits(self.labels.clone(), self.logits(x)?)
    }
}

/// Exact gradient-times-input attribution for a [`SyntheticClassifier`].
///
/// For a compound target the gradient of the log-sum-exp logit is the
/// in-cluster softmax mix of the member weight maps. Channels are summed.
#[derive(Clone, Debug)]
pub struct GradientInput {
    model: SyntheticClassifier,
}

impl GradientInput {
    pub fn new(model: SyntheticClassifier) -> Self {
        GradientInput { model }
    }

    pub fn attribution(&self, x: &Image, target: &[String]) -> Result<SaliencyMap> {
        if target.is_empty() {
            return Err(Error::EmptyLabelSet);
        }
        let logits = self.model.logits(x)?;
        let idx = target
            .iter()
            .map(|l| {
                self.model
                    .labels
                    .iter()
                    .position(|m| m == l)
                    .ok_or_else(|| Error::UnknownLabel(l.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        let zs: Vec<f64> = idx.iter().map(|&i| logits[i]).collect();
        let mix = crate::output::softmax(&zs);
        let ch = self.model.channels;
        let data = (0..self.model.height * self.model.width)
            .map(|p| {
                let mut v = 0.0;
                for (&i, &m) in idx.iter().zip(&mix) {
                    let w = &self.model.weights[i][p * ch..(p + 1) * ch];
                    let px = x.pixel(p);
                    v += m * w.iter().zip(px).map(|(w, x)| w * x).sum::<f64>();
                }
                v / self.model.temperature
            })
            .collect();
        SaliencyMap::new(self.model.height, self.model.width, data)
    }
}

impl BaseExplainer for GradientInput {
    fn name(&self) -> &str {
        "gradient-input"
    }

    fn params(&self) -> serde_json::Value {
        serde_json::json!({})
    }

    fn explain(&self, x: &Image, targets: &[Vec<String>]) -> Result<Vec<SaliencyMap>> {
        targets.iter().map(|t| self.attribution(x, t)).collect()
    }
}
