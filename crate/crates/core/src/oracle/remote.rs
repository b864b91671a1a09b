use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::image::{Image, SaliencyMap};
use crate::io::encode_png;
use crate::output::ClassOutput;

use super::{BaseExplainer, ModelOracle, OracleError};

/// Softmax consistency tolerance for float32 server outputs.
pub const REMOTE_TOLERANCE: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ServerMeta {
    pub labels: Vec<String>,
    pub input_height: usize,
    pub input_width: usize,
    pub channels: usize,
}

#[derive(Deserialize)]
struct ClassifyResponse {
    probabilities: Option<Vec<f64>>,
    logits: Option<Vec<f64>>,
}

#[derive(Deserialize)]
struct WireMap {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

#[derive(Deserialize)]
struct SaliencyResponse {
    maps: Vec<WireMap>,
}

/// Client for a model server exposing `/meta`, `/classify` and `/saliency`.
#[derive(Clone, Debug)]
pub struct RemoteOracle {
    base: String,
    agent: ureq::Agent,
    meta: ServerMeta,
}

impl RemoteOracle {
    /// Connect and fetch `/meta`.
    pub fn connect(endpoint: &str) -> Result<Self> {
        let base = endpoint.trim_end_matches('/').to_string();
        let agent = ureq::AgentBuilder::new()
            .timeout_connect(Duration::from_secs(10))
            .timeout(Duration::from_secs(300))
            .build();
        let url = format!("{base}/meta");
        let payload = read_body(&url, agent.get(&url).call())?;
        let meta: ServerMeta = serde_json::from_str(&payload).map_err(|e| OracleError::Malformed {
            reason: e.to_string(),
            payload: payload.clone(),
        })?;
        if meta.labels.is_empty() {
            return Err(OracleError::Malformed {
                reason: "empty label vocabulary".into(),
                payload,
            }
            .into());
        }
        Ok(RemoteOracle { base, agent, meta })
    }

    pub fn meta(&self) -> &ServerMeta {
        &self.meta
    }

    pub fn endpoint(&self) -> &str {
        &self.base
    }

    fn post(&self, path: &str, body: Value) -> Result<String> {
        let url = format!("{}{path}", self.base);
        read_body(&url, self.agent.post(&url).send_json(body))
    }

    fn image_b64(x: &Image) -> Result<String> {
        Ok(base64::engine::general_purpose::STANDARD.encode(encode_png(x)?))
    }

    pub fn classify_remote(&self, x: &Image) -> Result<ClassOutput> {
        let payload = self.post("/classify", json!({ "image_png_b64": Self::image_b64(x)? }))?;
        let malformed = |reason: &str| OracleError::Malformed {
            reason: reason.to_string(),
            payload: payload.clone(),
        };
        let resp: ClassifyResponse =
            serde_json::from_str(&payload).map_err(|e| malformed(&e.to_string()))?;
        let probabilities = resp.probabilities.ok_or_else(|| malformed("missing probabilities"))?;
        // Logits are never reconstructed from probabilities.
        let logits = resp.logits.ok_or_else(|| malformed("missing logits"))?;
        let k = self.meta.labels.len();
        if probabilities.len() != k || logits.len() != k {
            return Err(malformed(&format!(
                "expected {k} probabilities and logits, got {} / {}",
                probabilities.len(),
                logits.len()
            ))
            .into());
        }
        ClassOutput::with_tolerance(self.meta.labels.clone(), probabilities, logits, REMOTE_TOLERANCE)
            .map_err(|e| {
                OracleError::Invariant {
                    reason: e.to_string(),
                    payload: payload.clone(),
                }
                .into()
            })
    }

    pub fn saliency_remote(
        &self,
        x: &Image,
        targets: &[Vec<String>],
        explainer: &str,
        params: &Value,
    ) -> Result<Vec<SaliencyMap>> {
        for t in targets {
            if t.is_empty() {
                return Err(Error::EmptyLabelSet);
            }
            if let Some(l) = t.iter().find(|l| !self.meta.labels.contains(l)) {
                return Err(Error::UnknownLabel(l.clone()));
            }
        }
        let payload = self.post(
            "/saliency",
            json!({
                "image_png_b64": Self::image_b64(x)?,
                "targets": targets,
                "explainer": explainer,
                "params": params,
            }),
        )?;
        let malformed = |reason: String| OracleError::Malformed {
            reason,
            payload: payload.clone(),
        };
        let resp: SaliencyResponse =
            serde_json::from_str(&payload).map_err(|e| malformed(e.to_string()))?;
        if resp.maps.len() != targets.len() {
            return Err(malformed(format!(
                "expected {} maps, got {}",
                targets.len(),
                resp.maps.len()
            ))
            .into());
        }
        resp.maps
            .into_iter()
            .map(|m| {
                SaliencyMap::new(m.height, m.width, m.data).map_err(|e| {
                    OracleError::Invariant {
                        reason: e.to_string(),
                        payload: payload.clone(),
                    }
                    .into()
                })
            })
            .collect()
    }
}

fn read_body(url: &str, result: std::result::Result<ureq::Response, ureq::Error>) -> Result<String> {
    match result {
        Ok(resp) => resp.into_string().map_err(|e| {
            OracleError::Network {
                url: url.to_string(),
                message: e.to_string(),
            }
            .into()
        }),
        Err(ureq::Error::Status(status, resp)) => Err(OracleError::Status {
            status,
            payload: resp.into_string().unwrap_or_default(),
        }
        .into()),
        Err(ureq::Error::Transport(t)) => Err(OracleError::Network {
            url: url.to_string(),
            message: t.to_string(),
        }
        .into()),
    }
}

impl ModelOracle for RemoteOracle {
    fn labels(&self) -> &[String] {
        &self.meta.labels
    }

    fn input_shape(&self) -> (usize, usize, usize) {
        (self.meta.input_height, self.meta.input_width, self.meta.channels)
    }

    fn classify(&self, x: &Image) -> Result<ClassOutput> {
        self.classify_remote(x)
    }
}

/// Server-side base explainer (e.g. Grad-CAM) reached through `/saliency`.
#[derive(Clone, Debug)]
pub struct RemoteExplainer {
    oracle: RemoteOracle,
    explainer: String,
    params: Value,
}

impl RemoteExplainer {
    pub fn new(oracle: RemoteOracle, explainer: impl Into<String>, params: Value) -> Self {
        RemoteExplainer {
            oracle,
            explainer: explainer.into(),
            params,
        }
    }
}

impl BaseExplainer for RemoteExplainer {
    fn name(&self) -> &str {
        &self.explainer
    }

    fn params(&self) -> Value {
        json!({ "endpoint": self.oracle.endpoint(), "params": self.params })
    }

    fn explain(&self, x: &Image, targets: &[Vec<String>]) -> Result<Vec<SaliencyMap>> {
        self.oracle
            .saliency_remote(x, targets, &self.explainer, &self.params)
    }
}
