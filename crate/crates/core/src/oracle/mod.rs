//! Classifier access. Everything downstream talks to a [`ModelOracle`]; the
//! synthetic linear-softmax model backs tests and demos, the remote client
//! speaks the JSON model-server protocol.

use thiserror::Error;

use crate::error::Result;
use crate::image::{Image, SaliencyMap};
use crate::output::ClassOutput;

#[cfg(feature = "remote")]
mod remote;
mod synthetic;

#[cfg(feature = "remote")]
pub use remote::{RemoteExplainer, RemoteOracle, ServerMeta};
pub use synthetic::{GradientInput, SyntheticClassifier};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("network failure talking to {url}: {message}")]
    Network { url: String, message: String },
    #[error("server returned HTTP {status}: {payload}")]
    Status { status: u16, payload: String },
    #[error("malformed server response ({reason}): {payload}")]
    Malformed { reason: String, payload: String },
    #[error("server response violates output invariants ({reason}): {payload}")]
    Invariant { reason: String, payload: String },
}

/// Black-box classifier. Implementations are deterministic for a fixed model
/// and safe to call from several threads at once.
pub trait ModelOracle: Send + Sync {
    fn labels(&self) -> &[String];

    /// `(height, width, channels)` the model expects.
    fn input_shape(&self) -> (usize, usize, usize);

    fn classify(&self, x: &Image) -> Result<ClassOutput>;
}

impl<T: ModelOracle + ?Sized> ModelOracle for &T {
    fn labels(&self) -> &[String] {
        (**self).labels()
    }

    fn input_shape(&self) -> (usize, usize, usize) {
        (**self).input_shape()
    }

    fn classify(&self, x: &Image) -> Result<ClassOutput> {
        (**self).classify(x)
    }
}

impl<T: ModelOracle + ?Sized> ModelOracle for Box<T> {
    fn labels(&self) -> &[String] {
        (**self).labels()
    }

    fn input_shape(&self) -> (usize, usize, usize) {
        (**self).input_shape()
    }

    fn classify(&self, x: &Image) -> Result<ClassOutput> {
        (**self).classify(x)
    }
}

/// Individual-output explainer producing one saliency map per target label
/// set. Multi-label targets are compound classes.
pub trait BaseExplainer: Send + Sync {
    fn name(&self) -> &str;

    /// Settings recorded in bundle provenance.
    fn params(&self) -> serde_json::Value;

    fn explain(&self, x: &Image, targets: &[Vec<String>]) -> Result<Vec<SaliencyMap>>;
}
