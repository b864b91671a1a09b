//! Contrastive whole-output explanations for image classifiers.
//!
//! Given a classifier's top-K output, labels are grouped into confusion
//! clusters using a hierarchy learned offline from label co-occurrence. A
//! base explainer (RISE by default) is then queried for compound classes and
//! the maps are contrasted in two stages: cluster against the other
//! clusters, then class against the rest of its own cluster.
//!
//! ```
//! use cwox_core::contrast::{explain, ExplainConfig, Method};
//! use cwox_core::oracle::GradientInput;
//! use cwox_core::scenario::disjoint_evidence;
//!
//! let s = disjoint_evidence();
//! let explainer = GradientInput::new(s.model.clone());
//! let bundle = explain(Method::Cwox2s, &s.model, &explainer, Some(&s.tree), &s.image, &ExplainConfig::default()).unwrap();
//! assert_eq!(bundle.partition.len(), 2);
//! assert_eq!(bundle.class_maps.len(), 4);
//! ```

pub mod contrast;
pub mod cooccur;
pub mod error;
pub mod image;
pub mod metrics;
pub mod oracle;
mod par;
pub mod render;
pub mod rise;
pub mod scenario;
pub mod tree;
pub mod output;

#[cfg(feature = "io")]
pub mod bundle;
#[cfg(feature = "io")]
pub mod io;

pub use contrast::{ExplainConfig, ExplanationBundle, Method};
pub use error::{Error, Result};
pub use image::{Fill, Image, SaliencyMap};
pub use metrics::MetricConfig;
pub use oracle::{BaseExplainer, ModelOracle, SyntheticClassifier};
pub use output::{select_top_k, ClassOutput, TopKSelection};
pub use rise::{Rise, RiseConfig};
pub use tree::{restrict_and_cut, ClusterTree, ConfusionPartition};
