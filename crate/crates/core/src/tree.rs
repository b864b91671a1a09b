//! Leveled label hierarchy and the level-1 cut that turns a top-K selection
//! into confusion clusters.
//!
//! Trees are exchanged as JSON:
//!
//! ```json
//! {"nodes": [{"id": "Z29", "level": 2, "parent": null, "label": null},
//!            {"id": "Z181", "level": 1, "parent": "Z29", "label": null},
//!            {"id": "hare", "level": 0, "parent": "Z181", "label": "hare"}]}
//! ```

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::output::TopKSelection;

#[derive(Debug, Error, PartialEq)]
pub enum TreeError {
    #[error("tree schema violation: {0}")]
    Schema(String),
    #[error("label {0:?} appears on more than one leaf")]
    DuplicateLabel(String),
    #[error("level inversion at node {node:?}: {detail}")]
    LevelInversion { node: String, detail: String },
    #[error("cannot build a tree from empty statistics")]
    Empty,
}

/// One node in the JSON interchange format.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeRecord {
    pub id: String,
    pub level: u32,
    pub parent: Option<String>,
    pub label: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeDocument {
    pub nodes: Vec<NodeRecord>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Node {
    id: String,
    level: u32,
    parent: Option<usize>,
    label: Option<String>,
}

/// Validated hierarchy: one root, leaves at level 0 carrying labels, and
/// levels strictly increasing towards the root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterTree {
    nodes: Vec<Node>,
    leaf_of: HashMap<String, usize>,
}

impl ClusterTree {
    pub fn from_document(doc: &TreeDocument) -> Result<Self, TreeError> {
        if doc.nodes.is_empty() {
            return Err(TreeError::Schema("tree has no nodes".into()));
        }
        let mut index = HashMap::new();
        for (i, n) in doc.nodes.iter().enumerate() {
            if n.id.is_empty() {
                return Err(TreeError::Schema(format!("node {i} has an empty id")));
            }
            if index.insert(n.id.as_str(), i).is_some() {
                return Err(TreeError::Schema(format!("duplicate node id {:?}", n.id)));
            }
        }

        let mut nodes = Vec::with_capacity(doc.nodes.len());
        let mut has_children = vec![false; doc.nodes.len()];
        let mut roots = Vec::new();
        for (i, n) in doc.nodes.iter().enumerate() {
            let parent = match &n.parent {
                None => {
                    roots.push(i);
                    None
                }
                Some(p) => {
                    let &pi = index.get(p.as_str()).ok_or_else(|| {
                        TreeError::Schema(format!("node {:?} has unknown parent {p:?}", n.id))
                    })?;
                    has_children[pi] = true;
                    Some(pi)
                }
            };
            nodes.push(Node {
                id: n.id.clone(),
                level: n.level,
                parent,
                label: n.label.clone(),
            });
        }
        if roots.len() != 1 {
            return Err(TreeError::Schema(format!(
                "expected exactly one root, found {}",
                roots.len()
            )));
        }

        let mut leaf_of = HashMap::new();
        for (i, n) in nodes.iter().enumerate() {
            match &n.label {
                Some(label) => {
                    if n.level != 0 {
                        return Err(TreeError::LevelInversion {
                            node: n.id.clone(),
                            detail: format!("leaf at level {}, leaves must be at level 0", n.level),
                        });
                    }
                    if has_children[i] {
                        return Err(TreeError::Schema(format!(
                            "labelled node {:?} has children",
                            n.id
                        )));
                    }
                    if leaf_of.insert(label.clone(), i).is_some() {
                        return Err(TreeError::DuplicateLabel(label.clone()));
                    }
                }
                None if n.level == 0 => {
                    return Err(TreeError::Schema(format!(
                        "level-0 node {:?} has no label",
                        n.id
                    )));
                }
                None => {}
            }
            if let Some(p) = n.parent {
                if nodes[p].level <= n.level {
                    return Err(TreeError::LevelInversion {
                        node: n.id.clone(),
                        detail: format!(
                            "level {} under parent {:?} at level {}",
                            n.level, nodes[p].id, nodes[p].level
                        ),
                    });
                }
            }
        }

        Ok(ClusterTree { nodes, leaf_of })
    }

    pub fn from_json(text: &str) -> Result<Self, TreeError> {
        let doc: TreeDocument =
            serde_json::from_str(text).map_err(|e| TreeError::Schema(e.to_string()))?;
        Self::from_document(&doc)
    }

    pub fn to_document(&self) -> TreeDocument {
        TreeDocument {
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeRecord {
                    id: n.id.clone(),
                    level: n.level,
                    parent: n.parent.map(|p| self.nodes[p].id.clone()),
                    label: n.label.clone(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("tree serializes")
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().filter_map(|n| n.label.as_deref())
    }

    pub fn contains_label(&self, label: &str) -> bool {
        self.leaf_of.contains_key(label)
    }

    pub fn root_level(&self) -> u32 {
        self.nodes
            .iter()
            .find(|n| n.parent.is_none())
            .map(|n| n.level)
            .unwrap_or(0)
    }

    /// Nearest ancestor of `label`'s leaf whose level is at least 1.
    fn group_of(&self, label: &str) -> Option<usize> {
        let mut cur = *self.leaf_of.get(label)?;
        while let Some(p) = self.nodes[cur].parent {
            if self.nodes[p].level >= 1 {
                return Some(p);
            }
            cur = p;
        }
        None
    }

    /// Label groups induced by the level-1 cut over the whole vocabulary,
    /// each sorted, groups sorted by first label. Independent of node ids.
    pub fn level1_groups(&self) -> Vec<Vec<String>> {
        let mut groups: HashMap<Option<usize>, Vec<String>> = HashMap::new();
        for label in self.leaf_of.keys() {
            groups
                .entry(self.group_of(label))
                .or_default()
                .push(label.clone());
        }
        let mut out: Vec<Vec<String>> = groups
            .into_iter()
            .flat_map(|(g, mut members)| {
                members.sort();
                match g {
                    Some(_) => vec![members],
                    None => members.into_iter().map(|m| vec![m]).collect(),
                }
            })
            .collect();
        out.sort();
        out
    }

    /// Structural fingerprint: for every internal node, its level and the
    /// sorted labels beneath it. Equal fingerprints mean equal trees up to
    /// node-id renaming.
    pub fn shape(&self) -> Vec<(u32, Vec<String>)> {
        let mut below: Vec<Vec<String>> = vec![Vec::new(); self.nodes.len()];
        for n in &self.nodes {
            if let Some(label) = &n.label {
                let mut cur = n.parent;
                while let Some(p) = cur {
                    below[p].push(label.clone());
                    cur = self.nodes[p].parent;
                }
            }
        }
        let mut out: Vec<(u32, Vec<String>)> = self
            .nodes
            .iter()
            .zip(below)
            .filter(|(n, _)| n.label.is_none())
            .map(|(n, mut labels)| {
                labels.sort();
                (n.level, labels)
            })
            .collect();
        out.sort();
        out
    }
}

/// Top-K labels split into disjoint confusion clusters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConfusionPartition {
    clusters: Vec<Vec<String>>,
}

impl ConfusionPartition {
    /// Validates disjointness and non-emptiness.
    pub fn new(clusters: Vec<Vec<String>>) -> Result<Self, TreeError> {
        if clusters.is_empty() {
            return Err(TreeError::Schema("partition has no clusters".into()));
        }
        let mut seen = HashSet::new();
        for c in &clusters {
            if c.is_empty() {
                return Err(TreeError::Schema("empty confusion cluster".into()));
            }
            for l in c {
                if !seen.insert(l.as_str()) {
                    return Err(TreeError::DuplicateLabel(l.clone()));
                }
            }
        }
        Ok(ConfusionPartition { clusters })
    }

    /// Every label in one cluster.
    pub fn single(labels: &[String]) -> Self {
        ConfusionPartition {
            clusters: vec![labels.to_vec()],
        }
    }

    pub fn clusters(&self) -> &[Vec<String>] {
        &self.clusters
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = &String> {
        self.clusters.iter().flatten()
    }

    pub fn cluster_of(&self, label: &str) -> Option<usize> {
        self.clusters
            .iter()
            .position(|c| c.iter().any(|l| l == label))
    }
}

/// Restrict `tree` to the selected labels and cut at level 1.
///
/// Clusters come out in order of their most probable member; members keep
/// top-K order. Labels missing from the tree become singleton clusters.
pub fn restrict_and_cut(tree: &ClusterTree, top: &TopKSelection) -> ConfusionPartition {
    let mut clusters: Vec<Vec<String>> = Vec::new();
    let mut slot: HashMap<usize, usize> = HashMap::new();
    for label in top.labels() {
        match tree.group_of(label) {
            Some(g) => {
                let i = *slot.entry(g).or_insert_with(|| {
                    clusters.push(Vec::new());
                    clusters.len() - 1
                });
                clusters[i].push(label.clone());
            }
            None => clusters.push(vec![label.clone()]),
        }
    }
    ConfusionPartition { clusters }
}
