//! Constructed models and corpora with known answers: planted co-occurrence
//! blocks for clustering, and linear classifiers whose evidence regions are
//! laid out by hand.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cooccur::Document;
use crate::error::Result;
use crate::image::Image;
use crate::oracle::SyntheticClassifier;
use crate::tree::{ClusterTree, NodeRecord, TreeDocument};

/// Documents from a block model. Each document picks a block uniformly, then
/// a primary label inside it; other labels of the block join with
/// probability `within`, labels of other blocks with probability `cross`.
pub fn planted_block_documents(
    blocks: &[&[&str]],
    num_docs: usize,
    within: f64,
    cross: f64,
    seed: u64,
) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..num_docs)
        .map(|i| {
            let b = rng.random_range(0..blocks.len());
            let primary = rng.random_range(0..blocks[b].len());
            let mut labels = Vec::new();
            for (j, block) in blocks.iter().enumerate() {
                for (k, label) in block.iter().enumerate() {
                    let keep = if j == b && k == primary {
                        true
                    } else if j == b {
                        rng.random_bool(within)
                    } else {
                        rng.random_bool(cross)
                    };
                    if keep {
                        labels.push(label.to_string());
                    }
                }
            }
            Document::new(format!("doc{i:05}"), labels).expect("primary label is always present")
        })
        .collect()
}

/// Axis-aligned pixel rectangle, half-open.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rect {
    pub rows: (usize, usize),
    pub cols: (usize, usize),
}

impl Rect {
    pub const fn new(r0: usize, r1: usize, c0: usize, c1: usize) -> Self {
        Rect {
            rows: (r0, r1),
            cols: (c0, c1),
        }
    }

    pub fn pixels(&self, width: usize) -> Vec<usize> {
        (self.rows.0..self.rows.1)
            .flat_map(|r| (self.cols.0..self.cols.1).map(move |c| r * width + c))
            .collect()
    }
}

/// Two-class gray model on a `size x size` grid: class `left` has weight 1
/// on the left half, class `right` on the right half.
pub fn halves_model(size: usize, temperature: f64) -> SyntheticClassifier {
    let half = |left: bool| -> Vec<f64> {
        (0..size * size)
            .map(|p| if ((p % size) < size / 2) == left { 1.0 } else { 0.0 })
            .collect()
    };
    SyntheticClassifier::new(
        vec!["left".into(), "right".into()],
        (size, size, 1),
        vec![half(true), half(false)],
        vec![0.0, 0.0],
        temperature,
    )
    .expect("valid halves model")
}

/// Four classes in two confusion clusters, `{a, b}` and `{c, d}`. Members of
/// a cluster share a large region carrying weight `shared`; each class also
/// owns a small region of its own carrying weight `own`. The input is bright
/// on every region over a dark background, so all four classes tie.
#[derive(Clone, Debug)]
pub struct DisjointEvidence {
    pub model: SyntheticClassifier,
    pub image: Image,
    pub tree: ClusterTree,
    /// Pixels only the given class responds to.
    pub own_pixels: BTreeMap<String, Vec<usize>>,
    /// Pixels shared by the members of each cluster.
    pub shared_pixels: Vec<Vec<usize>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DisjointEvidenceParams {
    pub size: usize,
    pub shared: f64,
    pub own: f64,
    pub background: f64,
}

impl Default for DisjointEvidenceParams {
    fn default() -> Self {
        DisjointEvidenceParams {
            size: 32,
            shared: 0.06,
            own: 0.05,
            background: 0.0,
        }
    }
}

pub const CLUSTERS: [[&str; 2]; 2] = [["a", "b"], ["c", "d"]];

pub fn disjoint_evidence() -> DisjointEvidence {
    disjoint_evidence_with(DisjointEvidenceParams::default()).expect("default layout is valid")
}

pub fn disjoint_evidence_with(p: DisjointEvidenceParams) -> Result<DisjointEvidence> {
    let n = p.size;
    let q = n / 16;
    let shared_rects = [
        Rect::new(q, 7 * q, q, 7 * q),
        Rect::new(9 * q, 15 * q, 9 * q, 15 * q),
    ];
    let own_rects = [
        [Rect::new(q, 4 * q, 9 * q, 12 * q), Rect::new(5 * q, 8 * q, 12 * q, 15 * q)],
        [Rect::new(9 * q, 12 * q, q, 4 * q), Rect::new(12 * q, 15 * q, 4 * q, 7 * q)],
    ];

    let mut labels = Vec::new();
    let mut weights = Vec::new();
    let mut own_pixels = BTreeMap::new();
    let mut shared_pixels = Vec::new();
    let mut bright = vec![p.background; n * n];
    for (ci, cluster) in CLUSTERS.iter().enumerate() {
        let shared = shared_rects[ci].pixels(n);
        for &px in &shared {
            bright[px] = 1.0;
        }
        for (k, label) in cluster.iter().enumerate() {
            let own = own_rects[ci][k].pixels(n);
            let mut w = vec![0.0; n * n];
            for &px in &shared {
                w[px] = p.shared;
            }
            for &px in &own {
                w[px] = p.own;
                bright[px] = 1.0;
            }
            labels.push(label.to_string());
            weights.push(w);
            own_pixels.insert(label.to_string(), own);
        }
        shared_pixels.push(shared);
    }
    let model = SyntheticClassifier::new(labels, (n, n, 1), weights, vec![0.0; 4], 1.0)?;
    let image = Image::new(n, n, 1, bright)?;
    Ok(DisjointEvidence {
        model,
        image,
        tree: two_cluster_tree(),
        own_pixels,
        shared_pixels,
    })
}

/// `{{a, b}, {c, d}}` with a level-2 root.
pub fn two_cluster_tree() -> ClusterTree {
    let node = |id: &str, level, parent: Option<&str>, label: Option<&str>| NodeRecord {
        id: id.into(),
        level,
        parent: parent.map(Into::into),
        label: label.map(Into::into),
    };
    let doc = TreeDocument {
        nodes: vec![
            node("Z3", 2, None, None),
            node("Z1", 1, Some("Z3"), None),
            node("a", 0, Some("Z1"), Some("a")),
            node("b", 0, Some("Z1"), Some("b")),
            node("Z2", 1, Some("Z3"), None),
            node("c", 0, Some("Z2"), Some("c")),
            node("d", 0, Some("Z2"), Some("d")),
        ],
    };
    ClusterTree::from_document(&doc).expect("valid two-cluster tree")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::ModelOracle;

    #[test]
    fn all_four_classes_tie() {
        let s = disjoint_evidence();
        let out = s.model.classify(&s.image).unwrap();
        for p in out.probabilities() {
            assert!((p - 0.25).abs() < 1e-12);
        }
        assert_eq!(s.tree.level1_groups(), vec![vec!["a", "b"], vec!["c", "d"]]);
    }

    #[test]
    fn evidence_regions_do_not_overlap() {
        let s = disjoint_evidence();
        let mut seen = std::collections::HashSet::new();
        for px in s.own_pixels.values().chain(&s.shared_pixels).flatten() {
            assert!(seen.insert(*px));
        }
    }

    #[test]
    fn planted_documents_respect_blocks() {
        let docs = planted_block_documents(&[&["a", "b"], &["c"]], 500, 1.0, 0.0, 9);
        for d in &docs {
            let has = |l: &str| d.labels.iter().any(|x| x == l);
            assert_eq!(has("a"), has("b"));
            assert!(has("c") != has("a"));
        }
    }
}
