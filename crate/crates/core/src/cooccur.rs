//! Offline phase: label documents from classifier outputs, co-occurrence
//! statistics, and an NPMI average-linkage tree over the label vocabulary.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::oracle::ModelOracle;
use crate::output::select_top_k;
use crate::par::map_indexed;
use crate::tree::{ClusterTree, NodeRecord, TreeDocument, TreeError};

/// Pseudo-count added to every count before estimating probabilities.
pub const NPMI_SMOOTHING: f64 = 0.5;

/// Default level-1 merge threshold on average NPMI.
pub const DEFAULT_THETA: f64 = 0.2;

/// Top labels of one classifier output, treated as a short document.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub image: String,
    pub labels: Vec<String>,
}

impl Document {
    pub fn new(image: impl Into<String>, labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidInput("document has no labels".into()));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = labels.iter().find(|l| !seen.insert(l.as_str())) {
            return Err(Error::InvalidInput(format!("duplicate label {dup:?} in document")));
        }
        Ok(Document {
            image: image.into(),
            labels,
        })
    }

    pub fn from_jsonl_line(line: &str) -> Result<Self> {
        let raw: Document = serde_json::from_str(line)?;
        Document::new(raw.image, raw.labels)
    }

    pub fn to_jsonl_line(&self) -> String {
        serde_json::to_string(self).expect("document serializes")
    }
}

/// Per-image failure during document extraction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractFailure {
    pub image: String,
    pub error: String,
}

/// Classify every image and keep its top-K labels. Failures are recorded per
/// image and do not stop the run; output order follows `images`.
pub fn extract_documents<O, F>(
    oracle: &O,
    images: &[String],
    load: F,
    k_cap: usize,
    mass: f64,
) -> Result<Vec<std::result::Result<Document, ExtractFailure>>>
where
    O: ModelOracle + ?Sized,
    F: Fn(&str) -> Result<Image> + Sync + Send,
{
    if images.is_empty() {
        return Err(Error::InvalidInput("image source is empty".into()));
    }
    Ok(map_indexed(images.len(), |i| {
        let id = &images[i];
        let fail = |e: Error| ExtractFailure {
            image: id.clone(),
            error: e.to_string(),
        };
        let x = load(id).map_err(fail)?;
        let out = oracle.classify(&x).map_err(fail)?;
        let top = select_top_k(&out, k_cap, mass);
        Document::new(id.clone(), top.labels().to_vec()).map_err(fail)
    }))
}

/// Document, label and label-pair counts. Merging two tables is associative
/// and commutative, so any split of the corpus gives the same totals.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CooccurrenceStats {
    num_docs: u64,
    counts: BTreeMap<String, u64>,
    joint: BTreeMap<(String, String), u64>,
}

impl CooccurrenceStats {
    pub fn add(&mut self, labels: &[String]) {
        let set: BTreeSet<&String> = labels.iter().collect();
        self.num_docs += 1;
        for l in &set {
            *self.counts.entry((*l).clone()).or_default() += 1;
        }
        let items: Vec<&String> = set.into_iter().collect();
        for (i, a) in items.iter().enumerate() {
            for b in &items[i + 1..] {
                *self.joint.entry(((*a).clone(), (*b).clone())).or_default() += 1;
            }
        }
    }

    pub fn merge(mut self, other: CooccurrenceStats) -> CooccurrenceStats {
        self.num_docs += other.num_docs;
        for (k, v) in other.counts {
            *self.counts.entry(k).or_default() += v;
        }
        for (k, v) in other.joint {
            *self.joint.entry(k).or_default() += v;
        }
        self
    }

    pub fn from_documents<'a>(docs: impl IntoIterator<Item = &'a Document>) -> Self {
        let mut stats = CooccurrenceStats::default();
        for d in docs {
            stats.add(&d.labels);
        }
        stats
    }

    #[cfg(feature = "parallel")]
    pub fn from_documents_par(docs: &[Document]) -> Self {
        use rayon::prelude::*;
        docs.par_chunks(1024)
            .map(CooccurrenceStats::from_documents)
            .reduce(CooccurrenceStats::default, CooccurrenceStats::merge)
    }

    pub fn num_docs(&self) -> u64 {
        self.num_docs
    }

    /// Vocabulary in sorted order.
    pub fn labels(&self) -> Vec<String> {
        self.counts.keys().cloned().collect()
    }

    pub fn count(&self, label: &str) -> u64 {
        self.counts.get(label).copied().unwrap_or(0)
    }

    pub fn joint_count(&self, u: &str, v: &str) -> u64 {
        let key = if u <= v {
            (u.to_string(), v.to_string())
        } else {
            (v.to_string(), u.to_string())
        };
        self.joint.get(&key).copied().unwrap_or(0)
    }

    /// Normalized PMI with every count smoothed by [`NPMI_SMOOTHING`]:
    /// `p_x = (n_x + eps) / (N + 2 eps)`,
    /// `npmi = ln(p_uv / (p_u p_v)) / -ln p_uv`. Lies in `[-1, 1]`.
    pub fn npmi(&self, u: &str, v: &str) -> f64 {
        npmi_from_counts(
            self.joint_count(u, v),
            self.count(u),
            self.count(v),
            self.num_docs,
            NPMI_SMOOTHING,
        )
    }
}

pub fn npmi_from_counts(n_uv: u64, n_u: u64, n_v: u64, n: u64, eps: f64) -> f64 {
    let denom = n as f64 + 2.0 * eps;
    let p_uv = (n_uv as f64 + eps) / denom;
    let p_u = (n_u as f64 + eps) / denom;
    let p_v = (n_v as f64 + eps) / denom;
    let pmi = (p_uv / (p_u * p_v)).ln();
    (pmi / -p_uv.ln()).clamp(-1.0, 1.0)
}

struct Group {
    /// Label indices, ascending; `members[0]` orders groups.
    members: Vec<usize>,
    node: usize,
    level: u32,
}

/// Average-linkage agglomeration on NPMI similarity.
///
/// Merges while the best average similarity is at least `theta`; each group
/// standing at that point becomes a level-1 node (singletons included). The
/// remaining merges stack level-2+ nodes up to a single root. Ties go to the
/// lexicographically smallest pair of group leaders.
pub fn build_tree(stats: &CooccurrenceStats, theta: f64) -> std::result::Result<ClusterTree, TreeError> {
    let labels = stats.labels();
    let n = labels.len();
    if n == 0 {
        return Err(TreeError::Empty);
    }
    let mut sim = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let s = stats.npmi(&labels[i], &labels[j]);
            sim[i * n + j] = s;
            sim[j * n + i] = s;
        }
    }

    // Internal nodes as (level, children-by-node-index); leaves are 0..n.
    let mut internal: Vec<(u32, Vec<usize>)> = Vec::new();
    let mut groups: Vec<Group> = (0..n)
        .map(|i| Group {
            members: vec![i],
            node: i,
            level: 0,
        })
        .collect();
    // Pairwise similarity sums between groups, indexed like `groups`.
    let mut sums: Vec<Vec<f64>> = (0..n).map(|i| sim[i * n..(i + 1) * n].to_vec()).collect();

    let best_pair = |groups: &[Group], sums: &[Vec<f64>]| -> Option<(usize, usize, f64)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for a in 0..groups.len() {
            for b in a + 1..groups.len() {
                let avg = sums[a][b] / (groups[a].members.len() * groups[b].members.len()) as f64;
                if best.is_none_or(|(_, _, s)| avg > s) {
                    best = Some((a, b, avg));
                }
            }
        }
        best
    };

    let merge = |groups: &mut Vec<Group>, sums: &mut Vec<Vec<f64>>, a: usize, b: usize| {
        let gb = groups.remove(b);
        let row_b = sums.remove(b);
        for row in sums.iter_mut() {
            let vb = row.remove(b);
            row[a] += vb;
        }
        for (k, v) in row_b.into_iter().enumerate() {
            let k = if k > b { k - 1 } else if k == b { continue } else { k };
            sums[a][k] += v;
        }
        let ga = &mut groups[a];
        ga.members.extend(gb.members);
        ga.members.sort_unstable();
        gb.node
    };

    // Level-1 groups.
    while let Some((a, b, s)) = best_pair(&groups, &sums) {
        if s < theta {
            break;
        }
        merge(&mut groups, &mut sums, a, b);
    }
    for g in groups.iter_mut() {
        internal.push((1, g.members.clone()));
        g.node = n + internal.len() - 1;
        g.level = 1;
    }

    // Upper levels.
    if groups.len() == 1 {
        internal.push((2, vec![groups[0].node]));
    }
    while let Some((a, b, _)) = best_pair(&groups, &sums) {
        let (node_a, level_a) = (groups[a].node, groups[a].level);
        let level_b = groups[b].level;
        let node_b = merge(&mut groups, &mut sums, a, b);
        let level = level_a.max(level_b) + 1;
        internal.push((level, vec![node_a, node_b]));
        groups[a].node = n + internal.len() - 1;
        groups[a].level = level;
    }

    ClusterTree::from_document(&assemble(&labels, &internal))
}

/// Lay out nodes root-first in depth-first order, children ordered by their
/// smallest label. Internal ids are `Z<k>`, skipping any that clash with a
/// label.
fn assemble(labels: &[String], internal: &[(u32, Vec<usize>)]) -> TreeDocument {
    let n = labels.len();
    let taken: HashSet<&str> = labels.iter().map(String::as_str).collect();
    let mut next = 1usize;
    let mut fresh_id = || loop {
        let id = format!("Z{next}");
        next += 1;
        if !taken.contains(id.as_str()) {
            return id;
        }
    };

    let min_label = |node: usize| -> usize {
        let mut stack = vec![node];
        let mut best = usize::MAX;
        while let Some(x) = stack.pop() {
            if x < n {
                best = best.min(x);
            } else {
                stack.extend(internal[x - n].1.iter().copied());
            }
        }
        best
    };

    let root = n + internal.len() - 1;
    let mut nodes = Vec::new();
    let mut stack: Vec<(usize, Option<String>)> = vec![(root, None)];
    while let Some((x, parent)) = stack.pop() {
        if x < n {
            nodes.push(NodeRecord {
                id: labels[x].clone(),
                level: 0,
                parent,
                label: Some(labels[x].clone()),
            });
            continue;
        }
        let id = fresh_id();
        let (level, children) = &internal[x - n];
        nodes.push(NodeRecord {
            id: id.clone(),
            level: *level,
            parent,
            label: None,
        });
        let mut kids = children.clone();
        kids.sort_by_key(|&c| min_label(c));
        for c in kids.into_iter().rev() {
            stack.push((c, Some(id.clone())));
        }
    }
    TreeDocument { nodes }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::planted_block_documents;

    fn doc(labels: &[&str]) -> Document {
        Document::new("x", labels.iter().map(|s| s.to_string()).collect()).unwrap()
    }

    fn stats(docs: &[&[&str]]) -> CooccurrenceStats {
        let docs: Vec<Document> = docs.iter().map(|d| doc(d)).collect();
        CooccurrenceStats::from_documents(&docs)
    }

    #[test]
    fn document_validation_and_jsonl() {
        assert!(Document::new("x", vec![]).is_err());
        assert!(Document::new("x", vec!["a".into(), "a".into()]).is_err());
        let d = Document::from_jsonl_line(r#"{"image": "img1", "labels": ["cello", "violin"]}"#).unwrap();
        assert_eq!(d.labels, vec!["cello", "violin"]);
        assert_eq!(d.to_jsonl_line(), r#"{"image":"img1","labels":["cello","violin"]}"#);
        assert!(Document::from_jsonl_line(r#"{"image": "i", "labels": []}"#).is_err());
    }

    #[test]
    fn perfect_cooccurrence_has_npmi_one() {
        let s = stats(&[&["a", "b"], &["a", "b"]]);
        assert!((s.npmi("a", "b") - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_labels_have_nonpositive_npmi() {
        let s = stats(&[&["a"], &["b"]]);
        assert!(s.npmi("a", "b") <= 0.0);
    }

    #[test]
    fn planted_counts_match_direct_counting() {
        // 1000 docs: {a,b} together in 400, {a,c} together in 10.
        let mut docs = Vec::new();
        for i in 0..1000 {
            let labels: Vec<&str> = match i {
                0..400 => vec!["a", "b"],
                400..410 => vec!["a", "c"],
                410..700 => vec!["c"],
                700..800 => vec!["a"],
                _ => vec!["b"],
            };
            docs.push(doc(&labels));
        }
        let s = CooccurrenceStats::from_documents(&docs);
        assert_eq!(s.num_docs(), 1000);
        assert_eq!(s.count("a"), 510);
        assert_eq!(s.count("b"), 600);
        assert_eq!(s.count("c"), 300);
        assert_eq!(s.joint_count("a", "b"), 400);
        assert_eq!(s.joint_count("c", "a"), 10);

        let by_hand = |nuv: f64, nu: f64, nv: f64| {
            let d = 1000.0 + 1.0;
            let (puv, pu, pv) = ((nuv + 0.5) / d, (nu + 0.5) / d, (nv + 0.5) / d);
            (puv / (pu * pv)).ln() / -puv.ln()
        };
        assert!((s.npmi("a", "b") - by_hand(400.0, 510.0, 600.0)).abs() < 1e-12);
        assert!((s.npmi("a", "c") - by_hand(10.0, 510.0, 300.0)).abs() < 1e-12);
        assert!(s.npmi("a", "b") > s.npmi("a", "c"));
    }

    #[test]
    fn merge_matches_single_pass() {
        let docs = planted_block_documents(&[&["a", "b"], &["c"]], 200, 0.8, 0.05, 1);
        let whole = CooccurrenceStats::from_documents(&docs);
        let (left, right) = docs.split_at(77);
        let merged = CooccurrenceStats::from_documents(right).merge(CooccurrenceStats::from_documents(left));
        assert_eq!(whole, merged);
        #[cfg(feature = "parallel")]
        assert_eq!(whole, CooccurrenceStats::from_documents_par(&docs));
    }

    #[test]
    fn two_label_trees() {
        let together = stats(&[&["a", "b"], &["a", "b"], &["c"]]);
        assert!(together.npmi("a", "b") > 0.3);
        let t = build_tree(&together, 0.3).unwrap();
        assert!(t.level1_groups().contains(&vec!["a".to_string(), "b".to_string()]));

        let mut apart = CooccurrenceStats::default();
        for _ in 0..5 {
            apart.add(&["a".to_string()]);
            apart.add(&["b".to_string()]);
        }
        apart.add(&["a".to_string(), "b".to_string()]);
        assert!(apart.npmi("a", "b") < 0.3);
        let t = build_tree(&apart, 0.3).unwrap();
        assert_eq!(t.level1_groups(), vec![vec!["a".to_string()], vec!["b".to_string()]]);
        assert_eq!(t.root_level(), 2);
    }

    #[test]
    fn single_group_sits_under_separate_root() {
        let t = build_tree(&stats(&[&["a", "b"]]), 0.3).unwrap();
        let doc = t.to_document();
        assert_eq!(doc.nodes.len(), 4);
        assert_eq!(doc.nodes[0].level, 2);
        assert_eq!(doc.nodes[1].level, 1);
    }

    #[test]
    fn theta_extremes() {
        let docs = planted_block_documents(&[&["a", "b"], &["c", "d", "e"], &["f"]], 300, 0.8, 0.05, 9);
        let s = CooccurrenceStats::from_documents(&docs);
        let all_single = build_tree(&s, 1.1).unwrap();
        assert_eq!(all_single.level1_groups().len(), 6);
        let one = build_tree(&s, -1.0).unwrap();
        assert_eq!(one.level1_groups().len(), 1);
    }

    #[test]
    fn recovers_planted_blocks() {
        let blocks: &[&[&str]] = &[&["a", "b"], &["c", "d", "e"], &["f"]];
        let docs = planted_block_documents(blocks, 1000, 0.8, 0.05, 3);
        let t = build_tree(&CooccurrenceStats::from_documents(&docs), DEFAULT_THETA).unwrap();
        let want: Vec<Vec<String>> = blocks
            .iter()
            .map(|b| b.iter().map(|s| s.to_string()).collect())
            .collect();
        assert_eq!(t.level1_groups(), want);
    }

    #[test]
    fn empty_stats_rejected() {
        assert_eq!(
            build_tree(&CooccurrenceStats::default(), 0.2).unwrap_err(),
            TreeError::Empty
        );
    }

    #[test]
    fn export_import_preserves_shape() {
        let docs = planted_block_documents(&[&["a", "b"], &["c", "d", "e"], &["f"]], 300, 0.8, 0.05, 4);
        let t = build_tree(&CooccurrenceStats::from_documents(&docs), 0.2).unwrap();
        let back = ClusterTree::from_json(&t.to_json()).unwrap();
        assert_eq!(back.shape(), t.shape());
        assert_eq!(back, t);
    }

    #[test]
    fn internal_ids_avoid_label_names() {
        let t = build_tree(&stats(&[&["Z1", "Z2"], &["Z1", "Z2"]]), 0.2).unwrap();
        assert_eq!(t.len(), 4);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn npmi_symmetric_and_bounded(docs in prop::collection::vec(prop::collection::btree_set(0usize..5, 1..4), 1..40)) {
                let names = ["a", "b", "c", "d", "e"];
                let docs: Vec<Document> = docs.iter()
                    .map(|d| doc(&d.iter().map(|&i| names[i]).collect::<Vec<_>>()))
                    .collect();
                let s = CooccurrenceStats::from_documents(&docs);
                for u in names {
                    for v in names {
                        if u == v { continue; }
                        let x = s.npmi(u, v);
                        prop_assert_eq!(x, s.npmi(v, u));
                        prop_assert!((-1.0..=1.0).contains(&x));
                    }
                }
            }
        }
    }
}
