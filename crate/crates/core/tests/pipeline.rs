use cwox_core::contrast::{explain, normalize_minmax, support_mask, ExplainConfig, Method};
use cwox_core::oracle::GradientInput;
use cwox_core::scenario::disjoint_evidence;
use cwox_core::tree::{NodeRecord, TreeDocument};
use cwox_core::{BaseExplainer, ClusterTree, Image, ModelOracle, SyntheticClassifier};

fn s(v: &[&str]) -> Vec<String> {
    v.iter().map(|x| x.to_string()).collect()
}

fn one_cluster_tree(labels: &[&str]) -> ClusterTree {
    let mut nodes = vec![
        NodeRecord { id: "Z2".into(), level: 2, parent: None, label: None },
        NodeRecord { id: "Z1".into(), level: 1, parent: Some("Z2".into()), label: None },
    ];
    for l in labels {
        nodes.push(NodeRecord {
            id: l.to_string(),
            level: 0,
            parent: Some("Z1".into()),
            label: Some(l.to_string()),
        });
    }
    ClusterTree::from_document(&TreeDocument { nodes }).unwrap()
}

#[test]
fn two_classes_in_one_cluster_pass_stage_one_through() {
    let w0: Vec<f64> = (0..16).map(|p| if p % 4 < 2 { 1.0 } else { 0.2 }).collect();
    let w1: Vec<f64> = (0..16).map(|p| if p % 4 < 2 { 0.2 } else { 1.0 }).collect();
    let model = SyntheticClassifier::new(s(&["p", "q"]), (4, 4, 1), vec![w0, w1], vec![0.0, 0.0], 1.0).unwrap();
    let x = Image::new(4, 4, 1, (0..16).map(|i| i as f64 / 15.0).collect()).unwrap();
    let exp = GradientInput::new(model.clone());
    let tree = one_cluster_tree(&["p", "q"]);
    let cfg = ExplainConfig::default();
    let b = explain(Method::Cwox2s, &model, &exp, Some(&tree), &x, &cfg).unwrap();

    assert_eq!(b.partition.len(), 1);
    assert_eq!(b.cluster_maps.len(), 1);
    assert_eq!(b.class_maps.len(), 2);
    let compound = exp.explain(&x, &[s(&["p", "q"])]).unwrap().remove(0);
    assert_eq!(b.cluster_maps[0], normalize_minmax(&compound));

    // With a single cluster, each class map is 1sA's map restricted to the
    // cluster support.
    let a = explain(Method::Cwox1sA, &model, &exp, Some(&tree), &x, &cfg).unwrap();
    let support = support_mask(&b.cluster_maps[0], cfg.epsilon);
    for (label, map) in &b.class_maps {
        let expect: Vec<f64> = a
            .class_map(label)
            .unwrap()
            .data()
            .iter()
            .zip(&support.data)
            .map(|(v, &m)| if m == 1 { *v } else { 0.0 })
            .collect();
        assert_eq!(map.data(), &expect[..]);
    }
}

#[test]
fn only_top_k_labels_enter_the_partition() {
    let base = disjoint_evidence();
    let model = base.model.with_biases(vec![4.0, 4.0, -4.0, -4.0]).unwrap();
    let exp = GradientInput::new(model.clone());
    let b = explain(Method::Cwox2s, &model, &exp, Some(&base.tree), &base.image, &ExplainConfig::default())
        .unwrap();
    let mut top = b.top.labels().to_vec();
    top.sort();
    assert_eq!(top, s(&["a", "b"]));
    assert_eq!(b.partition.len(), 1);
    let mut cluster = b.partition.clusters()[0].clone();
    cluster.sort();
    assert_eq!(cluster, s(&["a", "b"]));
    assert_eq!(b.cluster_maps.len(), 1);
    assert_eq!(b.class_maps.len(), 2);
}

#[test]
fn full_scenario_gives_two_clusters_of_two() {
    let sc = disjoint_evidence();
    let exp = GradientInput::new(sc.model.clone());
    let b = explain(Method::Cwox2s, &sc.model, &exp, Some(&sc.tree), &sc.image, &ExplainConfig::default())
        .unwrap();
    assert_eq!(b.partition.len(), 2);
    assert_eq!(b.cluster_maps.len(), 2);
    // Exact attributions isolate each class's own region.
    for (label, map) in &b.class_maps {
        let own = &sc.own_pixels[label];
        for (p, v) in map.data().iter().enumerate() {
            assert_eq!(*v > 0.0, own.contains(&p), "{label} pixel {p}");
        }
    }
}

#[test]
fn swox_maps_are_direct_explainer_calls() {
    let sc = disjoint_evidence();
    let exp = GradientInput::new(sc.model.clone());
    let b = explain(Method::Swox, &sc.model, &exp, None, &sc.image, &ExplainConfig::default()).unwrap();
    assert_eq!(b.class_maps.len(), 4);
    for (label, map) in &b.class_maps {
        let direct = exp.explain(&sc.image, &[vec![label.clone()]]).unwrap();
        assert_eq!(map, &direct[0]);
    }
}

/// Three classes sharing one region, each with a private 4x4 patch.
fn shared_region_model() -> (SyntheticClassifier, Image, Vec<Vec<usize>>) {
    let n = 16;
    let shared: Vec<usize> = (0..n * n).filter(|p| p / n >= 10).collect();
    let own: Vec<Vec<usize>> = (0..3)
        .map(|k| (0..n * n).filter(|p| p / n < 4 && (p % n) / 4 == k).collect())
        .collect();
    let mut bright = vec![0.0; n * n];
    let weights = own
        .iter()
        .map(|mine| {
            let mut w = vec![0.0; n * n];
            for &p in &shared {
                w[p] = 0.05;
                bright[p] = 1.0;
            }
            for &p in mine {
                w[p] = 0.04;
                bright[p] = 1.0;
            }
            w
        })
        .collect();
    let model = SyntheticClassifier::new(s(&["u", "v", "w"]), (n, n, 1), weights, vec![0.0; 3], 1.0).unwrap();
    (model, Image::new(n, n, 1, bright).unwrap(), own)
}

#[test]
fn one_stage_a_is_nonzero_only_on_own_evidence() {
    let (model, x, own) = shared_region_model();
    let exp = GradientInput::new(model.clone());
    let b = explain(Method::Cwox1sA, &model, &exp, None, &x, &ExplainConfig::default()).unwrap();
    assert_eq!(b.class_maps.len(), 3);
    for (label, map) in &b.class_maps {
        let k = model.labels().iter().position(|l| l == label).unwrap();
        for (p, v) in map.data().iter().enumerate() {
            if own[k].contains(&p) {
                assert!(*v > 0.0, "{label} pixel {p}");
            } else {
                assert_eq!(*v, 0.0, "{label} pixel {p}");
            }
        }
    }
}

#[test]
fn cwox2s_without_tree_is_an_error() {
    let sc = disjoint_evidence();
    let exp = GradientInput::new(sc.model.clone());
    assert!(explain(Method::Cwox2s, &sc.model, &exp, None, &sc.image, &ExplainConfig::default()).is_err());
}

#[test]
fn bundle_survives_a_disk_round_trip() {
    let sc = disjoint_evidence();
    let exp = GradientInput::new(sc.model.clone());
    let b = explain(Method::Cwox2s, &sc.model, &exp, Some(&sc.tree), &sc.image, &ExplainConfig::default())
        .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let manifest = cwox_core::bundle::save_bundle(dir.path(), &b, Some("scene.png")).unwrap();
    assert_eq!(manifest.clusters.len(), 2);
    let (back, m2) = cwox_core::bundle::load_bundle(dir.path()).unwrap();
    assert_eq!(manifest, m2);
    assert_eq!(back.partition, b.partition);
    assert_eq!(back.top, b.top);
    for ((la, ma), (lb, mb)) in back.class_maps.iter().zip(&b.class_maps) {
        assert_eq!(la, lb);
        for (u, v) in ma.data().iter().zip(mb.data()) {
            assert_eq!(*u, *v as f32 as f64);
        }
    }
    assert_eq!(sc.model.labels().len(), 4);
}
