use cwox_core::image::pixel_order;
use cwox_core::metrics::{contrastive_curve, contrastive_score, delete_pixels, MetricConfig};
use cwox_core::scenario::halves_model;
use cwox_core::{Fill, Image, ModelOracle, SaliencyMap};

#[test]
fn deleting_own_evidence_lowers_the_score() {
    let model = halves_model(8, 4.0);
    let x = Image::filled(8, 8, 1, 1.0).unwrap();
    let map = SaliencyMap::new(8, 8, model.weights(0).to_vec()).unwrap();
    let foil = vec!["right".to_string()];
    let cfg = MetricConfig { baseline: Fill::Zero, ..Default::default() };
    let curve = contrastive_curve(&model, &x, &map, "left", &foil, &cfg).unwrap();
    assert_eq!(curve.n_delta, 32);
    assert!(curve.scores.windows(2).all(|w| w[1] < w[0]));

    let order = pixel_order(&map);
    for r in 1..=curve.n_delta + 1 {
        let xr = delete_pixels(&x, &order, r, &Fill::Zero).unwrap();
        let s = contrastive_score(&model.classify(&xr).unwrap(), "left", &foil).unwrap();
        assert_eq!(s, curve.score(r));
    }
}

#[test]
fn batched_curves_are_flagged_and_share_endpoints() {
    let model = halves_model(8, 4.0);
    let x = Image::new(8, 8, 1, (0..64).map(|i| (i % 7) as f64 / 6.0).collect()).unwrap();
    let map = SaliencyMap::new(8, 8, model.weights(0).to_vec()).unwrap();
    let foil = vec!["right".to_string()];
    let exact = contrastive_curve(&model, &x, &map, "left", &foil, &MetricConfig::default()).unwrap();
    let batched = contrastive_curve(&model, &x, &map, "left", &foil, &MetricConfig { batch: 8, ..Default::default() })
        .unwrap();
    assert!(!exact.approximate && batched.approximate);
    assert_eq!(exact.score(1), batched.score(1));
    assert_eq!(exact.score(exact.n_delta + 1), batched.score(batched.n_delta + 1));
    assert_eq!(exact.score(9), batched.score(9));
}

#[test]
fn certain_foil_zeroes_the_curve() {
    let model = halves_model(4, 1.0).with_biases(vec![0.0, 800.0]).unwrap();
    let x = Image::filled(4, 4, 1, 0.5).unwrap();
    let map = SaliencyMap::new(4, 4, (0..16).map(|i| i as f64).collect()).unwrap();
    let curve = contrastive_curve(&model, &x, &map, "left", &["right".to_string()], &MetricConfig::default()).unwrap();
    assert!(curve.scores.iter().all(|&s| s == 0.0));
}
