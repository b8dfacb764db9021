use std::path::PathBuf;

use ikiwisi_core::metrics::micro_f1;
use ikiwisi_core::providers::load_prediction_cache;
use ikiwisi_core::{load_dataset, predict, CacheStore, Dataset, ModelDescriptor, SelectedObject};
use num_rational::Ratio;

fn fixture(rel: &str) -> Vec<u8> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel);
    std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn models(dir: &str) -> Vec<ModelDescriptor> {
    serde_json::from_slice(&fixture(&format!("{dir}/models.json"))).unwrap()
}

fn selection(ds: &Dataset) -> Vec<SelectedObject> {
    ds.vocabulary.objects().iter().map(SelectedObject::new).collect()
}

#[test]
fn walk15_cache_scores_seventy_seven_percent() {
    let ds = load_dataset(&fixture("walk15/datasets/street.json")).unwrap();
    let mut caches = CacheStore::new();
    caches.insert(load_prediction_cache(&fixture("walk15/caches/recognizer/walk-15.json"), &ds).unwrap());
    let model = models("walk15")
        .into_iter()
        .find(|m| m.model_id == "recognizer")
        .unwrap();
    let seg = ds.segment("walk-15").unwrap();
    assert_eq!(seg.frame_count(), 15);
    let gt = ds.ground_truth("walk-15").unwrap();
    let objs = selection(&ds);
    let grid = predict(&model, seg, &objs, gt, &caches).unwrap();
    let s = micro_f1::<f64>(&grid, gt, &objs, &(0..15).collect::<Vec<_>>()).unwrap();
    assert_eq!((s.counts.tp, s.counts.fp, s.counts.fn_, s.counts.tn), (27, 9, 7, 47));
    assert_eq!(s.counts.f1_exact(), Ratio::new(27, 35));
    assert!((s.f1 - 0.77).abs() <= 0.005, "{}", s.f1);
}

#[test]
fn tiny_cache_scores_two_thirds() {
    let ds = load_dataset(&fixture("tiny/datasets/tiny.json")).unwrap();
    let mut caches = CacheStore::new();
    caches.insert(load_prediction_cache(&fixture("tiny/caches/cached/s0.json"), &ds).unwrap());
    let objs = selection(&ds);
    let seg = ds.segment("s0").unwrap();
    let gt = ds.ground_truth("s0").unwrap();
    for m in models("tiny") {
        let grid = predict(&m, seg, &objs, gt, &caches).unwrap();
        let s = micro_f1::<f64>(&grid, gt, &objs, &[0, 1, 2]).unwrap();
        match m.model_id.as_str() {
            "gt" => assert_eq!(s.f1, 1.0),
            "cached" => assert_eq!(format!("{:.6}", s.f1), "0.666667"),
            _ => assert!((0.0..=1.0).contains(&s.f1)),
        }
    }
}

#[test]
fn manifests_round_trip() {
    for rel in ["tiny/datasets/tiny.json", "walk15/datasets/street.json"] {
        let ds = load_dataset(&fixture(rel)).unwrap();
        let again = load_dataset(ds.to_json().as_bytes()).unwrap();
        assert_eq!(ds, again);
    }
    let big = ikiwisi_core::fixture::generate_dataset(&ikiwisi_core::fixture::FixtureConfig::reference(1));
    let loaded = load_dataset(big.to_json().as_bytes()).unwrap();
    assert_eq!((loaded.vocabulary.len(), loaded.segments.len()), (90, 31));
    assert!(ikiwisi_core::validate_vocabulary_membership(
        "Turnstile",
        &loaded.vocabulary
    ));
}
