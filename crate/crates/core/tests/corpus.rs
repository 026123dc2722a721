mod common;

use std::collections::HashSet;

use apg_core::binarize::{binarize, BinarizeConfig};
use apg_core::manifest::load_manifest;
use apg_core::metrics::evaluate;
use apg_core::pnm;
use apg_core::synth::{emit_corpus, generate, sample_seed, SceneSpec};
use common::tree_bytes;
use tempfile::TempDir;

#[test]
fn corpus_is_reproducible_and_self_consistent() {
    let tmp = TempDir::new().unwrap();
    let spec = SceneSpec {
        width: 128,
        height: 128,
        ..SceneSpec::default()
    };
    let a = emit_corpus(&spec, 20, tmp.path().join("a")).unwrap();
    emit_corpus(&spec, 20, tmp.path().join("b")).unwrap();
    assert_eq!(tree_bytes(&tmp.path().join("a")), tree_bytes(&tmp.path().join("b")));

    let ids: HashSet<_> = a.samples.iter().map(|s| s.id.as_str()).collect();
    assert_eq!(ids.len(), 20);
    let positives = a.samples.iter().filter(|s| s.label).count();
    assert!(positives > 0 && positives < 20, "{positives} positives");

    // the written manifest resolves to the same files
    let reloaded = load_manifest(tmp.path().join("a/manifest.csv")).unwrap();
    assert_eq!(reloaded.samples.len(), 20);
    for (s, r) in a.samples.iter().zip(&reloaded.samples) {
        assert_eq!(s.id, r.id);
        assert_eq!(s.label, r.label);
        assert_eq!(
            pnm::read_pgm(&s.heatmap_path).unwrap(),
            pnm::read_pgm(&r.heatmap_path).unwrap()
        );
        let gt = pnm::read_mask(r.gt_mask_path.as_ref().unwrap()).unwrap();
        // label is exactly "ground truth is non-empty"
        assert_eq!(s.label, gt.foreground_count() > 0);
        if !s.label {
            assert!(pnm::read_pgm(&r.heatmap_path).unwrap().values().iter().all(|&v| v == 0));
        }
    }
}

#[test]
fn different_seeds_differ() {
    let spec = SceneSpec::default();
    let a = generate(&SceneSpec {
        seed: sample_seed(7, 0),
        ..spec.clone()
    })
    .unwrap();
    let b = generate(&SceneSpec {
        seed: sample_seed(7, 1),
        ..spec
    })
    .unwrap();
    assert_ne!(a.image, b.image);
}

#[test]
fn default_heatmaps_cover_their_objects() {
    let spec = SceneSpec::default();
    let mut checked = 0;
    for i in 0..30 {
        let scene = generate(&SceneSpec {
            seed: sample_seed(7, i),
            ..spec.clone()
        })
        .unwrap();
        if !scene.label {
            continue;
        }
        let fg = binarize(&scene.heatmap, BinarizeConfig::default());
        let r = evaluate(&fg, &scene.gt_mask).unwrap();
        assert!(r.iou >= 0.5, "sample {i}: IoU {}", r.iou);
        checked += 1;
    }
    assert!(checked >= 10);
}
