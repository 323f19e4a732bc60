//! Cross-module oracles: parameter counts, fold arithmetic, generator and
//! weight-file checks.

use selfonn_core::data::{
    load_pgm16, make_cv_splits, segment_sizes, stratified_ordered_kfold, synth_generate, ClassLabel,
    DatasetManifest, RemainderPlacement, SynthConfig,
};
use selfonn_core::data::synth::{celsius_to_raw, ClassStats};
use selfonn_core::selfonn::{build_model, encode_weights, load_weights, param_count, save_weights, ModelConfig};
use selfonn_core::Error;

#[test]
fn paper_parameter_counts() {
    let table = [293_027, 294_083, 295_139, 296_195, 297_251];
    for (q, &n) in (1..=5).zip(&table) {
        assert_eq!(param_count(&ModelConfig::paper(q)).unwrap(), n);
    }
    // Each extra order adds 8·25 + 8·8·9 + 8·8·4 kernel weights and 3·8 biases.
    for q in 1..=10 {
        assert_eq!(param_count(&ModelConfig::paper(q)).unwrap(), 1056 * q as usize + 291_971);
    }
    let geo = ModelConfig::paper(1).geometry().unwrap();
    assert_eq!(geo.last().unwrap().pooled_hw, (30, 38));
    assert_eq!(ModelConfig::paper(1).flatten_len().unwrap(), 9120);
}

#[test]
fn reduced_hand_count() {
    // 16 →conv3→ 14 →pool→ 7 →conv2→ 6 →pool→ 3 →conv2→ 2 →pool→ 1.
    // Kernels 2·1·9 + 2·2·4 + 2·2·4 = 50 per order, biases 6 per order,
    // dense 2·4 + 4, output 4·3 + 3.
    for q in 1..=4usize {
        let expected = 56 * q + 12 + 15;
        assert_eq!(param_count(&ModelConfig::reduced(q as u32)).unwrap(), expected);
    }
    assert_eq!(param_count(&ModelConfig::reduced(1)).unwrap(), 83);
}

fn manifest(counts: [usize; 3]) -> DatasetManifest {
    DatasetManifest::from_entries(ClassLabel::ALL.into_iter().flat_map(|c| {
        (0..counts[c.index()]).map(move |i| (format!("{}/{i}.pgm", c.name()).into(), c))
    }))
    .unwrap()
}

#[test]
fn remainder_rule() {
    assert_eq!(segment_sizes(7, 5, &RemainderPlacement::front_loaded(5).per_class[0]), vec![2, 2, 1, 1, 1]);
}

#[test]
fn cross_validation_splits_follow_fold_counts() {
    let m = manifest([2244, 1799, 1610]);
    let plan = stratified_ordered_kfold(&m, 5, &RemainderPlacement::table_one()).unwrap();
    let counts = plan.counts().clone();
    let splits = make_cv_splits(&plan);
    let mut tested = vec![0usize; m.len()];
    for split in &splits {
        for &i in &split.test {
            tested[i] += 1;
        }
        let mut all: Vec<usize> = split.train.iter().chain(&split.val).chain(&split.test).copied().collect();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), m.len(), "train, val and test must partition the data");
        for c in ClassLabel::ALL {
            let count = |idx: &[usize]| idx.iter().filter(|&&i| plan.label(i) == c).count();
            let row = &counts[c.index()];
            assert_eq!(count(&split.test), row[split.test_fold]);
            assert_eq!(count(&split.val), row[split.val_fold]);
            assert_eq!(count(&split.train), split.train_folds.iter().map(|&f| row[f]).sum::<usize>());
        }
    }
    assert!(tested.iter().all(|&n| n == 1));
    // Test fold 1: validation is fold 2 and training folds 3 to 5.
    assert_eq!(splits[0].val.len(), 1131);
    assert_eq!(splits[0].train.len(), 1131 + 1130 + 1130);
}

#[test]
fn generated_frames_parse_with_class_extrema() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SynthConfig {
        counts: [1, 1, 1],
        seed: 17,
        ..SynthConfig::default()
    };
    let (m, report) = synth_generate(&cfg, dir.path()).unwrap();
    assert_eq!(m.class_counts(), [1, 1, 1]);
    for (rec, stats) in m.records().iter().zip(ClassStats::RECORDED) {
        let img = load_pgm16(&dir.path().join(&rec.path)).unwrap();
        assert_eq!((img.width(), img.height()), (640, 512));
        let (lo, hi) = img.min_max();
        assert!(lo >= celsius_to_raw(stats.min) && hi <= celsius_to_raw(stats.max));
        // The hottest pixel saturates at the class maximum for all patterns.
        assert_eq!(hi, celsius_to_raw(stats.max), "{}", rec.label);
    }
    assert_eq!(report.classes.len(), 3);
}

#[test]
fn same_seed_same_corpus() {
    let cfg = SynthConfig {
        width: 40,
        height: 32,
        counts: [3, 2, 2],
        seed: 5,
        ..SynthConfig::default()
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (ma, _) = synth_generate(&cfg, a.path()).unwrap();
    synth_generate(&cfg, b.path()).unwrap();
    for rec in ma.records() {
        assert_eq!(
            std::fs::read(a.path().join(&rec.path)).unwrap(),
            std::fs::read(b.path().join(&rec.path)).unwrap()
        );
    }
    assert_eq!(
        std::fs::read(a.path().join("manifest.tsv")).unwrap(),
        std::fs::read(b.path().join("manifest.tsv")).unwrap()
    );
}

#[test]
fn weight_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let model = build_model(&ModelConfig::desk(3), 9).unwrap();
    let path = dir.path().join("w.sonn");
    save_weights(&model, &path).unwrap();
    let back = load_weights(&path, model.config()).unwrap();
    assert_eq!(back.flatten(), model.flatten());
    assert_eq!(encode_weights(&back), std::fs::read(&path).unwrap());
    assert!(matches!(
        load_weights(&path, &ModelConfig::desk(2)),
        Err(Error::WeightFile(selfonn_core::error::WeightFileError::ConfigMismatch(_)))
    ));
}
