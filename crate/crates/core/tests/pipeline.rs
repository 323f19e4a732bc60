//! Synthetic corpus to trained classifier, entirely through the public API.

use selfonn_core::data::{
    load_samples, make_cv_splits, stratified_ordered_kfold, synth_generate, NormalizationMode,
    RemainderPlacement, SynthConfig,
};
use selfonn_core::metrics::{confusion, metric_report};
use selfonn_core::selfonn::{build_model, ModelConfig};
use selfonn_core::training::{evaluate, fit, TrainConfig};

#[test]
fn tiny_corpus_trains_to_a_near_diagonal_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SynthConfig {
        width: 160,
        height: 128,
        counts: [20, 20, 20],
        seed: 1,
        ..SynthConfig::default()
    };
    let (manifest, _) = synth_generate(&cfg, dir.path()).unwrap();
    let model_cfg = ModelConfig::desk(2);
    let samples = load_samples(&manifest, dir.path(), model_cfg.input_shape, NormalizationMode::PerImage).unwrap();
    let plan = stratified_ordered_kfold(&manifest, 5, &RemainderPlacement::default_for(5)).unwrap();
    let split = &make_cv_splits(&plan)[0];
    let pick = |idx: &[usize]| idx.iter().map(|&i| &samples[i]).collect::<Vec<_>>();
    let (train, val) = (pick(&split.train), pick(&split.val));

    let tc = TrainConfig {
        max_epochs: 12,
        seed: 3,
        ..TrainConfig::default()
    };
    let outcome = fit(&build_model(&model_cfg, 3).unwrap(), &train, &val, &tc).unwrap();
    assert!(outcome.records.len() <= 12);

    let (_, preds) = evaluate(&outcome.model, &train).unwrap();
    let truth: Vec<usize> = train.iter().map(|s| s.label).collect();
    let cm = confusion(&truth, &preds, 3).unwrap();
    assert_eq!(cm.supports(), vec![12, 12, 12]);
    let report = metric_report(&cm).unwrap();
    assert!(report.accuracy >= 0.9, "{report:?}");
    assert_eq!(report.weighted.recall, report.accuracy);
}
