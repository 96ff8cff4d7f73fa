use std::path::Path;

use scslab_data::{generate_synthetic, Dataset};
use scslab_train::{
    train, TrainError, TrainSettings, BEST_CKPT, FINAL_CKPT, INITIAL_CKPT, TELEMETRY_FILE,
};
use scslab_zoo::{build_model, LayerVariantConfig, Model};

fn tiny_data() -> (Dataset, Dataset) {
    let train = generate_synthetic(16, 11, 0, "train").unwrap();
    let test = generate_synthetic(16, 11, 1000, "test").unwrap();
    (train, test)
}

fn conv_model(seed: u64) -> Model {
    build_model(&LayerVariantConfig {
        seed,
        ..LayerVariantConfig::default()
    })
    .unwrap()
}

fn quick_settings(epochs: usize) -> TrainSettings {
    let mut s = TrainSettings::default();
    s.epochs = epochs;
    s.batch_size = 8;
    s.zero_times = true;
    s.augment.enabled = false;
    s
}

#[test]
fn one_epoch_of_16_samples_at_batch_8_takes_two_steps() {
    let (train_ds, test_ds) = tiny_data();
    let model = conv_model(0);
    let dir = tempfile::tempdir().unwrap();

    let outcome = train(
        &model,
        &train_ds,
        &test_ds,
        &quick_settings(1),
        Some(dir.path()),
    )
    .unwrap();

    assert_eq!(outcome.optimizer_steps, 2);
    assert_eq!(outcome.records.len(), 1);
    assert_eq!(outcome.records[0].epoch, 1);
    assert!(!outcome.stopped_early);
    assert_eq!(outcome.best_epoch, Some(1));

    for file in [TELEMETRY_FILE, INITIAL_CKPT, BEST_CKPT, FINAL_CKPT] {
        assert!(dir.path().join(file).exists(), "{file} missing");
    }
    let csv = std::fs::read_to_string(dir.path().join(TELEMETRY_FILE)).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn zero_epochs_writes_initial_state_only() {
    let (train_ds, test_ds) = tiny_data();
    let model = conv_model(0);
    let dir = tempfile::tempdir().unwrap();

    let outcome = train(
        &model,
        &train_ds,
        &test_ds,
        &quick_settings(0),
        Some(dir.path()),
    )
    .unwrap();

    assert!(outcome.records.is_empty());
    assert_eq!(outcome.optimizer_steps, 0);
    assert!(outcome.best_test_acc.is_none());
    assert!(dir.path().join(INITIAL_CKPT).exists());
    assert!(!dir.path().join(BEST_CKPT).exists());
    assert!(!dir.path().join(FINAL_CKPT).exists());
    let csv = std::fs::read_to_string(dir.path().join(TELEMETRY_FILE)).unwrap();
    assert_eq!(csv.lines().count(), 1, "header only");
}

fn run_once(dir: &Path) {
    let (train_ds, test_ds) = tiny_data();
    let model = conv_model(3);
    let mut settings = quick_settings(2);
    settings.augment.enabled = true;
    train(&model, &train_ds, &test_ds, &settings, Some(dir)).unwrap();
}

#[test]
fn identical_runs_produce_byte_identical_outputs() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    run_once(dir_a.path());
    run_once(dir_b.path());

    for file in [TELEMETRY_FILE, INITIAL_CKPT, BEST_CKPT, FINAL_CKPT] {
        let a = std::fs::read(dir_a.path().join(file)).unwrap();
        let b = std::fs::read(dir_b.path().join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
}

#[test]
fn different_shuffle_seeds_change_the_trajectory() {
    let (train_ds, test_ds) = tiny_data();
    let mut settings = quick_settings(2);

    let model_a = conv_model(3);
    let out_a = train(&model_a, &train_ds, &test_ds, &settings, None).unwrap();
    settings.shuffle_seed = 99;
    let model_b = conv_model(3);
    let out_b = train(&model_b, &train_ds, &test_ds, &settings, None).unwrap();

    assert_ne!(
        out_a.records.last().unwrap().train_loss,
        out_b.records.last().unwrap().train_loss
    );
}

#[test]
fn memorizes_a_tiny_set_and_stops_early() {
    let (train_ds, _) = tiny_data();
    let model = conv_model(0);
    let mut settings = quick_settings(120);
    settings.stop_at_train_acc = Some(1.0);

    let outcome = train(&model, &train_ds, &train_ds, &settings, None).unwrap();
    assert!(
        outcome.stopped_early,
        "never hit train acc 1.0; last = {:?}",
        outcome.records.last().map(|r| r.train_acc)
    );
    assert_eq!(outcome.records.last().unwrap().train_acc, 1.0);
    assert!(outcome.records.len() < 120);
}

#[test]
fn nan_weights_abort_with_the_offending_layer_named() {
    let (train_ds, test_ds) = tiny_data();
    let model = conv_model(0);
    for (name, t) in model.named_params() {
        if name == "head.weight" {
            let poisoned = vec![f64::NAN; t.data().len()];
            t.set_data(&poisoned).unwrap();
        }
    }

    let err = train(&model, &train_ds, &test_ds, &quick_settings(1), None).unwrap_err();
    match &err {
        TrainError::NonFinite { context } => assert!(
            context.contains("head") && context.contains("epoch 1 step 1"),
            "diagnosis did not name the head layer: {context}"
        ),
        other => panic!("expected non-finite abort, got {other:?}"),
    }
}

#[test]
fn empty_training_set_is_a_config_error() {
    let (_, test_ds) = tiny_data();
    let empty = generate_synthetic(0, 1, 0, "train").unwrap();
    let model = conv_model(0);
    let err = train(&model, &empty, &test_ds, &quick_settings(1), None).unwrap_err();
    assert!(matches!(err, TrainError::Config(_)), "{err:?}");
}
