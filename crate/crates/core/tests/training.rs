use freqtime::dataset::{build_dataset, build_split, MixConfig, Split};
use freqtime::estimators::{load_checkpoint, model_checksum, save_checkpoint, EstimatorModel, FreqTimeConfig, Variant};
use freqtime::link::GridConfig;
use freqtime::train::{dataset_loss, evaluate_mse, train, TrainConfig};
use ndarray::Axis;

fn grid() -> GridConfig {
    GridConfig {
        n_f: 24,
        ..GridConfig::default()
    }
}

fn config() -> FreqTimeConfig {
    FreqTimeConfig::from_grid(&grid(), 12)
}

#[test]
fn two_hundred_adam_steps_reduce_loss() {
    let ds = build_dataset(
        32,
        &MixConfig {
            master_seed: 12,
            ..MixConfig::default()
        },
        &grid(),
    )
    .unwrap();
    for variant in [Variant::FreqTime, Variant::AttenFreqTime] {
        let mut model = EstimatorModel::new(variant, config(), 3).unwrap();
        let cfg = TrainConfig {
            epochs: 200,
            batch_size: 32,
            ..TrainConfig::default()
        };
        let h = train(&mut model, &ds, None, &cfg).unwrap();
        assert!(h.final_train_loss < 0.5 * h.initial_train_loss, "{variant:?}: {h:?}");
        // Averaged over windows of 20 steps the loss keeps falling.
        let windows: Vec<f64> = h
            .train_loss
            .chunks(20)
            .map(|w| w.iter().sum::<f64>() / w.len() as f64)
            .collect();
        assert!(windows.windows(2).all(|w| w[1] < w[0]), "{windows:?}");
    }
}

#[test]
fn same_seeds_give_same_report() {
    let run = || {
        let mix = MixConfig {
            master_seed: 8,
            ..MixConfig::default()
        };
        let train_ds = build_dataset(48, &mix, &grid()).unwrap();
        let test_ds = build_split(30, &mix, &grid(), Split::Test).unwrap();
        let mut model = EstimatorModel::new(Variant::AttenFreqTime, config(), 4).unwrap();
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 16,
            seed: 6,
            ..TrainConfig::default()
        };
        train(&mut model, &train_ds, None, &cfg).unwrap();
        evaluate_mse(&model, &test_ds).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    assert_eq!(a.to_csv(), b.to_csv());
    assert!(a.checksum.is_some());
}

#[test]
fn test_split_does_not_reuse_training_realizations() {
    let mix = MixConfig::default();
    let train_ds = build_dataset(200, &mix, &grid()).unwrap();
    let test_ds = build_split(200, &mix, &grid(), Split::Test).unwrap();
    let seeds: std::collections::HashSet<u64> = train_ds.samples.iter().map(|s| s.draw.sample_seed).collect();
    assert!(test_ds.samples.iter().all(|s| !seeds.contains(&s.draw.sample_seed)));
}

#[test]
fn checkpoint_round_trip_keeps_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ftnn");
    let ds = build_dataset(6, &MixConfig::default(), &grid()).unwrap();
    for variant in [Variant::FreqTime, Variant::AttenFreqTime] {
        let model = EstimatorModel::new(variant, config(), 10).unwrap();
        save_checkpoint(&model, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded.variant, variant);
        assert_eq!(loaded.config, model.config);
        assert_eq!(model_checksum(&loaded).unwrap(), model_checksum(&model).unwrap());
        // Parameters are stored as f32.
        let idx: Vec<usize> = (0..ds.len()).collect();
        let (obs, snr, _) = ds.batch(&idx);
        let a = model.forward_batch(obs.view(), snr.view()).unwrap();
        let b = loaded.forward_batch(obs.view(), snr.view()).unwrap();
        let worst = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-5, "{worst}");
        assert!((dataset_loss(&model, &ds).unwrap() - dataset_loss(&loaded, &ds).unwrap()).abs() < 1e-5);
        assert_eq!(a.len_of(Axis(0)), ds.len());
    }
}
