mod common;

use hgmt_core::TaskSet;
use hgmt_nn::MultiTaskModel;
use hgmt_train::{train, Error, TrainConfig, TrainData, TrainState};

fn fresh(tasks: &str, config: &TrainConfig) -> TrainState<f32> {
    let model = MultiTaskModel::new(tasks.parse().unwrap(), common::tiny(), 11).unwrap();
    TrainState::new(model, config)
}

fn bits(state: &TrainState<f32>) -> Vec<u32> {
    let mut out: Vec<u32> = state.model.params().iter().flat_map(|(_, _, p)| p.iter().map(|v| v.to_bits()).collect::<Vec<_>>()).collect();
    out.extend(state.optimizer.accumulators.iter().flat_map(|a| a.iter().map(|v| v.to_bits())));
    out
}

#[test]
fn zero_epochs_leave_parameters_unchanged() {
    let data = common::samples(4, 64, 1);
    let config = TrainConfig { epochs: 0, batch_size: 2, ..Default::default() };
    let mut state = fresh("2d+seg", &config);
    let before = bits(&state);
    let log = train(&mut state, TrainData::new(&data), &config).unwrap();
    assert!(log.records.is_empty());
    assert_eq!(state.step, 0);
    assert_eq!(bits(&state), before);
}

#[test]
fn save_load_save_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let data = common::samples(4, 64, 2);
    let config = common::short_run(2, 2);
    let mut state = fresh("2d+depth", &config);
    train(&mut state, TrainData::new(&data), &config).unwrap();
    let (a, b) = (dir.path().join("a.ckpt"), dir.path().join("b.ckpt"));
    state.save(&a, &config).unwrap();
    let (loaded, loaded_cfg) = TrainState::<f32>::load(&a, None).unwrap();
    assert_eq!(loaded_cfg, config);
    assert_eq!(loaded.step, 2);
    assert_eq!(bits(&loaded), bits(&state));
    loaded.save(&b, &loaded_cfg).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn resumed_training_matches_uninterrupted_training() {
    let dir = tempfile::tempdir().unwrap();
    let data = common::samples(6, 64, 3);
    let ten = common::short_run(10, 2);
    let five = common::short_run(5, 2);

    let mut straight = fresh("2d+seg", &ten);
    let log_straight = train(&mut straight, TrainData::new(&data), &ten).unwrap();

    let mut first = fresh("2d+seg", &five);
    let mut log_resumed = train(&mut first, TrainData::new(&data), &five).unwrap();
    let path = dir.path().join("half.ckpt");
    first.save(&path, &five).unwrap();
    drop(first);
    let (mut resumed, _) = TrainState::<f32>::load(&path, Some("2d+seg".parse().unwrap())).unwrap();
    assert_eq!(resumed.step, 5);
    log_resumed.extend(train(&mut resumed, TrainData::new(&data), &ten).unwrap());

    assert_eq!(resumed.step, 10);
    assert_eq!(bits(&resumed), bits(&straight));
    assert_eq!(log_resumed.to_text(), log_straight.to_text());
}

#[test]
fn loading_with_other_task_set_fails() {
    let dir = tempfile::tempdir().unwrap();
    let config = common::short_run(1, 1);
    let state = fresh("2d+seg", &config);
    let path = dir.path().join("s.ckpt");
    state.save(&path, &config).unwrap();
    let other: TaskSet = "2d+depth".parse().unwrap();
    let err = TrainState::<f32>::load(&path, Some(other)).unwrap_err();
    assert!(err.to_string().contains("2d+seg"), "{err}");
    assert!(TrainState::<f32>::load(&path, Some("seg+2d".parse().unwrap())).is_ok());
}

#[test]
fn corrupt_checkpoint_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = common::short_run(1, 1);
    let path = dir.path().join("s.ckpt");
    fresh("3d", &config).save(&path, &config).unwrap();
    let mut bytes = std::fs::read(&path).unwrap();
    bytes.truncate(bytes.len() / 2);
    std::fs::write(&path, &bytes).unwrap();
    assert!(TrainState::<f32>::load(&path, None).is_err());
    assert!(matches!(TrainState::<f32>::load(&dir.path().join("missing.ckpt"), None), Err(Error::Checkpoint(_) | Error::Io(_) | Error::Nn(_))));
}

#[test]
fn epoch_checkpoints_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let data = common::samples(4, 64, 4);
    let config = TrainConfig { epochs: 2, batch_size: 2, checkpoint_dir: Some(dir.path().to_path_buf()), ..Default::default() };
    let mut state = fresh("seg", &config);
    train(&mut state, TrainData::new(&data), &config).unwrap();
    for name in ["epoch_001.ckpt", "epoch_002.ckpt", "last.ckpt"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let (last, _) = TrainState::<f32>::load(&dir.path().join("last.ckpt"), None).unwrap();
    assert_eq!(last.step, 4);
    assert_eq!(bits(&last), bits(&state));
}
