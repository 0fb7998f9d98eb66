mod common;

use hgmt_core::{TaskKind, TaskSet};
use hgmt_nn::{HourglassConfig, MultiTaskModel};
use hgmt_train::{median, train, train_with, Error, TrainConfig, TrainData, TrainState, LOG_HEADER};

#[test]
fn model_tasks_must_be_annotated() {
    let data = common::samples(2, 64, 1);
    let config = common::short_run(1, 1);
    let model = MultiTaskModel::<f32>::new("2d+3d".parse().unwrap(), common::tiny(), 0).unwrap();
    let mut state = TrainState::new(model, &config);
    let train_data = TrainData { available: "2d+seg".parse().unwrap(), ..TrainData::new(&data) };
    let err = train(&mut state, train_data, &config).unwrap_err();
    assert!(matches!(err, Error::TaskMismatch { .. }), "{err}");
    assert_eq!(state.step, 0);
}

#[test]
fn non_finite_loss_aborts_with_stack_and_task() {
    let data = common::samples(2, 64, 2);
    let config = common::short_run(4, 2);
    let mut model = MultiTaskModel::<f32>::new("seg".parse().unwrap(), common::tiny(), 0).unwrap();
    let (_, bias) = model.head(2, TaskKind::PartSeg).unwrap();
    model.params_mut().get_mut(bias)[[3]] = f32::INFINITY;
    let mut state = TrainState::new(model, &config);
    let before = state.model.params().clone();
    let err = train(&mut state, TrainData::new(&data), &config).unwrap_err();
    let text = err.to_string();
    assert!(matches!(err, Error::NonFinite { step: 1, .. }), "{text}");
    assert!(text.contains("stack 2") && text.contains("seg"), "{text}");
    assert_eq!(state.model.params(), &before);
    assert_eq!(state.step, 0);
}

#[test]
fn non_finite_images_are_rejected() {
    let mut data = common::samples(2, 64, 2);
    data[1].image[[3, 3, 0]] = f32::NAN;
    let config = common::short_run(1, 2);
    let model = MultiTaskModel::<f32>::new("seg".parse().unwrap(), common::tiny(), 0).unwrap();
    let mut state = TrainState::new(model, &config);
    assert!(train(&mut state, TrainData::new(&data), &config).is_err());
    assert_eq!(state.step, 0);
}

#[test]
fn exploding_learning_rate_never_writes_non_finite_parameters() {
    let data = common::samples(4, 64, 3);
    let config = TrainConfig { learning_rate: 1e30, ..common::short_run(20, 2) };
    let model = MultiTaskModel::<f32>::new("2d".parse().unwrap(), common::tiny(), 0).unwrap();
    let mut state = TrainState::new(model, &config);
    let result = train(&mut state, TrainData::new(&data), &config);
    assert!(state.model.params().iter().all(|(_, _, p)| p.iter().all(|v| v.is_finite())));
    if let Err(e) = result {
        assert!(matches!(e, Error::NonFinite { .. }), "{e}");
    }
}

#[test]
fn invalid_config_lists_every_problem() {
    let config = TrainConfig { batch_size: 0, learning_rate: -1.0, rho: 1.5, device: "gpu".into(), ..Default::default() };
    let text = config.validate().unwrap_err().to_string();
    for key in ["batch_size", "learning_rate", "rho", "device"] {
        assert!(text.contains(key), "{key} missing from {text}");
    }
}

#[test]
fn log_has_one_line_per_stack_and_task() {
    let data = common::samples(3, 64, 4);
    let config = common::short_run(3, 2);
    let tasks: TaskSet = "2d+depth".parse().unwrap();
    let model = MultiTaskModel::<f32>::new(tasks, common::tiny(), 0).unwrap();
    let mut state = TrainState::new(model, &config);
    let mut seen = Vec::new();
    let log = train_with(&mut state, TrainData::new(&data), &config, &mut |step, report| seen.push((step, report.total))).unwrap();
    assert_eq!(log.records.len(), 3 * 2 * 2);
    assert_eq!(seen, log.totals);
    let text = log.to_text();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(LOG_HEADER));
    let first: Vec<&str> = lines.next().unwrap().split(", ").collect();
    assert_eq!(first.len(), 6);
    assert_eq!(&first[..4], ["1", "0", "1", "2d"]);
    assert_eq!(first[5], "0");
    assert!(first[4].parse::<f64>().unwrap() > 0.0);
    let epochs: Vec<u64> = log.records.iter().map(|r| r.epoch).collect();
    assert_eq!(epochs, [0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1]);
    let step2: Vec<(usize, TaskKind)> = log.records[4..8].iter().map(|r| (r.stack, r.task)).collect();
    assert!(log.records[4..8].iter().all(|r| r.step == 2));
    for key in [(1, TaskKind::Pose2D), (2, TaskKind::Pose2D), (1, TaskKind::Depth), (2, TaskKind::Depth)] {
        assert!(step2.contains(&key), "{key:?}");
    }
}

#[test]
fn training_is_reproducible() {
    let data = common::samples(4, 64, 5);
    let config = common::short_run(4, 2);
    let run = || {
        let model = MultiTaskModel::<f32>::new("2d+seg".parse().unwrap(), common::tiny(), 7).unwrap();
        let mut state = TrainState::new(model, &config);
        let log = train(&mut state, TrainData::new(&data), &config).unwrap();
        (state.model.params().clone(), log.to_text())
    };
    assert_eq!(run(), run());
}

#[test]
fn loss_decreases_on_the_overfit_configuration() {
    let cfg = HourglassConfig { num_stacks: 1, features: 32, ..HourglassConfig::desk() };
    let data = common::samples(16, cfg.input_size, 0);
    let config = common::short_run(200, 5);
    let model = MultiTaskModel::<f32>::new(TaskSet::single(TaskKind::Pose2D), cfg, 0).unwrap();
    let mut state = TrainState::new(model, &config);
    let log = train(&mut state, TrainData::new(&data), &config).unwrap();
    let early = median(&log.totals_between(1, 101)).unwrap();
    let late = median(&log.totals_between(101, 201)).unwrap();
    assert!(late < early, "median loss {early} over steps 1-100, {late} over steps 101-200");
}
