use hgmt_cli::config::{DatasetKind, ExperimentConfig, Preset};
use hgmt_cli::{CliError, ExperimentArgs};
use hgmt_core::TaskSet;

#[test]
fn presets_validate() {
    ExperimentConfig::preset(Preset::Desk).validate().unwrap();
    let mut paper = ExperimentConfig::preset(Preset::Paper);
    assert_eq!(paper.dataset.kind, DatasetKind::SurrealFormat);
    assert!(paper.validate().is_err(), "paper preset needs a dataset root");
    paper.dataset.root = Some("data".into());
    paper.validate().unwrap();
    assert_eq!(paper.model.features, 256);
    assert_eq!(paper.model.num_stacks, 2);
}

#[test]
fn overlay_keeps_unlisted_preset_values() {
    let cfg = ExperimentConfig::from_toml("[train]\nmax_steps = 7\n", Preset::Desk, None).unwrap();
    let desk = ExperimentConfig::preset(Preset::Desk);
    assert_eq!(cfg.train.max_steps, Some(7));
    assert_eq!(cfg.train.learning_rate, desk.train.learning_rate);
    assert_eq!(cfg.model, desk.model);
    assert_eq!(cfg.dataset.train_samples, 500);
}

#[test]
fn model_size_carries_over_to_synthetic_images() {
    let cfg = ExperimentConfig::from_toml("[model]\ninput_size = 64\nresolution = 16\n", Preset::Desk, None).unwrap();
    assert_eq!(cfg.dataset.synthetic.image_size, 64);
    cfg.validate().unwrap();
}

#[test]
fn unknown_keys_are_config_errors() {
    for text in ["[train]\nlerning_rate = 0.1\n", "bogus = 1\n", "[dataset]\nkind = \"imagenet\"\n", "preset = \"huge\"\n"] {
        let err = ExperimentConfig::from_toml(text, Preset::Desk, None).unwrap_err();
        assert!(matches!(err, CliError::Config(_)), "{text}: {err}");
        assert_eq!(err.exit_code(), 2);
    }
}

#[test]
fn forced_preset_wins_over_file() {
    let cfg = ExperimentConfig::from_toml("preset = \"paper\"\n", Preset::Desk, Some(Preset::Desk)).unwrap();
    assert_eq!(cfg.preset, Preset::Desk);
    let cfg = ExperimentConfig::from_toml("preset = \"paper\"\n", Preset::Desk, None).unwrap();
    assert_eq!(cfg.preset, Preset::Paper);
}

#[test]
fn validation_lists_every_problem() {
    let mut cfg = ExperimentConfig::preset(Preset::Desk);
    cfg.jobs = 0;
    cfg.train.learning_rate = -1.0;
    cfg.dataset.test_fraction = 1.5;
    cfg.tasks = vec![TaskSet::all(), TaskSet::all()];
    let CliError::Config(msg) = cfg.validate().unwrap_err() else { panic!("expected a config error") };
    for needle in ["jobs", "train", "test_fraction", "twice"] {
        assert!(msg.contains(needle), "{needle} missing from {msg}");
    }
}

#[test]
fn job_hash_tracks_result_relevant_fields() {
    let cfg = ExperimentConfig::preset(Preset::Desk);
    let ts: TaskSet = "2d+seg".parse().unwrap();
    let h = cfg.job(ts).hash();
    assert_eq!(h.len(), 64);
    assert_eq!(h, cfg.job("seg+2d".parse().unwrap()).hash());

    let mut other = cfg.clone();
    other.out = "elsewhere".into();
    other.jobs = 4;
    assert_eq!(other.job(ts).hash(), h, "output location and parallelism do not change results");

    let changes: Vec<Box<dyn Fn(&mut ExperimentConfig)>> = vec![
        Box::new(|c| c.seed = 1),
        Box::new(|c| c.train.learning_rate *= 2.0),
        Box::new(|c| c.model.features = 32),
        Box::new(|c| c.dataset.train_samples = 10),
        Box::new(|c| c.report.include_background = !c.report.include_background),
    ];
    for change in changes {
        let mut c = cfg.clone();
        change(&mut c);
        assert_ne!(c.job(ts).hash(), h);
    }
    assert_ne!(cfg.job(TaskSet::all()).hash(), h);
}

#[test]
fn flags_override_file_and_preset() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    std::fs::write(&path, "seed = 5\ntasks = [\"2d\"]\n[dataset]\ntrain_samples = 40\n").unwrap();
    let args = ExperimentArgs { config: Some(path.clone()), ..Default::default() };
    let cfg = args.resolve().unwrap();
    assert_eq!((cfg.seed, cfg.dataset.train_samples), (5, 40));
    assert_eq!(cfg.tasks, vec![TaskSet::single(hgmt_core::TaskKind::Pose2D)]);

    let args = ExperimentArgs { config: Some(path), seed: Some(9), tasks: Some("seg+2d, depth".into()), ..Default::default() };
    let cfg = args.resolve().unwrap();
    assert_eq!(cfg.seed, 9);
    assert_eq!(cfg.tasks, vec!["2d+seg".parse().unwrap(), "depth".parse().unwrap()]);

    let bad = ExperimentArgs { tasks: Some("2d+pose".into()), ..Default::default() };
    assert_eq!(bad.resolve().unwrap_err().exit_code(), 2);
    let missing = ExperimentArgs { config: Some(dir.path().join("absent.toml")), ..Default::default() };
    assert_eq!(missing.resolve().unwrap_err().exit_code(), 2);
}

#[test]
fn dataset_flag_selects_source() {
    let args = ExperimentArgs { dataset: Some("/data/frames".into()), ..Default::default() };
    let cfg = args.resolve().unwrap();
    assert_eq!(cfg.dataset.kind, DatasetKind::SurrealFormat);
    assert_eq!(cfg.dataset.root.as_deref(), Some(std::path::Path::new("/data/frames")));
    let args = ExperimentArgs { preset: Some(Preset::Paper), dataset: Some("synthetic".into()), ..Default::default() };
    let cfg = args.resolve().unwrap();
    assert_eq!(cfg.dataset.kind, DatasetKind::Synthetic);
    assert_eq!(cfg.dataset.synthetic.image_size, 256);
}

#[test]
fn toml_round_trip() {
    let cfg = ExperimentConfig::preset(Preset::Desk);
    let back = ExperimentConfig::from_toml(&cfg.to_toml(), Preset::Paper, None).unwrap();
    assert_eq!(back.job(TaskSet::all()).hash(), cfg.job(TaskSet::all()).hash());
}
