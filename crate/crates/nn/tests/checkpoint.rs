mod common;

use common::images;
use hgmt_core::{TaskKind, TaskSet};
use hgmt_nn::{Archive, Error, HourglassConfig, MultiTaskModel};

fn perturbed(ts: &str) -> MultiTaskModel<f32> {
    let mut m = MultiTaskModel::<f32>::new(ts.parse().unwrap(), HourglassConfig::tiny(), 77).unwrap();
    let ids: Vec<_> = m.params().ids().collect();
    for (i, id) in ids.into_iter().enumerate() {
        m.params_mut().get_mut(id).mapv_inplace(|v| v + 0.001 * i as f32);
    }
    m
}

#[test]
fn save_load_save_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let model = perturbed("2d+seg+3d");
    let a = dir.path().join("a.ckpt");
    let b = dir.path().join("b.ckpt");
    model.save(&a).unwrap();
    let loaded = MultiTaskModel::<f32>::load(&a, Some(model.tasks())).unwrap();
    loaded.save(&b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(loaded.params(), model.params());

    let x = images::<f32>(1, 64, 3);
    let p = model.forward(x.view()).unwrap().output(TaskKind::Pose3D).unwrap().clone();
    let q = loaded.forward(x.view()).unwrap().output(TaskKind::Pose3D).unwrap().clone();
    assert_eq!(p, q);
}

#[test]
fn parameter_names_follow_stream_layout() {
    let model = perturbed("2d+depth");
    let names: Vec<&str> = model.params().iter().map(|(_, n, _)| n).collect();
    assert!(names.iter().all(|n| n.starts_with("stem/") || n.starts_with("stream/") || n.starts_with("fusion1/")));
    assert!(names.contains(&"stream/2d/stack2/head/weight"));
    assert!(names.contains(&"stream/depth/stack1/hg/l2/up1/conv2/weight"));
    assert!(names.contains(&"fusion1/depth/compress/skip/weight"));
    // shared components keep their names across task sets
    let single = perturbed("2d");
    for (_, name, _) in single.params().iter() {
        assert!(model.params().id(name).is_some(), "{name}");
    }
}

#[test]
fn task_set_mismatch_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    perturbed("2d+seg").save(&path).unwrap();
    let err = MultiTaskModel::<f32>::load(&path, Some(TaskSet::single(TaskKind::Pose2D))).unwrap_err();
    assert!(matches!(err, Error::TaskMismatch { .. }), "{err}");
    assert!(MultiTaskModel::<f32>::load(&path, None).is_ok());
}

#[test]
fn corrupt_archives_are_rejected() {
    let model = perturbed("seg");
    let bytes = model.to_archive().to_bytes().unwrap();
    assert!(Archive::<f32>::from_bytes(&bytes[..bytes.len() - 3]).is_err());
    assert!(Archive::<f32>::from_bytes(b"not a checkpoint at all").is_err());
    let mut wrong_version = bytes.clone();
    wrong_version[8] = 9;
    assert!(Archive::<f32>::from_bytes(&wrong_version).is_err());
    assert!(Archive::<f64>::from_bytes(&bytes).is_err());
    let mut extra = bytes;
    extra.push(0);
    assert!(Archive::<f32>::from_bytes(&extra).is_err());
}

#[test]
fn archives_carry_extra_tensors() {
    let model = perturbed("2d");
    let mut archive = model.to_archive();
    archive.push("rmsprop/stem/conv/weight", model.params().by_name("stem/conv/weight").unwrap().mapv(|v| v * v));
    let back = Archive::<f32>::from_bytes(&archive.to_bytes().unwrap()).unwrap();
    assert_eq!(back, archive);
    let rebuilt = MultiTaskModel::<f32>::from_archive(&back, None).unwrap();
    assert_eq!(rebuilt.params(), model.params());
}
