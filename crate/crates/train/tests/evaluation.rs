mod common;

use hgmt_core::codecs::{stride, HeatmapParams};
use hgmt_core::metrics::Pose3dJoints;
use hgmt_core::targets::{encode_sample, fit_quantizers, QuantizerPolicy, TargetConfig, TaskTensors};
use hgmt_core::{TaskKind, TaskSet};
use hgmt_nn::MultiTaskModel;
use hgmt_train::{evaluate, evaluate_predictions, EvalOptions, Error};

const MARGIN: f32 = 50.0;

#[test]
fn oracle_predictions_score_perfectly() {
    let samples = common::samples(12, 256, 21);
    let cfg = TargetConfig { resolution: 64, bins: 19, heatmap: HeatmapParams::default(), quantizer: QuantizerPolicy::PerSample };
    let tasks = TaskSet::all();
    let preds: Vec<TaskTensors> = samples
        .iter()
        .map(|s| {
            let bundle = encode_sample(s, tasks, &cfg).unwrap();
            let mut t = TaskTensors::default();
            for task in tasks.tasks() {
                t.set(task, bundle.get(task).unwrap().mapv(|v| v * MARGIN));
            }
            t
        })
        .collect();
    let ev = evaluate_predictions(&samples, &preds, tasks, &cfg, Pose3dJoints::WithoutPelvis).unwrap();
    let report = ev.report;

    let pose2d = report.pose2d.unwrap();
    assert_eq!(pose2d.mean, Some(100.0));
    assert!(pose2d.per_joint.iter().flatten().all(|v| *v == 100.0));

    let seg = report.segmentation.unwrap();
    assert!(seg.per_part.iter().flatten().all(|v| *v == 100.0), "{:?}", seg.per_part);
    assert_eq!(seg.mean_with_background, Some(100.0));

    let depth = report.depth.unwrap();
    assert_eq!(depth.mean_full_body, Some(0.0));
    assert!(depth.per_part.iter().flatten().all(|v| *v == 0.0));

    let st = stride(256, 64).unwrap() as f64;
    let mut bounds = Vec::new();
    for s in &samples {
        let (_, q) = fit_quantizers(s, 19, QuantizerPolicy::PerSample).unwrap();
        let (half_bin, k) = (q.bin_width() / 2.0, s.intrinsics);
        for j in Pose3dJoints::WithoutPelvis.joints() {
            let p = s.joints3d[j.index()];
            let [u, v] = k.project(p);
            let z = p[2] + half_bin;
            let ex = (st / 2.0 * z + (u - k.cx).abs() * half_bin) / k.fx;
            let ey = (st / 2.0 * z + (v - k.cy).abs() * half_bin) / k.fy;
            bounds.push((ex * ex + ey * ey + half_bin * half_bin).sqrt());
        }
    }
    let bound = bounds.iter().sum::<f64>() / bounds.len() as f64;
    let mjd = report.pose3d.unwrap().mean.unwrap();
    assert!(mjd <= bound, "MJD {mjd} exceeds quantization bound {bound}");
}

#[test]
fn untrained_model_favours_background() {
    let samples = common::samples(10, 64, 5);
    let model = MultiTaskModel::<f32>::new("seg".parse().unwrap(), common::tiny(), 0).unwrap();
    let ev = evaluate(&model, &samples, &EvalOptions::default()).unwrap();
    let seg = ev.report.segmentation.unwrap();
    let bg = seg.per_part[0].unwrap();
    for (p, v) in seg.per_part.iter().enumerate().skip(1) {
        if let Some(v) = v {
            assert!(bg > *v, "background {bg} vs part {p} {v}");
        }
    }
}

#[test]
fn evaluation_is_deterministic_and_task_conditional() {
    let samples = common::samples(7, 64, 6);
    let model = MultiTaskModel::<f32>::new("2d+seg+depth".parse().unwrap(), common::tiny(), 3).unwrap();
    let opts = EvalOptions { batch_size: 3, ..Default::default() };
    let a = evaluate(&model, &samples, &opts).unwrap();
    let b = evaluate(&model, &samples, &opts).unwrap();
    assert_eq!(a.report.to_csv(), b.report.to_csv());
    assert_eq!(a, b);
    assert_eq!(a.report.samples, 7);
    assert!(a.report.pose2d.is_some() && a.report.segmentation.is_some() && a.report.depth.is_some());
    assert!(a.report.pose3d.is_none());
    let c = evaluate(&model, &samples, &EvalOptions { batch_size: 7, ..Default::default() }).unwrap();
    assert_eq!(a.report.to_csv(), c.report.to_csv());
}

#[test]
fn empty_test_stream_is_an_error() {
    let model = MultiTaskModel::<f32>::new(TaskSet::single(TaskKind::Pose2D), common::tiny(), 0).unwrap();
    assert!(matches!(evaluate(&model, &[], &EvalOptions::default()), Err(Error::EmptyData(_))));
}

#[test]
fn wrong_input_size_is_an_error() {
    let samples = common::samples(1, 128, 0);
    let model = MultiTaskModel::<f32>::new(TaskSet::single(TaskKind::Pose2D), common::tiny(), 0).unwrap();
    assert!(matches!(
        evaluate(&model, &samples, &EvalOptions::default()),
        Err(Error::InputSize { expected: 64, actual: 128, .. })
    ));
}
