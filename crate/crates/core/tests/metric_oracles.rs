use hgmt_core::metrics::{
    depth_rmse, head_length, iou_per_class, mjd, pckh, success_rate_curve, DepthFrame, FrameRecord, MetricsAccumulator,
    MetricsReport, Pose3dJoints,
};
use hgmt_core::{Joint, TaskSet};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_map(rng: &mut ChaCha8Rng, classes: u8) -> (Array2<u8>, Array2<u8>) {
    let (h, w) = (rng.gen_range(1..=8), rng.gen_range(1..=8));
    let a = Array2::from_shape_fn((h, w), |_| rng.gen_range(0..classes));
    let b = Array2::from_shape_fn((h, w), |_| rng.gen_range(0..classes));
    (a, b)
}

#[test]
fn iou_matches_pixel_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..1000 {
        let classes = rng.gen_range(2..=6u8);
        let (pred, gt) = random_map(&mut rng, classes);
        let iou = iou_per_class(pred.view(), gt.view(), classes as usize).unwrap();
        for k in 0..classes {
            let mut inter = 0u32;
            let mut union = 0u32;
            for (p, g) in pred.iter().zip(gt.iter()) {
                if *p == k && *g == k {
                    inter += 1;
                }
                if *p == k || *g == k {
                    union += 1;
                }
            }
            let expected = (union > 0).then(|| 100.0 * inter as f64 / union as f64);
            assert_eq!(iou[k as usize], expected);
        }
        let swapped = iou_per_class(gt.view(), pred.view(), classes as usize).unwrap();
        assert_eq!(iou, swapped);
    }
}

#[test]
fn depth_rmse_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for _ in 0..1000 {
        let (pred, gt) = random_map(&mut rng, 20);
        let region = pred.mapv(|_| rng.gen_bool(0.5));
        let mut sum = 0.0;
        let mut n = 0;
        for ((p, g), r) in pred.iter().zip(gt.iter()).zip(region.iter()) {
            if *r {
                sum += (*p as f64 - *g as f64).powi(2);
                n += 1;
            }
        }
        let got = depth_rmse(pred.view(), gt.view(), Some(region.view()));
        if n == 0 {
            assert!(got.is_err());
        } else {
            assert_eq!(got.unwrap(), (sum / n as f64).sqrt());
        }
    }
}

#[test]
fn success_curve_matches_count_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for _ in 0..1000 {
        let errors: Vec<f64> = (0..rng.gen_range(1..64)).map(|_| (rng.gen_range(0..40) as f64) / 4.0).collect();
        let thresholds: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let curve = success_rate_curve(&errors, &thresholds);
        for (t, v) in thresholds.iter().zip(&curve) {
            let below = errors.iter().filter(|e| **e < *t).count();
            assert_eq!(*v, 100.0 * below as f64 / errors.len() as f64);
        }
        assert!(curve.windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn pckh_threshold_is_inclusive_at_half_head_length() {
    let mut gt = [[0.0f64; 2]; 16];
    for (i, p) in gt.iter_mut().enumerate() {
        *p = [10.0 * i as f64, 40.0];
    }
    gt[Joint::UpperNeck.index()] = [64.0, 64.0];
    gt[Joint::HeadTop.index()] = [64.0, 32.0];
    let head = head_length(&gt);
    assert_eq!(head, 32.0);
    let mut pred = gt;
    pred[0][0] += 16.0;
    pred[1] = [gt[1][0] + 16.0 * 0.6, gt[1][1] + 16.0 * 0.8];
    pred[2][1] += 16.0 + 1e-9;
    let ok = pckh(&pred, &gt, head, 0.5).unwrap();
    assert!(ok[0]);
    assert!(ok[1]);
    assert!(!ok[2]);
}

#[test]
fn pckh_and_mjd_use_ground_truth_scale() {
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    let a: Vec<[f64; 3]> = (0..16).map(|_| [rng.gen_range(-500.0..500.0), rng.gen_range(-500.0..500.0), rng.gen_range(2000.0..4000.0)]).collect();
    let b: Vec<[f64; 3]> = a.iter().map(|p| [p[0] + 3.0, p[1] - 4.0, p[2]]).collect();
    assert_eq!(mjd(&a, &b, &Joint::ALL), mjd(&b, &a, &Joint::ALL));
    assert!(mjd(&a, &b, &Joint::ALL).iter().all(|d| (d - 5.0).abs() < 1e-9));

    // PCKh is asymmetric: the head length always comes from the ground truth
    let mut gt = [[50.0f64, 50.0]; 16];
    gt[Joint::HeadTop.index()] = [50.0, 30.0];
    let mut pred = gt;
    pred[Joint::HeadTop.index()] = [50.0, 0.0];
    pred[0] = [65.0, 50.0];
    let fwd = pckh(&pred, &gt, head_length(&gt), 0.5).unwrap();
    let rev = pckh(&gt, &pred, head_length(&pred), 0.5).unwrap();
    assert!(!fwd[0]);
    assert!(rev[0]);
}

fn random_record(rng: &mut ChaCha8Rng, key: u64) -> FrameRecord {
    let seg = (0..15)
        .map(|_| {
            let i = rng.gen_range(0..50u64);
            (i, i + rng.gen_range(0..50u64))
        })
        .collect();
    let pose2d = (0..16).map(|_| rng.gen_bool(0.9).then(|| (rng.gen_bool(0.8), rng.gen_range(0.0..1.0)))).collect();
    let depth = DepthFrame {
        per_part: (0..15).map(|_| rng.gen_bool(0.8).then(|| rng.gen_range(0.0..8.0))).collect(),
        full: rng.gen_range(0.0..8.0),
    };
    let pose3d = (0..16).map(|_| rng.gen_bool(0.9).then(|| rng.gen_range(0.0..200.0))).collect();
    FrameRecord { key, seg: Some(seg), pose2d: Some(pose2d), depth: Some(depth), pose3d: Some(pose3d) }
}

#[test]
fn accumulator_merge_is_order_independent() {
    let mut rng = ChaCha8Rng::seed_from_u64(35);
    let tasks = TaskSet::all();
    let records: Vec<FrameRecord> = (0..60).map(|k| random_record(&mut rng, k)).collect();
    let build = |recs: &[FrameRecord]| {
        let mut acc = MetricsAccumulator::new(tasks, Pose3dJoints::default());
        for r in recs {
            acc.add(r.clone());
        }
        acc
    };
    let whole = build(&records).finalize();
    let (a, rest) = records.split_at(17);
    let (b, c) = rest.split_at(25);
    let left = build(a).merge(build(b)).merge(build(c)).finalize();
    let right = build(a).merge(build(b).merge(build(c))).finalize();
    let swapped = build(c).merge(build(a)).merge(build(b)).finalize();
    assert_eq!(whole, left);
    assert_eq!(whole, right);
    assert_eq!(whole, swapped);

    let mut reversed = records.clone();
    reversed.reverse();
    assert_eq!(build(&reversed).finalize(), whole);
}

#[test]
fn report_csv_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(36);
    for ts in TaskSet::enumerate() {
        let mut acc = MetricsAccumulator::new(ts, Pose3dJoints::default());
        for k in 0..10 {
            acc.add(random_record(&mut rng, k));
        }
        let report = acc.finalize();
        let back = MetricsReport::from_csv(&report.to_csv()).unwrap();
        assert_eq!(back, report);
        assert_eq!(back.to_csv(), report.to_csv());
    }
}
