use hgmt_core::codecs::{
    decode_depth, decode_parts, decode_pose2d, decode_pose3d, encode_depth, encode_parts, encode_pose2d,
    encode_pose3d, DepthQuantizer, HeatmapParams,
};
use hgmt_core::CameraIntrinsics;
use ndarray::{s, Array2, Array3, Axis};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GEOMETRIES: [(usize, usize); 3] = [(256, 64), (128, 32), (64, 16)];

#[test]
fn pose2d_round_trip_within_half_stride() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let params = HeatmapParams::default();
    let mut violations = 0;
    for trial in 0..1000 {
        let (input, r) = GEOMETRIES[trial % GEOMETRIES.len()];
        let half = (input / r) as f64 / 2.0;
        let joints: Vec<[f64; 2]> =
            (0..16).map(|_| [rng.gen_range(0.0..input as f64), rng.gen_range(0.0..input as f64)]).collect();
        let hm = encode_pose2d(&joints, &[true; 16], input, r, &params).unwrap();
        let dec = decode_pose2d(hm.view(), input).unwrap();
        for (p, k) in joints.iter().zip(&dec) {
            if (p[0] - k.xy[0]).abs() > half || (p[1] - k.xy[1]).abs() > half {
                violations += 1;
            }
            assert_eq!(k.confidence, 1.0);
        }
    }
    assert_eq!(violations, 0);
}

#[test]
fn depth_round_trip_within_half_bin() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut violations = 0;
    for trial in 0..1000 {
        let (input, r) = GEOMETRIES[trial % GEOMETRIES.len()];
        let base: f32 = rng.gen_range(1500.0..5000.0);
        let spread: f32 = rng.gen_range(0.0..1500.0);
        let mask = Array2::from_shape_fn((input, input), |_| if rng.gen_bool(0.6) { rng.gen_range(1..15u8) } else { 0 });
        let depth = Array2::from_shape_fn((input, input), |(i, j)| {
            if mask[[i, j]] == 0 {
                f32::INFINITY
            } else {
                base + rng.gen_range(0.0..=1.0f32) * spread
            }
        });
        if mask.iter().all(|l| *l == 0) {
            continue;
        }
        let q = DepthQuantizer::fit(depth.view(), mask.view(), 19).unwrap();
        let half = q.bin_width() / 2.0;
        let enc = encode_depth(depth.view(), mask.view(), &q, r).unwrap();
        let dec = decode_depth(enc.view(), &q).unwrap();
        let st = input / r;
        for ((row, col), &d) in dec.depth_mm.indexed_iter() {
            let (pr, pc) = (row * st + st / 2, col * st + st / 2);
            if mask[[pr, pc]] == 0 {
                assert!(dec.background[[row, col]]);
                continue;
            }
            let err = (d - depth[[pr, pc]] as f64).abs();
            if err > half * (1.0 + 1e-9) {
                violations += 1;
            }
        }
    }
    assert_eq!(violations, 0);
}

#[test]
fn pose3d_round_trip_within_quantization() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let params = HeatmapParams::default();
    let mut violations = 0;
    for trial in 0..500 {
        let (input, r) = GEOMETRIES[trial % GEOMETRIES.len()];
        let st = (input / r) as f64;
        let f = rng.gen_range(0.8..3.0) * input as f64;
        let k = CameraIntrinsics::new(f, f, input as f64 / 2.0, input as f64 / 2.0);
        let root = rng.gen_range(2500.0..6000.0);
        let mut pixels = Vec::new();
        let joints: Vec<[f64; 3]> = (0..16)
            .map(|_| {
                let (u, v) = (rng.gen_range(0.0..input as f64), rng.gen_range(0.0..input as f64));
                pixels.push([u, v]);
                k.back_project(u, v, root + rng.gen_range(-600.0..600.0))
            })
            .collect();
        let (lo, hi) = joints.iter().fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(p[2]), b.max(p[2])));
        let q = DepthQuantizer::from_range(lo, hi, 19).unwrap();
        let vol = encode_pose3d(&joints, &[true; 16], &k, input, r, &q, &params).unwrap();
        assert_eq!(vol.dim(), (19 * 16, r, r));
        let dec = decode_pose3d(vol.view(), &k, input, &q).unwrap();
        for ((p, uv), d) in joints.iter().zip(&pixels).zip(&dec) {
            let proj = k.project(*d);
            if (d[2] - p[2]).abs() > q.bin_width() / 2.0 * (1.0 + 1e-9)
                || (proj[0] - uv[0]).abs() > st / 2.0 + 1e-6
                || (proj[1] - uv[1]).abs() > st / 2.0 + 1e-6
            {
                violations += 1;
            }
        }
    }
    assert_eq!(violations, 0);
}

#[test]
fn parts_round_trip_at_cell_centres() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for trial in 0..1000 {
        let (input, r) = GEOMETRIES[trial % GEOMETRIES.len()];
        let st = input / r;
        let mask = Array2::from_shape_fn((input, input), |_| rng.gen_range(0..15u8));
        let dec = decode_parts(encode_parts(mask.view(), r).unwrap().view());
        let expected = mask.slice(s![st / 2..;st, st / 2..;st]).to_owned();
        assert_eq!(dec, expected);
    }
}

fn channel_sums(t: &Array3<f32>) -> Array2<f32> {
    t.sum_axis(Axis(0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn one_hot_targets_sum_to_one(labels in prop::collection::vec(0u8..15, 16 * 16), depths in prop::collection::vec(500.0f32..4000.0, 16 * 16)) {
        let mask = Array2::from_shape_vec((16, 16), labels).unwrap();
        let depth = Array2::from_shape_vec((16, 16), depths).unwrap();
        let parts = encode_parts(mask.view(), 8).unwrap();
        prop_assert!(channel_sums(&parts).iter().all(|v| *v == 1.0));
        if let Ok(q) = DepthQuantizer::fit(depth.view(), mask.view(), 19) {
            let d = encode_depth(depth.view(), mask.view(), &q, 8).unwrap();
            prop_assert_eq!(d.dim(), (20, 8, 8));
            prop_assert!(channel_sums(&d).iter().all(|v| *v == 1.0));
        }
    }

    #[test]
    fn argmax_is_invariant_under_monotone_maps(ticks in prop::collection::vec(-40i32..40, 15 * 4 * 4), scale in 0u32..4, shift in -8i32..8) {
        // eighths keep every map below exact in f32, so no new ties appear
        let t = Array3::from_shape_vec((15, 4, 4), ticks.iter().map(|v| *v as f32 / 8.0).collect()).unwrap();
        let affine = t.mapv(|v| v * (1u32 << scale) as f32 + shift as f32);
        let odd = t.mapv(|v| v * v.abs());
        prop_assert_eq!(decode_parts(t.view()), decode_parts(affine.view()));
        prop_assert_eq!(decode_parts(t.view()), decode_parts(odd.view()));
    }

    #[test]
    fn heatmaps_translate_with_the_joint(x in 8.0f64..40.0, y in 8.0f64..40.0, dx in 1usize..4, dy in 1usize..4) {
        let params = HeatmapParams::default();
        let (input, r, st) = (64usize, 16usize, 4usize);
        let a = encode_pose2d(&[[x, y]], &[true], input, r, &params).unwrap();
        let shifted = [x + (dx * st) as f64, y + (dy * st) as f64];
        let b = encode_pose2d(&[shifted], &[true], input, r, &params).unwrap();
        for row in 0..r - dy {
            for col in 0..r - dx {
                prop_assert_eq!(a[[0, row, col]], b[[0, row + dy, col + dx]]);
            }
        }
    }
}
