use hgmt_core::{Joint, Part};
use hgmt_data::{
    generate_figure, generate_synthetic, validate_all, Anchor, BackgroundMode, SyntheticFigureParams,
    ValidationOptions,
};

fn params(size: usize, seed: u64) -> SyntheticFigureParams {
    SyntheticFigureParams { image_size: size, seed, ..Default::default() }
}

#[test]
fn same_seed_gives_bit_identical_samples() {
    let a = generate_synthetic(&params(64, 5), 8).unwrap();
    let b = generate_synthetic(&params(64, 5), 8).unwrap();
    assert_eq!(a, b);
    let c = generate_synthetic(&params(64, 6), 8).unwrap();
    assert_ne!(a, c);
    // frames do not depend on which other frames were generated
    assert_eq!(generate_figure(&params(64, 5), 6).unwrap().sample, a[6]);
}

#[test]
fn joints2d_are_pinhole_projections() {
    for i in 0..200 {
        let s = generate_figure(&params(64, 11), i).unwrap().sample;
        let k = s.intrinsics;
        for j in 0..16 {
            let [x, y, z] = s.joints3d[j];
            let u = k.fx * x / z + k.cx;
            let v = k.fy * y / z + k.cy;
            assert!((u - s.joints2d[j][0]).abs() <= 1e-6 && (v - s.joints2d[j][1]).abs() <= 1e-6, "frame {i} joint {j}");
        }
    }
}

#[test]
fn foreground_depth_lies_between_owning_limb_endpoints() {
    for i in 0..100 {
        let fig = generate_figure(&params(64, 2), i).unwrap();
        let s = &fig.sample;
        for ((idx, &label), &d) in s.part_mask.indexed_iter().zip(s.depth.iter()) {
            let owner = fig.owner[idx];
            if label == 0 {
                assert_eq!(owner, u8::MAX);
                assert_eq!(d, f32::INFINITY);
                continue;
            }
            let limb = &fig.limbs[owner as usize];
            assert_eq!(limb.part.index(), label as usize);
            let (lo, hi) = limb.depth_bounds();
            assert!(d >= lo && d <= hi, "frame {i} pixel {idx:?}: {d} outside [{lo}, {hi}]");
        }
    }
}

#[test]
fn limbs_attach_to_the_kinematic_tree() {
    let fig = generate_figure(&params(64, 0), 0).unwrap();
    assert_eq!(fig.limbs.len(), 14);
    let parts: Vec<Part> = fig.limbs.iter().map(|l| l.part).collect();
    assert_eq!(parts, Part::ALL[1..].to_vec());
    for limb in &fig.limbs {
        for (anchor, end) in [(limb.from, limb.endpoints[0]), (limb.to, limb.endpoints[1])] {
            if let Anchor::Joint(j) = anchor {
                assert_eq!(end, fig.sample.joints3d[j.index()]);
            }
        }
    }
    let tree = [
        (Part::UpperRightArm, Joint::RightShoulder, Joint::RightElbow),
        (Part::LowerRightArm, Joint::RightElbow, Joint::RightWrist),
        (Part::LowerLeftLeg, Joint::LeftKnee, Joint::LeftAnkle),
    ];
    for (part, a, b) in tree {
        let limb = fig.limbs.iter().find(|l| l.part == part).unwrap();
        assert_eq!((limb.from, limb.to), (Anchor::Joint(a), Anchor::Joint(b)));
    }
}

#[test]
fn generated_data_is_modally_consistent() {
    for mode in [BackgroundMode::Flat, BackgroundMode::Gradient, BackgroundMode::Noise] {
        let p = SyntheticFigureParams { background: mode, ..params(64, 21) };
        let samples = generate_synthetic(&p, 300).unwrap();
        let report = validate_all(&samples, &ValidationOptions::default());
        assert_eq!(report.samples, 300);
        assert!(report.is_clean(), "{:?}", &report.violations[..report.violations.len().min(5)]);
        assert!(samples.iter().all(|s| s.image.iter().all(|v| (0.0..=1.0).contains(v))));
    }
}

#[test]
fn validation_flags_broken_samples() {
    let mut s = generate_figure(&params(64, 1), 0).unwrap().sample;
    let bg = s.part_mask.iter().position(|l| *l == 0).unwrap();
    let (r, c) = (bg / 64, bg % 64);
    s.depth[[r, c]] = 4000.0;
    s.joints2d[3][0] += 0.75;
    s.joints3d[9][2] += 5000.0;
    let report = validate_all([&s], &ValidationOptions::default());
    assert_eq!(report.counts()[..3], [1, 2, 1]);
}
