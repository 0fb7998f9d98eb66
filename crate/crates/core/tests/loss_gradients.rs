use hgmt_core::losses::{heatmap_rmse, heatmap_rmse_with_grad, spatial_cross_entropy, spatial_cross_entropy_with_grad};
use ndarray::{Array4, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SHAPES: [(usize, usize, usize, usize); 3] = [(1, 3, 4, 4), (2, 3, 3, 3), (1, 2, 4, 3)];

fn random(rng: &mut ChaCha8Rng, shape: (usize, usize, usize, usize)) -> Array4<f64> {
    Array4::from_shape_fn(shape, |_| rng.gen_range(-1.0..1.0))
}

fn one_hot(rng: &mut ChaCha8Rng, shape: (usize, usize, usize, usize)) -> Array4<f64> {
    let (n, c, h, w) = shape;
    let mut t = Array4::zeros(shape);
    for b in 0..n {
        for r in 0..h {
            for col in 0..w {
                t[[b, rng.gen_range(0..c), r, col]] = 1.0;
            }
        }
    }
    t
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

fn central_difference(x: &Array4<f64>, f: impl Fn(&Array4<f64>) -> f64) -> Array4<f64> {
    let h = 1e-6;
    let mut g = Array4::zeros(x.dim());
    let mut probe = x.clone();
    for (idx, out) in g.indexed_iter_mut() {
        let v = x[idx];
        probe[idx] = v + h;
        let up = f(&probe);
        probe[idx] = v - h;
        let down = f(&probe);
        probe[idx] = v;
        *out = (up - down) / (2.0 * h);
    }
    g
}

#[test]
fn rmse_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for shape in SHAPES {
        for _ in 0..20 {
            let pred = random(&mut rng, shape);
            let target = random(&mut rng, shape);
            let (_, g) = heatmap_rmse_with_grad(pred.view(), target.view(), true).unwrap();
            let fd = central_difference(&pred, |p| heatmap_rmse(p.view(), target.view()).unwrap());
            for (a, n) in g.unwrap().iter().zip(fd.iter()) {
                assert!(rel_err(*a, *n) <= 1e-4, "analytic {a} numeric {n}");
            }
        }
    }
}

#[test]
fn cross_entropy_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for shape in SHAPES {
        for trial in 0..20 {
            let logits = random(&mut rng, shape).mapv(|v| 3.0 * v);
            let target = one_hot(&mut rng, shape);
            let weights: Option<Vec<f64>> = (trial % 2 == 1).then(|| (0..shape.1).map(|_| rng.gen_range(0.5..2.0)).collect());
            let w = weights.as_deref();
            let (_, g) = spatial_cross_entropy_with_grad(logits.view(), target.view(), w, true).unwrap();
            let fd = central_difference(&logits, |l| spatial_cross_entropy(l.view(), target.view(), w).unwrap());
            for (a, n) in g.unwrap().iter().zip(fd.iter()) {
                assert!(rel_err(*a, *n) <= 1e-4, "analytic {a} numeric {n}");
            }
        }
    }
}

#[test]
fn rmse_zero_point_has_zero_subgradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let x = random(&mut rng, (1, 3, 4, 4));
    let (v, g) = heatmap_rmse_with_grad(x.view(), x.view(), true).unwrap();
    assert_eq!(v, 0.0);
    assert!(g.unwrap().iter().all(|g| *g == 0.0));
}

#[test]
fn losses_are_non_negative_and_permutation_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for _ in 0..200 {
        let shape = (3, 4, 3, 3);
        let pred = random(&mut rng, shape);
        let target = random(&mut rng, shape);
        let labels = one_hot(&mut rng, shape);
        let rmse = heatmap_rmse(pred.view(), target.view()).unwrap();
        let ce = spatial_cross_entropy(pred.view(), labels.view(), None).unwrap();
        assert!(rmse >= 0.0 && ce >= 0.0);

        let order = [2usize, 0, 1];
        let perm = |a: &Array4<f64>| a.select(Axis(0), &order);
        let rmse_p = heatmap_rmse(perm(&pred).view(), perm(&target).view()).unwrap();
        let ce_p = spatial_cross_entropy(perm(&pred).view(), perm(&labels).view(), None).unwrap();
        assert!((rmse - rmse_p).abs() <= 1e-12 * rmse.max(1.0));
        assert!((ce - ce_p).abs() <= 1e-12 * ce.max(1.0));
    }
}

#[test]
fn cross_entropy_of_uniform_logits_is_log_classes() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    for c in [2usize, 15, 20] {
        let logits = Array4::<f64>::zeros((2, c, 3, 3));
        let labels = one_hot(&mut rng, (2, c, 3, 3));
        let ce = spatial_cross_entropy(logits.view(), labels.view(), None).unwrap();
        assert!((ce - (c as f64).ln()).abs() < 1e-12);
    }
}
