mod common;

use common::{images, micro, targets};
use hgmt_core::{TaskKind, TaskSet};
use hgmt_nn::{stack_prefix, task_loss, total_loss, BatchTargets, LossOptions, MultiTaskModel};
use ndarray::Array4;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn objective(model: &MultiTaskModel<f64>, x: &Array4<f64>, t: &BatchTargets<f64>) -> f64 {
    let out = model.forward(x.view()).unwrap();
    total_loss(&out, t, &LossOptions::default(), false).unwrap().0.total
}

/// Central difference of `f` along `dir` around the current parameters.
fn directional(model: &mut MultiTaskModel<f64>, dir: &[Vec<f64>], h: f64, f: &dyn Fn(&MultiTaskModel<f64>) -> f64) -> f64 {
    let ids: Vec<_> = model.params().ids().collect();
    let shift = |model: &mut MultiTaskModel<f64>, step: f64| {
        for (id, d) in ids.iter().zip(dir) {
            for (v, dv) in model.params_mut().get_mut(*id).iter_mut().zip(d) {
                *v += step * dv;
            }
        }
    };
    let orig: Vec<_> = ids.iter().map(|id| model.params().get(*id).clone()).collect();
    shift(model, h);
    let up = f(model);
    for (id, o) in ids.iter().zip(&orig) {
        *model.params_mut().get_mut(*id) = o.clone();
    }
    shift(model, -h);
    let down = f(model);
    for (id, o) in ids.iter().zip(orig) {
        *model.params_mut().get_mut(*id) = o;
    }
    (up - down) / (2.0 * h)
}

// ReLU and max-pool kinks sit densely around any parameter point, so the
// step must stay small (1e-7); the absolute floor is the roundoff of a
// central difference at that step.
const H: f64 = 1e-7;

#[test]
fn network_gradient_matches_finite_differences() {
    let cfg = micro();
    let tasks = TaskSet::all();
    let mut model = MultiTaskModel::<f64>::new(tasks, cfg, 12).unwrap();
    let x = images::<f64>(2, cfg.input_size, 1);
    let t = targets::<f64>(tasks, &cfg, 2, 2);
    let out = model.forward(x.view()).unwrap();
    let (report, seeds) = total_loss(&out, &t, &LossOptions::default(), true).unwrap();
    let grads = out.backward(seeds).unwrap();
    drop(out);
    let floor = 16.0 * f64::EPSILON * report.total / H;

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let ids: Vec<_> = model.params().ids().collect();
    let mut checked = 0;
    for id in &ids {
        let name = model.params().name(*id).to_string();
        let n = model.params().get(*id).len();
        let flat = rng.gen_range(0..n);
        let analytic = grads.get(*id).as_slice().unwrap()[flat];
        let orig = model.params().get(*id).as_slice().unwrap()[flat];
        model.params_mut().get_mut(*id).as_slice_mut().unwrap()[flat] = orig + H;
        let up = objective(&model, &x, &t);
        model.params_mut().get_mut(*id).as_slice_mut().unwrap()[flat] = orig - H;
        let down = objective(&model, &x, &t);
        model.params_mut().get_mut(*id).as_slice_mut().unwrap()[flat] = orig;
        let numeric = (up - down) / (2.0 * H);
        let err = (analytic - numeric).abs();
        assert!(err <= 1e-4 * analytic.abs().max(numeric.abs()) + floor, "{name}[{flat}]: analytic {analytic:e} numeric {numeric:e}");
        if analytic.abs() > 1e3 * floor {
            checked += 1;
        }
    }
    assert!(checked >= 50, "only {checked} of {} entries well above the roundoff floor", ids.len());

    // one random unit direction through every parameter at once
    let mut dir: Vec<Vec<f64>> = ids.iter().map(|id| (0..model.params().get(*id).len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let norm = dir.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
    dir.iter_mut().flatten().for_each(|v| *v /= norm);
    let analytic: f64 = ids.iter().zip(&dir).map(|(id, d)| grads.get(*id).iter().zip(d).map(|(g, v)| g * v).sum::<f64>()).sum();
    let numeric = directional(&mut model, &dir, H, &|m| objective(m, &x, &t));
    assert!((analytic - numeric).abs() <= 1e-4 * analytic.abs(), "directional: {analytic} vs {numeric}");
}

fn stack2_loss(model: &MultiTaskModel<f64>, x: &Array4<f64>, t: &BatchTargets<f64>, task: TaskKind) -> f64 {
    let out = model.forward(x.view()).unwrap();
    task_loss(task, out.prediction(2, task).unwrap(), t.get(task).unwrap(), None, false).unwrap().0
}

#[test]
fn fusion_carries_gradient_between_streams() {
    let cfg = micro();
    let x = images::<f64>(1, cfg.input_size, 5);
    let pairs: Vec<TaskSet> = TaskSet::enumerate().into_iter().filter(|t| t.len() == 2).collect();
    assert_eq!(pairs.len(), 6);
    for ts in pairs {
        let mut model = MultiTaskModel::<f64>::new(ts, cfg, 31).unwrap();
        let t = targets::<f64>(ts, &cfg, 1, 6);
        for (a, b) in [(ts.tasks()[0], ts.tasks()[1]), (ts.tasks()[1], ts.tasks()[0])] {
            let out = model.forward(x.view()).unwrap();
            let node = out.node(2, a).unwrap();
            let (_, g) = task_loss(a, out.prediction(2, a).unwrap(), t.get(a).unwrap(), None, true).unwrap();
            let grads = out.backward(vec![(node, g.unwrap())]).unwrap();
            drop(out);

            let prefix = format!("{}/hg/", stack_prefix(b, 1));
            let probe: Vec<_> = model.params().iter().filter(|(_, n, _)| n.starts_with(&prefix)).map(|(id, _, _)| id).collect();
            assert!(!probe.is_empty());
            let total: f64 = probe.iter().map(|id| grads.norm(*id).powi(2)).sum();
            assert!(total > 0.0, "{ts}: no gradient from {a} into {b}");

            // confirm numerically on the largest-gradient entry
            let (id, flat) = probe
                .iter()
                .flat_map(|id| grads.get(*id).iter().enumerate().map(move |(i, v)| (*id, i, v.abs())))
                .max_by(|p, q| p.2.total_cmp(&q.2))
                .map(|(id, i, _)| (id, i))
                .unwrap();
            let analytic = grads.get(id).as_slice().unwrap()[flat];
            let h = 1e-6;
            let orig = model.params().get(id).as_slice().unwrap()[flat];
            model.params_mut().get_mut(id).as_slice_mut().unwrap()[flat] = orig + h;
            let up = stack2_loss(&model, &x, &t, a);
            model.params_mut().get_mut(id).as_slice_mut().unwrap()[flat] = orig - h;
            let down = stack2_loss(&model, &x, &t, a);
            model.params_mut().get_mut(id).as_slice_mut().unwrap()[flat] = orig;
            let numeric = (up - down) / (2.0 * h);
            assert!(numeric != 0.0);
            assert!((analytic - numeric).abs() <= 1e-4 * analytic.abs().max(numeric.abs()), "{analytic} vs {numeric}");
        }
    }
}

#[test]
fn single_task_streams_are_isolated_from_absent_tasks() {
    let cfg = micro();
    let ts = TaskSet::single(TaskKind::Pose2D);
    let model = MultiTaskModel::<f64>::new(ts, cfg, 2).unwrap();
    let x = images::<f64>(1, cfg.input_size, 5);
    let out = model.forward(x.view()).unwrap();
    let t = targets::<f64>(ts, &cfg, 1, 6);
    let (report, seeds) = total_loss(&out, &t, &LossOptions::default(), true).unwrap();
    assert!(report.term(1, TaskKind::PartSeg).is_none());
    let grads = out.backward(seeds).unwrap();
    assert!(grads.all_finite());
    // the last head's remaps do not exist; the first stack's do and receive gradient
    let id = model.params().id(&format!("{}/remap_pred/weight", stack_prefix(TaskKind::Pose2D, 1))).unwrap();
    assert!(grads.norm(id) > 0.0);
    assert!(model.params().id(&format!("{}/remap_pred/weight", stack_prefix(TaskKind::Pose2D, 2))).is_none());
}
