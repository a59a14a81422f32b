use ndarray::{array, s, Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::*;
use crate::align::{standardize, AlignedDataset, Scaler};
use crate::stats::variance;

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((r, c), || rng.sample(StandardNormal))
}

fn random_net(rng: &mut ChaCha8Rng, sizes: &[usize]) -> Network {
    let layers = sizes
        .windows(2)
        .map(|w| Layer {
            w: random_matrix(rng, w[1], w[0]) * 0.5,
            b: Array1::from_shape_simple_fn(w[1], || 0.3 * rng.sample::<f64, _>(StandardNormal)),
        })
        .collect();
    Network::from_layers(layers).unwrap()
}

#[test]
fn xavier_initialization() {
    let net = init_network(31, 11).unwrap();
    assert_eq!(net.sizes(), vec![31, 30, 30, 7]);
    let w: Vec<f64> = net.layers[0].w.iter().copied().collect();
    let expect = (2.0f64 / 61.0).sqrt();
    assert!((expect - 0.1811).abs() < 1e-4);
    let sd = variance(&w, 1).sqrt();
    assert!((sd / expect - 1.0).abs() <= 0.15, "{sd}");
    assert!(net.layers.iter().all(|l| l.b.iter().all(|&b| b == 0.0)));
    assert_eq!(net, init_network(31, 11).unwrap());
    assert_ne!(net, init_network(31, 12).unwrap());
}

#[test]
fn forward_examples() {
    let zero = Network::from_layers(vec![Layer::zeros(3, 4), Layer::zeros(4, 2)]).unwrap();
    let out = zero
        .forward(array![[1.0, -2.0, 3.0], [0.5, 0.5, 0.5]].view())
        .unwrap();
    assert!(out.iter().all(|&v| v == 0.0));

    // h = relu([[1,-1],[0.5,2]]·[2,1] + [0.5,-1]) = relu([1.5, 2]) ; y = [3,-1]·h + 0.25
    let net = Network::from_layers(vec![
        Layer {
            w: array![[1.0, -1.0], [0.5, 2.0]],
            b: array![0.5, -1.0],
        },
        Layer {
            w: array![[3.0, -1.0]],
            b: array![0.25],
        },
    ])
    .unwrap();
    let y = net.forward(array![[2.0, 1.0]].view()).unwrap();
    assert!((y[[0, 0]] - (3.0 * 1.5 - 2.0 + 0.25)).abs() < 1e-12);

    // Every hidden pre-activation negative: only the output bias survives.
    let dead = Network::from_layers(vec![
        Layer {
            w: array![[1.0, 1.0], [2.0, 1.0]],
            b: array![-100.0, -100.0],
        },
        Layer {
            w: array![[5.0, 7.0]],
            b: array![-0.75],
        },
    ])
    .unwrap();
    let y = dead
        .forward(array![[1.0, 2.0], [3.0, -4.0]].view())
        .unwrap();
    assert_eq!(y, array![[-0.75], [-0.75]]);

    assert!(net.forward(array![[1.0, 2.0, 3.0]].view()).is_err());
    assert!(Network::from_layers(vec![Layer::zeros(2, 3), Layer::zeros(2, 1)]).is_err());
}

#[test]
fn huber_examples() {
    assert_eq!(huber(0.5, 1.0), (0.125, 0.5));
    assert_eq!(huber(2.0, 1.0), (1.5, 1.0));
    assert_eq!(huber(-2.0, 1.0), (1.5, -1.0));
    for d in [1.0f64, 0.3, 2.5] {
        for sign in [1.0, -1.0] {
            let e = sign * d;
            let (q, gq) = (0.5 * e * e, e);
            let (l, g) = (d * (e.abs() - 0.5 * d), d * sign);
            assert!((q - l).abs() < 1e-15 && (gq - g).abs() < 1e-15);
            let eps = 1e-9;
            let (a, ga) = huber(e + eps * sign, d);
            let (b, gb) = huber(e - eps * sign, d);
            assert!((a - b).abs() < 1e-8 && (ga - gb).abs() < 1e-8);
        }
    }
    let (loss, grad) = huber_loss_grad(array![[0.5, 2.0]].view(), array![[0.0, 0.0]].view(), 1.0);
    assert!((loss - (0.125 + 1.5) / 2.0).abs() < 1e-15);
    assert_eq!(grad, array![[0.25, 0.5]]);
}

/// Smallest distance of any rectifier input or Huber residual to its kink.
fn kink_margin(net: &Network, x: &Array2<f64>, y: &Array2<f64>, delta: f64) -> f64 {
    let mut margin = f64::INFINITY;
    let mut h = x.clone();
    for (i, l) in net.layers.iter().enumerate() {
        let mut z = h.dot(&l.w.t());
        z += &l.b;
        if i + 1 < net.layers.len() {
            margin = z.iter().fold(margin, |m, v| m.min(v.abs()));
            h = z.mapv(|v| v.max(0.0));
        } else {
            margin = (&z - y)
                .iter()
                .fold(margin, |m, e| m.min((e.abs() - delta).abs()));
        }
    }
    margin
}

fn max_fd_error(net: &Network, x: &Array2<f64>, y: &Array2<f64>, delta: f64) -> f64 {
    let (_, grads) = net.backward(x.view(), y.view(), delta).unwrap();
    let analytic: Vec<f64> = grads
        .iter()
        .flat_map(|l| l.w.iter().chain(l.b.iter()).copied())
        .collect();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for (k, &a) in analytic.iter().enumerate() {
        let mut plus = net.clone();
        *plus.params_mut().nth(k).unwrap() += h;
        let mut minus = net.clone();
        *minus.params_mut().nth(k).unwrap() -= h;
        let lp = plus.backward(x.view(), y.view(), delta).unwrap().0;
        let lm = minus.backward(x.view(), y.view(), delta).unwrap().0;
        let numeric = (lp - lm) / (2.0 * h);
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-4);
        worst = worst.max(rel);
    }
    worst
}

#[test]
fn gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    while checked < 5 {
        let net = random_net(&mut rng, &[4, 6, 5, 3]);
        let x = random_matrix(&mut rng, 5, 4);
        let y = random_matrix(&mut rng, 5, 3);
        if kink_margin(&net, &x, &y, 1.0) < 1e-3 {
            continue;
        }
        let err = max_fd_error(&net, &x, &y, 1.0);
        assert!(err <= 1e-5, "relative error {err}");
        checked += 1;
    }
}

#[test]
fn gradient_edge_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let net = random_net(&mut rng, &[3, 4, 2]);
    let x = random_matrix(&mut rng, 6, 3);
    let y = net.forward(x.view()).unwrap();
    let (loss, grads) = net.backward(x.view(), y.view(), 1.0).unwrap();
    assert_eq!(loss, 0.0);
    assert!(grads
        .iter()
        .all(|l| l.w.iter().chain(l.b.iter()).all(|&g| g == 0.0)));

    let target = random_matrix(&mut rng, 6, 2);
    let (l1, g1) = net.backward(x.view(), target.view(), 1.0).unwrap();
    let x2 = ndarray::concatenate(Axis(0), &[x.view(), x.view()]).unwrap();
    let t2 = ndarray::concatenate(Axis(0), &[target.view(), target.view()]).unwrap();
    let (l2, g2) = net.backward(x2.view(), t2.view(), 1.0).unwrap();
    assert!((l1 - l2).abs() < 1e-14);
    for (a, b) in g1.iter().zip(&g2) {
        for (u, v) in
            a.w.iter()
                .chain(a.b.iter())
                .zip(b.w.iter().chain(b.b.iter()))
        {
            assert!((u - v).abs() < 1e-14);
        }
    }
}

#[test]
fn adam_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut net = random_net(&mut rng, &[2, 3, 1]);
    let before = net.clone();
    let cfg = AdamConfig::default();
    let zero = net.zeros_like();
    let mut state = AdamState::new(&net);
    adam_step(&mut net, &zero, &mut state, &cfg);
    assert_eq!(state.t, 1);
    assert_eq!(net, before);

    state.m[0].w.fill(0.4);
    state.v[0].w.fill(0.2);
    adam_step(&mut net, &zero, &mut state, &cfg);
    assert!((state.m[0].w[[0, 0]] - 0.36).abs() < 1e-15);
    assert!((state.v[0].w[[0, 0]] - 0.2 * 0.999).abs() < 1e-15);
    assert_eq!(state.m[1].w[[0, 0]], 0.0);

    let mut net = before.clone();
    let mut state = AdamState::new(&net);
    let mut ones = net.zeros_like();
    for l in &mut ones {
        l.w.fill(1.0);
        l.b.fill(1.0);
    }
    adam_step(&mut net, &ones, &mut state, &cfg);
    let expect = cfg.lr / (1.0 + cfg.epsilon);
    for (a, b) in net.layers.iter().zip(&before.layers) {
        for (u, v) in
            a.w.iter()
                .chain(a.b.iter())
                .zip(b.w.iter().chain(b.b.iter()))
        {
            assert!(((v - u) - expect).abs() < 1e-15);
        }
    }

    // Equal gradient histories give equal updates.
    let mut net = Network::from_layers(vec![Layer::zeros(2, 1)]).unwrap();
    let mut state = AdamState::new(&net);
    for g in [0.3, -1.2, 0.7] {
        let mut grads = net.zeros_like();
        grads[0].w.fill(g);
        adam_step(&mut net, &grads, &mut state, &cfg);
    }
    assert_eq!(net.layers[0].w[[0, 0]], net.layers[0].w[[0, 1]]);
}

#[test]
fn checkpoint_bookkeeping() {
    let mut cp = Checkpoint::new();
    for (epoch, mae) in [5.0, 4.0, 4.5, 3.0].into_iter().enumerate() {
        cp.observe(epoch + 1, mae, &epoch);
    }
    assert_eq!(cp.saved_at, vec![1, 2, 4]);
    assert_eq!(cp.best, Some((4, 3.0, 3)));
    let mut tie = Checkpoint::new();
    tie.observe(1, 2.0, &"a");
    assert!(!tie.observe(2, 2.0, &"b"));
    assert_eq!(tie.best.unwrap().0, 1);
}

fn linear_dataset(seed: u64, n: usize, p: usize, noise: f64) -> AlignedDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x_raw = random_matrix(&mut rng, n, p) * 2.0 + 5.0;
    let coef = random_matrix(&mut rng, p, 7);
    let y_raw = x_raw.dot(&coef) + random_matrix(&mut rng, n, 7) * noise + 300.0;
    let (train_idx, test_idx) = crate::align::split_train_test(n, 0.7, seed).unwrap();
    let names: Vec<String> = (0..p).map(|j| format!("x{j}")).collect();
    let (x, x_scaler) = standardize(x_raw.view(), &train_idx, &names).unwrap();
    let (y, y_scaler) = standardize(y_raw.view(), &train_idx, &names).unwrap();
    AlignedDataset {
        timestamps: (0..n as i64).collect(),
        feature_names: names,
        x_raw,
        y_raw,
        x,
        y,
        x_scaler,
        y_scaler,
        train_idx,
        test_idx,
    }
}

#[test]
fn training_descends_and_keeps_best() {
    let ds = linear_dataset(2, 120, 4, 0.0);
    let cfg = TrainConfig {
        max_epochs: 400,
        adam: AdamConfig {
            lr: 1e-4,
            ..Default::default()
        },
        seed: 5,
        ..Default::default()
    };
    let (best, hist) = fit_soft_sensor(&ds, &cfg).unwrap();
    assert_eq!(hist.train_loss.len(), 400);
    for w in 0..hist.train_loss.len() - 50 {
        assert!(
            hist.train_loss[w + 50] <= hist.train_loss[w],
            "window at {w}"
        );
    }
    let min = hist.test_mae.iter().copied().fold(f64::INFINITY, f64::min);
    assert_eq!(hist.best_test_mae, min);
    assert_eq!(hist.test_mae[hist.best_epoch - 1], min);
    assert!(hist.test_mae[..hist.best_epoch - 1]
        .iter()
        .all(|&m| m > min));

    let x_test = AlignedDataset::rows(&ds.x, &ds.test_idx);
    let y_test = AlignedDataset::rows(&ds.y_raw, &ds.test_idx);
    let per_point = mae_per_point(
        best.forward(x_test.view()).unwrap().view(),
        y_test.view(),
        &ds.y_scaler,
    );
    let mae = per_point.iter().sum::<f64>() / 7.0;
    assert!((mae - hist.best_test_mae).abs() < 1e-12);
    assert!(hist.test_mae.iter().all(|&m| mae <= m));

    let (again, hist2) = fit_soft_sensor(&ds, &cfg).unwrap();
    assert_eq!(again, best);
    assert_eq!(hist2, hist);
}

#[test]
fn patience_and_bad_config() {
    let ds = linear_dataset(4, 60, 3, 1.0);
    let cfg = TrainConfig {
        max_epochs: 5000,
        adam: AdamConfig {
            lr: 0.05,
            ..Default::default()
        },
        patience: Some(25),
        ..Default::default()
    };
    let (_, hist) = fit_soft_sensor(&ds, &cfg).unwrap();
    assert!(hist.test_mae.len() < 5000);
    assert_eq!(hist.test_mae.len(), hist.best_epoch + 25);

    let diverge = TrainConfig {
        max_epochs: 50,
        adam: AdamConfig {
            lr: f64::MAX,
            ..Default::default()
        },
        ..Default::default()
    };
    assert!(matches!(
        fit_soft_sensor(&ds, &diverge),
        Err(crate::Error::NonFiniteLoss { .. })
    ));
    let bad = TrainConfig {
        max_epochs: 0,
        ..Default::default()
    };
    assert!(fit_soft_sensor(&ds, &bad).is_err());
}

#[test]
fn bundle_round_trip_and_prediction() {
    let ds = linear_dataset(8, 80, 5, 0.5);
    let cfg = TrainConfig {
        max_epochs: 30,
        seed: 1,
        ..Default::default()
    };
    let (net, history) = fit_soft_sensor(&ds, &cfg).unwrap();
    let bundle = ModelBundle {
        network: net.clone(),
        x_scaler: ds.x_scaler.clone(),
        y_scaler: ds.y_scaler.clone(),
        feature_names: ds.feature_names.clone(),
        thresholds: Some(vec![1.0; 7]),
        train_config: cfg.clone(),
        history,
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.bundle");
    bundle.write(&path).unwrap();
    let back = ModelBundle::read(&path).unwrap();
    assert_eq!(back, bundle);
    let bytes = std::fs::read(&path).unwrap();
    bundle.write(&path).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), bytes);
    assert_eq!(&bytes[..4], b"SSMB");

    let pred = bundle.predict(ds.x_raw.view()).unwrap();
    let direct = ds
        .y_scaler
        .inverse(net.forward(ds.x.view()).unwrap().view());
    for (a, b) in pred.iter().zip(direct.iter()) {
        assert!((a - b).abs() < 1e-9);
    }
    let row = bundle.predict(ds.x_raw.slice(s![3..4, ..])).unwrap();
    assert_eq!(row.row(0), pred.row(3));

    let rt: Scaler = ds.y_scaler.clone();
    let back_y = rt.inverse(rt.transform(ds.y_raw.view()).view());
    for (a, b) in back_y.iter().zip(ds.y_raw.iter()) {
        assert!((a - b).abs() < 1e-10);
    }

    std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
    assert!(matches!(
        ModelBundle::read(&path),
        Err(crate::Error::Format { .. })
    ));
    let mut wrong = bytes.clone();
    wrong[0] = b'X';
    std::fs::write(&path, &wrong).unwrap();
    assert!(ModelBundle::read(&path).is_err());
    assert!(bundle.predict(ds.x_raw.slice(s![.., 1..]).view()).is_err());
}
