use cpdforge::data::FeatureMatrix;
use cpdforge::dsid::{accuracy, forward, init_model, loss, predict_class, train, MlpModel, TrainConfig};
use cpdforge::rng::SeededRng;

/// Two classes split by the line x + y = 0, with a margin.
fn separable(n: usize, seed: u64) -> (FeatureMatrix, Vec<usize>) {
    let mut rng = SeededRng::new(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    while rows.len() < n {
        let (x, y) = (rng.uniform_range(-2.0, 2.0), rng.uniform_range(-2.0, 2.0));
        if (x + y).abs() < 0.5 {
            continue;
        }
        rows.push(vec![x, y]);
        labels.push(usize::from(x + y > 0.0));
    }
    (FeatureMatrix::from_rows(&rows).unwrap(), labels)
}

#[test]
fn separable_toy_set_is_learned() {
    let (tx, ty) = separable(1000, 1);
    let (vx, vy) = separable(200, 2);
    let model = init_model(&[2, 16, 2], 3).unwrap();
    let cfg = TrainConfig {
        learning_rate: 0.01,
        ..TrainConfig::default()
    };
    let (trained, history) = train(&model, &tx, &ty, &vx, &vy, &cfg).unwrap();
    assert_eq!(*history.val_acc.last().unwrap(), 1.0);
    assert_eq!(accuracy(&trained, &vx, &vy).unwrap(), 1.0);
}

#[test]
fn zero_learning_rate_changes_nothing() {
    let (tx, ty) = separable(300, 4);
    let (vx, vy) = separable(100, 5);
    let model = init_model(&[2, 8, 2], 6).unwrap();
    let cfg = TrainConfig {
        learning_rate: 0.0,
        early_stop_patience: None,
        epochs: 5,
        ..TrainConfig::default()
    };
    let (trained, history) = train(&model, &tx, &ty, &vx, &vy, &cfg).unwrap();
    assert_eq!(trained.flat_params(), model.flat_params());
    assert!(history.val_loss.windows(2).all(|w| w[0] == w[1]));
    let first = history.train_loss[0];
    assert!(history.train_loss.iter().all(|l| (l - first).abs() <= 1e-12));
}

#[test]
fn patience_one_restores_the_first_epoch() {
    // validation labels are the flipped training labels, so every epoch of
    // progress on the training set makes the validation loss worse
    let (tx, ty) = separable(400, 7);
    let vy: Vec<usize> = ty.iter().map(|&y| 1 - y).collect();
    let model = init_model(&[2, 8, 2], 8).unwrap();
    let cfg = TrainConfig {
        learning_rate: 0.05,
        early_stop_patience: Some(1),
        ..TrainConfig::default()
    };
    let (restored, history) = train(&model, &tx, &ty, &tx, &vy, &cfg).unwrap();
    assert!(history.val_loss[1] > history.val_loss[0]);
    assert_eq!(history.stopped_epoch, 2);
    assert_eq!(history.best_epoch, 1);
    assert!(history.early_stopped);
    let one_epoch = TrainConfig {
        epochs: 1,
        early_stop_patience: None,
        ..cfg
    };
    let (after_one, _) = train(&model, &tx, &ty, &tx, &vy, &one_epoch).unwrap();
    assert_eq!(restored, after_one);
}

#[test]
fn training_is_deterministic() {
    let (tx, ty) = separable(300, 9);
    let (vx, vy) = separable(100, 10);
    let model = init_model(&[2, 8, 8, 2], 11).unwrap();
    let cfg = TrainConfig {
        seed: 12,
        ..TrainConfig::default()
    };
    let a = train(&model, &tx, &ty, &vx, &vy, &cfg).unwrap();
    let b = train(&model, &tx, &ty, &vx, &vy, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(init_model(&[2, 2], 5).unwrap(), init_model(&[2, 2], 5).unwrap());
}

fn permute_outputs(model: &MlpModel, perm: &[usize]) -> MlpModel {
    let mut json = model.to_json();
    let last = json.weights.len() - 1;
    let (w, b) = (json.weights[last].clone(), json.biases[last].clone());
    for (old, &new) in perm.iter().enumerate() {
        json.weights[last][new] = w[old].clone();
        json.biases[last][new] = b[old];
    }
    MlpModel::from_json(&json).unwrap()
}

#[test]
fn relabelling_classes_permutes_the_outputs() {
    let mut rng = SeededRng::new(13);
    let rows: Vec<Vec<f64>> = (0..120)
        .map(|_| vec![rng.normal(), rng.normal(), rng.normal()])
        .collect();
    let labels: Vec<usize> = rows
        .iter()
        .map(|r| {
            if r[0] > 0.5 {
                0
            } else if r[1] > 0.0 {
                1
            } else {
                2
            }
        })
        .collect();
    let x = FeatureMatrix::from_rows(&rows).unwrap();
    let perm = [2, 0, 1];
    let permuted: Vec<usize> = labels.iter().map(|&y| perm[y]).collect();
    let model = init_model(&[3, 6, 3], 14).unwrap();
    let cfg = TrainConfig {
        learning_rate: 0.01,
        batch_size: 16,
        early_stop_patience: None,
        ..TrainConfig::default()
    };
    let (a, _) = train(&model, &x, &labels, &x, &labels, &cfg).unwrap();
    let (b, _) = train(&permute_outputs(&model, &perm), &x, &permuted, &x, &permuted, &cfg).unwrap();
    for r in &rows {
        let pa = forward(&a, r).unwrap();
        let pb = forward(&b, r).unwrap();
        for c in 0..3 {
            assert!((pa[c] - pb[perm[c]]).abs() <= 1e-9);
        }
        let (ca, _) = predict_class(&a, r).unwrap();
        let (cb, _) = predict_class(&b, r).unwrap();
        assert_eq!(perm[ca], cb);
    }
}

#[test]
fn outputs_are_distributions() {
    let mut rng = SeededRng::new(15);
    let model = init_model(&[4, 9, 5, 7], 16).unwrap();
    for _ in 0..1000 {
        let x: Vec<f64> = (0..4).map(|_| rng.normal() * 5.0).collect();
        let p = forward(&model, &x).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}

#[test]
fn uniform_prediction_loss_and_batch_mean() {
    let uniform = vec![vec![1.0 / 27.0; 27]];
    assert!((loss(&uniform, &[5]).unwrap() - 27f64.ln()).abs() <= 1e-9);
    let p = vec![vec![0.2, 0.8], vec![0.6, 0.4]];
    let each = [-(0.8f64).ln(), -(0.6f64).ln()];
    assert!((loss(&p, &[1, 0]).unwrap() - (each[0] + each[1]) / 2.0).abs() <= 1e-12);
    assert!(loss(&[vec![0.0, 1.0]], &[1]).unwrap() <= 1e-11);
}

#[test]
fn reference_architecture_shapes() {
    let m = init_model(&[6, 128, 128, 64, 64, 32, 27], 0).unwrap();
    assert_eq!(
        m.weight_shapes(),
        vec![(128, 6), (128, 128), (64, 128), (64, 64), (32, 64), (27, 32)]
    );
    assert!(init_model(&[3], 0).is_err());
}
