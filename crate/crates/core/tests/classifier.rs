use flowmend_core::classifier::{accuracy, predict, train_classifier, CNNConfig, Classifier};
use flowmend_core::dataset::{template_flow, NUM_CLASSES};
use flowmend_core::flow::FlowField;
use flowmend_nn::check::max_relative_error;
use flowmend_nn::{softmax_rows, NnError, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn noisy_templates(per_class: usize, seed: u64) -> Vec<(FlowField, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.3).unwrap();
    let templates: Vec<FlowField> = (0..NUM_CLASSES).map(|c| template_flow(c, 64, 3.0).unwrap()).collect();
    let mut out = Vec::new();
    for _ in 0..per_class {
        for (c, t) in templates.iter().enumerate() {
            let u = t.u().iter().map(|a| a + noise.sample(&mut rng)).collect();
            let v = t.v().iter().map(|a| a + noise.sample(&mut rng)).collect();
            let f = FlowField::new(64, 64, u, v).unwrap();
            out.push((f, c));
        }
    }
    out
}

fn refs(v: &[(FlowField, usize)]) -> Vec<(&FlowField, usize)> {
    v.iter().map(|(f, c)| (f, *c)).collect()
}

fn narrow(epochs: usize) -> CNNConfig {
    CNNConfig { channels: [8, 16, 32], hidden: 64, epochs, batch: 12, ..Default::default() }
}

#[test]
fn separable_synthetic_classes_are_learned() {
    let train = noisy_templates(10, 1);
    let val = noisy_templates(2, 2);
    let (model, h) = train_classifier(&narrow(50), &refs(&train), &refs(&val)).unwrap();
    let acc = accuracy(&model, &refs(&val)).unwrap();
    assert!(acc >= 0.95, "validation accuracy {} (best epoch {})", acc, h.best_epoch);
}

#[test]
fn memorizes_a_single_sample() {
    let train = noisy_templates(1, 3);
    let one = refs(&train[4..5]);
    let (model, _) = train_classifier(&narrow(30), &one, &[]).unwrap();
    assert_eq!(accuracy(&model, &one).unwrap(), 1.0);
}

#[test]
fn same_seed_same_history() {
    let train = noisy_templates(2, 4);
    let val = noisy_templates(1, 5);
    let a = train_classifier(&narrow(3), &refs(&train), &refs(&val)).unwrap().1;
    let b = train_classifier(&narrow(3), &refs(&train), &refs(&val)).unwrap().1;
    assert_eq!(a, b);
}

#[test]
fn predictions_are_distributions() {
    let model = Classifier::new(&narrow(1)).unwrap();
    for (f, _) in noisy_templates(1, 6) {
        let (c, p) = predict(&model, &f).unwrap();
        assert_eq!(p.len(), NUM_CLASSES);
        assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        assert!(p.iter().all(|x| *x >= 0.0));
        assert!(p.iter().all(|x| *x <= p[c]));
    }
}

#[test]
fn argmax_ignores_uniform_logit_shift() {
    let logits = [0.3, -1.2, 2.5, 2.4, 0.0, -0.7];
    let shifted: Vec<f64> = logits.iter().map(|x| x + 123.0).collect();
    let (a, b) = (softmax_rows(&logits, 6), softmax_rows(&shifted, 6));
    let am = |p: &[f64]| flowmend_core::classifier::argmax(p);
    assert_eq!(am(&a), am(&b));
    assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12));
}

#[test]
fn accuracy_counts() {
    let model = Classifier::new(&narrow(1)).unwrap();
    let data = noisy_templates(1, 7);
    assert!(accuracy(&model, &[]).is_err());
    let predicted: Vec<usize> = data.iter().map(|(f, _)| predict(&model, f).unwrap().0).collect();
    let all_right: Vec<(&FlowField, usize)> = data.iter().zip(&predicted).map(|((f, _), &p)| (f, p)).collect();
    assert_eq!(accuracy(&model, &all_right).unwrap(), 1.0);
    // Five items, the 2nd and 5th relabelled wrong: 3 of 5 correct.
    let five: Vec<(&FlowField, usize)> = all_right[..5]
        .iter()
        .enumerate()
        .map(|(i, &(f, p))| (f, if i == 1 || i == 4 { (p + 1) % NUM_CLASSES } else { p }))
        .collect();
    assert!((accuracy(&model, &five).unwrap() - 0.6).abs() < 1e-15);
    let doubled: Vec<(&FlowField, usize)> = five.iter().chain(&five).copied().collect();
    assert_eq!(accuracy(&model, &doubled).unwrap(), accuracy(&model, &five).unwrap());
}

#[test]
fn end_to_end_gradient_matches_finite_differences() {
    let cfg = CNNConfig { input_size: 8, channels: [2, 3, 2], hidden: 5, ..Default::default() };
    let model = Classifier::new(&cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let normal = Normal::new(0.0, 1.0).unwrap();
    for label in 0..3 {
        let x = Tensor::new(vec![1, 2, 8, 8], (0..128).map(|_| normal.sample(&mut rng)).collect()).unwrap();
        let build = |g: &mut flowmend_nn::Graph, v: &[flowmend_nn::Var]| {
            let logits = model.forward(g, v[0]).map_err(|e| NnError::InvalidArgument(e.to_string()))?;
            g.softmax_cross_entropy(logits, &[label])
        };
        let err = max_relative_error(&build, &[x], 1e-5).unwrap();
        assert!(err < 1e-4, "relative error {}", err);
    }
}

#[test]
fn size_mismatch_errors() {
    let model = Classifier::new(&narrow(1)).unwrap();
    assert!(predict(&model, &FlowField::zeros(32, 32)).is_err());
}
