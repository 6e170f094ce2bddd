//! Flow-input CNN expression classifier.

use std::path::Path;

use flowmend_nn::{adam_step, read_checkpoint, softmax_rows, write_checkpoint, AdamConfig, AdamState, Graph, ParamId, ParamStore, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::NUM_CLASSES;
use crate::error::{Error, Result};
use crate::flow::FlowField;
use crate::numfmt::sig6;
use crate::reconstructor::flows_to_tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CNNConfig {
    pub input_size: usize,
    pub channels: [usize; 3],
    pub hidden: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
    pub input_scale: f64,
}

impl Default for CNNConfig {
    fn default() -> Self {
        Self { input_size: 64, channels: [32, 64, 128], hidden: 256, lr: 1e-3, epochs: 30, batch: 32, seed: 0, input_scale: 1.0 }
    }
}

impl CNNConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.input_size == 0 || !self.input_size.is_multiple_of(8) {
            return bad(format!("input size {} not divisible by 8", self.input_size));
        }
        if self.channels.contains(&0) || self.hidden == 0 || self.batch == 0 {
            return bad("channels, hidden and batch must be positive".into());
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate {} invalid", self.lr));
        }
        if !(self.input_scale > 0.0 && self.input_scale.is_finite()) {
            return bad(format!("input scale {} invalid", self.input_scale));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Layer {
    w: ParamId,
    b: ParamId,
}

/// Three conv-ReLU-pool blocks, then dense-ReLU-dense to 6 logits.
#[derive(Debug, Clone)]
pub struct Classifier {
    cfg: CNNConfig,
    params: ParamStore,
    convs: [Layer; 3],
    fc1: Layer,
    fc2: Layer,
}

impl Classifier {
    pub fn new(cfg: &CNNConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut p = ParamStore::new();
        let mut cin = 2;
        let mut convs = Vec::with_capacity(3);
        for (i, &c) in cfg.channels.iter().enumerate() {
            let w = p.add_kaiming(format!("conv{}.w", i + 1), vec![c, cin, 3, 3], cin * 9, &mut rng);
            let b = p.add(format!("conv{}.b", i + 1), Tensor::zeros(vec![c]));
            convs.push(Layer { w, b });
            cin = c;
        }
        let side = cfg.input_size / 8;
        let flat = cfg.channels[2] * side * side;
        let fc1 = Layer {
            w: p.add_kaiming("fc1.w", vec![cfg.hidden, flat], flat, &mut rng),
            b: p.add("fc1.b", Tensor::zeros(vec![cfg.hidden])),
        };
        let fc2 = Layer {
            w: p.add_kaiming("fc2.w", vec![NUM_CLASSES, cfg.hidden], cfg.hidden, &mut rng),
            b: p.add("fc2.b", Tensor::zeros(vec![NUM_CLASSES])),
        };
        Ok(Self { cfg: cfg.clone(), params: p, convs: [convs[0], convs[1], convs[2]], fc1, fc2 })
    }

    pub fn config(&self) -> &CNNConfig {
        &self.cfg
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    /// Records the forward pass and returns `(n, 6)` logits.
    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let (_, c, h, w) = g.value(x).dims4()?;
        let s = self.cfg.input_size;
        if c != 2 || h != s || w != s {
            return Err(Error::Dimension(format!("classifier expects (n, 2, {s}, {s}), got (n, {c}, {h}, {w})")));
        }
        let mut hcur = x;
        for l in self.convs {
            let (wv, bv) = (g.param(&self.params, l.w), g.param(&self.params, l.b));
            let y = g.conv3x3(hcur, wv, bv)?;
            let y = g.relu(y);
            hcur = g.maxpool2(y)?;
        }
        let flat = g.flatten(hcur);
        let (w1, b1) = (g.param(&self.params, self.fc1.w), g.param(&self.params, self.fc1.b));
        let hidden = g.dense(flat, w1, b1)?;
        let hidden = g.relu(hidden);
        let (w2, b2) = (g.param(&self.params, self.fc2.w), g.param(&self.params, self.fc2.b));
        Ok(g.dense(hidden, w2, b2)?)
    }

    fn check_size(&self, f: &FlowField) -> Result<()> {
        let s = self.cfg.input_size;
        if f.width() != s || f.height() != s {
            return Err(Error::Dimension(format!("flow {}x{} does not match input size {}", f.width(), f.height(), s)));
        }
        Ok(())
    }

    /// Softmax probabilities for each flow, one row of 6 per input.
    pub fn probabilities(&self, flows: &[&FlowField]) -> Result<Vec<Vec<f64>>> {
        for f in flows {
            self.check_size(f)?;
        }
        let mut out = Vec::with_capacity(flows.len());
        for chunk in flows.chunks(self.cfg.batch) {
            let mut g = Graph::new();
            let x = g.input(flows_to_tensor(chunk, self.cfg.input_scale)?);
            let logits = self.forward(&mut g, x)?;
            let probs = softmax_rows(g.value(logits).data(), NUM_CLASSES);
            out.extend(probs.chunks(NUM_CLASSES).map(<[f64]>::to_vec));
        }
        Ok(out)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_checkpoint(&self.params, std::io::BufWriter::new(std::fs::File::create(path)?))?;
        Ok(())
    }

    pub fn load(cfg: &CNNConfig, path: impl AsRef<Path>) -> Result<Self> {
        let mut model = Self::new(cfg)?;
        let store = read_checkpoint(std::io::BufReader::new(std::fs::File::open(path.as_ref())?))?;
        crate::reconstructor::replace_params(&mut model.params, store, path.as_ref())?;
        Ok(model)
    }
}

/// Index of the largest entry; the first one wins ties.
pub fn argmax(p: &[f64]) -> usize {
    p.iter().enumerate().fold(0, |best, (i, v)| if *v > p[best] { i } else { best })
}

/// Predicted class and its probability vector.
pub fn predict(model: &Classifier, flow: &FlowField) -> Result<(usize, Vec<f64>)> {
    let p = model.probabilities(&[flow])?.remove(0);
    Ok((argmax(&p), p))
}

/// Fraction of correctly classified items.
pub fn accuracy(model: &Classifier, test: &[(&FlowField, usize)]) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::InvalidInput("accuracy of an empty set".into()));
    }
    let flows: Vec<&FlowField> = test.iter().map(|t| t.0).collect();
    let probs = model.probabilities(&flows)?;
    let correct = probs.iter().zip(test).filter(|(p, t)| argmax(p) == t.1).count();
    Ok(correct as f64 / test.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifierEpoch {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHistory {
    pub records: Vec<ClassifierEpoch>,
    pub best_epoch: usize,
}

impl ClassifierHistory {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss,val_accuracy\n");
        for r in &self.records {
            s.push_str(&format!("{},{},{},{}\n", r.epoch, sig6(r.train_loss), sig6(r.val_loss), sig6(r.val_accuracy)));
        }
        s
    }
}

fn evaluate(model: &Classifier, set: &[(&FlowField, usize)]) -> Result<(f64, f64)> {
    let flows: Vec<&FlowField> = set.iter().map(|t| t.0).collect();
    let probs = model.probabilities(&flows)?;
    let mut loss = 0.0;
    let mut correct = 0;
    for (p, t) in probs.iter().zip(set) {
        loss -= p[t.1].max(f64::MIN_POSITIVE).ln();
        correct += usize::from(argmax(p) == t.1);
    }
    Ok((loss / set.len() as f64, correct as f64 / set.len() as f64))
}

/// Cross-entropy training with Adam. Keeps the epoch with the best validation
/// accuracy, lower validation loss breaking ties. Without validation items the
/// training set is scored instead.
pub fn train_classifier(
    cfg: &CNNConfig,
    train: &[(&FlowField, usize)],
    val: &[(&FlowField, usize)],
) -> Result<(Classifier, ClassifierHistory)> {
    if train.is_empty() {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    if let Some(bad) = train.iter().chain(val).find(|t| t.1 >= NUM_CLASSES) {
        return Err(Error::InvalidInput(format!("label {} out of range", bad.1)));
    }
    let mut model = Classifier::new(cfg)?;
    for t in train.iter().chain(val) {
        model.check_size(t.0)?;
    }
    let adam = AdamConfig { lr: cfg.lr, ..AdamConfig::default() };
    let mut state = AdamState::new(&model.params);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5EED_C1A5);
    let scored = if val.is_empty() { train } else { val };
    let mut records = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, f64, usize, ParamStore)> = None;
    for epoch in 1..=cfg.epochs {
        let mut total = 0.0;
        for idx in crate::reconstructor::minibatches(train.len(), cfg.batch, &mut rng) {
            let flows: Vec<&FlowField> = idx.iter().map(|&i| train[i].0).collect();
            let labels: Vec<usize> = idx.iter().map(|&i| train[i].1).collect();
            let mut g = Graph::new();
            let x = g.input(flows_to_tensor(&flows, cfg.input_scale)?);
            let logits = model.forward(&mut g, x)?;
            let loss = g.softmax_cross_entropy(logits, &labels)?;
            total += g.value(loss).data()[0] * idx.len() as f64;
            let grads = g.backward(loss)?.for_params(&model.params);
            adam_step(&mut model.params, &grads, &mut state, adam)?;
        }
        let (val_loss, val_accuracy) = evaluate(&model, scored)?;
        records.push(ClassifierEpoch { epoch, train_loss: total / train.len() as f64, val_loss, val_accuracy });
        let better = best
            .as_ref()
            .is_none_or(|(acc, l, _, _)| val_accuracy > *acc || (val_accuracy == *acc && val_loss < *l));
        if better {
            best = Some((val_accuracy, val_loss, epoch, model.params.clone()));
        }
    }
    let best_epoch = match best {
        Some((_, _, epoch, params)) => {
            model.params = params;
            epoch
        }
        None => 0,
    };
    Ok((model, ClassifierHistory { records, best_epoch }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_first_wins() {
        assert_eq!(argmax(&[0.1, 0.5, 0.5]), 1);
        assert_eq!(argmax(&[2.0]), 0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let cfg = CNNConfig { input_size: 16, channels: [2, 2, 2], hidden: 4, epochs: 1, ..Default::default() };
        let f = FlowField::zeros(16, 16);
        assert!(train_classifier(&cfg, &[], &[]).is_err());
        assert!(train_classifier(&cfg, &[(&f, 6)], &[]).is_err());
        let model = Classifier::new(&cfg).unwrap();
        assert!(accuracy(&model, &[]).is_err());
        assert!(predict(&model, &FlowField::zeros(8, 8)).is_err());
    }
}
