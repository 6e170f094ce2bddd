use std::path::Path;

use flowmend_nn::{adam_step, AdamConfig, AdamState, Graph, Var};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{AEConfig, LossKind};
use super::model::{flows_to_tensor, Autoencoder};
use crate::error::{Error, Result};
use crate::flow::FlowField;
use crate::numfmt::sig6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// Per-epoch losses and the epoch whose weights were kept.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    pub records: Vec<EpochRecord>,
    pub best_epoch: usize,
}

impl History {
    pub fn best_val_loss(&self) -> Option<f64> {
        self.records.iter().find(|r| r.epoch == self.best_epoch).map(|r| r.val_loss)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss\n");
        for r in &self.records {
            s.push_str(&format!("{},{},{}\n", r.epoch, sig6(r.train_loss), sig6(r.val_loss)));
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

pub(crate) fn minibatches(n: usize, batch: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.chunks(batch).map(<[usize]>::to_vec).collect()
}

fn loss_node(cfg: &AEConfig, g: &mut Graph, pred: Var, target: Var) -> Result<Var> {
    Ok(match cfg.loss {
        LossKind::Mse => g.mse(pred, target)?,
        LossKind::Wing => g.wing(pred, target, cfg.wing_w, cfg.wing_eps)?,
        LossKind::Endpoint => g.endpoint(pred, target)?,
    })
}

fn batch_graph(model: &Autoencoder, pairs: &[(&FlowField, &FlowField)], idx: &[usize]) -> Result<(Graph, Var)> {
    let cfg = model.config();
    let inputs: Vec<&FlowField> = idx.iter().map(|&i| pairs[i].0).collect();
    let targets: Vec<&FlowField> = idx.iter().map(|&i| pairs[i].1).collect();
    let mut g = Graph::new();
    let x = g.input(flows_to_tensor(&inputs, cfg.input_scale)?);
    let t = g.input(flows_to_tensor(&targets, cfg.input_scale)?);
    let y = model.forward(&mut g, x)?;
    let l = loss_node(cfg, &mut g, y, t)?;
    Ok((g, l))
}

fn mean_loss(model: &Autoencoder, pairs: &[(&FlowField, &FlowField)]) -> Result<f64> {
    let batch = model.config().batch;
    let mut total = 0.0;
    for start in (0..pairs.len()).step_by(batch) {
        let idx: Vec<usize> = (start..(start + batch).min(pairs.len())).collect();
        let (g, l) = batch_graph(model, pairs, &idx)?;
        total += g.value(l).data()[0] * idx.len() as f64;
    }
    Ok(total / pairs.len() as f64)
}

/// Trains on `(occluded, clean)` pairs with Adam and keeps the weights of the
/// epoch with the lowest validation loss. With no validation pairs the
/// training loss takes its place.
pub fn train_reconstructor(
    cfg: &AEConfig,
    train: &[(&FlowField, &FlowField)],
    val: &[(&FlowField, &FlowField)],
) -> Result<(Autoencoder, History)> {
    if train.is_empty() {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    let mut model = Autoencoder::new(cfg)?;
    let s = cfg.input_size;
    for (a, b) in train.iter().chain(val) {
        for f in [a, b] {
            if f.width() != s || f.height() != s {
                return Err(Error::Dimension(format!("flow {}x{} does not match input size {}", f.width(), f.height(), s)));
            }
        }
    }
    let adam = AdamConfig { lr: cfg.lr, ..AdamConfig::default() };
    let mut state = AdamState::new(model.params());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5EED_A0E0);
    let mut records = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, flowmend_nn::ParamStore)> = None;
    for epoch in 1..=cfg.epochs {
        let mut total = 0.0;
        for idx in minibatches(train.len(), cfg.batch, &mut rng) {
            let (g, l) = batch_graph(&model, train, &idx)?;
            total += g.value(l).data()[0] * idx.len() as f64;
            let grads = g.backward(l)?.for_params(model.params());
            adam_step(model.params_mut(), &grads, &mut state, adam)?;
        }
        let train_loss = total / train.len() as f64;
        let val_loss = if val.is_empty() { train_loss } else { mean_loss(&model, val)? };
        records.push(EpochRecord { epoch, train_loss, val_loss });
        if best.as_ref().is_none_or(|(b, _, _)| val_loss < *b) {
            best = Some((val_loss, epoch, model.params().clone()));
        }
    }
    let best_epoch = match best {
        Some((_, epoch, params)) => {
            *model.params_mut() = params;
            epoch
        }
        None => 0,
    };
    Ok((model, History { records, best_epoch }))
}

/// Reconstructs one occluded flow.
pub fn reconstruct(model: &Autoencoder, occluded: &FlowField) -> Result<FlowField> {
    let s = model.config().input_size;
    if occluded.width() != s || occluded.height() != s {
        return Err(Error::Dimension(format!(
            "flow {}x{} does not match input size {}",
            occluded.width(),
            occluded.height(),
            s
        )));
    }
    Ok(model.run(&[occluded])?.remove(0))
}
