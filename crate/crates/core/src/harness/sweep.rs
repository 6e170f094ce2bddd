use std::path::Path;

use super::bank::FlowBank;
use super::cv::{evaluate_baselines, mean_of, train_fold_classifiers};
use super::manifest::ExperimentManifest;
use crate::classifier::CNNConfig;
use crate::error::Result;
use crate::numfmt::sig6;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub size: usize,
    pub seed: u64,
    pub clean_accuracy: f64,
    pub occluded_accuracy: f64,
}

/// Classifier-only cross-validation at each flow size and seed.
pub fn run_size_sweep(manifest: &ExperimentManifest, sizes: &[usize], seeds: &[u64]) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &size in sizes {
        let mut m = manifest.clone();
        m.flow_size = size;
        m.ae.input_size = size;
        m.cnn.input_size = size;
        let bank = FlowBank::build(&m, &[])?;
        for &seed in seeds {
            let cfg = CNNConfig { seed, ..m.cnn.clone() };
            let models = train_fold_classifiers(&bank, &cfg)?;
            let folds = evaluate_baselines(&bank, &models)?;
            rows.push(SweepRow {
                size,
                seed,
                clean_accuracy: mean_of(&folds, |f| Some(f.clean_accuracy)).unwrap_or(f64::NAN),
                occluded_accuracy: mean_of(&folds, |f| Some(f.occluded_accuracy)).unwrap_or(f64::NAN),
            });
        }
    }
    Ok(rows)
}

pub fn write_sweep_csv(rows: &[SweepRow], path: impl AsRef<Path>) -> Result<()> {
    let mut s = String::from("size,seed,clean_accuracy,occluded_accuracy\n");
    for r in rows {
        s.push_str(&format!("{},{},{},{}\n", r.size, r.seed, sig6(r.clean_accuracy), sig6(r.occluded_accuracy)));
    }
    std::fs::write(path, s)?;
    Ok(())
}
