use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bank::{FlowBank, FoldMembers};
use super::manifest::ExperimentManifest;
use crate::classifier::{accuracy, train_classifier, CNNConfig, Classifier, ClassifierHistory};
use crate::dataset::{FoldPlan, PairStrategy};
use crate::error::{Error, Result};
use crate::flow::FlowField;
use crate::reconstructor::{train_reconstructor, AEConfig, Autoencoder, History, LossKind, SkipSet};

/// Per-fold scores. Accuracies are fractions; EPE compares against the clean apex flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub clean_accuracy: f64,
    pub occluded_accuracy: f64,
    pub reconstructed_accuracy: Option<f64>,
    pub epe_inside_occluded: Option<f64>,
    pub epe_inside_reconstructed: Option<f64>,
    pub epe_outside_occluded: Option<f64>,
    pub epe_outside_reconstructed: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct CVReport {
    pub plan: FoldPlan,
    pub folds: Vec<FoldResult>,
    pub cnn_histories: Vec<ClassifierHistory>,
    pub ae_histories: Vec<History>,
}

/// Arithmetic mean over folds of a column, `None` if any fold lacks it.
pub fn mean_of(folds: &[FoldResult], f: impl Fn(&FoldResult) -> Option<f64>) -> Option<f64> {
    let vals: Option<Vec<f64>> = folds.iter().map(f).collect();
    vals.filter(|v| !v.is_empty()).map(|v| v.iter().sum::<f64>() / v.len() as f64)
}

impl CVReport {
    pub fn mean_clean(&self) -> f64 {
        mean_of(&self.folds, |f| Some(f.clean_accuracy)).unwrap_or(f64::NAN)
    }

    pub fn mean_occluded(&self) -> f64 {
        mean_of(&self.folds, |f| Some(f.occluded_accuracy)).unwrap_or(f64::NAN)
    }

    pub fn mean_reconstructed(&self) -> Option<f64> {
        mean_of(&self.folds, |f| f.reconstructed_accuracy)
    }
}

fn fold_seed(base: u64, fold: usize) -> u64 {
    base.wrapping_add(fold as u64)
}

fn apex_set<'a>(bank: &'a FlowBank, idx: &[usize], occluded: bool) -> Vec<(&'a FlowField, usize)> {
    idx.iter()
        .map(|&i| {
            let s = &bank.sequences[i];
            (if occluded { &s.apex().occluded } else { &s.apex().clean }, s.label)
        })
        .collect()
}

fn checked_members(bank: &FlowBank, fold: usize) -> Result<FoldMembers> {
    let m = bank.members(fold);
    bank.check_hygiene(&m)?;
    if m.train.is_empty() || m.test.is_empty() {
        return Err(Error::Data(format!("rotation {} has an empty train or test fold", fold)));
    }
    Ok(m)
}

/// One classifier per rotation, trained on clean apex flows of the train folds
/// and selected on the validation fold.
pub fn train_fold_classifiers(bank: &FlowBank, cfg: &CNNConfig) -> Result<Vec<(Classifier, ClassifierHistory)>> {
    (0..bank.k()).into_par_iter().map(|fold| train_fold_classifier(bank, cfg, fold)).collect()
}

/// Classifier of a single rotation, seeded with `cfg.seed + fold`.
pub fn train_fold_classifier(bank: &FlowBank, cfg: &CNNConfig, fold: usize) -> Result<(Classifier, ClassifierHistory)> {
    let m = checked_members(bank, fold)?;
    let c = CNNConfig { seed: fold_seed(cfg.seed, fold), ..cfg.clone() };
    train_classifier(&c, &apex_set(bank, &m.train, false), &apex_set(bank, &m.val, false))
}

/// Autoencoder of a single rotation: strategy pairs of the train folds, apex
/// pairs of the validation fold, seeded with `cfg.seed + fold`.
pub fn train_fold_reconstructor(
    bank: &FlowBank,
    cfg: &AEConfig,
    strategy: PairStrategy,
    fold: usize,
) -> Result<(Autoencoder, History)> {
    let m = checked_members(bank, fold)?;
    let mut train = Vec::new();
    for &i in &m.train {
        for p in bank.sequences[i].strategy_pairs(strategy)? {
            train.push((&p.occluded, &p.clean));
        }
    }
    let val: Vec<(&FlowField, &FlowField)> = m
        .val
        .iter()
        .map(|&i| {
            let a = bank.sequences[i].apex();
            (&a.occluded, &a.clean)
        })
        .collect();
    let c = AEConfig { seed: fold_seed(cfg.seed, fold), ..cfg.clone() };
    train_reconstructor(&c, &train, &val)
}

fn check_models(bank: &FlowBank, classifiers: &[(Classifier, ClassifierHistory)]) -> Result<()> {
    if classifiers.len() != bank.k() {
        return Err(Error::InvalidInput(format!("{} classifiers for {} folds", classifiers.len(), bank.k())));
    }
    Ok(())
}

fn mean_epe(bank: &FlowBank, pred: &[&FlowField], truth: &[&FlowField], inside: bool) -> Result<Option<f64>> {
    let select: Vec<bool> = if inside { bank.mask_grid.cells.clone() } else { bank.mask_grid.inverted() };
    let mut vals = Vec::with_capacity(pred.len());
    for (p, t) in pred.iter().zip(truth) {
        match p.mean_epe_where(t, &select)? {
            Some(v) => vals.push(v),
            None => return Ok(None),
        }
    }
    Ok((!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64))
}

/// Clean and occluded test accuracy of each fold's classifier.
pub fn evaluate_baselines(bank: &FlowBank, classifiers: &[(Classifier, ClassifierHistory)]) -> Result<Vec<FoldResult>> {
    check_models(bank, classifiers)?;
    (0..bank.k())
        .into_par_iter()
        .map(|fold| {
            let m = checked_members(bank, fold)?;
            let model = &classifiers[fold].0;
            let clean = apex_set(bank, &m.test, false);
            let occ = apex_set(bank, &m.test, true);
            let occ_flows: Vec<&FlowField> = occ.iter().map(|o| o.0).collect();
            let clean_flows: Vec<&FlowField> = clean.iter().map(|o| o.0).collect();
            Ok(FoldResult {
                fold,
                clean_accuracy: accuracy(model, &clean)?,
                occluded_accuracy: accuracy(model, &occ)?,
                reconstructed_accuracy: None,
                epe_inside_occluded: mean_epe(bank, &occ_flows, &clean_flows, true)?,
                epe_inside_reconstructed: None,
                epe_outside_occluded: mean_epe(bank, &occ_flows, &clean_flows, false)?,
                epe_outside_reconstructed: None,
            })
        })
        .collect()
}

/// Trains one autoencoder per rotation on the strategy's pairs of the train
/// folds, selects it on the validation fold's apex pairs, reconstructs the test
/// fold's occluded apex flows and scores them with that rotation's classifier.
pub fn evaluate_reconstruction(
    bank: &FlowBank,
    classifiers: &[(Classifier, ClassifierHistory)],
    cfg: &AEConfig,
    strategy: PairStrategy,
) -> Result<(Vec<FoldResult>, Vec<History>)> {
    let baselines = evaluate_baselines(bank, classifiers)?;
    let per_fold: Vec<(FoldResult, History)> = (0..bank.k())
        .into_par_iter()
        .map(|fold| {
            let m = checked_members(bank, fold)?;
            let (ae, history) = train_fold_reconstructor(bank, cfg, strategy, fold)?;
            let occ: Vec<&FlowField> = m.test.iter().map(|&i| &bank.sequences[i].apex().occluded).collect();
            let clean: Vec<&FlowField> = m.test.iter().map(|&i| &bank.sequences[i].apex().clean).collect();
            let mut recon = Vec::with_capacity(occ.len());
            for chunk in occ.chunks(cfg.batch) {
                recon.extend(ae.run(chunk)?);
            }
            let recon_refs: Vec<&FlowField> = recon.iter().collect();
            let labelled: Vec<(&FlowField, usize)> =
                recon.iter().zip(&m.test).map(|(f, &i)| (f, bank.sequences[i].label)).collect();
            let mut r = baselines[fold].clone();
            r.reconstructed_accuracy = Some(accuracy(&classifiers[fold].0, &labelled)?);
            r.epe_inside_reconstructed = mean_epe(bank, &recon_refs, &clean, true)?;
            r.epe_outside_reconstructed = mean_epe(bank, &recon_refs, &clean, false)?;
            Ok((r, history))
        })
        .collect::<Result<_>>()?;
    Ok(per_fold.into_iter().unzip())
}

pub fn run_baselines(manifest: &ExperimentManifest) -> Result<CVReport> {
    let bank = FlowBank::build(manifest, &[])?;
    let classifiers = train_fold_classifiers(&bank, &manifest.cnn)?;
    let folds = evaluate_baselines(&bank, &classifiers)?;
    Ok(CVReport {
        plan: bank.plan.clone(),
        folds,
        cnn_histories: classifiers.into_iter().map(|c| c.1).collect(),
        ae_histories: Vec::new(),
    })
}

pub fn run_reconstruction_cv(manifest: &ExperimentManifest) -> Result<CVReport> {
    let bank = FlowBank::build(manifest, &[manifest.strategy])?;
    let classifiers = train_fold_classifiers(&bank, &manifest.cnn)?;
    let (folds, ae_histories) = evaluate_reconstruction(&bank, &classifiers, &manifest.ae, manifest.strategy)?;
    Ok(CVReport {
        plan: bank.plan.clone(),
        folds,
        cnn_histories: classifiers.into_iter().map(|c| c.1).collect(),
        ae_histories,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationAxis {
    Loss,
    Skips,
    Strategy,
}

impl AblationAxis {
    pub fn name(self) -> &'static str {
        match self {
            AblationAxis::Loss => "loss",
            AblationAxis::Skips => "skips",
            AblationAxis::Strategy => "strategy",
        }
    }
}

impl std::str::FromStr for AblationAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "loss" => Ok(AblationAxis::Loss),
            "skips" | "skip" => Ok(AblationAxis::Skips),
            "strategy" | "strategies" => Ok(AblationAxis::Strategy),
            _ => Err(Error::Config(format!("unknown ablation axis {:?}", s))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub setting: String,
    pub folds: Vec<FoldResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationTable {
    pub axis: AblationAxis,
    pub plan: FoldPlan,
    pub rows: Vec<AblationRow>,
}

/// Settings of one axis, everything else taken from the manifest.
pub fn ablation_settings(manifest: &ExperimentManifest, axis: AblationAxis) -> Vec<(String, AEConfig, PairStrategy)> {
    let base = &manifest.ae;
    match axis {
        AblationAxis::Loss => LossKind::ALL
            .iter()
            .map(|&l| (l.name().to_string(), AEConfig { loss: l, ..base.clone() }, manifest.strategy))
            .collect(),
        AblationAxis::Skips => SkipSet::powerset()
            .into_iter()
            .map(|s| (s.to_string(), AEConfig { skips: s, ..base.clone() }, manifest.strategy))
            .collect(),
        AblationAxis::Strategy => PairStrategy::ALL.iter().map(|&s| (s.name().to_string(), base.clone(), s)).collect(),
    }
}

pub fn run_ablation(manifest: &ExperimentManifest, axis: AblationAxis) -> Result<AblationTable> {
    let settings = ablation_settings(manifest, axis);
    let strategies: Vec<PairStrategy> = settings.iter().map(|s| s.2).collect();
    let bank = FlowBank::build(manifest, &strategies)?;
    let classifiers = train_fold_classifiers(&bank, &manifest.cnn)?;
    let rows = settings
        .into_iter()
        .map(|(setting, cfg, strategy)| {
            let (folds, _) = evaluate_reconstruction(&bank, &classifiers, &cfg, strategy)?;
            Ok(AblationRow { setting, folds })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AblationTable { axis, plan: bank.plan.clone(), rows })
}
