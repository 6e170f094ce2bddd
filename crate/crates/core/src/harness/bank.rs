use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use super::manifest::ExperimentManifest;
use crate::dataset::{enumerate_pairs, stratified_folds, FoldPlan, PairStrategy, Sequence};
use crate::error::{Error, Result};
use crate::flow::{estimate_flow, resize_flow, FlowField, GrayImage, ResizeSpec};
use crate::occlusion::{apply_occlusion, crop_box, mask_on_flow, MaskGrid};

/// Clean and occluded flow of one frame pair, both resized to the network input.
#[derive(Debug, Clone, PartialEq)]
pub struct PairFlows {
    pub clean: FlowField,
    pub occluded: FlowField,
}

#[derive(Debug, Clone)]
pub struct SequenceFlows {
    pub id: String,
    pub label: usize,
    pub frames: usize,
    pub pairs: BTreeMap<(usize, usize), PairFlows>,
}

impl SequenceFlows {
    /// First-to-last flows, the ones every classifier sees.
    pub fn apex(&self) -> &PairFlows {
        &self.pairs[&(1, self.frames)]
    }

    pub fn strategy_pairs(&self, strategy: PairStrategy) -> Result<Vec<&PairFlows>> {
        enumerate_pairs(self.frames, strategy)?
            .iter()
            .map(|p| {
                self.pairs
                    .get(p)
                    .ok_or_else(|| Error::Data(format!("{}: flow pair {:?} was not computed", self.id, p)))
            })
            .collect()
    }
}

/// Crops every frame with the box of the first frame, optionally occludes, then
/// computes the requested pair flows at crop resolution and resizes them.
pub fn sequence_flows(seq: &Sequence, pairs: &BTreeSet<(usize, usize)>, manifest: &ExperimentManifest) -> Result<SequenceFlows> {
    let first = seq.frame(1)?;
    let (b, _) = crop_box(&seq.anchors(1), &manifest.crop, first.width(), first.height())?;
    let needed: BTreeSet<usize> = pairs.iter().flat_map(|&(p, q)| [p, q]).collect();
    let mut clean: BTreeMap<usize, GrayImage> = BTreeMap::new();
    let mut occluded: BTreeMap<usize, GrayImage> = BTreeMap::new();
    for &t in &needed {
        let img = if t == 1 { first.clone() } else { seq.frame(t)? };
        if img.width() != first.width() || img.height() != first.height() {
            return Err(Error::Data(format!("{}: frame {} differs in size from frame 1", seq.id(), t)));
        }
        let c = img.crop(b.x0, b.y0, b.side, b.side)?;
        occluded.insert(t, apply_occlusion(&c, &manifest.mask));
        clean.insert(t, c);
    }
    let spec = ResizeSpec::new(b.side, b.side, manifest.flow_size, manifest.flow_size)
        .map_err(|e| Error::Data(format!("{}: crop side {}: {}", seq.id(), b.side, e)))?;
    let mut out = BTreeMap::new();
    for &(p, q) in pairs {
        let c = resize_flow(&estimate_flow(&clean[&p], &clean[&q], &manifest.flow)?, &spec)?;
        let o = resize_flow(&estimate_flow(&occluded[&p], &occluded[&q], &manifest.flow)?, &spec)?;
        out.insert((p, q), PairFlows { clean: c, occluded: o });
    }
    Ok(SequenceFlows { id: seq.id().to_string(), label: seq.label(), frames: seq.len(), pairs: out })
}

/// Sequence indices playing each role in one rotation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldMembers {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// All flows of an experiment plus its fold plan and flow-resolution mask.
#[derive(Debug, Clone)]
pub struct FlowBank {
    pub sequences: Vec<SequenceFlows>,
    pub plan: FoldPlan,
    pub mask_grid: MaskGrid,
}

impl FlowBank {
    /// Computes the apex flows and every pair the given strategies need.
    pub fn build(manifest: &ExperimentManifest, strategies: &[PairStrategy]) -> Result<Self> {
        manifest.validate()?;
        let infos = manifest.dataset.index()?;
        let items: Vec<(String, usize)> = infos.iter().map(|i| (i.id.clone(), i.label)).collect();
        let plan = match &manifest.fold_plan {
            Some(p) => {
                let ids: BTreeSet<&String> = items.iter().map(|i| &i.0).collect();
                let planned: BTreeSet<&String> = p.assignment.keys().collect();
                if ids != planned || ids.len() != items.len() {
                    return Err(Error::Config("fold plan does not cover exactly the dataset's sequences".into()));
                }
                if p.assignment.values().any(|&f| f >= p.k) || p.k < 3 {
                    return Err(Error::Config("fold plan has invalid fold indices".into()));
                }
                p.clone()
            }
            None => stratified_folds(&items, manifest.folds.k, manifest.folds.seed)?,
        };
        let sequences = infos
            .par_iter()
            .map(|info| {
                let seq = info.load()?;
                let mut pairs = BTreeSet::from([(1, seq.len())]);
                for &s in strategies {
                    pairs.extend(enumerate_pairs(seq.len(), s).map_err(|e| Error::Data(format!("{}: {}", seq.id(), e)))?);
                }
                sequence_flows(&seq, &pairs, manifest)
            })
            .collect::<Result<Vec<_>>>()?;
        let mask_grid = mask_on_flow(&manifest.mask, manifest.flow_size, manifest.flow_size);
        Ok(Self { sequences, plan, mask_grid })
    }

    pub fn k(&self) -> usize {
        self.plan.k
    }

    pub fn members(&self, rotation: usize) -> FoldMembers {
        let rot = self.plan.rotation(rotation);
        let pick = |folds: &[usize]| -> Vec<usize> {
            self.sequences
                .iter()
                .enumerate()
                .filter(|(_, s)| folds.contains(&self.plan.assignment[&s.id]))
                .map(|(i, _)| i)
                .collect()
        };
        FoldMembers { train: pick(&rot.train), val: pick(&[rot.val]), test: pick(&[rot.test]) }
    }

    /// Fails unless the id sets of the three roles are pairwise disjoint.
    pub fn check_hygiene(&self, m: &FoldMembers) -> Result<()> {
        let ids = |v: &[usize]| -> BTreeSet<&str> { v.iter().map(|&i| self.sequences[i].id.as_str()).collect() };
        let (tr, va, te) = (ids(&m.train), ids(&m.val), ids(&m.test));
        if !tr.is_disjoint(&te) || !va.is_disjoint(&te) || !tr.is_disjoint(&va) {
            return Err(Error::Data("fold hygiene violated: a sequence appears in two roles".into()));
        }
        Ok(())
    }
}
