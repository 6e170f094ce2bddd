use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stratified partition of sequence ids into `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    /// Sequence id to fold index.
    pub assignment: BTreeMap<String, usize>,
}

/// Fold roles for one cross-validation rotation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rotation {
    pub test: usize,
    pub val: usize,
    pub train: Vec<usize>,
}

impl FoldPlan {
    /// Members of each fold, ids sorted.
    pub fn folds(&self) -> Vec<Vec<String>> {
        let mut f = vec![Vec::new(); self.k];
        for (id, &fold) in &self.assignment {
            f[fold].push(id.clone());
        }
        f
    }

    /// Rotation `r`: fold `r` tests, fold `r + 1 (mod k)` validates, the rest train.
    pub fn rotation(&self, r: usize) -> Rotation {
        let test = r % self.k;
        let val = (r + 1) % self.k;
        let train = (0..self.k).filter(|f| *f != test && *f != val).collect();
        Rotation { test, val, train }
    }

    /// Ids in the given folds.
    pub fn ids_in(&self, folds: &[usize]) -> BTreeSet<String> {
        self.assignment
            .iter()
            .filter(|(_, f)| folds.contains(f))
            .map(|(id, _)| id.clone())
            .collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Shuffles each class with a seeded RNG and deals its members round-robin over
/// the folds, continuing where the previous class stopped so fold sizes stay level.
pub fn stratified_folds(items: &[(String, usize)], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {}", k)));
    }
    if items.is_empty() {
        return Err(Error::InvalidInput("no sequences to split".into()));
    }
    let mut by_class: BTreeMap<usize, Vec<&str>> = BTreeMap::new();
    for (id, label) in items {
        by_class.entry(*label).or_default().push(id);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = BTreeMap::new();
    let mut cursor = 0usize;
    for ids in by_class.values_mut() {
        ids.sort_unstable();
        ids.shuffle(&mut rng);
        for id in ids.iter() {
            if assignment.insert(id.to_string(), cursor % k).is_some() {
                return Err(Error::InvalidInput(format!("duplicate sequence id {:?}", id)));
            }
            cursor += 1;
        }
    }
    Ok(FoldPlan { k, seed, assignment })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labelled(counts: &[usize]) -> Vec<(String, usize)> {
        counts
            .iter()
            .enumerate()
            .flat_map(|(c, &n)| (0..n).map(move |i| (format!("c{c}-{i:03}"), c)))
            .collect()
    }

    fn per_class_fold_counts(plan: &FoldPlan, items: &[(String, usize)]) -> BTreeMap<usize, Vec<usize>> {
        let mut m: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (id, c) in items {
            m.entry(*c).or_insert_with(|| vec![0; plan.k])[plan.assignment[id]] += 1;
        }
        m
    }

    #[test]
    fn exact_divisibility_gives_one_per_class_per_fold() {
        let items = labelled(&[10; 6]);
        let plan = stratified_folds(&items, 10, 0).unwrap();
        for counts in per_class_fold_counts(&plan, &items).values() {
            assert!(counts.iter().all(|&c| c == 1));
        }
    }

    #[test]
    fn ck_like_counts_balanced_within_one() {
        let items = labelled(&[54, 71, 30, 83, 34, 102]);
        assert_eq!(items.len(), 374);
        let plan = stratified_folds(&items, 10, 7).unwrap();
        for counts in per_class_fold_counts(&plan, &items).values() {
            assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
        }
        let sizes: Vec<usize> = plan.folds().iter().map(Vec::len).collect();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn deterministic_per_seed() {
        let items = labelled(&[13, 7, 22]);
        assert_eq!(stratified_folds(&items, 5, 3).unwrap(), stratified_folds(&items, 5, 3).unwrap());
        assert_ne!(stratified_folds(&items, 5, 3).unwrap(), stratified_folds(&items, 5, 4).unwrap());
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(stratified_folds(&labelled(&[3]), 1, 0).is_err());
        assert!(stratified_folds(&[], 10, 0).is_err());
        let dup = vec![("a".to_string(), 0), ("a".to_string(), 1)];
        assert!(stratified_folds(&dup, 2, 0).is_err());
    }

    #[test]
    fn rotations_are_disjoint() {
        let plan = stratified_folds(&labelled(&[20; 6]), 10, 1).unwrap();
        for r in 0..10 {
            let rot = plan.rotation(r);
            assert_eq!(rot.train.len(), 8);
            assert!(!rot.train.contains(&rot.test) && !rot.train.contains(&rot.val));
            assert_ne!(rot.test, rot.val);
        }
    }
}
