use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Active skip connections; level 1 is the outermost (full resolution).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct SkipSet(u8);

impl SkipSet {
    pub fn new(levels: &[usize]) -> Result<Self> {
        let mut bits = 0u8;
        for &l in levels {
            if !(1..=3).contains(&l) {
                return Err(Error::Config(format!("skip level {} not in 1..=3", l)));
            }
            bits |= 1 << (l - 1);
        }
        Ok(Self(bits))
    }

    pub fn none() -> Self {
        Self(0)
    }

    pub fn all() -> Self {
        Self(0b111)
    }

    pub fn contains(self, level: usize) -> bool {
        (1..=3).contains(&level) && self.0 & (1 << (level - 1)) != 0
    }

    pub fn levels(self) -> Vec<usize> {
        (1..=3).filter(|&l| self.contains(l)).collect()
    }

    /// All 8 subsets ordered by size, then lexicographically.
    pub fn powerset() -> Vec<SkipSet> {
        let mut v: Vec<SkipSet> = (0..8u8).map(SkipSet).collect();
        v.sort_by_key(|s| (s.levels().len(), s.levels()));
        v
    }
}

impl fmt::Display for SkipSet {
    /// `none`, or levels joined by `+`, e.g. `1+2+3`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 == 0 {
            return f.write_str("none");
        }
        let parts: Vec<String> = self.levels().iter().map(|l| l.to_string()).collect();
        f.write_str(&parts.join("+"))
    }
}

impl std::str::FromStr for SkipSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s == "none" {
            return Ok(SkipSet::none());
        }
        let levels = s
            .split(['+', ','])
            .map(|p| p.trim().parse::<usize>().map_err(|_| Error::Config(format!("bad skip set {:?}", s))))
            .collect::<Result<Vec<_>>>()?;
        SkipSet::new(&levels)
    }
}

impl Serialize for SkipSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.levels().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SkipSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let levels = Vec::<usize>::deserialize(d)?;
        SkipSet::new(&levels).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Mse,
    Wing,
    Endpoint,
}

impl LossKind {
    pub const ALL: [LossKind; 3] = [LossKind::Mse, LossKind::Wing, LossKind::Endpoint];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Mse => "mse",
            LossKind::Wing => "wing",
            LossKind::Endpoint => "endpoint",
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LossKind::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown loss {:?}", s)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AEConfig {
    /// Side of the square input flow.
    pub input_size: usize,
    pub encoder_channels: [usize; 3],
    pub skips: SkipSet,
    pub loss: LossKind,
    pub wing_w: f64,
    pub wing_eps: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
    /// Flows are multiplied by this before entering the network and divided after.
    pub input_scale: f64,
}

impl Default for AEConfig {
    fn default() -> Self {
        Self {
            input_size: 64,
            encoder_channels: [32, 64, 128],
            skips: SkipSet::all(),
            loss: LossKind::Endpoint,
            wing_w: 10.0,
            wing_eps: 2.0,
            lr: 1e-3,
            epochs: 30,
            batch: 32,
            seed: 0,
            input_scale: 1.0,
        }
    }
}

impl AEConfig {
    pub const LEVELS: usize = 3;

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.input_size == 0 || !self.input_size.is_multiple_of(1 << Self::LEVELS) {
            return bad(format!("input size {} not divisible by 8", self.input_size));
        }
        if self.encoder_channels.contains(&0) {
            return bad("encoder channels must be positive".into());
        }
        if !(self.wing_w > 0.0 && self.wing_eps > 0.0) {
            return bad(format!("wing needs w > 0 and eps > 0, got {} and {}", self.wing_w, self.wing_eps));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate {} invalid", self.lr));
        }
        if self.batch == 0 {
            return bad("batch must be positive".into());
        }
        if !(self.input_scale > 0.0 && self.input_scale.is_finite()) {
            return bad(format!("input scale {} invalid", self.input_scale));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn skip_set_basics() {
        assert_eq!(SkipSet::powerset().len(), 8);
        assert_eq!(SkipSet::powerset()[0], SkipSet::none());
        assert_eq!(SkipSet::powerset()[7], SkipSet::all());
        assert_eq!(SkipSet::new(&[3, 1]).unwrap().to_string(), "1+3");
        assert_eq!("1+2".parse::<SkipSet>().unwrap(), SkipSet::new(&[1, 2]).unwrap());
        assert_eq!("none".parse::<SkipSet>().unwrap(), SkipSet::none());
        assert!(SkipSet::new(&[4]).is_err());
        let json = serde_json::to_string(&SkipSet::new(&[2, 3]).unwrap()).unwrap();
        assert_eq!(json, "[2,3]");
        assert_eq!(serde_json::from_str::<SkipSet>(&json).unwrap().levels(), vec![2, 3]);
    }

    #[test]
    fn config_validation() {
        assert!(AEConfig::default().validate().is_ok());
        assert!(AEConfig { input_size: 60, ..Default::default() }.validate().is_err());
        assert!(AEConfig { wing_eps: 0.0, ..Default::default() }.validate().is_err());
        assert!(AEConfig { batch: 0, ..Default::default() }.validate().is_err());
    }
}
