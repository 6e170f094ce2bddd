use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which `(prvs, next)` frame pairs of a sequence feed autoencoder training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PairStrategy {
    /// First frame to last frame.
    Apex,
    /// First frame to each of the last three frames.
    ThreeFrames,
    /// Every consecutive pair.
    AllFlows,
    /// Consecutive pairs plus first-to-last.
    FlowsAndApex,
    /// Every `prvs` with `next` taken from the second half of the sequence.
    MidFlows,
}

impl PairStrategy {
    pub const ALL: [PairStrategy; 5] = [
        PairStrategy::Apex,
        PairStrategy::ThreeFrames,
        PairStrategy::AllFlows,
        PairStrategy::FlowsAndApex,
        PairStrategy::MidFlows,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PairStrategy::Apex => "apex",
            PairStrategy::ThreeFrames => "three_frames",
            PairStrategy::AllFlows => "all_flows",
            PairStrategy::FlowsAndApex => "flows_and_apex",
            PairStrategy::MidFlows => "mid_flows",
        }
    }

    pub fn min_frames(self) -> usize {
        match self {
            PairStrategy::ThreeFrames => 4,
            _ => 2,
        }
    }
}

impl std::str::FromStr for PairStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace(['-', ' '], "_");
        PairStrategy::ALL
            .into_iter()
            .find(|p| p.name() == key || p.name().replace('_', "") == key.replace('_', ""))
            .ok_or_else(|| Error::Config(format!("unknown pair strategy {:?}", s)))
    }
}

/// 1-based `(prvs, next)` pairs for a sequence of `n` frames, sorted and duplicate-free.
pub fn enumerate_pairs(n: usize, strategy: PairStrategy) -> Result<Vec<(usize, usize)>> {
    if n < strategy.min_frames() {
        return Err(Error::InvalidInput(format!(
            "{} needs at least {} frames, sequence has {}",
            strategy.name(),
            strategy.min_frames(),
            n
        )));
    }
    let consecutive = || (1..n).map(|t| (t, t + 1));
    let mut pairs: Vec<(usize, usize)> = match strategy {
        PairStrategy::Apex => vec![(1, n)],
        PairStrategy::ThreeFrames => vec![(1, n - 2), (1, n - 1), (1, n)],
        PairStrategy::AllFlows => consecutive().collect(),
        PairStrategy::FlowsAndApex => consecutive().chain(std::iter::once((1, n))).collect(),
        PairStrategy::MidFlows => {
            let half = n.div_ceil(2);
            (1..n)
                .flat_map(|t| ((t + 1).max(half)..=n).map(move |next| (t, next)))
                .collect()
        }
    };
    pairs.sort_unstable();
    pairs.dedup();
    Ok(pairs)
}
