use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::sequence::{parse_class, Anchors, Frames, Sequence, CLASS_NAMES, NUM_CLASSES};
use super::synth::{synth_sequence, SynthParams};
use crate::error::{Error, Result};
use crate::occlusion::{read_anchors_csv, EyeAnchors};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub per_class: usize,
    pub frames: usize,
    pub image_size: usize,
    pub seed: u64,
    #[serde(default)]
    pub params: SynthParams,
}

/// Where an experiment's sequences come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    Synthetic(SyntheticSpec),
    /// `<root>/<class>/<sequence_id>/frame_NNNN.png`; relative CSV frame paths resolve against `root`.
    Directory { root: PathBuf, anchors_csv: PathBuf },
}

#[derive(Debug, Clone)]
enum Source {
    Synthetic { class: usize, seed: u64, frames: usize, size: usize, params: SynthParams },
    Loaded(Box<Sequence>),
}

/// Lightweight handle: id and label up front, frames on demand.
#[derive(Debug, Clone)]
pub struct SequenceInfo {
    pub id: String,
    pub label: usize,
    source: Source,
}

impl SequenceInfo {
    pub fn load(&self) -> Result<Sequence> {
        match &self.source {
            Source::Synthetic { class, seed, frames, size, params } => {
                Ok(synth_sequence(*class, *frames, *size, *seed, params)?.sequence.with_id(self.id.clone()))
            }
            Source::Loaded(s) => Ok((**s).clone()),
        }
    }
}

fn mix(seed: u64, class: usize, index: usize) -> u64 {
    let mut z = seed ^ ((class as u64) << 40) ^ index as u64;
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl DatasetSpec {
    pub fn index(&self) -> Result<Vec<SequenceInfo>> {
        match self {
            DatasetSpec::Synthetic(s) => {
                s.params.validate()?;
                if s.per_class == 0 || s.frames < 2 {
                    return Err(Error::Config("synthetic dataset needs per_class >= 1 and frames >= 2".into()));
                }
                Ok((0..NUM_CLASSES)
                    .flat_map(|class| {
                        (0..s.per_class).map(move |i| SequenceInfo {
                            id: format!("{}/s{:04}", CLASS_NAMES[class], i),
                            label: class,
                            source: Source::Synthetic {
                                class,
                                seed: mix(s.seed, class, i),
                                frames: s.frames,
                                size: s.image_size,
                                params: s.params,
                            },
                        })
                    })
                    .collect())
            }
            DatasetSpec::Directory { root, anchors_csv } => Ok(load_directory(root, anchors_csv)?
                .into_iter()
                .map(|s| SequenceInfo { id: s.id().to_string(), label: s.label(), source: Source::Loaded(Box::new(s)) })
                .collect()),
        }
    }
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<_>>()?;
    v.sort();
    Ok(v)
}

fn is_frame(p: &Path) -> bool {
    let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
    let ext = p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    name.starts_with("frame_") && matches!(ext.as_deref(), Some("png" | "pgm"))
}

/// Scans `<root>/<class>/<sequence_id>/frame_*.png|pgm`. Every sequence needs anchors
/// for its first frame; if all frames have anchors they are used per frame.
pub fn load_directory(root: impl AsRef<Path>, anchors_csv: impl AsRef<Path>) -> Result<Vec<Sequence>> {
    let root = root.as_ref();
    let anchors: HashMap<PathBuf, EyeAnchors> = read_anchors_csv(anchors_csv)?
        .into_iter()
        .map(|(p, a)| (if p.is_relative() { root.join(p) } else { p }, a))
        .collect();
    let mut out = Vec::new();
    for class_dir in sorted_entries(root)?.into_iter().filter(|p| p.is_dir()) {
        let class_name = class_dir.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        let label = parse_class(&class_name).map_err(|e| Error::Data(e.to_string()))?;
        for seq_dir in sorted_entries(&class_dir)?.into_iter().filter(|p| p.is_dir()) {
            let seq_name = seq_dir.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            let id = format!("{}/{}", class_name, seq_name);
            let frames: Vec<PathBuf> = sorted_entries(&seq_dir)?.into_iter().filter(|p| is_frame(p)).collect();
            if frames.len() < 2 {
                return Err(Error::Data(format!("{}: fewer than 2 frames", id)));
            }
            let per_frame: Vec<Option<EyeAnchors>> = frames.iter().map(|f| anchors.get(f).copied()).collect();
            let anchors = match per_frame.iter().copied().collect::<Option<Vec<_>>>() {
                Some(all) => Anchors::PerFrame(all),
                None => Anchors::Constant(
                    per_frame[0].ok_or_else(|| Error::Data(format!("{}: no anchors for {}", id, frames[0].display())))?,
                ),
            };
            out.push(Sequence::new(id, label, Frames::Files(frames), anchors)?);
        }
    }
    if out.is_empty() {
        return Err(Error::Data(format!("no sequences under {}", root.display())));
    }
    Ok(out)
}
