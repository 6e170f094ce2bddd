use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::flow::GrayImage;
use crate::occlusion::EyeAnchors;

pub const NUM_CLASSES: usize = 6;

pub const CLASS_NAMES: [&str; NUM_CLASSES] = ["anger", "disgust", "fear", "happiness", "sadness", "surprise"];

/// Accepts a class index or name (`happy` is an alias of `happiness`).
pub fn parse_class(s: &str) -> Result<usize> {
    let key = s.trim().to_ascii_lowercase();
    if let Ok(i) = key.parse::<usize>() {
        if i < NUM_CLASSES {
            return Ok(i);
        }
    }
    let key = if key == "happy" { "happiness".to_string() } else { key };
    CLASS_NAMES
        .iter()
        .position(|n| *n == key)
        .ok_or_else(|| Error::InvalidInput(format!("unknown expression class {:?}", s)))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Frames {
    Memory(Vec<GrayImage>),
    Files(Vec<PathBuf>),
}

impl Frames {
    pub fn len(&self) -> usize {
        match self {
            Frames::Memory(v) => v.len(),
            Frames::Files(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Anchors {
    Constant(EyeAnchors),
    PerFrame(Vec<EyeAnchors>),
}

/// One labelled expression sequence, neutral first, apex last.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    id: String,
    label: usize,
    frames: Frames,
    anchors: Anchors,
}

impl Sequence {
    pub fn new(id: impl Into<String>, label: usize, frames: Frames, anchors: Anchors) -> Result<Self> {
        let id = id.into();
        if label >= NUM_CLASSES {
            return Err(Error::InvalidInput(format!("{}: label {} out of range", id, label)));
        }
        if frames.len() < 2 {
            return Err(Error::InvalidInput(format!("{}: needs at least 2 frames", id)));
        }
        match &anchors {
            Anchors::Constant(a) => a.validate()?,
            Anchors::PerFrame(v) => {
                if v.len() != frames.len() {
                    return Err(Error::InvalidInput(format!(
                        "{}: {} anchors for {} frames",
                        id,
                        v.len(),
                        frames.len()
                    )));
                }
                for a in v {
                    a.validate()?;
                }
            }
        }
        if let Frames::Memory(imgs) = &frames {
            let (w, h) = (imgs[0].width(), imgs[0].height());
            if imgs.iter().any(|f| f.width() != w || f.height() != h) {
                return Err(Error::Dimension(format!("{}: frames differ in size", id)));
            }
        }
        Ok(Self { id, label, frames, anchors })
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn label(&self) -> usize {
        self.label
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &Frames {
        &self.frames
    }

    /// Frame by 1-based index.
    pub fn frame(&self, index: usize) -> Result<GrayImage> {
        if index == 0 || index > self.len() {
            return Err(Error::InvalidInput(format!("{}: no frame {}", self.id, index)));
        }
        match &self.frames {
            Frames::Memory(v) => Ok(v[index - 1].clone()),
            Frames::Files(v) => GrayImage::load(&v[index - 1]),
        }
    }

    /// Anchors for a 1-based frame index.
    pub fn anchors(&self, index: usize) -> EyeAnchors {
        match &self.anchors {
            Anchors::Constant(a) => *a,
            Anchors::PerFrame(v) => v[index.clamp(1, v.len()) - 1],
        }
    }
}
