//! Eye-anchored face cropping and rectangular synthetic occluders.
//!
//! Mask rectangles live in normalized face-crop coordinates, `[0, 1]^2` with the
//! origin at the top-left. A pixel belongs to a rectangle when its centre does.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::GrayImage;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EyeAnchors {
    pub left_eye: (f64, f64),
    pub right_eye: (f64, f64),
}

impl EyeAnchors {
    pub fn new(left_eye: (f64, f64), right_eye: (f64, f64)) -> Result<Self> {
        let a = Self { left_eye, right_eye };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ipd().is_nan() || self.ipd() <= 0.0 {
            return Err(Error::InvalidInput("degenerate ipd".into()));
        }
        if self.right_eye.0 <= self.left_eye.0 {
            return Err(Error::InvalidInput("right eye must lie right of the left eye".into()));
        }
        Ok(())
    }

    /// Inter-pupillary distance in pixels.
    pub fn ipd(&self) -> f64 {
        (self.right_eye.0 - self.left_eye.0).hypot(self.right_eye.1 - self.left_eye.1)
    }

    pub fn midpoint(&self) -> (f64, f64) {
        (
            0.5 * (self.left_eye.0 + self.right_eye.0),
            0.5 * (self.left_eye.1 + self.right_eye.1),
        )
    }
}

/// Square crop proportional to the inter-pupillary distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CropGeometry {
    /// Side length in units of ipd.
    pub side_ipd: f64,
    /// Distance from the top edge down to the eye line, in units of ipd.
    pub top_ipd: f64,
}

impl Default for CropGeometry {
    fn default() -> Self {
        Self { side_ipd: 2.2, top_ipd: 0.6 }
    }
}

/// Crop square in pixel coordinates, half-open `[x0, x0 + side) x [y0, y0 + side)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropBox {
    pub x0: usize,
    pub y0: usize,
    pub side: usize,
}

impl CropBox {
    pub fn x1(&self) -> usize {
        self.x0 + self.side
    }

    pub fn y1(&self) -> usize {
        self.y0 + self.side
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaceCrop {
    pub image: GrayImage,
    pub crop_box: CropBox,
    /// The ideal box left the image and was moved or shrunk to fit.
    pub clamped: bool,
}

/// Real-valued crop square `(x0, y0, side)` before pixel snapping.
pub fn crop_box_exact(anchors: &EyeAnchors, geometry: &CropGeometry) -> Result<(f64, f64, f64)> {
    anchors.validate()?;
    let ipd = anchors.ipd();
    let (mx, my) = anchors.midpoint();
    let side = geometry.side_ipd * ipd;
    Ok((mx - 0.5 * side, my - geometry.top_ipd * ipd, side))
}

/// Pixel crop box for an image of the given size; the flag reports clamping.
pub fn crop_box(
    anchors: &EyeAnchors,
    geometry: &CropGeometry,
    width: usize,
    height: usize,
) -> Result<(CropBox, bool)> {
    let inside = |(x, y): (f64, f64)| x >= 0.0 && y >= 0.0 && x < width as f64 && y < height as f64;
    if !inside(anchors.left_eye) || !inside(anchors.right_eye) {
        return Err(Error::InvalidInput("eye anchors outside image".into()));
    }
    let (x0, y0, side) = crop_box_exact(anchors, geometry)?;
    let mut s = side.round().max(1.0) as isize;
    let mut x = x0.round() as isize;
    let mut y = y0.round() as isize;
    let mut clamped = false;
    let max_side = width.min(height) as isize;
    if s > max_side {
        s = max_side;
        clamped = true;
    }
    if x < 0 || x + s > width as isize {
        x = x.clamp(0, width as isize - s);
        clamped = true;
    }
    if y < 0 || y + s > height as isize {
        y = y.clamp(0, height as isize - s);
        clamped = true;
    }
    Ok((CropBox { x0: x as usize, y0: y as usize, side: s as usize }, clamped))
}

pub fn crop_face(image: &GrayImage, anchors: &EyeAnchors, geometry: &CropGeometry) -> Result<FaceCrop> {
    let (b, clamped) = crop_box(anchors, geometry, image.width(), image.height())?;
    Ok(FaceCrop { image: image.crop(b.x0, b.y0, b.side, b.side)?, crop_box: b, clamped })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MaskKind {
    Eyes,
    Mouth,
    LowerPart,
    Custom,
}

impl MaskKind {
    /// Default rectangles for the named regions; `Custom` has none.
    pub fn default_rects(self) -> Vec<[f64; 4]> {
        match self {
            MaskKind::Eyes => vec![[0.05, 0.18, 0.95, 0.42]],
            MaskKind::Mouth => vec![[0.15, 0.62, 0.85, 0.92]],
            MaskKind::LowerPart => vec![[0.0, 0.52, 1.0, 1.0]],
            MaskKind::Custom => Vec::new(),
        }
    }
}

impl std::str::FromStr for MaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['_', '-'], "").as_str() {
            "eyes" => Ok(MaskKind::Eyes),
            "mouth" => Ok(MaskKind::Mouth),
            "lowerpart" | "lower" => Ok(MaskKind::LowerPart),
            "custom" => Ok(MaskKind::Custom),
            _ => Err(Error::Config(format!("unknown mask kind {:?}", s))),
        }
    }
}

/// Rectangular occluder: `rects` are `[x0, y0, x1, y1]` in normalized crop coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MaskSpecFile", into = "MaskSpecFile")]
pub struct OcclusionMask {
    kind: MaskKind,
    rects: Vec<[f64; 4]>,
    fill: f64,
}

#[derive(Serialize, Deserialize)]
struct MaskSpecFile {
    kind: MaskKind,
    rects: Vec<[f64; 4]>,
    fill: f64,
}

impl TryFrom<MaskSpecFile> for OcclusionMask {
    type Error = Error;

    fn try_from(f: MaskSpecFile) -> Result<Self> {
        OcclusionMask::new(f.kind, f.rects, f.fill)
    }
}

impl From<OcclusionMask> for MaskSpecFile {
    fn from(m: OcclusionMask) -> Self {
        MaskSpecFile { kind: m.kind, rects: m.rects, fill: m.fill }
    }
}

impl OcclusionMask {
    pub fn new(kind: MaskKind, rects: Vec<[f64; 4]>, fill: f64) -> Result<Self> {
        if rects.is_empty() {
            return Err(Error::Config("occlusion mask needs at least one rectangle".into()));
        }
        for r in &rects {
            let ok = r.iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)) && r[0] <= r[2] && r[1] <= r[3];
            if !ok {
                return Err(Error::Config(format!("rectangle {:?} not inside [0, 1]^2", r)));
            }
        }
        if !(0.0..=1.0).contains(&fill) {
            return Err(Error::Config(format!("fill {} outside [0, 1]", fill)));
        }
        Ok(Self { kind, rects, fill })
    }

    /// Named region with its default rectangles and a black fill.
    pub fn preset(kind: MaskKind) -> Result<Self> {
        Self::new(kind, kind.default_rects(), 0.0)
    }

    pub fn kind(&self) -> MaskKind {
        self.kind
    }

    pub fn rects(&self) -> &[[f64; 4]] {
        &self.rects
    }

    pub fn fill(&self) -> f64 {
        self.fill
    }

    fn covers(&self, x: usize, y: usize, w: usize, h: usize) -> bool {
        let cx = (x as f64 + 0.5) / w as f64;
        let cy = (y as f64 + 0.5) / h as f64;
        self.rects.iter().any(|r| cx >= r[0] && cx < r[2] && cy >= r[1] && cy < r[3])
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Config(format!("{}: {}", path.as_ref().display(), e)))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {}", path.as_ref().display(), e)))
    }
}

/// Sets every pixel under the mask to the fill value; others are untouched.
pub fn apply_occlusion(image: &GrayImage, mask: &OcclusionMask) -> GrayImage {
    let (w, h) = (image.width(), image.height());
    let mut out = image.clone();
    for y in 0..h {
        for x in 0..w {
            if mask.covers(x, y, w, h) {
                out.set(x, y, mask.fill);
            }
        }
    }
    out
}

/// Boolean grid, true where the mask covers the cell centre.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskGrid {
    pub width: usize,
    pub height: usize,
    pub cells: Vec<bool>,
}

impl MaskGrid {
    pub fn count(&self) -> usize {
        self.cells.iter().filter(|c| **c).count()
    }

    pub fn inverted(&self) -> Vec<bool> {
        self.cells.iter().map(|c| !c).collect()
    }
}

pub fn mask_on_flow(mask: &OcclusionMask, width: usize, height: usize) -> MaskGrid {
    let cells = (0..height)
        .flat_map(|y| (0..width).map(move |x| (x, y)))
        .map(|(x, y)| mask.covers(x, y, width, height))
        .collect();
    MaskGrid { width, height, cells }
}

#[derive(Debug, Deserialize)]
struct AnchorRow {
    frame_path: PathBuf,
    left_x: f64,
    left_y: f64,
    right_x: f64,
    right_y: f64,
}

/// Reads `frame_path,left_x,left_y,right_x,right_y` rows (with header).
pub fn read_anchors_csv(path: impl AsRef<Path>) -> Result<HashMap<PathBuf, EyeAnchors>> {
    let mut rdr = csv::Reader::from_path(path.as_ref())?;
    let mut out = HashMap::new();
    for row in rdr.deserialize() {
        let r: AnchorRow = row?;
        let a = EyeAnchors::new((r.left_x, r.left_y), (r.right_x, r.right_y))
            .map_err(|e| Error::Data(format!("{}: {}", r.frame_path.display(), e)))?;
        out.insert(r.frame_path, a);
    }
    Ok(out)
}
