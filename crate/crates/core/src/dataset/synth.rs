//! Synthetic expression sequences: a textured face-like image warped by a
//! class-specific motion field whose magnitude ramps linearly over the frames.
//!
//! Templates are sums of Gaussian displacement bumps placed in normalized
//! face-crop coordinates, then scaled so the peak displacement equals
//! `magnitude` pixels.
//!
//! | class | upper face | lower face |
//! |---|---|---|
//! | anger | brows down and together | lips tighten inward, chin up |
//! | disgust | brows down, nose wrinkle up | upper lip raised |
//! | fear | inner brows up and together | mouth corners stretched outward |
//! | happiness | cheeks raised | mouth corners up and out |
//! | sadness | inner brows up, outer brows down | mouth corners down and in |
//! | surprise | brows up | jaw drop |

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::sequence::{Anchors, Frames, Sequence, CLASS_NAMES, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::flow::{FlowField, GrayImage};
use crate::occlusion::{crop_box_exact, CropGeometry, EyeAnchors};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    /// Peak displacement of the apex field, pixels.
    pub magnitude: f64,
    /// Per-sequence amplitude drawn from `[1 - amplitude_jitter, 1]`.
    pub amplitude_jitter: f64,
    /// Per-bump amplitude factor drawn from `[1 - bump_jitter, 1 + bump_jitter]`.
    pub bump_jitter: f64,
    /// Shift of all bump centres, normalized crop units.
    pub center_jitter: f64,
    /// Standard deviation of additive per-frame pixel noise.
    pub noise: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self { magnitude: 3.0, amplitude_jitter: 0.25, bump_jitter: 0.15, center_jitter: 0.02, noise: 0.01 }
    }
}

impl SynthParams {
    /// No jitter and no noise: frames carry exactly the template motion.
    pub fn exact(magnitude: f64) -> Self {
        Self { magnitude, amplitude_jitter: 0.0, bump_jitter: 0.0, center_jitter: 0.0, noise: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.magnitude.is_finite()
            && self.magnitude >= 0.0
            && (0.0..1.0).contains(&self.amplitude_jitter)
            && (0.0..1.0).contains(&self.bump_jitter)
            && (0.0..0.25).contains(&self.center_jitter)
            && self.noise.is_finite()
            && self.noise >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid synthetic parameters {:?}", self)))
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Bump {
    cx: f64,
    cy: f64,
    dx: f64,
    dy: f64,
    sigma: f64,
}

const fn b(cx: f64, cy: f64, dx: f64, dy: f64, sigma: f64) -> Bump {
    Bump { cx, cy, dx, dy, sigma }
}

const TEMPLATES: [&[Bump]; NUM_CLASSES] = [
    &[
        b(0.32, 0.20, 0.8, 0.6, 0.15),
        b(0.68, 0.20, -0.8, 0.6, 0.15),
        b(0.30, 0.76, 0.8, 0.0, 0.13),
        b(0.70, 0.76, -0.8, 0.0, 0.13),
        b(0.50, 0.88, 0.0, -0.6, 0.12),
    ],
    &[
        b(0.30, 0.22, 0.0, 0.6, 0.15),
        b(0.70, 0.22, 0.0, 0.6, 0.15),
        b(0.50, 0.62, 0.0, -1.0, 0.15),
        b(0.50, 0.42, 0.0, -0.7, 0.12),
    ],
    &[
        b(0.40, 0.18, 0.8, -0.6, 0.13),
        b(0.60, 0.18, -0.8, -0.6, 0.13),
        b(0.28, 0.76, -1.0, 0.2, 0.16),
        b(0.72, 0.76, 1.0, 0.2, 0.16),
    ],
    &[
        b(0.30, 0.74, -0.7, -0.7, 0.16),
        b(0.70, 0.74, 0.7, -0.7, 0.16),
        b(0.26, 0.48, 0.0, -0.6, 0.15),
        b(0.74, 0.48, 0.0, -0.6, 0.15),
    ],
    &[
        b(0.42, 0.17, 0.0, -0.9, 0.10),
        b(0.58, 0.17, 0.0, -0.9, 0.10),
        b(0.20, 0.22, 0.0, 0.6, 0.10),
        b(0.80, 0.22, 0.0, 0.6, 0.10),
        b(0.30, 0.78, 0.5, 0.8, 0.14),
        b(0.70, 0.78, -0.5, 0.8, 0.14),
    ],
    &[
        b(0.25, 0.16, 0.0, -1.0, 0.16),
        b(0.75, 0.16, 0.0, -1.0, 0.16),
        b(0.50, 0.88, 0.0, 1.0, 0.20),
    ],
];

fn bump_sum(bumps: &[Bump], nx: f64, ny: f64) -> (f64, f64) {
    bumps.iter().fold((0.0, 0.0), |(u, v), b| {
        let r2 = (nx - b.cx).powi(2) + (ny - b.cy).powi(2);
        let g = (-r2 / (2.0 * b.sigma * b.sigma)).exp();
        (u + b.dx * g, v + b.dy * g)
    })
}

/// Peak template magnitude over a fine grid of the unit square.
fn template_peak(bumps: &[Bump]) -> f64 {
    const N: usize = 128;
    let mut peak = 0.0f64;
    for j in 0..N {
        for i in 0..N {
            let (u, v) = bump_sum(bumps, (i as f64 + 0.5) / N as f64, (j as f64 + 0.5) / N as f64);
            peak = peak.max(u.hypot(v));
        }
    }
    peak
}

/// Continuous displacement field in image pixel coordinates.
struct Motion {
    bumps: Vec<Bump>,
    scale: f64,
    crop: (f64, f64, f64),
}

impl Motion {
    fn at(&self, x: f64, y: f64) -> (f64, f64) {
        let (x0, y0, side) = self.crop;
        let (u, v) = bump_sum(&self.bumps, (x - x0) / side, (y - y0) / side);
        (self.scale * u, self.scale * v)
    }
}

struct Wave {
    kx: f64,
    ky: f64,
    phase: f64,
}

/// Face-like luminance pattern plus fine sinusoidal texture, defined on the plane.
struct Face {
    crop: (f64, f64, f64),
    waves: Vec<Wave>,
}

fn blob(nx: f64, ny: f64, cx: f64, cy: f64, sx: f64, sy: f64) -> f64 {
    (-0.5 * (((nx - cx) / sx).powi(2) + ((ny - cy) / sy).powi(2))).exp()
}

impl Face {
    fn new(crop: (f64, f64, f64), rng: &mut ChaCha8Rng) -> Self {
        let px = crop.2 / 88.0;
        let waves = (0..5)
            .map(|_| {
                let lambda = rng.gen_range(6.0..12.0) * px;
                let theta: f64 = rng.gen_range(0.0..std::f64::consts::PI);
                let k = 2.0 * std::f64::consts::PI / lambda;
                Wave { kx: k * theta.cos(), ky: k * theta.sin(), phase: rng.gen_range(0.0..std::f64::consts::TAU) }
            })
            .collect();
        Self { crop, waves }
    }

    fn at(&self, x: f64, y: f64) -> f64 {
        let (x0, y0, side) = self.crop;
        let (nx, ny) = ((x - x0) / side, (y - y0) / side);
        let oval = ((nx - 0.5) / 0.46).powi(2) + ((ny - 0.52) / 0.56).powi(2);
        let mut val = 0.3 + 0.25 / (1.0 + (8.0 * (oval - 1.0)).exp());
        for ex in [0.2727, 0.7273] {
            val -= 0.22 * blob(nx, ny, ex, 0.2727, 0.05, 0.035);
            val -= 0.15 * blob(nx, ny, ex, 0.17, 0.09, 0.02);
        }
        val -= 0.18 * blob(nx, ny, 0.5, 0.76, 0.13, 0.03);
        val -= 0.08 * blob(nx, ny, 0.5, 0.55, 0.04, 0.03);
        for w in &self.waves {
            val += 0.05 * (w.kx * x + w.ky * y + w.phase).sin();
        }
        val
    }
}

/// Eye positions used by every synthetic sequence of side `size`.
pub fn canonical_anchors(size: usize) -> EyeAnchors {
    let s = size as f64;
    EyeAnchors { left_eye: (0.34375 * s, 0.390625 * s), right_eye: (0.65625 * s, 0.390625 * s) }
}

/// A generated sequence with its ground-truth first-to-last flow.
#[derive(Debug, Clone)]
pub struct SynthSample {
    pub sequence: Sequence,
    pub apex_flow: FlowField,
}

fn motion_for(class: usize, size: usize, magnitude: f64, rng: Option<(&mut ChaCha8Rng, &SynthParams)>) -> Result<Motion> {
    let bumps = TEMPLATES
        .get(class)
        .ok_or_else(|| Error::InvalidInput(format!("unknown expression class {}", class)))?;
    let peak = template_peak(bumps);
    let crop = crop_box_exact(&canonical_anchors(size), &CropGeometry::default())?;
    let mut bumps = bumps.to_vec();
    let mut amplitude = 1.0;
    if let Some((rng, p)) = rng {
        amplitude = 1.0 - rng.gen_range(0.0..=p.amplitude_jitter);
        let (ox, oy) = (
            rng.gen_range(-p.center_jitter..=p.center_jitter),
            rng.gen_range(-p.center_jitter..=p.center_jitter),
        );
        for b in &mut bumps {
            let f = 1.0 + rng.gen_range(-p.bump_jitter..=p.bump_jitter);
            b.cx += ox;
            b.cy += oy;
            b.dx *= f;
            b.dy *= f;
        }
    }
    Ok(Motion { bumps, scale: amplitude * magnitude / peak, crop })
}

fn sample_field(motion: &Motion, size: usize, s: f64) -> FlowField {
    FlowField::from_fn(size, size, |x, y| {
        let (u, v) = motion.at(x as f64, y as f64);
        (s * u, s * v)
    })
}

/// Un-jittered class field over a `size x size` image, peak `magnitude` pixels.
pub fn template_flow(class: usize, size: usize, magnitude: f64) -> Result<FlowField> {
    let motion = motion_for(class, size, magnitude, None)?;
    Ok(sample_field(&motion, size, 1.0))
}

/// Frame `t` of `n` shows the base face with each point `p` moved to
/// `p + (t-1)/(n-1) * F(p)`, so the first-to-last flow is exactly `F`.
pub fn synth_sequence(class: usize, n: usize, size: usize, seed: u64, params: &SynthParams) -> Result<SynthSample> {
    params.validate()?;
    if n < 2 {
        return Err(Error::InvalidInput(format!("synthetic sequence needs at least 2 frames, got {}", n)));
    }
    if size < 32 {
        return Err(Error::InvalidInput(format!("synthetic image side {} is below 32", size)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (class as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let motion = motion_for(class, size, params.magnitude, Some((&mut rng, params)))?;
    let face = Face::new(motion.crop, &mut rng);
    let noise = Normal::new(0.0, params.noise.max(f64::MIN_POSITIVE)).map_err(|e| Error::Config(e.to_string()))?;

    let mut frames = Vec::with_capacity(n);
    for t in 0..n {
        let s = t as f64 / (n - 1) as f64;
        let mut data = Vec::with_capacity(size * size);
        for y in 0..size {
            for x in 0..size {
                let (qx, qy) = (x as f64, y as f64);
                // Invert p + s F(p) = q by fixed-point iteration; F is a contraction here.
                let (mut px, mut py) = (qx, qy);
                for _ in 0..25 {
                    let (u, v) = motion.at(px, py);
                    px = qx - s * u;
                    py = qy - s * v;
                }
                let mut val = face.at(px, py);
                if params.noise > 0.0 {
                    val += noise.sample(&mut rng);
                }
                data.push(val.clamp(0.0, 1.0));
            }
        }
        frames.push(GrayImage::new(size, size, data)?);
    }
    let id = format!("{}/synth-{:016x}", CLASS_NAMES[class], seed);
    let sequence = Sequence::new(id, class, Frames::Memory(frames), Anchors::Constant(canonical_anchors(size)))?;
    Ok(SynthSample { sequence, apex_flow: sample_field(&motion, size, 1.0) })
}
