use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::FlowField;

/// Window-mean downscale from `orig` to `final` size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResizeSpec {
    pub orig_width: usize,
    pub orig_height: usize,
    pub final_width: usize,
    pub final_height: usize,
}

impl ResizeSpec {
    pub fn new(orig_width: usize, orig_height: usize, final_width: usize, final_height: usize) -> Result<Self> {
        let s = Self { orig_width, orig_height, final_width, final_height };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.final_width == 0 || self.final_height == 0 {
            return Err(Error::InvalidInput("final size must be at least 1x1".into()));
        }
        if self.final_width > self.orig_width || self.final_height > self.orig_height {
            return Err(Error::InvalidInput(format!(
                "resize only downscales: {}x{} -> {}x{}",
                self.orig_width, self.orig_height, self.final_width, self.final_height
            )));
        }
        Ok(())
    }

    /// Horizontal coefficient `orig_width / final_width`.
    pub fn dx(&self) -> f64 {
        self.orig_width as f64 / self.final_width as f64
    }

    pub fn dy(&self) -> f64 {
        self.orig_height as f64 / self.final_height as f64
    }
}

/// Source index range `[floor(d*i), ceil(d*(i+1)) - 1]` with `d = orig/final`,
/// in exact integer arithmetic.
fn window(orig: usize, fin: usize, i: usize) -> (usize, usize) {
    let lo = orig * i / fin;
    let hi = (orig * (i + 1)).div_ceil(fin) - 1;
    (lo, hi)
}

/// Average-pools each flow channel so output cell `(i, j)` holds the mean over
/// source rows `[floor(dy*i), ceil(dy*(i+1)) - 1]` and columns
/// `[floor(dx*j), ceil(dx*(j+1)) - 1]`. Adjacent windows overlap by one cell when
/// the ratio is fractional, so every source cell contributes.
pub fn resize_flow(flow: &FlowField, spec: &ResizeSpec) -> Result<FlowField> {
    spec.validate()?;
    if flow.width() != spec.orig_width || flow.height() != spec.orig_height {
        return Err(Error::Dimension(format!(
            "resize spec expects {}x{}, flow is {}x{}",
            spec.orig_width,
            spec.orig_height,
            flow.width(),
            flow.height()
        )));
    }
    let (fw, fh) = (spec.final_width, spec.final_height);
    let w = flow.width();
    let cols: Vec<(usize, usize)> = (0..fw).map(|j| window(spec.orig_width, fw, j)).collect();
    let mut u = Vec::with_capacity(fw * fh);
    let mut v = Vec::with_capacity(fw * fh);
    for i in 0..fh {
        let (r0, r1) = window(spec.orig_height, fh, i);
        for &(c0, c1) in &cols {
            let (mut su, mut sv) = (0.0, 0.0);
            for r in r0..=r1 {
                for c in c0..=c1 {
                    su += flow.u()[r * w + c];
                    sv += flow.v()[r * w + c];
                }
            }
            let n = ((r1 - r0 + 1) * (c1 - c0 + 1)) as f64;
            u.push(su / n);
            v.push(sv / n);
        }
    }
    FlowField::new(fw, fh, u, v)
}
