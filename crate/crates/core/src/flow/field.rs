use crate::error::{Error, Result};

/// Dense motion field: per-pixel horizontal (`u`) and vertical (`v`) displacement in pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    u: Vec<f64>,
    v: Vec<f64>,
}

impl FlowField {
    pub fn new(width: usize, height: usize, u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput("flow must be at least 1x1".into()));
        }
        if u.len() != width * height || v.len() != width * height {
            return Err(Error::Dimension(format!(
                "{}x{} flow needs {} values per channel, got {} and {}",
                width,
                height,
                width * height,
                u.len(),
                v.len()
            )));
        }
        if u.iter().chain(&v).any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("flow contains non-finite values".into()));
        }
        Ok(Self { width, height, u, v })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, u: vec![0.0; width * height], v: vec![0.0; width * height] }
    }

    pub fn constant(width: usize, height: usize, u: f64, v: f64) -> Self {
        Self { width, height, u: vec![u; width * height], v: vec![v; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> (f64, f64)) -> Self {
        let mut u = Vec::with_capacity(width * height);
        let mut v = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let (a, b) = f(x, y);
                u.push(a);
                v.push(b);
            }
        }
        Self { width, height, u, v }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn at(&self, x: usize, y: usize) -> (f64, f64) {
        let i = y * self.width + x;
        (self.u[i], self.v[i])
    }

    fn check_same_dims(&self, other: &FlowField) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::Dimension(format!(
                "flows {}x{} and {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }

    /// Per-pixel endpoint error against `other`.
    pub fn epe_map(&self, other: &FlowField) -> Result<Vec<f64>> {
        self.check_same_dims(other)?;
        Ok(self
            .u
            .iter()
            .zip(&self.v)
            .zip(other.u.iter().zip(&other.v))
            .map(|((a, b), (c, d))| ((a - c).powi(2) + (b - d).powi(2)).sqrt())
            .collect())
    }

    pub fn mean_epe(&self, other: &FlowField) -> Result<f64> {
        let m = self.epe_map(other)?;
        Ok(m.iter().sum::<f64>() / m.len() as f64)
    }

    /// Mean EPE over pixels where `select` is true, `None` when nothing is selected.
    pub fn mean_epe_where(&self, other: &FlowField, select: &[bool]) -> Result<Option<f64>> {
        let m = self.epe_map(other)?;
        if select.len() != m.len() {
            return Err(Error::Dimension("selection grid does not match flow".into()));
        }
        let (sum, n) = m
            .iter()
            .zip(select)
            .filter(|(_, s)| **s)
            .fold((0.0, 0usize), |(s, n), (e, _)| (s + e, n + 1));
        Ok((n > 0).then(|| sum / n as f64))
    }

    /// Mean EPE on the interior, `border` pixels trimmed from every side.
    pub fn mean_epe_interior(&self, other: &FlowField, border: usize) -> Result<f64> {
        let sel: Vec<bool> = (0..self.height)
            .flat_map(|y| {
                (0..self.width).map(move |x| {
                    x >= border && y >= border && x + border < self.width && y + border < self.height
                })
            })
            .collect();
        self.mean_epe_where(other, &sel)?
            .ok_or_else(|| Error::InvalidInput("border leaves no interior".into()))
    }

    /// Rounds every component to the nearest f32, the precision of `.flo` files.
    pub fn to_f32_precision(&self) -> FlowField {
        let r = |x: &f64| *x as f32 as f64;
        FlowField {
            width: self.width,
            height: self.height,
            u: self.u.iter().map(r).collect(),
            v: self.v.iter().map(r).collect(),
        }
    }
}
