//! Dense two-frame motion estimation by polynomial expansion (Farnebäck).
//!
//! Each frame is locally approximated by a quadratic `x'Ax + b'x + c` fitted with
//! Gaussian-weighted least squares. A displacement `d` between two quadratics
//! satisfies `A d = -(b2 - b1) / 2`; the system is accumulated over a box window
//! and solved per pixel, iterated with the current estimate as a prior, coarse to
//! fine over an image pyramid. Borders are handled by replicate padding throughout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{FlowField, GrayImage};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowParams {
    pub pyramid_levels: usize,
    pub pyramid_scale: f64,
    pub window_size: usize,
    pub iterations: usize,
    /// Half-width of the polynomial fitting neighbourhood.
    pub poly_n: usize,
    pub poly_sigma: f64,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            pyramid_levels: 3,
            pyramid_scale: 0.5,
            window_size: 15,
            iterations: 3,
            poly_n: 5,
            poly_sigma: 1.2,
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.pyramid_scale > 0.0 && self.pyramid_scale < 1.0) {
            return Err(Error::Config(format!("pyramid_scale {} not in (0, 1)", self.pyramid_scale)));
        }
        if self.window_size.is_multiple_of(2) {
            return Err(Error::Config(format!("window_size {} must be odd", self.window_size)));
        }
        if self.iterations == 0 || self.pyramid_levels == 0 || self.poly_n == 0 {
            return Err(Error::Config("iterations, pyramid_levels and poly_n must be >= 1".into()));
        }
        if self.poly_sigma.is_nan() || self.poly_sigma <= 0.0 {
            return Err(Error::Config("poly_sigma must be positive".into()));
        }
        Ok(())
    }
}

/// Plain f64 plane used internally, intensities on a 0..255 scale.
#[derive(Clone)]
struct Plane {
    w: usize,
    h: usize,
    d: Vec<f64>,
}

impl Plane {
    fn at_clamped(&self, x: isize, y: isize) -> f64 {
        let x = x.clamp(0, self.w as isize - 1) as usize;
        let y = y.clamp(0, self.h as isize - 1) as usize;
        self.d[y * self.w + x]
    }

    fn bilinear(&self, x: f64, y: f64) -> f64 {
        let x = x.clamp(0.0, (self.w - 1) as f64);
        let y = y.clamp(0.0, (self.h - 1) as f64);
        let (x0, y0) = (x.floor() as isize, y.floor() as isize);
        let (fx, fy) = (x - x0 as f64, y - y0 as f64);
        let a = self.at_clamped(x0, y0);
        let b = self.at_clamped(x0 + 1, y0);
        let c = self.at_clamped(x0, y0 + 1);
        let d = self.at_clamped(x0 + 1, y0 + 1);
        (a * (1.0 - fx) + b * fx) * (1.0 - fy) + (c * (1.0 - fx) + d * fx) * fy
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil().max(1.0) as isize;
    let k: Vec<f64> = (-r..=r).map(|t| (-(t * t) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

/// Separable correlation with replicate padding; `kx` along rows, `ky` along columns.
fn separable(p: &Plane, kx: &[f64], ky: &[f64]) -> Plane {
    let (rx, ry) = ((kx.len() / 2) as isize, (ky.len() / 2) as isize);
    let mut tmp = vec![0.0; p.w * p.h];
    for y in 0..p.h {
        for x in 0..p.w {
            let mut s = 0.0;
            for (i, k) in kx.iter().enumerate() {
                s += k * p.at_clamped(x as isize + i as isize - rx, y as isize);
            }
            tmp[y * p.w + x] = s;
        }
    }
    let t = Plane { w: p.w, h: p.h, d: tmp };
    let mut out = vec![0.0; p.w * p.h];
    for y in 0..p.h {
        for x in 0..p.w {
            let mut s = 0.0;
            for (i, k) in ky.iter().enumerate() {
                s += k * t.at_clamped(x as isize, y as isize + i as isize - ry);
            }
            out[y * p.w + x] = s;
        }
    }
    Plane { w: p.w, h: p.h, d: out }
}

fn box_blur(p: &Plane, size: usize) -> Plane {
    let k = vec![1.0 / size as f64; size];
    separable(p, &k, &k)
}

fn resample(p: &Plane, w: usize, h: usize) -> Plane {
    let (sx, sy) = (p.w as f64 / w as f64, p.h as f64 / h as f64);
    let mut d = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            // pixel-centre alignment
            d.push(p.bilinear((x as f64 + 0.5) * sx - 0.5, (y as f64 + 0.5) * sy - 0.5));
        }
    }
    Plane { w, h, d }
}

/// Quadratic coefficients per pixel: `f ~ c + bx*x + by*y + axx*x^2 + ayy*y^2 + axy*x*y`.
struct PolyExpansion {
    bx: Plane,
    by: Plane,
    axx: Plane,
    ayy: Plane,
    axy: Plane,
}

fn invert6(m: [[f64; 6]; 6]) -> [[f64; 6]; 6] {
    let mut a = m;
    let mut inv = [[0.0; 6]; 6];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for col in 0..6 {
        let piv = (col..6)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty");
        a.swap(col, piv);
        inv.swap(col, piv);
        let p = a[col][col];
        for k in 0..6 {
            a[col][k] /= p;
            inv[col][k] /= p;
        }
        for r in 0..6 {
            if r != col {
                let f = a[r][col];
                if f != 0.0 {
                    for k in 0..6 {
                        a[r][k] -= f * a[col][k];
                        inv[r][k] -= f * inv[col][k];
                    }
                }
            }
        }
    }
    inv
}

fn poly_expand(p: &Plane, n: usize, sigma: f64) -> PolyExpansion {
    let n = n as isize;
    let g: Vec<f64> = (-n..=n).map(|t| (-(t * t) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let gx: Vec<f64> = (-n..=n).zip(&g).map(|(t, w)| w * t as f64).collect();
    let gxx: Vec<f64> = (-n..=n).zip(&g).map(|(t, w)| w * (t * t) as f64).collect();

    // basis order: 1, x, y, x^2, y^2, xy
    let pw = |t: isize, k: u32| (t as f64).powi(k as i32);
    let exps: [(u32, u32); 6] = [(0, 0), (1, 0), (0, 1), (2, 0), (0, 2), (1, 1)];
    let mut gram = [[0.0; 6]; 6];
    for dy in -n..=n {
        for dx in -n..=n {
            let w = g[(dx + n) as usize] * g[(dy + n) as usize];
            for i in 0..6 {
                for j in 0..6 {
                    let (pi, qi) = exps[i];
                    let (pj, qj) = exps[j];
                    gram[i][j] += w * pw(dx, pi + pj) * pw(dy, qi + qj);
                }
            }
        }
    }
    let ginv = invert6(gram);

    let moments = [
        separable(p, &g, &g),
        separable(p, &gx, &g),
        separable(p, &g, &gx),
        separable(p, &gxx, &g),
        separable(p, &g, &gxx),
        separable(p, &gx, &gx),
    ];
    let len = p.w * p.h;
    let mut coeff: Vec<Vec<f64>> = vec![vec![0.0; len]; 6];
    for px in 0..len {
        for (i, c) in coeff.iter_mut().enumerate().skip(1) {
            let mut s = 0.0;
            for (j, m) in moments.iter().enumerate() {
                s += ginv[i][j] * m.d[px];
            }
            c[px] = s;
        }
    }
    let mk = |d: Vec<f64>| Plane { w: p.w, h: p.h, d };
    let mut it = coeff.into_iter().skip(1);
    PolyExpansion {
        bx: mk(it.next().expect("6 coefficients")),
        by: mk(it.next().expect("6 coefficients")),
        axx: mk(it.next().expect("6 coefficients")),
        ayy: mk(it.next().expect("6 coefficients")),
        axy: mk(it.next().expect("6 coefficients")),
    }
}

/// One displacement refinement at a single pyramid level.
fn refine(r1: &PolyExpansion, r2: &PolyExpansion, u: &mut [f64], v: &mut [f64], window: usize) {
    let (w, h) = (r1.bx.w, r1.bx.h);
    let len = w * h;
    let mut g11 = vec![0.0; len];
    let mut g12 = vec![0.0; len];
    let mut g22 = vec![0.0; len];
    let mut h1 = vec![0.0; len];
    let mut h2 = vec![0.0; len];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let (du, dv) = (u[i], v[i]);
            let (sx, sy) = (x as f64 + du, y as f64 + dv);
            let a11 = 0.5 * (r1.axx.d[i] + r2.axx.bilinear(sx, sy));
            let a22 = 0.5 * (r1.ayy.d[i] + r2.ayy.bilinear(sx, sy));
            let a12 = 0.25 * (r1.axy.d[i] + r2.axy.bilinear(sx, sy));
            let bx = -0.5 * (r2.bx.bilinear(sx, sy) - r1.bx.d[i]) + a11 * du + a12 * dv;
            let by = -0.5 * (r2.by.bilinear(sx, sy) - r1.by.d[i]) + a12 * du + a22 * dv;
            g11[i] = a11 * a11 + a12 * a12;
            g12[i] = a12 * (a11 + a22);
            g22[i] = a12 * a12 + a22 * a22;
            h1[i] = a11 * bx + a12 * by;
            h2[i] = a12 * bx + a22 * by;
        }
    }
    let blur = |d: Vec<f64>| box_blur(&Plane { w, h, d }, window).d;
    let (g11, g12, g22, h1, h2) = (blur(g11), blur(g12), blur(g22), blur(h1), blur(h2));
    for i in 0..len {
        let det = g11[i] * g22[i] - g12[i] * g12[i] + 1e-3;
        u[i] = (g22[i] * h1[i] - g12[i] * h2[i]) / det;
        v[i] = (g11[i] * h2[i] - g12[i] * h1[i]) / det;
    }
}

/// Dense flow from `prev` to `next`: `next(x + d(x)) ~ prev(x)`.
pub fn estimate_flow(prev: &GrayImage, next: &GrayImage, params: &FlowParams) -> Result<FlowField> {
    params.validate()?;
    if prev.width() != next.width() || prev.height() != next.height() {
        return Err(Error::Dimension(format!(
            "frames {}x{} and {}x{}",
            prev.width(),
            prev.height(),
            next.width(),
            next.height()
        )));
    }
    let min_side = 2 * params.poly_n;
    if prev.width() < min_side || prev.height() < min_side {
        return Err(Error::Dimension(format!(
            "image {}x{} too small for poly_n {} (needs >= {} per side)",
            prev.width(),
            prev.height(),
            params.poly_n,
            min_side
        )));
    }
    let to_plane = |img: &GrayImage| Plane {
        w: img.width(),
        h: img.height(),
        d: img.data().iter().map(|v| v * 255.0).collect(),
    };
    let (p0, n0) = (to_plane(prev), to_plane(next));

    // levels whose smaller side still fits the fitting neighbourhood
    let mut sizes = vec![(p0.w, p0.h)];
    for k in 1..params.pyramid_levels {
        let s = params.pyramid_scale.powi(k as i32);
        let (w, h) = (
            (p0.w as f64 * s).round() as usize,
            (p0.h as f64 * s).round() as usize,
        );
        if w < min_side || h < min_side {
            break;
        }
        sizes.push((w, h));
    }

    let mut u: Vec<f64> = Vec::new();
    let mut v: Vec<f64> = Vec::new();
    let mut prev_size = (0, 0);
    for (k, &(w, h)) in sizes.iter().enumerate().rev() {
        let level = |p: &Plane| {
            if k == 0 {
                p.clone()
            } else {
                let s = params.pyramid_scale.powi(k as i32);
                let sigma = (1.0 / s - 1.0) * 0.5;
                let kern = gaussian_kernel(sigma);
                resample(&separable(p, &kern, &kern), w, h)
            }
        };
        let (pl, nl) = (level(&p0), level(&n0));
        if u.is_empty() {
            u = vec![0.0; w * h];
            v = vec![0.0; w * h];
        } else {
            let (pw, ph) = prev_size;
            let (fx, fy) = (w as f64 / pw as f64, h as f64 / ph as f64);
            let up = resample(&Plane { w: pw, h: ph, d: u }, w, h);
            let vp = resample(&Plane { w: pw, h: ph, d: v }, w, h);
            u = up.d.into_iter().map(|x| x * fx).collect();
            v = vp.d.into_iter().map(|x| x * fy).collect();
        }
        let r1 = poly_expand(&pl, params.poly_n, params.poly_sigma);
        let r2 = poly_expand(&nl, params.poly_n, params.poly_sigma);
        for _ in 0..params.iterations {
            refine(&r1, &r2, &mut u, &mut v, params.window_size);
        }
        prev_size = (w, h);
    }
    FlowField::new(p0.w, p0.h, u, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texture(w: usize, h: usize, dx: f64, dy: f64) -> GrayImage {
        GrayImage::from_fn(w, h, |x, y| {
            let (x, y) = (x as f64 - dx, y as f64 - dy);
            0.5 + 0.2 * (x * 0.45).sin() * (y * 0.3).cos()
                + 0.15 * ((x + 2.0 * y) * 0.21).sin()
                + 0.1 * ((x - y) * 0.37).cos()
        })
    }

    #[test]
    fn polynomial_expansion_recovers_a_quadratic() {
        let (w, h) = (24, 24);
        let f = |x: f64, y: f64| 3.0 + 0.5 * x - 0.25 * y + 0.02 * x * x + 0.03 * y * y - 0.01 * x * y;
        let p = Plane { w, h, d: (0..w * h).map(|i| f((i % w) as f64, (i / w) as f64)).collect() };
        let r = poly_expand(&p, 3, 1.0);
        let (x, y) = (12usize, 11usize);
        let i = y * w + x;
        // local expansion around (x, y)
        assert!((r.axx.d[i] - 0.02).abs() < 1e-9);
        assert!((r.ayy.d[i] - 0.03).abs() < 1e-9);
        assert!((r.axy.d[i] + 0.01).abs() < 1e-9);
        assert!((r.bx.d[i] - (0.5 + 2.0 * 0.02 * x as f64 - 0.01 * y as f64)).abs() < 1e-9);
        assert!((r.by.d[i] - (-0.25 + 2.0 * 0.03 * y as f64 - 0.01 * x as f64)).abs() < 1e-9);
    }

    #[test]
    fn identical_frames_have_near_zero_flow() {
        let img = texture(48, 48, 0.0, 0.0);
        let f = estimate_flow(&img, &img, &FlowParams::default()).unwrap();
        assert!(f.mean_epe(&FlowField::zeros(48, 48)).unwrap() < 0.05);
    }

    #[test]
    fn subpixel_shift_is_recovered() {
        let a = texture(48, 48, 0.0, 0.0);
        let b = texture(48, 48, 1.5, -0.75);
        let f = estimate_flow(&a, &b, &FlowParams::default()).unwrap();
        let truth = FlowField::constant(48, 48, 1.5, -0.75);
        let e = f.mean_epe_interior(&truth, 8).unwrap();
        assert!(e < 0.2, "epe {e}");
    }

    #[test]
    fn errors_on_mismatch_and_small_images() {
        let p = FlowParams::default();
        let a = texture(32, 32, 0.0, 0.0);
        let b = texture(32, 30, 0.0, 0.0);
        assert!(matches!(estimate_flow(&a, &b, &p), Err(Error::Dimension(_))));
        let tiny = texture(8, 8, 0.0, 0.0);
        assert!(matches!(estimate_flow(&tiny, &tiny, &p), Err(Error::Dimension(_))));
    }

    #[test]
    fn params_validation() {
        let ok = FlowParams::default();
        assert!(ok.validate().is_ok());
        assert!(FlowParams { pyramid_scale: 1.0, ..ok }.validate().is_err());
        assert!(FlowParams { window_size: 14, ..ok }.validate().is_err());
        assert!(FlowParams { iterations: 0, ..ok }.validate().is_err());
    }
}
