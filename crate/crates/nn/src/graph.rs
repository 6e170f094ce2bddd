//! Tape-based reverse-mode autodiff over the small op set the flow networks use.
//!
//! A [`Graph`] records one forward pass. Every op appends a node holding its
//! output value and whatever it needs for the backward sweep; [`Graph::backward`]
//! walks the tape in reverse and accumulates gradients into a [`Gradients`] table.

use crate::error::{NnError, Result};
use crate::gemm::gemm;
use crate::params::{ParamId, ParamStore};
use crate::tensor::Tensor;

/// Handle to a node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    Conv3x3 { x: Var, w: Var, b: Var },
    Relu(Var),
    MaxPool2 { x: Var, argmax: Vec<usize> },
    Upsample2(Var),
    Concat { a: Var, b: Var },
    Flatten(Var),
    Dense { x: Var, w: Var, b: Var },
    SoftmaxCe { logits: Var, labels: Vec<usize>, probs: Vec<f64> },
    Mse { a: Var, b: Var },
    Wing { a: Var, b: Var, w: f64, eps: f64 },
    Endpoint { a: Var, b: Var },
    Sum(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients of a scalar loss with respect to every node of the tape.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    params: Vec<(ParamId, Var)>,
}

impl Gradients {
    /// Gradient buffer of a node, `None` when the loss does not depend on it.
    pub fn wrt(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// One gradient tensor per parameter of `store`, zero for parameters that were
    /// not used or do not reach the loss. A parameter fed in twice accumulates.
    pub fn for_params(&self, store: &ParamStore) -> Vec<Tensor> {
        let mut out: Vec<Tensor> = store
            .iter()
            .map(|(_, t)| Tensor::zeros(t.shape().to_vec()))
            .collect();
        for &(pid, var) in &self.params {
            if let Some(g) = self.wrt(var) {
                for (o, v) in out[pid.index()].data_mut().iter_mut().zip(g) {
                    *o += v;
                }
            }
        }
        out
    }
}

fn mismatch(msg: String) -> NnError {
    NnError::ShapeMismatch(msg)
}

fn im2col(x: &[f64], c: usize, h: usize, w: usize, cols: &mut [f64]) {
    let hw = h * w;
    for ci in 0..c {
        let plane = &x[ci * hw..(ci + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut cols[((ci * 9) + ky * 3 + kx) * hw..][..hw];
                for y in 0..h {
                    let dst = &mut row[y * w..(y + 1) * w];
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        dst.fill(0.0);
                        continue;
                    }
                    let src = &plane[sy as usize * w..(sy as usize + 1) * w];
                    match kx {
                        0 => {
                            dst[0] = 0.0;
                            dst[1..].copy_from_slice(&src[..w - 1]);
                        }
                        1 => dst.copy_from_slice(src),
                        _ => {
                            dst[..w - 1].copy_from_slice(&src[1..]);
                            dst[w - 1] = 0.0;
                        }
                    }
                }
            }
        }
    }
}

fn col2im_add(cols: &[f64], c: usize, h: usize, w: usize, dx: &mut [f64]) {
    let hw = h * w;
    for ci in 0..c {
        let plane = &mut dx[ci * hw..(ci + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &cols[((ci * 9) + ky * 3 + kx) * hw..][..hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src = &row[y * w..(y + 1) * w];
                    let dst = &mut plane[sy as usize * w..(sy as usize + 1) * w];
                    match kx {
                        0 => {
                            for (d, s) in dst[..w - 1].iter_mut().zip(&src[1..]) {
                                *d += s;
                            }
                        }
                        1 => {
                            for (d, s) in dst.iter_mut().zip(src) {
                                *d += s;
                            }
                        }
                        _ => {
                            for (d, s) in dst[1..].iter_mut().zip(&src[..w - 1]) {
                                *d += s;
                            }
                        }
                    }
                }
            }
        }
    }
}

fn wing_value(x: f64, w: f64, eps: f64) -> f64 {
    let ax = x.abs();
    if ax < w {
        w * (ax / eps).ln_1p()
    } else {
        ax - (w - w * (w / eps).ln_1p())
    }
}

fn wing_slope(x: f64, w: f64, eps: f64) -> f64 {
    let ax = x.abs();
    let s = if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    };
    if ax < w {
        s * w / (eps + ax)
    } else {
        s
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Constant input; gradients are still tracked for it.
    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf)
    }

    /// Brings a stored parameter onto the tape.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.push(store.get(id).clone(), Op::Param(id))
    }

    /// 3x3 convolution, stride 1, zero padding 1. `w` is `(c_out, c_in, 3, 3)`, `b` is `(c_out)`.
    pub fn conv3x3(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (n, cin, h, wd) = self.value(x).dims4()?;
        let ws = self.value(w).shape().to_vec();
        if ws.len() != 4 || ws[1] != cin || ws[2] != 3 || ws[3] != 3 {
            return Err(mismatch(format!(
                "conv3x3 kernel {:?} does not fit input with {} channels",
                ws, cin
            )));
        }
        let cout = ws[0];
        if self.value(b).len() != cout {
            return Err(mismatch(format!("conv3x3 bias must have {} entries", cout)));
        }
        let hw = h * wd;
        let mut out = vec![0.0; n * cout * hw];
        let mut cols = vec![0.0; cin * 9 * hw];
        {
            let xv = self.value(x).data();
            let wv = self.value(w).data();
            let bv = self.value(b).data();
            for i in 0..n {
                im2col(&xv[i * cin * hw..(i + 1) * cin * hw], cin, h, wd, &mut cols);
                let o = &mut out[i * cout * hw..(i + 1) * cout * hw];
                for (co, bias) in bv.iter().enumerate() {
                    o[co * hw..(co + 1) * hw].fill(*bias);
                }
                gemm(cout, cin * 9, hw, wv, false, &cols, false, 1.0, o);
            }
        }
        let t = Tensor::new(vec![n, cout, h, wd], out)?;
        Ok(self.push(t, Op::Conv3x3 { x, w, b }))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let data = v.data().iter().map(|&a| a.max(0.0)).collect();
        let t = Tensor::new(v.shape().to_vec(), data).expect("same shape");
        self.push(t, Op::Relu(x))
    }

    /// 2x2 max pooling with stride 2; the first maximum in scan order wins ties.
    pub fn maxpool2(&mut self, x: Var) -> Result<Var> {
        let (n, c, h, w) = self.value(x).dims4()?;
        if h % 2 != 0 || w % 2 != 0 {
            return Err(NnError::OddDims { height: h, width: w });
        }
        let (oh, ow) = (h / 2, w / 2);
        let xv = self.value(x).data();
        let mut out = Vec::with_capacity(n * c * oh * ow);
        let mut argmax = Vec::with_capacity(n * c * oh * ow);
        for p in 0..n * c {
            let base = p * h * w;
            for y in 0..oh {
                for xx in 0..ow {
                    let mut best = base + 2 * y * w + 2 * xx;
                    for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                        let idx = base + (2 * y + dy) * w + 2 * xx + dx;
                        if xv[idx] > xv[best] {
                            best = idx;
                        }
                    }
                    out.push(xv[best]);
                    argmax.push(best);
                }
            }
        }
        let t = Tensor::new(vec![n, c, oh, ow], out)?;
        Ok(self.push(t, Op::MaxPool2 { x, argmax }))
    }

    /// Nearest-neighbour 2x upsampling.
    pub fn upsample2(&mut self, x: Var) -> Result<Var> {
        let (n, c, h, w) = self.value(x).dims4()?;
        let (oh, ow) = (2 * h, 2 * w);
        let xv = self.value(x).data();
        let mut out = vec![0.0; n * c * oh * ow];
        for p in 0..n * c {
            for y in 0..oh {
                let src = &xv[p * h * w + (y / 2) * w..][..w];
                let dst = &mut out[p * oh * ow + y * ow..][..ow];
                for (xx, d) in dst.iter_mut().enumerate() {
                    *d = src[xx / 2];
                }
            }
        }
        let t = Tensor::new(vec![n, c, oh, ow], out)?;
        Ok(self.push(t, Op::Upsample2(x)))
    }

    /// Concatenates along the channel axis: `(n, ca, h, w) ++ (n, cb, h, w)`.
    pub fn concat_channels(&mut self, a: Var, b: Var) -> Result<Var> {
        let (na, ca, ha, wa) = self.value(a).dims4()?;
        let (nb, cb, hb, wb) = self.value(b).dims4()?;
        if na != nb || ha != hb || wa != wb {
            return Err(mismatch(format!(
                "concat_channels needs equal batch and spatial dims, got {:?} and {:?}",
                self.value(a).shape(),
                self.value(b).shape()
            )));
        }
        let (sa, sb) = (ca * ha * wa, cb * ha * wa);
        let (av, bv) = (self.value(a).data(), self.value(b).data());
        let mut out = Vec::with_capacity(na * (sa + sb));
        for i in 0..na {
            out.extend_from_slice(&av[i * sa..(i + 1) * sa]);
            out.extend_from_slice(&bv[i * sb..(i + 1) * sb]);
        }
        let t = Tensor::new(vec![na, ca + cb, ha, wa], out)?;
        Ok(self.push(t, Op::Concat { a, b }))
    }

    /// `(n, ...)` to `(n, features)`.
    pub fn flatten(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let n = v.shape()[0];
        let f = v.len() / n.max(1);
        let t = v.clone().reshape(vec![n, f]).expect("same count");
        self.push(t, Op::Flatten(x))
    }

    /// Fully connected layer: `x (n, in)`, `w (out, in)`, `b (out)`.
    pub fn dense(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let xs = self.value(x).shape().to_vec();
        let ws = self.value(w).shape().to_vec();
        if xs.len() != 2 || ws.len() != 2 || ws[1] != xs[1] {
            return Err(mismatch(format!("dense weight {:?} vs input {:?}", ws, xs)));
        }
        let (n, fin, fout) = (xs[0], xs[1], ws[0]);
        if self.value(b).len() != fout {
            return Err(mismatch(format!("dense bias must have {} entries", fout)));
        }
        let mut out = Vec::with_capacity(n * fout);
        for _ in 0..n {
            out.extend_from_slice(self.value(b).data());
        }
        gemm(n, fin, fout, self.value(x).data(), false, self.value(w).data(), true, 1.0, &mut out);
        let t = Tensor::new(vec![n, fout], out)?;
        Ok(self.push(t, Op::Dense { x, w, b }))
    }

    /// Mean over the batch of `-ln softmax(logits)[label]`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let s = self.value(logits).shape().to_vec();
        if s.len() != 2 || s[0] != labels.len() {
            return Err(mismatch(format!(
                "logits {:?} vs {} labels",
                s,
                labels.len()
            )));
        }
        let (n, k) = (s[0], s[1]);
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(NnError::InvalidArgument(format!(
                "label {} out of range for {} classes",
                bad, k
            )));
        }
        let probs = softmax_rows(self.value(logits).data(), k);
        let loss = (0..n).map(|i| -probs[i * k + labels[i]].ln()).sum::<f64>() / n as f64;
        Ok(self.push(
            Tensor::scalar(loss),
            Op::SoftmaxCe { logits, labels: labels.to_vec(), probs },
        ))
    }

    fn check_same(&self, a: Var, b: Var, what: &str) -> Result<()> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(mismatch(format!(
                "{} operands {:?} vs {:?}",
                what,
                self.value(a).shape(),
                self.value(b).shape()
            )));
        }
        Ok(())
    }

    /// Mean over all elements of `(a - b)^2`.
    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same(a, b, "mse")?;
        let (av, bv) = (self.value(a).data(), self.value(b).data());
        let loss = av.iter().zip(bv).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / av.len() as f64;
        Ok(self.push(Tensor::scalar(loss), Op::Mse { a, b }))
    }

    /// Mean over all elements of the wing function of `a - b`.
    pub fn wing(&mut self, a: Var, b: Var, w: f64, eps: f64) -> Result<Var> {
        self.check_same(a, b, "wing")?;
        if !(w > 0.0 && eps > 0.0) {
            return Err(NnError::InvalidArgument(format!(
                "wing needs w > 0 and eps > 0, got w={} eps={}",
                w, eps
            )));
        }
        let (av, bv) = (self.value(a).data(), self.value(b).data());
        let loss = av.iter().zip(bv).map(|(x, y)| wing_value(x - y, w, eps)).sum::<f64>()
            / av.len() as f64;
        Ok(self.push(Tensor::scalar(loss), Op::Wing { a, b, w, eps }))
    }

    /// Mean endpoint error over pixels of two `(n, 2, h, w)` flow tensors.
    pub fn endpoint(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same(a, b, "endpoint")?;
        let (n, c, h, w) = self.value(a).dims4()?;
        if c != 2 {
            return Err(mismatch(format!("endpoint needs 2 channels, got {}", c)));
        }
        let hw = h * w;
        let (av, bv) = (self.value(a).data(), self.value(b).data());
        let mut total = 0.0;
        for i in 0..n {
            let base = i * 2 * hw;
            for p in 0..hw {
                let du = av[base + p] - bv[base + p];
                let dv = av[base + hw + p] - bv[base + hw + p];
                total += (du * du + dv * dv).sqrt();
            }
        }
        let loss = total / (n * hw) as f64;
        Ok(self.push(Tensor::scalar(loss), Op::Endpoint { a, b }))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(x))
    }

    /// Reverse sweep from a scalar loss node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.nodes.is_empty() || loss.0 >= self.nodes.len() {
            return Err(NnError::NoForward);
        }
        if self.value(loss).len() != 1 {
            return Err(NnError::NotScalar(self.value(loss).shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);

        fn acc(grads: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut Vec<f64> {
            grads[v.0].get_or_insert_with(|| vec![0.0; len])
        }

        for idx in (0..=loss.0).rev() {
            let Some(gout) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf | Op::Param(_) => {}
                Op::Relu(x) => {
                    let xv = self.value(*x).data();
                    let g = acc(&mut grads, *x, xv.len());
                    for ((gi, go), xi) in g.iter_mut().zip(&gout).zip(xv) {
                        if *xi > 0.0 {
                            *gi += go;
                        }
                    }
                }
                Op::Conv3x3 { x, w, b } => {
                    let (n, cin, h, wd) = self.value(*x).dims4()?;
                    let cout = self.value(*w).shape()[0];
                    let hw = h * wd;
                    let xv = self.value(*x).data();
                    let wv = self.value(*w).data();
                    let mut cols = vec![0.0; cin * 9 * hw];
                    let mut dcols = vec![0.0; cin * 9 * hw];
                    let mut dw = vec![0.0; cout * cin * 9];
                    let mut db = vec![0.0; cout];
                    let mut dx = vec![0.0; xv.len()];
                    for i in 0..n {
                        let go = &gout[i * cout * hw..(i + 1) * cout * hw];
                        for (co, d) in db.iter_mut().enumerate() {
                            *d += go[co * hw..(co + 1) * hw].iter().sum::<f64>();
                        }
                        im2col(&xv[i * cin * hw..(i + 1) * cin * hw], cin, h, wd, &mut cols);
                        gemm(cout, hw, cin * 9, go, false, &cols, true, 1.0, &mut dw);
                        gemm(cin * 9, cout, hw, wv, true, go, false, 0.0, &mut dcols);
                        col2im_add(&dcols, cin, h, wd, &mut dx[i * cin * hw..(i + 1) * cin * hw]);
                    }
                    add_into(acc(&mut grads, *x, dx.len()), &dx);
                    add_into(acc(&mut grads, *w, dw.len()), &dw);
                    add_into(acc(&mut grads, *b, db.len()), &db);
                }
                Op::MaxPool2 { x, argmax } => {
                    let len = self.value(*x).len();
                    let g = acc(&mut grads, *x, len);
                    for (go, &src) in gout.iter().zip(argmax) {
                        g[src] += go;
                    }
                }
                Op::Upsample2(x) => {
                    let (n, c, h, w) = self.value(*x).dims4()?;
                    let (oh, ow) = (2 * h, 2 * w);
                    let g = acc(&mut grads, *x, n * c * h * w);
                    for p in 0..n * c {
                        for y in 0..oh {
                            for xx in 0..ow {
                                g[p * h * w + (y / 2) * w + xx / 2] += gout[p * oh * ow + y * ow + xx];
                            }
                        }
                    }
                }
                Op::Concat { a, b } => {
                    let n = self.value(*a).shape()[0];
                    let sa = self.value(*a).len() / n;
                    let sb = self.value(*b).len() / n;
                    {
                        let g = acc(&mut grads, *a, n * sa);
                        for i in 0..n {
                            add_into(&mut g[i * sa..(i + 1) * sa], &gout[i * (sa + sb)..i * (sa + sb) + sa]);
                        }
                    }
                    let g = acc(&mut grads, *b, n * sb);
                    for i in 0..n {
                        add_into(
                            &mut g[i * sb..(i + 1) * sb],
                            &gout[i * (sa + sb) + sa..(i + 1) * (sa + sb)],
                        );
                    }
                }
                Op::Flatten(x) => {
                    add_into(acc(&mut grads, *x, gout.len()), &gout);
                }
                Op::Dense { x, w, b } => {
                    let xs = self.value(*x).shape();
                    let (n, fin) = (xs[0], xs[1]);
                    let fout = self.value(*w).shape()[0];
                    let mut dx = vec![0.0; n * fin];
                    gemm(n, fout, fin, &gout, false, self.value(*w).data(), false, 0.0, &mut dx);
                    let mut dw = vec![0.0; fout * fin];
                    gemm(fout, n, fin, &gout, true, self.value(*x).data(), false, 0.0, &mut dw);
                    let mut db = vec![0.0; fout];
                    for i in 0..n {
                        add_into(&mut db, &gout[i * fout..(i + 1) * fout]);
                    }
                    add_into(acc(&mut grads, *x, dx.len()), &dx);
                    add_into(acc(&mut grads, *w, dw.len()), &dw);
                    add_into(acc(&mut grads, *b, db.len()), &db);
                }
                Op::SoftmaxCe { logits, labels, probs } => {
                    let n = labels.len();
                    let k = probs.len() / n;
                    let scale = gout[0] / n as f64;
                    let g = acc(&mut grads, *logits, probs.len());
                    for i in 0..n {
                        for j in 0..k {
                            let t = if j == labels[i] { 1.0 } else { 0.0 };
                            g[i * k + j] += scale * (probs[i * k + j] - t);
                        }
                    }
                }
                Op::Mse { a, b } => {
                    let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                    let scale = 2.0 * gout[0] / av.len() as f64;
                    let d: Vec<f64> = av.iter().zip(bv).map(|(x, y)| scale * (x - y)).collect();
                    pair_grads(&mut grads, *a, *b, &d);
                }
                Op::Wing { a, b, w, eps } => {
                    let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                    let scale = gout[0] / av.len() as f64;
                    let d: Vec<f64> = av
                        .iter()
                        .zip(bv)
                        .map(|(x, y)| scale * wing_slope(x - y, *w, *eps))
                        .collect();
                    pair_grads(&mut grads, *a, *b, &d);
                }
                Op::Endpoint { a, b } => {
                    let (n, _, h, w) = self.value(*a).dims4()?;
                    let hw = h * w;
                    let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                    let scale = gout[0] / (n * hw) as f64;
                    let mut d = vec![0.0; av.len()];
                    for i in 0..n {
                        let base = i * 2 * hw;
                        for p in 0..hw {
                            let du = av[base + p] - bv[base + p];
                            let dv = av[base + hw + p] - bv[base + hw + p];
                            let norm = (du * du + dv * dv).sqrt();
                            // subgradient 0 at coincident vectors
                            if norm > 0.0 {
                                d[base + p] = scale * du / norm;
                                d[base + hw + p] = scale * dv / norm;
                            }
                        }
                    }
                    pair_grads(&mut grads, *a, *b, &d);
                }
                Op::Sum(x) => {
                    let len = self.value(*x).len();
                    let g = acc(&mut grads, *x, len);
                    for gi in g.iter_mut() {
                        *gi += gout[0];
                    }
                }
            }
            grads[idx] = Some(gout);
        }

        let params = self
            .nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| match n.op {
                Op::Param(pid) => Some((pid, Var(i))),
                _ => None,
            })
            .collect();
        Ok(Gradients { grads, params })
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

fn pair_grads(grads: &mut [Option<Vec<f64>>], a: Var, b: Var, d: &[f64]) {
    let ga = grads[a.0].get_or_insert_with(|| vec![0.0; d.len()]);
    add_into(ga, d);
    let gb = grads[b.0].get_or_insert_with(|| vec![0.0; d.len()]);
    for (g, v) in gb.iter_mut().zip(d) {
        *g -= v;
    }
}

/// Row-wise numerically stable softmax of a `(n, k)` buffer.
pub fn softmax_rows(logits: &[f64], k: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(logits.len());
    for row in logits.chunks(k) {
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|v| (v - m).exp()).collect();
        let z: f64 = exps.iter().sum();
        out.extend(exps.iter().map(|e| e / z));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: Vec<f64>) -> Tensor {
        Tensor::new(shape.to_vec(), data).unwrap()
    }

    #[test]
    fn identity_kernel_reproduces_input() {
        let mut g = Graph::new();
        let data: Vec<f64> = (0..2 * 5 * 6).map(|i| (i as f64).sin()).collect();
        let x = g.input(t(&[1, 2, 5, 6], data.clone()));
        let mut k = vec![0.0; 2 * 2 * 9];
        k[4] = 1.0; // out 0 <- in 0 centre
        k[18 + 9 + 4] = 1.0; // out 1 <- in 1 centre
        let w = g.input(t(&[2, 2, 3, 3], k));
        let b = g.input(Tensor::zeros(vec![2]));
        let y = g.conv3x3(x, w, b).unwrap();
        assert_eq!(g.value(y).data(), &data[..]);
    }

    #[test]
    fn box_kernel_sums_constant_interior() {
        let mut g = Graph::new();
        let x = g.input(Tensor::full(vec![1, 1, 4, 4], 0.75));
        let w = g.input(Tensor::full(vec![1, 1, 3, 3], 1.0));
        let b = g.input(Tensor::zeros(vec![1]));
        let y = g.conv3x3(x, w, b).unwrap();
        let v = g.value(y).data();
        for (r, c) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
            assert!((v[r * 4 + c] - 9.0 * 0.75).abs() < 1e-15);
        }
        assert!((v[0] - 4.0 * 0.75).abs() < 1e-15);
    }

    #[test]
    fn conv_rejects_channel_mismatch() {
        let mut g = Graph::new();
        let x = g.input(Tensor::zeros(vec![1, 3, 4, 4]));
        let w = g.input(Tensor::zeros(vec![2, 2, 3, 3]));
        let b = g.input(Tensor::zeros(vec![2]));
        assert!(matches!(g.conv3x3(x, w, b), Err(NnError::ShapeMismatch(_))));
    }

    #[test]
    fn maxpool_rejects_odd_dims() {
        let mut g = Graph::new();
        let x = g.input(Tensor::zeros(vec![1, 1, 5, 4]));
        assert!(matches!(g.maxpool2(x), Err(NnError::OddDims { .. })));
    }

    #[test]
    fn concat_shapes_add_channels() {
        let mut g = Graph::new();
        let a = g.input(Tensor::zeros(vec![1, 8, 16, 16]));
        let b = g.input(Tensor::zeros(vec![1, 16, 16, 16]));
        let c = g.concat_channels(a, b).unwrap();
        assert_eq!(g.value(c).shape(), &[1, 24, 16, 16]);
        let d = g.input(Tensor::zeros(vec![1, 16, 8, 8]));
        assert!(g.concat_channels(a, d).is_err());
    }

    #[test]
    fn uniform_logits_give_ln6() {
        let mut g = Graph::new();
        let l = g.input(Tensor::full(vec![1, 6], 0.3));
        for label in 0..6 {
            let loss = g.softmax_cross_entropy(l, &[label]).unwrap();
            assert!((g.value(loss).data()[0] - 6f64.ln()).abs() < 1e-12);
        }
        assert!((6f64.ln() - 1.7918).abs() < 1e-4);
    }

    #[test]
    fn sum_backward_is_ones() {
        let mut g = Graph::new();
        let x = g.input(t(&[2, 3], vec![1.0, -2.0, 3.0, 0.5, 0.0, 9.0]));
        let s = g.sum(x);
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.wrt(x).unwrap(), &[1.0; 6]);
    }

    #[test]
    fn backward_without_forward_fails() {
        let g = Graph::new();
        assert!(matches!(g.backward(Var(0)), Err(NnError::NoForward)));
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut g = Graph::new();
        let x = g.input(Tensor::zeros(vec![2]));
        assert!(matches!(g.backward(x), Err(NnError::NotScalar(_))));
    }

    #[test]
    fn wing_rejects_nonpositive_parameters() {
        let mut g = Graph::new();
        let a = g.input(Tensor::zeros(vec![2]));
        let b = g.input(Tensor::zeros(vec![2]));
        assert!(g.wing(a, b, 0.0, 1.0).is_err());
        assert!(g.wing(a, b, 1.0, -1.0).is_err());
    }

    #[test]
    fn wing_branches_meet_at_w() {
        for (w, eps) in [(10.0f64, 2.0f64), (0.5, 0.1), (3.0, 7.0)] {
            let below = w * (w / eps).ln_1p();
            assert!((wing_value(w, w, eps) - below).abs() < 1e-12);
        }
    }
}
