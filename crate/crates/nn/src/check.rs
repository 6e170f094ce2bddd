//! Central finite-difference gradient checking.
//!
//! Only forward evaluations are used here, so the numbers are independent of
//! the backward implementation they are compared against.

use crate::error::Result;
use crate::graph::{Graph, Var};
use crate::tensor::Tensor;

/// Forward builder: receives the graph and one `Var` per input, returns the scalar loss.
pub type Builder<'a> = dyn Fn(&mut Graph, &[Var]) -> Result<Var> + 'a;

fn eval(build: &Builder, inputs: &[Tensor]) -> Result<f64> {
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.input(t.clone())).collect();
    let loss = build(&mut g, &vars)?;
    Ok(g.value(loss).data()[0])
}

/// Central differences `(f(x+h) - f(x-h)) / 2h` for every element of every input.
pub fn numerical_grads(build: &Builder, inputs: &[Tensor], h: f64) -> Result<Vec<Vec<f64>>> {
    let mut work: Vec<Tensor> = inputs.to_vec();
    let mut out = Vec::with_capacity(inputs.len());
    for i in 0..inputs.len() {
        let mut g = vec![0.0; inputs[i].len()];
        for (j, gj) in g.iter_mut().enumerate() {
            let orig = work[i].data()[j];
            work[i].data_mut()[j] = orig + h;
            let fp = eval(build, &work)?;
            work[i].data_mut()[j] = orig - h;
            let fm = eval(build, &work)?;
            work[i].data_mut()[j] = orig;
            *gj = (fp - fm) / (2.0 * h);
        }
        out.push(g);
    }
    Ok(out)
}

/// Backward-pass gradients for the same builder, zeros where the loss does not depend.
pub fn analytic_grads(build: &Builder, inputs: &[Tensor]) -> Result<Vec<Vec<f64>>> {
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.input(t.clone())).collect();
    let loss = build(&mut g, &vars)?;
    let grads = g.backward(loss)?;
    Ok(vars
        .iter()
        .zip(inputs)
        .map(|(v, t)| grads.wrt(*v).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; t.len()]))
        .collect())
}

/// `||a - b|| / max(||a||, ||b||)`, zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale < 1e-300 {
        0.0
    } else {
        diff / scale
    }
}

/// Worst per-input relative error between backward and finite differences.
pub fn max_relative_error(build: &Builder, inputs: &[Tensor], h: f64) -> Result<f64> {
    let an = analytic_grads(build, inputs)?;
    let nu = numerical_grads(build, inputs, h)?;
    Ok(an
        .iter()
        .zip(&nu)
        .map(|(a, n)| relative_error(a, n))
        .fold(0.0, f64::max))
}
