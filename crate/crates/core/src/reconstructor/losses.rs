use flowmend_nn::Graph;

use super::model::flow_to_tensor;
use crate::error::Result;
use crate::flow::FlowField;

fn eval(pred: &FlowField, target: &FlowField, f: impl Fn(&mut Graph, flowmend_nn::Var, flowmend_nn::Var) -> flowmend_nn::Result<flowmend_nn::Var>) -> Result<f64> {
    let mut g = Graph::new();
    let a = g.input(flow_to_tensor(pred, 1.0));
    let b = g.input(flow_to_tensor(target, 1.0));
    let l = f(&mut g, a, b)?;
    Ok(g.value(l).data()[0])
}

/// Mean over cells and both channels of the squared difference.
pub fn mse_loss(pred: &FlowField, target: &FlowField) -> Result<f64> {
    eval(pred, target, |g, a, b| g.mse(a, b))
}

/// Mean wing penalty of the per-element difference.
pub fn wing_loss(pred: &FlowField, target: &FlowField, w: f64, eps: f64) -> Result<f64> {
    eval(pred, target, |g, a, b| g.wing(a, b, w, eps))
}

/// Mean per-pixel Euclidean distance between flow vectors.
pub fn endpoint_loss(pred: &FlowField, target: &FlowField) -> Result<f64> {
    eval(pred, target, |g, a, b| g.endpoint(a, b))
}
