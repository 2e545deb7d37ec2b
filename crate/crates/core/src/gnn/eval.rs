use crate::error::{Error, Result};
use crate::gnn::context::ForwardContext;
use crate::gnn::model::forward_logits;
use crate::gnn::params::ModelParams;
use crate::graph::PopulationGraph;
use crate::tensor::Matrix;

/// Logits over the whole graph (the MLP ignores the edges).
pub fn predict_logits(ctx: &ForwardContext, params: &ModelParams) -> Result<Matrix> {
    forward_logits(ctx, params)
}

/// Argmax accuracy over `nodes`; ties resolve to the lower class id.
pub fn accuracy(logits: &Matrix, labels: &[usize], nodes: &[usize]) -> Result<f64> {
    if nodes.is_empty() {
        return Err(Error::EmptyMask("accuracy over zero nodes".into()));
    }
    let correct = nodes.iter().filter(|&&v| logits.argmax_row(v) == labels[v]).count();
    Ok(correct as f64 / nodes.len() as f64)
}

/// Accuracy of `params` on the nodes selected by `mask`.
pub fn evaluate(graph: &PopulationGraph, params: &ModelParams, mask: &[bool]) -> Result<f64> {
    let nodes = crate::graph::mask_indices(mask);
    if nodes.is_empty() {
        return Err(Error::EmptyMask("evaluation mask selects no node".into()));
    }
    let logits = predict_logits(&ForwardContext::full(graph), params)?;
    accuracy(&logits, graph.labels(), &nodes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_hot_logits_are_perfect() {
        let labels = [0, 1, 1, 0];
        let mut logits = Matrix::zeros(4, 2);
        for (v, &y) in labels.iter().enumerate() {
            logits.set(v, y, 1.0);
        }
        assert_eq!(accuracy(&logits, &labels, &[0, 1, 2, 3]).unwrap(), 1.0);
    }

    #[test]
    fn ties_go_to_class_zero() {
        let labels = [0, 1, 0, 1];
        let logits = Matrix::zeros(4, 2);
        assert_eq!(accuracy(&logits, &labels, &[0, 1, 2, 3]).unwrap(), 0.5);
        assert_eq!(accuracy(&logits, &labels, &[1, 3]).unwrap(), 0.0);
    }

    #[test]
    fn empty_nodes_error() {
        assert!(accuracy(&Matrix::zeros(1, 2), &[0], &[]).is_err());
    }
}
