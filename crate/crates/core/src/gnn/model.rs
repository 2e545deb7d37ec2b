use crate::autodiff::{softmax_cross_entropy, Tape, Var};
use crate::error::{Error, Result};
use crate::gnn::context::ForwardContext;
use crate::gnn::params::{LayerKind, ModelParams};
use crate::tensor::Matrix;

struct Recorded {
    logits: Var,
    /// (weight, bias) variables per layer.
    params: Vec<(Var, Var)>,
}

/// `H⁰ = X`, `Hˡ⁺¹ = ReLU(Â Hˡ Wˡ + bˡ)` with the last layer left linear.
/// Dense layers skip the `Â` propagation.
fn record<'a>(tape: &mut Tape<'a>, ctx: &'a ForwardContext, params: &ModelParams) -> Result<Recorded> {
    if ctx.features.cols() != params.in_dim() {
        return Err(Error::Shape(format!(
            "features have {} columns, model expects {}",
            ctx.features.cols(),
            params.in_dim()
        )));
    }
    if ctx.adjacency.dim() != ctx.features.rows() {
        return Err(Error::Shape("adjacency and features disagree on node count".into()));
    }
    let mut h = tape.constant(ctx.features.clone());
    let mut vars = Vec::with_capacity(params.layers().len());
    let last = params.layers().len() - 1;
    for (l, shape) in params.layers().iter().enumerate() {
        let (w, b) = params.layer_matrices(l);
        let w = tape.input(w);
        let b = tape.input(b);
        let mut z = tape.matmul(h, w)?;
        if shape.kind == LayerKind::GcnConv {
            z = tape.propagate(&ctx.adjacency, z)?;
        }
        z = tape.add_bias(z, b)?;
        h = if l < last { tape.relu(z) } else { z };
        vars.push((w, b));
    }
    Ok(Recorded { logits: h, params: vars })
}

/// Per-node class logits (`num_nodes × num_classes`).
pub fn forward_logits(ctx: &ForwardContext, params: &ModelParams) -> Result<Matrix> {
    let mut tape = Tape::new();
    let rec = record(&mut tape, ctx, params)?;
    Ok(tape.value(rec.logits).clone())
}

/// Mean softmax cross-entropy over `nodes` and its gradient with respect to
/// the flat parameter vector.
pub fn loss_and_grad(
    ctx: &ForwardContext,
    params: &ModelParams,
    labels: &[usize],
    nodes: &[usize],
) -> Result<(f64, Vec<f64>)> {
    let mut tape = Tape::new();
    let rec = record(&mut tape, ctx, params)?;
    let (loss, seed) = softmax_cross_entropy(tape.value(rec.logits), labels, nodes)?;
    let adjoints = tape.backward(rec.logits, seed)?;
    let mut grad = vec![0.0; params.len()];
    for ((w_var, b_var), (w_at, b_at)) in rec.params.iter().zip(params.offsets()) {
        if let Some(gw) = &adjoints[w_var.index()] {
            grad[w_at..w_at + gw.data().len()].copy_from_slice(gw.data());
        }
        if let Some(gb) = &adjoints[b_var.index()] {
            grad[b_at..b_at + gb.data().len()].copy_from_slice(gb.data());
        }
    }
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnn::context::normalize_adjacency;
    use crate::gnn::params::{Architecture, LayerShape};
    use crate::graph::fixtures::graph_with_labels;

    fn identity_layer(dim: usize, kind: LayerKind) -> ModelParams {
        let mut values = Matrix::identity(dim).into_vec();
        values.extend(vec![0.0; dim]);
        ModelParams::from_parts(
            vec![LayerShape {
                in_dim: dim,
                out_dim: dim,
                kind,
            }],
            values,
            0,
        )
        .unwrap()
    }

    #[test]
    fn isolated_node_identity_returns_features() {
        let g = graph_with_labels(&[0], &[]);
        let g = g.with_features(Matrix::from_rows(&[vec![0.3, -2.0]]).unwrap()).unwrap();
        let ctx = normalize_adjacency(&g);
        let logits = forward_logits(&ctx, &identity_layer(2, LayerKind::GcnConv)).unwrap();
        assert_eq!(logits.row(0), &[0.3, -2.0]);
    }

    #[test]
    fn two_node_clique_averages() {
        let g = graph_with_labels(&[0, 0], &[(0, 1)]);
        let g = g.with_features(Matrix::from_rows(&[vec![1.0], vec![3.0]]).unwrap()).unwrap();
        let logits = forward_logits(&normalize_adjacency(&g), &identity_layer(1, LayerKind::GcnConv)).unwrap();
        assert!((logits.get(0, 0) - 2.0).abs() < 1e-15);
        assert!((logits.get(1, 0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn zero_weights_give_uniform_prediction() {
        let g = graph_with_labels(&[0, 1, 1], &[(0, 1), (1, 2)]);
        let ctx = normalize_adjacency(&g);
        let mut p = ModelParams::init(Architecture::Gcn, 1, 4, 2, 2, 0).unwrap();
        p.scale(0.0);
        let logits = forward_logits(&ctx, &p).unwrap();
        assert!(logits.data().iter().all(|&x| x == 0.0));
        let (loss, _) = loss_and_grad(&ctx, &p, g.labels(), &[0, 1, 2]).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_shape_error() {
        let g = graph_with_labels(&[0, 1], &[(0, 1)]);
        let p = ModelParams::init(Architecture::Gcn, 3, 4, 2, 2, 0).unwrap();
        assert!(matches!(forward_logits(&normalize_adjacency(&g), &p), Err(Error::Shape(_))));
    }

    #[test]
    fn single_dense_layer_is_logistic_regression() {
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![-1.0, 0.5]]).unwrap();
        let p = ModelParams::from_parts(
            vec![LayerShape {
                in_dim: 2,
                out_dim: 2,
                kind: LayerKind::Dense,
            }],
            vec![0.5, -0.5, 1.0, 0.25, 0.1, -0.1],
            0,
        )
        .unwrap();
        let ctx = ForwardContext::features_only(x.clone());
        let logits = forward_logits(&ctx, &p).unwrap();
        // z = x W + b
        assert!((logits.get(0, 0) - (0.5 + 2.0 + 0.1)).abs() < 1e-15);
        assert!((logits.get(1, 1) - (0.5 + 0.125 - 0.1)).abs() < 1e-15);
    }
}
