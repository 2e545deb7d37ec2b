use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::tensor::l2_norm;

/// Scales `g` by `min(1, C/‖g‖₂)`.
pub fn clip_in_place(g: &mut [f64], clip_norm: f64) {
    let norm = l2_norm(g);
    if norm > clip_norm {
        let scale = clip_norm / norm;
        g.iter_mut().for_each(|x| *x *= scale);
    }
}

pub fn clip(g: &[f64], clip_norm: f64) -> Vec<f64> {
    let mut out = g.to_vec();
    clip_in_place(&mut out, clip_norm);
    out
}

/// `(Σᵢ clip(gᵢ, C) + N(0, σ²C²I)) / m` for a batch of `m` per-subgraph
/// gradients. `sigma = None` disables the noise term.
pub fn noisy_batch_gradient<R: Rng + ?Sized>(
    gradients: &[Vec<f64>],
    clip_norm: f64,
    sigma: Option<f64>,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(clip_norm > 0.0) {
        return Err(Error::InvalidParameter(format!("clip norm {clip_norm} must be positive")));
    }
    let Some(dim) = gradients.first().map(Vec::len) else {
        return Err(Error::InvalidParameter("empty gradient batch".into()));
    };
    let mut sum = vec![0.0; dim];
    for g in gradients {
        if g.len() != dim {
            return Err(Error::Shape("gradients in a batch differ in length".into()));
        }
        let clipped = clip(g, clip_norm);
        sum.iter_mut().zip(&clipped).for_each(|(s, c)| *s += c);
    }
    if let Some(sigma) = sigma {
        if !(sigma > 0.0) {
            return Err(Error::InvalidParameter(format!("noise multiplier {sigma} must be positive")));
        }
        let normal = Normal::new(0.0, sigma * clip_norm)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        sum.iter_mut().for_each(|s| *s += normal.sample(rng));
    }
    let m = gradients.len() as f64;
    sum.iter_mut().for_each(|s| *s /= m);
    Ok(sum)
}
