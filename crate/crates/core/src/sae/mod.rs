//! The VL-SAE and the single-encoder baselines it is compared against.

mod baseline;
mod vlsae;

use rayon::prelude::*;

pub use baseline::{train_baseline, BaselineModels, BaselineSae, BaselineVariant, SaeDPair, Sparsifier};
pub use vlsae::{
    sae_batch_loss_frozen, sae_batch_loss_with_grad, sae_loss, sae_mean_loss, train_sae, PairSupport, SaeGrads, VlSae,
    DEAD_ROW_NORM,
};

use crate::error::Result;
use crate::modality::Modality;
use crate::numeric::{Affine, LinearGrads, Matrix};

/// Rows per gradient work unit. Partial sums are reduced in chunk order.
pub(crate) const GRAD_CHUNK: usize = 32;

/// Anything that maps a representation to hidden-neuron activations.
pub trait ConceptModel: Sync {
    fn hidden(&self) -> usize;
    fn dim(&self) -> usize;
    fn activations(&self, x: &[f64], m: Modality) -> Result<Vec<f64>>;

    fn activations_batch(&self, rows: &Matrix, m: Modality) -> Result<Matrix> {
        let encoded: Vec<Vec<f64>> = (0..rows.rows())
            .into_par_iter()
            .map(|i| self.activations(rows.row(i), m))
            .collect::<Result<_>>()?;
        let mut out = Matrix::zeros(rows.rows(), self.hidden());
        for (i, e) in encoded.iter().enumerate() {
            out.row_mut(i).copy_from_slice(e);
        }
        Ok(out)
    }
}

/// `W h + b` for a sparse `h` given by its support and values.
pub(crate) fn decode_sparse(layer: &Affine, support: &[usize], values: &[f64]) -> Vec<f64> {
    let mut out = layer.bias.clone();
    for (r, o) in out.iter_mut().enumerate() {
        let row = layer.weight.row(r);
        *o += support.iter().zip(values).map(|(&j, &v)| row[j] * v).sum::<f64>();
    }
    out
}

/// Accumulates decoder gradients for a sparse input and returns ∂L/∂h on
/// the support.
pub(crate) fn sparse_decoder_backward(
    layer: &Affine,
    support: &[usize],
    values: &[f64],
    upstream: &[f64],
    grads: &mut LinearGrads,
) -> Vec<f64> {
    let mut dh = vec![0.0; support.len()];
    for (r, &u) in upstream.iter().enumerate() {
        grads.bias[r] += u;
        if u == 0.0 {
            continue;
        }
        let w = layer.weight.row(r);
        let gw = grads.weight.row_mut(r);
        for (t, (&j, &v)) in support.iter().zip(values).enumerate() {
            gw[j] += u * v;
            dh[t] += w[j] * u;
        }
    }
    dh
}
