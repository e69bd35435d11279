//! Distance-based encoder: neuron `i` fires with `2 - sqrt(2 - 2 cos(x, w_i))`.
//!
//! The backward pass is taken on the Top-K support only; rows outside the
//! support get zero gradient. Near `cos = 1` the square root has an infinite
//! derivative, so such neurons are skipped and counted instead.

use crate::error::{Error, Result};
use crate::numeric::matrix::{axpy, dot, norm, Matrix};
use crate::numeric::ops::{distance_activation, ZERO_NORM};

/// `2 - 2cos` below this counts as numerically parallel.
pub const DEGENERATE_GAP: f64 = 2e-9;

/// Encoder rows scaled to unit length, plus their original norms.
#[derive(Debug, Clone)]
pub struct UnitRows {
    pub unit: Matrix,
    pub norms: Vec<f64>,
}

impl UnitRows {
    pub fn new(w: &Matrix) -> Result<Self> {
        let mut unit = w.clone();
        let mut norms = Vec::with_capacity(w.rows());
        for r in 0..w.rows() {
            let row = unit.row_mut(r);
            let n = norm(row);
            if !(n >= ZERO_NORM) {
                return Err(Error::ZeroVector);
            }
            row.iter_mut().for_each(|v| *v /= n);
            norms.push(n);
        }
        Ok(Self { unit, norms })
    }
}

/// Forward intermediates for one input.
#[derive(Debug, Clone)]
pub struct DistanceForward {
    pub x_unit: Vec<f64>,
    pub x_norm: f64,
    pub cos: Vec<f64>,
    pub pre: Vec<f64>,
}

pub fn distance_forward(x: &[f64], rows: &UnitRows) -> Result<DistanceForward> {
    if x.len() != rows.unit.cols() {
        return Err(Error::shape(format!("input of length {}", rows.unit.cols()), x.len()));
    }
    let x_norm = norm(x);
    if !(x_norm >= ZERO_NORM) {
        return Err(Error::ZeroVector);
    }
    let x_unit: Vec<f64> = x.iter().map(|v| v / x_norm).collect();
    let cos: Vec<f64> = rows
        .unit
        .iter_rows()
        .map(|w| dot(w, &x_unit).clamp(-1.0, 1.0))
        .collect();
    let pre = cos.iter().map(|&c| distance_activation(c)).collect();
    Ok(DistanceForward {
        x_unit,
        x_norm,
        cos,
        pre,
    })
}

/// Dense pre-activations `2 - g(x, w_i)` for every row of `w`.
pub fn distance_pre_activations(x: &[f64], w: &Matrix) -> Result<Vec<f64>> {
    Ok(distance_forward(x, &UnitRows::new(w)?)?.pre)
}

/// Gradients of the masked activations.
#[derive(Debug, Clone)]
pub struct DistanceGrads {
    pub input: Vec<f64>,
    pub weight: Matrix,
    /// Active neurons whose gradient was dropped at the `cos = 1` singularity.
    pub degenerate: usize,
}

/// Backward pass given ∂L/∂h for the post-Top-K activations `h`.
pub fn distance_encoder_backward(x: &[f64], w: &Matrix, upstream: &[f64], active: &[usize]) -> Result<DistanceGrads> {
    if upstream.len() != w.rows() {
        return Err(Error::shape(format!("upstream of length {}", w.rows()), upstream.len()));
    }
    if let Some(&bad) = active.iter().find(|&&i| i >= w.rows()) {
        return Err(Error::shape(format!("active index < {}", w.rows()), bad));
    }
    let rows = UnitRows::new(w)?;
    let fwd = distance_forward(x, &rows)?;
    let mut weight = Matrix::zeros(w.rows(), w.cols());
    let mut input = vec![0.0; x.len()];
    let degenerate = distance_backward_into(&fwd, &rows, upstream, active, &mut weight, Some(&mut input));
    Ok(DistanceGrads {
        input,
        weight,
        degenerate,
    })
}

/// Accumulates the encoder gradient into `d_w` (and `d_x` when given).
/// Returns the number of degenerate neurons skipped.
pub fn distance_backward_into(
    fwd: &DistanceForward,
    rows: &UnitRows,
    upstream: &[f64],
    active: &[usize],
    d_w: &mut Matrix,
    mut d_x: Option<&mut [f64]>,
) -> usize {
    let mut degenerate = 0;
    for &i in active {
        if i >= rows.norms.len() {
            continue;
        }
        let up = upstream[i];
        if up == 0.0 {
            continue;
        }
        let c = fwd.cos[i];
        let gap = 2.0 - 2.0 * c;
        if gap < DEGENERATE_GAP {
            degenerate += 1;
            continue;
        }
        // da/dc = 1/sqrt(2 - 2c)
        let dadc = up / gap.sqrt();
        let w_unit = rows.unit.row(i);

        // dc/dw = (x̂ - c ŵ) / |w|
        let sw = dadc / rows.norms[i];
        let row = d_w.row_mut(i);
        axpy(sw, &fwd.x_unit, row);
        axpy(-sw * c, w_unit, row);

        if let Some(dx) = d_x.as_deref_mut() {
            // dc/dx = (ŵ - c x̂) / |x|
            let sx = dadc / fwd.x_norm;
            axpy(sx, w_unit, dx);
            axpy(-sx * c, &fwd.x_unit, dx);
        }
    }
    degenerate
}
