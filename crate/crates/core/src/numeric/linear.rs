use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::matrix::{axpy, Matrix};

/// Affine map `y = W x + b` with `W` of shape (out, in).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

/// Gradients of a loss with respect to an affine layer's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGrads {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl LinearGrads {
    pub fn zeros_like(layer: &Affine) -> Self {
        Self {
            weight: Matrix::zeros(layer.weight.rows(), layer.weight.cols()),
            bias: vec![0.0; layer.bias.len()],
        }
    }

    pub fn clear(&mut self) {
        self.weight.fill(0.0);
        self.bias.iter_mut().for_each(|b| *b = 0.0);
    }

    pub fn scale(&mut self, s: f64) {
        self.weight.scale_in_place(s);
        self.bias.iter_mut().for_each(|b| *b *= s);
    }
}

impl Affine {
    pub fn new(weight: Matrix, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != weight.rows() {
            return Err(Error::shape(format!("bias of length {}", weight.rows()), bias.len()));
        }
        Ok(Self { weight, bias })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            weight: Matrix::identity(n),
            bias: vec![0.0; n],
        }
    }

    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Self {
            weight: Matrix::zeros(out_dim, in_dim),
            bias: vec![0.0; out_dim],
        }
    }

    /// Weights from N(0, 1/fan_in), zero bias.
    pub fn random<R: Rng + ?Sized>(out_dim: usize, in_dim: usize, rng: &mut R) -> Self {
        let std = 1.0 / (in_dim as f64).sqrt();
        Self {
            weight: Matrix::random_normal(out_dim, in_dim, std, rng),
            bias: vec![0.0; out_dim],
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        linear_forward(&self.weight, &self.bias, x)
    }

    /// Adds this sample's parameter gradient into `grads` and returns ∂L/∂x.
    pub fn backward_into(&self, x: &[f64], upstream: &[f64], grads: &mut LinearGrads) -> Result<Vec<f64>> {
        check_backward_shapes(&self.weight, x, upstream)?;
        grads.weight.add_outer(1.0, upstream, x);
        axpy(1.0, upstream, &mut grads.bias);
        self.weight.matvec_t(upstream)
    }

    /// Same as [`Affine::backward_into`] without computing ∂L/∂x.
    pub fn accumulate_param_grads(&self, x: &[f64], upstream: &[f64], grads: &mut LinearGrads) -> Result<()> {
        check_backward_shapes(&self.weight, x, upstream)?;
        grads.weight.add_outer(1.0, upstream, x);
        axpy(1.0, upstream, &mut grads.bias);
        Ok(())
    }
}

fn check_backward_shapes(w: &Matrix, x: &[f64], upstream: &[f64]) -> Result<()> {
    if x.len() != w.cols() {
        return Err(Error::shape(format!("input of length {}", w.cols()), x.len()));
    }
    if upstream.len() != w.rows() {
        return Err(Error::shape(format!("upstream of length {}", w.rows()), upstream.len()));
    }
    Ok(())
}

/// `y = W x + b`.
pub fn linear_forward(w: &Matrix, b: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    if b.len() != w.rows() {
        return Err(Error::shape(format!("bias of length {}", w.rows()), b.len()));
    }
    let mut y = w.matvec(x)?;
    axpy(1.0, b, &mut y);
    Ok(y)
}

/// Gradients of `y = W x + b` given the upstream gradient ∂L/∂y.
/// Returns (∂L/∂W, ∂L/∂b, ∂L/∂x).
pub fn linear_backward(w: &Matrix, x: &[f64], upstream: &[f64]) -> Result<(LinearGrads, Vec<f64>)> {
    check_backward_shapes(w, x, upstream)?;
    let mut dw = Matrix::zeros(w.rows(), w.cols());
    dw.add_outer(1.0, upstream, x);
    let dx = w.matvec_t(upstream)?;
    Ok((
        LinearGrads {
            weight: dw,
            bias: upstream.to_vec(),
        },
        dx,
    ))
}
