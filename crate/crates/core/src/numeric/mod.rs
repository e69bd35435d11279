//! Dense linear algebra, the distance/Top-K primitives, hand-written
//! backward passes and the optimizer.

mod adam;
mod distance;
mod linear;
mod matrix;
mod ops;
mod tape;

pub use adam::{adam_step, AdamConfig, AdamState, AffineAdam};
pub use distance::{
    distance_backward_into, distance_encoder_backward, distance_forward, distance_pre_activations, DistanceForward,
    DistanceGrads, UnitRows, DEGENERATE_GAP,
};
pub use linear::{linear_backward, linear_forward, Affine, LinearGrads};
pub use matrix::{axpy, dot, norm, squared_distance, Matrix};
pub use ops::{
    cosine, distance_activation, distance_g, l2_normalize, log_sum_exp, softmax, topk_indices, topk_sparsify, ZERO_NORM,
};
pub use tape::GradTape;
