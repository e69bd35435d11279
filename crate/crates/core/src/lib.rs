//! Vision-language sparse autoencoders.
//!
//! Paired vision and language embeddings are optionally mapped into a
//! shared space by a small contrastive autoencoder ([`align`]), then
//! encoded by a sparse autoencoder whose neurons fire on normalized
//! distance to learned concept directions and are decoded separately per
//! modality ([`sae`]). [`concept`] describes and scores the learned
//! neurons, [`enhance`] uses them to rescore and refine representations.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod align;
pub mod concept;
pub mod config;
pub mod data;
pub mod enhance;
pub mod error;
pub mod modality;
pub mod numeric;
pub mod rng;
pub mod sae;
pub mod train;

pub use error::{Error, Result};
pub use modality::Modality;
