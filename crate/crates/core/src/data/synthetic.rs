//! Paired embeddings with planted concepts.
//!
//! Each concept is a unit latent `z`. A sample of concept `c` is emitted as
//! `x_v = A_v z + ε_v` and `x_l = A_l z + ε_l`, with two fixed random maps
//! so the modalities live in different distributions while sharing
//! semantics.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::pairs::EmbeddingPairSet;
use crate::error::{Error, Result};
use crate::numeric::{l2_normalize, Matrix};
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub concepts: usize,
    pub dim: usize,
    pub per_concept: usize,
    /// Std of the per-coordinate Gaussian noise.
    pub noise: f64,
    pub seed: u64,
    /// Use `A_v = A_l = I` instead of random modality maps.
    pub identity_maps: bool,
}

impl SyntheticSpec {
    pub fn new(concepts: usize, dim: usize, per_concept: usize, noise: f64, seed: u64) -> Self {
        Self {
            concepts,
            dim,
            per_concept,
            noise,
            seed,
            identity_maps: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.concepts < 2 {
            return Err(Error::BadSpec(format!(
                "need at least 2 concepts, got {}",
                self.concepts
            )));
        }
        if self.dim < 2 {
            return Err(Error::BadSpec(format!(
                "dimension must be at least 2, got {}",
                self.dim
            )));
        }
        if self.per_concept == 0 {
            return Err(Error::BadSpec("samples per concept must be positive".into()));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::BadSpec(format!(
                "noise must be finite and >= 0, got {}",
                self.noise
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticSet {
    pub pairs: EmbeddingPairSet,
    /// Unit latent per concept, `C × d`.
    pub concepts: Matrix,
    pub map_vision: Matrix,
    pub map_language: Matrix,
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticSet> {
    spec.validate()?;
    let d = spec.dim;
    let mut rng = seeded(spec.seed);

    let mut concepts = Matrix::zeros(spec.concepts, d);
    for c in 0..spec.concepts {
        loop {
            let raw: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            if let Ok(unit) = l2_normalize(&raw) {
                concepts.row_mut(c).copy_from_slice(&unit);
                break;
            }
        }
    }

    let (map_vision, map_language) = if spec.identity_maps {
        (Matrix::identity(d), Matrix::identity(d))
    } else {
        let std = 1.0 / (d as f64).sqrt();
        let a_v = Matrix::random_normal(d, d, std, &mut rng);
        let a_l = Matrix::random_normal(d, d, std, &mut rng);
        (a_v, a_l)
    };

    let n = spec.concepts * spec.per_concept;
    let mut labels: Vec<usize> = (0..n).map(|i| i / spec.per_concept).collect();
    labels.shuffle(&mut rng);

    let mut vision = Matrix::zeros(n, d);
    let mut language = Matrix::zeros(n, d);
    let mut latents = Matrix::zeros(n, d);
    for (i, &c) in labels.iter().enumerate() {
        let z = concepts.row(c);
        latents.row_mut(i).copy_from_slice(z);
        let xv = map_vision.matvec(z)?;
        let xl = map_language.matvec(z)?;
        for (dst, src) in [(vision.row_mut(i), &xv), (language.row_mut(i), &xl)] {
            for (o, &s) in dst.iter_mut().zip(src.iter()) {
                let eps: f64 = if spec.noise > 0.0 {
                    spec.noise * rng.sample::<f64, _>(StandardNormal)
                } else {
                    0.0
                };
                *o = s + eps;
            }
        }
    }

    let ids = labels
        .iter()
        .enumerate()
        .map(|(i, c)| format!("s{i:06}-c{c:03}"))
        .collect();
    let mut pairs = EmbeddingPairSet::new(vision, language, ids)?.with_latents(latents)?;
    pairs.labels = Some(labels);
    Ok(SyntheticSet {
        pairs,
        concepts,
        map_vision,
        map_language,
    })
}
