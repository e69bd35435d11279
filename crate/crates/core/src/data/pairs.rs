use std::collections::HashMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modality::Modality;
use crate::numeric::Matrix;
use crate::rng::seeded;

/// Train fraction for the default 4:1 split.
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Split {
    Train,
    Test,
}

/// Paired vision/language rows; row `i` of each matrix is a positive pair.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingPairSet {
    pub vision: Matrix,
    pub language: Matrix,
    pub ids: Vec<String>,
    /// Ground-truth latent per row (synthetic data only).
    pub latents: Option<Matrix>,
    /// Concept index per row (synthetic data only).
    pub labels: Option<Vec<usize>>,
    pub split: Vec<Split>,
}

impl EmbeddingPairSet {
    pub fn new(vision: Matrix, language: Matrix, ids: Vec<String>) -> Result<Self> {
        if vision.shape() != language.shape() {
            return Err(Error::DimMismatch(format!(
                "vision {:?} vs language {:?}",
                vision.shape(),
                language.shape()
            )));
        }
        if ids.len() != vision.rows() {
            return Err(Error::DimMismatch(format!(
                "{} ids for {} rows",
                ids.len(),
                vision.rows()
            )));
        }
        let n = vision.rows();
        Ok(Self {
            vision,
            language,
            ids,
            latents: None,
            labels: None,
            split: vec![Split::Train; n],
        })
    }

    /// Same as [`EmbeddingPairSet::new`] with ids `0..N`.
    pub fn from_matrices(vision: Matrix, language: Matrix) -> Result<Self> {
        let ids = (0..vision.rows()).map(|i| i.to_string()).collect();
        Self::new(vision, language, ids)
    }

    pub fn with_latents(mut self, latents: Matrix) -> Result<Self> {
        if latents.rows() != self.len() {
            return Err(Error::DimMismatch(format!(
                "{} latents for {} rows",
                latents.rows(),
                self.len()
            )));
        }
        self.latents = Some(latents);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.vision.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.vision.cols()
    }

    pub fn rows(&self, modality: Modality) -> &Matrix {
        match modality {
            Modality::Vision => &self.vision,
            Modality::Language => &self.language,
        }
    }

    pub fn indices(&self, part: Split) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.split[i] == part).collect()
    }

    /// Rows at `idx`, in order, keeping every per-row field.
    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            vision: self.vision.select_rows(idx),
            language: self.language.select_rows(idx),
            ids: idx.iter().map(|&i| self.ids[i].clone()).collect(),
            latents: self.latents.as_ref().map(|m| m.select_rows(idx)),
            labels: self.labels.as_ref().map(|l| idx.iter().map(|&i| l[i]).collect()),
            split: idx.iter().map(|&i| self.split[i]).collect(),
        }
    }

    pub fn partition(&self, part: Split) -> Self {
        self.subset(&self.indices(part))
    }

    /// Concept labels, taken from `labels` or recovered by grouping rows
    /// with bit-identical latents (first appearance order).
    pub fn concept_labels(&self) -> Option<Vec<usize>> {
        if let Some(l) = &self.labels {
            return Some(l.clone());
        }
        let latents = self.latents.as_ref()?;
        let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
        let labels = latents
            .iter_rows()
            .map(|r| {
                let key: Vec<u64> = r.iter().map(|v| v.to_bits()).collect();
                let next = seen.len();
                *seen.entry(key).or_insert(next)
            })
            .collect();
        Some(labels)
    }
}

/// Random train/test partition with `round(N · train_fraction)` training rows.
pub fn split(set: &EmbeddingPairSet, train_fraction: f64, seed: u64) -> Result<EmbeddingPairSet> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::BadSpec(format!(
            "train fraction must lie in (0,1), got {train_fraction}"
        )));
    }
    let n = set.len();
    let n_train = (n as f64 * train_fraction).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded(seed));
    let mut out = set.clone();
    for (rank, &i) in order.iter().enumerate() {
        out.split[i] = if rank < n_train { Split::Train } else { Split::Test };
    }
    Ok(out)
}

/// Train fraction for an integer `train:test` ratio such as 4:1.
pub fn ratio_to_fraction(train: u32, test: u32) -> Result<f64> {
    if train == 0 || test == 0 {
        return Err(Error::BadSpec(format!(
            "ratio {train}:{test} must have both parts positive"
        )));
    }
    Ok(train as f64 / (train + test) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize) -> EmbeddingPairSet {
        let v = Matrix::from_vec(n, 2, (0..2 * n).map(|i| i as f64 + 1.0).collect()).unwrap();
        let l = Matrix::from_vec(n, 2, (0..2 * n).map(|i| -(i as f64) - 1.0).collect()).unwrap();
        EmbeddingPairSet::from_matrices(v, l).unwrap()
    }

    #[test]
    fn four_to_one_on_100_rows() {
        let s = split(&toy(100), ratio_to_fraction(4, 1).unwrap(), 3).unwrap();
        assert_eq!(s.indices(Split::Train).len(), 80);
        assert_eq!(s.indices(Split::Test).len(), 20);
    }

    #[test]
    fn split_is_seeded() {
        let a = split(&toy(50), 0.8, 11).unwrap();
        let b = split(&toy(50), 0.8, 11).unwrap();
        let c = split(&toy(50), 0.8, 12).unwrap();
        assert_eq!(a.split, b.split);
        assert_ne!(a.split, c.split);
    }

    #[test]
    fn split_keeps_pairs_together() {
        let set = toy(30);
        let s = split(&set, 0.8, 1).unwrap();
        let train = s.partition(Split::Train);
        for (k, &i) in s.indices(Split::Train).iter().enumerate() {
            assert_eq!(train.vision.row(k), set.vision.row(i));
            assert_eq!(train.language.row(k), set.language.row(i));
        }
    }

    #[test]
    fn split_errors() {
        let empty = EmbeddingPairSet::from_matrices(Matrix::zeros(0, 3), Matrix::zeros(0, 3)).unwrap();
        assert!(matches!(split(&empty, 0.8, 0), Err(Error::EmptySet)));
        assert!(matches!(split(&toy(4), 1.0, 0), Err(Error::BadSpec(_))));
    }

    #[test]
    fn mismatched_rows_rejected() {
        let r = EmbeddingPairSet::from_matrices(Matrix::zeros(2, 3), Matrix::zeros(3, 3));
        assert!(matches!(r, Err(Error::DimMismatch(_))));
    }

    #[test]
    fn labels_from_latents() {
        let lat = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let s = toy(3).with_latents(lat).unwrap();
        assert_eq!(s.concept_labels().unwrap(), vec![0, 1, 0]);
    }
}
