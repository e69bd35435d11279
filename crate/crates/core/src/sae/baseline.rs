//! Conventional SAEs: affine encoder, sparsifier, affine decoder.
//!
//! SAE-D trains one such model per modality; SAE-S trains a single model on
//! both modalities' rows.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{SparsifierKind, TrainConfig};
use crate::data::EmbeddingPairSet;
use crate::error::{Error, Result};
use crate::modality::Modality;
use crate::numeric::{topk_indices, Affine, AffineAdam, LinearGrads, Matrix};
use crate::rng::seeded;
use crate::sae::{decode_sparse, sparse_decoder_backward, ConceptModel, GRAD_CHUNK};
use crate::train::{shuffled_batches, TrainHistory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineVariant {
    /// Vision half of SAE-D.
    SaeDVision,
    /// Language half of SAE-D.
    SaeDLanguage,
    /// Shared SAE over both modalities.
    SaeS,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Sparsifier {
    /// Keep the `k` largest pre-activations.
    TopK(usize),
    /// ReLU, with `λ‖h‖₁` added to the loss.
    ReluL1(f64),
}

impl Sparsifier {
    pub fn from_config(config: &TrainConfig) -> Self {
        match config.sparsifier {
            SparsifierKind::TopK => Sparsifier::TopK(config.k),
            SparsifierKind::L1 => Sparsifier::ReluL1(config.l1_coeff),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSae {
    pub variant: BaselineVariant,
    pub encoder: Affine,
    pub decoder: Affine,
    pub sparsifier: Sparsifier,
}

/// Support and values of a sparse activation vector.
struct Sparse {
    support: Vec<usize>,
    values: Vec<f64>,
}

impl BaselineSae {
    pub fn new<R: Rng + ?Sized>(
        variant: BaselineVariant,
        d: usize,
        hidden_ratio: usize,
        sparsifier: Sparsifier,
        rng: &mut R,
    ) -> Result<Self> {
        let h = d * hidden_ratio;
        Self::from_parts(
            variant,
            Affine::random(h, d, rng),
            Affine::random(d, h, rng),
            sparsifier,
        )
    }

    pub fn from_parts(
        variant: BaselineVariant,
        encoder: Affine,
        decoder: Affine,
        sparsifier: Sparsifier,
    ) -> Result<Self> {
        let (h, d) = (encoder.out_dim(), encoder.in_dim());
        if decoder.in_dim() != h || decoder.out_dim() != d {
            return Err(Error::shape(
                format!("decoder {d}x{h}"),
                format!("{}x{}", decoder.out_dim(), decoder.in_dim()),
            ));
        }
        match sparsifier {
            Sparsifier::TopK(k) if k == 0 || k > h => return Err(Error::BadK { k, len: h }),
            Sparsifier::ReluL1(l) if !(l >= 0.0 && l.is_finite()) => {
                return Err(Error::BadSpec(format!("l1 coefficient must be >= 0, got {l}")))
            }
            _ => {}
        }
        Ok(Self {
            variant,
            encoder,
            decoder,
            sparsifier,
        })
    }

    pub fn dim(&self) -> usize {
        self.encoder.in_dim()
    }

    pub fn hidden(&self) -> usize {
        self.encoder.out_dim()
    }

    fn sparse_encode(&self, x: &[f64]) -> Result<(Vec<f64>, Sparse)> {
        let pre = self.encoder.forward(x)?;
        let support = match self.sparsifier {
            Sparsifier::TopK(k) => topk_indices(&pre, k)?,
            Sparsifier::ReluL1(_) => (0..pre.len()).filter(|&i| pre[i] > 0.0).collect(),
        };
        let values = support.iter().map(|&i| pre[i]).collect();
        Ok((pre, Sparse { support, values }))
    }

    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (_, s) = self.sparse_encode(x)?;
        let mut h = vec![0.0; self.hidden()];
        for (&i, &v) in s.support.iter().zip(&s.values) {
            h[i] = v;
        }
        Ok(h)
    }

    pub fn decode(&self, h: &[f64]) -> Result<Vec<f64>> {
        self.decoder.forward(h)
    }

    fn l1(&self) -> f64 {
        match self.sparsifier {
            Sparsifier::ReluL1(l) => l,
            Sparsifier::TopK(_) => 0.0,
        }
    }

    /// `‖D(σ(E x)) − x‖²`, plus `λ‖h‖₁` for the L1 sparsifier.
    pub fn row_loss(&self, x: &[f64]) -> Result<f64> {
        let h = self.encode(x)?;
        let xhat = self.decode(&h)?;
        let recon: f64 = xhat.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        Ok(recon + self.l1() * h.iter().map(|v| v.abs()).sum::<f64>())
    }

    pub fn mean_loss(&self, rows: &Matrix) -> Result<f64> {
        if rows.rows() == 0 {
            return Err(Error::EmptyDataset);
        }
        let total: f64 = rows.iter_rows().map(|r| self.row_loss(r)).sum::<Result<f64>>()?;
        Ok(total / rows.rows() as f64)
    }

    /// Mean loss over `rows` and the gradient.
    pub fn loss_with_grad(&self, rows: &Matrix) -> Result<(f64, LinearGrads, LinearGrads)> {
        let n = rows.rows();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        let lambda = self.l1();
        let starts: Vec<usize> = (0..n).step_by(GRAD_CHUNK).collect();
        let partials: Vec<(f64, LinearGrads, LinearGrads)> = starts
            .par_iter()
            .map(|&start| {
                let mut ge = LinearGrads::zeros_like(&self.encoder);
                let mut gd = LinearGrads::zeros_like(&self.decoder);
                let mut loss = 0.0;
                let mut dz = vec![0.0; self.hidden()];
                for i in start..(start + GRAD_CHUNK).min(n) {
                    let x = rows.row(i);
                    let (_, s) = self.sparse_encode(x)?;
                    let xhat = decode_sparse(&self.decoder, &s.support, &s.values);
                    let resid: Vec<f64> = xhat.iter().zip(x).map(|(a, b)| a - b).collect();
                    loss += resid.iter().map(|r| r * r).sum::<f64>()
                        + lambda * s.values.iter().map(|v| v.abs()).sum::<f64>();
                    let up: Vec<f64> = resid.iter().map(|r| 2.0 * r).collect();
                    let dh = sparse_decoder_backward(&self.decoder, &s.support, &s.values, &up, &mut gd);
                    for ((&j, &g), &v) in s.support.iter().zip(&dh).zip(&s.values) {
                        dz[j] = g + lambda * v.signum();
                    }
                    self.encoder.accumulate_param_grads(x, &dz, &mut ge)?;
                    for &j in &s.support {
                        dz[j] = 0.0;
                    }
                }
                Ok((loss, ge, gd))
            })
            .collect::<Result<_>>()?;
        let mut total = 0.0;
        let mut ge = LinearGrads::zeros_like(&self.encoder);
        let mut gd = LinearGrads::zeros_like(&self.decoder);
        for (l, e, d) in &partials {
            total += l;
            add_grads(&mut ge, e);
            add_grads(&mut gd, d);
        }
        let inv = 1.0 / n as f64;
        ge.scale(inv);
        gd.scale(inv);
        Ok((total * inv, ge, gd))
    }
}

fn add_grads(acc: &mut LinearGrads, g: &LinearGrads) {
    for (a, b) in acc.weight.as_mut_slice().iter_mut().zip(g.weight.as_slice()) {
        *a += b;
    }
    for (a, b) in acc.bias.iter_mut().zip(&g.bias) {
        *a += b;
    }
}

impl ConceptModel for BaselineSae {
    fn hidden(&self) -> usize {
        BaselineSae::hidden(self)
    }

    fn dim(&self) -> usize {
        BaselineSae::dim(self)
    }

    fn activations(&self, x: &[f64], _m: Modality) -> Result<Vec<f64>> {
        self.encode(x)
    }
}

/// SAE-D: neuron `i` of the vision model and neuron `i` of the language
/// model are read as the same concept.
#[derive(Debug, Clone, PartialEq)]
pub struct SaeDPair {
    pub vision: BaselineSae,
    pub language: BaselineSae,
}

impl ConceptModel for SaeDPair {
    fn hidden(&self) -> usize {
        self.vision.hidden()
    }

    fn dim(&self) -> usize {
        self.vision.dim()
    }

    fn activations(&self, x: &[f64], m: Modality) -> Result<Vec<f64>> {
        match m {
            Modality::Vision => self.vision.encode(x),
            Modality::Language => self.language.encode(x),
        }
    }
}

#[derive(Debug, Clone)]
pub enum BaselineModels {
    SaeD {
        models: SaeDPair,
        history: [TrainHistory; 2],
    },
    SaeS {
        model: BaselineSae,
        history: TrainHistory,
    },
}

/// Trains `model` on mini-batches; `unit_rows` maps a shuffled unit index to
/// the row indices of `rows` it contributes.
fn fit(
    model: &mut BaselineSae,
    rows: &Matrix,
    units: usize,
    rows_per_unit: usize,
    config: &TrainConfig,
    seed: u64,
) -> Result<TrainHistory> {
    let adam = config.adam();
    let mut enc_opt = AffineAdam::new(&model.encoder, adam);
    let mut dec_opt = AffineAdam::new(&model.decoder, adam);
    let mut rng = seeded(seed);
    let mut history = TrainHistory::default();
    let unit_batch = (config.batch_size / rows_per_unit).max(1);
    for _ in 0..config.epochs {
        let mut total = 0.0;
        for batch in shuffled_batches(units, unit_batch, 1, &mut rng) {
            let idx: Vec<usize> = batch
                .iter()
                .flat_map(|&u| (0..rows_per_unit).map(move |o| u * rows_per_unit + o))
                .collect();
            let b = rows.select_rows(&idx);
            let (loss, ge, gd) = model.loss_with_grad(&b)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite("baseline loss"));
            }
            total += loss * idx.len() as f64;
            enc_opt.step(&mut model.encoder, &ge)?;
            dec_opt.step(&mut model.decoder, &gd)?;
        }
        history.epoch_loss.push(total / rows.rows() as f64);
    }
    Ok(history)
}

/// Vision and language rows alternating: v0, l0, v1, l1, ...
fn interleave(set: &EmbeddingPairSet) -> Matrix {
    let mut out = Matrix::zeros(2 * set.len(), set.dim());
    for i in 0..set.len() {
        out.row_mut(2 * i).copy_from_slice(set.vision.row(i));
        out.row_mut(2 * i + 1).copy_from_slice(set.language.row(i));
    }
    out
}

/// Trains SAE-D (two models) or SAE-S (one model on pooled rows). Each
/// SAE-S batch holds both members of every pair it draws.
pub fn train_baseline(shared: bool, train: &EmbeddingPairSet, config: &TrainConfig) -> Result<BaselineModels> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let d = train.dim();
    let sparsifier = Sparsifier::from_config(config);
    let mut rng = seeded(config.seed);
    if shared {
        let mut model = BaselineSae::new(BaselineVariant::SaeS, d, config.hidden_ratio, sparsifier, &mut rng)?;
        let pooled = interleave(train);
        let history = fit(&mut model, &pooled, train.len(), 2, config, config.seed.wrapping_add(1))?;
        Ok(BaselineModels::SaeS { model, history })
    } else {
        let mut vision = BaselineSae::new(
            BaselineVariant::SaeDVision,
            d,
            config.hidden_ratio,
            sparsifier,
            &mut rng,
        )?;
        let mut language = BaselineSae::new(
            BaselineVariant::SaeDLanguage,
            d,
            config.hidden_ratio,
            sparsifier,
            &mut rng,
        )?;
        let hv = fit(
            &mut vision,
            &train.vision,
            train.len(),
            1,
            config,
            config.seed.wrapping_add(1),
        )?;
        let hl = fit(
            &mut language,
            &train.language,
            train.len(),
            1,
            config,
            config.seed.wrapping_add(2),
        )?;
        Ok(BaselineModels::SaeD {
            models: SaeDPair { vision, language },
            history: [hv, hl],
        })
    }
}
