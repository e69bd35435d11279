use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::TrainConfig;
use crate::data::EmbeddingPairSet;
use crate::error::{Error, Result};
use crate::modality::Modality;
use crate::numeric::{
    distance_backward_into, distance_forward, l2_normalize, norm, topk_indices, AdamState, Affine, AffineAdam,
    DistanceForward, GradTape, LinearGrads, Matrix, UnitRows,
};
use crate::rng::seeded;
use crate::sae::{decode_sparse, sparse_decoder_backward, ConceptModel, GRAD_CHUNK};
use crate::train::{shuffled_batches, TrainHistory};

/// Encoder rows with norm below this are re-drawn during training.
pub const DEAD_ROW_NORM: f64 = 1e-8;

/// Sparse autoencoder with a distance-based encoder shared by both
/// modalities and one affine decoder per modality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VlSae {
    /// One neuron per row, `h × d`. No bias.
    pub encoder: Matrix,
    pub dec_vision: Affine,
    pub dec_language: Affine,
    pub k: usize,
}

/// Top-K support of both members of a pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairSupport {
    pub vision: Vec<usize>,
    pub language: Vec<usize>,
}

impl VlSae {
    /// Gaussian init with encoder rows scaled to unit length.
    pub fn new<R: Rng + ?Sized>(d: usize, hidden_ratio: usize, k: usize, rng: &mut R) -> Result<Self> {
        let h = d
            .checked_mul(hidden_ratio)
            .ok_or_else(|| Error::BadSpec("hidden width overflows".into()))?;
        let mut encoder = Matrix::random_normal(h, d, 1.0 / (d as f64).sqrt(), rng);
        for r in 0..h {
            redraw_row(&mut encoder, r, rng);
        }
        Self::from_parts(encoder, Affine::random(d, h, rng), Affine::random(d, h, rng), k)
    }

    pub fn from_parts(encoder: Matrix, dec_vision: Affine, dec_language: Affine, k: usize) -> Result<Self> {
        let (h, d) = encoder.shape();
        for (name, dec) in [("vision", &dec_vision), ("language", &dec_language)] {
            if dec.in_dim() != h || dec.out_dim() != d {
                return Err(Error::shape(
                    format!("{name} decoder {d}x{h}"),
                    format!("{}x{}", dec.out_dim(), dec.in_dim()),
                ));
            }
        }
        if k == 0 || k > h {
            return Err(Error::BadK { k, len: h });
        }
        // every neuron needs a direction
        UnitRows::new(&encoder)?;
        Ok(Self {
            encoder,
            dec_vision,
            dec_language,
            k,
        })
    }

    pub fn dim(&self) -> usize {
        self.encoder.cols()
    }

    pub fn hidden(&self) -> usize {
        self.encoder.rows()
    }

    pub fn hidden_ratio(&self) -> f64 {
        self.hidden() as f64 / self.dim() as f64
    }

    pub fn decoder(&self, m: Modality) -> &Affine {
        match m {
            Modality::Vision => &self.dec_vision,
            Modality::Language => &self.dec_language,
        }
    }

    fn unit_rows(&self) -> Result<UnitRows> {
        UnitRows::new(&self.encoder)
    }

    /// Dense activations `2 - g(x, w_i)` before sparsification.
    pub fn pre_activations(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(distance_forward(x, &self.unit_rows()?)?.pre)
    }

    /// Top-K activations.
    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        let fwd = distance_forward(x, &self.unit_rows()?)?;
        let support = topk_indices(&fwd.pre, self.k)?;
        Ok(masked(&fwd.pre, &support))
    }

    /// Activations restricted to a given support instead of the Top-K one.
    pub fn encode_with_support(&self, x: &[f64], support: &[usize]) -> Result<Vec<f64>> {
        let pre = self.pre_activations(x)?;
        if let Some(&bad) = support.iter().find(|&&i| i >= pre.len()) {
            return Err(Error::shape(format!("support index < {}", pre.len()), bad));
        }
        Ok(masked(&pre, support))
    }

    pub fn support(&self, x: &[f64]) -> Result<Vec<usize>> {
        topk_indices(&self.pre_activations(x)?, self.k)
    }

    pub fn decode(&self, h: &[f64], m: Modality) -> Result<Vec<f64>> {
        self.decoder(m).forward(h)
    }

    pub fn reconstruct(&self, x: &[f64], m: Modality) -> Result<Vec<f64>> {
        self.decode(&self.encode(x)?, m)
    }

    pub fn encode_batch(&self, rows: &Matrix) -> Result<Matrix> {
        let unit = self.unit_rows()?;
        let encoded: Vec<Vec<f64>> = (0..rows.rows())
            .into_par_iter()
            .map(|i| {
                let fwd = distance_forward(rows.row(i), &unit)?;
                let support = topk_indices(&fwd.pre, self.k)?;
                Ok(masked(&fwd.pre, &support))
            })
            .collect::<Result<_>>()?;
        let mut out = Matrix::zeros(rows.rows(), self.hidden());
        for (i, e) in encoded.iter().enumerate() {
            out.row_mut(i).copy_from_slice(e);
        }
        Ok(out)
    }

    pub fn batch_supports(&self, batch_v: &Matrix, batch_l: &Matrix) -> Result<Vec<PairSupport>> {
        (0..batch_v.rows())
            .map(|i| {
                Ok(PairSupport {
                    vision: self.support(batch_v.row(i))?,
                    language: self.support(batch_l.row(i))?,
                })
            })
            .collect()
    }
}

impl ConceptModel for VlSae {
    fn hidden(&self) -> usize {
        VlSae::hidden(self)
    }

    fn dim(&self) -> usize {
        VlSae::dim(self)
    }

    fn activations(&self, x: &[f64], _m: Modality) -> Result<Vec<f64>> {
        self.encode(x)
    }

    fn activations_batch(&self, rows: &Matrix, _m: Modality) -> Result<Matrix> {
        self.encode_batch(rows)
    }
}

fn masked(pre: &[f64], support: &[usize]) -> Vec<f64> {
    let mut h = vec![0.0; pre.len()];
    for &i in support {
        h[i] = pre[i];
    }
    h
}

fn redraw_row<R: Rng + ?Sized>(w: &mut Matrix, r: usize, rng: &mut R) {
    let d = w.cols();
    loop {
        let fresh = Matrix::random_normal(1, d, 1.0, rng);
        if let Ok(unit) = l2_normalize(fresh.as_slice()) {
            w.row_mut(r).copy_from_slice(&unit);
            return;
        }
    }
}

/// `‖x̂_v − x_v‖² + ‖x̂_l − x_l‖²` for one pair of intermediates.
pub fn sae_loss(model: &VlSae, x_v: &[f64], x_l: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for (x, m) in [(x_v, Modality::Vision), (x_l, Modality::Language)] {
        if x.len() != model.dim() {
            return Err(Error::shape(format!("vector of length {}", model.dim()), x.len()));
        }
        let xhat = model.reconstruct(x, m)?;
        total += xhat.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    Ok(total)
}

/// Batch-mean gradients of the SAE loss.
#[derive(Debug, Clone)]
pub struct SaeGrads {
    pub encoder: Matrix,
    pub dec_vision: LinearGrads,
    pub dec_language: LinearGrads,
    pub degenerate: usize,
}

impl SaeGrads {
    fn zeros_like(m: &VlSae) -> Self {
        Self {
            encoder: Matrix::zeros(m.hidden(), m.dim()),
            dec_vision: LinearGrads::zeros_like(&m.dec_vision),
            dec_language: LinearGrads::zeros_like(&m.dec_language),
            degenerate: 0,
        }
    }

    fn add(&mut self, other: &SaeGrads) {
        for (a, b) in self.encoder.as_mut_slice().iter_mut().zip(other.encoder.as_slice()) {
            *a += b;
        }
        for (mine, theirs) in [
            (&mut self.dec_vision, &other.dec_vision),
            (&mut self.dec_language, &other.dec_language),
        ] {
            for (a, b) in mine.weight.as_mut_slice().iter_mut().zip(theirs.weight.as_slice()) {
                *a += b;
            }
            for (a, b) in mine.bias.iter_mut().zip(&theirs.bias) {
                *a += b;
            }
        }
        self.degenerate += other.degenerate;
    }

    fn scale(&mut self, s: f64) {
        self.encoder.scale_in_place(s);
        self.dec_vision.scale(s);
        self.dec_language.scale(s);
    }
}

/// Forward record of one modality of one sample.
#[derive(Debug, Clone)]
struct SaeTapeEntry {
    modality: Modality,
    forward: DistanceForward,
    support: Vec<usize>,
    values: Vec<f64>,
    residual: Vec<f64>,
}

fn record_forward(
    model: &VlSae,
    unit: &UnitRows,
    x: &[f64],
    m: Modality,
    frozen: Option<&[usize]>,
    tape: &mut GradTape<SaeTapeEntry>,
) -> Result<f64> {
    let forward = distance_forward(x, unit)?;
    let support = match frozen {
        Some(s) => s.to_vec(),
        None => topk_indices(&forward.pre, model.k)?,
    };
    let values: Vec<f64> = support.iter().map(|&i| forward.pre[i]).collect();
    let xhat = decode_sparse(model.decoder(m), &support, &values);
    let residual: Vec<f64> = xhat.iter().zip(x).map(|(a, b)| a - b).collect();
    let loss = residual.iter().map(|r| r * r).sum();
    tape.record(SaeTapeEntry {
        modality: m,
        forward,
        support,
        values,
        residual,
    });
    Ok(loss)
}

fn backward_tape(model: &VlSae, unit: &UnitRows, tape: &GradTape<SaeTapeEntry>, grads: &mut SaeGrads) {
    let mut upstream_h = vec![0.0; model.hidden()];
    for e in tape.entries() {
        let up: Vec<f64> = e.residual.iter().map(|r| 2.0 * r).collect();
        let (dec, d_dec) = match e.modality {
            Modality::Vision => (&model.dec_vision, &mut grads.dec_vision),
            Modality::Language => (&model.dec_language, &mut grads.dec_language),
        };
        let dh = sparse_decoder_backward(dec, &e.support, &e.values, &up, d_dec);
        for (&i, &g) in e.support.iter().zip(&dh) {
            upstream_h[i] = g;
        }
        grads.degenerate += distance_backward_into(&e.forward, unit, &upstream_h, &e.support, &mut grads.encoder, None);
        for &i in &e.support {
            upstream_h[i] = 0.0;
        }
    }
}

/// Mean loss over the batch and its gradient. With `frozen` set, each
/// row's support is taken from it rather than from Top-K.
pub fn sae_batch_loss_with_grad(
    model: &VlSae,
    batch_v: &Matrix,
    batch_l: &Matrix,
    frozen: Option<&[PairSupport]>,
) -> Result<(f64, SaeGrads)> {
    if batch_v.shape() != batch_l.shape() || batch_v.cols() != model.dim() {
        return Err(Error::shape(
            format!("two batches with {} columns", model.dim()),
            format!("{:?} and {:?}", batch_v.shape(), batch_l.shape()),
        ));
    }
    let n = batch_v.rows();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if let Some(f) = frozen {
        if f.len() != n {
            return Err(Error::LengthMismatch(f.len(), n));
        }
    }
    let unit = model.unit_rows()?;
    let chunks: Vec<usize> = (0..n).step_by(GRAD_CHUNK).collect();
    let partials: Vec<(f64, SaeGrads)> = chunks
        .par_iter()
        .map(|&start| {
            let end = (start + GRAD_CHUNK).min(n);
            let mut tape = GradTape::with_capacity(2 * (end - start));
            let mut loss = 0.0;
            for i in start..end {
                let (fv, fl) = match frozen {
                    Some(f) => (Some(f[i].vision.as_slice()), Some(f[i].language.as_slice())),
                    None => (None, None),
                };
                loss += record_forward(model, &unit, batch_v.row(i), Modality::Vision, fv, &mut tape)?;
                loss += record_forward(model, &unit, batch_l.row(i), Modality::Language, fl, &mut tape)?;
            }
            let mut grads = SaeGrads::zeros_like(model);
            backward_tape(model, &unit, &tape, &mut grads);
            tape.clear();
            Ok((loss, grads))
        })
        .collect::<Result<_>>()?;

    // fixed-order reduction keeps results independent of thread count
    let mut total = 0.0;
    let mut grads = SaeGrads::zeros_like(model);
    for (l, g) in &partials {
        total += l;
        grads.add(g);
    }
    let inv = 1.0 / n as f64;
    grads.scale(inv);
    Ok((total * inv, grads))
}

/// Mean loss with supports held fixed; the function finite differences see.
pub fn sae_batch_loss_frozen(
    model: &VlSae,
    batch_v: &Matrix,
    batch_l: &Matrix,
    supports: &[PairSupport],
) -> Result<f64> {
    let mut total = 0.0;
    for (i, s) in supports.iter().enumerate() {
        for (x, m, sup) in [
            (batch_v.row(i), Modality::Vision, &s.vision),
            (batch_l.row(i), Modality::Language, &s.language),
        ] {
            let h = model.encode_with_support(x, sup)?;
            let xhat = model.decode(&h, m)?;
            total += xhat.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
    }
    Ok(total / supports.len() as f64)
}

/// Mean SAE loss over a whole set.
pub fn sae_mean_loss(model: &VlSae, set: &EmbeddingPairSet) -> Result<f64> {
    Ok(sae_batch_loss_with_grad(model, &set.vision, &set.language, None)?.0)
}

/// Trains on intermediate representations with Adam.
pub fn train_sae(model: &mut VlSae, train: &EmbeddingPairSet, config: &TrainConfig) -> Result<TrainHistory> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if train.dim() != model.dim() {
        return Err(Error::DimMismatch(format!(
            "dataset d = {}, model d = {}",
            train.dim(),
            model.dim()
        )));
    }
    let adam = config.adam();
    let mut enc_opt = AdamState::new(model.hidden() * model.dim(), adam);
    let mut dec_v_opt = AffineAdam::new(&model.dec_vision, adam);
    let mut dec_l_opt = AffineAdam::new(&model.dec_language, adam);
    let mut rng = seeded(config.seed);
    let mut history = TrainHistory::default();

    for _ in 0..config.epochs {
        let mut total = 0.0;
        for batch in shuffled_batches(train.len(), config.batch_size, 1, &mut rng) {
            let bv = train.vision.select_rows(&batch);
            let bl = train.language.select_rows(&batch);
            let (loss, g) = sae_batch_loss_with_grad(model, &bv, &bl, None)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite("sae loss"));
            }
            total += loss * batch.len() as f64;
            history.degenerate_grads += g.degenerate as u64;
            enc_opt.update(model.encoder.as_mut_slice(), g.encoder.as_slice())?;
            dec_v_opt.step(&mut model.dec_vision, &g.dec_vision)?;
            dec_l_opt.step(&mut model.dec_language, &g.dec_language)?;
            if config.resuscitate_dead {
                for r in 0..model.hidden() {
                    if norm(model.encoder.row(r)) < DEAD_ROW_NORM {
                        redraw_row(&mut model.encoder, r, &mut rng);
                        history.resuscitated += 1;
                    }
                }
            }
        }
        history.epoch_loss.push(total / train.len() as f64);
    }
    Ok(history)
}
