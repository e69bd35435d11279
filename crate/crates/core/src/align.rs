//! Auxiliary autoencoder that turns implicitly aligned representation pairs
//! into intermediate representations aligned under cosine similarity.
//!
//! Each modality has its own affine encoder `E` and decoder `D`, all `d × d`.
//! Training minimises a symmetric in-batch InfoNCE on the intermediates plus
//! the squared reconstruction error of each modality.

use serde::{Deserialize, Serialize};

use crate::config::TrainConfig;
use crate::data::EmbeddingPairSet;
use crate::error::{Error, Result};
use crate::modality::Modality;
use crate::numeric::{axpy, dot, log_sum_exp, norm, Affine, AffineAdam, LinearGrads, Matrix, ZERO_NORM};
use crate::rng::seeded;
use crate::train::{shuffled_batches, TrainHistory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignAe {
    pub enc_vision: Affine,
    pub enc_language: Affine,
    pub dec_vision: Affine,
    pub dec_language: Affine,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignOutput {
    pub inter_vision: Vec<f64>,
    pub inter_language: Vec<f64>,
    pub recon_vision: Vec<f64>,
    pub recon_language: Vec<f64>,
}

impl AlignAe {
    pub fn new<R: rand::Rng + ?Sized>(d: usize, tau: f64, rng: &mut R) -> Result<Self> {
        Self::from_maps(
            Affine::random(d, d, rng),
            Affine::random(d, d, rng),
            Affine::random(d, d, rng),
            Affine::random(d, d, rng),
            tau,
        )
    }

    pub fn identity(d: usize, tau: f64) -> Result<Self> {
        Self::from_maps(
            Affine::identity(d),
            Affine::identity(d),
            Affine::identity(d),
            Affine::identity(d),
            tau,
        )
    }

    pub fn from_maps(
        enc_vision: Affine,
        enc_language: Affine,
        dec_vision: Affine,
        dec_language: Affine,
        tau: f64,
    ) -> Result<Self> {
        let d = enc_vision.in_dim();
        for (name, m) in [
            ("vision encoder", &enc_vision),
            ("language encoder", &enc_language),
            ("vision decoder", &dec_vision),
            ("language decoder", &dec_language),
        ] {
            if m.in_dim() != d || m.out_dim() != d {
                return Err(Error::shape(
                    format!("{name} of shape {d}x{d}"),
                    format!("{}x{}", m.out_dim(), m.in_dim()),
                ));
            }
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::BadSpec(format!("temperature must be positive, got {tau}")));
        }
        Ok(Self {
            enc_vision,
            enc_language,
            dec_vision,
            dec_language,
            tau,
        })
    }

    pub fn dim(&self) -> usize {
        self.enc_vision.in_dim()
    }

    pub fn encoder(&self, m: Modality) -> &Affine {
        match m {
            Modality::Vision => &self.enc_vision,
            Modality::Language => &self.enc_language,
        }
    }

    pub fn decoder(&self, m: Modality) -> &Affine {
        match m {
            Modality::Vision => &self.dec_vision,
            Modality::Language => &self.dec_language,
        }
    }

    pub fn encode(&self, m: Modality, x: &[f64]) -> Result<Vec<f64>> {
        self.encoder(m).forward(x)
    }

    pub fn decode(&self, m: Modality, x: &[f64]) -> Result<Vec<f64>> {
        self.decoder(m).forward(x)
    }

    pub fn forward(&self, x_v: &[f64], x_l: &[f64]) -> Result<AlignOutput> {
        let inter_vision = self.enc_vision.forward(x_v)?;
        let inter_language = self.enc_language.forward(x_l)?;
        let recon_vision = self.dec_vision.forward(&inter_vision)?;
        let recon_language = self.dec_language.forward(&inter_language)?;
        Ok(AlignOutput {
            inter_vision,
            inter_language,
            recon_vision,
            recon_language,
        })
    }

    pub fn encode_batch(&self, m: Modality, rows: &Matrix) -> Result<Matrix> {
        map_rows(self.encoder(m), rows)
    }
}

fn map_rows(layer: &Affine, rows: &Matrix) -> Result<Matrix> {
    let mut out = Matrix::zeros(rows.rows(), layer.out_dim());
    for (i, r) in rows.iter_rows().enumerate() {
        out.row_mut(i).copy_from_slice(&layer.forward(r)?);
    }
    Ok(out)
}

fn unit_rows(m: &Matrix) -> Result<(Matrix, Vec<f64>)> {
    let mut unit = m.clone();
    let mut norms = Vec::with_capacity(m.rows());
    for r in 0..m.rows() {
        let row = unit.row_mut(r);
        let n = norm(row);
        if !(n >= ZERO_NORM) {
            return Err(Error::ZeroVector);
        }
        row.iter_mut().for_each(|v| *v /= n);
        norms.push(n);
    }
    Ok((unit, norms))
}

fn check_pair_batch(batch_v: &Matrix, batch_l: &Matrix) -> Result<()> {
    if batch_v.shape() != batch_l.shape() {
        return Err(Error::shape(
            format!("{:?}", batch_v.shape()),
            format!("{:?}", batch_l.shape()),
        ));
    }
    if batch_v.rows() < 2 {
        return Err(Error::BatchTooSmall(batch_v.rows()));
    }
    Ok(())
}

/// Symmetric InfoNCE over a batch of intermediate pairs.
///
/// For each anchor the positive competes against all `N` candidates of the
/// other modality (itself included). The two directions are each averaged
/// over anchors and then added.
pub fn info_nce(batch_v: &Matrix, batch_l: &Matrix, tau: f64) -> Result<f64> {
    Ok(info_nce_with_grad(batch_v, batch_l, tau)?.0)
}

/// InfoNCE plus its gradient with respect to both batches of intermediates.
pub fn info_nce_with_grad(batch_v: &Matrix, batch_l: &Matrix, tau: f64) -> Result<(f64, Matrix, Matrix)> {
    check_pair_batch(batch_v, batch_l)?;
    let n = batch_v.rows();
    let (uv, nv) = unit_rows(batch_v)?;
    let (ul, nl) = unit_rows(batch_l)?;

    let mut cos = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            cos.set(i, j, dot(uv.row(i), ul.row(j)).clamp(-1.0, 1.0));
        }
    }
    let logits: Vec<f64> = cos.as_slice().iter().map(|c| c / tau).collect();
    let logits = Matrix::from_vec(n, n, logits)?;

    let row_lse: Vec<f64> = logits.iter_rows().map(log_sum_exp).collect();
    let t = logits.transpose();
    let col_lse: Vec<f64> = t.iter_rows().map(log_sum_exp).collect();

    let inv_n = 1.0 / n as f64;
    let mut loss = 0.0;
    for i in 0..n {
        loss += (row_lse[i] - logits.get(i, i)) + (col_lse[i] - logits.get(i, i));
    }
    loss *= inv_n;

    // dL/dcos_ij = (P_ij + Q_ij - 2δ_ij) / (N τ)
    let mut dcos = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let s = logits.get(i, j);
            let p = (s - row_lse[i]).exp();
            let q = (s - col_lse[j]).exp();
            let delta = if i == j { 2.0 } else { 0.0 };
            dcos.set(i, j, (p + q - delta) * inv_n / tau);
        }
    }

    let mut grad_v = Matrix::zeros(n, batch_v.cols());
    let mut grad_l = Matrix::zeros(n, batch_l.cols());
    for i in 0..n {
        // gradient w.r.t. the unit vector, then project off the radial part
        let mut du = vec![0.0; batch_v.cols()];
        for j in 0..n {
            axpy(dcos.get(i, j), ul.row(j), &mut du);
        }
        let radial = dot(&du, uv.row(i));
        axpy(-radial, uv.row(i), &mut du);
        let g = grad_v.row_mut(i);
        axpy(1.0 / nv[i], &du, g);
    }
    for j in 0..n {
        let mut dv = vec![0.0; batch_l.cols()];
        for i in 0..n {
            axpy(dcos.get(i, j), uv.row(i), &mut dv);
        }
        let radial = dot(&dv, ul.row(j));
        axpy(-radial, ul.row(j), &mut dv);
        let g = grad_l.row_mut(j);
        axpy(1.0 / nl[j], &dv, g);
    }
    Ok((loss, grad_v, grad_l))
}

/// Gradients of [`align_loss`] for each of the four maps.
#[derive(Debug, Clone)]
pub struct AlignGrads {
    pub enc_vision: LinearGrads,
    pub enc_language: LinearGrads,
    pub dec_vision: LinearGrads,
    pub dec_language: LinearGrads,
}

impl AlignGrads {
    fn zeros_like(m: &AlignAe) -> Self {
        Self {
            enc_vision: LinearGrads::zeros_like(&m.enc_vision),
            enc_language: LinearGrads::zeros_like(&m.enc_language),
            dec_vision: LinearGrads::zeros_like(&m.dec_vision),
            dec_language: LinearGrads::zeros_like(&m.dec_language),
        }
    }
}

/// InfoNCE on the intermediates plus the batch-mean of
/// `‖x̂_v − x_v‖² + ‖x̂_l − x_l‖²`.
pub fn align_loss(model: &AlignAe, batch_v: &Matrix, batch_l: &Matrix) -> Result<f64> {
    Ok(align_loss_with_grad(model, batch_v, batch_l)?.0)
}

pub fn align_loss_with_grad(model: &AlignAe, batch_v: &Matrix, batch_l: &Matrix) -> Result<(f64, AlignGrads)> {
    check_pair_batch(batch_v, batch_l)?;
    let n = batch_v.rows();
    let inter_v = model.encode_batch(Modality::Vision, batch_v)?;
    let inter_l = model.encode_batch(Modality::Language, batch_l)?;
    let (nce, mut d_inter_v, mut d_inter_l) = info_nce_with_grad(&inter_v, &inter_l, model.tau)?;

    let mut grads = AlignGrads::zeros_like(model);
    let inv_n = 1.0 / n as f64;
    let mut recon = 0.0;
    for i in 0..n {
        for (dec, d_dec, x, u, du) in [
            (
                &model.dec_vision,
                &mut grads.dec_vision,
                batch_v.row(i),
                inter_v.row(i),
                d_inter_v.row_mut(i),
            ),
            (
                &model.dec_language,
                &mut grads.dec_language,
                batch_l.row(i),
                inter_l.row(i),
                d_inter_l.row_mut(i),
            ),
        ] {
            let xhat = dec.forward(u)?;
            let resid: Vec<f64> = xhat.iter().zip(x).map(|(a, b)| a - b).collect();
            recon += dot(&resid, &resid);
            let up: Vec<f64> = resid.iter().map(|r| 2.0 * r * inv_n).collect();
            let back = dec.backward_into(u, &up, d_dec)?;
            axpy(1.0, &back, du);
        }
    }
    for i in 0..n {
        model
            .enc_vision
            .accumulate_param_grads(batch_v.row(i), d_inter_v.row(i), &mut grads.enc_vision)?;
        model
            .enc_language
            .accumulate_param_grads(batch_l.row(i), d_inter_l.row(i), &mut grads.enc_language)?;
    }
    Ok((nce + recon * inv_n, grads))
}

/// Trains with Adam on shuffled in-batch negatives. Returns the mean loss of
/// each epoch.
pub fn train_align(model: &mut AlignAe, train: &EmbeddingPairSet, config: &TrainConfig) -> Result<TrainHistory> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if config.batch_size < 2 || train.len() < 2 {
        return Err(Error::BatchTooSmall(config.batch_size.min(train.len())));
    }
    if train.dim() != model.dim() {
        return Err(Error::DimMismatch(format!(
            "dataset d = {}, model d = {}",
            train.dim(),
            model.dim()
        )));
    }
    let adam = config.adam();
    let mut opt = [
        AffineAdam::new(&model.enc_vision, adam),
        AffineAdam::new(&model.enc_language, adam),
        AffineAdam::new(&model.dec_vision, adam),
        AffineAdam::new(&model.dec_language, adam),
    ];
    let mut rng = seeded(config.seed);
    let mut history = TrainHistory::default();
    for _ in 0..config.epochs {
        let mut total = 0.0;
        for batch in shuffled_batches(train.len(), config.batch_size, 2, &mut rng) {
            let bv = train.vision.select_rows(&batch);
            let bl = train.language.select_rows(&batch);
            let (loss, g) = align_loss_with_grad(model, &bv, &bl)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite("alignment loss"));
            }
            total += loss * batch.len() as f64;
            opt[0].step(&mut model.enc_vision, &g.enc_vision)?;
            opt[1].step(&mut model.enc_language, &g.enc_language)?;
            opt[2].step(&mut model.dec_vision, &g.dec_vision)?;
            opt[3].step(&mut model.dec_language, &g.dec_language)?;
        }
        history.epoch_loss.push(total / train.len() as f64);
    }
    Ok(history)
}

/// Whether a model's representations are already comparable by cosine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlignmentKind {
    /// Contrastively trained encoders; used as-is.
    Explicit,
    /// Decoder-side fusion; needs the alignment autoencoder first.
    Implicit,
}

/// Intermediate representations for SAE training: the input itself for
/// explicit alignment, the alignment encoders' outputs otherwise.
pub fn maybe_align(set: &EmbeddingPairSet, kind: AlignmentKind, model: Option<&AlignAe>) -> Result<EmbeddingPairSet> {
    match kind {
        AlignmentKind::Explicit => Ok(set.clone()),
        AlignmentKind::Implicit => {
            let model = model.ok_or(Error::MissingAlignModel)?;
            let mut out = set.clone();
            out.vision = model.encode_batch(Modality::Vision, &set.vision)?;
            out.language = model.encode_batch(Modality::Language, &set.language)?;
            Ok(out)
        }
    }
}
