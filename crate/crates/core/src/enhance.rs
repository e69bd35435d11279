//! Concept-level enhancement: fused similarity scoring and language
//! representation refinement with contrastive distribution fusion.

use serde::{Deserialize, Serialize};

use crate::align::AlignAe;
use crate::concept::reweight_activations;
use crate::error::{Error, Result};
use crate::modality::Modality;
use crate::numeric::{cosine, softmax, Matrix};
use crate::sae::{ConceptModel, VlSae};

/// A concept model whose activations are divided by corpus means.
pub struct Reweighted<'a, M> {
    pub model: &'a M,
    pub means: &'a [f64],
}

impl<M: ConceptModel> ConceptModel for Reweighted<'_, M> {
    fn hidden(&self) -> usize {
        self.model.hidden()
    }

    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn activations(&self, x: &[f64], m: Modality) -> Result<Vec<f64>> {
        reweight_activations(&self.model.activations(x, m)?, self.means)
    }
}

/// Concept-score weights swept for fused scoring.
pub const ALPHA_C_GRID: [f64; 10] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

/// Tolerance on the token row-mean check.
pub const MEAN_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub alpha_c: f64,
    pub alpha_l: f64,
    pub beta: f64,
    pub alpha_cd: f64,
    pub beta_cd: f64,
    /// Divide activations by corpus means before fusing.
    #[serde(default)]
    pub reweight: bool,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            alpha_c: 0.5,
            alpha_l: 0.7,
            beta: 0.9,
            alpha_cd: 0.6,
            beta_cd: 0.8,
            reweight: false,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [self.alpha_c, self.alpha_l, self.beta, self.alpha_cd, self.beta_cd];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::BadSpec("fusion weights must be finite".into()));
        }
        if self.alpha_c < 0.0 {
            return Err(Error::BadSpec(format!("alpha_c must be >= 0, got {}", self.alpha_c)));
        }
        for (name, v) in [
            ("alpha_l", self.alpha_l),
            ("alpha_cd", self.alpha_cd),
            ("beta_cd", self.beta_cd),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::BadSpec(format!("{name} must lie in [0,1], got {v}")));
            }
        }
        Ok(())
    }
}

fn check_alpha_c(alpha_c: f64) -> Result<()> {
    if alpha_c.is_finite() && alpha_c >= 0.0 {
        Ok(())
    } else {
        Err(Error::BadSpec(format!(
            "alpha_c must be finite and >= 0, got {alpha_c}"
        )))
    }
}

/// `cos(x_v, x_l) + α_c · cos(h_v, h_l)` from precomputed activations.
pub fn fused_score_from(x_v: &[f64], x_l: &[f64], h_v: &[f64], h_l: &[f64], alpha_c: f64) -> Result<f64> {
    check_alpha_c(alpha_c)?;
    let base = cosine(x_v, x_l)?;
    if alpha_c == 0.0 {
        return Ok(base);
    }
    Ok(base + alpha_c * concept_cosine(h_v, h_l)?)
}

fn concept_cosine(h_v: &[f64], h_l: &[f64]) -> Result<f64> {
    let zero = |h: &[f64]| h.iter().all(|&v| v == 0.0);
    if zero(h_v) || zero(h_l) {
        return Err(Error::ZeroActivation);
    }
    cosine(h_v, h_l)
}

/// Fused image-text score.
pub fn fused_score(x_v: &[f64], x_l: &[f64], model: &impl ConceptModel, alpha_c: f64) -> Result<f64> {
    let h_v = model.activations(x_v, Modality::Vision)?;
    let h_l = model.activations(x_l, Modality::Language)?;
    fused_score_from(x_v, x_l, &h_v, &h_l, alpha_c)
}

/// Index of the class row with the highest fused score; ties go to the
/// lowest index.
pub fn classify(x_v: &[f64], classes: &Matrix, model: &impl ConceptModel, alpha_c: f64) -> Result<usize> {
    if classes.rows() == 0 {
        return Err(Error::EmptyClassSet);
    }
    let h_v = model.activations(x_v, Modality::Vision)?;
    let mut best = (0, f64::NEG_INFINITY);
    for (c, x_l) in classes.iter_rows().enumerate() {
        let h_l = model.activations(x_l, Modality::Language)?;
        let s = fused_score_from(x_v, x_l, &h_v, &h_l, alpha_c)?;
        if s > best.1 {
            best = (c, s);
        }
    }
    Ok(best.0)
}

/// `(1−α_l)·x_l + α_l·D_l(D_l^s(h_l + β·h_v))`. Without an alignment model
/// the outer decoder is the identity.
pub fn refine_language(
    x_l: &[f64],
    h_l: &[f64],
    h_v: &[f64],
    align: Option<&AlignAe>,
    sae: &VlSae,
    alpha_l: f64,
    beta: f64,
) -> Result<Vec<f64>> {
    let h = sae.hidden();
    if h_l.len() != h || h_v.len() != h {
        return Err(Error::shape(
            format!("activations of length {h}"),
            format!("{} and {}", h_l.len(), h_v.len()),
        ));
    }
    let out_dim = align.map_or(sae.dim(), |a| a.dim());
    if x_l.len() != out_dim {
        return Err(Error::shape(format!("x_l of length {out_dim}"), x_l.len()));
    }
    let mixed: Vec<f64> = h_l.iter().zip(h_v).map(|(l, v)| l + beta * v).collect();
    let mut recon = sae.decode(&mixed, Modality::Language)?;
    if let Some(a) = align {
        recon = a.decode(Modality::Language, &recon)?;
    }
    Ok(x_l
        .iter()
        .zip(&recon)
        .map(|(x, r)| (1.0 - alpha_l) * x + alpha_l * r)
        .collect())
}

/// Shifts every token row by `x̂_l − x_l`, after checking that `x_l` is the
/// token mean.
pub fn token_mean_replace(tokens: &Matrix, x_l: &[f64], x_hat: &[f64]) -> Result<Matrix> {
    let d = tokens.cols();
    if x_l.len() != d || x_hat.len() != d {
        return Err(Error::shape(
            format!("vectors of length {d}"),
            format!("{} and {}", x_l.len(), x_hat.len()),
        ));
    }
    if tokens.rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let mean = tokens.mean_row();
    let gap = mean.iter().zip(x_l).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if !(gap <= MEAN_TOLERANCE) {
        return Err(Error::MeanMismatch(gap));
    }
    let shift: Vec<f64> = x_hat.iter().zip(x_l).map(|(h, x)| h - x).collect();
    let mut out = tokens.clone();
    for r in 0..out.rows() {
        for (v, s) in out.row_mut(r).iter_mut().zip(&shift) {
            *v += s;
        }
    }
    Ok(out)
}

/// Plausibility mask on the original distribution, then a softmax of the
/// blended logits over the surviving candidates.
pub fn contrastive_fuse(orig: &[f64], refined: &[f64], alpha_cd: f64, beta_cd: f64) -> Result<Vec<f64>> {
    if orig.len() != refined.len() {
        return Err(Error::LengthMismatch(orig.len(), refined.len()));
    }
    if orig.is_empty() {
        return Err(Error::EmptyClassSet);
    }
    if orig.iter().chain(refined).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("logits"));
    }
    let p = softmax(orig);
    let cutoff = beta_cd * p.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..p.len()).filter(|&i| p[i] >= cutoff).collect();
    let blended: Vec<f64> = keep
        .iter()
        .map(|&i| (1.0 - alpha_cd) * orig[i] + alpha_cd * refined[i])
        .collect();
    let q = softmax(&blended);
    let mut out = vec![0.0; orig.len()];
    for (&i, &v) in keep.iter().zip(&q) {
        out[i] = v;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Affine;
    use crate::rng::seeded;

    fn sae(d: usize, h: usize, k: usize, seed: u64) -> VlSae {
        let mut rng = seeded(seed);
        VlSae::from_parts(
            Matrix::random_normal(h, d, 1.0, &mut rng),
            Affine::random(d, h, &mut rng),
            Affine::random(d, h, &mut rng),
            k,
        )
        .unwrap()
    }

    #[test]
    fn fused_degenerate_cases() {
        let m = sae(4, 8, 2, 0);
        let x = [0.3, -1.0, 0.2, 0.5];
        let y = [1.0, 0.1, -0.4, 0.0];
        assert_eq!(fused_score(&x, &y, &m, 0.0).unwrap(), cosine(&x, &y).unwrap());
        assert!((fused_score(&x, &x, &m, 0.4).unwrap() - 1.4).abs() < 1e-12);
    }

    #[test]
    fn single_class_wins() {
        let m = sae(3, 6, 2, 1);
        let classes = Matrix::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(classify(&[0.0, 1.0, 0.0], &classes, &m, 0.7).unwrap(), 0);
        assert!(matches!(
            classify(&[1.0, 0.0, 0.0], &Matrix::zeros(0, 3), &m, 0.7),
            Err(Error::EmptyClassSet)
        ));
    }

    #[test]
    fn tie_goes_to_lowest_class() {
        let m = sae(2, 4, 1, 2);
        let classes = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(classify(&[1.0, 0.0], &classes, &m, 0.5).unwrap(), 1);
    }

    #[test]
    fn refine_identities() {
        let m = sae(3, 6, 2, 3);
        let x_l = [0.2, 0.4, -0.9];
        let h_l = m.encode(&x_l).unwrap();
        let h_v = m.encode(&[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(
            refine_language(&x_l, &h_l, &h_v, None, &m, 0.0, 0.9).unwrap(),
            x_l.to_vec()
        );
        let a = AlignAe::new(3, 0.07, &mut seeded(4)).unwrap();
        let round = refine_language(&x_l, &h_l, &h_v, Some(&a), &m, 1.0, 0.0).unwrap();
        let want = a
            .decode(Modality::Language, &m.decode(&h_l, Modality::Language).unwrap())
            .unwrap();
        for (g, w) in round.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn token_mean_cases() {
        let t = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let mean = t.mean_row();
        assert_eq!(token_mean_replace(&t, &mean, &mean).unwrap(), t);
        let single = Matrix::from_rows(&[vec![0.5, -0.5]]).unwrap();
        assert_eq!(
            token_mean_replace(&single, &[0.5, -0.5], &[2.0, 1.0]).unwrap().row(0),
            &[2.0, 1.0]
        );
        assert!(matches!(
            token_mean_replace(&t, &[0.0, 0.0], &mean),
            Err(Error::MeanMismatch(_))
        ));
    }

    #[test]
    fn fuse_cases() {
        let o = [1.0, 2.0, 0.5, -1.0];
        let r = [3.0, 0.0, 1.0, 2.0];
        assert_eq!(contrastive_fuse(&o, &r, 0.0, 0.0).unwrap(), softmax(&o));
        let same = contrastive_fuse(&o, &o, 0.6, 0.8).unwrap();
        let p = softmax(&o);
        // Only the argmax clears 0.8 of the max here.
        assert_eq!(same, vec![0.0, 1.0, 0.0, 0.0]);
        assert!(p[0] < 0.8 * p[1]);
        assert!(matches!(
            contrastive_fuse(&o, &r[..3], 0.5, 0.5),
            Err(Error::LengthMismatch(4, 3))
        ));
    }

    #[test]
    fn fuse_keeps_argmax() {
        let mut rng = seeded(12);
        for _ in 0..50 {
            let o = Matrix::random_normal(1, 6, 2.0, &mut rng).into_vec();
            let r = Matrix::random_normal(1, 6, 2.0, &mut rng).into_vec();
            let q = contrastive_fuse(&o, &r, 0.6, 0.8).unwrap();
            let arg = (0..6).max_by(|&a, &b| o[a].total_cmp(&o[b])).unwrap();
            assert!(q[arg] > 0.0);
            assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn validate_config() {
        assert!(FusionConfig::default().validate().is_ok());
        let bad = FusionConfig {
            alpha_l: 1.5,
            ..FusionConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
