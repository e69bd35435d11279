//! Shared fixture and independent oracles for the integration tests.

#![allow(dead_code)]

use vlsae::align::{maybe_align, train_align, AlignAe, AlignmentKind};
use vlsae::concept::{
    collect_max_activating, evaluate_trials, trial_means, ConceptReport, ScoringEmbeddings, TrialMetrics,
};
use vlsae::config::TrainConfig;
use vlsae::data::{generate_synthetic, split, EmbeddingPairSet, Split, SyntheticSpec};
use vlsae::numeric::{Affine, Matrix};
use vlsae::rng::seeded;
use vlsae::sae::{train_baseline, train_sae, BaselineModels, BaselineSae, ConceptModel, VlSae};
use vlsae::train::TrainHistory;

pub const SEED: u64 = 7;
pub const CONCEPTS: usize = 16;
pub const DIM: usize = 32;
pub const PER_CONCEPT: usize = 200;
pub const NOISE: f64 = 0.2;
pub const HIDDEN_RATIO: usize = 8;
pub const K: usize = 8;
pub const TOP_M: usize = 10;
pub const SUBSET: usize = 100;
pub const TRIALS: usize = 5;

pub fn align_config() -> TrainConfig {
    TrainConfig {
        epochs: 60,
        batch_size: 256,
        lr: 3e-3,
        ..TrainConfig::align_default()
    }
}

pub fn sae_config() -> TrainConfig {
    TrainConfig {
        epochs: 40,
        batch_size: 128,
        lr: 3e-3,
        k: K,
        hidden_ratio: HIDDEN_RATIO,
        ..TrainConfig::sae_default()
    }
}

/// Raw train and test partitions; `fraction` keeps a prefix of the train rows.
pub fn fixture_data(fraction: f64) -> (EmbeddingPairSet, EmbeddingPairSet) {
    let syn = generate_synthetic(&SyntheticSpec::new(CONCEPTS, DIM, PER_CONCEPT, NOISE, SEED)).unwrap();
    let set = split(&syn.pairs, 0.8, SEED).unwrap();
    let mut train = set.partition(Split::Train);
    if fraction < 1.0 {
        let keep = (train.len() as f64 * fraction).round() as usize;
        train = train.subset(&(0..keep).collect::<Vec<_>>());
    }
    (train, set.partition(Split::Test))
}

pub struct FixtureRun {
    pub align: AlignAe,
    pub align_history: TrainHistory,
    pub test_raw: EmbeddingPairSet,
    pub test_inter: EmbeddingPairSet,
    pub margin_before: f64,
    pub margin_after: f64,
    pub vlsae: VlSae,
    pub sae_s: BaselineSae,
}

pub fn run_fixture(fraction: f64) -> FixtureRun {
    let (train, test_raw) = fixture_data(fraction);
    let mut align = AlignAe::new(DIM, 0.07, &mut seeded(1)).unwrap();
    let margin_before = pair_margin(&maybe_align(&test_raw, AlignmentKind::Implicit, Some(&align)).unwrap());
    let align_history = train_align(&mut align, &train, &align_config()).unwrap();
    let train_inter = maybe_align(&train, AlignmentKind::Implicit, Some(&align)).unwrap();
    let test_inter = maybe_align(&test_raw, AlignmentKind::Implicit, Some(&align)).unwrap();
    let margin_after = pair_margin(&test_inter);

    let mut vlsae = VlSae::new(DIM, HIDDEN_RATIO, K, &mut seeded(2)).unwrap();
    train_sae(&mut vlsae, &train_inter, &sae_config()).unwrap();
    let BaselineModels::SaeS { model: sae_s, .. } = train_baseline(true, &train_inter, &sae_config()).unwrap() else {
        unreachable!("shared baseline requested")
    };
    FixtureRun {
        align,
        align_history,
        test_raw,
        test_inter,
        margin_before,
        margin_after,
        vlsae,
        sae_s,
    }
}

pub struct Evaluation {
    pub report: ConceptReport,
    pub trials: Vec<TrialMetrics>,
    pub intra: f64,
    pub inter: f64,
}

/// Concept report on `set` scored by its ground-truth latents.
pub fn evaluate(model: &impl ConceptModel, set: &EmbeddingPairSet) -> Evaluation {
    let report = collect_max_activating(model, set, TOP_M).unwrap();
    let scoring = ScoringEmbeddings::from_latents(set).expect("fixture carries latents");
    let trials = evaluate_trials(&report, &scoring, SUBSET, TRIALS, SEED).unwrap();
    let (intra, inter) = trial_means(&trials);
    Evaluation {
        report,
        trials,
        intra,
        inter,
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn cos(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b) / (dot(a, a).sqrt() * dot(b, b).sqrt())
}

/// Mean positive-pair cosine minus mean cosine over all mismatched pairs.
pub fn pair_margin(set: &EmbeddingPairSet) -> f64 {
    let n = set.len();
    let mut pos = 0.0;
    let mut neg = 0.0;
    for i in 0..n {
        for j in 0..n {
            let c = cos(set.vision.row(i), set.language.row(j));
            if i == j {
                pos += c;
            } else {
                neg += c;
            }
        }
    }
    pos / n as f64 - neg / (n * (n - 1)) as f64
}

/// Double-loop symmetric InfoNCE, each direction averaged over anchors.
pub fn brute_info_nce(v: &Matrix, l: &Matrix, tau: f64) -> f64 {
    let n = v.rows();
    let s = |i: usize, j: usize| cos(v.row(i), l.row(j)) / tau;
    let mut total = 0.0;
    for i in 0..n {
        let mut dv = 0.0;
        let mut dl = 0.0;
        for j in 0..n {
            dv += s(i, j).exp();
            dl += s(j, i).exp();
        }
        total += -(s(i, i).exp() / dv).ln() - (s(i, i).exp() / dl).ln();
    }
    total / n as f64
}

/// `‖a − n‖ / max(‖a‖, ‖n‖, 1e-8)`.
pub fn rel_err(a: &[f64], n: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(n).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale = dot(a, a).sqrt().max(dot(n, n).sqrt()).max(1e-8);
    diff / scale
}

/// Central differences of `f` with respect to every entry of `params`.
pub fn central_diff(params: &mut [f64], step: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    (0..params.len())
        .map(|i| {
            let orig = params[i];
            params[i] = orig + step;
            let up = f(params);
            params[i] = orig - step;
            let down = f(params);
            params[i] = orig;
            (up - down) / (2.0 * step)
        })
        .collect()
}

pub fn flatten_affine(a: &Affine, out: &mut Vec<f64>) {
    out.extend_from_slice(a.weight.as_slice());
    out.extend_from_slice(&a.bias);
}

pub fn unflatten_affine(a: &mut Affine, src: &[f64]) -> usize {
    let w = a.weight.as_slice().len();
    a.weight.as_mut_slice().copy_from_slice(&src[..w]);
    let b = a.bias.len();
    a.bias.copy_from_slice(&src[w..w + b]);
    w + b
}

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-4;

fn random_batch(n: usize, d: usize, rng: &mut vlsae::rng::Rng) -> Matrix {
    Matrix::random_normal(n, d, 1.0, rng)
}

/// Relative error of the alignment-loss gradient on one random instance.
pub fn align_grad_error(seed: u64) -> f64 {
    use rand::Rng as _;
    use vlsae::align::{align_loss, align_loss_with_grad};
    let mut rng = seeded(seed);
    let d = rng.random_range(2..=5);
    let n = rng.random_range(2..=5);
    let tau = [0.07, 0.5, 1.0][rng.random_range(0..3)];
    let model = AlignAe::new(d, tau, &mut rng).unwrap();
    let bv = random_batch(n, d, &mut rng);
    let bl = random_batch(n, d, &mut rng);
    let (_, g) = align_loss_with_grad(&model, &bv, &bl).unwrap();
    let mut analytic = Vec::new();
    for layer in [&g.enc_vision, &g.enc_language, &g.dec_vision, &g.dec_language] {
        analytic.extend_from_slice(layer.weight.as_slice());
        analytic.extend_from_slice(&layer.bias);
    }
    let mut params = Vec::new();
    for layer in [
        &model.enc_vision,
        &model.enc_language,
        &model.dec_vision,
        &model.dec_language,
    ] {
        flatten_affine(layer, &mut params);
    }
    let mut probe = model.clone();
    let numeric = central_diff(&mut params, FD_STEP, |p| {
        let mut at = 0;
        for layer in [
            &mut probe.enc_vision,
            &mut probe.enc_language,
            &mut probe.dec_vision,
            &mut probe.dec_language,
        ] {
            at += unflatten_affine(layer, &p[at..]);
        }
        align_loss(&probe, &bv, &bl).unwrap()
    });
    rel_err(&analytic, &numeric)
}

/// Relative error of the SAE-loss gradient with the Top-K supports frozen
/// at the base point.
pub fn sae_grad_error(seed: u64) -> f64 {
    use rand::Rng as _;
    use vlsae::sae::{sae_batch_loss_frozen, sae_batch_loss_with_grad};
    let mut rng = seeded(seed);
    let d = rng.random_range(2..=5);
    let ratio = rng.random_range(1..=3);
    let k = rng.random_range(1..=d * ratio);
    let n = rng.random_range(1..=4);
    let model = VlSae::new(d, ratio, k, &mut rng).unwrap();
    let bv = random_batch(n, d, &mut rng);
    let bl = random_batch(n, d, &mut rng);
    let supports = model.batch_supports(&bv, &bl).unwrap();
    let (_, g) = sae_batch_loss_with_grad(&model, &bv, &bl, Some(&supports)).unwrap();
    assert_eq!(g.degenerate, 0);
    let mut analytic = g.encoder.as_slice().to_vec();
    for layer in [&g.dec_vision, &g.dec_language] {
        analytic.extend_from_slice(layer.weight.as_slice());
        analytic.extend_from_slice(&layer.bias);
    }
    let mut params = model.encoder.as_slice().to_vec();
    flatten_affine(&model.dec_vision, &mut params);
    flatten_affine(&model.dec_language, &mut params);
    let mut probe = model.clone();
    let numeric = central_diff(&mut params, FD_STEP, |p| {
        let e = probe.encoder.as_slice().len();
        probe.encoder.as_mut_slice().copy_from_slice(&p[..e]);
        let used = unflatten_affine(&mut probe.dec_vision, &p[e..]);
        unflatten_affine(&mut probe.dec_language, &p[e + used..]);
        sae_batch_loss_frozen(&probe, &bv, &bl, &supports).unwrap()
    });
    rel_err(&analytic, &numeric)
}
