//! Per-neuron concept descriptions and the concept-quality metrics.
//!
//! A neuron is described by the rows of an evaluation corpus that activate
//! it most strongly, separately for each modality. Quality is scored with
//! an externally supplied embedder: intra-similarity compares a neuron's
//! mean vision and language samples, inter-similarity compares samples of
//! different neurons.

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::EmbeddingPairSet;
use crate::error::{Error, Result};
use crate::modality::Modality;
use crate::numeric::{cosine, Matrix};
use crate::rng::seeded;
use crate::sae::ConceptModel;

/// Samples kept per neuron and modality.
pub const DEFAULT_TOP_M: usize = 10;
/// Neurons drawn per evaluation trial.
pub const DEFAULT_SUBSET: usize = 100;
pub const DEFAULT_TRIALS: usize = 5;
/// Means below this carry no frequency information.
pub const MIN_MEAN_ACTIVATION: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronRecord {
    pub neuron: usize,
    /// Row indices into the evaluation corpus, strongest first.
    pub top_vision: Vec<usize>,
    pub top_language: Vec<usize>,
    pub top_vision_ids: Vec<String>,
    pub top_language_ids: Vec<String>,
    /// Mean activation over all 2N rows.
    pub mean_activation: f64,
    /// Rows (of either modality) on which the neuron is nonzero.
    pub activation_count: usize,
    pub dead: bool,
}

impl NeuronRecord {
    pub fn top(&self, m: Modality) -> &[usize] {
        match m {
            Modality::Vision => &self.top_vision,
            Modality::Language => &self.top_language,
        }
    }

    fn evaluable(&self) -> bool {
        !self.top_vision.is_empty() && !self.top_language.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptReport {
    pub neurons: Vec<NeuronRecord>,
    pub top_m: usize,
    pub intra_similarity: Option<f64>,
    pub inter_similarity: Option<f64>,
}

impl ConceptReport {
    pub fn hidden(&self) -> usize {
        self.neurons.len()
    }

    pub fn dead_count(&self) -> usize {
        self.neurons.iter().filter(|n| n.dead).count()
    }

    pub fn concept_count(&self) -> usize {
        self.hidden() - self.dead_count()
    }

    pub fn live_neurons(&self) -> Vec<usize> {
        self.neurons.iter().filter(|n| !n.dead).map(|n| n.neuron).collect()
    }

    pub fn mean_activations(&self) -> Vec<f64> {
        self.neurons.iter().map(|n| n.mean_activation).collect()
    }
}

/// Vectors used to score samples, row-aligned with the evaluation corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoringEmbeddings {
    pub vision: Matrix,
    pub language: Matrix,
}

impl ScoringEmbeddings {
    /// Both modalities scored by the same matrix, e.g. ground-truth latents.
    pub fn shared(m: Matrix) -> Self {
        Self {
            vision: m.clone(),
            language: m,
        }
    }

    /// The corpus latents, when present.
    pub fn from_latents(set: &EmbeddingPairSet) -> Option<Self> {
        set.latents.clone().map(Self::shared)
    }

    fn rows(&self, m: Modality) -> &Matrix {
        match m {
            Modality::Vision => &self.vision,
            Modality::Language => &self.language,
        }
    }

    fn mean_of(&self, m: Modality, rows: &[usize]) -> Result<Vec<f64>> {
        let mat = self.rows(m);
        let mut out = vec![0.0; mat.cols()];
        for &r in rows {
            if r >= mat.rows() {
                return Err(Error::shape(format!("scoring row < {}", mat.rows()), r));
            }
            for (o, v) in out.iter_mut().zip(mat.row(r)) {
                *o += v;
            }
        }
        let inv = 1.0 / rows.len() as f64;
        out.iter_mut().for_each(|v| *v *= inv);
        Ok(out)
    }
}

/// Rows with the largest nonzero activation of `col`, strongest first and
/// lowest row index on ties.
fn top_rows(acts: &Matrix, col: usize, m: usize) -> Vec<usize> {
    let mut hits: Vec<(f64, usize)> = (0..acts.rows())
        .filter_map(|r| {
            let a = acts.get(r, col);
            (a != 0.0).then_some((a, r))
        })
        .collect();
    hits.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    hits.truncate(m);
    hits.into_iter().map(|(_, r)| r).collect()
}

/// Encodes the whole corpus and records, per neuron, its top `m` rows in
/// each modality together with activation frequency statistics.
pub fn collect_max_activating(model: &impl ConceptModel, set: &EmbeddingPairSet, m: usize) -> Result<ConceptReport> {
    if set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if m == 0 {
        return Err(Error::BadSpec("top-M must be at least 1".into()));
    }
    let acts_v = model.activations_batch(&set.vision, Modality::Vision)?;
    let acts_l = model.activations_batch(&set.language, Modality::Language)?;
    let total_rows = 2 * set.len();
    let neurons = (0..model.hidden())
        .into_par_iter()
        .map(|j| {
            let mut sum = 0.0;
            let mut count = 0;
            for acts in [&acts_v, &acts_l] {
                for r in 0..acts.rows() {
                    let a = acts.get(r, j);
                    sum += a;
                    count += usize::from(a != 0.0);
                }
            }
            let top_vision = top_rows(&acts_v, j, m);
            let top_language = top_rows(&acts_l, j, m);
            NeuronRecord {
                neuron: j,
                top_vision_ids: top_vision.iter().map(|&r| set.ids[r].clone()).collect(),
                top_language_ids: top_language.iter().map(|&r| set.ids[r].clone()).collect(),
                top_vision,
                top_language,
                mean_activation: sum / total_rows as f64,
                activation_count: count,
                dead: count == 0,
            }
        })
        .collect();
    Ok(ConceptReport {
        neurons,
        top_m: m,
        intra_similarity: None,
        inter_similarity: None,
    })
}

/// A metric value with the number of neurons it covers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub value: f64,
    pub evaluated: usize,
    /// Neurons dropped for lacking samples in one modality.
    pub skipped: usize,
}

struct NeuronMeans {
    vision: Vec<Vec<f64>>,
    language: Vec<Vec<f64>>,
    skipped: usize,
}

fn neuron_means(report: &ConceptReport, scoring: &ScoringEmbeddings, subset: &[usize]) -> Result<NeuronMeans> {
    let mut vision = Vec::new();
    let mut language = Vec::new();
    let mut skipped = 0;
    for &j in subset {
        let rec = report
            .neurons
            .get(j)
            .ok_or_else(|| Error::shape(format!("neuron < {}", report.hidden()), j))?;
        if !rec.evaluable() {
            skipped += 1;
            continue;
        }
        vision.push(scoring.mean_of(Modality::Vision, &rec.top_vision)?);
        language.push(scoring.mean_of(Modality::Language, &rec.top_language)?);
    }
    if vision.is_empty() {
        return Err(Error::NoEvaluableNeurons);
    }
    Ok(NeuronMeans {
        vision,
        language,
        skipped,
    })
}

/// Mean over evaluated neurons of `cos(x̄_v^i, x̄_l^i)`.
pub fn intra_similarity(report: &ConceptReport, scoring: &ScoringEmbeddings, subset: &[usize]) -> Result<Metric> {
    let means = neuron_means(report, scoring, subset)?;
    let n = means.vision.len();
    let mut total = 0.0;
    for (v, l) in means.vision.iter().zip(&means.language) {
        total += cosine(v, l)?;
    }
    Ok(Metric {
        value: total / n as f64,
        evaluated: n,
        skipped: means.skipped,
    })
}

/// `Σ_i Σ_{j≠i} cos(x̄_v^i, x̄_l^j) / (h′(h′−1))` over evaluated neurons.
pub fn inter_similarity(report: &ConceptReport, scoring: &ScoringEmbeddings, subset: &[usize]) -> Result<Metric> {
    let means = neuron_means(report, scoring, subset)?;
    let n = means.vision.len();
    if n < 2 {
        return Err(Error::NoEvaluableNeurons);
    }
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut s = 0.0;
            for j in (0..n).filter(|&j| j != i) {
                s += cosine(&means.vision[i], &means.language[j])?;
            }
            Ok(s)
        })
        .collect::<Result<_>>()?;
    Ok(Metric {
        value: rows.iter().sum::<f64>() / (n * (n - 1)) as f64,
        evaluated: n,
        skipped: means.skipped,
    })
}

/// Uniform draw of `n` live neurons without replacement, ascending.
pub fn sample_neuron_subset(report: &ConceptReport, n: usize, seed: u64) -> Result<Vec<usize>> {
    let live = report.live_neurons();
    if n > live.len() {
        return Err(Error::NotEnoughNeurons {
            requested: n,
            available: live.len(),
        });
    }
    let mut picked: Vec<usize> = index::sample(&mut seeded(seed), live.len(), n)
        .into_iter()
        .map(|i| live[i])
        .collect();
    picked.sort_unstable();
    Ok(picked)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub trial: usize,
    pub subset_size: usize,
    pub intra: Metric,
    pub inter: Metric,
}

/// Runs `trials` seeded subset draws; trial `t` uses seed `seed + t`.
/// A subset larger than the live count is clamped to it.
pub fn evaluate_trials(
    report: &ConceptReport,
    scoring: &ScoringEmbeddings,
    subset: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<TrialMetrics>> {
    let size = subset.min(report.concept_count());
    (0..trials)
        .map(|t| {
            let s = sample_neuron_subset(report, size, seed.wrapping_add(t as u64))?;
            Ok(TrialMetrics {
                trial: t,
                subset_size: size,
                intra: intra_similarity(report, scoring, &s)?,
                inter: inter_similarity(report, scoring, &s)?,
            })
        })
        .collect()
}

/// Means of intra and inter similarity over trials.
pub fn trial_means(trials: &[TrialMetrics]) -> (f64, f64) {
    let n = trials.len().max(1) as f64;
    (
        trials.iter().map(|t| t.intra.value).sum::<f64>() / n,
        trials.iter().map(|t| t.inter.value).sum::<f64>() / n,
    )
}

/// Divides each activation by its neuron's corpus mean.
pub fn reweight_activations(h: &[f64], mean_activations: &[f64]) -> Result<Vec<f64>> {
    if h.len() != mean_activations.len() {
        return Err(Error::LengthMismatch(h.len(), mean_activations.len()));
    }
    Ok(h.iter()
        .zip(mean_activations)
        .map(|(&a, &m)| if m < MIN_MEAN_ACTIVATION { a } else { a / m })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivatedConcept {
    pub neuron: usize,
    pub score: f64,
    pub top_vision_ids: Vec<String>,
    pub top_language_ids: Vec<String>,
}

/// Encodes `x`, reweights by the report means and returns up to `top_n`
/// active neurons by descending reweighted score.
pub fn interpret(
    model: &impl ConceptModel,
    x: &[f64],
    m: Modality,
    report: &ConceptReport,
    top_n: usize,
) -> Result<Vec<ActivatedConcept>> {
    if report.hidden() != model.hidden() {
        return Err(Error::shape(
            format!("report over {} neurons", model.hidden()),
            report.hidden(),
        ));
    }
    let h = model.activations(x, m)?;
    let scores = reweight_activations(&h, &report.mean_activations())?;
    let mut active: Vec<usize> = (0..scores.len()).filter(|&i| h[i] != 0.0).collect();
    active.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    active.truncate(top_n);
    Ok(active
        .into_iter()
        .map(|j| ActivatedConcept {
            neuron: j,
            score: scores[j],
            top_vision_ids: report.neurons[j].top_vision_ids.clone(),
            top_language_ids: report.neurons[j].top_language_ids.clone(),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairInterpretation {
    pub vision: Vec<ActivatedConcept>,
    pub language: Vec<ActivatedConcept>,
    /// Neurons in both top sets, ascending.
    pub aligned: Vec<usize>,
}

pub fn interpret_pair(
    model: &impl ConceptModel,
    x_v: &[f64],
    x_l: &[f64],
    report: &ConceptReport,
    top_n: usize,
) -> Result<PairInterpretation> {
    let vision = interpret(model, x_v, Modality::Vision, report, top_n)?;
    let language = interpret(model, x_l, Modality::Language, report, top_n)?;
    let mut aligned: Vec<usize> = vision
        .iter()
        .map(|c| c.neuron)
        .filter(|j| language.iter().any(|c| c.neuron == *j))
        .collect();
    aligned.sort_unstable();
    Ok(PairInterpretation {
        vision,
        language,
        aligned,
    })
}
