//! One function per subcommand. Each validates its flags first, then loads
//! inputs, runs one pipeline stage and writes its outputs plus a
//! `<out>.config.json` echo of the resolved settings.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use vlsae::align::{maybe_align, train_align, AlignAe, AlignmentKind};
use vlsae::concept::{
    collect_max_activating, evaluate_trials, interpret_pair, trial_means, ConceptReport, ScoringEmbeddings,
};
use vlsae::config::{SparsifierKind, TrainConfig};
use vlsae::data::{
    encode_report, generate_synthetic, load_align, load_checkpoint, load_pairs, load_report, load_vlsae,
    ratio_to_fraction, save_checkpoint, save_pairs, split, write_atomic, Checkpoint, EmbeddingPairSet, Model, Split,
    SyntheticSpec,
};
use vlsae::enhance::{classify, refine_language, FusionConfig, Reweighted};
use vlsae::numeric::{cosine, Matrix};
use vlsae::rng::seeded;
use vlsae::sae::{train_baseline, train_sae, BaselineModels, BaselineSae, ConceptModel, SaeDPair, VlSae};
use vlsae::train::TrainHistory;
use vlsae::Modality;

use crate::args::*;
use crate::error::{CliError, CliResult};

/// Largest accepted `--precision`.
const MAX_PRECISION: usize = 17;

pub fn run(command: &Command) -> CliResult<()> {
    match command {
        Command::Gen(a) => gen(a),
        Command::TrainAlign(a) => train_align_cmd(a),
        Command::TrainSae(a) => train_sae_cmd(a),
        Command::TrainBaseline(a) => train_baseline_cmd(a),
        Command::Eval(a) => eval(a),
        Command::Interpret(a) => interpret(a),
        Command::Score(a) => score(a),
        Command::Refine(a) => refine(a),
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Maps core configuration errors raised during flag validation to usage
/// errors.
fn as_usage(e: vlsae::Error) -> CliError {
    match e {
        vlsae::Error::BadSpec(m) => CliError::Usage(m),
        other => CliError::Core(other),
    }
}

fn parse_split(text: &str) -> CliResult<f64> {
    let (a, b) = text
        .split_once(':')
        .ok_or_else(|| usage(format!("--split must look like 4:1, got {text:?}")))?;
    let parse = |s: &str| {
        s.trim()
            .parse::<u32>()
            .map_err(|_| usage(format!("--split must look like 4:1, got {text:?}")))
    };
    ratio_to_fraction(parse(a)?, parse(b)?).map_err(as_usage)
}

fn check_precision(p: usize) -> CliResult<()> {
    if p > MAX_PRECISION {
        return Err(usage(format!("--precision must be at most {MAX_PRECISION}, got {p}")));
    }
    Ok(())
}

fn fmt(v: f64, precision: usize) -> String {
    format!("{v:.precision$}")
}

/// `<out>.<suffix>`, keeping the full output file name.
fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".");
    name.push(suffix);
    PathBuf::from(name)
}

fn write_config(out: &Path, command: &str, args: &impl Serialize, extra: serde_json::Value) -> CliResult<()> {
    let doc = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "args": args,
        "resolved": extra,
    });
    let text = serde_json::to_string_pretty(&doc)? + "\n";
    write_atomic(&sibling(out, "config.json"), text.as_bytes())?;
    Ok(())
}

/// The loaded pairs, split, plus the alignment model when one was given.
struct Loaded {
    set: EmbeddingPairSet,
    align: Option<AlignAe>,
}

impl Loaded {
    fn open(args: &DataArgs, fraction: f64) -> CliResult<Self> {
        let raw = load_pairs(&args.data)?;
        let set = split(&raw, fraction, args.split_seed)?;
        let align = args.align.as_ref().map(load_align).transpose()?;
        if let Some(a) = &align {
            if a.dim() != set.dim() {
                return Err(vlsae::Error::DimMismatch(format!(
                    "alignment model is {}-dimensional, data is {}",
                    a.dim(),
                    set.dim()
                ))
                .into());
            }
        }
        Ok(Self { set, align })
    }

    /// Intermediate representations: alignment encoder outputs when an
    /// alignment model is loaded, the inputs themselves otherwise.
    fn intermediate(&self, set: &EmbeddingPairSet) -> CliResult<EmbeddingPairSet> {
        let kind = if self.align.is_some() {
            AlignmentKind::Implicit
        } else {
            AlignmentKind::Explicit
        };
        Ok(maybe_align(set, kind, self.align.as_ref())?)
    }

    fn part(&self, p: Partition) -> (Vec<usize>, EmbeddingPairSet) {
        let idx = match p {
            Partition::Train => self.set.indices(Split::Train),
            Partition::Test => self.set.indices(Split::Test),
            Partition::All => (0..self.set.len()).collect(),
        };
        let sub = self.set.subset(&idx);
        (idx, sub)
    }
}

fn train_config(optim: &OptimArgs, base: TrainConfig) -> TrainConfig {
    TrainConfig {
        epochs: optim.epochs.unwrap_or(base.epochs),
        batch_size: optim.batch_size.unwrap_or(base.batch_size),
        lr: optim.lr.unwrap_or(base.lr),
        weight_decay: optim.weight_decay.unwrap_or(base.weight_decay),
        // Initialization draws from `seed`, batch order from `seed + 1`.
        seed: optim.seed.wrapping_add(1),
        ..base
    }
}

fn print_history(label: &str, h: &TrainHistory) {
    match (h.first(), h.last()) {
        (Some(a), Some(b)) => println!(
            "{label}: {} epochs, loss {a:.6} -> {b:.6}, {} rows redrawn, {} degenerate gradients",
            h.epoch_loss.len(),
            h.resuscitated,
            h.degenerate_grads
        ),
        _ => println!("{label}: no epochs run"),
    }
}

fn gen(a: &GenArgs) -> CliResult<()> {
    let spec = SyntheticSpec {
        identity_maps: a.identity_maps,
        ..SyntheticSpec::new(a.concepts, a.dim, a.per_concept, a.noise, a.seed)
    };
    spec.validate().map_err(as_usage)?;
    let syn = generate_synthetic(&spec)?;
    save_pairs(&syn.pairs, &a.out)?;
    write_config(&a.out, "gen", a, json!({ "spec": spec }))?;
    println!(
        "wrote {} pairs ({} concepts, d = {}) to {}",
        syn.pairs.len(),
        a.concepts,
        a.dim,
        a.out.display()
    );
    Ok(())
}

fn train_align_cmd(a: &TrainAlignArgs) -> CliResult<()> {
    if a.data.align.is_some() {
        return Err(usage("train-align takes raw embeddings; drop --align"));
    }
    let fraction = parse_split(&a.data.split)?;
    let config = TrainConfig {
        tau: a.tau,
        ..train_config(&a.optim, TrainConfig::align_default())
    };
    config.validate().map_err(as_usage)?;

    let loaded = Loaded::open(&a.data, fraction)?;
    let train = loaded.set.partition(Split::Train);
    let mut model = AlignAe::new(train.dim(), config.tau, &mut seeded(a.optim.seed))?;
    let history = train_align(&mut model, &train, &config)?;
    print_history("align", &history);

    let echo = serde_json::to_string(&config)?;
    save_checkpoint(
        &Checkpoint {
            model: Model::Align(model),
            config: echo,
        },
        &a.out,
    )?;
    write_config(&a.out, "train-align", a, json!({ "train": config, "history": history }))?;
    println!("wrote alignment model to {}", a.out.display());
    Ok(())
}

fn sae_config(optim: &OptimArgs, shape: &SaeShapeArgs) -> TrainConfig {
    TrainConfig {
        k: shape.k,
        hidden_ratio: shape.hidden_ratio,
        ..train_config(optim, TrainConfig::sae_default())
    }
}

fn check_k(config: &TrainConfig, d: usize) -> CliResult<()> {
    let h = d * config.hidden_ratio;
    if config.sparsifier == SparsifierKind::TopK && config.k > h {
        return Err(usage(format!(
            "--k {} exceeds the hidden width {h} (d = {d}, ratio {})",
            config.k, config.hidden_ratio
        )));
    }
    Ok(())
}

fn train_sae_cmd(a: &TrainSaeArgs) -> CliResult<()> {
    let fraction = parse_split(&a.data.split)?;
    let config = TrainConfig {
        resuscitate_dead: !a.no_resuscitate,
        ..sae_config(&a.optim, &a.shape)
    };
    config.validate().map_err(as_usage)?;

    let loaded = Loaded::open(&a.data, fraction)?;
    check_k(&config, loaded.set.dim())?;
    let train = loaded.intermediate(&loaded.set.partition(Split::Train))?;
    let mut model = VlSae::new(train.dim(), config.hidden_ratio, config.k, &mut seeded(a.optim.seed))?;
    let history = train_sae(&mut model, &train, &config)?;
    print_history("vl-sae", &history);

    save_checkpoint(
        &Checkpoint {
            model: Model::VlSae(model),
            config: serde_json::to_string(&config)?,
        },
        &a.out,
    )?;
    write_config(&a.out, "train-sae", a, json!({ "train": config, "history": history }))?;
    println!("wrote VL-SAE to {}", a.out.display());
    Ok(())
}

fn train_baseline_cmd(a: &TrainBaselineArgs) -> CliResult<()> {
    let fraction = parse_split(&a.data.split)?;
    let config = TrainConfig {
        sparsifier: match a.sparsifier {
            SparsifierArg::TopK => SparsifierKind::TopK,
            SparsifierArg::L1 => SparsifierKind::L1,
        },
        l1_coeff: a.l1_coeff,
        ..sae_config(&a.optim, &a.shape)
    };
    config.validate().map_err(as_usage)?;

    let loaded = Loaded::open(&a.data, fraction)?;
    check_k(&config, loaded.set.dim())?;
    let train = loaded.intermediate(&loaded.set.partition(Split::Train))?;
    let shared = a.variant == Variant::SaeS;
    let (model, histories) = match train_baseline(shared, &train, &config)? {
        BaselineModels::SaeS { model, history } => {
            print_history("sae-s", &history);
            (Model::SaeS(model), vec![history])
        }
        BaselineModels::SaeD { models, history } => {
            print_history("sae-d vision", &history[0]);
            print_history("sae-d language", &history[1]);
            (Model::SaeD(models), history.to_vec())
        }
    };
    let kind = model.kind();
    save_checkpoint(
        &Checkpoint {
            model,
            config: serde_json::to_string(&config)?,
        },
        &a.out,
    )?;
    write_config(
        &a.out,
        "train-baseline",
        a,
        json!({ "train": config, "history": histories }),
    )?;
    println!("wrote {kind} to {}", a.out.display());
    Ok(())
}

/// Any checkpoint that maps representations to concept activations.
enum AnyConcept {
    VlSae(VlSae),
    SaeS(BaselineSae),
    SaeD(SaeDPair),
}

impl AnyConcept {
    fn load(path: &Path) -> CliResult<(Self, &'static str)> {
        let ck = load_checkpoint(path)?;
        let kind = ck.model.kind();
        let model = match ck.model {
            Model::VlSae(m) => AnyConcept::VlSae(m),
            Model::SaeS(m) => AnyConcept::SaeS(m),
            Model::SaeD(m) => AnyConcept::SaeD(m),
            Model::Align(_) => {
                return Err(CliError::Data(format!(
                    "{} holds an alignment model, not a concept model",
                    path.display()
                )))
            }
        };
        Ok((model, kind))
    }
}

impl ConceptModel for AnyConcept {
    fn hidden(&self) -> usize {
        match self {
            AnyConcept::VlSae(m) => ConceptModel::hidden(m),
            AnyConcept::SaeS(m) => ConceptModel::hidden(m),
            AnyConcept::SaeD(m) => m.hidden(),
        }
    }

    fn dim(&self) -> usize {
        match self {
            AnyConcept::VlSae(m) => ConceptModel::dim(m),
            AnyConcept::SaeS(m) => ConceptModel::dim(m),
            AnyConcept::SaeD(m) => m.dim(),
        }
    }

    fn activations(&self, x: &[f64], m: Modality) -> vlsae::Result<Vec<f64>> {
        match self {
            AnyConcept::VlSae(s) => s.activations(x, m),
            AnyConcept::SaeS(s) => s.activations(x, m),
            AnyConcept::SaeD(s) => s.activations(x, m),
        }
    }

    fn activations_batch(&self, rows: &Matrix, m: Modality) -> vlsae::Result<Matrix> {
        match self {
            AnyConcept::VlSae(s) => s.activations_batch(rows, m),
            AnyConcept::SaeS(s) => s.activations_batch(rows, m),
            AnyConcept::SaeD(s) => s.activations_batch(rows, m),
        }
    }
}

fn check_model_dim(model: &impl ConceptModel, d: usize, path: &Path) -> CliResult<()> {
    if model.dim() != d {
        return Err(vlsae::Error::DimMismatch(format!(
            "{} expects {}-dimensional inputs, data is {d}",
            path.display(),
            model.dim()
        ))
        .into());
    }
    Ok(())
}

/// Labels for the evaluated models; repeated kinds get a `-2`, `-3`...
fn variant_labels(kinds: &[&'static str]) -> Vec<String> {
    kinds
        .iter()
        .enumerate()
        .map(|(i, k)| {
            let before = kinds[..i].iter().filter(|p| *p == k).count();
            if before == 0 {
                k.to_string()
            } else {
                format!("{k}-{}", before + 1)
            }
        })
        .collect()
}

fn eval(a: &EvalArgs) -> CliResult<()> {
    let fraction = parse_split(&a.data.split)?;
    check_precision(a.precision)?;
    if a.trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    if a.subset == 0 || a.top_m == 0 {
        return Err(usage("--subset and --top-m must be at least 1"));
    }

    let loaded = Loaded::open(&a.data, fraction)?;
    let (idx, part) = loaded.part(a.partition);
    let scoring = match &a.scoring {
        Some(path) => {
            let s = load_pairs(path)?;
            if s.len() != loaded.set.len() {
                return Err(vlsae::Error::DimMismatch(format!(
                    "scoring file has {} rows, data has {}",
                    s.len(),
                    loaded.set.len()
                ))
                .into());
            }
            ScoringEmbeddings {
                vision: s.vision.select_rows(&idx),
                language: s.language.select_rows(&idx),
            }
        }
        None => ScoringEmbeddings::from_latents(&part)
            .ok_or_else(|| CliError::Data("data has no latents; pass --scoring".into()))?,
    };
    let inter = loaded.intermediate(&part)?;

    let mut models = Vec::new();
    let mut kinds = Vec::new();
    for path in &a.models {
        let (m, kind) = AnyConcept::load(path)?;
        check_model_dim(&m, inter.dim(), path)?;
        models.push(m);
        kinds.push(kind);
    }
    let labels = variant_labels(&kinds);

    let mut csv = csv::Writer::from_writer(Vec::new());
    csv.write_record([
        "variant",
        "trial",
        "subset_size",
        "intra_sim",
        "inter_sim",
        "dead_count",
        "concept_count",
    ])?;
    let mut reports = Vec::new();
    for (model, label) in models.iter().zip(&labels) {
        let mut report = collect_max_activating(model, &inter, a.top_m)?;
        let trials = evaluate_trials(&report, &scoring, a.subset, a.trials, a.seed)?;
        let (intra, inter_sim) = trial_means(&trials);
        report.intra_similarity = Some(intra);
        report.inter_similarity = Some(inter_sim);
        for t in &trials {
            csv.write_record([
                label.clone(),
                t.trial.to_string(),
                t.subset_size.to_string(),
                fmt(t.intra.value, a.precision),
                fmt(t.inter.value, a.precision),
                report.dead_count().to_string(),
                report.concept_count().to_string(),
            ])?;
        }
        println!(
            "{label}: intra {} inter {} over {} trials of {} neurons; {} dead, {} concepts",
            fmt(intra, a.precision),
            fmt(inter_sim, a.precision),
            trials.len(),
            trials.first().map_or(0, |t| t.subset_size),
            report.dead_count(),
            report.concept_count()
        );
        reports.push((label.clone(), report));
    }
    let bytes = csv.into_inner().map_err(|e| CliError::Internal(e.to_string()))?;
    write_atomic(&a.out, &bytes)?;
    for (label, report) in &reports {
        write_atomic(
            &sibling(&a.out, &format!("{label}.jsonl")),
            encode_report(report)?.as_bytes(),
        )?;
    }
    write_config(&a.out, "eval", a, json!({ "variants": labels, "rows": part.len() }))?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn interpret(a: &InterpretArgs) -> CliResult<()> {
    let fraction = parse_split(&a.data.split)?;
    if a.top_n == 0 {
        return Err(usage("--top-n must be at least 1"));
    }
    let loaded = Loaded::open(&a.data, fraction)?;
    if a.row >= loaded.set.len() {
        return Err(usage(format!(
            "--row {} out of range for {} rows",
            a.row,
            loaded.set.len()
        )));
    }
    let (model, _) = AnyConcept::load(&a.model)?;
    check_model_dim(&model, loaded.set.dim(), &a.model)?;
    let report = load_report(&a.report)?;
    let one = loaded.intermediate(&loaded.set.subset(&[a.row]))?;
    let result = interpret_pair(&model, one.vision.row(0), one.language.row(0), &report, a.top_n)?;
    let doc = json!({ "row": a.row, "id": loaded.set.ids[a.row], "concepts": result });
    let text = serde_json::to_string_pretty(&doc)? + "\n";
    print!("{text}");
    if let Some(out) = &a.out {
        write_atomic(out, text.as_bytes())?;
        write_config(out, "interpret", a, json!({}))?;
    }
    Ok(())
}

/// Per-concept mean of `rows` over the rows carrying each label.
fn class_means(rows: &Matrix, labels: &[usize]) -> CliResult<Matrix> {
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut sums = Matrix::zeros(classes, rows.cols());
    let mut counts = vec![0usize; classes];
    for (r, &c) in labels.iter().enumerate() {
        counts[c] += 1;
        for (s, v) in sums.row_mut(c).iter_mut().zip(rows.row(r)) {
            *s += v;
        }
    }
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(CliError::Data(format!("concept {c} has no training rows")));
    }
    for (c, &n) in counts.iter().enumerate() {
        sums.row_mut(c).iter_mut().for_each(|v| *v /= n as f64);
    }
    Ok(sums)
}

fn accuracy(
    model: &impl ConceptModel,
    queries: &Matrix,
    labels: &[usize],
    classes: &Matrix,
    alpha: f64,
) -> CliResult<f64> {
    let mut hits = 0usize;
    for (q, &want) in queries.iter_rows().zip(labels) {
        if classify(q, classes, model, alpha)? == want {
            hits += 1;
        }
    }
    Ok(hits as f64 / labels.len().max(1) as f64)
}

fn score(a: &ScoreArgs) -> CliResult<()> {
    let fraction = parse_split(&a.data.split)?;
    check_precision(a.precision)?;
    let mut alphas = vec![0.0];
    for &x in &a.alpha_c {
        FusionConfig {
            alpha_c: x,
            ..FusionConfig::default()
        }
        .validate()
        .map_err(as_usage)?;
        if !alphas.contains(&x) {
            alphas.push(x);
        }
    }

    let loaded = Loaded::open(&a.data, fraction)?;
    let (model, _) = AnyConcept::load(&a.model)?;
    check_model_dim(&model, loaded.set.dim(), &a.model)?;
    let labels = loaded
        .set
        .concept_labels()
        .ok_or_else(|| CliError::Data("data has no concept labels or latents to score against".into()))?;
    let train_idx = loaded.set.indices(Split::Train);
    let test_idx = loaded.set.indices(Split::Test);
    let train = loaded.intermediate(&loaded.set.subset(&train_idx))?;
    let test = loaded.intermediate(&loaded.set.subset(&test_idx))?;
    let train_labels: Vec<usize> = train_idx.iter().map(|&i| labels[i]).collect();
    let test_labels: Vec<usize> = test_idx.iter().map(|&i| labels[i]).collect();
    if test_labels.is_empty() {
        return Err(vlsae::Error::EmptySet.into());
    }
    let classes = class_means(&train.language, &train_labels)?;

    let means = a
        .reweight
        .as_ref()
        .map(load_report)
        .transpose()?
        .map(|r: ConceptReport| r.mean_activations());
    let mut rows = Vec::new();
    for &alpha in &alphas {
        let acc = match &means {
            Some(means) => {
                let rw = Reweighted { model: &model, means };
                accuracy(&rw, &test.vision, &test_labels, &classes, alpha)?
            }
            None => accuracy(&model, &test.vision, &test_labels, &classes, alpha)?,
        };
        rows.push((alpha, acc));
    }

    let mut csv = csv::Writer::from_writer(Vec::new());
    csv.write_record(["alpha_c", "accuracy", "queries"])?;
    for (alpha, acc) in &rows {
        csv.write_record([fmt(*alpha, 2), fmt(*acc, a.precision), test_labels.len().to_string()])?;
        println!("alpha_c {alpha:.2}: accuracy {}", fmt(*acc, a.precision));
    }
    let bytes = csv.into_inner().map_err(|e| CliError::Internal(e.to_string()))?;
    write_atomic(&a.out, &bytes)?;
    write_config(
        &a.out,
        "score",
        a,
        json!({ "alpha_c": alphas, "classes": classes.rows(), "reweight": means.is_some() }),
    )?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn mean_pair_cosine(v: &Matrix, l: &Matrix) -> CliResult<f64> {
    let mut total = 0.0;
    for (a, b) in v.iter_rows().zip(l.iter_rows()) {
        total += cosine(a, b)?;
    }
    Ok(total / v.rows().max(1) as f64)
}

fn refine(a: &RefineArgs) -> CliResult<()> {
    let fraction = parse_split(&a.data.split)?;
    FusionConfig {
        alpha_l: a.alpha_l,
        beta: a.beta,
        ..FusionConfig::default()
    }
    .validate()
    .map_err(as_usage)?;

    let loaded = Loaded::open(&a.data, fraction)?;
    let sae = load_vlsae(&a.model)?;
    check_model_dim(&sae, loaded.set.dim(), &a.model)?;
    let (_, part) = loaded.part(a.partition);
    let inter = loaded.intermediate(&part)?;
    let h_v = sae.encode_batch(&inter.vision)?;
    let h_l = sae.encode_batch(&inter.language)?;

    let mut refined = part.language.clone();
    for r in 0..part.len() {
        let x = refine_language(
            part.language.row(r),
            h_l.row(r),
            h_v.row(r),
            loaded.align.as_ref(),
            &sae,
            a.alpha_l,
            a.beta,
        )?;
        refined.row_mut(r).copy_from_slice(&x);
    }
    let after_inter = match &loaded.align {
        Some(al) => al.encode_batch(Modality::Language, &refined)?,
        None => refined.clone(),
    };
    let before = mean_pair_cosine(&inter.vision, &inter.language)?;
    let after = mean_pair_cosine(&inter.vision, &after_inter)?;

    let mut out = part.clone();
    out.language = refined;
    save_pairs(&out, &a.out)?;
    write_config(
        &a.out,
        "refine",
        a,
        json!({ "rows": out.len(), "pair_cosine_before": before, "pair_cosine_after": after }),
    )?;
    println!(
        "refined {} language rows; mean pair cosine {before:.6} -> {after:.6}",
        out.len()
    );
    println!("wrote {}", a.out.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_parsing() {
        assert_eq!(parse_split("4:1").unwrap(), 0.8);
        assert!(matches!(parse_split("4-1"), Err(CliError::Usage(_))));
        assert!(matches!(parse_split("0:1"), Err(CliError::Usage(_))));
    }

    #[test]
    fn repeated_kinds_get_suffixes() {
        assert_eq!(
            variant_labels(&["vl-sae", "sae-s", "vl-sae"]),
            ["vl-sae", "sae-s", "vl-sae-2"]
        );
    }

    #[test]
    fn sibling_keeps_extension() {
        assert_eq!(
            sibling(Path::new("out/m.csv"), "config.json"),
            PathBuf::from("out/m.csv.config.json")
        );
    }

    #[test]
    fn class_means_average_by_label() {
        let rows = Matrix::from_rows(&[vec![1.0, 0.0], vec![3.0, 0.0], vec![0.0, 2.0]]).unwrap();
        let m = class_means(&rows, &[0, 0, 1]).unwrap();
        assert_eq!(m.row(0), &[2.0, 0.0]);
        assert_eq!(m.row(1), &[0.0, 2.0]);
        assert!(matches!(class_means(&rows, &[0, 0, 2]), Err(CliError::Data(_))));
    }
}
