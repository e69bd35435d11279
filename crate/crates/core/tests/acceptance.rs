//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Set `VLSAE_UPDATE_GOLDEN=1` to rewrite `tests/golden/fixture.json` from
//! the current run instead of checking against it.

mod common;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use common::*;
use vlsae::align::{info_nce, AlignAe};
use vlsae::data::{
    decode_checkpoint, encode_checkpoint, generate_synthetic, load_checkpoint, load_pairs, load_pairs_with_dim,
    load_vlsae, save_checkpoint, save_pairs, Checkpoint, Model, SyntheticSpec,
};
use vlsae::enhance::{contrastive_fuse, fused_score, refine_language, token_mean_replace};
use vlsae::numeric::{cosine, distance_g, softmax, Affine, Matrix};
use vlsae::rng::seeded;
use vlsae::sae::{BaselineSae, BaselineVariant, SaeDPair, Sparsifier, VlSae};
use vlsae::Error;

// Tolerances and budgets.
const DISTANCE_TOL: f64 = 1e-9;
const SPARSITY_SCALE_TOL: f64 = 1e-9;
const INFONCE_TOL: f64 = 1e-10;
const UNIFORM_TOL: f64 = 1e-9;
const ENHANCE_TOL: f64 = 1e-9;
const MARGIN_REL_TOL: f64 = 0.10;
/// Measured gaps must keep at least this share of the recorded ones.
const GAP_KEEP: f64 = 0.5;
const DISTANCE_BUDGET: Duration = Duration::from_secs(10);
const GRADIENT_BUDGET: Duration = Duration::from_secs(30);
const FIXTURE_BUDGET: Duration = Duration::from_secs(300);
const SWEEP: [f64; 4] = [0.1, 0.25, 0.5, 1.0];

type Outcome = Result<String, String>;

#[derive(Debug, Serialize, Deserialize)]
struct Golden {
    align_margin: f64,
    vlsae_intra: f64,
    vlsae_inter: f64,
    sae_s_intra: f64,
    sae_s_inter: f64,
}

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/fixture.json")
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn distance_identity() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for (i, d) in [2usize, 8, 64].into_iter().enumerate() {
        let mut rng = seeded(100 + i as u64);
        let per = 100_000 / 3 + 1;
        let m = Matrix::random_normal(2 * per, d, 1.0, &mut rng);
        for p in 0..per {
            let (x, w) = (m.row(2 * p), m.row(2 * p + 1));
            let g = distance_g(x, w).map_err(|e| e.to_string())?;
            ensure((0.0..=2.0).contains(&g), || format!("g = {g} outside [0,2]"))?;
            worst = worst.max((g - (2.0 - 2.0 * cos(x, w)).sqrt()).abs());
        }
    }
    ensure(worst < DISTANCE_TOL, || format!("identity error {worst:e}"))?;
    let mut slack = f64::INFINITY;
    for (i, d) in [2usize, 8, 64].into_iter().enumerate() {
        let mut rng = seeded(200 + i as u64);
        let per = 100_000 / 3 + 1;
        let m = Matrix::random_normal(3 * per, d, 1.0, &mut rng);
        for t in 0..per {
            let (xv, xl, w) = (m.row(3 * t), m.row(3 * t + 1), m.row(3 * t + 2));
            let lhs = (distance_g(xv, w).unwrap() - distance_g(xl, w).unwrap()).abs();
            let rhs = distance_g(xv, xl).unwrap() + DISTANCE_TOL;
            slack = slack.min(rhs - lhs);
        }
    }
    ensure(slack >= 0.0, || format!("triangle bound violated by {:e}", -slack))?;
    let t = start.elapsed();
    ensure(t < DISTANCE_BUDGET, || format!("took {t:?}"))?;
    Ok(format!(
        "max identity error {worst:.1e}, min triangle slack {slack:.1e}, {t:.2?}"
    ))
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let instances = 25;
    let align = (0..instances).map(align_grad_error).fold(0.0, f64::max);
    let sae = (0..instances).map(|s| sae_grad_error(1000 + s)).fold(0.0, f64::max);
    ensure(align < FD_TOL, || format!("align relative error {align:e}"))?;
    ensure(sae < FD_TOL, || format!("sae relative error {sae:e}"))?;
    let t = start.elapsed();
    ensure(t < GRADIENT_BUDGET, || format!("took {t:?}"))?;
    Ok(format!(
        "{instances} instances each, worst rel. error align {align:.1e}, sae {sae:.1e}, {t:.2?}"
    ))
}

fn sparsity() -> Outcome {
    let mut rng = seeded(300);
    let inputs = Matrix::random_normal(200, 32, 1.0, &mut rng);
    let mut checked = 0;
    for k in [1usize, 4, 256] {
        let model = VlSae::new(32, 8, k.min(256), &mut rng).unwrap();
        for x in inputs.iter_rows() {
            let h = model.encode(x).unwrap();
            let nz = h.iter().filter(|&&v| v != 0.0).count();
            ensure(nz == k, || format!("k = {k}: {nz} nonzeros"))?;
            for c in [0.1, 10.0] {
                let xs: Vec<f64> = x.iter().map(|v| v * c).collect();
                let hs = model.encode(&xs).unwrap();
                let gap = h.iter().zip(&hs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                ensure(gap < SPARSITY_SCALE_TOL, || {
                    format!("k = {k}, c = {c}: encode moved by {gap:e}")
                })?;
            }
            checked += 1;
        }
        for variant in [BaselineVariant::SaeS, BaselineVariant::SaeDVision] {
            let base = BaselineSae::new(variant, 32, 8, Sparsifier::TopK(k), &mut rng).unwrap();
            for x in inputs.iter_rows() {
                let nz = base.encode(x).unwrap().iter().filter(|&&v| v != 0.0).count();
                ensure(nz == k, || format!("baseline k = {k}: {nz} nonzeros"))?;
            }
        }
    }
    Ok(format!(
        "{checked} VL-SAE encodes at k in {{1,4,256}}, h = 256; baselines also exact"
    ))
}

fn infonce() -> Outcome {
    let mut worst = 0.0f64;
    for (i, n) in [2usize, 3, 8].into_iter().enumerate() {
        for rep in 0..10 {
            let mut rng = seeded(400 + 10 * i as u64 + rep);
            let v = Matrix::random_normal(n, 5, 1.0, &mut rng);
            let l = Matrix::random_normal(n, 5, 1.0, &mut rng);
            let got = info_nce(&v, &l, 0.07).unwrap();
            worst = worst.max((got - brute_info_nce(&v, &l, 0.07)).abs());
        }
    }
    ensure(worst < INFONCE_TOL, || format!("brute-force gap {worst:e}"))?;
    let mut uniform = 0.0f64;
    for n in [2usize, 3, 8] {
        let v = Matrix::from_vec(n, 3, (0..n).flat_map(|i| [1.0 + i as f64, 0.0, 0.0]).collect()).unwrap();
        uniform = uniform.max((info_nce(&v, &v, 0.07).unwrap() - 2.0 * (n as f64).ln()).abs());
    }
    ensure(uniform < UNIFORM_TOL, || format!("uniform-logit gap {uniform:e}"))?;
    Ok(format!("brute-force gap {worst:.1e}, uniform-logit gap {uniform:.1e}"))
}

struct FixtureOutcome {
    run: FixtureRun,
    vl: Evaluation,
    ss: Evaluation,
    elapsed: Duration,
}

fn train_fixture() -> FixtureOutcome {
    let start = Instant::now();
    let run = run_fixture(1.0);
    let vl = evaluate(&run.vlsae, &run.test_inter);
    let ss = evaluate(&run.sae_s, &run.test_inter);
    FixtureOutcome {
        run,
        vl,
        ss,
        elapsed: start.elapsed(),
    }
}

fn directional(f: &FixtureOutcome, golden: &Golden) -> Outcome {
    let intra_gap = f.vl.intra - f.ss.intra;
    let inter_gap = f.ss.inter - f.vl.inter;
    let want_intra = golden.vlsae_intra - golden.sae_s_intra;
    let want_inter = golden.sae_s_inter - golden.vlsae_inter;
    let line = format!(
        "intra VL-SAE {:.4} vs SAE-S {:.4} (gap {intra_gap:.4}, recorded {want_intra:.4}); \
         inter VL-SAE {:.4} vs SAE-S {:.4} (gap {inter_gap:.4}, recorded {want_inter:.4}); {:.1?}",
        f.vl.intra, f.ss.intra, f.vl.inter, f.ss.inter, f.elapsed
    );
    ensure(intra_gap > 0.0 && inter_gap > 0.0, || {
        format!("gap not positive: {line}")
    })?;
    ensure(
        intra_gap >= GAP_KEEP * want_intra && inter_gap >= GAP_KEEP * want_inter,
        || format!("gap below recorded margin: {line}"),
    )?;
    ensure(f.elapsed < FIXTURE_BUDGET, || format!("too slow: {line}"))?;
    Ok(line)
}

fn alignment(f: &FixtureOutcome, golden: &Golden) -> Outcome {
    let (before, after) = (f.run.margin_before, f.run.margin_after);
    let rel = (after - golden.align_margin).abs() / golden.align_margin.abs();
    let line = format!(
        "pos-neg cosine margin {before:.4} -> {after:.4} (recorded {:.4}, rel. dev {rel:.3}); loss {:.3} -> {:.3}",
        golden.align_margin,
        f.run.align_history.first().unwrap_or(f64::NAN),
        f.run.align_history.last().unwrap_or(f64::NAN),
    );
    ensure(after > 0.0 && after > before, || format!("no alignment gain: {line}"))?;
    ensure(rel <= MARGIN_REL_TOL, || format!("margin off golden: {line}"))?;
    Ok(line)
}

fn enhancement() -> Outcome {
    let mut worst = 0.0f64;
    let mut track = |a: f64, b: f64| worst = worst.max((a - b).abs());
    for case in 0..50u64 {
        let mut rng = seeded(500 + case);
        let d = 6;
        let sae = VlSae::new(d, 3, 4, &mut rng).unwrap();
        let align = AlignAe::new(d, 0.07, &mut rng).unwrap();
        let x = Matrix::random_normal(2, d, 1.0, &mut rng);
        let (xv, xl) = (x.row(0), x.row(1));
        let (hv, hl) = (sae.encode(xv).unwrap(), sae.encode(xl).unwrap());
        let alpha = 0.1 * (case % 10 + 1) as f64;

        // Fused score: two independently computed cosines.
        let got = fused_score(xv, xl, &sae, alpha).unwrap();
        track(got, cos(xv, xl) + alpha * cos(&hv, &hl));
        if fused_score(xv, xl, &sae, 0.0).unwrap() != cosine(xv, xl).unwrap() {
            return Err("alpha_c = 0 is not plain cosine".into());
        }

        // Refinement: explicit composition of the two affine decoders.
        let (al, beta) = (0.7, 0.9);
        let mixed: Vec<f64> = hl.iter().zip(&hv).map(|(l, v)| l + beta * v).collect();
        let apply = |a: &Affine, z: &[f64]| -> Vec<f64> {
            (0..a.out_dim()).map(|r| a.bias[r] + dot(a.weight.row(r), z)).collect()
        };
        let inner = apply(&sae.dec_language, &mixed);
        let outer = apply(&align.dec_language, &inner);
        let got = refine_language(xl, &hl, &hv, Some(&align), &sae, al, beta).unwrap();
        for (g, (x, o)) in got.iter().zip(xl.iter().zip(&outer)) {
            track(*g, (1.0 - al) * x + al * o);
        }
        if refine_language(xl, &hl, &hv, Some(&align), &sae, 0.0, beta).unwrap() != xl {
            return Err("alpha_l = 0 changed x_l".into());
        }

        // Token mean replacement.
        let tokens = Matrix::random_normal(5, d, 1.0, &mut rng);
        let mean = tokens.mean_row();
        let new = Matrix::random_normal(1, d, 1.0, &mut rng).into_vec();
        let out = token_mean_replace(&tokens, &mean, &new).unwrap();
        for r in 0..5 {
            for c in 0..d {
                track(out.get(r, c), tokens.get(r, c) - mean[c] + new[c]);
            }
        }
        for (m, n) in out.mean_row().iter().zip(&new) {
            track(*m, *n);
        }
        if token_mean_replace(&tokens, &mean, &mean).unwrap() != tokens {
            return Err("identity replacement changed tokens".into());
        }

        // Contrastive fusion: mask, blend, softmax by hand.
        let lo = Matrix::random_normal(2, 4, 2.0, &mut rng);
        let (o, rf) = (lo.row(0), lo.row(1));
        let (acd, bcd) = (0.6, 0.8);
        let e: Vec<f64> = o.iter().map(|v| v.exp()).collect();
        let z: f64 = e.iter().sum();
        let p: Vec<f64> = e.iter().map(|v| v / z).collect();
        let pmax = p.iter().copied().fold(0.0, f64::max);
        let keep: Vec<bool> = p.iter().map(|&q| q >= bcd * pmax).collect();
        let logits: Vec<f64> = (0..4).map(|i| (1.0 - acd) * o[i] + acd * rf[i]).collect();
        let z2: f64 = (0..4).filter(|&i| keep[i]).map(|i| logits[i].exp()).sum();
        let got = contrastive_fuse(o, rf, acd, bcd).unwrap();
        for i in 0..4 {
            track(got[i], if keep[i] { logits[i].exp() / z2 } else { 0.0 });
        }
        if contrastive_fuse(o, rf, 0.0, 0.0).unwrap() != softmax(o) {
            return Err("alpha_cd = beta_cd = 0 is not softmax(orig)".into());
        }
    }
    ensure(worst < ENHANCE_TOL, || format!("oracle gap {worst:e}"))?;
    Ok(format!(
        "50 randomized cases, worst oracle gap {worst:.1e}; degenerate identities exact"
    ))
}

fn stored(m: &Matrix) -> Matrix {
    Matrix::from_vec(
        m.rows(),
        m.cols(),
        m.as_slice().iter().map(|&v| v as f32 as f64).collect(),
    )
    .unwrap()
}

fn persistence(f: &FixtureOutcome) -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let syn = generate_synthetic(&SyntheticSpec::new(4, 8, 10, 0.1, 9)).unwrap();
    let path = dir.path().join("pairs.vlse");
    save_pairs(&syn.pairs, &path).unwrap();
    let back = load_pairs(&path).unwrap();
    ensure(
        back.vision == stored(&syn.pairs.vision) && back.language == stored(&syn.pairs.language),
        || "pair rows differ after round trip".into(),
    )?;
    ensure(
        back.latents == syn.pairs.latents.as_ref().map(stored) && back.ids == syn.pairs.ids,
        || "latents or ids differ".into(),
    )?;
    save_pairs(&back, &path).unwrap();
    ensure(load_pairs(&path).unwrap() == back, || {
        "second round trip not exact".into()
    })?;

    let models = [
        Model::Align(f.run.align.clone()),
        Model::VlSae(f.run.vlsae.clone()),
        Model::SaeS(f.run.sae_s.clone()),
        Model::SaeD(SaeDPair {
            vision: BaselineSae::new(BaselineVariant::SaeDVision, 8, 2, Sparsifier::TopK(3), &mut seeded(1)).unwrap(),
            language: BaselineSae::new(
                BaselineVariant::SaeDLanguage,
                8,
                2,
                Sparsifier::ReluL1(1e-4),
                &mut seeded(2),
            )
            .unwrap(),
        }),
    ];
    for m in models {
        let ck = Checkpoint {
            model: m,
            config: "{}".into(),
        };
        let p = dir.path().join("model.vlck");
        save_checkpoint(&ck, &p).unwrap();
        let once = load_checkpoint(&p).unwrap();
        save_checkpoint(&once, &p).unwrap();
        let twice = load_checkpoint(&p).unwrap();
        ensure(once == twice, || {
            format!("{} checkpoint not stable at storage precision", ck.model.kind())
        })?;
        if let (Model::VlSae(a), Model::VlSae(b)) = (&ck.model, &once.model) {
            ensure(b.encoder == stored(&a.encoder) && b.k == a.k, || {
                "VL-SAE parameters changed".into()
            })?;
        }
    }

    // Corruption classes.
    let bytes = std::fs::read(&path).unwrap();
    let mut errors = Vec::new();
    let write = |b: &[u8]| {
        let p = dir.path().join("bad.vlse");
        std::fs::write(&p, b).unwrap();
        load_pairs(&p)
    };
    let mut bad = bytes.clone();
    bad[0] = b'Z';
    errors.push(("bad magic", matches!(write(&bad), Err(Error::BadMagic(_)))));
    let mut bad = bytes.clone();
    bad[4] = 2;
    errors.push(("bad version", matches!(write(&bad), Err(Error::BadVersion(2)))));
    errors.push((
        "truncated",
        matches!(write(&bytes[..bytes.len() / 2]), Err(Error::TruncatedFile { .. })),
    ));
    errors.push((
        "dim mismatch",
        matches!(load_pairs_with_dim(&path, 9), Err(Error::DimMismatch(_))),
    ));
    let ck = encode_checkpoint(&Checkpoint {
        model: Model::Align(f.run.align.clone()),
        config: "{}".into(),
    })
    .unwrap();
    errors.push((
        "checkpoint truncated",
        matches!(decode_checkpoint(&ck[..ck.len() - 1]), Err(Error::TruncatedFile { .. })),
    ));
    let p = dir.path().join("align.vlck");
    std::fs::write(&p, &ck).unwrap();
    errors.push((
        "kind mismatch",
        matches!(load_vlsae(&p), Err(Error::KindMismatch { .. })),
    ));
    if let Some((name, _)) = errors.iter().find(|(_, ok)| !ok) {
        return Err(format!("{name}: wrong error class"));
    }
    Ok(format!(
        "pairs and 4 checkpoint kinds round-trip; {} corruption classes detected",
        errors.len()
    ))
}

fn accounting(f: &FixtureOutcome) -> Outcome {
    let mut inters = Vec::new();
    let mut reports = vec![&f.vl.report, &f.ss.report];
    let mut sweep_evals = Vec::new();
    for &frac in &SWEEP {
        if frac == 1.0 {
            inters.push(f.vl.inter);
            continue;
        }
        let run = run_fixture(frac);
        sweep_evals.push(evaluate(&run.vlsae, &run.test_inter));
        inters.push(sweep_evals.last().unwrap().inter);
    }
    reports.extend(sweep_evals.iter().map(|e| &e.report));
    for r in &reports {
        ensure(r.dead_count() + r.concept_count() == r.hidden(), || {
            "dead + concept != h".into()
        })?;
    }
    // Least-squares slope of inter-similarity against log data fraction.
    let xs: Vec<f64> = SWEEP.iter().map(|f| f.ln()).collect();
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = inters.iter().sum::<f64>() / inters.len() as f64;
    let slope = xs.iter().zip(&inters).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx) * (x - mx)).sum::<f64>();
    let series: Vec<String> = SWEEP
        .iter()
        .zip(&inters)
        .map(|(f, i)| format!("{:.0}%: {i:.4}", f * 100.0))
        .collect();
    let line = format!(
        "{} reports balance; inter by data volume [{}], slope {slope:.4}",
        reports.len(),
        series.join(", ")
    );
    ensure(slope <= 0.0 && inters[inters.len() - 1] <= inters[0], || {
        format!("inter rises with data: {line}")
    })?;
    Ok(line)
}

fn main() -> ExitCode {
    let mut lines: Vec<(usize, &str, Outcome)> = vec![
        (1, "distance identity and bound", distance_identity()),
        (2, "gradient correctness", gradients()),
        (3, "sparsity contract", sparsity()),
        (4, "InfoNCE oracle", infonce()),
    ];
    let fixture = train_fixture();
    let measured = Golden {
        align_margin: fixture.run.margin_after,
        vlsae_intra: fixture.vl.intra,
        vlsae_inter: fixture.vl.inter,
        sae_s_intra: fixture.ss.intra,
        sae_s_inter: fixture.ss.inter,
    };
    if std::env::var_os("VLSAE_UPDATE_GOLDEN").is_some() {
        let text = serde_json::to_string_pretty(&measured).unwrap();
        std::fs::write(golden_path(), text + "\n").unwrap();
        println!("golden file rewritten: {}", golden_path().display());
    }
    let golden: Golden = match std::fs::read_to_string(golden_path()) {
        Ok(t) => serde_json::from_str(&t).expect("golden file parses"),
        Err(e) => {
            println!("cannot read golden file {}: {e}", golden_path().display());
            return ExitCode::FAILURE;
        }
    };
    lines.push((5, "directional concept quality", directional(&fixture, &golden)));
    lines.push((6, "alignment training effect", alignment(&fixture, &golden)));
    lines.push((7, "enhancement math", enhancement()));
    lines.push((8, "persistence", persistence(&fixture)));
    lines.push((9, "dead-neuron accounting and data sweep", accounting(&fixture)));

    let mut failed = 0;
    for (n, name, outcome) in &lines {
        match outcome {
            Ok(detail) => println!("criterion {n} PASS [{name}] {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {n} FAIL [{name}] {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", lines.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
