//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any fails.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use player_form::analytics::{ward_linkage, ward_linkage_reference, Dendrogram};
use player_form::dataset::{
    extract_all_windows, make_views, mask_view, pairing, split_cutoff, split_of, FeatureStore, FormWindow, Geometry,
    MaskedBatch, MaskedView, Split, ViewInputs, PHYSICS_DIM,
};
use player_form::gamestate::{
    apply_delta, compute_delta, enumerate_legal_deltas, simulate_corpus, SimConfig, PAPER_VOCAB_SIZE,
};
use player_form::ingest::{reconstruct_games, replay_and_tokenize, token_histogram, AtBatRef, Corpus, Role};
use player_form::model::{
    adam_step, contrastive_loss, evaluate_heldout, form_embedding, loss_and_grad, lr_schedule, total_loss, train,
    AdamHyper, AdamState, ModelConfig, Parameters, Tensor, TrainConfig, TrainData, FORM_DIM,
};
use player_form::pipeline::{cmd_pipeline, stage_dir, RunConfig, Stage};
use player_form::stats::{pca_fit, pca_transform, StatEngine, StatSpec};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn corpus(seed: u64, games: usize) -> Corpus {
    let sim = simulate_corpus(&SimConfig::new(seed, games));
    let mut c = reconstruct_games(sim.events).expect("simulated events reconstruct");
    c.seasons = sim.seasons;
    replay_and_tokenize(&mut c, &enumerate_legal_deltas());
    c
}

fn roundtrip() -> Outcome {
    let t = Instant::now();
    let sim = simulate_corpus(&SimConfig::new(101, 60));
    let mut n = 0;
    for e in &sim.events {
        let d = compute_delta(&e.pre, &e.post, e.ends_at_bat()).map_err(|x| x.to_string())?;
        let after = apply_delta(&e.pre, &d).map_err(|x| x.to_string())?;
        let mut want = e.post;
        if want.outs == 3 {
            want.bases = player_form::gamestate::Bases::EMPTY;
        }
        ensure(after == want, || format!("{:?} -> {:?} gave {:?}", e.pre, e.post, after))?;
        ensure(compute_delta(&e.pre, &after, d.ends_at_bat()).ok() == Some(d), || "delta not recovered".into())?;
        n += 1;
    }
    let el = t.elapsed();
    ensure(n >= 10_000, || format!("only {n} transitions"))?;
    ensure(el < Duration::from_secs(10), || format!("took {el:?}"))?;
    Ok(format!("{n} transitions, 100% identity, {:.2}s", el.as_secs_f64()))
}

fn vocab_closure() -> Outcome {
    let a = enumerate_legal_deltas();
    let b = enumerate_legal_deltas();
    ensure(a.to_text() == b.to_text(), || "enumeration differs between runs".into())?;
    let sim = simulate_corpus(&SimConfig::new(102, 100));
    let mut seen = BTreeSet::new();
    for e in &sim.events {
        let d = compute_delta(&e.pre, &e.post, e.ends_at_bat()).map_err(|x| x.to_string())?;
        ensure(a.contains(&d), || format!("{d:?} missing from the vocabulary"))?;
        seen.insert(a.id(&d).unwrap());
    }
    Ok(format!(
        "{} pitches, {} distinct deltas observed, all in vocabulary; enumerated {} deltas ({} ids) vs reference {}",
        sim.events.len(),
        seen.len(),
        a.n_deltas(),
        a.len(),
        PAPER_VOCAB_SIZE
    ))
}

/// Direct evaluation of the pairwise softmax objective.
fn contrastive_oracle(z: &[Vec<f64>], pair: &[usize], tau: f64) -> f64 {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut total = 0.0;
    for i in 0..z.len() {
        let num = (dot(&z[i], &z[pair[i]]) / tau).exp();
        let den: f64 = (0..z.len()).filter(|&a| a != i).map(|a| (dot(&z[i], &z[a]) / tau).exp()).sum();
        total += -(num / den).ln();
    }
    total
}

fn contrastive_values() -> Outcome {
    let e1 = vec![1.0, 0.0, 0.0];
    let e2 = vec![0.0, 1.0, 0.0];
    let cases: [(Vec<Vec<f64>>, f64, f64); 3] = [
        (vec![e1.clone(), e1.clone()], 0.5, 0.0),
        (vec![e1.clone(); 4], 1.0, 4.0 * 3f64.ln()),
        (vec![e1.clone(), e1.clone(), e2.clone(), e2.clone()], 1.0, 4.0 * (1.0 + 2.0 / std::f64::consts::E).ln()),
    ];
    let mut got = Vec::new();
    for (z, tau, want) in cases {
        let p = pairing(z.len());
        let oracle = contrastive_oracle(&z, &p, tau);
        let (loss, _) = contrastive_loss(&z, &p, tau).map_err(|e| e.to_string())?;
        ensure((oracle - want).abs() < 1e-6, || format!("oracle {oracle} vs closed form {want}"))?;
        ensure((loss - want).abs() < 1e-6, || format!("loss {loss} vs {want}"))?;
        got.push(format!("{loss:.9}"));
    }
    Ok(format!("0, 4ln3, 4ln(1+2/e) reproduced: [{}]", got.join(", ")))
}

fn toy_config() -> ModelConfig {
    ModelConfig {
        layers: 2,
        heads: 2,
        model_dim: 8,
        feedforward_dim: 16,
        vocab_size: 12,
        n_stadiums: 3,
        n_positions: 10,
        n_pitch_types: 9,
        n_plate_zones: 25,
        supplemental_input_dim: 6,
        supplemental_hidden_dim: 5,
        physics_dim: PHYSICS_DIM,
        n_ab_ordinals: 5,
        n_pitch_ordinals: 16,
        form_dim: FORM_DIM,
        max_len: 16,
        dropout: 0.0,
    }
}

fn toy_batch(cfg: &ModelConfig, n_views: usize, rng: &mut ChaCha8Rng) -> MaskedBatch {
    let views = (0..n_views)
        .map(|i| {
            let len = 5 + i % 3;
            let mut ids = |n: usize| -> Vec<u32> { (0..len).map(|t| if t == 0 { 0 } else { rng.gen_range(0..n as u32) }).collect() };
            let tokens: Vec<u32> = ids(cfg.vocab_size - 2).into_iter().enumerate().map(|(t, v)| if t == 0 { 0 } else { v + 2 }).collect();
            let stadium = ids(cfg.n_stadiums);
            let position = ids(cfg.n_positions);
            let pitch_type = ids(cfg.n_pitch_types);
            let zone = ids(cfg.n_plate_zones);
            let mut supplemental = vec![0.0f32; cfg.supplemental_input_dim];
            supplemental.extend((cfg.supplemental_input_dim..len * cfg.supplemental_input_dim).map(|_| rng.gen_range(-1.0..1.0f32)));
            let mut physics = vec![0.0f32; PHYSICS_DIM];
            physics.extend((PHYSICS_DIM..len * PHYSICS_DIM).map(|_| rng.gen_range(-1.0..1.0f32)));
            let mut inputs = ViewInputs {
                tokens,
                stadium,
                position,
                pitch_type,
                zone,
                ab_ordinal: (0..len).map(|t| ((t + 1) / 2).min(4) as u32).collect(),
                pitch_ordinal: (0..len).map(|t| (t % 3) as u32).collect(),
                supplemental,
                physics,
            };
            let positions = vec![1, 3];
            let targets = positions.iter().map(|&p| inputs.tokens[p]).collect();
            for &p in &positions {
                inputs.tokens[p] = 1;
            }
            MaskedView {
                inputs,
                positions,
                targets,
            }
        })
        .collect();
    MaskedBatch {
        role: Role::Batter,
        max_len: cfg.max_len,
        views,
        pairing: pairing(n_views),
        windows: (0..n_views / 2).collect(),
    }
}

fn gradient_check() -> Outcome {
    let t = Instant::now();
    let cfg = toy_config();
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let p = Parameters::<f64>::init(&cfg, 104);
    let batch = toy_batch(&cfg, 4, &mut rng);
    let (tau, lambda) = (0.5, 1.0);
    let (_, g) = loss_and_grad(&cfg, &p, &batch, tau, lambda, None).map_err(|e| e.to_string())?;
    // Every tensor gets coordinates; the rest are drawn at random.
    let mut coords: Vec<(usize, usize)> = Vec::new();
    for (ti, t) in p.tensors.iter().enumerate() {
        coords.push((ti, rng.gen_range(0..t.data.len())));
    }
    while coords.len() < 240 {
        let ti = rng.gen_range(0..p.tensors.len());
        coords.push((ti, rng.gen_range(0..p.tensors[ti].data.len())));
    }
    let h = 1e-4;
    let mut worst: (f64, String) = (0.0, String::new());
    let mut nonzero = 0;
    for &(ti, j) in &coords {
        let mut q = p.clone();
        q.tensors[ti].data[j] += h;
        let up = total_loss(&cfg, &q, &batch, tau, lambda).map_err(|e| e.to_string())?.total;
        q.tensors[ti].data[j] -= 2.0 * h;
        let down = total_loss(&cfg, &q, &batch, tau, lambda).map_err(|e| e.to_string())?.total;
        let fd = (up - down) / (2.0 * h);
        let an = g.tensors[ti].data[j];
        if an != 0.0 {
            nonzero += 1;
        }
        let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6);
        if rel > worst.0 {
            worst = (rel, format!("{}[{j}]", p.tensors[ti].name));
        }
    }
    let el = t.elapsed();
    ensure(worst.0 < 1e-4, || format!("max relative error {:.3e} at {}", worst.0, worst.1))?;
    ensure(el < Duration::from_secs(120), || format!("took {el:?}"))?;
    Ok(format!(
        "{} coordinates ({} with non-zero gradient), max relative error {:.2e}, {:.1}s",
        coords.len(),
        nonzero,
        worst.0,
        el.as_secs_f64()
    ))
}

fn optimizer() -> Outcome {
    let x0 = [0.3, -1.2, 2.0, 0.0];
    let g0 = [0.5, -0.25, 3.0, -1e-3];
    let t = |d: &[f64]| Parameters {
        tensors: vec![Tensor {
            name: "w".into(),
            shape: vec![d.len()],
            data: d.to_vec(),
        }],
    };
    let mut p = t(&x0);
    let grads = t(&g0);
    let mut s = AdamState::new(&p);
    let hp = AdamHyper::default();
    let lr = 5e-4;
    adam_step(&mut p, &grads, &mut s, lr, hp).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for i in 0..4 {
        let m = (1.0 - 0.9) * g0[i];
        let v = (1.0 - 0.999) * g0[i] * g0[i];
        let mhat = m / (1.0 - 0.9);
        let vhat = v / (1.0 - 0.999);
        let want = x0[i] - lr * mhat / (vhat.sqrt() + 1e-8);
        worst = worst.max((p.tensors[0].data[i] - want).abs());
    }
    ensure(worst < 1e-10, || format!("Adam deviates by {worst:e}"))?;
    let paper = TrainConfig::paper(Role::Batter, 0);
    let w = paper.warmup_steps as u64;
    let (at0, atw) = (lr_schedule(0, w, paper.lr), lr_schedule(w, w, paper.lr));
    ensure(at0 == 0.0, || format!("lr at step 0 is {at0}"))?;
    ensure((atw - 5e-4).abs() < 1e-15, || format!("lr at warmup is {atw}"))?;
    Ok(format!(
        "Adam max deviation {worst:.1e}; lr(0)={at0}, lr({w})={atw}"
    ))
}

fn mask_rate() -> Outcome {
    let c = corpus(106, 40);
    let engine = StatEngine::new(&c, StatSpec::desk());
    let store = FeatureStore::build(&c, &engine, 32).map_err(|e| e.to_string())?;
    let windows = extract_all_windows(&c, Role::Batter, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let (mut tokens, mut masked) = (0usize, 0usize);
    for w in &windows {
        if tokens >= 10_000 {
            break;
        }
        let (v, _) = make_views(w);
        let x = store.featurize(&c, &v).map_err(|e| e.to_string())?;
        let m = mask_view(&x, 0.15, &mut rng);
        tokens += x.len() - 1;
        masked += m.positions.len();
    }
    let frac = masked as f64 / tokens as f64;
    ensure(tokens >= 10_000, || format!("only {tokens} tokens"))?;
    ensure((frac - 0.15).abs() <= 0.01, || format!("mask fraction {frac:.4}"))?;
    Ok(format!("{masked}/{tokens} tokens masked = {frac:.4}"))
}

fn learnability() -> Outcome {
    let t = Instant::now();
    let c = corpus(107, 240);
    let cutoff = split_cutoff(&c, 0.8);
    let mut engine = StatEngine::new(&c, StatSpec::desk());
    engine
        .fit_standardizer(&c, |g| c.game_index(g).is_some_and(|i| i < cutoff))
        .map_err(|e| e.to_string())?;
    let store = FeatureStore::build(&c, &engine, 32).map_err(|e| e.to_string())?;
    let (mut tr, mut he) = (Vec::new(), Vec::new());
    for w in extract_all_windows(&c, Role::Batter, 5) {
        match split_of(&w, cutoff) {
            Some(Split::Train) => tr.push(w),
            Some(Split::Heldout) => he.push(w),
            None => {}
        }
    }
    let vocab = enumerate_legal_deltas();
    let cfg = ModelConfig::desk(Role::Batter, vocab.len(), store.supplemental_dim());
    let tc = TrainConfig::desk(107);
    let data = TrainData {
        corpus: &c,
        features: &store,
        train: tr,
        heldout: he,
        max_len: Geometry::of(Role::Batter).default_max_len,
    };
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = train(&cfg, &tc, &data, dir.path(), None).map_err(|e| e.to_string())?;
    let ev = evaluate_heldout(&cfg, &out.params, &data, &tc).map_err(|e| e.to_string())?;
    let observed = token_histogram(&c).len();
    let chance_acc = 1.0 / observed as f64;
    let chance_ret = 1.0 / (2 * tc.batch_windows - 1) as f64;
    let el = t.elapsed();
    let detail = format!(
        "{} steps: held-out masked acc {:.4} vs 5x chance {:.4} (observed vocab {observed}), retrieval {:.4} vs 3x chance {:.4}, {:.0}s",
        out.history.len(),
        ev.masked_acc(),
        5.0 * chance_acc,
        ev.retrieval_acc,
        3.0 * chance_ret,
        el.as_secs_f64()
    );
    ensure(out.history.len() == 2000, || detail.clone())?;
    ensure(ev.masked_acc() >= 5.0 * chance_acc, || detail.clone())?;
    ensure(ev.retrieval_acc >= 3.0 * chance_ret, || detail.clone())?;
    ensure(el < Duration::from_secs(15 * 60), || detail.clone())?;
    Ok(detail)
}

fn same_merges(a: &Dendrogram, b: &Dendrogram) -> bool {
    a.merges.len() == b.merges.len()
        && a.merges.iter().zip(&b.merges).all(|(x, y)| {
            (x.a, x.b, x.size) == (y.a, y.b, y.size) && (x.cost - y.cost).abs() <= 1e-9 * y.cost.abs().max(1.0)
        })
}

fn ward_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let mut sizes = Vec::new();
    for inst in 0..20 {
        let n = rng.gen_range(2..=50);
        let dim = rng.gen_range(1..=6);
        // Every fourth instance sits on a small integer grid so ties occur.
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..dim)
                    .map(|_| {
                        if inst % 4 == 3 {
                            rng.gen_range(0..3) as f64
                        } else {
                            StandardNormal.sample(&mut rng)
                        }
                    })
                    .collect()
            })
            .collect();
        let fast = ward_linkage(&x).map_err(|e| e.to_string())?;
        let slow = ward_linkage_reference(&x).map_err(|e| e.to_string())?;
        ensure(same_merges(&fast, &slow), || format!("instance {inst} (n={n}) differs"))?;
        sizes.push(n);
    }
    Ok(format!("20 instances, n in {:?}..{:?}, identical merge sequences", sizes.iter().min().unwrap(), sizes.iter().max().unwrap()))
}

fn pca() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(109);
    let dim = 12;
    let mix: Vec<Vec<f64>> = (0..dim).map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect()).collect();
    let rows: Vec<Vec<f64>> = (0..300)
        .map(|_| {
            let z: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            (0..dim).map(|j| (0..dim).map(|k| z[k] * mix[k][j]).sum::<f64>() + 3.0).collect()
        })
        .collect();
    let model = pca_fit(&rows, dim).map_err(|e| e.to_string())?;
    let c = &model.components;
    let mut ortho: f64 = 0.0;
    for a in 0..dim {
        for b in 0..dim {
            let d: f64 = c[a].iter().zip(&c[b]).map(|(x, y)| x * y).sum();
            ortho = ortho.max((d - if a == b { 1.0 } else { 0.0 }).abs());
        }
    }
    let scores = pca_transform(&model, &rows).map_err(|e| e.to_string())?;
    let mut recon: f64 = 0.0;
    for (r, s) in rows.iter().zip(&scores) {
        for j in 0..dim {
            let x = model.mean[j] + (0..dim).map(|k| s[k] * c[k][j]).sum::<f64>();
            recon = recon.max((x - r[j]).abs());
        }
    }
    ensure(ortho < 1e-8, || format!("orthonormality error {ortho:e}"))?;
    ensure(recon < 1e-8, || format!("reconstruction error {recon:e}"))?;
    Ok(format!("orthonormality error {ortho:.1e}, full-dimension reconstruction error {recon:.1e}"))
}

fn structure() -> Outcome {
    let total = StatSpec::paper().total_len();
    ensure(total == 1541, || format!("paper stat spec has {total} features"))?;
    let mut spans = Vec::new();
    for (role, window, view, a, b) in [(Role::Batter, 20, 15, 0, 5), (Role::Pitcher, 100, 90, 0, 10)] {
        let w = FormWindow {
            player_id: 1,
            role,
            start: 0,
            at_bats: (0..window).map(|i| AtBatRef { game: i, at_bat: 0 }).collect(),
        };
        ensure(Geometry::of(role).window_len == window, || format!("{role} window length"))?;
        let (v1, v2) = make_views(&w);
        let first = |v: &player_form::dataset::FormView| (v.at_bats[0].game, v.at_bats.last().unwrap().game + 1);
        ensure(first(&v1) == (a, a + view) && first(&v2) == (b, b + view), || format!("{role} views {:?} {:?}", first(&v1), first(&v2)))?;
        spans.push(format!("{role} [{},{}) [{},{})", a, a + view, b, b + view));
    }
    let c = corpus(110, 40);
    let engine = StatEngine::new(&c, StatSpec::desk());
    let store = FeatureStore::build(&c, &engine, 32).map_err(|e| e.to_string())?;
    let cfg = ModelConfig::desk(Role::Batter, enumerate_legal_deltas().len(), store.supplemental_dim());
    let p = Parameters::<f32>::init(&cfg, 1);
    let w = extract_all_windows(&c, Role::Batter, 5);
    let (v, _) = make_views(w.first().ok_or("no windows")?);
    let z = form_embedding(&cfg, &p, &store.featurize(&c, &v).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    ensure(z.len() == 72 && FORM_DIM == 72, || format!("form embedding has {} dims", z.len()))?;
    let paper = ModelConfig::paper(Role::Batter, 283, 2 * total);
    ensure(paper.form_dim == 72, || "paper config form dim".into())?;
    Ok(format!("stat features {total}; {}; form embedding {} dims", spans.join(", "), z.len()))
}

fn determinism() -> Outcome {
    let t = Instant::now();
    let mut outs = Vec::new();
    let dirs = [tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?];
    for d in &dirs {
        let rc = RunConfig::new(d.path());
        cmd_pipeline(&rc).map_err(|e| format!("{e:#}"))?;
        outs.push(std::fs::read(stage_dir(&rc, Stage::Cluster).join("assignments.csv")).map_err(|e| e.to_string())?);
    }
    let rows = outs[0].iter().filter(|b| **b == b'\n').count() - 1;
    ensure(outs[0] == outs[1], || "assignments.csv differs between runs".into())?;
    Ok(format!(
        "two full desk runs, {rows} assignment rows, byte-identical, {:.0}s",
        t.elapsed().as_secs_f64()
    ))
}

fn main() {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let only: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("gamestate round trip", roundtrip),
        ("vocabulary closure", vocab_closure),
        ("contrastive loss values", contrastive_values),
        ("gradient check", gradient_check),
        ("optimizer and schedule", optimizer),
        ("masking rate", mask_rate),
        ("desk-scale learnability", learnability),
        ("Ward equivalence", ward_equivalence),
        ("PCA", pca),
        ("structure checks", structure),
        ("end-to-end determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if only.is_some_and(|o| o != i + 1) {
            continue;
        }
        match f() {
            Ok(d) => println!("criterion {:>2} {name}: PASS ({d})", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({d})", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
