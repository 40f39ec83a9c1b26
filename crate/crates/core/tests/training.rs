use player_form::dataset::{extract_all_windows, split_cutoff, split_of, FeatureStore, Geometry, Split};
use player_form::gamestate::{enumerate_legal_deltas, simulate_corpus, SimConfig};
use player_form::ingest::{reconstruct_games, replay_and_tokenize, Corpus, Role};
use player_form::model::{train, ModelConfig, TrainConfig, TrainData};
use player_form::stats::{StatEngine, StatSpec};

struct Setup {
    corpus: Corpus,
    store: FeatureStore,
    cfg: ModelConfig,
}

fn setup(games: usize) -> Setup {
    let sim = simulate_corpus(&SimConfig::new(31, games));
    let mut corpus = reconstruct_games(sim.events).unwrap();
    corpus.seasons = sim.seasons;
    let vocab = enumerate_legal_deltas();
    replay_and_tokenize(&mut corpus, &vocab);
    let cutoff = split_cutoff(&corpus, 0.8);
    let mut engine = StatEngine::new(&corpus, StatSpec::desk());
    engine
        .fit_standardizer(&corpus, |g| corpus.game_index(g).is_some_and(|i| i < cutoff))
        .unwrap();
    let store = FeatureStore::build(&corpus, &engine, 32).unwrap();
    let cfg = ModelConfig::desk(Role::Batter, vocab.len(), store.supplemental_dim());
    Setup { corpus, store, cfg }
}

fn data(s: &Setup) -> TrainData<'_> {
    let cutoff = split_cutoff(&s.corpus, 0.8);
    let (mut train, mut heldout) = (Vec::new(), Vec::new());
    for w in extract_all_windows(&s.corpus, Role::Batter, 5) {
        match split_of(&w, cutoff) {
            Some(Split::Train) => train.push(w),
            Some(Split::Heldout) => heldout.push(w),
            None => {}
        }
    }
    TrainData {
        corpus: &s.corpus,
        features: &s.store,
        train,
        heldout,
        max_len: Geometry::of(Role::Batter).default_max_len,
    }
}

#[test]
fn resume_reproduces_the_uninterrupted_run() {
    let s = setup(60);
    let d = data(&s);
    let mut tc = TrainConfig::desk(5);
    tc.total_steps = 12;
    tc.warmup_steps = 4;
    tc.checkpoint_every = 6;

    let straight = tempfile::tempdir().unwrap();
    let full = train(&s.cfg, &tc, &d, straight.path(), None).unwrap();

    let split = tempfile::tempdir().unwrap();
    let mut first = tc.clone();
    first.total_steps = 6;
    let head = train(&s.cfg, &first, &d, split.path(), None).unwrap();
    let tail = train(&s.cfg, &tc, &d, split.path(), Some(&head.checkpoint)).unwrap();

    assert_eq!(tail.history.first().unwrap().0, 6);
    for (a, b) in full.history[6..].iter().zip(&tail.history) {
        assert_eq!(a.0, b.0);
        assert_eq!(a.2.total.to_bits(), b.2.total.to_bits(), "loss at step {}", a.0);
    }
    assert_eq!(full.params, tail.params);
}

#[test]
fn desk_mgm_loss_falls_by_a_third() {
    let s = setup(240);
    let d = data(&s);
    let tc = TrainConfig::desk(7);
    let dir = tempfile::tempdir().unwrap();
    let out = train(&s.cfg, &tc, &d, dir.path(), None).unwrap();
    // Single-batch losses are noisy, so compare the first and last 50 steps.
    let mean = |h: &[(u64, f64, player_form::model::LossParts)]| h.iter().map(|x| x.2.mgm).sum::<f64>() / h.len() as f64;
    let n = out.history.len();
    let (start, end) = (mean(&out.history[..50]), mean(&out.history[n - 50..]));
    assert!(end <= 0.7 * start, "MGM loss {start:.3} -> {end:.3}");
}
