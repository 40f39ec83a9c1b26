use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::*;
use crate::dataset::split_cutoff;
use crate::gamestate::{enumerate_legal_deltas, simulate_corpus, SimConfig};
use crate::ingest::{reconstruct_games, replay_and_tokenize};
use crate::model::Parameters;
use crate::stats::StatSpec;

fn gaussian(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..dim).map(|_| StandardNormal.sample(rng)).collect())
        .collect()
}

#[test]
fn two_distant_pairs() {
    let x = vec![vec![0.0, 0.0], vec![10.0, 10.0], vec![0.1, 0.0], vec![10.0, 10.2]];
    let (d, labels) = ward_cluster(&x, 2).unwrap();
    assert_eq!(labels, vec![0, 1, 0, 1]);
    assert_eq!((d.merges[0].a, d.merges[0].b), (0, 2));
    assert!((d.merges[0].cost - 0.005).abs() < 1e-12);
    assert_eq!((d.merges[2].a, d.merges[2].b, d.merges[2].size), (4, 5, 4));
}

#[test]
fn k_equals_n_gives_singletons() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = gaussian(&mut rng, 9, 3);
    let (_, labels) = ward_cluster(&x, 9).unwrap();
    assert_eq!(labels, (0..9).collect::<Vec<_>>());
    let (_, one) = ward_cluster(&x, 1).unwrap();
    assert!(one.iter().all(|&l| l == 0));
    assert!(matches!(ward_cluster(&x, 10), Err(AnalyticsError::BadK { .. })));
    assert!(matches!(ward_cluster(&[], 1), Err(AnalyticsError::EmptyInput)));
}

#[test]
fn ties_merge_smallest_pair_first() {
    // Unit square: four equal nearest-neighbour costs.
    let x = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
    let d = ward_linkage(&x).unwrap();
    assert_eq!((d.merges[0].a, d.merges[0].b), (0, 1));
    assert_eq!((d.merges[1].a, d.merges[1].b), (2, 3));
    assert_eq!(d, ward_linkage_reference(&x).unwrap());
}

fn same_merges(a: &Dendrogram, b: &Dendrogram) -> bool {
    a.merges.len() == b.merges.len()
        && a.merges.iter().zip(&b.merges).all(|(x, y)| {
            (x.a, x.b, x.size) == (y.a, y.b, y.size) && (x.cost - y.cost).abs() <= 1e-9 * y.cost.abs().max(1.0)
        })
}

#[test]
fn matches_exhaustive_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10 {
        let n = rng.gen_range(2..=40);
        let dim = rng.gen_range(1..=5);
        let x = gaussian(&mut rng, n, dim);
        assert!(same_merges(&ward_linkage(&x).unwrap(), &ward_linkage_reference(&x).unwrap()));
    }
    // Integer grids produce many exact ties.
    for _ in 0..5 {
        let x: Vec<Vec<f64>> = (0..30)
            .map(|_| vec![rng.gen_range(0..4) as f64, rng.gen_range(0..4) as f64])
            .collect();
        assert!(same_merges(&ward_linkage(&x).unwrap(), &ward_linkage_reference(&x).unwrap()));
    }
}

#[test]
fn merge_costs_non_decreasing() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let x = gaussian(&mut rng, 60, 4);
        let d = ward_linkage(&x).unwrap();
        assert_eq!(d.merges.len(), 59);
        for w in d.merges.windows(2) {
            assert!(w[1].cost >= w[0].cost * (1.0 - 1e-12));
        }
        assert_eq!(d.merges.last().unwrap().size, 60);
    }
}

#[test]
fn permutation_invariant_up_to_relabeling() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = gaussian(&mut rng, 80, 3);
    let (_, base) = ward_cluster(&x, 6).unwrap();
    for _ in 0..5 {
        let mut perm: Vec<usize> = (0..80).collect();
        perm.shuffle(&mut rng);
        let shuffled: Vec<Vec<f64>> = perm.iter().map(|&i| x[i].clone()).collect();
        let (_, labels) = ward_cluster(&shuffled, 6).unwrap();
        let mut back = vec![0; 80];
        for (pos, &i) in perm.iter().enumerate() {
            back[i] = labels[pos];
        }
        assert!((agreement(&base, &back).ari - 1.0).abs() < 1e-12);
    }
}

#[test]
fn ari_reference_values() {
    let a = [0, 0, 1, 1, 2, 2];
    assert_eq!(agreement(&a, &a).ari, 1.0);
    assert!((agreement(&a, &a).nmi - 1.0).abs() < 1e-12);
    assert_eq!(agreement(&a, &[5, 5, 3, 3, 9, 9]).ari, 1.0);
    let one = [0; 6];
    let r = agreement(&one, &a);
    assert_eq!(r.ari, 0.0);
    assert_eq!(r.nmi, 0.0);
    // Hand count: pairs together in both = 2, in a = 3, in b = 6, total 15.
    let b = [0, 0, 0, 1, 1, 1];
    let expected = 3.0 * 6.0 / 15.0;
    let want = (2.0 - expected) / (4.5 - expected);
    assert!((agreement(&a, &b).ari - want).abs() < 1e-12);
}

#[test]
fn random_assignments_have_ari_near_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut total = 0.0;
    for _ in 0..20 {
        let a: Vec<usize> = (0..200).map(|_| rng.gen_range(0..8)).collect();
        let b: Vec<usize> = (0..200).map(|_| rng.gen_range(0..8)).collect();
        let ari = agreement(&a, &b).ari;
        assert!(ari.abs() < 0.05, "{ari}");
        total += ari;
    }
    assert!((total / 20.0).abs() < 0.01);
}

fn assignment(rows: &[(u32, u64, usize)]) -> ClusterAssignment {
    ClusterAssignment {
        method: Method::Form,
        k: 3,
        rows: rows
            .iter()
            .map(|&(player_id, game_pk, cluster)| AssignmentRow {
                player_id,
                game_pk,
                cluster,
            })
            .collect(),
    }
}

#[test]
fn compare_requires_same_keys() {
    let a = assignment(&[(1, 10, 0), (2, 10, 1)]);
    let b = assignment(&[(2, 10, 4), (1, 10, 3)]);
    assert_eq!(compare_clusterings(&a, &b).unwrap().ari, 1.0);
    let c = assignment(&[(1, 10, 0), (3, 10, 1)]);
    assert!(matches!(compare_clusterings(&a, &c), Err(AnalyticsError::KeyMismatch)));
}

#[test]
fn timeline_sorted_and_reproducible() {
    let a = assignment(&[(7, 12, 0), (3, 11, 1), (7, 10, 2), (3, 12, 0), (3, 10, 2), (7, 11, 1), (9, 10, 0)]);
    let dir = tempfile::tempdir().unwrap();
    let files = timeline_report(&a, &[7, 3], dir.path(), "timeline").unwrap();
    let csv = std::fs::read_to_string(&files.csv).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 7);
    assert_eq!(lines[1..], ["3,10,2", "3,11,1", "3,12,0", "7,10,2", "7,11,1", "7,12,0"]);
    let svg = std::fs::read(&files.svg).unwrap();
    timeline_report(&a, &[3, 7], dir.path(), "timeline").unwrap();
    assert_eq!(std::fs::read_to_string(&files.csv).unwrap(), csv);
    assert_eq!(std::fs::read(&files.svg).unwrap(), svg);
    assert!(matches!(
        timeline_report(&a, &[4], dir.path(), "x"),
        Err(AnalyticsError::UnknownPlayer(4))
    ));
    let rates = switch_rates(&a);
    assert_eq!(rates[&3], 1.0);
    assert!(!rates.contains_key(&9));
}

#[test]
fn assignments_csv_round_trip() {
    let a = assignment(&[(7, 12, 0), (3, 11, 1)]);
    let mut b = assignment(&[(7, 12, 1), (3, 11, 1)]);
    b.method = Method::Stat;
    let text = assignments_csv(&[&a, &b]);
    assert!(text.starts_with("player_id,game_pk,method,k,cluster\n3,11,form,3,1\n"));
    let back = parse_assignments_csv(&text).unwrap();
    assert_eq!(back.len(), 2);
    assert_eq!(compare_clusterings(&back[0], &a).unwrap().ari, 1.0);
    assert_eq!(back[1].method, Method::Stat);
}

fn small_corpus(games: usize) -> Corpus {
    let sim = simulate_corpus(&SimConfig::new(11, games));
    let mut c = reconstruct_games(sim.events).unwrap();
    c.seasons = sim.seasons;
    replay_and_tokenize(&mut c, &enumerate_legal_deltas());
    c
}

#[test]
fn starters_are_lineups() {
    let c = small_corpus(3);
    let b = starters(&c, 0, Role::Batter);
    assert_eq!(b.len(), 18);
    let p = starters(&c, 0, Role::Pitcher);
    assert_eq!(p.len(), 2);
    assert_ne!(p[0], p[1]);
}

#[test]
fn baseline_width_and_causality() {
    let c = small_corpus(12);
    let engine = StatEngine::new(&c, StatSpec::desk());
    let g = &c.games[8];
    let keys: Vec<(u32, u64)> = starters(&c, 8, Role::Batter).into_iter().map(|p| (p, g.game_pk)).collect();
    let raw = stat_baseline_raw(&c, &engine, &keys, Role::Batter).unwrap();
    assert_eq!(raw[0].len(), engine.spec().len_without_this_game());

    let cut = c.truncated_before(g.game_pk, 0);
    let cut_engine = StatEngine::new(&cut, StatSpec::desk());
    // The truncated corpus no longer contains the game, so compare through
    // the engine directly with the same pairing. Players debuting in the
    // game are unknown to the truncated engine.
    let mut compared = 0;
    for (&(player, _), row) in keys.iter().zip(&raw) {
        let (b, p) = baseline_pair(&c, player, g.game_pk, Role::Batter).unwrap();
        if let Ok(v) = cut_engine.raw_supplemental(b, p, (g.game_pk, 0), false) {
            assert_eq!(&v.values, row);
            compared += 1;
        }
    }
    assert!(compared > 0);

    let pkeys: Vec<(u32, u64)> = (4..12)
        .flat_map(|gi| starters(&c, gi, Role::Pitcher).into_iter().map(move |p| (p, gi)))
        .map(|(p, gi)| (p, c.games[gi].game_pk))
        .collect();
    let (reduced, model) = stat_baseline_vectors(&c, &engine, &pkeys, Role::Pitcher, 5).unwrap();
    assert_eq!(model.k(), 5);
    assert!(reduced.iter().all(|r| r.len() == 5));
}

#[test]
fn baseline_dimension_capped_by_rank() {
    let c = small_corpus(12);
    let engine = StatEngine::new(&c, StatSpec::desk());
    let keys: Vec<(u32, u64)> = starters(&c, 10, Role::Batter)
        .into_iter()
        .take(4)
        .map(|p| (p, c.games[10].game_pk))
        .collect();
    let (reduced, model) = stat_baseline_vectors(&c, &engine, &keys, Role::Batter, 32).unwrap();
    assert!(model.k() <= 3, "four centred rows have rank at most three");
    assert_eq!(reduced[0].len(), model.k());
}

#[test]
fn game_start_forms_contract() {
    let c = small_corpus(30);
    let mut engine = StatEngine::new(&c, StatSpec::desk());
    let cutoff = split_cutoff(&c, 0.8);
    engine.fit_standardizer(&c, |g| c.game_index(g).unwrap() < cutoff).unwrap();
    let store = FeatureStore::build(&c, &engine, 32).unwrap();
    let mut cfg = ModelConfig::desk(Role::Batter, enumerate_legal_deltas().len(), store.supplemental_dim());
    cfg.layers = 1;
    let ck = Checkpoint {
        config: cfg.clone(),
        step: 0,
        params: Parameters::init(&cfg, 3),
        adam: None,
    };
    let forms = game_start_forms(&c, &store, &ck, &cfg, Role::Batter).unwrap();
    assert!(!forms.is_empty());
    for f in &forms {
        assert_eq!(f.embedding.len(), 72);
        let gi = c.game_index(f.game_pk).unwrap();
        assert!(f.source.iter().all(|r| r.game < gi));
        assert_eq!(f.source.len(), 15);
    }
    // Nobody has 15 at-bats before the first two games.
    assert!(forms.iter().all(|f| c.game_index(f.game_pk).unwrap() >= 2));
    assert_eq!(game_start_forms(&c, &store, &ck, &cfg, Role::Batter).unwrap(), forms);

    let mut other = cfg.clone();
    other.model_dim = 32;
    other.feedforward_dim = 64;
    assert!(matches!(
        game_start_forms(&c, &store, &ck, &other, Role::Batter),
        Err(AnalyticsError::CheckpointMismatch { .. })
    ));
}
