//! Independent event enumeration checked against the legality predicate.

use std::collections::BTreeSet;

use player_form::gamestate::{
    apply_delta, compute_delta, enumerate_legal_deltas, is_legal, simulate_corpus, Bases, Count, GameState,
    GamestateDelta, SimConfig, PAPER_VOCAB_SIZE,
};
use proptest::prelude::*;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum End {
    Out,
    Base(u8),
    Home,
}

/// Every assignment of an end position to each participant (trailing
/// first), filtered by the physical rules of base running.
fn runner_outcomes(starts: &[u8], allow_outs: bool) -> Vec<Vec<End>> {
    let mut options: Vec<Vec<End>> = vec![vec![]];
    for &start in starts {
        let mut next = Vec::new();
        for partial in &options {
            let mut ends = vec![End::Home];
            if allow_outs {
                ends.push(End::Out);
            }
            for b in start.max(1)..=3 {
                ends.push(End::Base(b));
            }
            for e in ends {
                let mut p = partial.clone();
                p.push(e);
                next.push(p);
            }
        }
        options = next;
    }
    options.retain(|ends| {
        // no passing: among the runners still alive, a trailing runner must
        // finish strictly behind a leading one unless both scored
        let alive: Vec<End> = ends.iter().copied().filter(|e| *e != End::Out).collect();
        alive.windows(2).all(|w| match (w[0], w[1]) {
            (End::Base(a), End::Base(b)) => a < b,
            (End::Base(_), End::Home) => true,
            (End::Home, End::Home) => true,
            (End::Home, End::Base(_)) => false,
            _ => unreachable!(),
        })
    });
    options
}

fn deltas_by_enumeration(state: &GameState) -> BTreeSet<GamestateDelta> {
    let mut out = BTreeSet::new();
    let runners: Vec<u8> = state.bases.runners().collect();

    // pitches that keep the at-bat alive: runners may move, nobody is out
    for count in state.count.continuations() {
        for ends in runner_outcomes(&runners, false) {
            let mut bases = Bases::EMPTY;
            let mut runs = 0;
            for e in ends {
                match e {
                    End::Base(b) => bases = bases.with(b, true),
                    End::Home => runs += 1,
                    End::Out => unreachable!(),
                }
            }
            out.insert(GamestateDelta::new(count, bases, 0, runs));
        }
    }

    // pitches that end the at-bat: the batter joins at home plate
    let mut starts = vec![0u8];
    starts.extend(&runners);
    for ends in runner_outcomes(&starts, true) {
        let outs = ends.iter().filter(|e| **e == End::Out).count() as u8;
        if state.outs + outs > 3 {
            continue;
        }
        let runs = ends.iter().filter(|e| **e == End::Home).count() as u8;
        let mut bases = Bases::EMPTY;
        for e in &ends {
            if let End::Base(b) = e {
                bases = bases.with(*b, true);
            }
        }
        if state.outs + outs == 3 {
            bases = Bases::EMPTY;
        }
        out.insert(GamestateDelta::new(Count::FRESH, bases, outs, runs));
    }
    out
}

fn all_candidates() -> Vec<GamestateDelta> {
    let mut v = Vec::new();
    for c in (0..=3).flat_map(|b| (0..=2).map(move |s| Count::new(b, s))) {
        for bits in 0..8 {
            for o in 0..=3 {
                for r in 0..=4 {
                    v.push(GamestateDelta::new(c, Bases::from_bits(bits).unwrap(), o, r));
                }
            }
        }
    }
    v
}

#[test]
fn legality_matches_brute_force_on_all_states() {
    let states = GameState::enumerate_pre_pitch(4);
    assert_eq!(states.len(), 4608);
    let candidates = all_candidates();
    let mut union = BTreeSet::new();
    for state in &states {
        let reachable = deltas_by_enumeration(state);
        for d in &candidates {
            assert_eq!(
                is_legal(state, d),
                reachable.contains(d),
                "state {state} delta {d}"
            );
        }
        union.extend(reachable);
    }
    let vocab = enumerate_legal_deltas();
    assert_eq!(vocab.deltas(), union.into_iter().collect::<Vec<_>>().as_slice());
}

#[test]
fn vocabulary_cardinality_matches_golden_file() {
    let vocab = enumerate_legal_deltas();
    let golden = include_str!("golden/vocab_cardinality.txt");
    assert_eq!(vocab.cardinality_report(), golden);
    println!(
        "enumerated {} delta tokens (reference figure {PAPER_VOCAB_SIZE})",
        vocab.n_deltas()
    );
}

#[test]
fn simulated_transitions_round_trip() {
    let corpus = simulate_corpus(&SimConfig::new(21, 60));
    let mut n = 0;
    for e in &corpus.events {
        let d = compute_delta(&e.pre, &e.post, e.ends_at_bat()).unwrap();
        let post = apply_delta(&e.pre, &d).unwrap();
        assert_eq!(compute_delta(&e.pre, &post, d.ends_at_bat()).unwrap(), d);
        n += 1;
    }
    assert!(n >= 10_000, "only {n} transitions");
}

#[test]
fn score_is_conserved_per_game() {
    let corpus = simulate_corpus(&SimConfig::new(4, 10));
    let mut games: std::collections::BTreeMap<u64, Vec<_>> = Default::default();
    for e in &corpus.events {
        games.entry(e.game_pk).or_default().push(e);
    }
    for pitches in games.values() {
        let mut runs = [0u32; 2];
        let mut last_score = [0u32; 2];
        for e in pitches {
            let d = compute_delta(&e.pre, &e.post, e.ends_at_bat()).unwrap();
            let side = (e.half == player_form::ingest::Half::Bottom) as usize;
            runs[side] += d.runs_scored as u32;
            last_score[side] = e.post.batting_score;
        }
        assert_eq!(runs, last_score);
    }
}

fn pre_pitch_state() -> impl Strategy<Value = GameState> {
    (0u8..4, 0u8..3, 0u8..8, 0u8..3, 0u32..10, 0u32..10).prop_map(|(b, s, bases, outs, bat, fld)| {
        GameState::new(Count::new(b, s), Bases::from_bits(bases).unwrap(), outs, bat, fld)
    })
}

proptest! {
    #[test]
    fn legal_deltas_round_trip(state in pre_pitch_state(), pick in 0usize..1920) {
        let d = all_candidates()[pick];
        if is_legal(&state, &d) {
            let after = apply_delta(&state, &d).unwrap();
            prop_assert_eq!(compute_delta(&state, &after, d.ends_at_bat()).unwrap(), d);
            prop_assert!(after.batting_score >= state.batting_score);
        } else {
            prop_assert!(apply_delta(&state, &d).is_err());
        }
    }
}
