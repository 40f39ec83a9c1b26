use player_form::gamestate::{enumerate_legal_deltas, simulate_corpus, Bases, Count, GameState, SimConfig};
use player_form::ingest::{reconstruct_games, replay_and_tokenize, Corpus, Half, PitchEvent, Role};
use player_form::stats::{Scale, StatEngine, StatSpec};

fn pitch(game_pk: u64, hit: bool) -> PitchEvent {
    let pre = GameState::new(Count::FRESH, Bases::EMPTY, 0, 0, 0);
    let post = if hit {
        GameState::new(Count::FRESH, Bases::new(true, false, false), 0, 0, 0)
    } else {
        GameState::new(Count::FRESH, Bases::EMPTY, 1, 0, 0)
    };
    PitchEvent {
        game_pk,
        ab_number: 1,
        pitch_number: 1,
        inning: 1,
        half: Half::Top,
        batter_id: 5,
        pitcher_id: 9,
        stadium_id: 0,
        pitch_type: "FF".into(),
        release_speed: 94.0,
        plate_x: 0.0,
        plate_z: 2.5,
        spin_rate: 2200.0,
        launch_speed: hit.then_some(95.0),
        launch_angle: hit.then_some(12.0),
        hit_distance: hit.then_some(180.0),
        pre,
        post,
    }
}

#[test]
fn three_hits_in_ten_at_bats_is_300() {
    let mut events: Vec<PitchEvent> = (1..=10).map(|g| pitch(g, [2, 5, 8].contains(&g))).collect();
    events.push(pitch(11, false));
    let mut c = reconstruct_games(events).unwrap();
    c.seasons = (1..=11).map(|g| (g, 2021)).collect();
    let engine = StatEngine::new(&c, StatSpec::desk());
    for scale in [Scale::Last15, Scale::Career, Scale::Season] {
        let v = engine.compute_split_stats(5, Role::Batter, (11, 1), scale).unwrap();
        assert!((v.values[0] - 0.3).abs() < 1e-12, "{scale:?}: AVG {}", v.values[0]);
        assert!(v.presence[0]);
    }
    let this_game = engine.compute_split_stats(5, Role::Batter, (11, 1), Scale::ThisGame).unwrap();
    assert_eq!(this_game.values[0], 0.0);
    assert!(!this_game.presence[0]);
}

fn sim_corpus(seed: u64, games: usize) -> Corpus {
    let sim = simulate_corpus(&SimConfig::new(seed, games));
    let mut c = reconstruct_games(sim.events).unwrap();
    c.seasons = sim.seasons;
    replay_and_tokenize(&mut c, &enumerate_legal_deltas());
    c
}

/// On-base percentage over a batter's at-bats before `as_of` in the same
/// season, counted straight from the final pitch of each at-bat.
fn recount_obp(c: &Corpus, batter: u32, as_of: (u64, u32)) -> Option<f64> {
    let season = c.seasons[&as_of.0];
    let (mut h, mut bb, mut ab, mut sf) = (0u32, 0u32, 0u32, 0u32);
    for g in &c.games {
        if c.seasons[&g.game_pk] != season || g.game_pk > as_of.0 {
            continue;
        }
        for a in g.at_bats.iter().filter(|a| a.batter_id == batter) {
            if g.game_pk == as_of.0 && a.ab_number >= as_of.1 {
                continue;
            }
            let last = &g.pitches[a.first_pitch + a.n_pitches - 1];
            let outs = last.post.outs - last.pre.outs;
            let runs = last.post.batting_score - last.pre.batting_score;
            match (last.launch_speed.is_some(), outs > 0) {
                (false, false) => bb += 1,
                (false, true) => ab += 1,
                (true, true) if outs == 1 && runs > 0 && last.post.outs < 3 => sf += 1,
                (true, true) => ab += 1,
                (true, false) => {
                    h += 1;
                    ab += 1;
                }
            }
        }
    }
    let den = ab + bb + sf;
    (den > 0).then(|| (h + bb) as f64 / den as f64)
}

#[test]
fn season_obp_matches_recount() {
    let c = sim_corpus(21, 80);
    let engine = StatEngine::new(&c, StatSpec::desk());
    let mut checked = 0;
    for g in c.games.iter().step_by(7) {
        for a in g.at_bats.iter().step_by(5) {
            let as_of = (g.game_pk, a.ab_number);
            let v = engine.compute_split_stats(a.batter_id, Role::Batter, as_of, Scale::Season).unwrap();
            match recount_obp(&c, a.batter_id, as_of) {
                Some(obp) => {
                    assert_eq!(v.values[1], obp, "batter {} at {as_of:?}", a.batter_id);
                    assert!(v.presence[1]);
                    checked += 1;
                }
                None => assert!(!v.presence[1] && v.values[1] == 0.0),
            }
        }
    }
    assert!(checked > 50, "only {checked} non-empty recounts");
}

#[test]
fn truncating_the_corpus_leaves_vectors_unchanged() {
    let c = sim_corpus(22, 40);
    let full = StatEngine::new(&c, StatSpec::desk());
    let mut compared = 0;
    for g in c.games.iter().skip(3).step_by(6) {
        for a in g.at_bats.iter().step_by(9) {
            let cut = c.truncated_before(g.game_pk, a.ab_number);
            let part = StatEngine::new(&cut, StatSpec::desk());
            let as_of = (g.game_pk, a.ab_number);
            let Ok(want) = part.raw_supplemental(a.batter_id, a.pitcher_id, as_of, true) else {
                continue;
            };
            let got = full.raw_supplemental(a.batter_id, a.pitcher_id, as_of, true).unwrap();
            assert_eq!(got, want, "at {as_of:?}");
            compared += 1;
        }
    }
    assert!(compared > 20, "only {compared} comparisons");
}
