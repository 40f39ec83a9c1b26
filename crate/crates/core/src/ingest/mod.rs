//! Pitch-by-pitch CSV ingestion, game reconstruction and replay.
//!
//! Rows are keyed by `(game_pk, ab_number, pitch_number)`. Reconstruction
//! orders them, groups them into at-bats and builds per-player appearance
//! indices; replay validates every transition and attaches a delta id to
//! each pitch.

mod event;
mod io;

pub use event::{plate_zone, Half, PitchEvent, PitchKey, COLUMNS};
pub use io::{load_seasons, parse_pitch_csv, parse_pitch_reader, save_seasons, write_pitch_csv, ParseOutput, RowError};

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use log::warn;
use thiserror::Error;

use crate::gamestate::{compute_delta, DeltaVocabulary, GameState};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("missing columns: {}", .0.join(", "))]
    SchemaMismatch(Vec<String>),
    #[error("duplicate pitch key {0}")]
    DuplicateKey(PitchKey),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("corpus directory {0}: {1}")]
    BadCorpus(String, String),
}

/// Batter or pitcher.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    Batter,
    Pitcher,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Batter => "batter",
            Role::Pitcher => "pitcher",
        }
    }

    pub fn parse(s: &str) -> Option<Role> {
        match s {
            "batter" => Some(Role::Batter),
            "pitcher" => Some(Role::Pitcher),
            _ => None,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One at-bat: a contiguous run of pitches inside a game.
#[derive(Debug, Clone, PartialEq)]
pub struct AtBat {
    pub ab_number: u32,
    pub batter_id: u32,
    pub pitcher_id: u32,
    pub first_pitch: usize,
    pub n_pitches: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Game {
    pub game_pk: u64,
    pub pitches: Vec<PitchEvent>,
    pub at_bats: Vec<AtBat>,
    /// Filled in by replay; `None` where the transition was rejected.
    pub delta_ids: Vec<Option<u32>>,
}

impl Game {
    pub fn at_bat_pitches(&self, at_bat: usize) -> &[PitchEvent] {
        let ab = &self.at_bats[at_bat];
        &self.pitches[ab.first_pitch..ab.first_pitch + ab.n_pitches]
    }

    pub fn at_bat_tokens(&self, at_bat: usize) -> &[Option<u32>] {
        let ab = &self.at_bats[at_bat];
        &self.delta_ids[ab.first_pitch..ab.first_pitch + ab.n_pitches]
    }

    pub fn is_tokenized(&self, at_bat: usize) -> bool {
        self.at_bat_tokens(at_bat).iter().all(Option::is_some)
    }
}

/// Position of an at-bat inside a [`Corpus`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AtBatRef {
    pub game: usize,
    pub at_bat: usize,
}

/// An at-bat whose pitch numbers are not contiguous from 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceGap {
    pub game_pk: u64,
    pub ab_number: u32,
    pub missing: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub games: Vec<Game>,
    pub seasons: BTreeMap<u64, u32>,
    pub gaps: Vec<SequenceGap>,
    batter_index: BTreeMap<u32, Vec<AtBatRef>>,
    pitcher_index: BTreeMap<u32, Vec<AtBatRef>>,
}

/// Events sorted by key and grouped into games and at-bats. At-bats with
/// gaps in their pitch numbering are dropped and listed in `gaps`.
pub fn reconstruct_games(mut events: Vec<PitchEvent>) -> Result<Corpus, IngestError> {
    events.sort_by_key(PitchEvent::key);
    for w in events.windows(2) {
        if w[0].key() == w[1].key() {
            return Err(IngestError::DuplicateKey(w[0].key()));
        }
    }

    let mut games: Vec<Game> = Vec::new();
    let mut gaps = Vec::new();
    let mut i = 0;
    while i < events.len() {
        let game_pk = events[i].game_pk;
        let ab_number = events[i].ab_number;
        let mut j = i;
        while j < events.len() && events[j].game_pk == game_pk && events[j].ab_number == ab_number {
            j += 1;
        }
        let group = &events[i..j];
        let numbers: Vec<u32> = group.iter().map(|e| e.pitch_number).collect();
        let max = *numbers.last().unwrap();
        if numbers.iter().copied().ne(1..=max) {
            let present: HashSet<u32> = numbers.iter().copied().collect();
            let missing = (1..max).filter(|n| !present.contains(n)).collect();
            warn!("gap in pitch numbering at game {game_pk} at-bat {ab_number}");
            gaps.push(SequenceGap {
                game_pk,
                ab_number,
                missing,
            });
            i = j;
            continue;
        }
        if games.last().map(|g| g.game_pk) != Some(game_pk) {
            games.push(Game {
                game_pk,
                pitches: Vec::new(),
                at_bats: Vec::new(),
                delta_ids: Vec::new(),
            });
        }
        let game = games.last_mut().unwrap();
        game.at_bats.push(AtBat {
            ab_number,
            batter_id: group[0].batter_id,
            pitcher_id: group[0].pitcher_id,
            first_pitch: game.pitches.len(),
            n_pitches: group.len(),
        });
        game.pitches.extend_from_slice(group);
        i = j;
    }
    for g in &mut games {
        g.delta_ids = vec![None; g.pitches.len()];
    }
    let mut corpus = Corpus {
        games,
        seasons: BTreeMap::new(),
        gaps,
        batter_index: BTreeMap::new(),
        pitcher_index: BTreeMap::new(),
    };
    corpus.rebuild_indices(false);
    Ok(corpus)
}

impl Corpus {
    fn rebuild_indices(&mut self, tokenized_only: bool) {
        self.batter_index.clear();
        self.pitcher_index.clear();
        for (gi, game) in self.games.iter().enumerate() {
            for (ai, ab) in game.at_bats.iter().enumerate() {
                if tokenized_only && !game.is_tokenized(ai) {
                    continue;
                }
                let r = AtBatRef { game: gi, at_bat: ai };
                self.batter_index.entry(ab.batter_id).or_default().push(r);
                self.pitcher_index.entry(ab.pitcher_id).or_default().push(r);
            }
        }
    }

    /// Chronological at-bats of a player in a role.
    pub fn appearances(&self, player_id: u32, role: Role) -> &[AtBatRef] {
        let index = match role {
            Role::Batter => &self.batter_index,
            Role::Pitcher => &self.pitcher_index,
        };
        index.get(&player_id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn players(&self, role: Role) -> impl Iterator<Item = u32> + '_ {
        match role {
            Role::Batter => self.batter_index.keys(),
            Role::Pitcher => self.pitcher_index.keys(),
        }
        .copied()
    }

    pub fn knows(&self, player_id: u32, role: Role) -> bool {
        !self.appearances(player_id, role).is_empty()
    }

    pub fn at_bat(&self, r: AtBatRef) -> &AtBat {
        &self.games[r.game].at_bats[r.at_bat]
    }

    pub fn game_index(&self, game_pk: u64) -> Option<usize> {
        self.games.binary_search_by_key(&game_pk, |g| g.game_pk).ok()
    }

    pub fn season_of(&self, game_pk: u64) -> u32 {
        self.seasons.get(&game_pk).copied().unwrap_or(0)
    }

    pub fn n_pitches(&self) -> usize {
        self.games.iter().map(|g| g.pitches.len()).sum()
    }

    pub fn events(&self) -> impl Iterator<Item = &PitchEvent> {
        self.games.iter().flat_map(|g| g.pitches.iter())
    }

    /// The corpus restricted to pitches strictly before `(game_pk, ab_number)`.
    pub fn truncated_before(&self, game_pk: u64, ab_number: u32) -> Corpus {
        let mut out = self.clone();
        out.games.retain(|g| g.game_pk <= game_pk);
        if let Some(last) = out.games.last_mut() {
            if last.game_pk == game_pk {
                let keep = last.at_bats.iter().take_while(|ab| ab.ab_number < ab_number).count();
                let n_pitches = last.at_bats[..keep].iter().map(|ab| ab.n_pitches).sum();
                last.at_bats.truncate(keep);
                last.pitches.truncate(n_pitches);
                last.delta_ids.truncate(n_pitches);
                if last.at_bats.is_empty() {
                    out.games.pop();
                }
            }
        }
        let tokenized = out.games.iter().any(|g| g.delta_ids.iter().any(Option::is_some));
        out.rebuild_indices(tokenized);
        out
    }
}

/// A rejected transition during replay.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IllegalTransition {
    pub key: PitchKey,
    pub reason: String,
}

impl fmt::Display for IllegalTransition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "illegal transition at {}: {}", self.key, self.reason)
    }
}

/// Replay every game, validating continuity between pitches and attaching
/// delta ids. Half-innings roll over once a pitch records the third out.
/// Rejected pitches get no id, and the continuity check for the following
/// pitch is skipped so a single bad row yields a single report. Player
/// indices are rebuilt to cover only fully tokenized at-bats.
pub fn replay_and_tokenize(corpus: &mut Corpus, vocab: &DeltaVocabulary) -> Vec<IllegalTransition> {
    let mut errors = Vec::new();
    for game in &mut corpus.games {
        let mut last_pitch_of_ab = vec![false; game.pitches.len()];
        for ab in &game.at_bats {
            last_pitch_of_ab[ab.first_pitch + ab.n_pitches - 1] = true;
        }
        // away, home
        let mut scores = [0u32; 2];
        let mut expected: Option<GameState> = None;
        let mut prev_half: Option<(u8, Half)> = None;
        let mut skip_check = false;
        for (i, p) in game.pitches.iter().enumerate() {
            let side = match p.half {
                Half::Top => 0,
                Half::Bottom => 1,
            };
            let half = (p.inning, p.half);
            let mut problem: Option<String> = None;
            if prev_half != Some(half) {
                let open = expected.map(|s| s.outs < 3).unwrap_or(false) && prev_half.is_some();
                let fresh = GameState::half_inning_start(scores[side], scores[1 - side]);
                if open && !skip_check {
                    problem = Some("previous half-inning ended without a third out".into());
                } else if p.pre != fresh && !skip_check {
                    problem = Some(format!("half-inning starts at {} but expected {}", p.pre, fresh));
                }
            } else if let Some(exp) = expected {
                if exp.outs >= 3 && !skip_check {
                    problem = Some("pitch after the third out in the same half-inning".into());
                } else if p.pre != exp && !skip_check {
                    problem = Some(format!("pre-pitch state {} does not follow {}", p.pre, exp));
                }
            }
            let delta = if problem.is_none() {
                match compute_delta(&p.pre, &p.post, last_pitch_of_ab[i]) {
                    Ok(d) => match vocab.id(&d) {
                        Some(id) => Some(id),
                        None => {
                            problem = Some(format!("delta {d} not in vocabulary"));
                            None
                        }
                    },
                    Err(e) => {
                        problem = Some(e.to_string());
                        None
                    }
                }
            } else {
                None
            };
            skip_check = problem.is_some();
            if let Some(reason) = problem {
                errors.push(IllegalTransition { key: p.key(), reason });
            }
            game.delta_ids[i] = delta;
            scores[side] = p.post.batting_score;
            scores[1 - side] = p.post.fielding_score;
            expected = Some(p.post);
            prev_half = Some(half);
        }
    }
    corpus.rebuild_indices(true);
    errors
}

/// Counts of each delta id over the tokenized pitches.
pub fn token_histogram(corpus: &Corpus) -> BTreeMap<u32, usize> {
    let mut hist = BTreeMap::new();
    for id in corpus.games.iter().flat_map(|g| g.delta_ids.iter().flatten()) {
        *hist.entry(*id).or_insert(0) += 1;
    }
    hist
}

impl Corpus {
    /// Writes `events.csv`, `seasons.csv`, `tokens.csv`, the two player
    /// index files and `errors.tsv` into `dir`.
    pub fn save(&self, dir: &Path, errors: &[IllegalTransition], row_errors: &[RowError]) -> Result<(), IngestError> {
        let io_err = |p: &Path| {
            let path = p.display().to_string();
            move |source| IngestError::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let events: Vec<PitchEvent> = self.events().cloned().collect();
        write_pitch_csv(&dir.join("events.csv"), &events)?;
        save_seasons(&dir.join("seasons.csv"), &self.seasons)?;

        let mut w = csv::Writer::from_path(dir.join("tokens.csv"))?;
        w.write_record(["game_pk", "ab_number", "pitch_number", "delta_id"])?;
        for g in &self.games {
            for (p, id) in g.pitches.iter().zip(&g.delta_ids) {
                let id = id.map(|x| x.to_string()).unwrap_or_default();
                w.write_record([p.game_pk.to_string(), p.ab_number.to_string(), p.pitch_number.to_string(), id])?;
            }
        }
        w.flush().map_err(io_err(dir))?;

        for (role, name) in [(Role::Batter, "batter_index.csv"), (Role::Pitcher, "pitcher_index.csv")] {
            let mut w = csv::Writer::from_path(dir.join(name))?;
            w.write_record(["player_id", "ordinal", "game_pk", "ab_number"])?;
            for player in self.players(role) {
                for (k, r) in self.appearances(player, role).iter().enumerate() {
                    let g = &self.games[r.game];
                    w.write_record([
                        player.to_string(),
                        k.to_string(),
                        g.game_pk.to_string(),
                        g.at_bats[r.at_bat].ab_number.to_string(),
                    ])?;
                }
            }
            w.flush().map_err(io_err(dir))?;
        }

        let mut report = String::from("where\tkind\tmessage\n");
        for e in row_errors {
            report.push_str(&format!("line {}\trow\t{}\n", e.line, e.message.replace('\t', " ")));
        }
        for gap in &self.gaps {
            report.push_str(&format!(
                "{}/{}\tgap\tmissing pitch numbers {:?}\n",
                gap.game_pk, gap.ab_number, gap.missing
            ));
        }
        for e in errors {
            report.push_str(&format!("{}\ttransition\t{}\n", e.key, e.reason.replace('\t', " ")));
        }
        let path = dir.join("errors.tsv");
        std::fs::write(&path, report).map_err(io_err(&path))?;
        Ok(())
    }

    /// Loads a directory written by [`Corpus::save`] and re-attaches the
    /// stored delta ids.
    pub fn load(dir: &Path) -> Result<Corpus, IngestError> {
        let parsed = parse_pitch_csv(&dir.join("events.csv"))?;
        if !parsed.errors.is_empty() {
            return Err(IngestError::BadCorpus(
                dir.display().to_string(),
                format!("{} malformed rows in events.csv", parsed.errors.len()),
            ));
        }
        let mut corpus = reconstruct_games(parsed.events)?;
        corpus.seasons = load_seasons(&dir.join("seasons.csv"))?;
        let mut ids = BTreeMap::new();
        let mut r = csv::Reader::from_path(dir.join("tokens.csv"))?;
        for rec in r.records() {
            let rec = rec?;
            let bad = || IngestError::BadCorpus(dir.display().to_string(), format!("bad tokens row {rec:?}"));
            let key = PitchKey {
                game_pk: rec[0].parse().map_err(|_| bad())?,
                ab_number: rec[1].parse().map_err(|_| bad())?,
                pitch_number: rec[2].parse().map_err(|_| bad())?,
            };
            let id = if rec[3].is_empty() {
                None
            } else {
                Some(rec[3].parse::<u32>().map_err(|_| bad())?)
            };
            ids.insert(key, id);
        }
        for g in &mut corpus.games {
            for (i, p) in g.pitches.iter().enumerate() {
                g.delta_ids[i] = ids.get(&p.key()).copied().flatten();
            }
        }
        corpus.rebuild_indices(true);
        Ok(corpus)
    }
}
