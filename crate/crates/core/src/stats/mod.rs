//! Supplemental sabermetric features at four time scales, and the PCA used
//! by the statistics-only clustering baseline.
//!
//! Statistics are computed from per-at-bat counters with prefix sums over
//! each player's (and each batter-pitcher pair's) chronological at-bats, so
//! any time window is a difference of two prefix rows.

mod pca;
mod spec;

pub use pca::{pca_fit, pca_transform, PcaModel};
pub use spec::{
    catalog, pitch_code_index, resolve, Counter, Entity, Formula, Scale, StatBlock, StatSpec, PHYSICS_FIELDS,
    PITCH_CODES, SPEC_VERSION,
};

use std::collections::HashMap;

use thiserror::Error;

use crate::ingest::{plate_zone, Corpus, PitchEvent, Role};

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("unknown {role} {player_id}")]
    UnknownPlayer { player_id: u32, role: Role },
    #[error("bad stat spec: {0}")]
    BadSpec(String),
    #[error("rank deficient: requested {requested} components, data has rank {rank}")]
    RankDeficient { requested: usize, rank: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse: {0}")]
    Parse(String),
}

/// How an at-bat ended, read from its final pitch.
///
/// Contact is signalled by a recorded launch speed. A batter who is not put
/// out is the trailing runner, so the lowest occupied base after the play is
/// where the batter stopped; an empty diamond means the batter scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtBatOutcome {
    Strikeout,
    Walk,
    Single,
    Double,
    Triple,
    HomeRun,
    SacFly,
    OutInPlay,
}

pub fn classify_at_bat(last: &PitchEvent) -> AtBatOutcome {
    let outs = last.post.outs.saturating_sub(last.pre.outs);
    let runs = last.post.batting_score.saturating_sub(last.pre.batting_score);
    if !last.is_contact() {
        return if outs > 0 {
            AtBatOutcome::Strikeout
        } else {
            AtBatOutcome::Walk
        };
    }
    if outs > 0 {
        return if outs == 1 && runs > 0 && last.post.outs < 3 {
            AtBatOutcome::SacFly
        } else {
            AtBatOutcome::OutInPlay
        };
    }
    match last.post.bases.runners().next() {
        Some(1) => AtBatOutcome::Single,
        Some(2) => AtBatOutcome::Double,
        Some(3) => AtBatOutcome::Triple,
        _ => AtBatOutcome::HomeRun,
    }
}

/// Counter totals of one at-bat.
fn at_bat_counters(pitches: &[PitchEvent], active: &[Counter]) -> Vec<f64> {
    let last = pitches.last().expect("at-bat has pitches");
    let outcome = classify_at_bat(last);
    let is = |o: AtBatOutcome| (outcome == o) as u8 as f64;
    let hit = is(AtBatOutcome::Single) + is(AtBatOutcome::Double) + is(AtBatOutcome::Triple) + is(AtBatOutcome::HomeRun);
    let total_bases = is(AtBatOutcome::Single)
        + 2.0 * is(AtBatOutcome::Double)
        + 3.0 * is(AtBatOutcome::Triple)
        + 4.0 * is(AtBatOutcome::HomeRun);
    let outs: f64 = pitches
        .iter()
        .map(|p| p.post.outs.saturating_sub(p.pre.outs) as f64)
        .sum();
    let runs: f64 = pitches
        .iter()
        .map(|p| p.post.batting_score.saturating_sub(p.pre.batting_score) as f64)
        .sum();
    let fields = |p: &PitchEvent| -> [Option<f64>; 7] {
        [
            Some(p.release_speed),
            Some(p.spin_rate),
            Some(p.plate_x),
            Some(p.plate_z),
            p.launch_speed,
            p.launch_angle,
            p.hit_distance,
        ]
    };
    let count_idx = |p: &PitchEvent| p.pre.count.balls * 3 + p.pre.count.strikes;

    active
        .iter()
        .map(|c| match *c {
            Counter::Pa => 1.0,
            Counter::Ab => 1.0 - is(AtBatOutcome::Walk) - is(AtBatOutcome::SacFly),
            Counter::Hit => hit,
            Counter::Single => is(AtBatOutcome::Single),
            Counter::Double => is(AtBatOutcome::Double),
            Counter::Triple => is(AtBatOutcome::Triple),
            Counter::HomeRun => is(AtBatOutcome::HomeRun),
            Counter::Walk => is(AtBatOutcome::Walk),
            Counter::Strikeout => is(AtBatOutcome::Strikeout),
            Counter::SacFly => is(AtBatOutcome::SacFly),
            Counter::OutInPlay => is(AtBatOutcome::OutInPlay),
            Counter::TotalBases => total_bases,
            Counter::Outs => outs,
            Counter::Runs => runs,
            Counter::Pitches => pitches.len() as f64,
            Counter::CountPitches(i) => pitches.iter().filter(|p| count_idx(p) == i).count() as f64,
            Counter::Zone(z) => pitches
                .iter()
                .filter(|p| plate_zone(p.plate_x, p.plate_z) == z)
                .count() as f64,
            Counter::PitchType(t) => pitches
                .iter()
                .filter(|p| pitch_code_index(&p.pitch_type) == t)
                .count() as f64,
            Counter::CountPitchType(i, t) => pitches
                .iter()
                .filter(|p| count_idx(p) == i && pitch_code_index(&p.pitch_type) == t)
                .count() as f64,
            Counter::FieldSum(f) => pitches.iter().filter_map(|p| fields(p)[f as usize]).sum(),
            Counter::FieldSumSq(f) => pitches.iter().filter_map(|p| fields(p)[f as usize]).map(|v| v * v).sum(),
            Counter::FieldN(f) => pitches.iter().filter(|p| fields(p)[f as usize].is_some()).count() as f64,
        })
        .collect()
}

/// Values of one block with their presence flags.
#[derive(Debug, Clone, PartialEq)]
pub struct StatValues {
    pub values: Vec<f64>,
    pub presence: Vec<bool>,
}

/// Concatenated blocks in spec order. Values are standardized when the
/// engine has a fitted standardizer; absent slots hold 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SupplementalVector {
    pub values: Vec<f64>,
    pub presence: Vec<bool>,
}

impl SupplementalVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Chronological at-bat history of one entity.
#[derive(Debug, Clone, Default)]
struct History {
    keys: Vec<(u64, u32)>,
    seasons: Vec<u32>,
    game_ordinal: Vec<u32>,
    /// `(n + 1) * n_counters` running totals.
    prefix: Vec<f64>,
}

impl History {
    fn push(&mut self, key: (u64, u32), season: u32, row: &[f64]) {
        let width = row.len();
        if self.prefix.is_empty() {
            self.prefix = vec![0.0; width];
        }
        let ordinal = match (self.keys.last(), self.game_ordinal.last()) {
            (Some(prev), Some(&o)) if prev.0 == key.0 => o,
            (Some(_), Some(&o)) => o + 1,
            _ => 0,
        };
        let base = self.prefix.len() - width;
        for (k, v) in row.iter().enumerate() {
            let next = self.prefix[base + k] + v;
            self.prefix.push(next);
        }
        self.keys.push(key);
        self.seasons.push(season);
        self.game_ordinal.push(ordinal);
    }

    /// Half-open at-bat range for a scale, using only at-bats before `as_of`.
    fn range(&self, as_of: (u64, u32), season: u32, scale: Scale) -> (usize, usize) {
        let end = self.keys.partition_point(|k| *k < as_of);
        let start = match scale {
            Scale::Career => 0,
            Scale::Season => self.seasons[..end].partition_point(|s| *s < season),
            Scale::Last15 => {
                if end == 0 {
                    0
                } else {
                    let first = self.game_ordinal[end - 1].saturating_sub(14);
                    self.game_ordinal[..end].partition_point(|o| *o < first)
                }
            }
            Scale::ThisGame => self.keys[..end].partition_point(|k| k.0 < as_of.0),
        };
        (start, end)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Per-slot mean and standard deviation over present values. Slots
    /// with no spread get unit scale.
    pub fn fit(rows: &[SupplementalVector]) -> Option<Standardizer> {
        let width = rows.first()?.len();
        let mut mean = vec![0.0; width];
        let mut std = vec![1.0; width];
        for k in 0..width {
            let vals: Vec<f64> = rows.iter().filter(|r| r.presence[k]).map(|r| r.values[k]).collect();
            if vals.is_empty() {
                continue;
            }
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / vals.len() as f64;
            mean[k] = m;
            if var.sqrt() > 1e-12 {
                std[k] = var.sqrt();
            }
        }
        Some(Standardizer { mean, std })
    }

    pub fn apply(&self, v: &mut SupplementalVector) {
        for k in 0..v.values.len() {
            v.values[k] = if v.presence[k] {
                (v.values[k] - self.mean[k]) / self.std[k]
            } else {
                0.0
            };
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("slot,mean,std\n");
        for (k, (m, sd)) in self.mean.iter().zip(&self.std).enumerate() {
            s.push_str(&format!("{k},{m},{sd}\n"));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Standardizer, StatsError> {
        let mut mean = Vec::new();
        let mut std = Vec::new();
        for line in text.lines().skip(1).filter(|l| !l.is_empty()) {
            let parts: Vec<&str> = line.split(',').collect();
            let parse = |s: &str| s.parse::<f64>().map_err(|e| StatsError::Parse(e.to_string()));
            if parts.len() != 3 {
                return Err(StatsError::Parse(format!("bad standardizer row {line:?}")));
            }
            mean.push(parse(parts[1])?);
            std.push(parse(parts[2])?);
        }
        Ok(Standardizer { mean, std })
    }
}

/// Read-only statistics over a corpus.
#[derive(Debug, Clone)]
pub struct StatEngine {
    spec: StatSpec,
    counters: Vec<Counter>,
    seasons: HashMap<u64, u32>,
    batters: HashMap<u32, History>,
    pitchers: HashMap<u32, History>,
    matchups: HashMap<(u32, u32), History>,
    standardizer: Option<Standardizer>,
}

impl StatEngine {
    /// Index every tokenized at-bat of the corpus.
    pub fn new(corpus: &Corpus, spec: StatSpec) -> StatEngine {
        let counters = spec.counters();
        let mut engine = StatEngine {
            spec,
            counters,
            seasons: corpus.seasons.iter().map(|(g, s)| (*g, *s)).collect(),
            batters: HashMap::new(),
            pitchers: HashMap::new(),
            matchups: HashMap::new(),
            standardizer: None,
        };
        let tokenized = corpus.games.iter().any(|g| g.delta_ids.iter().any(Option::is_some));
        for game in &corpus.games {
            let season = corpus.season_of(game.game_pk);
            for (ai, ab) in game.at_bats.iter().enumerate() {
                if tokenized && !game.is_tokenized(ai) {
                    continue;
                }
                let row = at_bat_counters(game.at_bat_pitches(ai), &engine.counters);
                let key = (game.game_pk, ab.ab_number);
                engine.batters.entry(ab.batter_id).or_default().push(key, season, &row);
                engine.pitchers.entry(ab.pitcher_id).or_default().push(key, season, &row);
                engine
                    .matchups
                    .entry((ab.batter_id, ab.pitcher_id))
                    .or_default()
                    .push(key, season, &row);
            }
        }
        engine
    }

    pub fn spec(&self) -> &StatSpec {
        &self.spec
    }

    pub fn standardizer(&self) -> Option<&Standardizer> {
        self.standardizer.as_ref()
    }

    pub fn set_standardizer(&mut self, s: Standardizer) {
        self.standardizer = Some(s);
    }

    fn season_of(&self, game_pk: u64) -> u32 {
        self.seasons.get(&game_pk).copied().unwrap_or(0)
    }

    fn eval_block(&self, history: Option<&History>, block: &StatBlock, as_of: (u64, u32)) -> StatValues {
        let n = block.formulas.len();
        let Some(h) = history else {
            return StatValues {
                values: vec![0.0; n],
                presence: vec![false; n],
            };
        };
        let (start, end) = h.range(as_of, self.season_of(as_of.0), block.scale);
        let width = self.counters.len();
        let get = |c: Counter| {
            let k = self.counters.binary_search(&c).expect("counter registered");
            h.prefix[end * width + k] - h.prefix[start * width + k]
        };
        let mut values = Vec::with_capacity(n);
        let mut presence = Vec::with_capacity(n);
        for f in &block.formulas {
            let (v, ok) = f.eval(&get);
            values.push(if ok { v } else { 0.0 });
            presence.push(ok);
        }
        StatValues { values, presence }
    }

    /// One entity block for a player, using only events before `as_of`.
    pub fn compute_split_stats(
        &self,
        player_id: u32,
        role: Role,
        as_of: (u64, u32),
        scale: Scale,
    ) -> Result<StatValues, StatsError> {
        let (map, entity) = match role {
            Role::Batter => (&self.batters, Entity::Batter),
            Role::Pitcher => (&self.pitchers, Entity::Pitcher),
        };
        let history = map.get(&player_id).ok_or(StatsError::UnknownPlayer { player_id, role })?;
        let block = self
            .spec
            .block(entity, scale)
            .ok_or_else(|| StatsError::BadSpec(format!("no {} block at {scale}", entity.as_str())))?;
        Ok(self.eval_block(Some(history), block, as_of))
    }

    pub fn compute_matchup_stats(
        &self,
        batter_id: u32,
        pitcher_id: u32,
        as_of: (u64, u32),
        scale: Scale,
    ) -> Result<StatValues, StatsError> {
        self.check_players(batter_id, pitcher_id)?;
        let block = self
            .spec
            .block(Entity::Matchup, scale)
            .ok_or_else(|| StatsError::BadSpec(format!("no matchup block at {scale}")))?;
        Ok(self.eval_block(self.matchups.get(&(batter_id, pitcher_id)), block, as_of))
    }

    fn check_players(&self, batter_id: u32, pitcher_id: u32) -> Result<(), StatsError> {
        if !self.batters.contains_key(&batter_id) {
            return Err(StatsError::UnknownPlayer {
                player_id: batter_id,
                role: Role::Batter,
            });
        }
        if !self.pitchers.contains_key(&pitcher_id) {
            return Err(StatsError::UnknownPlayer {
                player_id: pitcher_id,
                role: Role::Pitcher,
            });
        }
        Ok(())
    }

    /// Unstandardized supplemental vector, optionally skipping the
    /// this_game blocks.
    pub fn raw_supplemental(
        &self,
        batter_id: u32,
        pitcher_id: u32,
        as_of: (u64, u32),
        include_this_game: bool,
    ) -> Result<SupplementalVector, StatsError> {
        self.check_players(batter_id, pitcher_id)?;
        let mut values = Vec::new();
        let mut presence = Vec::new();
        for block in &self.spec.blocks {
            if !include_this_game && block.scale == Scale::ThisGame {
                continue;
            }
            let history = match block.entity {
                Entity::Batter => self.batters.get(&batter_id),
                Entity::Pitcher => self.pitchers.get(&pitcher_id),
                Entity::Matchup => self.matchups.get(&(batter_id, pitcher_id)),
            };
            let v = self.eval_block(history, block, as_of);
            values.extend(v.values);
            presence.extend(v.presence);
        }
        Ok(SupplementalVector { values, presence })
    }

    /// Full supplemental vector, standardized with the fitted training-split
    /// statistics when available.
    pub fn assemble_supplemental(
        &self,
        batter_id: u32,
        pitcher_id: u32,
        as_of: (u64, u32),
    ) -> Result<SupplementalVector, StatsError> {
        let mut v = self.raw_supplemental(batter_id, pitcher_id, as_of, true)?;
        if let Some(s) = &self.standardizer {
            s.apply(&mut v);
        }
        Ok(v)
    }

    /// Fit the standardizer on every at-bat of games accepted by `train`.
    pub fn fit_standardizer(&mut self, corpus: &Corpus, train: impl Fn(u64) -> bool) -> Result<(), StatsError> {
        let mut rows = Vec::new();
        for game in corpus.games.iter().filter(|g| train(g.game_pk)) {
            for (ai, ab) in game.at_bats.iter().enumerate() {
                if !game.is_tokenized(ai) {
                    continue;
                }
                rows.push(self.raw_supplemental(ab.batter_id, ab.pitcher_id, (game.game_pk, ab.ab_number), true)?);
            }
        }
        self.standardizer = Some(Standardizer::fit(&rows).ok_or(StatsError::EmptyInput)?);
        Ok(())
    }
}
