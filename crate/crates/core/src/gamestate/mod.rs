//! Game states, gamestate deltas and the transition engine.
//!
//! A pitch is described by the change it causes to the pre-pitch state:
//! the count after the pitch, the base occupancy after the pitch, the outs
//! it produced and the runs it scored. Those four components form a
//! [`GamestateDelta`], the token the model learns over.

mod sim;
mod vocab;

pub use sim::{
    batter_id, pitcher_id, simulate_corpus, Archetype, OutcomeTable, PlayerTruth, SimConfig, SimulatedCorpus, Style, PITCH_TYPES,
};
pub use vocab::{enumerate_legal_deltas, DeltaVocabulary, CLS_TOKEN, MASK_TOKEN, PAPER_VOCAB_SIZE};

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GamestateError {
    #[error("illegal delta {delta} from state {state}")]
    IllegalDelta { state: GameState, delta: GamestateDelta },
    #[error("no legal delta maps {before} to {after}: {reason}")]
    InconsistentStates {
        before: GameState,
        after: GameState,
        reason: String,
    },
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("cannot parse token {0:?}")]
    BadToken(String),
}

/// Base occupancy as a bit set: bit 0 first, bit 1 second, bit 2 third.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Bases(u8);

impl Bases {
    pub const EMPTY: Bases = Bases(0);
    pub const LOADED: Bases = Bases(0b111);

    pub fn new(first: bool, second: bool, third: bool) -> Self {
        Bases(first as u8 | (second as u8) << 1 | (third as u8) << 2)
    }

    pub fn from_bits(bits: u8) -> Option<Self> {
        (bits <= 0b111).then_some(Bases(bits))
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    /// `base` is 1, 2 or 3.
    pub fn occupied(self, base: u8) -> bool {
        debug_assert!((1..=3).contains(&base));
        self.0 & (1 << (base - 1)) != 0
    }

    pub fn with(self, base: u8, on: bool) -> Self {
        let bit = 1 << (base - 1);
        if on {
            Bases(self.0 | bit)
        } else {
            Bases(self.0 & !bit)
        }
    }

    pub fn count(self) -> u8 {
        self.0.count_ones() as u8
    }

    /// Occupied bases in ascending order.
    pub fn runners(self) -> impl Iterator<Item = u8> {
        (1..=3).filter(move |&b| self.occupied(b))
    }

    pub fn all() -> impl Iterator<Item = Bases> {
        (0..8).map(Bases)
    }
}

impl fmt::Display for Bases {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (base, ch) in [(1, '1'), (2, '2'), (3, '3')] {
            write!(f, "{}", if self.occupied(base) { ch } else { '-' })?;
        }
        Ok(())
    }
}

/// Ball-strike count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Count {
    pub balls: u8,
    pub strikes: u8,
}

impl Count {
    pub const FRESH: Count = Count { balls: 0, strikes: 0 };

    pub fn new(balls: u8, strikes: u8) -> Self {
        Count { balls, strikes }
    }

    pub fn is_valid(self) -> bool {
        self.balls <= 3 && self.strikes <= 2
    }

    /// Counts reachable by a pitch that does not end the at-bat: a ball,
    /// a strike, or a two-strike foul.
    pub fn continuations(self) -> impl Iterator<Item = Count> {
        let ball = (self.balls < 3).then(|| Count::new(self.balls + 1, self.strikes));
        let strike = (self.strikes < 2).then(|| Count::new(self.balls, self.strikes + 1));
        let foul = (self.strikes == 2).then_some(self);
        ball.into_iter().chain(strike).chain(foul)
    }

    pub fn all() -> impl Iterator<Item = Count> {
        (0..=3).flat_map(|b| (0..=2).map(move |s| Count::new(b, s)))
    }
}

impl fmt::Display for Count {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.balls, self.strikes)
    }
}

/// Snapshot of the game from the batting team's point of view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct GameState {
    pub count: Count,
    pub bases: Bases,
    pub outs: u8,
    pub batting_score: u32,
    pub fielding_score: u32,
}

impl GameState {
    pub fn new(count: Count, bases: Bases, outs: u8, batting_score: u32, fielding_score: u32) -> Self {
        GameState {
            count,
            bases,
            outs,
            batting_score,
            fielding_score,
        }
    }

    /// Start of a half-inning with the given score.
    pub fn half_inning_start(batting_score: u32, fielding_score: u32) -> Self {
        GameState::new(Count::FRESH, Bases::EMPTY, 0, batting_score, fielding_score)
    }

    /// Valid as a pre-pitch state.
    pub fn is_valid_pre_pitch(&self) -> bool {
        self.count.is_valid() && self.outs <= 2
    }

    pub fn inning_over(&self) -> bool {
        self.outs >= 3
    }

    /// Every pre-pitch state with both scores in `0..max_score`.
    pub fn enumerate_pre_pitch(max_score: u32) -> Vec<GameState> {
        let mut states = Vec::new();
        for count in Count::all() {
            for bases in Bases::all() {
                for outs in 0..=2 {
                    for bat in 0..max_score {
                        for fld in 0..max_score {
                            states.push(GameState::new(count, bases, outs, bat, fld));
                        }
                    }
                }
            }
        }
        states
    }
}

impl fmt::Display for GameState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{} {} {} out, {}-{}]",
            self.count, self.bases, self.outs, self.batting_score, self.fielding_score
        )
    }
}

/// The canonical change token. When a pitch produces the third out the
/// bases are recorded as empty, since stranded runners carry no information
/// into the next half-inning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GamestateDelta {
    pub count_after: Count,
    pub bases_after: Bases,
    pub outs_gained: u8,
    pub runs_scored: u8,
}

impl GamestateDelta {
    pub fn new(count_after: Count, bases_after: Bases, outs_gained: u8, runs_scored: u8) -> Self {
        GamestateDelta {
            count_after,
            bases_after,
            outs_gained,
            runs_scored,
        }
    }

    /// The at-bat is over after this pitch.
    pub fn ends_at_bat(&self) -> bool {
        self.count_after == Count::FRESH
    }
}

impl fmt::Display for GamestateDelta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{}/o{}/r{}",
            self.count_after, self.bases_after, self.outs_gained, self.runs_scored
        )
    }
}

impl FromStr for GamestateDelta {
    type Err = GamestateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || GamestateError::BadToken(s.to_string());
        let parts: Vec<&str> = s.split('/').collect();
        if parts.len() != 4 {
            return Err(bad());
        }
        let (b, st) = parts[0].split_once('-').ok_or_else(bad)?;
        let count = Count::new(b.parse().map_err(|_| bad())?, st.parse().map_err(|_| bad())?);
        let chars: Vec<char> = parts[1].chars().collect();
        if chars.len() != 3 {
            return Err(bad());
        }
        let mut bases = Bases::EMPTY;
        for (i, (ch, want)) in chars.iter().zip(['1', '2', '3']).enumerate() {
            match *ch {
                '-' => {}
                c if c == want => bases = bases.with(i as u8 + 1, true),
                _ => return Err(bad()),
            }
        }
        let outs = parts[2].strip_prefix('o').ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let runs = parts[3].strip_prefix('r').ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let delta = GamestateDelta::new(count, bases, outs, runs);
        if !count.is_valid() || outs > 3 || runs > 4 {
            return Err(bad());
        }
        Ok(delta)
    }
}

/// Whether some sequence of play takes `state` to `delta` under the engine's
/// rules.
///
/// A pitch that keeps the at-bat alive moves the count to one of its
/// continuations, records no outs and may advance runners (wild pitches,
/// steals). A pitch that ends the at-bat resets the count; every runner and
/// the batter then end up out, scored, or on a base, with nobody passing a
/// runner ahead of them and runners never moving backwards.
pub fn is_legal(state: &GameState, delta: &GamestateDelta) -> bool {
    if !state.is_valid_pre_pitch() || !delta.count_after.is_valid() {
        return false;
    }
    if delta.outs_gained > 3 - state.outs || delta.runs_scored > 4 {
        return false;
    }
    // trailing participant first; the batter starts at 0
    let mut starts: Vec<u8> = Vec::with_capacity(4);
    if delta.ends_at_bat() {
        starts.push(0);
    } else {
        if delta.outs_gained != 0 || !state.count.continuations().any(|c| c == delta.count_after) {
            return false;
        }
    }
    starts.extend(state.bases.runners());

    let outs = delta.outs_gained as usize;
    let runs = delta.runs_scored as usize;
    let inning_over = state.outs + delta.outs_gained == 3;
    if inning_over {
        if delta.bases_after != Bases::EMPTY || outs + runs > starts.len() {
            return false;
        }
        // whoever neither scored nor was put out is left on base
        let stranded = starts.len() - outs - runs;
        let mut prev = 0u8;
        for &start in &starts[..stranded] {
            let base = start.max(prev + 1);
            if base > 3 {
                return false;
            }
            prev = base;
        }
        true
    } else {
        let targets: Vec<u8> = delta.bases_after.runners().collect();
        if outs + runs + targets.len() != starts.len() {
            return false;
        }
        // the trailing participants stay on base; pair them in order
        starts.iter().zip(&targets).all(|(&start, &base)| base >= start.max(1))
    }
}

/// Post-pitch state. Outs may reach 3; the replay layer handles the
/// half-inning rollover.
pub fn apply_delta(state: &GameState, delta: &GamestateDelta) -> Result<GameState, GamestateError> {
    if !is_legal(state, delta) {
        return Err(GamestateError::IllegalDelta {
            state: *state,
            delta: *delta,
        });
    }
    Ok(GameState {
        count: delta.count_after,
        bases: delta.bases_after,
        outs: state.outs + delta.outs_gained,
        batting_score: state.batting_score + delta.runs_scored as u32,
        fielding_score: state.fielding_score,
    })
}

/// The delta that takes `before` to `after`. A post-pitch state with three
/// outs has its bases canonicalized to empty.
pub fn compute_delta(
    before: &GameState,
    after: &GameState,
    atbat_ended: bool,
) -> Result<GamestateDelta, GamestateError> {
    let inconsistent = |reason: &str| GamestateError::InconsistentStates {
        before: *before,
        after: *after,
        reason: reason.to_string(),
    };
    if !before.is_valid_pre_pitch() {
        return Err(inconsistent("before is not a valid pre-pitch state"));
    }
    if after.outs < before.outs || after.outs > 3 {
        return Err(inconsistent("outs decreased or exceed 3"));
    }
    if after.batting_score < before.batting_score {
        return Err(inconsistent("batting score decreased"));
    }
    if after.fielding_score != before.fielding_score {
        return Err(inconsistent("fielding score changed"));
    }
    if atbat_ended != (after.count == Count::FRESH) {
        return Err(inconsistent("count does not match at-bat completion"));
    }
    let runs = after.batting_score - before.batting_score;
    if runs > 4 {
        return Err(inconsistent("more than four runs on one pitch"));
    }
    let bases_after = if after.outs == 3 { Bases::EMPTY } else { after.bases };
    let delta = GamestateDelta::new(after.count, bases_after, after.outs - before.outs, runs as u8);
    if !is_legal(before, &delta) {
        return Err(inconsistent("no legal play produces this change"));
    }
    Ok(delta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(b: u8, s: u8, bases: Bases, outs: u8, bat: u32, fld: u32) -> GameState {
        GameState::new(Count::new(b, s), bases, outs, bat, fld)
    }

    #[test]
    fn ball_increments_count() {
        let before = st(0, 0, Bases::EMPTY, 0, 0, 0);
        let d = GamestateDelta::new(Count::new(1, 0), Bases::EMPTY, 0, 0);
        assert_eq!(apply_delta(&before, &d).unwrap(), st(1, 0, Bases::EMPTY, 0, 0, 0));
    }

    #[test]
    fn strikeout_ends_half_inning() {
        let first = Bases::new(true, false, false);
        let before = st(2, 2, first, 2, 3, 1);
        let d = GamestateDelta::new(Count::FRESH, Bases::EMPTY, 1, 0);
        let after = apply_delta(&before, &d).unwrap();
        assert_eq!(after.outs, 3);
        assert_eq!(after.count, Count::FRESH);
        assert_eq!((after.batting_score, after.fielding_score), (3, 1));
    }

    #[test]
    fn grand_slam() {
        let before = st(3, 2, Bases::LOADED, 1, 0, 0);
        let d = GamestateDelta::new(Count::FRESH, Bases::EMPTY, 0, 4);
        assert_eq!(apply_delta(&before, &d).unwrap(), st(0, 0, Bases::EMPTY, 1, 4, 0));
    }

    #[test]
    fn compute_ball_and_single() {
        let before = st(1, 0, Bases::EMPTY, 0, 0, 0);
        let after = st(2, 0, Bases::EMPTY, 0, 0, 0);
        let d = compute_delta(&before, &after, false).unwrap();
        assert_eq!(d, GamestateDelta::new(Count::new(2, 0), Bases::EMPTY, 0, 0));

        let first = Bases::new(true, false, false);
        let before = st(0, 2, Bases::EMPTY, 0, 0, 0);
        let after = st(0, 0, first, 0, 0, 0);
        let d = compute_delta(&before, &after, true).unwrap();
        assert_eq!(d, GamestateDelta::new(Count::FRESH, first, 0, 0));
    }

    #[test]
    fn empty_bases_cannot_score_two() {
        let s = st(0, 0, Bases::EMPTY, 0, 0, 0);
        assert!(!is_legal(&s, &GamestateDelta::new(Count::FRESH, Bases::EMPTY, 0, 2)));
        assert!(is_legal(&s, &GamestateDelta::new(Count::FRESH, Bases::EMPTY, 0, 1)));
        assert!(is_legal(&s, &GamestateDelta::new(Count::new(0, 1), Bases::EMPTY, 0, 0)));
    }

    #[test]
    fn illegal_delta_is_rejected() {
        let s = st(0, 0, Bases::EMPTY, 0, 0, 0);
        let d = GamestateDelta::new(Count::FRESH, Bases::EMPTY, 0, 2);
        assert!(matches!(apply_delta(&s, &d), Err(GamestateError::IllegalDelta { .. })));
    }

    #[test]
    fn mid_at_bat_rules() {
        let second = Bases::new(false, true, false);
        let s = st(1, 1, second, 0, 0, 0);
        // wild pitch: runner to third on ball two
        let wp = GamestateDelta::new(Count::new(2, 1), Bases::new(false, false, true), 0, 0);
        assert!(is_legal(&s, &wp));
        // runner cannot move backwards
        let back = GamestateDelta::new(Count::new(2, 1), Bases::new(true, false, false), 0, 0);
        assert!(!is_legal(&s, &back));
        // no outs before the at-bat ends
        let cs = GamestateDelta::new(Count::new(2, 1), Bases::EMPTY, 1, 0);
        assert!(!is_legal(&s, &cs));
        // count cannot jump
        let jump = GamestateDelta::new(Count::new(3, 1), second, 0, 0);
        assert!(!is_legal(&s, &jump));
        // two-strike foul keeps the count
        let two = st(1, 2, Bases::EMPTY, 0, 0, 0);
        assert!(is_legal(&two, &GamestateDelta::new(Count::new(1, 2), Bases::EMPTY, 0, 0)));
    }

    #[test]
    fn third_out_canonicalizes_bases() {
        let before = st(0, 0, Bases::new(true, false, false), 2, 0, 0);
        let after = st(0, 0, Bases::new(true, true, false), 3, 0, 0);
        let d = compute_delta(&before, &after, true).unwrap();
        assert_eq!(d.bases_after, Bases::EMPTY);
        assert_eq!(d.outs_gained, 1);
    }

    #[test]
    fn token_text_round_trip() {
        let d = GamestateDelta::new(Count::new(3, 2), Bases::new(true, false, true), 1, 2);
        assert_eq!(d.to_string(), "3-2/1-3/o1/r2");
        assert_eq!("3-2/1-3/o1/r2".parse::<GamestateDelta>().unwrap(), d);
        assert!("3-2/1x3/o1/r2".parse::<GamestateDelta>().is_err());
    }
}
