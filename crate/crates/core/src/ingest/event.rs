use std::fmt;

use crate::gamestate::{Bases, Count, GameState};

/// Top or bottom of an inning. The away team bats in the top half.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Half {
    Top,
    Bottom,
}

impl Half {
    pub fn as_str(self) -> &'static str {
        match self {
            Half::Top => "top",
            Half::Bottom => "bot",
        }
    }

    pub fn parse(s: &str) -> Option<Half> {
        match s {
            "top" | "Top" | "T" => Some(Half::Top),
            "bot" | "Bot" | "bottom" | "B" => Some(Half::Bottom),
            _ => None,
        }
    }
}

impl fmt::Display for Half {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Unique key of a pitch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PitchKey {
    pub game_pk: u64,
    pub ab_number: u32,
    pub pitch_number: u32,
}

impl fmt::Display for PitchKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.game_pk, self.ab_number, self.pitch_number)
    }
}

/// One row of pitch-by-pitch data.
#[derive(Debug, Clone, PartialEq)]
pub struct PitchEvent {
    pub game_pk: u64,
    pub ab_number: u32,
    pub pitch_number: u32,
    pub inning: u8,
    pub half: Half,
    pub batter_id: u32,
    pub pitcher_id: u32,
    pub stadium_id: u32,
    pub pitch_type: String,
    pub release_speed: f64,
    pub plate_x: f64,
    pub plate_z: f64,
    pub spin_rate: f64,
    pub launch_speed: Option<f64>,
    pub launch_angle: Option<f64>,
    pub hit_distance: Option<f64>,
    pub pre: GameState,
    pub post: GameState,
}

impl PitchEvent {
    pub fn key(&self) -> PitchKey {
        PitchKey {
            game_pk: self.game_pk,
            ab_number: self.ab_number,
            pitch_number: self.pitch_number,
        }
    }

    pub fn is_contact(&self) -> bool {
        self.launch_speed.is_some()
    }

    /// The pitch closes the at-bat (the post-pitch count resets).
    pub fn ends_at_bat(&self) -> bool {
        self.post.count == Count::FRESH
    }
}

/// Column names of the documented CSV schema, in file order.
pub const COLUMNS: [&str; 32] = [
    "game_pk",
    "ab_number",
    "pitch_number",
    "inning",
    "inning_half",
    "batter_id",
    "pitcher_id",
    "stadium_id",
    "pitch_type",
    "release_speed",
    "plate_x",
    "plate_z",
    "spin_rate",
    "launch_speed",
    "launch_angle",
    "hit_distance",
    "balls",
    "strikes",
    "on_1b",
    "on_2b",
    "on_3b",
    "outs",
    "bat_score",
    "fld_score",
    "post_balls",
    "post_strikes",
    "post_on_1b",
    "post_on_2b",
    "post_on_3b",
    "post_outs",
    "post_bat_score",
    "post_fld_score",
];

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl PitchEvent {
    pub(crate) fn to_record(&self) -> Vec<String> {
        let state = |s: &GameState| {
            vec![
                s.count.balls.to_string(),
                s.count.strikes.to_string(),
                flag(s.bases.occupied(1)).to_string(),
                flag(s.bases.occupied(2)).to_string(),
                flag(s.bases.occupied(3)).to_string(),
                s.outs.to_string(),
                s.batting_score.to_string(),
                s.fielding_score.to_string(),
            ]
        };
        let mut rec = vec![
            self.game_pk.to_string(),
            self.ab_number.to_string(),
            self.pitch_number.to_string(),
            self.inning.to_string(),
            self.half.to_string(),
            self.batter_id.to_string(),
            self.pitcher_id.to_string(),
            self.stadium_id.to_string(),
            self.pitch_type.clone(),
            self.release_speed.to_string(),
            self.plate_x.to_string(),
            self.plate_z.to_string(),
            self.spin_rate.to_string(),
            opt(self.launch_speed),
            opt(self.launch_angle),
            opt(self.hit_distance),
        ];
        rec.extend(state(&self.pre));
        rec.extend(state(&self.post));
        rec
    }
}

pub(crate) fn bases_from_flags(first: bool, second: bool, third: bool) -> Bases {
    Bases::new(first, second, third)
}

/// Cell of a 5x5 grid over the plate region (x in [-1.25, 1.25] ft,
/// z in [1.0, 4.0] ft), row-major from the top-left as seen by the
/// catcher. Locations outside the region clamp to the nearest edge cell.
pub fn plate_zone(plate_x: f64, plate_z: f64) -> u8 {
    let col = (((plate_x + 1.25) / 2.5) * 5.0).floor().clamp(0.0, 4.0) as u8;
    let row = (((4.0 - plate_z) / 3.0) * 5.0).floor().clamp(0.0, 4.0) as u8;
    row * 5 + col
}
