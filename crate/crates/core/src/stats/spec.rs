//! Statistic registry and the versioned spec file that selects from it.

use std::fmt;
use std::fmt::Write as _;

use super::StatsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Entity {
    Batter,
    Pitcher,
    Matchup,
}

impl Entity {
    pub const ALL: [Entity; 3] = [Entity::Batter, Entity::Pitcher, Entity::Matchup];

    pub fn as_str(self) -> &'static str {
        match self {
            Entity::Batter => "batter",
            Entity::Pitcher => "pitcher",
            Entity::Matchup => "matchup",
        }
    }

    /// Matchups have no last-15 scale.
    pub fn scales(self) -> &'static [Scale] {
        match self {
            Entity::Matchup => &[Scale::Career, Scale::Season, Scale::ThisGame],
            _ => &Scale::ALL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scale {
    Career,
    Season,
    Last15,
    ThisGame,
}

impl Scale {
    pub const ALL: [Scale; 4] = [Scale::Career, Scale::Season, Scale::Last15, Scale::ThisGame];

    pub fn as_str(self) -> &'static str {
        match self {
            Scale::Career => "career",
            Scale::Season => "season",
            Scale::Last15 => "last15",
            Scale::ThisGame => "this_game",
        }
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Primitive per-at-bat tallies every statistic is computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Counter {
    Pa,
    Ab,
    Hit,
    Single,
    Double,
    Triple,
    HomeRun,
    Walk,
    Strikeout,
    SacFly,
    OutInPlay,
    TotalBases,
    Outs,
    Runs,
    Pitches,
    /// Pitches thrown at a ball-strike count, index `balls * 3 + strikes`.
    CountPitches(u8),
    Zone(u8),
    PitchType(u8),
    /// Pitches at a count with a given pitch type.
    CountPitchType(u8, u8),
    /// Sum of a physics field over pitches where it is present.
    FieldSum(u8),
    FieldSumSq(u8),
    FieldN(u8),
}

/// Pitch type codes with a dedicated counter; everything else counts as
/// the last entry.
pub const PITCH_CODES: [&str; 9] = ["FF", "SL", "CH", "CU", "SI", "FC", "KC", "FS", "OTHER"];
pub const PHYSICS_FIELDS: [&str; 7] = [
    "release_speed",
    "spin_rate",
    "plate_x",
    "plate_z",
    "launch_speed",
    "launch_angle",
    "hit_distance",
];

pub fn pitch_code_index(code: &str) -> u8 {
    PITCH_CODES[..PITCH_CODES.len() - 1]
        .iter()
        .position(|c| *c == code)
        .unwrap_or(PITCH_CODES.len() - 1) as u8
}

/// How a statistic is derived from counters. Ratios with a zero
/// denominator are absent.
#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    Ratio {
        num: Vec<(Counter, f64)>,
        den: Vec<(Counter, f64)>,
    },
    /// A raw tally, present once the entity has a plate appearance.
    Tally(Counter),
    /// Weighted sum of other formulas, present when all parts are.
    Combine(Vec<(Formula, f64)>),
    StdDev { field: u8 },
}

impl Formula {
    fn ratio(num: &[(Counter, f64)], den: &[(Counter, f64)]) -> Formula {
        Formula::Ratio {
            num: num.to_vec(),
            den: den.to_vec(),
        }
    }

    pub fn counters(&self, out: &mut Vec<Counter>) {
        match self {
            Formula::Ratio { num, den } => out.extend(num.iter().chain(den).map(|(c, _)| *c)),
            Formula::Tally(c) => out.extend([*c, Counter::Pa]),
            Formula::Combine(parts) => parts.iter().for_each(|(f, _)| f.counters(out)),
            Formula::StdDev { field } => out.extend([
                Counter::FieldSum(*field),
                Counter::FieldSumSq(*field),
                Counter::FieldN(*field),
            ]),
        }
    }

    /// `(value, present)` from counter totals.
    pub fn eval(&self, get: &dyn Fn(Counter) -> f64) -> (f64, bool) {
        match self {
            Formula::Ratio { num, den } => {
                let d: f64 = den.iter().map(|(c, w)| w * get(*c)).sum();
                if d <= 0.0 {
                    return (0.0, false);
                }
                let n: f64 = num.iter().map(|(c, w)| w * get(*c)).sum();
                (n / d, true)
            }
            Formula::Tally(c) => {
                if get(Counter::Pa) > 0.0 {
                    (get(*c), true)
                } else {
                    (0.0, false)
                }
            }
            Formula::Combine(parts) => {
                let mut total = 0.0;
                for (f, w) in parts {
                    let (v, ok) = f.eval(get);
                    if !ok {
                        return (0.0, false);
                    }
                    total += w * v;
                }
                (total, true)
            }
            Formula::StdDev { field } => {
                let n = get(Counter::FieldN(*field));
                if n <= 0.0 {
                    return (0.0, false);
                }
                let mean = get(Counter::FieldSum(*field)) / n;
                let var = (get(Counter::FieldSumSq(*field)) / n - mean * mean).max(0.0);
                (var.sqrt(), true)
            }
        }
    }
}

fn avg() -> Formula {
    Formula::ratio(&[(Counter::Hit, 1.0)], &[(Counter::Ab, 1.0)])
}

fn obp() -> Formula {
    Formula::ratio(
        &[(Counter::Hit, 1.0), (Counter::Walk, 1.0)],
        &[(Counter::Ab, 1.0), (Counter::Walk, 1.0), (Counter::SacFly, 1.0)],
    )
}

fn slg() -> Formula {
    Formula::ratio(&[(Counter::TotalBases, 1.0)], &[(Counter::Ab, 1.0)])
}

fn per_pa(c: Counter) -> Formula {
    Formula::ratio(&[(c, 1.0)], &[(Counter::Pa, 1.0)])
}

fn per_pitch(c: Counter) -> Formula {
    Formula::ratio(&[(c, 1.0)], &[(Counter::Pitches, 1.0)])
}

/// The named core statistics.
fn core_stat(name: &str) -> Option<Formula> {
    use Counter::*;
    Some(match name {
        "AVG" | "OPP_AVG" => avg(),
        "OBP" => obp(),
        "SLG" => slg(),
        "OPS" => Formula::Combine(vec![(obp(), 1.0), (slg(), 1.0)]),
        "ISO" => Formula::Combine(vec![(slg(), 1.0), (avg(), -1.0)]),
        "K_RATE" => per_pa(Strikeout),
        "BB_RATE" => per_pa(Walk),
        "HR_RATE" => per_pa(HomeRun),
        // walks plus hits per inning, innings measured as outs / 3
        "WHIP" => Formula::ratio(&[(Walk, 1.0), (Hit, 1.0)], &[(Outs, 1.0 / 3.0)]),
        "RUNS_PER_AB" => Formula::ratio(&[(Runs, 1.0)], &[(Ab, 1.0)]),
        "AB" => Formula::Tally(Ab),
        "PA" => Formula::Tally(Pa),
        "PITCHES_PER_PA" => Formula::ratio(&[(Pitches, 1.0)], &[(Pa, 1.0)]),
        "BABIP" => Formula::ratio(
            &[(Hit, 1.0), (HomeRun, -1.0)],
            &[(Ab, 1.0), (Strikeout, -1.0), (HomeRun, -1.0), (SacFly, 1.0)],
        ),
        "RUNS_PER_PA" => per_pa(Runs),
        _ => return None,
    })
}

const CORE_NAMES: [&str; 15] = [
    "AVG",
    "OBP",
    "SLG",
    "OPS",
    "ISO",
    "K_RATE",
    "BB_RATE",
    "HR_RATE",
    "WHIP",
    "RUNS_PER_AB",
    "AB",
    "PA",
    "PITCHES_PER_PA",
    "BABIP",
    "RUNS_PER_PA",
];

const OUTCOME_NAMES: [(&str, Counter); 8] = [
    ("K", Counter::Strikeout),
    ("BB", Counter::Walk),
    ("1B", Counter::Single),
    ("2B", Counter::Double),
    ("3B", Counter::Triple),
    ("HR", Counter::HomeRun),
    ("OUT", Counter::OutInPlay),
    ("SF", Counter::SacFly),
];

fn count_label(idx: u8) -> String {
    format!("{}-{}", idx / 3, idx % 3)
}

fn parse_count(s: &str) -> Option<u8> {
    let (b, st) = s.split_once('-')?;
    let (b, st): (u8, u8) = (b.parse().ok()?, st.parse().ok()?);
    (b <= 3 && st <= 2).then_some(b * 3 + st)
}

/// Resolve a statistic name from the registry.
pub fn resolve(name: &str) -> Option<Formula> {
    if let Some(f) = core_stat(name) {
        return Some(f);
    }
    let (family, arg) = name.split_once(':')?;
    match family {
        "OUTCOME" => OUTCOME_NAMES
            .iter()
            .find(|(n, _)| *n == arg)
            .map(|(_, c)| per_pa(*c)),
        "COUNT" => parse_count(arg).map(|i| per_pitch(Counter::CountPitches(i))),
        "ZONE" => {
            let z: u8 = arg.parse().ok()?;
            (z < 25).then(|| per_pitch(Counter::Zone(z)))
        }
        "PITCH" => PITCH_CODES
            .iter()
            .position(|c| *c == arg)
            .map(|i| per_pitch(Counter::PitchType(i as u8))),
        "MEAN" => PHYSICS_FIELDS.iter().position(|f| *f == arg).map(|i| {
            let i = i as u8;
            Formula::ratio(&[(Counter::FieldSum(i), 1.0)], &[(Counter::FieldN(i), 1.0)])
        }),
        "STD" => PHYSICS_FIELDS
            .iter()
            .position(|f| *f == arg)
            .map(|i| Formula::StdDev { field: i as u8 }),
        "COUNT_PITCH" => {
            let (count, code) = arg.split_once(':')?;
            let c = parse_count(count)?;
            let t = PITCH_CODES.iter().position(|x| *x == code)? as u8;
            Some(Formula::ratio(
                &[(Counter::CountPitchType(c, t), 1.0)],
                &[(Counter::CountPitches(c), 1.0)],
            ))
        }
        _ => None,
    }
}

/// Every registered name in catalog order.
pub fn catalog() -> Vec<String> {
    let mut names: Vec<String> = CORE_NAMES.iter().map(|s| s.to_string()).collect();
    names.extend(OUTCOME_NAMES.iter().map(|(n, _)| format!("OUTCOME:{n}")));
    names.extend((0..12).map(|i| format!("COUNT:{}", count_label(i))));
    names.extend((0..25).map(|z| format!("ZONE:{z}")));
    names.extend(PITCH_CODES.iter().map(|c| format!("PITCH:{c}")));
    names.extend(PHYSICS_FIELDS.iter().map(|f| format!("MEAN:{f}")));
    names.extend(PHYSICS_FIELDS.iter().map(|f| format!("STD:{f}")));
    for i in 0..12 {
        names.extend(PITCH_CODES.iter().map(|c| format!("COUNT_PITCH:{}:{c}", count_label(i))));
    }
    names
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatBlock {
    pub entity: Entity,
    pub scale: Scale,
    pub names: Vec<String>,
    pub formulas: Vec<Formula>,
}

/// Ordered statistic lists for each (entity, scale) block: batter career,
/// season, last15, this_game, then pitcher, then matchup career, season,
/// this_game.
#[derive(Debug, Clone, PartialEq)]
pub struct StatSpec {
    pub version: u32,
    pub blocks: Vec<StatBlock>,
}

pub const SPEC_VERSION: u32 = 1;

fn block_order() -> Vec<(Entity, Scale)> {
    Entity::ALL
        .iter()
        .flat_map(|e| e.scales().iter().map(move |s| (*e, *s)))
        .collect()
}

impl StatSpec {
    pub fn from_lists(lists: Vec<(Entity, Scale, Vec<String>)>) -> Result<StatSpec, StatsError> {
        let order = block_order();
        if lists.len() != order.len() {
            return Err(StatsError::BadSpec(format!(
                "expected {} blocks, found {}",
                order.len(),
                lists.len()
            )));
        }
        let mut blocks = Vec::new();
        for ((entity, scale, names), (want_e, want_s)) in lists.into_iter().zip(order) {
            if (entity, scale) != (want_e, want_s) {
                return Err(StatsError::BadSpec(format!(
                    "block {} {} out of order; expected {} {}",
                    entity.as_str(),
                    scale,
                    want_e.as_str(),
                    want_s
                )));
            }
            let formulas = names
                .iter()
                .map(|n| resolve(n).ok_or_else(|| StatsError::BadSpec(format!("unknown statistic {n}"))))
                .collect::<Result<Vec<_>, _>>()?;
            blocks.push(StatBlock {
                entity,
                scale,
                names,
                formulas,
            });
        }
        Ok(StatSpec {
            version: SPEC_VERSION,
            blocks,
        })
    }

    /// Six batter, six pitcher and three matchup statistics per scale.
    pub fn desk() -> StatSpec {
        let batter = ["AVG", "OBP", "SLG", "OPS", "K_RATE", "BB_RATE"];
        let pitcher = ["RUNS_PER_AB", "WHIP", "K_RATE", "BB_RATE", "HR_RATE", "OPP_AVG"];
        let matchup = ["AB", "AVG", "OPS"];
        let lists = block_order()
            .into_iter()
            .map(|(e, s)| {
                let names: &[&str] = match e {
                    Entity::Batter => &batter,
                    Entity::Pitcher => &pitcher,
                    Entity::Matchup => &matchup,
                };
                (e, s, names.iter().map(|n| n.to_string()).collect())
            })
            .collect();
        StatSpec::from_lists(lists).expect("desk spec is valid")
    }

    /// Block sizes of the original study (167 batter-career, 141
    /// pitcher-career, 137 elsewhere), filled from the catalog prefix.
    pub fn paper() -> StatSpec {
        let cat = catalog();
        let lists = block_order()
            .into_iter()
            .map(|(e, s)| {
                let n = match (e, s) {
                    (Entity::Batter, Scale::Career) => 167,
                    (Entity::Pitcher, Scale::Career) => 141,
                    _ => 137,
                };
                (e, s, cat[..n].to_vec())
            })
            .collect();
        StatSpec::from_lists(lists).expect("paper spec is valid")
    }

    pub fn total_len(&self) -> usize {
        self.blocks.iter().map(|b| b.names.len()).sum()
    }

    /// Length without the this_game blocks.
    pub fn len_without_this_game(&self) -> usize {
        self.blocks
            .iter()
            .filter(|b| b.scale != Scale::ThisGame)
            .map(|b| b.names.len())
            .sum()
    }

    pub fn block(&self, entity: Entity, scale: Scale) -> Option<&StatBlock> {
        self.blocks.iter().find(|b| b.entity == entity && b.scale == scale)
    }

    /// Counters any block needs.
    pub fn counters(&self) -> Vec<Counter> {
        let mut out = Vec::new();
        for f in self.blocks.iter().flat_map(|b| &b.formulas) {
            f.counters(&mut out);
        }
        out.push(Counter::Pa);
        out.sort();
        out.dedup();
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("statspec {}\n", self.version);
        for b in &self.blocks {
            let _ = writeln!(s, "{} {} {}", b.entity.as_str(), b.scale, b.names.join(" "));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<StatSpec, StatsError> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| StatsError::BadSpec("empty spec".into()))?;
        let version: u32 = header
            .strip_prefix("statspec ")
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| StatsError::BadSpec(format!("bad header {header:?}")))?;
        if version != SPEC_VERSION {
            return Err(StatsError::BadSpec(format!("unsupported version {version}")));
        }
        let mut lists = Vec::new();
        for line in lines {
            let mut parts = line.split_whitespace();
            let entity = match parts.next() {
                Some("batter") => Entity::Batter,
                Some("pitcher") => Entity::Pitcher,
                Some("matchup") => Entity::Matchup,
                other => return Err(StatsError::BadSpec(format!("unknown entity {other:?}"))),
            };
            let scale = match parts.next() {
                Some("career") => Scale::Career,
                Some("season") => Scale::Season,
                Some("last15") => Scale::Last15,
                Some("this_game") => Scale::ThisGame,
                other => return Err(StatsError::BadSpec(format!("unknown scale {other:?}"))),
            };
            lists.push((entity, scale, parts.map(str::to_string).collect()));
        }
        StatSpec::from_lists(lists)
    }
}
