use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use log::warn;

use super::event::{bases_from_flags, Half, PitchEvent, COLUMNS};
use super::IngestError;
use crate::gamestate::{Count, GameState};

/// A row that failed validation. `line` is 1-based and counts the header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct ParseOutput {
    pub events: Vec<PitchEvent>,
    pub errors: Vec<RowError>,
}

pub fn parse_pitch_csv(path: &Path) -> Result<ParseOutput, IngestError> {
    let file = std::fs::File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_pitch_reader(file)
}

/// Parse rows from any reader. Malformed rows are skipped and reported.
pub fn parse_pitch_reader<R: Read>(reader: R) -> Result<ParseOutput, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut pos = [0usize; COLUMNS.len()];
    let mut missing = Vec::new();
    for (k, col) in COLUMNS.iter().enumerate() {
        match headers.iter().position(|h| h.trim() == *col) {
            Some(p) => pos[k] = p,
            None => missing.push(col.to_string()),
        }
    }
    if !missing.is_empty() {
        return Err(IngestError::SchemaMismatch(missing));
    }

    let mut out = ParseOutput::default();
    for rec in rdr.records() {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                warn!("skipping unreadable row at line {line}: {e}");
                out.errors.push(RowError {
                    line,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let fields: Vec<&str> = pos.iter().map(|&p| rec.get(p).unwrap_or("").trim()).collect();
        match parse_row(&fields) {
            Ok(e) => out.events.push(e),
            Err(message) => {
                warn!("skipping row at line {line}: {message}");
                out.errors.push(RowError { line, message });
            }
        }
    }
    Ok(out)
}

fn num<T: std::str::FromStr>(fields: &[&str], k: usize) -> Result<T, String> {
    fields[k]
        .parse()
        .map_err(|_| format!("{}: cannot parse {:?}", COLUMNS[k], fields[k]))
}

fn real(fields: &[&str], k: usize) -> Result<f64, String> {
    let v: f64 = num(fields, k)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{}: not finite", COLUMNS[k]))
    }
}

fn optional(fields: &[&str], k: usize) -> Result<Option<f64>, String> {
    if fields[k].is_empty() {
        Ok(None)
    } else {
        real(fields, k).map(Some)
    }
}

fn flag(fields: &[&str], k: usize) -> Result<bool, String> {
    match fields[k] {
        "0" | "" => Ok(false),
        "1" => Ok(true),
        other => Err(format!("{}: expected 0 or 1, got {other:?}", COLUMNS[k])),
    }
}

fn state(fields: &[&str], at: usize) -> Result<GameState, String> {
    Ok(GameState::new(
        Count::new(num(fields, at)?, num(fields, at + 1)?),
        bases_from_flags(flag(fields, at + 2)?, flag(fields, at + 3)?, flag(fields, at + 4)?),
        num(fields, at + 5)?,
        num(fields, at + 6)?,
        num(fields, at + 7)?,
    ))
}

fn parse_row(f: &[&str]) -> Result<PitchEvent, String> {
    let pitch_number: u32 = num(f, 2)?;
    if pitch_number == 0 {
        return Err("pitch_number: numbering starts at 1".into());
    }
    let half = Half::parse(f[4]).ok_or_else(|| format!("inning_half: unknown value {:?}", f[4]))?;
    if f[8].is_empty() {
        return Err("pitch_type: empty".into());
    }
    let pre = state(f, 16)?;
    let post = state(f, 24)?;
    if !pre.is_valid_pre_pitch() {
        return Err(format!("pre-pitch state out of range: {pre}"));
    }
    if !post.count.is_valid() || post.outs > 3 {
        return Err(format!("post-pitch state out of range: {post}"));
    }
    let launch_speed = optional(f, 13)?;
    let launch_angle = optional(f, 14)?;
    let hit_distance = optional(f, 15)?;
    if launch_speed.is_none() && (launch_angle.is_some() || hit_distance.is_some()) {
        return Err("batted-ball fields present without launch_speed".into());
    }
    Ok(PitchEvent {
        game_pk: num(f, 0)?,
        ab_number: num(f, 1)?,
        pitch_number,
        inning: num(f, 3)?,
        half,
        batter_id: num(f, 5)?,
        pitcher_id: num(f, 6)?,
        stadium_id: num(f, 7)?,
        pitch_type: f[8].to_string(),
        release_speed: real(f, 9)?,
        plate_x: real(f, 10)?,
        plate_z: real(f, 11)?,
        spin_rate: real(f, 12)?,
        launch_speed,
        launch_angle,
        hit_distance,
        pre,
        post,
    })
}

pub fn write_pitch_csv(path: &Path, events: &[PitchEvent]) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(COLUMNS)?;
    for e in events {
        w.write_record(e.to_record())?;
    }
    w.flush().map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// `game_pk,season` mapping.
pub fn save_seasons(path: &Path, seasons: &BTreeMap<u64, u32>) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["game_pk", "season"])?;
    for (g, s) in seasons {
        w.write_record([g.to_string(), s.to_string()])?;
    }
    w.flush().map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_seasons(path: &Path) -> Result<BTreeMap<u64, u32>, IngestError> {
    let mut out = BTreeMap::new();
    let mut r = csv::Reader::from_path(path)?;
    for rec in r.records() {
        let rec = rec?;
        let bad = || IngestError::BadCorpus(path.display().to_string(), format!("bad season row {rec:?}"));
        out.insert(rec[0].parse().map_err(|_| bad())?, rec[1].parse().map_err(|_| bad())?);
    }
    Ok(out)
}
