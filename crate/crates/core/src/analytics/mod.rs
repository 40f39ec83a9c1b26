//! Game-start form embeddings, Ward clustering, the statistics baseline
//! and reports over the resulting cluster assignments.

mod compare;
mod report;
mod ward;

pub use compare::{agreement, compare_clusterings, Agreement};
pub use report::{switch_rates, timeline_report, timeline_rows, write_atomic, ReportFiles};
pub use ward::{ward_linkage, ward_linkage_reference, Dendrogram, Merge};

use std::collections::BTreeSet;
use std::fmt;

use log::{debug, info, warn};
use rayon::prelude::*;
use thiserror::Error;

use crate::dataset::{view_before_game, DatasetError, FeatureStore};
use crate::ingest::{AtBatRef, Corpus, Half, Role};
use crate::model::{form_embedding, Checkpoint, ModelConfig, ModelError};
use crate::stats::{pca_fit, pca_transform, PcaModel, StatEngine, StatsError};

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("empty input")]
    EmptyInput,
    #[error("cannot cut {n} points into {k} clusters")]
    BadK { k: usize, n: usize },
    #[error("rows have different lengths")]
    DimensionMismatch,
    #[error("checkpoint config hash {found} differs from expected {expected}")]
    CheckpointMismatch { expected: String, found: String },
    #[error("player {0} has no assignments")]
    UnknownPlayer(u32),
    #[error("assignments cover different keys")]
    KeyMismatch,
    #[error("bad assignments file: {0}")]
    Parse(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Form embedding of a starter, from the at-bats just before the game.
#[derive(Debug, Clone, PartialEq)]
pub struct GameStartForm {
    pub player_id: u32,
    pub game_pk: u64,
    pub role: Role,
    pub embedding: Vec<f32>,
    pub source: Vec<AtBatRef>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    Form,
    Stat,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Form => "form",
            Method::Stat => "stat",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        match s {
            "form" => Some(Method::Form),
            "stat" => Some(Method::Stat),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AssignmentRow {
    pub player_id: u32,
    pub game_pk: u64,
    pub cluster: usize,
}

/// Discrete form ids of `(player, game)` keys.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    pub method: Method,
    pub k: usize,
    pub rows: Vec<AssignmentRow>,
}

pub const ASSIGNMENTS_HEADER: &str = "player_id,game_pk,method,k,cluster";

impl ClusterAssignment {
    pub fn from_labels(method: Method, k: usize, keys: &[(u32, u64)], labels: &[usize]) -> ClusterAssignment {
        assert_eq!(keys.len(), labels.len());
        ClusterAssignment {
            method,
            k,
            rows: keys
                .iter()
                .zip(labels)
                .map(|(&(player_id, game_pk), &cluster)| AssignmentRow {
                    player_id,
                    game_pk,
                    cluster,
                })
                .collect(),
        }
    }

    pub fn labels(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.cluster).collect()
    }
}

/// One CSV holding several assignments, each sorted by (player, game).
pub fn assignments_csv(assignments: &[&ClusterAssignment]) -> String {
    let mut s = format!("{ASSIGNMENTS_HEADER}\n");
    for a in assignments {
        let mut rows = a.rows.clone();
        rows.sort_unstable_by_key(|r| (r.player_id, r.game_pk));
        for r in rows {
            s.push_str(&format!("{},{},{},{},{}\n", r.player_id, r.game_pk, a.method, a.k, r.cluster));
        }
    }
    s
}

pub fn parse_assignments_csv(text: &str) -> Result<Vec<ClusterAssignment>, AnalyticsError> {
    let mut lines = text.lines();
    if lines.next() != Some(ASSIGNMENTS_HEADER) {
        return Err(AnalyticsError::Parse("missing header".into()));
    }
    let mut out: Vec<ClusterAssignment> = Vec::new();
    for (i, line) in lines.enumerate() {
        let bad = || AnalyticsError::Parse(format!("line {}: {line}", i + 2));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(bad());
        }
        let method = Method::parse(f[2]).ok_or_else(bad)?;
        let k: usize = f[3].parse().map_err(|_| bad())?;
        let row = AssignmentRow {
            player_id: f[0].parse().map_err(|_| bad())?,
            game_pk: f[1].parse().map_err(|_| bad())?,
            cluster: f[4].parse().map_err(|_| bad())?,
        };
        match out.iter_mut().find(|a| a.method == method && a.k == k) {
            Some(a) => a.rows.push(row),
            None => out.push(ClusterAssignment {
                method,
                k,
                rows: vec![row],
            }),
        }
    }
    Ok(out)
}

/// Ward dendrogram of `x` and its cut into `k` clusters.
pub fn ward_cluster(x: &[Vec<f64>], k: usize) -> Result<(Dendrogram, Vec<usize>), AnalyticsError> {
    if x.is_empty() {
        return Err(AnalyticsError::EmptyInput);
    }
    if k == 0 || k > x.len() {
        return Err(AnalyticsError::BadK { k, n: x.len() });
    }
    let d = ward_linkage(x)?;
    let labels = d.cut(k)?;
    Ok((d, labels))
}

fn half_of(corpus: &Corpus, game: usize, at_bat: usize) -> Half {
    let g = &corpus.games[game];
    g.pitches[g.at_bats[at_bat].first_pitch].half
}

/// Starting lineups of a game: the first nine distinct batters of each
/// half, or the first pitcher of each half. Top half first.
pub fn starters(corpus: &Corpus, game: usize, role: Role) -> Vec<u32> {
    let g = &corpus.games[game];
    let mut out = Vec::new();
    for half in [Half::Top, Half::Bottom] {
        let mut seen = BTreeSet::new();
        for (ai, ab) in g.at_bats.iter().enumerate() {
            if half_of(corpus, game, ai) != half {
                continue;
            }
            match role {
                Role::Batter => {
                    if seen.len() < 9 && seen.insert(ab.batter_id) {
                        out.push(ab.batter_id);
                    }
                }
                Role::Pitcher => {
                    out.push(ab.pitcher_id);
                    break;
                }
            }
        }
    }
    let mut seen = BTreeSet::new();
    out.retain(|p| seen.insert(*p));
    out
}

/// Game-start forms of every starter with a full view of prior at-bats,
/// in game order then lineup order. Fails if the checkpoint was trained
/// with a config other than `expected`.
pub fn game_start_forms(
    corpus: &Corpus,
    features: &FeatureStore,
    checkpoint: &Checkpoint,
    expected: &ModelConfig,
    role: Role,
) -> Result<Vec<GameStartForm>, AnalyticsError> {
    let (want, found) = (expected.hash(), checkpoint.config.hash());
    if want != found {
        return Err(AnalyticsError::CheckpointMismatch {
            expected: want,
            found,
        });
    }
    let mut jobs = Vec::new();
    let mut skipped = 0usize;
    for gi in 0..corpus.games.len() {
        for p in starters(corpus, gi, role) {
            match view_before_game(corpus, p, role, gi) {
                Some(v) => jobs.push((gi, v)),
                None => {
                    debug!("{role} {p} lacks history before game {}", corpus.games[gi].game_pk);
                    skipped += 1;
                }
            }
        }
    }
    info!("{} game-start {role} views, {skipped} starters skipped for short history", jobs.len());
    let cfg = &checkpoint.config;
    jobs.par_iter()
        .map(|(gi, view)| {
            let inputs = features.featurize(corpus, view)?;
            let embedding = form_embedding(cfg, &checkpoint.params, &inputs)?;
            Ok(GameStartForm {
                player_id: view.player_id,
                game_pk: corpus.games[*gi].game_pk,
                role,
                embedding,
                source: view.at_bats.clone(),
            })
        })
        .collect()
}

/// The batter and pitcher whose statistics describe `player` at the start
/// of a game: a batter is paired with the opposing starting pitcher, a
/// pitcher with the opposing leadoff batter.
fn baseline_pair(corpus: &Corpus, player: u32, game_pk: u64, role: Role) -> Option<(u32, u32)> {
    let gi = corpus.game_index(game_pk)?;
    let g = &corpus.games[gi];
    let own = g.at_bats.iter().position(|ab| match role {
        Role::Batter => ab.batter_id == player,
        Role::Pitcher => ab.pitcher_id == player,
    })?;
    let half = half_of(corpus, gi, own);
    let first = (0..g.at_bats.len()).find(|&ai| half_of(corpus, gi, ai) == half)?;
    let ab = &g.at_bats[first];
    Some(match role {
        Role::Batter => (player, ab.pitcher_id),
        Role::Pitcher => (ab.batter_id, player),
    })
}

/// Unstandardized supplemental vectors without the this_game blocks, as
/// of the first pitch of each keyed game.
pub fn stat_baseline_raw(
    corpus: &Corpus,
    engine: &StatEngine,
    keys: &[(u32, u64)],
    role: Role,
) -> Result<Vec<Vec<f64>>, AnalyticsError> {
    keys.par_iter()
        .map(|&(player, game_pk)| {
            let (b, p) = baseline_pair(corpus, player, game_pk, role).ok_or(StatsError::UnknownPlayer {
                player_id: player,
                role,
            })?;
            Ok(engine.raw_supplemental(b, p, (game_pk, 0), false)?.values)
        })
        .collect()
}

/// Column z-scores (population std, constant columns left centred).
pub fn zscore_columns(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    if rows.is_empty() {
        return Vec::new();
    }
    let n = rows.len() as f64;
    let dim = rows[0].len();
    let mut out = rows.to_vec();
    for j in 0..dim {
        let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
        let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
        let std = if var > 0.0 { var.sqrt() } else { 1.0 };
        for r in out.iter_mut() {
            r[j] = (r[j] - mean) / std;
        }
    }
    out
}

/// Statistics baseline: raw vectors, column z-scores, then PCA to `dim`
/// components, or fewer when the data has lower rank.
pub fn stat_baseline_vectors(
    corpus: &Corpus,
    engine: &StatEngine,
    keys: &[(u32, u64)],
    role: Role,
    dim: usize,
) -> Result<(Vec<Vec<f64>>, PcaModel), AnalyticsError> {
    if keys.is_empty() {
        return Err(AnalyticsError::EmptyInput);
    }
    let z = zscore_columns(&stat_baseline_raw(corpus, engine, keys, role)?);
    let k = dim.min(z[0].len()).min(z.len());
    let model = match pca_fit(&z, k) {
        Err(StatsError::RankDeficient { requested, rank }) if rank > 0 => {
            warn!("baseline statistics have rank {rank}; keeping {rank} of {requested} components");
            pca_fit(&z, rank)?
        }
        r => r?,
    };
    let reduced = pca_transform(&model, &z)?;
    Ok((reduced, model))
}

#[cfg(test)]
mod tests;
