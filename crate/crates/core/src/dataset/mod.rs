//! Windows of consecutive at-bats, their two overlapping views, masking and
//! batch assembly.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use log::warn;
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::gamestate::DeltaVocabulary;
use crate::ingest::{plate_zone, AtBatRef, Corpus, Half, PitchEvent, Role};
use crate::stats::{pitch_code_index, StatEngine, StatsError, PITCH_CODES};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{role} {player_id} has {have} at-bats, a window needs {need}")]
    InsufficientHistory {
        player_id: u32,
        role: Role,
        have: usize,
        need: usize,
    },
    #[error("view of {len} slots exceeds max_len {max_len}")]
    SequenceOverflow { len: usize, max_len: usize },
    #[error("at-bat {0:?} has no delta tokens")]
    Untokenized(AtBatRef),
    #[error("bad window manifest: {0}")]
    BadManifest(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Window and view geometry of a role.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Geometry {
    pub window_len: usize,
    pub view_len: usize,
    /// First at-bat of the second view.
    pub view2_start: usize,
    pub default_stride: usize,
    pub default_max_len: usize,
}

impl Geometry {
    pub fn of(role: Role) -> Geometry {
        match role {
            Role::Batter => Geometry {
                window_len: 20,
                view_len: 15,
                view2_start: 5,
                default_stride: 5,
                default_max_len: 128,
            },
            Role::Pitcher => Geometry {
                window_len: 100,
                view_len: 90,
                view2_start: 10,
                default_stride: 10,
                default_max_len: 512,
            },
        }
    }
}

/// A player's span of consecutive at-bats.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormWindow {
    pub player_id: u32,
    pub role: Role,
    /// Index of the first at-bat in the player's appearance list.
    pub start: usize,
    pub at_bats: Vec<AtBatRef>,
}

/// A contiguous sub-span of a window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormView {
    pub player_id: u32,
    pub role: Role,
    pub at_bats: Vec<AtBatRef>,
}

/// Windows starting at 0, stride, 2*stride, ...; a trailing partial window
/// is dropped.
pub fn extract_windows(
    corpus: &Corpus,
    player_id: u32,
    role: Role,
    stride: usize,
) -> Result<Vec<FormWindow>, DatasetError> {
    assert!(stride > 0, "stride must be positive");
    let len = Geometry::of(role).window_len;
    let apps = corpus.appearances(player_id, role);
    if apps.len() < len {
        return Err(DatasetError::InsufficientHistory {
            player_id,
            role,
            have: apps.len(),
            need: len,
        });
    }
    Ok((0..=apps.len() - len)
        .step_by(stride)
        .map(|start| FormWindow {
            player_id,
            role,
            start,
            at_bats: apps[start..start + len].to_vec(),
        })
        .collect())
}

/// Windows of every player in a role, in player-id order. Players without
/// enough history are skipped.
pub fn extract_all_windows(corpus: &Corpus, role: Role, stride: usize) -> Vec<FormWindow> {
    let players: Vec<u32> = corpus.players(role).collect();
    players
        .par_iter()
        .map(|&p| extract_windows(corpus, p, role, stride).unwrap_or_default())
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

pub fn make_views(window: &FormWindow) -> (FormView, FormView) {
    let g = Geometry::of(window.role);
    assert_eq!(window.at_bats.len(), g.window_len, "window must be full length");
    let view = |from: usize| FormView {
        player_id: window.player_id,
        role: window.role,
        at_bats: window.at_bats[from..from + g.view_len].to_vec(),
    };
    (view(0), view(g.view2_start))
}

/// The last `view_len` at-bats of a player strictly before a game starts.
pub fn view_before_game(corpus: &Corpus, player_id: u32, role: Role, game_index: usize) -> Option<FormView> {
    let apps = corpus.appearances(player_id, role);
    let end = apps.partition_point(|r| r.game < game_index);
    let len = Geometry::of(role).view_len;
    (end >= len).then(|| FormView {
        player_id,
        role,
        at_bats: apps[end - len..end].to_vec(),
    })
}

/// Number of continuous pitch features.
pub const PHYSICS_DIM: usize = 8;
/// Lineup slots 1..=9, with 0 for the [CLS] slot.
pub const N_POSITIONS: usize = 10;
pub const N_PITCH_TYPES: usize = PITCH_CODES.len();
pub const N_ZONES: usize = 25;
/// Pitch ordinals within an at-bat are clamped to this value.
pub const MAX_PITCH_ORDINAL: usize = 15;

/// Model inputs of one view; slot 0 is [CLS].
#[derive(Debug, Clone, PartialEq)]
pub struct ViewInputs {
    pub tokens: Vec<u32>,
    pub stadium: Vec<u32>,
    pub position: Vec<u32>,
    pub pitch_type: Vec<u32>,
    pub zone: Vec<u32>,
    /// At-bat ordinal in the view, from 1.
    pub ab_ordinal: Vec<u32>,
    /// Pitch ordinal in the at-bat, from 1.
    pub pitch_ordinal: Vec<u32>,
    /// `len * supplemental_dim`: standardized values then presence flags.
    pub supplemental: Vec<f32>,
    pub physics: Vec<f32>,
}

impl ViewInputs {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn supplemental_dim(&self) -> usize {
        self.supplemental.len() / self.len().max(1)
    }

    fn with_capacity(n: usize, sup_dim: usize) -> ViewInputs {
        ViewInputs {
            tokens: Vec::with_capacity(n),
            stadium: Vec::with_capacity(n),
            position: Vec::with_capacity(n),
            pitch_type: Vec::with_capacity(n),
            zone: Vec::with_capacity(n),
            ab_ordinal: Vec::with_capacity(n),
            pitch_ordinal: Vec::with_capacity(n),
            supplemental: Vec::with_capacity(n * sup_dim),
            physics: Vec::with_capacity(n * PHYSICS_DIM),
        }
    }
}

/// Fixed affine scaling of the continuous pitch fields; absent batted-ball
/// fields encode as 0 with a presence flag in the last slot.
pub fn physics_features(p: &PitchEvent) -> [f32; PHYSICS_DIM] {
    let contact = p.is_contact();
    [
        ((p.release_speed - 90.0) / 6.0) as f32,
        ((p.spin_rate - 2300.0) / 400.0) as f32,
        p.plate_x as f32,
        (p.plate_z - 2.5) as f32,
        p.launch_speed.map(|v| (v - 88.0) / 15.0).unwrap_or(0.0) as f32,
        p.launch_angle.map(|v| v / 25.0).unwrap_or(0.0) as f32,
        p.hit_distance.map(|v| v / 150.0).unwrap_or(0.0) as f32,
        contact as u8 as f32,
    ]
}

/// Per-at-bat features shared by every view: supplemental vectors,
/// lineup slots and the stadium index.
#[derive(Debug, Clone)]
pub struct FeatureStore {
    supplemental_dim: usize,
    supplemental: HashMap<AtBatRef, Vec<f32>>,
    lineup_slot: HashMap<AtBatRef, u32>,
    stadiums: BTreeMap<u32, u32>,
    n_stadiums: usize,
}

impl FeatureStore {
    /// Features for every tokenized at-bat. Stadium ids are indexed in
    /// ascending order from 1; ids past `n_stadiums - 1` share index 0.
    pub fn build(corpus: &Corpus, engine: &StatEngine, n_stadiums: usize) -> Result<FeatureStore, DatasetError> {
        let per_game: Vec<Vec<(AtBatRef, Vec<f32>)>> = corpus
            .games
            .par_iter()
            .enumerate()
            .map(|(gi, game)| {
                let mut out = Vec::new();
                for (ai, ab) in game.at_bats.iter().enumerate() {
                    if !game.is_tokenized(ai) {
                        continue;
                    }
                    let v = engine.assemble_supplemental(ab.batter_id, ab.pitcher_id, (game.game_pk, ab.ab_number))?;
                    let mut row: Vec<f32> = v.values.iter().map(|x| *x as f32).collect();
                    row.extend(v.presence.iter().map(|p| *p as u8 as f32));
                    out.push((AtBatRef { game: gi, at_bat: ai }, row));
                }
                Ok(out)
            })
            .collect::<Result<_, StatsError>>()?;
        let supplemental: HashMap<AtBatRef, Vec<f32>> = per_game.into_iter().flatten().collect();

        let mut lineup_slot = HashMap::new();
        for (gi, game) in corpus.games.iter().enumerate() {
            let mut order: HashMap<(Half, u32), u32> = HashMap::new();
            let mut next = [0u32; 2];
            for (ai, ab) in game.at_bats.iter().enumerate() {
                let half = game.pitches[ab.first_pitch].half;
                let slot = *order.entry((half, ab.batter_id)).or_insert_with(|| {
                    let h = (half == Half::Bottom) as usize;
                    next[h] += 1;
                    next[h]
                });
                lineup_slot.insert(AtBatRef { game: gi, at_bat: ai }, slot.min(9));
            }
        }

        let mut ids: Vec<u32> = corpus.events().map(|e| e.stadium_id).collect();
        ids.sort_unstable();
        ids.dedup();
        let stadiums = ids.into_iter().enumerate().map(|(i, id)| (id, i as u32 + 1)).collect();

        Ok(FeatureStore {
            supplemental_dim: 2 * engine.spec().total_len(),
            supplemental,
            lineup_slot,
            stadiums,
            n_stadiums,
        })
    }

    pub fn supplemental_dim(&self) -> usize {
        self.supplemental_dim
    }

    fn stadium_index(&self, id: u32) -> u32 {
        match self.stadiums.get(&id) {
            Some(&i) if (i as usize) < self.n_stadiums => i,
            _ => 0,
        }
    }

    /// Materialize a view, prefixed by the [CLS] slot.
    pub fn featurize(&self, corpus: &Corpus, view: &FormView) -> Result<ViewInputs, DatasetError> {
        let n: usize = 1 + view.at_bats.iter().map(|r| corpus.at_bat(*r).n_pitches).sum::<usize>();
        let mut x = ViewInputs::with_capacity(n, self.supplemental_dim);
        x.tokens.push(DeltaVocabulary::CLS_ID);
        x.stadium.push(0);
        x.position.push(0);
        x.pitch_type.push(0);
        x.zone.push(0);
        x.ab_ordinal.push(0);
        x.pitch_ordinal.push(0);
        x.supplemental.resize(self.supplemental_dim, 0.0);
        x.physics.resize(PHYSICS_DIM, 0.0);
        for (i, r) in view.at_bats.iter().enumerate() {
            let game = &corpus.games[r.game];
            let sup = self.supplemental.get(r).ok_or(DatasetError::Untokenized(*r))?;
            let slot = self.lineup_slot.get(r).copied().unwrap_or(0);
            let tokens = game.at_bat_tokens(r.at_bat);
            for (j, (p, t)) in game.at_bat_pitches(r.at_bat).iter().zip(tokens).enumerate() {
                x.tokens.push(t.ok_or(DatasetError::Untokenized(*r))?);
                x.stadium.push(self.stadium_index(p.stadium_id));
                x.position.push(slot);
                x.pitch_type.push(pitch_code_index(&p.pitch_type) as u32);
                x.zone.push(plate_zone(p.plate_x, p.plate_z) as u32);
                x.ab_ordinal.push(i as u32 + 1);
                x.pitch_ordinal.push((j + 1).min(MAX_PITCH_ORDINAL) as u32);
                x.supplemental.extend_from_slice(sup);
                x.physics.extend_from_slice(&physics_features(p));
            }
        }
        Ok(x)
    }
}

/// A view with some delta tokens replaced by [MASK].
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedView {
    pub inputs: ViewInputs,
    /// Slot indices of masked tokens, ascending.
    pub positions: Vec<usize>,
    pub targets: Vec<u32>,
}

/// Mask each delta token independently with probability `rate`, drawing
/// again until at least one token is masked. The [CLS] slot is never
/// masked.
pub fn mask_view(inputs: &ViewInputs, rate: f64, rng: &mut impl Rng) -> MaskedView {
    assert!(rate > 0.0 && rate <= 1.0, "mask rate must be in (0, 1]");
    let mut positions = Vec::new();
    if inputs.len() > 1 {
        while positions.is_empty() {
            positions = (1..inputs.len()).filter(|_| rng.gen_bool(rate)).collect();
        }
    }
    let mut masked = inputs.clone();
    let targets = positions.iter().map(|&p| inputs.tokens[p]).collect();
    for &p in &positions {
        masked.tokens[p] = DeltaVocabulary::MASK_ID;
    }
    MaskedView {
        inputs: masked,
        positions,
        targets,
    }
}

/// 2N masked views; views `2w` and `2w + 1` come from window `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedBatch {
    pub role: Role,
    pub max_len: usize,
    pub views: Vec<MaskedView>,
    pub pairing: Vec<usize>,
    /// Indices into the input window list of the windows kept.
    pub windows: Vec<usize>,
}

/// Padded flat tensors of a batch, row-major `(2N, max_len, ...)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PaddedBatch {
    pub n_views: usize,
    pub max_len: usize,
    pub supplemental_dim: usize,
    pub tokens: Vec<u32>,
    /// True at real slots, false at padding.
    pub attention_mask: Vec<bool>,
    /// True at masked slots.
    pub loss_mask: Vec<bool>,
    /// Target id at masked slots, 0 elsewhere.
    pub targets: Vec<u32>,
    pub supplemental: Vec<f32>,
    pub physics: Vec<f32>,
}

impl MaskedBatch {
    pub fn n_masked(&self) -> usize {
        self.views.iter().map(|v| v.positions.len()).sum()
    }

    pub fn padded(&self) -> PaddedBatch {
        let sup = self.views.first().map(|v| v.inputs.supplemental_dim()).unwrap_or(0);
        let (n, l) = (self.views.len(), self.max_len);
        let mut b = PaddedBatch {
            n_views: n,
            max_len: l,
            supplemental_dim: sup,
            tokens: vec![0; n * l],
            attention_mask: vec![false; n * l],
            loss_mask: vec![false; n * l],
            targets: vec![0; n * l],
            supplemental: vec![0.0; n * l * sup],
            physics: vec![0.0; n * l * PHYSICS_DIM],
        };
        for (i, v) in self.views.iter().enumerate() {
            let len = v.inputs.len();
            b.tokens[i * l..i * l + len].copy_from_slice(&v.inputs.tokens);
            b.attention_mask[i * l..i * l + len].fill(true);
            for (p, t) in v.positions.iter().zip(&v.targets) {
                b.loss_mask[i * l + p] = true;
                b.targets[i * l + p] = *t;
            }
            b.supplemental[i * l * sup..(i * l + len) * sup].copy_from_slice(&v.inputs.supplemental);
            b.physics[i * l * PHYSICS_DIM..(i * l + len) * PHYSICS_DIM].copy_from_slice(&v.inputs.physics);
        }
        b
    }
}

pub fn pairing(n_views: usize) -> Vec<usize> {
    (0..n_views).map(|i| i ^ 1).collect()
}

/// Featurize, mask and pair the views of each window. Windows with a view
/// longer than `max_len` are skipped with a warning.
pub fn assemble_batch(
    windows: &[FormWindow],
    corpus: &Corpus,
    features: &FeatureStore,
    max_len: usize,
    mask_rate: f64,
    rng: &mut impl Rng,
) -> Result<MaskedBatch, DatasetError> {
    let role = windows.first().map(|w| w.role).unwrap_or(Role::Batter);
    assert!(windows.iter().all(|w| w.role == role), "windows must share a role");
    let mut views = Vec::with_capacity(2 * windows.len());
    let mut kept = Vec::new();
    for (wi, w) in windows.iter().enumerate() {
        let (a, b) = make_views(w);
        let (xa, xb) = (features.featurize(corpus, &a)?, features.featurize(corpus, &b)?);
        let longest = xa.len().max(xb.len());
        if longest > max_len {
            warn!(
                "{}",
                DatasetError::SequenceOverflow {
                    len: longest,
                    max_len
                }
            );
            continue;
        }
        views.push(mask_view(&xa, mask_rate, rng));
        views.push(mask_view(&xb, mask_rate, rng));
        kept.push(wi);
    }
    Ok(MaskedBatch {
        role,
        max_len,
        pairing: pairing(views.len()),
        views,
        windows: kept,
    })
}

/// Which side of the chronological split a window falls on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Heldout,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Heldout => "heldout",
        }
    }
}

/// Games with index below the cutoff form the training split.
pub fn split_cutoff(corpus: &Corpus, train_fraction: f64) -> usize {
    ((corpus.games.len() as f64) * train_fraction).round() as usize
}

/// Windows wholly inside one side of the cutoff; straddling windows are
/// dropped.
pub fn split_of(window: &FormWindow, cutoff: usize) -> Option<Split> {
    let first = window.at_bats.first()?.game;
    let last = window.at_bats.last()?.game;
    if last < cutoff {
        Some(Split::Train)
    } else if first >= cutoff {
        Some(Split::Heldout)
    } else {
        None
    }
}

const MANIFEST_HEADER: &str = "window_id,player_id,role,split,start,len,first_game_pk,first_ab,last_game_pk,last_ab";

/// Window index as CSV.
pub fn windows_to_csv(corpus: &Corpus, windows: &[(FormWindow, Split)]) -> String {
    let mut s = String::from(MANIFEST_HEADER);
    s.push('\n');
    for (i, (w, split)) in windows.iter().enumerate() {
        let first = w.at_bats[0];
        let last = *w.at_bats.last().unwrap();
        let _ = writeln!(
            s,
            "{i},{},{},{},{},{},{},{},{},{}",
            w.player_id,
            w.role,
            split.as_str(),
            w.start,
            w.at_bats.len(),
            corpus.games[first.game].game_pk,
            corpus.at_bat(first).ab_number,
            corpus.games[last.game].game_pk,
            corpus.at_bat(last).ab_number,
        );
    }
    s
}

/// Rebuild windows from their index, checking that the corpus still
/// places them at the recorded at-bats.
pub fn windows_from_csv(corpus: &Corpus, text: &str) -> Result<Vec<(FormWindow, Split)>, DatasetError> {
    let bad = |m: String| DatasetError::BadManifest(m);
    let mut lines = text.lines();
    if lines.next() != Some(MANIFEST_HEADER) {
        return Err(bad("unexpected header".into()));
    }
    let mut out = Vec::new();
    for line in lines.filter(|l| !l.is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            return Err(bad(format!("row {line:?}")));
        }
        let num = |s: &str| s.parse::<u64>().map_err(|_| bad(format!("bad number {s:?} in {line:?}")));
        let player_id = num(f[1])? as u32;
        let role = Role::parse(f[2]).ok_or_else(|| bad(format!("bad role {:?}", f[2])))?;
        let split = match f[3] {
            "train" => Split::Train,
            "heldout" => Split::Heldout,
            other => return Err(bad(format!("bad split {other:?}"))),
        };
        let (start, len) = (num(f[4])? as usize, num(f[5])? as usize);
        let apps = corpus.appearances(player_id, role);
        if start + len > apps.len() {
            return Err(bad(format!("window {} past the end of player {player_id}", f[0])));
        }
        let at_bats = apps[start..start + len].to_vec();
        let key = |r: AtBatRef| (corpus.games[r.game].game_pk, corpus.at_bat(r).ab_number as u64);
        if key(at_bats[0]) != (num(f[6])?, num(f[7])?) || key(at_bats[len - 1]) != (num(f[8])?, num(f[9])?) {
            return Err(bad(format!("window {} no longer matches the corpus", f[0])));
        }
        out.push((
            FormWindow {
                player_id,
                role,
                start,
                at_bats,
            },
            split,
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gamestate::{enumerate_legal_deltas, simulate_corpus, SimConfig};
    use crate::ingest::{reconstruct_games, replay_and_tokenize};
    use crate::stats::StatSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn corpus(games: usize) -> Corpus {
        let sim = simulate_corpus(&SimConfig::new(5, games));
        let mut c = reconstruct_games(sim.events).unwrap();
        c.seasons = sim.seasons;
        replay_and_tokenize(&mut c, &enumerate_legal_deltas());
        c
    }

    fn player_with(c: &Corpus, role: Role, at_least: usize) -> u32 {
        c.players(role).find(|p| c.appearances(*p, role).len() >= at_least).unwrap()
    }

    #[test]
    fn window_counts() {
        let c = corpus(60);
        let b = player_with(&c, Role::Batter, 30);
        let n = c.appearances(b, Role::Batter).len();
        let w = extract_windows(&c, b, Role::Batter, 5).unwrap();
        assert_eq!(w.len(), (n - 20) / 5 + 1);
        assert!(w.iter().enumerate().all(|(i, w)| w.start == 5 * i && w.at_bats.len() == 20));
        let p = player_with(&c, Role::Pitcher, 100);
        let n = c.appearances(p, Role::Pitcher).len();
        assert_eq!(extract_windows(&c, p, Role::Pitcher, 10).unwrap().len(), (n - 100) / 10 + 1);
    }

    #[test]
    fn short_history_is_rejected() {
        let c = corpus(2);
        let b = c.players(Role::Batter).next().unwrap();
        assert!(matches!(
            extract_windows(&c, b, Role::Batter, 5),
            Err(DatasetError::InsufficientHistory { need: 20, .. })
        ));
    }

    #[test]
    fn views_overlap() {
        let c = corpus(40);
        let b = player_with(&c, Role::Batter, 20);
        let w = &extract_windows(&c, b, Role::Batter, 5).unwrap()[0];
        let (v1, v2) = make_views(w);
        assert_eq!(v1.at_bats, w.at_bats[0..15]);
        assert_eq!(v2.at_bats, w.at_bats[5..20]);
        let shared = v1.at_bats.iter().filter(|a| v2.at_bats.contains(a)).count();
        assert_eq!(shared, 10);
    }

    #[test]
    fn full_rate_masks_everything() {
        let c = corpus(40);
        let engine = StatEngine::new(&c, StatSpec::desk());
        let store = FeatureStore::build(&c, &engine, 32).unwrap();
        let b = player_with(&c, Role::Batter, 20);
        let (v, _) = make_views(&extract_windows(&c, b, Role::Batter, 5).unwrap()[0]);
        let x = store.featurize(&c, &v).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = mask_view(&x, 1.0, &mut rng);
        assert_eq!(m.positions, (1..x.len()).collect::<Vec<_>>());
        assert!(m.inputs.tokens[1..].iter().all(|t| *t == DeltaVocabulary::MASK_ID));
        assert_eq!(m.inputs.tokens[0], DeltaVocabulary::CLS_ID);
    }

    #[test]
    fn batch_shapes_and_pairing() {
        let c = corpus(40);
        let engine = StatEngine::new(&c, StatSpec::desk());
        let store = FeatureStore::build(&c, &engine, 32).unwrap();
        let windows: Vec<FormWindow> = extract_all_windows(&c, Role::Batter, 5).into_iter().take(2).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let batch = assemble_batch(&windows, &c, &store, 128, 0.15, &mut rng).unwrap();
        assert_eq!(batch.views.len(), 4);
        assert_eq!(batch.pairing, vec![1, 0, 3, 2]);
        let p = batch.padded();
        assert_eq!(p.tokens.len(), 4 * 128);
        assert_eq!(p.supplemental.len(), 4 * 128 * 114);
        assert_eq!(p.physics.len(), 4 * 128 * PHYSICS_DIM);
        for i in 0..4 * 128 {
            assert!(!p.loss_mask[i] || p.attention_mask[i]);
        }
        assert_eq!(p.loss_mask.iter().filter(|m| **m).count(), batch.n_masked());
    }

    #[test]
    fn manifest_round_trip() {
        let c = corpus(40);
        let cutoff = split_cutoff(&c, 0.8);
        let windows: Vec<(FormWindow, Split)> = extract_all_windows(&c, Role::Batter, 5)
            .into_iter()
            .filter_map(|w| split_of(&w, cutoff).map(|s| (w, s)))
            .collect();
        let text = windows_to_csv(&c, &windows);
        assert_eq!(windows_from_csv(&c, &text).unwrap(), windows);
    }
}
