use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use super::{is_legal, Bases, Count, GameState, GamestateDelta, GamestateError};

pub const CLS_TOKEN: &str = "[CLS]";
pub const MASK_TOKEN: &str = "[MASK]";

/// Number of distinct gamestate changes reported for the original study;
/// kept as a reference point for the enumerated cardinality.
pub const PAPER_VOCAB_SIZE: usize = 325;

const N_SPECIAL: usize = 2;

/// Dense token ids: `[CLS]` is 0, `[MASK]` is 1, then the canonical deltas
/// in sorted order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeltaVocabulary {
    deltas: Vec<GamestateDelta>,
    ids: HashMap<GamestateDelta, u32>,
}

impl DeltaVocabulary {
    pub const CLS_ID: u32 = 0;
    pub const MASK_ID: u32 = 1;

    pub fn from_deltas(deltas: impl IntoIterator<Item = GamestateDelta>) -> Self {
        let sorted: BTreeSet<GamestateDelta> = deltas.into_iter().collect();
        let deltas: Vec<GamestateDelta> = sorted.into_iter().collect();
        let ids = deltas
            .iter()
            .enumerate()
            .map(|(i, d)| (*d, (i + N_SPECIAL) as u32))
            .collect();
        DeltaVocabulary { deltas, ids }
    }

    /// Number of delta tokens, not counting the special tokens.
    pub fn n_deltas(&self) -> usize {
        self.deltas.len()
    }

    /// Total id space including `[CLS]` and `[MASK]`.
    pub fn len(&self) -> usize {
        self.deltas.len() + N_SPECIAL
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    pub fn id(&self, delta: &GamestateDelta) -> Option<u32> {
        self.ids.get(delta).copied()
    }

    pub fn delta(&self, id: u32) -> Option<&GamestateDelta> {
        (id as usize).checked_sub(N_SPECIAL).and_then(|i| self.deltas.get(i))
    }

    pub fn contains(&self, delta: &GamestateDelta) -> bool {
        self.ids.contains_key(delta)
    }

    pub fn deltas(&self) -> &[GamestateDelta] {
        &self.deltas
    }

    pub fn tokens(&self) -> Vec<String> {
        [CLS_TOKEN.to_string(), MASK_TOKEN.to_string()]
            .into_iter()
            .chain(self.deltas.iter().map(|d| d.to_string()))
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for t in self.tokens() {
            out.push_str(&t);
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, GamestateError> {
        let mut lines = text.lines();
        if lines.next() != Some(CLS_TOKEN) || lines.next() != Some(MASK_TOKEN) {
            return Err(GamestateError::BadToken("missing special tokens".into()));
        }
        let deltas = lines
            .map(str::parse::<GamestateDelta>)
            .collect::<Result<Vec<_>, _>>()?;
        let vocab = DeltaVocabulary::from_deltas(deltas.iter().copied());
        if vocab.deltas != deltas {
            return Err(GamestateError::BadToken("tokens not in canonical order".into()));
        }
        Ok(vocab)
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_text())
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(Self::from_text(&text)?)
    }

    /// Text written next to `vocab.txt` recording the cardinality.
    pub fn cardinality_report(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "delta_tokens={}", self.n_deltas());
        let _ = writeln!(s, "special_tokens={N_SPECIAL}");
        let _ = writeln!(s, "total_ids={}", self.len());
        let _ = writeln!(s, "reference_325={PAPER_VOCAB_SIZE}");
        s
    }
}

/// Every delta that is legal from at least one pre-pitch state. Score does
/// not affect legality, so states are enumerated at 0-0.
pub fn enumerate_legal_deltas() -> DeltaVocabulary {
    let mut found = BTreeSet::new();
    for state in GameState::enumerate_pre_pitch(1) {
        for delta in candidate_deltas() {
            if is_legal(&state, &delta) {
                found.insert(delta);
            }
        }
    }
    DeltaVocabulary::from_deltas(found)
}

/// The full 4-tuple space the legality predicate is evaluated over.
pub(crate) fn candidate_deltas() -> impl Iterator<Item = GamestateDelta> {
    Count::all().flat_map(|c| {
        Bases::all().flat_map(move |b| {
            (0..=3u8).flat_map(move |o| (0..=4u8).map(move |r| GamestateDelta::new(c, b, o, r)))
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_is_deterministic() {
        let a = enumerate_legal_deltas();
        let b = enumerate_legal_deltas();
        assert_eq!(a.tokens(), b.tokens());
    }

    #[test]
    fn contains_ball_and_strike() {
        let v = enumerate_legal_deltas();
        let ball = GamestateDelta::new(Count::new(1, 0), Bases::EMPTY, 0, 0);
        let strike = GamestateDelta::new(Count::new(0, 1), Bases::EMPTY, 0, 0);
        assert!(v.contains(&ball));
        assert!(v.contains(&strike));
        assert_eq!(v.delta(v.id(&ball).unwrap()), Some(&ball));
    }

    #[test]
    fn text_round_trip_keeps_ids() {
        let v = enumerate_legal_deltas();
        let back = DeltaVocabulary::from_text(&v.to_text()).unwrap();
        assert_eq!(back, v);
        assert_eq!(v.tokens()[0], CLS_TOKEN);
        assert_eq!(v.tokens()[1], MASK_TOKEN);
    }
}
