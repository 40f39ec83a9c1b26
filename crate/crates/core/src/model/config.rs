use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

use super::ModelError;
use crate::dataset::{Geometry, MAX_PITCH_ORDINAL, N_PITCH_TYPES, N_POSITIONS, N_ZONES, PHYSICS_DIM};
use crate::ingest::Role;

/// Dimension of a form embedding.
pub const FORM_DIM: usize = 72;

/// Architecture of one encoder. Every parameter shape follows from it.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub layers: usize,
    pub heads: usize,
    pub model_dim: usize,
    pub feedforward_dim: usize,
    pub vocab_size: usize,
    pub n_stadiums: usize,
    pub n_positions: usize,
    pub n_pitch_types: usize,
    pub n_plate_zones: usize,
    pub supplemental_input_dim: usize,
    pub supplemental_hidden_dim: usize,
    pub physics_dim: usize,
    /// Size of the at-bat ordinal table (view length + 1 for [CLS]).
    pub n_ab_ordinals: usize,
    pub n_pitch_ordinals: usize,
    pub form_dim: usize,
    pub max_len: usize,
    pub dropout: f64,
}

impl ModelConfig {
    /// Small encoder for CPU runs.
    pub fn desk(role: Role, vocab_size: usize, supplemental_input_dim: usize) -> ModelConfig {
        let g = Geometry::of(role);
        ModelConfig {
            layers: 2,
            heads: 2,
            model_dim: 64,
            feedforward_dim: 128,
            vocab_size,
            n_stadiums: 32,
            n_positions: N_POSITIONS,
            n_pitch_types: N_PITCH_TYPES,
            n_plate_zones: N_ZONES,
            supplemental_input_dim,
            supplemental_hidden_dim: 32,
            physics_dim: PHYSICS_DIM,
            n_ab_ordinals: g.view_len + 1,
            n_pitch_ordinals: MAX_PITCH_ORDINAL + 1,
            form_dim: FORM_DIM,
            max_len: g.default_max_len,
            dropout: 0.0,
        }
    }

    /// Eight layers, eight heads, model dimension 512.
    pub fn paper(role: Role, vocab_size: usize, supplemental_input_dim: usize) -> ModelConfig {
        ModelConfig {
            layers: 8,
            heads: 8,
            model_dim: 512,
            feedforward_dim: 2048,
            supplemental_hidden_dim: 512,
            n_stadiums: 64,
            dropout: 0.1,
            ..ModelConfig::desk(role, vocab_size, supplemental_input_dim)
        }
    }

    pub fn half_dim(&self) -> usize {
        self.model_dim / 2
    }

    pub fn head_dim(&self) -> usize {
        self.model_dim / self.heads
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::BadConfig(m.to_string()));
        if self.heads == 0 || !self.model_dim.is_multiple_of(self.heads) {
            return bad("model_dim must be divisible by heads");
        }
        if !self.model_dim.is_multiple_of(2) {
            return bad("model_dim must be even");
        }
        if self.form_dim != FORM_DIM {
            return bad("form_dim is fixed at 72");
        }
        if self.vocab_size < 3 || self.layers == 0 || self.feedforward_dim == 0 {
            return bad("empty dimension");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        Ok(())
    }

    pub fn to_map(&self) -> BTreeMap<&'static str, String> {
        BTreeMap::from([
            ("layers", self.layers.to_string()),
            ("heads", self.heads.to_string()),
            ("model_dim", self.model_dim.to_string()),
            ("feedforward_dim", self.feedforward_dim.to_string()),
            ("vocab_size", self.vocab_size.to_string()),
            ("n_stadiums", self.n_stadiums.to_string()),
            ("n_positions", self.n_positions.to_string()),
            ("n_pitch_types", self.n_pitch_types.to_string()),
            ("n_plate_zones", self.n_plate_zones.to_string()),
            ("supplemental_input_dim", self.supplemental_input_dim.to_string()),
            ("supplemental_hidden_dim", self.supplemental_hidden_dim.to_string()),
            ("physics_dim", self.physics_dim.to_string()),
            ("n_ab_ordinals", self.n_ab_ordinals.to_string()),
            ("n_pitch_ordinals", self.n_pitch_ordinals.to_string()),
            ("form_dim", self.form_dim.to_string()),
            ("max_len", self.max_len.to_string()),
            ("dropout", self.dropout.to_string()),
        ])
    }

    pub fn from_map(map: &BTreeMap<String, String>) -> Result<ModelConfig, ModelError> {
        let get = |k: &str| -> Result<&String, ModelError> {
            map.get(k).ok_or_else(|| ModelError::BadConfig(format!("missing {k}")))
        };
        let us = |k: &str| -> Result<usize, ModelError> {
            get(k)?.parse().map_err(|_| ModelError::BadConfig(format!("bad {k}")))
        };
        let cfg = ModelConfig {
            layers: us("layers")?,
            heads: us("heads")?,
            model_dim: us("model_dim")?,
            feedforward_dim: us("feedforward_dim")?,
            vocab_size: us("vocab_size")?,
            n_stadiums: us("n_stadiums")?,
            n_positions: us("n_positions")?,
            n_pitch_types: us("n_pitch_types")?,
            n_plate_zones: us("n_plate_zones")?,
            supplemental_input_dim: us("supplemental_input_dim")?,
            supplemental_hidden_dim: us("supplemental_hidden_dim")?,
            physics_dim: us("physics_dim")?,
            n_ab_ordinals: us("n_ab_ordinals")?,
            n_pitch_ordinals: us("n_pitch_ordinals")?,
            form_dim: us("form_dim")?,
            max_len: us("max_len")?,
            dropout: get("dropout")?
                .parse()
                .map_err(|_| ModelError::BadConfig("bad dropout".into()))?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `key=value` lines in key order.
    pub fn to_text(&self) -> String {
        self.to_map().iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// SHA-256 of the canonical text form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }
}

/// Optimization settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub lr: f64,
    pub warmup_steps: usize,
    pub total_steps: usize,
    /// Windows per batch; a batch holds twice as many views.
    pub batch_windows: usize,
    pub tau: f64,
    pub lambda: f64,
    pub mask_rate: f64,
    pub seed: u64,
    pub checkpoint_every: usize,
    pub eval_batches: usize,
}

impl TrainConfig {
    pub fn desk(seed: u64) -> TrainConfig {
        TrainConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            lr: 1e-3,
            warmup_steps: 200,
            total_steps: 2000,
            batch_windows: 8,
            tau: 0.1,
            lambda: 1.0,
            mask_rate: 0.15,
            seed,
            checkpoint_every: 500,
            eval_batches: 8,
        }
    }

    /// Optimizer settings and iteration counts of the original study.
    pub fn paper(role: Role, seed: u64) -> TrainConfig {
        let (batch, steps, warmup) = match role {
            Role::Batter => (78, 90_000, 7_500),
            Role::Pitcher => (36, 35_000, 2_500),
        };
        TrainConfig {
            lr: 5e-4,
            warmup_steps: warmup,
            total_steps: steps,
            batch_windows: batch,
            checkpoint_every: 5_000,
            ..TrainConfig::desk(seed)
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::BadConfig(m.to_string()));
        if self.warmup_steps >= self.total_steps {
            return bad("warmup_steps must be below total_steps");
        }
        if self.tau <= 0.0 {
            return bad("tau must be positive");
        }
        if self.batch_windows < 2 {
            return bad("a batch needs at least two windows");
        }
        if !(self.mask_rate > 0.0 && self.mask_rate <= 1.0) {
            return bad("mask_rate must be in (0, 1]");
        }
        if self.lambda < 0.0 {
            return bad("lambda must be non-negative");
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        format!(
            "beta1={}\nbeta2={}\neps={}\nlr={}\nwarmup_steps={}\ntotal_steps={}\nbatch_windows={}\ntau={}\nlambda={}\nmask_rate={}\nseed={}\ncheckpoint_every={}\neval_batches={}\n",
            self.beta1,
            self.beta2,
            self.eps,
            self.lr,
            self.warmup_steps,
            self.total_steps,
            self.batch_windows,
            self.tau,
            self.lambda,
            self.mask_rate,
            self.seed,
            self.checkpoint_every,
            self.eval_batches
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_text_round_trip() {
        let c = ModelConfig::desk(Role::Pitcher, 283, 114);
        let map: BTreeMap<String, String> = c
            .to_map()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        assert_eq!(ModelConfig::from_map(&map).unwrap(), c);
        assert_ne!(c.hash(), ModelConfig::desk(Role::Batter, 283, 114).hash());
    }

    #[test]
    fn paper_hyperparameters() {
        let t = TrainConfig::paper(Role::Batter, 0);
        assert_eq!((t.lr, t.warmup_steps, t.batch_windows, t.total_steps), (5e-4, 7_500, 78, 90_000));
        let t = TrainConfig::paper(Role::Pitcher, 0);
        assert_eq!((t.warmup_steps, t.batch_windows, t.total_steps), (2_500, 36, 35_000));
        let m = ModelConfig::paper(Role::Batter, 283, 3082);
        assert_eq!((m.layers, m.heads, m.model_dim, m.form_dim), (8, 8, 512, 72));
    }
}
