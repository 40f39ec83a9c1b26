use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use super::config::{ModelConfig, TrainConfig};
use super::optim::{adam_step, lr_schedule, AdamHyper, AdamState};
use super::params::Parameters;
use super::{loss_and_grad, total_loss, LossParts, ModelError};
use crate::dataset::{assemble_batch, FeatureStore, FormWindow, MaskedBatch};
use crate::ingest::Corpus;

/// Windows and features a model trains on.
pub struct TrainData<'a> {
    pub corpus: &'a Corpus,
    pub features: &'a FeatureStore,
    pub train: Vec<FormWindow>,
    pub heldout: Vec<FormWindow>,
    pub max_len: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: Parameters<f32>,
    pub adam: AdamState<f32>,
    /// `(step, lr, parts)` for every step run by this call.
    pub history: Vec<(u64, f64, LossParts)>,
    pub checkpoint: PathBuf,
}

fn mix(seed: u64, stream: u64, step: u64) -> u64 {
    let mut x = seed ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03) ^ step.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    x ^= x >> 31;
    x = x.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x ^ (x >> 29)
}

fn sample_batch(
    windows: &[FormWindow],
    data: &TrainData,
    tc: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<MaskedBatch, ModelError> {
    let n = tc.batch_windows.min(windows.len());
    if n < 2 {
        return Err(ModelError::BadConfig("fewer than two windows to sample from".into()));
    }
    let picked: Vec<FormWindow> = sample(rng, windows.len(), n)
        .into_iter()
        .map(|i| windows[i].clone())
        .collect();
    let batch = assemble_batch(&picked, data.corpus, data.features, data.max_len, tc.mask_rate, rng)?;
    if batch.views.len() < 2 {
        return Err(ModelError::BadConfig("every sampled window overflowed max_len".into()));
    }
    Ok(batch)
}

/// The batch used at a training step; depends only on the seed and step.
pub fn training_batch(data: &TrainData, tc: &TrainConfig, step: u64) -> Result<MaskedBatch, ModelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(tc.seed, 1, step));
    sample_batch(&data.train, data, tc, &mut rng)
}

/// Mean loss parts over a fixed set of held-out batches. Masked accuracy
/// is pooled over all masked tokens.
pub fn evaluate_heldout(
    cfg: &ModelConfig,
    params: &Parameters<f32>,
    data: &TrainData,
    tc: &TrainConfig,
) -> Result<LossParts, ModelError> {
    let windows = if data.heldout.len() >= 2 { &data.heldout } else { &data.train };
    let mut acc = LossParts {
        mgm: 0.0,
        contrastive: 0.0,
        total: 0.0,
        masked_correct: 0,
        n_masked: 0,
        retrieval_acc: 0.0,
    };
    let nb = tc.eval_batches.max(1);
    for b in 0..nb {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(tc.seed, 2, b as u64));
        let batch = sample_batch(windows, data, tc, &mut rng)?;
        let p = total_loss(cfg, params, &batch, tc.tau, tc.lambda)?;
        acc.mgm += p.mgm / nb as f64;
        acc.contrastive += p.contrastive / nb as f64;
        acc.total += p.total / nb as f64;
        acc.masked_correct += p.masked_correct;
        acc.n_masked += p.n_masked;
        acc.retrieval_acc += p.retrieval_acc / nb as f64;
    }
    Ok(acc)
}

const METRICS_HEADER: &str = "step,lr,mgm_loss,con_loss,masked_acc,retrieval_acc";

/// Train from scratch, or from `resume` (a checkpoint directory or root),
/// writing checkpoints under `out/checkpoints` and appending to
/// `out/metrics.csv`.
pub fn train(
    cfg: &ModelConfig,
    tc: &TrainConfig,
    data: &TrainData,
    out: &Path,
    resume: Option<&Path>,
) -> Result<TrainOutcome, ModelError> {
    cfg.validate()?;
    tc.validate()?;
    fs::create_dir_all(out)?;
    let (start, mut params, mut adam) = match resume {
        Some(path) => {
            let ck = load_checkpoint(path)?;
            if ck.config != *cfg {
                return Err(ModelError::Checkpoint("checkpoint config differs from the requested one".into()));
            }
            let adam = ck
                .adam
                .ok_or_else(|| ModelError::Checkpoint("checkpoint has no optimizer state".into()))?;
            (ck.step, ck.params, adam)
        }
        None => {
            let p = Parameters::<f32>::init(cfg, tc.seed);
            let a = AdamState::new(&p);
            (0, p, a)
        }
    };

    let metrics_path = out.join("metrics.csv");
    let mut kept = vec![METRICS_HEADER.to_string()];
    if start > 0 {
        if let Ok(old) = fs::read_to_string(&metrics_path) {
            kept.extend(
                old.lines()
                    .skip(1)
                    .filter(|l| l.split(',').next().and_then(|s| s.parse::<u64>().ok()).is_some_and(|s| s < start))
                    .map(str::to_string),
            );
        }
    }
    let mut metrics = fs::File::create(&metrics_path)?;
    for l in &kept {
        writeln!(metrics, "{l}")?;
    }

    let hp = AdamHyper {
        beta1: tc.beta1,
        beta2: tc.beta2,
        eps: tc.eps,
    };
    let total = tc.total_steps as u64;
    let mut history = Vec::new();
    let ckpt_root = out.join("checkpoints");
    let mut last_ckpt = ckpt_root.clone();
    for step in start..total {
        let batch = training_batch(data, tc, step)?;
        let lr = lr_schedule(step + 1, tc.warmup_steps as u64, tc.lr);
        let dropout_seed = (cfg.dropout > 0.0).then(|| mix(tc.seed, 3, step));
        let (parts, grads) = match loss_and_grad(cfg, &params, &batch, tc.tau, tc.lambda, dropout_seed) {
            Ok(r) => r,
            Err(ModelError::NonFiniteGradient(names)) => {
                let dump = out.join(format!("nonfinite_step_{step}.txt"));
                let mut text = format!("step={step}\nlr={lr}\n");
                for n in &names {
                    text.push_str(&format!("nonfinite_grad={n}\n"));
                }
                for n in params.non_finite() {
                    text.push_str(&format!("nonfinite_param={n}\n"));
                }
                fs::write(&dump, text)?;
                warn!("non-finite gradient at step {step}; diagnostics in {}", dump.display());
                return Err(ModelError::NonFiniteGradient(names));
            }
            Err(e) => return Err(e),
        };
        adam_step(&mut params, &grads, &mut adam, lr, hp)?;
        writeln!(
            metrics,
            "{step},{lr},{},{},{},{}",
            parts.mgm,
            parts.contrastive,
            parts.masked_acc(),
            parts.retrieval_acc
        )?;
        if step % 100 == 0 {
            info!(
                "step {step} lr {lr:.2e} mgm {:.4} con {:.4} acc {:.3} ret {:.3}",
                parts.mgm,
                parts.contrastive,
                parts.masked_acc(),
                parts.retrieval_acc
            );
        }
        history.push((step, lr, parts));
        let done = step + 1;
        if (tc.checkpoint_every > 0 && done % tc.checkpoint_every as u64 == 0) || done == total {
            last_ckpt = save_checkpoint(
                &ckpt_root,
                &Checkpoint {
                    config: cfg.clone(),
                    step: done,
                    params: params.clone(),
                    adam: Some(adam.clone()),
                },
            )?;
        }
    }
    metrics.flush()?;
    Ok(TrainOutcome {
        params,
        adam,
        history,
        checkpoint: last_ckpt,
    })
}
