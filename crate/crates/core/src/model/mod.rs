//! Transformer encoder over delta-token sequences, its two training
//! objectives, the optimizer and checkpoints.
//!
//! The model is written out by hand with an explicit backward pass so it
//! runs in either 32- or 64-bit floats.

mod checkpoint;
mod config;
mod forward;
mod loss;
mod optim;
mod params;
mod tensor;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use config::{ModelConfig, TrainConfig, FORM_DIM};
pub use loss::{check_pairing, contrastive_loss, mgm_loss, retrieval_accuracy};
pub use optim::{adam_step, lr_schedule, AdamHyper, AdamState};
pub use params::{Parameters, Tensor};
pub use tensor::Scalar;
pub use train::{evaluate_heldout, train, training_batch, TrainData, TrainOutcome};

use rayon::prelude::*;
use thiserror::Error;

use crate::dataset::{MaskedBatch, ViewInputs};
use params::layout;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{table} id {id} outside table of {size}")]
    IdOutOfRange { table: &'static str, id: u32, size: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("no masked positions")]
    NoMaskedPositions,
    #[error("pairing is not a fixed-point-free involution at index {0}")]
    BadPairing(usize),
    #[error("non-finite gradient in {0:?}")]
    NonFiniteGradient(Vec<String>),
    #[error("bad config: {0}")]
    BadConfig(String),
    #[error("empty view")]
    EmptyView,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Dataset(#[from] crate::dataset::DatasetError),
}

/// Embedded input sequence of a view, `len x model_dim` row-major.
pub fn embed_inputs<T: Scalar>(cfg: &ModelConfig, params: &Parameters<T>, view: &ViewInputs) -> Result<Vec<T>, ModelError> {
    forward::validate_inputs(cfg, view)?;
    Ok(forward::embed(cfg, &layout(cfg), params, view).0)
}

/// Run the encoder stack over embedded inputs. Slots whose `attention_mask`
/// entry is false are never attended to. No final normalization.
pub fn encode<T: Scalar>(
    cfg: &ModelConfig,
    params: &Parameters<T>,
    inputs: &[T],
    attention_mask: Option<&[bool]>,
) -> Result<Vec<T>, ModelError> {
    let d = cfg.model_dim;
    if !inputs.len().is_multiple_of(d) || attention_mask.is_some_and(|m| m.len() * d != inputs.len()) {
        return Err(ModelError::ShapeMismatch("inputs and mask disagree".into()));
    }
    let ly = layout(cfg);
    let mut h = inputs.to_vec();
    for li in &ly.layers {
        forward::layer_forward(cfg, li, params, &mut h, attention_mask, None);
    }
    Ok(h)
}

/// L2-normalized form embedding of an unmasked view.
pub fn form_embedding<T: Scalar>(cfg: &ModelConfig, params: &Parameters<T>, view: &ViewInputs) -> Result<Vec<T>, ModelError> {
    forward::validate_inputs(cfg, view)?;
    Ok(forward::view_forward(cfg, &layout(cfg), params, view, &[], None).z)
}

/// Loss components and accuracies of one batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub mgm: f64,
    pub contrastive: f64,
    pub total: f64,
    pub masked_correct: usize,
    pub n_masked: usize,
    pub retrieval_acc: f64,
}

impl LossParts {
    pub fn masked_acc(&self) -> f64 {
        self.masked_correct as f64 / self.n_masked.max(1) as f64
    }
}

fn batch_forward<T: Scalar>(
    cfg: &ModelConfig,
    params: &Parameters<T>,
    batch: &MaskedBatch,
    dropout_seed: Option<u64>,
) -> Result<Vec<forward::ViewForward<T>>, ModelError> {
    check_pairing(&batch.pairing)?;
    if batch.n_masked() == 0 {
        return Err(ModelError::NoMaskedPositions);
    }
    for v in &batch.views {
        forward::validate_inputs(cfg, &v.inputs)?;
    }
    let ly = layout(cfg);
    Ok(batch
        .views
        .par_iter()
        .enumerate()
        .map(|(i, v)| {
            let seed = dropout_seed.map(|s| s.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64));
            forward::view_forward(cfg, &ly, params, &v.inputs, &v.positions, seed)
        })
        .collect())
}

struct Heads<T> {
    parts: LossParts,
    dlogits: Vec<Vec<T>>,
    dz: Vec<Vec<T>>,
}

fn heads<T: Scalar>(
    cfg: &ModelConfig,
    batch: &MaskedBatch,
    fwds: &[forward::ViewForward<T>],
    tau: f64,
    lambda: f64,
) -> Result<Heads<T>, ModelError> {
    let n_masked = batch.n_masked();
    let m = T::from_f64(n_masked as f64);
    let mut mgm_sum = T::zero();
    let mut correct = 0;
    let mut dlogits = Vec::with_capacity(fwds.len());
    for (f, v) in fwds.iter().zip(&batch.views) {
        let (l, mut g, c) = loss::cross_entropy_sum(&f.logits, cfg.vocab_size, &v.targets);
        mgm_sum += l;
        correct += c;
        g.iter_mut().for_each(|x| *x /= m);
        dlogits.push(g);
    }
    let z: Vec<Vec<T>> = fwds.iter().map(|f| f.z.clone()).collect();
    let (con, mut dz) = contrastive_loss(&z, &batch.pairing, T::from_f64(tau))?;
    let lam = T::from_f64(lambda);
    dz.iter_mut().flatten().for_each(|x| *x *= lam);
    let mgm = (mgm_sum / m).as_f64();
    let contrastive = con.as_f64();
    Ok(Heads {
        parts: LossParts {
            mgm,
            contrastive,
            total: mgm + lambda * contrastive,
            masked_correct: correct,
            n_masked,
            retrieval_acc: retrieval_accuracy(&z, &batch.pairing),
        },
        dlogits,
        dz,
    })
}

/// `L_MGM + lambda * L_contrastive` over a batch, with accuracies.
pub fn total_loss<T: Scalar>(
    cfg: &ModelConfig,
    params: &Parameters<T>,
    batch: &MaskedBatch,
    tau: f64,
    lambda: f64,
) -> Result<LossParts, ModelError> {
    let fwds = batch_forward(cfg, params, batch, None)?;
    Ok(heads(cfg, batch, &fwds, tau, lambda)?.parts)
}

/// Loss and gradients for every parameter. Views are processed in
/// parallel; per-view gradients are summed in view order so the result
/// does not depend on scheduling.
pub fn loss_and_grad<T: Scalar>(
    cfg: &ModelConfig,
    params: &Parameters<T>,
    batch: &MaskedBatch,
    tau: f64,
    lambda: f64,
    dropout_seed: Option<u64>,
) -> Result<(LossParts, Parameters<T>), ModelError> {
    let fwds = batch_forward(cfg, params, batch, dropout_seed)?;
    let h = heads(cfg, batch, &fwds, tau, lambda)?;
    let ly = layout(cfg);
    let chunk = rayon::current_num_threads().max(1);
    let mut grads = params.zeros_like();
    let idx: Vec<usize> = (0..fwds.len()).collect();
    for group in idx.chunks(chunk) {
        let partial: Vec<Parameters<T>> = group
            .par_iter()
            .map(|&i| {
                let mut g = params.zeros_like();
                forward::view_backward(
                    cfg,
                    &ly,
                    params,
                    &batch.views[i].inputs,
                    &fwds[i],
                    &h.dlogits[i],
                    &h.dz[i],
                    &mut g,
                );
                g
            })
            .collect();
        for g in &partial {
            grads.add_assign(g);
        }
    }
    let bad = grads.non_finite();
    if !bad.is_empty() {
        return Err(ModelError::NonFiniteGradient(bad));
    }
    Ok((h.parts, grads))
}
