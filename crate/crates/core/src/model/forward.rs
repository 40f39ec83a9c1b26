//! Forward and backward passes for a single view.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use super::params::{LayerIdx, Layout, Parameters};
use super::tensor::{
    add_bias, gelu, gelu_grad, gemm, layer_norm, layer_norm_backward, matmul, softmax_rows, sum_rows, LnCache, Mat,
    Scalar,
};
use super::ModelError;
use crate::dataset::ViewInputs;

pub(crate) struct EmbedCache<T> {
    sup_in: Vec<T>,
    sup_a1: Vec<T>,
    sup_g1: Vec<T>,
    phys_in: Vec<T>,
}

pub(crate) struct LayerCache<T> {
    ln1: LnCache<T>,
    h1: Vec<T>,
    qkv: Vec<T>,
    probs: Vec<T>,
    att: Vec<T>,
    drop1: Option<Vec<T>>,
    ln2: LnCache<T>,
    h2: Vec<T>,
    a_ff: Vec<T>,
    g_ff: Vec<T>,
    drop2: Option<Vec<T>>,
}

/// Everything the backward pass of one view needs.
pub(crate) struct ViewForward<T> {
    pub len: usize,
    embed: EmbedCache<T>,
    layers: Vec<LayerCache<T>>,
    lnf: LnCache<T>,
    /// Final hidden states, `len x model_dim`.
    pub hidden: Vec<T>,
    c_norm: T,
    /// Normalized form embedding.
    pub z: Vec<T>,
    /// Slots the MGM head was evaluated at.
    pub positions: Vec<usize>,
    /// `positions.len() x vocab_size` logits.
    pub logits: Vec<T>,
}

fn check_ids(name: &'static str, ids: &[u32], size: usize) -> Result<(), ModelError> {
    match ids.iter().find(|&&i| i as usize >= size) {
        Some(&id) => Err(ModelError::IdOutOfRange {
            table: name,
            id,
            size,
        }),
        None => Ok(()),
    }
}

pub(crate) fn validate_inputs(cfg: &ModelConfig, x: &ViewInputs) -> Result<(), ModelError> {
    let n = x.len();
    if n == 0 {
        return Err(ModelError::EmptyView);
    }
    let lens = [
        x.stadium.len(),
        x.position.len(),
        x.pitch_type.len(),
        x.zone.len(),
        x.ab_ordinal.len(),
        x.pitch_ordinal.len(),
    ];
    if lens.iter().any(|l| *l != n)
        || x.supplemental.len() != n * cfg.supplemental_input_dim
        || x.physics.len() != n * cfg.physics_dim
    {
        return Err(ModelError::ShapeMismatch(format!("view inputs inconsistent with {n} slots")));
    }
    check_ids("delta", &x.tokens, cfg.vocab_size)?;
    check_ids("stadium", &x.stadium, cfg.n_stadiums)?;
    check_ids("position", &x.position, cfg.n_positions)?;
    check_ids("pitch_type", &x.pitch_type, cfg.n_pitch_types)?;
    check_ids("zone", &x.zone, cfg.n_plate_zones)?;
    check_ids("ab_ordinal", &x.ab_ordinal, cfg.n_ab_ordinals)?;
    check_ids("pitch_ordinal", &x.pitch_ordinal, cfg.n_pitch_ordinals)?;
    Ok(())
}

fn row<T>(table: &[T], i: u32, width: usize) -> &[T] {
    &table[i as usize * width..(i as usize + 1) * width]
}

fn add_into<T: Scalar>(dst: &mut [T], src: &[T]) {
    for (a, b) in dst.iter_mut().zip(src) {
        *a += *b;
    }
}

pub(crate) fn embed<T: Scalar>(
    cfg: &ModelConfig,
    ly: &Layout,
    p: &Parameters<T>,
    x: &ViewInputs,
) -> (Vec<T>, EmbedCache<T>) {
    let (d, h) = (cfg.model_dim, cfg.half_dim());
    let (s, sh, pd) = (cfg.supplemental_input_dim, cfg.supplemental_hidden_dim, cfg.physics_dim);
    let n = x.len();
    let m = n - 1;
    let mut e = vec![T::zero(); n * d];
    e[..d].copy_from_slice(p.t(ly.cls));

    let sup_in: Vec<T> = x.supplemental[s..].iter().map(|v| T::from_f64(*v as f64)).collect();
    let mut sup_a1 = vec![T::zero(); m * sh];
    matmul(m, s, sh, &sup_in, false, p.t(ly.sup_w1), false, &mut sup_a1, false);
    add_bias(&mut sup_a1, p.t(ly.sup_b1));
    let sup_g1: Vec<T> = sup_a1.iter().map(|v| gelu(*v)).collect();
    let mut other = vec![T::zero(); m * h];
    matmul(m, sh, h, &sup_g1, false, p.t(ly.sup_w2), false, &mut other, false);
    add_bias(&mut other, p.t(ly.sup_b2));

    let phys_in: Vec<T> = x.physics[pd..].iter().map(|v| T::from_f64(*v as f64)).collect();
    matmul(m, pd, h, &phys_in, false, p.t(ly.phys_w), false, &mut other, true);
    add_bias(&mut other, p.t(ly.phys_b));

    for t in 1..n {
        let o = &mut other[(t - 1) * h..t * h];
        add_into(o, row(p.t(ly.stadium), x.stadium[t], h));
        add_into(o, row(p.t(ly.position), x.position[t], h));
        add_into(o, row(p.t(ly.pitch_type), x.pitch_type[t], h));
        add_into(o, row(p.t(ly.zone), x.zone[t], h));
        let et = &mut e[t * d..(t + 1) * d];
        et[..h].copy_from_slice(row(p.t(ly.tok), x.tokens[t], h));
        et[h..].copy_from_slice(o);
        add_into(et, row(p.t(ly.ab_pos), x.ab_ordinal[t], d));
        add_into(et, row(p.t(ly.pitch_pos), x.pitch_ordinal[t], d));
    }
    (
        e,
        EmbedCache {
            sup_in,
            sup_a1,
            sup_g1,
            phys_in,
        },
    )
}

fn embed_backward<T: Scalar>(
    cfg: &ModelConfig,
    ly: &Layout,
    p: &Parameters<T>,
    x: &ViewInputs,
    cache: &EmbedCache<T>,
    de: &[T],
    g: &mut Parameters<T>,
) {
    let (d, h) = (cfg.model_dim, cfg.half_dim());
    let (s, sh, pd) = (cfg.supplemental_input_dim, cfg.supplemental_hidden_dim, cfg.physics_dim);
    let n = x.len();
    let m = n - 1;
    add_into(g.t_mut(ly.cls), &de[..d]);
    let mut d_other = vec![T::zero(); m * h];
    for t in 1..n {
        let dt = &de[t * d..(t + 1) * d];
        let scatter = |g: &mut Parameters<T>, table: usize, id: u32, src: &[T]| {
            let w = src.len();
            add_into(&mut g.t_mut(table)[id as usize * w..(id as usize + 1) * w], src);
        };
        scatter(g, ly.tok, x.tokens[t], &dt[..h]);
        scatter(g, ly.stadium, x.stadium[t], &dt[h..]);
        scatter(g, ly.position, x.position[t], &dt[h..]);
        scatter(g, ly.pitch_type, x.pitch_type[t], &dt[h..]);
        scatter(g, ly.zone, x.zone[t], &dt[h..]);
        scatter(g, ly.ab_pos, x.ab_ordinal[t], dt);
        scatter(g, ly.pitch_pos, x.pitch_ordinal[t], dt);
        d_other[(t - 1) * h..t * h].copy_from_slice(&dt[h..]);
    }
    matmul(pd, m, h, &cache.phys_in, true, &d_other, false, g.t_mut(ly.phys_w), true);
    sum_rows(&d_other, g.t_mut(ly.phys_b));

    matmul(sh, m, h, &cache.sup_g1, true, &d_other, false, g.t_mut(ly.sup_w2), true);
    sum_rows(&d_other, g.t_mut(ly.sup_b2));
    let mut da1 = vec![T::zero(); m * sh];
    matmul(m, h, sh, &d_other, false, p.t(ly.sup_w2), true, &mut da1, false);
    for (dv, a) in da1.iter_mut().zip(&cache.sup_a1) {
        *dv *= gelu_grad(*a);
    }
    matmul(s, m, sh, &cache.sup_in, true, &da1, false, g.t_mut(ly.sup_w1), true);
    sum_rows(&da1, g.t_mut(ly.sup_b1));
}

fn dropout_mask<T: Scalar>(n: usize, rate: f64, rng: &mut ChaCha8Rng) -> Vec<T> {
    let keep = T::from_f64(1.0 / (1.0 - rate));
    (0..n)
        .map(|_| if rng.gen_bool(rate) { T::zero() } else { keep })
        .collect()
}

pub(crate) fn layer_forward<T: Scalar>(
    cfg: &ModelConfig,
    li: &LayerIdx,
    p: &Parameters<T>,
    x: &mut [T],
    key_mask: Option<&[bool]>,
    dropout: Option<(f64, &mut ChaCha8Rng)>,
) -> LayerCache<T> {
    let (d, f, nh, dh) = (cfg.model_dim, cfg.feedforward_dim, cfg.heads, cfg.head_dim());
    let n = x.len() / d;
    let (h1, ln1) = layer_norm(x, d, p.t(li.ln1_g), p.t(li.ln1_b));
    let mut qkv = vec![T::zero(); n * 3 * d];
    matmul(n, d, 3 * d, &h1, false, p.t(li.w_qkv), false, &mut qkv, false);
    add_bias(&mut qkv, p.t(li.b_qkv));

    let scale = T::one() / T::from_f64(dh as f64).sqrt();
    let mut probs = vec![T::zero(); nh * n * n];
    let mut att = vec![T::zero(); n * d];
    for hh in 0..nh {
        let s = &mut probs[hh * n * n..(hh + 1) * n * n];
        let q = Mat { off: hh * dh, rs: 3 * d, cs: 1 };
        let kt = Mat { off: d + hh * dh, rs: 1, cs: 3 * d };
        gemm(n, dh, n, scale, &qkv, q, &qkv, kt, T::zero(), s, Mat::rm(n, false));
        if let Some(mask) = key_mask {
            for i in 0..n {
                for j in 0..n {
                    if !mask[j] {
                        s[i * n + j] = T::neg_infinity();
                    }
                }
            }
        }
        softmax_rows(s, n);
        let v = Mat { off: 2 * d + hh * dh, rs: 3 * d, cs: 1 };
        let out = Mat { off: hh * dh, rs: d, cs: 1 };
        gemm(n, n, dh, T::one(), s, Mat::rm(n, false), &qkv, v, T::zero(), &mut att, out);
    }
    let mut o = vec![T::zero(); n * d];
    matmul(n, d, d, &att, false, p.t(li.w_o), false, &mut o, false);
    add_bias(&mut o, p.t(li.b_o));
    let (drop1, drop2) = match dropout {
        Some((rate, rng)) if rate > 0.0 => (
            Some(dropout_mask::<T>(n * d, rate, rng)),
            Some(dropout_mask::<T>(n * d, rate, rng)),
        ),
        _ => (None, None),
    };
    if let Some(m) = &drop1 {
        o.iter_mut().zip(m).for_each(|(v, k)| *v *= *k);
    }
    add_into(x, &o);

    let (h2, ln2) = layer_norm(x, d, p.t(li.ln2_g), p.t(li.ln2_b));
    let mut a_ff = vec![T::zero(); n * f];
    matmul(n, d, f, &h2, false, p.t(li.w_ff1), false, &mut a_ff, false);
    add_bias(&mut a_ff, p.t(li.b_ff1));
    let g_ff: Vec<T> = a_ff.iter().map(|v| gelu(*v)).collect();
    let mut ff = vec![T::zero(); n * d];
    matmul(n, f, d, &g_ff, false, p.t(li.w_ff2), false, &mut ff, false);
    add_bias(&mut ff, p.t(li.b_ff2));
    if let Some(m) = &drop2 {
        ff.iter_mut().zip(m).for_each(|(v, k)| *v *= *k);
    }
    add_into(x, &ff);
    LayerCache {
        ln1,
        h1,
        qkv,
        probs,
        att,
        drop1,
        ln2,
        h2,
        a_ff,
        g_ff,
        drop2,
    }
}

/// Takes the gradient w.r.t. the layer output, returns it w.r.t. the input.
fn layer_backward<T: Scalar>(
    cfg: &ModelConfig,
    li: &LayerIdx,
    p: &Parameters<T>,
    c: &LayerCache<T>,
    dy: Vec<T>,
    g: &mut Parameters<T>,
) -> Vec<T> {
    let (d, f, nh, dh) = (cfg.model_dim, cfg.feedforward_dim, cfg.heads, cfg.head_dim());
    let n = dy.len() / d;
    let mut dx2 = dy;

    let mut dff = dx2.clone();
    if let Some(m) = &c.drop2 {
        dff.iter_mut().zip(m).for_each(|(v, k)| *v *= *k);
    }
    matmul(f, n, d, &c.g_ff, true, &dff, false, g.t_mut(li.w_ff2), true);
    sum_rows(&dff, g.t_mut(li.b_ff2));
    let mut da = vec![T::zero(); n * f];
    matmul(n, d, f, &dff, false, p.t(li.w_ff2), true, &mut da, false);
    for (v, a) in da.iter_mut().zip(&c.a_ff) {
        *v *= gelu_grad(*a);
    }
    matmul(d, n, f, &c.h2, true, &da, false, g.t_mut(li.w_ff1), true);
    sum_rows(&da, g.t_mut(li.b_ff1));
    let mut dh2 = vec![T::zero(); n * d];
    matmul(n, f, d, &da, false, p.t(li.w_ff1), true, &mut dh2, false);
    let (g2, b2) = (li.ln2_g, li.ln2_b);
    let (mut dg2, mut db2) = (vec![T::zero(); d], vec![T::zero(); d]);
    let dx_ln2 = layer_norm_backward(&dh2, d, p.t(g2), &c.ln2, &mut dg2, &mut db2);
    add_into(g.t_mut(g2), &dg2);
    add_into(g.t_mut(b2), &db2);
    add_into(&mut dx2, &dx_ln2);

    let mut d_o = dx2.clone();
    if let Some(m) = &c.drop1 {
        d_o.iter_mut().zip(m).for_each(|(v, k)| *v *= *k);
    }
    matmul(d, n, d, &c.att, true, &d_o, false, g.t_mut(li.w_o), true);
    sum_rows(&d_o, g.t_mut(li.b_o));
    let mut datt = vec![T::zero(); n * d];
    matmul(n, d, d, &d_o, false, p.t(li.w_o), true, &mut datt, false);

    let scale = T::one() / T::from_f64(dh as f64).sqrt();
    let mut dqkv = vec![T::zero(); n * 3 * d];
    let mut dp = vec![T::zero(); n * n];
    for hh in 0..nh {
        let pr = &c.probs[hh * n * n..(hh + 1) * n * n];
        let datt_h = Mat { off: hh * dh, rs: d, cs: 1 };
        // dP = dAtt_h V_h^T
        let vt = Mat { off: 2 * d + hh * dh, rs: 1, cs: 3 * d };
        gemm(n, dh, n, T::one(), &datt, datt_h, &c.qkv, vt, T::zero(), &mut dp, Mat::rm(n, false));
        // dV_h = P^T dAtt_h
        let dv = Mat { off: 2 * d + hh * dh, rs: 3 * d, cs: 1 };
        gemm(n, n, dh, T::one(), pr, Mat::rm(n, true), &datt, datt_h, T::zero(), &mut dqkv, dv);
        for i in 0..n {
            let r = &mut dp[i * n..(i + 1) * n];
            let pi = &pr[i * n..(i + 1) * n];
            let dot: T = r.iter().zip(pi).map(|(a, b)| *a * *b).sum();
            for (v, pv) in r.iter_mut().zip(pi) {
                *v = *pv * (*v - dot) * scale;
            }
        }
        // dQ_h = dS K_h, dK_h = dS^T Q_h
        let k = Mat { off: d + hh * dh, rs: 3 * d, cs: 1 };
        let dq = Mat { off: hh * dh, rs: 3 * d, cs: 1 };
        gemm(n, n, dh, T::one(), &dp, Mat::rm(n, false), &c.qkv, k, T::zero(), &mut dqkv, dq);
        let q = Mat { off: hh * dh, rs: 3 * d, cs: 1 };
        let dk = Mat { off: d + hh * dh, rs: 3 * d, cs: 1 };
        gemm(n, n, dh, T::one(), &dp, Mat::rm(n, true), &c.qkv, q, T::zero(), &mut dqkv, dk);
    }
    matmul(d, n, 3 * d, &c.h1, true, &dqkv, false, g.t_mut(li.w_qkv), true);
    sum_rows(&dqkv, g.t_mut(li.b_qkv));
    let mut dh1 = vec![T::zero(); n * d];
    matmul(n, 3 * d, d, &dqkv, false, p.t(li.w_qkv), true, &mut dh1, false);
    let (g1, b1) = (li.ln1_g, li.ln1_b);
    let (mut dg1, mut db1) = (vec![T::zero(); d], vec![T::zero(); d]);
    let dx_ln1 = layer_norm_backward(&dh1, d, p.t(g1), &c.ln1, &mut dg1, &mut db1);
    add_into(g.t_mut(g1), &dg1);
    add_into(g.t_mut(b1), &db1);
    add_into(&mut dx2, &dx_ln1);
    dx2
}

/// Full forward pass of one view: embedding, encoder, final norm, the
/// contrastive projection and the MGM head at `positions`.
pub(crate) fn view_forward<T: Scalar>(
    cfg: &ModelConfig,
    ly: &Layout,
    p: &Parameters<T>,
    x: &ViewInputs,
    positions: &[usize],
    dropout_seed: Option<u64>,
) -> ViewForward<T> {
    let d = cfg.model_dim;
    let n = x.len();
    let (mut h, embed_cache) = embed(cfg, ly, p, x);
    let mut rng = dropout_seed.map(ChaCha8Rng::seed_from_u64);
    let layers = ly
        .layers
        .iter()
        .map(|li| {
            let drop = match rng.as_mut() {
                Some(r) if cfg.dropout > 0.0 => Some((cfg.dropout, r)),
                _ => None,
            };
            layer_forward(cfg, li, p, &mut h, None, drop)
        })
        .collect();
    let (hidden, lnf) = layer_norm(&h, d, p.t(ly.lnf_g), p.t(ly.lnf_b));

    let fd = cfg.form_dim;
    let mut c = p.t(ly.con_b).to_vec();
    matmul(1, d, fd, &hidden[..d], false, p.t(ly.con_w), false, &mut c, true);
    let c_norm = c.iter().map(|v| *v * *v).sum::<T>().sqrt();
    let z = c.iter().map(|v| *v / c_norm).collect();

    let v = cfg.vocab_size;
    let mut gathered = vec![T::zero(); positions.len() * d];
    for (i, &pos) in positions.iter().enumerate() {
        gathered[i * d..(i + 1) * d].copy_from_slice(&hidden[pos * d..(pos + 1) * d]);
    }
    let mut logits = vec![T::zero(); positions.len() * v];
    matmul(positions.len(), d, v, &gathered, false, p.t(ly.mgm_w), false, &mut logits, false);
    add_bias(&mut logits, p.t(ly.mgm_b));
    ViewForward {
        len: n,
        embed: embed_cache,
        layers,
        lnf,
        hidden,
        c_norm,
        z,
        positions: positions.to_vec(),
        logits,
    }
}

/// Gradients of one view given the loss gradients w.r.t. its MGM logits
/// and its normalized form embedding.
pub(crate) fn view_backward<T: Scalar>(
    cfg: &ModelConfig,
    ly: &Layout,
    p: &Parameters<T>,
    x: &ViewInputs,
    fwd: &ViewForward<T>,
    dlogits: &[T],
    dz: &[T],
    g: &mut Parameters<T>,
) {
    let (d, v, fd) = (cfg.model_dim, cfg.vocab_size, cfg.form_dim);
    let n = fwd.len;
    let m = fwd.positions.len();
    let mut dh = vec![T::zero(); n * d];

    let mut gathered = vec![T::zero(); m * d];
    for (i, &pos) in fwd.positions.iter().enumerate() {
        gathered[i * d..(i + 1) * d].copy_from_slice(&fwd.hidden[pos * d..(pos + 1) * d]);
    }
    matmul(d, m, v, &gathered, true, dlogits, false, g.t_mut(ly.mgm_w), true);
    sum_rows(dlogits, g.t_mut(ly.mgm_b));
    let mut dg = vec![T::zero(); m * d];
    matmul(m, v, d, dlogits, false, p.t(ly.mgm_w), true, &mut dg, false);
    for (i, &pos) in fwd.positions.iter().enumerate() {
        add_into(&mut dh[pos * d..(pos + 1) * d], &dg[i * d..(i + 1) * d]);
    }

    let zdz: T = fwd.z.iter().zip(dz).map(|(a, b)| *a * *b).sum();
    let dc: Vec<T> = fwd
        .z
        .iter()
        .zip(dz)
        .map(|(zi, di)| (*di - *zi * zdz) / fwd.c_norm)
        .collect();
    matmul(d, 1, fd, &fwd.hidden[..d], true, &dc, false, g.t_mut(ly.con_w), true);
    add_into(g.t_mut(ly.con_b), &dc);
    matmul(1, fd, d, &dc, false, p.t(ly.con_w), true, &mut dh[..d], true);

    let (mut dgf, mut dbf) = (vec![T::zero(); d], vec![T::zero(); d]);
    let mut dx = layer_norm_backward(&dh, d, p.t(ly.lnf_g), &fwd.lnf, &mut dgf, &mut dbf);
    add_into(g.t_mut(ly.lnf_g), &dgf);
    add_into(g.t_mut(ly.lnf_b), &dbf);
    for (li, cache) in ly.layers.iter().zip(&fwd.layers).rev() {
        dx = layer_backward(cfg, li, p, cache, dx, g);
    }
    embed_backward(cfg, ly, p, x, &fwd.embed, &dx, g);
}
