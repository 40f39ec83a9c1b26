use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::ModelConfig;
use super::tensor::Scalar;

/// Indices of one encoder layer's tensors.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LayerIdx {
    pub ln1_g: usize,
    pub ln1_b: usize,
    pub w_qkv: usize,
    pub b_qkv: usize,
    pub w_o: usize,
    pub b_o: usize,
    pub ln2_g: usize,
    pub ln2_b: usize,
    pub w_ff1: usize,
    pub b_ff1: usize,
    pub w_ff2: usize,
    pub b_ff2: usize,
}

/// Positions of every named tensor in [`Parameters::tensors`].
#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub tok: usize,
    pub cls: usize,
    pub stadium: usize,
    pub position: usize,
    pub pitch_type: usize,
    pub zone: usize,
    pub ab_pos: usize,
    pub pitch_pos: usize,
    pub sup_w1: usize,
    pub sup_b1: usize,
    pub sup_w2: usize,
    pub sup_b2: usize,
    pub phys_w: usize,
    pub phys_b: usize,
    pub layers: Vec<LayerIdx>,
    pub lnf_g: usize,
    pub lnf_b: usize,
    pub mgm_w: usize,
    pub mgm_b: usize,
    pub con_w: usize,
    pub con_b: usize,
}

#[derive(Clone, Copy, PartialEq)]
enum Init {
    Normal,
    Zeros,
    Ones,
}

fn specs(cfg: &ModelConfig) -> (Vec<(String, Vec<usize>, Init)>, Layout) {
    let (d, h, f) = (cfg.model_dim, cfg.half_dim(), cfg.feedforward_dim);
    let mut v: Vec<(String, Vec<usize>, Init)> = Vec::new();
    let mut add = |name: String, shape: Vec<usize>, init: Init| {
        v.push((name, shape, init));
        v.len() - 1
    };
    let tok = add("emb.delta".into(), vec![cfg.vocab_size, h], Init::Normal);
    let cls = add("emb.cls".into(), vec![d], Init::Normal);
    let stadium = add("emb.stadium".into(), vec![cfg.n_stadiums, h], Init::Normal);
    let position = add("emb.position".into(), vec![cfg.n_positions, h], Init::Normal);
    let pitch_type = add("emb.pitch_type".into(), vec![cfg.n_pitch_types, h], Init::Normal);
    let zone = add("emb.zone".into(), vec![cfg.n_plate_zones, h], Init::Normal);
    let ab_pos = add("emb.ab_ordinal".into(), vec![cfg.n_ab_ordinals, d], Init::Normal);
    let pitch_pos = add("emb.pitch_ordinal".into(), vec![cfg.n_pitch_ordinals, d], Init::Normal);
    let sh = cfg.supplemental_hidden_dim;
    let sup_w1 = add("sup.w1".into(), vec![cfg.supplemental_input_dim, sh], Init::Normal);
    let sup_b1 = add("sup.b1".into(), vec![sh], Init::Zeros);
    let sup_w2 = add("sup.w2".into(), vec![sh, h], Init::Normal);
    let sup_b2 = add("sup.b2".into(), vec![h], Init::Zeros);
    let phys_w = add("phys.w".into(), vec![cfg.physics_dim, h], Init::Normal);
    let phys_b = add("phys.b".into(), vec![h], Init::Zeros);
    let mut layers = Vec::new();
    for l in 0..cfg.layers {
        let p = |s: &str| format!("layer{l}.{s}");
        layers.push(LayerIdx {
            ln1_g: add(p("ln1.g"), vec![d], Init::Ones),
            ln1_b: add(p("ln1.b"), vec![d], Init::Zeros),
            w_qkv: add(p("attn.w_qkv"), vec![d, 3 * d], Init::Normal),
            b_qkv: add(p("attn.b_qkv"), vec![3 * d], Init::Zeros),
            w_o: add(p("attn.w_o"), vec![d, d], Init::Normal),
            b_o: add(p("attn.b_o"), vec![d], Init::Zeros),
            ln2_g: add(p("ln2.g"), vec![d], Init::Ones),
            ln2_b: add(p("ln2.b"), vec![d], Init::Zeros),
            w_ff1: add(p("ff.w1"), vec![d, f], Init::Normal),
            b_ff1: add(p("ff.b1"), vec![f], Init::Zeros),
            w_ff2: add(p("ff.w2"), vec![f, d], Init::Normal),
            b_ff2: add(p("ff.b2"), vec![d], Init::Zeros),
        });
    }
    let lnf_g = add("final_ln.g".into(), vec![d], Init::Ones);
    let lnf_b = add("final_ln.b".into(), vec![d], Init::Zeros);
    let mgm_w = add("mgm.w".into(), vec![d, cfg.vocab_size], Init::Normal);
    let mgm_b = add("mgm.b".into(), vec![cfg.vocab_size], Init::Zeros);
    let con_w = add("contrastive.w".into(), vec![d, cfg.form_dim], Init::Normal);
    let con_b = add("contrastive.b".into(), vec![cfg.form_dim], Init::Zeros);
    let layout = Layout {
        tok,
        cls,
        stadium,
        position,
        pitch_type,
        zone,
        ab_pos,
        pitch_pos,
        sup_w1,
        sup_b1,
        sup_w2,
        sup_b2,
        phys_w,
        phys_b,
        layers,
        lnf_g,
        lnf_b,
        mgm_w,
        mgm_b,
        con_w,
        con_b,
    };
    (v, layout)
}

/// One named parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

/// All weights of one encoder, in a fixed order derived from the config.
/// Gradients and optimizer moments use the same structure.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters<T> {
    pub tensors: Vec<Tensor<T>>,
}

impl<T: Scalar> Parameters<T> {
    /// Normal(0, 0.02) weights and embeddings, unit layer-norm gains,
    /// zero biases.
    pub fn init(cfg: &ModelConfig, seed: u64) -> Parameters<T> {
        let (specs, _) = specs(cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 0.02).expect("valid normal");
        let tensors = specs
            .into_iter()
            .map(|(name, shape, init)| {
                let n = shape.iter().product();
                let data = match init {
                    Init::Normal => (0..n).map(|_| T::from_f64(normal.sample(&mut rng))).collect(),
                    Init::Zeros => vec![T::zero(); n],
                    Init::Ones => vec![T::one(); n],
                };
                Tensor { name, shape, data }
            })
            .collect();
        Parameters { tensors }
    }

    pub fn zeros_like(&self) -> Parameters<T> {
        Parameters {
            tensors: self
                .tensors
                .iter()
                .map(|t| Tensor {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                    data: vec![T::zero(); t.data.len()],
                })
                .collect(),
        }
    }

    pub fn n_values(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.tensors.iter_mut().find(|t| t.name == name)
    }

    pub(crate) fn t(&self, i: usize) -> &[T] {
        &self.tensors[i].data
    }

    pub(crate) fn t_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.tensors[i].data
    }

    pub fn add_assign(&mut self, other: &Parameters<T>) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.data.iter_mut().zip(&b.data) {
                *x += *y;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    /// Names of tensors holding a non-finite value.
    pub fn non_finite(&self) -> Vec<String> {
        self.tensors
            .iter()
            .filter(|t| t.data.iter().any(|v| !v.is_finite()))
            .map(|t| t.name.clone())
            .collect()
    }

    pub fn cast<U: Scalar>(&self) -> Parameters<U> {
        Parameters {
            tensors: self
                .tensors
                .iter()
                .map(|t| Tensor {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                    data: t.data.iter().map(|v| U::from_f64(v.as_f64())).collect(),
                })
                .collect(),
        }
    }

    /// Whether the tensor names and shapes match what `cfg` implies.
    pub fn matches(&self, cfg: &ModelConfig) -> bool {
        let (specs, _) = specs(cfg);
        specs.len() == self.tensors.len()
            && specs
                .iter()
                .zip(&self.tensors)
                .all(|((n, s, _), t)| *n == t.name && *s == t.shape && t.data.len() == s.iter().product())
    }
}

pub(crate) fn layout(cfg: &ModelConfig) -> Layout {
    specs(cfg).1
}
