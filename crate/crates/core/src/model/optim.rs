use super::params::Parameters;
use super::tensor::Scalar;
use super::ModelError;

/// First and second moment estimates and the number of updates applied.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Parameters<T>,
    pub v: Parameters<T>,
    pub step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &Parameters<T>) -> AdamState<T> {
        AdamState {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Linear ramp from 0 to `base_lr` over `warmup` steps, then constant.
pub fn lr_schedule(step: u64, warmup: u64, base_lr: f64) -> f64 {
    if warmup == 0 || step >= warmup {
        base_lr
    } else {
        base_lr * step as f64 / warmup as f64
    }
}

/// One bias-corrected Adam update with learning rate `lr`.
pub fn adam_step<T: Scalar>(
    params: &mut Parameters<T>,
    grads: &Parameters<T>,
    state: &mut AdamState<T>,
    lr: f64,
    hp: AdamHyper,
) -> Result<(), ModelError> {
    let same = |a: &Parameters<T>| {
        a.tensors.len() == params.tensors.len()
            && a.tensors.iter().zip(&params.tensors).all(|(x, y)| x.shape == y.shape)
    };
    if !same(grads) || !same(&state.m) || !same(&state.v) {
        return Err(ModelError::ShapeMismatch("parameters, gradients and moments differ".into()));
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (T::from_f64(hp.beta1), T::from_f64(hp.beta2));
    let c1 = T::from_f64(1.0 - hp.beta1.powi(t));
    let c2 = T::from_f64(1.0 - hp.beta2.powi(t));
    let (lr, eps) = (T::from_f64(lr), T::from_f64(hp.eps));
    let one = T::one();
    for (((p, g), m), v) in params
        .tensors
        .iter_mut()
        .zip(&grads.tensors)
        .zip(&mut state.m.tensors)
        .zip(&mut state.v.tensors)
    {
        for i in 0..p.data.len() {
            let gi = g.data[i];
            m.data[i] = b1 * m.data[i] + (one - b1) * gi;
            v.data[i] = b2 * v.data[i] + (one - b2) * gi * gi;
            let mhat = m.data[i] / c1;
            let vhat = v.data[i] / c2;
            p.data[i] -= lr * mhat / (vhat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::params::Tensor;

    fn scalar(v: f64) -> Parameters<f64> {
        Parameters {
            tensors: vec![Tensor {
                name: "x".into(),
                shape: vec![1],
                data: vec![v],
            }],
        }
    }

    #[test]
    fn schedule_shape() {
        assert_eq!(lr_schedule(0, 7500, 5e-4), 0.0);
        assert_eq!(lr_schedule(7500, 7500, 5e-4), 5e-4);
        assert_eq!(lr_schedule(3750, 7500, 5e-4), 2.5e-4);
        assert_eq!(lr_schedule(90_000, 7500, 5e-4), 5e-4);
    }

    #[test]
    fn zero_gradient_keeps_parameter() {
        let mut p = scalar(0.7);
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &scalar(0.0), &mut s, 1e-3, AdamHyper::default()).unwrap();
        assert_eq!(p.tensors[0].data[0], 0.7);
        assert_eq!(s.step, 1);
    }
}
