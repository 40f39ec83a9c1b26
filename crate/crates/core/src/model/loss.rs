use super::tensor::Scalar;
use super::ModelError;

/// Sum of cross-entropies of `logits` rows against `targets`, with the
/// gradient of that sum (softmax minus one-hot) and the number of rows
/// whose argmax is the target.
pub(crate) fn cross_entropy_sum<T: Scalar>(logits: &[T], n_classes: usize, targets: &[u32]) -> (T, Vec<T>, usize) {
    let mut grad = logits.to_vec();
    let mut loss = T::zero();
    let mut correct = 0;
    for (row, &t) in grad.chunks_mut(n_classes).zip(targets) {
        let mut best = 0;
        for (j, v) in row.iter().enumerate() {
            if *v > row[best] {
                best = j;
            }
        }
        correct += (best == t as usize) as usize;
        let max = row[best];
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
        loss -= row[t as usize].ln();
        row[t as usize] -= T::one();
    }
    (loss, grad, correct)
}

/// Mean cross-entropy over masked positions and its gradient w.r.t. the
/// logits (`targets.len() x n_classes`, row-major).
pub fn mgm_loss<T: Scalar>(logits: &[T], n_classes: usize, targets: &[u32]) -> Result<(T, Vec<T>), ModelError> {
    if targets.is_empty() {
        return Err(ModelError::NoMaskedPositions);
    }
    if logits.len() != targets.len() * n_classes {
        return Err(ModelError::ShapeMismatch(format!(
            "{} logits for {} targets of {n_classes} classes",
            logits.len(),
            targets.len()
        )));
    }
    if let Some(&t) = targets.iter().find(|&&t| t as usize >= n_classes) {
        return Err(ModelError::IdOutOfRange {
            table: "target",
            id: t,
            size: n_classes,
        });
    }
    let (sum, mut grad, _) = cross_entropy_sum(logits, n_classes, targets);
    let m = T::from_f64(targets.len() as f64);
    grad.iter_mut().for_each(|g| *g /= m);
    Ok((sum / m, grad))
}

/// Whether `pairing` is an involution without fixed points.
pub fn check_pairing(pairing: &[usize]) -> Result<(), ModelError> {
    let n = pairing.len();
    for (i, &j) in pairing.iter().enumerate() {
        if j >= n || j == i || pairing[j] != i {
            return Err(ModelError::BadPairing(i));
        }
    }
    Ok(())
}

/// Sum over anchors `i` of
/// `-log(exp(z_i . z_j(i) / tau) / sum_{a != i} exp(z_i . z_a / tau))`,
/// with the gradient w.r.t. every `z_i`.
pub fn contrastive_loss<T: Scalar>(z: &[Vec<T>], pairing: &[usize], tau: T) -> Result<(T, Vec<Vec<T>>), ModelError> {
    if z.len() != pairing.len() {
        return Err(ModelError::ShapeMismatch(format!(
            "{} embeddings, pairing of {}",
            z.len(),
            pairing.len()
        )));
    }
    check_pairing(pairing)?;
    let n = z.len();
    let dot = |a: &[T], b: &[T]| a.iter().zip(b).map(|(x, y)| *x * *y).sum::<T>();
    let mut sim = vec![T::zero(); n * n];
    for i in 0..n {
        for a in 0..n {
            sim[i * n + a] = dot(&z[i], &z[a]) / tau;
        }
    }
    // p[i][a]: softmax over a != i of row i
    let mut prob = vec![T::zero(); n * n];
    let mut loss = T::zero();
    for i in 0..n {
        let row = &sim[i * n..(i + 1) * n];
        let max = (0..n).filter(|a| *a != i).map(|a| row[a]).fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for a in (0..n).filter(|a| *a != i) {
            let e = (row[a] - max).exp();
            prob[i * n + a] = e;
            sum += e;
        }
        for a in (0..n).filter(|a| *a != i) {
            prob[i * n + a] /= sum;
        }
        loss += max + sum.ln() - row[pairing[i]];
    }
    let dim = z.first().map(Vec::len).unwrap_or(0);
    let two = T::from_f64(2.0);
    let grads = (0..n)
        .map(|i| {
            let mut g = vec![T::zero(); dim];
            for a in (0..n).filter(|a| *a != i) {
                let mut w = prob[i * n + a] + prob[a * n + i];
                if a == pairing[i] {
                    w -= two;
                }
                for (gk, zk) in g.iter_mut().zip(&z[a]) {
                    *gk += w * *zk / tau;
                }
            }
            g
        })
        .collect();
    Ok((loss, grads))
}

/// Fraction of anchors whose most similar other embedding is their pair.
pub fn retrieval_accuracy<T: Scalar>(z: &[Vec<T>], pairing: &[usize]) -> f64 {
    let n = z.len();
    if n < 2 {
        return 0.0;
    }
    let dot = |a: &[T], b: &[T]| a.iter().zip(b).map(|(x, y)| *x * *y).sum::<T>();
    let hits = (0..n)
        .filter(|&i| {
            let best = (0..n)
                .filter(|a| *a != i)
                .max_by(|&a, &b| {
                    dot(&z[i], &z[a])
                        .partial_cmp(&dot(&z[i], &z[b]))
                        .unwrap_or(std::cmp::Ordering::Equal)
                        .then(b.cmp(&a))
                })
                .unwrap();
            best == pairing[i]
        })
        .count();
    hits as f64 / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_ln_v() {
        let v = 17;
        let (l, _) = mgm_loss(&vec![0.3f64; 2 * v], v, &[3, 9]).unwrap();
        assert!((l - (v as f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn confident_logits_and_shift_invariance() {
        for v in [2usize, 12, 22, 512] {
            let mut logits = vec![0.0f64; v];
            logits[1] = 10.0;
            let (l, _) = mgm_loss(&logits, v, &[1]).unwrap();
            let closed = (1.0 + (v as f64 - 1.0) * (-10f64).exp()).ln();
            assert!((l - closed).abs() < 1e-12);
            assert_eq!(l < 1e-3, v <= 23);
            let shifted: Vec<f64> = logits.iter().map(|x| x + 123.0).collect();
            assert!((mgm_loss(&shifted, v, &[1]).unwrap().0 - l).abs() < 1e-10);
        }
        assert!(matches!(mgm_loss::<f64>(&[], 4, &[]), Err(ModelError::NoMaskedPositions)));
    }

    #[test]
    fn bad_pairings() {
        assert!(check_pairing(&[1, 0, 3, 2]).is_ok());
        assert!(matches!(check_pairing(&[0, 1]), Err(ModelError::BadPairing(0))));
        assert!(matches!(check_pairing(&[1, 2, 0]), Err(ModelError::BadPairing(0))));
    }

    #[test]
    fn contrastive_gradient_matches_differences() {
        let raw: [Vec<f64>; 4] = [
            vec![0.3, -0.2, 0.9],
            vec![0.1, 0.5, -0.4],
            vec![-0.7, 0.2, 0.1],
            vec![0.4, 0.4, 0.4],
        ];
        let pairing = [1, 0, 3, 2];
        let (_, g) = contrastive_loss(&raw, &pairing, 0.5).unwrap();
        let h = 1e-6;
        for i in 0..4 {
            for k in 0..3 {
                let mut plus = raw.to_vec();
                plus[i][k] += h;
                let mut minus = raw.to_vec();
                minus[i][k] -= h;
                let fd = (contrastive_loss(&plus, &pairing, 0.5).unwrap().0
                    - contrastive_loss(&minus, &pairing, 0.5).unwrap().0)
                    / (2.0 * h);
                assert!((fd - g[i][k]).abs() < 1e-7, "{fd} vs {}", g[i][k]);
            }
        }
    }
}
