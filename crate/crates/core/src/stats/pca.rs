use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};

use super::StatsError;

/// Principal component basis fitted to a set of row vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `k` rows of length `dim`, orthonormal.
    pub components: Vec<Vec<f64>>,
    /// Eigenvalues of the sample covariance for every direction,
    /// non-increasing. The first `k` belong to `components`.
    pub explained_variance: Vec<f64>,
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn save(&self, dir: &Path) -> Result<(), StatsError> {
        fs::create_dir_all(dir)?;
        let row = |v: &[f64]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(",");
        fs::write(dir.join("pca_mean.csv"), row(&self.mean) + "\n")?;
        fs::write(dir.join("pca_variance.csv"), row(&self.explained_variance) + "\n")?;
        let comps: String = self.components.iter().map(|c| row(c) + "\n").collect();
        fs::write(dir.join("pca_components.csv"), comps)?;
        fs::write(
            dir.join("pca_manifest.txt"),
            format!("dim={}\nk={}\n", self.dim(), self.k()),
        )?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<PcaModel, StatsError> {
        let parse_row = |line: &str| -> Result<Vec<f64>, StatsError> {
            line.split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|e| StatsError::Parse(e.to_string())))
                .collect()
        };
        let first_line = |name: &str| -> Result<Vec<f64>, StatsError> {
            let text = fs::read_to_string(dir.join(name))?;
            parse_row(text.lines().next().unwrap_or(""))
        };
        let mean = first_line("pca_mean.csv")?;
        let explained_variance = first_line("pca_variance.csv")?;
        let components = fs::read_to_string(dir.join("pca_components.csv"))?
            .lines()
            .filter(|l| !l.is_empty())
            .map(parse_row)
            .collect::<Result<Vec<_>, _>>()?;
        if components.iter().any(|c| c.len() != mean.len()) {
            return Err(StatsError::Parse("component length differs from mean".into()));
        }
        Ok(PcaModel {
            mean,
            components,
            explained_variance,
        })
    }
}

/// Fit `k` principal components. Each component is sign-normalized so
/// its largest-magnitude entry is positive.
pub fn pca_fit(rows: &[Vec<f64>], k: usize) -> Result<PcaModel, StatsError> {
    let n = rows.len();
    if n < 2 || k == 0 {
        return Err(StatsError::EmptyInput);
    }
    let dim = rows[0].len();
    if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
        return Err(StatsError::DimensionMismatch {
            expected: dim,
            got: bad.len(),
        });
    }
    let mut mean = vec![0.0; dim];
    for r in rows {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered = DMatrix::from_fn(n, dim, |i, j| rows[i][j] - mean[j]);
    let cov = (centered.transpose() * &centered) / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let top = order.first().map(|&i| eig.eigenvalues[i].abs()).unwrap_or(0.0);
    let tol = top.max(1.0) * dim as f64 * 1e-12;
    let explained_variance: Vec<f64> = order
        .iter()
        .map(|&i| {
            let v = eig.eigenvalues[i];
            if v.abs() <= tol {
                0.0
            } else {
                v
            }
        })
        .collect();
    let rank = explained_variance.iter().filter(|v| **v > 0.0).count();
    if rank < k {
        return Err(StatsError::RankDeficient { requested: k, rank });
    }
    let components = order[..k]
        .iter()
        .map(|&i| {
            let mut c: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            let lead = c
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
                .map(|(_, v)| *v)
                .unwrap_or(1.0);
            if lead < 0.0 {
                c.iter_mut().for_each(|x| *x = -*x);
            }
            c
        })
        .collect();
    Ok(PcaModel {
        mean,
        components,
        explained_variance,
    })
}

/// Project rows onto the fitted components.
pub fn pca_transform(model: &PcaModel, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, StatsError> {
    rows.iter()
        .map(|r| {
            if r.len() != model.dim() {
                return Err(StatsError::DimensionMismatch {
                    expected: model.dim(),
                    got: r.len(),
                });
            }
            Ok(model
                .components
                .iter()
                .map(|c| c.iter().zip(r).zip(&model.mean).map(|((c, x), m)| c * (x - m)).sum())
                .collect())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collinear_points_have_one_direction() {
        let rows = vec![vec![0.0, 0.0], vec![1.0, 2.0], vec![2.0, 4.0]];
        let m = pca_fit(&rows, 1).unwrap();
        let s = 5f64.sqrt();
        assert!((m.components[0][0] - 1.0 / s).abs() < 1e-12);
        assert!((m.components[0][1] - 2.0 / s).abs() < 1e-12);
        assert!((m.explained_variance[0] - 5.0).abs() < 1e-12);
        assert_eq!(m.explained_variance[1], 0.0);
        assert!(matches!(pca_fit(&rows, 2), Err(StatsError::RankDeficient { requested: 2, rank: 1 })));
    }

    #[test]
    fn full_rank_reconstruction() {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let t = i as f64;
                vec![t.sin(), (t * 0.7).cos(), t * 0.01, (t * 1.3).sin() * 2.0]
            })
            .collect();
        let m = pca_fit(&rows, 4).unwrap();
        let proj = pca_transform(&m, &rows).unwrap();
        for (r, p) in rows.iter().zip(&proj) {
            for j in 0..4 {
                let back: f64 = m.mean[j] + (0..4).map(|c| p[c] * m.components[c][j]).sum::<f64>();
                assert!((back - r[j]).abs() < 1e-8);
            }
        }
        for a in 0..4 {
            for b in 0..4 {
                let dot: f64 = m.components[a].iter().zip(&m.components[b]).map(|(x, y)| x * y).sum();
                assert!((dot - (a == b) as u8 as f64).abs() < 1e-9);
            }
        }
        assert!(m.explained_variance.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn save_and_load() {
        let rows = vec![vec![1.0, 0.5, 0.0], vec![0.0, 1.0, 2.0], vec![3.0, 1.0, 1.0], vec![2.0, 2.0, 0.5]];
        let m = pca_fit(&rows, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        m.save(dir.path()).unwrap();
        assert_eq!(PcaModel::load(dir.path()).unwrap(), m);
    }
}
