use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// k rows, each a unit-length direction.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
}

/// Sample covariance (n − 1 denominator) of the rows.
pub fn covariance(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = rows.len();
    let d = rows[0].len();
    let mut mean = vec![0.0; d];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = vec![vec![0.0; d]; d];
    for r in rows {
        let c: Vec<f64> = r.iter().zip(&mean).map(|(v, m)| v - m).collect();
        for i in 0..d {
            for j in i..d {
                cov[i][j] += c[i] * c[j];
            }
        }
    }
    let denom = (n - 1).max(1) as f64;
    for i in 0..d {
        for j in i..d {
            cov[i][j] /= denom;
            cov[j][i] = cov[i][j];
        }
    }
    (mean, cov)
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
/// Returns (eigenvalues, eigenvectors as columns of the returned matrix).
pub fn jacobi_eigen(matrix: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = matrix.len();
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum::<f64>()
            .sqrt();
        if off < JACOBI_TOL {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

/// Top-k principal directions of the rows. Each component's largest-magnitude
/// entry is made positive.
pub fn pca_fit_rows(rows: &[Vec<f64>], k: usize) -> Result<PcaModel> {
    if rows.len() < 2 {
        return Err(Error::Data(format!("PCA needs at least 2 records, got {}", rows.len())));
    }
    let d = rows[0].len();
    if k == 0 || k > d {
        return Err(Error::Config(format!("PCA dimension {k} not in 1..={d}")));
    }
    let (mean, cov) = covariance(rows);
    let (values, vectors) = jacobi_eigen(&cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut components = Vec::with_capacity(k);
    let mut explained_variance = Vec::with_capacity(k);
    for &idx in order.iter().take(k) {
        let mut comp: Vec<f64> = vectors.iter().map(|row| row[idx]).collect();
        let pivot = comp
            .iter()
            .copied()
            .fold(0.0f64, |best, c| if c.abs() > best.abs() { c } else { best });
        if pivot < 0.0 {
            comp.iter_mut().for_each(|c| *c = -*c);
        }
        components.push(comp);
        explained_variance.push(values[idx].max(0.0));
    }
    Ok(PcaModel {
        mean,
        components,
        explained_variance,
    })
}

impl PcaModel {
    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn transform_one(&self, x: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| c.iter().zip(x).zip(&self.mean).map(|((ci, xi), mi)| ci * (xi - mi)).sum())
            .collect()
    }

    pub fn inverse_one(&self, z: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (c, zi) in self.components.iter().zip(z) {
            for (o, ci) in out.iter_mut().zip(c) {
                *o += zi * ci;
            }
        }
        out
    }
}

pub fn pca_transform(model: &PcaModel, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if let Some(r) = rows.iter().find(|r| r.len() != model.mean.len()) {
        return Err(Error::Dimension(format!(
            "PCA fitted on {} features, row has {}",
            model.mean.len(),
            r.len()
        )));
    }
    Ok(rows.iter().map(|r| model.transform_one(r)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_rows(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = Rng::new(seed);
        (0..n)
            .map(|_| (0..d).map(|j| (j + 1) as f64 * Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect())
            .collect()
    }

    fn recon_error(model: &PcaModel, rows: &[Vec<f64>]) -> f64 {
        rows.iter()
            .map(|r| {
                let back = model.inverse_one(&model.transform_one(r));
                back.iter().zip(r).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
            })
            .sum()
    }

    #[test]
    fn collinear_points() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, i as f64]).collect();
        let m = pca_fit_rows(&rows, 2).unwrap();
        let s = 0.5f64.sqrt();
        assert!((m.components[0][0] - s).abs() < 1e-10 && (m.components[0][1] - s).abs() < 1e-10);
        assert!(m.explained_variance[1].abs() < 1e-10);
    }

    #[test]
    fn isotropic_cloud() {
        let rows = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]];
        let m = pca_fit_rows(&rows, 2).unwrap();
        assert!((m.explained_variance[0] - m.explained_variance[1]).abs() < 1e-12);
    }

    #[test]
    fn trace_is_preserved() {
        let rows = random_rows(60, 10, 4);
        let m = pca_fit_rows(&rows, 10).unwrap();
        let (_, cov) = covariance(&rows);
        let trace: f64 = (0..10).map(|i| cov[i][i]).sum();
        assert!((m.explained_variance.iter().sum::<f64>() - trace).abs() < 1e-8);
        assert!(m.explained_variance.windows(2).all(|w| w[0] >= w[1]));
        for (i, a) in m.components.iter().enumerate() {
            for (j, b) in m.components.iter().enumerate() {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expected).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn transform_properties() {
        let rows = random_rows(40, 6, 2);
        let full = pca_fit_rows(&rows, 6).unwrap();
        assert!(full.transform_one(&full.mean).iter().all(|v| v.abs() < 1e-12));
        assert!(recon_error(&full, &rows) < 1e-8);
        let errors: Vec<f64> = (1..=6).map(|k| recon_error(&pca_fit_rows(&rows, k).unwrap(), &rows)).collect();
        assert!(errors.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{errors:?}");
    }

    #[test]
    fn errors() {
        assert!(pca_fit_rows(&[vec![1.0, 2.0]], 1).is_err());
        assert!(pca_fit_rows(&[vec![1.0], vec![2.0]], 2).is_err());
        let m = pca_fit_rows(&[vec![1.0, 0.0], vec![2.0, 1.0]], 1).unwrap();
        assert!(pca_transform(&m, &[vec![1.0]]).is_err());
    }
}
