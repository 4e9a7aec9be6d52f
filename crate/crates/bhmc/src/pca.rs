//! Column standardisation and principal-component projection.

use bhmc_core::Dataset;
use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{CliError, Result};

fn to_matrix(data: &Dataset) -> DMatrix<f64> {
    DMatrix::from_row_iterator(data.len(), data.dim(), data.rows().flatten().copied())
}

fn from_matrix(m: &DMatrix<f64>) -> Result<Dataset> {
    let values: Vec<f64> = m.row_iter().flat_map(|r| r.iter().copied().collect::<Vec<_>>()).collect();
    Ok(Dataset::from_flat(m.nrows(), m.ncols(), values)?)
}

fn centered(data: &Dataset) -> DMatrix<f64> {
    let mut m = to_matrix(data);
    for mut col in m.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    m
}

/// Per-column z-scores. Constant columns are only centred.
pub fn standardize(data: &Dataset) -> Result<Dataset> {
    let mut m = centered(data);
    let n = m.nrows() as f64;
    for mut col in m.column_iter_mut() {
        let sd = (col.norm_squared() / n).sqrt();
        if sd > 0.0 {
            col /= sd;
        }
    }
    from_matrix(&m)
}

/// Principal axes of the sample covariance, largest variance first. Each
/// axis is signed so its largest-magnitude entry is positive.
pub fn principal_axes(data: &Dataset) -> (Vec<f64>, DMatrix<f64>) {
    let x = centered(data);
    let denom = (x.nrows().max(2) - 1) as f64;
    let cov = x.transpose() * &x / denom;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let d = data.dim();
    let mut axes = DMatrix::zeros(d, d);
    let mut values = Vec::with_capacity(d);
    for (j, &i) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(i).clone_owned();
        let pivot = v.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if pivot < 0.0 {
            v.neg_mut();
        }
        axes.set_column(j, &v);
        values.push(eig.eigenvalues[i]);
    }
    (values, axes)
}

/// Centre the columns and project onto the leading `target_dim` axes.
pub fn pca_reduce(data: &Dataset, target_dim: usize) -> Result<Dataset> {
    if target_dim == 0 || target_dim > data.dim() {
        return Err(CliError::Config(format!(
            "pca_dim {target_dim} outside 1..={}",
            data.dim()
        )));
    }
    let (_, axes) = principal_axes(data);
    let projected = centered(data) * axes.columns(0, target_dim);
    from_matrix(&projected)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> Dataset {
        Dataset::from_rows(&[
            vec![2.0, 0.5, 1.0],
            vec![-1.0, 1.5, 0.0],
            vec![0.5, -2.0, 3.0],
            vec![4.0, 1.0, -1.0],
            vec![-0.5, 0.0, 2.5],
        ])
        .unwrap()
    }

    /// Cyclic Jacobi eigen-decomposition, used as an independent oracle.
    fn jacobi(mut a: Vec<Vec<f64>>) -> Vec<f64> {
        let n = a.len();
        for _ in 0..100 {
            for p in 0..n {
                for q in p + 1..n {
                    if a[p][q].abs() < 1e-15 {
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
                }
            }
        }
        let mut d: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
        d.sort_by(|x, y| y.total_cmp(x));
        d
    }

    fn column_variances(d: &Dataset) -> Vec<f64> {
        let n = d.len() as f64;
        (0..d.dim())
            .map(|j| {
                let mean = d.rows().map(|r| r[j]).sum::<f64>() / n;
                d.rows().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / (n - 1.0)
            })
            .collect()
    }

    #[test]
    fn variances_match_covariance_eigenvalues() {
        let data = fixture();
        let n = data.len() as f64;
        let means: Vec<f64> = (0..3).map(|j| data.rows().map(|r| r[j]).sum::<f64>() / n).collect();
        let mut cov = vec![vec![0.0; 3]; 3];
        for r in data.rows() {
            for i in 0..3 {
                for j in 0..3 {
                    cov[i][j] += (r[i] - means[i]) * (r[j] - means[j]) / (n - 1.0);
                }
            }
        }
        let oracle = jacobi(cov);
        let reduced = pca_reduce(&data, 3).unwrap();
        let vars = column_variances(&reduced);
        for (v, o) in vars.iter().zip(&oracle) {
            assert!((v - o).abs() < 1e-10, "{v} vs {o}");
        }
        assert!(vars.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn full_rank_projection_reconstructs() {
        let data = fixture();
        let (_, axes) = principal_axes(&data);
        let projected = to_matrix(&pca_reduce(&data, 3).unwrap());
        let back = projected * axes.transpose();
        let diff = back - centered(&data);
        assert!(diff.amax() < 1e-8);
    }

    #[test]
    fn line_in_plane_has_no_residual() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 1.0 - 2.0 * i as f64]).collect();
        let data = Dataset::from_rows(&rows).unwrap();
        let (_, axes) = principal_axes(&data);
        let x = centered(&data);
        let proj = &x * axes.columns(0, 1);
        let residual = x - proj * axes.columns(0, 1).transpose();
        assert!(residual.norm_squared() / 10.0 < 1e-10);
    }

    #[test]
    fn sign_convention_and_range() {
        let (_, axes) = principal_axes(&fixture());
        for col in axes.column_iter() {
            let pivot = col.iter().copied().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
            assert!(pivot > 0.0);
        }
        assert!(pca_reduce(&fixture(), 0).is_err());
        assert!(pca_reduce(&fixture(), 4).is_err());
    }

    #[test]
    fn standardized_columns_have_unit_scale() {
        let s = standardize(&fixture()).unwrap();
        for v in column_variances(&s) {
            assert!((v * 4.0 / 5.0 - 1.0).abs() < 1e-12);
        }
    }
}
