use nalgebra::{DMatrix, DVector};

/// Sample mean and covariance (n - 1 denominator) of row vectors.
pub fn mean_cov(rows: &[Vec<f64>]) -> (Vec<f64>, DMatrix<f64>) {
    let p = rows.first().map_or(0, Vec::len);
    let n = rows.len() as f64;
    let mut mean = vec![0.0; p];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut cov = DMatrix::zeros(p, p);
    for r in rows {
        for a in 0..p {
            let da = r[a] - mean[a];
            for b in a..p {
                cov[(a, b)] += da * (r[b] - mean[b]);
            }
        }
    }
    let denom = (n - 1.0).max(1.0);
    for a in 0..p {
        for b in a..p {
            let v = cov[(a, b)] / denom;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    (mean, cov)
}

/// Solves `A x = b` for symmetric positive definite `A`.
pub fn solve_spd(a: &DMatrix<f64>, b: &[f64]) -> Option<Vec<f64>> {
    let chol = a.clone().cholesky()?;
    Some(chol.solve(&DVector::from_column_slice(b)).iter().copied().collect())
}

pub fn inverse_spd(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    a.clone().cholesky().map(|c| c.inverse())
}

/// Ratio of smallest to largest eigenvalue of a symmetric matrix.
pub fn condition_ratio(a: &DMatrix<f64>) -> f64 {
    let eig = a.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
    if max <= 0.0 {
        0.0
    } else {
        min / max
    }
}

/// Coordinates loading on the smallest-eigenvalue direction of a symmetric
/// matrix, i.e. the members of a near-collinear set.
pub fn collinear_coordinates(a: &DMatrix<f64>) -> Vec<usize> {
    let eig = a.clone().symmetric_eigen();
    let (idx, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::MAX), |best, (i, &v)| if v < best.1 { (i, v) } else { best });
    let v = eig.eigenvectors.column(idx);
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    (0..v.len()).filter(|&k| v[k].abs() > 0.1 * max).collect()
}

/// log(sum(exp(x))) without overflow.
pub fn log_sum_exp<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let xs: Vec<f64> = xs.into_iter().collect();
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Stable `ln(1 + e^x)`.
pub fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
