//! Householder QR: column-pivoted for numerical rank, plain for least squares.

use super::{eigenvalues, MatError, Matrix, Result};

/// Applies Householder reflections in place; returns the reflector norms
/// (diagonal of R) and the column permutation.
fn householder_qr(a: &mut Matrix, pivot: bool) -> (Vec<f64>, Vec<usize>, Vec<Vec<f64>>) {
    let (m, n) = (a.rows(), a.cols());
    let steps = m.min(n);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rdiag = Vec::with_capacity(steps);
    let mut reflectors = Vec::with_capacity(steps);
    for k in 0..steps {
        if pivot {
            let (best, _) = (k..n)
                .map(|j| (j, (k..m).map(|i| a[(i, j)] * a[(i, j)]).sum::<f64>()))
                .fold((k, -1.0), |b, c| if c.1 > b.1 { c } else { b });
            if best != k {
                perm.swap(best, k);
                for i in 0..m {
                    let tmp = a[(i, k)];
                    a[(i, k)] = a[(i, best)];
                    a[(i, best)] = tmp;
                }
            }
        }
        let norm = (k..m).map(|i| a[(i, k)] * a[(i, k)]).sum::<f64>().sqrt();
        let mut v = vec![0.0; m];
        if norm == 0.0 {
            rdiag.push(0.0);
            reflectors.push(v);
            continue;
        }
        let alpha = if a[(k, k)] > 0.0 { -norm } else { norm };
        v[k] = a[(k, k)] - alpha;
        for i in (k + 1)..m {
            v[i] = a[(i, k)];
        }
        let vn2: f64 = v.iter().map(|x| x * x).sum();
        if vn2 > 0.0 {
            for j in k..n {
                let s: f64 = (k..m).map(|i| v[i] * a[(i, j)]).sum::<f64>() * 2.0 / vn2;
                for i in k..m {
                    a[(i, j)] -= s * v[i];
                }
            }
        }
        rdiag.push(alpha);
        reflectors.push(v);
    }
    (rdiag, perm, reflectors)
}

/// Largest singular value, from the largest eigenvalue of `MᵀM`.
fn largest_singular_value(m: &Matrix) -> Result<f64> {
    let g = if m.rows() >= m.cols() {
        &m.transpose() * m
    } else {
        m * &m.transpose()
    };
    let spec = eigenvalues(&g)?;
    Ok(spec.iter().map(|l| l.re).fold(0.0, f64::max).sqrt())
}

/// Numerical rank via column-pivoted Householder QR. Diagonal entries of R
/// below `max(rows, cols) · ε · σ_max` count as zero.
pub fn rank(m: &Matrix) -> Result<usize> {
    if !m.is_finite() {
        return Err(MatError::NonFinite);
    }
    if m.rows() == 0 || m.cols() == 0 {
        return Ok(0);
    }
    let smax = largest_singular_value(m)?;
    if smax == 0.0 {
        return Ok(0);
    }
    let tol = m.rows().max(m.cols()) as f64 * f64::EPSILON * smax;
    let mut a = m.clone();
    let (rdiag, _, _) = householder_qr(&mut a, true);
    Ok(rdiag.iter().filter(|d| d.abs() > tol).count())
}

/// Least-squares solution of `a · X ≈ b` for a full-column-rank `a`.
pub fn lstsq(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.rows() != b.rows() {
        return Err(MatError::Dimension("lstsq: row counts differ".into()));
    }
    if a.rows() < a.cols() {
        return Err(MatError::Dimension("lstsq: underdetermined system".into()));
    }
    let (m, n) = (a.rows(), a.cols());
    let mut r = a.clone();
    let (rdiag, _, reflectors) = householder_qr(&mut r, false);
    let scale = rdiag.iter().fold(0.0f64, |s, d| s.max(d.abs()));
    if rdiag.iter().any(|d| d.abs() <= m as f64 * f64::EPSILON * scale) {
        return Err(MatError::Singular);
    }
    let mut qtb = b.clone();
    for (k, v) in reflectors.iter().enumerate() {
        let vn2: f64 = v.iter().map(|x| x * x).sum();
        if vn2 == 0.0 {
            continue;
        }
        for j in 0..qtb.cols() {
            let s: f64 = (k..m).map(|i| v[i] * qtb[(i, j)]).sum::<f64>() * 2.0 / vn2;
            for i in k..m {
                qtb[(i, j)] -= s * v[i];
            }
        }
    }
    let mut x = Matrix::zeros(n, b.cols());
    for c in 0..b.cols() {
        for i in (0..n).rev() {
            let mut s = qtb[(i, c)];
            for j in (i + 1)..n {
                s -= r[(i, j)] * x[(j, c)];
            }
            x[(i, c)] = s / r[(i, i)];
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_basics() {
        assert_eq!(rank(&Matrix::identity(4)).unwrap(), 4);
        assert_eq!(rank(&Matrix::zeros(4, 8)).unwrap(), 0);
        let dup = Matrix::from_rows(&[[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [1.0, 0.0, 1.0]]);
        assert_eq!(rank(&dup).unwrap(), 2);
        let wide = Matrix::from_rows(&[[1.0, 0.0, 1.0, 0.0], [0.0, 1.0, 0.0, 1.0]]);
        assert_eq!(rank(&wide).unwrap(), 2);
    }

    #[test]
    fn rank_rejects_nan() {
        let mut m = Matrix::identity(2);
        m[(0, 1)] = f64::INFINITY;
        assert_eq!(rank(&m), Err(MatError::NonFinite));
    }

    #[test]
    fn lstsq_recovers_exact_solution() {
        let a = Matrix::from_rows(&[[1.0, 1.0], [1.0, 2.0], [1.0, 3.0]]);
        let x_true = Matrix::column(&[0.5, -2.0]);
        let b = &a * &x_true;
        let x = lstsq(&a, &b).unwrap();
        assert!((&x - &x_true).max_abs() < 1e-13);
    }
}
