use super::{MatError, Matrix, Result};

/// The Kronecker-vectorized operator is n²×n², so the order is capped.
pub const LYAPUNOV_MAX_DIM: usize = 20;

/// Solves `aᵀX + Xa + q = 0` for symmetric `X`.
///
/// Uses the vectorized form `(I ⊗ aᵀ + aᵀ ⊗ I) vec(X) = −vec(q)`. `a` must
/// be Hurwitz; a singular operator is reported as [`MatError::NotHurwitz`].
pub fn solve_lyapunov(a: &Matrix, q: &Matrix) -> Result<Matrix> {
    if !a.is_square() {
        return Err(MatError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let n = a.rows();
    if q.rows() != n || q.cols() != n {
        return Err(MatError::Dimension(format!(
            "q is {}x{}, expected {n}x{n}",
            q.rows(),
            q.cols()
        )));
    }
    if n > LYAPUNOV_MAX_DIM {
        return Err(MatError::TooLarge(n, LYAPUNOV_MAX_DIM));
    }
    if !a.is_finite() || !q.is_finite() {
        return Err(MatError::NonFinite);
    }
    if !a.is_hurwitz()? {
        return Err(MatError::NotHurwitz);
    }

    // Column-major vec: index (i, j) -> j*n + i.
    let nn = n * n;
    let mut op = Matrix::zeros(nn, nn);
    for j in 0..n {
        for i in 0..n {
            let row = j * n + i;
            // (aᵀX)_{ij} = Σ_k a_{ki} X_{kj}
            for k in 0..n {
                op[(row, j * n + k)] += a[(k, i)];
            }
            // (Xa)_{ij} = Σ_k X_{ik} a_{kj}
            for k in 0..n {
                op[(row, k * n + i)] += a[(k, j)];
            }
        }
    }
    let rhs: Vec<f64> = (0..nn).map(|idx| -q[(idx % n, idx / n)]).collect();
    let lu = op.lu().map_err(|e| match e {
        MatError::Singular => MatError::NotHurwitz,
        other => other,
    })?;
    let v = lu.solve_vec(&rhs)?;
    let mut x = Matrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            x[(i, j)] = v[j * n + i];
        }
    }
    Ok(x.symmetrize())
}

/// Residual `aᵀX + Xa + q`.
pub fn lyapunov_residual(a: &Matrix, x: &Matrix, q: &Matrix) -> Matrix {
    let at = a.transpose();
    let lhs = &(&at * x) + &(x * a);
    &lhs + q
}
