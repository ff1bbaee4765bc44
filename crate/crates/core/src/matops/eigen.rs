//! Real nonsymmetric eigenvalues: balancing, Householder reduction to upper
//! Hessenberg form, then Francis double-shift QR on the Hessenberg matrix.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{MatError, Matrix, Result};

/// Upper bound on the order accepted by [`eigenvalues`].
pub const EIGEN_MAX_DIM: usize = 64;

const MAX_ITS_PER_EIGENVALUE: usize = 60;

/// Eigenvalues of a real square matrix, sorted by descending real part and
/// then descending imaginary part.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<Complex64>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Complex64> {
        self.eigenvalues.iter()
    }

    pub fn max_real(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|l| l.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sum(&self) -> Complex64 {
        self.eigenvalues.iter().sum()
    }

    pub fn product(&self) -> Complex64 {
        self.eigenvalues.iter().product()
    }

    /// Every eigenvalue with a nonzero imaginary part has its conjugate in the
    /// set, matched within `tol` (relative to the spectral radius).
    pub fn is_conjugate_symmetric(&self, tol: f64) -> bool {
        let scale = self
            .eigenvalues
            .iter()
            .map(|l| l.norm())
            .fold(1.0, f64::max);
        self.eigenvalues.iter().all(|l| {
            self.eigenvalues
                .iter()
                .any(|m| (m - l.conj()).norm() <= tol * scale)
        })
    }

    fn sort(&mut self) {
        self.eigenvalues.sort_by(|a, b| {
            b.re.partial_cmp(&a.re)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(b.im.partial_cmp(&a.im).unwrap_or(std::cmp::Ordering::Equal))
        });
    }
}

/// All eigenvalues of a real square matrix.
pub fn eigenvalues(m: &Matrix) -> Result<Spectrum> {
    if !m.is_square() {
        return Err(MatError::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    let n = m.rows();
    if n > EIGEN_MAX_DIM {
        return Err(MatError::TooLarge(n, EIGEN_MAX_DIM));
    }
    if !m.is_finite() {
        return Err(MatError::NonFinite);
    }
    if n == 0 {
        return Ok(Spectrum {
            eigenvalues: Vec::new(),
        });
    }

    // 1-based working copy keeps the QR sweep indices readable.
    let mut a = vec![vec![0.0; n + 1]; n + 1];
    for i in 0..n {
        for j in 0..n {
            a[i + 1][j + 1] = m[(i, j)];
        }
    }
    balance(&mut a, n);
    hessenberg(&mut a, n);
    let mut spec = Spectrum {
        eigenvalues: hqr(&mut a, n)?,
    };
    spec.sort();
    Ok(spec)
}

fn balance(a: &mut [Vec<f64>], n: usize) {
    const RADIX: f64 = 2.0;
    let sqrdx = RADIX * RADIX;
    let mut done = false;
    while !done {
        done = true;
        for i in 1..=n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 1..=n {
                if j != i {
                    c += a[j][i].abs();
                    r += a[i][j].abs();
                }
            }
            if c != 0.0 && r != 0.0 {
                let mut g = r / RADIX;
                let mut f = 1.0;
                let s = c + r;
                while c < g {
                    f *= RADIX;
                    c *= sqrdx;
                }
                g = r * RADIX;
                while c > g {
                    f /= RADIX;
                    c /= sqrdx;
                }
                if (c + r) / f < 0.95 * s {
                    done = false;
                    let g = 1.0 / f;
                    for j in 1..=n {
                        a[i][j] *= g;
                    }
                    for j in 1..=n {
                        a[j][i] *= f;
                    }
                }
            }
        }
    }
}

/// Householder similarity reduction to upper Hessenberg form.
fn hessenberg(a: &mut [Vec<f64>], n: usize) {
    if n < 3 {
        return;
    }
    let mut v = vec![0.0; n + 1];
    for k in 1..=(n - 2) {
        let alpha_norm: f64 = ((k + 1)..=n).map(|i| a[i][k] * a[i][k]).sum::<f64>().sqrt();
        if alpha_norm == 0.0 {
            continue;
        }
        let alpha = if a[k + 1][k] > 0.0 {
            -alpha_norm
        } else {
            alpha_norm
        };
        for i in 1..=n {
            v[i] = 0.0;
        }
        v[k + 1] = a[k + 1][k] - alpha;
        for i in (k + 2)..=n {
            v[i] = a[i][k];
        }
        let vnorm2: f64 = ((k + 1)..=n).map(|i| v[i] * v[i]).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        let beta = 2.0 / vnorm2;
        // A <- H A
        for j in k..=n {
            let s: f64 = ((k + 1)..=n).map(|i| v[i] * a[i][j]).sum();
            let s = s * beta;
            for i in (k + 1)..=n {
                a[i][j] -= s * v[i];
            }
        }
        // A <- A H
        for row in a.iter_mut().take(n + 1).skip(1) {
            let s: f64 = ((k + 1)..=n).map(|j| row[j] * v[j]).sum();
            let s = s * beta;
            for j in (k + 1)..=n {
                row[j] -= s * v[j];
            }
        }
        a[k + 1][k] = alpha;
        for i in (k + 2)..=n {
            a[i][k] = 0.0;
        }
    }
}

#[inline]
fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix (1-based storage).
fn hqr(a: &mut [Vec<f64>], n: usize) -> Result<Vec<Complex64>> {
    let mut wr = vec![0.0; n + 1];
    let mut wi = vec![0.0; n + 1];
    let mut anorm = 0.0;
    for i in 1..=n {
        for j in i.saturating_sub(1).max(1)..=n {
            anorm += a[i][j].abs();
        }
    }
    let mut nn = n as isize;
    let mut t = 0.0;
    let (mut p, mut q, mut r): (f64, f64, f64);
    let (mut x, mut y, mut z, mut w);
    while nn >= 1 {
        let mut its = 0;
        let mut l: isize;
        loop {
            let nu = nn as usize;
            l = nn;
            while l >= 2 {
                let lu = l as usize;
                let mut s = a[lu - 1][lu - 1].abs() + a[lu][lu].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[lu][lu - 1].abs() + s == s {
                    a[lu][lu - 1] = 0.0;
                    break;
                }
                l -= 1;
            }
            x = a[nu][nu];
            if l == nn {
                wr[nu] = x + t;
                wi[nu] = 0.0;
                nn -= 1;
            } else {
                y = a[nu - 1][nu - 1];
                w = a[nu][nu - 1] * a[nu - 1][nu];
                if l == nn - 1 {
                    p = 0.5 * (y - x);
                    q = p * p + w;
                    z = q.abs().sqrt();
                    x += t;
                    if q >= 0.0 {
                        z = p + sign(z, p);
                        wr[nu - 1] = x + z;
                        wr[nu] = x + z;
                        if z != 0.0 {
                            wr[nu] = x - w / z;
                        }
                        wi[nu - 1] = 0.0;
                        wi[nu] = 0.0;
                    } else {
                        wr[nu - 1] = x + p;
                        wr[nu] = x + p;
                        wi[nu - 1] = -z;
                        wi[nu] = z;
                    }
                    nn -= 2;
                } else {
                    if its == MAX_ITS_PER_EIGENVALUE {
                        return Err(MatError::NoConvergence(its));
                    }
                    if its > 0 && its % 10 == 0 {
                        // exceptional shift
                        t += x;
                        for (i, row) in a.iter_mut().enumerate().take(nu + 1).skip(1) {
                            row[i] -= x;
                        }
                        let s = a[nu][nu - 1].abs() + a[nu - 1][nu - 2].abs();
                        x = 0.75 * s;
                        y = x;
                        w = -0.4375 * s * s;
                    }
                    its += 1;
                    let lu = l as usize;
                    let mut m = nu - 2;
                    loop {
                        z = a[m][m];
                        r = x - z;
                        let s = y - z;
                        p = (r * s - w) / a[m + 1][m] + a[m][m + 1];
                        q = a[m + 1][m + 1] - z - r - s;
                        r = a[m + 2][m + 1];
                        let s = p.abs() + q.abs() + r.abs();
                        p /= s;
                        q /= s;
                        r /= s;
                        if m == lu {
                            break;
                        }
                        let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                        let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                        if u + v == v {
                            break;
                        }
                        m -= 1;
                    }
                    for i in (m + 2)..=nu {
                        a[i][i - 2] = 0.0;
                        if i != m + 2 {
                            a[i][i - 3] = 0.0;
                        }
                    }
                    let mut k = m;
                    while k < nu {
                        if k != m {
                            p = a[k][k - 1];
                            q = a[k + 1][k - 1];
                            r = 0.0;
                            if k != nu - 1 {
                                r = a[k + 2][k - 1];
                            }
                            x = p.abs() + q.abs() + r.abs();
                            if x != 0.0 {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        let s = sign((p * p + q * q + r * r).sqrt(), p);
                        if s != 0.0 {
                            if k == m {
                                if lu != m {
                                    a[k][k - 1] = -a[k][k - 1];
                                }
                            } else {
                                a[k][k - 1] = -s * x;
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            z = r / s;
                            q /= p;
                            r /= p;
                            for j in k..=nu {
                                p = a[k][j] + q * a[k + 1][j];
                                if k != nu - 1 {
                                    p += r * a[k + 2][j];
                                    a[k + 2][j] -= p * z;
                                }
                                a[k + 1][j] -= p * y;
                                a[k][j] -= p * x;
                            }
                            let mmin = if nu < k + 3 { nu } else { k + 3 };
                            for row in a.iter_mut().take(mmin + 1).skip(lu) {
                                p = x * row[k] + y * row[k + 1];
                                if k != nu - 1 {
                                    p += z * row[k + 2];
                                    row[k + 2] -= p * r;
                                }
                                row[k + 1] -= p * q;
                                row[k] -= p;
                            }
                        }
                        k += 1;
                    }
                }
            }
            if l >= nn - 1 {
                break;
            }
        }
    }
    Ok((1..=n).map(|i| Complex64::new(wr[i], wi[i])).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol * b.norm().max(1.0)
    }

    #[test]
    fn rotation_has_unit_imaginary_pair() {
        let s = eigenvalues(&Matrix::from_rows(&[[0.0, 1.0], [-1.0, 0.0]])).unwrap();
        assert_eq!(s.len(), 2);
        assert!(close(s.eigenvalues[0], Complex64::new(0.0, 1.0), 1e-14));
        assert!(close(s.eigenvalues[1], Complex64::new(0.0, -1.0), 1e-14));
    }

    #[test]
    fn damped_rotation_closed_form() {
        let a = 0.02 / 600e-6;
        let w = 2.0 * std::f64::consts::PI * 60.0;
        let s = eigenvalues(&Matrix::from_rows(&[[-a, w], [-w, -a]])).unwrap();
        assert!(close(s.eigenvalues[0], Complex64::new(-a, w), 1e-12));
        assert!(close(s.eigenvalues[1], Complex64::new(-a, -w), 1e-12));
    }

    #[test]
    fn identity_and_triangular() {
        let s = eigenvalues(&Matrix::identity(4)).unwrap();
        assert!(s.iter().all(|l| close(*l, Complex64::new(1.0, 0.0), 1e-15)));
        let t = Matrix::from_rows(&[[3.0, 1.0, 4.0], [0.0, -2.0, 5.0], [0.0, 0.0, 7.0]]);
        let s = eigenvalues(&t).unwrap();
        let re: Vec<f64> = s.iter().map(|l| l.re).collect();
        assert!((re[0] - 7.0).abs() < 1e-12 && (re[1] - 3.0).abs() < 1e-12 && (re[2] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn companion_matrix_roots() {
        // (s+1)(s+2)(s^2+2s+5): s^4 + 5s^3 + 13s^2 + 19s + 10
        let c = Matrix::from_rows(&[
            [-5.0, -13.0, -19.0, -10.0],
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
        ]);
        let s = eigenvalues(&c).unwrap();
        let want = [
            Complex64::new(-1.0, 2.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(-1.0, -2.0),
            Complex64::new(-2.0, 0.0),
        ];
        for (g, w) in s.iter().zip(want.iter()) {
            assert!(close(*g, *w, 1e-10), "{g} vs {w}");
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(
            eigenvalues(&Matrix::zeros(2, 3)),
            Err(MatError::NotSquare { .. })
        ));
        assert!(matches!(
            eigenvalues(&Matrix::zeros(65, 65)),
            Err(MatError::TooLarge(65, 64))
        ));
    }
}
