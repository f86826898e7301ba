//! Dense symmetric eigensolvers.
//!
//! The default path reduces to tridiagonal form with Householder
//! reflections and then runs implicit-shift QL. A cyclic Jacobi solver is
//! kept alongside it; the two share nothing and are used to check each
//! other.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

/// Relative asymmetry tolerated on input.
pub const SYMMETRY_TOL: f64 = 1e-10;
const QL_MAX_ITER: usize = 60;
pub const JACOBI_MAX_SWEEPS: usize = 60;
pub const JACOBI_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenMethod {
    #[default]
    TridiagonalQl,
    Jacobi,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralDecomposition {
    /// Decreasing by value when the spectrum is nonnegative up to roundoff,
    /// otherwise decreasing by modulus.
    pub eigenvalues: Vec<f64>,
    /// Columns match `eigenvalues`.
    #[serde(skip)]
    pub eigenvectors: DMatrix<f64>,
    /// `|λ_j|`, decreasing.
    pub singular_values: Vec<f64>,
    /// `‖S − QΛQᵀ‖_max`.
    pub residual: f64,
}

impl SpectralDecomposition {
    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }
}

pub fn check_symmetric(s: &DMatrix<f64>) -> Result<()> {
    if !s.is_square() {
        return Err(Error::Dimension { expected: s.nrows(), got: s.ncols() });
    }
    let n = s.nrows();
    let scale = s.amax();
    let mut asym: f64 = 0.0;
    for j in 0..n {
        for i in j + 1..n {
            asym = asym.max((s[(i, j)] - s[(j, i)]).abs());
        }
    }
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

/// Full eigendecomposition of a symmetric matrix.
pub fn eigendecompose(s: &DMatrix<f64>, method: EigenMethod) -> Result<SpectralDecomposition> {
    check_symmetric(s)?;
    let (values, vectors) = match method {
        EigenMethod::TridiagonalQl => {
            let (d, e, mut q) = tridiagonalize(s, true);
            let d = tridiagonal_ql(d, e, q.as_mut())?;
            (d, q.expect("vectors requested"))
        }
        EigenMethod::Jacobi => jacobi(s)?,
    };
    let order = spectral_order(&values, Some(&vectors));
    let n = values.len();
    let eigenvalues: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        let mut v = vectors.column(i).clone_owned();
        if leading_sign(&v) < 0.0 {
            v.neg_mut();
        }
        eigenvectors.set_column(k, &v);
    }
    let residual = reconstruction_residual(s, &eigenvalues, &eigenvectors);
    let singular_values = singular_from(&eigenvalues);
    Ok(SpectralDecomposition { eigenvalues, eigenvectors, singular_values, residual })
}

/// Eigenvalues only, in the same order as [`eigendecompose`].
pub fn eigenvalues(s: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_symmetric(s)?;
    let (d, e, _) = tridiagonalize(s, false);
    let d = tridiagonal_ql(d, e, None)?;
    let order = spectral_order(&d, None);
    Ok(order.into_iter().map(|i| d[i]).collect())
}

/// `|λ|` sorted decreasingly.
pub fn singular_from(eigenvalues: &[f64]) -> Vec<f64> {
    let mut s: Vec<f64> = eigenvalues.iter().map(|v| v.abs()).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

fn reconstruction_residual(s: &DMatrix<f64>, values: &[f64], vectors: &DMatrix<f64>) -> f64 {
    let lambda = DVector::from_column_slice(values);
    let mut scaled = vectors.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= lambda[j];
    }
    (s - scaled * vectors.transpose()).amax()
}

fn leading_sign(v: &DVector<f64>) -> f64 {
    let scale = v.amax();
    v.iter()
        .find(|x| x.abs() > 1e-8 * scale)
        .map(|x| x.signum())
        .unwrap_or(1.0)
}

fn spectral_order(values: &[f64], vectors: Option<&DMatrix<f64>>) -> Vec<usize> {
    let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let nonneg = values.iter().all(|&v| v >= -1e-10 * max);
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        let primary = if nonneg {
            values[b].total_cmp(&values[a])
        } else {
            values[b].abs().total_cmp(&values[a].abs()).then(values[b].total_cmp(&values[a]))
        };
        primary.then_with(|| match vectors {
            // exact ties: lexicographic on sign-normalized vectors
            Some(q) => {
                let mut va = q.column(a).clone_owned();
                let mut vb = q.column(b).clone_owned();
                va *= leading_sign(&va);
                vb *= leading_sign(&vb);
                va.iter()
                    .zip(vb.iter())
                    .map(|(x, y)| y.total_cmp(x))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            }
            None => a.cmp(&b),
        })
    });
    order
}

/// Householder reduction `A = Q T Qᵀ` using the lower triangle.
/// Returns the diagonal, the subdiagonal (`e[i]` couples `i` and `i + 1`,
/// last entry zero) and optionally `Q`.
fn tridiagonalize(s: &DMatrix<f64>, want_q: bool) -> (Vec<f64>, Vec<f64>, Option<DMatrix<f64>>) {
    let n = s.nrows();
    let mut a = s.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    let mut taus = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];

    for k in 0..n.saturating_sub(2) {
        d[k] = a[(k, k)];
        let m = n - k - 1;
        let col = &a.as_slice()[k * n + k + 1..(k + 1) * n];
        let alpha = col[0];
        let xnorm = col[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            e[k] = alpha;
            taus[k] = 0.0;
            continue;
        }
        let beta = -alpha.signum() * alpha.hypot(xnorm);
        let beta = if alpha == 0.0 { -alpha.hypot(xnorm) } else { beta };
        let tau = (beta - alpha) / beta;
        let inv = 1.0 / (alpha - beta);
        let v = &mut v[..m];
        v[0] = 1.0;
        for (vi, xi) in v[1..].iter_mut().zip(&col[1..]) {
            *vi = xi * inv;
        }
        e[k] = beta;
        taus[k] = tau;

        // p = tau * A22 v, from the lower triangle of A22 = a[k+1.., k+1..]
        let w = &mut w[..m];
        w.iter_mut().for_each(|x| *x = 0.0);
        for j in 0..m {
            let colj = &a.as_slice()[(k + 1 + j) * n + k + 1..(k + 2 + j) * n];
            let vj = v[j];
            let mut acc = colj[j] * vj;
            for i in j + 1..m {
                acc += colj[i] * v[i];
                w[i] += colj[i] * vj;
            }
            w[j] += acc;
        }
        w.iter_mut().for_each(|x| *x *= tau);
        let pv: f64 = w.iter().zip(v.iter()).map(|(p, q)| p * q).sum();
        let half = 0.5 * tau * pv;
        for (wi, vi) in w.iter_mut().zip(v.iter()) {
            *wi -= half * vi;
        }
        // A22 -= v wᵀ + w vᵀ on the lower triangle
        for j in 0..m {
            let (vj, wj) = (v[j], w[j]);
            let colj = &mut a.as_mut_slice()[(k + 1 + j) * n + k + 1..(k + 2 + j) * n];
            for i in j..m {
                colj[i] -= v[i] * wj + w[i] * vj;
            }
        }
        // keep the reflector below the subdiagonal
        let colk = &mut a.as_mut_slice()[k * n + k + 1..(k + 1) * n];
        colk[1..].copy_from_slice(&v[1..]);
    }
    if n >= 2 {
        d[n - 2] = a[(n - 2, n - 2)];
        e[n - 2] = a[(n - 1, n - 2)];
    }
    if n >= 1 {
        d[n - 1] = a[(n - 1, n - 1)];
        e[n - 1] = 0.0;
    }

    let q = want_q.then(|| {
        let mut q = DMatrix::identity(n, n);
        for k in (0..n.saturating_sub(2)).rev() {
            let tau = taus[k];
            if tau == 0.0 {
                continue;
            }
            let m = n - k - 1;
            v[0] = 1.0;
            v[1..m].copy_from_slice(&a.column(k).as_slice()[k + 2..]);
            let v = &v[..m];
            for j in k + 1..n {
                let col = &mut q.column_mut(j);
                let col = &mut col.as_mut_slice()[k + 1..];
                let dot: f64 = col.iter().zip(v).map(|(c, x)| c * x).sum();
                let f = tau * dot;
                for (c, x) in col.iter_mut().zip(v) {
                    *c -= f * x;
                }
            }
        }
        q
    });
    (d, e, q)
}

/// Implicit-shift QL on a symmetric tridiagonal matrix. Rotations are
/// accumulated into the columns of `z` when given.
fn tridiagonal_ql(mut d: Vec<f64>, mut e: Vec<f64>, mut z: Option<&mut DMatrix<f64>>) -> Result<Vec<f64>> {
    let n = d.len();
    // absolute floor so clusters near zero deflate at roundoff of ‖T‖
    let norm = (0..n).map(|i| d[i].abs() + e[i].abs() + if i > 0 { e[i - 1].abs() } else { 0.0 }).fold(0.0, f64::max);
    let floor = f64::EPSILON * norm;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd || e[m].abs() <= floor {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > QL_MAX_ITER {
                return Err(Error::NoConvergence(format!("QL iteration stalled at row {l}")));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = z.as_deref_mut() {
                    let rows = z.nrows();
                    let data = z.as_mut_slice();
                    let (left, right) = data.split_at_mut((i + 1) * rows);
                    let zi = &mut left[i * rows..];
                    let zi1 = &mut right[..rows];
                    for (a, b) in zi.iter_mut().zip(zi1.iter_mut()) {
                        let f = *b;
                        *b = s * *a + c * f;
                        *a = c * *a - s * f;
                    }
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(d)
}

/// Cyclic Jacobi: stops when the off-diagonal Frobenius norm drops below
/// `JACOBI_TOL · ‖S‖_F`, or after `JACOBI_MAX_SWEEPS` sweeps.
pub fn jacobi(s: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = s.nrows();
    let mut a = s.clone();
    let mut v = DMatrix::identity(n, n);
    let total = s.norm();
    let off = |a: &DMatrix<f64>| {
        let mut acc = 0.0;
        for j in 0..n {
            for i in 0..n {
                if i != j {
                    acc += a[(i, j)] * a[(i, j)];
                }
            }
        }
        acc.sqrt()
    };
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off(&a) <= JACOBI_TOL * total {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
    }
    if off(&a) > JACOBI_TOL * total * 1e3 {
        return Err(Error::NoConvergence("Jacobi sweeps exhausted".into()));
    }
    Ok(((0..n).map(|i| a[(i, i)]).collect(), v))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_symmetric(n: usize, seed: u64) -> DMatrix<f64> {
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in j..n {
                let x = next();
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
        }
        m
    }

    #[test]
    fn scaled_identity() {
        let m = DMatrix::identity(5, 5) * 3.5;
        let dec = eigendecompose(&m, EigenMethod::TridiagonalQl).unwrap();
        assert!(dec.eigenvalues.iter().all(|&v| (v - 3.5).abs() < 1e-14));
    }

    #[test]
    fn swap_matrix() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        for method in [EigenMethod::TridiagonalQl, EigenMethod::Jacobi] {
            let dec = eigendecompose(&m, method).unwrap();
            assert!((dec.eigenvalues[0] - 1.0).abs() < 1e-15);
            assert!((dec.eigenvalues[1] + 1.0).abs() < 1e-15);
            assert!(dec.singular_values.iter().all(|s| (s - 1.0).abs() < 1e-15));
        }
    }

    #[test]
    fn ql_agrees_with_jacobi() {
        for (n, seed) in [(1, 1), (2, 2), (3, 3), (7, 4), (24, 5), (60, 6)] {
            let m = random_symmetric(n, seed);
            let ql = eigendecompose(&m, EigenMethod::TridiagonalQl).unwrap();
            let jc = eigendecompose(&m, EigenMethod::Jacobi).unwrap();
            for (a, b) in ql.eigenvalues.iter().zip(&jc.eigenvalues) {
                assert!((a - b).abs() < 1e-11, "n={n}: {a} vs {b}");
            }
            let scale = m.amax();
            assert!(ql.residual <= 1e-9 * scale, "residual {}", ql.residual);
            assert!(jc.residual <= 1e-9 * scale);
            let only = eigenvalues(&m).unwrap();
            for (a, b) in only.iter().zip(&ql.eigenvalues) {
                assert!((a - b).abs() < 1e-12);
            }
            // orthonormal vectors
            let q = &ql.eigenvectors;
            let g = q.transpose() * q;
            assert!((g - DMatrix::identity(n, n)).amax() < 1e-12);
        }
    }

    #[test]
    fn rejects_asymmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.5, 1.0]);
        assert!(matches!(eigendecompose(&m, EigenMethod::TridiagonalQl), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn ordering_by_modulus_when_indefinite() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -3.0, 2.0]));
        let dec = eigendecompose(&m, EigenMethod::TridiagonalQl).unwrap();
        assert_eq!(dec.eigenvalues, vec![-3.0, 2.0, 1.0]);
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 3.0, 2.0]));
        let dec = eigendecompose(&m, EigenMethod::TridiagonalQl).unwrap();
        assert_eq!(dec.eigenvalues, vec![3.0, 2.0, 1.0]);
    }
}
