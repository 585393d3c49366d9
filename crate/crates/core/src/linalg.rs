//! Dense Cholesky factorization and preconditioned conjugate gradients.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const BLOCK: usize = 64;

/// Lower Cholesky factor `L` of a symmetric positive definite matrix, row-major.
#[derive(Debug, Clone)]
pub struct Cholesky<T: Scalar> {
    n: usize,
    l: Vec<T>,
}

impl<T: Scalar> Cholesky<T> {
    /// Factors the row-major `n x n` matrix `a`. Only the lower triangle is read.
    pub fn factor(mut a: Vec<T>, n: usize) -> Result<Self> {
        if a.len() != n * n {
            return Err(Error::Precondition(format!(
                "matrix buffer has {} entries, expected {}",
                a.len(),
                n * n
            )));
        }
        let mut k0 = 0;
        while k0 < n {
            let kb = BLOCK.min(n - k0);
            factor_diagonal(&mut a, n, k0, kb)?;
            let rest = k0 + kb;
            if rest < n {
                // panel rows: A[i, k0..rest] <- A[i, k0..rest] * L_kk^{-T}
                for i in rest..n {
                    for j in k0..rest {
                        let mut s = a[i * n + j];
                        for p in k0..j {
                            s -= a[i * n + p] * a[j * n + p];
                        }
                        a[i * n + j] = s / a[j * n + j];
                    }
                }
                // trailing lower update, one block row at a time
                let mut i0 = rest;
                while i0 < n {
                    let ib = BLOCK.min(n - i0);
                    let cols = i0 + ib - rest;
                    let ptr = a.as_mut_ptr();
                    unsafe {
                        T::gemm(
                            ib,
                            kb,
                            cols,
                            -T::one(),
                            ptr.add(i0 * n + k0),
                            n as isize,
                            1,
                            ptr.add(rest * n + k0),
                            1,
                            n as isize,
                            T::one(),
                            ptr.add(i0 * n + rest),
                            n as isize,
                            1,
                        );
                    }
                    i0 += ib;
                }
            }
            k0 = rest;
        }
        for i in 0..n {
            for j in i + 1..n {
                a[i * n + j] = T::zero();
            }
        }
        Ok(Self { n, l: a })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn factor_entry(&self, i: usize, j: usize) -> T {
        self.l[i * self.n + j]
    }

    /// Solves `A x = b` for a single right-hand side.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_many(&mut x, 1);
        x
    }

    /// Solves `A X = B` in place; `b` is row-major `n x r`.
    pub fn solve_many(&self, b: &mut [T], r: usize) {
        assert_eq!(b.len(), self.n * r, "right-hand side shape");
        self.forward(b, r);
        self.backward(b, r);
    }

    /// `L Y = B`, blocked.
    fn forward(&self, b: &mut [T], r: usize) {
        let n = self.n;
        let mut k0 = 0;
        while k0 < n {
            let kb = BLOCK.min(n - k0);
            if k0 > 0 {
                let bp = b.as_mut_ptr();
                unsafe {
                    T::gemm(
                        kb,
                        k0,
                        r,
                        -T::one(),
                        self.l.as_ptr().add(k0 * n),
                        n as isize,
                        1,
                        bp,
                        r as isize,
                        1,
                        T::one(),
                        bp.add(k0 * r),
                        r as isize,
                        1,
                    );
                }
            }
            for i in k0..k0 + kb {
                let d = self.l[i * n + i];
                for p in k0..i {
                    let lip = self.l[i * n + p];
                    if lip != T::zero() {
                        for c in 0..r {
                            let v = b[p * r + c];
                            b[i * r + c] -= lip * v;
                        }
                    }
                }
                for c in 0..r {
                    b[i * r + c] /= d;
                }
            }
            k0 += kb;
        }
    }

    /// `L^T X = Y`, blocked, walking block rows from the bottom.
    fn backward(&self, b: &mut [T], r: usize) {
        let n = self.n;
        let mut k1 = n;
        while k1 > 0 {
            let kb = if k1 % BLOCK == 0 { BLOCK } else { k1 % BLOCK }.min(k1);
            let k0 = k1 - kb;
            if k1 < n {
                // rows k0..k1 of L^T restricted to columns k1..n are L[k1..n, k0..k1]^T
                let bp = b.as_mut_ptr();
                unsafe {
                    T::gemm(
                        kb,
                        n - k1,
                        r,
                        -T::one(),
                        self.l.as_ptr().add(k1 * n + k0),
                        1,
                        n as isize,
                        bp.add(k1 * r),
                        r as isize,
                        1,
                        T::one(),
                        bp.add(k0 * r),
                        r as isize,
                        1,
                    );
                }
            }
            for i in (k0..k1).rev() {
                let d = self.l[i * n + i];
                for p in i + 1..k1 {
                    let lpi = self.l[p * n + i];
                    if lpi != T::zero() {
                        for c in 0..r {
                            let v = b[p * r + c];
                            b[i * r + c] -= lpi * v;
                        }
                    }
                }
                for c in 0..r {
                    b[i * r + c] /= d;
                }
            }
            k1 = k0;
        }
    }
}

fn factor_diagonal<T: Scalar>(a: &mut [T], n: usize, k0: usize, kb: usize) -> Result<()> {
    for j in k0..k0 + kb {
        let mut d = a[j * n + j];
        for p in k0..j {
            d -= a[j * n + p] * a[j * n + p];
        }
        if !(d > T::zero()) || !d.is_finite() {
            return Err(Error::Singular(format!(
                "non-positive pivot {} at row {j}",
                d.f64()
            )));
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..k0 + kb {
            let mut s = a[i * n + j];
            for p in k0..j {
                s -= a[i * n + p] * a[j * n + p];
            }
            a[i * n + j] = s / d;
        }
    }
    Ok(())
}

/// Outcome of a conjugate gradient run.
#[derive(Debug, Clone)]
pub struct CgSolution<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients for an SPD operator given matrix-free.
///
/// Stops when `|b - A x| <= tol * |b|`. Reductions are sequential, so runs are bit-reproducible.
pub fn conjugate_gradient<T, F>(
    apply: F,
    b: &[T],
    diag: &[T],
    tol: f64,
    max_iter: usize,
) -> Result<CgSolution<T>>
where
    T: Scalar,
    F: Fn(&[T], &mut [T]),
{
    let n = b.len();
    assert_eq!(diag.len(), n, "preconditioner length");
    let bnorm = dot(b, b).f64().sqrt();
    let mut x = vec![T::zero(); n];
    if bnorm == 0.0 {
        return Ok(CgSolution {
            x,
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut r = b.to_vec();
    let mut z: Vec<T> = r.iter().zip(diag).map(|(&ri, &di)| ri / di).collect();
    let mut p = z.clone();
    let mut ap = vec![T::zero(); n];
    let mut rz = dot(&r, &z);
    let mut res = 1.0;
    for it in 0..max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > T::zero()) {
            return Err(Error::Singular(format!(
                "operator is not positive definite (p.Ap = {})",
                pap.f64()
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = dot(&r, &r).f64().sqrt() / bnorm;
        if res <= tol {
            return Ok(CgSolution {
                x,
                iterations: it + 1,
                relative_residual: res,
            });
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        residual: res,
    })
}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut s = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spd(n: usize, seed: u64) -> Vec<f64> {
        // A = M M^T + n I with a deterministic pseudo-random M
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        let mut m = vec![0.0; n * n];
        for v in m.iter_mut() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            *v = ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5;
        }
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += m[i * n + k] * m[j * n + k];
                }
                a[i * n + j] = s + if i == j { n as f64 } else { 0.0 };
            }
        }
        a
    }

    fn matvec(a: &[f64], x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n).map(|i| (0..n).map(|j| a[i * n + j] * x[j]).sum()).collect()
    }

    #[test]
    fn cholesky_reconstructs_across_block_boundaries() {
        for &n in &[1usize, 7, 64, 65, 150] {
            let a = spd(n, n as u64);
            let ch = Cholesky::factor(a.clone(), n).unwrap();
            for i in 0..n {
                for j in 0..=i {
                    let s: f64 = (0..=j).map(|k| ch.factor_entry(i, k) * ch.factor_entry(j, k)).sum();
                    assert!((s - a[i * n + j]).abs() < 1e-9 * n as f64, "n={n} ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn multi_rhs_solve_matches_single() {
        let n = 130;
        let a = spd(n, 3);
        let ch = Cholesky::factor(a.clone(), n).unwrap();
        let r = 5;
        let mut b: Vec<f64> = (0..n * r).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let orig = b.clone();
        ch.solve_many(&mut b, r);
        for c in 0..r {
            let col: Vec<f64> = (0..n).map(|i| b[i * r + c]).collect();
            let back = matvec(&a, &col);
            for i in 0..n {
                assert!((back[i] - orig[i * r + c]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn single_precision_factor() {
        let n = 70;
        let a: Vec<f32> = spd(n, 9).iter().map(|&v| v as f32).collect();
        let ch = Cholesky::factor(a.clone(), n).unwrap();
        let b = vec![1.0f32; n];
        let x = ch.solve(&b);
        for i in 0..n {
            let s: f32 = (0..n).map(|j| a[i * n + j] * x[j]).sum();
            assert!((s - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let a = vec![1.0, 2.0, 2.0, 1.0];
        assert!(matches!(Cholesky::factor(a, 2), Err(Error::Singular(_))));
    }

    #[test]
    fn cg_solves_spd_system() {
        let n = 40;
        let a = spd(n, 5);
        let b: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let diag: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
        let sol = conjugate_gradient(
            |x, y| {
                let v = matvec(&a, x);
                y.copy_from_slice(&v);
            },
            &b,
            &diag,
            1e-12,
            500,
        )
        .unwrap();
        let back = matvec(&a, &sol.x);
        for i in 0..n {
            assert!((back[i] - b[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn cg_reports_iteration_cap() {
        let n = 30;
        let a = spd(n, 8);
        let b = vec![1.0; n];
        let diag = vec![1.0; n];
        let err = conjugate_gradient(
            |x, y| {
                let v = matvec(&a, x);
                y.copy_from_slice(&v);
            },
            &b,
            &diag,
            1e-30,
            2,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotConverged { iterations: 2, .. }));
    }

    proptest! {
        #[test]
        fn cholesky_solve_residual_small(n in 1usize..90, seed in 0u64..1000) {
            let a = spd(n, seed);
            let ch = Cholesky::factor(a.clone(), n).unwrap();
            let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
            let x = ch.solve(&b);
            let back = matvec(&a, &x);
            for i in 0..n {
                prop_assert!((back[i] - b[i]).abs() < 1e-9);
            }
        }
    }
}
