//! Dense eigensolver for general complex matrices.
//!
//! Householder reduction to upper Hessenberg form, single-shift QR with
//! Wilkinson shifts down to complex Schur form `A = Z T Z^H`, then
//! eigenvectors of `T` by back-substitution mapped through `Z`.
//!
//! Single-threaded and deterministic; intended for matrices up to a
//! few hundred rows.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::constants::ITERATIVE_TOL;
use crate::{Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Square complex matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        CMatrix {
            n,
            data: vec![ZERO; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn from_diagonal(diag: &[Complex64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.n);
        (0..self.n)
            .map(|i| {
                self.data[i * self.n..(i + 1) * self.n]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    pub fn mul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn adjoint(&self) -> CMatrix {
        CMatrix::from_fn(self.n, |i, j| self[(j, i)].conj())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.n + j]
    }
}

/// Eigenvalues with unit-norm right eigenvectors (`vectors[i]` pairs with `values[i]`).
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<Complex64>,
    pub vectors: Vec<Vec<Complex64>>,
    /// Largest `||M v - λ v|| / ||M||_F` over all pairs.
    pub max_relative_residual: f64,
}

/// Full eigendecomposition of `m`.
///
/// Every returned pair satisfies `||M v - λ v|| <= 1e-8 ||M||_F`; a violation is
/// reported as [`Error::Residual`] rather than returned.
pub fn eig_dense(m: &CMatrix) -> Result<Eigen> {
    let n = m.dim();
    if !m.is_finite() {
        return Err(Error::validation("matrix", "entries must be finite"));
    }
    if n == 0 {
        return Ok(Eigen {
            values: vec![],
            vectors: vec![],
            max_relative_residual: 0.0,
        });
    }
    let mut t = m.clone();
    let mut z = CMatrix::identity(n);
    hessenberg(&mut t, &mut z);
    schur(&mut t, &mut z)?;
    let values: Vec<Complex64> = (0..n).map(|i| t[(i, i)]).collect();
    let vectors: Vec<Vec<Complex64>> = (0..n).map(|k| schur_eigenvector(&t, &z, k)).collect();

    let scale = m.frobenius_norm().max(f64::MIN_POSITIVE);
    let bound = ITERATIVE_TOL * scale;
    let mut worst = 0.0f64;
    for (k, (lambda, v)) in values.iter().zip(&vectors).enumerate() {
        let r = residual(m, *lambda, v);
        if r.is_nan() || r > bound {
            return Err(Error::Residual {
                index: k,
                residual: r,
                bound,
            });
        }
        worst = worst.max(r / scale);
    }
    Ok(Eigen {
        values,
        vectors,
        max_relative_residual: worst,
    })
}

/// Eigenvalues only; skips eigenvector back-substitution.
pub fn eigenvalues(m: &CMatrix) -> Result<Vec<Complex64>> {
    let n = m.dim();
    let mut t = m.clone();
    let mut z = CMatrix::identity(n);
    hessenberg(&mut t, &mut z);
    schur(&mut t, &mut z)?;
    Ok((0..n).map(|i| t[(i, i)]).collect())
}

/// `||M v - λ v||_2`.
pub fn residual(m: &CMatrix, lambda: Complex64, v: &[Complex64]) -> f64 {
    m.mul_vec(v)
        .iter()
        .zip(v)
        .map(|(mv, vi)| (mv - lambda * vi).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

fn hessenberg(a: &mut CMatrix, q: &mut CMatrix) {
    let n = a.dim();
    if n < 3 {
        return;
    }
    let mut v = vec![ZERO; n];
    for k in 0..n - 2 {
        let xnorm = (k + 1..n).map(|i| a[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            continue;
        }
        let x0 = a[(k + 1, k)];
        let phase = if x0.norm() == 0.0 { ONE } else { x0 / x0.norm() };
        // v = x + phase·||x|| e1 maps x to -phase·||x|| e1
        for i in k + 1..n {
            v[i] = a[(i, k)];
        }
        v[k + 1] += phase * xnorm;
        let vnorm = (k + 1..n).map(|i| v[i].norm_sqr()).sum::<f64>().sqrt();
        for vi in v.iter_mut().skip(k + 1) {
            *vi /= vnorm;
        }
        // A <- (I - 2vv^H) A
        for j in 0..n {
            let dot: Complex64 = (k + 1..n).map(|i| v[i].conj() * a[(i, j)]).sum();
            if dot == ZERO {
                continue;
            }
            for i in k + 1..n {
                a[(i, j)] -= 2.0 * v[i] * dot;
            }
        }
        // A <- A (I - 2vv^H), Q <- Q (I - 2vv^H)
        for mat in [&mut *a, &mut *q] {
            for i in 0..n {
                let dot: Complex64 = (k + 1..n).map(|j| mat[(i, j)] * v[j]).sum();
                if dot == ZERO {
                    continue;
                }
                for j in k + 1..n {
                    mat[(i, j)] -= 2.0 * dot * v[j].conj();
                }
            }
        }
        for i in k + 2..n {
            a[(i, k)] = ZERO;
        }
    }
}

/// Givens rotation `G = [[c, s], [-s̄, c]]` with real `c`, chosen so that
/// `G [x; y] = [r; 0]`.
fn givens(x: Complex64, y: Complex64) -> (f64, Complex64) {
    let ax = x.norm();
    let ay = y.norm();
    if ay == 0.0 {
        return (1.0, ZERO);
    }
    if ax == 0.0 {
        return (0.0, y.conj() / ay);
    }
    let r = ax.hypot(ay);
    (ax / r, (x / ax) * y.conj() / r)
}

fn wilkinson_shift(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let half_tr = (a + d) * 0.5;
    let det = a * d - b * c;
    let disc = (half_tr * half_tr - det).sqrt();
    let l1 = half_tr + disc;
    let l2 = half_tr - disc;
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

fn schur(h: &mut CMatrix, z: &mut CMatrix) -> Result<()> {
    let n = h.dim();
    let max_iter_per_eigenvalue = 60;
    let mut hi = n - 1;
    let mut iter = 0usize;
    while hi > 0 {
        // locate the start of the active unreduced block
        let mut l = hi;
        while l > 0 {
            let sub = h[(l, l - 1)].norm();
            let diag = h[(l - 1, l - 1)].norm() + h[(l, l)].norm();
            let scale = if diag == 0.0 { 1.0 } else { diag };
            if sub <= f64::EPSILON * scale {
                h[(l, l - 1)] = ZERO;
                break;
            }
            l -= 1;
        }
        if l == hi {
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        if iter > max_iter_per_eigenvalue {
            return Err(Error::NonConvergence { index: hi });
        }
        let mu = if iter.is_multiple_of(10) {
            // exceptional shift to break cycles
            h[(hi, hi)] + Complex64::new(0.75 * h[(hi, hi - 1)].norm(), 0.0)
        } else {
            wilkinson_shift(h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)])
        };

        let mut x = h[(l, l)] - mu;
        let mut y = h[(l + 1, l)];
        for k in l..hi {
            if k > l {
                x = h[(k, k - 1)];
                y = h[(k + 1, k - 1)];
            }
            let (c, s) = givens(x, y);
            // rows k, k+1
            let col0 = if k > l { k - 1 } else { l };
            for j in col0..n {
                let a = h[(k, j)];
                let b = h[(k + 1, j)];
                h[(k, j)] = a * c + s * b;
                h[(k + 1, j)] = -s.conj() * a + b * c;
            }
            if k > l {
                h[(k + 1, k - 1)] = ZERO;
            }
            // columns k, k+1
            let row_end = (k + 2).min(hi);
            for i in 0..=row_end {
                let a = h[(i, k)];
                let b = h[(i, k + 1)];
                h[(i, k)] = a * c + b * s.conj();
                h[(i, k + 1)] = -a * s + b * c;
            }
            for i in 0..n {
                let a = z[(i, k)];
                let b = z[(i, k + 1)];
                z[(i, k)] = a * c + b * s.conj();
                z[(i, k + 1)] = -a * s + b * c;
            }
        }
    }
    Ok(())
}

/// Right eigenvector for `T[k][k]`, returned in the original basis with unit norm.
fn schur_eigenvector(t: &CMatrix, z: &CMatrix, k: usize) -> Vec<Complex64> {
    let n = t.dim();
    let lambda = t[(k, k)];
    let small = f64::EPSILON * t.frobenius_norm().max(f64::MIN_POSITIVE);
    let mut y = vec![ZERO; n];
    y[k] = ONE;
    for i in (0..k).rev() {
        let rhs: Complex64 = (i + 1..=k).map(|j| t[(i, j)] * y[j]).sum();
        let mut denom = t[(i, i)] - lambda;
        if denom.norm() < small {
            denom = Complex64::new(small, 0.0);
        }
        y[i] = -rhs / denom;
        let big = y[i].norm();
        if big > 1e150 {
            for yj in y.iter_mut().take(k + 1) {
                *yj /= big;
            }
        }
    }
    let mut v: Vec<Complex64> = (0..n)
        .map(|r| (0..=k).map(|j| z[(r, j)] * y[j]).sum())
        .collect();
    let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    for c in &mut v {
        *c /= norm;
    }
    v
}
