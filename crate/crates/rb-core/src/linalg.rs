//! Dense linear algebra for the small systems this crate deals in
//! (nothing here exceeds a few hundred rows).
//!
//! Everything is generic over the scalar so the same kernels run in f64 and
//! double-double. Complex matrices use `Complex<R>` throughout. The SVD is
//! one-sided Jacobi: slow asymptotically, but robustly rank-revealing and
//! precision-agnostic, which is what the normal-form solves need.

use crate::{Error, Real, Result};
use num_complex::Complex;
use num_traits::{One, Zero};
use std::ops::{Index, IndexMut};

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat<T> {
    pub nr: usize,
    pub nc: usize,
    pub data: Vec<T>,
}

impl<T: Copy + Zero> Mat<T> {
    pub fn zeros(nr: usize, nc: usize) -> Self {
        Mat {
            nr,
            nc,
            data: vec![T::zero(); nr * nc],
        }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let nr = rows.len();
        let nc = if nr == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(nr * nc);
        for r in rows {
            assert_eq!(r.len(), nc, "ragged rows");
            data.extend_from_slice(r);
        }
        Mat { nr, nc, data }
    }

    pub fn col(&self, j: usize) -> Vec<T> {
        (0..self.nr).map(|i| self[(i, j)]).collect()
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.nc..(i + 1) * self.nc]
    }
}

impl<T: Copy + Zero + One> Mat<T> {
    pub fn eye(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.nc + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.nc + j]
    }
}

impl<T> Mat<T>
where
    T: Copy + Zero + std::ops::Mul<Output = T> + std::ops::Add<Output = T>,
{
    pub fn matmul(&self, rhs: &Mat<T>) -> Mat<T> {
        assert_eq!(self.nc, rhs.nr);
        let mut out = Mat::zeros(self.nr, rhs.nc);
        for i in 0..self.nr {
            for k in 0..self.nc {
                let a = self[(i, k)];
                for j in 0..rhs.nc {
                    out[(i, j)] = out[(i, j)] + a * rhs[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(self.nc, x.len());
        (0..self.nr)
            .map(|i| {
                let mut s = T::zero();
                for j in 0..self.nc {
                    s = s + self[(i, j)] * x[j];
                }
                s
            })
            .collect()
    }

    pub fn transpose(&self) -> Mat<T> {
        let mut out = Mat::zeros(self.nc, self.nr);
        for i in 0..self.nr {
            for j in 0..self.nc {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }
}

impl<R: Real> Mat<Complex<R>> {
    pub fn hermitian_transpose(&self) -> Mat<Complex<R>> {
        let mut out = Mat::zeros(self.nc, self.nr);
        for i in 0..self.nr {
            for j in 0..self.nc {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn from_real(m: &Mat<R>) -> Self {
        Mat {
            nr: m.nr,
            nc: m.nc,
            data: m.data.iter().map(|&x| Complex::new(x, R::zero())).collect(),
        }
    }

    /// Max absolute entry (infinity norm of the flattened matrix).
    pub fn max_abs(&self) -> R {
        self.data
            .iter()
            .map(|z| z.norm())
            .fold(R::zero(), |a, b| if b > a { b } else { a })
    }
}

impl<R: Real> Mat<R> {
    pub fn max_abs_real(&self) -> R {
        self.data
            .iter()
            .map(|x| x.abs())
            .fold(R::zero(), |a, b| if b > a { b } else { a })
    }
}

/// LU factorization with partial pivoting of a square complex matrix.
pub struct Lu<R: Real> {
    lu: Mat<Complex<R>>,
    piv: Vec<usize>,
    sign: i32,
}

pub fn lu_factor<R: Real>(a: &Mat<Complex<R>>) -> Result<Lu<R>> {
    assert_eq!(a.nr, a.nc, "LU needs a square matrix");
    let n = a.nr;
    let mut lu = a.clone();
    let mut piv: Vec<usize> = (0..n).collect();
    let mut sign = 1;
    for k in 0..n {
        let mut p = k;
        let mut best = lu[(k, k)].norm_sqr();
        for i in k + 1..n {
            let v = lu[(i, k)].norm_sqr();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best == R::zero() {
            return Err(Error::Linalg(format!("singular matrix at pivot {k}")));
        }
        if p != k {
            for j in 0..n {
                let t = lu[(k, j)];
                lu[(k, j)] = lu[(p, j)];
                lu[(p, j)] = t;
            }
            piv.swap(k, p);
            sign = -sign;
        }
        let d = lu[(k, k)];
        for i in k + 1..n {
            let f = lu[(i, k)] / d;
            lu[(i, k)] = f;
            for j in k + 1..n {
                let s = lu[(k, j)];
                lu[(i, j)] = lu[(i, j)] - f * s;
            }
        }
    }
    Ok(Lu { lu, piv, sign })
}

impl<R: Real> Lu<R> {
    pub fn solve(&self, b: &[Complex<R>]) -> Vec<Complex<R>> {
        let n = self.lu.nr;
        assert_eq!(b.len(), n);
        let mut x: Vec<Complex<R>> = self.piv.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            let mut s = x[i];
            for j in 0..i {
                s = s - self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s = s - self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }

    pub fn det(&self) -> Complex<R> {
        let n = self.lu.nr;
        let mut d = Complex::new(R::of(self.sign as f64), R::zero());
        for i in 0..n {
            d = d * self.lu[(i, i)];
        }
        d
    }
}

/// Determinant via LU; returns zero for exactly singular input.
pub fn det<R: Real>(a: &Mat<Complex<R>>) -> Complex<R> {
    match lu_factor(a) {
        Ok(f) => f.det(),
        Err(_) => Complex::zero(),
    }
}

pub fn solve<R: Real>(a: &Mat<Complex<R>>, b: &[Complex<R>]) -> Result<Vec<Complex<R>>> {
    Ok(lu_factor(a)?.solve(b))
}

/// Thin SVD A = U diag(s) V^H from one-sided Jacobi.
///
/// `u` is nr x nc, `v` is nc x nc, singular values descending.
pub struct Svd<R: Real> {
    pub u: Mat<Complex<R>>,
    pub s: Vec<R>,
    pub v: Mat<Complex<R>>,
}

pub fn svd<R: Real>(a: &Mat<Complex<R>>) -> Result<Svd<R>> {
    // One-sided Jacobi needs nr >= nc; pad with zero rows otherwise.
    let mut work = if a.nr >= a.nc {
        a.clone()
    } else {
        let mut w = Mat::zeros(a.nc, a.nc);
        for i in 0..a.nr {
            for j in 0..a.nc {
                w[(i, j)] = a[(i, j)];
            }
        }
        w
    };
    let m = work.nr;
    let n = work.nc;
    let mut v: Mat<Complex<R>> = Mat::eye(n);
    let tol = R::eps() * R::of(8.0);
    // Columns below this squared norm count as exactly zero; without the
    // absolute floor, dependent columns chase each other forever.
    let fro2 = work.data.iter().fold(R::zero(), |a, z| a + z.norm_sqr());
    let dead = fro2 * R::eps() * R::eps() * R::of(64.0);
    let max_sweeps = 100;
    let mut sweep = 0;
    loop {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let mut app = R::zero();
                let mut aqq = R::zero();
                let mut apq: Complex<R> = Complex::zero();
                for i in 0..m {
                    let cp = work[(i, p)];
                    let cq = work[(i, q)];
                    app = app + cp.norm_sqr();
                    aqq = aqq + cq.norm_sqr();
                    apq = apq + cp.conj() * cq;
                }
                if app <= dead || aqq <= dead {
                    continue;
                }
                let off = apq.norm();
                if off <= tol * (app * aqq).sqrt() || off == R::zero() {
                    continue;
                }
                rotated = true;
                // De-phase column q so the pair inner product is real, then
                // apply the classic real Jacobi rotation.
                let u = apq / Complex::new(off, R::zero());
                let ubar = u.conj();
                for i in 0..m {
                    work[(i, q)] = work[(i, q)] * ubar;
                }
                for i in 0..n {
                    v[(i, q)] = v[(i, q)] * ubar;
                }
                let tau = (aqq - app) / (off + off);
                let t = {
                    let s = if tau < R::zero() { -R::one() } else { R::one() };
                    s / (tau.abs() + (R::one() + tau * tau).sqrt())
                };
                let c = (R::one() + t * t).sqrt().recip();
                let s = c * t;
                let (cc, ss) = (Complex::new(c, R::zero()), Complex::new(s, R::zero()));
                for i in 0..m {
                    let cp = work[(i, p)];
                    let cq = work[(i, q)];
                    work[(i, p)] = cc * cp - ss * cq;
                    work[(i, q)] = ss * cp + cc * cq;
                }
                for i in 0..n {
                    let vp = v[(i, p)];
                    let vq = v[(i, q)];
                    v[(i, p)] = cc * vp - ss * vq;
                    v[(i, q)] = ss * vp + cc * vq;
                }
            }
        }
        sweep += 1;
        if !rotated {
            break;
        }
        if sweep > max_sweeps {
            return Err(Error::Linalg(format!(
                "Jacobi SVD did not converge in {max_sweeps} sweeps"
            )));
        }
    }
    // Column norms are the singular values; sort descending.
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<R> = (0..n)
        .map(|j| {
            let mut s = R::zero();
            for i in 0..m {
                s = s + work[(i, j)].norm_sqr();
            }
            s.sqrt()
        })
        .collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap_or(std::cmp::Ordering::Equal));
    let mut u = Mat::zeros(a.nr, n);
    let mut vs = Mat::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    for (jj, &j) in order.iter().enumerate() {
        let sigma = norms[j];
        s.push(sigma);
        if sigma > R::zero() {
            for i in 0..a.nr {
                u[(i, jj)] = work[(i, j)] / Complex::new(sigma, R::zero());
            }
        }
        for i in 0..n {
            vs[(i, jj)] = v[(i, j)];
        }
    }
    Ok(Svd { u, s, v: vs })
}

impl<R: Real> Svd<R> {
    /// Numerical rank relative to the largest singular value.
    pub fn rank(&self, rtol: R) -> usize {
        let smax = self.s.first().copied().unwrap_or(R::zero());
        self.s.iter().filter(|&&x| x > rtol * smax).count()
    }

    /// Minimum-norm least-squares solution of A x ~= b.
    pub fn min_norm_solve(&self, b: &[Complex<R>], rtol: R) -> Vec<Complex<R>> {
        let smax = self.s.first().copied().unwrap_or(R::zero());
        let uhb = self.u.hermitian_transpose().matvec(b);
        let mut y = vec![Complex::zero(); self.s.len()];
        for (k, &sk) in self.s.iter().enumerate() {
            if sk > rtol * smax {
                y[k] = uhb[k] / Complex::new(sk, R::zero());
            }
        }
        self.v.matvec(&y)
    }

    /// Right singular vector for the smallest singular value.
    pub fn null_vector(&self) -> Vec<Complex<R>> {
        let j = self.s.len() - 1;
        self.v.col(j)
    }
}

/// Cholesky factorization attempt; `Ok` iff the symmetric input is positive
/// definite to working precision.
pub fn cholesky<R: Real>(a: &Mat<R>) -> Result<Mat<R>> {
    assert_eq!(a.nr, a.nc);
    let n = a.nr;
    let mut l: Mat<R> = Mat::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d = d - l[(j, k)] * l[(j, k)];
        }
        if d <= R::zero() {
            return Err(Error::Linalg(format!("not positive definite at column {j}")));
        }
        l[(j, j)] = d.sqrt();
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s = s - l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / l[(j, j)];
        }
    }
    Ok(l)
}
