//! Dense multivariate polynomials truncated at a fixed total degree.
//!
//! These are the workhorse for Taylor expansions of the reduced Hamiltonian
//! and for the normal-form transformations built on top of them.  A
//! [`Basis`] fixes the variable count and truncation degree once and owns
//! the monomial enumeration together with a product table, so polynomial
//! arithmetic reduces to flat coefficient loops.  Coefficients are generic:
//! real (`f64`, double-double) for expansions, complex for the
//! normal-form stage.

use std::collections::HashMap;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex};

use num_complex::Complex;
use num_traits::{One, Zero};
use once_cell::sync::Lazy;

use crate::dd::Dd;
use crate::Real;

/// Coefficient ring: real or complex over a [`Real`] scalar.
pub trait Coeff:
    Clone
    + Zero
    + PartialEq
    + std::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    type R: Real;
    fn mag(&self) -> Self::R;
    fn from_real(r: Self::R) -> Self;
}

impl Coeff for f64 {
    type R = f64;
    fn mag(&self) -> f64 {
        self.abs()
    }
    fn from_real(r: f64) -> Self {
        r
    }
}

impl Coeff for Dd {
    type R = Dd;
    fn mag(&self) -> Dd {
        self.abs()
    }
    fn from_real(r: Dd) -> Self {
        r
    }
}

impl<R: Real> Coeff for Complex<R> {
    type R = R;
    fn mag(&self) -> R {
        self.norm()
    }
    fn from_real(r: R) -> Self {
        Complex::new(r, R::zero())
    }
}

/// Monomial basis: all exponent tuples of total degree `<= degree` over
/// `nvars` variables, ordered by total degree, then by decreasing power of
/// the earlier variables.  Shared through [`basis`] so polynomials over the
/// same layout can assume identical coefficient indexing.
pub struct Basis {
    pub nvars: usize,
    pub degree: usize,
    pub exps: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
    /// Flat `len*len` table mapping a pair of monomial indices to the index
    /// of their product, `u32::MAX` when the product exceeds the degree cap.
    prod: Vec<u32>,
}

impl std::fmt::Debug for Basis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Basis({} vars, degree {})", self.nvars, self.degree)
    }
}

impl<T: std::fmt::Debug> std::fmt::Debug for Poly<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Poly({:?}, {:?})", self.basis, self.c)
    }
}

impl Basis {
    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    pub fn index_of(&self, exp: &[u8]) -> Option<usize> {
        self.index.get(exp).copied()
    }

    pub fn total_degree(&self, i: usize) -> usize {
        self.exps[i].iter().map(|&e| e as usize).sum()
    }
}

fn enumerate(nvars: usize, degree: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    let mut cur = vec![0u8; nvars];
    for total in 0..=degree {
        fill(&mut out, &mut cur, 0, total as u8);
    }
    out
}

fn fill(out: &mut Vec<Vec<u8>>, cur: &mut [u8], var: usize, rest: u8) {
    if var + 1 == cur.len() {
        cur[var] = rest;
        out.push(cur.to_vec());
        return;
    }
    for e in (0..=rest).rev() {
        cur[var] = e;
        fill(out, cur, var + 1, rest - e);
    }
    cur[var] = 0;
}

static BASES: Lazy<Mutex<HashMap<(usize, usize), Arc<Basis>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

/// Fetch (or build and cache) the basis for a `(nvars, degree)` layout.
pub fn basis(nvars: usize, degree: usize) -> Arc<Basis> {
    let mut cache = BASES.lock().unwrap();
    cache
        .entry((nvars, degree))
        .or_insert_with(|| {
            let exps = enumerate(nvars, degree);
            let index: HashMap<Vec<u8>, usize> = exps
                .iter()
                .enumerate()
                .map(|(i, e)| (e.clone(), i))
                .collect();
            let n = exps.len();
            let mut prod = vec![u32::MAX; n * n];
            let mut sum = vec![0u8; nvars];
            for i in 0..n {
                for j in 0..n {
                    let mut total = 0usize;
                    for v in 0..nvars {
                        sum[v] = exps[i][v] + exps[j][v];
                        total += sum[v] as usize;
                    }
                    if total <= degree {
                        prod[i * n + j] = index[&sum] as u32;
                    }
                }
            }
            Arc::new(Basis {
                nvars,
                degree,
                exps,
                index,
                prod,
            })
        })
        .clone()
}

/// Polynomial over a shared [`Basis`]; products beyond the basis degree are
/// silently dropped, which is exactly the jet-arithmetic semantics needed
/// for Taylor expansion.
#[derive(Clone)]
pub struct Poly<T> {
    pub basis: Arc<Basis>,
    pub c: Vec<T>,
}

impl<T: Coeff> Poly<T> {
    pub fn zero(basis: &Arc<Basis>) -> Self {
        Poly {
            basis: basis.clone(),
            c: vec![T::zero(); basis.len()],
        }
    }

    pub fn constant(basis: &Arc<Basis>, v: T) -> Self {
        let mut p = Self::zero(basis);
        p.c[0] = v;
        p
    }

    pub fn var(basis: &Arc<Basis>, i: usize) -> Self {
        assert!(i < basis.nvars && basis.degree >= 1);
        let mut exp = vec![0u8; basis.nvars];
        exp[i] = 1;
        let mut p = Self::zero(basis);
        let k = basis.index_of(&exp).unwrap();
        p.c[k] = T::from_real(<T::R>::one());
        p
    }

    pub fn coeff(&self, exp: &[u8]) -> T {
        match self.basis.index_of(exp) {
            Some(k) => self.c[k].clone(),
            None => T::zero(),
        }
    }

    pub fn set_coeff(&mut self, exp: &[u8], v: T) {
        let k = self
            .basis
            .index_of(exp)
            .expect("exponent outside basis");
        self.c[k] = v;
    }

    pub fn add(&self, rhs: &Self) -> Self {
        let mut out = self.clone();
        for (a, b) in out.c.iter_mut().zip(rhs.c.iter()) {
            *a = a.clone() + b.clone();
        }
        out
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        let mut out = self.clone();
        for (a, b) in out.c.iter_mut().zip(rhs.c.iter()) {
            *a = a.clone() - b.clone();
        }
        out
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        for a in out.c.iter_mut() {
            *a = -a.clone();
        }
        out
    }

    pub fn scale(&self, s: T) -> Self {
        let mut out = self.clone();
        for a in out.c.iter_mut() {
            *a = a.clone() * s.clone();
        }
        out
    }

    pub fn scale_real(&self, s: T::R) -> Self {
        self.scale(T::from_real(s))
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        assert!(Arc::ptr_eq(&self.basis, &rhs.basis));
        let n = self.basis.len();
        let mut out = Self::zero(&self.basis);
        for i in 0..n {
            if self.c[i].is_zero() {
                continue;
            }
            let row = &self.basis.prod[i * n..(i + 1) * n];
            for j in 0..n {
                if rhs.c[j].is_zero() {
                    continue;
                }
                let k = row[j];
                if k != u32::MAX {
                    let k = k as usize;
                    out.c[k] = out.c[k].clone() + self.c[i].clone() * rhs.c[j].clone();
                }
            }
        }
        out
    }

    /// Terms of exact total degree `k`.
    pub fn graded(&self, k: usize) -> Self {
        let mut out = Self::zero(&self.basis);
        for (i, v) in self.c.iter().enumerate() {
            if self.basis.total_degree(i) == k {
                out.c[i] = v.clone();
            }
        }
        out
    }

    /// Partial derivative with respect to variable `i`.
    pub fn dvar(&self, i: usize) -> Self {
        let mut out = Self::zero(&self.basis);
        for (k, v) in self.c.iter().enumerate() {
            let e = self.basis.exps[k][i];
            if e == 0 || v.is_zero() {
                continue;
            }
            let mut exp = self.basis.exps[k].clone();
            exp[i] -= 1;
            let t = self.basis.index_of(&exp).unwrap();
            out.c[t] = out.c[t].clone() + v.clone() * T::from_real(<T::R>::of(e as f64));
        }
        out
    }

    pub fn eval(&self, x: &[T]) -> T {
        assert_eq!(x.len(), self.basis.nvars);
        let d = self.basis.degree;
        let mut pows: Vec<Vec<T>> = Vec::with_capacity(x.len());
        for xi in x {
            let mut row = Vec::with_capacity(d + 1);
            row.push(T::from_real(<T::R>::one()));
            for k in 1..=d {
                row.push(row[k - 1].clone() * xi.clone());
            }
            pows.push(row);
        }
        let mut acc = T::zero();
        for (i, v) in self.c.iter().enumerate() {
            if v.is_zero() {
                continue;
            }
            let mut term = v.clone();
            for (var, &e) in self.basis.exps[i].iter().enumerate() {
                if e > 0 {
                    term = term * pows[var][e as usize].clone();
                }
            }
            acc = acc + term;
        }
        acc
    }

    pub fn max_abs(&self) -> T::R {
        let mut m = <T::R>::zero();
        for v in &self.c {
            let a = v.mag();
            if a > m {
                m = a;
            }
        }
        m
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|v| v.is_zero())
    }

    /// Substitute each variable by a linear combination of the variables of
    /// `out_basis`: `var i -> sum_j rows[i][j] * w_j`.  The target layout may
    /// have a different variable count but must share the degree cap.
    pub fn linear_substitute(&self, rows: &[Vec<T>], out_basis: &Arc<Basis>) -> Poly<T> {
        assert_eq!(rows.len(), self.basis.nvars);
        assert_eq!(out_basis.degree, self.basis.degree);
        let d = self.basis.degree;
        // Powers 0..=d of each substituted linear form, built on demand.
        let mut pows: Vec<Option<Vec<Poly<T>>>> = vec![None; rows.len()];
        let mut out = Poly::zero(out_basis);
        for (i, v) in self.c.iter().enumerate() {
            if v.is_zero() {
                continue;
            }
            let mut term = Poly::constant(out_basis, v.clone());
            for (var, &e) in self.basis.exps[i].iter().enumerate() {
                if e == 0 {
                    continue;
                }
                if pows[var].is_none() {
                    let mut lin: Poly<T> = Poly::zero(out_basis);
                    for (j, w) in rows[var].iter().enumerate() {
                        if !w.is_zero() {
                            let mut exp = vec![0u8; out_basis.nvars];
                            exp[j] = 1;
                            let k = out_basis.index_of(&exp).unwrap();
                            lin.c[k] = lin.c[k].clone() + w.clone();
                        }
                    }
                    let mut table = Vec::with_capacity(d + 1);
                    table.push(Poly::constant(out_basis, T::from_real(<T::R>::one())));
                    for k in 1..=d {
                        let next = table[k - 1].mul(&lin);
                        table.push(next);
                    }
                    pows[var] = Some(table);
                }
                term = term.mul(&pows[var].as_ref().unwrap()[e as usize]);
            }
            out = out.add(&term);
        }
        out
    }
}

impl<R: Real> Poly<R> {
    /// Jet reciprocal; the constant term must be nonzero.
    pub fn recip_jet(&self) -> Self {
        let a0 = self.c[0];
        assert!(a0 != R::zero(), "reciprocal of a jet with zero constant term");
        let inv = R::one() / a0;
        // e has zero constant term, so the geometric series terminates.
        let mut e = self.scale(inv);
        e.c[0] = R::zero();
        let mut acc = Poly::constant(&self.basis, R::one());
        let mut pw = Poly::constant(&self.basis, R::one());
        let mut sign = -R::one();
        for _ in 0..self.basis.degree {
            pw = pw.mul(&e);
            acc = acc.add(&pw.scale(sign));
            sign = -sign;
        }
        acc.scale(inv)
    }

    /// Jet square root; the constant term must be positive.
    pub fn sqrt_jet(&self) -> Self {
        let a0 = self.c[0];
        assert!(a0 > R::zero(), "square root of a jet with non-positive constant term");
        let mut e = self.scale(R::one() / a0);
        e.c[0] = R::zero();
        // Binomial series for (1+e)^(1/2) up to the basis degree.
        let half = R::of(0.5);
        let mut acc = Poly::constant(&self.basis, R::one());
        let mut pw = Poly::constant(&self.basis, R::one());
        let mut coef = R::one();
        for k in 0..self.basis.degree {
            let kf = R::of(k as f64);
            coef = coef * (half - kf) / (kf + R::one());
            pw = pw.mul(&e);
            acc = acc.add(&pw.scale(coef));
        }
        acc.scale(a0.sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b3() -> Arc<Basis> {
        basis(3, 4)
    }

    #[test]
    fn basis_counts_match_binomials() {
        assert_eq!(basis(3, 4).len(), 35);
        assert_eq!(basis(8, 4).len(), 495);
        assert_eq!(basis(6, 4).len(), 210);
        assert_eq!(basis(8, 2).len(), 45);
    }

    #[test]
    fn product_agrees_with_eval() {
        let b = b3();
        let x: Poly<f64> = Poly::var(&b, 0);
        let y = Poly::var(&b, 1);
        let z = Poly::var(&b, 2);
        let p = x.add(&y.scale(2.0)).add(&z.mul(&z).scale(-1.5));
        let q = y.sub(&x.mul(&z));
        let pq = p.mul(&q);
        let pt = [0.3, -0.7, 1.1];
        let lhs = pq.eval(&pt);
        let rhs = p.eval(&pt) * q.eval(&pt);
        // Degree sums stay below the cap here, so no truncation error.
        assert!((lhs - rhs).abs() < 1e-14);
    }

    #[test]
    fn truncation_drops_high_degree() {
        let b = b3();
        let x: Poly<f64> = Poly::var(&b, 0);
        let x2 = x.mul(&x);
        let x4 = x2.mul(&x2);
        let x8 = x4.mul(&x4);
        assert!(x8.is_zero());
        assert!((x4.coeff(&[4, 0, 0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn recip_and_sqrt_jets_invert() {
        let b = b3();
        let x: Poly<f64> = Poly::var(&b, 0);
        let y = Poly::var(&b, 1);
        let a = Poly::constant(&b, 2.0).add(&x).add(&y.mul(&y).scale(0.25));
        let r = a.recip_jet();
        let prod = a.mul(&r);
        let mut err: f64 = 0.0;
        for (i, v) in prod.c.iter().enumerate() {
            let want = if i == 0 { 1.0 } else { 0.0 };
            err = err.max((v - want).abs());
        }
        assert!(err < 1e-14);

        let s = a.sqrt_jet();
        let sq = s.mul(&s);
        let mut err2: f64 = 0.0;
        for (av, bv) in sq.c.iter().zip(a.c.iter()) {
            err2 = err2.max((av - bv).abs());
        }
        assert!(err2 < 1e-14);
    }

    #[test]
    fn derivative_of_product_obeys_leibniz() {
        let b = b3();
        let x: Poly<f64> = Poly::var(&b, 0);
        let z = Poly::var(&b, 2);
        let p = x.mul(&x).add(&z.scale(3.0));
        let q = x.add(&z.mul(&x));
        let lhs = p.mul(&q).dvar(0);
        let rhs = p.dvar(0).mul(&q).add(&p.mul(&q.dvar(0)));
        // Truncation can differ at the top degree; compare below it.
        for k in 0..b.degree {
            let d = lhs.graded(k).sub(&rhs.graded(k)).max_abs();
            assert!(d < 1e-14, "degree {k} mismatch {d}");
        }
    }

    #[test]
    fn linear_substitution_matches_pointwise() {
        let b = b3();
        let x: Poly<f64> = Poly::var(&b, 0);
        let y = Poly::var(&b, 1);
        let z = Poly::var(&b, 2);
        let p = x.mul(&y).add(&z.mul(&z).mul(&x)).add(&x.scale(0.5));
        let rows = vec![
            vec![1.0, 2.0, 0.0],
            vec![0.0, -1.0, 1.0],
            vec![0.5, 0.0, 0.25],
        ];
        let q = p.linear_substitute(&rows, &b);
        let w = [0.2, -0.3, 0.7];
        let xs = [
            rows[0][0] * w[0] + rows[0][1] * w[1] + rows[0][2] * w[2],
            rows[1][0] * w[0] + rows[1][1] * w[1] + rows[1][2] * w[2],
            rows[2][0] * w[0] + rows[2][1] * w[1] + rows[2][2] * w[2],
        ];
        assert!((q.eval(&w) - p.eval(&xs)).abs() < 1e-13);
    }

    #[test]
    fn complex_coefficients_work() {
        use num_complex::Complex;
        let b = b3();
        let i = Complex::new(0.0, 1.0);
        let x: Poly<Complex<f64>> = Poly::var(&b, 0);
        let p = x.scale(i).mul(&x.scale(i));
        assert!((p.coeff(&[2, 0, 0]) + Complex::new(1.0, 0.0)).norm() < 1e-15);
    }
}
