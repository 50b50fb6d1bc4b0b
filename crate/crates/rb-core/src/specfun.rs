//! Incomplete elliptic integrals, the ellipsoid self-potential, and the two
//! shape integrals C1, C2 with their closed forms.
//!
//! Elliptic integrals go through Carlson symmetric forms (duplication
//! algorithm), generic over the scalar so double-double evaluation works.
//! Adaptive quadrature provides the independent oracle in tests and the
//! fallback near axis degeneracies, where the closed forms lose digits.
//!
//! Convention warning: `incomplete_f(phi, k)` has k^2 inside the root while
//! `incomplete_e(phi, k)` has k inside; the `_m` variants take the parameter
//! m directly (`F(phi|m)`), which is what every internal formula uses.

use crate::quad;
use crate::{Error, Real, Result};
use num_complex::Complex;

/// Relative axis separation below which closed forms defer to quadrature.
pub const DEGENERACY_TOL: f64 = 1e-6;

/// Carlson R_F by duplication; all arguments nonnegative, at most one zero.
pub fn carlson_rf<R: Real>(x: R, y: R, z: R) -> Result<R> {
    let zero = R::zero();
    if x < zero || y < zero || z < zero {
        return Err(Error::Domain("carlson_rf needs nonnegative arguments".into()));
    }
    let mut n_zero = 0;
    for v in [x, y, z] {
        if v == zero {
            n_zero += 1;
        }
    }
    if n_zero > 1 {
        return Err(Error::Domain("carlson_rf: at most one argument may vanish".into()));
    }
    let third = R::of(1.0 / 3.0);
    let (mut x, mut y, mut z) = (x, y, z);
    let mut a = (x + y + z) * third;
    let q = {
        let r = (R::eps() * R::of(3.0)).powf(R::of(1.0 / 6.0));
        let dx = (a - x).abs();
        let dy = (a - y).abs();
        let dz = (a - z).abs();
        dx.max(dy).max(dz) / r
    };
    let mut scale = R::one();
    for _ in 0..200 {
        if q * scale <= a.abs() {
            break;
        }
        let sx = x.sqrt();
        let sy = y.sqrt();
        let sz = z.sqrt();
        let lam = sx * sy + sy * sz + sz * sx;
        let quarter = R::of(0.25);
        x = (x + lam) * quarter;
        y = (y + lam) * quarter;
        z = (z + lam) * quarter;
        a = (a + lam) * quarter;
        scale = scale * quarter;
    }
    let xd = (a - x) / a;
    let yd = (a - y) / a;
    let zd = -(xd + yd);
    let e2 = xd * yd - zd * zd;
    let e3 = xd * yd * zd;
    let c = R::one() - e2 * R::of(0.1) + e3 * R::of(1.0 / 14.0) + e2 * e2 * R::of(1.0 / 24.0)
        - e2 * e3 * R::of(3.0 / 44.0);
    Ok(c / a.sqrt())
}

/// Carlson R_D by duplication; x, y nonnegative (at most one zero), z positive.
pub fn carlson_rd<R: Real>(x: R, y: R, z: R) -> Result<R> {
    let zero = R::zero();
    if x < zero || y < zero || z <= zero {
        return Err(Error::Domain("carlson_rd domain violation".into()));
    }
    if x == zero && y == zero {
        return Err(Error::Domain("carlson_rd: x and y cannot both vanish".into()));
    }
    let fifth = R::of(0.2);
    let (mut x, mut y, mut z) = (x, y, z);
    let mut a = (x + y + z * R::of(3.0)) * fifth;
    let q = {
        let r = (R::eps() * R::of(0.25)).powf(R::of(1.0 / 8.0));
        let dx = (a - x).abs();
        let dy = (a - y).abs();
        let dz = (a - z).abs();
        dx.max(dy).max(dz) / r
    };
    let mut sum = zero;
    let mut fac = R::one();
    let quarter = R::of(0.25);
    for _ in 0..200 {
        if q * fac <= a.abs() {
            break;
        }
        let sx = x.sqrt();
        let sy = y.sqrt();
        let sz = z.sqrt();
        let lam = sx * sy + sy * sz + sz * sx;
        sum = sum + fac / (sz * (z + lam));
        fac = fac * quarter;
        x = (x + lam) * quarter;
        y = (y + lam) * quarter;
        z = (z + lam) * quarter;
        a = (a + lam) * quarter;
    }
    let xd = (a - x) / a;
    let yd = (a - y) / a;
    let zd = -(xd + yd) / R::of(3.0);
    let e2 = xd * yd - zd * zd * R::of(6.0);
    let e3 = (xd * yd * R::of(3.0) - zd * zd * R::of(8.0)) * zd;
    let e4 = (xd * yd - zd * zd) * zd * zd * R::of(3.0);
    let e5 = xd * yd * zd * zd * zd;
    let series = R::one() - e2 * R::of(3.0 / 14.0) + e3 * R::of(1.0 / 6.0)
        + e2 * e2 * R::of(9.0 / 88.0)
        - e4 * R::of(3.0 / 22.0)
        - e2 * e3 * R::of(9.0 / 52.0)
        + e5 * R::of(3.0 / 26.0);
    Ok(sum * R::of(3.0) + fac * series / (a * a.sqrt()))
}

/// Complex R_F (principal branch), used only to demonstrate the imaginary
/// cancellation in the literal C2 expression.
pub fn carlson_rf_c(x: Complex<f64>, y: Complex<f64>, z: Complex<f64>) -> Complex<f64> {
    let (mut x, mut y, mut z) = (x, y, z);
    let third = 1.0 / 3.0;
    let mut a = (x + y + z) * third;
    let q = (a - x)
        .norm()
        .max((a - y).norm())
        .max((a - z).norm())
        / (3.0 * f64::EPSILON).powf(1.0 / 6.0);
    let mut scale = 1.0;
    for _ in 0..200 {
        if q * scale <= a.norm() {
            break;
        }
        let lam = x.sqrt() * y.sqrt() + y.sqrt() * z.sqrt() + z.sqrt() * x.sqrt();
        x = (x + lam) * 0.25;
        y = (y + lam) * 0.25;
        z = (z + lam) * 0.25;
        a = (a + lam) * 0.25;
        scale *= 0.25;
    }
    let xd = (a - x) / a;
    let yd = (a - y) / a;
    let zd = -(xd + yd);
    let e2 = xd * yd - zd * zd;
    let e3 = xd * yd * zd;
    (Complex::new(1.0, 0.0) - e2 * 0.1 + e3 / 14.0 + e2 * e2 / 24.0 - e2 * e3 * (3.0 / 44.0))
        / a.sqrt()
}

pub fn carlson_rd_c(x: Complex<f64>, y: Complex<f64>, z: Complex<f64>) -> Complex<f64> {
    let (mut x, mut y, mut z) = (x, y, z);
    let mut a = (x + y + z * 3.0) * 0.2;
    let q = (a - x)
        .norm()
        .max((a - y).norm())
        .max((a - z).norm())
        / (0.25 * f64::EPSILON).powf(1.0 / 8.0);
    let mut sum = Complex::new(0.0, 0.0);
    let mut fac = 1.0;
    for _ in 0..200 {
        if q * fac <= a.norm() {
            break;
        }
        let sz = z.sqrt();
        let lam = x.sqrt() * y.sqrt() + y.sqrt() * sz + sz * x.sqrt();
        sum += fac / (sz * (z + lam));
        fac *= 0.25;
        x = (x + lam) * 0.25;
        y = (y + lam) * 0.25;
        z = (z + lam) * 0.25;
        a = (a + lam) * 0.25;
    }
    let xd = (a - x) / a;
    let yd = (a - y) / a;
    let zd = -(xd + yd) / 3.0;
    let e2 = xd * yd - zd * zd * 6.0;
    let e3 = (xd * yd * 3.0 - zd * zd * 8.0) * zd;
    let e4 = (xd * yd - zd * zd) * zd * zd * 3.0;
    let e5 = xd * yd * zd * zd * zd;
    let series = Complex::new(1.0, 0.0) - e2 * (3.0 / 14.0) + e3 / 6.0 + e2 * e2 * (9.0 / 88.0)
        - e4 * (3.0 / 22.0)
        - e2 * e3 * (9.0 / 52.0)
        + e5 * (3.0 / 26.0);
    sum * 3.0 + series * fac / (a * a.sqrt())
}

/// F(phi | m) = int_0^phi (1 - m sin^2 t)^{-1/2} dt for phi in [-pi/2, pi/2],
/// m sin^2 phi < 1 (m itself may exceed 1).
pub fn ellip_f_m<R: Real>(phi: R, m: R) -> Result<R> {
    if phi < R::zero() {
        return Ok(-ellip_f_m(-phi, m)?);
    }
    if phi > R::FRAC_PI_2() + R::of(1e-12) {
        return Err(Error::Domain(format!("ellip_f_m: phi = {phi} out of range")));
    }
    let s = phi.sin();
    let c2 = R::one() - s * s;
    let w = R::one() - m * s * s;
    if w <= R::zero() {
        return Err(Error::Domain("ellip_f_m: m sin^2 phi >= 1".into()));
    }
    Ok(s * carlson_rf(c2, w, R::one())?)
}

/// E(phi | m) = int_0^phi (1 - m sin^2 t)^{1/2} dt, same domain as F.
pub fn ellip_e_m<R: Real>(phi: R, m: R) -> Result<R> {
    if phi < R::zero() {
        return Ok(-ellip_e_m(-phi, m)?);
    }
    if phi > R::FRAC_PI_2() + R::of(1e-12) {
        return Err(Error::Domain(format!("ellip_e_m: phi = {phi} out of range")));
    }
    let s = phi.sin();
    let c2 = R::one() - s * s;
    let w = R::one() - m * s * s;
    if w <= R::zero() {
        return Err(Error::Domain("ellip_e_m: m sin^2 phi >= 1".into()));
    }
    if m == R::zero() {
        return Ok(phi);
    }
    let rf = carlson_rf(c2, w, R::one())?;
    let rd = carlson_rd(c2, w, R::one())?;
    Ok(s * rf - m * s * s * s * rd / R::of(3.0))
}

/// First kind with modulus k: k^2 inside the root.
pub fn incomplete_f(phi: f64, k: f64) -> Result<f64> {
    if !(phi > -std::f64::consts::FRAC_PI_2 && phi < std::f64::consts::FRAC_PI_2) {
        return Err(Error::Domain(format!("incomplete_f: phi = {phi} out of range")));
    }
    if k.abs() >= 1.0 {
        return Err(Error::Domain(format!("incomplete_f: |k| = {} >= 1", k.abs())));
    }
    ellip_f_m(phi, k * k)
}

/// Second kind with parameter k appearing linearly inside the root.
pub fn incomplete_e(phi: f64, k: f64) -> Result<f64> {
    if !(phi > -std::f64::consts::FRAC_PI_2 && phi < std::f64::consts::FRAC_PI_2) {
        return Err(Error::Domain(format!("incomplete_e: phi = {phi} out of range")));
    }
    if k >= 1.0 {
        return Err(Error::Domain(format!("incomplete_e: k = {k} >= 1")));
    }
    ellip_e_m(phi, k)
}

/// Self-gravitational potential of the unit-volume ellipsoid with semi-axes
/// b1 > b2 > b3 (gravitational constant fixed to 1).
pub fn potential_v<R: Real>(b1: R, b2: R, b3: R) -> Result<R> {
    let d13 = b1 * b1 - b3 * b3;
    let d12 = b1 * b1 - b2 * b2;
    if d13 <= R::eps() * b1 * b1 * R::of(4.0) || d12 < R::zero() {
        return Err(Error::Domain("potential_v: degenerate axes".into()));
    }
    let phi = (b3 / b1).acos();
    let m = d12 / d13;
    let f = ellip_f_m(phi, m)?;
    Ok(-R::of(4.0) * R::PI() * f / d13.sqrt())
}

/// C1 by quadrature: 2 pi int_0^inf s ds / ((x^2+s)(y^2+s)(z^2+s))^{3/2}.
pub fn c1_quad(x: f64, y: f64, z: f64) -> Result<f64> {
    let (x2, y2, z2) = (x * x, y * y, z * z);
    let v = quad::integrate_half_line(
        move |s| s * ((x2 + s) * (y2 + s) * (z2 + s)).powf(-1.5),
        1e-13,
    )?;
    Ok(2.0 * std::f64::consts::PI * v)
}

/// C2 by quadrature: 2 pi int_0^inf s^2 ds / ((x^2+s)(y^2+s)(z^2+s))^{3/2}.
pub fn c2_quad(x: f64, y: f64, z: f64) -> Result<f64> {
    let (x2, y2, z2) = (x * x, y * y, z * z);
    let v = quad::integrate_half_line(
        move |s| s * s * ((x2 + s) * (y2 + s) * (z2 + s)).powf(-1.5),
        1e-13,
    )?;
    Ok(2.0 * std::f64::consts::PI * v)
}

/// Sort descending and fail if any pair is closer than the degeneracy
/// threshold (the closed forms have removable 0/0 there).
fn sorted_separated<R: Real>(x: R, y: R, z: R) -> Result<(R, R, R)> {
    let mut v = [x, y, z];
    if v.iter().any(|&t| t <= R::zero()) {
        return Err(Error::Domain("axes must be positive".into()));
    }
    v.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let [a, b, c] = v;
    let tol = R::of(DEGENERACY_TOL);
    if (a - b) <= tol * a || (b - c) <= tol * a || (a - c) <= tol * a {
        return Err(Error::Domain(format!(
            "axes too close for closed form: ({x}, {y}, {z})"
        )));
    }
    Ok((a, b, c))
}

/// F1 and E1 at (arcsin(sqrt(x^2-y^2)/x) | (x^2-z^2)/(x^2-y^2)) for x > y > z.
/// The parameter exceeds 1 but m sin^2 phi = 1 - z^2/x^2 < 1, so both stay real.
fn f1_e1<R: Real>(x: R, y: R, z: R) -> Result<(R, R)> {
    let x2 = x * x;
    let s2 = (x2 - y * y) / x2;
    let m = (x2 - z * z) / (x * x - y * y);
    let s = s2.sqrt();
    let c2 = R::one() - s2;
    let w = R::one() - m * s2;
    let rf = carlson_rf(c2, w, R::one())?;
    let rd = carlson_rd(c2, w, R::one())?;
    let f1 = s * rf;
    let e1 = f1 - m * s * s2 * rd / R::of(3.0);
    Ok((f1, e1))
}

/// Real parts of F2 = i*Fh and E2 = i*Eh at the imaginary amplitude
/// arcsin(sqrt(z^2-x^2)/z) = i arcsinh(sqrt(x^2-z^2)/z), for x > y > z.
fn f2_e2_hat<R: Real>(x: R, y: R, z: R) -> Result<(R, R)> {
    let sh = (x * x - z * z).sqrt() / z;
    let m = (y * y - z * z) / (x * x - z * z);
    let ch2 = R::one() + sh * sh;
    let w = R::one() + m * sh * sh;
    let rf = carlson_rf(ch2, w, R::one())?;
    let rd = carlson_rd(ch2, w, R::one())?;
    let fh = sh * rf;
    let eh = fh + m * sh * sh * sh * rd / R::of(3.0);
    Ok((fh, eh))
}

/// Closed form of C1 (real evaluation; axes sorted internally).
pub fn c1_closed<R: Real>(x: R, y: R, z: R) -> Result<R> {
    let (x, y, z) = sorted_separated(x, y, z)?;
    let (x2, y2, z2) = (x * x, y * y, z * z);
    let p1 = x * (x2 - y2).powf(R::of(1.5)) * (x2 - z2).powi(2) * (y2 - z2).powi(2);
    let (f1, e1) = f1_e1(x, y, z)?;
    let t_alg = y * z * (x2 - y2).sqrt() * (x2 - z2) * (z2 - R::of(2.0) * x2 + y2);
    let t_e = x
        * ((x2 * x2 + y2 * z2) * (y2 + z2)
            + x2 * (y2 * y2 - R::of(6.0) * y2 * z2 + z2 * z2))
        * e1;
    let t_f = x * (y2 - z2) * (y2 * z2 + x2 * (y2 - R::of(2.0) * z2)) * f1;
    Ok(R::of(4.0) * R::PI() * (t_alg + t_e - t_f) / p1)
}

/// Closed form of C2, evaluated in the manifestly real combination.
///
/// The E2/F2 factors are purely imaginary; with F2 = i Fh, E2 = i Eh the
/// displayed i-coefficients collapse to real terms.
pub fn c2_closed<R: Real>(x: R, y: R, z: R) -> Result<R> {
    let (x, y, z) = sorted_separated(x, y, z)?;
    let (x2, y2, z2) = (x * x, y * y, z * z);
    let p2 = z * (x2 - z2).powf(R::of(1.5)) * (x2 - y2).powi(2) * (y2 - z2).powi(2);
    let (fh, eh) = f2_e2_hat(x, y, z)?;
    let t_alg = x * y * (x2 - z2).sqrt() * (z2 - y2) * (y2 * z2 + x2 * (z2 - R::of(2.0) * y2));
    // 2 i z (...) E2 with E2 = i Eh contributes -2 z (...) Eh.
    let t_e = -R::of(2.0)
        * z
        * (y2 * y2 * z2 * z2 - x2 * y2 * z2 * (y2 + z2)
            + x2 * x2 * (y2 * y2 - y2 * z2 + z2 * z2))
        * eh;
    // -i z (...) F2 with F2 = i Fh contributes + z (...) Fh.
    let t_f = z * (x2 - y2) * (-y2 * z2 * (y2 + z2) + x2 * (y2 * y2 + z2 * z2)) * fh;
    Ok(-R::of(4.0) * R::PI() * (t_alg + t_e + t_f) / p2)
}

/// Literal complex evaluation of the C2 closed form; returns the complex value
/// so callers can check that the imaginary part cancels.
pub fn c2_closed_complex(x: f64, y: f64, z: f64) -> Result<Complex<f64>> {
    let (x, y, z) = sorted_separated(x, y, z)?;
    let (x2, y2, z2) = (x * x, y * y, z * z);
    let i = Complex::new(0.0, 1.0);
    let p2 = z * (x2 - z2).powf(1.5) * (x2 - y2).powi(2) * (y2 - z2).powi(2);
    // phi2 = arcsin(sqrt(z^2-x^2)/z): imaginary amplitude, principal branch.
    let sphi = Complex::new(z2 - x2, 0.0).sqrt() / z;
    let m = Complex::new((y2 - z2) / (x2 - z2), 0.0);
    let c2 = Complex::new(1.0, 0.0) - sphi * sphi;
    let w = Complex::new(1.0, 0.0) - m * sphi * sphi;
    let one = Complex::new(1.0, 0.0);
    let f2 = sphi * carlson_rf_c(c2, w, one);
    let e2 = f2 - m * sphi * sphi * sphi * carlson_rd_c(c2, w, one) / 3.0;
    let t_alg = Complex::new(
        x * y * (x2 - z2).sqrt() * (z2 - y2) * (y2 * z2 + x2 * (z2 - 2.0 * y2)),
        0.0,
    );
    let t_e = 2.0
        * i
        * z
        * (y2 * y2 * z2 * z2 - x2 * y2 * z2 * (y2 + z2) + x2 * x2 * (y2 * y2 - y2 * z2 + z2 * z2))
        * e2;
    let t_f = -i * z * (x2 - y2) * (-y2 * z2 * (y2 + z2) + x2 * (y2 * y2 + z2 * z2)) * f2;
    Ok(-4.0 * std::f64::consts::PI * (t_alg + t_e + t_f) / p2)
}

/// C1 with automatic fallback to quadrature near degeneracy.  The fallback
/// runs at f64 accuracy; close to equal axes that is what the closed form
/// would deliver anyway.
pub fn c1<R: Real>(x: R, y: R, z: R) -> Result<R> {
    match c1_closed(x, y, z) {
        Ok(v) => Ok(v),
        Err(Error::Domain(_)) => {
            let lossy = |v: R| v.to_f64().unwrap_or(f64::NAN);
            c1_quad(lossy(x), lossy(y), lossy(z)).map(R::of)
        }
        Err(e) => Err(e),
    }
}

/// C2 with the same fallback.
pub fn c2<R: Real>(x: R, y: R, z: R) -> Result<R> {
    match c2_closed(x, y, z) {
        Ok(v) => Ok(v),
        Err(Error::Domain(_)) => {
            let lossy = |v: R| v.to_f64().unwrap_or(f64::NAN);
            c2_quad(lossy(x), lossy(y), lossy(z)).map(R::of)
        }
        Err(e) => Err(e),
    }
}

/// Table of the half-line index integrals
/// `B_{pqr} = \int_0^\infty (s+x^2)^{-p-1/2} (s+y^2)^{-q-1/2} (s+z^2)^{-r-1/2} ds`
/// for all `p+q+r <= max_level`.
///
/// The rational prefactor `(s+x^2)^{-p}(s+y^2)^{-q}(s+z^2)^{-r}` is split by
/// partial fractions into single-pole pieces, reducing every entry to the
/// one-slot integrals `M_{i,k} = \int (s+a_i)^{-k} / \Delta \, ds`.  Those
/// satisfy a closed integration-by-parts recursion in `k` seeded by the
/// symmetric elliptic integrals, so the whole table is algebraic past the
/// seed and therefore exact at double-double precision too.
pub struct IndexTable<R> {
    vals: std::collections::HashMap<(u8, u8, u8), R>,
}

impl<R: Real> IndexTable<R> {
    pub fn get(&self, p: u8, q: u8, r: u8) -> R {
        self.vals[&(p, q, r)]
    }
}

fn level_indices(level: usize) -> Vec<(u8, u8, u8)> {
    let mut out = Vec::new();
    for p in (0..=level).rev() {
        for q in (0..=level - p).rev() {
            out.push((p as u8, q as u8, (level - p - q) as u8));
        }
    }
    out
}

/// Decomposition of `prod_i (u + a_i)^{-e_i}` into `sum c * (u + a_slot)^{-pow}`
/// over distinct pole locations `a`.
fn partial_fractions<R: Real>(
    e: [u8; 3],
    a: &[R; 3],
    cache: &mut std::collections::HashMap<[u8; 3], Vec<(usize, u8, R)>>,
) -> Vec<(usize, u8, R)> {
    if let Some(hit) = cache.get(&e) {
        return hit.clone();
    }
    let positive: Vec<usize> = (0..3).filter(|&i| e[i] > 0).collect();
    let out: Vec<(usize, u8, R)> = if positive.len() <= 1 {
        match positive.first() {
            Some(&i) => vec![(i, e[i], R::one())],
            None => vec![(0, 0, R::one())],
        }
    } else {
        // 1/((u+a_i)(u+a_j)) = [1/(u+a_i) - 1/(u+a_j)] / (a_j - a_i)
        let (i, j) = (positive[0], positive[1]);
        let inv = R::one() / (a[j] - a[i]);
        let mut ei = e;
        ei[j] -= 1;
        let mut ej = e;
        ej[i] -= 1;
        let ti = partial_fractions(ei, a, cache);
        let tj = partial_fractions(ej, a, cache);
        let mut acc: std::collections::HashMap<(usize, u8), R> = std::collections::HashMap::new();
        for (slot, pow, c) in ti {
            *acc.entry((slot, pow)).or_insert_with(R::zero) = acc
                .get(&(slot, pow))
                .copied()
                .unwrap_or_else(R::zero)
                + c * inv;
        }
        for (slot, pow, c) in tj {
            *acc.entry((slot, pow)).or_insert_with(R::zero) = acc
                .get(&(slot, pow))
                .copied()
                .unwrap_or_else(R::zero)
                - c * inv;
        }
        acc.into_iter()
            .filter(|&(_, c)| c != R::zero())
            .map(|((slot, pow), c)| (slot, pow, c))
            .collect()
    };
    cache.insert(e, out.clone());
    out
}

pub fn index_table<R: Real>(x: R, y: R, z: R, max_level: usize) -> Result<IndexTable<R>> {
    let scale = x.max(y).max(z);
    let tol = R::of(DEGENERACY_TOL) * scale;
    if x <= R::zero()
        || y <= R::zero()
        || z <= R::zero()
        || (x - y).abs() < tol
        || (x - z).abs() < tol
        || (y - z).abs() < tol
    {
        return Err(Error::Domain(format!(
            "index integrals need separated positive axes, got ({x}, {y}, {z})"
        )));
    }

    let a = [x * x, y * y, z * z];
    let root_abc = (a[0] * a[1] * a[2]).sqrt();
    let two = R::of(2.0);
    let half = R::of(0.5);

    // m[i][k]; the k = 0 entry is the common no-pole integral.
    let rf0 = two * carlson_rf(a[0], a[1], a[2])?;
    let tt = two / R::of(3.0);
    let mut m = vec![vec![R::zero(); max_level.max(1) + 1]; 3];
    for i in 0..3 {
        m[i][0] = rf0;
    }
    if max_level >= 1 {
        m[0][1] = tt * carlson_rd(a[1], a[2], a[0])?;
        m[1][1] = tt * carlson_rd(a[0], a[2], a[1])?;
        m[2][1] = tt * carlson_rd(a[0], a[1], a[2])?;
    }

    let mut cache = std::collections::HashMap::new();
    for k in 2..=max_level {
        for i in 0..3 {
            // From integrating d/du [(u+a_i)^{1-k} / Delta] over the half line.
            let mut rhs = a[i].powi(1 - k as i32) / root_abc;
            for mm in 0..3 {
                if mm == i {
                    continue;
                }
                let mut e = [0u8; 3];
                e[i] = k as u8 - 1;
                e[mm] = 1;
                let mut g = R::zero();
                for (slot, pow, c) in partial_fractions(e, &a, &mut cache) {
                    g = g + c * m[slot][pow as usize];
                }
                rhs = rhs - half * g;
            }
            m[i][k] = rhs / (R::of(k as f64) - half);
        }
    }

    let mut vals = std::collections::HashMap::new();
    for p in 0..=max_level {
        for q in 0..=max_level - p {
            for r in 0..=max_level - p - q {
                let e = [p as u8, q as u8, r as u8];
                let mut v = R::zero();
                for (slot, pow, c) in partial_fractions(e, &a, &mut cache) {
                    v = v + c * m[slot][pow as usize];
                }
                vals.insert((e[0], e[1], e[2]), v);
            }
        }
    }

    Ok(IndexTable { vals })
}

/// One symbolic term `coef * x^i y^j z^k * B_{pqr}` of a partial derivative
/// of the self-gravitation potential.
#[derive(Clone)]
struct VTerm {
    coef: i64,
    pow: [u8; 3],
    idx: [u8; 3],
}

fn differentiate_vterms(terms: &[VTerm], slot: usize) -> Vec<VTerm> {
    let mut acc: std::collections::HashMap<([u8; 3], [u8; 3]), i64> =
        std::collections::HashMap::new();
    for t in terms {
        let k = t.pow[slot] as i64;
        if k > 0 {
            let mut pow = t.pow;
            pow[slot] -= 1;
            *acc.entry((pow, t.idx)).or_insert(0) += k * t.coef;
        }
        let mut pow = t.pow;
        pow[slot] += 1;
        let mut idx = t.idx;
        idx[slot] += 1;
        let c = -(2 * t.idx[slot] as i64 + 1);
        *acc.entry((pow, idx)).or_insert(0) += c * t.coef;
    }
    acc.into_iter()
        .filter(|&(_, c)| c != 0)
        .map(|((pow, idx), coef)| VTerm { coef, pow, idx })
        .collect()
}

/// Taylor coefficients of the self-gravitation potential
/// `V(x,y,z) = -2\pi \int_0^\infty ds / \sqrt{(s+x^2)(s+y^2)(s+z^2)}`
/// about `(x, y, z)` with the three axes treated as independent:
/// the entry at `(a, b, c)` is `\partial^{a+b+c} V / (a! b! c!)`.
pub fn potential_coeffs<R: Real>(
    x: R,
    y: R,
    z: R,
    order: usize,
) -> Result<std::collections::HashMap<(u8, u8, u8), R>> {
    let table = index_table(x, y, z, order)?;
    let mut lists: std::collections::HashMap<(u8, u8, u8), Vec<VTerm>> =
        std::collections::HashMap::new();
    lists.insert(
        (0, 0, 0),
        vec![VTerm {
            coef: -1,
            pow: [0, 0, 0],
            idx: [0, 0, 0],
        }],
    );
    let two_pi = R::PI() * R::of(2.0);
    let axes = [x, y, z];
    let mut out = std::collections::HashMap::new();
    for level in 0..=order {
        for (a, b, c) in level_indices(level) {
            if level > 0 && !lists.contains_key(&(a, b, c)) {
                let (parent, slot) = if a > 0 {
                    ((a - 1, b, c), 0)
                } else if b > 0 {
                    ((a, b - 1, c), 1)
                } else {
                    ((a, b, c - 1), 2)
                };
                let terms = differentiate_vterms(&lists[&parent], slot);
                lists.insert((a, b, c), terms);
            }
            let mut v = R::zero();
            for t in &lists[&(a, b, c)] {
                let mut term = R::of(t.coef as f64);
                for s in 0..3 {
                    if t.pow[s] > 0 {
                        term = term * axes[s].powi(t.pow[s] as i32);
                    }
                }
                v = v + term * table.get(t.idx[0], t.idx[1], t.idx[2]);
            }
            let fact = |k: u8| -> R {
                let mut f = R::one();
                for i in 2..=k as u64 {
                    f = f * R::of(i as f64);
                }
                f
            };
            out.insert((a, b, c), two_pi * v / (fact(a) * fact(b) * fact(c)));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dd::Dd;
    use crate::quad::{integrate, integrate_half_line};
    use std::f64::consts::{FRAC_PI_4, PI};

    #[test]
    fn carlson_rf_matches_defining_integral() {
        for (x, y, z) in [(1.0, 2.0, 3.0), (0.5, 0.5, 1.0), (0.0, 1.0, 2.0)] {
            let rf = carlson_rf(x, y, z).unwrap();
            let oracle = integrate_half_line(
                move |t| 0.5 / ((t + x) * (t + y) * (t + z)).sqrt(),
                1e-13,
            )
            .unwrap();
            assert!((rf - oracle).abs() < 1e-12, "rf({x},{y},{z}) = {rf} vs {oracle}");
        }
    }

    #[test]
    fn carlson_rd_matches_defining_integral() {
        for (x, y, z) in [(1.0, 2.0, 3.0), (0.0, 2.0, 1.0), (0.3, 1.1, 0.6)] {
            let rd = carlson_rd(x, y, z).unwrap();
            let oracle = integrate_half_line(
                move |t| 1.5 / ((t + z) * ((t + x) * (t + y) * (t + z)).sqrt()),
                1e-13,
            )
            .unwrap();
            assert!((rd - oracle).abs() < 1e-11, "rd({x},{y},{z}) = {rd} vs {oracle}");
        }
    }

    #[test]
    fn incomplete_f_against_quadrature() {
        for (phi, k) in [(0.5, 0.3), (1.2, 0.9), (0.3, 0.0), (1.0, -0.4)] {
            let v = incomplete_f(phi, k).unwrap();
            let oracle = integrate(
                move |t| (1.0 - k * k * t.sin().powi(2)).powf(-0.5),
                0.0,
                phi,
                1e-14,
            )
            .unwrap();
            assert!((v - oracle).abs() < 1e-13, "F({phi},{k}) = {v} vs {oracle}");
        }
    }

    #[test]
    fn incomplete_e_against_quadrature() {
        for (phi, k) in [(FRAC_PI_4, 0.6), (0.9, 0.0), (1.3, 0.95), (0.7, -2.0)] {
            let v = incomplete_e(phi, k).unwrap();
            let oracle = integrate(
                move |t| (1.0 - k * t.sin().powi(2)).sqrt(),
                0.0,
                phi,
                1e-14,
            )
            .unwrap();
            assert!((v - oracle).abs() < 1e-13, "E({phi},{k}) = {v} vs {oracle}");
        }
    }

    #[test]
    fn zero_modulus_is_identity() {
        for phi in [0.3, 0.9, 1.5, -0.7] {
            assert!((incomplete_f(phi, 0.0).unwrap() - phi).abs() <= 4.0 * f64::EPSILON);
            assert!((incomplete_e(phi, 0.0).unwrap() - phi).abs() <= 4.0 * f64::EPSILON);
        }
    }

    #[test]
    fn odd_in_phi() {
        let p = incomplete_e(0.3, 0.2).unwrap();
        let m = incomplete_e(-0.3, 0.2).unwrap();
        assert_eq!(p, -m);
        assert_eq!(incomplete_f(0.8, 0.5).unwrap(), -incomplete_f(-0.8, 0.5).unwrap());
    }

    #[test]
    fn domain_errors() {
        assert!(incomplete_f(2.0, 0.5).is_err());
        assert!(incomplete_f(0.5, 1.0).is_err());
        assert!(incomplete_e(0.5, 1.0).is_err());
        assert!(carlson_rf(-1.0, 1.0, 1.0).is_err());
        assert!(carlson_rf(0.0, 0.0, 1.0).is_err());
    }

    /// The potential closed form against direct quadrature of
    /// -2 pi int_0^inf ds / sqrt((b1^2+s)(b2^2+s)(b3^2+s)).
    #[test]
    fn potential_matches_quadrature() {
        for (b1, b2) in [(2.0, 1.0), (1.5, 1.2)] {
            let b3 = 1.0 / (b1 * b2);
            let v = potential_v(b1, b2, b3).unwrap();
            let oracle = -2.0
                * PI
                * integrate_half_line(
                    move |s| ((b1 * b1 + s) * (b2 * b2 + s) * (b3 * b3 + s)).powf(-0.5),
                    1e-13,
                )
                .unwrap();
            assert!((v - oracle).abs() < 1e-11 * oracle.abs(), "V({b1},{b2}) = {v} vs {oracle}");
        }
    }

    #[test]
    fn potential_negative_on_admissible_grid() {
        // b1 > b2 > b1^{-1/2}: scan a 50x50 grid of valid pairs.
        for i in 0..50 {
            let b1 = 1.05 + 0.06 * i as f64;
            let lo = b1.powf(-0.5);
            for j in 0..50 {
                let b2 = lo + (b1 - lo) * (j as f64 + 0.5) / 50.0;
                if b2 >= b1 {
                    continue;
                }
                let b3 = 1.0 / (b1 * b2);
                let v = potential_v(b1, b2, b3).unwrap();
                assert!(v < 0.0, "V({b1},{b2}) = {v}");
            }
        }
    }

    #[test]
    fn c_integrals_at_unit_sphere() {
        let c1v = c1_quad(1.0, 1.0, 1.0).unwrap();
        let c2v = c2_quad(1.0, 1.0, 1.0).unwrap();
        assert!((c1v - 8.0 * PI / 35.0).abs() < 1e-12, "c1 {c1v}");
        assert!((c2v - 32.0 * PI / 105.0).abs() < 1e-12, "c2 {c2v}");
    }

    #[test]
    fn c_integrals_permutation_symmetric() {
        let (x, y, z) = (1.4, 1.1, 0.65);
        let base1 = c1_quad(x, y, z).unwrap();
        let base2 = c2_quad(x, y, z).unwrap();
        for (a, b, c) in [
            (x, z, y),
            (y, x, z),
            (y, z, x),
            (z, x, y),
            (z, y, x),
        ] {
            assert!((c1_quad(a, b, c).unwrap() - base1).abs() < 1e-12);
            assert!((c2_quad(a, b, c).unwrap() - base2).abs() < 1e-12);
        }
    }

    #[test]
    fn c_integrals_positive() {
        for (x, y, z) in [(1.5, 1.2, 0.9), (2.0, 0.7, 0.5), (1.1, 1.0, 0.9)] {
            assert!(c1_quad(x, y, z).unwrap() > 0.0);
            assert!(c2_quad(x, y, z).unwrap() > 0.0);
        }
    }

    #[test]
    fn closed_forms_match_quadrature() {
        for (x, y, z) in [
            (1.5, 1.2, 0.9),
            (2.0, 1.0, 0.5),
            (1.8, 1.3, 0.427),
            (1.2, 0.9, 0.6),
        ] {
            let q1 = c1_quad(x, y, z).unwrap();
            let v1 = c1_closed(x, y, z).unwrap();
            assert!(
                (v1 - q1).abs() <= 1e-10 * q1.abs().max(1.0),
                "c1({x},{y},{z}): closed {v1} vs quad {q1}"
            );
            let q2 = c2_quad(x, y, z).unwrap();
            let v2 = c2_closed(x, y, z).unwrap();
            assert!(
                (v2 - q2).abs() <= 1e-10 * q2.abs().max(1.0),
                "c2({x},{y},{z}): closed {v2} vs quad {q2}"
            );
        }
    }

    #[test]
    fn closed_form_sorts_arguments() {
        let a = c1_closed(0.9, 1.5, 1.2).unwrap();
        let b = c1_closed(1.5, 1.2, 0.9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn degeneracy_detected_and_fallback_works() {
        assert!(c1_closed(1.0, 1.0, 0.5).is_err());
        assert!(c2_closed(1.2, 1.2000001, 0.8).is_err());
        // The fallback wrapper still produces the quadrature value.
        let v = c1(1.0, 1.0, 0.5).unwrap();
        let q = c1_quad(1.0, 1.0, 0.5).unwrap();
        assert_eq!(v, q);
    }

    #[test]
    fn c2_imaginary_parts_cancel() {
        for (x, y, z) in [(1.5, 1.2, 0.9), (2.0, 1.0, 0.5), (1.8, 1.3, 0.427)] {
            let zc = c2_closed_complex(x, y, z).unwrap();
            let real = c2_closed(x, y, z).unwrap();
            assert!(
                zc.im.abs() <= 1e-12 * zc.re.abs(),
                "imag residual {} at ({x},{y},{z})",
                zc.im
            );
            assert!((zc.re - real).abs() <= 1e-11 * real.abs());
        }
    }

    /// The dd evaluation is the sharper one (it matches quadrature to all
    /// printable digits); f64 differs from it only by its own rounding in the
    /// cancellation-heavy closed forms, a few parts in 1e14.
    #[test]
    fn double_double_agrees_with_f64() {
        let (x, y, z) = (1.5, 1.2, 0.9);
        let v64 = c1_closed(x, y, z).unwrap();
        let vdd = c1_closed(Dd::from_f64(x), Dd::from_f64(y), Dd::from_f64(z)).unwrap();
        assert!((vdd.to_f64() - v64).abs() < 1e-12 * v64.abs());
        let q1 = c1_quad(x, y, z).unwrap();
        assert!((vdd.to_f64() - q1).abs() <= (v64 - q1).abs() + f64::EPSILON);
        let w64 = c2_closed(x, y, z).unwrap();
        let wdd = c2_closed(Dd::from_f64(x), Dd::from_f64(y), Dd::from_f64(z)).unwrap();
        assert!((wdd.to_f64() - w64).abs() < 1e-12 * w64.abs());
        // dd potential as well.
        let b3 = 1.0 / (x * y);
        let p64 = potential_v(x, y, b3).unwrap();
        let pdd = potential_v(Dd::from_f64(x), Dd::from_f64(y), Dd::from_f64(b3)).unwrap();
        assert!((pdd.to_f64() - p64).abs() < 1e-12 * p64.abs());
    }

    fn index_integral_quad(x: f64, y: f64, z: f64, p: u8, q: u8, r: u8) -> f64 {
        integrate_half_line(
            move |s| {
                let fx = (s + x * x).sqrt().powi(2 * p as i32 + 1);
                let fy = (s + y * y).sqrt().powi(2 * q as i32 + 1);
                let fz = (s + z * z).sqrt().powi(2 * r as i32 + 1);
                1.0 / (fx * fy * fz)
            },
            1e-13,
        )
        .unwrap()
    }

    #[test]
    fn index_ladder_matches_quadrature() {
        for &(x, y, z) in &[(1.6, 1.1, 0.57), (2.2, 0.9, 0.5), (1.2, 1.05, 0.79)] {
            let table = index_table(x, y, z, 4).unwrap();
            for level in 0..=4u8 {
                for p in 0..=level {
                    for q in 0..=level - p {
                        let r = level - p - q;
                        let got = table.get(p, q, r);
                        let want = index_integral_quad(x, y, z, p, q, r);
                        assert!(
                            (got - want).abs() < 1e-9 * want.abs(),
                            "B_{{{p}{q}{r}}} at ({x},{y},{z}): {got} vs {want}"
                        );
                    }
                }
            }
        }
    }

    /// The ladder and the elliptic closed forms must agree on the two
    /// vorticity integrals, written as index-integral combinations.
    #[test]
    fn index_ladder_reproduces_vorticity_integrals() {
        let (x, y, z) = (1.7, 1.15, 1.0 / (1.7 * 1.15));
        let t = index_table(x, y, z, 3).unwrap();
        let two_pi = 2.0 * PI;
        let c1v = two_pi * (t.get(0, 1, 1) - x * x * t.get(1, 1, 1));
        let c2v = two_pi
            * (t.get(0, 0, 1) - x * x * t.get(1, 0, 1) - y * y * t.get(0, 1, 1)
                + x * x * y * y * t.get(1, 1, 1));
        assert!((c1v - c1_closed(x, y, z).unwrap()).abs() < 1e-11 * c1v.abs());
        assert!((c2v - c2_closed(x, y, z).unwrap()).abs() < 1e-11 * c2v.abs());
    }

    #[test]
    fn index_ladder_double_double_consistent() {
        let (x, y, z) = (1.45, 1.13, 0.61);
        let t64 = index_table(x, y, z, 4).unwrap();
        let tdd = index_table(Dd::from_f64(x), Dd::from_f64(y), Dd::from_f64(z), 4).unwrap();
        for &(p, q, r) in &[(2u8, 1u8, 1u8), (0, 0, 4), (3, 1, 0), (1, 1, 1)] {
            let a = t64.get(p, q, r);
            let b = tdd.get(p, q, r).to_f64();
            assert!((a - b).abs() < 1e-12 * a.abs(), "B_{{{p}{q}{r}}}: {a} vs {b}");
        }
    }

    #[test]
    fn potential_coeffs_match_value_and_gradient() {
        let (x, y, z) = (1.8, 1.05, 1.0 / (1.8 * 1.05));
        let co = potential_coeffs(x, y, z, 4).unwrap();
        let v = potential_v(x, y, z).unwrap();
        assert!((co[&(0, 0, 0)] - v).abs() < 1e-11 * v.abs());
        // Gradient against central differences of the potential.
        let h = 1e-5;
        let fd = |axis: usize| -> f64 {
            let mut lo = [x, y, z];
            let mut hi = [x, y, z];
            lo[axis] -= h;
            hi[axis] += h;
            let f = |a: [f64; 3]| potential_v(a[0], a[1], a[2]).unwrap();
            (f(hi) - f(lo)) / (2.0 * h)
        };
        for (axis, key) in [(0usize, (1u8, 0u8, 0u8)), (1, (0, 1, 0)), (2, (0, 0, 1))] {
            let want = fd(axis);
            assert!(
                (co[&key] - want).abs() < 1e-8 * want.abs(),
                "axis {axis}: {} vs {want}",
                co[&key]
            );
        }
        // A couple of second-order coefficients against finite differences;
        // the larger step keeps the difference quotient above rounding noise.
        let h2 = 1e-3;
        let f = |a: f64, b: f64| potential_v(a, b, z).unwrap();
        let dxx = (f(x + h2, y) - 2.0 * f(x, y) + f(x - h2, y)) / (h2 * h2) / 2.0;
        assert!((co[&(2, 0, 0)] - dxx).abs() < 1e-5 * dxx.abs());
        let dxy = (f(x + h2, y + h2) - f(x + h2, y - h2) - f(x - h2, y + h2)
            + f(x - h2, y - h2))
            / (4.0 * h2 * h2);
        assert!((co[&(1, 1, 0)] - dxy).abs() < 1e-5 * dxy.abs());
    }
}
