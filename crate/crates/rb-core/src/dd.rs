//! Double-double arithmetic: an unevaluated sum `hi + lo` of two `f64`s
//! giving roughly 31 significant decimal digits.
//!
//! The representation keeps `|lo| <= ulp(hi)/2` after every operation
//! (renormalized form). Transcendentals are implemented with argument
//! reduction plus Taylor series, or one Newton step from an `f64` seed,
//! which is enough to reach full double-double accuracy.

use num_traits::{Float, FloatConst, FromPrimitive, Num, NumCast, One, Signed, ToPrimitive, Zero};
use std::cmp::Ordering;
use std::fmt;
use std::num::FpCategory;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Rem, RemAssign, Sub, SubAssign};

/// Error-free sum: returns (s, e) with s = fl(a+b), a+b = s+e exactly.
#[inline(always)]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Like `two_sum` but requires |a| >= |b|.
#[inline(always)]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

/// Error-free product via FMA: a*b = p+e exactly.
#[inline(always)]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

#[derive(Clone, Copy, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };
    /// pi to double-double precision.
    pub const PI: Dd = Dd {
        hi: 3.141592653589793116e0,
        lo: 1.224646799147353207e-16,
    };
    pub const TWO_PI: Dd = Dd {
        hi: 6.283185307179586232e0,
        lo: 2.449293598294706414e-16,
    };
    pub const FRAC_PI_2: Dd = Dd {
        hi: 1.570796326794896558e0,
        lo: 6.123233995736766036e-17,
    };
    pub const FRAC_PI_4: Dd = Dd {
        hi: 7.853981633974482790e-1,
        lo: 3.061616997868383018e-17,
    };
    pub const E: Dd = Dd {
        hi: 2.718281828459045091e0,
        lo: 1.445646891729250158e-16,
    };
    pub const LN_2: Dd = Dd {
        hi: 6.931471805599452862e-1,
        lo: 2.319046813846299558e-17,
    };
    pub const LN_10: Dd = Dd {
        hi: 2.302585092994045901e0,
        lo: -2.170756223382249351e-16,
    };
    /// Unit roundoff of the format, ~= 2^-104.
    pub const EPSILON: Dd = Dd {
        hi: 4.93038065763132e-32,
        lo: 0.0,
    };

    #[inline]
    pub const fn new(hi: f64, lo: f64) -> Self {
        Dd { hi, lo }
    }

    #[inline]
    pub fn from_f64(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    fn renorm(hi: f64, lo: f64) -> Self {
        let (s, e) = quick_two_sum(hi, lo);
        Dd { hi: s, lo: e }
    }

    /// Renormalize a three-term expansion (used by division).
    #[inline]
    fn renorm3(a: f64, b: f64, c: f64) -> Self {
        let (s, e1) = quick_two_sum(b, c);
        let (h, e2) = quick_two_sum(a, s);
        Dd::renorm(h, e2 + e1)
    }

    #[inline]
    pub fn sqr(self) -> Self {
        let (p, mut e) = two_prod(self.hi, self.hi);
        e += 2.0 * self.hi * self.lo;
        e += self.lo * self.lo;
        Dd::renorm(p, e)
    }

    pub fn abs(self) -> Self {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            -self
        } else {
            self
        }
    }

    /// Multiply by an exact power of two (error free).
    #[inline]
    pub fn ldexp(self, n: i32) -> Self {
        let f = (n as f64).exp2();
        Dd {
            hi: self.hi * f,
            lo: self.lo * f,
        }
    }

    pub fn sqrt(self) -> Self {
        if self == Dd::ZERO {
            return Dd::ZERO;
        }
        if self.hi < 0.0 {
            return Dd::from_f64(f64::NAN);
        }
        // Karp's method: one correction of the f64 square root.
        let x = 1.0 / self.hi.sqrt();
        let y = self.hi * x;
        let yd = Dd::from_f64(y);
        let r = (self - yd.sqr()).hi * (x * 0.5);
        yd + Dd::from_f64(r)
    }

    /// exp with range reduction x = m ln2 + r, r/512 Taylor-summed then squared back.
    pub fn exp(self) -> Self {
        if self.hi > 709.0 {
            return Dd::from_f64(f64::INFINITY);
        }
        if self.hi < -709.0 {
            return Dd::ZERO;
        }
        if self == Dd::ZERO {
            return Dd::ONE;
        }
        let m = (self.hi / std::f64::consts::LN_2).round();
        let r = (self - Dd::LN_2 * Dd::from_f64(m)).ldexp(-9);
        // Taylor for e^r - 1 with |r| <= ln2/1024.
        let mut term = r;
        let mut sum = r;
        let mut n = 2.0;
        loop {
            term = term * r / Dd::from_f64(n);
            sum += term;
            n += 1.0;
            if term.hi.abs() < 1e-35 * sum.hi.abs() || n > 20.0 {
                break;
            }
        }
        // Undo the /512: (1+s) <- (1+s)^2 - via s <- 2s + s^2, nine times.
        for _ in 0..9 {
            sum = sum.ldexp(1) + sum.sqr();
        }
        (sum + Dd::ONE).ldexp(m as i32)
    }

    pub fn ln(self) -> Self {
        if self.hi <= 0.0 {
            return Dd::from_f64(if self.hi == 0.0 {
                f64::NEG_INFINITY
            } else {
                f64::NAN
            });
        }
        // One Newton step y <- y + x e^{-y} - 1 from the f64 seed.
        let y = Dd::from_f64(self.hi.ln());
        y + self * (-y).exp() - Dd::ONE
    }

    /// Reduce modulo 2 pi into [-pi, pi], then evaluate both series.
    pub fn sin_cos(self) -> (Dd, Dd) {
        if !self.hi.is_finite() {
            return (Dd::from_f64(f64::NAN), Dd::from_f64(f64::NAN));
        }
        let k = (self.hi / (2.0 * std::f64::consts::PI)).round();
        let mut r = self - Dd::TWO_PI * Dd::from_f64(k);
        // Fold into [-pi/4, pi/4] tracking the quadrant.
        let q = (r.hi / std::f64::consts::FRAC_PI_2).round();
        r -= Dd::FRAC_PI_2 * Dd::from_f64(q);
        let (s, c) = sin_cos_taylor(r);
        match q as i64 {
            0 => (s, c),
            1 | -3 => (c, -s),
            2 | -2 => (-s, -c),
            -1 | 3 => (-c, s),
            _ => (s, c),
        }
    }

    pub fn sin(self) -> Self {
        self.sin_cos().0
    }

    pub fn cos(self) -> Self {
        self.sin_cos().1
    }

    pub fn tan(self) -> Self {
        let (s, c) = self.sin_cos();
        s / c
    }

    pub fn atan2(y: Dd, x: Dd) -> Dd {
        if x == Dd::ZERO && y == Dd::ZERO {
            return Dd::ZERO;
        }
        // Newton refinement of the f64 seed on f(t) = y cos t - x sin t.
        let mut t = Dd::from_f64(y.hi.atan2(x.hi));
        for _ in 0..2 {
            let (s, c) = t.sin_cos();
            let num = y * c - x * s;
            let den = x * c + y * s;
            if den == Dd::ZERO {
                break;
            }
            t += num / den;
        }
        t
    }

    pub fn atan(self) -> Self {
        Dd::atan2(self, Dd::ONE)
    }

    pub fn asin(self) -> Self {
        if self.hi.abs() > 1.0 {
            return Dd::from_f64(f64::NAN);
        }
        let c = (Dd::ONE - self.sqr()).sqrt();
        Dd::atan2(self, c)
    }

    pub fn acos(self) -> Self {
        if self.hi.abs() > 1.0 {
            return Dd::from_f64(f64::NAN);
        }
        let s = (Dd::ONE - self.sqr()).sqrt();
        Dd::atan2(s, self)
    }

    pub fn powi(self, n: i32) -> Self {
        if n == 0 {
            return Dd::ONE;
        }
        let mut base = if n < 0 { Dd::ONE / self } else { self };
        let mut e = n.unsigned_abs();
        let mut acc = Dd::ONE;
        while e > 0 {
            if e & 1 == 1 {
                acc *= base;
            }
            base = base.sqr();
            e >>= 1;
        }
        acc
    }

    pub fn powf(self, p: Dd) -> Self {
        if p == Dd::ZERO {
            return Dd::ONE;
        }
        if self == Dd::ZERO {
            return Dd::ZERO;
        }
        (p * self.ln()).exp()
    }

    pub fn floor(self) -> Self {
        let h = self.hi.floor();
        if h == self.hi {
            Dd::renorm(h, self.lo.floor())
        } else {
            Dd::from_f64(h)
        }
    }

    pub fn ceil(self) -> Self {
        let h = self.hi.ceil();
        if h == self.hi {
            Dd::renorm(h, self.lo.ceil())
        } else {
            Dd::from_f64(h)
        }
    }

    pub fn round(self) -> Self {
        (self + Dd::from_f64(0.5)).floor()
    }

    pub fn trunc(self) -> Self {
        if self.hi >= 0.0 {
            self.floor()
        } else {
            self.ceil()
        }
    }
}

/// Taylor series on |r| <= pi/4; converges to dd accuracy in ~30 terms.
fn sin_cos_taylor(r: Dd) -> (Dd, Dd) {
    let r2 = r.sqr();
    let mut s = r;
    let mut term = r;
    let mut k = 1.0;
    loop {
        term = -term * r2 / Dd::from_f64((k + 1.0) * (k + 2.0));
        s += term;
        k += 2.0;
        if term.hi.abs() < 1e-34 || k > 45.0 {
            break;
        }
    }
    let mut c = Dd::ONE;
    let mut termc = Dd::ONE;
    let mut k = 0.0;
    loop {
        termc = -termc * r2 / Dd::from_f64((k + 1.0) * (k + 2.0));
        c += termc;
        k += 2.0;
        if termc.hi.abs() < 1e-34 || k > 45.0 {
            break;
        }
    }
    (s, c)
}

impl Add for Dd {
    type Output = Dd;
    #[inline]
    fn add(self, b: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s2, e2) = quick_two_sum(s, e + t);
        Dd::renorm(s2, e2 + f)
    }
}

impl Sub for Dd {
    type Output = Dd;
    #[inline]
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Neg for Dd {
    type Output = Dd;
    #[inline]
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Mul for Dd {
    type Output = Dd;
    #[inline]
    fn mul(self, b: Dd) -> Dd {
        let (p, mut e) = two_prod(self.hi, b.hi);
        e += self.hi * b.lo + self.lo * b.hi;
        Dd::renorm(p, e)
    }
}

impl Div for Dd {
    type Output = Dd;
    #[inline]
    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        if !q1.is_finite() {
            return Dd::from_f64(q1);
        }
        let r = self - b * Dd::from_f64(q1);
        let q2 = r.hi / b.hi;
        let r2 = r - b * Dd::from_f64(q2);
        let q3 = r2.hi / b.hi;
        Dd::renorm3(q1, q2, q3)
    }
}

impl Rem for Dd {
    type Output = Dd;
    fn rem(self, b: Dd) -> Dd {
        self - (self / b).trunc() * b
    }
}

macro_rules! impl_assign {
    ($tr:ident, $m:ident, $op:tt) => {
        impl $tr for Dd {
            fn $m(&mut self, b: Dd) {
                *self = *self $op b;
            }
        }
    };
}
impl_assign!(AddAssign, add_assign, +);
impl_assign!(SubAssign, sub_assign, -);
impl_assign!(MulAssign, mul_assign, *);
impl_assign!(DivAssign, div_assign, /);
impl_assign!(RemAssign, rem_assign, %);

impl PartialOrd for Dd {
    fn partial_cmp(&self, other: &Dd) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi) {
            Some(Ordering::Equal) => self.lo.partial_cmp(&other.lo),
            o => o,
        }
    }
}

impl fmt::Debug for Dd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dd({:e}, {:e})", self.hi, self.lo)
    }
}

impl fmt::Display for Dd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.hi.is_finite() {
            return write!(f, "{}", self.hi);
        }
        if self.hi == 0.0 {
            return write!(f, "0.0");
        }
        // Emit ~31 significant digits by peeling decimals with dd arithmetic.
        let neg = self.hi < 0.0;
        let mut x = self.abs();
        let mut e10 = x.hi.abs().log10().floor() as i32;
        x = x / Dd::from_f64(10.0).powi(e10);
        if x.hi >= 10.0 {
            x = x / Dd::from_f64(10.0);
            e10 += 1;
        } else if x.hi < 1.0 {
            x = x * Dd::from_f64(10.0);
            e10 -= 1;
        }
        let mut digits = String::new();
        for i in 0..31 {
            let d = x.hi.floor();
            digits.push((b'0' + (d as u8).min(9)) as char);
            x = (x - Dd::from_f64(d)) * Dd::from_f64(10.0);
            if i == 0 {
                digits.push('.');
            }
        }
        write!(f, "{}{}e{}", if neg { "-" } else { "" }, digits, e10)
    }
}

impl From<f64> for Dd {
    fn from(x: f64) -> Dd {
        Dd::from_f64(x)
    }
}

impl Zero for Dd {
    fn zero() -> Dd {
        Dd::ZERO
    }
    fn is_zero(&self) -> bool {
        self.hi == 0.0 && self.lo == 0.0
    }
}

impl One for Dd {
    fn one() -> Dd {
        Dd::ONE
    }
}

impl Num for Dd {
    type FromStrRadixErr = num_traits::ParseFloatError;
    fn from_str_radix(s: &str, radix: u32) -> Result<Dd, Self::FromStrRadixErr> {
        f64::from_str_radix(s, radix).map(Dd::from_f64)
    }
}

impl ToPrimitive for Dd {
    fn to_i64(&self) -> Option<i64> {
        Dd::to_f64(*self).to_i64()
    }
    fn to_u64(&self) -> Option<u64> {
        Dd::to_f64(*self).to_u64()
    }
    fn to_f64(&self) -> Option<f64> {
        Some(Dd::to_f64(*self))
    }
}

impl FromPrimitive for Dd {
    fn from_i64(n: i64) -> Option<Dd> {
        // i64 may exceed 2^53: split into two exact doubles.
        let hi = (n >> 27) as f64 * (1u64 << 27) as f64;
        let lo = (n & ((1 << 27) - 1)) as f64;
        Some(Dd::from_f64(hi) + Dd::from_f64(lo))
    }
    fn from_u64(n: u64) -> Option<Dd> {
        let hi = (n >> 27) as f64 * (1u64 << 27) as f64;
        let lo = (n & ((1 << 27) - 1)) as f64;
        Some(Dd::from_f64(hi) + Dd::from_f64(lo))
    }
    fn from_f64(x: f64) -> Option<Dd> {
        Some(Dd::from_f64(x))
    }
}

impl NumCast for Dd {
    fn from<T: ToPrimitive>(n: T) -> Option<Dd> {
        n.to_f64().map(Dd::from_f64)
    }
}

impl Signed for Dd {
    fn abs(&self) -> Dd {
        Dd::abs(*self)
    }
    fn abs_sub(&self, other: &Dd) -> Dd {
        if self <= other {
            Dd::ZERO
        } else {
            *self - *other
        }
    }
    fn signum(&self) -> Dd {
        Float::signum(*self)
    }
    fn is_positive(&self) -> bool {
        self.hi > 0.0
    }
    fn is_negative(&self) -> bool {
        self.hi < 0.0
    }
}

impl Float for Dd {
    fn nan() -> Dd {
        Dd::from_f64(f64::NAN)
    }
    fn infinity() -> Dd {
        Dd::from_f64(f64::INFINITY)
    }
    fn neg_infinity() -> Dd {
        Dd::from_f64(f64::NEG_INFINITY)
    }
    fn neg_zero() -> Dd {
        Dd::from_f64(-0.0)
    }
    fn min_value() -> Dd {
        Dd::from_f64(f64::MIN)
    }
    fn min_positive_value() -> Dd {
        Dd::from_f64(f64::MIN_POSITIVE)
    }
    fn max_value() -> Dd {
        Dd::from_f64(f64::MAX)
    }
    fn epsilon() -> Dd {
        Dd::EPSILON
    }
    fn is_nan(self) -> bool {
        self.hi.is_nan()
    }
    fn is_infinite(self) -> bool {
        self.hi.is_infinite()
    }
    fn is_finite(self) -> bool {
        self.hi.is_finite()
    }
    fn is_normal(self) -> bool {
        self.hi.is_normal()
    }
    fn classify(self) -> FpCategory {
        self.hi.classify()
    }
    fn floor(self) -> Dd {
        Dd::floor(self)
    }
    fn ceil(self) -> Dd {
        Dd::ceil(self)
    }
    fn round(self) -> Dd {
        Dd::round(self)
    }
    fn trunc(self) -> Dd {
        Dd::trunc(self)
    }
    fn fract(self) -> Dd {
        self - self.trunc()
    }
    fn abs(self) -> Dd {
        Dd::abs(self)
    }
    fn signum(self) -> Dd {
        if self.is_nan() {
            Dd::from_f64(f64::NAN)
        } else if self.hi > 0.0 || (self.hi == 0.0 && self.lo >= 0.0 && self.hi.is_sign_positive())
        {
            Dd::ONE
        } else if self.hi == 0.0 {
            -Dd::ONE
        } else {
            -Dd::ONE
        }
    }
    fn is_sign_positive(self) -> bool {
        self.hi.is_sign_positive()
    }
    fn is_sign_negative(self) -> bool {
        self.hi.is_sign_negative()
    }
    fn mul_add(self, a: Dd, b: Dd) -> Dd {
        self * a + b
    }
    fn recip(self) -> Dd {
        Dd::ONE / self
    }
    fn powi(self, n: i32) -> Dd {
        Dd::powi(self, n)
    }
    fn powf(self, n: Dd) -> Dd {
        Dd::powf(self, n)
    }
    fn sqrt(self) -> Dd {
        Dd::sqrt(self)
    }
    fn exp(self) -> Dd {
        Dd::exp(self)
    }
    fn exp2(self) -> Dd {
        (self * Dd::LN_2).exp()
    }
    fn ln(self) -> Dd {
        Dd::ln(self)
    }
    fn log(self, base: Dd) -> Dd {
        self.ln() / base.ln()
    }
    fn log2(self) -> Dd {
        self.ln() / Dd::LN_2
    }
    fn log10(self) -> Dd {
        self.ln() / Dd::LN_10
    }
    fn max(self, other: Dd) -> Dd {
        if self >= other {
            self
        } else {
            other
        }
    }
    fn min(self, other: Dd) -> Dd {
        if self <= other {
            self
        } else {
            other
        }
    }
    fn abs_sub(self, other: Dd) -> Dd {
        Signed::abs_sub(&self, &other)
    }
    fn cbrt(self) -> Dd {
        if self == Dd::ZERO {
            return Dd::ZERO;
        }
        let neg = self.hi < 0.0;
        let a = self.abs();
        // Newton: y <- y - (y^3 - a)/(3 y^2), seeded from f64.
        let mut y = Dd::from_f64(a.hi.cbrt());
        for _ in 0..2 {
            let y2 = y.sqr();
            y -= (y * y2 - a) / (y2 * Dd::from_f64(3.0));
        }
        if neg {
            -y
        } else {
            y
        }
    }
    fn hypot(self, other: Dd) -> Dd {
        (self.sqr() + other.sqr()).sqrt()
    }
    fn sin(self) -> Dd {
        Dd::sin(self)
    }
    fn cos(self) -> Dd {
        Dd::cos(self)
    }
    fn tan(self) -> Dd {
        Dd::tan(self)
    }
    fn asin(self) -> Dd {
        Dd::asin(self)
    }
    fn acos(self) -> Dd {
        Dd::acos(self)
    }
    fn atan(self) -> Dd {
        Dd::atan(self)
    }
    fn atan2(self, other: Dd) -> Dd {
        Dd::atan2(self, other)
    }
    fn sin_cos(self) -> (Dd, Dd) {
        Dd::sin_cos(self)
    }
    fn exp_m1(self) -> Dd {
        if self.abs().hi < 0.5 {
            // Direct series to avoid cancellation.
            let mut term = self;
            let mut sum = self;
            let mut n = 2.0;
            loop {
                term = term * self / Dd::from_f64(n);
                sum += term;
                n += 1.0;
                if term.hi.abs() < 1e-34 * sum.hi.abs().max(1e-300) || n > 40.0 {
                    break;
                }
            }
            sum
        } else {
            self.exp() - Dd::ONE
        }
    }
    fn ln_1p(self) -> Dd {
        (Dd::ONE + self).ln()
    }
    fn sinh(self) -> Dd {
        let e = self.exp();
        (e - Dd::ONE / e).ldexp(-1)
    }
    fn cosh(self) -> Dd {
        let e = self.exp();
        (e + Dd::ONE / e).ldexp(-1)
    }
    fn tanh(self) -> Dd {
        let e2 = (self.ldexp(1)).exp();
        (e2 - Dd::ONE) / (e2 + Dd::ONE)
    }
    fn asinh(self) -> Dd {
        (self + (self.sqr() + Dd::ONE).sqrt()).ln()
    }
    fn acosh(self) -> Dd {
        (self + (self.sqr() - Dd::ONE).sqrt()).ln()
    }
    fn atanh(self) -> Dd {
        ((Dd::ONE + self) / (Dd::ONE - self)).ln().ldexp(-1)
    }
    fn integer_decode(self) -> (u64, i16, i8) {
        self.hi.integer_decode()
    }
    fn to_degrees(self) -> Dd {
        self * (Dd::from_f64(180.0) / Dd::PI)
    }
    fn to_radians(self) -> Dd {
        self * (Dd::PI / Dd::from_f64(180.0))
    }
}

impl FloatConst for Dd {
    fn E() -> Dd {
        Dd::E
    }
    fn FRAC_1_PI() -> Dd {
        Dd::ONE / Dd::PI
    }
    fn FRAC_1_SQRT_2() -> Dd {
        Dd::from_f64(2.0).sqrt().recip()
    }
    fn FRAC_2_PI() -> Dd {
        Dd::from_f64(2.0) / Dd::PI
    }
    fn FRAC_2_SQRT_PI() -> Dd {
        Dd::from_f64(2.0) / Dd::PI.sqrt()
    }
    fn FRAC_PI_2() -> Dd {
        Dd::FRAC_PI_2
    }
    fn FRAC_PI_3() -> Dd {
        Dd::PI / Dd::from_f64(3.0)
    }
    fn FRAC_PI_4() -> Dd {
        Dd::FRAC_PI_4
    }
    fn FRAC_PI_6() -> Dd {
        Dd::PI / Dd::from_f64(6.0)
    }
    fn FRAC_PI_8() -> Dd {
        Dd::PI / Dd::from_f64(8.0)
    }
    fn LN_10() -> Dd {
        Dd::LN_10
    }
    fn LN_2() -> Dd {
        Dd::LN_2
    }
    fn LOG10_E() -> Dd {
        Dd::ONE / Dd::LN_10
    }
    fn LOG2_E() -> Dd {
        Dd::ONE / Dd::LN_2
    }
    fn PI() -> Dd {
        Dd::PI
    }
    fn SQRT_2() -> Dd {
        Dd::from_f64(2.0).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Dd, b: Dd, tol: f64) -> bool {
        (a - b).abs().to_f64() <= tol * b.abs().to_f64().max(1.0)
    }

    #[test]
    fn add_keeps_small_residue() {
        let one = Dd::ONE;
        let tiny = Dd::from_f64(1e-25);
        let x = one + tiny;
        assert_eq!((x - one).to_f64(), 1e-25);
    }

    #[test]
    fn sqrt_squares_back() {
        for v in [2.0, 3.0, 0.1, 12345.678] {
            let x = Dd::from_f64(v);
            let r = x.sqrt();
            assert!(close(r.sqr(), x, 1e-30), "sqrt {v}");
        }
    }

    #[test]
    fn div_mul_roundtrip() {
        let a = Dd::from_f64(std::f64::consts::PI);
        let b = Dd::from_f64(1.7);
        assert!(close(a / b * b, a, 1e-30));
    }

    #[test]
    fn exp_ln_roundtrip() {
        for v in [0.3, 1.0, 2.5, 10.0, -4.0] {
            let x = Dd::from_f64(v);
            assert!(close(x.exp().ln(), x, 1e-29), "exp/ln {v}");
        }
        assert!(close(Dd::ONE.exp(), Dd::E, 1e-31));
    }

    #[test]
    fn trig_identities() {
        for v in [0.1, 0.7, 1.5, 3.0, -2.2, 6.9] {
            let x = Dd::from_f64(v);
            let (s, c) = x.sin_cos();
            assert!(close(s.sqr() + c.sqr(), Dd::ONE, 1e-30), "pyth {v}");
            assert!(close(Dd::atan2(s, c), x - Dd::TWO_PI * ((x + Dd::PI).hi / (2.0 * std::f64::consts::PI)).floor().into(), 1e-29), "atan2 {v}");
        }
        assert!(close(Dd::PI.ldexp(-1).sin(), Dd::ONE, 1e-31));
    }

    #[test]
    fn inverse_trig() {
        for v in [0.0, 0.3, 0.9, -0.5] {
            let x = Dd::from_f64(v);
            assert!(close(x.asin().sin(), x, 1e-30), "asin {v}");
            assert!(close(x.acos().cos(), x, 1e-30), "acos {v}");
        }
    }

    #[test]
    fn against_f64_everywhere() {
        for v in [0.37, 1.9, 4.2] {
            let x = Dd::from_f64(v);
            assert!((x.sin().to_f64() - v.sin()).abs() < 1e-15);
            assert!((x.exp().to_f64() - v.exp()).abs() < 1e-12 * v.exp());
            assert!((x.ln().to_f64() - v.ln()).abs() < 1e-15);
            assert!((x.sqrt().to_f64() - v.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn display_digits() {
        let third = Dd::ONE / Dd::from_f64(3.0);
        let s = format!("{third}");
        assert!(s.starts_with("3.3333333333333333333333333333"), "{s}");
    }

    #[test]
    fn complex_over_dd_works() {
        use num_complex::Complex;
        let z = Complex::new(Dd::from_f64(3.0), Dd::from_f64(4.0));
        let r = z.sqrt();
        let back = r * r;
        assert!(close(back.re, Dd::from_f64(3.0), 1e-29));
        assert!(close(back.im, Dd::from_f64(4.0), 1e-29));
        assert!(close(z.norm(), Dd::from_f64(5.0), 1e-30));
    }
}
