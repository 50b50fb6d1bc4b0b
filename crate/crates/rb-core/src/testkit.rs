//! Shared helpers for the in-crate test modules: sample points in every
//! family band and root location on the special curves.

use crate::shapes::{curve_residual, region_membership, EllipsoidClass, Family, PlanePoint, Regime, SpecialCurve};

/// Bisects `f` for a sign change in `(lo, hi)`. Panics without a bracket.
pub fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let flo = f(lo);
    let fhi = f(hi);
    assert!(
        flo.signum() != fhi.signum(),
        "no bracket: f({lo}) = {flo}, f({hi}) = {fhi}"
    );
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid).signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// r3-root of a special curve at fixed r2.
pub fn curve_r3(which: SpecialCurve, r2: f64, lo: f64, hi: f64) -> f64 {
    bisect(lo, hi, |r3| {
        curve_residual(which, PlanePoint::f64(r2, r3).unwrap()).unwrap()
    })
}

/// Existence band of the spheroidal S2 family at fixed r2: lower boundary and
/// the momentum-collapse split that separates co- from counter-parallel.
pub struct S2Band {
    pub r2: f64,
    pub lower: f64,
    pub split: f64,
}

pub fn s2_band(r2: f64) -> S2Band {
    let lower = curve_r3(SpecialCurve::S2LowerBoundary, r2, 0.55 * r2, 0.9999 * r2);
    let split = curve_r3(SpecialCurve::S2Irrotational, r2, lower + 1e-9, 0.9999 * r2);
    S2Band { r2, lower, split }
}

/// One representative point per family and regime, with both adjoint flags.
pub fn family_samples() -> Vec<(PlanePoint<f64>, EllipsoidClass)> {
    use Family::*;
    use Regime::*;
    let mut out = Vec::new();

    let band = s2_band(0.5);
    let co = PlanePoint::f64(band.r2, 0.5 * (band.lower + band.split)).unwrap();
    let counter = PlanePoint::f64(band.r2, 0.5 * (band.split + band.r2)).unwrap();
    let irro = PlanePoint::f64(band.r2, band.split).unwrap();
    for adj in [false, true] {
        out.push((counter, EllipsoidClass::new(S2, CounterParallel, adj).unwrap()));
        out.push((co, EllipsoidClass::new(S2, CoParallel, adj).unwrap()));
        out.push((irro, EllipsoidClass::new(S2, Irrotational, adj).unwrap()));
    }

    let s3 = PlanePoint::f64(0.9, 0.5).unwrap();
    assert!(region_membership(s3).unwrap().s3);
    for adj in [false, true] {
        out.push((s3, EllipsoidClass::new(S3, CounterParallel, adj).unwrap()));
    }

    let t1 = PlanePoint::f64(0.9, 0.3).unwrap();
    assert!(region_membership(t1).unwrap().type_i);
    let t1_irro_r3 = curve_r3(SpecialCurve::TypeIIrrotational, 0.62, 0.2, 0.35);
    let t1i = PlanePoint::f64(0.62, t1_irro_r3).unwrap();
    let t2 = PlanePoint::f64(0.15, 0.05).unwrap();
    assert!(region_membership(t2).unwrap().type_ii);
    let t3 = PlanePoint::f64(0.3, 0.05).unwrap();
    assert!(region_membership(t3).unwrap().type_iii);
    for adj in [false, true] {
        out.push((t1, EllipsoidClass::new(TypeI, Generic, adj).unwrap()));
        out.push((t1i, EllipsoidClass::new(TypeI, Irrotational, adj).unwrap()));
        out.push((t2, EllipsoidClass::new(TypeII, Generic, adj).unwrap()));
        out.push((t3, EllipsoidClass::new(TypeIII, Generic, adj).unwrap()));
    }
    out
}
