//! Ellipsoid families, their existence regions and equilibrium coordinates.
//!
//! An admissible shape has semi-axes `b1 > b2 > b3 > 0` with `b1 b2 b3 = 1`.
//! Shapes are indexed by the plane point `(r2, r3) = (b2/b1, b3/b1)`, which
//! ranges over `0 < r3 < r2 < 1`.  Five families of equilibria live over
//! overlapping subsets of this plane: the axis-aligned families S2 and S3
//! (both momentum vectors parallel to a principal axis) and the oblique
//! families I, II and III (momenta in a principal plane).

use crate::specfun::{c1, c2};
use crate::{Error, Real, Result};

/// Inequalities defining the regions are resolved as ties within this
/// absolute margin on the residual.
pub const REGION_TIE_TOL: f64 = 1e-12;

/// A configuration may be called irrotational only while the momentum that
/// should vanish is below this fraction of the surviving one.
const IRROTATIONAL_REL_TOL: f64 = 1e-6;

/// Semi-axes of a unit-volume ellipsoid, ordered `b1 > b2 > b3`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShapeParams<R> {
    pub b1: R,
    pub b2: R,
    pub b3: R,
}

/// Point of the parametric plane, `r2 = b2/b1`, `r3 = b3/b1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlanePoint<R> {
    pub r2: R,
    pub r3: R,
}

impl<R: Real> PlanePoint<R> {
    pub fn new(r2: R, r3: R) -> Result<Self> {
        if !(r3 > R::zero() && r2 > r3 && R::one() > r2) {
            return Err(Error::Domain(format!(
                "plane point ({}, {}) violates 0 < r3 < r2 < 1",
                r2, r3
            )));
        }
        Ok(PlanePoint { r2, r3 })
    }

    pub fn f64(r2: f64, r3: f64) -> Result<PlanePoint<R>> {
        PlanePoint::new(R::of(r2), R::of(r3))
    }
}

impl<R: Real> ShapeParams<R> {
    /// Builds from the two largest axes; `b3` is forced by unit volume.
    pub fn new(b1: R, b2: R) -> Result<Self> {
        let b3 = R::one() / (b1 * b2);
        let s = ShapeParams { b1, b2, b3 };
        if !(b3 > R::zero() && b1 > b2 && b2 > b3) {
            return Err(Error::Domain(format!(
                "axes ({}, {}, {}) violate b1 > b2 > b3 > 0",
                b1, b2, b3
            )));
        }
        Ok(s)
    }

    pub fn from_plane(p: PlanePoint<R>) -> Result<Self> {
        // b1^3 r2 r3 = b1^3 b2 b3 / b1^2 = 1 / b1^... the cube root keeps
        // b1 b2 b3 = 1 to machine precision, unlike powf.
        let b1 = (R::one() / (p.r2 * p.r3)).cbrt();
        ShapeParams::new(b1, p.r2 * b1)
    }

    pub fn plane(&self) -> PlanePoint<R> {
        PlanePoint {
            r2: self.b2 / self.b1,
            r3: self.b3 / self.b1,
        }
    }

    pub fn semi_axes(&self) -> [R; 3] {
        [self.b1, self.b2, self.b3]
    }
}

/// The five equilibrium families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    S2,
    S3,
    TypeI,
    TypeII,
    TypeIII,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::S2,
        Family::S3,
        Family::TypeI,
        Family::TypeII,
        Family::TypeIII,
    ];
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::S2 => "S2",
            Family::S3 => "S3",
            Family::TypeI => "I",
            Family::TypeII => "II",
            Family::TypeIII => "III",
        })
    }
}

/// Relative orientation of the two momentum vectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Regime {
    CounterParallel,
    CoParallel,
    Irrotational,
    Generic,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::CounterParallel => "counter-parallel",
            Regime::CoParallel => "co-parallel",
            Regime::Irrotational => "irrotational",
            Regime::Generic => "generic",
        })
    }
}

/// Family plus regime plus the choice between an equilibrium and its adjoint
/// (the one with the two sphere coordinates exchanged).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct EllipsoidClass {
    pub family: Family,
    pub regime: Regime,
    pub adjoint: bool,
}

impl EllipsoidClass {
    pub fn new(family: Family, regime: Regime, adjoint: bool) -> Result<Self> {
        let ok = match family {
            Family::S2 => matches!(
                regime,
                Regime::CounterParallel | Regime::CoParallel | Regime::Irrotational
            ),
            // S3 momenta are always opposed.
            Family::S3 => matches!(regime, Regime::CounterParallel),
            Family::TypeI => matches!(regime, Regime::Generic | Regime::Irrotational),
            Family::TypeII | Family::TypeIII => matches!(regime, Regime::Generic),
        };
        if !ok {
            return Err(Error::Domain(format!(
                "family {} admits no {} regime",
                family, regime
            )));
        }
        Ok(EllipsoidClass {
            family,
            regime,
            adjoint,
        })
    }
}

/// A point of the reduced phase space that the vector field vanishes at.
/// The momenta conjugate to the axes are zero identically.
#[derive(Clone, Debug)]
pub struct Equilibrium<R> {
    pub b: ShapeParams<R>,
    pub eta_l: [R; 3],
    pub eta_r: [R; 3],
    /// Norm of `eta_l`; radius of the first sphere.
    pub norm_l: R,
    /// Norm of `eta_r`; radius of the second sphere.
    pub norm_r: R,
    pub class: EllipsoidClass,
}

/// The ten scalars controlling existence, all evaluated at one argument
/// triple.  The `n*` fields are `None` when a radicand is negative.
#[derive(Clone, Copy, Debug)]
pub struct ExistenceValues<R> {
    pub g: R,
    pub d: R,
    pub gs_plus: R,
    pub gs_minus: R,
    pub gr_plus: R,
    pub gr_minus: R,
    pub ns_plus: Option<R>,
    pub ns_minus: Option<R>,
    pub nr_plus: Option<R>,
    pub nr_minus: Option<R>,
}

/// Polynomial part of the existence functions; no integrals involved.
pub fn d_poly<R: Real>(x: R, y: R, z: R) -> R {
    let (x2, y2, z2) = (x * x, y * y, z * z);
    x2 * (y2 - z2) + z2 * (R::of(4.0) * z2 - y2)
}

/// Evaluates all existence functions at `(x, y, z)`.  Callers pick the
/// argument permutation appropriate to the family under study.
pub fn existence_functions<R: Real>(x: R, y: R, z: R) -> Result<ExistenceValues<R>> {
    let c1v = c1(x, y, z)?;
    let c2v = c2(x, y, z)?;
    let (x2, y2, z2) = (x * x, y * y, z * z);
    let four = R::of(4.0);
    let half = R::of(0.5);

    let g = x2 * (y2 - z2) * c1v + (y2 - four * z2) * (z2 * c1v + c2v);
    let d = d_poly(x, y, z);

    // A radicand whose cancellation leaves less than this fraction of its
    // term magnitudes is a rounding-level zero; boundary points otherwise
    // land at -1e-16 and spuriously lose their norms.
    let clamp_tol = R::of(1e-12);

    let gs = |s: R| {
        let lead = (x - s * z).powi(4) / (x * z);
        let t1 = (x * y2 * z + s * (x2 * y2 - x2 * z2 + y2 * z2)) * c1v;
        let t2 = (x * z + s * y2) * c2v;
        (lead * (t1 + t2), lead.abs() * (t1.abs() + t2.abs()))
    };
    let (gs_plus, gs_plus_mag) = gs(R::one());
    let (gs_minus, gs_minus_mag) = gs(-R::one());

    let denom = (x2 - y2) * d;
    if denom == R::zero() {
        return Err(Error::Domain(format!(
            "oblique existence functions have a pole at ({}, {}, {})",
            x, y, z
        )));
    }
    let common = (x2 - z2) * g / denom;
    let gr = |s: R| {
        let yz = y + s * (z + z);
        let quart = (y - s * z).powi(4);
        (
            quart * (x2 - yz * yz) * common,
            quart * (x2 + yz * yz) * common.abs(),
        )
    };
    let (gr_plus, gr_plus_mag) = gr(R::one());
    let (gr_minus, gr_minus_mag) = gr(-R::one());

    let norms = |a: R, am: R, b: R, bm: R| {
        let lift = |v: R, m: R| {
            if v < R::zero() && -v <= clamp_tol * m {
                R::zero()
            } else {
                v
            }
        };
        let (a, b) = (lift(a, am), lift(b, bm));
        if a >= R::zero() && b >= R::zero() {
            let (ra, rb) = (a.sqrt(), b.sqrt());
            (Some(half * (ra + rb)), Some(half * (ra - rb)))
        } else {
            (None, None)
        }
    };
    let (ns_plus, ns_minus) = norms(gs_plus, gs_plus_mag, gs_minus, gs_minus_mag);
    let (nr_plus, nr_minus) = norms(gr_plus, gr_plus_mag, gr_minus, gr_minus_mag);

    Ok(ExistenceValues {
        g,
        d,
        gs_plus,
        gs_minus,
        gr_plus,
        gr_minus,
        ns_plus,
        ns_minus,
        nr_plus,
        nr_minus,
    })
}

/// Which families admit an equilibrium over a given plane point.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Regions {
    pub s2: bool,
    pub s3: bool,
    pub type_i: bool,
    pub type_ii: bool,
    pub type_iii: bool,
}

impl Regions {
    pub fn contains(&self, family: Family) -> bool {
        match family {
            Family::S2 => self.s2,
            Family::S3 => self.s3,
            Family::TypeI => self.type_i,
            Family::TypeII => self.type_ii,
            Family::TypeIII => self.type_iii,
        }
    }

    pub fn families(&self) -> Vec<Family> {
        Family::ALL
            .iter()
            .copied()
            .filter(|f| self.contains(*f))
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.families().is_empty()
    }
}

/// Classifies a plane point against the five existence systems.  Boundary
/// points count as members exactly where the defining inequality is
/// non-strict; the set may be empty.
pub fn region_membership<R: Real>(p: PlanePoint<R>) -> Result<Regions> {
    let b = ShapeParams::from_plane(p)?;
    let (b1, b2, b3) = (b.b1, b.b2, b.b3);
    let tie = R::of(REGION_TIE_TOL);
    // >= 0 up to the tie margin.
    let ge = |r: R| r >= -tie;
    // > 0 beyond the tie margin.
    let gt = |r: R| r > tie;

    let v123 = existence_functions(b1, b2, b3)?;
    let v132 = existence_functions(b1, b3, b2)?;

    Ok(Regions {
        s2: ge(v123.gs_minus),
        s3: ge(v132.gs_plus),
        type_i: ge(b2 + b2 - b3 - b1),
        type_ii: ge(b1 - (b2 + b2 + b3)) && gt(-d_poly(b1, b3, b2)),
        type_iii: ge(b1 - (b2 + b3 + b3)) && gt(v123.g),
    })
}

fn require<R: Real>(n: Option<R>, what: &str) -> Result<R> {
    n.ok_or_else(|| Error::Domain(format!("{} is not real here", what)))
}

fn vec_norm<R: Real>(v: [R; 3]) -> R {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Momentum pair `(mu_plus, mu_minus)` for an oblique family; components
/// along the two indicated axes.
fn oblique_pair<R: Real>(
    family: Family,
    b: &ShapeParams<R>,
) -> Result<([R; 3], [R; 3])> {
    let zero = R::zero();
    match family {
        Family::TypeI => {
            let va = existence_functions(b.b1, b.b3, b.b2)?;
            let vb = existence_functions(b.b3, b.b1, b.b2)?;
            let (pa, ma) = (require(va.nr_plus, "N+")?, require(va.nr_minus, "N-")?);
            let (pb, mb) = (require(vb.nr_plus, "N+")?, require(vb.nr_minus, "N-")?);
            Ok(([pa, zero, pb], [ma, zero, mb]))
        }
        Family::TypeII => {
            let va = existence_functions(b.b1, b.b3, b.b2)?;
            let vb = existence_functions(b.b3, b.b1, b.b2)?;
            let (pa, ma) = (require(va.nr_plus, "N+")?, require(va.nr_minus, "N-")?);
            let (pb, mb) = (require(vb.nr_plus, "N+")?, require(vb.nr_minus, "N-")?);
            Ok(([pa, zero, mb], [ma, zero, pb]))
        }
        Family::TypeIII => {
            let va = existence_functions(b.b1, b.b2, b.b3)?;
            let vb = existence_functions(b.b2, b.b1, b.b3)?;
            let (pa, ma) = (require(va.nr_plus, "N+")?, require(va.nr_minus, "N-")?);
            let (pb, mb) = (require(vb.nr_plus, "N+")?, require(vb.nr_minus, "N-")?);
            Ok(([pa, mb, zero], [ma, pb, zero]))
        }
        _ => unreachable!("axis-aligned families handled separately"),
    }
}

/// Reduced-space coordinates of the equilibrium of the requested class over
/// `p`.  The representative is the one the stability charts are built
/// around; the adjoint flag exchanges the two sphere coordinates.
pub fn equilibrium_coordinates<R: Real>(
    p: PlanePoint<R>,
    class: EllipsoidClass,
) -> Result<Equilibrium<R>> {
    // Re-validate so a hand-assembled class cannot smuggle in a bad regime.
    let class = EllipsoidClass::new(class.family, class.regime, class.adjoint)?;
    let b = ShapeParams::from_plane(p)?;
    if !region_membership(p)?.contains(class.family) {
        return Err(Error::Domain(format!(
            "({}, {}) is outside the existence region of family {}",
            p.r2, p.r3, class.family
        )));
    }
    let zero = R::zero();
    let irro_tol = R::of(IRROTATIONAL_REL_TOL);

    let (eta_l, eta_r) = match class.family {
        Family::S2 => {
            let v = existence_functions(b.b1, b.b2, b.b3)?;
            let np = require(v.ns_plus, "N+")?;
            let nm = require(v.ns_minus, "N-")?;
            match class.regime {
                Regime::CounterParallel => {
                    if nm > R::of(REGION_TIE_TOL) {
                        return Err(Error::Domain(
                            "momenta are co-parallel here, not counter-parallel".into(),
                        ));
                    }
                    // South pole against north pole.
                    ([zero, -np, zero], [zero, -nm, zero])
                }
                Regime::CoParallel => {
                    if nm < -R::of(REGION_TIE_TOL) {
                        return Err(Error::Domain(
                            "momenta are counter-parallel here, not co-parallel".into(),
                        ));
                    }
                    ([zero, np, zero], [zero, nm, zero])
                }
                Regime::Irrotational => {
                    if nm.abs() > irro_tol * np {
                        return Err(Error::Domain(
                            "not on the irrotational curve of S2".into(),
                        ));
                    }
                    // The second sphere keeps the surviving momentum.
                    ([zero, zero, zero], [zero, np, zero])
                }
                Regime::Generic => unreachable!(),
            }
        }
        Family::S3 => {
            let v = existence_functions(b.b1, b.b3, b.b2)?;
            let np = require(v.ns_plus, "N+")?;
            let nm = require(v.ns_minus, "N-")?;
            ([zero, zero, -np], [zero, zero, -nm])
        }
        family => {
            let (mu_p, mu_m) = oblique_pair(family, &b)?;
            if class.regime == Regime::Irrotational {
                if vec_norm(mu_m) > irro_tol * vec_norm(mu_p) {
                    return Err(Error::Domain(
                        "not on the irrotational curve of type I".into(),
                    ));
                }
                // mu_minus has collapsed; the survivor sits on sphere two.
                ([zero; 3], mu_p)
            } else {
                (mu_p, mu_m)
            }
        }
    };

    let (eta_l, eta_r) = if class.adjoint {
        (eta_r, eta_l)
    } else {
        (eta_l, eta_r)
    };
    Ok(Equilibrium {
        b,
        norm_l: vec_norm(eta_l),
        norm_r: vec_norm(eta_r),
        eta_l,
        eta_r,
        class,
    })
}

/// Curves of the parametric plane that organise the stability analysis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SpecialCurve {
    /// Zero set of G; pitchfork line of co-parallel S2 configurations.
    S2Pitchfork,
    /// Momenta of equal size and opposite sign collapse to zero.
    S2Irrotational,
    /// Lower existence boundary of S2.
    S2LowerBoundary,
    /// Vanishing second momentum inside the type-I region.
    TypeIIrrotational,
    /// b1 = 2 b2 - b3.
    TypeIBoundary,
    /// b1 = 2 b2 + b3.
    TypeIIBoundary,
    /// b1 = b2 + 2 b3.
    TypeIIIBoundary,
    /// Zero set of G seen as the lower stability boundary of type III.
    TypeIIILowerG,
}

/// Smooth residual whose zero set is the requested curve; sign-definite on
/// each side.
pub fn curve_residual<R: Real>(which: SpecialCurve, p: PlanePoint<R>) -> Result<R> {
    let b = ShapeParams::from_plane(p)?;
    let (b1, b2, b3) = (b.b1, b.b2, b.b3);
    match which {
        SpecialCurve::S2Pitchfork | SpecialCurve::TypeIIILowerG => {
            Ok(existence_functions(b1, b2, b3)?.g)
        }
        SpecialCurve::S2Irrotational => {
            let v = existence_functions(b1, b2, b3)?;
            Ok(v.gs_plus - v.gs_minus)
        }
        SpecialCurve::S2LowerBoundary => Ok(existence_functions(b1, b2, b3)?.gs_minus),
        SpecialCurve::TypeIIrrotational => {
            let (s1, s2) = (b1 * b1, b2 * b2);
            Ok(s1 + s2 + s1 * s1 * s2 * s2 - R::of(3.0) * s1 * s2 * s2 * s2)
        }
        SpecialCurve::TypeIBoundary => Ok(b2 + b2 - b3 - b1),
        SpecialCurve::TypeIIBoundary => Ok(b1 - b2 - b2 - b3),
        SpecialCurve::TypeIIIBoundary => Ok(b1 - b2 - b3 - b3),
    }
}

/// The residual of `curve_residual` as a reusable handle.
pub fn special_curve<R: Real>(which: SpecialCurve) -> impl Fn(PlanePoint<R>) -> Result<R> {
    move |p| curve_residual(which, p)
}
