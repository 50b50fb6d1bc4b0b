//! The reduced Hamiltonian of the rotating self-gravitating ellipsoid, its
//! flow, and canonical charts centred at the relative equilibria.
//!
//! Phase space is the product of the admissible shape half-plane (with its
//! conjugate momenta) and two angular-momentum spheres.  The state keeps
//! `(b1, b2)` only; the third semi-axis is pinned by unit volume.  The sphere
//! factors carry the vector Poisson structure, so the flow there is
//! `eta' = grad H x eta`, the orientation for which the charts below are
//! canonical.
//!
//! Charts come in two kinds.  For the spheroidal families the equilibrium
//! momenta sit on a coordinate pole and the chart is a polar cap around it.
//! For the oblique families the momenta lie in a principal plane away from
//! the poles; the cap is then rotated by a gauge angle chosen so that the
//! equilibrium lands at `(q, p) = (0, sqrt(2 * radius))` on each sphere,
//! which simultaneously removes every shape-momentum cross term of the
//! quadratic part.

use crate::poly::{basis, Poly};
use crate::shapes::{
    equilibrium_coordinates, EllipsoidClass, Equilibrium, Family, PlanePoint,
};
use crate::specfun::{carlson_rd, potential_coeffs, potential_v};
use crate::{Error, Real, Result};

/// Point of the reduced phase space: shape, shape momenta, and the two
/// angular-momentum vectors.  Also used for tangent vectors of the flow.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedState<R> {
    pub b: [R; 2],
    pub c: [R; 2],
    pub m: [R; 6],
}

impl<R: Real> ReducedState<R> {
    pub fn b3(&self) -> R {
        R::one() / (self.b[0] * self.b[1])
    }

    pub fn eta_l(&self) -> [R; 3] {
        [self.m[0], self.m[1], self.m[2]]
    }

    pub fn eta_r(&self) -> [R; 3] {
        [self.m[3], self.m[4], self.m[5]]
    }

    pub fn from_equilibrium(eq: &Equilibrium<R>) -> Self {
        ReducedState {
            b: [eq.b.b1, eq.b.b2],
            c: [R::zero(), R::zero()],
            m: [
                eq.eta_l[0], eq.eta_l[1], eq.eta_l[2], eq.eta_r[0], eq.eta_r[1], eq.eta_r[2],
            ],
        }
    }
}

fn norm3<R: Real>(v: [R; 3]) -> R {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Semi-axes with the unit-volume closure; strict ordering is required.
fn axes<R: Real>(s: &ReducedState<R>) -> Result<(R, R, R)> {
    let (x, y) = (s.b[0], s.b[1]);
    if !(x.is_finite() && y.is_finite()) || x <= R::zero() || y <= R::zero() {
        return Err(Error::Domain("non-finite or non-positive semi-axes".into()));
    }
    let z = R::one() / (x * y);
    if x <= y || y <= z {
        return Err(Error::Domain(format!(
            "semi-axes must satisfy b1 > b2 > b3, got ({x}, {y}, {z})"
        )));
    }
    Ok((x, y, z))
}

/// Reduced Hamiltonian at unit gravitational coupling.
pub fn hamiltonian<R: Real>(s: &ReducedState<R>) -> Result<R> {
    let (x, y, z) = axes(s)?;
    let (x2, y2, z2) = (x * x, y * y, z * z);
    let half = R::of(0.5);
    let [c1, c2] = s.c;
    let m = &s.m;

    let w = x2 * y2 + x2 * z2 + y2 * z2;
    let nc = (y2 + z2) * x2 * c1 * c1 + (x2 + z2) * y2 * c2 * c2
        - R::of(2.0) * z * c1 * c2;
    let t_c = half * nc / w;

    let pair = |ma: R, mb: R, u2: R, v2: R, u: R, v: R| -> R {
        let d = u2 - v2;
        half * ((u2 + v2) * (ma * ma + mb * mb) + R::of(4.0) * u * v * ma * mb) / (d * d)
    };
    let t12 = pair(m[2], m[5], x2, y2, x, y);
    let t13 = pair(m[1], m[4], x2, z2, x, z);
    let t23 = pair(m[0], m[3], y2, z2, y, z);

    Ok(t_c + t12 + t13 + t23 + potential_v(x, y, z)?)
}

/// Unconstrained gradient of the Hamiltonian.  The `db` slots are total
/// derivatives along the unit-volume closure `b3 = 1/(b1 b2)`.
#[derive(Clone, Debug)]
pub struct Gradient<R> {
    pub db: [R; 2],
    pub dc: [R; 2],
    pub dm: [R; 6],
}

pub fn gradient<R: Real>(s: &ReducedState<R>) -> Result<Gradient<R>> {
    let (x, y, z) = axes(s)?;
    let (x2, y2, z2) = (x * x, y * y, z * z);
    let two = R::of(2.0);
    let half = R::of(0.5);
    let [c1, c2] = s.c;
    let m = &s.m;

    let w = x2 * y2 + x2 * z2 + y2 * z2;
    let dc1 = ((y2 + z2) * x2 * c1 - z * c2) / w;
    let dc2 = ((x2 + z2) * y2 * c2 - z * c1) / w;

    // Momentum pairs: value and its two axis partials, shared shape.
    let pair_dm = |ma: R, mb: R, u2: R, v2: R, u: R, v: R| -> (R, R) {
        let d = u2 - v2;
        let dd = d * d;
        (
            ((u2 + v2) * ma + two * u * v * mb) / dd,
            ((u2 + v2) * mb + two * u * v * ma) / dd,
        )
    };
    let (dm3, dm6) = pair_dm(m[2], m[5], x2, y2, x, y);
    let (dm2, dm5) = pair_dm(m[1], m[4], x2, z2, x, z);
    let (dm1, dm4) = pair_dm(m[0], m[3], y2, z2, y, z);

    // Axis partials of the momentum-pair energies.
    let pair_daxis = |ma: R, mb: R, u2: R, v2: R, u: R, v: R| -> (R, R) {
        let d = u2 - v2;
        let dd = d * d;
        let n = (u2 + v2) * (ma * ma + mb * mb) + R::of(4.0) * u * v * ma * mb;
        let a = half * n / dd;
        let nu = two * u * (ma * ma + mb * mb) + R::of(4.0) * v * ma * mb;
        let nv = two * v * (ma * ma + mb * mb) + R::of(4.0) * u * ma * mb;
        // d/du [n / (2 d^2)] with d = u2 - v2.
        let du = half * nu / dd - a * two * two * u / d;
        let dv = half * nv / dd + a * two * two * v / d;
        (du, dv)
    };
    let (t12_x, t12_y) = pair_daxis(m[2], m[5], x2, y2, x, y);
    let (t13_x, t13_z) = pair_daxis(m[1], m[4], x2, z2, x, z);
    let (t23_y, t23_z) = pair_daxis(m[0], m[3], y2, z2, y, z);

    let nc = (y2 + z2) * x2 * c1 * c1 + (x2 + z2) * y2 * c2 * c2 - two * z * c1 * c2;
    let a_c = half * nc / w;
    let nc_x = two * x * (y2 + z2) * c1 * c1 + two * x * y2 * c2 * c2;
    let nc_y = two * y * x2 * c1 * c1 + two * y * (x2 + z2) * c2 * c2;
    let nc_z = two * z * x2 * c1 * c1 + two * z * y2 * c2 * c2 - two * c1 * c2;
    let w_x = two * x * (y2 + z2);
    let w_y = two * y * (x2 + z2);
    let w_z = two * z * (x2 + y2);
    let tc_x = half * nc_x / w - a_c * w_x / w;
    let tc_y = half * nc_y / w - a_c * w_y / w;
    let tc_z = half * nc_z / w - a_c * w_z / w;

    let ft = R::of(4.0) * R::PI() / R::of(3.0);
    let v_x = ft * x * carlson_rd(y2, z2, x2)?;
    let v_y = ft * y * carlson_rd(x2, z2, y2)?;
    let v_z = ft * z * carlson_rd(x2, y2, z2)?;

    let hx = tc_x + t12_x + t13_x + v_x;
    let hy = tc_y + t12_y + t23_y + v_y;
    let hz = tc_z + t13_z + t23_z + v_z;

    // Unit volume chains the third axis: dz/db1 = -z/b1, dz/db2 = -z/b2.
    let db1 = hx - z / x * hz;
    let db2 = hy - z / y * hz;

    Ok(Gradient {
        db: [db1, db2],
        dc: [dc1, dc2],
        dm: [dm1, dm2, dm3, dm4, dm5, dm6],
    })
}

/// Right-hand side of the reduced equations of motion.
pub fn vector_field<R: Real>(s: &ReducedState<R>) -> Result<ReducedState<R>> {
    let g = gradient(s)?;
    let cross = |a: [R; 3], b: [R; 3]| -> [R; 3] {
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    };
    let dl = cross([g.dm[0], g.dm[1], g.dm[2]], s.eta_l());
    let dr = cross([g.dm[3], g.dm[4], g.dm[5]], s.eta_r());
    Ok(ReducedState {
        b: [g.dc[0], g.dc[1]],
        c: [-g.db[0], -g.db[1]],
        m: [dl[0], dl[1], dl[2], dr[0], dr[1], dr[2]],
    })
}

/// Which polar cap (or rotated cap) a sphere chart uses.
#[derive(Clone, Copy, Debug, PartialEq)]
enum SphereForm {
    /// Sphere carries no momentum; no coordinates contributed.
    Absent,
    /// Cap around the negative second axis.
    PoleE2Minus,
    /// Cap around the positive second axis.
    PoleE2Plus,
    /// Cap around the negative third axis.
    PoleE3Minus,
    /// Cap around the positive third axis.
    PoleE3Plus,
    /// Cap around the positive second axis rotated about it, for momenta in
    /// the 1-3 plane.
    RotE13,
    /// Cap around the positive third axis rotated about it, for momenta in
    /// the 1-2 plane.
    RotE12,
}

#[derive(Clone, Debug)]
struct SphereChart<R> {
    form: SphereForm,
    radius: R,
    gamma: R,
    q_star: R,
    p_star: R,
}

impl<R: Real> SphereChart<R> {
    fn absent() -> Self {
        SphereChart {
            form: SphereForm::Absent,
            radius: R::zero(),
            gamma: R::zero(),
            q_star: R::zero(),
            p_star: R::zero(),
        }
    }

    fn present(&self) -> bool {
        self.form != SphereForm::Absent
    }

    /// Chart map at scalar arguments; `(q, p)` are absolute chart values.
    fn point(&self, q: R, p: R) -> Result<[R; 3]> {
        let quarter = R::of(0.25);
        let half = R::of(0.5);
        let lam = self.radius;
        let w2 = lam - quarter * (q * q + p * p);
        if w2 < R::zero() {
            return Err(Error::Domain(
                "chart coordinates leave the momentum sphere".into(),
            ));
        }
        let w = w2.sqrt();
        let pole = lam - half * (q * q + p * p);
        let (cg, sg) = (self.gamma.cos(), self.gamma.sin());
        Ok(match self.form {
            SphereForm::Absent => [R::zero(), R::zero(), R::zero()],
            SphereForm::PoleE2Minus => [q * w, -pole, p * w],
            SphereForm::PoleE2Plus => [-q * w, pole, p * w],
            SphereForm::PoleE3Minus => [p * w, q * w, -pole],
            SphereForm::PoleE3Plus => [p * w, -q * w, pole],
            SphereForm::RotE13 => [w * (p * sg - q * cg), pole, w * (p * cg + q * sg)],
            SphereForm::RotE12 => [w * (p * cg - q * sg), -w * (p * sg + q * cg), pole],
        })
    }

    /// Chart map on jets; `(q, p)` already include the chart-point offset.
    fn jet(&self, q: &Poly<R>, p: &Poly<R>) -> [Poly<R>; 3] {
        let b = &q.basis;
        let quarter = R::of(0.25);
        let half = R::of(0.5);
        let lam = Poly::constant(b, self.radius);
        let qq = q.mul(q);
        let pp = p.mul(p);
        let sum = qq.add(&pp);
        let w2 = lam.sub(&sum.scale_real(quarter));
        let w = w2.sqrt_jet();
        let pole = lam.sub(&sum.scale_real(half));
        let (cg, sg) = (self.gamma.cos(), self.gamma.sin());
        let qw = q.mul(&w);
        let pw = p.mul(&w);
        match self.form {
            SphereForm::Absent => [Poly::zero(b), Poly::zero(b), Poly::zero(b)],
            SphereForm::PoleE2Minus => [qw, pole.neg(), pw],
            SphereForm::PoleE2Plus => [qw.neg(), pole, pw],
            SphereForm::PoleE3Minus => [pw, qw, pole.neg()],
            SphereForm::PoleE3Plus => [pw, qw.neg(), pole],
            SphereForm::RotE13 => [
                pw.scale_real(sg).sub(&qw.scale_real(cg)),
                pole,
                pw.scale_real(cg).add(&qw.scale_real(sg)),
            ],
            SphereForm::RotE12 => [
                pw.scale_real(cg).sub(&qw.scale_real(sg)),
                pw.scale_real(sg).add(&qw.scale_real(cg)).neg(),
                pole,
            ],
        }
    }
}

fn sphere_chart_for<R: Real>(family: Family, eta: [R; 3], radius: R) -> Result<SphereChart<R>> {
    if radius == R::zero() {
        return Ok(SphereChart::absent());
    }
    let zero = R::zero();
    let chart = match family {
        Family::S2 => SphereChart {
            form: if eta[1] < zero {
                SphereForm::PoleE2Minus
            } else {
                SphereForm::PoleE2Plus
            },
            radius,
            gamma: zero,
            q_star: zero,
            p_star: zero,
        },
        Family::S3 => SphereChart {
            form: if eta[2] < zero {
                SphereForm::PoleE3Minus
            } else {
                SphereForm::PoleE3Plus
            },
            radius,
            gamma: zero,
            q_star: zero,
            p_star: zero,
        },
        Family::TypeI | Family::TypeII => SphereChart {
            form: SphereForm::RotE13,
            radius,
            gamma: eta[0].atan2(eta[2]),
            q_star: zero,
            p_star: (R::of(2.0) * radius).sqrt(),
        },
        Family::TypeIII => SphereChart {
            form: SphereForm::RotE12,
            radius,
            gamma: -eta[1].atan2(eta[0]),
            q_star: zero,
            p_star: (R::of(2.0) * radius).sqrt(),
        },
    };
    Ok(chart)
}

/// Canonical chart centred at a relative equilibrium.  Coordinates are
/// ordered positions-then-momenta: `(db1, db2, q.., dc1, dc2, p..)` with one
/// `(q, p)` pair per sphere that carries momentum.
#[derive(Clone, Debug)]
pub struct Chart<R: Real> {
    pub class: EllipsoidClass,
    pub equilibrium: Equilibrium<R>,
    pub dof: usize,
    sphere_l: SphereChart<R>,
    sphere_r: SphereChart<R>,
}

pub fn build_chart<R: Real>(p: PlanePoint<R>, class: EllipsoidClass) -> Result<Chart<R>> {
    let eq = equilibrium_coordinates(p, class)?;
    let sphere_l = sphere_chart_for(class.family, eq.eta_l, eq.norm_l)?;
    let sphere_r = sphere_chart_for(class.family, eq.eta_r, eq.norm_r)?;
    let dof = 2 + usize::from(sphere_l.present()) + usize::from(sphere_r.present());
    Ok(Chart {
        class,
        equilibrium: eq,
        dof,
        sphere_l,
        sphere_r,
    })
}

impl<R: Real> Chart<R> {
    pub fn dim(&self) -> usize {
        2 * self.dof
    }

    /// Gauge angles of the two sphere caps (zero when untwisted or absent).
    pub fn gammas(&self) -> [R; 2] {
        [self.sphere_l.gamma, self.sphere_r.gamma]
    }

    /// Chart-point sphere coordinates, `(q*, p*)` per sphere.
    pub fn sphere_centre(&self) -> [[R; 2]; 2] {
        [
            [self.sphere_l.q_star, self.sphere_l.p_star],
            [self.sphere_r.q_star, self.sphere_r.p_star],
        ]
    }

    /// Map chart deviations `u` to a phase-space point; `u = 0` is the
    /// equilibrium.
    pub fn to_state(&self, u: &[R]) -> Result<ReducedState<R>> {
        if u.len() != self.dim() {
            return Err(Error::Domain(format!(
                "chart expects {} coordinates, got {}",
                self.dim(),
                u.len()
            )));
        }
        let dof = self.dof;
        let eq = &self.equilibrium;
        let b = [eq.b.b1 + u[0], eq.b.b2 + u[1]];
        let c = [u[dof], u[dof + 1]];
        let mut m = [R::zero(); 6];
        let mut slot = 2;
        for (k, sph) in [&self.sphere_l, &self.sphere_r].into_iter().enumerate() {
            if sph.present() {
                let q = sph.q_star + u[slot];
                let p = sph.p_star + u[dof + slot];
                let eta = sph.point(q, p)?;
                m[3 * k] = eta[0];
                m[3 * k + 1] = eta[1];
                m[3 * k + 2] = eta[2];
                slot += 1;
            }
        }
        let s = ReducedState { b, c, m };
        axes(&s)?;
        Ok(s)
    }
}

/// Graded Taylor expansion of the Hamiltonian in chart coordinates.
#[derive(Clone, Debug)]
pub struct TaylorExpansion<R> {
    /// Energy at the equilibrium.
    pub h0: R,
    /// Largest linear coefficient; vanishes at a genuine equilibrium.
    pub h1_norm: R,
    pub h2: Poly<R>,
    pub h3: Poly<R>,
    pub h4: Poly<R>,
}

/// Expand the Hamiltonian about the chart centre up to `degree` (2 to 4).
/// Shape and momentum factors compose exactly in jet arithmetic; the
/// self-potential enters through its axis-derivative table.
pub fn taylor_expand<R: Real>(chart: &Chart<R>, degree: usize) -> Result<TaylorExpansion<R>> {
    if !(2..=4).contains(&degree) {
        return Err(Error::Domain(format!(
            "expansion degree must be 2..=4, got {degree}"
        )));
    }
    let dof = chart.dof;
    let nv = 2 * dof;
    let bas = basis(nv, degree);
    let eq = &chart.equilibrium;

    let var = |i: usize| -> Poly<R> { Poly::var(&bas, i) };
    let cst = |v: R| -> Poly<R> { Poly::constant(&bas, v) };

    let x = cst(eq.b.b1).add(&var(0));
    let y = cst(eq.b.b2).add(&var(1));
    let z = x.mul(&y).recip_jet();
    let c1 = var(dof);
    let c2 = var(dof + 1);

    let mut mjet: Vec<Poly<R>> = vec![Poly::zero(&bas); 6];
    let mut slot = 2;
    for (k, sph) in [&chart.sphere_l, &chart.sphere_r].into_iter().enumerate() {
        if sph.present() {
            let q = cst(sph.q_star).add(&var(slot));
            let p = cst(sph.p_star).add(&var(dof + slot));
            let eta = sph.jet(&q, &p);
            for (j, e) in eta.into_iter().enumerate() {
                mjet[3 * k + j] = e;
            }
            slot += 1;
        }
    }

    let x2 = x.mul(&x);
    let y2 = y.mul(&y);
    let z2 = z.mul(&z);
    let two = R::of(2.0);
    let _half = R::of(0.5);

    let w = x2.mul(&y2).add(&x2.mul(&z2)).add(&y2.mul(&z2));
    let nc = y2
        .add(&z2)
        .mul(&x2)
        .mul(&c1.mul(&c1))
        .add(&x2.add(&z2).mul(&y2).mul(&c2.mul(&c2)))
        .sub(&z.mul(&c1).mul(&c2).scale_real(two));
    let t_c = nc.mul(&w.scale_real(two).recip_jet());

    let pair = |ma: &Poly<R>, mb: &Poly<R>, u2: &Poly<R>, v2: &Poly<R>| -> Poly<R> {
        let d = u2.sub(v2);
        let dd2 = d.mul(&d).scale_real(two);
        let uv = u2.mul(v2).sqrt_jet();
        let n = u2
            .add(v2)
            .mul(&ma.mul(ma).add(&mb.mul(mb)))
            .add(&uv.mul(&ma.mul(mb)).scale_real(R::of(4.0)));
        n.mul(&dd2.recip_jet())
    };
    let t12 = pair(&mjet[2], &mjet[5], &x2, &y2);
    let t13 = pair(&mjet[1], &mjet[4], &x2, &z2);
    let t23 = pair(&mjet[0], &mjet[3], &y2, &z2);

    // Potential jet: trivariate Taylor table composed with the axis jets.
    let co = potential_coeffs(eq.b.b1, eq.b.b2, eq.b.b3, degree)?;
    let xb = var(0);
    let yb = var(1);
    let zb = z.sub(&cst(eq.b.b3));
    let mut pows_x = vec![cst(R::one())];
    let mut pows_y = vec![cst(R::one())];
    let mut pows_z = vec![cst(R::one())];
    for k in 1..=degree {
        pows_x.push(pows_x[k - 1].mul(&xb));
        pows_y.push(pows_y[k - 1].mul(&yb));
        pows_z.push(pows_z[k - 1].mul(&zb));
    }
    let mut v = Poly::zero(&bas);
    for level in 0..=degree {
        for a in 0..=level {
            for b in 0..=level - a {
                let cc = level - a - b;
                let coeff = co[&(a as u8, b as u8, cc as u8)];
                if coeff == R::zero() {
                    continue;
                }
                let term = pows_x[a].mul(&pows_y[b]).mul(&pows_z[cc]);
                v = v.add(&term.scale_real(coeff));
            }
        }
    }

    let h = t_c.add(&t12).add(&t13).add(&t23).add(&v);
    let h0 = h.c[0];
    let h1_norm = h.graded(1).max_abs();
    let h2 = h.graded(2);
    let scale = R::one().max(h2.max_abs());
    if h1_norm > R::of(1e-9) * scale {
        return Err(Error::NormalForm(format!(
            "linear term {h1_norm} survives at the chart centre"
        )));
    }
    Ok(TaylorExpansion {
        h0,
        h1_norm,
        h2,
        h3: h.graded(3),
        h4: h.graded(4),
    })
}

/// Summary of a flow integration.
#[derive(Clone, Debug)]
pub struct FlowSummary<R> {
    pub steps: usize,
    pub state: ReducedState<R>,
    /// Largest |H - H(0)| seen along the trajectory.
    pub energy_drift: R,
    /// Largest sphere-radius deviation before reprojection.
    pub casimir_drift: R,
    /// Largest coordinate-wise distance from the initial state.
    pub max_displacement: R,
}

/// Implicit-midpoint integration of the reduced flow.  The midpoint rule
/// conserves the sphere radii exactly (they are quadratic invariants); the
/// per-step reprojection only removes the fixed-point solver residual.
pub fn integrate_flow<R: Real>(
    start: &ReducedState<R>,
    t_max: R,
    dt: R,
) -> Result<FlowSummary<R>> {
    if dt <= R::zero() || t_max <= R::zero() {
        return Err(Error::Domain("time step and horizon must be positive".into()));
    }
    let h0 = hamiltonian(start)?;
    let r_l = norm3(start.eta_l());
    let r_r = norm3(start.eta_r());

    let pack = |s: &ReducedState<R>| -> [R; 10] {
        [
            s.b[0], s.b[1], s.c[0], s.c[1], s.m[0], s.m[1], s.m[2], s.m[3], s.m[4], s.m[5],
        ]
    };
    let unpack = |v: &[R; 10]| -> ReducedState<R> {
        ReducedState {
            b: [v[0], v[1]],
            c: [v[2], v[3]],
            m: [v[4], v[5], v[6], v[7], v[8], v[9]],
        }
    };

    let mut cur = pack(start);
    let start_v = cur;
    let mut t = R::zero();
    let mut steps = 0usize;
    let mut energy_drift = R::zero();
    let mut casimir_drift = R::zero();
    let mut max_disp = R::zero();
    let half = R::of(0.5);
    let tol = R::eps() * R::of(64.0);

    while t < t_max {
        let step = dt.min(t_max - t);
        // Fixed-point solve for the midpoint g = x + (step/2) f(g).
        let mut g = cur;
        let f0 = pack(&vector_field(&unpack(&cur))?);
        for i in 0..10 {
            g[i] = cur[i] + half * step * f0[i];
        }
        let mut converged = false;
        for _ in 0..64 {
            let fg = pack(&vector_field(&unpack(&g))?);
            let mut next = cur;
            let mut delta = R::zero();
            for i in 0..10 {
                next[i] = cur[i] + half * step * fg[i];
                delta = delta.max((next[i] - g[i]).abs());
            }
            g = next;
            let scale = R::one().max(g.iter().fold(R::zero(), |a, &v| a.max(v.abs())));
            if delta <= tol * scale {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::RootFind(
                "implicit midpoint fixed point stalled; reduce dt".into(),
            ));
        }
        for i in 0..10 {
            cur[i] = (g[i] - cur[i]) * R::of(2.0) + cur[i];
        }

        // Sphere projection: measure the residual radius drift, then remove it.
        for (radius, base) in [(r_l, 4usize), (r_r, 7usize)] {
            if radius > R::zero() {
                let n = norm3([cur[base], cur[base + 1], cur[base + 2]]);
                casimir_drift = casimir_drift.max((n - radius).abs());
                if n > R::zero() {
                    let f = radius / n;
                    for k in 0..3 {
                        cur[base + k] = cur[base + k] * f;
                    }
                }
            }
        }
        let s = unpack(&cur);
        let e = hamiltonian(&s)?;
        energy_drift = energy_drift.max((e - h0).abs());
        for i in 0..10 {
            max_disp = max_disp.max((cur[i] - start_v[i]).abs());
        }
        t = t + step;
        steps += 1;
    }

    Ok(FlowSummary {
        steps,
        state: unpack(&cur),
        energy_drift,
        casimir_drift,
        max_displacement: max_disp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes::Regime;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_state(rng: &mut StdRng) -> ReducedState<f64> {
        loop {
            let r2: f64 = rng.random_range(0.15..0.95);
            let r3: f64 = rng.random_range(0.05..r2 - 0.03);
            let b1 = (1.0 / (r2 * r3)).cbrt();
            let s = ReducedState {
                b: [b1, r2 * b1],
                c: [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)],
                m: std::array::from_fn(|_| rng.random_range(-1.0..1.0)),
            };
            if axes(&s).is_ok() {
                return s;
            }
        }
    }

    use crate::testkit::family_samples;

    #[test]
    fn hamiltonian_is_even_in_the_momentum_flips() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..50 {
            let s = random_state(&mut rng);
            let h = hamiltonian(&s).unwrap();
            let mut flip_pair = s.clone();
            flip_pair.m[2] = -flip_pair.m[2];
            flip_pair.m[5] = -flip_pair.m[5];
            let mut flip_all = s.clone();
            for v in flip_all.m.iter_mut() {
                *v = -*v;
            }
            let scale = 1.0 + h.abs();
            assert!((hamiltonian(&flip_pair).unwrap() - h).abs() < 1e-14 * scale);
            assert!((hamiltonian(&flip_all).unwrap() - h).abs() < 1e-14 * scale);
        }
    }

    #[test]
    fn shape_kinetic_form_is_positive_definite() {
        let mut rng = StdRng::seed_from_u64(12);
        for _ in 0..200 {
            let s = random_state(&mut rng);
            let (x, y, z) = axes(&s).unwrap();
            let w = x * x * y * y + x * x * z * z + y * y * z * z;
            let k11 = (y * y + z * z) * x * x / w;
            let k22 = (x * x + z * z) * y * y / w;
            let k12 = -z / w;
            assert!(k11 > 0.0);
            assert!(k11 * k22 - k12 * k12 > 0.0, "indefinite at b = {:?}", s.b);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = StdRng::seed_from_u64(13);
        for _ in 0..100 {
            let s = random_state(&mut rng);
            let g = gradient(&s).unwrap();
            let flat = |s: &ReducedState<f64>, i: usize| -> f64 {
                match i {
                    0 | 1 => s.b[i],
                    2 | 3 => s.c[i - 2],
                    _ => s.m[i - 4],
                }
            };
            let set = |s: &mut ReducedState<f64>, i: usize, v: f64| match i {
                0 | 1 => s.b[i] = v,
                2 | 3 => s.c[i - 2] = v,
                _ => s.m[i - 4] = v,
            };
            let want = |i: usize| -> f64 {
                match i {
                    0 | 1 => g.db[i],
                    2 | 3 => g.dc[i - 2],
                    _ => g.dm[i - 4],
                }
            };
            let gscale = (0..10).fold(1.0f64, |a, i| a.max(want(i).abs()));
            for i in 0..10 {
                let x0 = flat(&s, i);
                let h = 1e-5 * (1.0 + x0.abs());
                let eval = |v: f64| -> f64 {
                    let mut t = s.clone();
                    set(&mut t, i, v);
                    hamiltonian(&t).unwrap()
                };
                let fd = (-eval(x0 + 2.0 * h) + 8.0 * eval(x0 + h) - 8.0 * eval(x0 - h)
                    + eval(x0 - 2.0 * h))
                    / (12.0 * h);
                assert!(
                    (fd - want(i)).abs() < 1e-7 * gscale,
                    "coordinate {i}: analytic {} vs fd {fd}",
                    want(i)
                );
            }
        }
    }

    #[test]
    fn equilibria_are_fixed_points_of_the_flow() {
        for (p, class) in family_samples() {
            let eq = equilibrium_coordinates(p, class).unwrap();
            let s = ReducedState::from_equilibrium(&eq);
            let g = gradient(&s).unwrap();
            let gn = g
                .db
                .iter()
                .chain(g.dc.iter())
                .chain(g.dm.iter())
                .fold(0.0f64, |a, v| a.max(v.abs()));
            let f = vector_field(&s).unwrap();
            let residual = f
                .b
                .iter()
                .chain(f.c.iter())
                .chain(f.m.iter())
                .fold(0.0f64, |a, v| a.max(v.abs()));
            assert!(
                residual <= 1e-9 * (1.0 + gn),
                "{class:?} at ({}, {}): residual {residual}",
                p.r2,
                p.r3
            );
        }
    }

    #[test]
    fn chart_centre_reproduces_the_equilibrium() {
        for (p, class) in family_samples() {
            let chart = build_chart(p, class).unwrap();
            let s = chart.to_state(&vec![0.0; chart.dim()]).unwrap();
            let eq = ReducedState::from_equilibrium(&chart.equilibrium);
            for i in 0..6 {
                assert!(
                    (s.m[i] - eq.m[i]).abs() <= 1e-12 * (1.0 + eq.m[i].abs()),
                    "{class:?}: m{} {} vs {}",
                    i + 1,
                    s.m[i],
                    eq.m[i]
                );
            }
            assert_eq!(s.b, eq.b);
        }
    }

    /// Push the chart symplectic form through a finite-difference Jacobian
    /// and compare with the bracket tensor of the ambient coordinates.
    #[test]
    fn charts_push_the_canonical_form_to_the_bracket() {
        let mut rng = StdRng::seed_from_u64(14);
        for (p, class) in family_samples() {
            let chart = build_chart(p, class).unwrap();
            let n = chart.dim();
            let dof = chart.dof;
            for trial in 0..3 {
                let u0: Vec<f64> = if trial == 0 {
                    vec![0.0; n]
                } else {
                    (0..n).map(|_| rng.random_range(-0.05..0.05)).collect()
                };
                let pack = |s: &ReducedState<f64>| -> [f64; 10] {
                    [
                        s.b[0], s.b[1], s.c[0], s.c[1], s.m[0], s.m[1], s.m[2], s.m[3], s.m[4],
                        s.m[5],
                    ]
                };
                let centre = pack(&chart.to_state(&u0).unwrap());
                // 4th-order central differences of the chart map.
                let h = 1e-4;
                let mut jac = vec![[0.0f64; 10]; n];
                for j in 0..n {
                    let at = |t: f64| -> [f64; 10] {
                        let mut u = u0.clone();
                        u[j] += t;
                        pack(&chart.to_state(&u).unwrap())
                    };
                    let (p2, p1, m1, m2) = (at(2.0 * h), at(h), at(-h), at(-2.0 * h));
                    for i in 0..10 {
                        jac[j][i] =
                            (-p2[i] + 8.0 * p1[i] - 8.0 * m1[i] + m2[i]) / (12.0 * h);
                    }
                }
                // Bracket tensor at the image point.
                let mut pi = [[0.0f64; 10]; 10];
                pi[0][2] = 1.0;
                pi[1][3] = 1.0;
                pi[2][0] = -1.0;
                pi[3][1] = -1.0;
                for base in [4usize, 7] {
                    let (m1v, m2v, m3v) = (centre[base], centre[base + 1], centre[base + 2]);
                    pi[base][base + 1] = m3v;
                    pi[base + 1][base] = -m3v;
                    pi[base][base + 2] = -m2v;
                    pi[base + 2][base] = m2v;
                    pi[base + 1][base + 2] = m1v;
                    pi[base + 2][base + 1] = -m1v;
                }
                // dPhi J dPhi^T, with J the canonical form of the chart.
                let scale = 1.0 + centre.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                for r in 0..10 {
                    for cc in 0..10 {
                        let mut acc = 0.0;
                        for k in 0..dof {
                            acc += jac[k][r] * jac[k + dof][cc] - jac[k + dof][r] * jac[k][cc];
                        }
                        assert!(
                            (acc - pi[r][cc]).abs() < 1e-6 * scale,
                            "{class:?} trial {trial}: entry ({r},{cc}) {acc} vs {}",
                            pi[r][cc]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn taylor_jet_tracks_the_hamiltonian() {
        let mut rng = StdRng::seed_from_u64(15);
        for (p, class) in family_samples() {
            let chart = build_chart(p, class).unwrap();
            let te = taylor_expand(&chart, 4).unwrap();
            let n = chart.dim();
            let coeff_scale = 1.0 + te.h2.max_abs().max(te.h3.max_abs()).max(te.h4.max_abs());
            for _ in 0..10 {
                let r = 0.03;
                let u: Vec<f64> = (0..n).map(|_| rng.random_range(-r..r)).collect();
                let direct = hamiltonian(&chart.to_state(&u).unwrap()).unwrap();
                let jet =
                    te.h0 + te.h2.eval(&u) + te.h3.eval(&u) + te.h4.eval(&u);
                let rad = u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                // Remainder is fifth order with coefficients comparable to
                // the retained ones.
                let bound = 200.0 * coeff_scale * rad.powi(5);
                assert!(
                    (direct - jet).abs() < bound,
                    "{class:?}: |direct - jet| = {} at radius {rad}, bound {bound}",
                    (direct - jet).abs()
                );
            }
            assert!(te.h1_norm <= 1e-9 * (1.0 + te.h2.max_abs()));
        }
    }

    /// For the aligned families the sphere caps sit on poles and the
    /// momentum-pair flips of the Hamiltonian act as `(q, p) -> (-q, -p)`,
    /// so no monomial of odd sphere degree can appear.  The oblique
    /// families break this and keep genuine cubic couplings.
    #[test]
    fn sphere_parity_separates_aligned_from_oblique_families() {
        for (p, class) in family_samples() {
            let chart = build_chart(p, class).unwrap();
            let te = taylor_expand(&chart, 4).unwrap();
            let dof = chart.dof;
            let sphere_degree = |exp: &[u8]| -> u32 {
                let mut d = 0u32;
                for i in 2..dof {
                    d += u32::from(exp[i]) + u32::from(exp[dof + i]);
                }
                d
            };
            let odd_part = |poly: &Poly<f64>| -> f64 {
                let mut worst = 0.0f64;
                for (i, c) in poly.c.iter().enumerate() {
                    if sphere_degree(&poly.basis.exps[i]) % 2 == 1 {
                        worst = worst.max(c.abs());
                    }
                }
                worst
            };
            let scale = 1.0 + te.h2.max_abs().max(te.h3.max_abs()).max(te.h4.max_abs());
            match class.family {
                Family::S2 | Family::S3 => {
                    let odd = odd_part(&te.h2).max(odd_part(&te.h3)).max(odd_part(&te.h4));
                    assert!(odd <= 1e-9 * scale, "{class:?}: odd sphere terms {odd}");
                }
                Family::TypeII | Family::TypeIII => {
                    assert!(
                        te.h3.max_abs() > 1e-6,
                        "{class:?}: cubic part unexpectedly small"
                    );
                }
                Family::TypeI => {}
            }
        }
    }

    /// The gauge angles must remove every shape-momentum cross term pairing
    /// a shape deviation with a sphere `p` deviation.
    #[test]
    fn gauge_kills_shape_momentum_cross_terms() {
        for (p, class) in family_samples() {
            if matches!(class.family, Family::S2 | Family::S3) {
                continue;
            }
            let chart = build_chart(p, class).unwrap();
            let te = taylor_expand(&chart, 2).unwrap();
            let dof = chart.dof;
            let nv = 2 * dof;
            let scale = 1.0 + te.h2.max_abs();
            for shape in 0..2 {
                for sphere in 2..dof {
                    let mut exp = vec![0u8; nv];
                    exp[shape] = 1;
                    exp[dof + sphere] += 1;
                    let c = te.h2.coeff(&exp).abs();
                    assert!(
                        c <= 1e-10 * scale,
                        "{class:?}: coefficient of shape {shape} x momentum {sphere} is {c}"
                    );
                }
            }
        }
    }

    /// One-point cross-check of the jet pipeline against high-order central
    /// differences of the composed map.  Tolerances follow the stencil's
    /// rounding floor, which grows with the derivative order.
    #[test]
    fn jet_coefficients_cross_check_finite_differences() {
        let samples = family_samples();
        let (p, class) = samples
            .iter()
            .find(|(_, c)| c.family == Family::S2 && c.regime == Regime::CoParallel && !c.adjoint)
            .copied()
            .unwrap();
        let chart = build_chart(p, class).unwrap();
        let te = taylor_expand(&chart, 4).unwrap();
        let n = chart.dim();
        let f = |u: &[f64]| -> f64 { hamiltonian(&chart.to_state(u).unwrap()).unwrap() };

        // 8th-order first-derivative stencil applied recursively.
        fn d1(f: &dyn Fn(&[f64]) -> f64, u: &[f64], i: usize, h: f64) -> f64 {
            let at = |t: f64| -> f64 {
                let mut v = u.to_vec();
                v[i] += t;
                f(&v)
            };
            (3.0 * (at(-4.0 * h) - at(4.0 * h)) + 32.0 * (at(3.0 * h) - at(-3.0 * h))
                + 168.0 * (at(-2.0 * h) - at(2.0 * h))
                + 672.0 * (at(h) - at(-h)))
                / (840.0 * h)
        }
        let u0 = vec![0.0; n];
        let h = 1e-2;

        // Quadratic coefficients: d2/(du_i du_j) halved on the diagonal.
        for (i, j, tol) in [(0usize, 0usize, 1e-8), (0, 1, 1e-8), (2, n - 1, 1e-8)] {
            let g = |u: &[f64]| d1(&f, u, i, h);
            let fd = d1(&g, &u0, j, h);
            let fd = if i == j { 0.5 * fd } else { fd };
            let mut exp = vec![0u8; n];
            exp[i] += 1;
            exp[j] += 1;
            let jet = te.h2.coeff(&exp);
            assert!(
                (fd - jet).abs() < tol * (1.0 + jet.abs()),
                "H2[{i},{j}]: fd {fd} vs jet {jet}"
            );
        }
        // One cubic and one quartic coefficient.
        let g = |u: &[f64]| d1(&f, u, 0, h);
        let gg = |u: &[f64]| d1(&g, u, 0, h);
        let fd3 = d1(&gg, &u0, 1, h) / 2.0;
        let mut exp = vec![0u8; n];
        exp[0] = 2;
        exp[1] = 1;
        let jet3 = te.h3.coeff(&exp);
        assert!(
            (fd3 - jet3).abs() < 1e-5 * (1.0 + jet3.abs()),
            "H3: fd {fd3} vs jet {jet3}"
        );
        let ggg = |u: &[f64]| d1(&gg, u, 0, h);
        let fd4 = d1(&ggg, &u0, 0, h) / 24.0;
        let mut exp = vec![0u8; n];
        exp[0] = 4;
        let jet4 = te.h4.coeff(&exp);
        assert!(
            (fd4 - jet4).abs() < 1e-3 * (1.0 + jet4.abs()),
            "H4: fd {fd4} vs jet {jet4}"
        );
    }

    /// The same expansion in double-double arithmetic pins every coefficient
    /// far below the contract accuracy.
    #[test]
    fn jet_coefficients_agree_with_double_double() {
        use crate::dd::Dd;
        let p64: PlanePoint<f64> = PlanePoint::f64(0.15, 0.05).unwrap();
        let class = EllipsoidClass::new(Family::TypeII, Regime::Generic, false).unwrap();
        let te64 = taylor_expand(&build_chart(p64, class).unwrap(), 4).unwrap();
        let pdd: PlanePoint<Dd> = PlanePoint::f64(0.15, 0.05).unwrap();
        let tedd = taylor_expand(&build_chart(pdd, class).unwrap(), 4).unwrap();
        for (a, b) in [(&te64.h2, &tedd.h2), (&te64.h3, &tedd.h3), (&te64.h4, &tedd.h4)] {
            let scale = 1.0 + a.max_abs();
            for (i, c) in a.c.iter().enumerate() {
                let d = b.c[i].hi - c;
                assert!(
                    d.abs() <= 1e-12 * scale,
                    "coefficient {i} drifts by {d}"
                );
            }
        }
    }

    #[test]
    fn midpoint_flow_conserves_energy_and_spheres() {
        let p = PlanePoint::f64(0.9, 0.5).unwrap();
        let class = EllipsoidClass::new(Family::S3, Regime::CounterParallel, false).unwrap();
        let eq = equilibrium_coordinates(p, class).unwrap();
        let s0 = ReducedState::from_equilibrium(&eq);
        let run = integrate_flow(&s0, 100.0, 1e-3).unwrap();
        assert!(run.energy_drift <= 1e-8, "drift {}", run.energy_drift);
        assert!(run.casimir_drift <= 1e-10, "casimir {}", run.casimir_drift);

        // A small kick must stay small: the family is spectrally stable here.
        let mut kicked = s0.clone();
        kicked.c[0] += 1e-4;
        kicked.m[0] += 1e-4;
        let run = integrate_flow(&kicked, 50.0, 1e-3).unwrap();
        assert!(
            run.max_displacement <= 1e-2,
            "wandered {} from the equilibrium",
            run.max_displacement
        );
        assert!(run.casimir_drift <= 1e-10);
    }
}
