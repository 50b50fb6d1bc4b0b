//! Linear stability of the equilibrium families.
//!
//! The entry point is [`build_linearisation`], which differentiates the
//! Hamiltonian twice in the equilibrium chart and forms L = J * Hess(H2).
//! From there [`frequencies`] extracts the spectrum through the closed-form
//! roots of the characteristic polynomial in lambda^2 (the chart blocks keep
//! it at degree <= 4) and cross-checks against a general eigensolver.
//! Three symplectic changes of coordinates bring H2 to a model form:
//! [`markeev_normal_form`] for fully elliptic spectra,
//! [`versal_normal_form`] when one frequency crosses zero (it stays real and
//! smooth through the crossing), and [`hopf_normal_form`] for a colliding
//! pair entering a 1:-1 resonance. [`classify`] reduces the spectrum to a
//! stability verdict.

use crate::hamilton::Chart;
use crate::linalg::{self, Mat};
use crate::shapes::{EllipsoidClass, Family, Regime};
use crate::{Error, Real, Result};
use num_complex::Complex;
use num_traits::Zero;

/// Entries of Hess(H2) that must vanish by the structure of the chart, as a
/// relative tolerance on the largest entry.
pub const ZERO_BLOCK_TOL: f64 = 1e-10;

/// Agreement required between the closed-form spectrum and the general
/// eigensolver, relative to the largest eigenvalue.
pub const SPECTRUM_TOL: f64 = 1e-9;

/// Sparsity pattern of the linearisation. Aligned charts (sphere sections
/// taken at a pole) decouple the axis pair from the sphere pair; oblique
/// charts couple all positions. Reduced means the three degree-of-freedom
/// irrotational subsystem.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockLayout {
    AlignedFull,
    AlignedReduced,
    ObliqueReduced,
    ObliqueFull,
}

impl BlockLayout {
    fn for_class(class: EllipsoidClass, dof: usize) -> Result<BlockLayout> {
        let layout = match (class.family, class.regime, dof) {
            (Family::S2, Regime::Irrotational, 3) => BlockLayout::AlignedReduced,
            (Family::S2 | Family::S3, _, 4) => BlockLayout::AlignedFull,
            (Family::TypeI, Regime::Irrotational, 3) => BlockLayout::ObliqueReduced,
            (Family::TypeI | Family::TypeII | Family::TypeIII, _, 4) => BlockLayout::ObliqueFull,
            _ => {
                return Err(Error::Domain(format!(
                    "no linearisation layout for {} {} with {} degrees of freedom",
                    class.family, class.regime, dof
                )))
            }
        };
        Ok(layout)
    }
}

/// L = J * Hess(H2) in chart coordinates, together with the Hessian itself
/// and the verified sparsity pattern.
#[derive(Clone, Debug)]
pub struct Linearisation<R: Real> {
    pub class: EllipsoidClass,
    pub dof: usize,
    pub n: usize,
    pub layout: BlockLayout,
    pub l: Mat<R>,
    pub hess: Mat<R>,
}

/// The symplectic structure matrix on 2*dof coordinates (positions first).
pub fn standard_j<R: Real>(dof: usize) -> Mat<R> {
    let n = 2 * dof;
    let mut j = Mat::zeros(n, n);
    for i in 0..dof {
        j[(i, dof + i)] = R::one();
        j[(dof + i, i)] = -R::one();
    }
    j
}

fn hessian_of_quadratic<R: Real>(h2: &crate::poly::Poly<R>, n: usize) -> Mat<R> {
    let mut hess = Mat::zeros(n, n);
    for (k, e) in h2.basis.exps.iter().enumerate() {
        let c = h2.c[k];
        if c == R::zero() {
            continue;
        }
        let deg: u8 = e.iter().sum();
        if deg != 2 {
            continue;
        }
        let vars: Vec<usize> = (0..n).filter(|&i| e[i] > 0).collect();
        match vars.len() {
            1 => {
                let i = vars[0];
                hess[(i, i)] = hess[(i, i)] + c + c;
            }
            2 => {
                let (i, j) = (vars[0], vars[1]);
                hess[(i, j)] = hess[(i, j)] + c;
                hess[(j, i)] = hess[(j, i)] + c;
            }
            _ => unreachable!("degree-two monomial in more than two variables"),
        }
    }
    hess
}

/// True where the Hessian must vanish for the given layout. Indices are into
/// the full 2*dof square; `dof` positions come first.
fn required_zero(layout: BlockLayout, dof: usize, i: usize, j: usize) -> bool {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    // Momenta never mix with positions: the chart rotation about each sphere
    // centre removes every such term.
    if i < dof && j >= dof {
        return true;
    }
    let (bi, bj) = (i % dof, j % dof);
    let momenta = i >= dof;
    match layout {
        BlockLayout::AlignedFull => {
            // Axis pair (0, 1) and sphere pair (2, 3) decouple on both sides.
            (bi < 2) != (bj < 2)
        }
        BlockLayout::AlignedReduced => (bi < 2) != (bj < 2),
        BlockLayout::ObliqueReduced => {
            if momenta {
                // Momentum side keeps the aligned split.
                (bi < 2) != (bj < 2)
            } else {
                // Positions couple fully except for the pure sphere entry.
                bi == 2 && bj == 2
            }
        }
        BlockLayout::ObliqueFull => {
            // Only the momentum side splits into the two canonical pairs.
            momenta && (bi < 2) != (bj < 2)
        }
    }
}

/// Second-order expansion of the Hamiltonian in the chart, packaged as the
/// Hamiltonian matrix L = J * Hess(H2) with its sparsity verified.
pub fn build_linearisation<R: Real>(chart: &Chart<R>) -> Result<Linearisation<R>> {
    let te = crate::hamilton::taylor_expand(chart, 2)?;
    let dof = chart.dof;
    let n = 2 * dof;
    let hess = hessian_of_quadratic(&te.h2, n);
    let layout = BlockLayout::for_class(chart.class, dof)?;

    let scale = hess.max_abs_real().max(R::one());
    let tol = R::of(ZERO_BLOCK_TOL) * scale;
    for i in 0..n {
        for j in 0..n {
            let asym = (hess[(i, j)] - hess[(j, i)]).abs();
            if asym > tol {
                return Err(Error::Linalg(format!(
                    "Hessian asymmetry {asym} at ({i}, {j})"
                )));
            }
            if required_zero(layout, dof, i, j) && hess[(i, j)].abs() > tol {
                return Err(Error::Linalg(format!(
                    "structural zero violated at ({i}, {j}): {}",
                    hess[(i, j)]
                )));
            }
        }
    }

    let l = standard_j::<R>(dof).matmul(&hess);
    let mut trace = R::zero();
    for i in 0..n {
        trace = trace + l[(i, i)];
    }
    if trace.abs() > tol {
        return Err(Error::Linalg(format!("linearisation trace {trace}")));
    }
    Ok(Linearisation {
        class: chart.class,
        dof,
        n,
        layout,
        l,
        hess,
    })
}

impl<R: Real> Linearisation<R> {
    /// Position block of the Hessian.
    fn hess_pos(&self) -> Mat<R> {
        let d = self.dof;
        let mut m = Mat::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] = self.hess[(i, j)];
            }
        }
        m
    }

    /// Momentum block of the Hessian.
    fn hess_mom(&self) -> Mat<R> {
        let d = self.dof;
        let mut m = Mat::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] = self.hess[(d + i, d + j)];
            }
        }
        m
    }

    /// J L is minus the Hessian; the residual is an exactness check.
    pub fn jl_symmetry_residual(&self) -> R {
        let jl = standard_j::<R>(self.dof).matmul(&self.l);
        let mut worst = R::zero();
        for i in 0..self.n {
            for j in 0..self.n {
                let d = (jl[(i, j)] - jl[(j, i)]).abs();
                if d > worst {
                    worst = d;
                }
            }
        }
        worst
    }
}

/// Spectral role of one mode (a plus/minus eigenvalue pair).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrequencyTag {
    /// omega real positive: elliptic pair +-i omega.
    PositiveReal,
    /// Double zero eigenvalue; the frequency vanishes.
    Zero,
    /// omega = -i |omega|: a real saddle pair of eigenvalues.
    PureImaginary,
    /// One member of a complex quadruplet; comes in adjacent pairs.
    Quadruplet,
}

#[derive(Clone, Debug)]
pub struct ModeFrequency<R: Real> {
    pub omega: Complex<R>,
    pub tag: FrequencyTag,
}

/// Frequencies of the linearised system, in the canonical mode order of the
/// layout (axis pair before sphere pair for aligned charts, descending
/// magnitude with degenerating modes last otherwise).
#[derive(Clone, Debug)]
pub struct Frequencies<R: Real> {
    pub modes: Vec<ModeFrequency<R>>,
    /// The lambda^2 root backing each mode.
    pub mu: Vec<Complex<R>>,
    /// |det L - prod omega_i^2| relative to the determinant scale.
    pub det_residual: R,
    pub warnings: Vec<String>,
}

impl<R: Real> Frequencies<R> {
    /// The full eigenvalue list {+-i omega_k}.
    pub fn eigenvalues(&self) -> Vec<Complex<R>> {
        let i = Complex::new(R::zero(), R::one());
        let mut out = Vec::with_capacity(2 * self.modes.len());
        for m in &self.modes {
            out.push(i * m.omega);
            out.push(-i * m.omega);
        }
        out
    }

    pub fn all_elliptic(&self) -> bool {
        self.modes.iter().all(|m| m.tag == FrequencyTag::PositiveReal)
    }

    fn real_omega(&self, k: usize) -> R {
        self.modes[k].omega.re
    }
}

/// Monic characteristic polynomial coefficients [c_0, ..., c_{k-1}] of a
/// small square matrix, Faddeev-LeVerrier recursion.
fn char_poly<R: Real>(m: &Mat<R>) -> Vec<R> {
    let k = m.nr;
    let mut coeffs = vec![R::zero(); k];
    let mut mm = m.clone();
    let mut c_prev = -trace(&mm);
    coeffs[k - 1] = c_prev;
    for step in 2..=k {
        let mut shifted = mm.clone();
        // mm <- M * (mm + c_prev I)
        for i in 0..k {
            shifted[(i, i)] = shifted[(i, i)] + c_prev;
        }
        mm = m.matmul(&shifted);
        c_prev = -trace(&mm) / R::of(step as f64);
        coeffs[k - step] = c_prev;
    }
    coeffs
}

fn trace<R: Real>(m: &Mat<R>) -> R {
    let mut t = R::zero();
    for i in 0..m.nr {
        t = t + m[(i, i)];
    }
    t
}

fn ceval<R: Real>(coeffs: &[R], x: Complex<R>) -> (Complex<R>, Complex<R>) {
    // Horner for the monic polynomial and its derivative.
    let k = coeffs.len();
    let mut p = Complex::new(R::one(), R::zero());
    let mut dp = Complex::zero();
    for j in (0..k).rev() {
        dp = dp * x + p;
        p = p * x + Complex::new(coeffs[j], R::zero());
    }
    (p, dp)
}

fn polish_root<R: Real>(coeffs: &[R], mut x: Complex<R>) -> Complex<R> {
    for _ in 0..40 {
        let (p, dp) = ceval(coeffs, x);
        if dp.norm() == R::zero() {
            break;
        }
        let step = p / dp;
        x = x - step;
        if step.norm() <= R::eps() * (R::one() + x.norm()) {
            break;
        }
    }
    x
}

/// Roots of the monic real polynomial x^k + c_{k-1} x^{k-1} + ... + c_0 for
/// k <= 4, closed form plus Newton polish.
fn poly_roots<R: Real>(coeffs: &[R]) -> Vec<Complex<R>> {
    let k = coeffs.len();
    let c = |x: R| Complex::new(x, R::zero());
    let raw: Vec<Complex<R>> = match k {
        1 => vec![c(-coeffs[0])],
        2 => {
            let (b, c0) = (coeffs[1], coeffs[0]);
            let disc = c(b * b - R::of(4.0) * c0).sqrt();
            let half = Complex::new(R::of(0.5), R::zero());
            vec![(-c(b) + disc) * half, (-c(b) - disc) * half]
        }
        3 => {
            let (a2, a1, a0) = (coeffs[2], coeffs[1], coeffs[0]);
            // Depress: x = t - a2/3.
            let shift = a2 / R::of(3.0);
            let p = a1 - a2 * a2 / R::of(3.0);
            let q = a0 - a2 * a1 / R::of(3.0) + R::of(2.0 / 27.0) * a2 * a2 * a2;
            let half_q = c(q * R::of(0.5));
            let disc = (half_q * half_q + c(p * p * p / R::of(27.0))).sqrt();
            let mut u = (-half_q + disc).cbrt();
            if u.norm() < R::eps().sqrt() {
                u = (-half_q - disc).cbrt();
            }
            let roots = if u.norm() == R::zero() {
                vec![Complex::zero(), Complex::zero(), Complex::zero()]
            } else {
                let w = Complex::new(R::of(-0.5), R::of(0.75).sqrt());
                let mut out = Vec::with_capacity(3);
                let mut uu = u;
                for _ in 0..3 {
                    out.push(uu - c(p / R::of(3.0)) / uu);
                    uu = uu * w;
                }
                out
            };
            roots.into_iter().map(|t| t - c(shift)).collect()
        }
        4 => {
            let (a3, a2, a1, a0) = (coeffs[3], coeffs[2], coeffs[1], coeffs[0]);
            // Depress: x = y - a3/4.
            let sh = a3 * R::of(0.25);
            let p = a2 - R::of(0.375) * a3 * a3;
            let q = a1 - R::of(0.5) * a3 * a2 + R::of(0.125) * a3 * a3 * a3;
            let r = a0 - R::of(0.25) * a3 * a1 + R::of(1.0 / 16.0) * a3 * a3 * a2
                - R::of(3.0 / 256.0) * a3 * a3 * a3 * a3;
            let scale = p.abs().max(q.abs()).max(r.abs()).max(R::one());
            let mut ys: Vec<Complex<R>> = Vec::with_capacity(4);
            if q.abs() <= R::eps() * R::of(16.0) * scale {
                // Biquadratic.
                let disc = c(p * p - R::of(4.0) * r).sqrt();
                for s in [R::one(), -R::one()] {
                    let z = (c(-p) + disc * Complex::new(s, R::zero()))
                        * Complex::new(R::of(0.5), R::zero());
                    let w = z.sqrt();
                    ys.push(w);
                    ys.push(-w);
                }
            } else {
                // Resolvent cubic z^3 - p z^2 - 4 r z + (4 p r - q^2).
                let res = poly_roots(&[
                    R::of(4.0) * p * r - q * q,
                    R::of(-4.0) * r,
                    -p,
                ]);
                // Any root works; prefer the one giving the best-conditioned
                // square root.
                let z = res
                    .into_iter()
                    .max_by(|x, y| {
                        (*x - c(p)).norm().partial_cmp(&(*y - c(p)).norm()).unwrap()
                    })
                    .unwrap();
                let m = (z - c(p)).sqrt();
                let two = R::of(2.0);
                let qq = c(q) / (m * Complex::new(two, R::zero()));
                for s in [R::one(), -R::one()] {
                    let sc = Complex::new(s, R::zero());
                    // y^2 -+ m y + (z/2 +- q/(2m)) = 0
                    let b = -m * sc;
                    let cc = z * Complex::new(R::of(0.5), R::zero()) + qq * sc;
                    let disc = (b * b - cc * Complex::new(R::of(4.0), R::zero())).sqrt();
                    ys.push((-b + disc) * Complex::new(R::of(0.5), R::zero()));
                    ys.push((-b - disc) * Complex::new(R::of(0.5), R::zero()));
                }
            }
            ys.into_iter().map(|y| y - c(sh)).collect()
        }
        _ => unreachable!("characteristic degree above four"),
    };
    let mut out: Vec<Complex<R>> = raw.into_iter().map(|x| polish_root(coeffs, x)).collect();
    // Snap conjugate symmetry: tiny imaginary parts collapse to the axis.
    let scale = out
        .iter()
        .map(|z| z.norm())
        .fold(R::zero(), |a, b| if b > a { b } else { a })
        .max(R::eps());
    let imag_tol = R::of(1e-9) * scale;
    for z in out.iter_mut() {
        if z.im.abs() <= imag_tol {
            *z = Complex::new(z.re, R::zero());
        }
    }
    out
}

/// One lambda^2 root turned into a tagged frequency.
fn mode_of_mu<R: Real>(mu: Complex<R>, scale: R) -> ModeFrequency<R> {
    let zero_tol = R::of(1e-11) * scale;
    let tag = if mu.im != R::zero() {
        FrequencyTag::Quadruplet
    } else if mu.re.abs() <= zero_tol {
        return ModeFrequency {
            omega: Complex::zero(),
            tag: FrequencyTag::Zero,
        };
    } else if mu.re < R::zero() {
        FrequencyTag::PositiveReal
    } else {
        FrequencyTag::PureImaginary
    };
    // omega = -i sqrt(mu) with the principal branch maps negative real mu to
    // a positive frequency and keeps Im(omega) <= 0 otherwise.
    let i = Complex::new(R::zero(), R::one());
    let mut omega = -i * mu.sqrt();
    match tag {
        FrequencyTag::PositiveReal => omega = Complex::new(omega.re.abs(), R::zero()),
        FrequencyTag::PureImaginary => omega = Complex::new(R::zero(), -omega.im.abs()),
        _ => {}
    }
    ModeFrequency { omega, tag }
}

fn tag_rank(tag: FrequencyTag) -> usize {
    match tag {
        FrequencyTag::PositiveReal => 0,
        FrequencyTag::Zero => 1,
        FrequencyTag::PureImaginary => 2,
        FrequencyTag::Quadruplet => 3,
    }
}

/// Sorts the mu-roots of one block into canonical mode order and tags them.
fn order_block<R: Real>(mus: Vec<Complex<R>>) -> Vec<(Complex<R>, ModeFrequency<R>)> {
    let scale = mus
        .iter()
        .map(|z| z.norm())
        .fold(R::zero(), |a, b| if b > a { b } else { a })
        .max(R::eps());
    let mut tagged: Vec<(Complex<R>, ModeFrequency<R>)> = mus
        .into_iter()
        .map(|mu| (mu, mode_of_mu(mu, scale)))
        .collect();
    tagged.sort_by(|a, b| {
        let ra = tag_rank(a.1.tag);
        let rb = tag_rank(b.1.tag);
        ra.cmp(&rb).then_with(|| {
            match a.1.tag {
                // Larger elliptic frequency first.
                FrequencyTag::PositiveReal => b.1.omega.re.partial_cmp(&a.1.omega.re).unwrap(),
                // Quadruplet partner with negative real part first.
                FrequencyTag::Quadruplet => a.1.omega.re.partial_cmp(&b.1.omega.re).unwrap(),
                _ => b.1.omega.norm().partial_cmp(&a.1.omega.norm()).unwrap(),
            }
        })
    });
    tagged
}

fn submat<R: Real>(m: &Mat<R>, rows: &[usize], cols: &[usize]) -> Mat<R> {
    let mut out = Mat::zeros(rows.len(), cols.len());
    for (i, &r) in rows.iter().enumerate() {
        for (j, &c) in cols.iter().enumerate() {
            out[(i, j)] = m[(r, c)];
        }
    }
    out
}

/// Spectrum of the linearisation through the closed-form characteristic
/// roots in lambda^2, with a general-eigensolver cross-check.
pub fn frequencies<R: Real>(lin: &Linearisation<R>) -> Result<Frequencies<R>> {
    let b = lin.hess_mom();
    let mut cmat = lin.hess_pos();
    for v in cmat.data.iter_mut() {
        *v = -*v;
    }

    // lambda^2 is an eigenvalue of B*C; aligned layouts split into blocks.
    let ordered: Vec<(Complex<R>, ModeFrequency<R>)> = match lin.layout {
        BlockLayout::AlignedFull => {
            let mut out = Vec::new();
            for pair in [[0usize, 1], [2, 3]] {
                let bb = submat(&b, &pair, &pair);
                let cc = submat(&cmat, &pair, &pair);
                let roots = poly_roots(&char_poly(&bb.matmul(&cc)));
                out.extend(order_block(roots));
            }
            out
        }
        BlockLayout::AlignedReduced => {
            let pair = [0usize, 1];
            let bb = submat(&b, &pair, &pair);
            let cc = submat(&cmat, &pair, &pair);
            let mut out = order_block(poly_roots(&char_poly(&bb.matmul(&cc))));
            let mu3 = Complex::new(b[(2, 2)] * cmat[(2, 2)], R::zero());
            out.extend(order_block(vec![mu3]));
            out
        }
        BlockLayout::ObliqueReduced | BlockLayout::ObliqueFull => {
            order_block(poly_roots(&char_poly(&b.matmul(&cmat))))
        }
    };

    let mu: Vec<Complex<R>> = ordered.iter().map(|x| x.0).collect();
    let modes: Vec<ModeFrequency<R>> = ordered.into_iter().map(|x| x.1).collect();

    // Cross-check the closed-form route against a Schur-based eigensolver.
    let lf = nalgebra::DMatrix::from_fn(lin.n, lin.n, |i, j| lin.l[(i, j)].to_f64().unwrap());
    let general = lf.complex_eigenvalues();
    let mine: Vec<Complex<f64>> = {
        let i = Complex::new(R::zero(), R::one());
        modes
            .iter()
            .flat_map(|m| [i * m.omega, -(i * m.omega)])
            .map(|z| Complex::new(z.re.to_f64().unwrap(), z.im.to_f64().unwrap()))
            .collect()
    };
    let lscale = general.iter().fold(1.0f64, |a, z| a.max(z.norm()));
    for e in general.iter() {
        let best = mine
            .iter()
            .map(|z| (z - e).norm())
            .fold(f64::INFINITY, f64::min);
        if best <= SPECTRUM_TOL * lscale {
            continue;
        }
        // Defective eigenvalues smear as (eps ||L||)^(1/m) in the Schur
        // route, so clustered eigenvalues get slack scaled to the cluster.
        let cluster = general
            .iter()
            .filter(|z| (*z - e).norm() <= 2e-3 * lscale)
            .count();
        let slack = if cluster >= 4 {
            2e-3
        } else if cluster >= 2 {
            1e-5
        } else {
            0.0
        };
        if best > slack * lscale {
            return Err(Error::Linalg(format!(
                "closed-form spectrum misses eigenvalue {e}: nearest at distance {best:e}"
            )));
        }
    }

    // det L = prod omega_i^2.
    let det = linalg::det(&Mat::from_real(&lin.l));
    let mut prod = Complex::new(R::one(), R::zero());
    for m in &modes {
        prod = prod * m.omega * m.omega;
    }
    let det_scale = det.norm().max(R::one());
    let det_residual = (det - prod).norm() / det_scale;

    let mut warnings = Vec::new();
    let max_omega = modes
        .iter()
        .map(|m| m.omega.norm())
        .fold(R::zero(), |a, b| if b > a { b } else { a });
    let mut min_gap = R::infinity();
    for i in 0..modes.len() {
        for j in i + 1..modes.len() {
            let g = (modes[i].omega - modes[j].omega).norm();
            if g < min_gap {
                min_gap = g;
            }
        }
    }
    if min_gap < R::of(1e-8) * max_omega {
        warnings.push(format!(
            "near-resonant frequencies: smallest separation {min_gap}"
        ));
    }
    if min_gap < R::of(1e-10) * max_omega {
        warnings.push("frequency extraction ill-conditioned at this point".into());
    }

    Ok(Frequencies {
        modes,
        mu,
        det_residual,
        warnings,
    })
}

/// Which model form a transform targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransformVariant {
    Markeev,
    VersalPitchfork,
    VersalSaddleCentre,
    Hopf,
}

/// Branch of the colliding-pair construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HopfBranch {
    /// Two distinct real frequencies on the stable side.
    Separate,
    /// On the collision curve itself.
    Collision,
    /// Complex quadruplet on the unstable side.
    Quadruplet,
}

#[derive(Clone, Debug)]
pub struct HopfData<R: Real> {
    /// Coefficient of (y3^2 + y4^2)/2 in the target form; vanishes on the
    /// collision curve and is negative beyond it.
    pub m_coeff: R,
    /// Coefficient of the rotation x3 y4 - x4 y3; equals the collision
    /// frequency on the curve.
    pub n_coeff: R,
    pub a1: Complex<R>,
    pub a2: Complex<R>,
    pub branch: HopfBranch,
    /// Rank of the eigenvector matrix (drops by two on the curve).
    pub eigvec_rank: usize,
}

/// A linear symplectic change u = T z with the target linearisation U it
/// conjugates L into.
#[derive(Clone, Debug)]
pub struct SymplecticTransform<R: Real> {
    pub variant: TransformVariant,
    pub t: Mat<R>,
    pub u: Mat<R>,
    /// Mode frequencies in the column order of `t`.
    pub omegas: Vec<Complex<R>>,
    /// Energy signs of the elliptic modes; the versal slot carries the sign
    /// of the degenerating pair, collision pairs carry zero.
    pub signs: Vec<i8>,
    pub symplectic_residual: R,
    pub conjugation_residual: R,
    pub warnings: Vec<String>,
    pub hopf: Option<HopfData<R>>,
}

fn max_abs<R: Real>(v: &[R]) -> R {
    v.iter().map(|x| x.abs()).fold(R::zero(), |a, b| if b > a { b } else { a })
}

/// One elliptic mode, gauge fixed: s has no position components, the leading
/// entry of -s (momenta scanned first) is positive, and r J s = 1 after the
/// scaling by k.
struct ModeVectors<R> {
    s: Vec<R>,
    r: Vec<R>,
    k: R,
    sigma: i8,
}

fn eigvec<R: Real>(l: &Mat<R>, lambda: Complex<R>) -> Result<Vec<Complex<R>>> {
    let n = l.nr;
    let mut a = Mat::from_real(l);
    for i in 0..n {
        a[(i, i)] = a[(i, i)] - lambda;
    }
    let svd = linalg::svd(&a)?;
    if svd.s[n - 1] > R::of(1e-6) * svd.s[0].max(R::one()) {
        return Err(Error::Linalg(format!(
            "no eigenvector at {lambda}: smallest singular value {}",
            svd.s[n - 1]
        )));
    }
    Ok(svd.null_vector())
}

fn gauge_mode<R: Real>(lin: &Linearisation<R>, omega: R) -> Result<ModeVectors<R>> {
    let dof = lin.dof;
    let lambda = Complex::new(R::zero(), omega);
    let mut v = eigvec(&lin.l, lambda)?;

    // Rotate the phase so the position components become purely imaginary;
    // they share a phase because the position and momentum sides decouple in
    // the Hessian.
    let mut sum_sq = Complex::<R>::zero();
    for x in v.iter().take(dof) {
        sum_sq = sum_sq + *x * *x;
    }
    if sum_sq.norm() > R::zero() {
        let theta = (R::PI() - sum_sq.arg()) * R::of(0.5);
        let rot = Complex::new(theta.cos(), theta.sin());
        for x in v.iter_mut() {
            *x = *x * rot;
        }
    }

    let mut s: Vec<R> = v.iter().map(|z| z.re).collect();
    let mut r: Vec<R> = v.iter().map(|z| z.im).collect();

    // r . (J s) must be positive; conjugating the eigenvector flips it.
    let mut nbar = R::zero();
    for i in 0..dof {
        nbar = nbar + r[i] * s[dof + i] - r[dof + i] * s[i];
    }
    let vec_scale = max_abs(&s).max(max_abs(&r));
    if nbar.abs() < R::of(1e-12) * vec_scale * vec_scale {
        return Err(Error::NormalForm(format!(
            "degenerate pairing for frequency {omega}"
        )));
    }
    if nbar < R::zero() {
        for x in r.iter_mut() {
            *x = -*x;
        }
        nbar = -nbar;
    }

    // Deterministic overall sign: scanning momenta first, the leading entry
    // of the position column -s comes out positive.
    let col_scale = max_abs(&s);
    let scan: Vec<usize> = (dof..2 * dof).chain(0..dof).collect();
    for &row in &scan {
        if s[row].abs() > R::of(1e-8) * col_scale {
            if -s[row] < R::zero() {
                for x in s.iter_mut() {
                    *x = -*x;
                }
                for x in r.iter_mut() {
                    *x = -*x;
                }
            }
            break;
        }
    }

    let quad = |w: &[R]| -> R {
        let mut acc = R::zero();
        for i in 0..2 * dof {
            for j in 0..2 * dof {
                acc = acc + w[i] * lin.hess[(i, j)] * w[j];
            }
        }
        acc
    };
    let energy = quad(&s) + quad(&r);
    let sigma = if energy >= R::zero() { 1 } else { -1 };

    Ok(ModeVectors {
        s,
        r,
        k: nbar.sqrt().recip(),
        sigma,
    })
}

fn set_col<R: Real>(t: &mut Mat<R>, col: usize, v: &[R]) {
    for (i, &x) in v.iter().enumerate() {
        t[(i, col)] = x;
    }
}

fn elliptic_columns<R: Real>(t: &mut Mat<R>, lin: &Linearisation<R>, mode: usize, omega: R) -> Result<i8> {
    let mv = gauge_mode(lin, omega)?;
    let dof = lin.dof;
    let cx: Vec<R> = mv.s.iter().map(|&x| -mv.k * x).collect();
    let cy: Vec<R> = mv.r.iter().map(|&x| mv.k * x).collect();
    set_col(t, mode, &cx);
    set_col(t, dof + mode, &cy);
    Ok(mv.sigma)
}

fn residuals<R: Real>(lin: &Linearisation<R>, t: &Mat<R>, u: &Mat<R>) -> (R, R) {
    let j = standard_j::<R>(lin.dof);
    let tjt = t.transpose().matmul(&j).matmul(t);
    let mut sym = R::zero();
    for i in 0..lin.n {
        for k in 0..lin.n {
            let d = (tjt[(i, k)] - j[(i, k)]).abs();
            if d > sym {
                sym = d;
            }
        }
    }
    let lt = lin.l.matmul(t);
    let tu = t.matmul(u);
    let mut conj = R::zero();
    for i in 0..lin.n {
        for k in 0..lin.n {
            let d = (lt[(i, k)] - tu[(i, k)]).abs();
            if d > conj {
                conj = d;
            }
        }
    }
    (sym, conj / lin.l.max_abs_real().max(R::one()))
}

fn rotation_target<R: Real>(u: &mut Mat<R>, dof: usize, mode: usize, sigma: i8, omega: R) {
    let sw = R::of(sigma as f64) * omega;
    u[(mode, dof + mode)] = sw;
    u[(dof + mode, mode)] = -sw;
}

/// Fully elliptic linear normal form: T is built from the eigenvectors mode
/// by mode and brings H2 to sum_i sigma_i omega_i (x_i^2 + y_i^2)/2.
pub fn markeev_normal_form<R: Real>(lin: &Linearisation<R>) -> Result<SymplecticTransform<R>> {
    let freqs = frequencies(lin)?;
    if !freqs.all_elliptic() {
        return Err(Error::NormalForm(
            "elliptic normal form needs a positive real spectrum".into(),
        ));
    }
    let dof = lin.dof;
    let mut t = Mat::zeros(lin.n, lin.n);
    let mut u = Mat::zeros(lin.n, lin.n);
    let mut signs = Vec::with_capacity(dof);
    let mut omegas = Vec::with_capacity(dof);
    for mode in 0..dof {
        let w = freqs.real_omega(mode);
        let sigma = elliptic_columns(&mut t, lin, mode, w)?;
        rotation_target(&mut u, dof, mode, sigma, w);
        signs.push(sigma);
        omegas.push(freqs.modes[mode].omega);
    }
    let (sym, conj) = residuals(lin, &t, &u);
    Ok(SymplecticTransform {
        variant: TransformVariant::Markeev,
        t,
        u,
        omegas,
        signs,
        symplectic_residual: sym,
        conjugation_residual: conj,
        warnings: freqs.warnings,
        hopf: None,
    })
}

fn dephase_to_real<R: Real>(v: &[Complex<R>]) -> Vec<R> {
    let mut sum_sq = Complex::<R>::zero();
    for x in v {
        sum_sq = sum_sq + *x * *x;
    }
    let theta = -sum_sq.arg() * R::of(0.5);
    let rot = Complex::new(theta.cos(), theta.sin());
    let mut out: Vec<R> = v.iter().map(|z| (*z * rot).re).collect();
    let norm = out.iter().fold(R::zero(), |a, &x| a + x * x).sqrt();
    for x in out.iter_mut() {
        *x = *x / norm;
    }
    out
}

/// Kernel of a small real matrix with a known dimension, through the
/// rank-revealing SVD; vectors are de-phased to real.
fn real_kernel<R: Real>(m: &Mat<R>, dim: usize) -> Result<Vec<Vec<R>>> {
    let svd = linalg::svd(&Mat::from_real(m))?;
    let k = svd.s.len();
    let smax = svd.s[0].max(R::eps());
    let tol = R::of(1e-7) * smax;
    if svd.s[k - dim] > tol {
        return Err(Error::Linalg(format!(
            "kernel smaller than expected: singular value {}",
            svd.s[k - dim]
        )));
    }
    if k > dim && svd.s[k - dim - 1] <= tol {
        return Err(Error::Linalg("kernel larger than expected".into()));
    }
    let mut out = Vec::with_capacity(dim);
    for j in 0..dim {
        let col: Vec<Complex<R>> = (0..k).map(|i| svd.v[(i, k - 1 - j)]).collect();
        out.push(dephase_to_real(&col));
    }
    Ok(out)
}

fn real_kernel_vector<R: Real>(m: &Mat<R>) -> Result<Vec<R>> {
    Ok(real_kernel(m, 1)?.pop().unwrap())
}

/// Versal normal form for one frequency crossing zero. The three surviving
/// elliptic modes go through the eigenvector construction; the degenerating
/// pair is built from the real invariant plane of L^2 so the transform stays
/// real and smooth straight through the crossing, where the target becomes
/// the nilpotent sigma4 y4^2 / 2.
pub fn versal_normal_form<R: Real>(lin: &Linearisation<R>) -> Result<SymplecticTransform<R>> {
    let variant = match (lin.class.family, lin.class.regime, lin.layout) {
        (Family::S2, Regime::CoParallel, BlockLayout::AlignedFull) => {
            TransformVariant::VersalPitchfork
        }
        (Family::TypeII, _, BlockLayout::ObliqueFull) => TransformVariant::VersalSaddleCentre,
        _ => {
            return Err(Error::NormalForm(format!(
                "no versal construction for {} {}",
                lin.class.family, lin.class.regime
            )))
        }
    };
    let freqs = frequencies(lin)?;
    let dof = lin.dof;
    for mode in 0..3 {
        if freqs.modes[mode].tag != FrequencyTag::PositiveReal {
            return Err(Error::NormalForm(
                "versal construction needs three elliptic modes".into(),
            ));
        }
    }
    let mu4 = freqs.mu[3];
    if mu4.im != R::zero() {
        return Err(Error::NormalForm(
            "degenerating frequency is part of a quadruplet".into(),
        ));
    }
    let w4sq = -mu4.re;

    let mut t = Mat::zeros(lin.n, lin.n);
    let mut u = Mat::zeros(lin.n, lin.n);
    let mut signs = Vec::with_capacity(dof);
    let mut omegas = Vec::with_capacity(dof);
    for mode in 0..3 {
        let w = freqs.real_omega(mode);
        let sigma = elliptic_columns(&mut t, lin, mode, w)?;
        rotation_target(&mut u, dof, mode, sigma, w);
        signs.push(sigma);
        omegas.push(freqs.modes[mode].omega);
    }

    // Invariant plane of the degenerating pair: positions from BC, momenta
    // from CB, with B and C the Hessian blocks entering L = [[0, B], [C, 0]].
    let b = lin.hess_mom();
    let mut c = lin.hess_pos();
    for x in c.data.iter_mut() {
        *x = -*x;
    }
    let mut bc = b.matmul(&c);
    let mut cb = c.matmul(&b);
    for i in 0..dof {
        bc[(i, i)] = bc[(i, i)] - mu4.re;
        cb[(i, i)] = cb[(i, i)] - mu4.re;
    }
    let v = real_kernel_vector(&bc)?;
    let mut w = real_kernel_vector(&cb)?;
    let pairing: R = v.iter().zip(&w).fold(R::zero(), |a, (&x, &y)| a + x * y);
    if pairing.abs() < R::of(1e-10) {
        return Err(Error::NormalForm(
            "degenerating plane is symplectically singular".into(),
        ));
    }
    for x in w.iter_mut() {
        *x = *x / pairing;
    }
    let quad_small = |m: &Mat<R>, x: &[R]| -> R {
        let mut acc = R::zero();
        for i in 0..dof {
            for j in 0..dof {
                acc = acc + x[i] * m[(i, j)] * x[j];
            }
        }
        acc
    };
    let h22 = quad_small(&b, &w);
    if h22.abs() < R::of(1e-12) {
        return Err(Error::NormalForm(
            "degenerate restricted Hessian in the versal plane".into(),
        ));
    }
    let sigma4: i8 = if h22 >= R::zero() { 1 } else { -1 };
    let alpha = h22.abs().sqrt();

    let mut c4 = vec![R::zero(); lin.n];
    let mut c8 = vec![R::zero(); lin.n];
    for i in 0..dof {
        c4[i] = alpha * v[i];
        c8[dof + i] = w[i] / alpha;
    }
    // Deterministic overall sign: scanning positions from the last one, the
    // leading entry of the degenerate position column is negative.
    let col_scale = max_abs(&c4);
    for row in (0..dof).rev() {
        if c4[row].abs() > R::of(1e-8) * col_scale {
            if c4[row] > R::zero() {
                for x in c4.iter_mut() {
                    *x = -*x;
                }
                for x in c8.iter_mut() {
                    *x = -*x;
                }
            }
            break;
        }
    }
    set_col(&mut t, 3, &c4);
    set_col(&mut t, dof + 3, &c8);
    let s4 = R::of(sigma4 as f64);
    u[(3, dof + 3)] = s4;
    u[(dof + 3, 3)] = -s4 * w4sq;
    signs.push(sigma4);
    omegas.push(freqs.modes[3].omega);

    let (sym, conj) = residuals(lin, &t, &u);
    Ok(SymplecticTransform {
        variant,
        t,
        u,
        omegas,
        signs,
        symplectic_residual: sym,
        conjugation_residual: conj,
        warnings: freqs.warnings,
        hopf: None,
    })
}

/// Rank of the eigenvector matrix formed from one eigenvector per eigenvalue
/// with multiplicity.
fn eigenvector_rank<R: Real>(lin: &Linearisation<R>, freqs: &Frequencies<R>) -> Result<usize> {
    let n = lin.n;
    let mut cols: Mat<Complex<R>> = Mat::zeros(n, n);
    for (k, lambda) in freqs.eigenvalues().into_iter().enumerate() {
        let v = eigvec(&lin.l, lambda)?;
        for i in 0..n {
            cols[(i, k)] = v[i];
        }
    }
    let svd = linalg::svd(&cols)?;
    Ok(svd.rank(R::of(1e-6)))
}

/// Normal form at and around a frequency collision. The two non-colliding
/// elliptic modes keep the eigenvector construction; the colliding pair is
/// drawn from the two-dimensional kernel of a coupled block system, which
/// stays real on the stable side, on the curve and on the quadruplet side.
pub fn hopf_normal_form<R: Real>(lin: &Linearisation<R>) -> Result<SymplecticTransform<R>> {
    match lin.layout {
        BlockLayout::ObliqueFull | BlockLayout::ObliqueReduced => {}
        _ => {
            return Err(Error::NormalForm(format!(
                "no collision construction for the {} family",
                lin.class.family
            )))
        }
    }
    let freqs = frequencies(lin)?;
    let dof = lin.dof;
    let max_w = freqs
        .modes
        .iter()
        .map(|m| m.omega.norm())
        .fold(R::zero(), |a, b| if b > a { b } else { a });
    let eigvec_rank = eigenvector_rank(lin, &freqs)?;

    // Identify the colliding pair and the branch.
    let quad_idx: Vec<usize> = (0..dof)
        .filter(|&k| freqs.modes[k].tag == FrequencyTag::Quadruplet)
        .collect();
    let (pair, branch, m_coeff, n_coeff, omega_pair) = if quad_idx.len() == 2 {
        let w = freqs.modes[quad_idx[0]].omega;
        let a = w.re.abs();
        let bb = w.im.abs();
        (
            (quad_idx[0], quad_idx[1]),
            HopfBranch::Quadruplet,
            -bb * bb,
            a,
            [freqs.modes[quad_idx[0]].omega, freqs.modes[quad_idx[1]].omega],
        )
    } else if quad_idx.is_empty() && freqs.all_elliptic() {
        let mut cand: Vec<(usize, usize, R)> = Vec::new();
        for i in 0..dof {
            for j in i + 1..dof {
                let g = (freqs.real_omega(i) - freqs.real_omega(j)).abs();
                cand.push((i, j, g));
            }
        }
        cand.sort_by(|a, b| a.2.partial_cmp(&b.2).unwrap());
        // Away from a collision the nearest pair by gap alone is ambiguous;
        // the pair that can collide is the one mixing both energy signs.
        let (i, j, gap) = if cand[0].2 > R::of(1e-3) * max_w {
            let mut sig = vec![0i8; dof];
            for (k, s) in sig.iter_mut().enumerate() {
                *s = gauge_mode(lin, freqs.real_omega(k))?.sigma;
            }
            *cand
                .iter()
                .find(|&&(i, j, _)| sig[i] != sig[j])
                .ok_or_else(|| {
                    Error::NormalForm("no pair mixes both energy signs".into())
                })?
        } else {
            cand[0]
        };
        let (w3, w4) = (freqs.real_omega(i), freqs.real_omega(j));
        let branch = if gap <= R::of(1e-6) * max_w {
            HopfBranch::Collision
        } else {
            HopfBranch::Separate
        };
        let half = R::of(0.5);
        (
            (i, j),
            branch,
            half * (w3 - w4) * half * (w3 - w4),
            half * (w3 + w4),
            [freqs.modes[i].omega, freqs.modes[j].omega],
        )
    } else {
        return Err(Error::NormalForm(
            "collision construction needs two colliding modes and elliptic companions".into(),
        ));
    };

    let elliptic: Vec<usize> = (0..dof).filter(|k| *k != pair.0 && *k != pair.1).collect();
    for &k in &elliptic {
        if freqs.modes[k].tag != FrequencyTag::PositiveReal {
            return Err(Error::NormalForm(
                "non-colliding modes must stay elliptic".into(),
            ));
        }
    }

    let mut t = Mat::zeros(lin.n, lin.n);
    let mut u = Mat::zeros(lin.n, lin.n);
    let mut signs = vec![0i8; dof];
    let mut omegas = vec![Complex::zero(); dof];
    for (slot, &k) in elliptic.iter().enumerate() {
        let w = freqs.real_omega(k);
        let sigma = elliptic_columns(&mut t, lin, slot, w)?;
        rotation_target(&mut u, dof, slot, sigma, w);
        signs[slot] = sigma;
        omegas[slot] = freqs.modes[k].omega;
    }
    let (p3, p4) = (dof - 2, dof - 1);
    omegas[p3] = omega_pair[0];
    omegas[p4] = omega_pair[1];

    // Coupled kernel system for the colliding pair: with mm the momentum
    // half of the x3 column and pp the position half of the x4 column,
    //   (CB + (M - N^2)) mm = 2 N C pp,
    //   (BC + (M - N^2)) pp = -2 N B mm.
    let b = lin.hess_mom();
    let mut c = lin.hess_pos();
    for x in c.data.iter_mut() {
        *x = -*x;
    }
    let bc = b.matmul(&c);
    let cb = c.matmul(&b);
    let shift = m_coeff - n_coeff * n_coeff;
    let two_n = n_coeff + n_coeff;
    let mut kmat: Mat<R> = Mat::zeros(lin.n, lin.n);
    for i in 0..dof {
        for j in 0..dof {
            kmat[(i, j)] = cb[(i, j)];
            kmat[(i, dof + j)] = -two_n * c[(i, j)];
            kmat[(dof + i, j)] = two_n * b[(i, j)];
            kmat[(dof + i, dof + j)] = bc[(i, j)];
        }
        kmat[(i, i)] = kmat[(i, i)] + shift;
        kmat[(dof + i, dof + i)] = kmat[(dof + i, dof + i)] + shift;
    }
    // Both members of the pair solve the system, so the kernel is
    // two-dimensional. The combination with a vanishing m.p pairing and a
    // positive nu pairing is the symplectic one; m.p = 0 has real solutions
    // exactly when the pair mixes both energy signs, and on the collision
    // curve the discarded root is the degenerate eigenvector with nu = 0.
    let kern = real_kernel(&kmat, 2)?;
    let qf = |a: &[R], bv: &[R]| -> R {
        let mut acc = R::zero();
        for i in 0..dof {
            acc = acc + a[i] * bv[dof + i] + bv[i] * a[dof + i];
        }
        acc * R::of(0.5)
    };
    let q11 = qf(&kern[0], &kern[0]);
    let q12 = qf(&kern[0], &kern[1]);
    let q22 = qf(&kern[1], &kern[1]);
    let qs = q11.abs().max(q22.abs()).max(q12.abs()).max(R::eps());
    let disc = q12 * q12 - q11 * q22;
    if disc < -R::of(1e-10) * qs * qs {
        return Err(Error::NormalForm(
            "colliding pair carries equal energy signs".into(),
        ));
    }
    let root = disc.max(R::zero()).sqrt();
    let dirs: [(R, R); 2] = if q11.abs() >= q22.abs() {
        [(-q12 + root, q11), (-q12 - root, q11)]
    } else {
        [(q22, -q12 + root), (q22, -q12 - root)]
    };
    let mut best: Option<(R, R, Vec<R>, Vec<R>, Vec<R>, Vec<R>)> = None;
    for (da, db) in dirs {
        let nrm = (da * da + db * db).sqrt();
        if nrm <= R::eps() {
            continue;
        }
        let (da, db) = (da / nrm, db / nrm);
        let mix = |off: usize| -> Vec<R> {
            (0..dof)
                .map(|i| da * kern[0][off + i] + db * kern[1][off + i])
                .collect()
        };
        let mm = mix(0);
        let pp = mix(dof);
        let bm = b.matvec(&mm);
        let cp = c.matvec(&pp);
        let x7: Vec<R> = (0..dof).map(|i| n_coeff * pp[i] - bm[i]).collect();
        let y8: Vec<R> = (0..dof).map(|i| -n_coeff * mm[i] - cp[i]).collect();
        let nu1: R = -mm.iter().zip(&x7).fold(R::zero(), |a, (&x, &y)| a + x * y);
        let nu2: R = pp.iter().zip(&y8).fold(R::zero(), |a, (&x, &y)| a + x * y);
        let nu = (nu1 + nu2) * R::of(0.5);
        let skew = (nu1 - nu2).abs() / nu1.abs().max(nu2.abs()).max(R::eps());
        if best.as_ref().map_or(true, |bst| nu > bst.0) {
            best = Some((nu, skew, mm, pp, x7, y8));
        }
    }
    let (nu, skew, mm, pp, x7, y8) = best.ok_or_else(|| {
        Error::NormalForm("no admissible direction in the colliding pair".into())
    })?;
    if skew > R::of(1e-6) {
        return Err(Error::NormalForm(format!(
            "inconsistent symplectic pairings in the colliding pair: skew {skew}"
        )));
    }
    if nu <= R::zero() {
        return Err(Error::NormalForm(format!(
            "colliding-pair pairing has the wrong orientation: {nu}"
        )));
    }
    let scale = nu.sqrt().recip();

    let mut t3 = vec![R::zero(); lin.n];
    let mut t4 = vec![R::zero(); lin.n];
    let mut t7 = vec![R::zero(); lin.n];
    let mut t8 = vec![R::zero(); lin.n];
    for i in 0..dof {
        t3[dof + i] = scale * mm[i];
        t4[i] = scale * pp[i];
        t7[i] = scale * x7[i];
        t8[dof + i] = scale * y8[i];
    }
    // Mixing amplitudes of the y3 column over the pair eigenvectors; the
    // free overall sign of the block is set so the leading amplitude comes
    // out positive.
    let (mut a1, mut a2) = hopf_amplitudes(lin, branch, &omega_pair, &t7)?;
    let lead = if a1.re.abs() > R::of(1e-8) * a1.norm() {
        a1.re
    } else {
        a1.im
    };
    if lead < R::zero() {
        for v in [&mut t3, &mut t4, &mut t7, &mut t8] {
            for x in v.iter_mut() {
                *x = -*x;
            }
        }
        a1 = -a1;
        a2 = -a2;
    }
    set_col(&mut t, p3, &t3);
    set_col(&mut t, p4, &t4);
    set_col(&mut t, dof + p3, &t7);
    set_col(&mut t, dof + p4, &t8);

    // Target: x3^2/2 + x4^2/2 + M (y3^2 + y4^2)/2 + N (x3 y4 - x4 y3).
    u[(p3, p4)] = -n_coeff;
    u[(p4, p3)] = n_coeff;
    u[(p3, dof + p3)] = m_coeff;
    u[(p4, dof + p4)] = m_coeff;
    u[(dof + p3, p3)] = -R::one();
    u[(dof + p4, p4)] = -R::one();
    u[(dof + p3, dof + p4)] = -n_coeff;
    u[(dof + p4, dof + p3)] = n_coeff;

    let eigvec_rank = eigenvector_rank(lin, &freqs)?;
    if branch == HopfBranch::Collision && eigvec_rank != lin.n - 2 {
        return Err(Error::NormalForm(format!(
            "eigenvector rank {eigvec_rank} at the collision (expected {})",
            lin.n - 2
        )));
    }

    let (sym, conj) = residuals(lin, &t, &u);
    Ok(SymplecticTransform {
        variant: TransformVariant::Hopf,
        t,
        u,
        omegas,
        signs,
        symplectic_residual: sym,
        conjugation_residual: conj,
        warnings: freqs.warnings,
        hopf: Some(HopfData {
            m_coeff,
            n_coeff,
            a1,
            a2,
            branch,
            eigvec_rank,
        }),
    })
}

/// Eigenvector for a colliding mode under the same phase and sign gauges
/// as the elliptic columns, keyed on the real part so that conjugate
/// eigenvalues yield conjugate vectors.
fn pair_eigvec<R: Real>(lin: &Linearisation<R>, omega: Complex<R>) -> Result<Vec<Complex<R>>> {
    let i = Complex::new(R::zero(), R::one());
    let mut v = eigvec(&lin.l, i * omega)?;
    let dof = lin.dof;
    let mut sum_sq = Complex::<R>::zero();
    for x in v.iter().take(dof) {
        sum_sq = sum_sq + *x * *x;
    }
    if sum_sq.norm() > R::zero() {
        let theta = (R::PI() - sum_sq.arg()) * R::of(0.5);
        let rot = Complex::new(theta.cos(), theta.sin());
        for x in v.iter_mut() {
            *x = *x * rot;
        }
    }
    let s: Vec<R> = v.iter().map(|z| z.re).collect();
    let col_scale = max_abs(&s);
    let scan: Vec<usize> = (dof..2 * dof).chain(0..dof).collect();
    for &row in &scan {
        if s[row].abs() > R::of(1e-8) * col_scale {
            if -s[row] < R::zero() {
                for x in v.iter_mut() {
                    *x = -*x;
                }
            }
            break;
        }
    }
    Ok(v)
}

/// Decomposes the y3 column over the colliding modes' eigenvector data:
/// real amplitudes over the two s vectors when the pair is still elliptic,
/// one defective vector shared by both amplitudes on the curve, and a
/// conjugate pair of complex amplitudes past it.
fn hopf_amplitudes<R: Real>(
    lin: &Linearisation<R>,
    branch: HopfBranch,
    omega_pair: &[Complex<R>; 2],
    t7: &[R],
) -> Result<(Complex<R>, Complex<R>)> {
    match branch {
        HopfBranch::Collision => {
            let v = pair_eigvec(lin, omega_pair[0])?;
            let w: Vec<R> = v.iter().map(|z| -z.im).collect();
            let num: R = w.iter().zip(t7).fold(R::zero(), |a, (&x, &y)| a + x * y);
            let den: R = w.iter().fold(R::zero(), |a, &x| a + x * x);
            let amp = num / (den + den);
            Ok((Complex::new(amp, R::zero()), Complex::new(amp, R::zero())))
        }
        HopfBranch::Separate => {
            // The second member of the pair enters with a flipped
            // orientation, mirroring the sign split in the y4 column.
            let neg = |v: Vec<R>| -> Vec<R> { v.into_iter().map(|x| -x).collect() };
            let w3 = neg(gauge_mode(lin, omega_pair[0].re)?.r);
            let w4 = gauge_mode(lin, omega_pair[1].re)?.r;
            let g = |a: &[R], b: &[R]| -> R {
                a.iter().zip(b).fold(R::zero(), |acc, (&x, &y)| acc + x * y)
            };
            let (g33, g34, g44) = (g(&w3, &w3), g(&w3, &w4), g(&w4, &w4));
            let (b3, b4) = (g(&w3, t7), g(&w4, t7));
            let det = g33 * g44 - g34 * g34;
            if det.abs() < R::of(1e-14) * g33 * g44 {
                return Err(Error::NormalForm("colliding eigenvectors parallel".into()));
            }
            let a1 = (b3 * g44 - b4 * g34) / det;
            let a2 = (b4 * g33 - b3 * g34) / det;
            Ok((Complex::new(a1, R::zero()), Complex::new(a2, R::zero())))
        }
        HopfBranch::Quadruplet => {
            let v3 = pair_eigvec(lin, omega_pair[0])?;
            let v4 = pair_eigvec(lin, omega_pair[1])?;
            let t7c: Vec<Complex<R>> = t7.iter().map(|&x| Complex::new(x, R::zero())).collect();
            let mut a: Mat<Complex<R>> = Mat::zeros(lin.n, 2);
            for k in 0..lin.n {
                a[(k, 0)] = v3[k];
                a[(k, 1)] = v4[k];
            }
            let svd = linalg::svd(&a)?;
            let sol = svd.min_norm_solve(&t7c, R::of(1e-12));
            Ok((sol[0], sol[1]))
        }
    }
}

/// Stability verdict assembled from the spectrum.
#[derive(Clone, Debug)]
pub struct StabilityClass {
    /// Multiset of mode types in canonical order, e.g.
    /// "centre x centre x centre x saddle".
    pub label: String,
    pub centres: usize,
    pub saddles: usize,
    pub foci: usize,
    pub degenerate: usize,
    /// Energy signs of the elliptic modes, zero elsewhere.
    pub sign_pattern: Vec<i8>,
    /// The quadratic Hamiltonian is definite; implies nonlinear stability.
    pub definite: bool,
    pub liapunov_stable: bool,
    pub spectrally_stable: bool,
    pub linearly_stable: bool,
    /// Two elliptic frequencies collide without losing semisimplicity.
    pub resonant_collision: bool,
}

pub fn classify<R: Real>(lin: &Linearisation<R>) -> Result<StabilityClass> {
    let freqs = frequencies(lin)?;
    let mut centres = 0;
    let mut saddles = 0;
    let mut quad_members = 0;
    let mut degenerate = 0;
    let mut sign_pattern = Vec::with_capacity(lin.dof);
    for m in &freqs.modes {
        match m.tag {
            FrequencyTag::PositiveReal => {
                centres += 1;
                let mv = gauge_mode(lin, m.omega.re)?;
                sign_pattern.push(mv.sigma);
            }
            FrequencyTag::Zero => {
                degenerate += 1;
                sign_pattern.push(0);
            }
            FrequencyTag::PureImaginary => {
                saddles += 1;
                sign_pattern.push(0);
            }
            FrequencyTag::Quadruplet => {
                quad_members += 1;
                sign_pattern.push(0);
            }
        }
    }
    let foci = quad_members / 2;

    let mut parts: Vec<&str> = Vec::new();
    parts.extend(std::iter::repeat_n("centre", centres));
    parts.extend(std::iter::repeat_n("saddle", saddles));
    parts.extend(std::iter::repeat_n("focus", foci));
    parts.extend(std::iter::repeat_n("degenerate", degenerate));
    let label = parts.join(" x ");

    let definite = centres == lin.dof
        && (sign_pattern.iter().all(|&s| s > 0) || sign_pattern.iter().all(|&s| s < 0));
    let spectrally_stable = saddles == 0 && foci == 0;

    // Linear stability additionally needs a semisimple matrix: reject zero
    // modes outright and check the eigenvector count at close collisions.
    let mut resonant_collision = false;
    let mut linearly_stable = spectrally_stable && degenerate == 0;
    if linearly_stable {
        let max_w = freqs
            .modes
            .iter()
            .map(|m| m.omega.norm())
            .fold(R::zero(), |a, b| if b > a { b } else { a });
        let mut min_gap = R::infinity();
        for i in 0..lin.dof {
            for j in i + 1..lin.dof {
                let g = (freqs.modes[i].omega - freqs.modes[j].omega).norm();
                if g < min_gap {
                    min_gap = g;
                }
            }
        }
        if min_gap <= R::of(1e-8) * max_w {
            let rank = eigenvector_rank(lin, &freqs)?;
            if rank < lin.n {
                linearly_stable = false;
            } else {
                resonant_collision = true;
            }
        }
    }

    Ok(StabilityClass {
        label,
        centres,
        saddles,
        foci,
        degenerate,
        sign_pattern,
        definite,
        liapunov_stable: definite,
        spectrally_stable,
        linearly_stable,
        resonant_collision,
    })
}
