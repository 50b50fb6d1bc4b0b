//! Scratch probe runner (not part of the library).

use num_complex::Complex;
use rb_core::hamilton::build_chart;
use rb_core::linalg::Mat;
use rb_core::linstab::*;
use rb_core::shapes::{
    curve_residual, EllipsoidClass, Family, PlanePoint, Regime, SpecialCurve,
};

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let flo = f(lo);
    let fhi = f(hi);
    assert!(flo.signum() != fhi.signum(), "no bracket {flo} {fhi}");
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

fn curve_r3(which: SpecialCurve, r2: f64, lo: f64, hi: f64) -> f64 {
    bisect(lo, hi, |r3| {
        curve_residual(which, PlanePoint::f64(r2, r3).unwrap()).unwrap()
    })
}

fn lin_at(r2: f64, r3: f64, class: EllipsoidClass) -> Linearisation<f64> {
    let chart = build_chart(PlanePoint::f64(r2, r3).unwrap(), class).unwrap();
    build_linearisation(&chart).unwrap()
}

fn show_freqs(tagged: &Frequencies<f64>) -> String {
    tagged
        .modes
        .iter()
        .map(|m| format!("{:?}({:.6},{:.6})", m.tag, m.omega.re, m.omega.im))
        .collect::<Vec<_>>()
        .join(" ")
}

fn families() {
    use Family::*;
    use Regime::*;
    let band_lower = curve_r3(SpecialCurve::S2LowerBoundary, 0.5, 0.275, 0.49995);
    let band_split = curve_r3(SpecialCurve::S2Irrotational, 0.5, band_lower + 1e-9, 0.49995);
    println!("S2 band at r2=0.5: lower={band_lower:.6} split={band_split:.6}");
    let t1_irro = curve_r3(SpecialCurve::TypeIIrrotational, 0.62, 0.2, 0.35);
    let cases: Vec<(f64, f64, Family, Regime)> = vec![
        (0.5, 0.5 * (band_split + 0.5), S2, CounterParallel),
        (0.5, 0.5 * (band_lower + band_split), S2, CoParallel),
        (0.5, band_split, S2, Irrotational),
        (0.9, 0.5, S3, CounterParallel),
        (0.9, 0.3, TypeI, Generic),
        (0.62, t1_irro, TypeI, Irrotational),
        (0.15, 0.05, TypeII, Generic),
        (0.3, 0.05, TypeIII, Generic),
    ];
    for (r2, r3, fam, reg) in cases {
        for adj in [false, true] {
            let class = EllipsoidClass::new(fam, reg, adj).unwrap();
            let lin = lin_at(r2, r3, class);
            match frequencies(&lin) {
                Ok(f) => {
                    println!(
                        "{fam} {reg} adj={adj} layout={:?} det_res={:.2e} warn={} | {}",
                        lin.layout,
                        f.det_residual,
                        f.warnings.len(),
                        show_freqs(&f)
                    );
                    match classify(&lin) {
                        Ok(c) => println!(
                            "    label='{}' signs={:?} definite={} lin={} spec={}",
                            c.label, c.sign_pattern, c.definite, c.linearly_stable, c.spectrally_stable
                        ),
                        Err(e) => println!("    classify ERR: {e}"),
                    }
                }
                Err(e) => println!("{fam} {reg} adj={adj} freq ERR: {e}"),
            }
        }
    }
}

fn s2co() {
    let r2 = 0.3;
    let lower = curve_r3(SpecialCurve::S2LowerBoundary, r2, 0.165, 0.29997);
    let split = curve_r3(SpecialCurve::S2Irrotational, r2, lower + 1e-9, 0.29997);
    let g0 = curve_r3(SpecialCurve::S2Pitchfork, r2, lower + 1e-6, split - 1e-6);
    println!("band ({lower:.6}, {split:.6}), pitchfork at {g0:.6}");
    let class = EllipsoidClass::new(Family::S2, Regime::CoParallel, false).unwrap();
    let h = (g0 - lower).min(split - g0) / 12.0;
    for k in -3i32..=3 {
        let r3 = g0 + f64::from(k) * h;
        let lin = lin_at(r2, r3, class);
        let f = frequencies(&lin).unwrap();
        print!("k={k:+} r3={r3:.6} | {}", show_freqs(&f));
        match versal_normal_form(&lin) {
            Ok(vt) => {
                let t = &vt.t;
                println!(
                    "\n    sym={:.2e} conj={:.2e} signs={:?} t44={:+.6} t34={:+.6} t51={:+.6} t15={:+.6} t78={:+.6}",
                    vt.symplectic_residual,
                    vt.conjugation_residual,
                    vt.signs,
                    t[(3, 3)],
                    t[(2, 3)],
                    t[(4, 0)],
                    t[(0, 4)],
                    t[(6, 7)]
                );
            }
            Err(e) => println!("\n    versal ERR: {e}"),
        }
    }
}

// Literal closed forms for the versal transform entries, straight reading
// t[i-1][j-1], with the j=8 row-4 entry tried both at (4,8) and (4,7).
fn lemma3() {
    let r2 = 0.3;
    let lower = curve_r3(SpecialCurve::S2LowerBoundary, r2, 0.165, 0.29997);
    let split = curve_r3(SpecialCurve::S2Irrotational, r2, lower + 1e-9, 0.29997);
    let g0 = curve_r3(SpecialCurve::S2Pitchfork, r2, lower + 1e-6, split - 1e-6);
    let class = EllipsoidClass::new(Family::S2, Regime::CoParallel, false).unwrap();
    for (name, r3) in [
        ("above", g0 + 0.6 * (split - g0)),
        ("below", lower + 0.4 * (g0 - lower)),
    ] {
        println!("=== {name} r3={r3:.6}");
        let lin = lin_at(r2, r3, class);
        let f = frequencies(&lin).unwrap();
        let l = |i: usize, j: usize| lin.l[(i - 1, j - 1)];
        let (l15, l16, l26) = (l(1, 5), l(1, 6), l(2, 6));
        let (l37, l38, l48) = (l(3, 7), l(3, 8), l(4, 8));
        let (l51, l52, l62) = (l(5, 1), l(5, 2), l(6, 2));
        let (l73, l74, l84) = (l(7, 3), l(7, 4), l(8, 4));
        let w1 = f.modes[0].omega.re;
        let w2 = f.modes[1].omega.re;
        let w3 = f.modes[2].omega.re;
        let w4sq = -f.mu[3].re;
        println!("w1={w1:.6} w2={w2:.6} w3={w3:.6} w4^2={w4sq:.6}");
        // sanity: closed frequency forms
        let s1 = l15 * l51 + 2.0 * l16 * l52 + l26 * l62;
        let p1 = l15 * l15 * l51 * l51 + 4.0 * l15 * l52 * (l16 * l51 + l26 * l52)
            - 2.0 * l15 * l26 * l51 * l62
            + l62 * (4.0 * l16 * (l16 * l51 + l26 * l52) + l26 * l26 * l62);
        let s2 = l48 * l84 + 2.0 * l74 * l38 + l37 * l73;
        let p2 = l37 * l37 * l73 * l73 + 4.0 * l37 * l74 * (l38 * l73 + l48 * l74)
            - 2.0 * l37 * l48 * l73 * l84
            + l84 * (4.0 * l38 * (l38 * l73 + l48 * l74) + l48 * l48 * l84);
        println!(
            "  w1 check {:.2e}  w2 check {:.2e}  w3 check {:.2e}  w4^2 check {:.2e}",
            ((p1.sqrt() - s1) / 2.0).sqrt() - w1,
            ((-p1.sqrt() - s1) / 2.0).sqrt() - w2,
            ((p2.sqrt() - s2) / 2.0).sqrt() - w3,
            (-p2.sqrt() - s2) / 2.0 - w4sq
        );
        let w1s = w1 * w1;
        let w2s = w2 * w2;
        let w3s = w3 * w3;
        let d1m = (l26 * (l52 * l52 - l51 * l62) - l51 * w1s).sqrt();
        let d1p = (l26 * (l51 * l62 - l52 * l52) + l51 * w2s).sqrt();
        let gap12 = (w1s - w2s).sqrt();
        let t15 = -(l16 * l52 + l26 * l62 + w1s) * w1.sqrt() / (d1m * gap12);
        let t16 = (l16 * l52 + l26 * l62 + w2s) * w2.sqrt() / (d1p * gap12);
        let t25 = (l16 * l51 + l26 * l52) * w1.sqrt() / (d1m * gap12);
        let t26 = -(l16 * l51 + l26 * l52) * w2.sqrt() / (d1p * gap12);
        let t51 = d1m / (w1 * (w1s - w2s)).sqrt();
        let t52 = d1p / (w2 * (w1s - w2s)).sqrt();
        let t61 = (l16 * (l51 * l62 - l52 * l52) - l52 * w1s) / (d1m * (w1 * (w1s - w2s)).sqrt());
        let t62 = (l16 * (l52 * l52 - l51 * l62) + l52 * w2s) / (d1p * (w2 * (w1s - w2s)).sqrt());
        let d3m = (l48 * (l74 * l74 - l73 * l84) - l73 * w3s).sqrt();
        let t34 = (l38 * l74 + l48 * l84 + w4sq) * ((l37 * l48 - l38 * l38) * l73 + l48 * w4sq).sqrt()
            / ((l38 * l73 + l48 * l74) * (w3s - w4sq).sqrt());
        let t37 = -(l38 * l74 + l48 * l84 + w3s) * w3.sqrt() / (d3m * (w3s - w4sq).sqrt());
        let t44 = -((l73 * (l37 * l48 - l38 * l38) + l48 * w4sq).sqrt()) / (w3s - w4sq).sqrt();
        let t48 = (l38 * l73 + l48 * l74) * w3.sqrt() / (d3m * (w3s - w4sq).sqrt());
        let t73 = d3m / (w3 * (w3s - w4sq)).sqrt();
        let t78 = (l73 * (l37 * l48 - l38 * l38) + l48 * w3s).sqrt()
            / ((l38 * l38 - l37 * l48).sqrt() * (w3s - w4sq).sqrt());
        let t83 = (l38 * (l73 * l84 - l74 * l74) - l74 * w3s) / (d3m * (w3 * (w3s - w4sq)).sqrt());
        let t88 = (l84 * (l37 * l48 - l38 * l38) + l37 * w3s).sqrt()
            / ((l38 * l38 - l37 * l48).sqrt() * (w3s - w4sq).sqrt());
        let vt = versal_normal_form(&lin).unwrap();
        println!(
            "  versal sym={:.2e} conj={:.2e} signs={:?}",
            vt.symplectic_residual, vt.conjugation_residual, vt.signs
        );
        let t = &vt.t;
        let cmp = |label: &str, form: f64, mine: f64| {
            println!(
                "  {label:<4} formula {form:+.8}  mine {mine:+.8}  ratio {:+.6}",
                mine / form
            );
        };
        cmp("t15", t15, t[(0, 4)]);
        cmp("t25", t25, t[(1, 4)]);
        cmp("t16", t16, t[(0, 5)]);
        cmp("t26", t26, t[(1, 5)]);
        cmp("t51", t51, t[(4, 0)]);
        cmp("t61", t61, t[(5, 0)]);
        cmp("t52", t52, t[(4, 1)]);
        cmp("t62", t62, t[(5, 1)]);
        cmp("t37", t37, t[(2, 6)]);
        cmp("t47?", t48, t[(3, 6)]);
        cmp("t73", t73, t[(6, 2)]);
        cmp("t83", t83, t[(7, 2)]);
        cmp("t34", t34, t[(2, 3)]);
        cmp("t44", t44, t[(3, 3)]);
        cmp("t78", t78, t[(6, 7)]);
        cmp("t88", t88, t[(7, 7)]);
        // also check whether the literal (4,8) slot is nonzero in mine
        println!("  mine[(3,7)] (row4,col8) = {:+.8}", t[(3, 7)]);
    }
}

fn scan3() {
    let class = EllipsoidClass::new(Family::TypeIII, Regime::Generic, false).unwrap();
    for k in 0..=30 {
        let r2 = 0.3;
        let r3 = 0.005 + (0.29 - 0.005) * f64::from(k) / 30.0;
        let gres: Option<f64> =
            curve_residual(SpecialCurve::TypeIIILowerG, PlanePoint::f64(r2, r3).unwrap()).ok();
        let reg = rb_core::shapes::region_membership(PlanePoint::<f64>::f64(r2, r3).unwrap());
        let inr = reg.map(|r| r.type_iii).unwrap_or(false);
        let msg = if inr {
            let lin = lin_at(r2, r3, class);
            match frequencies(&lin) {
                Ok(f) => show_freqs(&f),
                Err(e) => format!("ERR {e}"),
            }
        } else {
            "outside".into()
        };
        println!("r3={r3:.4} G={gres:?} in={inr} {msg}");
    }
}

fn hopf3() {
    let class = EllipsoidClass::new(Family::TypeIII, Regime::Generic, false).unwrap();
    let r2 = 0.3;
    let has_quad = |r3: f64| -> f64 {
        let lin = lin_at(r2, r3, class);
        let f = frequencies(&lin).unwrap();
        if f.modes.iter().any(|m| m.tag == FrequencyTag::Quadruplet) {
            1.0
        } else {
            -1.0
        }
    };
    // scan
    let mut prev = None;
    let mut flip = None;
    for k in 0..=40 {
        let r3 = 0.15 + 0.08 * f64::from(k) / 40.0;
        let q = has_quad(r3);
        if let Some((pr, pq)) = prev {
            if pq != q {
                flip = Some((pr, r3));
            }
        }
        prev = Some((r3, q));
    }
    let (lo, hi) = flip.expect("no quadruplet flip found in scan");
    let psi = bisect(lo, hi, has_quad);
    println!("collision curve at r2={r2}: r3={psi:.8}");
    for (name, r3) in [
        ("far-stable", psi + 0.02),
        ("near-stable", psi + 1e-4),
        ("on-curve", psi),
        ("near-unstable", psi - 1e-4),
        ("far-unstable", psi - 0.03),
    ] {
        let lin = lin_at(r2, r3, class);
        let f = frequencies(&lin).unwrap();
        println!("{name}: {}", show_freqs(&f));
        match hopf_normal_form(&lin) {
            Ok(ht) => {
                let hd = ht.hopf.as_ref().unwrap();
                println!(
                    "    branch={:?} M={:+.6e} N={:+.6} sym={:.2e} conj={:.2e} a1={:+.4}{:+.4}i a2={:+.4}{:+.4}i rank={} signs={:?}",
                    hd.branch,
                    hd.m_coeff,
                    hd.n_coeff,
                    ht.symplectic_residual,
                    ht.conjugation_residual,
                    hd.a1.re,
                    hd.a1.im,
                    hd.a2.re,
                    hd.a2.im,
                    hd.eigvec_rank,
                    ht.signs
                );
            }
            Err(e) => println!("    hopf ERR: {e}"),
        }
        match classify(&lin) {
            Ok(c) => println!("    label='{}' lin={} spec={}", c.label, c.linearly_stable, c.spectrally_stable),
            Err(e) => println!("    classify ERR: {e}"),
        }
    }
}

fn hopf1() {
    // Along the type-I irrotational curve, look for frequency collisions.
    let class = EllipsoidClass::new(Family::TypeI, Regime::Irrotational, false).unwrap();
    for k in 0..=30 {
        let r2 = 0.50 + 0.20 * f64::from(k) / 30.0;
        let lo = 0.02;
        let hi = 0.98 * r2;
        let res = |r3: f64| -> Option<f64> {
            curve_residual(SpecialCurve::TypeIIrrotational, PlanePoint::f64(r2, r3).unwrap()).ok()
        };
        let (fl, fh): (f64, f64) = match (res(lo), res(hi)) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                println!("r2={r2:.4}: residual error");
                continue;
            }
        };
        if fl.signum() == fh.signum() {
            println!("r2={r2:.4}: no bracket ({fl:.3} {fh:.3})");
            continue;
        }
        let r3 = curve_r3(SpecialCurve::TypeIIrrotational, r2, lo, hi);
        let lin = lin_at(r2, r3, class);
        match frequencies(&lin) {
            Ok(f) => {
                let gap = (f.modes[0].omega - f.modes[1].omega)
                    .norm()
                    .min((f.modes[1].omega - f.modes[2].omega).norm())
                    .min((f.modes[0].omega - f.modes[2].omega).norm());
                println!("r2={r2:.4} r3={r3:.6}: {} mingap={gap:.5}", show_freqs(&f));
            }
            Err(e) => println!("r2={r2:.4} r3={r3:.6}: ERR {e}"),
        }
    }
}

fn typeii() {
    let class = EllipsoidClass::new(Family::TypeII, Regime::Generic, false).unwrap();
    for (r2, r3) in [(0.15, 0.05), (0.15, 0.02), (0.15, 0.09), (0.3, 0.08), (0.44890, 0.10002)] {
        let lin = lin_at(r2, r3, class);
        let f = frequencies(&lin).unwrap();
        println!("({r2}, {r3}): {}", show_freqs(&f));
        match versal_normal_form(&lin) {
            Ok(vt) => println!(
                "    versal sym={:.2e} conj={:.2e} signs={:?}",
                vt.symplectic_residual, vt.conjugation_residual, vt.signs
            ),
            Err(e) => println!("    versal ERR: {e}"),
        }
    }
}

fn scan() {
    let class = EllipsoidClass::new(Family::S2, Regime::CoParallel, false).unwrap();
    for k in 1..=18 {
        let r2 = 0.05 * f64::from(k);
        let lo_ok = std::panic::catch_unwind(|| {
            let lower = curve_r3(SpecialCurve::S2LowerBoundary, r2, 0.55 * r2, 0.9999 * r2);
            let split = curve_r3(SpecialCurve::S2Irrotational, r2, lower + 1e-9, 0.9999 * r2);
            (lower, split)
        });
        let (lower, split) = match lo_ok { Ok(x) => x, Err(_) => { println!("r2={r2:.2}: band failed"); continue; } };
        let g = |r3: f64| -> f64 { curve_residual(SpecialCurve::S2Pitchfork, PlanePoint::f64(r2, r3).unwrap()).unwrap() };
        let ga = g(lower + 1e-7);
        let gb = g(split - 1e-7);
        // omega4 at low and high interior points
        let tag_at = |r3: f64| -> String {
            let lin = lin_at(r2, r3, class);
            match frequencies(&lin) {
                Ok(f) => format!("{:?}:{:.4}", f.modes[3].tag, f.modes[3].omega.norm()),
                Err(e) => format!("ERR {e}"),
            }
        };
        println!(
            "r2={r2:.2} band=({lower:.5},{split:.5}) G(lo)={ga:+.4} G(hi)={gb:+.4} w4[0.15]={} w4[0.85]={}",
            tag_at(lower + 0.15 * (split - lower)),
            tag_at(lower + 0.85 * (split - lower))
        );
    }
}

fn main() {
    let which = std::env::args().nth(1).unwrap_or_else(|| "families".into());
    match which.as_str() {
        "families" => families(),
        "scan" => scan(),
        "scan3" => scan3(),
        "s2co" => s2co(),
        "lemma3" => lemma3(),
        "hopf3" => hopf3(),
        "hopf1" => hopf1(),
        "typeii" => typeii(),
        other => panic!("unknown probe {other}"),
    }
}
