//! Riemann-map checks against an independent boundary-integral solution.

use nalgebra::{DMatrix, DVector};
use std::f64::consts::{PI, TAU};
use wander_core::conformal::{
    certify_inverse_bound, certify_warschawski, rotation_normalize, solve_riemann, ConformalMap,
    RoundnessCertificate,
};
use wander_core::geometry::BoundaryCurve;
use wander_core::{c64, C64};

fn perturbed(eps: f64, m: f64) -> BoundaryCurve {
    BoundaryCurve::polar(|t| 1.0 + eps * (m * t).cos(), 256).unwrap()
}

/// Kerzman–Stein: solve `S - A S = conj(H(0, ·))` on the boundary and read
/// the Riemann map off the Szegő kernel. Returns `(t_k, θ_k)` pairs.
fn szego_correspondence(curve: &BoundaryCurve, n: usize) -> Vec<(f64, f64)> {
    let t: Vec<f64> = (0..n).map(|k| TAU * k as f64 / n as f64).collect();
    let z: Vec<C64> = t.iter().map(|&s| curve.eval(s)).collect();
    let dz: Vec<C64> = t.iter().map(|&s| curve.derivative(s)).collect();
    let tan: Vec<C64> = dz.iter().map(|d| d / d.norm()).collect();
    let i2pi = c64(0.0, TAU);
    let cauchy = |w: usize, s: usize| tan[s] / (i2pi * (z[s] - z[w]));
    let mut a = DMatrix::<C64>::identity(n, n);
    for j in 0..n {
        for k in 0..n {
            if j == k {
                continue;
            }
            let kern = cauchy(j, k) - cauchy(k, j).conj();
            a[(j, k)] -= kern * dz[k].norm() * TAU / n as f64;
        }
    }
    let rhs = DVector::from_iterator(n, (0..n).map(|j| (tan[j] / (i2pi * z[j])).conj()));
    let s = a.lu().solve(&rhs).unwrap();
    (0..n)
        .map(|j| {
            let f = c64(0.0, -1.0) * tan[j] * s[j] / s[j].conj();
            (t[j], f.arg())
        })
        .collect()
}

#[test]
fn szego_oracle_reproduces_known_maps() {
    // Unit circle: identity correspondence.
    let circle = BoundaryCurve::circle(c64(0.0, 0.0), 1.0);
    for (t, th) in szego_correspondence(&circle, 64) {
        let d = (th - t + PI).rem_euclid(TAU) - PI;
        assert!(d.abs() < 1e-12);
    }
    // Image of the circle under z + c z²: correspondence is θ = t exactly.
    let c = 0.1;
    let img = BoundaryCurve::from_terms(&[(1, c64(1.0, 0.0)), (2, c64(c, 0.0))]).unwrap();
    for (t, th) in szego_correspondence(&img, 256) {
        let d = (th - t + PI).rem_euclid(TAU) - PI;
        assert!(d.abs() < 1e-10, "{d}");
    }
}

#[test]
fn boundary_correspondence_matches_szego_oracle() {
    let curve = perturbed(0.01, 3.0);
    let map = solve_riemann(&curve, 1e-12, 200).unwrap();
    let mut worst = 0.0f64;
    for (t, th) in szego_correspondence(&curve, 256) {
        let w = map.eval(C64::from_polar(1.0, th));
        worst = worst.max((w - curve.eval(t)).norm());
    }
    assert!(worst < 1e-6, "correspondence mismatch {worst:e}");
}

#[test]
fn warschawski_examples() {
    let curve = perturbed(0.01, 3.0);
    let map = solve_riemann(&curve, 1e-12, 200).unwrap();
    let cert = RoundnessCertificate::measure(&curve, 4096).unwrap();
    assert!((cert.eps - 0.0101).abs() < 2e-6);
    let rep = certify_warschawski(&map, &cert, 0.5, 512).unwrap();
    assert!(rep.pass && rep.measured <= 0.00867);

    let curve = perturbed(0.001, 5.0);
    let map = solve_riemann(&curve, 1e-12, 200).unwrap();
    let cert = RoundnessCertificate::measure(&curve, 4096).unwrap();
    assert!(certify_warschawski(&map, &cert, 0.9, 512).unwrap().pass);

    let id = ConformalMap::identity();
    let rep = certify_warschawski(&id, &cert, 0.9, 64).unwrap();
    assert_eq!(rep.measured, 0.0);
}

#[test]
fn inverse_bound_examples() {
    let curve = perturbed(0.005, 2.0);
    let map = solve_riemann(&curve, 1e-12, 200).unwrap();
    let cert = RoundnessCertificate::measure(&curve, 4096).unwrap();
    assert!((cert.eps - 0.005 / 0.995).abs() < 1e-6);
    let rep = certify_inverse_bound(&map, &cert, 256).unwrap();
    assert!(rep.pass, "{rep:?}");
    assert!(rep.bound - rep.measured > 0.0);
}

#[test]
fn inversion_matches_radial_bisection() {
    let curve = perturbed(0.01, 3.0);
    let map = solve_riemann(&curve, 1e-12, 200).unwrap();
    let tol = 1e-12;
    for k in 0..8 {
        let dir = C64::from_polar(1.0, 0.3 + TAU * k as f64 / 8.0);
        let w = dir * 0.7;
        let z = map.invert(w, tol).unwrap();
        assert!((map.eval(z) - w).norm() <= 2.0 * tol);
        // Oracle: along the preimage ray through z, bisect |h(s e^{iα})| = |w|.
        let alpha = z.arg();
        let (mut lo, mut hi) = (0.0, 0.99);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if map.eval(C64::from_polar(mid, alpha)).norm() < w.norm() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((lo - z.norm()).abs() < 1e-10);
    }
}

#[test]
fn rotation_keeps_derivative_modulus() {
    let curve = perturbed(0.01, 3.0);
    let map = solve_riemann(&curve, 1e-12, 200).unwrap();
    let spun: Vec<C64> = map
        .coefficients()
        .iter()
        .enumerate()
        .map(|(n, a)| a * C64::from_polar(1.0, 0.7 * n as f64))
        .collect();
    let spun = ConformalMap::from_coefficients(spun);
    let (norm, t) = rotation_normalize(&spun).unwrap();
    assert!((t - 0.7).abs() < 1e-12);
    let d = norm.derivative(c64(0.0, 0.0));
    assert!(d.im.abs() < 1e-12);
    assert!((d.norm() - spun.derivative(c64(0.0, 0.0)).norm()).abs() < 1e-9);
}

#[test]
fn ellipse_diameter() {
    let e = BoundaryCurve::from_terms(&[(1, c64(1.5, 0.0)), (-1, c64(0.5, 0.0))]).unwrap();
    let d = wander_core::geometry::diameter(&e, 256).unwrap();
    // Oracle: dense sampling along the major axis endpoints.
    let dense = (0..20000)
        .map(|k| e.eval(TAU * k as f64 / 20000.0).re)
        .fold(f64::NEG_INFINITY, f64::max);
    assert!((d - 2.0 * dense).abs() < 1e-6);
    assert!((d - 4.0).abs() < 1e-6);
    let small = wander_core::geometry::diameter(&e, 17).unwrap();
    assert!(small <= d);
}
