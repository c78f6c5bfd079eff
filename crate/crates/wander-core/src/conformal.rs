//! Riemann maps of nearly circular domains and the certified bounds that
//! compare them with the identity.
//!
//! The solver iterates on the boundary correspondence `θ ↦ t(θ)` so that
//! `log(h(z)/z)` has conjugate boundary data. The resulting map is stored as
//! its Taylor coefficients, which are exactly the trapezoid-rule Cauchy
//! integrals of the boundary values; derivatives come from the same series.

use crate::error::{invalid, Error, Result};
use crate::fft;
use crate::geometry::{circle_points, Annulus, BoundaryCurve};
use crate::{c64, C64};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};
use num_traits::Float;
use serde::{Deserialize, Serialize};

/// A conformal map `h` of the unit disk, `h(0) = 0`, evaluated from its
/// Taylor series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformalMap {
    coefficients: Vec<C64>,
    /// `t(θ_j)` at `θ_j = 2πj/M`; empty for maps given in closed form.
    correspondence: Vec<f64>,
    /// Angle removed by normalization (`arg h′(0)` of the unrotated map).
    pub rotation: f64,
    /// Max boundary mismatch `|γ(t(θ)) - h(e^{iθ})|`.
    pub residual: f64,
    /// Radius below which interior evaluation is trusted.
    pub validated_radius: f64,
    /// Successive correspondence updates, for diagnostics.
    pub history: Vec<f64>,
}

impl ConformalMap {
    pub fn identity() -> Self {
        Self::from_coefficients(vec![c64(0.0, 0.0), c64(1.0, 0.0)])
    }

    /// Polynomial map `Σ a_n z^n`; used for closed-form test maps.
    pub fn from_coefficients(coefficients: Vec<C64>) -> Self {
        Self {
            coefficients,
            correspondence: Vec::new(),
            rotation: 0.0,
            residual: 0.0,
            validated_radius: 1.0,
            history: Vec::new(),
        }
    }

    pub fn coefficients(&self) -> &[C64] {
        &self.coefficients
    }

    /// Sampled boundary correspondence `t(θ_j)`.
    pub fn correspondence(&self) -> &[f64] {
        &self.correspondence
    }

    pub fn eval(&self, z: C64) -> C64 {
        let mut acc = c64(0.0, 0.0);
        for a in self.coefficients.iter().rev() {
            acc = acc * z + a;
        }
        acc
    }

    pub fn derivative(&self, z: C64) -> C64 {
        let mut acc = c64(0.0, 0.0);
        for (n, a) in self.coefficients.iter().enumerate().skip(1).rev() {
            acc = acc * z + a * n as f64;
        }
        acc
    }

    pub fn second_derivative(&self, z: C64) -> C64 {
        let mut acc = c64(0.0, 0.0);
        for (n, a) in self.coefficients.iter().enumerate().skip(2).rev() {
            acc = acc * z + a * (n * (n - 1)) as f64;
        }
        acc
    }

    /// Compose with a dilation: `z ↦ h(s z)`.
    pub fn dilate(&self, s: f64) -> Self {
        let mut out = self.clone();
        let mut p = 1.0;
        for a in out.coefficients.iter_mut() {
            *a *= p;
            p *= s;
        }
        out.validated_radius = self.validated_radius / s;
        out
    }

    /// Solve `h(z) = w` by damped Newton from `w / h′(0)`.
    pub fn invert(&self, w: C64, tol: f64) -> Result<C64> {
        let d0 = self.derivative(c64(0.0, 0.0));
        let start = if d0.norm() > 0.0 { w / d0 } else { w };
        self.invert_from(w, start, tol)
    }

    pub fn invert_from(&self, w: C64, start: C64, tol: f64) -> Result<C64> {
        let mut z = start;
        let mut res = (self.eval(z) - w).norm();
        for _ in 0..100 {
            if res <= tol {
                return Ok(z);
            }
            let d = self.derivative(z);
            if d.norm() == 0.0 || !d.re.is_finite() {
                break;
            }
            let step = (self.eval(z) - w) / d;
            let mut lambda = 1.0;
            loop {
                let cand = z - step * lambda;
                let r = (self.eval(cand) - w).norm();
                if r < res || lambda < 1e-6 {
                    z = cand;
                    res = r;
                    break;
                }
                lambda *= 0.5;
            }
        }
        if res <= tol {
            Ok(z)
        } else {
            Err(Error::NewtonDivergence { re: z.re, im: z.im })
        }
    }

    /// Univalence witness on `|z| = r`: nonvanishing derivative on the disk
    /// samples and boundary image winding once around `h(0)`.
    pub fn univalent_on(&self, r: f64, n: usize) -> bool {
        let ring = circle_points(c64(0.0, 0.0), r, n, 0.0);
        let img: Vec<C64> = ring.iter().map(|&z| self.eval(z)).collect();
        let wind = crate::geometry::Polygon::new(img).winding(self.eval(c64(0.0, 0.0)));
        if wind != 1 {
            return false;
        }
        // Argument principle for h′ on the same circle: zero count must be 0.
        let mut turn = 0.0;
        for k in 0..n {
            let a = self.derivative(ring[k]);
            let b = self.derivative(ring[(k + 1) % n]);
            if a.norm() == 0.0 {
                return false;
            }
            turn += (b / a).arg();
        }
        (turn / TAU).round() as i64 == 0
    }
}

/// `ε` with every boundary sample in the closed annulus `A(1/(1+ε), 1+ε)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundnessCertificate {
    pub eps: f64,
    pub checked_annulus: Annulus,
}

impl RoundnessCertificate {
    pub fn measure(curve: &BoundaryCurve, n_samples: usize) -> Result<Self> {
        let eps = curve.roundness(n_samples);
        let eps_eff = eps.max(f64::EPSILON);
        let checked_annulus = Annulus::new(c64(0.0, 0.0), 1.0 / (1.0 + eps_eff), 1.0 + eps_eff)?;
        for z in curve.samples(n_samples) {
            let r = z.norm();
            let slack = 1e-14;
            if r < checked_annulus.inner * (1.0 - slack) || r > checked_annulus.outer * (1.0 + slack) {
                return Err(Error::Degenerate("roundness annulus misses a sample".into()));
            }
        }
        Ok(Self { eps, checked_annulus })
    }
}

/// Boundary-correspondence iteration for the normalized Riemann map of the
/// domain bounded by `curve`.
pub fn solve_riemann(curve: &BoundaryCurve, tol: f64, max_iter: usize) -> Result<ConformalMap> {
    curve.validate_jordan(c64(0.0, 0.0), 4096)?;
    // Roundness is judged after removing the overall size of the curve.
    let log_scale = {
        let s = curve.samples(1024);
        s.iter().map(|z| z.norm().ln()).sum::<f64>() / s.len() as f64
    };
    let scale = log_scale.exp();
    let mut unit = curve.clone();
    let scaled: Vec<C64> = curve.coefficients().iter().map(|c| c / scale).collect();
    unit = BoundaryCurve::new(scaled).unwrap_or(unit);
    let eps = unit.roundness(4096);
    if eps > 0.2 {
        return Err(invalid("curve is not nearly circular (roundness above 0.2)"));
    }
    let arg_ref = curve.coefficient(1).arg();
    let unwrapped_arg = |t: f64| -> f64 {
        let g = curve.eval(t) * C64::from_polar(1.0, -t - arg_ref);
        t + arg_ref + g.arg()
    };
    let arg_slope = |t: f64| -> f64 { (curve.derivative(t) / curve.eval(t)).im };

    let mut m = 256usize;
    let mut history = Vec::new();
    let mut last_residual = f64::INFINITY;
    // Initial guess: invert the argument function at θ.
    let mut t: Vec<f64> = (0..m).map(|j| TAU * j as f64 / m as f64 - arg_ref).collect();
    loop {
        let theta: Vec<f64> = (0..m).map(|j| TAU * j as f64 / m as f64).collect();
        let mut converged = false;
        for _ in 0..max_iter {
            let rho: Vec<f64> = t.iter().map(|&tj| curve.eval(tj).norm().ln()).collect();
            let k = conjugate(&rho);
            let mut change = 0.0f64;
            for j in 0..m {
                let target = theta[j] + k[j];
                let new = solve_arg(&unwrapped_arg, &arg_slope, target, t[j]);
                change = change.max((new - t[j]).abs());
                t[j] = new;
            }
            history.push(change);
            if change < 0.1 * tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NonConvergence {
                iterations: history.len(),
                last: history.last().copied().unwrap_or(f64::NAN),
                history,
            });
        }
        let vals: Vec<C64> = t.iter().map(|&tj| curve.eval(tj)).collect();
        let (coeffs, residual) = taylor_from_boundary(&vals);
        if residual <= tol || m >= 1 << 15 || residual > 0.5 * last_residual && m >= 1 << 12 {
            if residual > tol {
                return Err(Error::NonConvergence { iterations: history.len(), last: residual, history });
            }
            let validated_radius = (1.0 - 2.0 * residual.sqrt()).max(0.0);
            return Ok(ConformalMap {
                coefficients: coeffs,
                correspondence: t,
                rotation: 0.0,
                residual,
                validated_radius,
                history,
            });
        }
        last_residual = residual;
        // Refine by interpolating the periodic part of t(θ) - θ.
        let periodic: Vec<f64> = t.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let fine = refine_periodic(&periodic);
        m *= 2;
        t = (0..m).map(|j| TAU * j as f64 / m as f64 + fine[j]).collect();
    }
}

/// Conjugate function on equispaced samples: multiplier `-i·sign(k)`.
fn conjugate(u: &[f64]) -> Vec<f64> {
    let m = u.len();
    let mut buf: Vec<C64> = u.iter().map(|&x| c64(x, 0.0)).collect();
    fft::fft(&mut buf);
    for (k, v) in buf.iter_mut().enumerate() {
        if k == 0 || k == m / 2 {
            *v = c64(0.0, 0.0);
        } else if k < m / 2 {
            *v *= c64(0.0, -1.0);
        } else {
            *v *= c64(0.0, 1.0);
        }
    }
    fft::ifft(&mut buf);
    buf.iter().map(|v| v.re).collect()
}

fn refine_periodic(v: &[f64]) -> Vec<f64> {
    let m = v.len();
    let mut buf: Vec<C64> = v.iter().map(|&x| c64(x, 0.0)).collect();
    fft::fft(&mut buf);
    let mut big = vec![c64(0.0, 0.0); 2 * m];
    big[..m / 2].copy_from_slice(&buf[..m / 2]);
    big[m + m / 2 + 1..].copy_from_slice(&buf[m / 2 + 1..]);
    fft::ifft(&mut big);
    big.iter().map(|z| 2.0 * z.re).collect()
}

/// Nonnegative-frequency part of boundary data, trimmed at the noise floor,
/// plus the size of what was discarded.
fn taylor_from_boundary(vals: &[C64]) -> (Vec<C64>, f64) {
    let m = vals.len();
    let mut buf = vals.to_vec();
    fft::fft(&mut buf);
    for v in buf.iter_mut() {
        *v /= m as f64;
    }
    let scale = buf.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let floor = 1e-15 * scale;
    let mut n_keep = m / 2;
    while n_keep > 2 && buf[n_keep - 1].norm() <= floor {
        n_keep -= 1;
    }
    let coeffs: Vec<C64> = buf[..n_keep].to_vec();
    let mut residual = 0.0f64;
    for (j, v) in vals.iter().enumerate() {
        let z = C64::from_polar(1.0, TAU * j as f64 / m as f64);
        let mut acc = c64(0.0, 0.0);
        for a in coeffs.iter().rev() {
            acc = acc * z + a;
        }
        residual = residual.max((acc - v).norm());
    }
    (coeffs, residual)
}

fn solve_arg(f: &dyn Fn(f64) -> f64, df: &dyn Fn(f64) -> f64, target: f64, start: f64) -> f64 {
    // Bracket by monotonicity, then safeguarded Newton.
    let mut t = start;
    let mut lo = t - PI;
    let mut hi = t + PI;
    while f(lo) > target {
        lo -= PI;
    }
    while f(hi) < target {
        hi += PI;
    }
    for _ in 0..60 {
        let v = f(t) - target;
        if v.abs() < 1e-15 {
            break;
        }
        if v > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        let d = df(t);
        let mut next = t - v / d;
        if !(next > lo && next < hi) || !d.is_finite() || d <= 0.0 {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() < 1e-16 * (1.0 + t.abs()) {
            t = next;
            break;
        }
        t = next;
    }
    t
}

/// `r ε e^ε (1 + (2/π) log((1+r)/(1-r)))`.
pub fn warschawski_rhs(eps: f64, r: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&r) {
        return Err(invalid("radius must lie in [0, 1)"));
    }
    if eps < 0.0 {
        return Err(invalid("eps must be nonnegative"));
    }
    Ok(r * eps * eps.exp() * (1.0 + 2.0 / PI * ((1.0 + r) / (1.0 - r)).ln()))
}

/// Inverse-map radius and bound `3 ε log(1/ε)`.
pub fn inverse_bound(eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < (-2.0f64).exp()) {
        return Err(Error::Hypothesis("inverse bound needs 0 < eps < e^-2".into()));
    }
    Ok(3.0 * eps * (1.0 / eps).ln())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub lemma: &'static str,
    pub eps: f64,
    pub r: f64,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Max of `|h(z) - z|` on `|z| ≤ r` (attained on the circle) against the
/// distortion bound.
pub fn certify_warschawski(map: &ConformalMap, cert: &RoundnessCertificate, r: f64, n_samples: usize) -> Result<BoundReport> {
    if r > map.validated_radius {
        return Err(invalid("radius exceeds the validated radius of the map"));
    }
    let bound = warschawski_rhs(cert.eps, r)?;
    let mut measured = 0.0f64;
    for ring in 1..=4 {
        let rr = r * ring as f64 / 4.0;
        for z in circle_points(c64(0.0, 0.0), rr, n_samples, 0.0) {
            measured = measured.max((map.eval(z) - z).norm());
        }
    }
    Ok(BoundReport { lemma: "war", eps: cert.eps, r, measured, bound, pass: measured <= bound })
}

/// Sup of `|h⁻¹(z) - z|` on `|z| < 1 - 3ε log(1/ε)` against `3ε log(1/ε)`.
pub fn certify_inverse_bound(map: &ConformalMap, cert: &RoundnessCertificate, n_samples: usize) -> Result<BoundReport> {
    let bound = inverse_bound(cert.eps)?;
    let radius = 1.0 - bound;
    let mut measured = 0.0f64;
    for ring in 1..=4 {
        let rr = radius * ring as f64 / 4.0;
        let mut prev = c64(rr, 0.0);
        for w in circle_points(c64(0.0, 0.0), rr, n_samples, 0.0) {
            let z = map.invert_from(w, prev, 1e-14).or_else(|_| map.invert(w, 1e-14))?;
            prev = z;
            measured = measured.max((z - w).norm());
        }
    }
    Ok(BoundReport { lemma: "inv", eps: cert.eps, r: radius, measured, bound, pass: measured <= bound })
}

/// `Φ(z) = h(e^{-it}z)` with `t = arg h′(0)`, so `Φ′(0) = |h′(0)|`.
pub fn rotation_normalize(map: &ConformalMap) -> Result<(ConformalMap, f64)> {
    let d = map.derivative(c64(0.0, 0.0));
    if d.norm() < 1e-12 {
        return Err(Error::Degenerate("derivative at the origin vanishes".into()));
    }
    let t = d.arg();
    let mut out = map.clone();
    for (n, a) in out.coefficients.iter_mut().enumerate() {
        *a *= C64::from_polar(1.0, -(n as f64) * t);
    }
    out.rotation = map.rotation + t;
    Ok((out, t))
}

/// Exterior map `Ĉ \ Ω → Ĉ \ D̄` for a bounded domain containing 0,
/// reduced to an interior problem by `z ↦ 1/z`. Returns the interior map of
/// the inverted domain; `|φ(z)| = 1/|H⁻¹(1/z)|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExteriorMap {
    pub inverted: ConformalMap,
}

impl ExteriorMap {
    /// `boundary` samples the curve positively at equispaced parameters.
    pub fn solve(boundary: &[C64], tol: f64, max_iter: usize) -> Result<Self> {
        let m = boundary.len();
        // Reverse orientation so the inverted curve runs counter-clockwise.
        let inv: Vec<C64> = (0..m).map(|j| 1.0 / boundary[(m - j) % m]).collect();
        let curve = BoundaryCurve::from_samples(&inv)?;
        let inverted = solve_riemann(&curve, tol, max_iter)?;
        Ok(Self { inverted })
    }

    /// `φ(z)` for `z` outside the domain.
    pub fn eval(&self, z: C64) -> Result<C64> {
        let w = 1.0 / z;
        Ok(1.0 / self.inverted.invert(w, 1e-13)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_maps_to_identity() {
        let c = BoundaryCurve::circle(c64(0.0, 0.0), 1.0);
        let h = solve_riemann(&c, 1e-12, 50).unwrap();
        assert!((h.eval(c64(0.3, 0.4)) - c64(0.3, 0.4)).norm() < 1e-12);
        for (j, t) in h.correspondence().iter().enumerate() {
            assert!((t - TAU * j as f64 / h.correspondence().len() as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn rotated_circle_is_normalized() {
        let c = BoundaryCurve::from_terms(&[(1, C64::from_polar(1.0, PI / 4.0))]).unwrap();
        let h = solve_riemann(&c, 1e-12, 50).unwrap();
        assert!((h.eval(c64(0.5, -0.2)) - c64(0.5, -0.2)).norm() < 1e-12);
    }

    #[test]
    fn warschawski_values() {
        assert_eq!(warschawski_rhs(0.01, 0.0).unwrap(), 0.0);
        assert!(warschawski_rhs(1e-300, 0.5).unwrap() < 1e-299);
        assert!((warschawski_rhs(0.01, 0.5).unwrap() - 0.008582).abs() < 1e-6);
        assert!(warschawski_rhs(0.01, 1.0).is_err());
    }

    #[test]
    fn inversion_and_rotation() {
        let h = ConformalMap::identity();
        assert!((h.invert(c64(0.3, 0.1), 1e-14).unwrap() - c64(0.3, 0.1)).norm() < 1e-14);
        let two = ConformalMap::from_coefficients(vec![c64(0.0, 0.0), c64(2.0, 0.0)]);
        assert!((two.invert(c64(1.0, 0.0), 1e-14).unwrap() - c64(0.5, 0.0)).norm() < 1e-14);
        let rot = ConformalMap::from_coefficients(vec![c64(0.0, 0.0), C64::from_polar(1.0, PI / 3.0)]);
        let (m, t) = rotation_normalize(&rot).unwrap();
        assert!((t - PI / 3.0).abs() < 1e-15);
        assert!((m.eval(c64(0.2, 0.7)) - c64(0.2, 0.7)).norm() < 1e-15);
        let (_, t0) = rotation_normalize(&h).unwrap();
        assert_eq!(t0, 0.0);
        assert!(inverse_bound(0.2).is_err());
        assert!((inverse_bound(1e-3).unwrap() - 0.020723).abs() < 1e-6);
    }

    #[test]
    fn univalence_witness() {
        assert!(ConformalMap::identity().univalent_on(0.99, 256));
        let sq = ConformalMap::from_coefficients(vec![c64(0.0, 0.0), c64(0.0, 0.0), c64(1.0, 0.0)]);
        assert!(!sq.univalent_on(0.5, 256));
    }
}
