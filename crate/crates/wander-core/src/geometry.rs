//! Planar primitives: grids, disks, annuli, Fourier boundary curves and
//! sample-based region tests.

use crate::error::{invalid, Error, Result};
use crate::fft;
use crate::{c64, C64};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::TAU;
use num_traits::Float;
use serde::{Deserialize, Serialize};

/// Row-major grid of complex samples; cell `(i, j)` sits at
/// `origin + (i·spacing, j·spacing)` and is stored at `j·nx + i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexGrid {
    pub origin: C64,
    pub spacing: f64,
    pub nx: usize,
    pub ny: usize,
    pub samples: Vec<C64>,
}

impl ComplexGrid {
    pub fn zeros(origin: C64, spacing: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(spacing > 0.0) || nx == 0 || ny == 0 {
            return Err(invalid("grid needs positive spacing and dimensions"));
        }
        Ok(Self { origin, spacing, nx, ny, samples: vec![C64::new(0.0, 0.0); nx * ny] })
    }

    /// Grid whose cell centres cover the square `[x0, x1] × [y0, y1]` with `nx × ny` cells.
    pub fn covering(x0: f64, y0: f64, x1: f64, y1: f64, nx: usize, ny: usize) -> Result<Self> {
        let h = (x1 - x0) / nx as f64;
        if ((y1 - y0) / ny as f64 - h).abs() > 1e-12 * h.abs().max(1.0) {
            return Err(invalid("covering grid needs square cells"));
        }
        Self::zeros(c64(x0 + 0.5 * h, y0 + 0.5 * h), h, nx, ny)
    }

    #[inline]
    pub fn point(&self, i: usize, j: usize) -> C64 {
        self.origin + c64(i as f64 * self.spacing, j as f64 * self.spacing)
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn fill(&mut self, f: impl Fn(C64) -> C64) {
        for j in 0..self.ny {
            for i in 0..self.nx {
                let k = self.index(i, j);
                self.samples[k] = f(self.point(i, j));
            }
        }
    }

    /// Points in storage order.
    pub fn points(&self) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.nx * self.ny);
        for j in 0..self.ny {
            for i in 0..self.nx {
                out.push(self.point(i, j));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center: C64,
    pub radius: f64,
}

impl Disk {
    pub fn new(center: C64, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(invalid(format!("disk radius must be positive, got {radius}")));
        }
        Ok(Self { center, radius })
    }

    #[inline]
    pub fn contains(&self, z: C64) -> bool {
        (z - self.center).norm() < self.radius
    }

    /// Distance from `z` to the closed disk (zero inside).
    #[inline]
    pub fn distance(&self, z: C64) -> f64 {
        ((z - self.center).norm() - self.radius).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Annulus {
    pub center: C64,
    pub inner: f64,
    pub outer: f64,
}

impl Annulus {
    pub fn new(center: C64, inner: f64, outer: f64) -> Result<Self> {
        if !(inner > 0.0 && inner < outer) {
            return Err(invalid(format!("annulus needs 0 < inner < outer, got {inner}, {outer}")));
        }
        Ok(Self { center, inner, outer })
    }

    #[inline]
    pub fn contains(&self, z: C64) -> bool {
        let r = (z - self.center).norm();
        r > self.inner && r < self.outer
    }

    pub fn disjoint_from(&self, other: &Annulus) -> bool {
        self.center == other.center && (self.outer <= other.inner || other.outer <= self.inner)
    }
}

/// Closed curve `γ(t) = Σ_{n=-N}^{N} c_n e^{int}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCurve {
    degree: usize,
    coefficients: Vec<C64>,
}

impl BoundaryCurve {
    /// Coefficients listed from `n = -N` to `n = N`.
    pub fn new(coefficients: Vec<C64>) -> Result<Self> {
        if coefficients.len().is_multiple_of(2) {
            return Err(invalid("coefficient list must have odd length 2N+1"));
        }
        if coefficients.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::NonFinite("curve coefficient".into()));
        }
        Ok(Self { degree: coefficients.len() / 2, coefficients })
    }

    /// Build from sparse `(n, c_n)` pairs.
    pub fn from_terms(terms: &[(i64, C64)]) -> Result<Self> {
        let n = terms.iter().map(|(k, _)| k.unsigned_abs() as usize).max().unwrap_or(0).max(1);
        let mut c = vec![C64::new(0.0, 0.0); 2 * n + 1];
        for &(k, v) in terms {
            c[(k + n as i64) as usize] += v;
        }
        Self::new(c)
    }

    pub fn circle(center: C64, radius: f64) -> Self {
        Self { degree: 1, coefficients: vec![C64::new(0.0, 0.0), center, c64(radius, 0.0)] }
    }

    /// Fourier coefficients of the periodic samples `values[j] = γ(2πj/M)`,
    /// `M` a power of two; the Nyquist mode is dropped.
    pub fn from_samples(values: &[C64]) -> Result<Self> {
        let m = values.len();
        if m < 4 || !m.is_power_of_two() {
            return Err(invalid("sample count must be a power of two >= 4"));
        }
        let mut buf = values.to_vec();
        fft::fft(&mut buf);
        let n = m / 2 - 1;
        let mut c = vec![C64::new(0.0, 0.0); 2 * n + 1];
        for k in -(n as i64)..=(n as i64) {
            let idx = k.rem_euclid(m as i64) as usize;
            c[(k + n as i64) as usize] = buf[idx] / m as f64;
        }
        Self::new(c)
    }

    /// Star-shaped curve `t ↦ r(t) e^{it}` sampled at `m` points.
    pub fn polar(r: impl Fn(f64) -> f64, m: usize) -> Result<Self> {
        let vals: Vec<C64> = (0..m)
            .map(|j| {
                let t = TAU * j as f64 / m as f64;
                C64::from_polar(r(t), t)
            })
            .collect();
        Self::from_samples(&vals)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coefficients(&self) -> &[C64] {
        &self.coefficients
    }

    pub fn coefficient(&self, n: i64) -> C64 {
        let d = self.degree as i64;
        if n.abs() > d {
            C64::new(0.0, 0.0)
        } else {
            self.coefficients[(n + d) as usize]
        }
    }

    pub fn eval(&self, t: f64) -> C64 {
        let d = self.degree as i64;
        let mut acc = C64::new(0.0, 0.0);
        for (k, c) in self.coefficients.iter().enumerate() {
            let n = k as i64 - d;
            if *c != C64::new(0.0, 0.0) {
                acc += c * C64::from_polar(1.0, n as f64 * t);
            }
        }
        acc
    }

    pub fn derivative(&self, t: f64) -> C64 {
        let d = self.degree as i64;
        let mut acc = C64::new(0.0, 0.0);
        for (k, c) in self.coefficients.iter().enumerate() {
            let n = (k as i64 - d) as f64;
            acc += c * c64(0.0, n) * C64::from_polar(1.0, n * t);
        }
        acc
    }

    /// `m` equally spaced samples starting at `t = 0`.
    pub fn samples(&self, m: usize) -> Vec<C64> {
        (0..m).map(|j| self.eval(TAU * j as f64 / m as f64)).collect()
    }

    pub fn polygon(&self, m: usize) -> Polygon {
        Polygon::new(self.samples(m))
    }

    /// Roundness `ε = max(max|γ| - 1, 1/min|γ| - 1)` on `m` samples.
    pub fn roundness(&self, m: usize) -> f64 {
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for z in self.samples(m) {
            let r = z.norm();
            lo = lo.min(r);
            hi = hi.max(r);
        }
        (hi - 1.0).max(1.0 / lo - 1.0).max(0.0)
    }

    /// Checks winding number one around `inner` and absence of self-crossings
    /// on `m` samples.
    pub fn validate_jordan(&self, inner: C64, m: usize) -> Result<()> {
        let poly = self.polygon(m);
        let w = poly.winding(inner);
        if w != 1 {
            return Err(Error::NotJordan(format!("winding number {w} around interior point")));
        }
        if let Some((a, b)) = poly.self_intersection() {
            return Err(Error::NotJordan(format!("segments {a} and {b} cross")));
        }
        Ok(())
    }
}

/// Closed polygon from boundary samples, used for membership and distance.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<C64>,
}

impl Polygon {
    pub fn new(vertices: Vec<C64>) -> Self {
        Self { vertices }
    }

    pub fn vertices(&self) -> &[C64] {
        &self.vertices
    }

    /// Even-odd membership test.
    pub fn contains(&self, z: C64) -> bool {
        let v = &self.vertices;
        let n = v.len();
        let mut inside = false;
        let mut j = n - 1;
        for i in 0..n {
            let (a, b) = (v[i], v[j]);
            if (a.im > z.im) != (b.im > z.im) {
                let x = a.re + (z.im - a.im) * (b.re - a.re) / (b.im - a.im);
                if z.re < x {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }

    /// Distance to the boundary polyline.
    pub fn boundary_distance(&self, z: C64) -> f64 {
        let v = &self.vertices;
        let n = v.len();
        let mut best = f64::INFINITY;
        for i in 0..n {
            best = best.min(segment_distance(z, v[i], v[(i + 1) % n]));
        }
        best
    }

    /// Distance to the closed region (zero inside).
    pub fn distance(&self, z: C64) -> f64 {
        if self.contains(z) {
            0.0
        } else {
            self.boundary_distance(z)
        }
    }

    /// Winding number of the closed polyline around `z`.
    pub fn winding(&self, z: C64) -> i64 {
        let v = &self.vertices;
        let n = v.len();
        let mut total = 0.0;
        for i in 0..n {
            let a = v[i] - z;
            let b = v[(i + 1) % n] - z;
            total += (b / a).arg();
        }
        (total / TAU).round() as i64
    }

    /// First pair of non-adjacent crossing segments, if any.
    pub fn self_intersection(&self) -> Option<(usize, usize)> {
        let v = &self.vertices;
        let n = v.len();
        if n < 4 {
            return None;
        }
        // Sort segment indices by their left x extent and sweep.
        let seg = |i: usize| (v[i], v[(i + 1) % n]);
        let mut order: Vec<usize> = (0..n).collect();
        let lo = |i: usize| {
            let (a, b) = seg(i);
            a.re.min(b.re)
        };
        order.sort_by(|&a, &b| lo(a).total_cmp(&lo(b)).then(a.cmp(&b)));
        for (k, &i) in order.iter().enumerate() {
            let (a, b) = seg(i);
            let hi = a.re.max(b.re);
            for &j in &order[k + 1..] {
                if lo(j) > hi {
                    break;
                }
                let adjacent = (i + 1) % n == j || (j + 1) % n == i;
                if adjacent {
                    continue;
                }
                let (c, d) = seg(j);
                if segments_cross(a, b, c, d) {
                    return Some((i.min(j), i.max(j)));
                }
            }
        }
        None
    }
}

fn segment_distance(z: C64, a: C64, b: C64) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    if len2 == 0.0 {
        return (z - a).norm();
    }
    let t = (((z - a) * ab.conj()).re / len2).clamp(0.0, 1.0);
    (z - (a + ab * t)).norm()
}

fn cross(a: C64, b: C64) -> f64 {
    a.re * b.im - a.im * b.re
}

fn segments_cross(a: C64, b: C64, c: C64, d: C64) -> bool {
    let d1 = cross(b - a, c - a);
    let d2 = cross(b - a, d - a);
    let d3 = cross(d - c, a - c);
    let d4 = cross(d - c, b - c);
    (d1 > 0.0) != (d2 > 0.0) && (d3 > 0.0) != (d4 > 0.0) && d1 != 0.0 && d2 != 0.0 && d3 != 0.0 && d4 != 0.0
}

/// Van der Corput sequence in base 2; nested prefixes make sampled extrema
/// monotone in the sample count.
pub fn van_der_corput(mut j: u64) -> f64 {
    let mut x = 0.0;
    let mut f = 0.5;
    while j > 0 {
        if j & 1 == 1 {
            x += f;
        }
        j >>= 1;
        f *= 0.5;
    }
    x
}

/// Anything with a closed boundary parametrized over `[0, 2π)` and a membership test.
pub trait Shape {
    fn boundary_point(&self, t: f64) -> C64;
    fn contains(&self, z: C64) -> bool;
}

impl Shape for Disk {
    fn boundary_point(&self, t: f64) -> C64 {
        self.center + C64::from_polar(self.radius, t)
    }
    fn contains(&self, z: C64) -> bool {
        Disk::contains(self, z)
    }
}

impl Shape for BoundaryCurve {
    fn boundary_point(&self, t: f64) -> C64 {
        self.eval(t)
    }
    fn contains(&self, z: C64) -> bool {
        self.polygon(1024).contains(z)
    }
}

fn nested_samples<S: Shape + ?Sized>(s: &S, n: usize) -> Vec<C64> {
    (0..n as u64).map(|j| s.boundary_point(TAU * van_der_corput(j))).collect()
}

/// Maximum pairwise distance between `n_samples` nested boundary samples.
pub fn diameter<S: Shape + ?Sized>(shape: &S, n_samples: usize) -> Result<f64> {
    if n_samples < 16 {
        return Err(invalid("diameter needs at least 16 samples"));
    }
    let pts = nested_samples(shape, n_samples);
    let mut d = 0.0f64;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            d = d.max((pts[i] - pts[j]).norm());
        }
    }
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::Degenerate("boundary collapses to a point".into()));
    }
    Ok(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Separation {
    pub distance: f64,
    pub overlap: bool,
}

/// Minimum boundary-sample distance over all pairs; overlapping pairs give
/// distance 0 with the overlap flag raised.
pub fn separation(regions: &[&dyn Shape], n_samples: usize) -> Result<Separation> {
    if regions.len() < 2 {
        return Err(invalid("separation needs at least two regions"));
    }
    let samples: Vec<Vec<C64>> = regions.iter().map(|r| nested_samples(*r, n_samples)).collect();
    let mut best = f64::INFINITY;
    for a in 0..regions.len() {
        for b in a + 1..regions.len() {
            let overlap = samples[a].iter().any(|&z| regions[b].contains(z))
                || samples[b].iter().any(|&z| regions[a].contains(z));
            if overlap {
                return Ok(Separation { distance: 0.0, overlap: true });
            }
            for &p in &samples[a] {
                for &q in &samples[b] {
                    best = best.min((p - q).norm());
                }
            }
        }
    }
    Ok(Separation { distance: best, overlap: false })
}

/// Points on the circle `|z - c| = r`, `n` of them, starting at angle `phase`.
pub fn circle_points(c: C64, r: f64, n: usize, phase: f64) -> Vec<C64> {
    (0..n).map(|j| c + C64::from_polar(r, phase + TAU * j as f64 / n as f64)).collect()
}

/// Polar midpoint nodes on the disk `B(c, r)`: `nr` rings, `nt` angles each,
/// with their area weights.
pub fn polar_nodes(c: C64, r: f64, nr: usize, nt: usize) -> (Vec<C64>, Vec<f64>) {
    let dr = r / nr as f64;
    let mut z = Vec::with_capacity(nr * nt);
    let mut w = Vec::with_capacity(nr * nt);
    for i in 0..nr {
        let rho = (i as f64 + 0.5) * dr;
        for j in 0..nt {
            // Staggered angles avoid stacking nodes along rays.
            let t = TAU * (j as f64 + 0.5 * (i % 2) as f64) / nt as f64;
            z.push(c + C64::from_polar(rho, t));
            w.push(rho * dr * TAU / nt as f64);
        }
    }
    (z, w)
}

/// Angle of `z` in `[0, 2π)`.
pub fn angle(z: C64) -> f64 {
    let a = z.arg();
    if a < 0.0 {
        a + TAU
    } else {
        a
    }
}



#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_evaluation() {
        let c = BoundaryCurve::circle(c64(0.0, 0.0), 1.0);
        assert!((c.eval(0.0) - c64(1.0, 0.0)).norm() < 1e-15);
        assert!((c.eval(core::f64::consts::FRAC_PI_2) - c64(0.0, 1.0)).norm() < 1e-15);
        let c = BoundaryCurve::from_terms(&[(1, c64(1.0, 0.0)), (3, c64(0.01, 0.0))]).unwrap();
        assert!((c.eval(0.0) - c64(1.01, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn diameters_and_separation() {
        let unit = Disk::new(c64(0.0, 0.0), 1.0).unwrap();
        assert!((diameter(&unit, 64).unwrap() - 2.0).abs() < 1e-12);
        let d3 = Disk::new(c64(5.0, 0.0), 3.0).unwrap();
        assert!((diameter(&d3, 64).unwrap() - 6.0).abs() < 1e-12);
        let far = Disk::new(c64(10.0, 0.0), 1.0).unwrap();
        let near = Disk::new(c64(2.4, 0.0), 1.0).unwrap();
        assert!((separation(&[&unit, &far], 256).unwrap().distance - 8.0).abs() < 1e-12);
        assert!((separation(&[&unit, &near], 256).unwrap().distance - 0.4).abs() < 1e-12);
        let a = Disk::new(c64(3.0, 0.0), 1.0).unwrap();
        let b = Disk::new(c64(6.0, 0.0), 1.0).unwrap();
        assert!((separation(&[&unit, &a, &b], 256).unwrap().distance - 1.0).abs() < 1e-12);
        let hit = Disk::new(c64(1.5, 0.0), 1.0).unwrap();
        let s = separation(&[&unit, &hit], 64).unwrap();
        assert!(s.overlap && s.distance == 0.0);
    }

    #[test]
    fn polygon_tests() {
        let c = BoundaryCurve::circle(c64(0.0, 0.0), 1.0);
        assert!(c.validate_jordan(c64(0.0, 0.0), 4096).is_ok());
        let fig8 = BoundaryCurve::from_terms(&[(1, c64(1.0, 0.0)), (2, c64(1.5, 0.0))]).unwrap();
        assert!(fig8.validate_jordan(c64(0.0, 0.0), 512).is_err());
        let p = c.polygon(256);
        assert!(p.contains(c64(0.3, 0.2)) && !p.contains(c64(1.2, 0.0)));
        assert!((p.distance(c64(2.0, 0.0)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn from_samples_recovers_coefficients() {
        let c = BoundaryCurve::polar(|t| 1.0 + 0.01 * (3.0 * t).cos(), 64).unwrap();
        assert!((c.coefficient(1) - c64(1.0, 0.0)).norm() < 1e-14);
        assert!((c.coefficient(4) - c64(0.005, 0.0)).norm() < 1e-14);
        assert!((c.coefficient(-2) - c64(0.005, 0.0)).norm() < 1e-14);
        assert!((c.roundness(4096) - 0.01 / 0.99).abs() < 1e-9);
    }
}
