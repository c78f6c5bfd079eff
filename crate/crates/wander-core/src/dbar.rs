//! The ∂̄ machinery: cut-offs with analytic ∂̄χ, the weighted integral that
//! controls corrections, a Cauchy-transform particular solution, a weighted
//! polynomial projection and the error/growth certifiers.

use crate::cert::Certificate;
use crate::error::{invalid, Error, Result};
use crate::fft;
use crate::geometry::{circle_points, polar_nodes, ComplexGrid};
use crate::subharmonic::Weight;
use crate::{c64, C64};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};
use nalgebra::{DMatrix, DVector};
use num_traits::Float;
use serde::{Deserialize, Serialize};

/// Transition profile `ψ: [0, 1] → [0, 1]` with `ψ(0) = 1`, `ψ(1) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// `1 - (6t⁵ - 15t⁴ + 10t³)`, `C²`.
    #[default]
    Quintic,
    /// Smooth step built from `e^{-1/x}`.
    Bump,
}

fn bump(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (-1.0 / x).exp()
    }
}

fn bump_prime(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        bump(x) / (x * x)
    }
}

impl Profile {
    pub fn value(self, t: f64) -> f64 {
        let t = t.clamp(0.0, 1.0);
        match self {
            Profile::Quintic => 1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t),
            Profile::Bump => {
                let (a, b) = (bump(1.0 - t), bump(t));
                a / (a + b)
            }
        }
    }

    pub fn derivative(self, t: f64) -> f64 {
        if !(t > 0.0 && t < 1.0) {
            return 0.0;
        }
        match self {
            Profile::Quintic => -30.0 * t * t * (1.0 - t) * (1.0 - t),
            Profile::Bump => {
                let (a, b) = (bump(1.0 - t), bump(t));
                -(bump_prime(1.0 - t) * b + a * bump_prime(t)) / ((a + b) * (a + b))
            }
        }
    }
}

/// Region on which a cut-off equals one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CutRegion {
    Disk { center: C64, radius: f64 },
    /// `|z - center| > radius`.
    Exterior { center: C64, radius: f64 },
    /// Interior of a closed polygon (counter-clockwise or not).
    Polygon { vertices: Vec<C64> },
}

impl CutRegion {
    /// Distance to the region and the outward unit gradient of that distance.
    pub fn distance(&self, z: C64) -> (f64, C64) {
        match self {
            CutRegion::Disk { center, radius } => {
                let w = z - center;
                let n = w.norm();
                if n <= *radius || n == 0.0 {
                    (0.0, C64::new(0.0, 0.0))
                } else {
                    (n - radius, w / n)
                }
            }
            CutRegion::Exterior { center, radius } => {
                let w = z - center;
                let n = w.norm();
                if n >= *radius {
                    (0.0, C64::new(0.0, 0.0))
                } else if n == 0.0 {
                    (*radius, C64::new(0.0, 0.0))
                } else {
                    (radius - n, -w / n)
                }
            }
            CutRegion::Polygon { vertices } => {
                let poly = crate::geometry::Polygon::new(vertices.clone());
                if poly.contains(z) {
                    return (0.0, C64::new(0.0, 0.0));
                }
                let p = nearest_on_polygon(vertices, z);
                let d = (z - p).norm();
                if d == 0.0 {
                    (0.0, C64::new(0.0, 0.0))
                } else {
                    (d, (z - p) / d)
                }
            }
        }
    }

    fn boundary(&self, n: usize) -> Vec<C64> {
        match self {
            CutRegion::Disk { center, radius } | CutRegion::Exterior { center, radius } => circle_points(*center, *radius, n, 0.0),
            CutRegion::Polygon { vertices } => vertices.clone(),
        }
    }
}

fn nearest_on_polygon(v: &[C64], z: C64) -> C64 {
    let mut best = v[0];
    let mut bd = f64::INFINITY;
    for k in 0..v.len() {
        let (a, b) = (v[k], v[(k + 1) % v.len()]);
        let e = b - a;
        let t = if e.norm_sqr() > 0.0 { (((z - a) * e.conj()).re / e.norm_sqr()).clamp(0.0, 1.0) } else { 0.0 };
        let p = a + e * t;
        let d = (z - p).norm();
        if d < bd {
            bd = d;
            best = p;
        }
    }
    best
}

/// `χ = ψ(dist(z, ∪Ω_k)/ε)`, clamped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutOff {
    pub regions: Vec<CutRegion>,
    pub eps: f64,
    pub profile: Profile,
    /// Measured `ε · sup|∇χ|`.
    pub gradient_constant: f64,
}

/// Build a cut-off after checking `4ε` separation on `n` boundary samples per region.
pub fn build_cutoff(regions: Vec<CutRegion>, eps: f64, profile: Profile) -> Result<CutOff> {
    if !(eps > 0.0) {
        return Err(invalid("eps must be positive"));
    }
    let mut measured = f64::INFINITY;
    for i in 0..regions.len() {
        for j in 0..regions.len() {
            if i == j {
                continue;
            }
            for z in regions[i].boundary(1024) {
                measured = measured.min(regions[j].distance(z).0);
            }
        }
    }
    // Rounding slack: a gap of exactly 4ε is allowed.
    if measured < 4.0 * eps * (1.0 - 1e-12) {
        return Err(Error::Separation { measured, required: 4.0 * eps });
    }
    let mut g: f64 = 0.0;
    for k in 0..=20000 {
        g = g.max(profile.derivative(k as f64 / 20000.0).abs());
    }
    Ok(CutOff { regions, eps, profile, gradient_constant: g })
}

impl CutOff {
    /// Constant cut-off; `ε` is arbitrary.
    pub fn constant(one: bool) -> Self {
        let regions = if one { vec![CutRegion::Exterior { center: c64(0.0, 0.0), radius: 0.0 }] } else { Vec::new() };
        CutOff { regions, eps: 1.0, profile: Profile::Quintic, gradient_constant: 0.0 }
    }

    fn nearest(&self, z: C64) -> (f64, C64) {
        let mut best = (f64::INFINITY, C64::new(0.0, 0.0));
        for r in &self.regions {
            let d = r.distance(z);
            if d.0 < best.0 {
                best = d;
            }
        }
        best
    }

    pub fn value(&self, z: C64) -> f64 {
        let (d, _) = self.nearest(z);
        if d == f64::INFINITY {
            0.0
        } else {
            self.profile.value(d / self.eps)
        }
    }

    /// `∂̄χ = ψ'(d/ε) · ∂̄d / ε` with `∂̄d = n/2` for the unit gradient `n`.
    pub fn dbar(&self, z: C64) -> C64 {
        let (d, n) = self.nearest(z);
        if !(d > 0.0 && d < self.eps) {
            return C64::new(0.0, 0.0);
        }
        n * (0.5 * self.profile.derivative(d / self.eps) / self.eps)
    }

    /// True where `∇χ` may be non-zero.
    pub fn in_band(&self, z: C64) -> bool {
        let (d, _) = self.nearest(z);
        d > 0.0 && d < self.eps
    }

    /// True when `χ ≡ 1` on the closed disk, checked on polar samples.
    pub fn is_one_on(&self, center: C64, radius: f64) -> bool {
        let (pts, _) = polar_nodes(center, radius, 16, 64);
        pts.iter().chain(circle_points(center, radius, 256, 0.0).iter()).all(|&z| self.nearest(z).0 == 0.0)
            && self.nearest(center).0 == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HormanderReport {
    pub value: f64,
    pub coarse: f64,
    /// `|fine - coarse| / 3` for the second-order midpoint rule.
    pub error_estimate: f64,
    pub band_cells: usize,
}

/// `𝓘 = sqrt(½ ∬ |∂̄χ · h|² e^{-u})` by midpoint quadrature over `grid` cells,
/// with a Richardson estimate from the grid of doubled spacing.
pub fn hormander_integral(h: &dyn Fn(C64) -> C64, chi: &CutOff, u: &Weight, grid: &ComplexGrid) -> Result<HormanderReport> {
    let fine = band_sum(h, chi, u, grid.origin, grid.spacing, grid.nx, grid.ny)?;
    let co = grid.origin + c64(0.5 * grid.spacing, 0.5 * grid.spacing);
    let coarse = band_sum(h, chi, u, co, 2.0 * grid.spacing, grid.nx / 2, grid.ny / 2)?;
    let (v, c) = ((0.5 * fine.0).sqrt(), (0.5 * coarse.0).sqrt());
    Ok(HormanderReport { value: v, coarse: c, error_estimate: (v - c).abs() / 3.0, band_cells: fine.1 })
}

fn band_sum(h: &dyn Fn(C64) -> C64, chi: &CutOff, u: &Weight, origin: C64, sp: f64, nx: usize, ny: usize) -> Result<(f64, usize)> {
    let mut sum = 0.0;
    let mut cells = 0;
    for j in 0..ny {
        for i in 0..nx {
            let z = origin + c64(i as f64 * sp, j as f64 * sp);
            let d = chi.dbar(z);
            if d == C64::new(0.0, 0.0) {
                continue;
            }
            let hv = h(z);
            if !(hv.re.is_finite() && hv.im.is_finite()) {
                return Err(Error::NonFinite(format!("model map at {z}")));
            }
            let uv = u.value(z);
            if uv == f64::NEG_INFINITY || uv.is_nan() {
                return Err(Error::NonFinite(format!("weight at {z} on the band")));
            }
            sum += (d * hv).norm_sqr() * (-uv).exp() * sp * sp;
            cells += 1;
        }
    }
    Ok((sum, cells))
}

/// `ln 𝓘` for model maps whose size only fits in log form; `h` returns `ln |h|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogHormanderReport {
    pub ln_value: f64,
    pub ln_coarse: f64,
    pub band_cells: usize,
}

pub fn hormander_integral_log(ln_h: &dyn Fn(C64) -> f64, chi: &CutOff, u: &Weight, grid: &ComplexGrid) -> Result<LogHormanderReport> {
    let fine = band_sum_log(ln_h, chi, u, grid.origin, grid.spacing, grid.nx, grid.ny)?;
    let co = grid.origin + c64(0.5 * grid.spacing, 0.5 * grid.spacing);
    let coarse = band_sum_log(ln_h, chi, u, co, 2.0 * grid.spacing, grid.nx / 2, grid.ny / 2)?;
    let half = 0.5f64.ln();
    Ok(LogHormanderReport { ln_value: 0.5 * (half + fine.0), ln_coarse: 0.5 * (half + coarse.0), band_cells: fine.1 })
}

fn band_sum_log(ln_h: &dyn Fn(C64) -> f64, chi: &CutOff, u: &Weight, origin: C64, sp: f64, nx: usize, ny: usize) -> Result<(f64, usize)> {
    // Running log-sum-exp in a fixed order.
    let mut acc = f64::NEG_INFINITY;
    let mut cells = 0;
    for j in 0..ny {
        for i in 0..nx {
            let z = origin + c64(i as f64 * sp, j as f64 * sp);
            let d = chi.dbar(z);
            if d == C64::new(0.0, 0.0) {
                continue;
            }
            let lh = ln_h(z);
            let uv = u.value(z);
            if lh.is_nan() || lh == f64::INFINITY || uv.is_nan() || uv == f64::NEG_INFINITY {
                return Err(Error::NonFinite(format!("integrand at {z}")));
            }
            let term = 2.0 * (d.norm().ln() + lh) - uv + 2.0 * sp.ln();
            if term > acc {
                acc = term + (acc - term).exp().ln_1p();
            } else if term > f64::NEG_INFINITY {
                acc += (term - acc).exp().ln_1p();
            }
            cells += 1;
        }
    }
    Ok((acc, cells))
}

/// A particular solution of `∂̄β = g`.
pub trait Correction {
    fn beta(&self, z: C64) -> C64;
}

/// `(1/π) ∬_{cell} dm(w) / (d - w)` for a square cell of side `h` centred at the origin.
pub fn cell_kernel(d: C64, h: f64) -> C64 {
    let n = d.norm();
    if n > 8.0 * h {
        // Midpoint plus the first non-vanishing moment of the square.
        let inv = 1.0 / d;
        let h2 = h * h;
        return (h2 * inv - (h2 * h2 * h2 / 60.0) * inv * inv * inv * inv * inv) / PI;
    }
    let half = 0.5 * h;
    let (x1, x2) = (d.re - half, d.re + half);
    let (y1, y2) = (d.im - half, d.im + half);
    let f = |x: f64, y: f64| {
        let r2 = x * x + y * y;
        let l = if r2 > 0.0 { r2.ln() } else { 0.0 };
        let gre = 0.5 * y * l + if x != 0.0 { x * (y / x).atan() } else { 0.0 };
        let gim = 0.5 * x * l + if y != 0.0 { y * (x / y).atan() } else { 0.0 };
        C64::new(gre, -gim)
    };
    (f(x2, y2) - f(x1, y2) - f(x2, y1) + f(x1, y1)) / PI
}

/// Cauchy-transform solution on a grid of cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CauchySolution {
    /// Cell-averaged data `g`.
    pub g: ComplexGrid,
    /// `β` at the cell centres.
    pub beta: ComplexGrid,
}

/// Cell averages of the unit-disk indicator on an `n × n` grid over
/// `[-half, half]²`; cells cut by the circle are supersampled.
pub fn disk_indicator(n: usize, half: f64) -> Result<ComplexGrid> {
    let mut g = ComplexGrid::covering(-half, -half, half, half, n, n)?;
    let h = g.spacing;
    g.fill(|z| {
        let (near, far) = ((z.norm() - h).max(0.0), z.norm() + h);
        if far < 1.0 {
            return c64(1.0, 0.0);
        }
        if near > 1.0 {
            return c64(0.0, 0.0);
        }
        let m = 32;
        let mut hit = 0;
        for a in 0..m {
            for b in 0..m {
                let w = z + c64(((a as f64 + 0.5) / m as f64 - 0.5) * h, ((b as f64 + 0.5) / m as f64 - 0.5) * h);
                if w.norm() < 1.0 {
                    hit += 1;
                }
            }
        }
        c64(hit as f64 / (m * m) as f64, 0.0)
    });
    Ok(g)
}

/// `β(z) = (1/π) ∬ g(w)/(z - w) dm(w)` with exact cell integrals near the
/// target and an FFT convolution over the grid.
pub fn solve_dbar_cauchy(g: &ComplexGrid) -> Result<CauchySolution> {
    let (nx, ny, h) = (g.nx, g.ny, g.spacing);
    let px = (2 * nx).next_power_of_two();
    let py = (2 * ny).next_power_of_two();
    let mut kern = vec![C64::new(0.0, 0.0); px * py];
    for j in 0..py {
        let dj = if j < py / 2 { j as i64 } else { j as i64 - py as i64 };
        for i in 0..px {
            let di = if i < px / 2 { i as i64 } else { i as i64 - px as i64 };
            let k = cell_kernel(c64(di as f64 * h, dj as f64 * h), h);
            if !(k.re.is_finite() && k.im.is_finite()) {
                return Err(Error::NonFinite("singular cell integral".into()));
            }
            kern[j * px + i] = k;
        }
    }
    let mut data = vec![C64::new(0.0, 0.0); px * py];
    for j in 0..ny {
        for i in 0..nx {
            data[j * px + i] = g.samples[g.index(i, j)];
        }
    }
    fft::fft2(&mut kern, px, py, false);
    fft::fft2(&mut data, px, py, false);
    for (d, k) in data.iter_mut().zip(&kern) {
        *d *= k;
    }
    fft::fft2(&mut data, px, py, true);
    let mut beta = ComplexGrid::zeros(g.origin, h, nx, ny)?;
    for j in 0..ny {
        for i in 0..nx {
            let k = beta.index(i, j);
            beta.samples[k] = data[j * px + i];
        }
    }
    Ok(CauchySolution { g: g.clone(), beta })
}

impl CauchySolution {
    /// Direct summation at an arbitrary point.
    pub fn eval(&self, z: C64) -> C64 {
        let g = &self.g;
        let mut s = C64::new(0.0, 0.0);
        for j in 0..g.ny {
            for i in 0..g.nx {
                let v = g.samples[g.index(i, j)];
                if v != C64::new(0.0, 0.0) {
                    s += v * cell_kernel(z - g.point(i, j), g.spacing);
                }
            }
        }
        s
    }

    /// Max relative deviation of centred-difference `∂̄β` from `g` at cells
    /// at least `margin` cells away from any jump of `g`.
    pub fn dbar_residual(&self, margin: usize) -> f64 {
        let (g, b) = (&self.g, &self.beta);
        let h = g.spacing;
        let scale = g.samples.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);
        let mut worst: f64 = 0.0;
        for j in margin.max(1)..g.ny.saturating_sub(margin.max(1)) {
            for i in margin.max(1)..g.nx.saturating_sub(margin.max(1)) {
                let c = g.samples[g.index(i, j)];
                let mut smooth = true;
                'scan: for dj in -(margin as i64)..=margin as i64 {
                    for di in -(margin as i64)..=margin as i64 {
                        let v = g.samples[g.index((i as i64 + di) as usize, (j as i64 + dj) as usize)];
                        if (v - c).norm() > 1e-12 * scale {
                            smooth = false;
                            break 'scan;
                        }
                    }
                }
                if !smooth {
                    continue;
                }
                let dx = (b.samples[b.index(i + 1, j)] - b.samples[b.index(i - 1, j)]) / (2.0 * h);
                let dy = (b.samples[b.index(i, j + 1)] - b.samples[b.index(i, j - 1)]) / (2.0 * h);
                let d = 0.5 * (dx + C64::i() * dy);
                worst = worst.max((d - c).norm() / scale);
            }
        }
        worst
    }
}

impl Correction for CauchySolution {
    fn beta(&self, z: C64) -> C64 {
        self.eval(z)
    }
}

/// `β - P(β)` with `P` the weighted projection onto polynomials of degree `≤ N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimalSolution {
    pub base: CauchySolution,
    pub radius: f64,
    /// Coefficients of `P` in powers of `z/R`.
    pub coeffs: Vec<C64>,
    pub norm_before: f64,
    pub norm_after: f64,
    /// Max of `|⟨β - P, (z/R)^j⟩| / (‖β - P‖ ‖(z/R)^j‖)`.
    pub orthogonality: f64,
}

impl MinimalSolution {
    pub fn poly(&self, z: C64) -> C64 {
        let w = z / self.radius;
        self.coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, c| acc * w + c)
    }
}

impl Correction for MinimalSolution {
    fn beta(&self, z: C64) -> C64 {
        self.base.eval(z) - self.poly(z)
    }
}

/// Weighted projection with weight `e^{-u}/(1+|z|²)²` on `B(0, R)`; `nodes`
/// gives the polar quadrature resolution (rings, angles).
pub fn project_minimal(sol: &CauchySolution, u: &Weight, degree: usize, radius: f64, nodes: (usize, usize)) -> Result<MinimalSolution> {
    let (pts, area) = polar_nodes(c64(0.0, 0.0), radius, nodes.0, nodes.1);
    let mut wts = Vec::with_capacity(pts.len());
    for (z, a) in pts.iter().zip(&area) {
        let uv = u.value(*z);
        let w = (-uv).exp() / (1.0 + z.norm_sqr()).powi(2) * a;
        if !w.is_finite() {
            return Err(Error::NonFinite(format!("projection weight at {z}")));
        }
        wts.push(w.sqrt());
    }
    let m = pts.len();
    let mut a = DMatrix::<C64>::zeros(m, degree + 1);
    let mut b = DVector::<C64>::zeros(m);
    for (r, z) in pts.iter().enumerate() {
        let w = z / radius;
        let mut p = C64::new(wts[r], 0.0);
        for c in 0..=degree {
            a[(r, c)] = p;
            p *= w;
        }
        b[r] = sol.eval(*z) * wts[r];
    }
    let qr = a.clone().qr();
    let rm = qr.r();
    let diag: Vec<f64> = (0..=degree).map(|i| rm[(i, i)].norm()).collect();
    let ratio = diag.iter().cloned().fold(f64::INFINITY, f64::min) / diag.iter().cloned().fold(0.0, f64::max);
    if !(ratio > 1e-12) {
        return Err(Error::IllConditioned(1.0 / ratio));
    }
    let x = rm.solve_upper_triangular(&(qr.q().adjoint() * &b)).ok_or(Error::IllConditioned(1.0 / ratio))?;
    let res = &b - &a * &x;
    let norm_after = res.norm();
    let mut orth: f64 = 0.0;
    for c in 0..=degree {
        let col = a.column(c);
        let ip = col.dotc(&res).norm();
        let denom = col.norm() * norm_after;
        if denom > 0.0 {
            orth = orth.max(ip / denom);
        }
    }
    Ok(MinimalSolution { base: sol.clone(), radius, coeffs: x.iter().cloned().collect(), norm_before: b.norm(), norm_after, orthogonality: orth })
}

/// Weighted norm `sqrt(∬_{B(c,r)} |β|² e^{-u} / (1+|z|²)²)` by polar quadrature.
pub fn weighted_norm(beta: &dyn Fn(C64) -> C64, u: &Weight, center: C64, radius: f64, nodes: (usize, usize)) -> f64 {
    let (pts, area) = polar_nodes(center, radius, nodes.0, nodes.1);
    let mut s = 0.0;
    for (z, a) in pts.iter().zip(&area) {
        s += beta(*z).norm_sqr() * (-u.value(*z)).exp() / (1.0 + z.norm_sqr()).powi(2) * a;
    }
    s.sqrt()
}

/// `F = χh - β`.
pub struct Assembled<'a> {
    pub chi: &'a CutOff,
    pub h: &'a dyn Fn(C64) -> C64,
    pub correction: &'a dyn Correction,
}

impl Assembled<'_> {
    pub fn eval(&self, z: C64) -> C64 {
        let c = self.chi.value(z);
        let ch = if c == 0.0 { C64::new(0.0, 0.0) } else { (self.h)(z) * c };
        ch - self.correction.beta(z)
    }
}

/// Max over `centers` of the discrete `|∂̄F| / max(1, |∂F|)` with step `step`.
pub fn cauchy_riemann_residual(f: &dyn Fn(C64) -> C64, centers: &[C64], step: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for &z in centers {
        let dx = (f(z + step) - f(z - step)) / (2.0 * step);
        let dy = (f(z + C64::new(0.0, step)) - f(z - C64::new(0.0, step))) / (2.0 * step);
        let dbar = 0.5 * (dx + C64::i() * dy);
        let d = 0.5 * (dx - C64::i() * dy);
        worst = worst.max(dbar.norm() / d.norm().max(1.0));
    }
    worst
}

/// `max_{B(z,r)} e^{u/2}`, read off the boundary circle.
pub fn max_half_weight(u: &Weight, z: C64, r: f64) -> f64 {
    let m = circle_points(z, r, 256, 0.0).into_iter().map(|w| u.value(w)).fold(u.value(z), f64::max);
    (0.5 * m).exp()
}

/// Error bound: `|F(z) - h(z)| ≤ ((2+2|z|²)/r) · 𝓘 · max_{B(z,r)} e^{u/2}`.
#[allow(clippy::too_many_arguments)]
pub fn certify_error_bound(id: &str, f: &dyn Fn(C64) -> C64, h: &dyn Fn(C64) -> C64, chi: &CutOff, i_value: f64, u: &Weight, z: C64, r: f64) -> Result<Certificate> {
    if !(r > 0.0 && r <= 1f64.max(z.norm() / 3.0)) {
        return Err(invalid("radius must lie in (0, max(1, |z|/3)]"));
    }
    if !chi.is_one_on(z, r) {
        return Err(Error::Hypothesis(format!("cut-off is not identically one on B({z}, {r})")));
    }
    let measured = (f(z) - h(z)).norm();
    let bound = (2.0 + 2.0 * z.norm_sqr()) / r * i_value * max_half_weight(u, z, r);
    Ok(Certificate::upper(id, format!("|F - h| at {z} within the error bound on radius {r}"), measured, bound))
}

/// Growth bound: `|F(z)| ≤ max_{B(z,1)} |h| + ((2+2|z|²)/√π) · 𝓘 · max_{B(z,1)} e^{u/2}`.
pub fn certify_growth_bound(id: &str, f: &dyn Fn(C64) -> C64, h: &dyn Fn(C64) -> C64, i_value: f64, u: &Weight, z: C64) -> Certificate {
    let (pts, _) = polar_nodes(z, 1.0, 12, 48);
    let hmax = pts
        .iter()
        .chain(circle_points(z, 1.0, 128, 0.0).iter())
        .map(|&w| h(w).norm())
        .fold(h(z).norm(), f64::max);
    let bound = hmax + (2.0 + 2.0 * z.norm_sqr()) / PI.sqrt() * i_value * max_half_weight(u, z, 1.0);
    Certificate::upper(id, format!("|F| at {z} within the growth bound"), f(z).norm(), bound)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeReport {
    pub circle_max: f64,
    /// `circle_max / r`.
    pub bound: f64,
    /// `|F'(z) - G'(z)|` from Cauchy integrals on the circle.
    pub measured: f64,
    pub pass: bool,
}

/// Cauchy estimate `|F'(z) - G'(z)| ≤ max_{|w-z|=r} |F - G| / r`.
pub fn derivative_bound(f: &dyn Fn(C64) -> C64, g: &dyn Fn(C64) -> C64, z: C64, r: f64) -> DerivativeReport {
    let n = 256;
    let mut circle_max: f64 = 0.0;
    let mut df = C64::new(0.0, 0.0);
    for k in 0..n {
        let e = C64::from_polar(1.0, TAU * k as f64 / n as f64);
        let d = f(z + e * r) - g(z + e * r);
        circle_max = circle_max.max(d.norm());
        df += d / e;
    }
    let measured = (df / (n as f64 * r)).norm();
    let bound = circle_max / r;
    DerivativeReport { circle_max, bound, measured, pass: measured <= bound * (1.0 + 1e-12) + 1e-15 }
}

/// `F'(z)` by the Cauchy integral on `|w - z| = r`.
pub fn cauchy_derivative(f: &dyn Fn(C64) -> C64, z: C64, r: f64, n: usize) -> C64 {
    let mut s = C64::new(0.0, 0.0);
    for k in 0..n {
        let e = C64::from_polar(1.0, TAU * k as f64 / n as f64);
        s += f(z + e * r) / e;
    }
    s / (n as f64 * r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_cutoff(eps: f64) -> CutOff {
        build_cutoff(vec![CutRegion::Disk { center: c64(0.0, 0.0), radius: 1.0 }], eps, Profile::Quintic).unwrap()
    }

    #[test]
    fn cutoff_examples() {
        let chi = unit_cutoff(0.1);
        assert_eq!(chi.value(c64(0.5, 0.0)), 1.0);
        assert!((chi.value(c64(0.0, 1.05)) - 0.5).abs() < 1e-12);
        for k in 0..16 {
            assert_eq!(chi.value(C64::from_polar(1.2, k as f64)), 0.0);
        }
        assert!((chi.gradient_constant - 1.875).abs() < 1e-6);
        // Analytic ∂̄χ against differences.
        let z = c64(0.7, 0.74);
        let h = 1e-6;
        let dx = (chi.value(z + h) - chi.value(z - h)) / (2.0 * h);
        let dy = (chi.value(z + C64::new(0.0, h)) - chi.value(z - C64::new(0.0, h))) / (2.0 * h);
        assert!((chi.dbar(z) - 0.5 * c64(dx, dy)).norm() < 1e-6);
        let bad = build_cutoff(
            vec![CutRegion::Disk { center: c64(0.0, 0.0), radius: 1.0 }, CutRegion::Exterior { center: c64(0.0, 0.0), radius: 1.3 }],
            0.1,
            Profile::Quintic,
        );
        assert!(matches!(bad, Err(Error::Separation { .. })));
        assert!((Profile::Bump.value(0.5) - 0.5).abs() < 1e-15);
        assert!((Profile::Bump.derivative(0.5) + 2.0).abs() < 1e-12);
    }

    #[test]
    fn hormander_examples() {
        let zero = Weight::Constant { value: 0.0 };
        let grid = ComplexGrid::covering(-1.5, -1.5, 1.5, 1.5, 256, 256).unwrap();
        let one = |_: C64| c64(1.0, 0.0);
        let flat = CutOff::constant(true);
        assert_eq!(hormander_integral(&one, &flat, &zero, &grid).unwrap().value, 0.0);
        let chi = unit_cutoff(0.25);
        let rep = hormander_integral(&one, &chi, &zero, &grid).unwrap();
        let sup = 1.875 / (2.0 * 0.25);
        let area = PI * (1.25f64.powi(2) - 1.0);
        assert!(rep.value * rep.value <= 0.5 * sup * sup * area);
        // ½∬ψ'²/(4ε²) over the band, ∫ψ'² = 10/7.
        let exact = (0.5 * TAU * (10.0 / 7.0) / (4.0 * 0.25 * 0.25) * (0.25 * (1.0 + 0.25 * 3.0 / 7.0))).sqrt();
        assert!((rep.value - exact).abs() < 0.02 * exact, "{} vs {exact}", rep.value);
        // Raising the weight never increases the integral.
        let up = Weight::Constant { value: 1.0 };
        assert!(hormander_integral(&one, &chi, &up, &grid).unwrap().value <= rep.value);
    }

    #[test]
    fn kernel_is_cell_integral() {
        // Compare with fine midpoint quadrature away from the singularity.
        let h = 0.1;
        for d in [c64(0.25, 0.1), c64(-0.3, 0.45), c64(0.9, -0.2)] {
            let n = 400;
            let mut s = C64::new(0.0, 0.0);
            for a in 0..n {
                for b in 0..n {
                    let w = c64(-0.5 * h + (a as f64 + 0.5) * h / n as f64, -0.5 * h + (b as f64 + 0.5) * h / n as f64);
                    s += 1.0 / (d - w);
                }
            }
            s *= (h / n as f64).powi(2) / PI;
            assert!((cell_kernel(d, h) - s).norm() < 1e-8, "{d}");
        }
        // Far field against the exact corner formula.
        let d = c64(0.79, 0.1);
        let k1 = cell_kernel(d, 0.1);
        let k2 = cell_kernel(d * 1.0001, 0.1);
        assert!((k1 - k2).norm() < 1e-5);
    }

    #[test]
    fn cauchy_trivial_and_annulus() {
        let g = ComplexGrid::covering(-2.5, -2.5, 2.5, 2.5, 64, 64).unwrap();
        let sol = solve_dbar_cauchy(&g).unwrap();
        assert!(sol.beta.samples.iter().all(|v| v.norm() == 0.0));
        let mut g = ComplexGrid::covering(-2.5, -2.5, 2.5, 2.5, 128, 128).unwrap();
        g.fill(|z| if z.norm() > 1.0 && z.norm() < 2.0 { c64(1.0, 0.0) } else { c64(0.0, 0.0) });
        let sol = solve_dbar_cauchy(&g).unwrap();
        assert!(sol.eval(c64(0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn derivative_and_error_examples() {
        let f = |z: C64| z * z;
        let g = |z: C64| z * z + 0.01;
        let rep = derivative_bound(&f, &g, c64(0.3, 0.1), 1.0);
        assert!((rep.bound - 0.01).abs() < 1e-12 && rep.measured < 1e-12);
        let zero = Weight::Constant { value: 0.0 };
        let flat = CutOff::constant(true);
        let id = |z: C64| z;
        let c = certify_error_bound("A1", &id, &id, &flat, 1.0, &zero, c64(0.0, 0.0), 1.0).unwrap();
        assert!((c.bound - 2.0).abs() < 1e-12 && c.pass);
        let c = certify_growth_bound("A2", &id, &id, 0.0, &zero, c64(3.0, 0.0));
        assert!(c.pass);
        assert!(certify_error_bound("A1", &id, &id, &unit_cutoff(0.1), 1.0, &zero, c64(0.9, 0.0), 0.5).is_err());
    }
}
