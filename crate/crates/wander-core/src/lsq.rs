//! Windowed entire surrogates fitted by least squares.
//!
//! A window is `exp(-((z - c)/s)²) · P((z - c)/σ)` with `P` in a Newton basis
//! on Leja nodes; dropping the Gaussian gives a plain polynomial. Sums of
//! windows are entire, decay along the real axis away from their centres and
//! are evaluated with a running power-of-two exponent so that degree-300
//! polynomials can be taken far outside their fit zones.

use crate::error::{invalid, Error, Result};
use crate::C64;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::LN_2;
use nalgebra::{DMatrix, DVector};
use num_traits::Float;
use serde::{Deserialize, Serialize};

const RESCALE: f64 = 500.0;

/// `mant · e^{log}`; used where values leave the `f64` range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogComplex {
    pub mant: C64,
    pub log: f64,
}

impl LogComplex {
    pub const ZERO: LogComplex = LogComplex { mant: C64::new(0.0, 0.0), log: 0.0 };

    pub fn ln_abs(&self) -> f64 {
        let n = self.mant.norm();
        if n == 0.0 {
            f64::NEG_INFINITY
        } else {
            n.ln() + self.log
        }
    }

    pub fn to_c64(&self) -> C64 {
        if self.mant == C64::new(0.0, 0.0) {
            return self.mant;
        }
        self.mant * self.log.exp()
    }

    pub fn sum(self, other: LogComplex) -> LogComplex {
        let (a, b) = (self.ln_abs(), other.ln_abs());
        if b == f64::NEG_INFINITY {
            return self;
        }
        if a == f64::NEG_INFINITY {
            return other;
        }
        // Align on the larger magnitude.
        if a >= b {
            LogComplex { mant: self.mant + other.mant * (other.log - self.log).exp(), log: self.log }
        } else {
            LogComplex { mant: other.mant + self.mant * (self.log - other.log).exp(), log: other.log }
        }
    }
}

/// Greedy Leja ordering of `candidates`, returning the first `n` nodes.
pub fn leja_points(candidates: &[C64], n: usize) -> Vec<C64> {
    if candidates.is_empty() || n == 0 {
        return Vec::new();
    }
    let mut start = 0;
    for (i, z) in candidates.iter().enumerate() {
        if z.norm() > candidates[start].norm() {
            start = i;
        }
    }
    let mut chosen = vec![candidates[start]];
    let mut score: Vec<f64> = candidates.iter().map(|z| (z - candidates[start]).norm().ln()).collect();
    while chosen.len() < n.min(candidates.len()) {
        let mut best = 0;
        for i in 0..candidates.len() {
            if score[i] > score[best] {
                best = i;
            }
        }
        if score[best] == f64::NEG_INFINITY {
            break;
        }
        let x = candidates[best];
        chosen.push(x);
        for (s, z) in score.iter_mut().zip(candidates) {
            *s += (z - x).norm().ln();
        }
    }
    chosen
}

/// Newton basis `ω_0 = 1`, `ω_{j+1} = ω_j · (ξ - x_j) / cap`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewtonBasis {
    pub nodes: Vec<C64>,
    pub cap: f64,
}

impl NewtonBasis {
    /// Basis of `degree + 1` functions on Leja nodes drawn from `candidates`.
    pub fn new(candidates: &[C64], degree: usize) -> Result<Self> {
        let nodes = leja_points(candidates, degree);
        if nodes.len() < degree {
            return Err(invalid("not enough distinct candidate nodes for the requested degree"));
        }
        // Capacity estimate from the Leja products.
        let mut cap = 1.0;
        if degree >= 2 {
            let mut acc = 0.0;
            let k = degree - 1;
            for i in 0..k {
                acc += (nodes[k] - nodes[i]).norm().ln();
            }
            cap = (acc / k as f64).exp();
        }
        if !(cap > 0.0 && cap.is_finite()) {
            cap = 1.0;
        }
        Ok(NewtonBasis { nodes, cap })
    }

    pub fn len(&self) -> usize {
        self.nodes.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// All basis values at `xi`, with a shared `2^k` factor returned as a log.
    pub fn values(&self, xi: C64) -> (Vec<C64>, f64) {
        let mut out = Vec::with_capacity(self.len());
        let mut w = C64::new(1.0, 0.0);
        let mut scale = 0.0;
        let down = (-RESCALE * LN_2).exp();
        out.push(w);
        for x in &self.nodes {
            w = w * (xi - x) / self.cap;
            if w.norm() > (RESCALE * LN_2).exp() {
                w *= down;
                for v in out.iter_mut() {
                    *v *= down;
                }
                scale += RESCALE * LN_2;
            }
            out.push(w);
        }
        (out, scale)
    }

    /// `Σ c_j ω_j(ξ)` and its `ξ`-derivative, sharing one log factor.
    pub fn eval_with_derivative(&self, coeffs: &[C64], xi: C64) -> (C64, C64, f64) {
        let up = (RESCALE * LN_2).exp();
        let down = 1.0 / up;
        let mut w = C64::new(1.0, 0.0);
        let mut dw = C64::new(0.0, 0.0);
        let mut s = coeffs[0];
        let mut ds = C64::new(0.0, 0.0);
        let mut scale = 0.0;
        for (j, x) in self.nodes.iter().enumerate() {
            let nw = w * (xi - x) / self.cap;
            dw = (dw * (xi - x) + w) / self.cap;
            w = nw;
            if w.norm() > up || dw.norm() > up {
                w *= down;
                dw *= down;
                s *= down;
                ds *= down;
                scale += RESCALE * LN_2;
            }
            s += coeffs[j + 1] * w;
            ds += coeffs[j + 1] * dw;
        }
        (s, ds, scale)
    }
}

/// One term of a surrogate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub center: C64,
    /// Polynomial scale `σ`.
    pub sigma: f64,
    /// Gaussian width `s`; `None` for a plain polynomial.
    pub gauss: Option<f64>,
    pub basis: NewtonBasis,
    pub coeffs: Vec<C64>,
}

impl Window {
    fn log_gauss(&self, z: C64) -> C64 {
        match self.gauss {
            Some(s) => {
                let w = (z - self.center) / s;
                -(w * w)
            }
            None => C64::new(0.0, 0.0),
        }
    }

    /// Basis column values `G(z) ω_j(ξ)` as `(values, log factor)`.
    fn columns(&self, z: C64) -> (Vec<C64>, C64) {
        let (vals, scale) = self.basis.values((z - self.center) / self.sigma);
        (vals, self.log_gauss(z) + scale)
    }

    pub fn eval(&self, z: C64) -> C64 {
        self.eval_log(z).to_c64()
    }

    pub fn eval_log(&self, z: C64) -> LogComplex {
        let (s, _, scale) = self.basis.eval_with_derivative(&self.coeffs, (z - self.center) / self.sigma);
        let lg = self.log_gauss(z);
        LogComplex { mant: s * C64::from_polar(1.0, lg.im), log: lg.re + scale }
    }

    /// Value and derivative in log form.
    pub fn eval_with_derivative(&self, z: C64) -> (LogComplex, LogComplex) {
        let (s, ds, scale) = self.basis.eval_with_derivative(&self.coeffs, (z - self.center) / self.sigma);
        let lg = self.log_gauss(z);
        let phase = C64::from_polar(1.0, lg.im);
        let dlg = match self.gauss {
            Some(g) => -2.0 * (z - self.center) / (g * g),
            None => C64::new(0.0, 0.0),
        };
        let d = ds / self.sigma + dlg * s;
        (
            LogComplex { mant: s * phase, log: lg.re + scale },
            LogComplex { mant: d * phase, log: lg.re + scale },
        )
    }
}

/// A finite sum of windows; entire by construction.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Surrogate {
    pub windows: Vec<Window>,
}

impl Surrogate {
    pub fn eval_log(&self, z: C64) -> LogComplex {
        self.windows.iter().fold(LogComplex::ZERO, |acc, w| acc.sum(w.eval_log(z)))
    }

    pub fn eval(&self, z: C64) -> C64 {
        self.eval_log(z).to_c64()
    }

    pub fn derivative(&self, z: C64) -> C64 {
        self.windows
            .iter()
            .fold(LogComplex::ZERO, |acc, w| acc.sum(w.eval_with_derivative(z).1))
            .to_c64()
    }

    pub fn extended(&self, more: &Surrogate) -> Surrogate {
        let mut windows = self.windows.clone();
        windows.extend(more.windows.iter().cloned());
        Surrogate { windows }
    }
}

/// Points with targets, fitted with a common row weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Zone {
    pub points: Vec<C64>,
    pub targets: Vec<C64>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub center: C64,
    pub sigma: f64,
    pub gauss: Option<f64>,
    pub degree: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub rows: usize,
    pub columns: usize,
    pub residual_max: f64,
    pub residual_rms: f64,
    /// `min |R_ii| / max |R_ii|` after column equilibration.
    pub diagonal_ratio: f64,
}

/// Joint least-squares fit of the window coefficients.
///
/// `nodes[i]` are the Leja candidates for window `i`, in `z` coordinates.
pub fn fit(zones: &[Zone], specs: &[WindowSpec], nodes: &[Vec<C64>]) -> Result<(Surrogate, FitReport)> {
    if specs.len() != nodes.len() {
        return Err(invalid("one node set per window"));
    }
    let mut windows = Vec::with_capacity(specs.len());
    for (spec, cand) in specs.iter().zip(nodes) {
        if !(spec.sigma > 0.0) {
            return Err(invalid("window scale must be positive"));
        }
        let local: Vec<C64> = cand.iter().map(|z| (z - spec.center) / spec.sigma).collect();
        let basis = NewtonBasis::new(&local, spec.degree)?;
        windows.push(Window { center: spec.center, sigma: spec.sigma, gauss: spec.gauss, coeffs: vec![C64::new(0.0, 0.0); basis.len()], basis });
    }
    let rows: usize = zones.iter().map(|z| z.points.len()).sum();
    let cols: usize = windows.iter().map(|w| w.basis.len()).sum();
    if rows < cols {
        return Err(invalid("fewer samples than unknowns"));
    }
    let mut a = DMatrix::<C64>::zeros(rows, cols);
    let mut b = DVector::<C64>::zeros(rows);
    let mut r = 0;
    for zone in zones {
        if zone.points.len() != zone.targets.len() {
            return Err(invalid("zone points and targets differ in length"));
        }
        for (&z, &t) in zone.points.iter().zip(&zone.targets) {
            if !t.re.is_finite() || !t.im.is_finite() {
                return Err(Error::NonFinite("zone target".into()));
            }
            let mut c = 0;
            for w in &windows {
                let (vals, lg) = w.columns(z);
                let f = C64::from_polar(lg.re.exp(), lg.im) * zone.weight;
                for v in vals {
                    let e = v * f;
                    a[(r, c)] = if e.re.is_finite() && e.im.is_finite() { e } else { return Err(Error::NonFinite("basis column; reduce the Gaussian width or degree".into())) };
                    c += 1;
                }
            }
            b[r] = t * zone.weight;
            r += 1;
        }
    }
    let mut scales = vec![1.0; cols];
    for (j, s) in scales.iter_mut().enumerate() {
        let n = a.column(j).norm();
        if n > 0.0 {
            *s = 1.0 / n;
            a.column_mut(j).scale_mut(*s);
        }
    }
    let qr = a.clone().qr();
    let rm = qr.r();
    let mut dmax: f64 = 0.0;
    let mut dmin = f64::INFINITY;
    for i in 0..cols {
        let d = rm[(i, i)].norm();
        dmax = dmax.max(d);
        dmin = dmin.min(d);
    }
    let diagonal_ratio = if dmax > 0.0 { dmin / dmax } else { 0.0 };
    if !(diagonal_ratio > 1e-15) {
        return Err(Error::IllConditioned(1.0 / diagonal_ratio));
    }
    let qtb = qr.q().adjoint() * &b;
    let x = rm.solve_upper_triangular(&qtb).ok_or(Error::IllConditioned(1.0 / diagonal_ratio))?;
    let res = &a * &x - &b;
    let mut residual_max: f64 = 0.0;
    let mut sq = 0.0;
    let mut r = 0;
    for zone in zones {
        for _ in &zone.points {
            let e = res[r].norm() / zone.weight;
            residual_max = residual_max.max(e);
            sq += e * e;
            r += 1;
        }
    }
    let mut c = 0;
    for w in windows.iter_mut() {
        for k in 0..w.coeffs.len() {
            w.coeffs[k] = x[c] * scales[c];
            c += 1;
        }
    }
    let report = FitReport { rows, columns: cols, residual_max, residual_rms: (sq / rows as f64).sqrt(), diagonal_ratio };
    Ok((Surrogate { windows }, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c64;
    use crate::geometry::circle_points;

    #[test]
    fn leja_on_circle_spreads() {
        let pts = circle_points(c64(0.0, 0.0), 1.0, 64, 0.0);
        let l = leja_points(&pts, 4);
        assert!((l[0] + l[1]).norm() < 1e-12);
        let b = NewtonBasis::new(&pts, 32).unwrap();
        assert!((b.cap - 1.0).abs() < 0.2);
    }

    #[test]
    fn polynomial_fit_reproduces_polynomial() {
        let pts = circle_points(c64(0.0, 0.0), 1.0, 128, 0.0);
        let targets: Vec<C64> = pts.iter().map(|z| z * z * z - 2.0 * z + 1.0).collect();
        let zone = Zone { points: pts.clone(), targets, weight: 1.0 };
        let spec = WindowSpec { center: c64(0.0, 0.0), sigma: 1.0, gauss: None, degree: 10 };
        let (s, rep) = fit(&[zone], &[spec], &[pts]).unwrap();
        assert!(rep.residual_max < 1e-12);
        let z = c64(2.0, -1.0);
        assert!((s.eval(z) - (z * z * z - 2.0 * z + 1.0)).norm() < 1e-10);
        assert!((s.derivative(z) - (3.0 * z * z - 2.0)).norm() < 1e-9);
    }

    #[test]
    fn windows_separate_clusters() {
        let mut zones = Vec::new();
        let mut specs = Vec::new();
        let mut nodes = Vec::new();
        for (c, t) in [(c64(-20.0, 0.0), c64(-20.0, 0.0)), (c64(20.0, 0.0), c64(5.0, 0.0))] {
            let pts = circle_points(c, 2.0, 96, 0.0);
            let targets = pts.iter().map(|z| if c.re > 0.0 { z + t } else { t }).collect();
            zones.push(Zone { points: pts.clone(), targets, weight: 1.0 });
            specs.push(WindowSpec { center: c, sigma: 2.0, gauss: Some(2.0), degree: 30 });
            nodes.push(pts);
        }
        let (s, rep) = fit(&zones, &specs, &nodes).unwrap();
        assert!(rep.residual_max < 1e-8, "{rep:?}");
        assert!((s.eval(c64(-20.5, 0.3)) + 20.0).norm() < 1e-8);
        assert!((s.eval(c64(21.0, 0.0)) - 26.0).norm() < 1e-8);
        // Far along the axis the windows are negligible; far out they stay finite in log form.
        assert!(s.eval(c64(80.0, 0.0)).norm() < 1e-100);
        assert!(s.eval_log(c64(0.0, 400.0)).ln_abs().is_finite());
        let (v, d) = s.windows[1].eval_with_derivative(c64(20.5, 0.1));
        assert!((v.to_c64() + s.windows[0].eval(c64(20.5, 0.1)) - c64(25.5, 0.1)).norm() < 1e-8);
        assert!((d.to_c64() - 1.0).norm() < 1e-6);
    }
}
