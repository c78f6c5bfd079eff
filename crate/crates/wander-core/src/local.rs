//! The local lemma: an entire `g` close to `φ⁻¹ + τ` inside a nearly round
//! domain that sends small disks around prescribed layer points to `-A`.

use crate::cert::Certificate;
use crate::conformal::ConformalMap;
use crate::dbar::{build_cutoff, hormander_integral, CutOff, CutRegion, HormanderReport, Profile};
use crate::error::{invalid, Result};
use crate::geometry::{circle_points, Annulus, ComplexGrid, Disk};
use crate::lsq::{fit, FitReport, Surrogate, WindowSpec, Zone};
use crate::subharmonic::{glue_max, puncture, radial_weight, RadialKind, Region, Weight};
use crate::{c64, C64};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::E;
use num_traits::Float;
use serde::{Deserialize, Serialize};

/// Drop constant of the puncture construction.
pub const PUNCTURE_C: f64 = 0.125;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalLemmaParams {
    pub kappa: f64,
    pub eta: f64,
    /// The attracting target is `-a`.
    pub a: f64,
    pub tau: f64,
    /// Roundness: `∂W ⊂ A(1/(1+ε), 1+ε)`.
    pub eps: f64,
    pub points: Vec<C64>,
    /// Shrink factor for the layer disks; the proof's value underflows.
    pub s: f64,
    /// `δ` values sampled for the layer-disk certificate.
    pub deltas: Vec<f64>,
}

/// `ln s = -25e²/c` for the proof's constant.
pub fn literal_log_s() -> f64 {
    -25.0 * E * E / PUNCTURE_C
}

impl LocalLemmaParams {
    /// Hypotheses of the lemma, one certificate each.
    pub fn hypotheses(&self) -> Vec<Certificate> {
        let (k, e, eps) = (self.kappa, self.eta, self.eps);
        let mut out = vec![
            Certificate::check("H.kappa", "kappa in (0, 1/5)", k > 0.0 && k < 0.2),
            Certificate::check("H.eta", "eta in (0, 1/4]", e > 0.0 && e <= 0.25),
            Certificate::check("H.tau", "tau >= A > 2", self.tau >= self.a && self.a > 2.0),
            Certificate::upper("H.eps", "eps < e^-2", eps, (-2.0f64).exp()),
            Certificate::upper("H.roundness", "3 eps log(1/eps) < kappa eta", 3.0 * eps * (1.0 / eps).ln(), k * e),
        ];
        let off = self.points.iter().map(|p| (p.norm() - 1.0 - e).abs()).fold(0.0, f64::max);
        out.push(Certificate::upper("H.points", "layer points within eps of |z| = 1 + eta", off, eps));
        let mut sep = f64::INFINITY;
        for i in 0..self.points.len() {
            for j in i + 1..self.points.len() {
                sep = sep.min((self.points[i] - self.points[j]).norm());
            }
        }
        out.push(Certificate::lower("H.disjoint", "layer disks B(a_n, eta/5) pairwise disjoint", sep, 0.4 * e));
        out
    }

    fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.eta > 0.0 && self.tau > 0.0 && self.eps > 0.0 && self.s > 0.0) {
            return Err(invalid("local lemma parameters must be positive"));
        }
        if self.deltas.iter().any(|d| !(*d > 0.0 && *d <= 1.0)) {
            return Err(invalid("deltas must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalLemmaGeometry {
    pub a1: Annulus,
    pub a2: Annulus,
    pub a3: Annulus,
    pub a4: Annulus,
}

impl LocalLemmaGeometry {
    pub fn new(kappa: f64, eta: f64) -> Result<Self> {
        let o = c64(0.0, 0.0);
        Ok(Self {
            a1: Annulus::new(o, 1.0 - kappa * eta / 2.0, 1.0 - kappa * eta / 4.0)?,
            a2: Annulus::new(o, 1.0 + kappa * eta / 4.0, 1.0 + kappa * eta / 2.0)?,
            a3: Annulus::new(o, 1.0 + 0.6 * eta, 1.0 + 1.4 * eta)?,
            a4: Annulus::new(o, 1.0 + 2.0 * eta, 1.0 + 3.0 * eta)?,
        })
    }

    pub fn pairwise_disjoint(&self) -> bool {
        let all = [self.a1, self.a2, self.a3, self.a4];
        (0..4).all(|i| (i + 1..4).all(|j| all[i].disjoint_from(&all[j])))
    }
}

/// `E₁ = Dτ/(η^{3/2}√κ)` and `E₂ = exp(-(κ/2) e^{1/η - κ/2})`, kept in logs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    pub d: f64,
    pub ln_e1: f64,
    pub ln_e2: f64,
}

impl ErrorBudget {
    pub fn new(d: f64, tau: f64, eta: f64, kappa: f64) -> Self {
        let ln_e1 = (d * tau).ln() - 1.5 * eta.ln() - 0.5 * kappa.ln();
        let ln_e2 = -(kappa / 2.0) * (1.0 / eta - kappa / 2.0).exp();
        Self { d, ln_e1, ln_e2 }
    }

    pub fn e1(&self) -> f64 {
        self.ln_e1.exp()
    }

    pub fn e2(&self) -> f64 {
        self.ln_e2.exp()
    }
}

/// `φ⁻¹ + τ` on `B(0, 1 - κη/4)` and `-A` elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalModel {
    pub phi: ConformalMap,
    pub tau: f64,
    pub a: f64,
    pub inner_radius: f64,
}

impl LocalModel {
    pub fn eval(&self, z: C64) -> C64 {
        if z.norm() < self.inner_radius {
            match self.phi.invert(z, 1e-14) {
                Ok(w) => w + self.tau,
                Err(_) => c64(f64::NAN, f64::NAN),
            }
        } else {
            c64(-self.a, 0.0)
        }
    }
}

pub fn local_model_map(p: &LocalLemmaParams, phi: &ConformalMap) -> Result<LocalModel> {
    let need = 1.0 - p.kappa * p.eta / 8.0;
    if phi.validated_radius < need && !phi.correspondence().is_empty() {
        return Err(invalid(format!("conformal map validated only to radius {}", phi.validated_radius)));
    }
    Ok(LocalModel { phi: phi.clone(), tau: p.tau, a: p.a, inner_radius: 1.0 - p.kappa * p.eta / 4.0 })
}

/// `e^{|z|/η}` punctured on `B(a_n, η/5)`, glued with the log tail across `𝒜₄`.
pub fn local_weight(p: &LocalLemmaParams) -> Result<Weight> {
    let eta = p.eta;
    let u0 = radial_weight(RadialKind::ExpRadial { eta })?;
    let disks: Vec<Disk> = p.points.iter().map(|&a| Disk::new(a, eta / 5.0)).collect::<Result<_>>()?;
    let u1 = puncture(u0, &disks, None)?;
    let coef = 2.0 * E.powi(3) / eta * (1.0 / eta).exp();
    let tail = radial_weight(RadialKind::LogTail { coef, r0: 1.0 + 2.0 * eta })?;
    let o = c64(0.0, 0.0);
    glue_max(u1, Region::Disk { center: o, radius: 1.0 + 3.0 * eta }, tail, Region::Exterior { center: o, radius: 1.0 + 2.0 * eta }, 1024)
}

/// Cut-off equal to one on `B(0, 1 - κη/2)` and outside `B(0, 1 + κη/2)`.
pub fn local_cutoff(p: &LocalLemmaParams, profile: Profile) -> Result<CutOff> {
    let o = c64(0.0, 0.0);
    let ke = p.kappa * p.eta;
    build_cutoff(
        vec![CutRegion::Disk { center: o, radius: 1.0 - ke / 2.0 }, CutRegion::Exterior { center: o, radius: 1.0 + ke / 2.0 }],
        ke / 4.0,
        profile,
    )
}

/// Fit zones and resolution for the entire approximant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalFitOptions {
    /// Radius of the inner fit circle; defaults to `1 - κη/2`.
    pub inner_radius: Option<f64>,
    /// Radius of the layer fit circles; defaults to `η/5`.
    pub layer_radius: Option<f64>,
    pub degree_min: usize,
    pub degree_max: usize,
    /// Target fit residual.
    pub tol: f64,
    pub layer_samples: usize,
    /// Cells across the transition band for the integral.
    pub band_cells: usize,
    /// Radii for the growth certificate.
    pub growth_radii: Vec<f64>,
}

impl Default for LocalFitOptions {
    fn default() -> Self {
        Self {
            inner_radius: None,
            layer_radius: None,
            degree_min: 40,
            degree_max: 400,
            tol: 1e-10,
            layer_samples: 96,
            band_cells: 8,
            growth_radii: vec![3.0, 5.0, 8.0],
        }
    }
}

/// Output of one run of the local lemma.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalRun {
    pub params: LocalLemmaParams,
    pub geometry: LocalLemmaGeometry,
    pub g: Surrogate,
    pub fit: FitReport,
    pub degree: usize,
    pub integral: HormanderReport,
    /// Measured constants for the layer, error and growth conclusions.
    pub d_layer: f64,
    pub d_error: f64,
    pub d_growth: f64,
    pub d_integral: f64,
    pub certificates: Vec<Certificate>,
}

/// Smallest `D ≥ 1` (up to `e^{60}`) for which `holds(D)`; `holds` must be monotone.
pub fn minimal_constant(holds: impl Fn(f64) -> bool) -> Option<f64> {
    if holds(1.0) {
        return Some(1.0);
    }
    let (mut lo, mut hi) = (0.0f64, 60.0f64);
    if !holds(hi.exp()) {
        return None;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if holds(mid.exp()) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi.exp())
}

/// Sample the fit targets: `φ⁻¹ + τ` on the circle of radius `r_in` and `-A`
/// on circles of radius `r_layer` about the layer points.
pub fn local_fit_zones(
    p: &LocalLemmaParams,
    phi: &ConformalMap,
    r_in: f64,
    r_layer: f64,
    n_in: usize,
    layer_samples: usize,
) -> Result<(Vec<Zone>, Vec<C64>)> {
    let inner = circle_points(c64(0.0, 0.0), r_in, n_in, 0.0);
    let mut targets = Vec::with_capacity(n_in);
    let mut prev = c64(0.0, 0.0);
    for &z in &inner {
        let w = phi.invert_from(z, if prev == c64(0.0, 0.0) { z } else { prev }, 1e-14).or_else(|_| phi.invert(z, 1e-14))?;
        prev = w;
        targets.push(w + p.tau);
    }
    let mut zones = vec![Zone { points: inner.clone(), targets, weight: 1.0 }];
    let mut nodes = inner;
    for &a in &p.points {
        let pts = circle_points(a, r_layer, layer_samples, 0.0);
        nodes.extend_from_slice(&pts);
        zones.push(Zone { targets: vec![c64(-p.a, 0.0); pts.len()], points: pts, weight: 1.0 });
    }
    Ok((zones, nodes))
}

/// Fit `g` on the inner circle (target `φ⁻¹ + τ`) and the layer circles
/// (target `-A`), raising the degree until the residual reaches `tol`.
pub fn fit_local(p: &LocalLemmaParams, phi: &ConformalMap, opts: &LocalFitOptions) -> Result<(Surrogate, FitReport, usize)> {
    let r_in = opts.inner_radius.unwrap_or(1.0 - p.kappa * p.eta / 2.0);
    let r_layer = opts.layer_radius.unwrap_or(p.eta / 5.0);
    let mut best: Option<(Surrogate, FitReport, usize)> = None;
    let mut degree = opts.degree_min.max(4);
    loop {
        let (zones, nodes) = local_fit_zones(p, phi, r_in, r_layer, (4 * degree).max(256), opts.layer_samples)?;
        let sigma = nodes.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let spec = WindowSpec { center: c64(0.0, 0.0), sigma, gauss: None, degree };
        let attempt = fit(&zones, &[spec], &[nodes]);
        match attempt {
            Ok((g, rep)) => {
                let better = best.as_ref().is_none_or(|b| rep.residual_max < b.1.residual_max);
                let done = rep.residual_max <= opts.tol;
                if better {
                    best = Some((g, rep, degree));
                }
                if done {
                    break;
                }
            }
            Err(e) => {
                if best.is_none() {
                    return Err(e);
                }
                break;
            }
        }
        if degree >= opts.degree_max {
            break;
        }
        degree = (degree * 3 / 2).min(opts.degree_max);
    }
    best.ok_or_else(|| invalid("no fit attempted"))
}

/// Run the lemma end to end: weight, cut-off, integral, fit and the
/// certificates for the layer disks, the inner error, its derivative and growth.
pub fn run_local_lemma(p: &LocalLemmaParams, phi: &ConformalMap, opts: &LocalFitOptions) -> Result<LocalRun> {
    p.validate()?;
    let geometry = LocalLemmaGeometry::new(p.kappa, p.eta)?;
    let mut certificates = p.hypotheses();
    certificates.push(Certificate::check("G.disjoint", "annuli A1..A4 pairwise disjoint", geometry.pairwise_disjoint()));
    certificates.push(Certificate::check(
        "G.points",
        "layer points inside A3",
        p.points.iter().all(|&a| geometry.a3.contains(a)),
    ));
    let model = local_model_map(p, phi)?;
    let weight = local_weight(p)?;
    let chi = local_cutoff(p, Profile::Quintic)?;

    // Band integral on a grid resolving the transition annuli.
    let band = p.kappa * p.eta / 4.0;
    let half = 1.0 + p.kappa * p.eta;
    let h = band / opts.band_cells as f64;
    let n = (((2.0 * half) / h).ceil() as usize).next_power_of_two();
    let grid = ComplexGrid::covering(-half, -half, -half + n as f64 * h, -half + n as f64 * h, n, n)?;
    let hm = |z: C64| model.eval(z);
    let integral = hormander_integral(&hm, &chi, &weight, &grid)?;

    let (g, fit_rep, degree) = fit_local(p, phi, opts)?;
    let e = |d: f64| ErrorBudget::new(d, p.tau, p.eta, p.kappa);
    let exp_eta = (1.0 / p.eta).exp();

    // Integral against (sη/100)·E₁·E₂^{1/κ}.
    let ln_i = integral.value.ln();
    let i_holds = |d: f64| {
        let b = e(d);
        ln_i <= (p.s * p.eta / 100.0).ln() + b.ln_e1 + b.ln_e2 / p.kappa
    };
    let d_integral = minimal_constant(i_holds).unwrap_or(f64::INFINITY);
    let bi = e(d_integral.min(60f64.exp()));
    certificates.push(Certificate::upper(
        "L.integral",
        "log I <= log((s eta/100) E1 E2^(1/kappa)) with measured D",
        ln_i,
        (p.s * p.eta / 100.0).ln() + bi.ln_e1 + bi.ln_e2 / p.kappa,
    ));

    // Layer disks: max |g + A| on each sampled circle (maximum principle).
    let mut layer: Vec<(f64, f64)> = Vec::new();
    for &delta in &p.deltas {
        for &a in &p.points {
            let r = delta * p.s * p.eta / 10.0;
            let m = circle_points(a, r, 128, 0.0).into_iter().map(|w| (g.eval(w) + p.a).norm()).fold(0.0, f64::max);
            layer.push((delta, m));
        }
    }
    let l1_bound = |d: f64, delta: f64| {
        let b = e(d);
        b.ln_e1 + b.ln_e2 + (exp_eta / d - 1.0) * delta.ln()
    };
    let l1_holds = |d: f64| layer.iter().all(|&(delta, m)| m == 0.0 || m.ln() <= l1_bound(d, delta));
    let d_layer = minimal_constant(l1_holds).unwrap_or(f64::INFINITY);
    for &delta in &p.deltas {
        let worst = layer.iter().filter(|x| x.0 == delta).map(|x| x.1).fold(0.0, f64::max);
        let bound = l1_bound(d_layer.min(60f64.exp()), delta).exp();
        certificates.push(Certificate::upper(
            format!("L1.delta={delta}"),
            format!("g(B(a_n, delta s eta/10)) inside B(-A, E1 E2 delta^(e^(1/eta)/D - 1)), D = {d_layer:.4}"),
            worst,
            bound,
        ));
    }

    // Inner error and derivative on |z| = 1 - κη.
    let r2 = 1.0 - p.kappa * p.eta;
    let ring = circle_points(c64(0.0, 0.0), r2, 1024, 0.0);
    let d0 = phi.derivative(c64(0.0, 0.0));
    let unit = d0 / d0.norm();
    let mut err: f64 = 0.0;
    let mut derr: f64 = 0.0;
    let mut prev = ring[0];
    for &z in &ring {
        let w = phi.invert_from(z, prev, 1e-14).or_else(|_| phi.invert(z, 1e-14))?;
        prev = w;
        err = err.max((g.eval(z) - (w + p.tau)).norm());
        derr = derr.max((g.derivative(z) - unit).norm());
    }
    let eps_term = 12.0 / (p.kappa * p.eta) * p.eps * (1.0 / p.eps).ln();
    let l2a = |d: f64| e(d).e1() / p.kappa * (e(d).ln_e2 / 40.0).exp();
    let l2b = |d: f64| e(d).e1() / (p.kappa * p.kappa * p.eta) * (e(d).ln_e2 / 40.0).exp() + eps_term;
    let d_error = minimal_constant(|d| err <= l2a(d) && derr <= l2b(d)).unwrap_or(f64::INFINITY);
    let de = d_error.min(60f64.exp());
    certificates.push(Certificate::upper("L2a", format!("|g - (phi^-1 + tau)| on |z| <= 1 - kappa eta, D = {d_error:.4}"), err, l2a(de)));
    certificates.push(Certificate::upper("L2b", format!("|g' - phi'(0)/|phi'(0)|| on |z| <= 1 - kappa eta, D = {d_error:.4}"), derr, l2b(de)));

    // Growth on circles, compared in logs.
    let mut growth: Vec<(f64, f64)> = Vec::new();
    for &r in &opts.growth_radii {
        let lm = circle_points(c64(0.0, 0.0), r, 2048, 0.0).into_iter().map(|z| g.eval_log(z).ln_abs()).fold(f64::NEG_INFINITY, f64::max);
        growth.push((r, lm));
    }
    // ln(τ + R^x) ≥ ln M  ⟸  x ln R ≥ ln(M - τ).
    let g_holds = |d: f64| growth.iter().all(|&(r, lm)| ln_add(p.tau.ln(), d / p.eta * exp_eta * r.ln()) >= lm);
    let d_growth = minimal_constant(g_holds).unwrap_or(f64::INFINITY);
    for &(r, lm) in &growth {
        let bound = ln_add(p.tau.ln(), d_growth.min(60f64.exp()) / p.eta * exp_eta * r.ln());
        certificates.push(Certificate::upper(
            format!("L3.R={r}"),
            format!("log M_g(R) <= log(tau + R^((D/eta) e^(1/eta))), D = {d_growth:.4}"),
            lm,
            bound,
        ));
    }

    Ok(LocalRun {
        params: p.clone(),
        geometry,
        g,
        fit: fit_rep,
        degree,
        integral,
        d_layer,
        d_error,
        d_growth,
        d_integral,
        certificates,
    })
}

/// `ln(e^a + e^b)`.
fn ln_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(points: Vec<C64>) -> LocalLemmaParams {
        LocalLemmaParams { kappa: 1.0 / 6.0, eta: 0.2, a: 3.0, tau: 10.0, eps: 1e-3, points, s: 1.0, deltas: vec![1.0, 0.5] }
    }

    #[test]
    fn model_map_examples() {
        let p = params(vec![]);
        let m = local_model_map(&p, &ConformalMap::identity()).unwrap();
        assert!((m.eval(c64(0.0, 0.0)) - 10.0).norm() < 1e-14);
        assert_eq!(m.eval(c64(0.0, 2.0)), c64(-3.0, 0.0));
        assert_eq!(m.eval(c64(1.2, 0.0)), c64(-3.0, 0.0));
    }

    #[test]
    fn weight_examples() {
        let p = params(vec![]);
        let u = local_weight(&p).unwrap();
        let at = |r: f64| u.value(c64(r, 0.0));
        assert!((at(1.4) - 7f64.exp()).abs() < 1e-9);
        let tail = 2.0 * E.powi(3) / 0.2 * 5f64.exp() * (1.6f64 / 1.4).ln();
        assert!((at(1.6) - tail).abs() < 1e-6 * tail);
        let q = params(vec![c64(1.2, 0.0)]);
        let v = local_weight(&q).unwrap();
        assert!(v.value(c64(1.21, 0.0)) < u.value(c64(1.21, 0.0)));
        assert_eq!(v.value(c64(0.0, 1.2)), u.value(c64(0.0, 1.2)));
    }

    #[test]
    fn geometry_and_budget() {
        let g = LocalLemmaGeometry::new(1.0 / 6.0, 0.2).unwrap();
        assert!(g.pairwise_disjoint());
        let b = ErrorBudget::new(1.0, 10.0, 0.2, 1.0 / 6.0);
        assert!((b.e1() - 10.0 / (0.2f64.powf(1.5) * (1.0f64 / 6.0).sqrt())).abs() < 1e-9);
        assert!(b.e2() > 0.0 && b.e2() < 1.0);
        assert_eq!(minimal_constant(|d| d >= 1.0), Some(1.0));
        assert!((minimal_constant(|d| d >= 7.5).unwrap() - 7.5).abs() < 1e-9);
    }

    #[test]
    fn identity_domain_without_points() {
        let p = params(vec![]);
        let opts = LocalFitOptions { degree_min: 8, degree_max: 8, band_cells: 4, ..Default::default() };
        let run = run_local_lemma(&p, &ConformalMap::identity(), &opts).unwrap();
        assert!((run.g.eval(c64(0.3, 0.2)) - c64(10.3, 0.2)).norm() < 1e-10);
        let l2a = run.certificates.iter().find(|c| c.id == "L2a").unwrap();
        assert!(l2a.pass && l2a.margin > 100.0);
    }
}
