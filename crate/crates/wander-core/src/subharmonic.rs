//! Piecewise subharmonic weights: radial building blocks, max-gluing across
//! an interface, the explicit puncture construction and a discrete
//! sub-mean-value test.

use crate::conformal::{ConformalMap, ExteriorMap};
use crate::error::{invalid, Error, Result};
use crate::geometry::{circle_points, Disk};
use crate::{c64, C64};
use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::TAU;
use num_traits::Float;
use serde::{Deserialize, Serialize};

/// Region predicate used by glued weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    All,
    /// `|z - center| < radius`.
    Disk { center: C64, radius: f64 },
    /// `|z - center| > radius`.
    Exterior { center: C64, radius: f64 },
    /// `φ(D_radius)` for a conformal `φ`; membership by inversion.
    MapDisk { map: ConformalMap, radius: f64, reach: f64 },
    /// Complement of the closure of `φ(D_radius)`.
    MapExterior { map: ConformalMap, radius: f64, reach: f64 },
}

impl Region {
    pub fn map_disk(map: &ConformalMap, radius: f64) -> Self {
        Region::MapDisk { map: map.clone(), radius, reach: reach(map, radius) }
    }

    pub fn map_exterior(map: &ConformalMap, radius: f64) -> Self {
        Region::MapExterior { map: map.clone(), radius, reach: reach(map, radius) }
    }

    /// Membership in the closure.
    pub fn contains_closed(&self, z: C64) -> bool {
        match self {
            Region::All => true,
            Region::Disk { center, radius } => (z - center).norm() <= *radius,
            Region::Exterior { center, radius } => (z - center).norm() >= *radius,
            Region::MapDisk { map, radius, reach } => preimage_modulus(map, z, *reach).is_some_and(|r| r <= *radius),
            Region::MapExterior { map, radius, reach } => preimage_modulus(map, z, *reach).is_none_or(|r| r >= *radius),
        }
    }

    /// Points on the region's boundary, for interface checks.
    pub fn boundary(&self, n: usize) -> Vec<C64> {
        match self {
            Region::All => Vec::new(),
            Region::Disk { center, radius } | Region::Exterior { center, radius } => circle_points(*center, *radius, n, 0.0),
            Region::MapDisk { map, radius, .. } | Region::MapExterior { map, radius, .. } => {
                circle_points(c64(0.0, 0.0), *radius, n, 0.0).into_iter().map(|w| map.eval(w)).collect()
            }
        }
    }
}

fn reach(map: &ConformalMap, radius: f64) -> f64 {
    circle_points(c64(0.0, 0.0), radius, 512, 0.0)
        .into_iter()
        .map(|w| map.eval(w).norm())
        .fold(0.0, f64::max)
}

fn preimage_modulus(map: &ConformalMap, z: C64, reach: f64) -> Option<f64> {
    if z.norm() > 1.05 * reach {
        return None;
    }
    map.invert(z, 1e-12).ok().map(|w| w.norm())
}

/// Modification made inside one disk by [`puncture`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PunctureRecord {
    pub disk: Disk,
    /// Lower bound for the Laplacian of the base weight on the disk.
    pub m: f64,
    /// Log coefficient `m r² / 4`.
    pub a: f64,
}

/// A weight given by closed-form pieces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Weight {
    Constant { value: f64 },
    /// `|z - c|²`.
    Quadratic { center: C64 },
    /// `e^{|z - c|/η}`.
    ExpRadial { center: C64, eta: f64 },
    /// `|z - c|^α`.
    Power { center: C64, alpha: f64 },
    /// `τ (|z| - A)^α` for `|z| ≥ R*`, continued harmonically by its
    /// `C¹` log-linear extension below `R* = max(A + 1, A/α)`.
    ShiftedPower { tau: f64, alpha: f64, shift: f64 },
    /// `C log(|z - c| / R₀)`.
    LogTail { center: C64, coef: f64, r0: f64 },
    /// `C log(|φ⁻¹(z)| / r)` for the interior map `φ`.
    LogPreimage { map: ConformalMap, coef: f64, r: f64 },
    /// `C log|ψ(z)|` for the exterior map `ψ`.
    LogExterior { map: ExteriorMap, coef: f64 },
    /// `factor · inner`.
    Scaled { factor: f64, inner: Box<Weight> },
    /// `u` on `U \ V`, `max(u, v)` on `U ∩ V`, `v` on `V \ U`.
    Glued { u: Box<Weight>, u_region: Region, v: Box<Weight>, v_region: Region },
    Punctured { base: Box<Weight>, punctures: Vec<PunctureRecord> },
}

impl Weight {
    pub fn value(&self, z: C64) -> f64 {
        match self {
            Weight::Constant { value } => *value,
            Weight::Quadratic { center } => (z - center).norm_sqr(),
            Weight::ExpRadial { center, eta } => ((z - center).norm() / eta).exp(),
            Weight::Power { center, alpha } => (z - center).norm().powf(*alpha),
            Weight::ShiftedPower { tau, alpha, shift } => shifted_power(*tau, *alpha, *shift, z.norm()).0,
            Weight::LogTail { center, coef, r0 } => coef * ((z - center).norm() / r0).ln(),
            Weight::LogPreimage { map, coef, r } => match map.invert(z, 1e-13) {
                Ok(w) => coef * (w.norm() / r).ln(),
                Err(_) => f64::NAN,
            },
            Weight::LogExterior { map, coef } => match map.eval(z) {
                Ok(w) => coef * w.norm().ln(),
                Err(_) => f64::NAN,
            },
            Weight::Scaled { factor, inner } => factor * inner.value(z),
            Weight::Glued { u, u_region, v, v_region } => {
                let (iu, iv) = (u_region.contains_closed(z), v_region.contains_closed(z));
                match (iu, iv) {
                    (true, true) => u.value(z).max(v.value(z)),
                    (true, false) => u.value(z),
                    (false, true) => v.value(z),
                    (false, false) => f64::NAN,
                }
            }
            Weight::Punctured { base, punctures } => {
                let mut val = base.value(z);
                for p in punctures {
                    let d = (z - p.disk.center).norm();
                    let r = p.disk.radius;
                    if d < r {
                        val += -0.25 * p.m * (d * d - r * r) + p.a * (d / r).ln();
                    }
                }
                val
            }
        }
    }

    /// Closed-form Laplacian at a point inside a smooth piece.
    pub fn laplacian(&self, z: C64) -> Option<f64> {
        match self {
            Weight::Constant { .. } => Some(0.0),
            Weight::Quadratic { .. } => Some(4.0),
            Weight::ExpRadial { center, eta } => Some(exp_radial_laplacian(*eta, (z - center).norm())),
            Weight::Power { center, alpha } => {
                let r = (z - center).norm();
                (r > 0.0).then(|| alpha * alpha * r.powf(alpha - 2.0))
            }
            Weight::ShiftedPower { tau, alpha, shift } => Some(shifted_power(*tau, *alpha, *shift, z.norm()).1),
            Weight::LogTail { center, .. } => ((z - center).norm() > 0.0).then_some(0.0),
            Weight::LogPreimage { .. } | Weight::LogExterior { .. } => Some(0.0),
            Weight::Scaled { factor, inner } => inner.laplacian(z).map(|l| factor * l),
            Weight::Glued { u, u_region, v, v_region } => match (u_region.contains_closed(z), v_region.contains_closed(z)) {
                (true, false) => u.laplacian(z),
                (false, true) => v.laplacian(z),
                (true, true) => {
                    let (a, b) = (u.value(z), v.value(z));
                    if a > b {
                        u.laplacian(z)
                    } else if b > a {
                        v.laplacian(z)
                    } else {
                        None
                    }
                }
                _ => None,
            },
            Weight::Punctured { base, punctures } => {
                let mut l = base.laplacian(z)?;
                for p in punctures {
                    let d = (z - p.disk.center).norm();
                    if d < p.disk.radius {
                        if d == 0.0 {
                            return None;
                        }
                        l -= p.m;
                    }
                }
                Some(l)
            }
        }
    }

    /// Value floored for grid export; certification never uses this.
    pub fn value_clamped(&self, z: C64, floor: f64) -> f64 {
        let v = self.value(z);
        if v.is_nan() {
            v
        } else {
            v.max(floor)
        }
    }
}

/// Value and Laplacian of the shifted power with its harmonic continuation.
fn shifted_power(tau: f64, alpha: f64, shift: f64, r: f64) -> (f64, f64) {
    let r_star = (shift + 1.0).max(shift / alpha);
    if r >= r_star {
        let x = r - shift;
        let val = tau * x.powf(alpha);
        let lap = tau * alpha * x.powf(alpha - 2.0) * (alpha - shift / r);
        (val, lap)
    } else {
        let x = r_star - shift;
        let p = tau * x.powf(alpha);
        let dp = tau * alpha * x.powf(alpha - 1.0);
        (p + dp * r_star * (r / r_star).ln(), 0.0)
    }
}

fn exp_radial_laplacian(eta: f64, r: f64) -> f64 {
    if r == 0.0 {
        return f64::INFINITY;
    }
    (r / eta).exp() * (1.0 / (eta * eta) + 1.0 / (eta * r))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RadialKind {
    ExpRadial { eta: f64 },
    Power { alpha: f64 },
    ShiftedPower { tau: f64, alpha: f64, shift: f64 },
    LogTail { coef: f64, r0: f64 },
}

/// Radial weight about the origin with parameter validation.
pub fn radial_weight(kind: RadialKind) -> Result<Weight> {
    let o = c64(0.0, 0.0);
    match kind {
        RadialKind::ExpRadial { eta } => {
            if !(eta > 0.0) {
                return Err(invalid("eta must be positive"));
            }
            Ok(Weight::ExpRadial { center: o, eta })
        }
        RadialKind::Power { alpha } => {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(invalid("alpha must lie in (0, 1)"));
            }
            Ok(Weight::Power { center: o, alpha })
        }
        RadialKind::ShiftedPower { tau, alpha, shift } => {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(invalid("alpha must lie in (0, 1)"));
            }
            if !(tau > 0.0 && shift >= 0.0) {
                return Err(invalid("shifted power needs tau > 0 and shift >= 0"));
            }
            Ok(Weight::ShiftedPower { tau, alpha, shift })
        }
        RadialKind::LogTail { coef, r0 } => {
            if !(r0 > 0.0) {
                return Err(invalid("log tail needs R0 > 0"));
            }
            Ok(Weight::LogTail { center: o, coef, r0 })
        }
    }
}

/// Glue `u` (valid on the closure of `u_region`) with `v` (valid on the
/// closure of `v_region`). On `∂U ∩ V` the new piece must dominate and on
/// `∂V ∩ U` the old one must, checked on `n` samples per interface.
pub fn glue_max(u: Weight, u_region: Region, v: Weight, v_region: Region, n: usize) -> Result<Weight> {
    let mut worst: Option<(C64, f64)> = None;
    let mut note = |z: C64, excess: f64| {
        if excess > 0.0 && worst.is_none_or(|(_, e)| excess > e) {
            worst = Some((z, excess));
        }
    };
    for z in u_region.boundary(n) {
        if v_region.contains_closed(z) {
            let (a, b) = (u.value(z), v.value(z));
            note(z, a - b - 1e-9 * a.abs().max(b.abs()).max(1.0));
        }
    }
    for z in v_region.boundary(n) {
        if u_region.contains_closed(z) {
            let (a, b) = (u.value(z), v.value(z));
            note(z, b - a - 1e-9 * a.abs().max(b.abs()).max(1.0));
        }
    }
    if let Some((z, excess)) = worst {
        return Err(Error::Interface { re: z.re, im: z.im, excess });
    }
    Ok(Weight::Glued { u: Box::new(u), u_region, v: Box::new(v), v_region })
}

/// Inf of the Laplacian over `disk`, which must sit inside one smooth piece.
pub fn laplacian_lower_bound(w: &Weight, disk: &Disk) -> Result<f64> {
    let (c, r) = (disk.center, disk.radius);
    let radial_range = |center: C64| {
        let d = (c - center).norm();
        ((d - r).max(0.0), d + r)
    };
    match w {
        Weight::Constant { .. } => Ok(0.0),
        Weight::Quadratic { .. } => Ok(4.0),
        Weight::ExpRadial { center, eta } => {
            let (lo, hi) = radial_range(*center);
            // Unimodal in the radius with its minimum at η(√5 - 1)/2.
            let crit = eta * (5f64.sqrt() - 1.0) / 2.0;
            let mut m = exp_radial_laplacian(*eta, lo).min(exp_radial_laplacian(*eta, hi));
            if crit > lo && crit < hi {
                m = m.min(exp_radial_laplacian(*eta, crit));
            }
            Ok(m)
        }
        Weight::Power { center, alpha } => {
            let (_, hi) = radial_range(*center);
            Ok(alpha * alpha * hi.powf(alpha - 2.0))
        }
        Weight::ShiftedPower { tau, alpha, shift } => {
            let (lo, hi) = radial_range(c64(0.0, 0.0));
            let r_star = (shift + 1.0).max(shift / alpha);
            if lo < r_star && hi > r_star {
                return Err(invalid("disk straddles the harmonic continuation radius"));
            }
            let mut m = f64::INFINITY;
            for k in 0..=256 {
                let rr = lo + (hi - lo) * k as f64 / 256.0;
                m = m.min(shifted_power(*tau, *alpha, *shift, rr.max(1e-300)).1);
            }
            Ok(m)
        }
        Weight::LogTail { center, .. } => {
            if (c - center).norm() < r {
                return Err(invalid("disk contains the log singularity"));
            }
            Ok(0.0)
        }
        Weight::LogPreimage { .. } | Weight::LogExterior { .. } => Ok(0.0),
        Weight::Scaled { factor, inner } => {
            if *factor < 0.0 {
                return Err(invalid("negative scaling has no lower bound from the inner piece"));
            }
            Ok(factor * laplacian_lower_bound(inner, disk)?)
        }
        Weight::Glued { u, u_region, v, v_region } => {
            let pts = circle_points(c, r, 64, 0.0);
            let all_u = pts.iter().all(|&z| u_region.contains_closed(z) && !v_region.contains_closed(z))
                && u_region.contains_closed(c)
                && !v_region.contains_closed(c);
            let all_v = pts.iter().all(|&z| v_region.contains_closed(z) && !u_region.contains_closed(z))
                && v_region.contains_closed(c)
                && !u_region.contains_closed(c);
            if all_u {
                laplacian_lower_bound(u, disk)
            } else if all_v {
                laplacian_lower_bound(v, disk)
            } else {
                Err(invalid("disk straddles a glued interface"))
            }
        }
        Weight::Punctured { base, punctures } => {
            let mut m = laplacian_lower_bound(base, disk)?;
            for p in punctures {
                let d = (c - p.disk.center).norm();
                if d + r <= p.disk.radius {
                    m -= p.m;
                } else if d < r + p.disk.radius {
                    return Err(invalid("disk straddles a puncture boundary"));
                }
            }
            Ok(m)
        }
    }
}

/// Replace `u` inside each disk by `u - (m/4)(|z-z_k|² - r²) + (m r²/4) log(|z-z_k|/r)`.
/// With `m_values = None` the Laplacian lower bounds are computed.
pub fn puncture(u: Weight, disks: &[Disk], m_values: Option<&[f64]>) -> Result<Weight> {
    if disks.is_empty() {
        return Ok(u);
    }
    for i in 0..disks.len() {
        for j in i + 1..disks.len() {
            if (disks[i].center - disks[j].center).norm() < disks[i].radius + disks[j].radius {
                return Err(Error::Overlap(format!("puncture disks {i} and {j} intersect")));
            }
        }
    }
    let mut records = Vec::with_capacity(disks.len());
    for (k, d) in disks.iter().enumerate() {
        let m = match m_values {
            Some(ms) => *ms.get(k).ok_or_else(|| invalid("one Laplacian bound per disk"))?,
            None => laplacian_lower_bound(&u, d)?,
        };
        if !(m > 0.0) {
            return Err(invalid(format!("Laplacian bound on disk {k} must be positive, got {m}")));
        }
        records.push(PunctureRecord { disk: *d, m, a: 0.25 * m * d.radius * d.radius });
    }
    Ok(Weight::Punctured { base: Box::new(u), punctures: records })
}

/// Measured drop at scale `δ` for one puncture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DropReport {
    pub delta: f64,
    /// `max` of the punctured weight on `B(z_k, δ r_k)`.
    pub measured: f64,
    /// `max_{B_k} u - (1/8) r² m log(1/δ)`.
    pub bound: f64,
    pub pass: bool,
}

/// Maximum of a subharmonic weight over a closed disk, read off the boundary.
pub fn disk_max(w: &Weight, disk: &Disk, n: usize) -> f64 {
    circle_points(disk.center, disk.radius, n, 0.0)
        .into_iter()
        .map(|z| w.value(z))
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn puncture_drop(base: &Weight, punctured: &Weight, record: &PunctureRecord, delta: f64, n: usize) -> DropReport {
    let d = record.disk;
    let outer = disk_max(base, &d, n);
    let inner = Disk { center: d.center, radius: delta * d.radius };
    let measured = disk_max(punctured, &inner, n);
    let bound = outer - 0.125 * d.radius * d.radius * record.m * (1.0 / delta).ln();
    DropReport { delta, measured, bound, pass: measured <= bound }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubharmonicReport {
    pub tested: usize,
    pub violations: usize,
    /// Worst `value - circle mean` found, with its location and radius.
    pub worst_excess: f64,
    pub worst_point: Option<C64>,
    pub worst_radius: f64,
}

/// Discrete sub-mean-value test: `w(z) ≤ mean_{|ζ-z|=r} w(ζ) + tol·max(1, |w(z)|)`.
pub fn check_subharmonic(w: &Weight, points: &[C64], radii: &[f64], n_circle: usize, tol: f64) -> SubharmonicReport {
    let mut rep = SubharmonicReport { tested: 0, violations: 0, worst_excess: f64::NEG_INFINITY, worst_point: None, worst_radius: 0.0 };
    for &z in points {
        let center = w.value(z);
        if center == f64::NEG_INFINITY {
            rep.tested += radii.len();
            continue;
        }
        for &r in radii {
            let mean = circle_mean(w, z, r, n_circle);
            let excess = center - mean;
            rep.tested += 1;
            if excess > rep.worst_excess {
                rep.worst_excess = excess;
                rep.worst_point = Some(z);
                rep.worst_radius = r;
            }
            if !(excess <= tol * center.abs().max(1.0)) {
                rep.violations += 1;
            }
        }
    }
    rep
}

pub fn circle_mean(w: &Weight, z: C64, r: f64, n: usize) -> f64 {
    let mut s = 0.0;
    for j in 0..n {
        s += w.value(z + C64::from_polar(r, TAU * (j as f64 + 0.5) / n as f64));
    }
    s / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn radial_examples() {
        let p = radial_weight(RadialKind::Power { alpha: 0.5 }).unwrap();
        assert!((p.value(c64(4.0, 0.0)) - 2.0).abs() < 1e-15);
        assert!((p.laplacian(c64(4.0, 0.0)).unwrap() - 1.0 / 32.0).abs() < 1e-15);
        let e = radial_weight(RadialKind::ExpRadial { eta: 0.25 }).unwrap();
        let e4 = 4f64.exp();
        assert!((e.value(c64(1.0, 0.0)) - e4).abs() < 1e-12);
        assert!((e.laplacian(c64(0.0, 1.0)).unwrap() - 20.0 * e4).abs() < 1e-10);
        let l = radial_weight(RadialKind::LogTail { coef: 3.0, r0: 2.0 }).unwrap();
        assert_eq!(l.value(c64(0.0, 2.0)), 0.0);
        assert!(radial_weight(RadialKind::Power { alpha: 1.5 }).is_err());
        assert!(radial_weight(RadialKind::ExpRadial { eta: 0.0 }).is_err());
    }

    #[test]
    fn lower_bounds() {
        let p = radial_weight(RadialKind::Power { alpha: 0.5 }).unwrap();
        let d = Disk::new(c64(8.0, 0.0), 2.0).unwrap();
        assert!((laplacian_lower_bound(&p, &d).unwrap() - 0.25 * 10f64.powf(-1.5)).abs() < 1e-15);
        let e = radial_weight(RadialKind::ExpRadial { eta: 0.2 }).unwrap();
        let d = Disk::new(c64(1.2, 0.0), 0.04).unwrap();
        assert_eq!(laplacian_lower_bound(&e, &d).unwrap(), exp_radial_laplacian(0.2, 1.16));
        let q = Weight::Quadratic { center: c64(0.0, 0.0) };
        assert_eq!(laplacian_lower_bound(&q, &d).unwrap(), 4.0);
    }

    #[test]
    fn glue_examples() {
        let zero = Weight::Constant { value: 0.0 };
        let log = radial_weight(RadialKind::LogTail { coef: 1.0, r0: 1.0 }).unwrap();
        let g = glue_max(zero, Region::All, log, Region::Exterior { center: c64(0.0, 0.0), radius: 1.0 }, 64).unwrap();
        assert_eq!(g.value(c64(0.5, 0.0)), 0.0);
        assert!((g.value(c64(3.0, 0.0)) - 3f64.ln()).abs() < 1e-15);
        let q = Weight::Quadratic { center: c64(0.0, 0.0) };
        let a = Region::Disk { center: c64(0.0, 0.0), radius: 2.0 };
        let b = Region::Disk { center: c64(1.0, 0.0), radius: 2.0 };
        let g = glue_max(q.clone(), a, q.clone(), b, 64).unwrap();
        assert_eq!(g.value(c64(0.7, 0.3)), q.value(c64(0.7, 0.3)));
    }

    #[test]
    fn puncture_of_quadratic() {
        let q = Weight::Quadratic { center: c64(0.0, 0.0) };
        let d = Disk::new(c64(0.0, 0.0), 1.0).unwrap();
        let v = puncture(q.clone(), &[d], None).unwrap();
        // Inside: 1 + log|z|.
        let z = c64((-2.0f64).exp(), 0.0);
        assert!((v.value(z) + 1.0).abs() < 1e-12);
        let Weight::Punctured { punctures, .. } = &v else { unreachable!() };
        let rep = puncture_drop(&q, &v, &punctures[0], (-2.0f64).exp(), 256);
        assert!(rep.pass && (rep.bound - 0.0).abs() < 1e-12);
        assert_eq!(v.value(c64(1.5, 0.2)), q.value(c64(1.5, 0.2)));
        assert_eq!(puncture(q.clone(), &[], None).unwrap(), q);
        let pts: Vec<C64> = (0..41).flat_map(|i| (0..41).map(move |j| c64(-2.0 + 0.1 * i as f64, -2.0 + 0.1 * j as f64))).collect();
        let rep = check_subharmonic(&v, &pts, &[0.05, 0.2], 512, 1e-8);
        assert_eq!(rep.violations, 0, "{rep:?}");
        let neg = Weight::Scaled { factor: -1.0, inner: Box::new(q) };
        let rep = check_subharmonic(&neg, &pts, &[0.05], 64, 1e-8);
        assert_eq!(rep.violations, rep.tested);
        let bad = vec![d, Disk::new(c64(1.5, 0.0), 1.0).unwrap()];
        assert!(puncture(Weight::Quadratic { center: c64(0.0, 0.0) }, &bad, None).is_err());
    }
}
