//! The domain `U`, its Riemann map and the inflated copies `U_k`, `V_k`.

use crate::conformal::{solve_riemann, ConformalMap};
use crate::error::{invalid, Error, Result};
use crate::geometry::{diameter, BoundaryCurve, Polygon, Shape};
use crate::{c64, C64};
use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::TAU;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainModel {
    /// Boundary of `U` after rescaling.
    pub curve: BoundaryCurve,
    /// `φ_U`, normalized at the origin, already including the rescaling.
    pub riemann: ConformalMap,
    /// Radius on which `φ_U` is checked to be conformal.
    pub extension_radius: f64,
    /// Bi-Lipschitz constant, at least 2.
    pub c_u: f64,
    /// Measured `sup max(|φ_U′|, 1/|φ_U′|)` on the closure of `U_0`.
    pub measured_distortion: f64,
    /// `diam(U_0) + 1`.
    pub a_u: f64,
    /// Radius of the preimage of `U_0`.
    pub u0_radius: f64,
    /// Factor applied to the input curve.
    pub rescale: f64,
}

impl DomainModel {
    /// Fit the model for `curve` scaled by `rescale`; `u0_radius = 1 + ρ_0`.
    pub fn new(curve: &BoundaryCurve, rescale: f64, u0_radius: f64, extension_radius: f64, tol: f64) -> Result<Self> {
        if !(rescale > 0.0) {
            return Err(invalid("rescale factor must be positive"));
        }
        if !(extension_radius >= u0_radius && u0_radius > 1.0) {
            return Err(invalid("need extension_radius >= u0_radius > 1"));
        }
        let scaled = BoundaryCurve::new(curve.coefficients().iter().map(|c| c * rescale).collect())?;
        let riemann = if is_centered_circle(&scaled) {
            ConformalMap::from_coefficients(alloc::vec![c64(0.0, 0.0), c64(scaled.coefficient(1).norm(), 0.0)])
        } else {
            solve_riemann(&scaled, tol, 500)?
        };
        Self::from_map(scaled, riemann, rescale, u0_radius, extension_radius)
    }

    pub fn unit_disk(u0_radius: f64, extension_radius: f64) -> Result<Self> {
        Self::new(&BoundaryCurve::circle(c64(0.0, 0.0), 1.0), 1.0, u0_radius, extension_radius, 1e-12)
    }

    fn from_map(curve: BoundaryCurve, riemann: ConformalMap, rescale: f64, u0_radius: f64, extension_radius: f64) -> Result<Self> {
        if !riemann.univalent_on(extension_radius, 2048) {
            return Err(Error::Hypothesis(format!(
                "Riemann map fails the univalence witness on radius {extension_radius}"
            )));
        }
        let mut distortion = 1.0f64;
        for ring in 0..=16 {
            let r = u0_radius * ring as f64 / 16.0;
            for j in 0..256 {
                let d = riemann.derivative(C64::from_polar(r, TAU * j as f64 / 256.0)).norm();
                distortion = distortion.max(d).max(1.0 / d);
            }
        }
        let mut model = Self {
            curve,
            riemann,
            extension_radius,
            c_u: distortion.max(2.0),
            measured_distortion: distortion,
            a_u: 0.0,
            u0_radius,
            rescale,
        };
        let u0 = model.inflated(u0_radius, InflatedKind::Outer);
        model.a_u = diameter(&u0, 1024)? + 1.0;
        Ok(model)
    }

    #[inline]
    pub fn phi(&self, z: C64) -> C64 {
        self.riemann.eval(z)
    }

    #[inline]
    pub fn phi_derivative(&self, z: C64) -> C64 {
        self.riemann.derivative(z)
    }

    /// `φ_U⁻¹(w)`.
    pub fn phi_inverse(&self, w: C64) -> Result<C64> {
        self.riemann.invert(w, 1e-13)
    }

    /// `φ_U(D_radius)`.
    pub fn inflated(&self, radius: f64, kind: InflatedKind) -> InflatedDomain {
        let pts: Vec<C64> = (0..512).map(|j| self.phi(C64::from_polar(radius, TAU * j as f64 / 512.0))).collect();
        InflatedDomain { map: self.riemann.clone(), radius, kind, polygon: Polygon::new(pts) }
    }
}

fn is_centered_circle(c: &BoundaryCurve) -> bool {
    c.coefficients()
        .iter()
        .enumerate()
        .all(|(k, v)| k as i64 - c.degree() as i64 == 1 || *v == c64(0.0, 0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InflatedKind {
    /// `U_k = φ_U(D_{1+ρ_k})`.
    Outer,
    /// `V_k = φ_U(D_{r_{k-1}})`.
    Inner,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InflatedDomain {
    map: ConformalMap,
    pub radius: f64,
    pub kind: InflatedKind,
    polygon: Polygon,
}

impl InflatedDomain {
    pub fn polygon(&self) -> &Polygon {
        &self.polygon
    }

    /// Sample-based inclusion of `other` in `self`.
    pub fn contains_domain(&self, other: &InflatedDomain) -> bool {
        other.polygon.vertices().iter().all(|&z| self.polygon.contains(z))
    }
}

impl Shape for InflatedDomain {
    fn boundary_point(&self, t: f64) -> C64 {
        self.map.eval(C64::from_polar(self.radius, t))
    }
    fn contains(&self, z: C64) -> bool {
        self.polygon.contains(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_model() {
        let m = DomainModel::unit_disk(1.8, 2.0).unwrap();
        assert_eq!(m.c_u, 2.0);
        assert!((m.a_u - 4.6).abs() < 1e-9);
        let u1 = m.inflated(1.6, InflatedKind::Outer);
        let v2 = m.inflated(1.5, InflatedKind::Inner);
        let u2 = m.inflated(1.4, InflatedKind::Outer);
        assert!(u1.contains_domain(&v2) && v2.contains_domain(&u2));
        assert!(!u2.contains_domain(&u1));
    }
}
