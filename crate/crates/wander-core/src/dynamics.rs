//! Orbits of the staged functions.
//!
//! The limit function is only available through its stages. A point `z` with
//! `|z| ≤ 2τ_k` is covered by stage `k`: later stages move it by at most the
//! consistency tolerances, so `f_k(z)` carries an error bar made of the
//! measured drifts of the built stages and the tolerance tail of the unbuilt
//! ones.

use crate::conformal::ConformalMap;
use crate::construction::ConstructionState;
use crate::error::{invalid, Error, Result};
use crate::geometry::{circle_points, ComplexGrid};
use crate::lsq::Surrogate;
use crate::{c64, C64};
use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::TAU;
use num_traits::Float;
use serde::{Deserialize, Serialize};

/// Radius of the attracting disk about `-τ₁`.
pub const ATTRACT_RADIUS: f64 = 0.75;
/// Radius of the disks about `τ_j` that escaping orbits visit.
pub const ESCAPE_RADIUS: f64 = 3.0;

/// The staged functions with what is needed to bound the distance to the limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    /// `f_1, …, f_K`.
    pub stages: Vec<Surrogate>,
    /// `τ_1, …` as far as the schedule reaches; at least `K + 2` entries.
    pub taus: Vec<f64>,
    /// Measured `sup_{|z| ≤ 2τ_{k-1}} |f_k - f_{k-1}|`, entry `k - 1`; zero for `k = 1`.
    pub drift: Vec<f64>,
    pub alpha: f64,
}

impl Chain {
    pub fn new(stages: Vec<Surrogate>, taus: Vec<f64>, drift: Vec<f64>, alpha: f64) -> Result<Self> {
        if stages.is_empty() {
            return Err(invalid("a chain needs at least one stage"));
        }
        if drift.len() != stages.len() {
            return Err(invalid("one drift entry per stage"));
        }
        if taus.len() < stages.len() + 2 || taus.iter().any(|t| !t.is_finite() || *t <= 0.0) {
            return Err(invalid(format!("need {} finite taus for {} stages", stages.len() + 2, stages.len())));
        }
        Ok(Self { stages, taus, drift, alpha })
    }

    /// Chain of a built construction; drift is read from the `S_a` certificates.
    pub fn from_state(state: &ConstructionState) -> Result<Self> {
        let k_max = state.stages.len();
        let taus: Vec<f64> = (1..=state.schedule.len()).map(|k| state.schedule.tau_f64(k)).take_while(|t| t.is_finite()).collect();
        let drift = state
            .stages
            .iter()
            .map(|st| st.certificates.iter().find(|c| c.id == "S_a").map_or(0.0, |c| c.measured))
            .collect();
        let stages = state.stages.iter().map(|st| st.f.clone()).collect();
        let chain = Self::new(stages, taus, drift, state.schedule.alpha)?;
        debug_assert_eq!(chain.len(), k_max);
        Ok(chain)
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    pub fn tau(&self, k: usize) -> f64 {
        self.taus[k - 1]
    }

    /// `Σ_{j > K} 1/τ_{j+1} ≤ 2/τ_{K+2}` for the stages not built yet.
    pub fn tail(&self) -> f64 {
        2.0 / self.tau(self.len() + 2)
    }

    /// Largest modulus covered by the chain.
    pub fn coverage(&self) -> f64 {
        2.0 * self.tau(self.len())
    }
}

/// `f(z)` approximated by one stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitValue {
    pub value: C64,
    /// Stage used.
    pub stage: usize,
    /// Measured drift of the built stages after `stage`.
    pub chain_error: f64,
    /// Tolerance tail of the stages not built.
    pub tail_error: f64,
}

impl LimitValue {
    pub fn error(&self) -> f64 {
        self.chain_error + self.tail_error
    }
}

/// Evaluate the limit at `z` through stage `k_hint` (default: the last), moving
/// up to the first stage whose disk `|z| ≤ 2τ_k` contains `z`.
pub fn evaluate_limit(chain: &Chain, z: C64, k_hint: Option<usize>) -> Result<LimitValue> {
    let k_max = chain.len();
    if !(z.norm() <= chain.coverage()) {
        return Err(Error::OutsideCoverage(format!("|z| = {} beyond 2 tau_{k_max} = {}", z.norm(), chain.coverage())));
    }
    let mut k = k_hint.unwrap_or(k_max).clamp(1, k_max);
    while z.norm() > 2.0 * chain.tau(k) {
        k += 1;
    }
    let chain_error = chain.drift[k..].iter().sum();
    Ok(LimitValue { value: chain.stages[k - 1].eval(z), stage: k, chain_error, tail_error: chain.tail() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrbitClass {
    /// Iterate `j` lies in `B(τ_j, 3)` for every step the chain covers.
    Escaping,
    /// An iterate enters `B(-τ₁, 3/4)`, which the chain maps into itself.
    Attracted,
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitRecord {
    pub start: C64,
    /// `f(z), f²(z), …` as far as evaluated.
    pub iterates: Vec<C64>,
    /// Error bar of each iterate.
    pub errors: Vec<f64>,
    pub class: OrbitClass,
    /// Step at which the class was decided.
    pub step: Option<usize>,
    /// Number of leading iterates with `f^j(z) ∈ B(τ_j, 3)`.
    pub escape_depth: usize,
    /// Smallest distance by which a deciding inequality held, net of error bars.
    pub margin: f64,
}

/// Certificate that `f` maps the closed disk `B(-τ₁, 3/4)` into itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trap {
    /// Maximum of `|f + τ₁|` on the boundary circle plus its error bar.
    pub image_radius: f64,
    pub holds: bool,
}

/// The image of the closed disk is bounded by the maximum on its boundary.
pub fn attracting_trap(chain: &Chain) -> Trap {
    let c = c64(-chain.tau(1), 0.0);
    let mut m: f64 = 0.0;
    for z in circle_points(c, ATTRACT_RADIUS, 1024, 0.0) {
        match evaluate_limit(chain, z, None) {
            Ok(v) => m = m.max((v.value - c).norm() + v.error()),
            Err(_) => m = f64::INFINITY,
        }
    }
    Trap { image_radius: m, holds: m < ATTRACT_RADIUS }
}

/// Classify the orbit of `z` with each iterate moved by `shift` times its
/// error bar; `shift = 0` gives the nominal orbit.
pub fn classify_orbit_shifted(chain: &Chain, trap: &Trap, z: C64, n_max: usize, shift: C64) -> OrbitRecord {
    let a = c64(-chain.tau(1), 0.0);
    let mut rec = OrbitRecord {
        start: z,
        iterates: Vec::new(),
        errors: Vec::new(),
        class: OrbitClass::Undecided,
        step: None,
        escape_depth: 0,
        margin: f64::INFINITY,
    };
    let mut on_chain = true;
    let mut w = z;
    for n in 1..=n_max {
        let v = match evaluate_limit(chain, w, None) {
            Ok(v) => v,
            Err(_) => break,
        };
        let err = v.error();
        w = v.value + shift * err;
        if !(w.re.is_finite() && w.im.is_finite()) {
            break;
        }
        rec.iterates.push(w);
        rec.errors.push(err);
        if trap.holds {
            let m = ATTRACT_RADIUS - (w - a).norm() - err;
            if m > 0.0 {
                rec.class = OrbitClass::Attracted;
                rec.step = Some(n);
                rec.margin = m;
                return rec;
            }
        }
        if on_chain && n <= chain.taus.len() {
            let m = ESCAPE_RADIUS - (w - chain.tau(n)).norm() - err;
            if m > 0.0 {
                rec.escape_depth = n;
                rec.margin = rec.margin.min(m);
            } else {
                on_chain = false;
            }
        }
    }
    // Escaping needs the orbit to follow the τ-chain until the stages stop covering it.
    let n = rec.iterates.len();
    if on_chain && rec.escape_depth > 0 && rec.escape_depth == n {
        rec.class = OrbitClass::Escaping;
        rec.step = Some(n);
    } else {
        rec.margin = if rec.class == OrbitClass::Undecided { 0.0 } else { rec.margin };
    }
    rec
}

pub fn classify_orbit(chain: &Chain, trap: &Trap, z: C64, n_max: usize) -> OrbitRecord {
    classify_orbit_shifted(chain, trap, z, n_max, c64(0.0, 0.0))
}

/// Whether the class survives moving every iterate by its error bar in the
/// four axis directions.
pub fn classification_stable(chain: &Chain, trap: &Trap, z: C64, n_max: usize) -> bool {
    let base = classify_orbit(chain, trap, z, n_max).class;
    [c64(1.0, 0.0), c64(-1.0, 0.0), c64(0.0, 1.0), c64(0.0, -1.0)]
        .iter()
        .all(|&d| classify_orbit_shifted(chain, trap, z, n_max, d).class == base)
}

/// Per-pixel classes over `window`, row-major in `(j, i)`.
pub fn basin_escape_map(chain: &Chain, window: &ComplexGrid, n_max: usize) -> Vec<OrbitClass> {
    let trap = attracting_trap(chain);
    window.points().into_iter().map(|z| classify_orbit(chain, &trap, z, n_max).class).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthEstimate {
    pub radii: Vec<f64>,
    /// `log M_f(R)`, made nondecreasing by the maximum principle.
    pub ln_max: Vec<f64>,
    /// Least-squares slope of `log log M` against `log R`.
    pub slope: f64,
    /// `log(15 R⁴ τ_K⁶) - (2 log M - R^α)` per radius; positive when the growth bound holds.
    pub growth_margins: Vec<f64>,
}

/// Sampled circle maxima of the last stage and the fitted order.
pub fn growth_order(chain: &Chain, radii: &[f64]) -> Result<GrowthEstimate> {
    if radii.len() < 2 || radii.windows(2).any(|w| !(w[1] > w[0])) || radii[0] <= 1.0 {
        return Err(invalid("need at least two increasing radii above 1"));
    }
    let f = chain.stages.last().expect("chain is non-empty");
    let tau = chain.tau(chain.len());
    let mut ln_max = Vec::with_capacity(radii.len());
    let mut running = f64::NEG_INFINITY;
    for &r in radii {
        let m = circle_points(c64(0.0, 0.0), r, 4096, 0.0)
            .into_iter()
            .map(|z| f.eval_log(z).ln_abs())
            .fold(f64::NEG_INFINITY, f64::max);
        // M_f(R) is nondecreasing, so a smaller radius bounds it from below.
        running = running.max(m);
        ln_max.push(running);
    }
    let xs: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = ln_max.iter().map(|m| m.max(f64::MIN_POSITIVE).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let growth_margins = radii
        .iter()
        .zip(&ln_max)
        .map(|(&r, &m)| (15.0f64).ln() + 4.0 * r.ln() + 6.0 * tau.ln() - (2.0 * m - r.powf(chain.alpha)))
        .collect();
    Ok(GrowthEstimate { radii: radii.to_vec(), ln_max, slope, growth_margins })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnivalenceVerdict {
    /// Winding of the boundary image about the image of each interior sample.
    pub windings: Vec<i64>,
    pub min_derivative: f64,
    pub pass: bool,
}

/// Winding of a closed sampled curve about `p`.
pub fn winding_number(curve: &[C64], p: C64) -> i64 {
    let mut total = 0.0;
    for i in 0..curve.len() {
        let a = curve[i] - p;
        let b = curve[(i + 1) % curve.len()] - p;
        total += (b / a).arg();
    }
    (total / TAU).round() as i64
}

/// Numerical univalence witness for `map` on a region: boundary image winds
/// once about each interior image and the derivative does not vanish.
pub fn univalence_witness(map: impl Fn(C64) -> (C64, C64), boundary: &[C64], interior: &[C64]) -> UnivalenceVerdict {
    let image: Vec<C64> = boundary.iter().map(|&z| map(z).0).collect();
    let mut windings = Vec::with_capacity(interior.len());
    let mut min_derivative = f64::INFINITY;
    for &z in interior {
        let (w, d) = map(z);
        windings.push(winding_number(&image, w));
        min_derivative = min_derivative.min(d.norm());
    }
    for &z in boundary {
        min_derivative = min_derivative.min(map(z).1.norm());
    }
    let pass = windings.iter().all(|&n| n == 1) && min_derivative > 0.0 && min_derivative.is_finite();
    UnivalenceVerdict { windings, min_derivative, pass }
}

/// `(f^n(z), (f^n)′(z))` by the chain rule.
pub fn iterate_with_derivative(f: &Surrogate, z: C64, n: usize) -> (C64, C64) {
    let mut w = z;
    let mut d = c64(1.0, 0.0);
    for _ in 0..n {
        d *= f.derivative(w);
        w = f.eval(w);
    }
    (w, d)
}

/// Witness for `f_k^{k+1}` on the closure of `U = φ_U(𝔻)`.
pub fn stage_univalence(f: &Surrogate, phi: &ConformalMap, k: usize) -> UnivalenceVerdict {
    let boundary: Vec<C64> = circle_points(c64(0.0, 0.0), 1.0, 2048, 0.0).into_iter().map(|w| phi.eval(w)).collect();
    let mut interior = Vec::new();
    for r in [0.0, 0.3, 0.6, 0.9] {
        let n = if r == 0.0 { 1 } else { 16 };
        interior.extend(circle_points(c64(0.0, 0.0), r, n, 0.1).into_iter().map(|w| phi.eval(w)));
    }
    univalence_witness(|z| iterate_with_derivative(f, z, k + 1), &boundary, &interior)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::circle_points;
    use crate::lsq::{fit, WindowSpec, Zone};
    use alloc::vec;

    fn poly(coeffs: &[(f64, f64)]) -> Surrogate {
        let pts = circle_points(c64(0.0, 0.0), 1.0, 32, 0.0);
        let eval = |z: C64| coeffs.iter().rev().fold(c64(0.0, 0.0), |acc, &(a, b)| acc * z + c64(a, b));
        let zone = Zone { targets: pts.iter().map(|&z| eval(z)).collect(), points: pts.clone(), weight: 1.0 };
        let spec = WindowSpec { center: c64(0.0, 0.0), sigma: 1.0, gauss: None, degree: coeffs.len() - 1 };
        fit(&[zone], &[spec], &[pts]).unwrap().0
    }

    fn chain_of(f: Surrogate, stages: usize) -> Chain {
        Chain::new(vec![f; stages], vec![20.0, 200.0, 1000.0, 5000.0], vec![0.0; stages], 0.5).unwrap()
    }

    #[test]
    fn identical_stages_have_no_chain_error() {
        let chain = chain_of(poly(&[(1.0, 0.0), (2.0, 0.0)]), 2);
        let v = evaluate_limit(&chain, c64(0.5, 0.0), Some(1)).unwrap();
        assert_eq!(v.chain_error, 0.0);
        assert!((v.value - 2.0).norm() < 1e-12);
        assert!((v.tail_error - 2.0 / 5000.0).abs() < 1e-15);
    }

    #[test]
    fn coverage_is_enforced() {
        let chain = chain_of(poly(&[(0.0, 0.0), (1.0, 0.0)]), 2);
        assert!(matches!(evaluate_limit(&chain, c64(401.0, 0.0), None), Err(Error::OutsideCoverage(_))));
        assert_eq!(evaluate_limit(&chain, c64(100.0, 0.0), Some(1)).unwrap().stage, 2);
    }

    #[test]
    fn constant_map_attracts_the_trap_centre() {
        let chain = chain_of(poly(&[(-20.0, 0.0)]), 2);
        let trap = attracting_trap(&chain);
        assert!(trap.holds);
        let rec = classify_orbit(&chain, &trap, c64(-20.0, 0.0), 5);
        assert_eq!(rec.class, OrbitClass::Attracted);
        assert_eq!(rec.step, Some(1));
    }

    #[test]
    fn constant_growth_has_zero_slope() {
        let chain = chain_of(poly(&[(5.0, 0.0)]), 1);
        let g = growth_order(&chain, &[10.0, 20.0, 40.0]).unwrap();
        assert!(g.slope.abs() < 1e-9);
    }

    #[test]
    fn witness_accepts_translation_and_rejects_square() {
        let boundary = circle_points(c64(0.0, 0.0), 1.0, 512, 0.0);
        let interior = vec![c64(0.0, 0.0), c64(0.5, 0.2)];
        let t = univalence_witness(|z| (z + 20.0, c64(1.0, 0.0)), &boundary, &interior);
        assert!(t.pass && t.windings.iter().all(|&n| n == 1));
        let s = univalence_witness(|z| (z * z, 2.0 * z), &boundary, &interior);
        assert!(!s.pass);
    }
}
