//! The growth schedule `τ_k`, its admissibility conditions and the derived
//! radii `ρ_k`, `r_k`, `γ_k`, all evaluated in log-domain arithmetic.

use crate::domain::DomainModel;
use crate::error::{invalid, Error, Result};
use crate::logscale::{big, exp_fits, exp_greater, pow2, to_f64, Big, LogScaleReal};
use crate::C64;
use alloc::string::String;
use alloc::vec::Vec;
use alloc::{format, vec};
use core::f64::consts::TAU;
use num_traits::Float;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    /// `τ_k = exp(exp(2^{k+k1}))`.
    DoubleExp { k1: i64 },
    /// `τ_k = exp(ι τ_{k-1}^α)` from a given `τ_1`.
    ExpPower { iota: f64, tau1: f64 },
    /// Listed values, each given at some tier.
    Explicit { taus: Vec<TauEntry> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tier", content = "value", rename_all = "snake_case")]
pub enum TauEntry {
    Plain(f64),
    Log(f64),
    LogLog(f64),
}

impl TauEntry {
    fn lift(self) -> LogScaleReal {
        match self {
            TauEntry::Plain(x) => LogScaleReal::plain(big(x)),
            TauEntry::Log(x) => LogScaleReal::from_log(big(x)),
            TauEntry::LogLog(x) => LogScaleReal::from_loglog(big(x)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Schedule {
    pub alpha: f64,
    pub family: Family,
    pub horizon: usize,
    /// `τ_k` for `k = 1..=len`, index `k - 1`.
    taus: Vec<LogScaleReal>,
    /// `log log τ_k`, index `k - 1`.
    loglog: Vec<Big>,
    /// `ρ_k` for `k = 0..`, index `k`.
    rho: Vec<Big>,
    /// Whether `ρ` came from the schedule or was set by hand.
    pub rho_overridden: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub check: String,
    pub k: usize,
    pub pass: bool,
    /// Left and right sides in the comparison's own tier, as `f64`.
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs` in the compared (logarithmic) quantities.
    pub margin: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Verdict {
    fn new(check: &str, k: usize, lhs: f64, rhs: f64, margin: f64, pass: bool) -> Self {
        Self { check: check.into(), k, pass, lhs, rhs, margin, note: None }
    }
    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

pub fn make_schedule(family: Family, alpha: f64, horizon: usize) -> Result<Schedule> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if horizon < 2 {
        return Err(invalid("horizon K must be at least 2"));
    }
    // Two extra terms so that ρ_{K+1} and C2 at the horizon are available.
    let len = horizon + 2;
    let taus: Vec<LogScaleReal> = match &family {
        Family::DoubleExp { k1 } => (1..=len as i64)
            .map(|k| LogScaleReal::from_loglog(pow2((k + k1) as isize)))
            .collect(),
        Family::ExpPower { iota, tau1 } => {
            if !(*iota > 0.0 && *tau1 > 1.0) {
                return Err(invalid("exp-power family needs iota > 0 and tau1 > 1"));
            }
            let mut out = vec![LogScaleReal::plain(big(*tau1))];
            let ln_iota = big(*iota).ln();
            for _ in 1..len {
                // log log τ_k = log ι + α log τ_{k-1}
                let prev_log = out.last().unwrap().log()?;
                out.push(LogScaleReal::from_loglog(ln_iota.clone() + big(alpha) * prev_log));
            }
            out
        }
        Family::Explicit { taus } => {
            if taus.len() < 2 {
                return Err(invalid("explicit schedule needs at least two values"));
            }
            taus.iter().map(|t| t.lift()).collect()
        }
    };
    let loglog: Vec<Big> = taus.iter().map(|t| t.loglog()).collect::<Result<_>>()?;
    let rho: Vec<Big> = loglog.iter().map(|l| big(1.0) / l.clone()).collect();
    Ok(Schedule { alpha, family, horizon, taus, loglog, rho, rho_overridden: false })
}

impl Schedule {
    /// Replace `ρ_0, ρ_1, …` by hand-picked values (relaxed runs).
    pub fn with_rho(mut self, rho: &[f64]) -> Result<Self> {
        if rho.windows(2).any(|w| !(w[1] < w[0])) || rho.iter().any(|r| !(*r > 0.0)) {
            return Err(invalid("rho override must be positive and strictly decreasing"));
        }
        self.rho = rho.iter().map(|&r| big(r)).collect();
        self.rho_overridden = true;
        Ok(self)
    }

    /// Number of listed `τ_k`.
    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    pub fn tau(&self, k: usize) -> &LogScaleReal {
        &self.taus[k - 1]
    }

    /// `τ_k` as `f64`; overflows to infinity for full-scale values.
    pub fn tau_f64(&self, k: usize) -> f64 {
        match self.taus[k - 1].log() {
            Ok(l) => to_f64(&l).exp(),
            Err(_) => f64::INFINITY,
        }
    }

    pub fn loglog_tau(&self, k: usize) -> &Big {
        &self.loglog[k - 1]
    }

    pub fn rho(&self, k: usize) -> Result<&Big> {
        self.rho.get(k).ok_or_else(|| invalid(format!("rho_{k} beyond the schedule")))
    }

    pub fn rho_f64(&self, k: usize) -> f64 {
        self.rho.get(k).map(to_f64).unwrap_or(f64::NAN)
    }

    /// `r_k = 1 + (ρ_{k+1} + ρ_k)/2`.
    pub fn r(&self, k: usize) -> Result<Big> {
        Ok(big(1.0) + (self.rho(k + 1)?.clone() + self.rho(k)?.clone()) / big(2.0))
    }

    pub fn r_f64(&self, k: usize) -> f64 {
        self.r(k).map(|x| to_f64(&x)).unwrap_or(f64::NAN)
    }

    /// `γ_k = (ρ_k - ρ_{k+1}) / (2 + ρ_k + ρ_{k+1})`.
    pub fn gamma(&self, k: usize) -> Result<Big> {
        let (a, b) = (self.rho(k)?.clone(), self.rho(k + 1)?.clone());
        Ok((a.clone() - b.clone()) / (big(2.0) + a + b))
    }

    fn log_tau(&self, k: usize) -> Result<Big> {
        self.taus[k - 1].log()
    }

    fn need(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.taus.len() {
            return Err(invalid(format!("index {k} outside the schedule (1..={})", self.taus.len())));
        }
        Ok(())
    }

    /// `11 log τ_{k+1} ≤ τ_k^{α/7}`, as `log(log 11 + L_{k+1}) ≤ log(α/7) + L_k`
    /// with `L = log log τ`.
    pub fn check_c1(&self, k: usize) -> Result<Verdict> {
        self.need(k + 1)?;
        let lhs = big(11.0).ln() + self.loglog[k].clone();
        let l_k = self.loglog[k - 1].clone();
        let log_rhs = big(self.alpha / 7.0).ln() + l_k.clone();
        let pass = if lhs <= big(0.0) { true } else { lhs.ln() <= log_rhs };
        let rhs_f = if exp_fits(&l_k) { self.alpha / 7.0 * to_f64(&l_k).exp() } else { f64::INFINITY };
        let margin = to_f64(&log_rhs) - to_f64(&lhs).max(f64::MIN_POSITIVE).ln();
        Ok(Verdict::new("C1", k, to_f64(&lhs), rhs_f, margin, pass))
    }

    /// `log log τ_{k+1} / log log τ_{k+2} ≤ 1/2`, compared as `2 L_{k+1} ≤ L_{k+2}`.
    pub fn check_c2(&self, k: usize) -> Result<Verdict> {
        self.need(k + 2)?;
        let a = self.loglog[k].clone();
        let b = self.loglog[k + 1].clone();
        let ratio = a.clone() / b.clone();
        let pass = a.clone() * big(2.0) <= b;
        Ok(Verdict::new("C2", k, to_f64(&ratio), 0.5, 0.5 - to_f64(&ratio), pass))
    }

    /// Exact C2 ratio.
    pub fn c2_ratio(&self, k: usize) -> Result<Big> {
        self.need(k + 2)?;
        Ok(self.loglog[k].clone() / self.loglog[k + 1].clone())
    }

    /// Part (a) at index `j`: the premise `τ_j ≥ e²`, the geometric tail
    /// surrogate `τ_{ℓ+1} ≥ τ_ℓ⁴`, then `2/τ_{j+1} < log²τ_j/τ_j ≤ 1`.
    pub fn check_prop41a(&self, j: usize) -> Result<Verdict> {
        self.need(j + 1)?;
        let l_j = self.loglog[j - 1].clone();
        let l_next = self.loglog[j].clone();
        let ln2 = big(2.0).ln();
        // τ_j ≥ e² ⟺ L_j ≥ log 2.
        let premise = l_j >= ln2;
        // τ_{ℓ+1} ≥ τ_ℓ⁴ ⟺ L_{ℓ+1} ≥ L_ℓ + log 4; checked on the listed tail,
        // and for all ℓ by the closed form for the doubly exponential family.
        let ln4 = big(4.0).ln();
        let tail = (j..self.loglog.len()).all(|l| self.loglog[l].clone() >= self.loglog[l - 1].clone() + ln4.clone());
        // 2/τ_{j+1} < log²τ_j/τ_j ⟺ e^{L_{j+1}} - e^{L_j} > log 2 - 2 L_j.
        let gap_rhs = ln2.clone() - l_j.clone() * big(2.0);
        let middle = if gap_rhs < big(0.0) {
            l_next >= l_j
        } else if exp_fits(&l_next) {
            l_next.exp() - l_j.exp() > gap_rhs
        } else {
            true
        };
        // log²τ_j/τ_j ≤ 1 ⟺ 2 L_j ≤ e^{L_j}.
        let last = exp_greater(&l_j, &(l_j.clone() * big(2.0))) || l_j.clone() * big(2.0) == l_j.exp();
        let pass = premise && tail && middle && last;
        let mut v = Verdict::new("P41a", j, to_f64(&ln2), to_f64(&l_j), to_f64(&(l_j.clone() - ln2)), pass);
        if !pass {
            let mut why = String::new();
            if !premise {
                why.push_str("tau_j < e^2; ");
            }
            if !tail {
                why.push_str("tail not dominated by tau^4 growth; ");
            }
            if !middle {
                why.push_str("2/tau_{j+1} >= log^2 tau_j / tau_j; ");
            }
            if !last {
                why.push_str("log^2 tau_j / tau_j > 1; ");
            }
            v = v.with_note(format!("{why}increase tau_1"));
        }
        Ok(v)
    }

    /// Part (b): `3^k log²τ_k / τ_k < ρ_k`, i.e. `log τ_k > k log 3 + 2 L_k + log L_{k+1}`.
    pub fn check_prop41b(&self, k: usize) -> Result<Verdict> {
        self.need(k + 1)?;
        let l_k = self.loglog[k - 1].clone();
        let x = big(3.0).ln() * big(k as f64) + l_k.clone() * big(2.0) + self.loglog[k].ln();
        let pass = exp_greater(&l_k, &x);
        let margin = if x > big(0.0) { to_f64(&(l_k.clone() - x.ln())) } else { f64::INFINITY };
        let lhs = to_f64(&x);
        let rhs = if exp_fits(&l_k) { to_f64(&l_k).exp() } else { f64::INFINITY };
        let mut v = Verdict::new("P41b", k, lhs, rhs, margin, pass);
        if !pass {
            v = v.with_note("increase tau_1");
        }
        Ok(v)
    }

    /// `ρ_k/5 ≤ γ_k ≤ ρ_k/2`, compared after clearing denominators.
    pub fn gamma_bounds(&self, k: usize) -> Result<(Big, Verdict)> {
        let a = self.rho(k)?.clone();
        let b = self.rho(k + 1)?.clone();
        let gamma = self.gamma(k)?;
        let denom = big(2.0) + a.clone() + b.clone();
        let num = a.clone() - b.clone();
        let lower = num.clone() * big(5.0) >= a.clone() * denom.clone();
        let upper = num * big(2.0) <= a.clone() * denom;
        let rho1_ok = self.rho.get(1).map(|r| *r < big(0.25)).unwrap_or(false);
        let pass = lower && upper;
        let mut v = Verdict::new("gamma", k, to_f64(&a) / 5.0, to_f64(&gamma), to_f64(&gamma) - to_f64(&a) / 5.0, pass);
        if !rho1_ok {
            v = v.with_note("rho_1 >= 1/4: increase tau_1");
        } else if !pass {
            v = v.with_note("C2 fails at this index");
        }
        Ok((gamma, v))
    }

    /// Full per-k table for `k ≤ k_max`.
    pub fn table(&self, k_max: usize) -> Result<Vec<ScheduleRow>> {
        (1..=k_max)
            .map(|k| {
                Ok(ScheduleRow {
                    k,
                    loglog_tau: to_f64(&self.loglog[k - 1]),
                    rho: self.rho_f64(k),
                    gamma: to_f64(&self.gamma(k)?),
                    c1: self.check_c1(k)?,
                    c2: self.check_c2(k)?,
                    p41a: self.check_prop41a(k)?,
                    p41b: self.check_prop41b(k)?,
                    gamma_bounds: self.gamma_bounds(k)?.1,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleRow {
    pub k: usize,
    pub loglog_tau: f64,
    pub rho: f64,
    pub gamma: f64,
    pub c1: Verdict,
    pub c2: Verdict,
    pub p41a: Verdict,
    pub p41b: Verdict,
    pub gamma_bounds: Verdict,
}

impl ScheduleRow {
    pub fn all_pass(&self) -> bool {
        self.c1.pass && self.c2.pass && self.p41a.pass && self.p41b.pass && self.gamma_bounds.pass
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerPoints {
    pub k: usize,
    pub points: Vec<C64>,
    /// Preimages on the circle of radius `1 + ρ_k`.
    pub preimages: Vec<C64>,
    pub count: usize,
    /// Target density `1/k` and the measured covering radius on `∂U_k`.
    pub density: f64,
    pub measured_density: f64,
    /// Target separation `r_k ρ_k` and the measured minimum gap.
    pub separation: f64,
    pub measured_separation: f64,
}

/// Equally spaced preimages on `|z| = 1 + ρ_k`, mapped by `φ_U`.
pub fn layer_points(dm: &DomainModel, rho: f64, r: f64, k: usize, margin: f64) -> Result<LayerPoints> {
    if 1.0 + rho > dm.extension_radius {
        return Err(Error::Hypothesis(format!("phi_U not validated on radius {}", 1.0 + rho)));
    }
    let n = (TAU * (1.0 + rho) / (dm.c_u * r * rho * margin)).floor();
    if !(n >= 1.0) {
        return Err(Error::Degenerate("no layer points fit at this scale".into()));
    }
    let n = n as usize;
    let preimages: Vec<C64> = (0..n).map(|j| C64::from_polar(1.0 + rho, TAU * j as f64 / n as f64)).collect();
    let points: Vec<C64> = preimages.iter().map(|&w| dm.phi(w)).collect();
    let mut sep = f64::INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            sep = sep.min((points[i] - points[j]).norm());
        }
    }
    let mut cover = 0.0f64;
    let dense = 64 * n.max(16);
    for s in 0..dense {
        let b = dm.phi(C64::from_polar(1.0 + rho, TAU * s as f64 / dense as f64));
        let d = points.iter().map(|p| (p - b).norm()).fold(f64::INFINITY, f64::min);
        cover = cover.max(d);
    }
    Ok(LayerPoints {
        k,
        points,
        preimages,
        count: n,
        density: 1.0 / k.max(1) as f64,
        measured_density: cover,
        separation: r * rho,
        measured_separation: if n > 1 { sep } else { f64::INFINITY },
    })
}

/// `e^{L}` as `f64` where it fits.
pub fn log_tau_f64(s: &Schedule, k: usize) -> f64 {
    s.log_tau(k).map(|x| to_f64(&x)).unwrap_or(f64::INFINITY)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doubleexp_is_exact() {
        let s = make_schedule(Family::DoubleExp { k1: 3 }, 0.5, 10).unwrap();
        assert_eq!(*s.loglog_tau(1), big(16.0));
        for k in 0..8 {
            assert_eq!(*s.rho(k).unwrap(), pow2(-((k + 1 + 3) as isize)));
        }
        assert_eq!(s.c2_ratio(1).unwrap(), big(0.5));
    }

    #[test]
    fn c1_examples() {
        let s = make_schedule(Family::DoubleExp { k1: 3 }, 0.5, 10).unwrap();
        let v = s.check_c1(1).unwrap();
        assert!(v.pass);
        assert!((v.lhs - (11f64.ln() + 32.0)).abs() < 1e-12);
        assert!((v.rhs - 16f64.exp() / 14.0).abs() / v.rhs < 1e-12);
        let taus = vec![TauEntry::Plain(10.0), TauEntry::Log(100.0 * 10f64.ln()), TauEntry::LogLog(1e3), TauEntry::LogLog(1e6)];
        let s = make_schedule(Family::Explicit { taus }, 0.5, 2).unwrap();
        let v = s.check_c1(1).unwrap();
        // 11·100·log 10 far exceeds 10^{1/14}.
        assert!(!v.pass);
        assert!((v.lhs - (11f64.ln() + (100.0 * 10f64.ln()).ln())).abs() < 1e-12);
    }

    #[test]
    fn explicit_rho() {
        let taus = [10.0, 1e4, 1e16, 1e64].map(TauEntry::Plain).to_vec();
        let s = make_schedule(Family::Explicit { taus }, 0.5, 2).unwrap();
        assert!((s.rho_f64(1) - 1.0 / (4.0 * 10f64.ln()).ln()).abs() < 1e-15);
        // A stagnant list fails C2.
        let flat = [1e4; 4].map(TauEntry::Plain).to_vec();
        let s = make_schedule(Family::Explicit { taus: flat }, 0.5, 2).unwrap();
        assert!(!s.check_c2(1).unwrap().pass);
    }

    #[test]
    fn gamma_example() {
        let s = make_schedule(Family::DoubleExp { k1: 3 }, 0.5, 10).unwrap();
        // ρ_1 = 2^-5, ρ_2 = 2^-6.
        let (g, v) = s.gamma_bounds(1).unwrap();
        assert!((to_f64(&g) - 0.007633587786259542).abs() < 1e-15);
        assert!(v.pass);
    }
}
