//! One runner per subcommand. Each returns its certificates and tables in
//! memory; [`SuiteOutput::write`] puts them on disk.
//!
//! Parallel loops map over independent items and collect in input order, so
//! the output does not depend on the thread count.

use crate::config::{
    ConstructParams, DbarParams, DomainSpec, DynamicsParams, LocalParams, RiemannParams, ScheduleParams, WeightParams,
};
use crate::error::{AppError, Result};
use crate::io::{csv_bytes, write_json, CertificateFile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::fs;
use std::path::Path;
use wander_core::cert::{apply_waivers, Certificate};
use wander_core::conformal::{certify_inverse_bound, certify_warschawski, solve_riemann, ConformalMap, RoundnessCertificate};
use wander_core::construction::{construct, toy_schedule, ConstructionState, LayerRecord, SequenceReport};
use wander_core::dbar::{disk_indicator, solve_dbar_cauchy};
use wander_core::domain::DomainModel;
use wander_core::dynamics::{
    attracting_trap, classification_stable, classify_orbit, growth_order, stage_univalence, Chain, OrbitClass,
    UnivalenceVerdict,
};
use wander_core::geometry::{circle_points, BoundaryCurve, ComplexGrid, Disk};
use wander_core::local::{run_local_lemma, LocalFitOptions, LocalLemmaParams};
use wander_core::schedule::{make_schedule, Family};
use wander_core::subharmonic::{check_subharmonic, puncture, puncture_drop, Weight};
use wander_core::{c64, C64};

/// Certificates, CSV tables and JSON side files of one run.
#[derive(Debug, Clone, Default)]
pub struct SuiteOutput {
    pub suite: String,
    pub certificates: Vec<Certificate>,
    pub tables: Vec<(String, Vec<u8>)>,
    pub documents: Vec<(String, serde_json::Value)>,
}

impl SuiteOutput {
    fn new(suite: &str) -> Self {
        Self { suite: suite.into(), ..Self::default() }
    }

    pub fn all_accepted(&self) -> bool {
        self.certificates.iter().all(|c| c.accepted())
    }

    /// Mark failures whose id matches one of `ids` as waived.
    pub fn waive(&mut self, ids: &[String]) {
        let w: Vec<(String, String)> = ids.iter().map(|id| (id.clone(), "waived on request".to_string())).collect();
        apply_waivers(&mut self.certificates, &w);
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        write_json(&dir.join("certificates.json"), &CertificateFile::new(&self.suite, self.certificates.clone()))?;
        for (name, bytes) in &self.tables {
            fs::write(dir.join(name), bytes)?;
        }
        for (name, doc) in &self.documents {
            write_json(&dir.join(name), doc)?;
        }
        Ok(())
    }
}

fn polar_curve(eps: f64, m: u32) -> Result<BoundaryCurve> {
    Ok(BoundaryCurve::polar(|t| 1.0 + eps * (m as f64 * t).cos(), 256)?)
}

#[derive(Debug, Serialize)]
struct BoundRow {
    eps: f64,
    m: u32,
    check: &'static str,
    radius: f64,
    roundness: f64,
    measured: f64,
    bound: f64,
    pass: bool,
}

/// Riemann maps of `1 + ε cos(mθ)` and both distortion bounds.
pub fn riemann(p: &RiemannParams) -> Result<SuiteOutput> {
    let cases: Vec<(f64, u32)> = p.eps.iter().flat_map(|&e| p.modes.iter().map(move |&m| (e, m))).collect();
    let rows: Vec<Vec<BoundRow>> = cases
        .par_iter()
        .map(|&(eps, m)| -> Result<Vec<BoundRow>> {
            let curve = BoundaryCurve::polar(|t| 1.0 + eps * (m as f64 * t).cos(), p.boundary_samples)?;
            let map = solve_riemann(&curve, p.tol, p.max_iter)?;
            let cert = RoundnessCertificate::measure(&curve, 4096)?;
            let mut out = Vec::new();
            for &r in &p.radii {
                let rep = certify_warschawski(&map, &cert, r, p.check_samples)?;
                out.push(BoundRow { eps, m, check: "distortion", radius: r, roundness: rep.eps, measured: rep.measured, bound: rep.bound, pass: rep.pass });
            }
            let rep = certify_inverse_bound(&map, &cert, p.check_samples)?;
            out.push(BoundRow { eps, m, check: "inverse", radius: rep.r, roundness: rep.eps, measured: rep.measured, bound: rep.bound, pass: rep.pass });
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let rows: Vec<BoundRow> = rows.into_iter().flatten().collect();
    let mut out = SuiteOutput::new("riemann");
    for r in &rows {
        let id = format!("riemann.{}.eps={}.m={}.r={}", r.check, r.eps, r.m, r.radius);
        let claim = match r.check {
            "distortion" => "max |h(z) - z| on |z| <= r below r eps e^eps (1 + (2/pi) log((1+r)/(1-r)))",
            _ => "sup |h^-1(z) - z| on |z| < 1 - 3 eps log(1/eps) below 3 eps log(1/eps)",
        };
        out.certificates.push(Certificate::upper(id, claim, r.measured, r.bound));
    }
    out.tables.push(("riemann.csv".into(), csv_bytes(&rows)?));
    Ok(out)
}

/// `n` disjoint disks with centres in `0.75 < |c| - r`, `|c| + r < 3.2`.
pub fn random_disks(seed: u64, n: usize) -> Result<Vec<Disk>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<Disk> = Vec::with_capacity(n);
    let mut tries = 0;
    while out.len() < n {
        tries += 1;
        if tries > 100_000 {
            return Err(AppError::Compute(format!("could not place {n} disjoint disks")));
        }
        let c = c64(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        let r = rng.gen_range(0.15..0.35);
        if c.norm() - r < 0.75 || c.norm() + r > 3.2 {
            continue;
        }
        if out.iter().any(|d| (d.center - c).norm() < d.radius + r + 0.1) {
            continue;
        }
        out.push(Disk::new(c, r)?);
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
struct WeightRow {
    weight: &'static str,
    check: &'static str,
    disk: Option<usize>,
    delta: Option<f64>,
    measured: f64,
    bound: f64,
    pass: bool,
}

/// Punctured weights: sub-mean-value test, drop at scale `δ`, agreement off the disks.
pub fn weight(p: &WeightParams) -> Result<SuiteOutput> {
    let disks = random_disks(p.seed, p.disks)?;
    let o = c64(0.0, 0.0);
    let bases: Vec<(&'static str, Weight)> = vec![
        ("quadratic", Weight::Quadratic { center: o }),
        ("exp_radial", Weight::ExpRadial { center: o, eta: p.eta }),
        ("power", Weight::Power { center: o, alpha: p.alpha }),
    ];
    let h = 2.0 * p.half_width / (p.grid - 1) as f64;
    let grid: Vec<C64> = (0..p.grid)
        .flat_map(|i| (0..p.grid).map(move |j| c64(-p.half_width + h * i as f64, -p.half_width + h * j as f64)))
        .filter(|z| z.norm() >= 0.5)
        .collect();
    let mut points = grid.clone();
    for d in &disks {
        for f in [0.5, 0.99, 1.0, 1.01, 1.5] {
            points.extend(circle_points(d.center, f * d.radius, 16, 0.05));
        }
    }
    let outside: Vec<C64> = grid.iter().copied().filter(|z| disks.iter().all(|d| (z - d.center).norm() > d.radius)).collect();
    let rows: Vec<Vec<WeightRow>> = bases
        .par_iter()
        .map(|(name, base)| -> Result<Vec<WeightRow>> {
            let punctured = puncture(base.clone(), &disks, None)?;
            let mut rows = Vec::new();
            let rep = check_subharmonic(&punctured, &points, &p.radii, p.circle_samples, p.tol);
            rows.push(WeightRow { weight: name, check: "submean_violations", disk: None, delta: None, measured: rep.violations as f64, bound: 0.0, pass: rep.violations == 0 });
            let Weight::Punctured { punctures, .. } = &punctured else {
                return Err(AppError::Compute("puncture returned an unpunctured weight".into()));
            };
            for (k, rec) in punctures.iter().enumerate() {
                for &delta in &p.deltas {
                    let d = puncture_drop(base, &punctured, rec, delta, p.circle_samples);
                    rows.push(WeightRow { weight: name, check: "drop", disk: Some(k), delta: Some(delta), measured: d.measured, bound: d.bound, pass: d.pass });
                }
            }
            let mismatches = outside.iter().filter(|&&z| punctured.value(z).to_bits() != base.value(z).to_bits()).count();
            rows.push(WeightRow { weight: name, check: "outside_mismatches", disk: None, delta: None, measured: mismatches as f64, bound: 0.0, pass: mismatches == 0 });
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    let rows: Vec<WeightRow> = rows.into_iter().flatten().collect();
    let mut out = SuiteOutput::new("weight");
    for r in &rows {
        let id = match (r.disk, r.delta) {
            (Some(k), Some(d)) => format!("weight.{}.{}.disk={k}.delta={d:.6}", r.weight, r.check),
            _ => format!("weight.{}.{}", r.weight, r.check),
        };
        let claim = match r.check {
            "submean_violations" => "no discrete sub-mean-value violations, including across the disk boundaries",
            "drop" => "max over B(z_k, delta r_k) at most max over B_k minus (1/8) r_k^2 m log(1/delta)",
            _ => "punctured weight equals the base weight off the disks",
        };
        out.certificates.push(Certificate::upper(id, claim, r.measured, r.bound));
    }
    out.tables.push(("weight.csv".into(), csv_bytes(&rows)?));
    out.documents.push(("disks.json".into(), serde_json::to_value(&disks)?));
    Ok(out)
}

/// Closed-form solution for the unit-disk indicator.
pub fn disk_solution(z: C64) -> C64 {
    if z.norm() <= 1.0 {
        z.conj()
    } else {
        1.0 / z
    }
}

#[derive(Debug, Serialize)]
struct DbarRow {
    re: f64,
    im: f64,
    solution_re: f64,
    solution_im: f64,
    error: f64,
}

/// Cauchy-transform solution of `∂̄β = 𝟙_𝔻` against its closed form.
pub fn dbar(p: &DbarParams) -> Result<SuiteOutput> {
    let g = disk_indicator(p.cells, p.half_width)?;
    let sol = solve_dbar_cauchy(&g)?;
    let h = g.spacing;
    let errors: Vec<f64> = (0..g.ny)
        .into_par_iter()
        .map(|j| {
            (0..g.nx)
                .map(|i| {
                    let z = g.point(i, j);
                    if (z.norm() - 1.0).abs() >= 2.0 * h {
                        (sol.beta.samples[g.index(i, j)] - disk_solution(z)).norm()
                    } else {
                        0.0
                    }
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let worst = errors.into_iter().fold(0.0, f64::max);
    let residual = sol.dbar_residual(2);
    let probes = [c64(0.3, -0.2), c64(-0.05, 0.61), c64(1.7, 0.4), c64(0.0, -1.9)];
    let rows: Vec<DbarRow> = probes
        .iter()
        .map(|&z| {
            let v = sol.eval(z);
            DbarRow { re: z.re, im: z.im, solution_re: v.re, solution_im: v.im, error: (v - disk_solution(z)).norm() }
        })
        .collect();
    let mut out = SuiteOutput::new("dbar");
    out.certificates.push(Certificate::upper("dbar.max_error", "grid error against the closed form, two cells off the jump", worst, p.tol));
    out.certificates.push(Certificate::upper("dbar.residual", "relative finite-difference dbar residual", residual, p.tol));
    for r in &rows {
        out.certificates.push(Certificate::upper(format!("dbar.probe.{}{:+}i", r.re, r.im), "off-grid error against the closed form", r.error, p.tol));
    }
    out.tables.push(("dbar.csv".into(), csv_bytes(&rows)?));
    Ok(out)
}

#[derive(Debug, Serialize)]
struct ScheduleCsvRow {
    alpha: f64,
    k: usize,
    loglog_tau: f64,
    rho: f64,
    gamma: f64,
    c1: bool,
    c1_margin: f64,
    c2: bool,
    c2_margin: f64,
    p41a: bool,
    p41a_margin: f64,
    p41b: bool,
    p41b_margin: f64,
    gamma_bounds: bool,
    gamma_bounds_margin: f64,
}

type RowCheck = fn(&ScheduleCsvRow) -> bool;

/// Double-exponential schedule checks in exact log-domain arithmetic.
pub fn schedule(p: &ScheduleParams) -> Result<SuiteOutput> {
    let per_alpha: Vec<(f64, Vec<ScheduleCsvRow>, bool, bool)> = p
        .alphas
        .par_iter()
        .map(|&alpha| -> Result<_> {
            let s = make_schedule(Family::DoubleExp { k1: p.k1 }, alpha, p.k_max)?;
            let table = s.table(p.k_max)?;
            let half = wander_core::logscale::big(0.5);
            let mut ratio_exact = true;
            let mut rho_exact = true;
            for k in 1..=p.k_max {
                ratio_exact &= s.c2_ratio(k)? == half;
                rho_exact &= *s.rho(k)? == wander_core::logscale::pow2(-((k as i64 + 1 + p.k1) as isize));
            }
            let rows = table
                .into_iter()
                .map(|r| ScheduleCsvRow {
                    alpha,
                    k: r.k,
                    loglog_tau: r.loglog_tau,
                    rho: r.rho,
                    gamma: r.gamma,
                    c1: r.c1.pass,
                    c1_margin: r.c1.margin,
                    c2: r.c2.pass,
                    c2_margin: r.c2.margin,
                    p41a: r.p41a.pass,
                    p41a_margin: r.p41a.margin,
                    p41b: r.p41b.pass,
                    p41b_margin: r.p41b.margin,
                    gamma_bounds: r.gamma_bounds.pass,
                    gamma_bounds_margin: r.gamma_bounds.margin,
                })
                .collect();
            Ok((alpha, rows, ratio_exact, rho_exact))
        })
        .collect::<Result<_>>()?;
    let mut out = SuiteOutput::new("schedule");
    let mut all_rows = Vec::new();
    for (alpha, rows, ratio_exact, rho_exact) in per_alpha {
        let fails = |f: fn(&ScheduleCsvRow) -> bool| rows.iter().filter(|r| !f(r)).count() as f64;
        let checks: [(&str, RowCheck); 5] = [
            ("c1", |r| r.c1),
            ("c2", |r| r.c2),
            ("p41a", |r| r.p41a),
            ("p41b", |r| r.p41b),
            ("gamma_bounds", |r| r.gamma_bounds),
        ];
        for (name, f) in checks {
            out.certificates.push(Certificate::upper(
                format!("schedule.alpha={alpha}.{name}"),
                format!("{name} holds for every k <= {}", p.k_max),
                fails(f),
                0.0,
            ));
        }
        out.certificates.push(Certificate::check(format!("schedule.alpha={alpha}.c2_ratio"), "log log tau_k / log log tau_(k+1) is exactly 1/2", ratio_exact));
        out.certificates.push(Certificate::check(format!("schedule.alpha={alpha}.rho"), "rho_k is exactly 2^-(k+1+k1)", rho_exact));
        all_rows.extend(rows);
    }
    out.tables.push(("schedule.csv".into(), csv_bytes(&all_rows)?));
    Ok(out)
}

fn domain_map(spec: &DomainSpec) -> Result<ConformalMap> {
    match spec {
        DomainSpec::Disk => Ok(ConformalMap::identity()),
        DomainSpec::Polar { eps, m } => Ok(solve_riemann(&polar_curve(*eps, *m)?, 1e-13, 500)?),
    }
}

#[derive(Debug, Serialize)]
struct LocalSummary {
    degree: usize,
    residual: f64,
    integral: f64,
    d_layer: f64,
    d_error: f64,
    d_growth: f64,
    d_integral: f64,
}

/// The local approximation lemma with measured constants.
pub fn local(p: &LocalParams) -> Result<SuiteOutput> {
    let phi = domain_map(&p.domain)?;
    let params = LocalLemmaParams {
        kappa: p.kappa,
        eta: p.eta,
        a: p.a,
        tau: p.tau,
        eps: p.eps,
        points: (0..p.points).map(|n| C64::from_polar(p.radius, TAU * (n as f64 + 0.125) / p.points as f64)).collect(),
        s: p.s,
        deltas: p.deltas.clone(),
    };
    let run = run_local_lemma(&params, &phi, &LocalFitOptions::default())?;
    let mut out = SuiteOutput::new("local");
    out.certificates = run.certificates.clone();
    let summary = LocalSummary {
        degree: run.degree,
        residual: run.fit.residual_max,
        integral: run.integral.value,
        d_layer: run.d_layer,
        d_error: run.d_error,
        d_growth: run.d_growth,
        d_integral: run.d_integral,
    };
    out.documents.push(("local.json".into(), serde_json::to_value(&summary)?));
    Ok(out)
}

/// Domain model for the toy schedule.
pub fn domain_model(spec: &DomainSpec, u0_radius: f64) -> Result<DomainModel> {
    match spec {
        DomainSpec::Disk => Ok(DomainModel::unit_disk(u0_radius, 2.0)?),
        DomainSpec::Polar { eps, m } => Ok(DomainModel::new(&polar_curve(*eps, *m)?, 1.0, u0_radius, 2.0, 1e-12)?),
    }
}

/// Build the toy chain.
pub fn build_chain(p: &ConstructParams, relaxed: Option<bool>, waive: &[String]) -> Result<(ConstructionState, SequenceReport)> {
    let schedule = toy_schedule()?;
    let dm = domain_model(&p.domain, 1.0 + schedule.rho_f64(0))?;
    let mut options = p.options.clone();
    if let Some(r) = relaxed {
        options.relaxed = r;
    }
    options.waivers.extend(waive.iter().map(|id| (id.clone(), "waived on request".to_string())));
    let mut state = ConstructionState::new(dm, schedule, options)?;
    let report = construct(&mut state, p.stages)?;
    Ok((state, report))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageEntry {
    pub k: usize,
    pub tau: f64,
    pub rho: f64,
    pub dir: String,
    pub accepted: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WaiverEntry {
    pub k: usize,
    pub id: String,
    pub citation: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub alpha: f64,
    pub taus: Vec<f64>,
    pub rho: Vec<f64>,
    pub stages: Vec<StageEntry>,
    pub waivers: Vec<WaiverEntry>,
    pub all_accepted: bool,
}

#[derive(Debug, Serialize)]
struct StageProblem<'a> {
    k: usize,
    tau: f64,
    rho: f64,
    window_scale: f64,
    fit: &'a wander_core::lsq::FitReport,
    integral: &'a wander_core::construction::StageIntegral,
    model: &'a str,
    layer: Option<&'a LayerRecord>,
    beta_grid: BetaGridInfo,
}

#[derive(Debug, Serialize)]
struct BetaGridInfo {
    center: f64,
    half_width: f64,
    cells: usize,
}

#[derive(Debug, Serialize)]
struct DriftCsvRow {
    k: usize,
    j: usize,
    nu: usize,
    measured: f64,
    bound: f64,
    pass: bool,
    statement_range: bool,
    auxiliary_range: bool,
}

/// Construction suite: builds the chain and describes the stage bundles.
pub fn construct_suite(p: &ConstructParams, relaxed: Option<bool>, waive: &[String]) -> Result<(SuiteOutput, ConstructionState, SequenceReport)> {
    let (state, report) = build_chain(p, relaxed, waive)?;
    let mut out = SuiteOutput::new("construct");
    out.certificates = report
        .certificates
        .iter()
        .map(|(k, c)| {
            let mut c = c.clone();
            c.id = format!("stage{k}.{}", c.id);
            c
        })
        .collect();
    let drift: Vec<DriftCsvRow> = report
        .drift
        .iter()
        .map(|d| DriftCsvRow {
            k: d.k,
            j: d.j,
            nu: d.nu,
            measured: d.measured,
            bound: d.bound,
            pass: d.pass,
            statement_range: d.statement_range,
            auxiliary_range: d.auxiliary_range,
        })
        .collect();
    out.tables.push(("drift.csv".into(), csv_bytes(&drift)?));
    Ok((out, state, report))
}

/// `β = χh - f` on the square of half-width `half` about `τ_k`.
pub fn beta_grid(state: &ConstructionState, k: usize, cells: usize, half: f64) -> Result<ComplexGrid> {
    let st = state.stage(k).ok_or_else(|| AppError::Compute(format!("stage {k} missing")))?;
    let t = state.schedule.tau_f64(k);
    let mut g = ComplexGrid::covering(t - half, -half, t + half, half, cells, cells)?;
    let pts = g.points();
    g.samples = pts.par_iter().map(|&z| st.beta(z)).collect();
    Ok(g)
}

/// Write `stage_k/` directories, the chain, the domain and the manifest.
pub fn write_bundle(dir: &Path, p: &ConstructParams, state: &ConstructionState, report: &SequenceReport) -> Result<()> {
    fs::create_dir_all(dir)?;
    let s = &state.schedule;
    let mut stages = Vec::new();
    for st in &state.stages {
        let k = st.k;
        let name = format!("stage_{k}");
        let sd = dir.join(&name);
        fs::create_dir_all(&sd)?;
        let tau = s.tau_f64(k);
        let problem = StageProblem {
            k,
            tau,
            rho: s.rho_f64(k),
            window_scale: st.window_scale,
            fit: &st.fit,
            integral: &st.integral,
            model: match st.model {
                wander_core::construction::StageModel::Base { .. } => "base",
                wander_core::construction::StageModel::Inductive { .. } => "inductive",
            },
            layer: state.layers.iter().find(|l| l.k == k),
            beta_grid: BetaGridInfo { center: tau, half_width: p.beta_half_width, cells: p.beta_cells },
        };
        write_json(&sd.join("problem.json"), &problem)?;
        crate::io::write_grid(&sd.join("beta.grid"), &beta_grid(state, k, p.beta_cells, p.beta_half_width)?)?;
        write_json(&sd.join("certificates.json"), &CertificateFile::new(&format!("stage_{k}"), st.certificates.clone()))?;
        stages.push(StageEntry { k, tau, rho: s.rho_f64(k), dir: name, accepted: st.certificates.iter().all(|c| c.accepted()) });
    }
    let manifest = Manifest {
        schema_version: crate::config::SCHEMA_VERSION,
        alpha: s.alpha,
        taus: (1..=s.len()).map(|k| s.tau_f64(k)).collect(),
        rho: (0..=s.len()).map(|k| s.rho_f64(k)).filter(|r| r.is_finite()).collect(),
        stages,
        waivers: report.waived.iter().map(|(k, id, why)| WaiverEntry { k: *k, id: id.clone(), citation: why.clone() }).collect(),
        all_accepted: report.all_accepted,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    write_json(&dir.join("chain.json"), &Chain::from_state(state)?)?;
    write_json(&dir.join("domain.json"), &state.domain)?;
    write_json(&dir.join("layers.json"), &state.layers)?;
    let stage_certs: Vec<Vec<Certificate>> = state.stages.iter().map(|st| st.certificates.clone()).collect();
    write_json(&dir.join("stage_certificates.json"), &stage_certs)?;
    Ok(())
}

/// What the dynamics suite needs from a chain.
#[derive(Debug, Clone)]
pub struct ChainData {
    pub chain: Chain,
    pub domain: DomainModel,
    pub layers: Vec<LayerRecord>,
    pub stage_certificates: Vec<Vec<Certificate>>,
}

impl ChainData {
    pub fn from_state(state: &ConstructionState) -> Result<Self> {
        Ok(Self {
            chain: Chain::from_state(state)?,
            domain: state.domain.clone(),
            layers: state.layers.clone(),
            stage_certificates: state.stages.iter().map(|st| st.certificates.clone()).collect(),
        })
    }

    pub fn load(dir: &Path) -> Result<Self> {
        fn read<T: serde::de::DeserializeOwned>(p: &Path) -> Result<T> {
            let text = fs::read_to_string(p).map_err(|e| AppError::Schema(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| AppError::Schema(format!("{}: {e}", p.display())))
        }
        Ok(Self {
            chain: read(&dir.join("chain.json"))?,
            domain: read(&dir.join("domain.json"))?,
            layers: read(&dir.join("layers.json"))?,
            stage_certificates: read(&dir.join("stage_certificates.json"))?,
        })
    }
}

#[derive(Debug, Serialize)]
struct OrbitRow {
    kind: &'static str,
    re: f64,
    im: f64,
    class: OrbitClass,
    step: Option<usize>,
    escape_depth: usize,
    margin: f64,
    stable: bool,
}

#[derive(Debug, Serialize)]
struct GrowthRow {
    radius: f64,
    ln_max: f64,
    growth_margin: f64,
}

/// Orbits of `U` and of the layer points, growth order and univalence.
pub fn dynamics(p: &DynamicsParams, data: &ChainData) -> Result<SuiteOutput> {
    let chain = &data.chain;
    let phi = &data.domain.riemann;
    let trap = attracting_trap(chain);
    let mut starts: Vec<(&'static str, C64)> = vec![("U", phi.eval(c64(0.0, 0.0)))];
    for r in [0.5, 0.9] {
        for w in circle_points(c64(0.0, 0.0), r, p.u_samples, 0.0) {
            starts.push(("U", phi.eval(w)));
        }
    }
    for l in &data.layers {
        for &a in &l.points {
            starts.push(("layer", a));
        }
    }
    let rows: Vec<OrbitRow> = starts
        .par_iter()
        .map(|&(kind, z)| {
            let rec = classify_orbit(chain, &trap, z, p.n_max);
            let stable = classification_stable(chain, &trap, z, p.n_max);
            OrbitRow { kind, re: z.re, im: z.im, class: rec.class, step: rec.step, escape_depth: rec.escape_depth, margin: rec.margin, stable }
        })
        .collect();
    let mut out = SuiteOutput::new("dynamics");
    out.certificates.push(Certificate::upper("dyn.trap", "f maps the closed disk B(-tau_1, 3/4) into B(-tau_1, 3/4)", trap.image_radius, 0.75));
    let depth = chain.len().min(2);
    let escaping = rows.iter().filter(|r| r.kind == "U" && r.class == OrbitClass::Escaping && r.escape_depth >= depth).count();
    out.certificates.push(Certificate::lower(
        "dyn.escaping",
        format!("sampled points of U whose iterate j lies in B(tau_j, 3) for j <= {depth}"),
        escaping as f64,
        p.min_escaping as f64,
    ));
    let layers = rows.iter().filter(|r| r.kind == "layer").count();
    let stray = rows.iter().filter(|r| r.kind == "layer" && r.class != OrbitClass::Attracted).count();
    if layers > 0 {
        out.certificates.push(Certificate::upper("dyn.layers_attracted", "layer points not attracted to B(-tau_1, 3/4)", stray as f64, 0.0));
    }
    let unstable = rows.iter().filter(|r| r.class != OrbitClass::Undecided && !r.stable).count();
    out.certificates.push(Certificate::upper("dyn.stable", "decided orbits whose class changes within the error bars", unstable as f64, 0.0));
    let growth = growth_order(chain, &p.growth_radii)?;
    let mut g = Certificate::upper("dyn.growth_order", "fitted order over covered radii at most alpha plus slack", growth.slope, chain.alpha + p.growth_slack);
    let sb_all = data.stage_certificates.iter().flatten().filter(|c| c.id.starts_with("S_b")).all(|c| c.pass);
    if !sb_all {
        g = g.waive("the order bound is claimed only when every S_b certificate passes");
    }
    out.certificates.push(g);
    let verdicts: Vec<UnivalenceVerdict> = chain.stages.par_iter().enumerate().map(|(i, f)| stage_univalence(f, phi, i + 1)).collect();
    for (i, v) in verdicts.iter().enumerate() {
        let k = i + 1;
        out.certificates.push(Certificate::check(format!("dyn.univalence.k={k}"), "f_k^(k+1) winds once and has non-vanishing derivative on U", v.pass));
    }
    let growth_rows: Vec<GrowthRow> = growth
        .radii
        .iter()
        .zip(&growth.ln_max)
        .zip(&growth.growth_margins)
        .map(|((&radius, &ln_max), &growth_margin)| GrowthRow { radius, ln_max, growth_margin })
        .collect();
    out.tables.push(("orbits.csv".into(), csv_bytes(&rows)?));
    out.tables.push(("growth.csv".into(), csv_bytes(&growth_rows)?));
    out.documents.push(("univalence.json".into(), serde_json::to_value(&verdicts)?));
    out.documents.push(("growth.json".into(), serde_json::to_value(&growth)?));
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AtlasSummary {
    pub window: [f64; 4],
    pub nx: usize,
    pub ny: usize,
    pub n_max: usize,
    pub escaping: usize,
    pub attracted: usize,
    pub undecided: usize,
}

#[derive(Debug, Serialize)]
struct AtlasRow {
    i: usize,
    j: usize,
    re: f64,
    im: f64,
    class: OrbitClass,
}

/// Per-pixel orbit classes over a window, written as PNG, CSV and JSON.
pub fn orbit_atlas(chain: &Chain, window: [f64; 4], res: usize, n_max: usize, prefix: &Path) -> Result<AtlasSummary> {
    let [x0, y0, x1, y1] = window;
    if !(x1 > x0 && y1 > y0) || res == 0 {
        return Err(AppError::Schema("window must be x0,y0,x1,y1 with x0 < x1, y0 < y1".into()));
    }
    let nx = res;
    let ny = (((y1 - y0) / (x1 - x0)) * res as f64).round().max(1.0) as usize;
    let h = (x1 - x0) / nx as f64;
    let grid = ComplexGrid::zeros(c64(x0 + 0.5 * h, y0 + 0.5 * h), h, nx, ny)?;
    let trap = attracting_trap(chain);
    let pts = grid.points();
    let classes: Vec<OrbitClass> = pts.par_iter().map(|&z| classify_orbit(chain, &trap, z, n_max).class).collect();
    let index = |c: OrbitClass| match c {
        OrbitClass::Escaping => 0u8,
        OrbitClass::Attracted => 1,
        OrbitClass::Undecided => 2,
    };
    // Image rows run from the top (largest imaginary part) down.
    let mut pixels = Vec::with_capacity(nx * ny);
    for j in (0..ny).rev() {
        for i in 0..nx {
            pixels.push(index(classes[grid.index(i, j)]));
        }
    }
    let rows: Vec<AtlasRow> = (0..ny)
        .flat_map(|j| (0..nx).map(move |i| (i, j)))
        .map(|(i, j)| {
            let z = grid.point(i, j);
            AtlasRow { i, j, re: z.re, im: z.im, class: classes[grid.index(i, j)] }
        })
        .collect();
    let count = |c: OrbitClass| classes.iter().filter(|&&x| x == c).count();
    let summary = AtlasSummary {
        window,
        nx,
        ny,
        n_max,
        escaping: count(OrbitClass::Escaping),
        attracted: count(OrbitClass::Attracted),
        undecided: count(OrbitClass::Undecided),
    };
    if let Some(parent) = prefix.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let with_ext = |ext: &str| {
        let mut s = prefix.as_os_str().to_owned();
        s.push(ext);
        std::path::PathBuf::from(s)
    };
    crate::io::write_png(&with_ext(".png"), nx, ny, &pixels)?;
    fs::write(with_ext(".csv"), csv_bytes(&rows)?)?;
    write_json(&with_ext(".json"), &summary)?;
    Ok(summary)
}
