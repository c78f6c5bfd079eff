//! Versioned JSON run configurations.
//!
//! Every file has the same envelope; the command-specific block sits under
//! `params`. Unknown fields and a wrong `schema_version` are rejected before
//! anything runs.

use crate::error::{AppError, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::f64::consts::E;
use std::path::{Path, PathBuf};
use wander_core::construction::ConstructionOptions;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(bound(deserialize = "P: DeserializeOwned + Default"))]
pub struct RunConfig<P> {
    pub schema_version: u32,
    /// Worker threads; results do not depend on it.
    #[serde(default)]
    pub threads: Option<usize>,
    /// Excuse failures that only a large `τ₁` rules out.
    #[serde(default)]
    pub relaxed: Option<bool>,
    /// Certificate ids (or id prefixes) to waive.
    #[serde(default)]
    pub waive: Vec<String>,
    #[serde(default)]
    pub params: P,
}

impl<P: Default> Default for RunConfig<P> {
    fn default() -> Self {
        Self { schema_version: SCHEMA_VERSION, threads: None, relaxed: None, waive: Vec::new(), params: P::default() }
    }
}

impl<P: DeserializeOwned + Default> RunConfig<P> {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| AppError::Schema(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(AppError::Schema(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        if cfg.threads == Some(0) {
            return Err(AppError::Schema("threads must be at least 1".into()));
        }
        Ok(cfg)
    }

    /// Read `path`, or use the defaults when no file is given.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| AppError::Schema(format!("{}: {e}", p.display())))?;
                Self::parse(&text)
            }
            None => Ok(Self::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RiemannParams {
    pub eps: Vec<f64>,
    pub modes: Vec<u32>,
    pub radii: Vec<f64>,
    /// Boundary samples handed to the solver.
    pub boundary_samples: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Samples per circle in the certificates.
    pub check_samples: usize,
}

impl Default for RiemannParams {
    fn default() -> Self {
        Self {
            eps: vec![1e-2, 1e-3],
            modes: vec![2, 3, 5],
            radii: vec![0.3, 0.5, 0.9],
            boundary_samples: 256,
            tol: 1e-12,
            max_iter: 200,
            check_samples: 512,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightParams {
    pub seed: u64,
    pub disks: usize,
    /// Width `η` of the exponential weight.
    pub eta: f64,
    /// Exponent of the power weight.
    pub alpha: f64,
    pub deltas: Vec<f64>,
    pub tol: f64,
    /// Test points per side of the square grid.
    pub grid: usize,
    pub half_width: f64,
    /// Radii of the circles in the sub-mean-value test.
    pub radii: Vec<f64>,
    pub circle_samples: usize,
}

impl Default for WeightParams {
    fn default() -> Self {
        Self {
            seed: 7,
            disks: 10,
            eta: 0.2,
            alpha: 0.5,
            deltas: vec![E.powi(-2), E.powi(-3), E.powi(-4)],
            tol: 1e-8,
            grid: 57,
            half_width: 3.5,
            radii: vec![0.02, 0.1],
            circle_samples: 512,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DbarParams {
    pub cells: usize,
    pub half_width: f64,
    pub tol: f64,
}

impl Default for DbarParams {
    fn default() -> Self {
        Self { cells: 512, half_width: 2.0, tol: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleParams {
    pub k1: i64,
    pub alphas: Vec<f64>,
    pub k_max: usize,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        Self { k1: 3, alphas: vec![0.1, 0.5, 0.9], k_max: 100 }
    }
}

/// The domain `U`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[derive(Default)]
pub enum DomainSpec {
    #[default]
    Disk,
    /// Boundary `r(θ) = 1 + eps cos(mθ)`.
    Polar { eps: f64, m: u32 },
}


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LocalParams {
    pub domain: DomainSpec,
    pub kappa: f64,
    pub eta: f64,
    pub a: f64,
    pub tau: f64,
    pub eps: f64,
    /// Layer points, spread evenly on `|z| = radius`.
    pub points: usize,
    pub radius: f64,
    pub s: f64,
    pub deltas: Vec<f64>,
}

impl Default for LocalParams {
    fn default() -> Self {
        Self {
            domain: DomainSpec::Disk,
            kappa: 1.0 / 6.0,
            eta: 0.2,
            a: 3.0,
            tau: 10.0,
            eps: 1e-3,
            points: 4,
            radius: 1.2,
            s: 1.0,
            deltas: vec![1.0, 0.5, 0.1, 0.01],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstructParams {
    pub domain: DomainSpec,
    pub stages: usize,
    pub options: ConstructionOptions,
    /// Grid points per side of each stored `β` grid.
    pub beta_cells: usize,
    /// Half-width of the `β` grid around `τ_k`.
    pub beta_half_width: f64,
}

impl Default for ConstructParams {
    fn default() -> Self {
        Self { domain: DomainSpec::Disk, stages: 2, options: ConstructionOptions::toy(), beta_cells: 64, beta_half_width: 4.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsParams {
    /// A bundle written by `construct`; built afresh from `construct` when absent.
    pub state: Option<PathBuf>,
    pub construct: ConstructParams,
    pub n_max: usize,
    /// Sample points of `U` per ring.
    pub u_samples: usize,
    pub growth_radii: Vec<f64>,
    /// Allowed excess of the fitted order over `α`.
    pub growth_slack: f64,
    pub min_escaping: usize,
}

impl Default for DynamicsParams {
    fn default() -> Self {
        Self {
            state: None,
            construct: ConstructParams::default(),
            n_max: 8,
            u_samples: 8,
            growth_radii: vec![50.0, 100.0, 200.0, 400.0],
            growth_slack: 0.1,
            min_escaping: 3,
        }
    }
}
