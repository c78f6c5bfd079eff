//! Two-sided certificates: every claim records what was measured, the bound
//! it is held to, and the resulting margin.

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub id: String,
    pub claim: String,
    #[serde(with = "extended")]
    pub measured: f64,
    #[serde(with = "extended")]
    pub bound: f64,
    /// `bound - measured` for upper bounds, `measured - bound` for lower bounds.
    #[serde(with = "extended")]
    pub margin: f64,
    pub pass: bool,
    /// Set when relaxed mode excuses a failure; holds the justification.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waiver: Option<String>,
}

impl Certificate {
    /// Claim `measured <= bound`.
    pub fn upper(id: impl Into<String>, claim: impl Into<String>, measured: f64, bound: f64) -> Self {
        let margin = bound - measured;
        Self {
            id: id.into(),
            claim: claim.into(),
            measured,
            bound,
            margin,
            pass: measured <= bound,
            waiver: None,
        }
    }

    /// Claim `measured >= bound`.
    pub fn lower(id: impl Into<String>, claim: impl Into<String>, measured: f64, bound: f64) -> Self {
        let margin = measured - bound;
        Self {
            id: id.into(),
            claim: claim.into(),
            measured,
            bound,
            margin,
            pass: measured >= bound,
            waiver: None,
        }
    }

    /// Boolean claim, recorded as measured 0/1 against bound 1.
    pub fn check(id: impl Into<String>, claim: impl Into<String>, ok: bool) -> Self {
        let m = if ok { 1.0 } else { 0.0 };
        Self::lower(id, claim, m, 1.0)
    }

    pub fn waive(mut self, reason: impl Into<String>) -> Self {
        if !self.pass {
            self.waiver = Some(reason.into());
        }
        self
    }

    /// Passing, or failing with a waiver on record.
    pub fn accepted(&self) -> bool {
        self.pass || self.waiver.is_some()
    }
}

/// True when every certificate passes or carries a waiver.
pub fn all_accepted(certs: &[Certificate]) -> bool {
    certs.iter().all(Certificate::accepted)
}

/// Apply waivers by id prefix; returns the ids that were waived.
pub fn apply_waivers(certs: &mut [Certificate], waivers: &[(String, String)]) -> Vec<String> {
    let mut hit = Vec::new();
    for c in certs.iter_mut() {
        if c.pass {
            continue;
        }
        if let Some((_, why)) = waivers.iter().find(|(id, _)| c.id == *id || c.id.starts_with(&alloc::format!("{id}."))) {
            c.waiver = Some(why.clone());
            hit.push(c.id.clone());
        }
    }
    hit
}

/// JSON has no infinities: non-finite values travel as `"inf"`, `"-inf"`
/// or `"nan"`, finite ones as plain numbers.
pub mod extended {
    use core::fmt;
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else if x.is_nan() {
            s.serialize_str("nan")
        } else if *x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    struct Extended;

    impl Visitor<'_> for Extended {
        type Value = f64;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a number or one of \"inf\", \"-inf\", \"nan\"")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            match v {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
            }
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        d.deserialize_any(Extended)
    }
}
