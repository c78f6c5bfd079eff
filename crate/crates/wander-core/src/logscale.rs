//! Extended-precision reals kept at the logarithmic tier where they fit.
//!
//! Parameters such as `τ_k = exp(exp(2^{k+3}))` cannot be stored directly.
//! A [`LogScaleReal`] keeps `x`, `log x` or `log log x` in a 128-bit binary
//! float and converts between tiers only when the target fits.

use crate::error::{invalid, Error, Result};
use alloc::format;
use alloc::string::{String, ToString};
use dashu_float::FBig;
use serde::{Deserialize, Serialize};

/// Binary float with at least 128 significant bits.
pub type Big = FBig;

pub const PRECISION: usize = 128;

/// Values of `log τ` above this are not materialized at the plain tier.
const EXP_LIMIT: f64 = 40.0;

pub fn big(x: f64) -> Big {
    let v: Big = Big::try_from(x).expect("finite f64");
    v.with_precision(PRECISION).value()
}

/// Exact `2^e`.
pub fn pow2(e: isize) -> Big {
    big(1.0) << e
}

pub fn to_f64(x: &Big) -> f64 {
    x.to_f64().value()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Plain,
    Log,
    LogLog,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogScaleReal {
    pub tier: Tier,
    pub value: Big,
}

impl LogScaleReal {
    pub fn plain(x: Big) -> Self {
        Self { tier: Tier::Plain, value: x }
    }
    pub fn from_log(l: Big) -> Self {
        Self { tier: Tier::Log, value: l }
    }
    pub fn from_loglog(ll: Big) -> Self {
        Self { tier: Tier::LogLog, value: ll }
    }

    /// `log log x`; defined for `x > 1`.
    pub fn loglog(&self) -> Result<Big> {
        match self.tier {
            Tier::Plain => {
                if self.value <= big(1.0) {
                    return Err(invalid("log log needs a value above 1"));
                }
                Ok(self.value.ln().ln())
            }
            Tier::Log => {
                if self.value <= big(0.0) {
                    return Err(invalid("log log needs a positive logarithm"));
                }
                Ok(self.value.ln())
            }
            Tier::LogLog => Ok(self.value.clone()),
        }
    }

    /// `log x`, promoted from the log-log tier only when it fits.
    pub fn log(&self) -> Result<Big> {
        match self.tier {
            Tier::Plain => Ok(self.value.ln()),
            Tier::Log => Ok(self.value.clone()),
            Tier::LogLog => exp_checked(&self.value),
        }
    }

    pub fn describe(&self) -> String {
        let v = to_f64(&self.value);
        match self.tier {
            Tier::Plain => format!("{v:e}"),
            Tier::Log => format!("exp({v:e})"),
            Tier::LogLog => format!("exp(exp({v:e}))"),
        }
    }
}

/// `e^x` when the result stays inside the representable exponent range
/// used by this crate.
pub fn exp_checked(x: &Big) -> Result<Big> {
    if to_f64(x) > 1e15 {
        return Err(Error::TierOverflow(format!("exp of {} needs a higher tier", x)));
    }
    Ok(x.exp())
}

/// Decide `e^x > y` exactly by comparing logarithms where needed.
pub fn exp_greater(x: &Big, y: &Big) -> bool {
    if *y <= big(0.0) {
        return true;
    }
    *x > y.ln()
}

/// Whether `e^x` can be materialized cheaply for direct comparisons.
pub fn exp_fits(x: &Big) -> bool {
    to_f64(x) < EXP_LIMIT
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiers_convert() {
        let x = LogScaleReal::plain(big(1e4));
        let ll = x.loglog().unwrap();
        assert!((to_f64(&ll) - (4.0 * 10f64.ln()).ln()).abs() < 1e-15);
        let y = LogScaleReal::from_loglog(pow2(104));
        assert!(y.log().is_err());
        assert_eq!(y.loglog().unwrap(), pow2(104));
        assert!(exp_greater(&big(3.0), &big(20.0)));
        assert!(!exp_greater(&big(2.0), &big(20.0)));
    }
}
