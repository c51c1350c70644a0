//! User-facing constants and the effective values measured per run.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{format_rational, int, Rational};

/// `c0` scales the perturbation, `c2` the good-pair density threshold.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstantsConfig {
    #[serde(with = "crate::rational::serde_str")]
    pub c0: Rational,
    #[serde(with = "crate::rational::serde_str")]
    pub c2: Rational,
}

impl ConstantsConfig {
    /// `c0 = 3 + 2 s0` is the smallest amplitude whose ω-sweep covers the
    /// whole linked range; `c2 = 1`.
    pub fn defaults(s0: &Rational) -> Self {
        ConstantsConfig { c0: default_c0(s0), c2: int(1) }
    }

    pub fn new(c0: Rational, c2: Rational) -> Result<Self> {
        let zero = int(0);
        if c0 <= zero {
            return Err(Error::OutOfRange(format!("c0 = {} must be positive", format_rational(&c0))));
        }
        if c2 <= zero {
            return Err(Error::OutOfRange(format!("c2 = {} must be positive", format_rational(&c2))));
        }
        Ok(ConstantsConfig { c0, c2 })
    }

    /// Soft conditions; a run proceeds but reports them.
    pub fn warnings(&self, s0: &Rational) -> Vec<String> {
        let mut out = Vec::new();
        let min_c0 = default_c0(s0);
        if self.c0 < min_c0 {
            out.push(format!(
                "c0 = {} is below 3 + 2 s0 = {}: the ω-sweep of one return does not cover the linked range",
                format_rational(&self.c0),
                format_rational(&min_c0)
            ));
        }
        out
    }
}

pub fn default_c0(s0: &Rational) -> Rational {
    int(3) + int(2) * s0
}

/// Largest `c2` for which the bad-pair count bound `6 c2 c4² c5 (1 + s0) |B|`
/// is at most `|B| / 16`, so that `|G| >= 15/16 |B|` is forced.
pub fn good_pair_c2(c4: &Rational, c5: &Rational, s0: &Rational) -> Rational {
    (int(96) * c4 * c4 * c5 * (int(1) + s0)).recip()
}

/// Constants the construction only bounds implicitly, back-solved from the
/// quantities a run actually measures. `None` means the stage that fixes the
/// value did not run.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DerivedConstants {
    /// Measured `|L0|`.
    #[serde(with = "opt")]
    pub c3: Option<Rational>,
    /// Mass comparison constant; exactly 1 for uniform homogeneous measures.
    #[serde(with = "opt")]
    pub c4: Option<Rational>,
    /// `‖χ‖²` estimate at the deepest histogram depth.
    #[serde(with = "opt")]
    pub c5: Option<Rational>,
    /// `min |J0(a1, a1')| / (c2 r)` over the first class of good pairs.
    #[serde(with = "opt")]
    pub c6: Option<Rational>,
    /// `|G1| / (|A| |A'|)`.
    #[serde(with = "opt")]
    pub c7: Option<Rational>,
    /// `∫φ0 / (c2 |A| |A'| r)`.
    #[serde(with = "opt")]
    pub c8: Option<Rational>,
    /// Largest `|T(t) - T(t~)|` seen over verified cover intervals.
    #[serde(with = "opt")]
    pub c9: Option<Rational>,
    /// Largest `|c10|` over sampled ω-slices.
    #[serde(with = "opt")]
    pub c10: Option<Rational>,
}

mod opt {
    use super::Rational;
    use crate::rational::{format_rational, parse_rational};
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(r) => s.serialize_some(&format_rational(r)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational>, D::Error> {
        Option::<String>::deserialize(d)?.map(|t| parse_rational(&t).map_err(D::Error::custom)).transpose()
    }
}
