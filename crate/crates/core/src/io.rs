//! File formats: IFS configs, interval unions and histograms.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::density::DensityHistogram;
use crate::error::{Error, Result};
use crate::ifs::{middle_alpha, HomogeneousIfs};
use crate::interval::IntervalUnion;
use crate::rational::{format_rational, int, parse_rational, to_decimal};

/// On-disk IFS. `ratio` is a rational, or `"alpha a"` for the middle-α set
/// with `a = (1 - α)/2`, in which case `offsets` may be omitted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IfsConfig {
    pub hull: String,
    pub ratio: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offsets: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

impl IfsConfig {
    /// Canonical form: every field explicit, rationals reduced.
    pub fn from_ifs(ifs: &HomogeneousIfs) -> Self {
        IfsConfig {
            hull: format_rational(ifs.hull()),
            ratio: format_rational(ifs.ratio()),
            offsets: Some(ifs.offsets().iter().map(format_rational).collect()),
            labels: Some(ifs.labels().to_vec()),
        }
    }

    /// Builds and validates.
    pub fn to_ifs(&self) -> Result<HomogeneousIfs> {
        let hull = parse_rational(&self.hull)?;
        let ifs = if let Some(a) = self.ratio.trim().strip_prefix("alpha") {
            if self.offsets.is_some() {
                return Err(Error::Format("\"alpha a\" ratios take no offsets".into()));
            }
            let base = middle_alpha(&parse_rational(a.trim())?)?;
            let scaled = base.scaled(&hull);
            match &self.labels {
                Some(l) => HomogeneousIfs::new(l.clone(), scaled.ratio().clone(), scaled.offsets().to_vec(), hull),
                None => scaled,
            }
        } else {
            let ratio = parse_rational(&self.ratio)?;
            let offsets = self
                .offsets
                .as_ref()
                .ok_or_else(|| Error::Format("offsets are required unless ratio is \"alpha a\"".into()))?
                .iter()
                .map(|s| parse_rational(s))
                .collect::<Result<Vec<_>>>()?;
            match &self.labels {
                Some(l) => HomogeneousIfs::new(l.clone(), ratio, offsets, hull),
                None => HomogeneousIfs::from_offsets(ratio, offsets, hull),
            }
        };
        if let Some(l) = &self.labels {
            if l.len() != ifs.offsets().len() {
                return Err(Error::Format(format!("{} labels for {} offsets", l.len(), ifs.offsets().len())));
            }
        }
        ifs.validated()
    }
}

pub fn parse_ifs(text: &str) -> Result<HomogeneousIfs> {
    let cfg: IfsConfig = serde_json::from_str(text)?;
    cfg.to_ifs()
}

pub fn ifs_to_json(ifs: &HomogeneousIfs) -> String {
    serde_json::to_string_pretty(&IfsConfig::from_ifs(ifs)).expect("plain data serializes")
}

pub fn read_ifs(path: &Path) -> Result<HomogeneousIfs> {
    let text = std::fs::read_to_string(path).map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    parse_ifs(&text)
}

/// `lo,hi,lo_decimal,hi_decimal`, one row per component.
pub fn intervals_csv(u: &IntervalUnion) -> String {
    let mut out = String::from("lo,hi,lo_decimal,hi_decimal\n");
    for (lo, hi) in u.components() {
        out.push_str(&format!("{},{},{},{}\n", format_rational(lo), format_rational(hi), to_decimal(lo, 6), to_decimal(hi, 6)));
    }
    out
}

/// Parses what `intervals_csv` writes; only the exact columns are read.
pub fn parse_intervals_csv(text: &str) -> Result<IntervalUnion> {
    let mut parts = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split(',');
        let (Some(lo), Some(hi)) = (cols.next(), cols.next()) else {
            return Err(Error::Format(format!("line {}: expected lo,hi", i + 1)));
        };
        parts.push((parse_rational(lo)?, parse_rational(hi)?));
    }
    IntervalUnion::from_sorted(parts)
}

/// `bin_center,mass,density` with the density normalized by bin width.
pub fn histogram_csv(h: &DensityHistogram) -> String {
    let mut out = String::from("bin_center,mass,density,bin_center_decimal,density_decimal\n");
    for (&k, mass) in &h.bins {
        let center = h.bin_center(k);
        let density = mass / h.bin_width(k);
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            format_rational(&center),
            format_rational(mass),
            format_rational(&density),
            to_decimal(&center, 6),
            to_decimal(&density, 6)
        ));
    }
    out
}

/// Middle-α config with the default hull.
pub fn alpha_config(a: &str) -> IfsConfig {
    IfsConfig { hull: format_rational(&int(1)), ratio: format!("alpha {a}"), offsets: None, labels: None }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use proptest::prelude::*;

    #[test]
    fn alpha_form() {
        let k = parse_ifs(r#"{"hull":"1","ratio":"alpha 3/10"}"#).unwrap();
        assert_eq!(k, middle_alpha(&rat(3, 10)).unwrap());
        let k2 = parse_ifs(r#"{"hull":"2","ratio":"alpha 1/3","labels":["L","R"]}"#).unwrap();
        assert_eq!(k2.offsets(), &[int(0), rat(4, 3)]);
        assert_eq!(k2.labels(), &["L".to_string(), "R".to_string()]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse_ifs(r#"{"hull":"1","ratio":"1/3"}"#).is_err());
        assert!(parse_ifs(r#"{"hull":"1","ratio":"1/2","offsets":["0","1/4"]}"#).is_err());
        assert!(parse_ifs(r#"{"hull":"1","ratio":"1/3","offsets":["0","2/3"],"labels":["a"]}"#).is_err());
        assert!(parse_ifs(r#"{"hull":"1","ratio":"alpha 1/3","offsets":["0"]}"#).is_err());
        assert!(parse_ifs("not json").is_err());
    }

    #[test]
    fn csv_round_trip() {
        let u = IntervalUnion::from_intervals(vec![(rat(-1, 3), rat(1, 7)), (int(1), int(2))]);
        assert_eq!(parse_intervals_csv(&intervals_csv(&u)).unwrap(), u);
        assert_eq!(intervals_csv(&IntervalUnion::empty()).lines().count(), 1);
    }

    proptest! {
        #[test]
        fn canonical_round_trip(n in 1i64..40, d in 81i64..200, hull in 1i64..5) {
            let a = rat(n, d);
            let k = middle_alpha(&a).unwrap().scaled(&int(hull));
            let text = ifs_to_json(&k);
            let back = parse_ifs(&text).unwrap();
            prop_assert_eq!(&back, &k);
            prop_assert_eq!(ifs_to_json(&back), text);
        }
    }
}
