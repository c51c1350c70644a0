//! Recurrence certificates and their independent replay.
//!
//! Replay trusts nothing stored except the choices: it rebuilds `K^ω` from
//! the base configs, recomputes every image from the stored words, and
//! rechecks the cover, the margin and `J`.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::configuration::ConfigSpace;
use crate::error::{Error, Result};
use crate::ifs::{perturb_with_amplitude, HomogeneousIfs, Word};
use crate::interval::IntervalUnion;
use crate::io::IfsConfig;
use crate::rational::{format_rational, int, pow, Rational};
use crate::recurrent::{Mode, RecurrentCandidate};
use crate::search::{presentation, PerturbationVector, Provenance};

pub const CERTIFICATE_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoverEntry {
    pub lo: Rational,
    pub hi: Rational,
    pub b: Word,
    pub bp: Word,
    pub image_lo: Rational,
    pub image_hi: Rational,
}

#[derive(Serialize, Deserialize)]
struct CoverRecord {
    #[serde(with = "crate::rational::serde_str")]
    lo: Rational,
    #[serde(with = "crate::rational::serde_str")]
    hi: Rational,
    b: Vec<String>,
    bp: Vec<String>,
    #[serde(with = "crate::rational::serde_str")]
    image_lo: Rational,
    #[serde(with = "crate::rational::serde_str")]
    image_hi: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Certificate {
    pub version: u32,
    pub mode: Mode,
    pub refine: usize,
    pub c0: Rational,
    pub c2: Rational,
    /// `c0 r²`, the shift per unit of ω.
    pub amplitude: Rational,
    pub seed: u64,
    pub draw: Option<u64>,
    /// ω keyed by letter index of the refined, normalized `K`.
    pub omega: BTreeMap<usize, Rational>,
    pub perturbed: HomogeneousIfs,
    /// `K'` in cross mode, `K^ω` again in self mode.
    pub partner: HomogeneousIfs,
    pub rho: Rational,
    pub delta: Rational,
    pub margin: Rational,
    pub l: IntervalUnion,
    pub cover: Vec<CoverEntry>,
    pub j: Option<(Rational, Rational)>,
    /// `L` was empty: nothing is certified.
    pub useless: bool,
    pub transcript: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct CertificateRecord {
    version: u32,
    mode: Mode,
    refine: usize,
    #[serde(with = "crate::rational::serde_str")]
    c0: Rational,
    #[serde(with = "crate::rational::serde_str")]
    c2: Rational,
    #[serde(with = "crate::rational::serde_str")]
    amplitude: Rational,
    seed: u64,
    draw: Option<u64>,
    omega: BTreeMap<String, String>,
    perturbed: IfsConfig,
    partner: IfsConfig,
    #[serde(with = "crate::rational::serde_str")]
    rho: Rational,
    #[serde(with = "crate::rational::serde_str")]
    delta: Rational,
    #[serde(with = "crate::rational::serde_str")]
    margin: Rational,
    l: IntervalUnion,
    cover: Vec<CoverRecord>,
    j: Option<[String; 2]>,
    useless: bool,
    transcript: Vec<String>,
}

fn labels_of(word: &Word, ifs: &HomogeneousIfs) -> Vec<String> {
    word.0.iter().map(|&a| ifs.labels()[a].clone()).collect()
}

fn word_of(labels: &[String], ifs: &HomogeneousIfs) -> Result<Word> {
    labels.iter().map(|l| ifs.index_of(l)).collect::<Result<Vec<_>>>().map(Word)
}

fn unchecked_ifs(cfg: &IfsConfig) -> Result<HomogeneousIfs> {
    let parse = crate::rational::parse_rational;
    let offsets = cfg
        .offsets
        .as_ref()
        .ok_or_else(|| Error::Format("certificate IFS needs explicit offsets".into()))?
        .iter()
        .map(|s| parse(s))
        .collect::<Result<Vec<_>>>()?;
    let labels = cfg.labels.clone().unwrap_or_else(|| (0..offsets.len()).map(|i| i.to_string()).collect());
    Ok(HomogeneousIfs::new(labels, parse(&cfg.ratio)?, offsets, parse(&cfg.hull)?))
}

impl Certificate {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn assemble(
        cand: &RecurrentCandidate,
        space: &ConfigSpace,
        omega: &PerturbationVector,
        amp: &Rational,
        provenance: &Provenance,
        delta: Rational,
        margin: Rational,
        cover: Vec<CoverEntry>,
    ) -> Self {
        let j = certified_interval(&cand.l, space.s0());
        let transcript = vec![
            format!("mode {} refine {} rho {}", cand.mode, provenance.refine, format_rational(&cand.rho)),
            format!("L: {} components, measure {}", cand.l.len(), format_rational(&cand.l.measure())),
            format!(
                "cover: {} intervals of width <= {}, each image inside L with margin {}",
                cover.len(),
                format_rational(&(int(2) * &delta)),
                format_rational(&margin)
            ),
        ];
        Certificate {
            version: CERTIFICATE_VERSION,
            mode: cand.mode,
            refine: provenance.refine,
            c0: provenance.c0.clone(),
            c2: provenance.c2.clone(),
            amplitude: amp.clone(),
            seed: omega.seed,
            draw: omega.draw,
            omega: omega.components.clone(),
            perturbed: space.k().clone(),
            partner: space.kp().clone(),
            rho: cand.rho.clone(),
            delta,
            margin,
            useless: cand.l.is_empty(),
            l: cand.l.clone(),
            cover,
            j,
            transcript,
        }
    }

    pub fn to_json(&self) -> String {
        let k = &self.perturbed;
        let record = CertificateRecord {
            version: self.version,
            mode: self.mode,
            refine: self.refine,
            c0: self.c0.clone(),
            c2: self.c2.clone(),
            amplitude: self.amplitude.clone(),
            seed: self.seed,
            draw: self.draw,
            omega: self.omega.iter().map(|(&a, w)| (k.labels()[a].clone(), format_rational(w))).collect(),
            perturbed: IfsConfig::from_ifs(k),
            partner: IfsConfig::from_ifs(&self.partner),
            rho: self.rho.clone(),
            delta: self.delta.clone(),
            margin: self.margin.clone(),
            l: self.l.clone(),
            cover: self
                .cover
                .iter()
                .map(|e| CoverRecord {
                    lo: e.lo.clone(),
                    hi: e.hi.clone(),
                    b: labels_of(&e.b, k),
                    bp: labels_of(&e.bp, &self.partner),
                    image_lo: e.image_lo.clone(),
                    image_hi: e.image_hi.clone(),
                })
                .collect(),
            j: self.j.as_ref().map(|(a, b)| [format_rational(a), format_rational(b)]),
            useless: self.useless,
            transcript: self.transcript.clone(),
        };
        let mut text = serde_json::to_string_pretty(&record).expect("plain data serializes");
        text.push('\n');
        text
    }

    /// Parses without validating the IFS; replay decides.
    pub fn from_json(text: &str) -> Result<Self> {
        let r: CertificateRecord = serde_json::from_str(text)?;
        let parse = crate::rational::parse_rational;
        let perturbed = unchecked_ifs(&r.perturbed)?;
        let partner = unchecked_ifs(&r.partner)?;
        let omega = r.omega.iter().map(|(l, w)| Ok((perturbed.index_of(l)?, parse(w)?))).collect::<Result<BTreeMap<_, _>>>()?;
        let cover = r
            .cover
            .into_iter()
            .map(|c| {
                Ok(CoverEntry {
                    lo: c.lo,
                    hi: c.hi,
                    b: word_of(&c.b, &perturbed)?,
                    bp: word_of(&c.bp, &partner)?,
                    image_lo: c.image_lo,
                    image_hi: c.image_hi,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let j = r.j.map(|[a, b]| Ok::<_, Error>((parse(&a)?, parse(&b)?))).transpose()?;
        Ok(Certificate {
            version: r.version,
            mode: r.mode,
            refine: r.refine,
            c0: r.c0,
            c2: r.c2,
            amplitude: r.amplitude,
            seed: r.seed,
            draw: r.draw,
            omega,
            perturbed,
            partner,
            rho: r.rho,
            delta: r.delta,
            margin: r.margin,
            l: r.l,
            cover,
            j,
            useless: r.useless,
            transcript: r.transcript,
        })
    }
}

/// Largest component (leftmost on ties) of `L ∩ [-s0, 1]`.
pub fn certified_interval(l: &IntervalUnion, s0: &Rational) -> Option<(Rational, Rational)> {
    l.clip(&-s0.clone(), &Rational::one()).largest_component()
}

/// One failed replay check; `index` names the cover interval when there is one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReplayIssue {
    pub index: Option<usize>,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReplayReport {
    pub issues: Vec<ReplayIssue>,
    pub checked: usize,
    /// Cover entries whose stored image differs from the recomputed one.
    pub stale_images: usize,
}

impl ReplayReport {
    pub fn passed(&self) -> bool {
        self.issues.is_empty()
    }

    /// Cover intervals with at least one failed check.
    pub fn failed_intervals(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.issues.iter().filter_map(|i| i.index).collect();
        v.dedup();
        v
    }
}

/// `L` together with the exact pair of sets it was certified for.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CertifiedSet {
    k: HomogeneousIfs,
    kp: HomogeneousIfs,
    set: IntervalUnion,
    j: Option<(Rational, Rational)>,
}

impl CertifiedSet {
    pub fn set(&self) -> &IntervalUnion {
        &self.set
    }

    pub fn j(&self) -> Option<&(Rational, Rational)> {
        self.j.as_ref()
    }

    pub fn space(&self) -> Result<ConfigSpace> {
        ConfigSpace::new(self.k.clone(), self.kp.clone())
    }

    pub fn matches(&self, space: &ConfigSpace) -> bool {
        space.k() == &self.k && space.kp() == &self.kp
    }
}

/// Re-verifies `cert` from the base configs alone. `kp` is ignored in self mode.
pub fn replay(cert: &Certificate, k: &HomogeneousIfs, kp: &HomogeneousIfs, ratio_cap: u32) -> ReplayReport {
    let mut issues = Vec::new();
    let mut issue = |index: Option<usize>, detail: String| issues.push(ReplayIssue { index, detail });
    let mut checked = 0;
    let mut stale = 0;

    if cert.version != CERTIFICATE_VERSION {
        issue(None, format!("unsupported certificate version {}", cert.version));
    }
    let partner_base = match cert.mode {
        Mode::Cross => kp,
        Mode::SelfDifference => k,
    };
    let base = match presentation(k, partner_base, cert.refine, ratio_cap) {
        Ok(b) => b,
        Err(e) => {
            issue(None, format!("base configs do not rebuild: {e}"));
            return ReplayReport { issues, checked, stale_images: stale };
        }
    };
    let r = base.ratio().clone();
    let rho = &r * &r;
    let expected_amp = &cert.c0 * &rho;
    if cert.amplitude != expected_amp {
        issue(None, format!("amplitude {} is not c0 r^2 = {}", format_rational(&cert.amplitude), format_rational(&expected_amp)));
    }
    let space = match perturb_with_amplitude(base.k(), &cert.omega, &cert.amplitude) {
        Ok(kw) => {
            let partner = match cert.mode {
                Mode::Cross => base.kp().clone(),
                Mode::SelfDifference => kw.clone(),
            };
            if kw != cert.perturbed {
                issue(None, "stored perturbed IFS differs from the recomputed one".into());
            }
            if partner != cert.partner {
                issue(None, "stored partner IFS differs from the recomputed one".into());
            }
            match ConfigSpace::new(kw, partner) {
                Ok(s) => s,
                Err(e) => {
                    issue(None, format!("perturbed pair is not a configuration space: {e}"));
                    return ReplayReport { issues, checked, stale_images: stale };
                }
            }
        }
        Err(e) => {
            issue(None, format!("ω does not give a valid perturbation: {e}"));
            return ReplayReport { issues, checked, stale_images: stale };
        }
    };

    let delta = pow(&r, 5);
    let margin = &rho / int(2) - &delta / &rho;
    if cert.rho != rho || cert.delta != delta || cert.margin != margin {
        issue(None, "scale constants rho, delta or margin disagree with the presentation".into());
    }
    if margin <= Rational::zero() {
        issue(None, format!("margin {} is not positive", format_rational(&margin)));
    }
    if int(2) * &delta / &rho >= &rho / int(2) {
        issue(None, "expansion 2 delta / rho is not below rho / 2".into());
    }

    if cert.l.is_empty() {
        issue(None, "L is empty; nothing is certified".into());
    }
    for (i, e) in cert.cover.iter().enumerate() {
        checked += 1;
        if e.lo > e.hi {
            issue(Some(i), "cover interval is reversed".into());
            continue;
        }
        if &e.hi - &e.lo > int(2) * &delta {
            issue(Some(i), "cover interval wider than 2 delta".into());
        }
        if e.b.depth() != 2 || e.bp.depth() != 2 {
            issue(Some(i), "witness words must have depth 2".into());
            continue;
        }
        if e.b.0.iter().any(|&a| a >= space.k().len()) || e.bp.0.iter().any(|&a| a >= space.kp().len()) {
            issue(Some(i), "witness letter out of range".into());
            continue;
        }
        let lo = space.renormalize_word(&e.lo, &e.b.0, &e.bp.0).expect("depth checked");
        let hi = space.renormalize_word(&e.hi, &e.b.0, &e.bp.0).expect("depth checked");
        if lo != e.image_lo || hi != e.image_hi {
            stale += 1;
        }
        if !cert.l.contains_interval(&(&lo - &margin), &(&hi + &margin)) {
            issue(
                Some(i),
                format!(
                    "image [{}, {}] is not inside L with margin {}",
                    format_rational(&lo),
                    format_rational(&hi),
                    format_rational(&margin)
                ),
            );
        }
    }
    let covered = IntervalUnion::from_intervals(cert.cover.iter().filter(|e| e.lo <= e.hi).map(|e| (e.lo.clone(), e.hi.clone())));
    if !cert.l.is_subset_of(&covered) {
        issue(None, "cover does not contain L".into());
    }
    match &cert.j {
        None => issue(None, "J is empty".into()),
        Some((lo, hi)) => {
            if lo > hi {
                issue(None, "J is reversed".into());
            } else if !cert.l.contains_interval(lo, hi) {
                issue(None, "J is not contained in L".into());
            } else if lo < &-space.s0().clone() || hi > &Rational::one() {
                issue(None, "J leaves the linked range".into());
            }
        }
    }
    ReplayReport { issues, checked, stale_images: stale }
}

/// Replays and, on success, hands out the certified set for `intersect_certify`.
pub fn certified_set(cert: &Certificate, k: &HomogeneousIfs, kp: &HomogeneousIfs, ratio_cap: u32) -> Result<CertifiedSet> {
    let report = replay(cert, k, kp, ratio_cap);
    if let Some(first) = report.issues.first() {
        return Err(Error::Mismatch(format!("replay failed: {}", first.detail)));
    }
    Ok(CertifiedSet { k: cert.perturbed.clone(), kp: cert.partner.clone(), set: cert.l.clone(), j: cert.j.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    #[test]
    fn j_is_clipped_largest_component() {
        let l = IntervalUnion::from_intervals(vec![(rat(-3, 2), rat(-1, 2)), (rat(1, 2), int(2))]);
        assert_eq!(certified_interval(&l, &rat(1, 2)), Some((rat(1, 2), int(1))));
        assert_eq!(certified_interval(&l, &int(1)), Some((int(-1), rat(-1, 2))));
        assert_eq!(certified_interval(&IntervalUnion::empty(), &int(1)), None);
        let far = IntervalUnion::interval(int(3), int(4));
        assert_eq!(certified_interval(&far, &int(1)), None);
    }
}
