//! The difference measure `μ_{K,K'}`: exact histograms at cylinder scales,
//! an L² stability proxy, and the good/bad classification of cylinder pairs.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::configuration::ConfigSpace;
use crate::error::{Error, Result};
use crate::ifs::HomogeneousIfs;
use crate::interval::IntervalUnion;
use crate::rational::{floor_i64, int, pow, rat, Rational};

pub const DEFAULT_PAIR_CAP: u128 = 1 << 32;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DensityHistogram {
    pub depth: usize,
    /// Bin width `(1 + s0) ρ^n`.
    pub scale: Rational,
    /// Left edge of bin 0, `-s0`.
    pub origin: Rational,
    /// Right end of the support, `1`; the last bin is cut there.
    pub end: Rational,
    pub bins: BTreeMap<i64, Rational>,
}

impl DensityHistogram {
    pub fn total_mass(&self) -> Rational {
        self.bins.values().fold(Rational::zero(), |acc, m| acc + m)
    }

    pub fn bin_center(&self, k: i64) -> Rational {
        let (lo, hi) = self.bin_interval(k);
        (lo + hi) / int(2)
    }

    pub fn bin_interval(&self, k: i64) -> (Rational, Rational) {
        let lo = &self.origin + int(k) * &self.scale;
        let hi = &lo + &self.scale;
        let hi = if hi > self.end { self.end.clone() } else { hi };
        (lo, hi)
    }

    pub fn bin_width(&self, k: i64) -> Rational {
        let (lo, hi) = self.bin_interval(k);
        hi - lo
    }

    /// Riemann value of `‖χ_n‖²`: `Σ (m / w)² w`.
    pub fn l2_norm_sq(&self) -> Rational {
        self.bins.iter().fold(Rational::zero(), |acc, (&k, m)| acc + m * m / self.bin_width(k))
    }

    /// `∫_lo^hi` of the binned density.
    pub fn integral(&self, lo: &Rational, hi: &Rational) -> Rational {
        let mut acc = Rational::zero();
        for (&k, m) in &self.bins {
            let (blo, bhi) = self.bin_interval(k);
            let l = if &blo > lo { blo } else { lo.clone() };
            let h = if &bhi < hi { bhi } else { hi.clone() };
            if l < h {
                acc += m * (h - l) / self.bin_width(k);
            }
        }
        acc
    }
}

/// Multiset `{e_w - e'_{w'} : |w| = |w'| = n}` with multiplicities.
pub fn difference_offsets(space: &ConfigSpace, n: usize, cap: u128) -> Result<HashMap<Rational, u128>> {
    let pairs = pair_count(space.k(), space.kp(), n);
    if pairs.is_none_or(|p| p > cap) {
        return Err(Error::CapExceeded { what: "cylinder pair", count: pairs.unwrap_or(u128::MAX), cap });
    }
    let mut level: HashMap<Rational, u128> = HashMap::new();
    for e in space.k().offsets() {
        for ep in space.kp().offsets() {
            *level.entry(e - ep).or_insert(0) += 1;
        }
    }
    let mut out: HashMap<Rational, u128> = HashMap::from([(Rational::zero(), 1)]);
    let mut scale = Rational::one();
    for _ in 0..n {
        let mut next = HashMap::with_capacity(out.len() * level.len());
        for (d, c) in &out {
            for (d1, c1) in &level {
                *next.entry(d + &scale * d1).or_insert(0) += c * c1;
            }
        }
        out = next;
        scale *= space.ratio();
    }
    Ok(out)
}

fn pair_count(k: &HomogeneousIfs, kp: &HomogeneousIfs, n: usize) -> Option<u128> {
    let base = (k.len() as u128).checked_mul(kp.len() as u128)?;
    base.checked_pow(n as u32)
}

/// Each depth-`n` cylinder pair carries mass `|A|^-n |A'|^-n` spread
/// uniformly over its difference interval `[d - s0 ρ^n, d + ρ^n]`.
pub fn pushforward_histogram(space: &ConfigSpace, n: usize, cap: u128) -> Result<DensityHistogram> {
    let offsets = difference_offsets(space, n, cap)?;
    let rho_n = pow(space.ratio(), n as i32);
    let s0 = space.s0().clone();
    let width = (Rational::one() + &s0) * &rho_n;
    let origin = -s0.clone();
    let total = Rational::from_integer(BigInt::from(pair_count(space.k(), space.kp(), n).unwrap()));
    let mut bins: BTreeMap<i64, Rational> = BTreeMap::new();
    for (d, c) in offsets {
        let mass = Rational::from_integer(BigInt::from(c)) / &total;
        let pos = (&d - &s0 * &rho_n - &origin) / &width;
        let k = floor_i64(&pos).expect("bin index fits i64");
        let frac = &pos - int(k);
        if frac.is_zero() {
            *bins.entry(k).or_insert_with(Rational::zero) += mass;
        } else {
            *bins.entry(k).or_insert_with(Rational::zero) += &mass * (Rational::one() - &frac);
            *bins.entry(k + 1).or_insert_with(Rational::zero) += mass * frac;
        }
    }
    Ok(DensityHistogram { depth: n, scale: width, origin, end: Rational::one(), bins })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum L2Verdict {
    Bounded,
    Growing,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct L2Report {
    pub estimates: Vec<Rational>,
    pub verdict: L2Verdict,
}

pub fn l2_estimate(histograms: &[DensityHistogram]) -> Result<L2Report> {
    l2_estimate_with_tolerance(histograms, &rat(1, 10))
}

/// `Bounded` when the last consecutive ratio of estimates is at most `1 + tolerance`.
pub fn l2_estimate_with_tolerance(histograms: &[DensityHistogram], tolerance: &Rational) -> Result<L2Report> {
    if histograms.len() < 3 {
        return Err(Error::Precondition(format!("L2 stability needs at least 3 depths, got {}", histograms.len())));
    }
    let estimates: Vec<Rational> = histograms.iter().map(|h| h.l2_norm_sq()).collect();
    let n = estimates.len();
    let ratio = &estimates[n - 1] / &estimates[n - 2];
    let verdict = if ratio <= Rational::one() + tolerance { L2Verdict::Bounded } else { L2Verdict::Growing };
    Ok(L2Report { estimates, verdict })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairEntry {
    pub a: usize,
    pub ap: usize,
    /// Center of `J(a, a') = [e_a - e'_{a'} - s0 r, e_a - e'_{a'} + r]`.
    pub center: Rational,
    pub neighbors: usize,
    pub good: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GoodPairTable {
    /// Ordered by `(a, a')`.
    pub entries: Vec<PairEntry>,
    /// Largest neighbor count a good pair may have: `c2^-1 |A| |A'| r`.
    pub threshold: Rational,
    pub ratio: Rational,
    pub s0: Rational,
    pub letters: (usize, usize),
}

impl GoodPairTable {
    pub fn total(&self) -> usize {
        self.entries.len()
    }

    pub fn good_count(&self) -> usize {
        self.entries.iter().filter(|e| e.good).count()
    }

    pub fn is_good(&self, a: usize, ap: usize) -> bool {
        self.entries[a * self.letters.1 + ap].good
    }

    /// `|G_a|`: good pairs whose first letter is `a`.
    pub fn degree(&self, a: usize) -> usize {
        (0..self.letters.1).filter(|&ap| self.is_good(a, ap)).count()
    }

    pub fn j_length(&self) -> Rational {
        (Rational::one() + &self.s0) * &self.ratio
    }

    pub fn j_interval(&self, e: &PairEntry) -> (Rational, Rational) {
        let half = self.j_length() / int(2);
        (&e.center - &half, &e.center + half)
    }

    /// Union of `J(a, a')` over good pairs.
    pub fn good_union(&self) -> IntervalUnion {
        IntervalUnion::from_intervals(self.entries.iter().filter(|e| e.good).map(|e| self.j_interval(e)))
    }
}

/// `ρ^{-(d + d' - 1)/2}` in the half-ratio convention, i.e. `|A| |A'| r`.
pub fn scale_count(space: &ConfigSpace) -> Rational {
    int((space.k().len() * space.kp().len()) as i64) * space.ratio()
}

/// A pair is good when at most `c2^-1 |A| |A'| r` other pairs have centers
/// strictly closer than `(1 + s0) r`.
pub fn classify_pairs(space: &ConfigSpace, c2: &Rational) -> GoodPairTable {
    let r = space.ratio().clone();
    let s0 = space.s0().clone();
    let (n, np) = (space.k().len(), space.kp().len());
    let shift = (Rational::one() - &s0) * &r / int(2);
    let centers: Vec<Rational> = (0..n * np).map(|i| space.k().offset(i / np) - space.kp().offset(i % np) + &shift).collect();
    let mut sorted = centers.clone();
    sorted.sort();
    let reach = (Rational::one() + &s0) * &r;
    let threshold = scale_count(space) / c2;
    let entries = centers
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let lo = c - &reach;
            let hi = c + &reach;
            let first = sorted.partition_point(|x| *x <= lo);
            let last = sorted.partition_point(|x| *x < hi);
            let neighbors = last - first - 1;
            PairEntry { a: i / np, ap: i % np, center: c.clone(), neighbors, good: int(neighbors as i64) <= threshold }
        })
        .collect();
    GoodPairTable { entries, threshold, ratio: r, s0, letters: (n, np) }
}

/// `μ_1([lo, hi])` for the depth-1 step density: every pair spreads mass
/// `1 / (|A| |A'|)` uniformly over its `J(a, a')`.
pub fn depth_one_mass(table: &GoodPairTable, lo: &Rational, hi: &Rational) -> Rational {
    let len = table.j_length();
    let mass = Rational::one() / int(table.total() as i64);
    let mut acc = Rational::zero();
    for e in &table.entries {
        let (jlo, jhi) = table.j_interval(e);
        let l = if &jlo > lo { jlo } else { lo.clone() };
        let h = if &jhi < hi { jhi } else { hi.clone() };
        if l < h {
            acc += (h - l) / &len;
        }
    }
    acc * mass
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MassReport {
    #[serde(with = "crate::rational::serde_str")]
    pub pair_mass: Rational,
    /// `ρ^{(d + d')/2}` evaluated exactly through the exponent form of the dimensions.
    #[serde(with = "crate::rational::serde_str")]
    pub rho_power: Rational,
    #[serde(with = "crate::rational::serde_str")]
    pub c4: Rational,
}

/// Compares the per-pair mass with `ρ^{(d+d')/2}`; for uniform homogeneous
/// measures both equal `1 / (|A| |A'|)`.
pub fn measure_bounds_check(space: &ConfigSpace) -> MassReport {
    let pair_mass = Rational::one() / int((space.k().len() * space.kp().len()) as i64);
    let rho_power = exact_rho_power(space.k()) * exact_rho_power(space.kp());
    let c4 = if pair_mass >= rho_power { &pair_mass / &rho_power } else { &rho_power / &pair_mass };
    MassReport { pair_mass, rho_power, c4 }
}

/// `r^d` with `d = log M / log R` and `1/r = R^k`: equals `M^-k`.
fn exact_rho_power(ifs: &HomogeneousIfs) -> Rational {
    let dim = ifs.dimension();
    let inv = ifs.ratio().recip();
    if dim.inv_ratio.is_one() {
        return Rational::one();
    }
    let mut k = 0i32;
    let mut acc = Rational::one();
    while acc < inv {
        acc *= &dim.inv_ratio;
        k += 1;
    }
    debug_assert_eq!(acc, inv);
    pow(&Rational::from_integer(dim.count.clone()), -k)
}

/// Bin centers and masses, for CSV export.
pub fn histogram_rows(h: &DensityHistogram) -> Vec<(Rational, Rational)> {
    h.bins.iter().map(|(&k, m)| (h.bin_center(k), m.clone())).collect()
}

/// Nonnegative masses, support inside `[-s0, 1]`, total mass exactly 1.
pub fn histogram_is_well_formed(h: &DensityHistogram, s0: &Rational) -> bool {
    let nonneg = h.bins.values().all(|m| !m.is_negative());
    let inside = h.bins.keys().all(|&k| {
        let (lo, hi) = h.bin_interval(k);
        lo >= -s0.clone() && hi <= Rational::one()
    });
    nonneg && inside && h.total_mass().is_one()
}
