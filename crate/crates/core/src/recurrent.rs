//! Letter partitions, the candidate recurrent set `L0` with its
//! thickenings, and the cross-check set `E`.
//!
//! Inputs are the half-ratio presentations: the depth-1 ratio is `r` and
//! the renormalization step uses depth-2 words, so the working scale is
//! `ρ = r²`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::configuration::ConfigSpace;
use crate::density::{scale_count, GoodPairTable};
use crate::error::{Error, Result};
use crate::ifs::{HomogeneousIfs, Word};
use crate::interval::IntervalUnion;
use crate::rational::{ceil_u64, format_rational, int, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "cross")]
    Cross,
    #[serde(rename = "self")]
    SelfDifference,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Cross => "cross",
            Mode::SelfDifference => "self",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cross" => Ok(Mode::Cross),
            "self" => Ok(Mode::SelfDifference),
            other => Err(Error::Format(format!("unknown mode {other:?} (expected cross or self)"))),
        }
    }
}

/// `A1` carries the perturbed first letters, `A2` the second letters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub a1: Vec<usize>,
    pub a2: Vec<usize>,
}

/// Sizes of the good-pair classes induced by a partition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PartitionCounts {
    pub good: usize,
    pub total: usize,
    /// `|G^(l)|` for cross mode, `|G^(lm)|` in row-major order for self mode.
    pub classes: Vec<usize>,
}

fn class_count(table: &GoodPairTable, first: &[usize], second: Option<&[usize]>) -> usize {
    let second: Option<BTreeSet<usize>> = second.map(|s| s.iter().copied().collect());
    first
        .iter()
        .map(|&a| {
            (0..table.letters.1).filter(|&ap| table.is_good(a, ap) && second.as_ref().is_none_or(|s| s.contains(&ap))).count()
        })
        .sum()
}

pub fn cross_counts(table: &GoodPairTable, p: &Partition) -> PartitionCounts {
    PartitionCounts {
        good: table.good_count(),
        total: table.total(),
        classes: vec![class_count(table, &p.a1, None), class_count(table, &p.a2, None)],
    }
}

pub fn self_counts(table: &GoodPairTable, p: &Partition) -> PartitionCounts {
    let sides = [&p.a1, &p.a2];
    let mut classes = Vec::with_capacity(4);
    for l in sides {
        for m in sides {
            classes.push(class_count(table, l, Some(m)));
        }
    }
    PartitionCounts { good: table.good_count(), total: table.total(), classes }
}

fn cross_ok(c: &PartitionCounts) -> bool {
    c.classes.iter().all(|&g| 3 * g >= c.good)
}

/// Disjoint `A1, A2` with no endmost letter in `A1` and
/// `|G^(l)| >= |G| / 3`. Greedy by good-pair degree first; for alphabets of
/// at most 16 letters an exhaustive search follows when greedy fails.
pub fn select_partitions(table: &GoodPairTable, k: &HomogeneousIfs) -> Result<Partition> {
    let n = k.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&a| (std::cmp::Reverse(table.degree(a)), a));
    let mut a1 = Vec::new();
    let mut a2 = Vec::new();
    let mut to_first = true;
    for a in order {
        if k.is_endmost(a) {
            a2.push(a);
        } else if to_first {
            a1.push(a);
            to_first = false;
        } else {
            a2.push(a);
            to_first = true;
        }
    }
    a1.sort_unstable();
    a2.sort_unstable();
    let greedy = Partition { a1, a2 };
    let counts = cross_counts(table, &greedy);
    if !greedy.a1.is_empty() && !greedy.a2.is_empty() && cross_ok(&counts) {
        return Ok(greedy);
    }
    let mut best: Option<(usize, Partition)> = None;
    if n <= 16 {
        let inner: Vec<usize> = (0..n).filter(|&a| !k.is_endmost(a)).collect();
        for mask in 1u32..(1u32 << inner.len()) {
            let a1: Vec<usize> = inner.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &a)| a).collect();
            let chosen: BTreeSet<usize> = a1.iter().copied().collect();
            let a2: Vec<usize> = (0..n).filter(|a| !chosen.contains(a)).collect();
            if a2.is_empty() {
                continue;
            }
            let p = Partition { a1, a2 };
            let c = cross_counts(table, &p);
            let score = c.classes[0].min(c.classes[1]);
            if cross_ok(&c) && best.as_ref().is_none_or(|(s, _)| score > *s) {
                best = Some((score, p));
            }
        }
    }
    match best {
        Some((_, p)) => Ok(p),
        None => Err(Error::Infeasible(format!(
            "no letter partition meets |G^(l)| >= |G|/3 (greedy reached {} and {} of {} good pairs)",
            counts.classes[0], counts.classes[1], counts.good
        ))),
    }
}

/// Self-difference split: `Ā = {a : |G_a| >= 3|A|/4}` halved, endmost
/// letters kept out of the first half. All four `|G^(lm)|` must reach
/// `3|B|/64`.
pub fn select_partitions_selfsum(table: &GoodPairTable, k: &HomogeneousIfs) -> Result<Partition> {
    let (good, total) = (table.good_count(), table.total());
    if 16 * good < 15 * total {
        return Err(Error::Precondition(format!("self-difference split needs |G| >= 15|B|/16, have {good} of {total}")));
    }
    let n = k.len();
    let heavy: Vec<usize> = (0..n).filter(|&a| 4 * table.degree(a) >= 3 * table.letters.1).collect();
    let half = heavy.len() / 2;
    let mut ordered: Vec<usize> = heavy.iter().copied().filter(|&a| !k.is_endmost(a)).collect();
    ordered.extend(heavy.iter().copied().filter(|&a| k.is_endmost(a)));
    let mut a1: Vec<usize> = ordered[..half].to_vec();
    let mut a2: Vec<usize> = ordered[half..].to_vec();
    a1.sort_unstable();
    a2.sort_unstable();
    let p = Partition { a1, a2 };
    if p.a1.is_empty() || p.a1.iter().any(|&a| k.is_endmost(a)) {
        return Err(Error::Infeasible(format!("{} heavy letters leave no endmost-free half", heavy.len())));
    }
    let c = self_counts(table, &p);
    if c.classes.iter().any(|&g| 64 * g < 3 * total) {
        return Err(Error::Infeasible(format!("class sizes {:?} fall below 3|B|/64 with |B| = {total}", c.classes)));
    }
    Ok(p)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FirstLetterWitness {
    pub a1: usize,
    pub pairs: Vec<(Word, Word)>,
}

/// A closed piece of `L0` on which the set of returning pairs is constant.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Elementary {
    #[serde(with = "crate::rational::serde_str")]
    pub lo: Rational,
    #[serde(with = "crate::rational::serde_str")]
    pub hi: Rational,
    pub witnesses: Vec<FirstLetterWitness>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RecurrentCandidate {
    pub mode: Mode,
    pub partition: Partition,
    /// Required number of distinct first letters.
    pub n: u64,
    #[serde(with = "crate::rational::serde_str")]
    pub raw_n: Rational,
    /// Depth-1 ratio `r` of the presentation.
    #[serde(with = "crate::rational::serde_str")]
    pub r: Rational,
    /// Working scale `ρ = r²`.
    #[serde(with = "crate::rational::serde_str")]
    pub rho: Rational,
    #[serde(with = "crate::rational::serde_str")]
    pub s0: Rational,
    pub l0: IntervalUnion,
    pub l1: IntervalUnion,
    pub l: IntervalUnion,
    pub elementary: Vec<Elementary>,
}

impl RecurrentCandidate {
    /// Elementary pieces within `radius` of `t`, nearest first.
    pub fn pieces_near(&self, t: &Rational, radius: &Rational) -> Vec<&Elementary> {
        let lo = t - radius;
        let hi = t + radius;
        let start = self.elementary.partition_point(|e| e.hi < lo);
        let mut out: Vec<&Elementary> = self.elementary[start..].iter().take_while(|e| e.lo <= hi).collect();
        let dist = |e: &Elementary| -> Rational {
            if &e.hi < t {
                t - &e.hi
            } else if &e.lo > t {
                &e.lo - t
            } else {
                Rational::zero()
            }
        };
        out.sort_by_key(|e| dist(e));
        out
    }
}

/// `N = ceil(c2² |A| |A'| r)`; a raw value below 1 is rejected.
pub fn threshold_n(space: &ConfigSpace, c2: &Rational) -> Result<(u64, Rational)> {
    let raw = c2 * c2 * scale_count(space);
    if raw < Rational::one() {
        return Err(Error::OutOfRange(format!(
            "N = c2^2 |A||A'| r = {} < 1: c2 is too small for this scale",
            format_rational(&raw)
        )));
    }
    Ok((ceil_u64(&raw).expect("N fits u64"), raw))
}

/// Word pairs `(b, b')` allowed as returns, first letter of `b` first.
pub fn admissible_pairs(space: &ConfigSpace, p: &Partition, mode: Mode) -> Vec<(Word, Word)> {
    let primes: Vec<usize> = match mode {
        Mode::Cross => (0..space.kp().len()).collect(),
        Mode::SelfDifference => p.a2.clone(),
    };
    let mut out = Vec::new();
    for &a1 in &p.a1 {
        for &a2 in &p.a2 {
            for &ap1 in &primes {
                for &ap2 in &primes {
                    out.push((Word(vec![a1, a2]), Word(vec![ap1, ap2])));
                }
            }
        }
    }
    out
}

/// One closed piece of a sweep with the indices of the intervals covering it.
struct Piece {
    lo: Rational,
    hi: Rational,
    active: Vec<usize>,
}

/// Splits the line at all endpoints and reports, for every event point and
/// every open gap between consecutive points, which closed intervals cover it.
fn sweep(intervals: &[(Rational, Rational)]) -> Vec<Piece> {
    let mut points: Vec<&Rational> = intervals.iter().flat_map(|(lo, hi)| [lo, hi]).collect();
    points.sort();
    points.dedup();
    let mut starts: Vec<usize> = (0..intervals.len()).collect();
    starts.sort_by(|&x, &y| intervals[x].0.cmp(&intervals[y].0));
    let mut ends = starts.clone();
    ends.sort_by(|&x, &y| intervals[x].1.cmp(&intervals[y].1));
    let (mut si, mut ei) = (0, 0);
    let mut active: BTreeSet<usize> = BTreeSet::new();
    let mut out = Vec::with_capacity(points.len() * 2);
    for (i, &p) in points.iter().enumerate() {
        while si < starts.len() && &intervals[starts[si]].0 == p {
            active.insert(starts[si]);
            si += 1;
        }
        out.push(Piece { lo: p.clone(), hi: p.clone(), active: active.iter().copied().collect() });
        while ei < ends.len() && &intervals[ends[ei]].1 == p {
            active.remove(&ends[ei]);
            ei += 1;
        }
        if let Some(&next) = points.get(i + 1) {
            out.push(Piece { lo: p.clone(), hi: next.clone(), active: active.iter().copied().collect() });
        }
    }
    out
}

/// Keeps qualifying open gaps as closed pieces and qualifying event points
/// only when no adjacent gap already contains them.
fn qualifying<F: Fn(&[usize]) -> bool>(pieces: Vec<Piece>, ok: F) -> Vec<Piece> {
    let flags: Vec<bool> = pieces.iter().map(|p| ok(&p.active)).collect();
    let mut out = Vec::new();
    for (i, piece) in pieces.into_iter().enumerate() {
        if !flags[i] {
            continue;
        }
        let is_point = piece.lo == piece.hi;
        if is_point {
            let left = i > 0 && flags[i - 1];
            let right = flags.get(i + 1).copied().unwrap_or(false);
            if left || right {
                continue;
            }
        }
        out.push(piece);
    }
    out
}

/// Return interval of `(b, b')`: `|T_b T'_{b'} t| <= 1 + s0` exactly when
/// `|t - (e_b - e'_{b'})| <= (1 + s0) ρ`.
pub fn return_interval(space: &ConfigSpace, b: &Word, bp: &Word) -> (Rational, Rational) {
    let rho = space.ratio() * space.ratio();
    let c = space.k().word_offset(&b.0) - space.kp().word_offset(&bp.0);
    let reach = (Rational::one() + space.s0()) * rho;
    (&c - &reach, c + reach)
}

/// `L0 = {t : at least N distinct first letters a1 have a returning pair}`
/// as an exact union of elementary pieces, with its `ρ`- and
/// `ρ/2`-neighborhoods.
pub fn build_l0(space: &ConfigSpace, partition: &Partition, c2: &Rational, mode: Mode) -> Result<RecurrentCandidate> {
    if partition.a1.iter().any(|a| partition.a2.contains(a)) {
        return Err(Error::Precondition("A1 and A2 intersect".into()));
    }
    if mode == Mode::SelfDifference && space.k() != space.kp() {
        return Err(Error::Precondition("self mode needs the same set on both sides".into()));
    }
    let (n, raw_n) = threshold_n(space, c2)?;
    let r = space.ratio().clone();
    let rho = &r * &r;
    let s0 = space.s0().clone();
    let pairs = admissible_pairs(space, partition, mode);
    let intervals: Vec<(Rational, Rational)> = pairs.par_iter().map(|(b, bp)| return_interval(space, b, bp)).collect();
    let pieces = sweep(&intervals);
    let distinct = |active: &[usize]| -> usize { active.iter().map(|&i| pairs[i].0 .0[0]).collect::<BTreeSet<_>>().len() };
    let kept = qualifying(pieces, |active| distinct(active) as u64 >= n);
    let elementary: Vec<Elementary> = kept
        .into_iter()
        .map(|piece| {
            let mut grouped: BTreeMap<usize, Vec<(Word, Word)>> = BTreeMap::new();
            for i in piece.active {
                grouped.entry(pairs[i].0 .0[0]).or_default().push(pairs[i].clone());
            }
            Elementary {
                lo: piece.lo,
                hi: piece.hi,
                witnesses: grouped.into_iter().map(|(a1, pairs)| FirstLetterWitness { a1, pairs }).collect(),
            }
        })
        .collect();
    // every return interval sits in [-s0 - ρ, 1 + s0 ρ], strictly inside
    // (-(1 + s0), 1 + s0) for ρ < 1, so the outer bound never removes points
    let bound = Rational::one() + &s0;
    let l0 = IntervalUnion::from_intervals(elementary.iter().map(|e| (e.lo.clone(), e.hi.clone()))).clip(&-bound.clone(), &bound);
    let l1 = l0.neighborhood(&rho);
    let l = l0.neighborhood(&(&rho / int(2)));
    Ok(RecurrentCandidate { mode, partition: partition.clone(), n, raw_n, r, rho, s0, l0, l1, l, elementary })
}

/// Pointwise form of the `L0` condition, for grid oracles.
pub fn l0_condition(space: &ConfigSpace, partition: &Partition, mode: Mode, n: u64, t: &Rational) -> bool {
    L0Oracle::new(space, partition, mode, n).holds(t)
}

/// `l0_condition` with the word shifts computed once.
pub struct L0Oracle {
    /// `(first letter, e'_{b'} - e_b)` per admissible pair.
    shifts: Vec<(usize, Rational)>,
    /// `(1 + s0) ρ^2`, i.e. the bound pulled back through the word map.
    reach: Rational,
    n: u64,
}

impl L0Oracle {
    pub fn new(space: &ConfigSpace, partition: &Partition, mode: Mode, n: u64) -> Self {
        let shifts = admissible_pairs(space, partition, mode)
            .into_iter()
            .map(|(b, bp)| (b.0[0], space.word_shift(&b.0, &bp.0).expect("depth-2 words")))
            .collect();
        let reach = (Rational::one() + space.s0()) * crate::rational::pow(space.ratio(), 2);
        L0Oracle { shifts, reach, n }
    }

    pub fn holds(&self, t: &Rational) -> bool {
        let mut firsts = BTreeSet::new();
        for (a1, shift) in &self.shifts {
            if firsts.contains(a1) {
                continue;
            }
            let v = t + shift;
            if v <= self.reach && -v <= self.reach {
                firsts.insert(*a1);
                if firsts.len() as u64 >= self.n {
                    return true;
                }
            }
        }
        false
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EReport {
    pub e: IntervalUnion,
    /// `c2² |A| |A'| r`.
    #[serde(with = "crate::rational::serde_str")]
    pub threshold: Rational,
    #[serde(with = "crate::rational::serde_str")]
    pub phi0_integral: Rational,
    /// `Σ |J0(a1, a1')|` over the first good class.
    #[serde(with = "crate::rational::serde_str")]
    pub j0_total: Rational,
    #[serde(with = "crate::rational::serde_str")]
    pub j0_min: Rational,
    pub phi0_max: usize,
    pub g1: usize,
    /// Lower bound on `|E|` from the integral chain, with the self-excluding
    /// neighbor count bounding `φ0` by `c2^-1 |A||A'| r + 1`.
    #[serde(with = "crate::rational::serde_str")]
    pub chain_bound: Rational,
}

/// `E = {φ0 >= c2² |A||A'| r}` where `φ0` sums the indicators of
/// `J0(a1, a1') = ∪_{(a2, a2') ∈ G2} π(I(a1 a2) × I'(a1' a2'))` over `(a1, a1') ∈ G1`.
pub fn build_e(space: &ConfigSpace, table: &GoodPairTable, partition: &Partition, c2: &Rational) -> EReport {
    let rho = space.ratio() * space.ratio();
    let s0 = space.s0().clone();
    let in_a1: BTreeSet<usize> = partition.a1.iter().copied().collect();
    let in_a2: BTreeSet<usize> = partition.a2.iter().copied().collect();
    let g1: Vec<(usize, usize)> = table.entries.iter().filter(|e| e.good && in_a1.contains(&e.a)).map(|e| (e.a, e.ap)).collect();
    let g2: Vec<(usize, usize)> = table.entries.iter().filter(|e| e.good && in_a2.contains(&e.a)).map(|e| (e.a, e.ap)).collect();
    let j0: Vec<IntervalUnion> = g1
        .par_iter()
        .map(|&(a1, ap1)| {
            IntervalUnion::from_intervals(g2.iter().map(|&(a2, ap2)| {
                let c = space.k().word_offset(&[a1, a2]) - space.kp().word_offset(&[ap1, ap2]);
                (&c - &s0 * &rho, c + &rho)
            }))
        })
        .collect();
    let j0_total = j0.iter().fold(Rational::zero(), |acc, u| acc + u.measure());
    let j0_min = j0.iter().map(|u| u.measure()).min().unwrap_or_else(Rational::zero);
    let intervals: Vec<(Rational, Rational)> = j0.iter().flat_map(|u| u.components().iter().cloned()).collect();
    let threshold = c2 * c2 * scale_count(space);
    let pieces = sweep(&intervals);
    let mut phi0_integral = Rational::zero();
    let mut phi0_max = 0;
    for p in &pieces {
        phi0_max = phi0_max.max(p.active.len());
        phi0_integral += int(p.active.len() as i64) * (&p.hi - &p.lo);
    }
    let kept = qualifying(pieces, |active| int(active.len() as i64) >= threshold);
    let e = IntervalUnion::from_intervals(kept.into_iter().map(|p| (p.lo, p.hi)));
    let x = scale_count(space);
    let phi_cap = &x / c2 + Rational::one();
    let chain_bound = (&phi0_integral - int(2) * (Rational::one() + &s0) * c2 * c2 * &x) / phi_cap;
    EReport { e, threshold, phi0_integral, j0_total, j0_min, phi0_max, g1: g1.len(), chain_bound }
}
