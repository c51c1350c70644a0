//! Homogeneous Cantor sets given by an exact affine IFS.
//!
//! Every map is `f_a(x) = ratio * x + offset[a]` acting on the hull `[0, hull]`;
//! the cylinder of `a` is `I(a) = [offset[a], offset[a] + ratio * hull]`.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{format_rational, int, pow, to_f64, Rational};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HomogeneousIfs {
    labels: Vec<String>,
    ratio: Rational,
    offsets: Vec<Rational>,
    hull: Rational,
}

/// A finite word over an alphabet, stored as letter indices.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Word(pub Vec<usize>);

impl Word {
    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn letters(&self) -> &[usize] {
        &self.0
    }

    pub fn first(&self) -> Option<usize> {
        self.0.first().copied()
    }

    pub fn push(&mut self, letter: usize) {
        self.0.push(letter);
    }

    pub fn render(&self, ifs: &HomogeneousIfs) -> String {
        self.0.iter().map(|&a| ifs.labels[a].as_str()).collect::<Vec<_>>().join(".")
    }
}

impl From<Vec<usize>> for Word {
    fn from(v: Vec<usize>) -> Self {
        Word(v)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    EmptyAlphabet,
    LengthMismatch { labels: usize, offsets: usize },
    DuplicateLabel(String),
    RatioOutOfRange(String),
    NonPositiveHull(String),
    TooManyLetters { letters: usize, ratio: String },
    Overlap { left: String, right: String },
    OutsideHull(String),
    LeftEndMismatch { label: String, offset: String },
    RightEndMismatch { label: String, end: String, hull: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyAlphabet => write!(f, "alphabet is empty"),
            Violation::LengthMismatch { labels, offsets } => {
                write!(f, "{labels} labels but {offsets} offsets")
            }
            Violation::DuplicateLabel(l) => write!(f, "duplicate label {l:?}"),
            Violation::RatioOutOfRange(r) => write!(f, "ratio {r} not in (0, 1)"),
            Violation::NonPositiveHull(s) => write!(f, "hull length {s} is not positive"),
            Violation::TooManyLetters { letters, ratio } => {
                write!(f, "{letters} letters with ratio {ratio}: |A| * ratio >= 1")
            }
            Violation::Overlap { left, right } => {
                write!(f, "cylinders {left:?} and {right:?} intersect")
            }
            Violation::OutsideHull(l) => write!(f, "cylinder {l:?} leaves the hull"),
            Violation::LeftEndMismatch { label, offset } => {
                write!(f, "leftmost cylinder {label:?} starts at {offset}, not 0")
            }
            Violation::RightEndMismatch { label, end, hull } => {
                write!(f, "rightmost cylinder {label:?} ends at {end}, hull is {hull}")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "ok");
        }
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// Hausdorff dimension `log(count) / log(inv_ratio)` kept in primitive exponent
/// form: `(count, inv_ratio)` is never a common perfect power, so equal
/// dimensions of an IFS and its refinements compare equal exactly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dimension {
    pub count: BigInt,
    pub inv_ratio: Rational,
}

impl Dimension {
    pub fn new(count: BigInt, inv_ratio: Rational) -> Self {
        let mut count = count;
        let mut inv_ratio = inv_ratio;
        let bits = count.bits() as u32;
        let mut k = bits.max(1);
        while k >= 2 {
            let c = Rational::from_integer(count.clone());
            if let (Some(cr), Some(rr)) = (crate::rational::integer_root(&c, k), crate::rational::integer_root(&inv_ratio, k)) {
                count = cr.to_integer();
                inv_ratio = rr;
                k = (count.bits() as u32).max(1);
                continue;
            }
            k -= 1;
        }
        Dimension { count, inv_ratio }
    }

    pub fn value(&self) -> f64 {
        let c = to_f64(&Rational::from_integer(self.count.clone()));
        c.ln() / to_f64(&self.inv_ratio).ln()
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "log {} / log {}", self.count, format_rational(&self.inv_ratio))
    }
}

impl HomogeneousIfs {
    /// Builds an IFS without geometric validation; see [`HomogeneousIfs::validate`].
    pub fn new(labels: Vec<String>, ratio: Rational, offsets: Vec<Rational>, hull: Rational) -> Self {
        HomogeneousIfs { labels, ratio, offsets, hull }
    }

    /// Labels `"0"`, `"1"`, ... in offset order.
    pub fn from_offsets(ratio: Rational, offsets: Vec<Rational>, hull: Rational) -> Self {
        let labels = (0..offsets.len()).map(|i| i.to_string()).collect();
        Self::new(labels, ratio, offsets, hull)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn ratio(&self) -> &Rational {
        &self.ratio
    }

    pub fn offsets(&self) -> &[Rational] {
        &self.offsets
    }

    pub fn offset(&self, a: usize) -> &Rational {
        &self.offsets[a]
    }

    pub fn hull(&self) -> &Rational {
        &self.hull
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.labels.iter().position(|l| l == label).ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    /// Length of every depth-1 cylinder, `ratio * hull`.
    pub fn cylinder_len(&self) -> Rational {
        &self.ratio * &self.hull
    }

    pub fn cylinder(&self, a: usize) -> (Rational, Rational) {
        let lo = self.offsets[a].clone();
        let hi = &lo + self.cylinder_len();
        (lo, hi)
    }

    /// Left endpoint of `I(w) = f_{w1} ∘ ... ∘ f_{wn}([0, hull])`.
    pub fn word_offset(&self, word: &[usize]) -> Rational {
        let mut acc = Rational::zero();
        let mut scale = Rational::one();
        for &a in word {
            acc += &scale * &self.offsets[a];
            scale *= &self.ratio;
        }
        acc
    }

    /// Letter indices sorted by cylinder position.
    pub fn positional_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&x, &y| self.offsets[x].cmp(&self.offsets[y]).then(x.cmp(&y)));
        order
    }

    /// The leftmost and rightmost letters.
    pub fn endmost(&self) -> (usize, usize) {
        let order = self.positional_order();
        (order[0], order[order.len() - 1])
    }

    pub fn is_endmost(&self, a: usize) -> bool {
        let (l, r) = self.endmost();
        a == l || a == r
    }

    pub fn dimension(&self) -> Dimension {
        Dimension::new(BigInt::from(self.len()), self.ratio.recip())
    }

    /// The same set scaled by `factor > 0` (hull and offsets scale, ratio does not).
    pub fn scaled(&self, factor: &Rational) -> Self {
        HomogeneousIfs {
            labels: self.labels.clone(),
            ratio: self.ratio.clone(),
            offsets: self.offsets.iter().map(|e| e * factor).collect(),
            hull: &self.hull * factor,
        }
    }

    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        if self.offsets.is_empty() {
            violations.push(Violation::EmptyAlphabet);
            return ValidationReport { violations };
        }
        if self.labels.len() != self.offsets.len() {
            violations.push(Violation::LengthMismatch { labels: self.labels.len(), offsets: self.offsets.len() });
            return ValidationReport { violations };
        }
        let mut seen = HashSet::new();
        for l in &self.labels {
            if !seen.insert(l) {
                violations.push(Violation::DuplicateLabel(l.clone()));
            }
        }
        if !self.ratio.is_positive() || self.ratio >= Rational::one() {
            violations.push(Violation::RatioOutOfRange(format_rational(&self.ratio)));
        }
        if !self.hull.is_positive() {
            violations.push(Violation::NonPositiveHull(format_rational(&self.hull)));
            return ValidationReport { violations };
        }
        if int(self.len() as i64) * &self.ratio >= Rational::one() {
            violations.push(Violation::TooManyLetters { letters: self.len(), ratio: format_rational(&self.ratio) });
        }
        let order = self.positional_order();
        for w in order.windows(2) {
            let (_, hi) = self.cylinder(w[0]);
            let (lo, _) = self.cylinder(w[1]);
            if hi >= lo {
                violations.push(Violation::Overlap { left: self.labels[w[0]].clone(), right: self.labels[w[1]].clone() });
            }
        }
        for &a in &order {
            let (lo, hi) = self.cylinder(a);
            if lo.is_negative() || hi > self.hull {
                violations.push(Violation::OutsideHull(self.labels[a].clone()));
            }
        }
        let first = order[0];
        if !self.offsets[first].is_zero() {
            violations.push(Violation::LeftEndMismatch {
                label: self.labels[first].clone(),
                offset: format_rational(&self.offsets[first]),
            });
        }
        let last = order[order.len() - 1];
        let (_, end) = self.cylinder(last);
        if end != self.hull {
            violations.push(Violation::RightEndMismatch {
                label: self.labels[last].clone(),
                end: format_rational(&end),
                hull: format_rational(&self.hull),
            });
        }
        ValidationReport { violations }
    }

    pub fn validated(self) -> Result<Self> {
        let report = self.validate();
        if report.is_ok() {
            Ok(self)
        } else {
            Err(Error::InvalidIfs(report))
        }
    }
}

/// The middle-α Cantor set `C_a` on `[0, 1]` with `a = (1 - α) / 2`.
pub fn middle_alpha(a: &Rational) -> Result<HomogeneousIfs> {
    if !a.is_positive() || *a >= crate::rational::rat(1, 2) {
        return Err(Error::OutOfRange(format!("middle-alpha parameter {} not in (0, 1/2)", format_rational(a))));
    }
    Ok(HomogeneousIfs::from_offsets(a.clone(), vec![Rational::zero(), Rational::one() - a], Rational::one()))
}

/// Presentation of the same set by all compositions of `n` maps.
pub fn refine(ifs: &HomogeneousIfs, n: usize) -> Result<HomogeneousIfs> {
    if n == 0 {
        return Err(Error::ZeroRefinement);
    }
    let mut labels = ifs.labels.clone();
    let mut offsets = ifs.offsets.clone();
    let mut scale = ifs.ratio.clone();
    for _ in 1..n {
        let mut next_labels = Vec::with_capacity(labels.len() * ifs.len());
        let mut next_offsets = Vec::with_capacity(offsets.len() * ifs.len());
        for (label, offset) in labels.iter().zip(&offsets) {
            for (l, e) in ifs.labels.iter().zip(&ifs.offsets) {
                next_labels.push(format!("{label}{l}"));
                next_offsets.push(offset + &scale * e);
            }
        }
        labels = next_labels;
        offsets = next_offsets;
        scale *= &ifs.ratio;
    }
    Ok(HomogeneousIfs { labels, ratio: scale, offsets, hull: ifs.hull.clone() })
}

/// Refines both presentations to a shared ratio `λ^q = λ'^p` with `p, q <= cap`.
pub fn common_ratio(first: &HomogeneousIfs, second: &HomogeneousIfs, cap: u32) -> Result<(HomogeneousIfs, HomogeneousIfs)> {
    for q in 1..=cap {
        let lhs = pow(&first.ratio, q as i32);
        for p in 1..=cap {
            let rhs = pow(&second.ratio, p as i32);
            if lhs == rhs {
                return Ok((refine(first, q as usize)?, refine(second, p as usize)?));
            }
            if rhs < lhs {
                break;
            }
        }
    }
    Err(Error::Incommensurable(format_rational(&first.ratio), format_rational(&second.ratio), cap))
}

/// Shifts `I(a)` by `c0 * ratio * ω(a) * hull` for every `a` in the support of `omega`.
pub fn perturb(ifs: &HomogeneousIfs, omega: &BTreeMap<usize, Rational>, c0: &Rational) -> Result<HomogeneousIfs> {
    perturb_with_amplitude(ifs, omega, &(c0 * &ifs.ratio))
}

/// Shifts `I(a)` by `amplitude * ω(a) * hull`. The perturbation search uses
/// `amplitude = c0 * r^2` for a depth-1 ratio `r`.
pub fn perturb_with_amplitude(
    ifs: &HomogeneousIfs,
    omega: &BTreeMap<usize, Rational>,
    amplitude: &Rational,
) -> Result<HomogeneousIfs> {
    let bound = Rational::one();
    let mut out = ifs.clone();
    for (&a, w) in omega {
        if a >= ifs.len() {
            return Err(Error::UnknownLabel(a.to_string()));
        }
        if ifs.is_endmost(a) {
            return Err(Error::EndmostPerturbed(ifs.labels[a].clone()));
        }
        if w.abs() > bound {
            return Err(Error::PerturbationRange(format_rational(w)));
        }
        out.offsets[a] = &ifs.offsets[a] + amplitude * w * &ifs.hull;
    }
    // name the moved cylinder first, then whatever it hits in the original order
    let order = ifs.positional_order();
    for &a in omega.keys() {
        let (lo, hi) = out.cylinder(a);
        for &b in &order {
            if b == a {
                continue;
            }
            let (blo, bhi) = out.cylinder(b);
            if lo <= bhi && blo <= hi {
                return Err(Error::PerturbationCollision(ifs.labels[a].clone(), ifs.labels[b].clone()));
            }
        }
    }
    let report = out.validate();
    if let Some(v) = report.violations.into_iter().next() {
        return Err(match v {
            Violation::Overlap { left, right } => Error::PerturbationCollision(left, right),
            other => Error::InvalidIfs(ValidationReport { violations: vec![other] }),
        });
    }
    Ok(out)
}

/// `max_a Δ(I(a), Ĩ(a))`, or `None` when hulls, alphabets or cylinder
/// lengths differ.
pub fn closeness(first: &HomogeneousIfs, second: &HomogeneousIfs) -> Option<Rational> {
    if first.hull != second.hull || first.labels != second.labels || first.cylinder_len() != second.cylinder_len() {
        return None;
    }
    let len = first.cylinder_len();
    first.offsets.iter().zip(&second.offsets).map(|(x, y)| (x - y).abs() / &len).max()
}
