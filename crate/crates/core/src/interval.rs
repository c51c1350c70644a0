//! Finite unions of closed intervals with exact rational endpoints.

use num_traits::Zero;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::rational::{format_rational, parse_rational, Rational};

/// Sorted, pairwise disjoint closed intervals. Touching intervals are merged;
/// single points `[p, p]` are allowed.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct IntervalUnion {
    parts: Vec<(Rational, Rational)>,
}

impl IntervalUnion {
    pub fn empty() -> Self {
        IntervalUnion { parts: Vec::new() }
    }

    pub fn interval(lo: Rational, hi: Rational) -> Self {
        Self::from_intervals(vec![(lo, hi)])
    }

    /// Normalizes arbitrary closed intervals; pairs with `lo > hi` are dropped.
    pub fn from_intervals<I>(intervals: I) -> Self
    where
        I: IntoIterator<Item = (Rational, Rational)>,
    {
        let mut v: Vec<(Rational, Rational)> = intervals.into_iter().filter(|(lo, hi)| lo <= hi).collect();
        v.sort();
        let mut parts: Vec<(Rational, Rational)> = Vec::with_capacity(v.len());
        for (lo, hi) in v {
            match parts.last_mut() {
                Some(last) if lo <= last.1 => {
                    if hi > last.1 {
                        last.1 = hi;
                    }
                }
                _ => parts.push((lo, hi)),
            }
        }
        IntervalUnion { parts }
    }

    /// Checks the stored representation; used when reading untrusted files.
    pub fn from_sorted(parts: Vec<(Rational, Rational)>) -> Result<Self> {
        for p in &parts {
            if p.0 > p.1 {
                return Err(Error::Format(format!(
                    "interval [{}, {}] is reversed",
                    format_rational(&p.0),
                    format_rational(&p.1)
                )));
            }
        }
        for w in parts.windows(2) {
            if w[0].1 >= w[1].0 {
                return Err(Error::Format("intervals are not sorted and disjoint".into()));
            }
        }
        Ok(IntervalUnion { parts })
    }

    pub fn components(&self) -> &[(Rational, Rational)] {
        &self.parts
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn measure(&self) -> Rational {
        self.parts.iter().fold(Rational::zero(), |acc, (lo, hi)| acc + (hi - lo))
    }

    /// Index of the component containing `t`.
    pub fn component_of(&self, t: &Rational) -> Option<usize> {
        let idx = self.parts.partition_point(|(lo, _)| lo <= t);
        if idx == 0 {
            return None;
        }
        (self.parts[idx - 1].1 >= *t).then_some(idx - 1)
    }

    pub fn contains(&self, t: &Rational) -> bool {
        self.component_of(t).is_some()
    }

    /// True when `[lo, hi]` lies inside one component.
    pub fn contains_interval(&self, lo: &Rational, hi: &Rational) -> bool {
        match self.component_of(lo) {
            Some(i) => self.parts[i].1 >= *hi,
            None => false,
        }
    }

    pub fn is_subset_of(&self, other: &IntervalUnion) -> bool {
        self.parts.iter().all(|(lo, hi)| other.contains_interval(lo, hi))
    }

    /// Closed `radius`-neighborhood.
    pub fn neighborhood(&self, radius: &Rational) -> Self {
        Self::from_intervals(self.parts.iter().map(|(lo, hi)| (lo - radius, hi + radius)))
    }

    pub fn union(&self, other: &IntervalUnion) -> Self {
        Self::from_intervals(self.parts.iter().chain(other.parts.iter()).cloned())
    }

    pub fn intersect(&self, other: &IntervalUnion) -> Self {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.parts.len() && j < other.parts.len() {
            let (a_lo, a_hi) = &self.parts[i];
            let (b_lo, b_hi) = &other.parts[j];
            let lo = if a_lo > b_lo { a_lo } else { b_lo };
            let hi = if a_hi < b_hi { a_hi } else { b_hi };
            if lo <= hi {
                out.push((lo.clone(), hi.clone()));
            }
            if a_hi < b_hi {
                i += 1;
            } else {
                j += 1;
            }
        }
        Self::from_intervals(out)
    }

    pub fn clip(&self, lo: &Rational, hi: &Rational) -> Self {
        self.intersect(&IntervalUnion::interval(lo.clone(), hi.clone()))
    }

    /// The longest component; the leftmost one on ties.
    pub fn largest_component(&self) -> Option<(Rational, Rational)> {
        let mut best: Option<&(Rational, Rational)> = None;
        for p in &self.parts {
            if best.is_none_or(|b| &p.1 - &p.0 > &b.1 - &b.0) {
                best = Some(p);
            }
        }
        best.cloned()
    }

    pub fn hull(&self) -> Option<(Rational, Rational)> {
        Some((self.parts.first()?.0.clone(), self.parts.last()?.1.clone()))
    }

    /// Number of bounded gaps between components.
    pub fn gap_count(&self) -> usize {
        self.parts.len().saturating_sub(1)
    }
}

impl Serialize for IntervalUnion {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rendered: Vec<[String; 2]> = self.parts.iter().map(|(lo, hi)| [format_rational(lo), format_rational(hi)]).collect();
        rendered.serialize(s)
    }
}

impl<'de> Deserialize<'de> for IntervalUnion {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = Vec::<[String; 2]>::deserialize(d)?;
        let mut parts = Vec::with_capacity(raw.len());
        for [lo, hi] in raw {
            parts.push((parse_rational(&lo).map_err(D::Error::custom)?, parse_rational(&hi).map_err(D::Error::custom)?));
        }
        IntervalUnion::from_sorted(parts).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};
    use proptest::prelude::*;

    fn u(v: &[(i64, i64)]) -> IntervalUnion {
        IntervalUnion::from_intervals(v.iter().map(|&(a, b)| (int(a), int(b))))
    }

    #[test]
    fn measure_examples() {
        assert_eq!(IntervalUnion::empty().measure(), int(0));
        assert_eq!(u(&[(0, 1), (2, 3)]).measure(), int(2));
        assert_eq!(u(&[(0, 2), (1, 3)]).components(), &[(int(0), int(3))]);
        assert_eq!(u(&[(0, 1), (1, 2)]).len(), 1);
    }

    #[test]
    fn neighborhood_bound() {
        let l0 = u(&[(0, 1), (3, 4), (10, 10)]);
        let r = rat(1, 2);
        let l1 = l0.neighborhood(&r);
        assert!(l1.measure() <= l0.measure() + int(2) * &r * int(l0.len() as i64));
        assert!(l0.is_subset_of(&l1));
    }

    #[test]
    fn queries() {
        let s = u(&[(0, 1), (3, 5)]);
        assert!(s.contains(&int(4)));
        assert!(!s.contains(&int(2)));
        assert!(s.contains_interval(&int(3), &int(5)));
        assert!(!s.contains_interval(&int(0), &int(3)));
        assert_eq!(s.largest_component(), Some((int(3), int(5))));
        assert_eq!(s.clip(&rat(1, 2), &int(4)), IntervalUnion::from_intervals(vec![(rat(1, 2), int(1)), (int(3), int(4))]));
    }

    #[test]
    fn serde_round_trip() {
        let s = IntervalUnion::from_intervals(vec![(rat(-1, 3), rat(1, 7)), (int(2), int(2))]);
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(text, r#"[["-1/3","1/7"],["2/1","2/1"]]"#);
        let back: IntervalUnion = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<IntervalUnion>(r#"[["1/1","0/1"]]"#).is_err());
    }

    fn arb_union() -> impl Strategy<Value = IntervalUnion> {
        prop::collection::vec((-50i64..50, 0i64..10), 0..8)
            .prop_map(|v| IntervalUnion::from_intervals(v.into_iter().map(|(a, w)| (rat(a, 3), rat(a + w, 3)))))
    }

    proptest! {
        #[test]
        fn normalized_invariants(s in arb_union()) {
            for w in s.components().windows(2) {
                prop_assert!(w[0].1 < w[1].0);
            }
            for (lo, hi) in s.components() {
                prop_assert!(lo <= hi);
            }
        }

        #[test]
        fn intersection_pointwise(a in arb_union(), b in arb_union(), k in -60i64..70) {
            let t = rat(k, 6);
            let both = a.intersect(&b);
            prop_assert_eq!(both.contains(&t), a.contains(&t) && b.contains(&t));
            let either = a.union(&b);
            prop_assert_eq!(either.contains(&t), a.contains(&t) || b.contains(&t));
        }
    }
}
