//! Classical regimes for `C_a + C_b` and the brute-force finite-depth sumset.

use std::fmt;

use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ifs::{middle_alpha, HomogeneousIfs};
use crate::interval::IntervalUnion;
use crate::rational::{format_rational, int, ln_enclosure, rat, to_decimal, to_f64, Rational};

pub const DEFAULT_SUMSET_CAP: u128 = 1 << 32;

/// Newhouse thickness of the depth-1 presentation: over every gap, the
/// shorter adjacent cylinder divided by the gap.
pub fn thickness(ifs: &HomogeneousIfs) -> Result<Rational> {
    if ifs.len() < 2 {
        return Err(Error::Precondition("thickness needs at least one gap (two letters)".into()));
    }
    let bridge = ifs.cylinder_len();
    let order = ifs.positional_order();
    let mut best: Option<Rational> = None;
    for w in order.windows(2) {
        let gap = ifs.cylinder(w[1]).0 - ifs.cylinder(w[0]).1;
        if gap <= Rational::zero() {
            return Err(Error::Precondition("cylinders touch: no gap".into()));
        }
        let t = &bridge / gap;
        best = Some(match best {
            Some(b) if b <= t => b,
            _ => t,
        });
    }
    Ok(best.expect("two letters give a gap"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Regime {
    CantorRegime,
    GapLemmaRegime,
    Mysterious,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::CantorRegime => "cantor",
            Regime::GapLemmaRegime => "gap-lemma",
            Regime::Mysterious => "mysterious",
        })
    }
}

/// `log |A| / log(1/ratio)` kept as the pair `(|A|, 1/ratio)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DimensionForm {
    pub count: String,
    pub inv_ratio: String,
    pub decimal: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RegimeVerdict {
    #[serde(with = "crate::rational::serde_str")]
    pub a: Rational,
    #[serde(with = "crate::rational::serde_str")]
    pub b: Rational,
    pub dims: (DimensionForm, DimensionForm),
    pub dim_sum: String,
    #[serde(with = "crate::rational::serde_str")]
    pub thickness_product: Rational,
    pub verdict: Regime,
}

fn dimension_form(a: &Rational) -> DimensionForm {
    let d = middle_alpha(a).expect("range checked").dimension();
    DimensionForm { count: d.count.to_string(), inv_ratio: format_rational(&d.inv_ratio), decimal: format!("{:.6}", d.value()) }
}

/// `log 2/log(1/a) + log 2/log(1/b) < 1`, i.e. `ln(1/2a) ln(1/2b) > (ln 2)²`,
/// decided with rigorous enclosures of the logarithms.
pub fn dimension_sum_below_one(a: &Rational, b: &Rational) -> bool {
    if a == b {
        // ln(1/2a) > ln 2
        return *a < rat(1, 4);
    }
    let (x_arg, y_arg) = ((int(2) * a).recip(), (int(2) * b).recip());
    let zero = Rational::zero();
    let clamp = |v: Rational| if v < zero { zero.clone() } else { v };
    for (terms, bits) in [(20, 64), (40, 128), (80, 256), (160, 512), (320, 1024)] {
        let (x_lo, x_hi) = ln_enclosure(&x_arg, terms, bits);
        let (y_lo, y_hi) = ln_enclosure(&y_arg, terms, bits);
        let (l_lo, l_hi) = ln_enclosure(&int(2), terms, bits);
        if clamp(x_lo) * clamp(y_lo) > &l_hi * &l_hi {
            return true;
        }
        if x_hi * y_hi < &l_lo * &l_lo {
            return false;
        }
    }
    // unresolved at 2^-1024: only exact equality survives, and equality is not "< 1"
    false
}

pub fn thickness_product(a: &Rational, b: &Rational) -> Rational {
    let one = Rational::one();
    a / (&one - int(2) * a) * (b / (&one - int(2) * b))
}

pub fn classify_region(a: &Rational, b: &Rational) -> Result<RegimeVerdict> {
    let half = rat(1, 2);
    for v in [a, b] {
        if *v <= Rational::zero() || *v >= half {
            return Err(Error::OutOfRange(format!("{} not in (0, 1/2)", format_rational(v))));
        }
    }
    let tp = thickness_product(a, b);
    let verdict = if tp >= Rational::one() {
        Regime::GapLemmaRegime
    } else if dimension_sum_below_one(a, b) {
        Regime::CantorRegime
    } else {
        Regime::Mysterious
    };
    let dims = (dimension_form(a), dimension_form(b));
    let sum = (2f64).ln() / (1.0 / to_f64(a)).ln() + (2f64).ln() / (1.0 / to_f64(b)).ln();
    Ok(RegimeVerdict { a: a.clone(), b: b.clone(), dims, dim_sum: format!("{sum:.6}"), thickness_product: tp, verdict })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum SumsetOp {
    Sum,
    Difference,
}

impl std::str::FromStr for SumsetOp {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(SumsetOp::Sum),
            "difference" | "diff" => Ok(SumsetOp::Difference),
            other => Err(Error::Format(format!("unknown operation {other:?} (expected sum or difference)"))),
        }
    }
}

fn check_cap(k: &HomogeneousIfs, kp: &HomogeneousIfs, depth: usize, cap: u128) -> Result<()> {
    let count = (k.len() as u128).checked_mul(kp.len() as u128).and_then(|b| b.checked_pow(depth as u32));
    match count {
        Some(c) if c <= cap => Ok(()),
        _ => Err(Error::CapExceeded { what: "cylinder pair", count: count.unwrap_or(u128::MAX), cap }),
    }
}

/// Union of `I(w) ± I'(w')` over all depth-`depth` word pairs.
///
/// With a shared ratio the union is built level by level,
/// `S_n = ∪ (e_a ± e'_{a'}) + ρ S_{n-1}`, merging as it goes; otherwise the
/// two depth-`depth` covers are added pairwise.
pub fn brute_sumset(k: &HomogeneousIfs, kp: &HomogeneousIfs, depth: usize, op: SumsetOp, cap: u128) -> Result<IntervalUnion> {
    check_cap(k, kp, depth, cap)?;
    let sign = |e: &Rational| match op {
        SumsetOp::Sum => e.clone(),
        SumsetOp::Difference => -e.clone(),
    };
    let base = match op {
        SumsetOp::Sum => (Rational::zero(), k.hull() + kp.hull()),
        SumsetOp::Difference => (-kp.hull().clone(), k.hull().clone()),
    };
    if k.ratio() == kp.ratio() {
        let rho = k.ratio();
        let mut shifts: Vec<Rational> =
            k.offsets().iter().flat_map(|e| kp.offsets().iter().map(move |ep| e + sign(ep))).collect();
        shifts.sort();
        shifts.dedup();
        let mut cover = IntervalUnion::interval(base.0, base.1);
        for _ in 0..depth {
            let scaled: Vec<(Rational, Rational)> = cover.components().iter().map(|(lo, hi)| (lo * rho, hi * rho)).collect();
            let parts: Vec<(Rational, Rational)> =
                shifts.par_iter().flat_map_iter(|s| scaled.iter().map(move |(lo, hi)| (s + lo, s + hi))).collect();
            cover = IntervalUnion::from_intervals(parts);
        }
        return Ok(cover);
    }
    let left = cylinders(k, depth);
    let right: Vec<(Rational, Rational)> = cylinders(kp, depth)
        .into_iter()
        .map(|(lo, hi)| match op {
            SumsetOp::Sum => (lo, hi),
            SumsetOp::Difference => (-hi, -lo),
        })
        .collect();
    let parts: Vec<(Rational, Rational)> =
        left.par_iter().flat_map_iter(|(lo, hi)| right.iter().map(move |(rlo, rhi)| (lo + rlo, hi + rhi))).collect();
    Ok(IntervalUnion::from_intervals(parts))
}

/// All depth-`n` cylinders `[e_w, e_w + ρ^n hull]`.
fn cylinders(k: &HomogeneousIfs, n: usize) -> Vec<(Rational, Rational)> {
    let mut offsets = vec![Rational::zero()];
    let mut scale = Rational::one();
    for _ in 0..n {
        offsets = offsets.iter().flat_map(|o| k.offsets().iter().map(|e| o + &scale * e).collect::<Vec<_>>()).collect();
        scale *= k.ratio();
    }
    let len = scale * k.hull();
    offsets.into_iter().map(|o| (o.clone(), o + &len)).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GridRow {
    #[serde(with = "crate::rational::serde_str")]
    pub a: Rational,
    #[serde(with = "crate::rational::serde_str")]
    pub b: Rational,
    pub dim_sum: String,
    #[serde(with = "crate::rational::serde_str")]
    pub thickness_product: Rational,
    pub verdict: Regime,
    /// Gaps of the depth-`depth` cover of `C_a + C_b`.
    pub gaps: usize,
}

/// Cells `(a, b) = (i, j) / (2 res)` for `1 <= i, j < res`, each with its
/// verdict and the gap count of the depth-`depth` sum cover.
pub fn region_grid(resolution: usize, depth: usize) -> Result<Vec<GridRow>> {
    if resolution < 2 {
        return Err(Error::OutOfRange(format!("resolution {resolution} must be at least 2")));
    }
    let den = 2 * resolution as i64;
    let cells: Vec<(i64, i64)> = (1..resolution as i64).flat_map(|i| (1..resolution as i64).map(move |j| (i, j))).collect();
    cells
        .par_iter()
        .map(|&(i, j)| {
            let (a, b) = (rat(i, den), rat(j, den));
            let v = classify_region(&a, &b)?;
            let cover = brute_sumset(&middle_alpha(&a)?, &middle_alpha(&b)?, depth, SumsetOp::Sum, DEFAULT_SUMSET_CAP)?;
            Ok(GridRow {
                a,
                b,
                dim_sum: v.dim_sum,
                thickness_product: v.thickness_product,
                verdict: v.verdict,
                gaps: cover.gap_count(),
            })
        })
        .collect()
}

pub fn grid_csv(rows: &[GridRow], depth: usize) -> String {
    let mut out = format!("a,b,d_sum,thickness_product,verdict,gaps_at_depth_{depth},a_exact,b_exact,thickness_product_exact\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            to_decimal(&r.a, 6),
            to_decimal(&r.b, 6),
            r.dim_sum,
            to_decimal(&r.thickness_product, 6),
            r.verdict,
            r.gaps,
            format_rational(&r.a),
            format_rational(&r.b),
            format_rational(&r.thickness_product)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(a: Rational) -> HomogeneousIfs {
        middle_alpha(&a).unwrap()
    }

    #[test]
    fn thickness_examples() {
        assert_eq!(thickness(&c(rat(1, 3))).unwrap(), int(1));
        assert_eq!(thickness(&c(rat(2, 5))).unwrap(), int(2));
        let three = HomogeneousIfs::from_offsets(rat(1, 10), vec![int(0), rat(2, 5), rat(4, 5)], int(1));
        assert_eq!(thickness(&three).unwrap(), rat(1, 3));
        let one = HomogeneousIfs::from_offsets(rat(1, 2), vec![int(0)], int(1));
        assert!(thickness(&one).is_err());
    }

    #[test]
    fn region_examples() {
        assert_eq!(classify_region(&rat(1, 10), &rat(1, 10)).unwrap().verdict, Regime::CantorRegime);
        assert_eq!(classify_region(&rat(2, 5), &rat(2, 5)).unwrap().verdict, Regime::GapLemmaRegime);
        let m = classify_region(&rat(7, 25), &rat(7, 25)).unwrap();
        assert_eq!(m.verdict, Regime::Mysterious);
        assert_eq!(m.dim_sum, "1.089027");
        assert!(m.thickness_product < rat(41, 100) && m.thickness_product > rat(2, 5));
        assert!(classify_region(&int(0), &rat(1, 4)).is_err());
        assert!(classify_region(&rat(1, 4), &rat(1, 2)).is_err());
        // d = 1/2 each: the sum is exactly 1, not below it
        assert_eq!(classify_region(&rat(1, 4), &rat(1, 4)).unwrap().verdict, Regime::Mysterious);
    }

    #[test]
    fn sumset_examples() {
        let third = c(rat(1, 3));
        assert_eq!(
            brute_sumset(&third, &third, 1, SumsetOp::Difference, DEFAULT_SUMSET_CAP).unwrap(),
            IntervalUnion::interval(int(-1), int(1))
        );
        let four = c(rat(2, 5));
        for n in 0..=12 {
            assert_eq!(
                brute_sumset(&four, &four, n, SumsetOp::Sum, DEFAULT_SUMSET_CAP).unwrap(),
                IntervalUnion::interval(int(0), int(2))
            );
        }
        let tenth = c(rat(1, 10));
        let mut prev = brute_sumset(&tenth, &tenth, 1, SumsetOp::Sum, DEFAULT_SUMSET_CAP).unwrap().measure();
        for n in 2..=8 {
            let m = brute_sumset(&tenth, &tenth, n, SumsetOp::Sum, DEFAULT_SUMSET_CAP).unwrap().measure();
            assert!(m <= rat(2, 5) * &prev);
            prev = m;
        }
        assert!(matches!(brute_sumset(&third, &third, 40, SumsetOp::Sum, 1 << 20), Err(Error::CapExceeded { .. })));
    }

    /// Every word pair listed one by one.
    fn enumerate(k: &HomogeneousIfs, kp: &HomogeneousIfs, n: usize, op: SumsetOp) -> IntervalUnion {
        let l = cylinders(k, n);
        let r = cylinders(kp, n);
        let mut parts = Vec::new();
        for (lo, hi) in &l {
            for (rlo, rhi) in &r {
                parts.push(match op {
                    SumsetOp::Sum => (lo + rlo, hi + rhi),
                    SumsetOp::Difference => (lo - rhi, hi - rlo),
                });
            }
        }
        IntervalUnion::from_intervals(parts)
    }

    #[test]
    fn grid_shapes() {
        let rows = region_grid(2, 3).unwrap();
        assert_eq!(rows.len(), 1);
        let csv = grid_csv(&rows, 3);
        assert_eq!(csv.lines().count(), 2);
        assert_eq!(csv.lines().next().unwrap().split(',').count(), csv.lines().nth(1).unwrap().split(',').count());

        let rows = region_grid(8, 4).unwrap();
        for r in rows.iter().filter(|r| r.verdict == Regime::GapLemmaRegime) {
            assert_eq!(r.gaps, 0);
        }
        // neighbours with different verdicts sit on opposite sides of a boundary curve
        let f = |a: &Rational, b: &Rational| {
            let (a, b) = (to_f64(a), to_f64(b));
            (2f64.ln() / (1.0 / a).ln() + 2f64.ln() / (1.0 / b).ln(), a / (1.0 - 2.0 * a) * b / (1.0 - 2.0 * b))
        };
        for x in &rows {
            for y in &rows {
                if y.b != x.b || y.a <= x.a || x.verdict == y.verdict {
                    continue;
                }
                let ((dx, tx), (dy, ty)) = (f(&x.a, &x.b), f(&y.a, &y.b));
                let dim_cross = (dx < 1.0) != (dy < 1.0);
                let thick_cross = (tx >= 1.0) != (ty >= 1.0);
                assert!(dim_cross || thick_cross);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn classify_is_symmetric(i in 1i64..100, j in 1i64..100) {
            let (a, b) = (rat(i, 200), rat(j, 200));
            prop_assert_eq!(classify_region(&a, &b).unwrap().verdict, classify_region(&b, &a).unwrap().verdict);
        }

        #[test]
        fn verdict_matches_float_away_from_boundary(i in 1i64..100, j in 1i64..100) {
            let (a, b) = (rat(i, 200), rat(j, 200));
            let (af, bf) = (to_f64(&a), to_f64(&b));
            let d = 2f64.ln() / (1.0 / af).ln() + 2f64.ln() / (1.0 / bf).ln();
            let t = af / (1.0 - 2.0 * af) * bf / (1.0 - 2.0 * bf);
            let v = classify_region(&a, &b).unwrap().verdict;
            if (t - 1.0).abs() > 1e-9 && (d - 1.0).abs() > 1e-9 {
                let expect = if t >= 1.0 { Regime::GapLemmaRegime } else if d < 1.0 { Regime::CantorRegime } else { Regime::Mysterious };
                prop_assert_eq!(v, expect);
            }
        }

        #[test]
        fn recursion_matches_enumeration(i in 1i64..50, n in 0usize..5, diff in any::<bool>()) {
            let k = c(rat(i, 100));
            let kp = k.scaled(&rat(2, 3));
            let op = if diff { SumsetOp::Difference } else { SumsetOp::Sum };
            prop_assert_eq!(brute_sumset(&k, &kp, n, op, DEFAULT_SUMSET_CAP).unwrap(), enumerate(&k, &kp, n, op));
        }

        #[test]
        fn covers_are_nested(i in 1i64..50, j in 1i64..50, n in 0usize..5, diff in any::<bool>()) {
            let (k, kp) = (c(rat(i, 100)), c(rat(j, 100)));
            let op = if diff { SumsetOp::Difference } else { SumsetOp::Sum };
            let outer = brute_sumset(&k, &kp, n, op, DEFAULT_SUMSET_CAP).unwrap();
            let inner = brute_sumset(&k, &kp, n + 1, op, DEFAULT_SUMSET_CAP).unwrap();
            prop_assert!(inner.is_subset_of(&outer));
        }
    }
}
