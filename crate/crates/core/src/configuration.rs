//! Relative configurations of two Cantor sets and their renormalization.
//!
//! A configuration of `(K, K')` is reduced to one real coordinate `u`: with
//! `con(K)` placed on `[0, 1]`, `u` is where the left endpoint of `K'` lands.
//! For points `x ∈ K`, `x' ∈ K'` this is `u = x - x'`.

use std::collections::HashSet;

use num_traits::One;
use serde::Serialize;

use crate::certificate::CertifiedSet;
use crate::error::{Error, Result};
use crate::ifs::{HomogeneousIfs, Word};
use crate::rational::{format_rational, Rational};

pub const DEFAULT_FRONTIER_CAP: usize = 1_000_000;

/// The pair `(K, K')` in the frame where `con(K) = [0, 1]` and `con(K') = [0, s0]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigSpace {
    k: HomogeneousIfs,
    kp: HomogeneousIfs,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OrbitNode {
    #[serde(with = "crate::rational::serde_str")]
    pub config: Rational,
    pub path: (Word, Word),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frontier {
    pub depth: usize,
    pub nodes: Vec<OrbitNode>,
    /// Set when the cap stopped the expansion before `depth`.
    pub truncated: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// An orbit node whose configuration lies in a certified recurrent set.
    Intersecting(OrbitNode),
    /// The frontier is empty at this depth.
    NotIntersecting(usize),
    Unknown {
        frontier: usize,
    },
}

impl ConfigSpace {
    /// Both sets must share their contraction ratio. Hulls are rescaled so
    /// that `con(K) = [0, 1]`.
    pub fn new(k: HomogeneousIfs, kp: HomogeneousIfs) -> Result<Self> {
        if k.ratio() != kp.ratio() {
            return Err(Error::Mismatch(format!(
                "ratios differ: {} vs {}",
                format_rational(k.ratio()),
                format_rational(kp.ratio())
            )));
        }
        if k.hull().is_one() {
            return Ok(ConfigSpace { k, kp });
        }
        let scale = k.hull().recip();
        Ok(ConfigSpace { k: k.scaled(&scale), kp: kp.scaled(&scale) })
    }

    pub fn k(&self) -> &HomogeneousIfs {
        &self.k
    }

    pub fn kp(&self) -> &HomogeneousIfs {
        &self.kp
    }

    pub fn s0(&self) -> &Rational {
        self.kp.hull()
    }

    pub fn ratio(&self) -> &Rational {
        self.k.ratio()
    }

    pub fn config_of_pair(&self, x: &Rational, xp: &Rational) -> Rational {
        x - xp
    }

    /// `T_a T'_{a'} u = (u + e'_{a'} - e_a) / ρ`.
    pub fn renormalize(&self, u: &Rational, a: usize, ap: usize) -> Rational {
        (u + self.kp.offset(ap) - self.k.offset(a)) / self.ratio()
    }

    /// `e'_{b'} - e_b` for equal-length words; the word operator is
    /// `u ↦ (u + shift) / ρ^{|b|}`.
    pub fn word_shift(&self, b: &[usize], bp: &[usize]) -> Result<Rational> {
        if b.len() != bp.len() {
            return Err(Error::WordLengthMismatch(b.len(), bp.len()));
        }
        Ok(self.kp.word_offset(bp) - self.k.word_offset(b))
    }

    pub fn renormalize_word(&self, u: &Rational, b: &[usize], bp: &[usize]) -> Result<Rational> {
        let shift = self.word_shift(b, bp)?;
        Ok((u + shift) / crate::rational::pow(self.ratio(), b.len() as i32))
    }

    /// `[0, 1] ∩ [u, u + s0] ≠ ∅`.
    pub fn is_linked(&self, u: &Rational) -> bool {
        -self.s0() <= *u && *u <= Rational::one()
    }

    pub fn orbit_frontier(&self, u: &Rational, depth: usize, cap: usize) -> Frontier {
        let (frontier, _) = self.explore(u, depth, cap, |_| false);
        frontier
    }

    /// Breadth-first search for a linked orbit. Equal configurations at the
    /// same depth are merged, keeping the lexicographically first path.
    fn explore<F>(&self, u: &Rational, depth: usize, cap: usize, hit: F) -> (Frontier, Option<OrbitNode>)
    where
        F: Fn(&Rational) -> bool,
    {
        let root = OrbitNode { config: u.clone(), path: (Word::default(), Word::default()) };
        let mut nodes = if self.is_linked(u) { vec![root] } else { Vec::new() };
        for level in 0..=depth {
            if let Some(n) = nodes.iter().find(|n| hit(&n.config)) {
                let found = n.clone();
                return (Frontier { depth: level, nodes, truncated: false }, Some(found));
            }
            if level == depth || nodes.is_empty() {
                return (Frontier { depth: level, nodes, truncated: false }, None);
            }
            let mut seen = HashSet::new();
            let mut next = Vec::new();
            for node in &nodes {
                for a in 0..self.k.len() {
                    for ap in 0..self.kp.len() {
                        let v = self.renormalize(&node.config, a, ap);
                        if !self.is_linked(&v) || !seen.insert(v.clone()) {
                            continue;
                        }
                        if next.len() == cap {
                            return (Frontier { depth: level, nodes, truncated: true }, None);
                        }
                        let mut path = node.path.clone();
                        path.0.push(a);
                        path.1.push(ap);
                        next.push(OrbitNode { config: v, path });
                    }
                }
            }
            nodes = next;
        }
        unreachable!()
    }

    /// Exact negative answers come from an emptied frontier; positive
    /// answers need a certified recurrent set for this very pair of sets.
    pub fn intersect_certify(&self, u: &Rational, certified: Option<&CertifiedSet>, depth: usize, cap: usize) -> Result<Verdict> {
        if let Some(c) = certified {
            if !c.matches(self) {
                return Err(Error::Mismatch("certified set belongs to a different pair of sets".into()));
            }
        }
        let in_set = |v: &Rational| certified.is_some_and(|c| c.set().contains(v));
        let (frontier, found) = self.explore(u, depth, cap, in_set);
        if let Some(node) = found {
            return Ok(Verdict::Intersecting(node));
        }
        if frontier.nodes.is_empty() {
            return Ok(Verdict::NotIntersecting(frontier.depth));
        }
        if frontier.truncated {
            return Err(Error::CapExceeded { what: "orbit frontier", count: cap as u128, cap: cap as u128 });
        }
        Ok(Verdict::Unknown { frontier: frontier.nodes.len() })
    }
}

impl Frontier {
    /// One line per node: `config<TAB>a-word<TAB>a'-word` with dotted labels.
    pub fn trace(&self, space: &ConfigSpace) -> String {
        let mut out = String::new();
        for n in &self.nodes {
            out.push_str(&format!(
                "{}\t{}\t{}\n",
                format_rational(&n.config),
                n.path.0.render(space.k()),
                n.path.1.render(space.kp())
            ));
        }
        out
    }
}
