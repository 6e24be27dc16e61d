//! Exact linear combinations of data symbols and noise samples.
//!
//! A received or partially-cancelled signal is always a finite sum
//! `Σ c_k · term_k` where each term is either a transmitted packet `x(τ)` or a
//! noise sample `z_i(τ)`. Keeping the sum symbolic lets the cancellation rounds
//! be carried out exactly and the resulting powers be read off term by term.
//!
//! [`LinComb`] is generic over the key so the same arithmetic serves two
//! views of an expression:
//!
//! * [`SignalExpr`] keys on [`Term`] alone. Contributions that land on the same
//!   symbol add as complex amplitudes (the physical superposition).
//! * [`PathExpr`] keys on [`PathTerm`], which also records the ordered sequence
//!   of interferers that produced the term. No two distinct sequences ever
//!   merge, so powers add per path.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Slot index. Relative offsets may be negative.
pub type Slot = i64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Term {
    /// Packet `x(slot)`, first sent by the source in `slot`.
    DataSymbol { slot: Slot },
    /// Noise `z_node(slot)` at a receiver.
    NoiseSample { node: usize, slot: Slot },
}

impl Term {
    pub fn data(slot: Slot) -> Self {
        Term::DataSymbol { slot }
    }

    pub fn noise(node: usize, slot: Slot) -> Self {
        Term::NoiseSample { node, slot }
    }

    pub fn is_data(&self) -> bool {
        matches!(self, Term::DataSymbol { .. })
    }

    /// Same term moved `by` slots later.
    pub fn shifted(self, by: Slot) -> Self {
        match self {
            Term::DataSymbol { slot } => Term::DataSymbol { slot: slot + by },
            Term::NoiseSample { node, slot } => Term::NoiseSample { node, slot: slot + by },
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::DataSymbol { slot } => write!(f, "x({slot})"),
            Term::NoiseSample { node, slot } => write!(f, "z{node}({slot})"),
        }
    }
}

/// Sequence of interferer indices (`j_1, j_2, ...`) that produced a term.
pub type Path = Vec<u16>;

/// A term tagged with the interferer path it came from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PathTerm {
    pub term: Term,
    pub path: Path,
}

/// Anything that can key a [`LinComb`]: it must expose the underlying term.
pub trait TermKey: Ord + Clone {
    fn term(&self) -> &Term;
}

impl TermKey for Term {
    fn term(&self) -> &Term {
        self
    }
}

impl TermKey for PathTerm {
    fn term(&self) -> &Term {
        &self.term
    }
}

/// Finite map key → complex coefficient. Zero coefficients are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct LinComb<K: Ord> {
    terms: BTreeMap<K, Complex64>,
    prune_eps: f64,
}

pub type SignalExpr = LinComb<Term>;
pub type PathExpr = LinComb<PathTerm>;

impl<K: Ord> Default for LinComb<K> {
    fn default() -> Self {
        LinComb { terms: BTreeMap::new(), prune_eps: 0.0 }
    }
}

impl<K: TermKey> LinComb<K> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Drop any coefficient whose magnitude falls below `eps` (now and on
    /// every later update). `0.0` keeps everything except exact zeros.
    pub fn with_prune_epsilon(mut self, eps: f64) -> Self {
        self.prune_eps = eps.max(0.0);
        let eps = self.prune_eps;
        self.terms.retain(|_, c| !Self::negligible(*c, eps));
        self
    }

    pub fn prune_epsilon(&self) -> f64 {
        self.prune_eps
    }

    pub fn single(key: K, coef: Complex64) -> Self {
        let mut e = Self::new();
        e.add_term(key, coef);
        e
    }

    fn negligible(c: Complex64, eps: f64) -> bool {
        c == Complex64::new(0.0, 0.0) || c.norm() < eps
    }

    /// Accumulate `coef` onto `key`, merging with any existing entry.
    pub fn add_term(&mut self, key: K, coef: Complex64) {
        let eps = self.prune_eps;
        match self.terms.entry(key) {
            std::collections::btree_map::Entry::Vacant(v) => {
                if !Self::negligible(coef, eps) {
                    v.insert(coef);
                }
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = *o.get() + coef;
                if Self::negligible(sum, eps) {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    /// `self += scale · other`
    pub fn add_scaled(&mut self, other: &Self, scale: Complex64) {
        if scale == Complex64::new(0.0, 0.0) {
            return;
        }
        for (k, c) in &other.terms {
            self.add_term(k.clone(), c * scale);
        }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut out = LinComb { terms: BTreeMap::new(), prune_eps: self.prune_eps };
        out.add_scaled(self, c);
        out
    }

    pub fn coef(&self, key: &K) -> Complex64 {
        self.terms.get(key).copied().unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, &Complex64)> {
        self.terms.iter()
    }

    pub fn data_terms(&self) -> impl Iterator<Item = (&K, &Complex64)> {
        self.terms.iter().filter(|(k, _)| k.term().is_data())
    }

    /// Collapse to the physical superposition: coefficients on the same term add.
    pub fn merged(&self) -> SignalExpr {
        let mut out = SignalExpr::new().with_prune_epsilon(self.prune_eps);
        for (k, c) in &self.terms {
            out.add_term(*k.term(), *c);
        }
        out
    }

    /// Useful / interference / noise power of the expression.
    ///
    /// Every stored entry is treated as an independent contribution, so on a
    /// [`SignalExpr`] coincident paths have already been combined coherently,
    /// while on a [`PathExpr`] every path contributes its own power.
    pub fn power_split(&self, useful_slot: Slot, p_t: f64, sigma2: f64) -> PowerSplit {
        let mut split = PowerSplit::default();
        for (k, c) in &self.terms {
            let p = c.norm_sqr();
            match *k.term() {
                Term::DataSymbol { slot } if slot == useful_slot => split.useful += p * p_t,
                Term::DataSymbol { .. } => split.interference += p * p_t,
                Term::NoiseSample { .. } => split.noise += p * sigma2,
            }
        }
        split
    }
}

impl SignalExpr {
    /// One line per term, `kind,indices,re,im`, sorted by term.
    ///
    /// `x,<slot>,re,im` for data symbols and `z,<node>:<slot>,re,im` for noise.
    pub fn debug_lines(&self) -> String {
        let mut out = String::new();
        for (t, c) in &self.terms {
            match t {
                Term::DataSymbol { slot } => {
                    out.push_str(&format!("x,{slot},{},{}\n", c.re, c.im));
                }
                Term::NoiseSample { node, slot } => {
                    out.push_str(&format!("z,{node}:{slot},{},{}\n", c.re, c.im));
                }
            }
        }
        out
    }

    /// Largest coefficient-wise distance to `other`, over the union of terms.
    pub fn max_abs_diff(&self, other: &SignalExpr) -> f64 {
        let mut worst: f64 = 0.0;
        for (t, c) in &self.terms {
            worst = worst.max((c - other.coef(t)).norm());
        }
        for (t, c) in &other.terms {
            if !self.terms.contains_key(t) {
                worst = worst.max(c.norm());
            }
        }
        worst
    }
}

impl<K: TermKey> FromIterator<(K, Complex64)> for LinComb<K> {
    fn from_iter<I: IntoIterator<Item = (K, Complex64)>>(iter: I) -> Self {
        let mut e = Self::new();
        for (k, c) in iter {
            e.add_term(k, c);
        }
        e
    }
}

impl<K: TermKey> AddAssign<&LinComb<K>> for LinComb<K> {
    fn add_assign(&mut self, rhs: &LinComb<K>) {
        self.add_scaled(rhs, Complex64::new(1.0, 0.0));
    }
}

impl<K: TermKey> Add for &LinComb<K> {
    type Output = LinComb<K>;

    fn add(self, rhs: &LinComb<K>) -> LinComb<K> {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl<K: TermKey> Add for LinComb<K> {
    type Output = LinComb<K>;

    fn add(mut self, rhs: LinComb<K>) -> LinComb<K> {
        self += &rhs;
        self
    }
}

impl<K: TermKey> Sub for &LinComb<K> {
    type Output = LinComb<K>;

    fn sub(self, rhs: &LinComb<K>) -> LinComb<K> {
        let mut out = self.clone();
        out.add_scaled(rhs, Complex64::new(-1.0, 0.0));
        out
    }
}

impl<K: TermKey> Neg for &LinComb<K> {
    type Output = LinComb<K>;

    fn neg(self) -> LinComb<K> {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

impl<K: TermKey> Mul<Complex64> for &LinComb<K> {
    type Output = LinComb<K>;

    fn mul(self, c: Complex64) -> LinComb<K> {
        self.scale(c)
    }
}

impl<K: TermKey> Mul<f64> for &LinComb<K> {
    type Output = LinComb<K>;

    fn mul(self, c: f64) -> LinComb<K> {
        self.scale(Complex64::new(c, 0.0))
    }
}

impl fmt::Display for SignalExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "0");
        }
        for (n, (t, c)) in self.terms.iter().enumerate() {
            if n > 0 {
                write!(f, " + ")?;
            }
            if c.im == 0.0 {
                write!(f, "{}·{t}", c.re)?;
            } else {
                write!(f, "({}{:+}i)·{t}", c.re, c.im)?;
            }
        }
        Ok(())
    }
}

/// Powers of the three components of a received signal.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PowerSplit {
    pub useful: f64,
    pub interference: f64,
    pub noise: f64,
}

impl PowerSplit {
    /// Interference plus noise.
    pub fn residual(&self) -> f64 {
        self.interference + self.noise
    }

    pub fn sinr(&self) -> f64 {
        self.useful / self.residual()
    }

    pub fn sinr_db(&self) -> f64 {
        crate::channel::to_db(self.sinr())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn expr(terms: &[(Term, f64)]) -> SignalExpr {
        terms.iter().map(|&(t, v)| (t, c(v))).collect()
    }

    #[test]
    fn add_cancels_exactly() {
        let a = expr(&[(Term::data(5), 1.0)]);
        let b = expr(&[(Term::data(5), -1.0)]);
        assert!((&a + &b).is_empty());
    }

    #[test]
    fn add_identity_and_merge() {
        let h = Complex64::new(0.3, -0.2);
        let a = SignalExpr::single(Term::data(5), h);
        assert_eq!(&a + &SignalExpr::new(), a);

        let a = expr(&[(Term::data(5), 0.5), (Term::noise(3, 5), 1.0)]);
        let b = expr(&[(Term::data(5), 0.25)]);
        let sum = &a + &b;
        assert_eq!(sum, expr(&[(Term::data(5), 0.75), (Term::noise(3, 5), 1.0)]));
    }

    #[test]
    fn scale_examples() {
        let a = expr(&[(Term::data(1), 2.0)]);
        assert_eq!(a.scale(c(0.5)), expr(&[(Term::data(1), 1.0)]));
        assert_eq!(a.scale(c(1.0)), a);
        assert!(a.scale(c(0.0)).is_empty());
        let b = expr(&[(Term::data(1), 1.0), (Term::noise(2, 1), 1.0)]);
        assert_eq!(
            b.scale(c(-0.125)),
            expr(&[(Term::data(1), -0.125), (Term::noise(2, 1), -0.125)])
        );
    }

    #[test]
    fn power_split_examples() {
        let e = expr(&[(Term::data(0), 1.0), (Term::data(1), 0.5), (Term::noise(3, 0), 1.0)]);
        let p = e.power_split(0, 1.0, 0.01);
        assert_eq!((p.useful, p.interference, p.noise), (1.0, 0.25, 0.01));

        let e = expr(&[(Term::data(0), 1.0)]);
        let p = e.power_split(0, 1.0, 0.01);
        assert_eq!((p.useful, p.interference, p.noise), (1.0, 0.0, 0.0));

        // missing useful term reads as zero useful power
        let p = e.power_split(7, 1.0, 0.01);
        assert_eq!(p.useful, 0.0);
        assert_eq!(p.sinr(), 0.0);
    }

    #[test]
    fn prune_epsilon_drops_small_terms() {
        let mut e = SignalExpr::new().with_prune_epsilon(1e-6);
        e.add_term(Term::data(0), c(1e-9));
        e.add_term(Term::data(1), c(1.0));
        assert_eq!(e.len(), 1);
        e.add_term(Term::data(1), c(-1.0 + 1e-8));
        assert!(e.is_empty());
    }

    #[test]
    fn debug_lines_sorted() {
        let e = expr(&[(Term::noise(3, 1), -0.5), (Term::data(2), 0.25), (Term::data(-1), 1.0)]);
        assert_eq!(e.debug_lines(), "x,-1,1,0\nx,2,0.25,0\nz,3:1,-0.5,0\n");
    }

    #[test]
    fn merged_sums_paths() {
        let mut p = PathExpr::new();
        p.add_term(PathTerm { term: Term::data(4), path: vec![1, 2] }, c(0.5));
        p.add_term(PathTerm { term: Term::data(4), path: vec![2, 1] }, c(0.5));
        assert_eq!(p.len(), 2);
        let per_path = p.power_split(0, 1.0, 0.0);
        let merged = p.merged();
        assert_eq!(merged.len(), 1);
        assert_eq!(merged.coef(&Term::data(4)), c(1.0));
        assert_eq!(per_path.interference, 0.5);
        assert_eq!(merged.power_split(0, 1.0, 0.0).interference, 1.0);
    }

    fn arb_term() -> impl Strategy<Value = Term> {
        prop_oneof![
            (-20i64..20).prop_map(Term::data),
            (1usize..5, -20i64..20).prop_map(|(n, s)| Term::noise(n, s)),
        ]
    }

    fn arb_expr() -> impl Strategy<Value = SignalExpr> {
        prop::collection::vec((arb_term(), -2.0f64..2.0, -2.0f64..2.0), 0..12)
            .prop_map(|v| v.into_iter().map(|(t, re, im)| (t, Complex64::new(re, im))).collect())
    }

    fn close(a: &SignalExpr, b: &SignalExpr) -> bool {
        a.max_abs_diff(b) <= 1e-12
    }

    proptest! {
        #[test]
        fn add_commutative_associative(a in arb_expr(), b in arb_expr(), c3 in arb_expr()) {
            prop_assert!(close(&(&a + &b), &(&b + &a)));
            prop_assert!(close(&(&(&a + &b) + &c3), &(&a + &(&b + &c3))));
        }

        #[test]
        fn scale_distributes(a in arb_expr(), b in arb_expr(), re in -3.0f64..3.0, im in -3.0f64..3.0) {
            let k = Complex64::new(re, im);
            prop_assert!(close(&(&a + &b).scale(k), &(&a.scale(k) + &b.scale(k))));
        }

        #[test]
        fn power_split_partitions(terms in prop::collection::vec((arb_term(), -2.0f64..2.0), 0..12), useful in -20i64..20) {
            let fwd: SignalExpr = terms.iter().map(|&(t, v)| (t, Complex64::new(v, 0.0))).collect();
            let rev: SignalExpr = terms.iter().rev().map(|&(t, v)| (t, Complex64::new(v, 0.0))).collect();
            let p = fwd.power_split(useful, 1.5, 0.3);
            prop_assert!(p.useful >= 0.0 && p.interference >= 0.0 && p.noise >= 0.0);
            prop_assert_eq!(p, rev.power_split(useful, 1.5, 0.3));
            let total: f64 = fwd.iter().map(|(t, c)| c.norm_sqr() * if t.is_data() { 1.5 } else { 0.3 }).sum();
            prop_assert!((p.useful + p.interference + p.noise - total).abs() <= 1e-12 * total.max(1.0));
        }
    }
}
