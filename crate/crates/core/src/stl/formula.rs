use serde::{Deserialize, Serialize};

use super::StlError;

/// The set of past offsets a temporal operator ranges over.
///
/// `Steps` holds a sorted, duplicate-free, non-empty list of offsets. Holes
/// are allowed, so `{0, 1, 5}` is a valid mask.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IntervalMask {
    Unbounded,
    Steps(Vec<usize>),
}

impl IntervalMask {
    /// Builds a step mask, sorting the offsets. Duplicates and empty sets are rejected.
    pub fn steps<I: IntoIterator<Item = usize>>(offsets: I) -> Result<Self, StlError> {
        let mut v: Vec<usize> = offsets.into_iter().collect();
        if v.is_empty() {
            return Err(StlError::MalformedMask("mask must contain at least one step".into()));
        }
        v.sort_unstable();
        if v.windows(2).any(|w| w[0] == w[1]) {
            return Err(StlError::MalformedMask("duplicate step in mask".into()));
        }
        Ok(IntervalMask::Steps(v))
    }

    /// Contiguous mask `[lo, hi]`, both ends included.
    pub fn range(lo: usize, hi: usize) -> Result<Self, StlError> {
        if lo > hi {
            return Err(StlError::MalformedMask(format!("empty range [{lo},{hi}]")));
        }
        Ok(IntervalMask::Steps((lo..=hi).collect()))
    }

    pub fn is_unbounded(&self) -> bool {
        matches!(self, IntervalMask::Unbounded)
    }

    /// `Some((lo, hi))` when the mask is a contiguous block of steps.
    pub fn as_contiguous(&self) -> Option<(usize, usize)> {
        match self {
            IntervalMask::Unbounded => None,
            IntervalMask::Steps(v) => {
                let (lo, hi) = (v[0], v[v.len() - 1]);
                (hi - lo + 1 == v.len()).then_some((lo, hi))
            }
        }
    }

    /// Offsets usable at time `t` (those not reaching before the start of the trace).
    pub(crate) fn offsets_at(&self, t: usize) -> OffsetIter<'_> {
        match self {
            IntervalMask::Unbounded => OffsetIter::Range(0..t + 1),
            IntervalMask::Steps(v) => OffsetIter::Slice(v.iter(), t),
        }
    }
}

pub(crate) enum OffsetIter<'a> {
    Range(std::ops::Range<usize>),
    Slice(std::slice::Iter<'a, usize>, usize),
}

impl Iterator for OffsetIter<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        match self {
            OffsetIter::Range(r) => r.next(),
            // sorted ascending, so the first offset past `t` ends the walk
            OffsetIter::Slice(it, t) => it.next().copied().filter(|k| *k <= *t),
        }
    }
}

/// Linear predicate `weights . x[t] + bias >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl Atom {
    pub fn new(weights: Vec<f64>, bias: f64) -> Self {
        Atom { weights, bias }
    }

    /// `x_feature >= threshold` over a `dim`-dimensional signal.
    pub fn ge(feature: usize, threshold: f64, dim: usize) -> Self {
        let mut weights = vec![0.0; dim.max(feature + 1)];
        weights[feature] = 1.0;
        Atom { weights, bias: -threshold }
    }

    /// `x_feature <= threshold` over a `dim`-dimensional signal.
    pub fn le(feature: usize, threshold: f64, dim: usize) -> Self {
        let mut weights = vec![0.0; dim.max(feature + 1)];
        weights[feature] = -1.0;
        Atom { weights, bias: threshold }
    }

    pub fn eval(&self, row: &[f64]) -> f64 {
        self.weights.iter().zip(row).map(|(w, x)| w * x).sum::<f64>() + self.bias
    }

    pub fn negated(&self) -> Atom {
        Atom {
            weights: self.weights.iter().map(|w| -w).collect(),
            bias: -self.bias,
        }
    }

    /// The single feature this atom reads, if exactly one weight is non-zero.
    pub fn single_feature(&self) -> Option<(usize, f64)> {
        let mut nz = self.weights.iter().enumerate().filter(|(_, w)| **w != 0.0);
        let first = nz.next()?;
        nz.next().is_none().then_some((first.0, *first.1))
    }

    fn pad_to(&mut self, dim: usize) {
        if self.weights.len() < dim {
            self.weights.resize(dim, 0.0);
        }
    }
}

/// Past-time STL formula.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Formula {
    Atom(Atom),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    /// held at least once within the mask
    Once(IntervalMask, Box<Formula>),
    /// held at every step within the mask
    Hist(IntervalMask, Box<Formula>),
    /// `left S right`: right held at some masked offset, left held from then until now
    Since(IntervalMask, Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn atom(a: Atom) -> Self {
        Formula::Atom(a)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(l: Formula, r: Formula) -> Self {
        Formula::And(Box::new(l), Box::new(r))
    }

    pub fn or(l: Formula, r: Formula) -> Self {
        Formula::Or(Box::new(l), Box::new(r))
    }

    pub fn once(mask: IntervalMask, f: Formula) -> Self {
        Formula::Once(mask, Box::new(f))
    }

    pub fn hist(mask: IntervalMask, f: Formula) -> Self {
        Formula::Hist(mask, Box::new(f))
    }

    pub fn since(mask: IntervalMask, l: Formula, r: Formula) -> Self {
        Formula::Since(mask, Box::new(l), Box::new(r))
    }

    /// Number of atoms plus operator nodes.
    pub fn length(&self) -> usize {
        match self {
            Formula::Atom(_) => 1,
            Formula::Not(f) | Formula::Once(_, f) | Formula::Hist(_, f) => 1 + f.length(),
            Formula::And(l, r) | Formula::Or(l, r) | Formula::Since(_, l, r) => {
                1 + l.length() + r.length()
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Formula::Atom(_) => 0,
            Formula::Not(f) | Formula::Once(_, f) | Formula::Hist(_, f) => 1 + f.depth(),
            Formula::And(l, r) | Formula::Or(l, r) | Formula::Since(_, l, r) => {
                1 + l.depth().max(r.depth())
            }
        }
    }

    /// Largest atom weight-vector length in the tree.
    pub fn dim(&self) -> usize {
        let mut d = 0;
        self.visit_atoms(&mut |a| d = d.max(a.weights.len()));
        d
    }

    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a Atom>) {
        match self {
            Formula::Atom(a) => out.push(a),
            Formula::Not(f) | Formula::Once(_, f) | Formula::Hist(_, f) => f.collect_atoms(out),
            Formula::And(l, r) | Formula::Or(l, r) | Formula::Since(_, l, r) => {
                l.collect_atoms(out);
                r.collect_atoms(out);
            }
        }
    }

    fn visit_atoms(&self, f: &mut impl FnMut(&Atom)) {
        for a in self.atoms() {
            f(a);
        }
    }

    pub(crate) fn visit_atoms_mut(&mut self, f: &mut impl FnMut(&mut Atom)) {
        match self {
            Formula::Atom(a) => f(a),
            Formula::Not(g) | Formula::Once(_, g) | Formula::Hist(_, g) => g.visit_atoms_mut(f),
            Formula::And(l, r) | Formula::Or(l, r) | Formula::Since(_, l, r) => {
                l.visit_atoms_mut(f);
                r.visit_atoms_mut(f);
            }
        }
    }

    /// Zero-pads every atom to `dim` weights.
    pub fn padded(mut self, dim: usize) -> Self {
        self.visit_atoms_mut(&mut |a| a.pad_to(dim));
        self
    }

    pub fn has_bounded_mask(&self) -> bool {
        match self {
            Formula::Atom(_) => false,
            Formula::Not(f) => f.has_bounded_mask(),
            Formula::And(l, r) | Formula::Or(l, r) => l.has_bounded_mask() || r.has_bounded_mask(),
            Formula::Once(m, f) | Formula::Hist(m, f) => !m.is_unbounded() || f.has_bounded_mask(),
            Formula::Since(m, l, r) => {
                !m.is_unbounded() || l.has_bounded_mask() || r.has_bounded_mask()
            }
        }
    }

    /// Negation of `self` with the `!` pushed inward.
    ///
    /// Uses identities that hold exactly for robustness values: atoms flip
    /// sign, `!!f = f`, De Morgan for `&`/`|`, and `!F f = G !f`. Only a
    /// negated `S` keeps an explicit `!`.
    pub fn negate(&self) -> Formula {
        match self {
            Formula::Atom(a) => Formula::Atom(a.negated()),
            Formula::Not(f) => f.negation_normal_form(),
            Formula::And(l, r) => Formula::or(l.negate(), r.negate()),
            Formula::Or(l, r) => Formula::and(l.negate(), r.negate()),
            Formula::Once(m, f) => Formula::hist(m.clone(), f.negate()),
            Formula::Hist(m, f) => Formula::once(m.clone(), f.negate()),
            Formula::Since(..) => Formula::not(self.negation_normal_form()),
        }
    }

    /// Pushes every `!` down to the atoms (or to an `S` node, where it stays).
    pub fn negation_normal_form(&self) -> Formula {
        match self {
            Formula::Atom(a) => Formula::Atom(a.clone()),
            Formula::Not(f) => f.negate(),
            Formula::And(l, r) => Formula::and(l.negation_normal_form(), r.negation_normal_form()),
            Formula::Or(l, r) => Formula::or(l.negation_normal_form(), r.negation_normal_form()),
            Formula::Once(m, f) => Formula::once(m.clone(), f.negation_normal_form()),
            Formula::Hist(m, f) => Formula::hist(m.clone(), f.negation_normal_form()),
            Formula::Since(m, l, r) => Formula::since(
                m.clone(),
                l.negation_normal_form(),
                r.negation_normal_form(),
            ),
        }
    }
}
