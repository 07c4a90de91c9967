//! Enumerative baseline: every formula structure up to a length, with atom
//! thresholds fitted by grid search. Slow, but exhaustive, which makes it a
//! reference point for what the network should find.

use std::fmt;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::stl::{format_with_features, robustness_recurrent, sign, Atom, Formula, IntervalMask, StlError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    /// `x >= theta`
    Ge,
    /// `x <= theta`
    Le,
}

/// A formula with a free threshold in every atom.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Structure {
    Atom { feature: usize, dir: Direction },
    Not(Box<Structure>),
    And(Box<Structure>, Box<Structure>),
    Or(Box<Structure>, Box<Structure>),
    Once(Box<Structure>),
    Hist(Box<Structure>),
    Since(Box<Structure>, Box<Structure>),
}

impl Structure {
    pub fn length(&self) -> usize {
        match self {
            Structure::Atom { .. } => 1,
            Structure::Not(a) | Structure::Once(a) | Structure::Hist(a) => 1 + a.length(),
            Structure::And(a, b) | Structure::Or(a, b) | Structure::Since(a, b) => 1 + a.length() + b.length(),
        }
    }

    /// Atoms in left-to-right order, one threshold slot each.
    pub fn slots(&self) -> Vec<(usize, Direction)> {
        let mut out = Vec::new();
        self.collect_slots(&mut out);
        out
    }

    fn collect_slots(&self, out: &mut Vec<(usize, Direction)>) {
        match self {
            Structure::Atom { feature, dir } => out.push((*feature, *dir)),
            Structure::Not(a) | Structure::Once(a) | Structure::Hist(a) => a.collect_slots(out),
            Structure::And(a, b) | Structure::Or(a, b) | Structure::Since(a, b) => {
                a.collect_slots(out);
                b.collect_slots(out);
            }
        }
    }

    /// Fills the slots in order with `thresholds`.
    ///
    /// # Panics
    ///
    /// If `thresholds` is shorter than the number of slots.
    pub fn instantiate(&self, thresholds: &[f64], dim: usize) -> Formula {
        let mut it = thresholds.iter().copied();
        self.fill(&mut it, dim)
    }

    fn fill(&self, th: &mut impl Iterator<Item = f64>, dim: usize) -> Formula {
        let un = IntervalMask::Unbounded;
        match self {
            Structure::Atom { feature, dir } => {
                let t = th.next().expect("one threshold per slot");
                Formula::atom(match dir {
                    Direction::Ge => Atom::ge(*feature, t, dim),
                    Direction::Le => Atom::le(*feature, t, dim),
                })
            }
            Structure::Not(a) => Formula::not(a.fill(th, dim)),
            Structure::And(a, b) => {
                let l = a.fill(th, dim);
                Formula::and(l, b.fill(th, dim))
            }
            Structure::Or(a, b) => {
                let l = a.fill(th, dim);
                Formula::or(l, b.fill(th, dim))
            }
            Structure::Once(a) => Formula::once(un, a.fill(th, dim)),
            Structure::Hist(a) => Formula::hist(un, a.fill(th, dim)),
            Structure::Since(a, b) => {
                let l = a.fill(th, dim);
                Formula::since(un, l, b.fill(th, dim))
            }
        }
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Structure::Atom { feature, dir: Direction::Ge } => write!(f, "x{feature} >= _"),
            Structure::Atom { feature, dir: Direction::Le } => write!(f, "x{feature} <= _"),
            Structure::Not(a) => write!(f, "!({a})"),
            Structure::And(a, b) => write!(f, "({a}) & ({b})"),
            Structure::Or(a, b) => write!(f, "({a}) | ({b})"),
            Structure::Once(a) => write!(f, "F ({a})"),
            Structure::Hist(a) => write!(f, "G ({a})"),
            Structure::Since(a, b) => write!(f, "({a}) S ({b})"),
        }
    }
}

/// Operators available to the enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpSet {
    pub not: bool,
    pub and: bool,
    pub or: bool,
    pub once: bool,
    pub hist: bool,
    pub since: bool,
}

impl OpSet {
    pub const ALL: OpSet = OpSet {
        not: true,
        and: true,
        or: true,
        once: true,
        hist: true,
        since: true,
    };
}

impl Default for OpSet {
    fn default() -> Self {
        OpSet::ALL
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnumConfig {
    pub max_length: usize,
    /// threshold candidates per feature, evenly spaced over the observed range
    pub grid: usize,
    pub ops: OpSet,
    /// stop at the first structure whose MCR is below this, when `early_exit` is set
    pub target_mcr: f64,
    pub early_exit: bool,
    pub structure_cap: usize,
    /// keep the first `structure_cap` structures instead of failing
    pub allow_truncation: bool,
    /// structures with more atoms than this are skipped (grid size grows as `grid^k`)
    pub max_thresholds: usize,
}

impl Default for EnumConfig {
    fn default() -> Self {
        EnumConfig {
            max_length: 2,
            grid: 25,
            ops: OpSet::ALL,
            target_mcr: 0.2,
            early_exit: true,
            structure_cap: 50_000,
            allow_truncation: false,
            max_thresholds: 2,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EnumError {
    #[error("max length must be at least 1")]
    BadLength,
    #[error("threshold grid needs at least 2 points")]
    BadGrid,
    #[error("more than {cap} structures; raise the cap or allow truncation")]
    CapExceeded { cap: usize },
    #[error("structure has {found} thresholds, the grid budget allows {max}")]
    TooManyThresholds { found: usize, max: usize },
    #[error("dataset is empty")]
    Empty,
    #[error(transparent)]
    Stl(#[from] StlError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Enumeration {
    pub structures: Vec<Structure>,
    /// the cap cut the list short
    pub truncated: bool,
}

/// Every structure of length `1..=max_len` over `x_k >= _` / `x_k <= _`
/// atoms, shortest first.
///
/// Syntactic duplicates are pruned: no `!!a`, and the operands of `&` and
/// `|` are distinct and ordered (shorter first, then by enumeration order).
pub fn enumerate_structures(max_len: usize, dim: usize, ops: &OpSet, cap: usize) -> Result<Enumeration, EnumError> {
    if max_len == 0 {
        return Err(EnumError::BadLength);
    }
    // by_len[n] holds the structures of length exactly n
    let mut by_len: Vec<Vec<Structure>> = vec![Vec::new()];
    let mut total = 0usize;
    let mut truncated = false;
    'outer: for n in 1..=max_len {
        let mut cur = Vec::new();
        let mut push = |s: Structure, cur: &mut Vec<Structure>| -> bool {
            if total >= cap {
                truncated = true;
                return false;
            }
            total += 1;
            cur.push(s);
            true
        };
        if n == 1 {
            for k in 0..dim {
                for dir in [Direction::Ge, Direction::Le] {
                    if !push(Structure::Atom { feature: k, dir }, &mut cur) {
                        by_len.push(cur);
                        break 'outer;
                    }
                }
            }
            by_len.push(cur);
            continue;
        }
        let mut stop = false;
        for s in &by_len[n - 1] {
            let b = || Box::new(s.clone());
            let mut cands = Vec::new();
            if ops.not && !matches!(s, Structure::Not(_)) {
                cands.push(Structure::Not(b()));
            }
            if ops.once {
                cands.push(Structure::Once(b()));
            }
            if ops.hist {
                cands.push(Structure::Hist(b()));
            }
            for c in cands {
                if !push(c, &mut cur) {
                    stop = true;
                    break;
                }
            }
            if stop {
                break;
            }
        }
        if !stop && n >= 3 {
            let rest = n - 1;
            'pairs: for ll in 1..rest {
                let rl = rest - ll;
                for (i, l) in by_len[ll].iter().enumerate() {
                    for (j, r) in by_len[rl].iter().enumerate() {
                        let mut cands = Vec::new();
                        let ordered = ll < rl || (ll == rl && i < j);
                        if ordered {
                            if ops.and {
                                cands.push(Structure::And(Box::new(l.clone()), Box::new(r.clone())));
                            }
                            if ops.or {
                                cands.push(Structure::Or(Box::new(l.clone()), Box::new(r.clone())));
                            }
                        }
                        if ops.since {
                            cands.push(Structure::Since(Box::new(l.clone()), Box::new(r.clone())));
                        }
                        for c in cands {
                            if !push(c, &mut cur) {
                                stop = true;
                                break 'pairs;
                            }
                        }
                    }
                }
            }
        }
        by_len.push(cur);
        if stop {
            break;
        }
    }
    Ok(Enumeration {
        structures: by_len.into_iter().flatten().collect(),
        truncated,
    })
}

/// Threshold candidates per feature.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub points: Vec<Vec<f64>>,
}

impl Grid {
    /// `size` evenly spaced values from the smallest to the largest observed
    /// value of each feature.
    pub fn from_data(ds: &Dataset, size: usize) -> Result<Self, EnumError> {
        if size < 2 {
            return Err(EnumError::BadGrid);
        }
        if ds.is_empty() {
            return Err(EnumError::Empty);
        }
        let points = (0..ds.dim())
            .map(|k| {
                let (lo, hi) = ds
                    .traces
                    .iter()
                    .flat_map(|t| t.feature(k))
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
                (0..size)
                    .map(|i| lo + (hi - lo) * i as f64 / (size - 1) as f64)
                    .collect()
            })
            .collect();
        Ok(Grid { points })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fit {
    pub thresholds: Vec<f64>,
    pub mcr: f64,
    pub formula: Formula,
}

/// Exhaustive grid search over the threshold tuples of `s`. Ties go to the
/// lexicographically smallest tuple of grid indices.
pub fn fit_structure(s: &Structure, ds: &Dataset, grid: &Grid, max_thresholds: usize) -> Result<Fit, EnumError> {
    if ds.is_empty() {
        return Err(EnumError::Empty);
    }
    let slots = s.slots();
    if slots.len() > max_thresholds {
        return Err(EnumError::TooManyThresholds {
            found: slots.len(),
            max: max_thresholds,
        });
    }
    let sizes: Vec<usize> = slots.iter().map(|(k, _)| grid.points[*k].len()).collect();
    let mut idx = vec![0usize; slots.len()];
    let mut best: Option<Fit> = None;
    let mut th = vec![0.0; slots.len()];
    loop {
        for (i, (k, _)) in slots.iter().enumerate() {
            th[i] = grid.points[*k][idx[i]];
        }
        let f = s.instantiate(&th, ds.dim());
        let mut wrong = 0usize;
        for t in &ds.traces {
            let r = *robustness_recurrent(&f, t)?.last().expect("traces are non-empty");
            if sign(r) != sign(t.label) {
                wrong += 1;
            }
        }
        let mcr = wrong as f64 / ds.len() as f64;
        if best.as_ref().is_none_or(|b| mcr < b.mcr) {
            best = Some(Fit {
                thresholds: th.clone(),
                mcr,
                formula: f,
            });
        }
        // odometer over grid indices, last slot fastest
        let mut i = slots.len();
        loop {
            if i == 0 {
                return Ok(best.expect("at least one tuple"));
            }
            i -= 1;
            idx[i] += 1;
            if idx[i] < sizes[i] {
                break;
            }
            idx[i] = 0;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnumReport {
    pub best_formula: String,
    pub best_structure: String,
    pub thresholds: Vec<f64>,
    pub mcr: f64,
    pub structures_enumerated: usize,
    /// structures actually fitted (fewer with early exit)
    pub structures_tried: usize,
    /// structures over the threshold budget
    pub structures_skipped: usize,
    pub truncated: bool,
    pub early_exit_hit: bool,
    pub wall_time_s: f64,
    pub config: EnumConfig,
}

/// Best formula over every enumerated structure (or the first one below the
/// target MCR with early exit on). Ties go to the smaller formula text.
pub fn run(ds: &Dataset, cfg: &EnumConfig) -> Result<EnumReport, EnumError> {
    let start = Instant::now();
    if ds.is_empty() {
        return Err(EnumError::Empty);
    }
    let en = enumerate_structures(cfg.max_length, ds.dim(), &cfg.ops, cfg.structure_cap)?;
    if en.truncated && !cfg.allow_truncation {
        return Err(EnumError::CapExceeded { cap: cfg.structure_cap });
    }
    let grid = Grid::from_data(ds, cfg.grid)?;
    let fittable: Vec<&Structure> = en
        .structures
        .iter()
        .filter(|s| s.slots().len() <= cfg.max_thresholds)
        .collect();
    let skipped = en.structures.len() - fittable.len();

    let names = &ds.feature_names;
    let key = |f: &Fit| format_with_features(&f.formula, names);
    let mut best: Option<(Fit, &Structure, String)> = None;
    let mut tried = 0;
    let mut hit = false;
    // chunks keep early exit faithful to enumeration order
    let chunk = if cfg.early_exit { rayon::current_num_threads().max(1) * 4 } else { fittable.len().max(1) };
    for batch in fittable.chunks(chunk) {
        let fits: Vec<Fit> = batch
            .par_iter()
            .map(|s| fit_structure(s, ds, &grid, cfg.max_thresholds))
            .collect::<Result<_, _>>()?;
        for (fit, s) in fits.into_iter().zip(batch) {
            tried += 1;
            let text = key(&fit);
            let better = match &best {
                None => true,
                Some((b, _, bt)) => (fit.mcr, &text) < (b.mcr, bt),
            };
            if better {
                best = Some((fit, s, text));
            }
            if cfg.early_exit && best.as_ref().is_some_and(|b| b.0.mcr < cfg.target_mcr) {
                hit = true;
                break;
            }
        }
        if hit {
            break;
        }
    }
    let (fit, s, text) = best.ok_or(EnumError::TooManyThresholds {
        found: cfg.max_thresholds + 1,
        max: cfg.max_thresholds,
    })?;
    Ok(EnumReport {
        best_formula: text,
        best_structure: s.to_string(),
        thresholds: fit.thresholds,
        mcr: fit.mcr,
        structures_enumerated: en.structures.len(),
        structures_tried: tried,
        structures_skipped: skipped,
        truncated: en.truncated,
        early_exit_hit: hit,
        wall_time_s: start.elapsed().as_secs_f64(),
        config: cfg.clone(),
    })
}
