//! Architecture builders.
//!
//! A fixed-length model is built from "towers". `tower(1)` is a choice over
//! single-feature atoms, one `>=`-leaning and one `<=`-leaning atom per
//! feature. For a budget `b >= 2`, `tower(b)` is a choice over
//!
//! - `!u`, `F u`, `G u` with `u = tower(b - 1)`,
//! - `l & r`, `l | r` with independent towers splitting `b - 1` (when `b >= 3`),
//! - `l S r` with towers splitting `b - 2` (when `b >= 4` and Since is enabled).
//!
//! A `-1` choice weight negates the chosen input. Negations move onto atoms
//! exactly through `&`, `|`, `F`, `G`, but a negated `S` keeps its `!`, which is
//! why `S` is offered one step later than `&`/`|`. With negations pushed
//! inward every extracted formula has length at most `b`, and `F u`/`G u`
//! over a length-`(b-1)` `u` reach `b` exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{ParamId, ParamStore};
use crate::stl::{Formula, IntervalMask};

use super::{Cell, CellId, FernnError, Head, IntervalKind, ModelSpec, DEFAULT_DROP_MAGNITUDE};

/// Longest fixed-length architecture the builders produce.
pub const MAX_LENGTH: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildOptions {
    pub use_since: bool,
    pub head: Head,
    pub seed: u64,
    /// drop magnitude `M` for interval cells
    pub magnitude: f64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            use_since: true,
            head: Head::Tanh,
            seed: 0,
            magnitude: DEFAULT_DROP_MAGNITUDE,
        }
    }
}

struct Builder {
    dim: usize,
    use_since: bool,
    cells: Vec<Cell>,
    params: ParamStore,
    rng: ChaCha8Rng,
}

impl Builder {
    fn new(dim: usize, opts: &BuildOptions) -> Self {
        Builder {
            dim,
            use_since: opts.use_since,
            cells: Vec::new(),
            params: ParamStore::new(),
            rng: ChaCha8Rng::seed_from_u64(opts.seed),
        }
    }

    fn push(&mut self, cell: Cell) -> CellId {
        self.cells.push(cell);
        CellId(self.cells.len() as u32 - 1)
    }

    fn choice_weight(&mut self) -> ParamId {
        let w = self.rng.gen_range(0.4..0.6);
        self.params.add(w)
    }

    fn choice(&mut self, inputs: Vec<CellId>) -> CellId {
        let weights = inputs.iter().map(|_| self.choice_weight()).collect();
        self.push(Cell::Choice { inputs, weights })
    }

    /// Atom on one feature with its threshold somewhere in the normalized range.
    fn atom(&mut self, feature: usize, direction: f64) -> CellId {
        let w = direction * self.rng.gen_range(0.5..1.0);
        let threshold: f64 = self.rng.gen_range(0.0..1.0);
        let weight = self.params.add(w);
        let bias = self.params.add(-w * threshold);
        self.push(Cell::Atom {
            features: vec![feature],
            weights: vec![weight],
            bias,
        })
    }

    fn atom_choice(&mut self) -> CellId {
        let mut atoms = Vec::with_capacity(2 * self.dim);
        for k in 0..self.dim {
            atoms.push(self.atom(k, 1.0));
            atoms.push(self.atom(k, -1.0));
        }
        self.choice(atoms)
    }

    /// Returns the tower for `budget` and the chain of unary children below
    /// it (`spine[k - 1]` is the tower of budget `k`).
    fn tower(&mut self, budget: usize) -> (CellId, Vec<CellId>) {
        if budget == 1 {
            let a = self.atom_choice();
            return (a, vec![a]);
        }
        let (u, mut spine) = self.tower(budget - 1);
        let mut cands = vec![
            self.push(Cell::Not(u)),
            self.push(Cell::Once(u)),
            self.push(Cell::Hist(u)),
        ];
        if budget >= 3 {
            let rest = budget - 1;
            let (l, _) = self.tower(rest.div_ceil(2));
            let (r, _) = self.tower(rest / 2);
            cands.push(self.push(Cell::And(l, r)));
            cands.push(self.push(Cell::Or(l, r)));
        }
        if budget >= 4 && self.use_since {
            let rest = budget - 2;
            let (l, _) = self.tower(rest.div_ceil(2));
            let (r, _) = self.tower(rest / 2);
            cands.push(self.push(Cell::Since(l, r)));
        }
        let top = self.choice(cands);
        spine.push(top);
        (top, spine)
    }

    fn finish(self, output: CellId, head: Head) -> ModelSpec {
        ModelSpec {
            dim: self.dim,
            cells: self.cells,
            output,
            head,
            params: self.params,
            normalization: None,
        }
    }
}

fn check_dims(len: usize, dim: usize) -> Result<(), FernnError> {
    if !(2..=MAX_LENGTH).contains(&len) {
        return Err(FernnError::UnsupportedLength(len));
    }
    if dim == 0 {
        return Err(FernnError::Invalid("model needs at least one feature".into()));
    }
    Ok(())
}

/// Model whose extracted formulas (negations pushed inward) have length at
/// most `len`, with length exactly `len` reachable.
pub fn build_fixed_length(len: usize, dim: usize, opts: &BuildOptions) -> Result<ModelSpec, FernnError> {
    check_dims(len, dim)?;
    let mut b = Builder::new(dim, opts);
    let (top, _) = b.tower(len);
    Ok(b.finish(top, opts.head))
}

/// Fixed-length towers `1..=max_len` joined by a final choice block. The
/// smaller towers are the ones already nested inside the largest, so they
/// share cells and parameters.
pub fn build_up_to_length(max_len: usize, dim: usize, opts: &BuildOptions) -> Result<ModelSpec, FernnError> {
    check_dims(max_len, dim)?;
    let mut b = Builder::new(dim, opts);
    let (_, spine) = b.tower(max_len);
    let top = b.choice(spine);
    Ok(b.finish(top, opts.head))
}

/// Bounded Once/Hist over a choice of atoms, with offsets `0..=window`
/// weighted and learned.
pub fn build_interval(
    kind: IntervalKind,
    window: usize,
    dim: usize,
    opts: &BuildOptions,
) -> Result<ModelSpec, FernnError> {
    if dim == 0 {
        return Err(FernnError::Invalid("model needs at least one feature".into()));
    }
    if opts.magnitude <= 0.0 {
        return Err(FernnError::Invalid("drop magnitude must be positive".into()));
    }
    let mut b = Builder::new(dim, opts);
    let input = b.atom_choice();
    let weights = (0..=window)
        .map(|_| {
            let w = b.rng.gen_range(0.4..0.6);
            b.params.add(w)
        })
        .collect();
    let shift = b.params.add_fixed(0.0);
    let top = b.push(Cell::Interval {
        kind,
        input,
        weights,
        magnitude: opts.magnitude,
        shift,
    });
    Ok(b.finish(top, opts.head))
}

/// Hardwires a formula into cells (no choice blocks, identity head).
///
/// Bounded `F`/`G` become interval cells whose weights are `+1` on the mask
/// and `-1` elsewhere. Bounded `S` is not supported.
pub fn from_formula(f: &Formula, dim: usize) -> Result<ModelSpec, FernnError> {
    fn go(f: &Formula, b: &mut Builder) -> Result<CellId, FernnError> {
        Ok(match f {
            Formula::Atom(a) => {
                if a.weights.len() != b.dim {
                    return Err(FernnError::DimensionMismatch {
                        expected: b.dim,
                        found: a.weights.len(),
                    });
                }
                let weights = a.weights.iter().map(|w| b.params.add(*w)).collect();
                let bias = b.params.add(a.bias);
                b.push(Cell::Atom {
                    features: (0..b.dim).collect(),
                    weights,
                    bias,
                })
            }
            Formula::Not(g) => {
                let c = go(g, b)?;
                b.push(Cell::Not(c))
            }
            Formula::And(l, r) => {
                let (l, r) = (go(l, b)?, go(r, b)?);
                b.push(Cell::And(l, r))
            }
            Formula::Or(l, r) => {
                let (l, r) = (go(l, b)?, go(r, b)?);
                b.push(Cell::Or(l, r))
            }
            Formula::Once(IntervalMask::Unbounded, g) => {
                let c = go(g, b)?;
                b.push(Cell::Once(c))
            }
            Formula::Hist(IntervalMask::Unbounded, g) => {
                let c = go(g, b)?;
                b.push(Cell::Hist(c))
            }
            Formula::Since(IntervalMask::Unbounded, l, r) => {
                let (l, r) = (go(l, b)?, go(r, b)?);
                b.push(Cell::Since(l, r))
            }
            Formula::Once(IntervalMask::Steps(steps), g) | Formula::Hist(IntervalMask::Steps(steps), g) => {
                let kind = if matches!(f, Formula::Once(..)) {
                    IntervalKind::Once
                } else {
                    IntervalKind::Hist
                };
                let input = go(g, b)?;
                let window = *steps.last().expect("masks are non-empty");
                let weights = (0..=window)
                    .map(|k| b.params.add(if steps.contains(&k) { 1.0 } else { -1.0 }))
                    .collect();
                let shift = b.params.add_fixed(0.0);
                b.push(Cell::Interval {
                    kind,
                    input,
                    weights,
                    magnitude: DEFAULT_DROP_MAGNITUDE,
                    shift,
                })
            }
            Formula::Since(IntervalMask::Steps(_), ..) => {
                return Err(FernnError::Unsupported("bounded Since".into()))
            }
        })
    }
    let mut b = Builder::new(dim, &BuildOptions::default());
    let top = go(f, &mut b)?;
    Ok(b.finish(top, Head::Identity))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn length_two_layout() {
        let m = build_fixed_length(2, 1, &BuildOptions::default()).unwrap();
        m.validate().unwrap();
        // atom choice over {x0 >=, x0 <=}, then a choice over {!, F, G}
        assert_eq!(m.choice_blocks(), 2);
        match m.cell(m.output) {
            Cell::Choice { inputs, .. } => {
                let kinds: Vec<_> = inputs.iter().map(|c| m.cell(*c).clone()).collect();
                assert!(matches!(kinds[0], Cell::Not(_)));
                assert!(matches!(kinds[1], Cell::Once(_)));
                assert!(matches!(kinds[2], Cell::Hist(_)));
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(m.embedded_structures(), 6);
    }

    #[test]
    fn unsupported_lengths() {
        assert!(matches!(
            build_fixed_length(1, 1, &BuildOptions::default()),
            Err(FernnError::UnsupportedLength(1))
        ));
        assert!(matches!(
            build_fixed_length(7, 1, &BuildOptions::default()),
            Err(FernnError::UnsupportedLength(7))
        ));
    }

    #[test]
    fn no_since_variant_has_no_since_cells() {
        let opts = BuildOptions {
            use_since: false,
            ..Default::default()
        };
        let m = build_fixed_length(6, 2, &opts).unwrap();
        assert!(!m.cells.iter().any(|c| matches!(c, Cell::Since(..))));
        let with = build_fixed_length(6, 2, &BuildOptions::default()).unwrap();
        assert!(with.cells.iter().any(|c| matches!(c, Cell::Since(..))));
        assert!(with.cells.len() > m.cells.len());
    }

    #[test]
    fn length_six_has_many_choices() {
        let m = build_fixed_length(6, 1, &BuildOptions::default()).unwrap();
        m.validate().unwrap();
        assert!(m.choice_blocks() >= 5);
        assert!(m.embedded_structures() >= 1 << m.choice_blocks().min(100));
    }

    #[test]
    fn builders_are_seeded() {
        let a = build_fixed_length(3, 2, &BuildOptions { seed: 9, ..Default::default() }).unwrap();
        let b = build_fixed_length(3, 2, &BuildOptions { seed: 9, ..Default::default() }).unwrap();
        let c = build_fixed_length(3, 2, &BuildOptions { seed: 10, ..Default::default() }).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.params, c.params);
    }
}
