#![allow(dead_code)]

use fernn_core::stl::{Atom, Formula, IntervalMask, Trace};
use rand::Rng;

/// Random unbounded formula over single-feature or dense atoms.
pub fn random_formula(rng: &mut impl Rng, depth: usize, dim: usize) -> Formula {
    if depth == 0 || rng.gen_bool(0.25) {
        return Formula::atom(random_atom(rng, dim));
    }
    let un = IntervalMask::Unbounded;
    let sub = |rng: &mut _| random_formula(rng, depth - 1, dim);
    match rng.gen_range(0..6) {
        0 => Formula::not(sub(rng)),
        1 => {
            let l = sub(rng);
            Formula::and(l, sub(rng))
        }
        2 => {
            let l = sub(rng);
            Formula::or(l, sub(rng))
        }
        3 => Formula::once(un, sub(rng)),
        4 => Formula::hist(un, sub(rng)),
        _ => {
            let l = sub(rng);
            Formula::since(un, l, sub(rng))
        }
    }
}

pub fn random_atom(rng: &mut impl Rng, dim: usize) -> Atom {
    if rng.gen_bool(0.5) {
        let k = rng.gen_range(0..dim);
        let c = rng.gen_range(-1.0..1.0);
        if rng.gen_bool(0.5) {
            Atom::ge(k, c, dim)
        } else {
            Atom::le(k, c, dim)
        }
    } else {
        Atom::new((0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect(), rng.gen_range(-1.0..1.0))
    }
}

/// Random formula whose atoms are `x_k >= 0` or `-x_k >= 0` (values `+-1`
/// on `+-1` traces).
pub fn random_sign_formula(rng: &mut impl Rng, depth: usize, dim: usize) -> Formula {
    let mut f = random_formula(rng, depth, dim);
    let mut fix = |a: &mut Atom| {
        let k = rng.gen_range(0..dim);
        let s = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        a.weights = vec![0.0; dim];
        a.weights[k] = s;
        a.bias = 0.0;
    };
    visit_atoms(&mut f, &mut fix);
    f
}

pub fn visit_atoms(f: &mut Formula, g: &mut impl FnMut(&mut Atom)) {
    match f {
        Formula::Atom(a) => g(a),
        Formula::Not(a) | Formula::Once(_, a) | Formula::Hist(_, a) => visit_atoms(a, g),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Since(_, a, b) => {
            visit_atoms(a, g);
            visit_atoms(b, g);
        }
    }
}

pub fn random_trace(rng: &mut impl Rng, len: usize, dim: usize) -> Trace {
    let rows = (0..len).map(|_| (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
    Trace::new("r", rows, 1.0).unwrap()
}

pub fn random_sign_trace(rng: &mut impl Rng, len: usize, dim: usize) -> Trace {
    let rows = (0..len)
        .map(|_| (0..dim).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect())
        .collect();
    Trace::new("b", rows, 1.0).unwrap()
}
