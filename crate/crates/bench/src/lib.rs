//! Shared fixtures for the benchmarks.

use fernn_core::data::{gen_cct, CctParams};
use fernn_core::{Dataset, Formula};

/// Seeded CCT-style dataset of `n` traces with `len` steps each.
pub fn cct(n: usize, len: usize) -> Dataset {
    gen_cct(&CctParams { n, len }, 11).expect("valid generator parameters")
}

/// Nested formula exercising every unbounded operator.
pub fn nested_formula() -> Formula {
    "((x0 <= 30) S (F (x0 >= 24))) | (G (x0 <= 34.3))"
        .parse::<Formula>()
        .map(|f| f.padded(1))
        .expect("valid formula")
}
