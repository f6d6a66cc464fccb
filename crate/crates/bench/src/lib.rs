//! Fixtures shared by the benchmarks.

use nalgebra::DMatrix;
use secctl::scenario::{prepare, preset, Prepared};

/// Deterministic PSD pair `(MᵀM, NᵀN)` of size `n`, with `ker(Q) = {0}`.
pub fn psd_pair(n: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let m = DMatrix::from_fn(n, n, |i, j| ((i * 7 + j * 3) % 11) as f64 / 11.0 - 0.4);
    let q = DMatrix::from_fn(n, n, |i, j| ((i * 5 + j * 2 + 1) % 13) as f64 / 13.0 + if i == j { 1.0 } else { 0.0 });
    (m.transpose() * &m, q.transpose() * &q)
}

pub fn prepared(name: &str) -> Prepared {
    prepare(&preset(name).expect("preset parses")).expect("preset prepares")
}
