//! Criterion benchmarks for the `qfisher` crate live in `benches/`.
