//! Criterion benchmarks for `lss-core`; see `benches/`.
