//! Criterion benchmarks for `squint-core`; see `benches/`.
