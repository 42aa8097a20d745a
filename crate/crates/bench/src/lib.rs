//! Criterion benchmarks for the hot paths of `cdqn-core`; see `benches/`.
