//! Criterion benchmarks for the footlab pipeline stages; see `benches/`.
