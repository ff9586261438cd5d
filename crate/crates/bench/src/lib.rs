//! Criterion benchmarks for the scheduling toolkit live in `benches/`.
