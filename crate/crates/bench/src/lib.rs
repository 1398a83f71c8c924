//! Criterion benchmarks for `addiso-core`; see `benches/`.
