//! Criterion benchmarks for pbrforge kernels; see `benches/`.
