//! Criterion benchmarks for `calderon-core`; run with `cargo bench -p calderon-bench`.
