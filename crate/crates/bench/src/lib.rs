//! Criterion benchmarks for `fracheat-core`; run with `cargo bench -p fracheat-bench`.
