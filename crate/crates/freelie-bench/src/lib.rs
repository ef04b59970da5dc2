//! Criterion benchmarks for the hot kernels of `freelie`: sparse elimination,
//! Hall basis construction, the matrix representation, identity checks and
//! Littlewood-Richardson products. Run with `cargo bench -p freelie-bench`.
