//! Benchmark-only crate; see `benches/curriculum.rs`.
