//! Benchmark-only crate; see `benches/identify.rs`.
