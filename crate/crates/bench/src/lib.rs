//! Benchmark-only crate; shared setup lives in the bench targets.
