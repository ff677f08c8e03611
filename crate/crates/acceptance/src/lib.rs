//! Holds no code; see `tests/acceptance.rs`.
