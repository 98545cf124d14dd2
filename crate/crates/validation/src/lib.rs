//! Host crate for the acceptance suite in `tests/acceptance.rs`. It is a
//! separate package so that the suite runs after every other test binary.
