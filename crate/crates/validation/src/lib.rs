//! Acceptance checks for the spinmetro workspace. Everything lives in
//! `tests/acceptance.rs`; run it with `cargo test -p spinmetro-validation`.
