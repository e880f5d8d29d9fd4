//! Acceptance suite for `cf-assign`. The criteria live in `tests/acceptance.rs`.
