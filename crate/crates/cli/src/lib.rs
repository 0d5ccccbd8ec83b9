//! Command implementations behind the `pssa` binary: benchmark runs, the
//! slack-weight ablation, oracle verification suites and manifest replay.

pub mod ablate;
pub mod bench;
pub mod error;
pub mod manifest;
pub mod replay;
pub mod verify;
pub mod workers;
