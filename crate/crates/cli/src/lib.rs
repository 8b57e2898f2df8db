//! IO and orchestration around `erpstream-core`: the `ERS1` session file
//! format, `ERPW` weight files, detector bundle directories, concurrent
//! fan-out inference with wall-clock accounting, the leave-one-session-out
//! evaluation driver, and report rendering. The `erpstream` binary wires
//! these to a JSON run configuration.

pub mod bundle;
pub mod dataset;
pub mod error;
pub mod ers1;
pub mod orchestrator;
pub mod protocol;
pub mod report;
pub mod runconfig;
pub mod weights;

pub use error::{CliError, ExitClass};
