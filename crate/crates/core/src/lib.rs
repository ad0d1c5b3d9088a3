//! Entanglement-assisted classical communication over the quantum erasure
//! channel: finite fields, MDS codes, a symbolic stabilizer simulator, a dense
//! reference simulator, code constructions, verification and rate bounds.

pub mod bounds;
pub mod cli;
pub mod codes;
pub mod densim;
pub mod entropy_audit;
pub mod gf;
pub mod mds;
pub mod qsym;
pub mod rational;
pub mod verify;

/// Schema tag written into every JSON document this crate produces.
pub const SCHEMA_VERSION: &str = "eacc-lab/1";
