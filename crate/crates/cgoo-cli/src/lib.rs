//! Library half of the command-line front end: configuration parsing,
//! dataset ingestion and synthesis, scenario execution, privacy audits,
//! and figure-data emission. The binary in `main.rs` is a thin dispatcher
//! over these modules.

pub mod config;
pub mod figures;
pub mod ingest;
pub mod scenario;

/// Process exit codes shared by every subcommand.
pub mod exit_codes {
    pub const SUCCESS: i32 = 0;
    pub const MALFORMED: i32 = 1;
    pub const TARGET_MISS: i32 = 2;
    pub const AUDIT_FAILED: i32 = 3;
    pub const UNSUPPORTED_AUDIT: i32 = 4;
}
