//! Run directories, file schemas, scenario files and the command line.

pub mod artifacts;
pub mod cli;
pub mod scenario;
pub mod schema;

pub use artifacts::{read_manifest, sha256_hex, verify_manifest, FileEntry, Manifest, RunWriter, MANIFEST_NAME};
pub use cli::run_command;
pub use scenario::{parse_scenario, ConfigSource, ScenarioFile};
