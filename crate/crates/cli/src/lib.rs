//! Command-line front end of `detglue-core`: config parsing, dispatch,
//! report files and exit codes.

pub mod config;
pub mod emit;
pub mod error;
pub mod run;

pub use config::{parse_config, RunConfig};
pub use emit::emit;
pub use error::CliError;
pub use run::{run, ReportEnvelope};

/// Whole pipeline for one invocation; returns the written paths.
pub fn main_with<I, T>(args: I) -> Result<Vec<std::path::PathBuf>, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let config = parse_config(args, None)?;
    let report = run(&config)?;
    emit(&report, config.output.format, &config.output.dir)
}
