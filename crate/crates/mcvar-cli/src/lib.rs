//! File formats, configuration and subcommands for the `mcvar` command
//! line tool. The numerical work lives in the `mcvar` crate; this crate
//! owns everything that touches the file system.

pub mod commands;
pub mod config;
pub mod csv_io;
pub mod dates;
pub mod error;
pub mod fit_doc;
pub mod report;

pub use config::{Command, RunConfig};
pub use error::{CliError, CliResult};

/// Parses arguments and runs the selected command.
pub fn run(args: &[String]) -> CliResult<()> {
    let (command, config) = RunConfig::from_args(args)?;
    if config.threads > 1 {
        println!(
            "note: --threads {} requested; execution is sequential in this build",
            config.threads
        );
    }
    match command {
        Command::Preprocess => commands::cmd_preprocess(&config),
        Command::Fit => commands::cmd_fit(&config),
        Command::Network => commands::cmd_network(&config),
        Command::Simulate => commands::cmd_simulate(&config),
    }
}
