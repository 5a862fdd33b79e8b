//! Entry point logic for the `aigcbias` binary.

use std::ffi::OsString;

use clap::Parser;

pub mod args;
mod audit;
mod generate;
mod ingest;
mod report;
mod resources;
mod topics;

use args::{AuditCommand, Cli, Command, TopicsCommand};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or configuration.
    Usage(String),
    /// Inputs that cannot be processed.
    Data(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<aigcbias::Error> for CliError {
    fn from(e: aigcbias::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<aigcbias_llm::LlmError> for CliError {
    fn from(e: aigcbias_llm::LlmError) -> Self {
        CliError::Data(e.to_string())
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Ingest(a) => ingest::run(a),
        Command::Generate(a) => generate::run(a),
        Command::Topics(TopicsCommand::Train(o)) => topics::train(o),
        Command::Topics(TopicsCommand::SelectK(a)) => topics::select_k(a),
        Command::Audit(AuditCommand::Word(o)) => audit::run(o, audit::levels(true, false, false)),
        Command::Audit(AuditCommand::Sentence(o)) => audit::run(o, audit::levels(false, true, false)),
        Command::Audit(AuditCommand::Document(o)) => audit::run(o, audit::levels(false, false, true)),
        Command::Audit(AuditCommand::All(o)) => audit::run(o, audit::levels(true, true, true)),
        Command::Report(a) => report::run(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{e}");
            match e {
                CliError::Usage(_) => EXIT_USAGE,
                CliError::Data(_) => EXIT_DATA,
            }
        }
    }
}
