//! The `jointshape` command-line tool.
//!
//! Exit codes:
//!
//! | code | class |
//! |------|-------|
//! | 0 | success |
//! | 2 | usage |
//! | 3 | InvalidInput |
//! | 4 | FormatError |
//! | 5 | CorrespondenceError |
//! | 6 | MissingRecord |
//! | 7 | InvalidLevel |
//! | 8 | InvalidRank |
//! | 9 | DegenerateMarginal |
//! | 10 | SingularConditioning |
//! | 11 | InvalidMode |
//! | 12 | LayoutMismatch |
//! | 13 | InvalidConfig |
//! | 14 | InvalidTask |
//! | 15 | Io |
//!
//! Failures print one line to stderr: `error[<class>]: <message>`.

use std::ffi::OsString;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{CommandFactory, Parser};
use jointshape::Error;

mod args;
mod commands;

pub use args::{Cli, Command};
pub use commands::run;

pub const EXIT_USAGE: u8 = 2;

pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidInput(_) => 3,
        Error::FormatError(_) => 4,
        Error::CorrespondenceError(_) => 5,
        Error::MissingRecord(_) => 6,
        Error::InvalidLevel { .. } => 7,
        Error::InvalidRank { .. } => 8,
        Error::DegenerateMarginal(_) => 9,
        Error::SingularConditioning => 10,
        Error::InvalidMode { .. } => 11,
        Error::LayoutMismatch(_) => 12,
        Error::InvalidConfig(_) => 13,
        Error::InvalidTask(_) => 14,
        Error::Io(_) => 15,
    }
}

/// Parses `args` (program name first), runs the command and reports errors.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Command::Condition(c) = &cli.command {
        if c.observation.assignments.is_empty() {
            let _ = Cli::command()
                .error(ErrorKind::MissingRequiredArgument, "condition needs at least one --set NAME=VALUE")
                .print();
            return ExitCode::from(EXIT_USAGE);
        }
    }
    let mut stdout = std::io::stdout().lock();
    match run(&cli, &mut stdout) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let message = err.to_string().replace('\n', " ");
            eprintln!("error[{}]: {message}", err.class());
            ExitCode::from(exit_code(&err))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_are_distinct_and_stable() {
        let errors = [
            Error::InvalidInput(String::new()),
            Error::FormatError(String::new()),
            Error::CorrespondenceError(String::new()),
            Error::MissingRecord(String::new()),
            Error::InvalidLevel { name: String::new(), value: String::new() },
            Error::InvalidRank { rank: 0, max: 0 },
            Error::DegenerateMarginal(String::new()),
            Error::SingularConditioning,
            Error::InvalidMode { k: 0, max: 0 },
            Error::LayoutMismatch(String::new()),
            Error::InvalidConfig(String::new()),
            Error::InvalidTask(String::new()),
            Error::Io(std::io::Error::other("x")),
        ];
        let codes: Vec<u8> = errors.iter().map(exit_code).collect();
        assert_eq!(codes, (3..=15).collect::<Vec<u8>>());
    }

    #[test]
    fn subcommands_parse() {
        let cli = Cli::try_parse_from(["jointshape", "mode", "--model", "m.json", "--k", "2", "--t", "-1.5", "--out", "x.obj"]).unwrap();
        match cli.command {
            Command::Mode(m) => {
                assert_eq!((m.k, m.t), (2, -1.5));
                assert!(m.observation.assignments.is_empty());
            }
            other => panic!("parsed {other:?}"),
        }
        let cli = Cli::try_parse_from([
            "jointshape", "condition", "--model", "m.json", "--set", "age=80", "--set", "sex=male", "--sigma-shape", "0.2", "--out", "s.json",
        ])
        .unwrap();
        let Command::Condition(c) = cli.command else { panic!() };
        assert_eq!(c.observation.assignments, ["age=80", "sex=male"]);
        assert_eq!(c.observation.sigmas.sigmas().shape, 0.2);
        assert_eq!(c.observation.sigmas.sigmas().indicator, 0.0);
        assert!(Cli::try_parse_from(["jointshape", "fit", "--out", "m.json"]).is_err());
    }
}
