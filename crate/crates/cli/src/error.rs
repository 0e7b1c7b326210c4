use std::fmt;

use serde::Serialize;
use spectral_dispersal::Error;

#[derive(Debug)]
pub enum CliError {
    Library(Error),
    /// Malformed problem file, with the field path.
    Parse(String),
    Io(String),
    /// Missing option or inconsistent flags.
    Usage(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Library(e)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Library(e) => e.fmt(f),
            CliError::Parse(m) => write!(f, "parse error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Usage(m) => write!(f, "usage error: {m}"),
        }
    }
}

impl CliError {
    /// 2 for bad input, 3 for numeric or I/O failure, 4 for capacity.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Library(Error::Numeric { .. }) | CliError::Io(_) => 3,
            CliError::Library(Error::Capacity { .. }) => 4,
            _ => 2,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Library(e) => match e {
                Error::Validation(_) => "validation",
                Error::Structure(_) => "structure",
                Error::Domain(_) => "domain",
                Error::Numeric { .. } => "numeric",
                Error::Capacity { .. } => "capacity",
                Error::NoThreshold(_) => "no_threshold",
                Error::Degenerate(_) => "degenerate",
            },
            CliError::Parse(_) => "parse",
            CliError::Io(_) => "io",
            CliError::Usage(_) => "usage",
        }
    }

    /// Single-line JSON for `--json-errors`.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Line<'a> {
            error: &'a str,
            message: String,
            exit_code: i32,
        }
        serde_json::to_string(&Line { error: self.kind(), message: self.to_string(), exit_code: self.exit_code() })
            .expect("plain struct serializes")
    }
}
