use std::fmt;
use std::path::{Path, PathBuf};

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, missing inputs or an unreadable configuration file.
    Usage(String),
    Core(cochlea_plan::Error),
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    Server(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Core(e) => e.kind(),
            CliError::Io { .. } => "io",
            CliError::Server(_) => "server",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    /// `error[kind]: message` on one line.
    pub fn line(&self) -> String {
        let msg = self.to_string();
        let msg: Vec<&str> = msg.split_whitespace().collect();
        format!("error[{}]: {}", self.kind(), msg.join(" "))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Server(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

impl std::error::Error for CliError {}

impl From<cochlea_plan::Error> for CliError {
    fn from(e: cochlea_plan::Error) -> Self {
        CliError::Core(e)
    }
}
