use std::fmt;
use std::path::Path;

use longevity_core::Error;

/// A command failure and the exit status it maps to.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags, unreadable or malformed input: exit 2.
    Input(anyhow::Error),
    /// Numerical or output failure: exit 1.
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn input(e: impl Into<anyhow::Error>) -> Self {
        Failure::Input(e.into())
    }

    pub fn runtime(e: impl Into<anyhow::Error>) -> Self {
        Failure::Runtime(e.into())
    }

    pub fn usage(msg: impl fmt::Display) -> Self {
        Failure::Input(anyhow::anyhow!("{msg}"))
    }

    pub fn context(self, ctx: String) -> Self {
        match self {
            Failure::Input(e) => Failure::Input(e.context(ctx)),
            Failure::Runtime(e) => Failure::Runtime(e.context(ctx)),
        }
    }

    pub fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Input(e) | Failure::Runtime(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Numerical(_) | Error::Io(_) => Failure::Runtime(e.into()),
            _ => Failure::Input(e.into()),
        }
    }
}

pub fn read_input(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| {
        Failure::input(anyhow::Error::new(e).context(format!("cannot read {}", path.display())))
    })
}

pub fn write_output(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::write(path, contents).map_err(|e| {
        Failure::runtime(anyhow::Error::new(e).context(format!("cannot write {}", path.display())))
    })
}
