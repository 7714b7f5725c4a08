//! Process exit codes: 2 for bad input (config, checkpoint, arguments),
//! 3 for an aborted training run, 1 for anything else.

use std::fmt;

pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn usage(e: impl Into<anyhow::Error>) -> Self {
        Self { code: 2, error: e.into() }
    }

    pub fn abort(e: impl Into<anyhow::Error>) -> Self {
        Self { code: 3, error: e.into() }
    }

    pub fn other(e: impl Into<anyhow::Error>) -> Self {
        Self { code: 1, error: e.into() }
    }
}

impl fmt::Debug for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

pub trait ResultExt<T> {
    fn usage(self) -> Result<T, Failure>;
    fn other(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> ResultExt<T> for Result<T, E> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(Failure::usage)
    }

    fn other(self) -> Result<T, Failure> {
        self.map_err(Failure::other)
    }
}
