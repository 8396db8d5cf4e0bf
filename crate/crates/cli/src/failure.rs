use std::fmt::Display;

/// Unreadable or unwritable files.
pub const EXIT_IO: u8 = 3;
/// Input files that exist but do not parse (PLY, container, PNG, checkpoint).
pub const EXIT_MALFORMED: u8 = 4;
/// Arguments or inputs that parse but cannot be combined.
pub const EXIT_INVALID: u8 = 5;

/// An error plus the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn invalid(error: anyhow::Error) -> Self {
        Self {
            code: EXIT_INVALID,
            error,
        }
    }
}

pub trait OrExit<T> {
    fn or_exit(self, code: u8, context: impl Display) -> Result<T, Failure>;
}

impl<T, E> OrExit<T> for Result<T, E>
where
    E: Into<anyhow::Error>,
{
    fn or_exit(self, code: u8, context: impl Display) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            code,
            error: e.into().context(context.to_string()),
        })
    }
}
