use lapdiff::ErrorKind;

/// A user-facing error with the class that selects the exit code.
#[derive(Debug)]
pub struct Failure {
    pub kind: ErrorKind,
    pub message: String,
}

impl Failure {
    pub fn validation(message: impl Into<String>) -> Self {
        Failure {
            kind: ErrorKind::Validation,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Failure {
            kind: ErrorKind::Io,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Failure {
            kind: ErrorKind::Numerical,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Validation => 2,
            ErrorKind::Numerical => 3,
            ErrorKind::Io => 4,
        }
    }

    pub fn context(self, what: impl std::fmt::Display) -> Self {
        Failure {
            kind: self.kind,
            message: format!("{what}: {}", self.message),
        }
    }
}

impl From<lapdiff::Error> for Failure {
    fn from(e: lapdiff::Error) -> Self {
        Failure {
            kind: e.kind(),
            message: e.to_string(),
        }
    }
}

pub trait Context<T> {
    fn context(self, what: impl std::fmt::Display) -> Result<T, Failure>;
}

impl<T, E: Into<Failure>> Context<T> for Result<T, E> {
    fn context(self, what: impl std::fmt::Display) -> Result<T, Failure> {
        self.map_err(|e| e.into().context(what))
    }
}
