use std::fmt;

/// Whether a failure is the caller's fault (exit 1) or ours (exit 2).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    User,
    Internal,
}

#[derive(Debug, Clone)]
pub struct CliError {
    pub kind: ErrorKind,
    pub stage: String,
    pub message: String,
}

impl CliError {
    pub fn user(stage: &str, message: impl fmt::Display) -> Self {
        Self {
            kind: ErrorKind::User,
            stage: stage.to_owned(),
            message: message.to_string(),
        }
    }

    pub fn internal(stage: &str, message: impl fmt::Display) -> Self {
        Self {
            kind: ErrorKind::Internal,
            stage: stage.to_owned(),
            message: message.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::User => 1,
            ErrorKind::Internal => 2,
        }
    }

    /// One-line JSON object for stderr.
    pub fn to_json_line(&self) -> String {
        serde_json::json!({
            "error": {
                "code": self.exit_code(),
                "kind": match self.kind {
                    ErrorKind::User => "user",
                    ErrorKind::Internal => "internal",
                },
                "stage": self.stage,
                "message": self.message,
            }
        })
        .to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.stage, self.message)
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = Result<T, CliError>;

/// Attaches a stage name to module errors, which all stem from bad input.
pub trait UserContext<T> {
    fn user_ctx(self, stage: &str) -> CliResult<T>;
}

impl<T, E: fmt::Display> UserContext<T> for Result<T, E> {
    fn user_ctx(self, stage: &str) -> CliResult<T> {
        self.map_err(|e| CliError::user(stage, e))
    }
}
