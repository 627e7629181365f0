use serde_json::json;

/// Failure of one invocation, mapped onto the process exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(diffuser::Error),
}

impl From<diffuser::Error> for CliError {
    fn from(e: diffuser::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }

    /// One line of JSON for stderr.
    pub fn to_json_line(&self) -> String {
        let value = match self {
            CliError::Usage(msg) => json!({"error": "usage", "message": msg}),
            CliError::Core(diffuser::Error::ToleranceBreach {
                what,
                value,
                tolerance,
            }) => json!({
                "error": "tolerance_breach",
                "message": self.message(),
                "what": what,
                "value": value,
                "tolerance": tolerance,
            }),
            CliError::Core(e) => {
                let kind = if e.is_numerical() { "numerical" } else { "invalid" };
                json!({"error": kind, "message": e.to_string()})
            }
        };
        value.to_string()
    }

    fn message(&self) -> String {
        match self {
            CliError::Usage(msg) => msg.clone(),
            CliError::Core(e) => e.to_string(),
        }
    }
}
