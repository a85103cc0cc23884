use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("stage `{stage}` failed: {source}")]
    Numeric {
        stage: &'static str,
        #[source]
        source: pwiener::Error,
    },

    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric { .. } => 3,
            CliError::Io(_) => 1,
        }
    }
}

/// Tags a core error with the pipeline stage that produced it. Invalid
/// arguments are configuration errors; everything else is numeric.
pub fn at(stage: &'static str) -> impl Fn(pwiener::Error) -> CliError {
    move |e| match e {
        pwiener::Error::InvalidInput(msg) => CliError::Config(format!("stage `{stage}`: {msg}")),
        pwiener::Error::Io(io) => CliError::Io(io.to_string()),
        source => CliError::Numeric { stage, source },
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
