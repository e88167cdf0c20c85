use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("reference error: {0}")]
    Reference(String),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("contract violated: {0}")]
    Contract(String),
    #[error("model error: {0}")]
    Model(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("no power flow solution: {0}")]
    NoSolution(String),
    #[error("singular load: {0}")]
    SingularLoad(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn from_json(err: serde_json::Error) -> Self {
        use serde_json::error::Category;
        match err.classify() {
            Category::Data => Error::Schema(err.to_string()),
            Category::Io => Error::Io(err.into()),
            Category::Syntax | Category::Eof => {
                Error::Parse { line: err.line(), column: err.column(), message: err.to_string() }
            }
        }
    }
}
