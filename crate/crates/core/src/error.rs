use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("interface error at node {node}: {reason}")]
    Interface { node: usize, reason: String },

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("dof {dof} constrained to conflicting values {first} and {second}")]
    ConflictingConstraint { dof: usize, first: f64, second: f64 },

    #[error("singular matrix: zero pivot at column {column}")]
    Singular { column: usize },

    #[error("solver did not reach tolerance: relative residual {residual:e}")]
    NotConverged { residual: f64 },

    #[error("singular local system in macroelement {macro_id}")]
    SingularMacro { macro_id: usize },

    #[error("{count} macroelement solve(s) failed, first: {first}")]
    MacroFailures { count: usize, first: Box<Error> },

    #[error("unknown {kind} '{name}'")]
    Unknown { kind: &'static str, name: String },

    #[error("problem '{0}' has no exact solution")]
    NoExactSolution(String),

    #[error("solve failed on mesh {nx}x{ny}: {source}")]
    MeshRun {
        nx: usize,
        ny: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed report: {0}")]
    Parse(String),
}

impl Error {
    /// Short stable identifier, used in machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Mesh(_) => "mesh",
            Error::Interface { .. } => "interface",
            Error::IndexOutOfRange { .. } => "index_out_of_range",
            Error::ConflictingConstraint { .. } => "conflicting_constraint",
            Error::Singular { .. } => "singular",
            Error::NotConverged { .. } => "not_converged",
            Error::SingularMacro { .. } => "singular_macro",
            Error::MacroFailures { .. } => "macro_failures",
            Error::Unknown { .. } => "unknown",
            Error::NoExactSolution(_) => "no_exact_solution",
            Error::MeshRun { .. } => "mesh_run",
            Error::Io { .. } => "io",
            Error::Parse(_) => "parse",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
