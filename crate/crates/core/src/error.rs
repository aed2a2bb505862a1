use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("domain error at node ({i}, {j}), x = ({x1}, {x2}): {message}")]
    DomainAtNode {
        i: usize,
        j: usize,
        x1: f64,
        x2: f64,
        message: String,
    },

    #[error("unbound variable {0}")]
    UnboundVariable(String),

    #[error("unable to decide whether `{expr}` vanishes: {redraws} bindings hit singularities")]
    UnableToDecide { expr: String, redraws: usize },

    #[error("invalid lagrangian: {0}")]
    InvalidLagrangian(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("singular jacobian (zero pivot in column {column})")]
    SingularJacobian { column: usize },

    #[error("support rectangle must lie strictly inside the domain")]
    SupportTouchesBoundary,

    #[error("variation step {t} exceeds the diffeomorphism bound {bound}")]
    StepTooLarge { t: f64, bound: f64 },

    #[error("least-squares system is rank deficient (null-space dimension {null_dim})")]
    RankDeficient { null_dim: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
