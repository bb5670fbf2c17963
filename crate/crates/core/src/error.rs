use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke an operation's precondition (dimension mismatch, bad index, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("estimation error: {0}")]
    Estimation(String),

    /// The dual multiplier on the trust region fell below the floor; the caller
    /// should fall back to a plain trust-region step.
    #[error("unbounded or degenerate dual (lambda* = {lambda:e})")]
    DegenerateDual { lambda: f64 },

    /// The linearized problem has no feasible point inside the trust region.
    #[error("linearized subproblem infeasible: {0}")]
    InfeasibleSubproblem(String),

    /// A constraint is violated but its gradient vanishes, so no step can reduce it.
    #[error("constraint {constraint} violated (surplus {surplus:.6}) with vanishing gradient")]
    Irrecoverable { constraint: usize, surplus: f64 },

    #[error("instance too large for enumeration: {0} policies exceed the guard")]
    TooLarge(u128),

    /// A training run stopped early; carries the engine's diagnostic.
    #[error("run halted: {0}")]
    Halted(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
