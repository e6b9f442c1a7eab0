use thiserror::Error;

/// Errors raised by the solver stack.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The quadratic form `x² + 2cxy + y²` is not positive definite (|c| too close to 1).
    #[error("degenerate quadratic form: |c| = {c} is not below 1")]
    DegenerateForm { c: f64 },

    /// A box corner coincides with the singular point, or lies on one of the
    /// lines through it parallel to the box edges.
    #[error("box corner ({x}, {y}) is aligned with the singular point")]
    CornerHit { x: f64, y: f64 },

    /// GMRES produced a zero Arnoldi vector while the residual was still nonzero.
    #[error("GMRES breakdown at iteration {iteration}")]
    Breakdown { iteration: usize },

    /// Newton iteration for Gauss–Legendre nodes failed to converge.
    #[error("Gauss-Legendre node {index} of order {order} did not converge")]
    NodeIteration { order: usize, index: usize },

    /// A dense factorization hit an exactly singular matrix.
    #[error("singular {rows}x{rows} system")]
    SingularMatrix { rows: usize },

    /// Invalid user input (shape, grid, configuration).
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// `true` for failures of the numerical method itself, as opposed to bad input.
    pub fn is_numeric(&self) -> bool {
        !matches!(self, Error::InvalidInput(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
