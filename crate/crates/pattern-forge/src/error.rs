use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("quadrature did not converge: achieved error estimate {achieved:e} (target {target:e})")]
    Quadrature { achieved: f64, target: f64 },
    #[error("no bifurcation point: sigma(lambda, 1) tends to {limit} > 0 as lambda grows")]
    NoBifurcation { limit: f64 },
    #[error("empty gamma window for kappa = {kappa}: lower {lower} >= upper {upper}")]
    EmptyWindow { kappa: f64, lower: f64, upper: f64 },
    #[error("gamma = {gamma} outside the window ({lower}, {upper})")]
    GammaOutsideWindow { gamma: f64, lower: f64, upper: f64 },
    #[error("field violates the required symmetry by {0:e}")]
    Symmetry(f64),
    #[error("degenerate shape: min value {0} is not positive")]
    DegenerateShape(f64),
    #[error("newton iteration failed after {iterations} steps, last residual {residual:e}")]
    NewtonDiverged { iterations: usize, residual: f64 },
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("operator nearly singular on degree {degree}: sigma = {sigma:e}")]
    NearSingular { degree: usize, sigma: f64 },
    #[error("tail certificate failed up to k_max = {k_max}")]
    TailCertificate { k_max: usize },
    #[error("invalid input: {0}")]
    Invalid(String),
}
