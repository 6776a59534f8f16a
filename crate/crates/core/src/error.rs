use thiserror::Error;

/// Errors raised by state construction, key-rate evaluation and estimation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter fell outside its admissible range.
    #[error("{name} = {value} violates {constraint}")]
    Domain {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    /// A structural precondition on a covariance matrix was violated.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A symplectic eigenvalue fell below the vacuum level.
    #[error("unphysical state: symplectic eigenvalue {nu} < 1")]
    Unphysical { nu: f64 },

    /// The eigen-solver produced eigenvalues of Ωγ with a real part.
    #[error("numerical instability: eigenvalue of Ωγ has real part {residue}")]
    NumericalInstability { residue: f64 },

    /// The channel transmittance is too small to evaluate (χ diverges).
    #[error("channel opaque: transmittance {eta:e} below 1e-6")]
    ChannelOpaque { eta: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check(
    ok: bool,
    name: &'static str,
    value: f64,
    constraint: &'static str,
) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value,
            constraint,
        })
    }
}
