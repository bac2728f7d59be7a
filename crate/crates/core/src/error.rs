use core::fmt;

/// Precondition failures raised by the core constructors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoreError {
    /// Frame vectors are not orthonormal within tolerance.
    NotOrthonormal,
    /// `tau` must be strictly positive.
    NonPositiveTau(f64),
    /// `|eta| <= 1` violated.
    EtaTooLarge(f64),
    /// `eta` must be orthogonal to the real direction.
    EtaNotOrthogonal(f64),
    /// The schedule needs `tau > r`.
    TauNotAboveRadius { tau: f64, r: f64 },
    /// The schedule radius must lie in `[1, 2]`.
    RadiusOutOfRange(f64),
    /// A dyadic scale was not a positive power of two.
    NotDyadic(f64),
    /// A scale parameter must be positive and finite.
    BadScale(f64),
    /// Estimator called with no samples.
    EmptySample,
    /// Exponent outside the supported range.
    BadExponent(f64),
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::NotOrthonormal => write!(f, "frame is not orthonormal"),
            CoreError::NonPositiveTau(t) => write!(f, "tau must be positive, got {t}"),
            CoreError::EtaTooLarge(n) => write!(f, "|eta| must be <= 1, got {n}"),
            CoreError::EtaNotOrthogonal(d) => {
                write!(f, "eta must be orthogonal to e1 (dot product {d})")
            }
            CoreError::TauNotAboveRadius { tau, r } => {
                write!(f, "schedule requires tau > r (tau = {tau}, r = {r})")
            }
            CoreError::RadiusOutOfRange(r) => write!(f, "r must lie in [1, 2], got {r}"),
            CoreError::NotDyadic(l) => write!(f, "{l} is not a positive dyadic scale"),
            CoreError::BadScale(s) => write!(f, "scale must be positive and finite, got {s}"),
            CoreError::EmptySample => write!(f, "empty sample set"),
            CoreError::BadExponent(p) => write!(f, "unsupported exponent {p}"),
        }
    }
}

impl core::error::Error for CoreError {}
