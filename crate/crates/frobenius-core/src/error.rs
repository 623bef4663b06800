use alloc::string::String;
use core::fmt;

/// Errors shared by every module of the crate.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A caller-supplied parameter is outside its admissible range.
    InvalidParameter(String),
    /// The model data (metric, structure constants) is unusable.
    InvalidModel(String),
    /// Initial data violates its defining invariants.
    InvalidData(String),
    /// The recursion produced an inconsistent or underdetermined linear system.
    Inconsistent(String),
    /// The spectrum used for splitting is not simple.
    NotTame { gap: f64, detail: String },
    /// A normalization factor (such as some `eta_i`) vanishes.
    DegenerateFrame(String),
    /// A point or a parameter comes too close to a diagonal or a pole.
    PoleProximity { i: usize, j: usize, distance: f64 },
    /// An integration monitor exceeded its tolerance.
    MonitorBreach { t: f64, monitor: String, value: f64 },
    /// Adaptive step size collapsed, which usually signals a pole of the solution.
    StepUnderflow { t: f64, step: f64, norm: f64 },
    /// Weight `D = 1` without a shift makes reconstruction degenerate.
    DegenerateWeight(String),
    /// An element with vanishing body was inverted.
    NonInvertible(String),
    /// A parity requirement was violated.
    Parity(String),
    /// A jet is too short for the requested derivative.
    JetOrder(String),
    /// A super potential with vanishing body of some `eta`.
    DegeneratePotential(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter(s) => write!(f, "invalid parameter: {s}"),
            Error::InvalidModel(s) => write!(f, "invalid model: {s}"),
            Error::InvalidData(s) => write!(f, "invalid data: {s}"),
            Error::Inconsistent(s) => write!(f, "inconsistent recursion: {s}"),
            Error::NotTame { gap, detail } => {
                write!(f, "point is not tame (eigenvalue gap {gap:e}): {detail}")
            }
            Error::DegenerateFrame(s) => write!(f, "degenerate frame: {s}"),
            Error::PoleProximity { i, j, distance } => {
                write!(f, "pole proximity between {i} and {j} (distance {distance:e})")
            }
            Error::MonitorBreach { t, monitor, value } => {
                write!(f, "monitor {monitor} breached at t = {t}: {value:e}")
            }
            Error::StepUnderflow { t, step, norm } => write!(
                f,
                "step underflow at t = {t} (step {step:e}, norm {norm:e}); suspected pole of the solution"
            ),
            Error::DegenerateWeight(s) => write!(f, "degenerate weight: {s}"),
            Error::NonInvertible(s) => write!(f, "not invertible: {s}"),
            Error::Parity(s) => write!(f, "parity error: {s}"),
            Error::JetOrder(s) => write!(f, "jet order too small: {s}"),
            Error::DegeneratePotential(s) => write!(f, "degenerate potential: {s}"),
        }
    }
}

impl core::error::Error for Error {}
