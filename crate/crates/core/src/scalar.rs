//! Scalar abstraction over the floating-point type.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar used by the numeric parts of the crate
/// (policy networks, trainers, distributions, flow statistics).
///
/// Occupancies and vehicle counts stay integral everywhere; this trait
/// only governs the arithmetic done on top of them.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossless-enough conversion from `f64` for constants and counts.
    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 converts to any Scalar")
    }

    /// Conversion from a vehicle count.
    fn from_count(n: u64) -> Self {
        Self::from_u64(n).unwrap_or_else(|| Self::from_f64_lossy(n as f64))
    }

    /// Widen to `f64` (used at I/O and RNG boundaries).
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("Scalar widens to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
