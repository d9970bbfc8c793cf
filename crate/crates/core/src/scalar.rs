//! Floating-point abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar used for probabilities, potentials, and divergences.
///
/// The constants encode the numerical guards that depend on precision:
/// the floor applied to message entries before normalization, the floor
/// applied inside logarithms, and the tolerance used when validating that
/// a vector lies on the probability simplex.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    const MESSAGE_FLOOR: Self;
    const LOG_FLOOR: Self;
    const SIMPLEX_TOL: Self;

    /// Lossy conversion from `f64`; every value used by the crate is finite.
    fn of(value: f64) -> Self {
        <Self as FromPrimitive>::from_f64(value).expect("finite f64 converts")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    const MESSAGE_FLOOR: Self = 1e-300;
    const LOG_FLOOR: Self = 1e-12;
    const SIMPLEX_TOL: Self = 1e-9;
}

impl Scalar for f32 {
    const MESSAGE_FLOOR: Self = f32::MIN_POSITIVE;
    const LOG_FLOOR: Self = 1e-12;
    const SIMPLEX_TOL: Self = 1e-5;
}
