//! Scalar abstraction shared by the numeric kernels.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar accepted by the distribution, transport and
/// statistics kernels. Implemented for `f32` and `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal; lossy for `f32`.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }

    /// Tolerance used when checking that a vector lies on the simplex.
    fn simplex_tol() -> Self;
}

impl Real for f32 {
    fn simplex_tol() -> Self {
        1e-5
    }
}

impl Real for f64 {
    fn simplex_tol() -> Self {
        1e-9
    }
}
