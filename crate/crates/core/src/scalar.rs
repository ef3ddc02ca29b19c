//! Floating-point abstraction shared by the numeric kernels.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Scalar type the solvers and kernel machines are generic over (`f32` or `f64`).
pub trait Real:
    Float
    + FromPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite conversion")
    }

    /// `max(requested, 1e3 * machine epsilon)`, so f64 tolerances degrade gracefully on f32.
    #[inline]
    fn tol(requested: f64) -> Self {
        let floor = Self::epsilon() * Self::of(1e3);
        Self::of(requested).max(floor)
    }
}

impl Real for f32 {}
impl Real for f64 {}
