//! Scalar abstraction for the numeric core.

use num_traits::FromPrimitive;

/// Real scalar the core is generic over. `f32` and `f64` both qualify;
/// everything index-valued is carried in exact integer arithmetic
/// ([`crate::HalfInt`]) regardless of the scalar.
pub trait Scalar: nalgebra::RealField + FromPrimitive + Copy {
    /// Lossy conversion used for tolerances and fixed constants.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("scalar conversion")
    }
}

impl<T> Scalar for T where T: nalgebra::RealField + FromPrimitive + Copy {}
