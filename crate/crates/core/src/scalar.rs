//! Floating-point abstraction shared by the geometry predicates and the
//! network code.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar used for parameters and geometry: `f32` or `f64`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + NumAssign + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from `f64`; used for literals in generic code.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }

    /// Little-endian `f32` bytes, the on-disk weight representation.
    fn to_le_f32_bytes(self) -> [u8; 4] {
        (self.as_f64() as f32).to_le_bytes()
    }

    fn from_le_f32_bytes(bytes: [u8; 4]) -> Self {
        Self::lit(f32::from_le_bytes(bytes) as f64)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
