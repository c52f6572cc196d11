//! Scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar the simulators are generic over: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + rustfft::FftNum
    + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline(always)]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline(always)]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    #[inline(always)]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + ToPrimitive
        + NumAssign
        + Sum
        + Default
        + Debug
        + Display
        + Send
        + Sync
        + rustfft::FftNum
        + 'static
{
}

/// A power `x ↦ x^γ` that takes the fast integer path when γ is a small
/// whole number. The hot loops evaluate it once per cell per step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Power<T> {
    Int(i32),
    Real(T),
}

impl<T: Real> Power<T> {
    pub fn new(exponent: T) -> Self {
        let e = exponent.to_f64_lossy();
        if e.fract() == 0.0 && e.abs() <= 16.0 {
            Power::Int(e as i32)
        } else {
            Power::Real(exponent)
        }
    }

    #[inline(always)]
    pub fn apply(self, x: T) -> T {
        match self {
            Power::Int(k) => x.powi(k),
            Power::Real(e) => {
                if x == T::zero() {
                    T::zero()
                } else {
                    x.powf(e)
                }
            }
        }
    }

    pub fn exponent(self) -> T {
        match self {
            Power::Int(k) => T::lit(k as f64),
            Power::Real(e) => e,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_and_real_powers_agree() {
        let p2 = Power::<f64>::new(2.0);
        assert_eq!(p2, Power::Int(2));
        assert_eq!(p2.apply(3.0), 9.0);
        let p = Power::<f64>::new(1.5);
        assert!((p.apply(4.0) - 8.0).abs() < 1e-12);
        assert_eq!(p.apply(0.0), 0.0);
        assert_eq!(Power::<f32>::new(3.0).apply(2.0), 8.0);
    }
}
