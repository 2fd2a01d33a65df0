//! Scalar abstractions shared by the symmetry and metric code.
//!
//! The group operators, orbit averaging and Pareto metrics only need field
//! arithmetic and an order, so they are written against [`Scalar`] and run on
//! `f32`, `f64` or exact rationals. Anything that needs a square root or
//! random sampling is restricted to [`Real`].

use num_traits::{Float, FromPrimitive, Num, Signed};
use std::fmt::Debug;

pub trait Scalar:
    Num + Signed + FromPrimitive + Copy + PartialOrd + Debug + Send + Sync + 'static
{
    fn two() -> Self {
        Self::one() + Self::one()
    }

    fn half() -> Self {
        Self::one() / Self::two()
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }
}

impl<T> Scalar for T where
    T: Num + Signed + FromPrimitive + Copy + PartialOrd + Debug + Send + Sync + 'static
{
}

pub trait Real: Scalar + Float {}

impl<T> Real for T where T: Scalar + Float {}

/// ℓ1 norm of a slice.
pub fn l1_norm<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, x| acc + x.abs())
}

/// ℓ1 distance between two equal-length slices.
pub fn l1_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (x, y)| acc + (*x - *y).abs())
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + *x * *y)
}

/// Converts a count to the scalar type.
pub fn from_count<T: Scalar>(n: usize) -> T {
    T::from_usize(n).expect("count representable in scalar type")
}
