//! Scalar abstraction for stored model parameters.
//!
//! Network weights, hidden units and scales are stored as `F: Real`
//! (`f32` or `f64`). Random variates and accumulations are always computed
//! in `f64` and narrowed on store, so `f32` halves memory for large factor
//! matrices without changing the sampler's arithmetic.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + Sum
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Absolute tolerance on column sums of stochastic matrices.
    const STOCHASTIC_TOL: f64;

    /// Smallest positive value a gamma-distributed unit is clamped to.
    const TINY: f64;

    const NAME: &'static str;

    #[inline]
    fn f(self) -> f64 {
        // f32/f64 -> f64 never fails
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).unwrap_or_else(Self::nan)
    }

    /// Narrow a strictly positive `f64` without letting it round to zero.
    #[inline]
    fn of_positive(x: f64) -> Self {
        Self::of(x.max(Self::TINY))
    }
}

impl Real for f64 {
    const STOCHASTIC_TOL: f64 = 1e-10;
    const TINY: f64 = f64::MIN_POSITIVE;
    const NAME: &'static str = "f64";
}

impl Real for f32 {
    const STOCHASTIC_TOL: f64 = 1e-4;
    const TINY: f64 = f32::MIN_POSITIVE as f64;
    const NAME: &'static str = "f32";
}
