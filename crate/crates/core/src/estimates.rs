//! Border estimates and the endpoint calculus every drone runs locally.

use std::fmt;

use thiserror::Error;

use crate::scalar::Scalar;
use crate::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EstimateError {
    #[error("drone count would become negative")]
    Underflow,
    #[error("drone count overflowed")]
    Overflow,
    #[error("drone index {index} outside 1..={n}")]
    Index { index: usize, n: usize },
}

/// One side of a drone's belief: where the border is and how many drones lie
/// beyond the drone on that side.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BorderEstimate<T = Rational> {
    pub pos: T,
    pub count: u64,
}

impl<T: Scalar> BorderEstimate<T> {
    pub fn new(pos: T, count: u64) -> Self {
        Self { pos, count }
    }

    /// The true left border as learned at position 0: `(0, 0)`.
    pub fn left_border() -> Self {
        Self::new(T::zero(), 0)
    }

    /// The true right border as learned at position 1: `(1, 0)`.
    pub fn right_border() -> Self {
        Self::new(T::one(), 0)
    }

    pub fn shift_count(&self, delta: i64) -> Result<Self, EstimateError> {
        let count = if delta >= 0 {
            self.count
                .checked_add(delta as u64)
                .ok_or(EstimateError::Overflow)?
        } else {
            self.count
                .checked_sub(delta.unsigned_abs())
                .ok_or(EstimateError::Underflow)?
        };
        Ok(Self::new(self.pos.clone(), count))
    }

    pub fn plus(&self) -> Self {
        self.shift_count(1).expect("count below u64::MAX")
    }
}

impl<T: Scalar> fmt::Display for BorderEstimate<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.pos, self.count)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

/// A drone's full estimate `((a, l), (b, m))`. Crossed or out-of-range border
/// positions are legal: estimates may be arbitrarily wrong.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EstimatePair<T = Rational> {
    pub left: BorderEstimate<T>,
    pub right: BorderEstimate<T>,
}

impl<T: Scalar> EstimatePair<T> {
    pub fn new(left: BorderEstimate<T>, right: BorderEstimate<T>) -> Self {
        Self { left, right }
    }

    /// Convenience constructor from `(a, l)` and `(b, m)`.
    pub fn from_parts(a: T, l: u64, b: T, m: u64) -> Self {
        Self::new(BorderEstimate::new(a, l), BorderEstimate::new(b, m))
    }

    fn drone_total(&self) -> T {
        T::from_count(self.left.count) + T::from_count(self.right.count) + T::one()
    }

    /// `(b - a) / (l + m + 1)`; negative when the estimate is crossed.
    pub fn interval_size(&self) -> T {
        (self.right.pos.clone() - self.left.pos.clone()) / self.drone_total()
    }

    /// `(a (m + 1) + b l) / (l + m + 1)`.
    pub fn left_endpoint(&self) -> T {
        let a = &self.left.pos;
        let b = &self.right.pos;
        let l = T::from_count(self.left.count);
        let m1 = T::from_count(self.right.count) + T::one();
        (a.clone() * m1 + b.clone() * l) / self.drone_total()
    }

    /// `(a m + b (l + 1)) / (l + m + 1)`.
    pub fn right_endpoint(&self) -> T {
        let a = &self.left.pos;
        let b = &self.right.pos;
        let m = T::from_count(self.right.count);
        let l1 = T::from_count(self.left.count) + T::one();
        (a.clone() * m + b.clone() * l1) / self.drone_total()
    }

    /// Replaces one side with the true border, as on reaching it.
    pub fn border_update(&self, side: Side) -> Self {
        match side {
            Side::Left => Self::new(BorderEstimate::left_border(), self.right.clone()),
            Side::Right => Self::new(self.left.clone(), BorderEstimate::right_border()),
        }
    }

    /// True when `self` (left neighbour) and `right` already agree, i.e. a
    /// meeting between them would change nothing.
    pub fn shares_with(&self, right: &Self) -> bool {
        self.right.pos == right.right.pos
            && self.right.count == right.right.count.wrapping_add(1)
            && right.left.pos == self.left.pos
            && right.left.count == self.left.count.wrapping_add(1)
    }
}

impl<T: Scalar> fmt::Display for EstimatePair<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.left, self.right)
    }
}

/// Information exchange between adjacent drones: each adopts the other's far
/// side, counting the other drone as one more beyond it.
pub fn meet_update<T: Scalar>(
    left_drone: &EstimatePair<T>,
    right_drone: &EstimatePair<T>,
) -> (EstimatePair<T>, EstimatePair<T>) {
    let new_left = EstimatePair::new(left_drone.left.clone(), right_drone.right.plus());
    let new_right = EstimatePair::new(left_drone.left.plus(), right_drone.right.clone());
    (new_left, new_right)
}

/// The estimate of drone `i` (1-based) when everything is known.
pub fn true_estimate<T: Scalar>(i: usize, n: usize) -> Result<EstimatePair<T>, EstimateError> {
    if i == 0 || i > n {
        return Err(EstimateError::Index { index: i, n });
    }
    Ok(EstimatePair::from_parts(
        T::zero(),
        (i - 1) as u64,
        T::one(),
        (n - i) as u64,
    ))
}
