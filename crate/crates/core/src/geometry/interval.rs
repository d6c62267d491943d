//! Closed real intervals and interval vectors (axis-aligned boxes).
//!
//! Arithmetic here is plain floating point without directed rounding. The
//! operations are the ones needed for natural inclusion functions of the
//! closed-loop vehicle model: add, subtract, multiply, scale, clamp and tight
//! enclosures of `sin`/`cos`.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use super::GeometryError;
use crate::scalar::Scalar;

/// A closed interval `[lo, hi]` with `lo <= hi`.
#[derive(Clone, Copy, PartialEq, Default)]
pub struct Interval<T> {
    lo: T,
    hi: T,
}

impl<T: Scalar> Interval<T> {
    /// Panics if `lo > hi` or either bound is NaN.
    pub fn new(lo: T, hi: T) -> Self {
        Self::try_new(lo, hi).expect("invalid interval bounds")
    }

    pub fn try_new(lo: T, hi: T) -> Result<Self, GeometryError> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(GeometryError::InvalidInterval {
                lo: lo.as_f64(),
                hi: hi.as_f64(),
            });
        }
        Ok(Self { lo, hi })
    }

    /// Skips validation; callers guarantee `lo <= hi`.
    #[inline]
    pub(crate) fn from_ordered(lo: T, hi: T) -> Self {
        debug_assert!(lo <= hi);
        Self { lo, hi }
    }

    pub fn point(x: T) -> Self {
        Self::new(x, x)
    }

    pub fn zero() -> Self {
        Self::point(T::zero())
    }

    /// `[center - radius, center + radius]`; `radius` must be nonnegative.
    pub fn centered(center: T, radius: T) -> Self {
        Self::new(center - radius, center + radius)
    }

    #[inline]
    pub fn lo(&self) -> T {
        self.lo
    }

    #[inline]
    pub fn hi(&self) -> T {
        self.hi
    }

    #[inline]
    pub fn width(&self) -> T {
        self.hi - self.lo
    }

    #[inline]
    pub fn mid(&self) -> T {
        self.lo + (self.hi - self.lo) * T::half()
    }

    #[inline]
    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    #[inline]
    pub fn contains(&self, x: T) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// `other ⊆ self`.
    #[inline]
    pub fn contains_interval(&self, other: &Self) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    /// Smallest interval containing both.
    #[inline]
    pub fn hull(&self, other: &Self) -> Self {
        Self {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    pub fn intersection(&self, other: &Self) -> Option<Self> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Self { lo, hi })
    }

    #[inline]
    pub fn overlaps(&self, other: &Self) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    /// Grows both ends by `r >= 0`.
    #[inline]
    pub fn pad(&self, r: T) -> Self {
        Self::new(self.lo - r, self.hi + r)
    }

    /// Image under `x ↦ clamp(x, lo, hi)`, which is monotone nondecreasing.
    #[inline]
    pub fn clamp(&self, lo: T, hi: T) -> Self {
        Self {
            lo: self.lo.clamp_to(lo, hi),
            hi: self.hi.clamp_to(lo, hi),
        }
    }

    /// Image under multiplication by a scalar.
    #[inline]
    pub fn scale(&self, c: T) -> Self {
        let (a, b) = (self.lo * c, self.hi * c);
        Self {
            lo: a.min(b),
            hi: a.max(b),
        }
    }

    /// Distance between the two closed intervals; zero when they overlap.
    pub fn gap(&self, other: &Self) -> T {
        if other.lo > self.hi {
            other.lo - self.hi
        } else if self.lo > other.hi {
            self.lo - other.hi
        } else {
            T::zero()
        }
    }

    /// Exact range of `sin` over the interval.
    ///
    /// Interior maxima sit at `π/2 + 2πn` and minima at `-π/2 + 2πn`; otherwise
    /// the function is monotone and the extrema are at the endpoints.
    pub fn sin(&self) -> Self {
        self.periodic_range(T::sin, T::FRAC_PI_2(), -T::FRAC_PI_2())
    }

    /// Exact range of `cos` over the interval (maxima at `2πn`, minima at `π + 2πn`).
    pub fn cos(&self) -> Self {
        self.periodic_range(T::cos, T::zero(), T::PI())
    }

    /// Enclosures of the ranges of `sin` and `cos` over the interval.
    ///
    /// Narrow intervals evaluate `sin`/`cos` once at the midpoint and rotate
    /// to the endpoints (see [`Interval::sin_cos_near`]). Point intervals give
    /// exactly `self.lo.sin_cos()`.
    pub fn sin_cos(&self) -> (Self, Self) {
        let mid = self.lo + (self.hi - self.lo) * T::half();
        let (s, c) = if self.is_point() {
            self.lo.sin_cos()
        } else {
            mid.sin_cos()
        };
        self.sin_cos_near(mid, s, c)
    }

    /// [`Interval::sin_cos`] given `sin` and `cos` at a nearby `anchor`. When
    /// both endpoints lie within 0.1 rad of the anchor their values come from
    /// rotating the anchor's by short Taylor polynomials, widened by a few
    /// ulps for the rounding of the rotation; otherwise the endpoints are
    /// evaluated directly. Point intervals always evaluate directly so that
    /// they agree bit for bit with `f64::sin_cos`.
    pub fn sin_cos_near(&self, anchor: T, sin_a: T, cos_a: T) -> (Self, Self) {
        let near = T::lit(ROTATE_MAX_OFFSET);
        let (da, db) = (self.lo - anchor, self.hi - anchor);
        let ((s_lo, c_lo), (s_hi, c_hi), slack) = if self.is_point() {
            let sc = if self.lo == anchor {
                (sin_a, cos_a)
            } else {
                self.lo.sin_cos()
            };
            (sc, sc, T::zero())
        } else if da.abs() <= near && db.abs() <= near {
            let rotate = |d: T| {
                let (sd, cd) = small_sin_cos(d);
                (sin_a * cd + cos_a * sd, cos_a * cd - sin_a * sd)
            };
            let slack = T::epsilon()
                * (T::lit(8.0) + T::lit(4.0) * (self.lo.abs() + self.hi.abs() + anchor.abs()));
            (rotate(da), rotate(db), slack)
        } else {
            (self.lo.sin_cos(), self.hi.sin_cos(), T::zero())
        };
        // Both endpoints in one quarter turn: sin and cos are monotone there.
        let q = (self.lo * T::FRAC_2_PI()).floor();
        let (sin, cos) = if self.hi * T::FRAC_2_PI() < q + T::one() {
            (
                Self::from_ordered(s_lo.min(s_hi), s_lo.max(s_hi)),
                Self::from_ordered(c_lo.min(c_hi), c_lo.max(c_hi)),
            )
        } else {
            (
                self.periodic_range_of(s_lo, s_hi, T::FRAC_PI_2(), -T::FRAC_PI_2()),
                self.periodic_range_of(c_lo, c_hi, T::zero(), T::PI()),
            )
        };
        if slack == T::zero() {
            return (sin, cos);
        }
        let widen = |iv: Self| {
            Self::from_ordered(
                (iv.lo - slack).max(-T::one()),
                (iv.hi + slack).min(T::one()),
            )
        };
        (widen(sin), widen(cos))
    }

    fn periodic_range(&self, f: fn(T) -> T, max_phase: T, min_phase: T) -> Self {
        self.periodic_range_of(f(self.lo), f(self.hi), max_phase, min_phase)
    }

    /// Range of a `2π`-periodic function with values `a`, `b` at the
    /// endpoints, monotone between its maxima at `max_phase + 2πn` and minima
    /// at `min_phase + 2πn`.
    fn periodic_range_of(&self, a: T, b: T, max_phase: T, min_phase: T) -> Self {
        let tau = T::TAU();
        if self.width() >= tau {
            return Self::new(-T::one(), T::one());
        }
        let mut lo = a.min(b);
        let mut hi = a.max(b);
        if hits_phase(self.lo, self.hi, max_phase, tau) {
            hi = T::one();
        }
        if hits_phase(self.lo, self.hi, min_phase, tau) {
            lo = -T::one();
        }
        Self { lo, hi }
    }
}

/// Largest offset from the anchor that [`Interval::sin_cos_near`] rotates over.
const ROTATE_MAX_OFFSET: f64 = 0.1;

/// Taylor polynomials of `sin` and `cos` for `|x| ≤ 0.1`; the truncation
/// error is below `1e-18`.
#[inline]
fn small_sin_cos<T: Scalar>(x: T) -> (T, T) {
    let x2 = x * x;
    let c = |v: f64| T::lit(v);
    let sin = x
        * (T::one()
            + x2 * (c(-1.0 / 6.0)
                + x2 * (c(1.0 / 120.0) + x2 * (c(-1.0 / 5040.0) + x2 * c(1.0 / 362880.0)))));
    let cos = T::one()
        + x2 * (c(-0.5)
            + x2 * (c(1.0 / 24.0)
                + x2 * (c(-1.0 / 720.0) + x2 * (c(1.0 / 40320.0) + x2 * c(-1.0 / 3628800.0)))));
    (sin, cos)
}

/// Whether some `phase + n·period` lies in `[lo, hi]`.
fn hits_phase<T: Scalar>(lo: T, hi: T, phase: T, period: T) -> bool {
    let n = ((lo - phase) / period).ceil();
    phase + n * period <= hi
}

impl<T: Scalar> Add for Interval<T> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        Self {
            lo: self.lo + rhs.lo,
            hi: self.hi + rhs.hi,
        }
    }
}

impl<T: Scalar> Add<T> for Interval<T> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: T) -> Self {
        Self {
            lo: self.lo + rhs,
            hi: self.hi + rhs,
        }
    }
}

impl<T: Scalar> Sub for Interval<T> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        Self {
            lo: self.lo - rhs.hi,
            hi: self.hi - rhs.lo,
        }
    }
}

impl<T: Scalar> Neg for Interval<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self {
            lo: -self.hi,
            hi: -self.lo,
        }
    }
}

impl<T: Scalar> Mul for Interval<T> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        let p = [
            self.lo * rhs.lo,
            self.lo * rhs.hi,
            self.hi * rhs.lo,
            self.hi * rhs.hi,
        ];
        Self {
            lo: p[0].min(p[1]).min(p[2].min(p[3])),
            hi: p[0].max(p[1]).max(p[2].max(p[3])),
        }
    }
}

impl<T: Scalar> Mul<T> for Interval<T> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: T) -> Self {
        self.scale(rhs)
    }
}

impl<T: Scalar> From<[T; 2]> for Interval<T> {
    fn from(b: [T; 2]) -> Self {
        Self::new(b[0], b[1])
    }
}

impl<T: fmt::Debug> fmt::Debug for Interval<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:?}, {:?}]", self.lo, self.hi)
    }
}

/// An `N`-dimensional interval vector `[lo, hi] = {z : lo ⪯ z ⪯ hi}`.
#[derive(Clone, Copy, PartialEq)]
pub struct IntervalVector<T, const N: usize> {
    comps: [Interval<T>; N],
}

pub type Box2<T> = IntervalVector<T, 2>;

impl<T: Scalar, const N: usize> IntervalVector<T, N> {
    pub fn from_intervals(comps: [Interval<T>; N]) -> Self {
        Self { comps }
    }

    pub fn try_new(lo: [T; N], hi: [T; N]) -> Result<Self, GeometryError> {
        let mut comps = [Interval::zero(); N];
        for i in 0..N {
            comps[i] = Interval::try_new(lo[i], hi[i])?;
        }
        Ok(Self { comps })
    }

    /// Panics unless `lo ⪯ hi`.
    pub fn new(lo: [T; N], hi: [T; N]) -> Self {
        Self::try_new(lo, hi).expect("invalid interval vector bounds")
    }

    pub fn point(x: [T; N]) -> Self {
        Self::new(x, x)
    }

    /// `[c - r, c + r]` with `r ⪰ 0`.
    pub fn centered(c: [T; N], r: [T; N]) -> Self {
        let mut comps = [Interval::zero(); N];
        for i in 0..N {
            comps[i] = Interval::centered(c[i], r[i]);
        }
        Self { comps }
    }

    pub const fn dims(&self) -> usize {
        N
    }

    pub fn lo(&self) -> [T; N] {
        self.comps.map(|c| c.lo())
    }

    pub fn hi(&self) -> [T; N] {
        self.comps.map(|c| c.hi())
    }

    pub fn intervals(&self) -> &[Interval<T>; N] {
        &self.comps
    }

    pub fn widths(&self) -> [T; N] {
        self.comps.map(|c| c.width())
    }

    pub fn max_width(&self) -> T {
        self.comps
            .iter()
            .fold(T::zero(), |acc, c| acc.max(c.width()))
    }

    pub fn center(&self) -> [T; N] {
        self.comps.map(|c| c.mid())
    }

    /// Southeast order on the `2N`-vector `(lo, hi)`: `self ⪯_SE other` iff
    /// `self.lo ⪯ other.lo` and `other.hi ⪯ self.hi`, i.e. `other ⊆ self`.
    pub fn se_leq(&self, other: &Self) -> bool {
        self.contains(other)
    }

    /// `other ⊆ self`.
    pub fn contains(&self, other: &Self) -> bool {
        self.comps
            .iter()
            .zip(other.comps.iter())
            .all(|(a, b)| a.contains_interval(b))
    }

    pub fn contains_point(&self, x: &[T; N]) -> bool {
        self.comps.iter().zip(x.iter()).all(|(c, &v)| c.contains(v))
    }

    pub fn hull(&self, other: &Self) -> Self {
        let mut comps = self.comps;
        for (c, o) in comps.iter_mut().zip(other.comps.iter()) {
            *c = c.hull(o);
        }
        Self { comps }
    }

    pub fn overlaps(&self, other: &Self) -> bool {
        self.comps
            .iter()
            .zip(other.comps.iter())
            .all(|(a, b)| a.overlaps(b))
    }

    pub fn pad(&self, r: T) -> Self {
        Self {
            comps: self.comps.map(|c| c.pad(r)),
        }
    }

    pub fn pad_each(&self, r: [T; N]) -> Self {
        let mut comps = self.comps;
        for (c, &ri) in comps.iter_mut().zip(r.iter()) {
            *c = c.pad(ri);
        }
        Self { comps }
    }

    /// Replaces component `i` by `value`.
    pub fn with(&self, i: usize, value: Interval<T>) -> Self {
        let mut comps = self.comps;
        comps[i] = value;
        Self { comps }
    }
}

impl<T: Scalar> Box2<T> {
    /// Corners in counterclockwise order starting at `(lo, lo)`.
    pub fn corners(&self) -> [[T; 2]; 4] {
        let [x, y] = self.comps;
        [
            [x.lo(), y.lo()],
            [x.hi(), y.lo()],
            [x.hi(), y.hi()],
            [x.lo(), y.hi()],
        ]
    }

    /// Euclidean distance between two closed boxes.
    pub fn distance(&self, other: &Self) -> T {
        let dx = self.comps[0].gap(&other.comps[0]);
        let dy = self.comps[1].gap(&other.comps[1]);
        dx.hypot(dy)
    }
}

impl<T, const N: usize> Index<usize> for IntervalVector<T, N> {
    type Output = Interval<T>;
    fn index(&self, i: usize) -> &Interval<T> {
        &self.comps[i]
    }
}

impl<T, const N: usize> IndexMut<usize> for IntervalVector<T, N> {
    fn index_mut(&mut self, i: usize) -> &mut Interval<T> {
        &mut self.comps[i]
    }
}

impl<T: fmt::Debug, const N: usize> fmt::Debug for IntervalVector<T, N> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.comps.iter()).finish()
    }
}

/// Southeast-order comparison of two interval vectors (`b ⊆ a`).
pub fn se_leq<T: Scalar, const N: usize>(
    a: &IntervalVector<T, N>,
    b: &IntervalVector<T, N>,
) -> bool {
    a.se_leq(b)
}

pub fn interval_hull<T: Scalar, const N: usize>(
    a: &IntervalVector<T, N>,
    b: &IntervalVector<T, N>,
) -> IntervalVector<T, N> {
    a.hull(b)
}
