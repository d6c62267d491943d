//! Fixed-step explicit Runge–Kutta integration over piecewise-defined fields.
//!
//! Command profiles switch formula at phase boundaries. A step that straddles a
//! boundary is split there and each piece evaluates the field with the phase
//! valid on that piece, so the integrator never samples a formula outside its
//! domain of validity.

use smallvec::SmallVec;

use crate::scalar::Scalar;

#[inline]
fn axpy<T: Scalar, const N: usize>(y: &[T; N], a: T, k: &[T; N]) -> [T; N] {
    let mut out = *y;
    for i in 0..N {
        out[i] = y[i] + a * k[i];
    }
    out
}

/// One classical RK4 step of `ẏ = f(t, y)`.
#[inline]
pub fn rk4_step<T, const N: usize, F>(f: &mut F, t: T, y: &[T; N], dt: T) -> [T; N]
where
    T: Scalar,
    F: FnMut(T, &[T; N]) -> [T; N],
{
    let half = dt * T::half();
    let k1 = f(t, y);
    let k2 = f(t + half, &axpy(y, half, &k1));
    let k3 = f(t + half, &axpy(y, half, &k2));
    let k4 = f(t + dt, &axpy(y, dt, &k3));
    let sixth = dt / T::lit(6.0);
    let mut out = *y;
    for i in 0..N {
        out[i] = y[i] + sixth * (k1[i] + T::two() * (k2[i] + k3[i]) + k4[i]);
    }
    out
}

/// Sub-intervals of `[t0, t0 + dt]` cut at the interior breakpoints.
///
/// Breakpoints closer than `1e-9·max(1, |t|)` to a step end are ignored so that
/// steps which already land on a boundary are not split into slivers.
pub fn split_step<T: Scalar>(t0: T, dt: T, breakpoints: &[T]) -> SmallVec<[(T, T); 4]> {
    let t1 = t0 + dt;
    let mut pieces = SmallVec::new();
    let mut start = t0;
    for &b in breakpoints {
        let tol = T::lit(1e-9) * T::one().max(b.abs());
        if b > start + tol && b < t1 - tol {
            pieces.push((start, b));
            start = b;
        }
    }
    pieces.push((start, t1));
    pieces
}

/// One RK4 step where the field also receives the midpoint time of the piece it
/// is integrating, used to select the piecewise formula.
pub fn rk4_step_piecewise<T, const N: usize, F>(
    f: &mut F,
    t: T,
    y: &[T; N],
    dt: T,
    breakpoints: &[T],
) -> [T; N]
where
    T: Scalar,
    F: FnMut(T, T, &[T; N]) -> [T; N],
{
    let mut y = *y;
    for &(a, b) in split_step(t, dt, breakpoints).iter() {
        let mid = a + (b - a) * T::half();
        let mut g = |s: T, z: &[T; N]| f(mid, s, z);
        y = rk4_step(&mut g, a, &y, b - a);
    }
    y
}
