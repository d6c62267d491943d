//! Vehicle models and command profiles.
//!
//! The high-fidelity model is a unicycle with state `(x, y, h, v)`; the planning
//! model is a Dubins car with state `(x, y, h)`. A trajectory parameter
//! `k ∈ [-1, 1]²` selects a constant `(ω_des, v_des)` for the cruise phase,
//! after which both commands ramp linearly to zero over the fail-safe phase.
//!
//! The tracking controller applies `ω = ω_des(t)` open loop and
//! `a = clamp(v̇_des(t) + k_a (v_des(t) - v), ±a_max)`. When `v(0) = v_des` and
//! there is no disturbance the unicycle reproduces the Dubins trajectory.

use rand::Rng;
use thiserror::Error;

use crate::geometry::{ConvexPolygon, GeometryError, Point2};
use crate::ode::rk4_step_piecewise;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },
    #[error("trajectory parameter ({k1}, {k2}) outside [-1, 1]^2")]
    ParamOutOfRange { k1: f64, k2: f64 },
    #[error("invalid vehicle limits: {0}")]
    InvalidLimits(&'static str),
    #[error("invalid disturbance patch: {0}")]
    InvalidPatch(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// High-fidelity unicycle state: position (m), heading (rad, unwrapped), speed (m/s).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UnicycleState<T> {
    pub x: T,
    pub y: T,
    pub h: T,
    pub v: T,
}

impl<T: Scalar> UnicycleState<T> {
    pub fn new(x: T, y: T, h: T, v: T) -> Self {
        Self { x, y, h, v }
    }

    pub fn to_array(self) -> [T; 4] {
        [self.x, self.y, self.h, self.v]
    }

    pub fn from_array(a: [T; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn pose(&self) -> PlanState<T> {
        PlanState::new(self.x, self.y, self.h)
    }

    pub fn position(&self) -> Point2<T> {
        [self.x, self.y]
    }
}

/// Planning-model (Dubins) state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlanState<T> {
    pub x: T,
    pub y: T,
    pub h: T,
}

impl<T: Scalar> PlanState<T> {
    pub fn new(x: T, y: T, h: T) -> Self {
        Self { x, y, h }
    }

    pub fn origin() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn position(&self) -> Point2<T> {
        [self.x, self.y]
    }

    /// Maps a point expressed in this pose's body frame into the world frame.
    pub fn body_to_world(&self, p: Point2<T>) -> Point2<T> {
        let (s, c) = self.h.sin_cos();
        [self.x + c * p[0] - s * p[1], self.y + s * p[0] + c * p[1]]
    }

    /// Inverse of [`Self::body_to_world`].
    pub fn world_to_body(&self, p: Point2<T>) -> Point2<T> {
        let (s, c) = self.h.sin_cos();
        let (dx, dy) = (p[0] - self.x, p[1] - self.y);
        [c * dx + s * dy, c * dy - s * dx]
    }

    /// Composes a body-frame relative pose onto this pose.
    pub fn compose(&self, rel: &PlanState<T>) -> PlanState<T> {
        let [x, y] = self.body_to_world([rel.x, rel.y]);
        PlanState::new(x, y, self.h + rel.h)
    }
}

/// Trajectory parameter `k = (k1, k2) ∈ [-1, 1]²`; `k1` selects the yaw rate and
/// `k2` the speed.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrajParam<T> {
    k1: T,
    k2: T,
}

impl<T: Scalar> TrajParam<T> {
    pub fn new(k1: T, k2: T) -> Result<Self, DynamicsError> {
        let unit = |k: T| k >= -T::one() && k <= T::one();
        if !unit(k1) || !unit(k2) {
            return Err(DynamicsError::ParamOutOfRange {
                k1: k1.as_f64(),
                k2: k2.as_f64(),
            });
        }
        Ok(Self { k1, k2 })
    }

    /// Clamps each component into `[-1, 1]` (NaN maps to 0).
    pub fn clamped(k1: T, k2: T) -> Self {
        let c = |k: T| {
            if k.is_nan() {
                T::zero()
            } else {
                k.clamp_to(-T::one(), T::one())
            }
        };
        Self {
            k1: c(k1),
            k2: c(k2),
        }
    }

    #[inline]
    pub fn k1(&self) -> T {
        self.k1
    }

    #[inline]
    pub fn k2(&self) -> T {
        self.k2
    }

    pub fn to_array(self) -> [T; 2] {
        [self.k1, self.k2]
    }
}

/// Actuation limits, tracking gain and horizon split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleLimits<T> {
    pub v_max: T,
    pub omega_max: T,
    pub a_max: T,
    /// Proportional velocity-tracking gain (1/s).
    pub k_a: T,
    pub t_plan: T,
    pub t_stop: T,
}

impl<T: Scalar> Default for VehicleLimits<T> {
    fn default() -> Self {
        Self {
            v_max: T::lit(2.0),
            omega_max: T::lit(1.0),
            a_max: T::lit(4.0),
            k_a: T::lit(4.0),
            t_plan: T::lit(1.5),
            t_stop: T::lit(1.0),
        }
    }
}

impl<T: Scalar> VehicleLimits<T> {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let pos = |x: T| x.is_finite() && x > T::zero();
        if !pos(self.v_max) {
            return Err(DynamicsError::InvalidLimits("v_max must be positive"));
        }
        if !pos(self.omega_max) {
            return Err(DynamicsError::InvalidLimits("omega_max must be positive"));
        }
        if !pos(self.a_max) {
            return Err(DynamicsError::InvalidLimits("a_max must be positive"));
        }
        if !pos(self.k_a) {
            return Err(DynamicsError::InvalidLimits("k_a must be positive"));
        }
        if !pos(self.t_plan) || !pos(self.t_stop) {
            return Err(DynamicsError::InvalidLimits(
                "t_plan and t_stop must be positive",
            ));
        }
        Ok(())
    }

    /// `T = t_plan + t_stop`.
    pub fn horizon(&self) -> T {
        self.t_plan + self.t_stop
    }

    /// Cruise speed selected by `k2` (affine onto `[0, v_max]`).
    pub fn speed_of(&self, k2: T) -> T {
        (k2 + T::one()) * T::half() * self.v_max
    }

    /// Cruise yaw rate selected by `k1` (affine onto `[-ω_max, ω_max]`).
    pub fn yaw_rate_of(&self, k1: T) -> T {
        k1 * self.omega_max
    }

    /// Inverse of [`VehicleLimits::speed_of`].
    pub fn k2_for_speed(&self, v: T) -> T {
        T::two() * v / self.v_max - T::one()
    }
}

/// Segment of a command profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Cruise,
    FailSafe,
    Rest,
}

/// Desired commands at an instant, with the time derivative of `v_des`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Commands<T> {
    pub v_des: T,
    pub omega_des: T,
    pub v_des_rate: T,
}

/// Time-parameterized `(v_des, ω_des)`: constant over `[0, t_plan]`, linear
/// ramp to zero over `[t_plan, t_plan + t_stop]`, zero afterwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommandProfile<T> {
    pub param: TrajParam<T>,
    pub v_cruise: T,
    pub omega_cruise: T,
    pub t_plan: T,
    pub t_stop: T,
    pub limits: VehicleLimits<T>,
}

impl<T: Scalar> CommandProfile<T> {
    /// Braking-only profile from the current speed: no cruise phase, zero yaw rate.
    pub fn braking(v_current: T, limits: &VehicleLimits<T>) -> Self {
        let v = v_current.clamp_to(T::zero(), limits.v_max);
        Self {
            param: TrajParam::clamped(T::zero(), limits.k2_for_speed(v)),
            v_cruise: v,
            omega_cruise: T::zero(),
            t_plan: T::zero(),
            t_stop: limits.t_stop,
            limits: *limits,
        }
    }

    pub fn horizon(&self) -> T {
        self.t_plan + self.t_stop
    }

    /// Phase boundaries, usable as integrator breakpoints.
    pub fn breakpoints(&self) -> [T; 2] {
        [self.t_plan, self.horizon()]
    }

    /// Right-continuous phase lookup.
    pub fn phase_at(&self, t: T) -> Phase {
        if t < self.t_plan {
            Phase::Cruise
        } else if t < self.horizon() {
            Phase::FailSafe
        } else {
            Phase::Rest
        }
    }

    /// Commands from the formula of `phase`, evaluated at `t`. Inside the phase's
    /// own time range this agrees with [`CommandProfile::commands`].
    #[inline]
    pub fn commands_in(&self, phase: Phase, t: T) -> Commands<T> {
        match phase {
            Phase::Cruise => Commands {
                v_des: self.v_cruise,
                omega_des: self.omega_cruise,
                v_des_rate: T::zero(),
            },
            Phase::FailSafe => {
                let frac = T::one() - (t - self.t_plan) / self.t_stop;
                Commands {
                    v_des: self.v_cruise * frac,
                    omega_des: self.omega_cruise * frac,
                    v_des_rate: -self.v_cruise / self.t_stop,
                }
            }
            Phase::Rest => Commands {
                v_des: T::zero(),
                omega_des: T::zero(),
                v_des_rate: T::zero(),
            },
        }
    }

    pub fn commands(&self, t: T) -> Commands<T> {
        self.commands_in(self.phase_at(t), t)
    }

    pub fn v_des(&self, t: T) -> T {
        self.commands(t).v_des
    }

    pub fn omega_des(&self, t: T) -> T {
        self.commands(t).omega_des
    }

    fn check_time(&self, t: T) -> Result<(), DynamicsError> {
        let horizon = self.horizon();
        let tol = T::lit(1e-9) * T::one().max(horizon);
        if t.is_nan() || t < -tol || t > horizon + tol {
            return Err(DynamicsError::TimeOutOfRange {
                t: t.as_f64(),
                horizon: horizon.as_f64(),
            });
        }
        Ok(())
    }
}

/// Maps `k` onto cruise commands `ω = k1·ω_max`, `v = (k2 + 1)/2·v_max`.
pub fn param_to_commands<T: Scalar>(
    k: TrajParam<T>,
    limits: &VehicleLimits<T>,
) -> CommandProfile<T> {
    CommandProfile {
        param: k,
        v_cruise: limits.speed_of(k.k2()),
        omega_cruise: limits.yaw_rate_of(k.k1()),
        t_plan: limits.t_plan,
        t_stop: limits.t_stop,
        limits: *limits,
    }
}

/// `sin(x)/x`, accurate near zero.
#[inline]
fn sinc<T: Scalar>(x: T) -> T {
    if x.abs() < T::lit(1e-4) {
        let x2 = x * x;
        T::one() - x2 / T::lit(6.0) + x2 * x2 / T::lit(120.0)
    } else {
        x.sin() / x
    }
}

/// Closed-form Dubins flow under constant `(v, ω)`: a straight line when `ω = 0`,
/// a circular arc otherwise. Written in chord form so it is continuous in `ω`.
pub fn cruise_flow<T: Scalar>(z0: &PlanState<T>, v: T, omega: T, t: T) -> PlanState<T> {
    let half_turn = omega * t * T::half();
    let chord = v * t * sinc(half_turn);
    let dir = z0.h + half_turn;
    PlanState::new(
        z0.x + chord * dir.cos(),
        z0.y + chord * dir.sin(),
        z0.h + omega * t,
    )
}

/// Dubins heading during the fail-safe ramp, `s` seconds after it starts.
#[inline]
fn ramp_heading<T: Scalar>(h0: T, omega: T, t_stop: T, s: T) -> T {
    h0 + omega * (s - s * s / (T::two() * t_stop))
}

const QUADRATURE_STEP: f64 = 1e-3;

/// Advances the fail-safe ramp from offset `s0` to `s1` (seconds into the ramp)
/// by composite Simpson quadrature on sub-intervals of at most 1 ms. The
/// heading has a closed form, so only the position needs quadrature.
fn ramp_advance<T: Scalar>(
    p: Point2<T>,
    ramp_start: &PlanState<T>,
    profile: &CommandProfile<T>,
    s0: T,
    s1: T,
) -> Point2<T> {
    if s1 <= s0 {
        return p;
    }
    let n = ((s1 - s0) / T::lit(QUADRATURE_STEP)).ceil().max(T::one());
    let steps = n.to_usize().unwrap_or(1);
    let h = (s1 - s0) / n;
    let vel = |s: T| {
        let speed = profile.v_cruise * (T::one() - s / profile.t_stop);
        let hd = ramp_heading(ramp_start.h, profile.omega_cruise, profile.t_stop, s);
        let (sn, cs) = hd.sin_cos();
        [speed * cs, speed * sn]
    };
    let mut out = p;
    for i in 0..steps {
        let a = s0 + h * T::from_usize(i).unwrap();
        let (fa, fm, fb) = (vel(a), vel(a + h * T::half()), vel(a + h));
        for d in 0..2 {
            out[d] = out[d] + h / T::lit(6.0) * (fa[d] + T::lit(4.0) * fm[d] + fb[d]);
        }
    }
    out
}

/// Planning-model state at `t` along `profile` from `z0`. Exact on the cruise
/// phase; the fail-safe ramp uses quadrature with sub-millisecond steps.
pub fn plan_flow<T: Scalar>(
    z0: &PlanState<T>,
    profile: &CommandProfile<T>,
    t: T,
) -> Result<PlanState<T>, DynamicsError> {
    Ok(plan_rollout(z0, profile, &[t])?[0])
}

/// [`plan_flow`] at each of the nondecreasing `times`, integrating incrementally.
pub fn plan_rollout<T: Scalar>(
    z0: &PlanState<T>,
    profile: &CommandProfile<T>,
    times: &[T],
) -> Result<Vec<PlanState<T>>, DynamicsError> {
    let horizon = profile.horizon();
    let ramp_start = cruise_flow(z0, profile.v_cruise, profile.omega_cruise, profile.t_plan);
    let mut out = Vec::with_capacity(times.len());
    // Position reached on the ramp so far and its offset into the ramp.
    let mut ramp_pos = ramp_start.position();
    let mut ramp_s = T::zero();
    for &t in times {
        profile.check_time(t)?;
        let t = t.clamp_to(T::zero(), horizon);
        if t <= profile.t_plan {
            out.push(cruise_flow(z0, profile.v_cruise, profile.omega_cruise, t));
            continue;
        }
        let s = t - profile.t_plan;
        if s < ramp_s {
            // Out-of-order request; restart the quadrature.
            ramp_pos = ramp_start.position();
            ramp_s = T::zero();
        }
        ramp_pos = ramp_advance(ramp_pos, &ramp_start, profile, ramp_s, s);
        ramp_s = s;
        out.push(PlanState::new(
            ramp_pos[0],
            ramp_pos[1],
            ramp_heading(ramp_start.h, profile.omega_cruise, profile.t_stop, s),
        ));
    }
    Ok(out)
}

/// Closed-loop unicycle field on a given phase's command formula.
#[inline]
pub fn closed_loop_field_in<T: Scalar>(
    phase: Phase,
    x: &[T; 4],
    t: T,
    profile: &CommandProfile<T>,
    w: [T; 2],
) -> [T; 4] {
    let cmd = profile.commands_in(phase, t);
    let lim = &profile.limits;
    let (s, c) = x[2].sin_cos();
    // Operation order matches the verifier's interval form, so degenerate
    // intervals reproduce this field bit for bit.
    let a =
        (-x[3] * lim.k_a + (cmd.v_des_rate + lim.k_a * cmd.v_des)).clamp_to(-lim.a_max, lim.a_max);
    [x[3] * c + w[0], x[3] * s + w[1], cmd.omega_des, a]
}

/// The closed-loop vector field shared by simulation and verification:
/// `(v cos h + w_x, v sin h + w_y, ω_des(t), a)`.
pub fn closed_loop_field<T: Scalar>(
    x: &UnicycleState<T>,
    t: T,
    profile: &CommandProfile<T>,
    w: [T; 2],
) -> [T; 4] {
    closed_loop_field_in(profile.phase_at(t), &x.to_array(), t, profile, w)
}

/// One RK4 step of the closed-loop unicycle under a constant disturbance `w`.
pub fn unicycle_step<T: Scalar>(
    x: &UnicycleState<T>,
    t: T,
    dt: T,
    profile: &CommandProfile<T>,
    w: [T; 2],
) -> UnicycleState<T> {
    let mut f =
        |mid: T, s: T, y: &[T; 4]| closed_loop_field_in(profile.phase_at(mid), y, s, profile, w);
    UnicycleState::from_array(rk4_step_piecewise(
        &mut f,
        t,
        &x.to_array(),
        dt,
        &profile.breakpoints(),
    ))
}

/// A region of the workspace with bounded additive velocity disturbance.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbancePatch<T> {
    pub region: ConvexPolygon<T>,
    pub w_lo: [T; 2],
    pub w_hi: [T; 2],
}

impl<T: Scalar> DisturbancePatch<T> {
    pub fn new(
        region: ConvexPolygon<T>,
        w_lo: [T; 2],
        w_hi: [T; 2],
    ) -> Result<Self, DynamicsError> {
        for i in 0..2 {
            if !(w_lo[i].is_finite() && w_hi[i].is_finite() && w_lo[i] <= w_hi[i]) {
                return Err(DynamicsError::InvalidPatch(format!(
                    "w_lo {:?} must be componentwise <= w_hi {:?}",
                    w_lo.map(|v| v.as_f64()),
                    w_hi.map(|v| v.as_f64())
                )));
            }
        }
        Ok(Self { region, w_lo, w_hi })
    }

    /// Per component, the bound with the larger magnitude.
    pub fn worst_case(&self) -> [T; 2] {
        let pick = |i: usize| {
            if self.w_hi[i].abs() >= self.w_lo[i].abs() {
                self.w_hi[i]
            } else {
                self.w_lo[i]
            }
        };
        [pick(0), pick(1)]
    }
}

/// How a patch's disturbance is realized in simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Realization {
    /// Uniform inside the patch bounds, redrawn every step.
    #[default]
    Random,
    /// The largest-magnitude corner of the patch bounds.
    WorstCase,
}

/// The workspace disturbance field: the first patch containing the position
/// applies, zero elsewhere.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DisturbanceField<T> {
    pub patches: Vec<DisturbancePatch<T>>,
    pub realization: Realization,
}

impl<T: Scalar> DisturbanceField<T> {
    pub fn new(patches: Vec<DisturbancePatch<T>>, realization: Realization) -> Self {
        Self {
            patches,
            realization,
        }
    }

    pub fn patch_at(&self, p: Point2<T>) -> Option<&DisturbancePatch<T>> {
        self.patches
            .iter()
            .find(|patch| patch.region.contains_point(p))
    }

    pub fn realize<R: Rng + ?Sized>(&self, p: Point2<T>, rng: &mut R) -> [T; 2] {
        let Some(patch) = self.patch_at(p) else {
            return [T::zero(); 2];
        };
        match self.realization {
            Realization::WorstCase => patch.worst_case(),
            Realization::Random => {
                let mut w = [T::zero(); 2];
                for i in 0..2 {
                    let u = T::lit(rng.gen::<f64>());
                    w[i] = patch.w_lo[i] + u * (patch.w_hi[i] - patch.w_lo[i]);
                }
                w
            }
        }
    }
}

/// One fixed-step RK4 step of the high-fidelity closed loop. The disturbance is
/// realized once at the current position and held over the step. Returns the
/// new state and the applied disturbance.
pub fn hifi_step<T: Scalar, R: Rng + ?Sized>(
    x: &UnicycleState<T>,
    t: T,
    dt: T,
    profile: &CommandProfile<T>,
    field: &DisturbanceField<T>,
    rng: &mut R,
) -> (UnicycleState<T>, [T; 2]) {
    let w = field.realize(x.position(), rng);
    (unicycle_step(x, t, dt, profile, w), w)
}
