//! Execution-time certification by mixed-monotone interval reachability.
//!
//! An inclusion function `F = [F̲, F̄]` of the closed-loop field gives the
//! embedding system
//!
//! ```text
//! ẋ̲ᵢ = F̲([x̲, x̄ with xᵢ := x̲ᵢ], w)ᵢ      ẋ̄ᵢ = F̄([x̲ with xᵢ := x̄ᵢ, x̄], w)ᵢ
//! ```
//!
//! whose flow, started from `[x̂ - ε, x̂ + ε]`, bounds every closed-loop
//! trajectory with `w(t) ∈ [w̲, w̄]`. The flow is integrated with fixed-step
//! RK4. The resulting tube is projected onto the position coordinates and
//! checked against obstacles, including swept hulls between samples.

use std::cell::Cell;

use thiserror::Error;

use crate::dynamics::{CommandProfile, Commands, Phase, UnicycleState};
use crate::geometry::{Box2, ConvexPolygon, Interval, IntervalVector};
use crate::ode::rk4_step_piecewise;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifierError {
    #[error("step {dt} does not divide the horizon {horizon}")]
    StepDoesNotDivide { dt: f64, horizon: f64 },
    #[error("embedding order violated at step {index} (lower bound above upper bound)")]
    OrderViolation { index: usize },
    #[error("expected {expected} disturbance bounds, got {got}")]
    BoundsLength { expected: usize, got: usize },
    #[error("invalid uncertainty configuration: {0}")]
    InvalidConfig(&'static str),
}

/// Lower and upper bound of the state, `(x̲, x̄) ∈ ℝ²ⁿ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingState<T, const N: usize = 4> {
    pub lower: [T; N],
    pub upper: [T; N],
}

impl<T: Scalar, const N: usize> EmbeddingState<T, N> {
    pub fn from_interval(iv: &IntervalVector<T, N>) -> Self {
        Self {
            lower: iv.lo(),
            upper: iv.hi(),
        }
    }

    pub fn is_ordered(&self) -> bool {
        self.lower
            .iter()
            .zip(self.upper.iter())
            .all(|(l, u)| l <= u)
    }

    /// Panics if the bounds are out of order; check [`EmbeddingState::is_ordered`] first.
    pub fn interval(&self) -> IntervalVector<T, N> {
        IntervalVector::new(self.lower, self.upper)
    }
}

/// A system with an inclusion function, integrable as an embedding system.
///
/// `piece` is a time inside the current integration piece; systems with
/// piecewise-defined inputs use it to pick the formula.
pub trait EmbeddingSystem<T: Scalar, const N: usize> {
    fn inclusion(&self, x: &IntervalVector<T, N>, t: T, piece: T) -> IntervalVector<T, N>;

    /// Time points where the field changes formula.
    fn breakpoints(&self) -> &[T] {
        &[]
    }

    /// Embedding field from face evaluations of the inclusion function.
    fn embedding(&self, e: &EmbeddingState<T, N>, t: T, piece: T) -> EmbeddingState<T, N> {
        face_embedding(e, |x| self.inclusion(x, t, piece))
    }
}

/// Generic mixed-monotone embedding: component `i` of the lower (upper)
/// derivative evaluates the inclusion function on the face where `xᵢ` is pinned
/// to its lower (upper) bound.
pub fn face_embedding<T: Scalar, const N: usize>(
    e: &EmbeddingState<T, N>,
    mut inclusion: impl FnMut(&IntervalVector<T, N>) -> IntervalVector<T, N>,
) -> EmbeddingState<T, N> {
    let full = e.interval();
    let mut lower = [T::zero(); N];
    let mut upper = [T::zero(); N];
    for i in 0..N {
        lower[i] = inclusion(&full.with(i, Interval::point(e.lower[i])))[i].lo();
        upper[i] = inclusion(&full.with(i, Interval::point(e.upper[i])))[i].hi();
    }
    EmbeddingState { lower, upper }
}

/// The closed-loop unicycle tracking a command profile under an interval
/// disturbance on the position rates.
#[derive(Debug, Clone)]
pub struct ClosedLoopUnicycle<'a, T: Scalar> {
    pub profile: &'a CommandProfile<T>,
    pub w: Box2<T>,
    breakpoints: [T; 2],
    /// Last heading interval and its `(sin, cos)` ranges. RK4's two midpoint
    /// stages share a heading whenever the yaw rate is constant.
    trig: Cell<Option<TrigMemo<T>>>,
}

/// Last heading enclosure with its trig enclosures, and the anchor heading
/// with its exact `sin`/`cos` that later stages rotate from.
type TrigMemo<T> = ((Interval<T>, (Interval<T>, Interval<T>)), (T, T, T));

impl<'a, T: Scalar> ClosedLoopUnicycle<'a, T> {
    pub fn new(profile: &'a CommandProfile<T>, w: Box2<T>) -> Self {
        Self {
            profile,
            w,
            breakpoints: profile.breakpoints(),
            trig: Cell::new(None),
        }
    }

    fn sin_cos(&self, h: Interval<T>) -> (Interval<T>, Interval<T>) {
        let memo = self.trig.get();
        if let Some(((last, sc), _)) = memo {
            if last == h {
                return sc;
            }
        }
        let anchor = match memo {
            Some((_, anchor)) => anchor,
            None => {
                let mid = h.lo() + (h.hi() - h.lo()) * T::half();
                let (s, c) = mid.sin_cos();
                (mid, s, c)
            }
        };
        let sc = h.sin_cos_near(anchor.0, anchor.1, anchor.2);
        self.trig.set(Some(((h, sc), anchor)));
        sc
    }

    fn inclusion_on(&self, phase: Phase, x: &IntervalVector<T, 4>, t: T) -> IntervalVector<T, 4> {
        let cmd = self.profile.commands_in(phase, t);
        let [xd, yd, hd, vd] = self.rates(&cmd, x[2], x[3]);
        IntervalVector::from_intervals([xd, yd, hd, vd])
    }

    #[inline]
    fn rates(&self, cmd: &Commands<T>, h: Interval<T>, v: Interval<T>) -> [Interval<T>; 4] {
        let lim = &self.profile.limits;
        let (sin_h, cos_h) = self.sin_cos(h);
        let xd = v * cos_h + self.w[0];
        let yd = v * sin_h + self.w[1];
        let hd = Interval::point(cmd.omega_des);
        // a(v) is nonincreasing in v, so the range is the image of the endpoints.
        let vd =
            (-v * lim.k_a + (cmd.v_des_rate + lim.k_a * cmd.v_des)).clamp(-lim.a_max, lim.a_max);
        [xd, yd, hd, vd]
    }

    #[inline]
    fn accel(&self, cmd: &Commands<T>, v: T) -> T {
        let lim = &self.profile.limits;
        // Same operation order as the interval form so both agree bit for bit.
        (-v * lim.k_a + (cmd.v_des_rate + lim.k_a * cmd.v_des)).clamp_to(-lim.a_max, lim.a_max)
    }
}

impl<T: Scalar> EmbeddingSystem<T, 4> for ClosedLoopUnicycle<'_, T> {
    fn inclusion(&self, x: &IntervalVector<T, 4>, t: T, piece: T) -> IntervalVector<T, 4> {
        self.inclusion_on(self.profile.phase_at(piece), x, t)
    }

    fn breakpoints(&self) -> &[T] {
        &self.breakpoints
    }

    /// Same result as the face construction, with fewer evaluations: `ẋ` and
    /// `ẏ` do not depend on `x` or `y`, `ḣ` depends on no state, and `v̇`
    /// depends on `v` alone, so the faces reduce to the full box and to the
    /// two speed endpoints.
    fn embedding(&self, e: &EmbeddingState<T, 4>, t: T, piece: T) -> EmbeddingState<T, 4> {
        let cmd = self.profile.commands_in(self.profile.phase_at(piece), t);
        let h = Interval::from_ordered(e.lower[2], e.upper[2]);
        let v = Interval::from_ordered(e.lower[3], e.upper[3]);
        let [xd, yd, hd, _] = self.rates(&cmd, h, v);
        EmbeddingState {
            lower: [xd.lo(), yd.lo(), hd.lo(), self.accel(&cmd, e.lower[3])],
            upper: [xd.hi(), yd.hi(), hd.hi(), self.accel(&cmd, e.upper[3])],
        }
    }
}

/// Natural inclusion function of the closed-loop field: for every
/// `x ∈ x_iv` and `w ∈ w_iv`, `closed_loop_field(x, t, profile, w) ∈ output`.
pub fn inclusion_field<T: Scalar>(
    x_iv: &IntervalVector<T, 4>,
    t: T,
    profile: &CommandProfile<T>,
    w_iv: &Box2<T>,
) -> IntervalVector<T, 4> {
    ClosedLoopUnicycle::new(profile, *w_iv).inclusion(x_iv, t, t)
}

/// Embedding-system derivative by face evaluation of [`inclusion_field`].
pub fn embedding_field<T: Scalar>(
    e: &EmbeddingState<T, 4>,
    t: T,
    profile: &CommandProfile<T>,
    w_iv: &Box2<T>,
) -> EmbeddingState<T, 4> {
    face_embedding(e, |x| inclusion_field(x, t, profile, w_iv))
}

/// Disturbance bounds over the verification horizon.
#[derive(Debug, Clone, PartialEq)]
pub enum DisturbanceBounds<T> {
    Constant(Box2<T>),
    /// One bound per tube sample `t_0..t_N`; the step `[t_j, t_{j+1}]` uses
    /// the hull of its two endpoint bounds.
    PerIndex(Vec<Box2<T>>),
}

impl<T: Scalar> DisturbanceBounds<T> {
    pub fn zero() -> Self {
        Self::Constant(Box2::point([T::zero(); 2]))
    }

    pub fn for_step(&self, j: usize) -> Box2<T> {
        match self {
            Self::Constant(b) => *b,
            Self::PerIndex(v) => {
                let a = v[j.min(v.len() - 1)];
                a.hull(&v[(j + 1).min(v.len() - 1)])
            }
        }
    }
}

/// Initial-state half-widths, disturbance bounds and tube post-processing.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyConfig<T> {
    /// Half-widths of the initial box around the estimate: (m, m, rad, m/s).
    pub epsilon: [T; 4],
    pub w_bounds: DisturbanceBounds<T>,
    /// Radius of the robot body; position boxes are padded by it when checking
    /// obstacles.
    pub footprint_radius: T,
    /// Extra outward inflation applied to every bound after each step.
    pub step_pad: T,
}

impl<T: Scalar> Default for UncertaintyConfig<T> {
    fn default() -> Self {
        Self {
            epsilon: [T::lit(0.02), T::lit(0.02), T::lit(0.01), T::lit(0.02)],
            w_bounds: DisturbanceBounds::zero(),
            footprint_radius: T::zero(),
            step_pad: T::zero(),
        }
    }
}

/// Reachable tube over `[0, T]` sampled every `dt_v`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReachTube<T> {
    pub times: Vec<T>,
    pub states: Vec<EmbeddingState<T, 4>>,
    /// Projection of each state interval onto `(x, y)`.
    pub position_boxes: Vec<Box2<T>>,
    /// `hull(B_j, B_{j+1})`.
    pub swept_hulls: Vec<Box2<T>>,
    pub footprint_radius: T,
}

impl<T: Scalar> ReachTube<T> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state_interval(&self, j: usize) -> IntervalVector<T, 4> {
        self.states[j].interval()
    }

    /// Largest width over all components and samples.
    pub fn max_width(&self) -> T {
        self.states
            .iter()
            .map(|s| s.interval().max_width())
            .fold(T::zero(), T::max)
    }
}

/// Integrates the embedding system of [`ClosedLoopUnicycle`] from
/// `[x̂ - ε, x̂ + ε]` over the profile's horizon with fixed step `dt_v`.
pub fn propagate_tube<T: Scalar>(
    x_hat: &UnicycleState<T>,
    cfg: &UncertaintyConfig<T>,
    profile: &CommandProfile<T>,
    dt_v: T,
) -> Result<ReachTube<T>, VerifierError> {
    let mut p = TubePropagator::new(x_hat, cfg.clone(), profile, dt_v)?;
    while p.advance()? {}
    Ok(p.tube())
}

/// Step-by-step tube propagation. Lets a caller stop at the first collision,
/// or change the disturbance bounds and resume from the first affected sample
/// instead of starting over.
#[derive(Debug, Clone)]
pub struct TubePropagator<'a, T> {
    profile: &'a CommandProfile<T>,
    cfg: UncertaintyConfig<T>,
    dt_v: T,
    steps: usize,
    states: Vec<EmbeddingState<T, 4>>,
}

impl<'a, T: Scalar> TubePropagator<'a, T> {
    pub fn new(
        x_hat: &UnicycleState<T>,
        cfg: UncertaintyConfig<T>,
        profile: &'a CommandProfile<T>,
        dt_v: T,
    ) -> Result<Self, VerifierError> {
        if !(dt_v > T::zero()) {
            return Err(VerifierError::InvalidConfig("dt_v must be positive"));
        }
        if cfg.epsilon.iter().any(|e| !(*e >= T::zero())) {
            return Err(VerifierError::InvalidConfig("epsilon must be nonnegative"));
        }
        if !(cfg.step_pad >= T::zero()) || !(cfg.footprint_radius >= T::zero()) {
            return Err(VerifierError::InvalidConfig("pads must be nonnegative"));
        }
        let horizon = profile.horizon();
        let steps_f = (horizon / dt_v).round();
        if (steps_f * dt_v - horizon).abs() > T::lit(1e-9) {
            return Err(VerifierError::StepDoesNotDivide {
                dt: dt_v.as_f64(),
                horizon: horizon.as_f64(),
            });
        }
        let steps = steps_f.to_usize().unwrap_or(0);
        check_bounds_len(&cfg.w_bounds, steps)?;
        let x0 = IntervalVector::centered(x_hat.to_array(), cfg.epsilon);
        let mut states = Vec::with_capacity(steps + 1);
        states.push(EmbeddingState::from_interval(&x0));
        Ok(Self {
            profile,
            cfg,
            dt_v,
            steps,
            states,
        })
    }

    /// Number of integration steps over the full horizon.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Samples computed so far (at least the initial one).
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.states.len() == self.steps + 1
    }

    pub fn position_box(&self, j: usize) -> Box2<T> {
        let s = &self.states[j];
        Box2::new([s.lower[0], s.lower[1]], [s.upper[0], s.upper[1]])
    }

    /// Computes the next sample. Returns `false` once the horizon is covered.
    pub fn advance(&mut self) -> Result<bool, VerifierError> {
        if self.is_complete() {
            return Ok(false);
        }
        let j = self.states.len() - 1;
        let t = self.dt_v * T::from_usize(j).unwrap();
        let sys = ClosedLoopUnicycle::new(self.profile, self.cfg.w_bounds.for_step(j));
        let mut f = |piece: T, s: T, y: &[T; 8]| {
            let d = sys.embedding(&unpack(y), s, piece);
            pack(&d)
        };
        let y = rk4_step_piecewise(
            &mut f,
            t,
            &pack(&self.states[j]),
            self.dt_v,
            sys.breakpoints(),
        );
        let mut e = unpack(&y);
        if self.cfg.step_pad > T::zero() {
            for i in 0..4 {
                e.lower[i] = e.lower[i] - self.cfg.step_pad;
                e.upper[i] = e.upper[i] + self.cfg.step_pad;
            }
        }
        if !e.is_ordered() {
            return Err(VerifierError::OrderViolation { index: j + 1 });
        }
        self.states.push(e);
        Ok(true)
    }

    /// Advances until the padded footprint of a new sample, or of the hull
    /// swept since the previous one, meets an obstacle, or the horizon is
    /// covered. Returns whether a collision stopped it; [`certify`] on the
    /// resulting tube then reports that collision exactly as it would on the
    /// full tube.
    pub fn advance_until_collision(
        &mut self,
        obstacles: &[ConvexPolygon<T>],
    ) -> Result<bool, VerifierError> {
        let aabbs: Vec<Box2<T>> = obstacles.iter().map(|o| o.aabb()).collect();
        if self.states.len() == 1 && self.hits(&self.position_box(0), obstacles, &aabbs) {
            return Ok(true);
        }
        // Each sample box lies inside the hull swept into it, so checking the
        // hulls covers the boxes too.
        while self.advance()? {
            if self.hits(&self.swept_into_last(), obstacles, &aabbs) {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// [`TubePropagator::advance_until_collision`] that lets the caller revise
    /// the per-index disturbance bound of each new sample. Once sample `j` is
    /// computed, `revise(j, bound_j, swept)` sees its current bound and the
    /// hull swept into it (the initial box for `j = 0`). A returned bound
    /// replaces `bound_j`, sample `j` is recomputed and `revise` is asked
    /// again, so `revise` must eventually return `None`.
    pub fn advance_revising<F>(
        &mut self,
        obstacles: &[ConvexPolygon<T>],
        mut revise: F,
    ) -> Result<bool, VerifierError>
    where
        F: FnMut(usize, &Box2<T>, &Box2<T>) -> Option<Box2<T>>,
    {
        if !matches!(self.cfg.w_bounds, DisturbanceBounds::PerIndex(_)) {
            return Err(VerifierError::InvalidConfig(
                "revising needs per-index disturbance bounds",
            ));
        }
        let aabbs: Vec<Box2<T>> = obstacles.iter().map(|o| o.aabb()).collect();
        if self.states.len() == 1 {
            let b0 = self.position_box(0);
            while let Some(b) = revise(0, &self.bound(0), &b0) {
                self.set_bound(0, b);
            }
            if self.hits(&b0, obstacles, &aabbs) {
                return Ok(true);
            }
        }
        while self.advance()? {
            let n = self.states.len() - 1;
            while let Some(b) = revise(n, &self.bound(n), &self.swept_into_last()) {
                self.set_bound(n, b);
                self.states.pop();
                self.advance()?;
            }
            if self.hits(&self.swept_into_last(), obstacles, &aabbs) {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Current disturbance bounds.
    pub fn bounds(&self) -> &DisturbanceBounds<T> {
        &self.cfg.w_bounds
    }

    fn bound(&self, j: usize) -> Box2<T> {
        match &self.cfg.w_bounds {
            DisturbanceBounds::Constant(b) => *b,
            DisturbanceBounds::PerIndex(v) => v[j],
        }
    }

    fn set_bound(&mut self, j: usize, b: Box2<T>) {
        if let DisturbanceBounds::PerIndex(v) = &mut self.cfg.w_bounds {
            v[j] = b;
        }
    }

    fn swept_into_last(&self) -> Box2<T> {
        let n = self.states.len() - 1;
        self.position_box(n.saturating_sub(1))
            .hull(&self.position_box(n))
    }

    fn hits(&self, b: &Box2<T>, obstacles: &[ConvexPolygon<T>], aabbs: &[Box2<T>]) -> bool {
        let b = b.pad(self.cfg.footprint_radius);
        obstacles
            .iter()
            .zip(aabbs)
            .any(|(o, bb)| bb.overlaps(&b) && o.intersects_box(&b))
    }

    /// Replaces the disturbance bounds and discards every sample from
    /// `first_changed` on. With per-index bounds the step into sample `j`
    /// reads bounds `j - 1` and `j`, so when bound `j` is the first to change,
    /// samples before `j` stay valid.
    pub fn set_bounds(
        &mut self,
        bounds: DisturbanceBounds<T>,
        first_changed: usize,
    ) -> Result<(), VerifierError> {
        check_bounds_len(&bounds, self.steps)?;
        self.cfg.w_bounds = bounds;
        self.states.truncate(first_changed.max(1));
        Ok(())
    }

    /// The tube over the samples computed so far.
    pub fn tube(&self) -> ReachTube<T> {
        let times = (0..self.states.len())
            .map(|j| self.dt_v * T::from_usize(j).unwrap())
            .collect();
        let position_boxes: Vec<Box2<T>> = (0..self.states.len())
            .map(|j| self.position_box(j))
            .collect();
        let swept_hulls = position_boxes
            .windows(2)
            .map(|w| w[0].hull(&w[1]))
            .collect();
        ReachTube {
            times,
            states: self.states.clone(),
            position_boxes,
            swept_hulls,
            footprint_radius: self.cfg.footprint_radius,
        }
    }
}

fn check_bounds_len<T>(bounds: &DisturbanceBounds<T>, steps: usize) -> Result<(), VerifierError> {
    match bounds {
        DisturbanceBounds::PerIndex(v) if v.len() != steps + 1 => {
            Err(VerifierError::BoundsLength {
                expected: steps + 1,
                got: v.len(),
            })
        }
        _ => Ok(()),
    }
}

#[inline]
fn pack<T: Scalar>(e: &EmbeddingState<T, 4>) -> [T; 8] {
    let mut y = [T::zero(); 8];
    y[..4].copy_from_slice(&e.lower);
    y[4..].copy_from_slice(&e.upper);
    y
}

#[inline]
fn unpack<T: Scalar>(y: &[T; 8]) -> EmbeddingState<T, 4> {
    EmbeddingState {
        lower: [y[0], y[1], y[2], y[3]],
        upper: [y[4], y[5], y[6], y[7]],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Safe,
    Unsafe,
}

/// Earliest detected intersection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Collision<T> {
    /// Tube sample index `j`; a swept-hull hit refers to `[t_j, t_{j+1}]`.
    pub index: usize,
    pub time: T,
    pub obstacle: usize,
    /// Whether only the swept hull (not the sample box) intersected.
    pub swept: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate<T> {
    pub verdict: Verdict,
    pub first_collision: Option<Collision<T>>,
}

impl<T> Certificate<T> {
    pub fn is_safe(&self) -> bool {
        self.verdict == Verdict::Safe
    }
}

/// Checks every position box and every swept hull (both padded by the robot
/// radius) against every obstacle. Reports the smallest sample index with an
/// intersection, ties broken by the lowest obstacle index.
pub fn certify<T: Scalar>(tube: &ReachTube<T>, obstacles: &[ConvexPolygon<T>]) -> Certificate<T> {
    let r = tube.footprint_radius;
    let overall = tube
        .position_boxes
        .iter()
        .skip(1)
        .fold(tube.position_boxes[0], |acc, b| acc.hull(b))
        .pad(r);
    let relevant: Vec<(usize, &ConvexPolygon<T>, Box2<T>)> = obstacles
        .iter()
        .enumerate()
        .map(|(i, o)| (i, o, o.aabb()))
        .filter(|(_, _, bb)| bb.overlaps(&overall))
        .collect();
    if !relevant.is_empty() {
        for (j, b) in tube.position_boxes.iter().enumerate() {
            let b = b.pad(r);
            let hull = tube.swept_hulls.get(j).map(|h| h.pad(r));
            for &(i, poly, ref bb) in &relevant {
                let hit_box = bb.overlaps(&b) && poly.intersects_box(&b);
                let hit_hull =
                    !hit_box && hull.is_some_and(|h| bb.overlaps(&h) && poly.intersects_box(&h));
                if hit_box || hit_hull {
                    return Certificate {
                        verdict: Verdict::Unsafe,
                        first_collision: Some(Collision {
                            index: j,
                            time: tube.times[j],
                            obstacle: i,
                            swept: hit_hull,
                        }),
                    };
                }
            }
        }
    }
    Certificate {
        verdict: Verdict::Safe,
        first_collision: None,
    }
}
