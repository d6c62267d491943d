//! Sampled forward reachable set of the planning model over `(k, t)`.
//!
//! `[-1, 1]²` is covered by an `n_k × n_k` grid of cells centered on grid
//! points. For every cell and time index the table stores a body-frame box
//! enclosing the robot disk along every planning trajectory whose parameter
//! lies in the cell, over a window of half a time step on either side.
//! Obstacles are mapped into the body frame of the current pose at query time.

mod cache;

pub use cache::{cache_key, CacheError};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::dynamics::{
    cruise_flow, param_to_commands, plan_rollout, unicycle_step, PlanState, TrajParam,
    UnicycleState, VehicleLimits,
};
use crate::geometry::{Box2, ConvexPolygon, Interval};

type B2 = Box2<f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FrsError {
    #[error("grid resolution must be odd and at least 3, got {0}")]
    BadResolution(usize),
    #[error("time step must be positive, got {0}")]
    BadTimeStep(f64),
    #[error("robot radius must be nonnegative, got {0}")]
    BadRadius(f64),
    #[error("tracking-error bound has {got} time samples, table has {expected}")]
    GridMismatch { expected: usize, got: usize },
    #[error("tracking-error bound must be finite and nonnegative")]
    BadBound,
    #[error(transparent)]
    Limits(#[from] crate::dynamics::DynamicsError),
}

/// Extra pad, relative to the footprint's larger side, covering the bulge of
/// trajectory arcs between neighbouring samples. The heading spread inside
/// one sampling window is below 0.1 rad for the supported limits, which puts
/// the arc sagitta under 3% of the chord.
const CURVATURE_PAD: f64 = 0.1;

/// Build parameters, also the cache identity of a table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrsParams {
    pub limits: VehicleLimits<f64>,
    pub n_k: usize,
    pub dt: f64,
    pub robot_radius: f64,
}

impl Default for FrsParams {
    fn default() -> Self {
        Self {
            limits: VehicleLimits::default(),
            n_k: 41,
            dt: 0.025,
            robot_radius: 0.2,
        }
    }
}

impl FrsParams {
    pub fn validate(&self) -> Result<(), FrsError> {
        self.limits.validate()?;
        if self.n_k < 3 || self.n_k.is_multiple_of(2) {
            return Err(FrsError::BadResolution(self.n_k));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(FrsError::BadTimeStep(self.dt));
        }
        if !(self.robot_radius >= 0.0 && self.robot_radius.is_finite()) {
            return Err(FrsError::BadRadius(self.robot_radius));
        }
        Ok(())
    }

    /// Grid spacing in k.
    pub fn spacing(&self) -> f64 {
        2.0 / (self.n_k - 1) as f64
    }

    pub fn n_times(&self) -> usize {
        let n = (self.limits.horizon() / self.dt - 1e-9).ceil().max(1.0) as usize;
        n + 1
    }

    pub fn time(&self, j: usize) -> f64 {
        (j as f64 * self.dt).min(self.limits.horizon())
    }
}

/// Body-frame footprint table. Cell `c = i1·n_k + i2` is centered on
/// `k = (-1 + i1·h, -1 + i2·h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrsTable {
    params: FrsParams,
    times: Vec<f64>,
    /// `footprints[c·n_t + j]`.
    footprints: Vec<B2>,
    /// Hull of each cell's footprints over all times.
    cell_hulls: Vec<B2>,
    /// Pad applied per `(cell, time)` by [`inflate_frs`], same layout as footprints.
    inflation: Option<Vec<f64>>,
    /// Body-frame position at the end of the cruise phase of each cell center.
    cruise_ends: Vec<[f64; 2]>,
}

impl FrsTable {
    pub fn params(&self) -> &FrsParams {
        &self.params
    }

    pub fn limits(&self) -> &VehicleLimits<f64> {
        &self.params.limits
    }

    pub fn n_k(&self) -> usize {
        self.params.n_k
    }

    pub fn n_cells(&self) -> usize {
        self.params.n_k * self.params.n_k
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn robot_radius(&self) -> f64 {
        self.params.robot_radius
    }

    pub fn inflation(&self) -> Option<&[f64]> {
        self.inflation.as_deref()
    }

    pub fn is_inflated(&self) -> bool {
        self.inflation.is_some()
    }

    pub fn footprint(&self, cell: usize, j: usize) -> &B2 {
        &self.footprints[cell * self.times.len() + j]
    }

    pub fn cell_footprints(&self, cell: usize) -> &[B2] {
        let n = self.times.len();
        &self.footprints[cell * n..(cell + 1) * n]
    }

    pub fn cell_hull(&self, cell: usize) -> &B2 {
        &self.cell_hulls[cell]
    }

    /// Grid indices `(i1, i2)` of a cell.
    pub fn cell_indices(&self, cell: usize) -> (usize, usize) {
        (cell / self.params.n_k, cell % self.params.n_k)
    }

    pub fn cell_center(&self, cell: usize) -> TrajParam<f64> {
        let (i1, i2) = self.cell_indices(cell);
        let h = self.params.spacing();
        TrajParam::clamped(-1.0 + i1 as f64 * h, -1.0 + i2 as f64 * h)
    }

    /// Region of `[-1, 1]²` covered by a cell.
    pub fn cell_region(&self, cell: usize) -> B2 {
        let c = self.cell_center(cell);
        let h = self.params.spacing() / 2.0;
        B2::from_intervals([
            Interval::new((c.k1() - h).max(-1.0), (c.k1() + h).min(1.0)),
            Interval::new((c.k2() - h).max(-1.0), (c.k2() + h).min(1.0)),
        ])
    }

    /// Cell whose region contains `k` (the nearest grid point).
    pub fn cell_of(&self, k: &TrajParam<f64>) -> usize {
        let n = self.params.n_k;
        let h = self.params.spacing();
        let idx = |x: f64| (((x + 1.0) / h).round().max(0.0) as usize).min(n - 1);
        idx(k.k1()) * n + idx(k.k2())
    }

    /// Body-frame position of cell `c`'s center parameter at the end of the
    /// cruise phase.
    pub fn cell_cruise_end(&self, c: usize) -> [f64; 2] {
        self.cruise_ends[c]
    }

    /// Nearest time index to `t`.
    pub fn time_index(&self, t: f64) -> usize {
        ((t / self.params.dt).round().max(0.0) as usize).min(self.times.len() - 1)
    }

    fn from_parts(params: FrsParams, footprints: Vec<B2>, inflation: Option<Vec<f64>>) -> Self {
        let n_t = params.n_times();
        let times = (0..n_t).map(|j| params.time(j)).collect();
        let cell_hulls = footprints
            .chunks(n_t)
            .map(|c| c.iter().skip(1).fold(c[0], |a, b| a.hull(b)))
            .collect();
        let mut table = Self {
            params,
            times,
            footprints,
            cell_hulls,
            inflation,
            cruise_ends: Vec::new(),
        };
        table.cruise_ends = (0..table.n_cells())
            .map(|c| cruise_end(&table.cell_center(c), &table.params.limits))
            .collect();
        table
    }
}

/// Body-frame position reached by `k` at the end of the cruise phase.
pub fn cruise_end(k: &TrajParam<f64>, lim: &VehicleLimits<f64>) -> [f64; 2] {
    cruise_flow(
        &PlanState::origin(),
        lim.speed_of(k.k2()),
        lim.yaw_rate_of(k.k1()),
        lim.t_plan,
    )
    .position()
}

/// Builds the non-inflated table.
///
/// Every parameter on the refined grid of spacing `h/2` is rolled out once on
/// the half-step time grid. The footprint of a cell at `t_j` is the bounding
/// box of its (up to) nine refined samples at `t_j` and `t_j ± Δt/2`, padded by
/// the robot radius and a curvature margin. Positions are affine in `k2` and
/// smooth in `k1`, so the samples bound the cell up to that margin.
pub fn build_frs(params: &FrsParams) -> Result<FrsTable, FrsError> {
    params.validate()?;
    let lim = params.limits;
    let n_k = params.n_k;
    let n_r = 2 * n_k - 1;
    let h_r = 1.0 / (n_k - 1) as f64;
    let n_t = params.n_times();
    let horizon = lim.horizon();
    // Half-step time grid.
    let n_half = 2 * (n_t - 1) + 1;
    let half_times: Vec<f64> = (0..n_half)
        .map(|m| (m as f64 * params.dt / 2.0).min(horizon))
        .collect();

    let refined: Vec<TrajParam<f64>> = (0..n_r * n_r)
        .map(|r| TrajParam::clamped(-1.0 + (r / n_r) as f64 * h_r, -1.0 + (r % n_r) as f64 * h_r))
        .collect();
    let rollouts: Vec<Vec<[f64; 2]>> = refined
        .par_iter()
        .map(|k| {
            let profile = param_to_commands(*k, &lim);
            plan_rollout(&PlanState::origin(), &profile, &half_times)
                .expect("half-step grid lies inside the horizon")
                .into_iter()
                .map(|z| z.position())
                .collect()
        })
        .collect();

    let per_cell: Vec<Vec<B2>> = (0..n_k * n_k)
        .into_par_iter()
        .map(|c| {
            let (i1, i2) = (c / n_k, c % n_k);
            let span = |i: usize| (2 * i).saturating_sub(1)..=(2 * i + 1).min(n_r - 1);
            let samples: Vec<&Vec<[f64; 2]>> = span(i1)
                .flat_map(|a| span(i2).map(move |b| a * n_r + b))
                .map(|r| &rollouts[r])
                .collect();
            (0..n_t)
                .map(|j| {
                    let window = (2 * j).saturating_sub(1)..=(2 * j + 1).min(n_half - 1);
                    let mut lo = [f64::INFINITY; 2];
                    let mut hi = [f64::NEG_INFINITY; 2];
                    for s in &samples {
                        for p in &s[window.clone()] {
                            for d in 0..2 {
                                lo[d] = lo[d].min(p[d]);
                                hi[d] = hi[d].max(p[d]);
                            }
                        }
                    }
                    let side = (hi[0] - lo[0]).max(hi[1] - lo[1]);
                    B2::new(lo, hi).pad(params.robot_radius + CURVATURE_PAD * side)
                })
                .collect()
        })
        .collect();
    Ok(FrsTable::from_parts(*params, per_cell.concat(), None))
}

/// Worst-case position deviation of the tracking unicycle from the planning
/// model, per FRS time index.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingErrorBound {
    pub dt: f64,
    /// k-uniform bound per time index.
    pub values: Vec<f64>,
    /// Optional per-cell bound, `per_cell[c·n_t + j]`; overrides `values`.
    pub per_cell: Option<Vec<f64>>,
}

impl TrackingErrorBound {
    pub fn zeros(n_t: usize, dt: f64) -> Self {
        Self {
            dt,
            values: vec![0.0; n_t],
            per_cell: None,
        }
    }

    pub fn constant(n_t: usize, dt: f64, g: f64) -> Self {
        Self {
            dt,
            values: vec![g; n_t],
            per_cell: None,
        }
    }

    pub fn max(&self) -> f64 {
        let per_cell = self.per_cell.iter().flatten();
        self.values
            .iter()
            .chain(per_cell)
            .copied()
            .fold(0.0, f64::max)
    }
}

/// Simulation step used when measuring tracking error.
const TRACKING_SIM_STEPS_PER_SAMPLE: usize = 5;

/// Position deviation `|p_unicycle(t_j) − p_plan(t_j)|` at every FRS time for a
/// single parameter and initial speed, simulated with `w = 0` from the origin.
pub fn tracking_deviation(
    lim: &VehicleLimits<f64>,
    dt: f64,
    k: TrajParam<f64>,
    v0: f64,
) -> Vec<f64> {
    let params = FrsParams {
        limits: *lim,
        dt,
        ..FrsParams::default()
    };
    let n_t = params.n_times();
    let times: Vec<f64> = (0..n_t).map(|j| params.time(j)).collect();
    let profile = param_to_commands(k, lim);
    let plan = plan_rollout(&PlanState::origin(), &profile, &times).expect("grid inside horizon");
    let mut x = UnicycleState::new(0.0, 0.0, 0.0, v0);
    let mut out = Vec::with_capacity(n_t);
    out.push(0.0);
    for j in 1..n_t {
        let (t0, t1) = (times[j - 1], times[j]);
        let sub = (t1 - t0) / TRACKING_SIM_STEPS_PER_SAMPLE as f64;
        for s in 0..TRACKING_SIM_STEPS_PER_SAMPLE {
            x = unicycle_step(&x, t0 + s as f64 * sub, sub, &profile, [0.0, 0.0]);
        }
        let p = plan[j].position();
        out.push((x.x - p[0]).hypot(x.y - p[1]));
    }
    out
}

/// Samples `n_samples` parameters uniformly from `[-1, 1]²` and simulates
/// each from both endpoints of `v0_range`; returns the elementwise maximum
/// deviation. The extreme initial speed errors dominate because the speed
/// error dynamics are order preserving.
pub fn estimate_tracking_error(
    lim: &VehicleLimits<f64>,
    n_samples: usize,
    v0_range: Interval<f64>,
    seed: u64,
    dt: f64,
) -> TrackingErrorBound {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ks: Vec<TrajParam<f64>> = (0..n_samples.max(1))
        .map(|_| TrajParam::clamped(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)))
        .collect();
    let runs: Vec<Vec<f64>> = ks
        .par_iter()
        .map(|k| {
            let a = tracking_deviation(lim, dt, *k, v0_range.lo());
            let b = tracking_deviation(lim, dt, *k, v0_range.hi());
            a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect()
        })
        .collect();
    let mut values = vec![0.0f64; runs[0].len()];
    for r in &runs {
        for (v, d) in values.iter_mut().zip(r) {
            *v = v.max(*d);
        }
    }
    TrackingErrorBound {
        dt,
        values,
        per_cell: None,
    }
}

/// Returns a copy of `frs` with every footprint padded by `g` at its time
/// index (and cell, when `g` is per cell). Pads accumulate if the table is
/// already inflated.
pub fn inflate_frs(frs: &FrsTable, g: &TrackingErrorBound) -> Result<FrsTable, FrsError> {
    let n_t = frs.times.len();
    if g.values.len() != n_t || (g.dt - frs.params.dt).abs() > 1e-12 {
        return Err(FrsError::GridMismatch {
            expected: n_t,
            got: g.values.len(),
        });
    }
    if let Some(pc) = &g.per_cell {
        if pc.len() != frs.footprints.len() {
            return Err(FrsError::GridMismatch {
                expected: frs.footprints.len(),
                got: pc.len(),
            });
        }
    }
    let pad_at = |i: usize| match &g.per_cell {
        Some(pc) => pc[i],
        None => g.values[i % n_t],
    };
    if (0..frs.footprints.len()).any(|i| !(pad_at(i) >= 0.0 && pad_at(i).is_finite())) {
        return Err(FrsError::BadBound);
    }
    let footprints = frs
        .footprints
        .iter()
        .enumerate()
        .map(|(i, b)| b.pad(pad_at(i)))
        .collect();
    let inflation = (0..frs.footprints.len())
        .map(|i| frs.inflation.as_ref().map_or(0.0, |v| v[i]) + pad_at(i))
        .collect();
    Ok(FrsTable::from_parts(
        frs.params,
        footprints,
        Some(inflation),
    ))
}

/// Obstacles expressed in the body frame of `pose`, with their bounding boxes.
#[derive(Debug, Clone)]
pub struct BodyObstacles {
    pub polygons: Vec<ConvexPolygon<f64>>,
    pub aabbs: Vec<B2>,
}

impl BodyObstacles {
    pub fn new(obstacles: &[ConvexPolygon<f64>], pose: &PlanState<f64>) -> Self {
        let polygons: Vec<_> = obstacles
            .iter()
            .map(|o| o.to_frame(pose.position(), pose.h))
            .collect();
        let aabbs = polygons.iter().map(|p| p.aabb()).collect();
        Self { polygons, aabbs }
    }
}

/// Whether any footprint of `cell` comes within `buffer` of obstacle `i`.
fn cell_hits(frs: &FrsTable, cell: usize, body: &BodyObstacles, i: usize, buffer: f64) -> bool {
    let aabb = &body.aabbs[i];
    if !frs.cell_hull(cell).pad(buffer).overlaps(aabb) {
        return false;
    }
    let poly = &body.polygons[i];
    frs.cell_footprints(cell).iter().any(|fp| {
        if buffer > 0.0 {
            let grown = fp.pad(buffer);
            grown.overlaps(aabb)
                && poly.intersects_box(&grown)
                && poly.distance_to_box(fp) <= buffer
        } else {
            fp.overlaps(aabb) && poly.intersects_box(fp)
        }
    })
}

/// π_K: `true` marks a cell whose footprints, placed at `pose`, come within
/// `buffer` of any obstacle at any time. Equivalent to `max_i q_i ≥ 0` for the
/// cell's constraint values.
pub fn project_unsafe_params_buffered(
    frs: &FrsTable,
    obstacles: &[ConvexPolygon<f64>],
    pose: &PlanState<f64>,
    buffer: f64,
) -> Vec<bool> {
    let body = BodyObstacles::new(obstacles, pose);
    (0..frs.n_cells())
        .map(|c| (0..body.polygons.len()).any(|i| cell_hits(frs, c, &body, i, buffer)))
        .collect()
}

/// [`project_unsafe_params_buffered`] with zero buffer.
pub fn project_unsafe_params(
    frs: &FrsTable,
    obstacles: &[ConvexPolygon<f64>],
    pose: &PlanState<f64>,
) -> Vec<bool> {
    project_unsafe_params_buffered(frs, obstacles, pose, 0.0)
}

/// `q_i(k) = buffer − min_t dist(footprint(cell(k), t), obstacle_i)`, one per
/// obstacle. `k` is feasible when every value is negative.
pub fn constraint_values(
    k: &TrajParam<f64>,
    obstacles: &[ConvexPolygon<f64>],
    pose: &PlanState<f64>,
    frs: &FrsTable,
    buffer: f64,
) -> Vec<f64> {
    let body = BodyObstacles::new(obstacles, pose);
    constraint_values_body(k, &body, frs, buffer)
}

/// [`constraint_values`] with obstacles already mapped into the body frame.
pub fn constraint_values_body(
    k: &TrajParam<f64>,
    body: &BodyObstacles,
    frs: &FrsTable,
    buffer: f64,
) -> Vec<f64> {
    let cell = frs.cell_of(k);
    body.polygons
        .iter()
        .map(|poly| {
            let d = frs
                .cell_footprints(cell)
                .iter()
                .map(|fp| poly.distance_to_box(fp))
                .fold(f64::INFINITY, f64::min);
            buffer - d
        })
        .collect()
}

/// Radius of a disk around the origin containing every footprint: the longest
/// planning path plus the robot radius and the largest pad.
pub fn reachability_radius(frs: &FrsTable) -> f64 {
    let lim = frs.limits();
    let travel = lim.v_max * lim.t_plan + 0.5 * lim.v_max * lim.t_stop;
    let side = lim.v_max * frs.params.dt;
    let inflation = frs
        .inflation()
        .map_or(0.0, |v| v.iter().copied().fold(0.0, f64::max));
    travel + frs.robot_radius() + CURVATURE_PAD * (travel + side) + side + inflation
}
