//! Online trajectory-parameter selection: minimize the goal cost over the
//! parameters whose FRS cells are clear of every obstacle.

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::dynamics::{PlanState, TrajParam};
use crate::frs::{cruise_end, project_unsafe_params_buffered, FrsTable};
use crate::geometry::{Box2, ConvexPolygon, Point2};

/// Objective evaluations allowed for the local refinement.
pub const REFINE_BUDGET: usize = 25;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlannerError {
    #[error("buffer must be nonnegative, got {0}")]
    NegativeBuffer(f64),
    #[error("admissible set must lie inside [-1, 1]²")]
    BadAdmissibleSet,
    #[error("goal must be finite")]
    BadGoal,
}

#[derive(Debug, Clone)]
pub struct PlanningProblem<'a> {
    pub pose: PlanState<f64>,
    pub goal: Point2<f64>,
    pub obstacles: &'a [ConvexPolygon<f64>],
    pub frs: &'a FrsTable,
    pub k_adm: Box2<f64>,
    /// Required clearance between footprints and obstacles.
    pub buffer: f64,
}

impl<'a> PlanningProblem<'a> {
    pub fn new(
        pose: PlanState<f64>,
        goal: Point2<f64>,
        obstacles: &'a [ConvexPolygon<f64>],
        frs: &'a FrsTable,
    ) -> Self {
        Self {
            pose,
            goal,
            obstacles,
            frs,
            k_adm: Box2::new([-1.0, -1.0], [1.0, 1.0]),
            buffer: 0.0,
        }
    }

    pub fn with_buffer(mut self, buffer: f64) -> Self {
        self.buffer = buffer;
        self
    }

    pub fn with_k_adm(mut self, k_adm: Box2<f64>) -> Self {
        self.k_adm = k_adm;
        self
    }

    pub fn validate(&self) -> Result<(), PlannerError> {
        if !(self.buffer >= 0.0) {
            return Err(PlannerError::NegativeBuffer(self.buffer));
        }
        if !Box2::new([-1.0, -1.0], [1.0, 1.0]).contains(&self.k_adm) {
            return Err(PlannerError::BadAdmissibleSet);
        }
        if !self.goal.iter().all(|g| g.is_finite()) {
            return Err(PlannerError::BadGoal);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutcome {
    /// `None` when no admissible cell is safe.
    pub k_star: Option<TrajParam<f64>>,
    /// Objective at `k_star`; infinite when infeasible.
    pub cost: f64,
    pub evaluations: usize,
    pub solve_time: Duration,
}

impl PlanOutcome {
    pub fn is_feasible(&self) -> bool {
        self.k_star.is_some()
    }
}

/// Squared distance from the end of the cruise phase to the goal.
pub fn objective(k: &TrajParam<f64>, problem: &PlanningProblem) -> f64 {
    let goal = problem.pose.world_to_body(problem.goal);
    dist2(cruise_end(k, problem.frs.limits()), goal)
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (a[0] - b[0], a[1] - b[1]);
    dx * dx + dy * dy
}

/// Unsafe-cell mask of a problem (π_K with the problem's buffer).
#[derive(Debug, Clone, PartialEq)]
pub struct SafetyMask {
    pub unsafe_cells: Vec<bool>,
}

impl SafetyMask {
    pub fn is_safe(&self, cell: usize) -> bool {
        !self.unsafe_cells[cell]
    }

    pub fn safe_count(&self) -> usize {
        self.unsafe_cells.iter().filter(|u| !**u).count()
    }
}

/// First stage: classify every k-cell against the obstacles.
pub fn constraint_setup(problem: &PlanningProblem) -> SafetyMask {
    SafetyMask {
        unsafe_cells: project_unsafe_params_buffered(
            problem.frs,
            problem.obstacles,
            &problem.pose,
            problem.buffer,
        ),
    }
}

/// Second stage: grid argmin over safe admissible cell centers (ties go to the
/// lowest linear index), then coordinate descent with a halving step. Trial
/// points are accepted only inside safe cells, which is exactly the
/// `q_i(k) < 0` check since constraint values are constant per cell.
pub fn solve_with_mask(problem: &PlanningProblem, mask: &SafetyMask) -> PlanOutcome {
    let start = Instant::now();
    let frs = problem.frs;
    let mut evaluations = 0;
    let goal = problem.pose.world_to_body(problem.goal);
    let mut best: Option<(TrajParam<f64>, f64)> = None;
    for cell in 0..frs.n_cells() {
        if !mask.is_safe(cell) {
            continue;
        }
        let k = frs.cell_center(cell);
        if !problem.k_adm.contains_point(&k.to_array()) {
            continue;
        }
        evaluations += 1;
        let j = dist2(frs.cell_cruise_end(cell), goal);
        if best.is_none_or(|(_, b)| j < b) {
            best = Some((k, j));
        }
    }
    let Some((mut k, mut cost)) = best else {
        return PlanOutcome {
            k_star: None,
            cost: f64::INFINITY,
            evaluations,
            solve_time: start.elapsed(),
        };
    };

    let adm = &problem.k_adm;
    let mut step = frs.params().spacing() / 2.0;
    let mut spent = 0;
    while spent < REFINE_BUDGET && step > 1e-6 {
        let mut improved = false;
        for (dim, sign) in [(0, 1.0), (0, -1.0), (1, 1.0), (1, -1.0)] {
            if spent >= REFINE_BUDGET {
                break;
            }
            let mut trial = k.to_array();
            trial[dim] = (trial[dim] + sign * step).clamp(adm[dim].lo(), adm[dim].hi());
            let trial = TrajParam::clamped(trial[0], trial[1]);
            if trial == k || !mask.is_safe(frs.cell_of(&trial)) {
                continue;
            }
            spent += 1;
            let j = dist2(cruise_end(&trial, frs.limits()), goal);
            if j < cost {
                k = trial;
                cost = j;
                improved = true;
                break;
            }
        }
        if !improved {
            step /= 2.0;
        }
    }
    PlanOutcome {
        k_star: Some(k),
        cost,
        evaluations: evaluations + spent,
        solve_time: start.elapsed(),
    }
}

/// Masks the grid, then optimizes over the safe cells.
pub fn solve(problem: &PlanningProblem) -> PlanOutcome {
    let mask = constraint_setup(problem);
    solve_with_mask(problem, &mask)
}
