//! Receding-horizon closed-loop simulation of either pipeline.

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rtdrax::dynamics::{hifi_step, param_to_commands, plan_rollout, DisturbanceField};
use rtdrax::frs::{build_frs, estimate_tracking_error, inflate_frs, FrsError};
use rtdrax::planner::{constraint_setup, solve_with_mask};
use rtdrax::repair::{repair, RepairContext, RepairResult};
use rtdrax::verifier::{certify, DisturbanceBounds, TubePropagator, VerifierError};
use rtdrax::{
    Box2, Certificate, CommandProfile, FrsTable, PlanOutcome, PlanState, PlanningProblem,
    ReachTube, RepairOutcome, TrackingErrorBound, TrajParam, UnicycleState,
};

use crate::measure::{all_bounds, mean_disturbance, measure_disturbance, widen_bound};
use crate::scenario::{Mode, Scenario};

/// Widening rounds per tube sample before its bound jumps to the hull of
/// every patch.
const MAX_WIDEN_ROUNDS: usize = 8;

/// Offline artifacts shared by every run with the same FRS and tracking settings.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub plain: FrsTable,
    pub inflated: FrsTable,
    pub tracking: TrackingErrorBound,
}

impl Pipeline {
    pub fn build(s: &Scenario) -> Result<Self, FrsError> {
        Self::from_plain(s, build_frs(&s.frs)?)
    }

    /// Reuses a non-inflated table (for example one loaded from a cache file).
    pub fn from_plain(s: &Scenario, plain: FrsTable) -> Result<Self, FrsError> {
        let t = &s.tracking;
        let tracking = estimate_tracking_error(&s.limits, t.samples, t.v0_range, t.seed, s.frs.dt);
        let inflated = inflate_frs(&plain, &tracking)?;
        Ok(Self {
            plain,
            inflated,
            tracking,
        })
    }

    pub fn table_for(&self, mode: Mode) -> &FrsTable {
        match mode {
            Mode::Standard => &self.inflated,
            Mode::Rax => &self.plain,
        }
    }
}

/// Wall-clock time per pipeline stage of one cycle.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Timings {
    pub constraint_setup: Duration,
    pub rtd_solve: Duration,
    pub reference_rollout: Duration,
    pub verify: Duration,
    pub repair_loop: Duration,
    pub total: Duration,
}

impl Timings {
    pub const STAGES: [&'static str; 6] = [
        "constraint setup",
        "RTD solve",
        "reference rollout",
        "verify",
        "repair loop",
        "total cycle",
    ];

    pub fn as_array(&self) -> [Duration; 6] {
        [
            self.constraint_setup,
            self.rtd_solve,
            self.reference_rollout,
            self.verify,
            self.repair_loop,
            self.total,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Action {
    Execute { k: TrajParam, repaired: bool },
    FailSafe,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleRecord {
    pub index: usize,
    pub t: f64,
    pub state: UnicycleState,
    pub plan: PlanOutcome,
    /// Certificate of the planner's candidate (rax mode only).
    pub certificate: Option<Certificate>,
    /// Tube of the executed candidate, or of the rejected one when the
    /// fail-safe was taken.
    pub tube: Option<ReachTube>,
    pub repair: Option<RepairOutcome>,
    pub timings: Timings,
    pub action: Action,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub cycle: usize,
    pub t: f64,
    pub state: UnicycleState,
    pub w: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    ReachedGoal { cycles: usize },
    Collided { time: f64, obstacle: usize },
    FailsafeStop { cycle: usize },
    MaxCycles,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        match self {
            Outcome::ReachedGoal { .. } => 0,
            Outcome::Collided { .. } => 2,
            Outcome::FailsafeStop { .. } => 3,
            Outcome::MaxCycles => 1,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Outcome::ReachedGoal { .. } => "reached_goal",
            Outcome::Collided { .. } => "collided",
            Outcome::FailsafeStop { .. } => "failsafe_stop",
            Outcome::MaxCycles => "max_cycles",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub outcome: Outcome,
    pub initial: UnicycleState,
    pub steps: Vec<StepRecord>,
    pub cycles: Vec<CycleRecord>,
    pub path_length: f64,
    /// Smallest distance between the robot disk and any obstacle (negative on
    /// overlap); infinite without obstacles.
    pub min_clearance: f64,
}

impl RunResult {
    /// `(t, state)` from the initial state through every simulation step.
    pub fn trajectory(&self) -> Vec<(f64, UnicycleState)> {
        std::iter::once((0.0, self.initial))
            .chain(self.steps.iter().map(|s| (s.t, s.state)))
            .collect()
    }
}

/// Per-cycle verification of one candidate from the current state.
pub struct Verification {
    pub tube: ReachTube,
    pub certificate: Certificate,
    pub bounds: Vec<Box2>,
}

/// Measures disturbance bounds for `k`, propagates the tube and grows the
/// bounds until they cover every patch the tube touches, then certifies.
pub fn verify_candidate(
    s: &Scenario,
    frs: &FrsTable,
    state: &UnicycleState,
    k: &TrajParam,
) -> Result<Verification, VerifierError> {
    let profile = param_to_commands(*k, &s.limits);
    let bounds = measure_disturbance(&profile, &state.pose(), &s.patches, frs, s.dt_verify);
    verify_with_bounds(s, state, &profile, bounds)
}

fn verify_with_bounds(
    s: &Scenario,
    state: &UnicycleState,
    profile: &CommandProfile,
    bounds: Vec<Box2>,
) -> Result<Verification, VerifierError> {
    let aabbs: Vec<Box2> = s.patches.iter().map(|p| p.region.aabb()).collect();
    let everything = all_bounds(&s.patches);
    let mut cfg = s.verifier.clone();
    cfg.w_bounds = DisturbanceBounds::PerIndex(bounds);
    let mut prop = TubePropagator::new(state, cfg, profile, s.dt_verify)?;
    // Rounds spent on the current sample.
    let mut rounds = (0, 0);
    prop.advance_revising(&s.obstacles, |j, bound, swept| {
        rounds = if rounds.0 == j {
            (j, rounds.1 + 1)
        } else {
            (j, 1)
        };
        let grown = widen_bound(bound, swept, &s.patches, &aabbs, &everything)?;
        if rounds.1 >= MAX_WIDEN_ROUNDS {
            // Still growing: jump to the largest bound any patch allows.
            return Some(grown.hull(&everything));
        }
        Some(grown)
    })?;
    let tube = prop.tube();
    let certificate = certify(&tube, &s.obstacles);
    let bounds = match prop.bounds() {
        DisturbanceBounds::PerIndex(v) => v.clone(),
        DisturbanceBounds::Constant(b) => vec![*b; tube.len()],
    };
    Ok(Verification {
        tube,
        certificate,
        bounds,
    })
}

/// Distance from the robot disk at `p` to the nearest obstacle and its index.
fn clearance(s: &Scenario, p: [f64; 2]) -> (f64, Option<usize>) {
    let r = s.robot_radius();
    s.obstacles
        .iter()
        .enumerate()
        .map(|(i, o)| (o.distance_to_point(p) - r, Some(i)))
        .fold((f64::INFINITY, None), |a, b| if b.0 < a.0 { b } else { a })
}

fn first_hit(s: &Scenario, p: [f64; 2]) -> Option<usize> {
    let r = s.robot_radius();
    s.obstacles.iter().position(|o| o.distance_to_point(p) <= r)
}

fn in_goal(s: &Scenario, p: [f64; 2]) -> bool {
    (p[0] - s.goal[0]).hypot(p[1] - s.goal[1]) <= s.goal_radius
}

struct Sim<'a> {
    s: &'a Scenario,
    field: DisturbanceField<f64>,
    rng: ChaCha8Rng,
    state: UnicycleState,
    t: f64,
    steps: Vec<StepRecord>,
    path_length: f64,
    min_clearance: f64,
}

enum StepEvent {
    None,
    Goal,
    Collision(usize),
}

impl Sim<'_> {
    /// Simulates `profile` over `[from, to]` of its own time axis.
    fn execute(&mut self, cycle: usize, profile: &CommandProfile, from: f64, to: f64) -> StepEvent {
        let dt = self.s.dt_verify;
        let n = ((to - from) / dt).round() as usize;
        for i in 0..n {
            let tau = from + i as f64 * dt;
            let (next, w) = hifi_step(&self.state, tau, dt, profile, &self.field, &mut self.rng);
            let (p0, p1) = (self.state.position(), next.position());
            self.path_length += (p1[0] - p0[0]).hypot(p1[1] - p0[1]);
            self.state = next;
            self.t = self.s.dt_verify * (self.steps.len() + 1) as f64;
            self.steps.push(StepRecord {
                cycle,
                t: self.t,
                state: next,
                w,
            });
            self.min_clearance = self.min_clearance.min(clearance(self.s, p1).0);
            if let Some(i) = first_hit(self.s, p1) {
                return StepEvent::Collision(i);
            }
            if in_goal(self.s, p1) {
                return StepEvent::Goal;
            }
        }
        StepEvent::None
    }
}

/// Runs a scenario in its configured mode.
pub fn run(s: &Scenario, pipeline: &Pipeline) -> RunResult {
    let frs = pipeline.table_for(s.mode);
    let mut sim = Sim {
        s,
        field: DisturbanceField::new(s.patches.clone(), s.realization),
        rng: ChaCha8Rng::seed_from_u64(s.seed),
        state: s.start,
        t: 0.0,
        steps: Vec::new(),
        path_length: 0.0,
        min_clearance: clearance(s, s.start.position()).0,
    };
    let mut cycles: Vec<CycleRecord> = Vec::new();
    // Last executed profile and how far into it the robot is.
    let mut committed: Option<(CommandProfile, f64)> = None;

    let finish = |sim: Sim, cycles: Vec<CycleRecord>, outcome: Outcome| RunResult {
        outcome,
        initial: s.start,
        steps: sim.steps,
        cycles,
        path_length: sim.path_length,
        min_clearance: sim.min_clearance,
    };

    if let Some(i) = first_hit(s, s.start.position()) {
        return finish(
            sim,
            cycles,
            Outcome::Collided {
                time: 0.0,
                obstacle: i,
            },
        );
    }
    if in_goal(s, s.start.position()) {
        return finish(sim, cycles, Outcome::ReachedGoal { cycles: 0 });
    }

    for index in 0..s.max_cycles {
        let cycle_start = Instant::now();
        let mut timings = Timings::default();
        let state = sim.state;
        let pose: PlanState = state.pose();
        let problem = PlanningProblem::new(pose, s.goal, &s.obstacles, frs);

        let t0 = Instant::now();
        let mask = constraint_setup(&problem);
        timings.constraint_setup = t0.elapsed();

        let t0 = Instant::now();
        let plan = solve_with_mask(&problem, &mask);
        timings.rtd_solve = t0.elapsed();

        let mut certificate = None;
        let mut tube = None;
        let mut repair_outcome = None;
        let action = match plan.k_star {
            None => Action::FailSafe,
            Some(k) => {
                let t0 = Instant::now();
                let profile = param_to_commands(k, &s.limits);
                let times: Vec<f64> = (0..=(profile.horizon() / s.dt_verify).round() as usize)
                    .map(|j| (j as f64 * s.dt_verify).min(profile.horizon()))
                    .collect();
                let reference = plan_rollout(&pose, &profile, &times).expect("grid inside horizon");
                std::hint::black_box(&reference);
                timings.reference_rollout = t0.elapsed();

                match s.mode {
                    Mode::Standard => Action::Execute { k, repaired: false },
                    Mode::Rax => {
                        let t0 = Instant::now();
                        let bounds = measure_disturbance(
                            &profile,
                            &pose,
                            &s.patches,
                            &pipeline.plain,
                            s.dt_verify,
                        );
                        let verified = verify_with_bounds(s, &state, &profile, bounds);
                        timings.verify = t0.elapsed();
                        match verified {
                            Ok(v) if v.certificate.is_safe() => {
                                certificate = Some(v.certificate);
                                tube = Some(v.tube);
                                Action::Execute { k, repaired: false }
                            }
                            verified => {
                                let (cert, w_estimate) = match verified {
                                    Ok(v) => {
                                        let est = mean_disturbance(&v.bounds);
                                        let c = v.certificate;
                                        certificate = Some(c);
                                        tube = Some(v.tube);
                                        (c, est)
                                    }
                                    // A propagation failure counts as a rejection.
                                    Err(_) => (
                                        Certificate {
                                            verdict: rtdrax::Verdict::Unsafe,
                                            first_collision: None,
                                        },
                                        [0.0, 0.0],
                                    ),
                                };
                                let t0 = Instant::now();
                                let ctx = RepairContext {
                                    problem: problem.clone(),
                                    cfg: &s.repair,
                                    w_estimate,
                                    verify: |k: &TrajParam| {
                                        verify_candidate(s, &pipeline.plain, &state, k)
                                            .map(|v| (v.tube, v.certificate))
                                    },
                                };
                                let outcome = repair(&k, &cert, ctx);
                                timings.repair_loop = t0.elapsed();
                                let action = match &outcome.result {
                                    RepairResult::Repaired { k, tube: t, .. } => {
                                        tube = Some(t.clone());
                                        Action::Execute {
                                            k: *k,
                                            repaired: true,
                                        }
                                    }
                                    RepairResult::Exhausted { .. } => Action::FailSafe,
                                };
                                repair_outcome = Some(outcome);
                                action
                            }
                        }
                    }
                }
            }
        };
        timings.total = cycle_start.elapsed();
        cycles.push(CycleRecord {
            index,
            t: sim.t,
            state,
            plan,
            certificate,
            tube,
            repair: repair_outcome,
            timings,
            action,
        });

        let event = match action {
            Action::Execute { k, .. } => {
                let profile = param_to_commands(k, &s.limits);
                committed = Some((profile, s.replan_period));
                sim.execute(index, &profile, 0.0, s.replan_period)
            }
            Action::FailSafe => {
                let (profile, from) = committed
                    .take()
                    .unwrap_or_else(|| (CommandProfile::braking(state.v, &s.limits), 0.0));
                let event = sim.execute(index, &profile, from, profile.horizon());
                match event {
                    StepEvent::None => {
                        return finish(sim, cycles, Outcome::FailsafeStop { cycle: index })
                    }
                    e => e,
                }
            }
        };
        match event {
            StepEvent::Collision(obstacle) => {
                let time = sim.t;
                return finish(sim, cycles, Outcome::Collided { time, obstacle });
            }
            StepEvent::Goal => {
                let n = cycles.len();
                return finish(sim, cycles, Outcome::ReachedGoal { cycles: n });
            }
            StepEvent::None => {}
        }
    }
    finish(sim, cycles, Outcome::MaxCycles)
}
