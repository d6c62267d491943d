//! Repair ladder for candidates the verifier rejects: speed backoff, then
//! lateral pushes against the disturbance, then re-solving with tightened
//! obstacle buffers. The first certified candidate in ladder order wins.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::dynamics::{PlanState, TrajParam};
use crate::planner::{solve, PlanningProblem};
use crate::verifier::{Certificate, ReachTube, Verdict, VerifierError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RepairConfigError {
    #[error("{0} must be nonempty")]
    Empty(&'static str),
    #[error("backoff factors must lie in (0, 1) and decrease")]
    BadBackoff,
    #[error("push steps must be positive and increase")]
    BadPush,
    #[error("buffers must be positive and increase")]
    BadBuffer,
    #[error("time budget must be positive")]
    BadBudget,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepairConfig {
    pub speed_backoff_factors: Vec<f64>,
    /// `Δk1` magnitudes.
    pub lateral_push_steps: Vec<f64>,
    /// Obstacle buffers in meters.
    pub tighten_buffers: Vec<f64>,
    pub time_budget: Duration,
}

impl Default for RepairConfig {
    fn default() -> Self {
        Self {
            speed_backoff_factors: vec![0.8, 0.6, 0.4],
            lateral_push_steps: vec![0.1, 0.2, 0.3],
            tighten_buffers: vec![0.05, 0.10, 0.20],
            time_budget: Duration::from_millis(20),
        }
    }
}

fn strictly_monotone(v: &[f64], increasing: bool) -> bool {
    v.windows(2)
        .all(|w| if increasing { w[0] < w[1] } else { w[0] > w[1] })
}

impl RepairConfig {
    pub fn validate(&self) -> Result<(), RepairConfigError> {
        if self.speed_backoff_factors.is_empty() {
            return Err(RepairConfigError::Empty("speed_backoff_factors"));
        }
        if self.lateral_push_steps.is_empty() {
            return Err(RepairConfigError::Empty("lateral_push_steps"));
        }
        if self.tighten_buffers.is_empty() {
            return Err(RepairConfigError::Empty("tighten_buffers"));
        }
        let f = &self.speed_backoff_factors;
        if !f.iter().all(|x| *x > 0.0 && *x < 1.0) || !strictly_monotone(f, false) {
            return Err(RepairConfigError::BadBackoff);
        }
        let p = &self.lateral_push_steps;
        if !p.iter().all(|x| *x > 0.0 && x.is_finite()) || !strictly_monotone(p, true) {
            return Err(RepairConfigError::BadPush);
        }
        let b = &self.tighten_buffers;
        if !b.iter().all(|x| *x > 0.0 && x.is_finite()) || !strictly_monotone(b, true) {
            return Err(RepairConfigError::BadBuffer);
        }
        if self.time_budget.is_zero() {
            return Err(RepairConfigError::BadBudget);
        }
        Ok(())
    }

    /// Most verifications a full ladder can request.
    pub fn max_attempts(&self) -> usize {
        let b = self.speed_backoff_factors.len();
        b + (b + 1) * self.lateral_push_steps.len() + self.tighten_buffers.len()
    }
}

/// Scales the cruise speed by `factor`: `k2' = factor·(k2 + 1) − 1`. Zero
/// speed is a fixed point and `k1` is untouched.
pub fn speed_backoff(k: &TrajParam<f64>, factor: f64) -> TrajParam<f64> {
    TrajParam::clamped(k.k1(), factor * (k.k2() + 1.0) - 1.0)
}

/// Lateral component of `w` in the body frame of `pose` (positive = left).
pub fn lateral_component(w: [f64; 2], pose: &PlanState<f64>) -> f64 {
    let (s, c) = pose.h.sin_cos();
    -s * w[0] + c * w[1]
}

/// Shifts the yaw-rate parameter against the lateral disturbance:
/// `k1' = k1 − sign(w_lat)·step`. No lateral component, no change.
pub fn lateral_push(
    k: &TrajParam<f64>,
    w_estimate: [f64; 2],
    pose: &PlanState<f64>,
    step: f64,
) -> TrajParam<f64> {
    let lat = lateral_component(w_estimate, pose);
    if lat == 0.0 {
        return *k;
    }
    TrajParam::clamped(k.k1() - lat.signum() * step, k.k2())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RepairAction {
    SpeedBackoff {
        factor: f64,
    },
    /// Push applied on top of a backoff level (`None` = the rejected candidate).
    LateralPush {
        backoff: Option<f64>,
        step: f64,
    },
    Tighten {
        buffer: f64,
    },
}

impl RepairAction {
    pub fn tag(&self) -> &'static str {
        match self {
            Self::SpeedBackoff { .. } => "backoff",
            Self::LateralPush { .. } => "push",
            Self::Tighten { .. } => "tighten",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Attempt {
    pub action: RepairAction,
    /// `None` when a tightened re-solve was infeasible.
    pub k: Option<TrajParam<f64>>,
    /// `None` when nothing was verified (infeasible re-solve or verifier error).
    pub verdict: Option<Verdict>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RepairResult {
    Repaired {
        k: TrajParam<f64>,
        certificate: Certificate<f64>,
        tube: ReachTube<f64>,
    },
    Exhausted {
        budget_exceeded: bool,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepairOutcome {
    pub result: RepairResult,
    pub attempts: Vec<Attempt>,
    pub elapsed: Duration,
}

impl RepairOutcome {
    pub fn is_repaired(&self) -> bool {
        matches!(self.result, RepairResult::Repaired { .. })
    }
}

/// Inputs shared by all ladder rungs. `problem` is the planning problem that
/// produced the rejected candidate (non-inflated FRS); `verify` certifies a
/// parameter from the current state.
pub struct RepairContext<'a, V> {
    pub problem: PlanningProblem<'a>,
    pub cfg: &'a RepairConfig,
    pub w_estimate: [f64; 2],
    pub verify: V,
}

/// Walks the ladder until a candidate certifies safe, the ladder is
/// exhausted, or the time budget runs out. Candidates identical to one
/// already tried (including the rejected one) are skipped.
pub fn repair<V>(
    k_rejected: &TrajParam<f64>,
    cert: &Certificate<f64>,
    mut ctx: RepairContext<'_, V>,
) -> RepairOutcome
where
    V: FnMut(&TrajParam<f64>) -> Result<(ReachTube<f64>, Certificate<f64>), VerifierError>,
{
    debug_assert_eq!(cert.verdict, Verdict::Unsafe);
    let start = Instant::now();
    let cfg = ctx.cfg;
    let pose = ctx.problem.pose;
    let mut attempts = Vec::new();
    let mut tried: HashSet<[u64; 2]> = HashSet::new();
    let key = |k: &TrajParam<f64>| [k.k1().to_bits(), k.k2().to_bits()];
    tried.insert(key(k_rejected));

    let backoffs: Vec<(Option<f64>, TrajParam<f64>)> = std::iter::once((None, *k_rejected))
        .chain(
            cfg.speed_backoff_factors
                .iter()
                .map(|&f| (Some(f), speed_backoff(k_rejected, f))),
        )
        .collect();

    // Candidates of the first two rungs are known up front; tightening needs a
    // re-solve per buffer and is generated lazily.
    let mut plan: Vec<(RepairAction, TrajParam<f64>)> = backoffs
        .iter()
        .filter_map(|&(f, k)| f.map(|factor| (RepairAction::SpeedBackoff { factor }, k)))
        .collect();
    for &(backoff, base) in &backoffs {
        for &step in &cfg.lateral_push_steps {
            let k = lateral_push(&base, ctx.w_estimate, &pose, step);
            plan.push((RepairAction::LateralPush { backoff, step }, k));
        }
    }

    let mut budget_exceeded = false;
    let mut try_candidate = |action: RepairAction,
                             k: TrajParam<f64>,
                             attempts: &mut Vec<Attempt>|
     -> Option<RepairResult> {
        if !tried.insert(key(&k)) {
            return None;
        }
        match (ctx.verify)(&k) {
            Ok((tube, certificate)) => {
                attempts.push(Attempt {
                    action,
                    k: Some(k),
                    verdict: Some(certificate.verdict),
                });
                certificate.is_safe().then_some(RepairResult::Repaired {
                    k,
                    certificate,
                    tube,
                })
            }
            Err(_) => {
                attempts.push(Attempt {
                    action,
                    k: Some(k),
                    verdict: None,
                });
                None
            }
        }
    };

    for (action, k) in plan {
        if start.elapsed() >= cfg.time_budget {
            budget_exceeded = true;
            break;
        }
        if let Some(result) = try_candidate(action, k, &mut attempts) {
            return RepairOutcome {
                result,
                attempts,
                elapsed: start.elapsed(),
            };
        }
    }
    if !budget_exceeded {
        for &buffer in &cfg.tighten_buffers {
            if start.elapsed() >= cfg.time_budget {
                budget_exceeded = true;
                break;
            }
            let action = RepairAction::Tighten { buffer };
            let problem = ctx.problem.clone().with_buffer(ctx.problem.buffer + buffer);
            match solve(&problem).k_star {
                None => attempts.push(Attempt {
                    action,
                    k: None,
                    verdict: None,
                }),
                Some(k) => {
                    if let Some(result) = try_candidate(action, k, &mut attempts) {
                        return RepairOutcome {
                            result,
                            attempts,
                            elapsed: start.elapsed(),
                        };
                    }
                }
            }
        }
    }
    RepairOutcome {
        result: RepairResult::Exhausted { budget_exceeded },
        attempts,
        elapsed: start.elapsed(),
    }
}
