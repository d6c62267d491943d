//! Newline-delimited JSON traces.
//!
//! The first line is a header; then each cycle record is followed by the
//! simulation steps it executed. Wall-clock timings are left out so that a
//! replay with the same scenario and seed writes an identical file. Floats
//! are written in shortest round-trip form, so reading a trace and writing it
//! back reproduces it byte for byte.

use std::io::{BufRead, Write};
use std::path::Path;

use rtdrax::repair::{RepairAction, RepairResult};
use rtdrax::Verdict;
use serde::{Deserialize, Serialize};

use crate::sim::{Action, CycleRecord, Outcome, RunResult};

pub const TRACE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum TraceRecord {
    Header(Header),
    Cycle(CycleLine),
    Step(StepLine),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub schema_version: u32,
    pub scenario: String,
    pub mode: String,
    pub seed: u64,
    pub outcome: OutcomeLine,
    pub cycles: usize,
    pub steps: usize,
    pub path_length: f64,
    pub min_clearance: Option<f64>,
    pub initial: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeLine {
    pub kind: String,
    pub cycles: Option<usize>,
    pub time: Option<f64>,
    pub obstacle: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CycleLine {
    pub index: usize,
    pub t: f64,
    pub state: [f64; 4],
    pub k_star: Option<[f64; 2]>,
    pub cost: Option<f64>,
    pub evaluations: usize,
    pub verdict: Option<String>,
    /// `[time index, obstacle index]` of the earliest detected intersection.
    pub first_collision: Option<[usize; 2]>,
    pub tube_len: usize,
    pub repair: Option<RepairLine>,
    pub action: String,
    pub k_executed: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepairLine {
    pub repaired: bool,
    pub attempts: Vec<AttemptLine>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttemptLine {
    pub action: String,
    pub value: f64,
    pub k: Option<[f64; 2]>,
    pub verdict: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepLine {
    pub cycle: usize,
    pub t: f64,
    pub state: [f64; 4],
    pub w: [f64; 2],
}

fn verdict_str(v: Verdict) -> String {
    match v {
        Verdict::Safe => "safe".into(),
        Verdict::Unsafe => "unsafe".into(),
    }
}

fn outcome_line(o: &Outcome) -> OutcomeLine {
    let (cycles, time, obstacle) = match *o {
        Outcome::ReachedGoal { cycles } => (Some(cycles), None, None),
        Outcome::Collided { time, obstacle } => (None, Some(time), Some(obstacle)),
        Outcome::FailsafeStop { cycle } => (Some(cycle), None, None),
        Outcome::MaxCycles => (None, None, None),
    };
    OutcomeLine {
        kind: o.tag().into(),
        cycles,
        time,
        obstacle,
    }
}

fn cycle_line(c: &CycleRecord) -> CycleLine {
    let repair = c.repair.as_ref().map(|r| RepairLine {
        repaired: matches!(r.result, RepairResult::Repaired { .. }),
        attempts: r
            .attempts
            .iter()
            .map(|a| AttemptLine {
                action: a.action.tag().into(),
                value: match a.action {
                    RepairAction::SpeedBackoff { factor } => factor,
                    RepairAction::LateralPush { step, .. } => step,
                    RepairAction::Tighten { buffer } => buffer,
                },
                k: a.k.map(|k| k.to_array()),
                verdict: a.verdict.map(verdict_str),
            })
            .collect(),
    });
    let (action, k_executed) = match c.action {
        Action::Execute { k, repaired: false } => ("execute", Some(k.to_array())),
        Action::Execute { k, repaired: true } => ("execute_repaired", Some(k.to_array())),
        Action::FailSafe => ("failsafe", None),
    };
    CycleLine {
        index: c.index,
        t: c.t,
        state: c.state.to_array(),
        k_star: c.plan.k_star.map(|k| k.to_array()),
        cost: c.plan.k_star.map(|_| c.plan.cost),
        evaluations: c.plan.evaluations,
        verdict: c.certificate.map(|x| verdict_str(x.verdict)),
        first_collision: c
            .certificate
            .and_then(|x| x.first_collision)
            .map(|h| [h.index, h.obstacle]),
        tube_len: c.tube.as_ref().map_or(0, |t| t.len()),
        repair,
        action: action.into(),
        k_executed,
    }
}

/// Trace records of a run in file order.
pub fn records(result: &RunResult, scenario: &str, mode: &str, seed: u64) -> Vec<TraceRecord> {
    let mut out = vec![TraceRecord::Header(Header {
        schema_version: TRACE_SCHEMA_VERSION,
        scenario: scenario.into(),
        mode: mode.into(),
        seed,
        outcome: outcome_line(&result.outcome),
        cycles: result.cycles.len(),
        steps: result.steps.len(),
        path_length: result.path_length,
        min_clearance: result
            .min_clearance
            .is_finite()
            .then_some(result.min_clearance),
        initial: result.initial.to_array(),
    })];
    let mut steps = result.steps.iter().peekable();
    for c in &result.cycles {
        out.push(TraceRecord::Cycle(cycle_line(c)));
        while let Some(s) = steps.next_if(|s| s.cycle == c.index) {
            out.push(TraceRecord::Step(StepLine {
                cycle: s.cycle,
                t: s.t,
                state: s.state.to_array(),
                w: s.w,
            }));
        }
    }
    out
}

pub fn write_records<W: Write>(mut w: W, records: &[TraceRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn read_records<R: BufRead>(r: R) -> anyhow::Result<Vec<TraceRecord>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let rec: TraceRecord = serde_json::from_str(&line)
            .map_err(|e| anyhow::anyhow!("trace line {}: {e}", i + 1))?;
        out.push(rec);
    }
    match out.first() {
        Some(TraceRecord::Header(h)) if h.schema_version == TRACE_SCHEMA_VERSION => Ok(out),
        Some(TraceRecord::Header(h)) => {
            anyhow::bail!("unsupported trace schema {}", h.schema_version)
        }
        _ => anyhow::bail!("trace does not start with a header"),
    }
}

pub fn emit_trace(
    result: &RunResult,
    scenario: &str,
    mode: &str,
    seed: u64,
    path: &Path,
) -> std::io::Result<()> {
    let f = std::fs::File::create(path)?;
    write_records(
        std::io::BufWriter::new(f),
        &records(result, scenario, mode, seed),
    )
}
