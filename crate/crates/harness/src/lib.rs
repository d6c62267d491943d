//! Receding-horizon simulation harness: scenario files, the closed-loop run
//! of standard and verified pipelines, disturbance measurement, timing,
//! traces and plots.

pub mod bench;
pub mod measure;
pub mod plot;
pub mod scenario;
pub mod sim;
pub mod trace;

pub use bench::{bench, BenchTable};
pub use measure::measure_disturbance;
pub use plot::{emit_plot, render_svg};
pub use scenario::{Mode, Scenario, ScenarioError};
pub use sim::{run, Outcome, Pipeline, RunResult};
pub use trace::emit_trace;
