use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rtdrax::frs::{build_frs, FrsParams};
use rtdrax::{FrsTable, TrajParam};
use rtdrax_harness::sim::verify_candidate;
use rtdrax_harness::{bench, emit_plot, emit_trace, run, Mode, Pipeline, Scenario};

const EXIT_CONFIG: u8 = 4;

#[derive(Parser)]
#[command(
    name = "rtdrax",
    version,
    about = "Reachability-based planning with runtime verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Forward reachable set tables.
    Frs {
        #[command(subcommand)]
        command: FrsCommand,
    },
    /// Simulate a scenario.
    Run {
        /// Scenario file, or the name of a bundled scenario.
        scenario: String,
        #[arg(long)]
        mode: Option<Mode>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        plot: Option<PathBuf>,
        /// Load (or create) the non-inflated FRS table here.
        #[arg(long)]
        frs_cache: Option<PathBuf>,
    },
    /// Time the pipeline stages over several seeded runs.
    Bench {
        scenario: String,
        #[arg(long)]
        mode: Option<Mode>,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        /// CSV output; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        frs_cache: Option<PathBuf>,
    },
    /// Certify a single parameter from the scenario's start state.
    VerifyOnly {
        scenario: String,
        /// Trajectory parameter as `K1,K2`.
        #[arg(long, value_parser = parse_k, allow_hyphen_values = true)]
        k: TrajParam,
        #[arg(long)]
        frs_cache: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum FrsCommand {
    /// Build the non-inflated table and write it to a cache file.
    Build {
        /// Take limits and resolution from this scenario (defaults otherwise).
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        n_k: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        robot_radius: Option<f64>,
        #[arg(long, default_value = "frs.bin")]
        out: PathBuf,
    },
}

fn parse_k(s: &str) -> Result<TrajParam, String> {
    let parts: Vec<&str> = s.split(',').collect();
    let [a, b] = parts.as_slice() else {
        return Err("expected K1,K2".into());
    };
    let k1: f64 = a.trim().parse().map_err(|e| format!("k1: {e}"))?;
    let k2: f64 = b.trim().parse().map_err(|e| format!("k2: {e}"))?;
    TrajParam::new(k1, k2).map_err(|e| e.to_string())
}

fn load_scenario(arg: &str) -> Result<Scenario> {
    if let Some(s) = Scenario::builtin(arg) {
        if !Path::new(arg).exists() {
            return Ok(s);
        }
    }
    Scenario::load(Path::new(arg)).with_context(|| format!("loading scenario {arg}"))
}

fn pipeline(s: &Scenario, cache: Option<&Path>) -> Result<Pipeline> {
    let plain = match cache {
        Some(path) => FrsTable::load_or_build(path, &s.frs)?,
        None => build_frs(&s.frs)?,
    };
    Ok(Pipeline::from_plain(s, plain)?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn dispatch(command: Command) -> Result<u8> {
    match command {
        Command::Frs {
            command:
                FrsCommand::Build {
                    scenario,
                    n_k,
                    dt,
                    robot_radius,
                    out,
                },
        } => {
            let mut params = match scenario {
                Some(s) => load_scenario(&s)?.frs,
                None => FrsParams::default(),
            };
            params.n_k = n_k.unwrap_or(params.n_k);
            params.dt = dt.unwrap_or(params.dt);
            params.robot_radius = robot_radius.unwrap_or(params.robot_radius);
            let table = build_frs(&params)?;
            table.save(&out)?;
            println!(
                "wrote {} ({} cells x {} times)",
                out.display(),
                table.n_cells(),
                table.times().len()
            );
            Ok(0)
        }
        Command::Run {
            scenario,
            mode,
            seed,
            trace,
            plot,
            frs_cache,
        } => {
            let mut s = load_scenario(&scenario)?;
            if let Some(m) = mode {
                s = s.with_mode(m);
            }
            if let Some(seed) = seed {
                s = s.with_seed(seed);
            }
            let p = pipeline(&s, frs_cache.as_deref())?;
            let result = run(&s, &p);
            if let Some(path) = trace {
                emit_trace(&result, &s.name, s.mode.as_str(), s.seed, &path)
                    .with_context(|| format!("writing trace {}", path.display()))?;
            }
            if let Some(path) = plot {
                emit_plot(&s, &result, &path)
                    .with_context(|| format!("writing plot {}", path.display()))?;
            }
            println!(
                "{}: {} after {} cycles, path length {:.3} m, min clearance {:.3} m",
                s.name,
                result.outcome.tag(),
                result.cycles.len(),
                result.path_length,
                result.min_clearance
            );
            Ok(result.outcome.exit_code() as u8)
        }
        Command::Bench {
            scenario,
            mode,
            trials,
            out,
            frs_cache,
        } => {
            if trials == 0 {
                bail!("--trials must be at least 1");
            }
            let mut s = load_scenario(&scenario)?;
            if let Some(m) = mode {
                s = s.with_mode(m);
            }
            let p = pipeline(&s, frs_cache.as_deref())?;
            let table = bench(&s, &p, trials);
            match out {
                Some(path) => {
                    table.write_csv(&path)?;
                    println!("wrote {}", path.display());
                }
                None => print!("{}", table.to_csv()),
            }
            Ok(0)
        }
        Command::VerifyOnly {
            scenario,
            k,
            frs_cache,
        } => {
            let s = load_scenario(&scenario)?;
            let p = pipeline(&s, frs_cache.as_deref())?;
            let v = verify_candidate(&s, &p.plain, &s.start, &k)?;
            match v.certificate.first_collision {
                None => {
                    println!("safe (tube of {} samples)", v.tube.len());
                    Ok(0)
                }
                Some(hit) => {
                    println!(
                        "unsafe: obstacle {} at t = {:.3} s (index {}{})",
                        hit.obstacle,
                        hit.time,
                        hit.index,
                        if hit.swept { ", swept hull" } else { "" }
                    );
                    Ok(2)
                }
            }
        }
    }
}
