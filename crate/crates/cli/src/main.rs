#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use cochain::exec::{simulate, Disturbance};
use cochain::io::{self, AssignmentFile, CheckFile, CoverageFile, TraceFile};
use cochain::plan::{trajectory_check, Event, MultiRobotPlan, PlanOptions, Planner};
use cochain::scenarios::{self, Problem};

/// Plans and replays cooperative carrying tasks for mobile manipulators.
#[derive(Parser)]
#[command(name = "cochain", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Tuning {
    /// Overlap between a stalled and a replanned segment (trajectory-parameter units).
    #[arg(long, global = true)]
    xi: Option<f64>,
    /// Number of trajectory samples.
    #[arg(long, global = true)]
    resolution: Option<usize>,
    /// Seed for every random choice.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Collision margin in meters; overrides the scene file.
    #[arg(long, global = true)]
    margin: Option<f64>,
    /// Assignments tried before giving up.
    #[arg(long, global = true)]
    max_alternatives: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Coverage report for a scene, or a full check of a plan against it.
    Check {
        scene: PathBuf,
        /// Check this plan instead of reporting coverage.
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        tuning: Tuning,
    },
    /// Best grasp assignment.
    Assign {
        scene: PathBuf,
        /// Reuse a coverage report written by `check`.
        #[arg(long)]
        coverage: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        tuning: Tuning,
    },
    /// Full plan.
    Plan {
        scene: PathBuf,
        /// Plan this assignment only, as written by `assign`.
        #[arg(long)]
        assignment: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        tuning: Tuning,
    },
    /// Replays a plan with a disturbed leader.
    Simulate {
        scene: PathBuf,
        plan: PathBuf,
        /// Leader platform noise half-width (m).
        #[arg(long, default_value_t = 0.0)]
        sigma_p: f64,
        /// Leader joint and heading noise half-width (rad).
        #[arg(long, default_value_t = 0.0)]
        sigma_m: f64,
        /// Trace JSON.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Also write the trace as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        tuning: Tuning,
    },
    /// Re-emits a plan or trace file as JSON or CSV.
    Export {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Runs scenario files (or bundled scenarios by name) against their
    /// expected outcomes.
    Scenario {
        /// Scene files or bundled names; all bundled scenarios if empty.
        targets: Vec<String>,
        /// Write each scenario's plan here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Write the bundled scenarios as scene files into this directory and exit.
        #[arg(long)]
        emit: Option<PathBuf>,
        #[command(flatten)]
        tuning: Tuning,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

/// Planning failed for a reason other than bad input.
#[derive(Debug)]
struct Infeasible(String);

impl std::fmt::Display for Infeasible {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Infeasible {}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let infeasible = e.downcast_ref::<Infeasible>().is_some()
                || e.downcast_ref::<cochain::Error>().is_some_and(cochain::Error::is_infeasibility);
            ExitCode::from(if infeasible { 2 } else { 1 })
        }
    }
}

fn load_problem(path: &Path, tuning: &Tuning) -> anyhow::Result<Problem> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut p = io::parse_problem(&text).map_err(|e| anyhow!(e).context(format!("in {}", path.display())))?;
    if let Some(m) = tuning.margin {
        if !(m >= 0.0) {
            bail!("--margin must be nonnegative");
        }
        p.scene.margin = m;
    }
    Ok(p)
}

fn options(t: &Tuning) -> anyhow::Result<PlanOptions> {
    let mut o = PlanOptions::default();
    if let Some(xi) = t.xi {
        if !(xi > 0.0 && xi <= 1.0) {
            bail!("--xi must lie in (0, 1]");
        }
        o.xi = xi;
    }
    if let Some(n) = t.resolution {
        if n < 2 {
            bail!("--resolution must be at least 2");
        }
        o.coverage.resolution = n;
    }
    if let Some(s) = t.seed {
        o.coverage.seed = s;
    }
    if let Some(k) = t.max_alternatives {
        o.max_alternatives = k;
    }
    Ok(o)
}

fn emit(output: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match output {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => match std::io::stdout().write_all(text.as_bytes()) {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
            _ => Ok(()),
        },
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn in_file<T>(path: &Path, r: cochain::Result<T>) -> anyhow::Result<T> {
    r.map_err(|e| anyhow!(e).context(format!("in {}", path.display())))
}

fn run(cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::Check {
            scene,
            plan,
            output,
            tuning,
        } => {
            let p = load_problem(&scene, &tuning)?;
            let opts = options(&tuning)?;
            if let Some(plan_path) = plan {
                let plan = in_file(&plan_path, io::parse_plan(&read(&plan_path)?))?;
                let report = trajectory_check(&p.scene, &p.trajectory, &p.grasps, &plan, &opts);
                emit(output.as_deref(), &io::to_json(&CheckFile::from_report(&report))?)?;
                if !report.pass {
                    let v = &report.violations[0];
                    return Err(Infeasible(format!(
                        "plan check failed: {} violation(s), first at step {} robot {} ({:?}: {})",
                        report.violations.len(),
                        v.step,
                        v.robot,
                        v.kind,
                        v.detail
                    ))
                    .into());
                }
                return Ok(());
            }
            let planner = Planner::new(&p.scene, &p.trajectory, &p.grasps, opts);
            let cov = planner.coverage()?;
            emit(output.as_deref(), &io::to_json(&CoverageFile::from_coverage(&cov))?)?;
            if let Some((robot, gaps)) = cov.first_gap() {
                return Err(cochain::Error::NotCoverable { robot, gaps }.into());
            }
            Ok(())
        }
        Command::Assign {
            scene,
            coverage,
            output,
            tuning,
        } => {
            let p = load_problem(&scene, &tuning)?;
            let opts = options(&tuning)?;
            let cov = match coverage {
                Some(path) => in_file(&path, io::from_json::<CoverageFile>(&read(&path)?).and_then(CoverageFile::into_coverage))?,
                None => Planner::new(&p.scene, &p.trajectory, &p.grasps, opts).coverage()?,
            };
            if let Some((robot, gaps)) = cov.first_gap() {
                return Err(cochain::Error::NotCoverable { robot, gaps }.into());
            }
            let sets: Vec<_> = cov.robots.iter().map(|r| r.per_grasp.as_slice()).collect();
            let a = cochain::assign::allocate(&sets, p.scene.leader, cov.resolution)?;
            emit(output.as_deref(), &io::to_json(&AssignmentFile::from_assignment(&a))?)
        }
        Command::Plan {
            scene,
            assignment,
            output,
            tuning,
        } => {
            let p = load_problem(&scene, &tuning)?;
            let opts = options(&tuning)?;
            let planner = Planner::new(&p.scene, &p.trajectory, &p.grasps, opts);
            let plan = match assignment {
                Some(path) => {
                    let a = in_file(&path, io::from_json::<AssignmentFile>(&read(&path)?).and_then(AssignmentFile::into_assignment))?;
                    let plan = planner.plan_assignment(&a)?;
                    let report = trajectory_check(&p.scene, &p.trajectory, &p.grasps, &plan, &opts);
                    if !report.pass {
                        let v = &report.violations[0];
                        return Err(Infeasible(format!(
                            "plan for the given assignment fails its check at step {} robot {} ({:?}: {})",
                            v.step, v.robot, v.kind, v.detail
                        ))
                        .into());
                    }
                    plan
                }
                None => planner.global_plan()?,
            };
            eprintln!(
                "{} regrasp(s), assignment rank {}, {} steps",
                plan.regrasp_count(),
                plan.diagnostics.assignment_rank,
                plan.steps()
            );
            emit(output.as_deref(), &io::plan_json(&plan)?)
        }
        Command::Simulate {
            scene,
            plan,
            sigma_p,
            sigma_m,
            output,
            csv,
            tuning,
        } => {
            if !(sigma_p >= 0.0 && sigma_m >= 0.0) {
                bail!("noise levels must be nonnegative");
            }
            let p = load_problem(&scene, &tuning)?;
            let plan = in_file(&plan, io::parse_plan(&read(&plan)?))?;
            let d = Disturbance {
                sigma_p,
                sigma_m,
                seed: tuning.seed.unwrap_or(0),
            };
            let trace = simulate(&p.scene, &plan, &p.grasps, &d)?;
            let file = TraceFile::from_trace(&trace);
            eprintln!(
                "max residual {:.3e} m / {:.3e} rad, {} fault(s)",
                file.summary.max_residual[0], file.summary.max_residual[1], file.summary.fault_count
            );
            if let Some(path) = csv {
                let f = fs::File::create(&path).with_context(|| format!("writing {}", path.display()))?;
                io::write_trace_csv(&file, f)?;
            }
            emit(output.as_deref(), &io::to_json(&file)?)
        }
        Command::Export { input, format, output } => {
            let text = read(&input)?;
            let kind = in_file(&input, io::kind_of(&text))?;
            let mut buf = Vec::new();
            match (kind.as_str(), format) {
                ("plan", Format::Json) => buf = io::plan_json(&in_file(&input, io::parse_plan(&text))?)?.into_bytes(),
                ("plan", Format::Csv) => io::write_plan_csv(&in_file(&input, io::parse_plan(&text))?, &mut buf)?,
                ("trace", Format::Json) => buf = io::to_json(&in_file(&input, TraceFile::parse(&text))?)?.into_bytes(),
                ("trace", Format::Csv) => io::write_trace_csv(&in_file(&input, TraceFile::parse(&text))?, &mut buf)?,
                (other, _) => bail!("{}: cannot export a '{other}' file", input.display()),
            }
            emit(output.as_deref(), std::str::from_utf8(&buf)?)
        }
        Command::Scenario {
            targets,
            out_dir,
            emit: emit_dir,
            tuning,
        } => {
            if let Some(dir) = emit_dir {
                fs::create_dir_all(&dir)?;
                for name in scenarios::NAMES {
                    let path = dir.join(format!("{name}.json"));
                    fs::write(&path, io::problem_json(&scenarios::by_name(name).unwrap())?)?;
                    println!("{}", path.display());
                }
                return Ok(());
            }
            let opts = options(&tuning)?;
            let names: Vec<String> = if targets.is_empty() {
                scenarios::NAMES.iter().map(|s| s.to_string()).collect()
            } else {
                targets
            };
            if let Some(dir) = &out_dir {
                fs::create_dir_all(dir)?;
            }
            let mut failed = 0;
            for target in &names {
                let p = match scenarios::by_name(target) {
                    Some(mut p) if !Path::new(target).exists() => {
                        if let Some(m) = tuning.margin {
                            p.scene.margin = m;
                        }
                        p
                    }
                    _ => load_problem(Path::new(target), &tuning)?,
                };
                let result = Planner::new(&p.scene, &p.trajectory, &p.grasps, opts).global_plan();
                let (ok, summary) = judge(&p, &result);
                if let (Some(dir), Ok(plan)) = (&out_dir, &result) {
                    let name = if p.name.is_empty() { "scenario" } else { p.name.as_str() };
                    fs::write(dir.join(format!("{name}.plan.json")), io::plan_json(plan)?)?;
                }
                println!("{} {}: {summary}", if ok { "PASS" } else { "FAIL" }, p.name);
                if !ok {
                    failed += 1;
                }
                if let Err(e) = &result {
                    if !e.is_infeasibility() {
                        return Err(anyhow!(e.to_string()).context(format!("scenario {}", p.name)));
                    }
                }
            }
            if failed > 0 {
                return Err(Infeasible(format!("{failed} of {} scenario(s) missed their expected outcome", names.len())).into());
            }
            Ok(())
        }
    }
}

fn platform_moves(plan: &MultiRobotPlan) -> bool {
    plan.robots.iter().any(|r| {
        r.knots.windows(2).any(|w| w[0].config.platform != w[1].config.platform)
            || r.knots.iter().any(|k| k.event == Event::PlatformTransit)
    })
}

/// Whether an outcome meets the scenario's expectation, with a one-line summary.
fn judge(p: &Problem, result: &cochain::Result<MultiRobotPlan>) -> (bool, String) {
    let e = &p.expect;
    match result {
        Ok(plan) => {
            let n = plan.regrasp_count();
            let moves = platform_moves(plan);
            let mut ok = n <= e.max_regrasps && (e.must_succeed || n >= 1);
            if !e.platform_motion_allowed && moves {
                ok = false;
            }
            let transits: usize = plan.diagnostics.transits.iter().sum();
            (
                ok,
                format!(
                    "{n} regrasp(s), {transits} platform transit(s), assignment rank {}, {} steps",
                    plan.diagnostics.assignment_rank,
                    plan.steps()
                ),
            )
        }
        Err(err) => (!e.must_succeed && err.is_infeasibility(), format!("no plan: {err}")),
    }
}
