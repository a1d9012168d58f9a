//! Runs an external PDDL3 planner on a compiled problem.

use std::path::Path;
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

use super::{PlanResult, PlanStatus};
use crate::compile::{to_preferences, CompiledProblem};
use crate::pddl::{emit_domain, emit_problem, Dialect, PddlError};
use crate::plan::{validate, Plan, PlanFileError};
use crate::Cost;

/// Environment variable naming the directory for scratch files.
pub const SCRATCH_ENV: &str = "REPLAN_SCRATCH_DIR";

#[derive(Debug, Error)]
pub enum ExternalError {
    #[error("command template lacks `{0}`")]
    Template(&'static str),
    #[error(transparent)]
    Emit(#[from] PddlError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("solver exited with {status}: {stderr}")]
    ProcessFailed { status: String, stderr: String },
    #[error("solver wrote an unreadable plan: {0}")]
    Unparsable(#[from] PlanFileError),
    #[error("solver returned an invalid plan: {0}")]
    ExternalInvalid(String),
}

/// Writes the PDDL3 form of `cp`, runs `template` through the shell with
/// `{domain} {problem} {plan_out} {timeout}` substituted, and validates the
/// plan it writes. The penalty is recomputed here; nothing the solver
/// reports is trusted.
pub fn solve_external(
    cp: &CompiledProblem,
    template: &str,
    timeout_secs: f64,
    w_len: Cost,
) -> Result<PlanResult, ExternalError> {
    for key in ["{domain}", "{problem}", "{plan_out}"] {
        if !template.contains(key) {
            return Err(ExternalError::Template(key));
        }
    }
    let start = Instant::now();
    let problem = to_preferences(cp);
    let dir = match std::env::var_os(SCRATCH_ENV) {
        Some(base) => tempfile::tempdir_in(base)?,
        None => tempfile::tempdir()?,
    };
    let domain_path = dir.path().join("domain.pddl");
    let problem_path = dir.path().join("problem.pddl");
    let plan_path = dir.path().join("plan.txt");
    let stderr_path = dir.path().join("stderr.txt");
    std::fs::write(&domain_path, emit_domain(&cp.domain))?;
    std::fs::write(&problem_path, emit_problem(&problem, Dialect::Pddl3)?)?;

    let command = template
        .replace("{domain}", &quoted(&domain_path))
        .replace("{problem}", &quoted(&problem_path))
        .replace("{plan_out}", &quoted(&plan_path))
        .replace("{timeout}", &format!("{}", timeout_secs.ceil() as u64));
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(&command)
        .current_dir(dir.path())
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(std::fs::File::create(&stderr_path)?)
        .spawn()?;

    let limit = Duration::from_secs_f64(timeout_secs);
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break status;
        }
        if start.elapsed() >= limit {
            child.kill()?;
            child.wait()?;
            return Ok(PlanResult::without_plan(PlanStatus::Timeout, start, 0));
        }
        thread::sleep(Duration::from_millis(10));
    };
    if !status.success() {
        let stderr = std::fs::read_to_string(&stderr_path).unwrap_or_default();
        return Err(ExternalError::ProcessFailed {
            status: status.to_string(),
            stderr: stderr.trim().to_string(),
        });
    }

    let text = std::fs::read_to_string(&plan_path)?;
    let plan = Plan::parse(&text, &cp.domain, &problem)?;
    let v = validate(&problem, &plan);
    if let Some(f) = v.failure {
        return Err(ExternalError::ExternalInvalid(f.to_string()));
    }
    if !v.valid {
        let unmet: Vec<String> = v.unmet_hard_goals.iter().map(|g| g.to_string()).collect();
        return Err(ExternalError::ExternalInvalid(format!(
            "hard goals not reached: {}",
            unmet.join(" ")
        )));
    }
    let len = plan.len();
    let objective = w_len * Cost::from_integer(len as i64) + v.penalty_sum;
    Ok(PlanResult {
        plan: Some(plan),
        penalty_sum: v.penalty_sum,
        plan_length: len,
        objective,
        wall_time_ms: start.elapsed().as_millis(),
        nodes_expanded: 0,
        status: PlanStatus::Satisficing,
        incumbents: vec![objective],
    })
}

fn quoted(p: &Path) -> String {
    format!("'{}'", p.display().to_string().replace('\'', r"'\''"))
}
