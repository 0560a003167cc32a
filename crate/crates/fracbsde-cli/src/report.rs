//! Run report assembly: canonical config echo, content hash, solver and
//! diagnostic summaries, oracle check verdicts, and the error channel the
//! exit code mirrors.

use std::collections::BTreeMap;

use serde::Serialize;

use fracbsde::{
    weighted_norm_y, weighted_norm_z, CheckOutcome, EnergyCheck, Error, HurstParam, ScenarioRun,
    SolutionEnsemble,
};

use crate::config::{ExperimentConfig, RunPlan};

pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Invalid(_) | Error::Coefficient(_) | Error::Infeasible(_) => 2,
        _ => 3,
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Invalid(_) => "invalid",
        Error::Coefficient(_) => "coefficient",
        Error::Factorization { .. } => "factorization",
        Error::VarianceUnderflow { .. } => "variance_underflow",
        Error::IllConditioned { .. } => "ill_conditioned",
        Error::NonFiniteGenerator { .. } => "non_finite_generator",
        Error::Infeasible(_) => "infeasible",
        Error::DomainTruncation { .. } => "domain_truncation",
        Error::Diverged { .. } => "diverged",
        Error::Numerical(_) => "numerical",
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorSection {
    pub exit_code: i32,
    pub kind: String,
    pub message: String,
}

impl ErrorSection {
    pub fn from_error(e: &Error) -> Self {
        ErrorSection {
            exit_code: exit_code_for(e),
            kind: error_kind(e).into(),
            message: e.to_string(),
        }
    }

    pub fn checks_failed(failed: usize, total: usize) -> Self {
        ErrorSection {
            exit_code: 4,
            kind: "checks_failed".into(),
            message: format!("{failed} of {total} checks failed"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSection {
    pub name: String,
    pub pipeline: &'static str,
    pub n_paths: usize,
    pub seed: u64,
    pub admissible: Option<bool>,
    pub certified: Option<bool>,
    pub converged: Option<bool>,
    pub iterations: Option<usize>,
    pub norm_beta: Option<f64>,
    pub all_checks_passed: bool,
    pub wall_seconds: f64,
    pub sweep_seconds: Vec<f64>,
    pub solution_paths_written: Option<usize>,
    pub solution_path_stride: Option<usize>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DominanceJson {
    pub fraction: f64,
    pub worst: f64,
    pub verdict: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsSection {
    pub norm_y: Option<f64>,
    pub norm_z: Option<f64>,
    pub ratios: Vec<f64>,
    pub dominance: Option<DominanceJson>,
    pub z_scores: BTreeMap<String, f64>,
    pub energy: Vec<EnergyCheck>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub version: &'static str,
    pub content_hash: String,
    pub config: ExperimentConfig,
    pub run: Option<RunSection>,
    pub diagnostics: Option<DiagnosticsSection>,
    pub checks: Vec<CheckOutcome>,
    pub error: Option<ErrorSection>,
}

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Report for a run that failed before producing a solution.
pub fn error_report(config: ExperimentConfig, content_hash: String, e: &Error) -> RunReport {
    RunReport {
        version: VERSION,
        content_hash,
        config,
        run: None,
        diagnostics: None,
        checks: Vec::new(),
        error: Some(ErrorSection::from_error(e)),
    }
}

fn ensemble_norms(
    ens: &SolutionEnsemble<f64>,
    beta: f64,
    hurst: HurstParam<f64>,
) -> (Option<f64>, Option<f64>) {
    let k = ens.grid.delay_steps();
    let (y, z) = ens.solved_parts();
    let times = &ens.times[k..];
    (
        weighted_norm_y(times, &y, beta).ok(),
        weighted_norm_z(times, &z, beta, hurst).ok(),
    )
}

pub fn build_report(
    plan: &RunPlan,
    run: &ScenarioRun<f64>,
    solution_written: Option<(usize, usize)>,
) -> RunReport {
    let hurst = run.fwd.as_ref().map(|f| f.model.hurst);
    let (ensemble, trace, admissible, certified, converged, norm_beta) =
        if let Some(sol) = &run.solution {
            (
                Some(&sol.ensemble),
                Some(&sol.trace),
                Some(sol.admissible),
                Some(sol.certified),
                Some(sol.converged),
                Some(sol.norm_beta),
            )
        } else if let Some(cmp) = &run.comparison {
            (
                Some(&cmp.upper.ensemble),
                Some(&cmp.upper.trace),
                Some(cmp.admissible),
                Some(cmp.upper.certified),
                Some(cmp.upper.converged),
                Some(cmp.upper.norm_beta),
            )
        } else {
            (None, None, None, None, None, None)
        };

    let (norm_y, norm_z) = match (ensemble, norm_beta, hurst) {
        (Some(ens), Some(beta), Some(h)) => ensemble_norms(ens, beta, h),
        _ => (None, None),
    };

    let mut z_scores = BTreeMap::new();
    if let Some(b) = &run.battery {
        z_scores.insert("battery_max_abs".into(), b.max_abs_z);
    }

    let dominance = run.comparison.as_ref().map(|c| DominanceJson {
        fraction: c.final_dominance.fraction,
        worst: c.final_dominance.worst_violation,
        verdict: c.final_dominance.verdict,
    });

    let failed = run.checks.iter().filter(|c| !c.passed).count();
    let all_passed = failed == 0;

    RunReport {
        version: VERSION,
        content_hash: plan.content_hash.clone(),
        config: plan.echo.clone(),
        run: Some(RunSection {
            name: run.name.clone(),
            pipeline: plan.pipeline.as_str(),
            n_paths: plan.spec.n_paths,
            seed: run.seed,
            admissible,
            certified,
            converged,
            iterations: trace.map(|t| t.len()),
            norm_beta,
            all_checks_passed: all_passed,
            wall_seconds: run.wall_seconds,
            sweep_seconds: trace
                .map(|t| t.entries.iter().map(|e| e.seconds).collect())
                .unwrap_or_default(),
            solution_paths_written: solution_written.map(|(n, _)| n),
            solution_path_stride: solution_written.map(|(_, s)| s),
        }),
        diagnostics: Some(DiagnosticsSection {
            norm_y,
            norm_z,
            ratios: trace.map(|t| t.ratios()).unwrap_or_default(),
            dominance,
            z_scores,
            energy: run.energy.clone(),
        }),
        checks: run.checks.clone(),
        error: (!all_passed).then(|| ErrorSection::checks_failed(failed, run.checks.len())),
    }
}
