//! Pipeline orchestration: execute a resolved plan, write every artifact
//! once at the end, and map failures onto the exit-code contract
//! (0 success, 2 validation, 3 numerical, 4 oracle-check failure).

use std::fs;
use std::io::Result as IoResult;
use std::path::Path;

use fracbsde::{
    admissible_delay, admissible_horizon, default_horizon_v, run_scenario, AdmissibleMode,
    HurstParam, Result, ScenarioRun, SCENARIO_LIST,
};

use crate::config::RunPlan;
use crate::csvout;
use crate::report::{self, RunReport};

pub fn write_report_file(dir: &Path, rep: &RunReport) -> IoResult<()> {
    let mut text = serde_json::to_string_pretty(rep).expect("report serialization is infallible");
    text.push('\n');
    fs::write(dir.join("report.json"), text)
}

fn write_artifacts(plan: &RunPlan, run: &ScenarioRun<f64>) -> IoResult<RunReport> {
    let dir = &plan.out_dir;
    let (ensemble, trace) = if let Some(sol) = &run.solution {
        (Some(&sol.ensemble), Some(&sol.trace))
    } else if let Some(cmp) = &run.comparison {
        (Some(&cmp.upper.ensemble), Some(&cmp.upper.trace))
    } else {
        (None, None)
    };

    let solution_written = match ensemble {
        Some(ens) => Some(csvout::write_solution_csv(&dir.join("solution.csv"), ens)?),
        None => {
            csvout::write_header_only(&dir.join("solution.csv"), "path,t,y,z")?;
            None
        }
    };
    match trace {
        Some(tr) => csvout::write_trace_csv(&dir.join("trace.csv"), tr)?,
        None => csvout::write_header_only(&dir.join("trace.csv"), csvout::TRACE_HEADER)?,
    }
    match ensemble {
        Some(ens) => csvout::write_y_mean_csv(&dir.join("Y_mean_vs_t.csv"), ens)?,
        None => csvout::write_header_only(&dir.join("Y_mean_vs_t.csv"), csvout::Y_MEAN_HEADER)?,
    }
    let contraction = dir.join("contraction.csv");
    if let Some(cmp) = &run.comparison {
        csvout::write_contraction_csv_comparison(&contraction, &cmp.steps)?;
    } else if let Some(tr) = trace {
        csvout::write_contraction_csv_picard(&contraction, tr)?;
    } else {
        csvout::write_header_only(&contraction, csvout::TRACE_HEADER)?;
    }

    if plan.emit_paths {
        if let Some(fwd) = &run.fwd {
            csvout::write_paths_csv(&dir.join("paths.csv"), fwd)?;
        }
    }
    if plan.emit_fields {
        if let Some(field) = &run.field {
            csvout::write_field_csv(&dir.join("field.csv"), field)?;
        }
    }

    let rep = report::build_report(plan, run, solution_written);
    write_report_file(dir, &rep)?;
    Ok(rep)
}

fn print_summary(plan: &RunPlan, run: &ScenarioRun<f64>) {
    println!(
        "run {}: pipeline {}, seed {}, {} paths, {:.2}s",
        run.name,
        plan.pipeline.as_str(),
        run.seed,
        plan.spec.n_paths,
        run.wall_seconds
    );
    for c in &run.checks {
        println!("  [{}] {}: {}", if c.passed { "ok" } else { "FAIL" }, c.name, c.detail);
    }
    println!("artifacts: {}", plan.out_dir.display());
}

/// Runs the plan and writes all artifacts. Returns the process exit code.
pub fn execute_and_write(plan: &RunPlan) -> i32 {
    if let Err(e) = fs::create_dir_all(&plan.out_dir) {
        eprintln!("error: cannot create output dir {}: {e}", plan.out_dir.display());
        return 2;
    }
    match run_scenario(&plan.spec) {
        Err(e) => {
            let code = report::exit_code_for(&e);
            let rep = report::error_report(plan.echo.clone(), plan.content_hash.clone(), &e);
            if let Err(io) = write_report_file(&plan.out_dir, &rep) {
                eprintln!("error: cannot write report: {io}");
            }
            eprintln!("error: {e}");
            code
        }
        Ok(run) => match write_artifacts(plan, &run) {
            Err(io) => {
                eprintln!("error: cannot write artifacts: {io}");
                2
            }
            Ok(_) => {
                print_summary(plan, &run);
                if run.all_passed() {
                    println!("all checks passed");
                    0
                } else {
                    let failed = run.checks.iter().filter(|c| !c.passed).count();
                    println!("{failed} of {} checks failed", run.checks.len());
                    4
                }
            }
        },
    }
}

pub fn scenario_listing() -> String {
    SCENARIO_LIST
        .iter()
        .map(|(name, desc)| format!("{name:<24} {desc}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Small-horizon certificate attached to a constants row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HorizonBound {
    /// `L = 0`: the generator ignores the solution, any horizon works.
    Unbounded,
    UpTo(f64),
    /// The contraction inequalities fail for every positive horizon at
    /// these constants; only the delay route certifies anything.
    Infeasible,
}

#[derive(Debug, Clone, Copy)]
pub struct AdmissibilityRow {
    pub beta: f64,
    pub delta_max: f64,
    pub t_max: HorizonBound,
}

fn bound_row(l: f64, m: f64, hurst: HurstParam<f64>, mode: AdmissibleMode) -> Result<AdmissibilityRow> {
    let (beta, delta_max) = admissible_delay(l, m, mode)?;
    let t_max = if l == 0.0 {
        HorizonBound::Unbounded
    } else {
        match admissible_horizon(l, m, hurst, beta, default_horizon_v(l, m, beta)) {
            Ok(t) => HorizonBound::UpTo(t),
            Err(_) => HorizonBound::Infeasible,
        }
    };
    Ok(AdmissibilityRow { beta, delta_max, t_max })
}

/// Existence- and comparison-grade contraction constants for (L, M, H).
pub fn admissibility_rows(
    l: f64,
    m: f64,
    h: f64,
) -> Result<(AdmissibilityRow, AdmissibilityRow)> {
    let hurst = HurstParam::new(h)?;
    Ok((
        bound_row(l, m, hurst, AdmissibleMode::Existence)?,
        bound_row(l, m, hurst, AdmissibleMode::Comparison)?,
    ))
}

fn fmt_t_max(t: HorizonBound) -> String {
    match t {
        // Certified horizons can be microscopic when beta is large, so fixed
        // six-decimal formatting would collapse them to zero.
        HorizonBound::UpTo(v) => format!("{v:.6e}"),
        HorizonBound::Unbounded => "inf".into(),
        HorizonBound::Infeasible => "-".into(),
    }
}

pub fn admissibility_table(l: f64, m: f64, h: f64, rows: (AdmissibilityRow, AdmissibilityRow)) -> String {
    let (e, c) = rows;
    [
        format!("L = {l}  M = {m}  H = {h}"),
        format!("{:<12} {:>14} {:>14} {:>14}", "mode", "beta", "delta_max", "T_max"),
        format!(
            "{:<12} {:>14.6} {:>14.6} {:>14}",
            "existence", e.beta, e.delta_max, fmt_t_max(e.t_max)
        ),
        format!(
            "{:<12} {:>14.6} {:>14.6} {:>14}",
            "comparison", c.beta, c.delta_max, fmt_t_max(c.t_max)
        ),
    ]
    .join("\n")
}

pub fn admissibility_json(l: f64, m: f64, h: f64, rows: (AdmissibilityRow, AdmissibilityRow)) -> String {
    let row = |r: &AdmissibilityRow| {
        let t_max = match r.t_max {
            HorizonBound::UpTo(v) => serde_json::json!(v),
            HorizonBound::Unbounded => serde_json::json!("unbounded"),
            HorizonBound::Infeasible => serde_json::json!("infeasible"),
        };
        serde_json::json!({
            "beta": r.beta,
            "delta_max": r.delta_max,
            "t_max": t_max,
        })
    };
    let v = serde_json::json!({
        "L": l,
        "M": m,
        "H": h,
        "existence": row(&rows.0),
        "comparison": row(&rows.1),
    });
    serde_json::to_string_pretty(&v).expect("json serialization is infallible")
}
