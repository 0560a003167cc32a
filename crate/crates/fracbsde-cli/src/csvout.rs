//! CSV artifact writers. Header row mandatory, newline `\n`, floats in the
//! shortest decimal form that round-trips binary64. Reruns with the same
//! config produce byte-identical files, so nothing time- or thread-dependent
//! belongs here.

use std::fs::File;
use std::io::{BufWriter, Result as IoResult, Write};
use std::path::Path;

use fracbsde::compare::ComparisonStep;
use fracbsde::{ForwardEnsemble, IterationTrace, SolutionEnsemble, ValueField};

/// solution.csv keeps at most this many paths; larger ensembles are thinned
/// with a fixed stride so the file stays plot-sized and deterministic.
pub const MAX_SOLUTION_PATHS: usize = 2000;

pub fn solution_stride(n_paths: usize) -> usize {
    n_paths.div_ceil(MAX_SOLUTION_PATHS).max(1)
}

fn writer(path: &Path) -> IoResult<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

pub fn write_header_only(path: &Path, header: &str) -> IoResult<()> {
    let mut w = writer(path)?;
    writeln!(w, "{header}")?;
    w.flush()
}

/// Per-path solution on `[0, T]`. Returns (paths written, stride).
pub fn write_solution_csv(path: &Path, sol: &SolutionEnsemble<f64>) -> IoResult<(usize, usize)> {
    let mut w = writer(path)?;
    writeln!(w, "path,t,y,z")?;
    let n = sol.grid.steps() as isize;
    let stride = solution_stride(sol.n_paths());
    let mut written = 0usize;
    let mut p = 0usize;
    while p < sol.n_paths() {
        for i in 0..=n {
            let t = sol.times[sol.col(i)];
            writeln!(w, "{p},{t},{},{}", sol.y_at(p, i), sol.z_at(p, i))?;
        }
        written += 1;
        p += stride;
    }
    w.flush()?;
    Ok((written, stride))
}

pub const TRACE_HEADER: &str = "iter,distance,ratio";

fn write_iteration_rows<W: Write>(
    w: &mut W,
    rows: impl Iterator<Item = (f64, Option<f64>)>,
) -> IoResult<()> {
    writeln!(w, "{TRACE_HEADER}")?;
    for (k, (distance, ratio)) in rows.enumerate() {
        match ratio {
            Some(r) => writeln!(w, "{},{distance},{r}", k + 1)?,
            None => writeln!(w, "{},{distance},", k + 1)?,
        }
    }
    Ok(())
}

/// Fixed-point sweep trace. Wall seconds stay out of the file on purpose;
/// they live in the report where nothing is byte-pinned.
pub fn write_trace_csv(path: &Path, trace: &IterationTrace) -> IoResult<()> {
    let mut w = writer(path)?;
    write_iteration_rows(&mut w, trace.entries.iter().map(|e| (e.distance, e.ratio)))?;
    w.flush()
}

pub fn write_contraction_csv_picard(path: &Path, trace: &IterationTrace) -> IoResult<()> {
    write_trace_csv(path, trace)
}

/// Comparison-iteration decay: distance of each sweep to the previous
/// iterate and the successive quotient.
pub fn write_contraction_csv_comparison(path: &Path, steps: &[ComparisonStep]) -> IoResult<()> {
    let mut w = writer(path)?;
    let mut prev: Option<f64> = None;
    let rows: Vec<(f64, Option<f64>)> = steps
        .iter()
        .map(|s| {
            let ratio = prev.filter(|&d| d > 0.0).map(|d| s.distance / d);
            prev = Some(s.distance);
            (s.distance, ratio)
        })
        .collect();
    write_iteration_rows(&mut w, rows.into_iter())?;
    w.flush()
}

pub const Y_MEAN_HEADER: &str = "t,y_mean,y_se,z_mean,z_se";

fn mean_and_se(vals: &[f64]) -> (f64, f64) {
    let n = vals.len();
    let mean = vals.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Ensemble mean of `Y` and `Z` at every node on `[0, T]`, with standard
/// errors for plot bands.
pub fn write_y_mean_csv(path: &Path, sol: &SolutionEnsemble<f64>) -> IoResult<()> {
    let mut w = writer(path)?;
    writeln!(w, "{Y_MEAN_HEADER}")?;
    let n = sol.grid.steps() as isize;
    for i in 0..=n {
        let c = sol.col(i);
        let t = sol.times[c];
        let yv: Vec<f64> = (0..sol.n_paths()).map(|p| sol.y.at(p, c)).collect();
        let zv: Vec<f64> = (0..sol.n_paths()).map(|p| sol.z.at(p, c)).collect();
        let (ym, yse) = mean_and_se(&yv);
        let (zm, zse) = mean_and_se(&zv);
        writeln!(w, "{t},{ym},{yse},{zm},{zse}")?;
    }
    w.flush()
}

/// Full forward ensemble; written only on request, the file is large.
pub fn write_paths_csv(path: &Path, fwd: &ForwardEnsemble<f64>) -> IoResult<()> {
    let mut w = writer(path)?;
    writeln!(w, "path,t,x")?;
    let grid = fwd.model.grid;
    for p in 0..fwd.values.n_paths() {
        for i in 0..=grid.steps() {
            writeln!(w, "{p},{},{}", grid.node(i), fwd.values.at(p, i))?;
        }
    }
    w.flush()
}

/// Parabolic value field and its space derivative on the full lattice.
pub fn write_field_csv(path: &Path, field: &ValueField<f64>) -> IoResult<()> {
    let mut w = writer(path)?;
    writeln!(w, "t,x,u,ux")?;
    for (r, &t) in field.times.iter().enumerate() {
        for (c, &x) in field.xs.iter().enumerate() {
            writeln!(w, "{t},{x},{},{}", field.u.at(r, c), field.ux.at(r, c))?;
        }
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stride_keeps_solution_file_bounded() {
        assert_eq!(solution_stride(1), 1);
        assert_eq!(solution_stride(2000), 1);
        assert_eq!(solution_stride(2001), 2);
        assert_eq!(solution_stride(20_000), 10);
    }

    #[test]
    fn mean_and_se_match_hand_computation() {
        let (m, se) = mean_and_se(&[1.0, 2.0, 3.0]);
        assert!((m - 2.0).abs() < 1e-15);
        // sample variance 1, se = 1/sqrt(3)
        assert!((se - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
        let (m1, se1) = mean_and_se(&[5.0]);
        assert_eq!((m1, se1), (5.0, 0.0));
    }
}
