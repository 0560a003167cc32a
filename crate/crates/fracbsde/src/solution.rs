//! Solution storage for delayed backward equations: path ensembles for
//! `(Y, Z)` indexed over `[-delta, T]`, plus the iteration trace the
//! fixed-point solver produces.

use crate::coeff::DeterministicFn;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::numeric::Real;
use crate::paths::PathMatrix;

/// How a solution ensemble was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// Backward regression sweep against frozen delayed arguments.
    RegressionSweep,
    /// Evaluation of a PDE value field along paths.
    FieldEvaluation,
    /// Step of the monotone comparison iteration.
    ComparisonStep,
    /// Initial iterate or externally supplied values.
    Exogenous,
}

/// `(Y, Z)` on the extended grid `t_{-k} = -delta, ..., t_0 = 0, ..., t_n = T`.
/// Columns are addressed by the signed grid index; the first `k` columns
/// hold the prescribed segment values, identical across paths.
#[derive(Debug, Clone)]
pub struct SolutionEnsemble<R: Real> {
    pub grid: TimeGrid<R>,
    pub times: Vec<R>,
    pub y: PathMatrix<R>,
    pub z: PathMatrix<R>,
    pub provenance: Provenance,
}

impl<R: Real> SolutionEnsemble<R> {
    /// Zero solution on `[0, T]` with the segment columns filled from the
    /// prescribed functions.
    pub fn from_segments(
        grid: TimeGrid<R>,
        n_paths: usize,
        phi0: &DeterministicFn<R>,
        psi0: &DeterministicFn<R>,
        provenance: Provenance,
    ) -> Result<Self> {
        if n_paths == 0 {
            return Err(Error::invalid("solution ensemble needs at least one path"));
        }
        let k = grid.delay_steps();
        let n_cols = k + grid.steps() + 1;
        let times = grid.nodes_with_segment();
        let mut y = PathMatrix::zeros(n_paths, n_cols);
        let mut z = PathMatrix::zeros(n_paths, n_cols);
        for c in 0..k {
            let t = times[c];
            let (py, pz) = (phi0.eval(t), psi0.eval(t));
            if !py.is_finite() || !pz.is_finite() {
                return Err(Error::coefficient(format!(
                    "segment value non-finite at t = {t}"
                )));
            }
            for p in 0..n_paths {
                *y.at_mut(p, c) = py;
                *z.at_mut(p, c) = pz;
            }
        }
        Ok(SolutionEnsemble { grid, times, y, z, provenance })
    }

    pub fn n_paths(&self) -> usize {
        self.y.n_paths()
    }

    /// Column index of signed grid index `i`, `-k <= i <= n`.
    #[inline]
    pub fn col(&self, i: isize) -> usize {
        let k = self.grid.delay_steps() as isize;
        debug_assert!(i >= -k && i <= self.grid.steps() as isize);
        (i + k) as usize
    }

    #[inline]
    pub fn y_at(&self, p: usize, i: isize) -> R {
        self.y.at(p, self.col(i))
    }

    #[inline]
    pub fn z_at(&self, p: usize, i: isize) -> R {
        self.z.at(p, self.col(i))
    }

    /// Overwrites the segment columns from new prescribed functions.
    pub fn replace_segment(
        &mut self,
        phi0: &DeterministicFn<R>,
        psi0: &DeterministicFn<R>,
    ) {
        let k = self.grid.delay_steps();
        for c in 0..k {
            let t = self.times[c];
            let (py, pz) = (phi0.eval(t), psi0.eval(t));
            for p in 0..self.n_paths() {
                *self.y.at_mut(p, c) = py;
                *self.z.at_mut(p, c) = pz;
            }
        }
    }

    /// Copies of the `[0, T]` portions of `Y` and `Z`.
    pub fn solved_parts(&self) -> (PathMatrix<R>, PathMatrix<R>) {
        let k = self.grid.delay_steps();
        let end = self.y.n_cols();
        (self.y.slice_cols(k, end), self.z.slice_cols(k, end))
    }
}

/// Per-sweep record of the fixed-point iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    /// Squared weighted distance between successive iterates.
    pub distance: f64,
    /// `d_n / d_{n-1}`, absent on the first sweep.
    pub ratio: Option<f64>,
    /// Wall time of the sweep.
    pub seconds: f64,
}

#[derive(Debug, Clone, Default)]
pub struct IterationTrace {
    pub entries: Vec<TraceEntry>,
}

impl IterationTrace {
    pub fn push(&mut self, distance: f64, seconds: f64) {
        let ratio = self
            .entries
            .last()
            .and_then(|prev| (prev.distance > 0.0).then(|| distance / prev.distance));
        self.entries.push(TraceEntry { distance, ratio, seconds });
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn last_distance(&self) -> Option<f64> {
        self.entries.last().map(|e| e.distance)
    }

    pub fn ratios(&self) -> Vec<f64> {
        self.entries.iter().filter_map(|e| e.ratio).collect()
    }
}

/// Output of the delayed Picard solver.
#[derive(Debug, Clone)]
pub struct PicardSolution<R: Real> {
    pub ensemble: SolutionEnsemble<R>,
    pub trace: IterationTrace,
    /// Delay or horizon small enough for the contraction constants to apply.
    pub admissible: bool,
    /// Admissible and the observed contraction stayed within the bound.
    pub certified: bool,
    pub converged: bool,
    /// Exponential weight used for the iteration distances.
    pub norm_beta: f64,
}
