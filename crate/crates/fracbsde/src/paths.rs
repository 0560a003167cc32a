//! Path storage, forward Euler transport and Wiener-type integrals against
//! sampled fractional noise.

use rayon::prelude::*;

use crate::coeff::DeterministicFn;
use crate::error::{Error, Result};
use crate::grid::FbmModel;
use crate::numeric::Real;

/// Row-major ensemble matrix: one row per path, one column per time index.
#[derive(Debug, Clone, PartialEq)]
pub struct PathMatrix<R: Real> {
    n_paths: usize,
    n_cols: usize,
    data: Vec<R>,
}

impl<R: Real> PathMatrix<R> {
    pub fn zeros(n_paths: usize, n_cols: usize) -> Self {
        PathMatrix { n_paths, n_cols, data: vec![R::zero(); n_paths * n_cols] }
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn at(&self, path: usize, col: usize) -> R {
        debug_assert!(path < self.n_paths && col < self.n_cols);
        self.data[path * self.n_cols + col]
    }

    #[inline]
    pub fn at_mut(&mut self, path: usize, col: usize) -> &mut R {
        debug_assert!(path < self.n_paths && col < self.n_cols);
        &mut self.data[path * self.n_cols + col]
    }

    pub fn row(&self, path: usize) -> &[R] {
        &self.data[path * self.n_cols..(path + 1) * self.n_cols]
    }

    pub fn data(&self) -> &[R] {
        &self.data
    }

    pub fn row_mut(&mut self, path: usize) -> &mut [R] {
        &mut self.data[path * self.n_cols..(path + 1) * self.n_cols]
    }

    /// Parallel iterator over `(path_index, row)`; rows are disjoint, so
    /// writes stay race-free and the result does not depend on scheduling.
    pub fn par_rows_mut(&mut self) -> impl IndexedParallelIterator<Item = (usize, &mut [R])> {
        self.data.par_chunks_mut(self.n_cols).enumerate()
    }

    pub fn column(&self, col: usize) -> Vec<R> {
        (0..self.n_paths).map(|p| self.at(p, col)).collect()
    }

    /// Mean over paths of column `col`. Sequential sum: bit-stable no matter
    /// how many threads produced the data.
    pub fn column_mean(&self, col: usize) -> R {
        let mut s = R::zero();
        for p in 0..self.n_paths {
            s += self.at(p, col);
        }
        s / R::from_index(self.n_paths)
    }

    /// Mean over paths of the squared column entries.
    pub fn column_mean_sq(&self, col: usize) -> R {
        let mut s = R::zero();
        for p in 0..self.n_paths {
            let v = self.at(p, col);
            s += v * v;
        }
        s / R::from_index(self.n_paths)
    }

    /// Copy of the column range `[from, to)`.
    pub fn slice_cols(&self, from: usize, to: usize) -> PathMatrix<R> {
        assert!(from <= to && to <= self.n_cols);
        let mut out = PathMatrix::zeros(self.n_paths, to - from);
        for p in 0..self.n_paths {
            out.row_mut(p).copy_from_slice(&self.row(p)[from..to]);
        }
        out
    }
}

/// Sampled fractional Brownian paths at the grid nodes; column 0 is zero.
#[derive(Debug, Clone)]
pub struct PathEnsemble<R: Real> {
    pub model: FbmModel<R>,
    pub values: PathMatrix<R>,
}

impl<R: Real> PathEnsemble<R> {
    pub fn n_paths(&self) -> usize {
        self.values.n_paths()
    }

    /// Increment `B_{t_{j+1}} - B_{t_j}` on path `p`.
    #[inline]
    pub fn increment(&self, p: usize, j: usize) -> R {
        self.values.at(p, j + 1) - self.values.at(p, j)
    }
}

/// Forward state `eta` driven by the sampled noise.
#[derive(Debug, Clone)]
pub struct ForwardEnsemble<R: Real> {
    pub model: FbmModel<R>,
    pub eta0: R,
    pub values: PathMatrix<R>,
}

/// Left-point Euler transport
/// `eta_{i+1} = eta_i + b(t_i) dt + sigma(t_i) (B_{i+1} - B_i)`.
/// Exact when `b` and `sigma` are constants.
pub fn simulate_forward<R: Real>(
    paths: &PathEnsemble<R>,
    eta0: R,
    drift: &DeterministicFn<R>,
    vol: &DeterministicFn<R>,
) -> Result<ForwardEnsemble<R>> {
    if !eta0.is_finite() {
        return Err(Error::invalid("initial state must be finite"));
    }
    let grid = paths.model.grid;
    let n = grid.steps();
    let dt = grid.dt();
    let b_nodes = drift.node_values(&grid);
    let s_nodes = vol.node_values(&grid);
    let mut values = PathMatrix::zeros(paths.n_paths(), n + 1);
    let src = &paths.values;
    values.par_rows_mut().for_each(|(p, row)| {
        row[0] = eta0;
        for i in 0..n {
            let db = src.at(p, i + 1) - src.at(p, i);
            row[i + 1] = row[i] + b_nodes[i] * dt + s_nodes[i] * db;
        }
    });
    Ok(ForwardEnsemble { model: paths.model, eta0, values })
}

/// Wiener-type integral `int_0^T f dB^H` per path, with `f` frozen at the
/// cell midpoints so its law matches the kernel inner product exactly:
/// `E[X^2] = <f, f>_T` holds for the discrete object, not just in the limit.
pub fn wiener_integral<R: Real>(paths: &PathEnsemble<R>, f: &DeterministicFn<R>) -> Vec<R> {
    let grid = paths.model.grid;
    let fv = f.cell_values(&grid);
    (0..paths.n_paths())
        .map(|p| {
            let mut s = R::zero();
            for (j, &fj) in fv.iter().enumerate() {
                s += fj * paths.increment(p, j);
            }
            s
        })
        .collect()
}
