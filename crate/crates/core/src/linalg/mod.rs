//! Linear solvers used by the time-steppers and the WaveHoltz drivers.
//!
//! Everything works on flat `&[f64]` vectors of interior unknowns in the
//! ordering of [`crate::grid::GridField::to_unknowns`].

mod dense;
mod krylov;
mod multigrid;

pub use dense::{dense_matvec, dense_solve, dense_symmetric_eig, thomas_solve, BandedLu, BandedMatrix, EIG_DIM_LIMIT};
pub use krylov::{cg_solve, gmres_solve};
pub use multigrid::{Multigrid, MultigridOptions};

use crate::error::Result;

/// A square linear map on vectors of length [`LinearOperator::dim`].
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()>;
    fn is_symmetric(&self) -> bool {
        false
    }
}

/// Wraps a closure as a [`LinearOperator`].
pub struct FnOperator<F> {
    dim: usize,
    symmetric: bool,
    f: F,
}

impl<F> FnOperator<F>
where
    F: Fn(&[f64], &mut [f64]) -> Result<()>,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, symmetric: false, f }
    }

    pub fn symmetric(dim: usize, f: F) -> Self {
        Self { dim, symmetric: true, f }
    }
}

impl<F> LinearOperator for FnOperator<F>
where
    F: Fn(&[f64], &mut [f64]) -> Result<()>,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        (self.f)(x, y)
    }
    fn is_symmetric(&self) -> bool {
        self.symmetric
    }
}

/// The identity map.
pub struct Identity(pub usize);

impl LinearOperator for Identity {
    fn dim(&self) -> usize {
        self.0
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        y.copy_from_slice(x);
        Ok(())
    }
    fn is_symmetric(&self) -> bool {
        true
    }
}

/// Outcome of an iterative solve.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// `‖b - Ax‖ / ‖b‖` at exit (zero when `b = 0`).
    pub relative_residual: f64,
    pub converged: bool,
    /// Operator applications, preconditioner applications counted separately.
    pub work_units: usize,
    pub preconditioner_applications: usize,
    /// Relative residual after every iteration, starting with the initial one.
    pub history: Vec<f64>,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}
