//! Geometric multigrid for `A = I - s Δ_h` with the second-order Laplacian on
//! all-Dirichlet grids.
//!
//! Red-black Gauss-Seidel smoothing, full-weighting restriction, linear
//! interpolation and a banded direct solve on the coarsest level. Coarse
//! operators are rediscretized. Post-smoothing visits the colors in reverse
//! order so a V-cycle from a zero guess is a symmetric preconditioner.

use super::{BandedLu, BandedMatrix, LinearOperator, SolveReport};
use crate::error::{Error, Result};
use crate::grid::CartesianGrid;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MultigridOptions {
    pub pre_smooth: usize,
    pub post_smooth: usize,
    /// Coarsening stops once an axis has at most this many cells.
    pub coarsest_cells: usize,
}

impl Default for MultigridOptions {
    fn default() -> Self {
        Self { pre_smooth: 2, post_smooth: 2, coarsest_cells: 8 }
    }
}

/// Unknowns allowed on the coarsest level before the hierarchy is refused.
const COARSEST_LIMIT: usize = 20_000;

#[derive(Clone, Debug)]
struct Level {
    cx: usize,
    cy: usize,
    two_d: bool,
    /// Points per x-line (`cy + 1` in 2D, 1 in 1D).
    stride: usize,
    ax: f64,
    ay: f64,
    diag: f64,
}

impl Level {
    fn new(cx: usize, cy: usize, two_d: bool, hx: f64, hy: f64, shift: f64) -> Self {
        let ax = shift / (hx * hx);
        let ay = if two_d { shift / (hy * hy) } else { 0.0 };
        Self { cx, cy, two_d, stride: if two_d { cy + 1 } else { 1 }, ax, ay, diag: 1.0 + 2.0 * ax + 2.0 * ay }
    }

    fn len(&self) -> usize {
        (self.cx + 1) * self.stride
    }

    fn jrange(&self) -> std::ops::Range<usize> {
        if self.two_d {
            1..self.cy
        } else {
            0..1
        }
    }

    fn unknowns(&self) -> usize {
        (self.cx - 1) * self.jrange().len()
    }

    #[inline]
    fn neighbors(&self, u: &[f64], k: usize) -> f64 {
        let s = self.stride;
        let mut acc = self.ax * (u[k - s] + u[k + s]);
        if self.two_d {
            acc += self.ay * (u[k - 1] + u[k + 1]);
        }
        acc
    }

    fn apply(&self, u: &[f64], out: &mut [f64]) {
        for i in 1..self.cx {
            for j in self.jrange() {
                let k = i * self.stride + j;
                out[k] = self.diag * u[k] - self.neighbors(u, k);
            }
        }
    }

    fn residual(&self, u: &[f64], f: &[f64], r: &mut [f64]) {
        for i in 1..self.cx {
            for j in self.jrange() {
                let k = i * self.stride + j;
                r[k] = f[k] - self.diag * u[k] + self.neighbors(u, k);
            }
        }
    }

    fn sweep_color(&self, u: &mut [f64], f: &[f64], color: usize) {
        let inv = 1.0 / self.diag;
        let jr = self.jrange();
        for i in 1..self.cx {
            let j0 = if (i + jr.start) % 2 == color { jr.start } else { jr.start + 1 };
            for j in (j0..jr.end).step_by(2) {
                let k = i * self.stride + j;
                u[k] = (f[k] + self.neighbors(u, k)) * inv;
            }
        }
    }

    /// Full weighting from this level onto `coarse`.
    fn restrict(&self, r: &[f64], coarse: &Level, out: &mut [f64]) {
        let s = self.stride;
        for ic in 1..coarse.cx {
            for jc in coarse.jrange() {
                let (i, j) = (2 * ic, if self.two_d { 2 * jc } else { 0 });
                let k = i * s + j;
                let v = if self.two_d {
                    let line = |k: usize| 0.25 * r[k - 1] + 0.5 * r[k] + 0.25 * r[k + 1];
                    0.25 * line(k - s) + 0.5 * line(k) + 0.25 * line(k + s)
                } else {
                    0.25 * r[k - s] + 0.5 * r[k] + 0.25 * r[k + s]
                };
                out[ic * coarse.stride + jc] = v;
            }
        }
    }

    /// Adds the linear interpolation of the coarse correction `e`.
    fn prolong_add(&self, e: &[f64], coarse: &Level, u: &mut [f64]) {
        let cs = coarse.stride;
        let along = |i: usize| -> [(usize, f64); 2] {
            if i % 2 == 0 {
                [(i / 2, 1.0), (i / 2, 0.0)]
            } else {
                [(i / 2, 0.5), (i / 2 + 1, 0.5)]
            }
        };
        for i in 1..self.cx {
            let wx = along(i);
            for j in self.jrange() {
                let mut v = 0.0;
                if self.two_d {
                    let wy = along(j);
                    for (ci, a) in wx {
                        for (cj, b) in wy {
                            v += a * b * e[ci * cs + cj];
                        }
                    }
                } else {
                    for (ci, a) in wx {
                        v += a * e[ci * cs];
                    }
                }
                u[i * self.stride + j] += v;
            }
        }
    }

    fn sparse_rows(&self) -> Vec<Vec<(usize, f64)>> {
        let jr = self.jrange();
        let ny = jr.len();
        let id = |i: usize, j: usize| (i - 1) * ny + (j - jr.start);
        let mut rows = Vec::with_capacity(self.unknowns());
        for i in 1..self.cx {
            for j in jr.clone() {
                let mut row = vec![(id(i, j), self.diag)];
                if i > 1 {
                    row.push((id(i - 1, j), -self.ax));
                }
                if i + 1 < self.cx {
                    row.push((id(i + 1, j), -self.ax));
                }
                if self.two_d {
                    if j > 1 {
                        row.push((id(i, j - 1), -self.ay));
                    }
                    if j + 1 < self.cy {
                        row.push((id(i, j + 1), -self.ay));
                    }
                }
                rows.push(row);
            }
        }
        rows
    }

    fn scatter(&self, x: &[f64], u: &mut [f64]) {
        let mut it = x.iter();
        for i in 1..self.cx {
            for j in self.jrange() {
                u[i * self.stride + j] = *it.next().unwrap();
            }
        }
    }

    fn gather(&self, u: &[f64], x: &mut [f64]) {
        let mut it = x.iter_mut();
        for i in 1..self.cx {
            for j in self.jrange() {
                *it.next().unwrap() = u[i * self.stride + j];
            }
        }
    }
}

/// Multigrid hierarchy for `I - shift·Δ_h` (`shift` already includes `c²`).
#[derive(Clone, Debug)]
pub struct Multigrid {
    levels: Vec<Level>,
    coarse: BandedLu,
    opts: MultigridOptions,
}

impl Multigrid {
    pub fn new(grid: &CartesianGrid, shift: f64, opts: MultigridOptions) -> Result<Self> {
        if !grid.is_all_dirichlet() {
            return Err(Error::MixedBoundaries("multigrid supports Dirichlet grids only".into()));
        }
        if !(shift >= 0.0) {
            return Err(Error::InvalidParameter(format!("multigrid shift {shift} must be non-negative")));
        }
        let two_d = grid.dim() == 2;
        let (lx, ly) = (grid.axis(0).length(), if two_d { grid.axis(1).length() } else { 1.0 });
        let (mut cx, mut cy) = (grid.axis(0).cells, if two_d { grid.axis(1).cells } else { 2 });
        let make = |cx: usize, cy: usize| Level::new(cx, cy, two_d, lx / cx as f64, ly / cy as f64, shift);
        let mut levels = vec![make(cx, cy)];
        let coarser_ok = |c: usize| c > opts.coarsest_cells && c % 2 == 0 && c / 2 >= 2;
        while coarser_ok(cx) && (!two_d || coarser_ok(cy)) {
            cx /= 2;
            if two_d {
                cy /= 2;
            }
            levels.push(make(cx, cy));
        }
        let last = levels.last().unwrap();
        if last.unknowns() > COARSEST_LIMIT {
            return Err(Error::InvalidGrid(format!(
                "grid does not coarsen: {} cells per axis leave {} coarsest unknowns",
                grid.axis(0).cells,
                last.unknowns()
            )));
        }
        let coarse = BandedMatrix::from_rows(&last.sparse_rows())?.factor()?;
        Ok(Self { levels, coarse, opts })
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn dim(&self) -> usize {
        self.levels[0].unknowns()
    }

    /// Relative cost of one V-cycle in fine-grid sweeps.
    pub fn cycle_work(&self) -> f64 {
        let fine = self.levels[0].len() as f64;
        let per_level = (self.opts.pre_smooth + self.opts.post_smooth + 1) as f64;
        self.levels.iter().map(|l| per_level * l.len() as f64 / fine).sum()
    }

    fn cycle(&self, l: usize, u: &mut [f64], f: &[f64]) -> Result<()> {
        let level = &self.levels[l];
        if l + 1 == self.levels.len() {
            let mut b = vec![0.0; level.unknowns()];
            level.gather(f, &mut b);
            self.coarse.solve_in_place(&mut b)?;
            level.scatter(&b, u);
            return Ok(());
        }
        for _ in 0..self.opts.pre_smooth {
            level.sweep_color(u, f, 0);
            level.sweep_color(u, f, 1);
        }
        let mut r = vec![0.0; level.len()];
        level.residual(u, f, &mut r);
        let coarse = &self.levels[l + 1];
        let mut fc = vec![0.0; coarse.len()];
        level.restrict(&r, coarse, &mut fc);
        let mut ec = vec![0.0; coarse.len()];
        self.cycle(l + 1, &mut ec, &fc)?;
        level.prolong_add(&ec, coarse, u);
        for _ in 0..self.opts.post_smooth {
            level.sweep_color(u, f, 1);
            level.sweep_color(u, f, 0);
        }
        Ok(())
    }

    /// One V-cycle on unknown vectors, updating `x` in place.
    pub fn vcycle(&self, b: &[f64], x: &mut [f64]) -> Result<()> {
        let fine = &self.levels[0];
        self.check(b)?;
        self.check(x)?;
        let (mut u, mut f) = (vec![0.0; fine.len()], vec![0.0; fine.len()]);
        fine.scatter(x, &mut u);
        fine.scatter(b, &mut f);
        self.cycle(0, &mut u, &f)?;
        fine.gather(&u, x);
        Ok(())
    }

    fn check(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::InvalidParameter(format!(
                "vector length {} does not match {} multigrid unknowns",
                v.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// `y = (I - shift Δ_h) x`.
    pub fn apply_operator(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        self.check(x)?;
        self.check(y)?;
        let fine = &self.levels[0];
        let (mut u, mut out) = (vec![0.0; fine.len()], vec![0.0; fine.len()]);
        fine.scatter(x, &mut u);
        fine.apply(&u, &mut out);
        fine.gather(&out, y);
        Ok(())
    }

    /// Repeated V-cycles until `‖b - Ax‖/‖b‖ ≤ tol`. Work units count fine-grid sweeps.
    pub fn solve(&self, b: &[f64], x0: Option<&[f64]>, tol: f64, maxit: usize) -> Result<(Vec<f64>, SolveReport)> {
        self.iterate(b, x0, tol, maxit, false)
    }

    /// Red-black Gauss-Seidel alone, for comparison with [`Multigrid::solve`].
    pub fn smoother_solve(&self, b: &[f64], x0: Option<&[f64]>, tol: f64, maxit: usize) -> Result<(Vec<f64>, SolveReport)> {
        self.iterate(b, x0, tol, maxit, true)
    }

    fn iterate(&self, b: &[f64], x0: Option<&[f64]>, tol: f64, maxit: usize, smoother_only: bool) -> Result<(Vec<f64>, SolveReport)> {
        self.check(b)?;
        let fine = &self.levels[0];
        let n = fine.len();
        let (mut u, mut f, mut r) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        fine.scatter(b, &mut f);
        if let Some(x0) = x0 {
            self.check(x0)?;
            fine.scatter(x0, &mut u);
        }
        let mut report = SolveReport::default();
        let bnorm = super::norm2(b);
        let mut x = vec![0.0; b.len()];
        if bnorm == 0.0 {
            report.converged = true;
            report.history.push(0.0);
            return Ok((x, report));
        }
        let work_per_it = if smoother_only { 1.0 } else { self.cycle_work() };
        let mut work = 0.0;
        let res_norm = |u: &[f64], r: &mut [f64]| {
            fine.residual(u, &f, r);
            let mut s = 0.0;
            for i in 1..fine.cx {
                for j in fine.jrange() {
                    s += r[i * fine.stride + j].powi(2);
                }
            }
            s.sqrt()
        };
        let mut rel = res_norm(&u, &mut r) / bnorm;
        report.history.push(rel);
        while rel > tol && report.iterations < maxit {
            if smoother_only {
                fine.sweep_color(&mut u, &f, 0);
                fine.sweep_color(&mut u, &f, 1);
            } else {
                self.cycle(0, &mut u, &f)?;
            }
            work += work_per_it + 1.0;
            report.iterations += 1;
            rel = res_norm(&u, &mut r) / bnorm;
            if !rel.is_finite() {
                return Err(Error::SolverFailure("multigrid diverged".into()));
            }
            report.history.push(rel);
        }
        report.relative_residual = rel;
        report.converged = rel <= tol;
        report.work_units = work.ceil() as usize;
        fine.gather(&u, &mut x);
        Ok((x, report))
    }
}

impl LinearOperator for Multigrid {
    fn dim(&self) -> usize {
        Multigrid::dim(self)
    }

    /// One V-cycle from a zero initial guess.
    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        y.iter_mut().for_each(|v| *v = 0.0);
        self.vcycle(x, y)
    }

    fn is_symmetric(&self) -> bool {
        true
    }
}
