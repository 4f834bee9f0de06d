//! WaveHoltz drivers: the fixed-point iteration, its deflated variant, the
//! GMRES-accelerated solve and a direct discrete Helmholtz reference solve.
//!
//! The iteration is `v⁽ᵏ⁺¹⁾ = 𝒲(v⁽ᵏ⁾, f) = S v⁽ᵏ⁾ + b` with `b = 𝒲(0, f)`.
//! Its fixed point solves `L u + ω² u = f` for the discrete operator `L`.

use std::sync::Arc;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::filter::TimeStepping;
use crate::grid::{discrete_modes, sine_mode, CartesianGrid, DiscreteMode, DiscreteOperator, GridField};
use crate::linalg::{dense_symmetric_eig, gmres_solve, BandedMatrix, FnOperator};
use crate::timestep::{correct_explicit, correct_implicit, ImplicitMethod, TimeCorrection, WaveSolver, WaveSolverOptions, IMPLICIT_TOL};

/// Relative distance below which ω is treated as a discrete eigenvalue.
pub const RESONANCE_GUARD: f64 = 1e-10;

/// `L u + ω² u = f` with homogeneous boundary data.
#[derive(Clone, Debug)]
pub struct HelmholtzProblem {
    pub grid: Arc<CartesianGrid>,
    pub order: usize,
    pub wave_speed: f64,
    pub omega: f64,
    pub forcing: GridField,
}

impl HelmholtzProblem {
    pub fn new(grid: Arc<CartesianGrid>, order: usize, wave_speed: f64, omega: f64, forcing: GridField) -> Result<Self> {
        if !(omega > 0.0) || !(wave_speed > 0.0) {
            return Err(Error::InvalidParameter("omega and wave speed must be positive".into()));
        }
        if !Arc::ptr_eq(forcing.grid(), &grid) && **forcing.grid() != *grid {
            return Err(Error::GridMismatch("forcing lives on another grid".into()));
        }
        DiscreteOperator::new(&grid, order, wave_speed)?;
        if let Ok(modes) = discrete_modes(&grid, order, wave_speed) {
            if let Some((i, m)) = modes
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1.lambda - omega).abs().total_cmp(&(b.1.lambda - omega).abs()))
            {
                if (m.lambda - omega).abs() < RESONANCE_GUARD * omega {
                    return Err(Error::Resonance { index: i, lambda: m.lambda, omega });
                }
            }
        }
        Ok(Self { grid, order, wave_speed, omega, forcing })
    }

    pub fn operator(&self) -> Result<DiscreteOperator> {
        DiscreteOperator::new(&self.grid, self.order, self.wave_speed)
    }

    pub fn num_unknowns(&self) -> usize {
        self.grid.num_unknowns()
    }
}

/// `a_g exp(-b_g |x - x₀|²)` sampled at grid points, zero on Dirichlet boundaries.
pub fn gaussian_source(grid: &Arc<CartesianGrid>, amplitude: f64, width: f64, center: [f64; 2]) -> Result<GridField> {
    for m in 0..grid.dim() {
        let a = grid.axis(m);
        if !(center[m] >= a.lo && center[m] <= a.hi) {
            return Err(Error::InvalidParameter(format!("source center {center:?} lies outside the grid")));
        }
    }
    let dim = grid.dim();
    Ok(GridField::sample(grid, |x| {
        let r2: f64 = (0..dim).map(|m| (x[m] - center[m]).powi(2)).sum();
        amplitude * (-width * r2).exp()
    }))
}

/// Time-stepping settings of a WaveHoltz solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WaveHoltzConfig {
    pub mode: TimeStepping,
    pub periods: usize,
    /// Implicit: required. Explicit: `None` picks the CFL-limited minimum,
    /// `Some(n)` uses at least `n`.
    pub steps_per_period: Option<usize>,
    pub implicit_method: ImplicitMethod,
    pub implicit_tol: f64,
}

impl WaveHoltzConfig {
    pub fn implicit(periods: usize, steps_per_period: usize) -> Self {
        Self {
            mode: TimeStepping::Implicit,
            periods,
            steps_per_period: Some(steps_per_period),
            implicit_method: ImplicitMethod::Auto,
            implicit_tol: IMPLICIT_TOL,
        }
    }

    pub fn explicit(periods: usize) -> Self {
        Self { mode: TimeStepping::Explicit, steps_per_period: None, ..Self::implicit(periods, 10) }
    }

    pub fn correction(&self, problem: &HelmholtzProblem) -> Result<TimeCorrection> {
        match self.mode {
            TimeStepping::Implicit => {
                let nt = self
                    .steps_per_period
                    .ok_or_else(|| Error::InvalidParameter("implicit stepping needs N_t".into()))?;
                correct_implicit(problem.omega, nt)
            }
            TimeStepping::Explicit => {
                let c = correct_explicit(problem.omega, &problem.grid, problem.order, problem.wave_speed)?;
                match self.steps_per_period {
                    Some(n) if n > c.steps_per_period => TimeCorrection::explicit(problem.omega, n),
                    _ => Ok(c),
                }
            }
            TimeStepping::Continuous => Err(Error::InvalidParameter("continuous mode cannot be time-stepped".into())),
        }
    }

    pub fn wave_solver(&self, problem: &HelmholtzProblem) -> Result<WaveSolver> {
        let opts = WaveSolverOptions { implicit_method: self.implicit_method, implicit_tol: self.implicit_tol, ..Default::default() };
        WaveSolver::new(problem.operator()?, self.correction(problem)?, self.periods, opts)
    }
}

/// Convergence record of one solve.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WaveHoltzRun {
    pub iterations: usize,
    /// Residual norms `‖r⁽ᵏ⁾‖₂/√N`, one per iteration.
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub periods: usize,
    pub cr: Option<f64>,
    pub ecr: Option<f64>,
    /// Filtered wave solves performed, including the one for `b` in GMRES.
    pub wave_solves: usize,
    /// GMRES: `‖b‖_{2h}`, the residual of the zero initial guess.
    pub initial_residual: Option<f64>,
    pub seconds: f64,
}

impl WaveHoltzRun {
    fn finish(&mut self, start: Instant) {
        self.seconds = start.elapsed().as_secs_f64();
        if let Ok((cr, ecr)) = measure_rate(&self.residuals, self.periods) {
            self.cr = Some(cr);
            self.ecr = Some(ecr);
        }
    }

    pub fn seconds_per_iteration(&self) -> f64 {
        self.seconds / self.iterations.max(1) as f64
    }

    /// Average reduction per iteration `(r_k/r_0)^{1/k}` and its `1/N_p` power;
    /// needs [`WaveHoltzRun::initial_residual`].
    pub fn mean_rate(&self) -> Option<(f64, f64)> {
        let r0 = self.initial_residual?;
        let rk = *self.residuals.last()?;
        if !(r0 > 0.0) || !(rk > 0.0) {
            return None;
        }
        let cr = (rk / r0).powf(1.0 / self.residuals.len() as f64);
        Some((cr, cr.powf(1.0 / self.periods.max(1) as f64)))
    }
}

/// Residual ratios averaged for the convergence rate.
pub const RATE_WINDOW: usize = 5;

/// `CR` = geometric mean of the last five residual ratios, `ECR = CR^{1/N_p}`.
pub fn measure_rate(residuals: &[f64], periods: usize) -> Result<(f64, f64)> {
    let needed = RATE_WINDOW + 1;
    if residuals.len() < needed {
        return Err(Error::InsufficientHistory { needed, have: residuals.len() });
    }
    let tail = &residuals[residuals.len() - needed..];
    if tail.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::InvalidParameter("residuals must be positive to measure a rate".into()));
    }
    let cr = (tail[RATE_WINDOW] / tail[0]).powf(1.0 / RATE_WINDOW as f64);
    Ok((cr, cr.powf(1.0 / periods.max(1) as f64)))
}

fn norm_2h(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len().max(1) as f64).sqrt()
}

/// Indices into `modes` of the `count` eigenvalues closest to ω, nearest first.
pub fn nearest_mode_indices(modes: &[DiscreteMode], omega: f64, count: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..modes.len()).collect();
    idx.sort_by(|&a, &b| (modes[a].lambda - omega).abs().total_cmp(&(modes[b].lambda - omega).abs()));
    idx.truncate(count);
    idx
}

/// Discrete eigenpairs removed from the iteration.
#[derive(Clone, Debug, Default)]
pub struct DeflationSet {
    modes: Vec<(f64, GridField)>,
}

impl DeflationSet {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds the set from eigenpairs; vectors are normalized in the discrete inner product.
    pub fn from_pairs(pairs: Vec<(f64, GridField)>) -> Result<Self> {
        let mut modes = Vec::with_capacity(pairs.len());
        for (lambda, mut phi) in pairs {
            let n = phi.inner(&phi)?.sqrt();
            if n == 0.0 {
                return Err(Error::InvalidParameter("zero deflation vector".into()));
            }
            phi.scale(1.0 / n);
            modes.push((lambda, phi));
        }
        Ok(Self { modes })
    }

    /// Analytic sine modes on a Dirichlet grid.
    pub fn from_modes(grid: &Arc<CartesianGrid>, modes: &[DiscreteMode]) -> Result<Self> {
        let pairs = modes
            .iter()
            .map(|m| Ok((m.lambda, sine_mode(grid, m.index)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_pairs(pairs)
    }

    /// The `count` analytic modes whose eigenvalues lie closest to ω.
    pub fn nearest_sine_modes(problem: &HelmholtzProblem, count: usize) -> Result<Self> {
        let all = discrete_modes(&problem.grid, problem.order, problem.wave_speed)?;
        let modes: Vec<DiscreteMode> = nearest_mode_indices(&all, problem.omega, count).into_iter().map(|i| all[i]).collect();
        Self::from_modes(&problem.grid, &modes)
    }

    /// The `count` eigenpairs closest to ω from a dense eigen-decomposition of `L`.
    pub fn nearest_dense_modes(problem: &HelmholtzProblem, count: usize) -> Result<Self> {
        let op = problem.operator()?;
        let (values, vectors) = dense_symmetric_eig(&op.assemble_dense()?)?;
        let mut pairs: Vec<(f64, Vec<f64>)> = values
            .into_iter()
            .zip(vectors)
            .map(|(mu, q)| ((-mu).max(0.0).sqrt(), q))
            .collect();
        let omega = problem.omega;
        pairs.sort_by(|a, b| (a.0 - omega).abs().total_cmp(&(b.0 - omega).abs()));
        pairs.truncate(count);
        let pairs = pairs
            .into_iter()
            .map(|(l, q)| Ok((l, GridField::from_unknowns(&problem.grid, &q)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_pairs(pairs)
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.0).collect()
    }

    /// Gram matrix in the discrete inner product.
    pub fn gram(&self) -> Result<Vec<Vec<f64>>> {
        self.modes
            .iter()
            .map(|(_, a)| self.modes.iter().map(|(_, b)| a.inner(b)).collect())
            .collect()
    }

    /// Removes the deflated components of `v`.
    pub fn project_out(&self, v: &mut GridField) -> Result<()> {
        for (_, phi) in &self.modes {
            let c = v.inner(phi)?;
            v.axpy(-c, phi)?;
        }
        Ok(())
    }

    /// Adds `Σ (f, Φ_m)/(ω² - λ_m²) Φ_m`.
    pub fn add_back(&self, v: &mut GridField, forcing: &GridField, omega: f64) -> Result<()> {
        for (i, (lambda, phi)) in self.modes.iter().enumerate() {
            let denom = omega * omega - lambda * lambda;
            if denom.abs() <= RESONANCE_GUARD * omega * omega {
                return Err(Error::Resonance { index: i, lambda: *lambda, omega });
            }
            let c = forcing.inner(phi)? / denom;
            v.axpy(c, phi)?;
        }
        Ok(())
    }
}

/// Plain WaveHoltz fixed-point iteration from `v⁽⁰⁾ = 0`, stopped when
/// `‖v⁽ᵏ⁺¹⁾ - v⁽ᵏ⁾‖_{2h} ≤ tol`.
pub fn fpi_solve(problem: &HelmholtzProblem, config: &WaveHoltzConfig, tol: f64, maxit: usize) -> Result<(GridField, WaveHoltzRun)> {
    deflated_solve(problem, config, &DeflationSet::empty(), tol, maxit)
}

/// Fixed-point iteration with the deflated modes removed after every
/// application and reinstated at the end.
pub fn deflated_solve(
    problem: &HelmholtzProblem,
    config: &WaveHoltzConfig,
    deflation: &DeflationSet,
    tol: f64,
    maxit: usize,
) -> Result<(GridField, WaveHoltzRun)> {
    let solver = config.wave_solver(problem)?;
    let start = Instant::now();
    let mut run = WaveHoltzRun { periods: config.periods, ..Default::default() };
    let mut v = GridField::zeros(&problem.grid);
    while run.iterations < maxit {
        let mut next = solver.apply(&v, &problem.forcing)?;
        run.wave_solves += 1;
        deflation.project_out(&mut next)?;
        let mut diff = next.clone();
        diff.axpy(-1.0, &v)?;
        let r = norm_2h(&diff.to_unknowns());
        v = next;
        run.iterations += 1;
        run.residuals.push(r);
        if !r.is_finite() {
            return Err(Error::SolverFailure("WaveHoltz iteration diverged".into()));
        }
        if r <= tol {
            run.converged = true;
            break;
        }
    }
    deflation.add_back(&mut v, &problem.forcing, problem.omega)?;
    run.finish(start);
    Ok((v, run))
}

/// `A v = v - 𝒲(v, 0)`.
pub fn apply_a(solver: &WaveSolver, v: &GridField) -> Result<GridField> {
    let zero = GridField::zeros(v.grid());
    let mut out = v.clone();
    out.axpy(-1.0, &solver.apply(v, &zero)?)?;
    Ok(out)
}

/// Dense `S` (columns `𝒲(e_j, 0)`) for small grids.
pub fn assemble_filter_matrix(solver: &WaveSolver) -> Result<Vec<Vec<f64>>> {
    let grid = solver.operator().grid();
    let n = grid.num_unknowns();
    let zero = GridField::zeros(grid);
    let mut s = vec![vec![0.0; n]; n];
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = solver.apply(&GridField::from_unknowns(grid, &e)?, &zero)?.to_unknowns();
        e[j] = 0.0;
        for i in 0..n {
            s[i][j] = col[i];
        }
    }
    Ok(s)
}

/// GMRES on `(I - S) v = 𝒲(0, f)`. `tol` is relative to `‖b‖`.
pub fn krylov_solve(
    problem: &HelmholtzProblem,
    config: &WaveHoltzConfig,
    tol: f64,
    restart: usize,
    maxit: usize,
    deflation: Option<&DeflationSet>,
) -> Result<(GridField, WaveHoltzRun)> {
    let solver = config.wave_solver(problem)?;
    krylov_solve_with(problem, &solver, tol, restart, maxit, deflation)
}

/// [`krylov_solve`] with a prebuilt wave solver.
pub fn krylov_solve_with(
    problem: &HelmholtzProblem,
    solver: &WaveSolver,
    tol: f64,
    restart: usize,
    maxit: usize,
    deflation: Option<&DeflationSet>,
) -> Result<(GridField, WaveHoltzRun)> {
    let grid = &problem.grid;
    let start = Instant::now();
    let empty = DeflationSet::empty();
    let deflation = deflation.unwrap_or(&empty);
    let mut run = WaveHoltzRun { periods: solver.periods(), ..Default::default() };
    let zero = GridField::zeros(grid);
    let mut b = solver.apply(&zero, &problem.forcing)?;
    run.wave_solves += 1;
    deflation.project_out(&mut b)?;
    let b = b.to_unknowns();
    let applications = std::cell::Cell::new(0usize);
    let a = FnOperator::new(b.len(), |x: &[f64], y: &mut [f64]| {
        let v = GridField::from_unknowns(grid, x)?;
        let mut w = solver.apply(&v, &zero)?;
        applications.set(applications.get() + 1);
        deflation.project_out(&mut w)?;
        for ((yi, xi), wi) in y.iter_mut().zip(x).zip(w.to_unknowns()) {
            *yi = xi - wi;
        }
        Ok(())
    });
    let (x, report) = gmres_solve(&a, &b, None, tol, restart, maxit)?;
    let bnorm = norm_2h(&b);
    run.iterations = report.iterations;
    run.residuals = report.history.iter().skip(1).map(|r| r * bnorm).collect();
    run.initial_residual = Some(bnorm);
    run.converged = report.converged;
    run.wave_solves += applications.get();
    let mut v = GridField::from_unknowns(grid, &x)?;
    deflation.add_back(&mut v, &problem.forcing, problem.omega)?;
    run.finish(start);
    Ok((v, run))
}

/// Direct solve of `(L + ω² I) u = f` by banded LU with up to two steps of
/// iterative refinement.
pub fn direct_solve(problem: &HelmholtzProblem) -> Result<GridField> {
    let op = problem.operator()?;
    let w2 = problem.omega * problem.omega;
    let mut rows = op.sparse_rows();
    for (i, row) in rows.iter_mut().enumerate() {
        match row.iter_mut().find(|e| e.0 == i) {
            Some(e) => e.1 += w2,
            None => row.push((i, w2)),
        }
    }
    let matrix = BandedMatrix::from_rows(&rows)?;
    let lu = matrix.clone().factor().map_err(|e| match e {
        Error::Singular(msg) => Error::Singular(format!("omega={} is (nearly) a discrete eigenvalue: {msg}", problem.omega)),
        other => other,
    })?;
    let f = problem.forcing.to_unknowns();
    if f.iter().all(|v| *v == 0.0) {
        return Ok(GridField::zeros(&problem.grid));
    }
    let a_norm = rows.iter().map(|r| r.iter().map(|e| e.1.abs()).sum::<f64>()).fold(0.0, f64::max);
    let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    // normwise backward error ‖r‖/(‖A‖‖x‖ + ‖f‖)
    let backward = |x: &[f64]| -> f64 {
        let r: Vec<f64> = matrix.matvec(x).iter().zip(&f).map(|(a, b)| b - a).collect();
        inf(&r) / (a_norm * inf(x) + inf(&f))
    };
    let mut x = lu.solve(&f)?;
    for _ in 0..2 {
        if backward(&x) <= 1e-15 {
            break;
        }
        let r: Vec<f64> = matrix.matvec(&x).iter().zip(&f).map(|(a, b)| b - a).collect();
        let dx = lu.solve(&r)?;
        for (xi, di) in x.iter_mut().zip(dx) {
            *xi += di;
        }
    }
    let err = backward(&x);
    if !(err <= 1e-12) {
        return Err(Error::Singular(format!(
            "direct solve backward error {err:e}; pivot ratio {:e} suggests omega is near a discrete eigenvalue",
            lu.pivot_ratio()
        )));
    }
    GridField::from_unknowns(&problem.grid, &x)
}

/// Relative max-norm difference `‖a - b‖∞ / ‖b‖∞`.
pub fn relative_max_difference(a: &GridField, b: &GridField) -> f64 {
    let d = a.points().map(|p| (a.get(p) - b.get(p)).abs()).fold(0.0, f64::max);
    let n = b.max_norm();
    if n == 0.0 {
        d
    } else {
        d / n
    }
}
