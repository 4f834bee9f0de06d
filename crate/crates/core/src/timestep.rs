//! Second-order time-stepping of the forced wave equation
//! `W_tt = c²ΔW - f cos(ω̃t)` and the filtered wave solve that defines one
//! WaveHoltz application.
//!
//! Both schemes drive the forcing at a modified frequency ω̃ chosen so that
//! the time-periodic discrete solution `U cos(ω̃t)` satisfies the discrete
//! Helmholtz problem `L U + ω² U = f` at the original ω.
//!
//! Explicit:
//! ```text
//! W^{n+1} = 2Wⁿ - W^{n-1} + Δt² (L Wⁿ - f cos(ω̃tⁿ))
//! ```
//! Implicit, with `A = I - (Δt²/2) L`:
//! ```text
//! A W^{n+1} = 2Wⁿ - W^{n-1} + (Δt²/2) L W^{n-1} - Δt² f cos(ω̃tⁿ) cos(ω̃Δt)
//! ```
//! The first step of each scheme comes from setting `W^{-1} = W¹`
//! (zero initial velocity) in the `n = 0` equation:
//! ```text
//! explicit:  W¹ = W⁰ + (Δt²/2)(L W⁰ - f)
//! implicit:  A W¹ = W⁰ - (Δt²/2) f cos(ω̃Δt)
//! ```

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::filter::{alpha_d, FilterConfig, TimeStepping};
use crate::grid::{CartesianGrid, DiscreteOperator, GridField};
use crate::linalg::{cg_solve, BandedLu, BandedMatrix, FnOperator, Multigrid, MultigridOptions};

/// Stability limit `C_{2,2}` of the explicit scheme with the second-order Laplacian.
pub const CFL_LIMIT_ORDER2: f64 = 1.0;
/// Stability limit `C_{2,4} = √3/2` with the fourth-order Laplacian.
pub const CFL_LIMIT_ORDER4: f64 = 0.866_025_403_784_438_6;

pub fn cfl_limit(order: usize) -> Result<f64> {
    match order {
        2 => Ok(CFL_LIMIT_ORDER2),
        4 => Ok(CFL_LIMIT_ORDER4),
        p => Err(Error::UnsupportedOrder(p)),
    }
}

/// `c Δt sqrt(Σ 1/Δx_m²)`; the explicit scheme is stable when this is below [`cfl_limit`].
pub fn cfl_number(grid: &CartesianGrid, wave_speed: f64, dt: f64) -> f64 {
    let s: f64 = (0..grid.dim()).map(|m| grid.spacing(m).powi(-2)).sum();
    wave_speed * dt * s.sqrt()
}

/// Smallest N_t accepted by either scheme; below it `α_d` is undefined.
pub const MIN_STEPS_PER_PERIOD: usize = 5;

/// Time-step and modified driving frequency for one time-stepping mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeCorrection {
    pub mode: TimeStepping,
    /// Target Helmholtz frequency ω.
    pub omega: f64,
    /// Driving frequency ω̃ used by the stepper and the filter.
    pub omega_tilde: f64,
    pub dt: f64,
    pub steps_per_period: usize,
}

impl TimeCorrection {
    /// Explicit correction with a prescribed number of steps per period.
    pub fn explicit(omega: f64, steps_per_period: usize) -> Result<Self> {
        check_omega(omega)?;
        if steps_per_period < MIN_STEPS_PER_PERIOD {
            return Err(Error::InvalidParameter(format!(
                "N_t={steps_per_period}: need at least {MIN_STEPS_PER_PERIOD} steps per period"
            )));
        }
        let nt = steps_per_period as f64;
        let dt = 2.0 / omega * (PI / nt).sin();
        Ok(Self { mode: TimeStepping::Explicit, omega, omega_tilde: 2.0 * PI / (nt * dt), dt, steps_per_period })
    }

    /// Implicit correction; `N_t ≥ 5`.
    pub fn implicit(omega: f64, steps_per_period: usize) -> Result<Self> {
        check_omega(omega)?;
        if steps_per_period < MIN_STEPS_PER_PERIOD {
            return Err(Error::TooFewImplicitSteps(steps_per_period));
        }
        let nt = steps_per_period as f64;
        // sqrt(2/cos(2π/N_t) - 2) without the cancellation for large N_t
        let dt = 2.0 * (PI / nt).sin() / (omega * (2.0 * PI / nt).cos().sqrt());
        Ok(Self { mode: TimeStepping::Implicit, omega, omega_tilde: 2.0 * PI / (nt * dt), dt, steps_per_period })
    }

    /// `T̃ = 2π/ω̃ = N_t Δt`
    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega_tilde
    }

    pub fn alpha(&self) -> Result<f64> {
        alpha_d(self.omega_tilde * self.dt)
    }

    /// Filter seen by the discrete iteration with `periods` periods and `α = α_d`.
    pub fn filter_config(&self, periods: usize) -> Result<FilterConfig> {
        FilterConfig::new(self.omega_tilde, periods, self.steps_per_period, self.alpha()?, self.mode)
    }
}

fn check_omega(omega: f64) -> Result<()> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::InvalidParameter(format!("omega={omega} must be positive")));
    }
    Ok(())
}

/// Explicit correction with the fewest steps per period that satisfy the CFL bound.
pub fn correct_explicit(omega: f64, grid: &CartesianGrid, order: usize, wave_speed: f64) -> Result<TimeCorrection> {
    check_omega(omega)?;
    let limit = cfl_limit(order)?;
    let mut nt = MIN_STEPS_PER_PERIOD;
    // jump close to the answer, then walk
    let dt_max = limit / cfl_number(grid, wave_speed, 1.0);
    let estimate = (2.0 * PI / (omega * dt_max)).floor() as usize;
    nt = nt.max(estimate.saturating_sub(2));
    loop {
        let corr = TimeCorrection::explicit(omega, nt)?;
        if cfl_number(grid, wave_speed, corr.dt) < limit {
            return Ok(corr);
        }
        nt += 1;
    }
}

/// Implicit correction; errors for `N_t ≤ 4`.
pub fn correct_implicit(omega: f64, steps_per_period: usize) -> Result<TimeCorrection> {
    TimeCorrection::implicit(omega, steps_per_period)
}

/// Fields carried between time-steps.
#[derive(Clone, Debug)]
pub struct WaveState {
    pub current: GridField,
    pub previous: GridField,
    pub step: usize,
    pub time: f64,
    /// Running trapezoidal filter sum.
    pub accumulator: GridField,
}

impl WaveState {
    /// State at `t = 0` with `W⁰ = v` and zero initial velocity.
    pub fn new(v: &GridField) -> Self {
        Self {
            current: v.clone(),
            previous: v.clone(),
            step: 0,
            time: 0.0,
            accumulator: GridField::zeros(v.grid()),
        }
    }
}

/// How the implicit systems `(I - (Δt²/2) L) x = b` are solved.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ImplicitMethod {
    /// Banded LU for 1D and small 2D grids, multigrid otherwise.
    #[default]
    Auto,
    /// Banded LU factored once.
    Direct,
    /// Multigrid V-cycles (p = 2) or multigrid-preconditioned CG (p = 4).
    Multigrid,
    /// Unpreconditioned CG.
    Cg,
}

impl std::str::FromStr for ImplicitMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "auto" => Ok(Self::Auto),
            "direct" => Ok(Self::Direct),
            "multigrid" | "mg" => Ok(Self::Multigrid),
            "cg" => Ok(Self::Cg),
            other => Err(Error::InvalidParameter(format!("unknown implicit solver '{other}'"))),
        }
    }
}

/// 2D grids with at most this many unknowns are factored directly under [`ImplicitMethod::Auto`].
pub const AUTO_DIRECT_LIMIT_2D: usize = 5000;

/// Default relative residual for iterative implicit solves.
pub const IMPLICIT_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
enum SolverKind {
    Direct(BandedLu),
    Multigrid(Multigrid),
    PcgMultigrid(Multigrid),
    Cg,
}

/// Solver for `(I - s L) x = b` with `s = Δt²/2`.
#[derive(Clone, Debug)]
pub struct ImplicitSolver {
    shift: f64,
    kind: SolverKind,
    tol: f64,
    max_iterations: usize,
}

impl ImplicitSolver {
    pub fn new(op: &DiscreteOperator, dt: f64, method: ImplicitMethod, tol: f64) -> Result<Self> {
        let grid = op.grid();
        let shift = 0.5 * dt * dt;
        let method = match method {
            ImplicitMethod::Auto if grid.dim() == 1 || grid.num_unknowns() <= AUTO_DIRECT_LIMIT_2D => ImplicitMethod::Direct,
            ImplicitMethod::Auto if grid.is_all_dirichlet() => ImplicitMethod::Multigrid,
            ImplicitMethod::Auto => ImplicitMethod::Cg,
            m => m,
        };
        let kind = match method {
            ImplicitMethod::Direct => {
                let mut rows = op.sparse_rows();
                for (i, row) in rows.iter_mut().enumerate() {
                    for e in row.iter_mut() {
                        e.1 *= -shift;
                    }
                    match row.iter_mut().find(|e| e.0 == i) {
                        Some(e) => e.1 += 1.0,
                        None => row.push((i, 1.0)),
                    }
                }
                SolverKind::Direct(BandedMatrix::from_rows(&rows)?.factor()?)
            }
            ImplicitMethod::Multigrid => {
                let c2 = op.wave_speed().powi(2);
                let mg = Multigrid::new(grid, shift * c2, MultigridOptions::default())?;
                if op.order() == 2 {
                    SolverKind::Multigrid(mg)
                } else {
                    SolverKind::PcgMultigrid(mg)
                }
            }
            _ => SolverKind::Cg,
        };
        Ok(Self { shift, kind, tol, max_iterations: 500 })
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Solves for the unknown vector, starting iterative methods from `guess`.
    pub fn solve(&self, op: &DiscreteOperator, rhs: &[f64], guess: &[f64]) -> Result<Vec<f64>> {
        let report = match &self.kind {
            SolverKind::Direct(lu) => return lu.solve(rhs),
            SolverKind::Multigrid(mg) => {
                let (x, rep) = mg.solve(rhs, Some(guess), self.tol, self.max_iterations)?;
                if rep.converged {
                    return Ok(x);
                }
                rep
            }
            SolverKind::PcgMultigrid(mg) => {
                let a = self.system(op);
                let (x, rep) = cg_solve(&a, rhs, Some(guess), self.tol, self.max_iterations, Some(mg))?;
                if rep.converged {
                    return Ok(x);
                }
                rep
            }
            SolverKind::Cg => {
                let a = self.system(op);
                let (x, rep) = cg_solve(&a, rhs, Some(guess), self.tol, 20 * rhs.len().max(100), None)?;
                if rep.converged {
                    return Ok(x);
                }
                rep
            }
        };
        Err(Error::SolverFailure(format!(
            "implicit solve stalled at relative residual {:e} after {} iterations",
            report.relative_residual, report.iterations
        )))
    }

    fn system<'a>(&'a self, op: &'a DiscreteOperator) -> impl crate::linalg::LinearOperator + 'a {
        let n = op.grid().num_unknowns();
        let shift = self.shift;
        FnOperator::symmetric(n, move |x: &[f64], y: &mut [f64]| {
            let mut scratch = GridField::zeros(op.grid());
            op.apply_unknowns(x, y, &mut scratch)?;
            for (yi, xi) in y.iter_mut().zip(x) {
                *yi = xi - shift * *yi;
            }
            Ok(())
        })
    }
}

fn refreshed(field: &mut GridField) -> &GridField {
    if !field.ghosts_fresh() {
        field.refresh_ghosts();
    }
    field
}

fn advance(state: &mut WaveState, next: GridField, dt: f64) {
    state.previous = std::mem::replace(&mut state.current, next);
    state.step += 1;
    state.time = state.step as f64 * dt;
}

/// One explicit step. The first step uses the zero-velocity start.
pub fn step_explicit(state: &mut WaveState, op: &DiscreteOperator, forcing: &GridField, corr: &TimeCorrection) -> Result<()> {
    let dt = corr.dt;
    let dt2 = dt * dt;
    let lw = op.apply(refreshed(&mut state.current))?;
    let mut next = state.current.clone();
    let w = state.current.raw();
    let wp = state.previous.raw();
    let (l, f) = (lw.raw(), forcing.raw());
    let out = next.raw_mut();
    if state.step == 0 {
        for k in 0..out.len() {
            out[k] = w[k] + 0.5 * dt2 * (l[k] - f[k]);
        }
    } else {
        let cf = (corr.omega_tilde * state.time).cos();
        for k in 0..out.len() {
            out[k] = 2.0 * w[k] - wp[k] + dt2 * (l[k] - f[k] * cf);
        }
    }
    advance(state, next, dt);
    Ok(())
}

/// First-step variants. The explicit start inside the implicit scheme is kept
/// only to show that it breaks the scheme's eigen-action.
#[doc(hidden)]
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum FirstStep {
    #[default]
    Consistent,
    ExplicitStart,
}

/// One implicit step; the first step is implicit too.
pub fn step_implicit(
    state: &mut WaveState,
    op: &DiscreteOperator,
    forcing: &GridField,
    corr: &TimeCorrection,
    solver: &ImplicitSolver,
) -> Result<()> {
    step_implicit_with(state, op, forcing, corr, solver, FirstStep::Consistent)
}

#[doc(hidden)]
pub fn step_implicit_with(
    state: &mut WaveState,
    op: &DiscreteOperator,
    forcing: &GridField,
    corr: &TimeCorrection,
    solver: &ImplicitSolver,
    first: FirstStep,
) -> Result<()> {
    let dt = corr.dt;
    let dt2 = dt * dt;
    let s = 0.5 * dt2;
    let grid = Arc::clone(op.grid());
    let cos_dt = (corr.omega_tilde * dt).cos();
    if state.step == 0 {
        if first == FirstStep::ExplicitStart {
            return step_explicit(state, op, forcing, corr);
        }
        let mut rhs = state.current.clone();
        rhs.axpy(-s * cos_dt, forcing)?;
        let b = rhs.to_unknowns();
        let x = solver.solve(op, &b, &state.current.to_unknowns())?;
        advance(state, GridField::from_unknowns(&grid, &x)?, dt);
        return Ok(());
    }
    let lwp = op.apply(refreshed(&mut state.previous))?;
    let cf = (corr.omega_tilde * state.time).cos() * cos_dt;
    let mut rhs = GridField::zeros(&grid);
    let mut guess = GridField::zeros(&grid);
    {
        let (w, wp, l, f) = (state.current.raw(), state.previous.raw(), lwp.raw(), forcing.raw());
        let g = guess.raw_mut();
        for k in 0..g.len() {
            g[k] = 2.0 * w[k] - wp[k];
        }
        let r = rhs.raw_mut();
        for k in 0..r.len() {
            r[k] = g[k] + s * l[k] - dt2 * cf * f[k];
        }
    }
    let x = solver.solve(op, &rhs.to_unknowns(), &guess.to_unknowns())?;
    advance(state, GridField::from_unknowns(&grid, &x)?, dt);
    Ok(())
}

/// Options for [`WaveSolver`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WaveSolverOptions {
    pub implicit_method: ImplicitMethod,
    pub implicit_tol: f64,
    #[doc(hidden)]
    pub first_step: FirstStep,
}

impl Default for WaveSolverOptions {
    fn default() -> Self {
        Self { implicit_method: ImplicitMethod::Auto, implicit_tol: IMPLICIT_TOL, first_step: FirstStep::Consistent }
    }
}

/// Everything needed to apply the WaveHoltz map `𝒲(v, f)` repeatedly.
#[derive(Clone, Debug)]
pub struct WaveSolver {
    op: DiscreteOperator,
    corr: TimeCorrection,
    periods: usize,
    alpha: f64,
    implicit: Option<ImplicitSolver>,
    first_step: FirstStep,
}

impl WaveSolver {
    pub fn new(op: DiscreteOperator, corr: TimeCorrection, periods: usize, opts: WaveSolverOptions) -> Result<Self> {
        if periods == 0 {
            return Err(Error::InvalidParameter("N_p must be positive".into()));
        }
        let alpha = corr.alpha()?;
        let implicit = match corr.mode {
            TimeStepping::Implicit => Some(ImplicitSolver::new(&op, corr.dt, opts.implicit_method, opts.implicit_tol)?),
            TimeStepping::Explicit => None,
            TimeStepping::Continuous => {
                return Err(Error::InvalidParameter("a time correction must be explicit or implicit".into()))
            }
        };
        Ok(Self { op, corr, periods, alpha, implicit, first_step: opts.first_step })
    }

    pub fn operator(&self) -> &DiscreteOperator {
        &self.op
    }

    pub fn correction(&self) -> &TimeCorrection {
        &self.corr
    }

    pub fn periods(&self) -> usize {
        self.periods
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn filter_config(&self) -> Result<FilterConfig> {
        self.corr.filter_config(self.periods)
    }

    pub fn total_steps(&self) -> usize {
        self.periods * self.corr.steps_per_period
    }

    pub fn step(&self, state: &mut WaveState, forcing: &GridField) -> Result<()> {
        match &self.implicit {
            Some(solver) => step_implicit_with(state, &self.op, forcing, &self.corr, solver, self.first_step),
            None => step_explicit(state, &self.op, forcing, &self.corr),
        }
    }

    /// One application of `𝒲(v, f)`.
    pub fn apply(&self, v: &GridField, forcing: &GridField) -> Result<GridField> {
        wave_solve_filtered(v, forcing, self)
    }
}

/// Runs `N_p N_t` steps from `W⁰ = v` and returns the filtered field
/// `(2/T̄) Σ σ_n (cos(ω̃tⁿ) - α/2) Wⁿ Δt`.
pub fn wave_solve_filtered(v: &GridField, forcing: &GridField, solver: &WaveSolver) -> Result<GridField> {
    let grid = solver.op.grid();
    if !Arc::ptr_eq(v.grid(), grid) && **v.grid() != **grid {
        return Err(Error::GridMismatch("initial field and operator grids differ".into()));
    }
    let corr = &solver.corr;
    let total = solver.total_steps();
    let final_time = solver.periods as f64 * corr.period();
    let scale = 2.0 / final_time * corr.dt;
    let weight = |n: usize, t: f64| {
        let sigma = if n == 0 || n == total { 0.5 } else { 1.0 };
        scale * sigma * ((corr.omega_tilde * t).cos() - 0.5 * solver.alpha)
    };
    let mut state = WaveState::new(v);
    state.accumulator.axpy(weight(0, 0.0), &state.current)?;
    for _ in 0..total {
        solver.step(&mut state, forcing)?;
        let w = weight(state.step, state.time);
        state.accumulator.axpy(w, &state.current)?;
    }
    Ok(state.accumulator)
}
