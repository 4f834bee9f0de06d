//! The named experiments. Each returns its tables; writing is left to the caller.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use waveholtz::filter::{beta, predict_rate, FilterConfig, TimeStepping};
use waveholtz::grid::{discrete_modes, CartesianGrid, GridField};
use waveholtz::linalg::{gmres_solve, FnOperator};
use waveholtz::pollution::{k_tilde, pollution_error, ppw_estimate, ppw_prefactor, ModelProblemSpec};
use waveholtz::timestep::TimeCorrection;
use waveholtz::waveholtz::{
    deflated_solve, direct_solve, fpi_solve, krylov_solve, krylov_solve_with, nearest_mode_indices, relative_max_difference,
    DeflationSet, HelmholtzProblem, WaveHoltzRun,
};

use crate::config::{ExperimentConfig, SourceKind};
use crate::error::CliError;
use crate::output::{num, Table};
use crate::problem::{build_grid, build_problem, waveholtz_config};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    FilterPlot,
    Converge,
    Scaling,
    Pollution,
    PpwTable,
}

impl Command {
    pub const ALL: [Command; 5] = [Self::FilterPlot, Self::Converge, Self::Scaling, Self::Pollution, Self::PpwTable];

    pub fn name(self) -> &'static str {
        match self {
            Self::FilterPlot => "filter-plot",
            Self::Converge => "converge",
            Self::Scaling => "scaling",
            Self::Pollution => "pollution",
            Self::PpwTable => "ppw-table",
        }
    }

    /// Defaults before any config file or flag is applied.
    pub fn defaults(self) -> ExperimentConfig {
        let mut c = ExperimentConfig { experiment: self.name().into(), ..Default::default() };
        if self == Self::Scaling {
            c.dim = 2;
            c.cells = 256;
            c.omega = 11.0;
            c.periods = 2;
            c.steps_per_period = 10;
            c.source = SourceKind::Gaussian;
            c.implicit_method = waveholtz::timestep::ImplicitMethod::Multigrid;
            c.implicit_tol = 1e-10;
            c.gmres_tol = SCALING_GMRES_TOL;
        }
        c
    }
}

impl FromStr for Command {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| CliError::Config(format!("unknown command '{s}'")))
    }
}

/// Relative GMRES tolerance used by the scaling experiment. At this value the
/// mean rate on the 256² square gives ECR ≈ 0.49 with 13 iterations.
pub const SCALING_GMRES_TOL: f64 = 1e-7;

/// Tables and human-readable summary lines of one run.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub tables: Vec<Table>,
    pub summary: Vec<String>,
}

impl Outcome {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

pub fn run(cmd: Command, cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    cfg.validate()?;
    match cmd {
        Command::FilterPlot => filter_plot(cfg),
        Command::Converge => converge(cfg),
        Command::Scaling => scaling(cfg),
        Command::Pollution => pollution(cfg),
        Command::PpwTable => Ok(Outcome { tables: vec![ppw_table(cfg)?], summary: Vec::new() }),
    }
}

fn correction(cfg: &ExperimentConfig) -> Result<TimeCorrection, CliError> {
    let r = match cfg.mode {
        TimeStepping::Implicit => TimeCorrection::implicit(cfg.omega, cfg.steps_per_period),
        _ => TimeCorrection::explicit(cfg.omega, cfg.steps_per_period),
    };
    r.map_err(|e| CliError::Config(e.to_string()))
}

fn discrete_filter(fc: &FilterConfig, lambda: f64) -> f64 {
    fc.effective_lambda(lambda).map(|l| fc.filter_value(l)).unwrap_or(f64::NAN)
}

/// Half-width, in units of ω, of the main lobe of the discrete filter at level ½.
fn half_width(fc: &FilterConfig, omega: f64) -> f64 {
    let edge = |dir: f64| -> f64 {
        let step = 0.001 * omega;
        let mut inside = omega;
        let mut outside = omega + dir * step;
        while discrete_filter(fc, outside) >= 0.5 {
            inside = outside;
            outside += dir * step;
            if outside <= 0.0 {
                return 0.0;
            }
        }
        for _ in 0..60 {
            let mid = 0.5 * (inside + outside);
            if discrete_filter(fc, mid) >= 0.5 {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        0.5 * (inside + outside)
    };
    (edge(1.0) - edge(-1.0)) / (2.0 * omega)
}

/// β and the discrete filter on a λ/ω grid, one block per N_p.
pub fn filter_plot(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let corr = correction(cfg)?;
    let omega = cfg.omega;
    let blocks: Vec<Result<Vec<Vec<String>>, CliError>> = cfg
        .filter_periods
        .par_iter()
        .map(|&np| {
            let fc = corr.filter_config(np)?;
            let t = np as f64 * 2.0 * PI / omega;
            let hw = half_width(&fc, omega);
            Ok((0..cfg.lambda_samples)
                .map(|i| {
                    let r = cfg.lambda_min + (cfg.lambda_max - cfg.lambda_min) * i as f64 / (cfg.lambda_samples - 1) as f64;
                    let lambda = r * omega;
                    let eff = fc.effective_lambda(lambda).unwrap_or(f64::NAN);
                    vec![
                        np.to_string(),
                        num(r),
                        num(beta(lambda, omega, t, 0.5)),
                        num(discrete_filter(&fc, lambda)),
                        num(eff / omega),
                        num(hw),
                    ]
                })
                .collect())
        })
        .collect();
    let mut table = Table::new("filter", &["periods", "lambda_over_omega", "beta", "beta_d", "lambda_tilde_over_omega", "half_width"]);
    let mut summary = Vec::new();
    for (np, block) in cfg.filter_periods.iter().zip(blocks) {
        let block = block?;
        summary.push(format!("N_p={np}: main-lobe half-width {}", block[0][5]));
        for row in block {
            table.push(row);
        }
    }
    Ok(Outcome { tables: vec![table], summary })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Method {
    Fpi,
    Deflated,
    Gmres,
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Self::Fpi => "fpi",
            Self::Deflated => "deflated",
            Self::Gmres => "gmres",
        }
    }
}

fn deflation_set(problem: &HelmholtzProblem, count: usize) -> Result<DeflationSet, CliError> {
    if problem.grid.is_all_dirichlet() {
        Ok(DeflationSet::nearest_sine_modes(problem, count)?)
    } else if problem.num_unknowns() <= waveholtz::linalg::EIG_DIM_LIMIT {
        Ok(DeflationSet::nearest_dense_modes(problem, count)?)
    } else {
        Err(CliError::Config("deflation on non-Dirichlet grids is limited to small problems".into()))
    }
}

/// Max-norm error left by stopping the fixed-point iteration at a successive
/// difference `tol` (2h-norm) with contraction factor `mu` on `n` unknowns.
pub fn stopping_error_bound(tol: f64, mu: f64, n: usize) -> f64 {
    tol * mu / (1.0 - mu) * (n as f64).sqrt()
}

/// FPI, deflated FPI and GMRES on one problem, with rate predictions.
pub fn converge(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let problem = build_problem(cfg, cfg.cells)?;
    let wh = waveholtz_config(cfg);
    let fc = wh.correction(&problem)?.filter_config(cfg.periods)?;
    let modes = discrete_modes(&problem.grid, cfg.order, cfg.wave_speed)?;
    let eigs: Vec<f64> = modes.iter().map(|m| m.lambda).collect();
    let excluded = nearest_mode_indices(&modes, cfg.omega, cfg.deflation);
    let mu_fpi = predict_rate(&eigs, &fc, &[])?.mu;
    let mu_deflated = predict_rate(&eigs, &fc, &excluded)?.mu;
    let mut methods = vec![Method::Fpi];
    if cfg.deflation > 0 {
        methods.push(Method::Deflated);
    }
    methods.push(Method::Gmres);
    let runs: Vec<Result<(GridField, WaveHoltzRun), CliError>> = methods
        .par_iter()
        .map(|m| match m {
            Method::Fpi => Ok(fpi_solve(&problem, &wh, cfg.tol, cfg.maxit)?),
            Method::Deflated => Ok(deflated_solve(&problem, &wh, &deflation_set(&problem, cfg.deflation)?, cfg.tol, cfg.maxit)?),
            Method::Gmres => Ok(krylov_solve(&problem, &wh, cfg.gmres_tol, cfg.restart, cfg.maxit, None)?),
        })
        .collect();
    let reference = match direct_solve(&problem) {
        Ok(u) => Some(u),
        Err(waveholtz::Error::TooLarge { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let mut residuals = Table::new("residuals", &["method", "iteration", "residual"]);
    let mut summary_table = Table::new(
        "summary",
        &[
            "method",
            "iterations",
            "converged",
            "cr",
            "ecr",
            "predicted_mu",
            "rate_rel_diff",
            "direct_rel_diff",
            "direct_bound",
            "wave_solves",
            "seconds",
        ],
    );
    let mut summary = Vec::new();
    for (m, run) in methods.iter().zip(runs) {
        let (v, run) = run?;
        for (k, r) in run.residuals.iter().enumerate() {
            residuals.push(vec![m.name().into(), (k + 1).to_string(), num(*r)]);
        }
        let predicted = match m {
            Method::Fpi => mu_fpi,
            Method::Deflated => mu_deflated,
            Method::Gmres => f64::NAN,
        };
        let cr = run.cr.unwrap_or(f64::NAN);
        let ecr = run.ecr.unwrap_or(f64::NAN);
        let rel = (cr - predicted).abs() / predicted;
        let direct = reference.as_ref().map(|u| relative_max_difference(&v, u)).unwrap_or(f64::NAN);
        let bound = match (m, &reference) {
            (Method::Gmres, _) | (_, None) => f64::NAN,
            (_, Some(u)) => {
                let floor: f64 = if *m == Method::Fpi { 1e-10 } else { 1e-8 };
                floor.max(stopping_error_bound(cfg.tol, predicted, problem.num_unknowns()) / u.max_norm())
            }
        };
        summary.push(format!(
            "{}: iterations={} converged={} CR={cr:.4} ECR={ecr:.4} predicted={predicted:.4} rel_diff={rel:.2e} direct_diff={direct:.2e}",
            m.name(),
            run.iterations,
            run.converged
        ));
        summary_table.push(vec![
            m.name().into(),
            run.iterations.to_string(),
            run.converged.to_string(),
            num(cr),
            num(ecr),
            num(predicted),
            num(rel),
            num(direct),
            num(bound),
            run.wave_solves.to_string(),
            num(run.seconds),
        ]);
    }
    Ok(Outcome { tables: vec![residuals, summary_table], summary })
}

/// Unpreconditioned GMRES on the assembled Helmholtz operator `L + ω²I`.
fn baseline_iterations(problem: &HelmholtzProblem, cfg: &ExperimentConfig) -> Result<(usize, bool), CliError> {
    let op = problem.operator()?;
    let n = problem.num_unknowns();
    let w2 = cfg.omega * cfg.omega;
    let scratch = RefCell::new(GridField::zeros(&problem.grid));
    let a = FnOperator::new(n, |x: &[f64], y: &mut [f64]| {
        op.apply_unknowns(x, y, &mut scratch.borrow_mut())?;
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi += w2 * xi;
        }
        Ok(())
    });
    // Krylov basis capped at 2^26 entries.
    let restart = cfg.baseline_maxit.min((1usize << 26) / n.max(1)).max(1);
    let b = problem.forcing.to_unknowns();
    let (_, report) = gmres_solve(&a, &b, None, cfg.baseline_tol, restart, cfg.baseline_maxit)?;
    Ok((report.iterations, report.converged))
}

/// GMRES-accelerated WaveHoltz over a list of square grids.
pub fn scaling(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    if cfg.dim != 2 {
        return Err(CliError::Config("scaling runs on 2D grids (set dim = 2)".into()));
    }
    if cfg.sizes.is_empty() {
        return Err(CliError::Config("sizes must list at least one grid size".into()));
    }
    // guard every size before spending time on any of them
    for &n in &cfg.sizes {
        build_grid(cfg, n)?;
    }
    let wh = waveholtz_config(cfg);
    let mut table = Table::new(
        "scaling",
        &[
            "cells",
            "unknowns",
            "iterations",
            "converged",
            "cr",
            "ecr",
            "cr_mean",
            "ecr_mean",
            "baseline_iterations",
            "baseline_converged",
            "seconds",
            "seconds_per_unknown",
            "normalized_time_per_unknown",
        ],
    );
    let mut summary = Vec::new();
    let mut first = None;
    // Sizes run one after another so that the timings do not compete.
    for &n in &cfg.sizes {
        let problem = build_problem(cfg, n)?;
        let start = Instant::now();
        let solver = wh.wave_solver(&problem)?;
        let (_, run) = krylov_solve_with(&problem, &solver, cfg.gmres_tol, cfg.restart, cfg.maxit, None)?;
        let seconds = start.elapsed().as_secs_f64();
        let unknowns = problem.num_unknowns();
        let per = seconds / unknowns as f64;
        let base = *first.get_or_insert(per);
        let (bi, bc) = if cfg.baseline { baseline_iterations(&problem, cfg)? } else { (0, false) };
        let cr = run.cr.unwrap_or(f64::NAN);
        let ecr = run.ecr.unwrap_or(f64::NAN);
        let (crm, ecrm) = run.mean_rate().unwrap_or((f64::NAN, f64::NAN));
        summary.push(format!(
            "{n}^2: iterations={} CR={cr:.3} ECR={ecr:.3} mean CR={crm:.3} mean ECR={ecrm:.3} time={seconds:.2}s normalized time/N={:.3}",
            run.iterations,
            per / base
        ));
        table.push(vec![
            n.to_string(),
            unknowns.to_string(),
            run.iterations.to_string(),
            run.converged.to_string(),
            num(cr),
            num(ecr),
            num(crm),
            num(ecrm),
            if cfg.baseline { bi.to_string() } else { String::new() },
            if cfg.baseline { bc.to_string() } else { String::new() },
            num(seconds),
            num(per),
            num(per / base),
        ]);
    }
    Ok(Outcome { tables: vec![table], summary })
}

pub fn ppw_table(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    let mut table = Table::new("ppw", &["order", "n_lambda", "eps", "prefactor", "ppw", "ppw_rounded"]);
    for &p in &cfg.orders {
        let pre = ppw_prefactor(p).map_err(|e| CliError::Config(e.to_string()))?;
        for &nl in &cfg.n_lambda {
            for &eps in &cfg.eps {
                let ppw = ppw_estimate(p, nl, eps).map_err(|e| CliError::Config(e.to_string()))?;
                table.push(vec![p.to_string(), num(nl), num(eps), num(pre), num(ppw), format!("{}", ppw.round())]);
            }
        }
    }
    Ok(table)
}

/// `kΔx` values of the dispersion sweep.
const DISPERSION_SWEEP: [f64; 6] = [0.8, 0.4, 0.2, 0.1, 0.05, 0.025];
/// Relative errors below this are dominated by rounding and left out.
const DISPERSION_FLOOR: f64 = 1e-13;

/// Relative wave-number error `(k̃ - k)/k` against Δx at fixed k, with local slopes.
pub fn dispersion_table(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    let k = cfg.omega;
    let mut table = Table::new("dispersion", &["order", "k", "dx", "k_tilde", "rel_error", "asymptotic", "slope"]);
    for &p in &cfg.orders {
        let mut prev: Option<(f64, f64)> = None;
        for kdx in DISPERSION_SWEEP {
            let dx = kdx / k;
            let d = k_tilde(k, dx, p).map_err(|e| CliError::Config(e.to_string()))?;
            if d.relative_error.abs() < DISPERSION_FLOOR {
                break;
            }
            let slope = prev.map(|(pdx, perr)| (d.relative_error / perr).ln() / (dx / pdx).ln()).unwrap_or(f64::NAN);
            table.push(vec![p.to_string(), num(k), num(dx), num(d.k_tilde), num(d.relative_error), num(d.asymptotic_coefficient), num(slope)]);
            prev = Some((dx, d.relative_error));
        }
    }
    Ok(table)
}

/// Largest 1D grid used by the end-to-end model-problem runs.
pub const MODEL_MAX_CELLS: usize = 1 << 21;

/// The model problem `u'' + k²u = cos(κx)` on `N_Λ + ¼` wavelengths with
/// `k = 2π`, `κ = k/2`, solved at the PPW rule's resolution. Orders the grid
/// operator does not provide get a NaN error.
pub fn model_table(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    let mut cases = Vec::new();
    for &p in &cfg.orders {
        for &nl in &cfg.n_lambda {
            for &eps in &cfg.eps {
                cases.push((p, nl, eps));
            }
        }
    }
    let rows: Vec<Result<Vec<String>, CliError>> = cases
        .par_iter()
        .map(|&(p, nl, eps)| {
            let ppw = ppw_estimate(p, nl, eps).map_err(|e| CliError::Config(e.to_string()))?;
            let k = 2.0 * PI;
            let length = nl + 0.25;
            let cells = (ppw * length).ceil() as usize;
            let predicted = pollution_error(p, k, length, length / cells as f64)?;
            // the grid operator implements p = 2 and p = 4 only
            if cells > MODEL_MAX_CELLS || p > 4 {
                return Ok(vec![p.to_string(), num(nl), num(eps), num(ppw), cells.to_string(), num(f64::NAN), num(predicted)]);
            }
            let spec = ModelProblemSpec::new(k, 0.5 * k, 0.0, length, cells, p).map_err(|e| CliError::Config(e.to_string()))?;
            let grid = std::sync::Arc::new(CartesianGrid::line(0.0, length, cells, waveholtz::grid::BoundaryCondition::Dirichlet)?);
            let forcing = GridField::sample(&grid, |x| (spec.kappa * x[0]).cos());
            let problem = HelmholtzProblem::new(grid, p, 1.0, k, forcing)?;
            let u = direct_solve(&problem)?;
            let mut values = vec![0.0; cells + 1];
            values[1..cells].copy_from_slice(&u.to_unknowns());
            let err = spec.scaled_error(&values);
            Ok(vec![p.to_string(), num(nl), num(eps), num(ppw), cells.to_string(), num(err), num(predicted)])
        })
        .collect();
    let mut table = Table::new("model", &["order", "n_lambda", "eps", "ppw", "cells", "scaled_error", "predicted_phase_error"]);
    for r in rows {
        table.push(r?);
    }
    Ok(table)
}

pub fn pollution(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let ppw = ppw_table(cfg)?;
    let dispersion = dispersion_table(cfg)?;
    let model = model_table(cfg)?;
    let mut summary = Vec::new();
    for &p in &cfg.orders {
        if let Ok(v) = ppw_estimate(p, 100.0, 1e-2) {
            summary.push(format!("PPW_{p}(N_lambda/eps = 1e4) = {v:.1}"));
        }
    }
    Ok(Outcome { tables: vec![ppw, dispersion, model], summary })
}
