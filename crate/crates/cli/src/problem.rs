//! Turns a config into grids, forcing and solver settings.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use waveholtz::grid::{CartesianGrid, GridField};
use waveholtz::waveholtz::{gaussian_source, HelmholtzProblem, WaveHoltzConfig};

use crate::config::{ExperimentConfig, SourceKind};
use crate::error::CliError;

pub fn build_grid(cfg: &ExperimentConfig, cells: usize) -> Result<Arc<CartesianGrid>, CliError> {
    let g = CartesianGrid::uniform(cfg.dim, (cfg.lo, cfg.hi), cells, cfg.bc).map_err(|e| CliError::Config(e.to_string()))?;
    if g.num_unknowns() > cfg.max_unknowns {
        return Err(CliError::Config(format!(
            "{} unknowns exceed max_unknowns = {}",
            g.num_unknowns(),
            cfg.max_unknowns
        )));
    }
    Ok(Arc::new(g))
}

/// Forcing field; random values are drawn per unknown in storage order.
pub fn build_forcing(cfg: &ExperimentConfig, grid: &Arc<CartesianGrid>) -> Result<GridField, CliError> {
    match cfg.source {
        SourceKind::Zero => Ok(GridField::zeros(grid)),
        SourceKind::Gaussian => {
            let center = [cfg.source_x, cfg.source_y];
            gaussian_source(grid, cfg.source_amplitude, cfg.source_width, center).map_err(|e| CliError::Config(e.to_string()))
        }
        SourceKind::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let values: Vec<f64> = (0..grid.num_unknowns()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            Ok(GridField::from_unknowns(grid, &values)?)
        }
    }
}

pub fn build_problem(cfg: &ExperimentConfig, cells: usize) -> Result<HelmholtzProblem, CliError> {
    let grid = build_grid(cfg, cells)?;
    let forcing = build_forcing(cfg, &grid)?;
    HelmholtzProblem::new(grid, cfg.order, cfg.wave_speed, cfg.omega, forcing).map_err(|e| match e {
        waveholtz::Error::UnsupportedOrder(_) | waveholtz::Error::Resonance { .. } | waveholtz::Error::InvalidParameter(_) => {
            CliError::Config(e.to_string())
        }
        other => CliError::Solver(other),
    })
}

pub fn waveholtz_config(cfg: &ExperimentConfig) -> WaveHoltzConfig {
    WaveHoltzConfig {
        mode: cfg.mode,
        periods: cfg.periods,
        steps_per_period: Some(cfg.steps_per_period),
        implicit_method: cfg.implicit_method,
        implicit_tol: cfg.implicit_tol,
    }
}
