//! Flat `key = value` experiment configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};
use waveholtz::filter::TimeStepping;
use waveholtz::grid::BoundaryCondition;
use waveholtz::timestep::ImplicitMethod;

use crate::error::CliError;

/// Spatial part of the forcing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SourceKind {
    /// Uniform random values in `[-1, 1]` from `seed`.
    Random,
    Gaussian,
    Zero,
}

impl FromStr for SourceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "random" => Ok(Self::Random),
            "gaussian" => Ok(Self::Gaussian),
            "zero" => Ok(Self::Zero),
            other => Err(format!("unknown source '{other}' (random, gaussian, zero)")),
        }
    }
}

impl std::fmt::Display for SourceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Random => "random",
            Self::Gaussian => "gaussian",
            Self::Zero => "zero",
        })
    }
}

fn bc_name(bc: BoundaryCondition) -> &'static str {
    match bc {
        BoundaryCondition::Dirichlet => "dirichlet",
        BoundaryCondition::Periodic => "periodic",
    }
}

fn parse_bc(s: &str) -> Result<BoundaryCondition, String> {
    match s.to_ascii_lowercase().as_str() {
        "dirichlet" => Ok(BoundaryCondition::Dirichlet),
        "periodic" => Ok(BoundaryCondition::Periodic),
        other => Err(format!("unknown boundary condition '{other}' (dirichlet, periodic)")),
    }
}

fn method_name(m: ImplicitMethod) -> &'static str {
    match m {
        ImplicitMethod::Auto => "auto",
        ImplicitMethod::Direct => "direct",
        ImplicitMethod::Multigrid => "multigrid",
        ImplicitMethod::Cg => "cg",
    }
}

/// Every setting an experiment can read. Unused keys are ignored by commands
/// that do not need them but still take part in the config hash.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub dim: usize,
    pub cells: usize,
    pub lo: f64,
    pub hi: f64,
    pub bc: BoundaryCondition,
    pub wave_speed: f64,
    pub omega: f64,
    pub order: usize,
    pub mode: TimeStepping,
    pub periods: usize,
    /// Implicit: steps per period. Explicit: lower bound on the CFL choice.
    pub steps_per_period: usize,
    pub source: SourceKind,
    pub source_amplitude: f64,
    pub source_width: f64,
    pub source_x: f64,
    pub source_y: f64,
    pub deflation: usize,
    pub tol: f64,
    pub gmres_tol: f64,
    pub maxit: usize,
    pub restart: usize,
    pub implicit_method: ImplicitMethod,
    pub implicit_tol: f64,
    pub sizes: Vec<usize>,
    pub baseline: bool,
    pub baseline_tol: f64,
    pub baseline_maxit: usize,
    pub max_unknowns: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_samples: usize,
    pub filter_periods: Vec<usize>,
    pub orders: Vec<usize>,
    pub n_lambda: Vec<f64>,
    pub eps: Vec<f64>,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: "converge".into(),
            dim: 1,
            cells: 32,
            lo: 0.0,
            hi: 1.0,
            bc: BoundaryCondition::Dirichlet,
            wave_speed: 1.0,
            omega: 10.5,
            order: 2,
            mode: TimeStepping::Implicit,
            periods: 1,
            steps_per_period: 10,
            source: SourceKind::Random,
            source_amplitude: -100.0,
            source_width: 20.0,
            source_x: 0.4,
            source_y: 0.4,
            deflation: 0,
            tol: 1e-10,
            gmres_tol: 1e-10,
            maxit: 2000,
            restart: 50,
            implicit_method: ImplicitMethod::Auto,
            implicit_tol: 1e-12,
            sizes: vec![128, 256, 512],
            baseline: false,
            baseline_tol: 1e-6,
            baseline_maxit: 3000,
            max_unknowns: 1 << 22,
            lambda_min: 0.0,
            lambda_max: 2.0,
            lambda_samples: 401,
            filter_periods: vec![1, 2, 3],
            orders: vec![2, 4, 6, 8],
            n_lambda: vec![10.0, 100.0, 1000.0],
            eps: vec![1e-2, 1e-1],
            seed: 1,
            out: PathBuf::from("results"),
        }
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn parse_list<T: FromStr>(key: &str, s: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<T>().map_err(|e| format!("{key}: '{t}': {e}")))
        .collect()
}

fn parse_one<T: FromStr>(key: &str, s: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    s.trim().parse::<T>().map_err(|e| format!("{key}: '{s}': {e}"))
}

impl ExperimentConfig {
    /// Recognized keys, in serialization order.
    pub const KEYS: &'static [&'static str] = &[
        "experiment",
        "dim",
        "cells",
        "lo",
        "hi",
        "bc",
        "wave_speed",
        "omega",
        "order",
        "mode",
        "periods",
        "steps_per_period",
        "source",
        "source_amplitude",
        "source_width",
        "source_x",
        "source_y",
        "deflation",
        "tol",
        "gmres_tol",
        "maxit",
        "restart",
        "implicit_method",
        "implicit_tol",
        "sizes",
        "baseline",
        "baseline_tol",
        "baseline_maxit",
        "max_unknowns",
        "lambda_min",
        "lambda_max",
        "lambda_samples",
        "filter_periods",
        "orders",
        "n_lambda",
        "eps",
        "seed",
        "out",
    ];

    /// Textual value of `key`. Floats use the shortest representation that
    /// parses back to the same bits.
    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "experiment" => self.experiment.clone(),
            "dim" => self.dim.to_string(),
            "cells" => self.cells.to_string(),
            "lo" => self.lo.to_string(),
            "hi" => self.hi.to_string(),
            "bc" => bc_name(self.bc).into(),
            "wave_speed" => self.wave_speed.to_string(),
            "omega" => self.omega.to_string(),
            "order" => self.order.to_string(),
            "mode" => self.mode.to_string(),
            "periods" => self.periods.to_string(),
            "steps_per_period" => self.steps_per_period.to_string(),
            "source" => self.source.to_string(),
            "source_amplitude" => self.source_amplitude.to_string(),
            "source_width" => self.source_width.to_string(),
            "source_x" => self.source_x.to_string(),
            "source_y" => self.source_y.to_string(),
            "deflation" => self.deflation.to_string(),
            "tol" => self.tol.to_string(),
            "gmres_tol" => self.gmres_tol.to_string(),
            "maxit" => self.maxit.to_string(),
            "restart" => self.restart.to_string(),
            "implicit_method" => method_name(self.implicit_method).into(),
            "implicit_tol" => self.implicit_tol.to_string(),
            "sizes" => join(&self.sizes),
            "baseline" => self.baseline.to_string(),
            "baseline_tol" => self.baseline_tol.to_string(),
            "baseline_maxit" => self.baseline_maxit.to_string(),
            "max_unknowns" => self.max_unknowns.to_string(),
            "lambda_min" => self.lambda_min.to_string(),
            "lambda_max" => self.lambda_max.to_string(),
            "lambda_samples" => self.lambda_samples.to_string(),
            "filter_periods" => join(&self.filter_periods),
            "orders" => join(&self.orders),
            "n_lambda" => join(&self.n_lambda),
            "eps" => join(&self.eps),
            "seed" => self.seed.to_string(),
            "out" => self.out.to_string_lossy().into_owned(),
            _ => return None,
        })
    }

    /// Sets `key` from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v = value.trim();
        let r: Result<(), String> = (|| {
            match key {
                "experiment" => self.experiment = v.to_string(),
                "dim" => self.dim = parse_one(key, v)?,
                "cells" => self.cells = parse_one(key, v)?,
                "lo" => self.lo = parse_one(key, v)?,
                "hi" => self.hi = parse_one(key, v)?,
                "bc" => self.bc = parse_bc(v)?,
                "wave_speed" => self.wave_speed = parse_one(key, v)?,
                "omega" => self.omega = parse_one(key, v)?,
                "order" => self.order = parse_one(key, v)?,
                "mode" => self.mode = v.parse().map_err(|e| format!("mode: {e}"))?,
                "periods" => self.periods = parse_one(key, v)?,
                "steps_per_period" => self.steps_per_period = parse_one(key, v)?,
                "source" => self.source = v.parse()?,
                "source_amplitude" => self.source_amplitude = parse_one(key, v)?,
                "source_width" => self.source_width = parse_one(key, v)?,
                "source_x" => self.source_x = parse_one(key, v)?,
                "source_y" => self.source_y = parse_one(key, v)?,
                "deflation" => self.deflation = parse_one(key, v)?,
                "tol" => self.tol = parse_one(key, v)?,
                "gmres_tol" => self.gmres_tol = parse_one(key, v)?,
                "maxit" => self.maxit = parse_one(key, v)?,
                "restart" => self.restart = parse_one(key, v)?,
                "implicit_method" => self.implicit_method = v.parse().map_err(|e| format!("implicit_method: {e}"))?,
                "implicit_tol" => self.implicit_tol = parse_one(key, v)?,
                "sizes" => self.sizes = parse_list(key, v)?,
                "baseline" => self.baseline = parse_one(key, v)?,
                "baseline_tol" => self.baseline_tol = parse_one(key, v)?,
                "baseline_maxit" => self.baseline_maxit = parse_one(key, v)?,
                "max_unknowns" => self.max_unknowns = parse_one(key, v)?,
                "lambda_min" => self.lambda_min = parse_one(key, v)?,
                "lambda_max" => self.lambda_max = parse_one(key, v)?,
                "lambda_samples" => self.lambda_samples = parse_one(key, v)?,
                "filter_periods" => self.filter_periods = parse_list(key, v)?,
                "orders" => self.orders = parse_list(key, v)?,
                "n_lambda" => self.n_lambda = parse_list(key, v)?,
                "eps" => self.eps = parse_list(key, v)?,
                "seed" => self.seed = parse_one(key, v)?,
                "out" => self.out = PathBuf::from(v),
                other => return Err(format!("unknown key '{other}'")),
            }
            Ok(())
        })();
        r.map_err(CliError::Config)
    }

    /// Parses the file format: one `key = value` per line, `#` comments.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    /// Applies the settings in `text` on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected 'key = value', got '{line}'", lineno + 1)))?;
            self.set(k.trim(), v).map_err(|e| CliError::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    /// Canonical serialization; [`ExperimentConfig::parse`] inverts it exactly.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for key in Self::KEYS {
            let _ = writeln!(s, "{key} = {}", self.get(key).unwrap_or_default());
        }
        s
    }

    /// SHA-256 of the canonical text without the output directory, so that the
    /// same experiment written to two places carries the same hash.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for key in Self::KEYS.iter().filter(|k| **k != "out") {
            h.update(format!("{key} = {}\n", self.get(key).unwrap_or_default()));
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Range checks shared by all commands.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if !(1..=2).contains(&self.dim) {
            return bad(format!("dim must be 1 or 2 (got {})", self.dim));
        }
        if self.cells < 4 {
            return bad(format!("cells must be at least 4 (got {})", self.cells));
        }
        if !(self.hi > self.lo) {
            return bad(format!("need hi > lo (got {} and {})", self.lo, self.hi));
        }
        if !(self.omega > 0.0) || !(self.wave_speed > 0.0) {
            return bad("omega and wave_speed must be positive".into());
        }
        if self.periods == 0 || self.restart == 0 {
            return bad("periods and restart must be positive".into());
        }
        if !(self.tol > 0.0) || !(self.gmres_tol > 0.0) || !(self.implicit_tol > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if self.lambda_samples < 2 || !(self.lambda_max > self.lambda_min) || self.lambda_min < 0.0 {
            return bad("need lambda_samples >= 2 and 0 <= lambda_min < lambda_max".into());
        }
        if self.filter_periods.is_empty() || self.filter_periods.contains(&0) {
            return bad("filter_periods must be a non-empty list of positive integers".into());
        }
        if self.mode == TimeStepping::Continuous {
            return bad("mode must be explicit or implicit".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_round_trips() {
        let c = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn comments_and_unknown_keys() {
        let c = ExperimentConfig::parse("# a comment\n\nomega = 3.5\n  order=4 \n").unwrap();
        assert_eq!(c.omega, 3.5);
        assert_eq!(c.order, 4);
        assert!(matches!(ExperimentConfig::parse("colour = red"), Err(CliError::Config(_))));
        assert!(matches!(ExperimentConfig::parse("omega 3"), Err(CliError::Config(_))));
        assert!(matches!(ExperimentConfig::parse("omega = fast"), Err(CliError::Config(_))));
    }

    #[test]
    fn hash_ignores_output_directory() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.out = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), b.hash());
        b.omega += 1.0;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    proptest! {
        #[test]
        fn arbitrary_values_round_trip(
            omega in 1e-3f64..1e3,
            lo in -10.0f64..0.0,
            tol in 1e-16f64..1e-1,
            cells in 4usize..4096,
            sizes in proptest::collection::vec(4usize..1024, 1..5),
            n_lambda in proptest::collection::vec(0.1f64..1e6, 1..4),
            implicit in any::<bool>(),
            seed in any::<u64>(),
        ) {
            let c = ExperimentConfig {
                omega, lo, tol, cells, sizes, n_lambda, seed,
                mode: if implicit { TimeStepping::Implicit } else { TimeStepping::Explicit },
                ..Default::default()
            };
            prop_assert_eq!(ExperimentConfig::parse(&c.to_text()).unwrap(), c);
        }
    }
}
