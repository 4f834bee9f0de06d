//! WaveHoltz filter functions.
//!
//! The continuous filter applied to a mode with eigenvalue λ is
//!
//! ```text
//! β(λ) = sinc((ω-λ)T̄) + sinc((ω+λ)T̄) - α sinc(λT̄)
//! ```
//!
//! and its trapezoidal realization with time-step Δt replaces `sinc` by
//! `sinc_d(z) = sin(zT̄) / (T̄ tan(zΔt/2)/(Δt/2))`. With the corrected
//! constant `α_d = tan(ωΔt/2)/tan(ωΔt)` the discrete filter peaks exactly at
//! `λ = ω`. Time-stepping changes the frequency a mode actually oscillates
//! at; [`lambda_tilde_explicit`] and [`lambda_tilde_implicit`] give those maps.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};

/// How the wave equation is advanced in time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TimeStepping {
    Continuous,
    Explicit,
    Implicit,
}

impl std::fmt::Display for TimeStepping {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            TimeStepping::Continuous => "continuous",
            TimeStepping::Explicit => "explicit",
            TimeStepping::Implicit => "implicit",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for TimeStepping {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "continuous" => Ok(Self::Continuous),
            "explicit" => Ok(Self::Explicit),
            "implicit" => Ok(Self::Implicit),
            other => Err(Error::InvalidParameter(format!("unknown time-stepping mode '{other}'"))),
        }
    }
}

/// Parameters of one filter application. `omega` is the frequency that
/// drives the time-stepper (the corrected ω̃ for discrete modes).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterConfig {
    pub omega: f64,
    pub periods: usize,
    pub steps_per_period: usize,
    pub alpha: f64,
    pub mode: TimeStepping,
}

impl FilterConfig {
    pub fn new(omega: f64, periods: usize, steps_per_period: usize, alpha: f64, mode: TimeStepping) -> Result<Self> {
        if !(omega > 0.0) {
            return Err(Error::InvalidParameter(format!("omega={omega} must be positive")));
        }
        if periods == 0 || steps_per_period == 0 {
            return Err(Error::InvalidParameter("N_p and N_t must be positive".into()));
        }
        if mode == TimeStepping::Implicit && steps_per_period < 5 {
            return Err(Error::TooFewImplicitSteps(steps_per_period));
        }
        Ok(Self { omega, periods, steps_per_period, alpha, mode })
    }

    /// `T = 2π/ω`
    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }

    /// `T̄ = N_p T`
    pub fn final_time(&self) -> f64 {
        self.periods as f64 * self.period()
    }

    /// `Δt = T/N_t`
    pub fn dt(&self) -> f64 {
        self.period() / self.steps_per_period as f64
    }

    pub fn total_steps(&self) -> usize {
        self.periods * self.steps_per_period
    }

    /// Maps a spatial eigenvalue to the frequency it oscillates at under this time-stepping mode.
    pub fn effective_lambda(&self, lambda: f64) -> Result<f64> {
        match self.mode {
            TimeStepping::Continuous => Ok(lambda),
            TimeStepping::Explicit => lambda_tilde_explicit(lambda, self.dt()),
            TimeStepping::Implicit => Ok(lambda_tilde_implicit(lambda, self.dt())),
        }
    }

    /// Filter value for an already-mapped frequency `lambda_eff`.
    pub fn filter_value(&self, lambda_eff: f64) -> f64 {
        match self.mode {
            TimeStepping::Continuous => beta(lambda_eff, self.omega, self.final_time(), self.alpha),
            _ => beta_d(lambda_eff, self.omega, self.periods, self.steps_per_period, self.alpha),
        }
    }
}

pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Continuous filter function.
pub fn beta(lambda: f64, omega: f64, final_time: f64, alpha: f64) -> f64 {
    sinc((omega - lambda) * final_time) + sinc((omega + lambda) * final_time) - alpha * sinc(lambda * final_time)
}

/// Approximate sinc of the trapezoidal rule, `sin(zT)/(T tan(zΔt/2)/(Δt/2))`.
///
/// Removable singularities at `zΔt = 2mπ` are evaluated by their limit.
pub fn sinc_d(z: f64, final_time: f64, dt: f64) -> f64 {
    let theta = 0.5 * z * dt;
    let m = (theta / PI).round();
    let eps = theta - m * PI;
    let steps = final_time / dt;
    let integer_steps = (steps - steps.round()).abs() < 1e-9 * steps.max(1.0);
    if eps == 0.0 {
        // sin(zT) vanishes with tan(zΔt/2) when T is a whole number of steps
        return if integer_steps { 1.0 } else { f64::INFINITY.copysign((z * final_time).sin()) };
    }
    if integer_steps {
        let n = steps.round();
        // sin(zT) = sin(2nθ) = sin(2nε) for integer n
        (2.0 * n * eps).sin() / (2.0 * n * eps.tan())
    } else {
        (z * final_time).sin() * (0.5 * dt) / (final_time * eps.tan())
    }
}

/// Corrected filter constant `tan(ωΔt/2)/tan(ωΔt)`; requires `0 < ωΔt < π/2`.
pub fn alpha_d(omega_dt: f64) -> Result<f64> {
    if !(omega_dt > 0.0) || omega_dt >= FRAC_PI_2 {
        return Err(Error::InvalidParameter(format!(
            "alpha_d needs 0 < omega*dt < pi/2 (got {omega_dt}); use N_t >= 5"
        )));
    }
    Ok((0.5 * omega_dt).tan() / omega_dt.tan())
}

/// Closed-form discrete filter with `T̄ = periods·2π/ω` and `Δt = 2π/(ω·steps_per_period)`.
pub fn beta_d(lambda: f64, omega: f64, periods: usize, steps_per_period: usize, alpha: f64) -> f64 {
    let period = 2.0 * PI / omega;
    let final_time = periods as f64 * period;
    let dt = period / steps_per_period as f64;
    sinc_d(omega + lambda, final_time, dt) + sinc_d(omega - lambda, final_time, dt)
        - alpha * sinc_d(lambda, final_time, dt)
}

/// The discrete filter evaluated directly as a trapezoidal sum over `[0, T̄]`.
pub fn beta_d_quadrature(lambda: f64, omega: f64, periods: usize, steps_per_period: usize, alpha: f64) -> f64 {
    let period = 2.0 * PI / omega;
    let final_time = periods as f64 * period;
    let dt = period / steps_per_period as f64;
    let total = periods * steps_per_period;
    let mut sum = 0.0;
    for n in 0..=total {
        let t = n as f64 * dt;
        let sigma = if n == 0 || n == total { 0.5 } else { 1.0 };
        sum += ((omega * t).cos() - 0.5 * alpha) * (lambda * t).cos() * sigma;
    }
    2.0 / final_time * sum * dt
}

/// `λᵉ = (2/Δt) asin(λΔt/2)`; errors when `λΔt > 2` (mode unstable).
pub fn lambda_tilde_explicit(lambda: f64, dt: f64) -> Result<f64> {
    let arg = 0.5 * lambda * dt;
    if arg > 1.0 {
        return Err(Error::ExplicitUnstable { lambda, dt });
    }
    Ok(2.0 / dt * arg.asin())
}

/// `λⁱ = (1/Δt) acos(1/(1 + (λΔt)²/2))`, always in `[0, π/(2Δt))`.
pub fn lambda_tilde_implicit(lambda: f64, dt: f64) -> f64 {
    let x = lambda * dt;
    (1.0 / (1.0 + 0.5 * x * x)).acos() / dt
}

/// Predicted asymptotic convergence rate.
#[derive(Clone, Debug, PartialEq)]
pub struct RatePrediction {
    pub mu: f64,
    /// Index into the supplied eigenvalue list attaining `mu`.
    pub argmax: usize,
    /// `|β|` for every supplied eigenvalue, excluded ones included.
    pub abs_betas: Vec<f64>,
    /// Indices (not excluded) whose filter value has magnitude at least one.
    pub non_contracting: Vec<usize>,
}

impl RatePrediction {
    /// Rates of the included modes in decreasing order.
    pub fn ranked(&self, excluded: &[usize]) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .abs_betas
            .iter()
            .enumerate()
            .filter(|(i, _)| !excluded.contains(i))
            .map(|(_, b)| *b)
            .collect();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }
}

/// Relative tolerance for declaring an eigenvalue resonant with the driving frequency.
pub const RESONANCE_TOL: f64 = 1e-12;

/// `μ = max |β(λ̃_m)|` over the eigenvalues not listed in `excluded`.
pub fn predict_rate(eigenvalues: &[f64], config: &FilterConfig, excluded: &[usize]) -> Result<RatePrediction> {
    let mut abs_betas = Vec::with_capacity(eigenvalues.len());
    let mut mu = f64::NEG_INFINITY;
    let mut argmax = usize::MAX;
    let mut non_contracting = Vec::new();
    for (i, &lambda) in eigenvalues.iter().enumerate() {
        let eff = config.effective_lambda(lambda)?;
        let skip = excluded.contains(&i);
        if !skip && (eff - config.omega).abs() <= RESONANCE_TOL * config.omega {
            return Err(Error::Resonance { index: i, lambda, omega: config.omega });
        }
        let b = config.filter_value(eff).abs();
        abs_betas.push(b);
        if skip {
            continue;
        }
        if b >= 1.0 - 1e-12 {
            non_contracting.push(i);
        }
        if b > mu {
            mu = b;
            argmax = i;
        }
    }
    if argmax == usize::MAX {
        return Err(Error::InvalidParameter("no eigenvalues left to predict a rate from".into()));
    }
    Ok(RatePrediction { mu, argmax, abs_betas, non_contracting })
}
