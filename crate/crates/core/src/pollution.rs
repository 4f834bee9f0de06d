//! The 1D Helmholtz model problem `u'' + k² u = cos(κx)`, `u(a) = u(b) = 0`,
//! its continuous and second-order discrete closed-form solutions, discrete
//! dispersion relations and the points-per-wavelength rule of thumb.

use std::f64::consts::PI;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};

use crate::error::{Error, Result};

/// Largest μ for which [`b_coeff`] is evaluated exactly.
pub const MAX_EXACT_MU: usize = 20;

/// Leading constant of the homogeneous-solution error terms.
pub const K_H: f64 = 1.0 / 24.0;
/// Leading constant of the particular-solution error term.
pub const K_F: f64 = 1.0 / 12.0;

fn factorial(n: usize) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

/// Coefficient `b_μ = 2 (μ!)² / (2μ+2)!` of the second-derivative expansion
/// `∂² ≈ D+D- Σ b_μ (-Δx² D+D-)^μ`, as an exact rational.
pub fn b_coeff(mu: usize) -> Result<BigRational> {
    if mu > MAX_EXACT_MU {
        return Err(Error::Overflow(format!(
            "b_mu requested for mu={mu}, exact evaluation limited to mu <= {MAX_EXACT_MU}"
        )));
    }
    let f = factorial(mu);
    let num = BigInt::from(2) * &f * &f;
    Ok(BigRational::new(num, factorial(2 * mu + 2)))
}

/// Floating-point `b_μ`. Uses the exact path up to [`MAX_EXACT_MU`] and the
/// binomial form beyond.
pub fn b_coeff_f64(mu: usize) -> f64 {
    match b_coeff(mu) {
        Ok(r) => r.to_f64().unwrap_or(0.0),
        Err(_) => {
            // 2 / ((μ+1)² C(2μ+2, μ+1)) in log space
            let n = (mu + 1) as f64;
            let ln_binom = ln_gamma(2.0 * n + 1.0) - 2.0 * ln_gamma(n + 1.0);
            (2.0f64.ln() - 2.0 * n.ln() - ln_binom).exp()
        }
    }
}

// Lanczos approximation, adequate for the large-μ fallback.
fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + G + 0.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

fn check_order(order: usize) -> Result<()> {
    if order < 2 || order % 2 != 0 || order / 2 > MAX_EXACT_MU {
        return Err(Error::UnsupportedOrder(order));
    }
    Ok(())
}

/// `(π b_{p/2})^{1/p}`, the order-dependent prefactor of the PPW rule.
pub fn ppw_prefactor(order: usize) -> Result<f64> {
    check_order(order)?;
    Ok((PI * b_coeff_f64(order / 2)).powf(1.0 / order as f64))
}

/// Points per wavelength needed for relative pollution error `eps` on a domain
/// `n_lambda` wavelengths across.
pub fn ppw_estimate(order: usize, n_lambda: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0) || !(n_lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need eps > 0 and N_lambda > 0 (got {eps}, {n_lambda})"
        )));
    }
    Ok(2.0 * PI * ppw_prefactor(order)? * (n_lambda / eps).powf(1.0 / order as f64))
}

/// Leading-order relative phase error `½ b_{p/2} kL (kΔx)^p`.
pub fn pollution_error(order: usize, k: f64, length: f64, dx: f64) -> Result<f64> {
    check_order(order)?;
    Ok(0.5 * b_coeff_f64(order / 2) * k * length * (k * dx).powi(order as i32))
}

/// Discrete wave number and its asymptotic error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DispersionResult {
    pub k: f64,
    pub k_tilde: f64,
    /// `½ b_{p/2} (kΔx)^p`
    pub asymptotic_coefficient: f64,
    /// `(k̃ - k) / k`
    pub relative_error: f64,
    /// Newton iterations used (0 for the closed form).
    pub iterations: usize,
}

fn dispersion_symbol(order: usize, dx: f64, kt: f64) -> (f64, f64) {
    // value and derivative with respect to k̃ of (1/Δx²) Σ b_μ s^{μ+1}, s = 4 sin²(k̃Δx/2)
    let s = 4.0 * (0.5 * kt * dx).sin().powi(2);
    let ds = 2.0 * dx * (kt * dx).sin();
    let mut value = 0.0;
    let mut deriv = 0.0;
    for mu in 0..order / 2 {
        let b = b_coeff_f64(mu);
        value += b * s.powi(mu as i32 + 1);
        deriv += b * (mu as f64 + 1.0) * s.powi(mu as i32) * ds;
    }
    (value / (dx * dx), deriv / (dx * dx))
}

/// Solves the order-p discrete dispersion relation
/// `k² = (1/Δx²) Σ_{μ<p/2} b_μ (4 sin²(k̃Δx/2))^{μ+1}` for `k̃`.
pub fn k_tilde(k: f64, dx: f64, order: usize) -> Result<DispersionResult> {
    check_order(order)?;
    if !(k > 0.0) || !(dx > 0.0) {
        return Err(Error::InvalidParameter(format!("need k > 0 and dx > 0 (got {k}, {dx})")));
    }
    if k * dx >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "k*dx = {} outside the asymptotic regime (< 1)",
            k * dx
        )));
    }
    let coefficient = 0.5 * b_coeff_f64(order / 2) * (k * dx).powi(order as i32);
    if order == 2 {
        let kt = 2.0 / dx * (0.5 * k * dx).asin();
        return Ok(DispersionResult {
            k,
            k_tilde: kt,
            asymptotic_coefficient: coefficient,
            relative_error: (kt - k) / k,
            iterations: 0,
        });
    }
    let target = k * k;
    let mut kt = k * (1.0 + coefficient);
    for it in 1..=50 {
        let (f, df) = dispersion_symbol(order, dx, kt);
        let residual = f - target;
        let mut step = residual / df;
        // damp steps that would leave the monotone branch k̃Δx < π
        while kt - step <= 0.0 || (kt - step) * dx >= PI {
            step *= 0.5;
        }
        kt -= step;
        if step.abs() <= 1e-15 * kt {
            return Ok(DispersionResult {
                k,
                k_tilde: kt,
                asymptotic_coefficient: coefficient,
                relative_error: (kt - k) / k,
                iterations: it,
            });
        }
    }
    Err(Error::NoConvergence(format!("k_tilde for k={k}, dx={dx}, p={order}")))
}

/// Parameters of the model problem.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelProblemSpec {
    pub k: f64,
    pub kappa: f64,
    pub a: f64,
    pub b: f64,
    pub cells: usize,
    pub order: usize,
}

impl ModelProblemSpec {
    pub fn new(k: f64, kappa: f64, a: f64, b: f64, cells: usize, order: usize) -> Result<Self> {
        check_order(order)?;
        if !(k > 0.0) || !(kappa > 0.0) {
            return Err(Error::InvalidParameter(format!("need k, kappa > 0 (got {k}, {kappa})")));
        }
        if !(b > a) || cells < 4 {
            return Err(Error::InvalidParameter(format!(
                "need b > a and at least 4 cells (got [{a}, {b}], N={cells})"
            )));
        }
        if (k * k - kappa * kappa).abs() < 1e-10 * k * k {
            return Err(Error::InvalidParameter(format!("forcing is resonant: kappa={kappa} ~ k={k}")));
        }
        if (k * (b - a)).sin().abs() < 1e-10 {
            return Err(Error::InvalidParameter(format!(
                "sin(kL) = 0 for k={k}: the boundary-value problem is singular"
            )));
        }
        Ok(Self { k, kappa, a, b, cells, order })
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    pub fn dx(&self) -> f64 {
        self.length() / self.cells as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        self.a + j as f64 * self.dx()
    }

    fn particular(&self, x: f64) -> f64 {
        (self.kappa * x).cos() / (self.k * self.k - self.kappa * self.kappa)
    }

    /// Exact solution `u = u^f + u^h`.
    pub fn continuous_solution(&self, x: f64) -> f64 {
        let (k, l) = (self.k, self.length());
        let sl = (k * l).sin();
        self.particular(x)
            - self.particular(self.b) * (k * (x - self.a)).sin() / sl
            - self.particular(self.a) * (k * (self.b - x)).sin() / sl
    }

    /// Analytic `u''`.
    pub fn continuous_second_derivative(&self, x: f64) -> f64 {
        let k2 = self.k * self.k;
        let uh = self.continuous_solution(x) - self.particular(x);
        -self.kappa * self.kappa * self.particular(x) - k2 * uh
    }

    /// Scale `𝒩 = 1 / (|k² - κ²| |sin kL|)` of the homogeneous solution.
    pub fn homogeneous_scale(&self) -> f64 {
        1.0 / ((self.k * self.k - self.kappa * self.kappa).abs() * (self.k * self.length()).sin().abs())
    }

    /// `κ̃ = sin(κΔx/2)/(Δx/2)`
    pub fn kappa_tilde(&self) -> f64 {
        let h = 0.5 * self.dx();
        (self.kappa * h).sin() / h
    }

    /// Second-order `k̃` from `sin(k̃Δx/2)/(Δx/2) = k`; requires `kΔx < 2`.
    pub fn k_tilde_order2(&self) -> Result<f64> {
        let kd = self.k * self.dx();
        if kd >= 2.0 {
            return Err(Error::InvalidParameter(format!(
                "k*dx = {kd} >= 2: discrete solution is evanescent"
            )));
        }
        Ok(2.0 / self.dx() * (0.5 * kd).asin())
    }

    /// Closed-form grid values `U_j`, `j = 0..=N`, of the second-order discrete problem.
    pub fn discrete_solution_closed_form(&self) -> Result<Vec<f64>> {
        if self.order != 2 {
            return Err(Error::UnsupportedOrder(self.order));
        }
        let kt = self.k_tilde_order2()?;
        let l = self.length();
        let skl = (kt * l).sin();
        if skl.abs() < 1e-12 {
            return Err(Error::Singular(format!("sin(k_tilde L) = {skl}")));
        }
        let kap = self.kappa_tilde();
        let uf = |x: f64| (self.kappa * x).cos() / (self.k * self.k - kap * kap);
        let (uf_a, uf_b) = (uf(self.a), uf(self.b));
        Ok((0..=self.cells)
            .map(|j| {
                let x = self.x(j);
                let v = uf(x) - uf_b * (kt * (x - self.a)).sin() / skl - uf_a * (kt * (self.b - x)).sin() / skl;
                if j == 0 || j == self.cells {
                    0.0
                } else {
                    v
                }
            })
            .collect())
    }

    /// Exact relative amplitude error `𝓔_A = 𝒜 - 1` of the second-order scheme.
    pub fn amplitude_error(&self) -> Result<f64> {
        let kt = self.k_tilde_order2()?;
        let kap = self.kappa_tilde();
        let (k, l) = (self.k, self.length());
        Ok((k * k - self.kappa.powi(2)) / (k * k - kap * kap) * (k * l).sin() / (kt * l).sin() - 1.0)
    }

    /// Nearest continuous eigen-wavenumber `k_m = mπ/L` (m ≥ 1).
    pub fn nearest_eigen_wavenumber(&self) -> f64 {
        let m = (self.k * self.length() / PI).round().max(1.0);
        m * PI / self.length()
    }

    /// Leading-order bounds for the second-order scheme.
    pub fn amplitude_phase_errors(&self) -> Result<AmplitudePhaseBounds> {
        if self.order != 2 {
            return Err(Error::UnsupportedOrder(self.order));
        }
        let (k, kap, l, dx) = (self.k, self.kappa, self.length(), self.dx());
        let kd2 = (k * dx).powi(2);
        let amplitude = K_H * k * l / (k * l).tan().abs() * kd2
            + K_F / ((k / kap).powi(2) - 1.0).abs() * (kap * dx).powi(2);
        let phase = K_H * k * l * kd2;
        let km = self.nearest_eigen_wavenumber();
        let near_eigen = K_H * km / (k - km).abs() * kd2;
        let particular = K_F * kap * kap / (k * k - kap * kap).abs() * (kap * dx).powi(2);
        Ok(AmplitudePhaseBounds { amplitude, phase, near_eigen, particular })
    }

    /// `max_j |U_j - u(x_j)| / 𝒩` for a set of grid values `U`.
    pub fn scaled_error(&self, values: &[f64]) -> f64 {
        let err = values
            .iter()
            .enumerate()
            .map(|(j, u)| (u - self.continuous_solution(self.x(j))).abs())
            .fold(0.0, f64::max);
        err / self.homogeneous_scale()
    }
}

/// Leading-order error bounds of the second-order model problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AmplitudePhaseBounds {
    /// `K_h kL/|tan kL| (kΔx)² + K_f/|(k/κ)² - 1| (κΔx)²`
    pub amplitude: f64,
    /// `K_h kL (kΔx)²`
    pub phase: f64,
    /// `K_h k_m/|δk| (kΔx)²`, the amplitude error near the eigenvalue `k_m`
    pub near_eigen: f64,
    /// `K_f κ²/|k² - κ²| (κΔx)²`, the particular-solution error
    pub particular: f64,
}
