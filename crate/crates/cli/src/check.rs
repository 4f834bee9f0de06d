//! Assertions behind `--check`, evaluated on the tables a command produced.

use std::f64::consts::PI;

use waveholtz::filter::beta;
use waveholtz::pollution::{ppw_estimate, ppw_prefactor};

use crate::commands::{Command, Outcome};
use crate::config::ExperimentConfig;
use crate::output::Table;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckLine {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckLine {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.into(), passed, detail }
    }
}

impl std::fmt::Display for CheckLine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}] {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

pub fn check(cmd: Command, cfg: &ExperimentConfig, outcome: &Outcome) -> Vec<CheckLine> {
    let missing = |name: &str| vec![CheckLine::new(name, false, "table missing".into())];
    match cmd {
        Command::FilterPlot => outcome.table("filter").map(|t| check_filter(cfg, t)).unwrap_or_else(|| missing("filter")),
        Command::Converge => outcome.table("summary").map(check_converge).unwrap_or_else(|| missing("summary")),
        Command::Scaling => outcome.table("scaling").map(|t| check_scaling(cfg, t)).unwrap_or_else(|| missing("scaling")),
        Command::PpwTable => check_ppw(),
        Command::Pollution => {
            let mut lines = check_ppw();
            match outcome.table("dispersion") {
                Some(t) => lines.extend(check_dispersion(t)),
                None => lines.extend(missing("dispersion")),
            }
            lines
        }
    }
}

fn rows_for(t: &Table, np: usize) -> Vec<&Vec<String>> {
    t.rows.iter().filter(|r| r[0] == np.to_string()).collect()
}

fn cell(row: &[String], col: usize) -> f64 {
    row[col].parse().unwrap_or(f64::NAN)
}

fn check_filter(cfg: &ExperimentConfig, t: &Table) -> Vec<CheckLine> {
    let mut out = Vec::new();
    let (r, b, bd, hw) = (1, 2, 3, 5);
    let spacing = (cfg.lambda_max - cfg.lambda_min) / (cfg.lambda_samples - 1) as f64;
    let mut widths = Vec::new();
    for &np in &cfg.filter_periods {
        let rows = rows_for(t, np);
        let t_final = np as f64 * 2.0 * PI / cfg.omega;
        let at_one = beta(cfg.omega, cfg.omega, t_final, 0.5);
        out.push(CheckLine::new("beta(omega) = 1", (at_one - 1.0).abs() < 1e-12, format!("N_p={np}: {at_one:.15}")));
        if let Some(row) = rows.iter().find(|row| (cell(row, r) - 1.0).abs() < 1e-12) {
            let (v, vd) = (cell(row, b), cell(row, bd));
            out.push(CheckLine::new(
                "row at lambda = omega",
                (v - 1.0).abs() < 1e-10 && (vd - 1.0).abs() < 1e-10,
                format!("N_p={np}: beta={v} beta_d={vd}"),
            ));
        }
        let peak = rows
            .iter()
            .filter(|row| cell(row, bd).is_finite())
            .max_by(|x, y| cell(x, bd).total_cmp(&cell(y, bd)))
            .map(|row| cell(row, r))
            .unwrap_or(f64::NAN);
        out.push(CheckLine::new(
            "discrete filter peaks at lambda = omega",
            (peak - 1.0).abs() <= 0.5 * spacing + 1e-12,
            format!("N_p={np}: argmax at lambda/omega = {peak}"),
        ));
        widths.push((np, rows.first().map(|row| cell(row, hw)).unwrap_or(f64::NAN)));
    }
    widths.sort_by_key(|w| w.0);
    let narrowing = widths.windows(2).all(|w| w[1].1 < w[0].1);
    out.push(CheckLine::new("main lobe narrows with N_p", narrowing, format!("{widths:?}")));
    out
}

fn check_converge(t: &Table) -> Vec<CheckLine> {
    let mut out = Vec::new();
    let col = |name: &str| t.column(name).expect("summary column");
    let row = |m: &str| t.rows.iter().find(|r| r[0] == m);
    for r in &t.rows {
        out.push(CheckLine::new("converged", r[col("converged")] == "true", format!("{}: {} iterations", r[0], r[col("iterations")])));
    }
    for m in ["fpi", "deflated"] {
        let Some(r) = row(m) else { continue };
        let rel = cell(r, col("rate_rel_diff"));
        if rel.is_nan() {
            out.push(CheckLine::new("rate matches prediction", true, format!("{m}: too few iterations to measure, skipped")));
        } else {
            out.push(CheckLine::new("rate matches prediction", rel <= 0.05, format!("{m}: relative difference {rel:.3e}")));
        }
        let bound = cell(r, col("direct_bound"));
        let d = cell(r, col("direct_rel_diff"));
        if !d.is_nan() {
            out.push(CheckLine::new("agrees with direct solve", d <= bound, format!("{m}: {d:.3e} (bound {bound:e})")));
        }
    }
    if let (Some(f), Some(d)) = (row("fpi"), row("deflated")) {
        let (cf, cd) = (cell(f, col("cr")), cell(d, col("cr")));
        if cf.is_finite() && cd.is_finite() {
            out.push(CheckLine::new("deflation lowers the rate", cd < cf, format!("{cd:.4} vs {cf:.4}")));
        }
    }
    if let (Some(f), Some(g)) = (row("fpi"), row("gmres")) {
        let (nf, ng) = (cell(f, col("iterations")), cell(g, col("iterations")));
        out.push(CheckLine::new("GMRES needs no more iterations than FPI", ng <= nf, format!("{ng} vs {nf}")));
    }
    out
}

fn check_scaling(cfg: &ExperimentConfig, t: &Table) -> Vec<CheckLine> {
    let mut out = Vec::new();
    let its = t.values("iterations");
    let norm = t.values("normalized_time_per_unknown");
    let cells = t.values("cells");
    let converged = t.rows.iter().all(|r| r[t.column("converged").unwrap()] == "true");
    out.push(CheckLine::new("all sizes converged", converged, format!("iterations {its:?}")));
    if let Some(i) = cells.iter().position(|&c| c == 256.0) {
        out.push(CheckLine::new("about 14 iterations at 256^2", (11.0..=17.0).contains(&its[i]), format!("{}", its[i])));
    }
    let spread = its.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - its.iter().cloned().fold(f64::INFINITY, f64::min);
    out.push(CheckLine::new("iteration count varies by at most 2", spread <= 2.0, format!("spread {spread}")));
    let in_band = norm.iter().all(|v| (0.6..=1.6).contains(v));
    out.push(CheckLine::new("time per unknown within [0.6, 1.6]", in_band, format!("{norm:?}")));
    if cfg.baseline {
        let base = t.values("baseline_iterations");
        let increasing = base.windows(2).all(|w| w[1] > w[0]);
        out.push(CheckLine::new("baseline GMRES iterations grow with N", increasing, format!("{base:?}")));
    }
    out
}

/// Reference points-per-wavelength at `N_Λ/ε = 10⁴` and the rounded prefactors.
pub const PPW_REFERENCE: [(usize, f64, f64); 4] = [(2, 321.0, 0.51), (4, 27.0, 0.43), (6, 12.0, 0.42), (8, 8.0, 0.42)];

fn check_ppw() -> Vec<CheckLine> {
    PPW_REFERENCE
        .iter()
        .map(|&(p, ppw, pre)| {
            let v = ppw_estimate(p, 100.0, 1e-2).unwrap_or(f64::NAN);
            let c = ppw_prefactor(p).unwrap_or(f64::NAN);
            let ok = v.round() == ppw && (c * 100.0).round() / 100.0 == pre;
            CheckLine::new("points per wavelength", ok, format!("p={p}: PPW={v:.2} prefactor={c:.4}"))
        })
        .collect()
}

fn check_dispersion(t: &Table) -> Vec<CheckLine> {
    let mut orders: Vec<usize> = t.rows.iter().filter_map(|r| r[0].parse().ok()).collect();
    orders.dedup();
    let slope_col = t.column("slope").unwrap();
    orders
        .into_iter()
        .map(|p| {
            let slope = rows_for(t, p).last().map(|r| cell(r, slope_col)).unwrap_or(f64::NAN);
            CheckLine::new("dispersion error order", (slope - p as f64).abs() <= 0.1, format!("p={p}: slope {slope:.4}"))
        })
        .collect()
}
