use super::{axpy, dot, norm2, LinearOperator, SolveReport};
use crate::error::{Error, Result};

fn check_dims(a: &dyn LinearOperator, b: &[f64], x0: Option<&[f64]>) -> Result<()> {
    if b.len() != a.dim() || x0.is_some_and(|x| x.len() != a.dim()) {
        return Err(Error::InvalidParameter(format!(
            "operator dimension {} does not match vector length {}",
            a.dim(),
            b.len()
        )));
    }
    Ok(())
}

/// Preconditioned conjugate gradients for symmetric positive definite `A`.
///
/// Stops when `‖b - Ax‖/‖b‖ ≤ tol`. Returns `converged = false` after
/// `maxit` iterations.
pub fn cg_solve(
    a: &dyn LinearOperator,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    maxit: usize,
    precond: Option<&dyn LinearOperator>,
) -> Result<(Vec<f64>, SolveReport)> {
    check_dims(a, b, x0)?;
    let n = b.len();
    let mut report = SolveReport::default();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        report.converged = true;
        report.history.push(0.0);
        return Ok((vec![0.0; n], report));
    }
    let mut x = x0.map_or_else(|| vec![0.0; n], |v| v.to_vec());
    let mut r = b.to_vec();
    let mut ap = vec![0.0; n];
    if x0.is_some() {
        a.apply(&x, &mut ap)?;
        report.work_units += 1;
        axpy(&mut r, -1.0, &ap);
    }
    let mut rel = norm2(&r) / bnorm;
    report.history.push(rel);
    if rel <= tol {
        report.relative_residual = rel;
        report.converged = true;
        return Ok((x, report));
    }
    let mut z = vec![0.0; n];
    let precondition = |r: &[f64], z: &mut [f64], report: &mut SolveReport| -> Result<()> {
        match precond {
            Some(m) => {
                report.preconditioner_applications += 1;
                m.apply(r, z)
            }
            None => {
                z.copy_from_slice(r);
                Ok(())
            }
        }
    };
    precondition(&r, &mut z, &mut report)?;
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=maxit {
        a.apply(&p, &mut ap)?;
        report.work_units += 1;
        let pap = dot(&p, &ap);
        if !(pap > 0.0) || !pap.is_finite() {
            return Err(Error::Breakdown(format!("CG: p'Ap = {pap:e} at iteration {it}")));
        }
        let alpha = rz / pap;
        axpy(&mut x, alpha, &p);
        axpy(&mut r, -alpha, &ap);
        rel = norm2(&r) / bnorm;
        report.history.push(rel);
        report.iterations = it;
        if rel <= tol {
            report.converged = true;
            break;
        }
        precondition(&r, &mut z, &mut report)?;
        let rz_new = dot(&r, &z);
        if rz == 0.0 {
            return Err(Error::Breakdown("CG: r'z vanished".into()));
        }
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    report.relative_residual = rel;
    Ok((x, report))
}

/// Restarted GMRES with modified Gram-Schmidt Arnoldi.
///
/// `history` holds the relative residual after every inner iteration; these
/// are the Givens estimates, which are exact in exact arithmetic. The true
/// residual is recomputed at every restart and at exit.
pub fn gmres_solve(
    a: &dyn LinearOperator,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    restart: usize,
    maxit: usize,
) -> Result<(Vec<f64>, SolveReport)> {
    check_dims(a, b, x0)?;
    if restart == 0 {
        return Err(Error::InvalidParameter("GMRES restart length must be positive".into()));
    }
    let n = b.len();
    let mut report = SolveReport::default();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        report.converged = true;
        report.history.push(0.0);
        return Ok((vec![0.0; n], report));
    }
    let mut x = x0.map_or_else(|| vec![0.0; n], |v| v.to_vec());
    let mut w = vec![0.0; n];
    let residual = |x: &[f64], w: &mut Vec<f64>, report: &mut SolveReport| -> Result<Vec<f64>> {
        let mut r = b.to_vec();
        if x.iter().any(|v| *v != 0.0) {
            a.apply(x, w)?;
            report.work_units += 1;
            axpy(&mut r, -1.0, w);
        }
        Ok(r)
    };
    let mut r = residual(&x, &mut w, &mut report)?;
    let mut beta = norm2(&r);
    report.history.push(beta / bnorm);
    while beta / bnorm > tol && report.iterations < maxit {
        let m = restart.min(maxit - report.iterations);
        let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        v.push(r.iter().map(|x| x / beta).collect());
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k = 0;
        while k < m {
            a.apply(&v[k], &mut w)?;
            report.work_units += 1;
            for i in 0..=k {
                let hik = dot(&w, &v[i]);
                h[i][k] = hik;
                axpy(&mut w, -hik, &v[i]);
            }
            let hk1 = norm2(&w);
            h[k + 1][k] = hk1;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let rho = h[k][k].hypot(h[k + 1][k]);
            if rho == 0.0 {
                return Err(Error::Breakdown("GMRES: singular Hessenberg matrix".into()));
            }
            cs[k] = h[k][k] / rho;
            sn[k] = h[k + 1][k] / rho;
            h[k][k] = rho;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k += 1;
            report.iterations += 1;
            let est = g[k].abs() / bnorm;
            report.history.push(est);
            if est <= tol || hk1 <= 1e-14 * beta {
                break;
            }
            v.push(w.iter().map(|x| x / hk1).collect());
        }
        // back substitution for the k×k upper triangle
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        for (i, yi) in y.iter().enumerate() {
            axpy(&mut x, *yi, &v[i]);
        }
        r = residual(&x, &mut w, &mut report)?;
        beta = norm2(&r);
    }
    report.relative_residual = beta / bnorm;
    report.converged = report.relative_residual <= tol;
    Ok((x, report))
}

#[cfg(test)]
mod tests {
    use super::super::{dense_matvec, dense_solve, thomas_solve, FnOperator, Identity};
    use super::*;
    use rand::{rngs::StdRng, Rng, SeedableRng};

    fn dense_op(a: Vec<Vec<f64>>) -> impl LinearOperator {
        let n = a.len();
        FnOperator::new(n, move |x: &[f64], y: &mut [f64]| {
            y.copy_from_slice(&dense_matvec(&a, x));
            Ok(())
        })
    }

    fn implicit_1d(n: usize, nt: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        // I - (Δt²/2) D+D- on N cells of [0,1], ω = 1
        let h = 1.0 / n as f64;
        let dt = 2.0 * std::f64::consts::PI / nt as f64;
        let s = 0.5 * dt * dt / (h * h);
        let m = n - 1;
        (vec![-s; m - 1], vec![1.0 + 2.0 * s; m], vec![-s; m - 1])
    }

    #[test]
    fn cg_trivial_cases() {
        let mut rng = StdRng::seed_from_u64(1);
        let b: Vec<f64> = (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (x, rep) = cg_solve(&Identity(20), &b, None, 1e-14, 10, None).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(x.iter().zip(&b).all(|(a, c)| (a - c).abs() < 1e-15));
        let (x, rep) = cg_solve(&Identity(20), &[0.0; 20], None, 1e-14, 10, None).unwrap();
        assert_eq!(rep.iterations, 0);
        assert!(x.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn cg_matches_thomas_and_decreases_energy() {
        let (lo, d, up) = implicit_1d(64, 10);
        let m = d.len();
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..m {
                y[i] = d[i] * x[i];
                if i > 0 {
                    y[i] += lo[i - 1] * x[i - 1];
                }
                if i + 1 < m {
                    y[i] += up[i] * x[i + 1];
                }
            }
        };
        let op = FnOperator::symmetric(m, |x: &[f64], y: &mut [f64]| {
            apply(x, y);
            Ok(())
        });
        let b: Vec<f64> = (0..m).map(|i| ((i * i) as f64 * 0.1).cos()).collect();
        let (x, rep) = cg_solve(&op, &b, None, 1e-14, 500, None).unwrap();
        assert!(rep.converged);
        let xt = thomas_solve(&lo, &d, &up, &b).unwrap();
        for (a, c) in x.iter().zip(&xt) {
            assert!((a - c).abs() < 1e-11);
        }
        // energy functional ½x'Ax - b'x decreases along the iterates
        let energy = |x: &[f64]| {
            let mut ax = vec![0.0; m];
            apply(x, &mut ax);
            0.5 * dot(x, &ax) - dot(&b, x)
        };
        let mut prev = f64::INFINITY;
        for k in 1..rep.iterations {
            let (xk, _) = cg_solve(&op, &b, None, 0.0, k, None).unwrap();
            let e = energy(&xk);
            assert!(e <= prev + 1e-12 * prev.abs().min(1e300));
            prev = e;
        }
    }

    #[test]
    fn cg_reports_breakdown_on_indefinite() {
        let op = dense_op(vec![vec![1.0, 0.0], vec![0.0, -1.0]]);
        assert!(matches!(cg_solve(&op, &[1.0, 1.0], None, 1e-12, 10, None), Err(Error::Breakdown(_))));
    }

    #[test]
    fn gmres_identity_and_small_nonsymmetric() {
        let b = vec![1.0, -2.0, 0.5];
        let (x, rep) = gmres_solve(&Identity(3), &b, None, 1e-14, 10, 10).unwrap();
        assert_eq!(rep.iterations, 1);
        assert_eq!(x, b);
        let a = vec![vec![2.0, 1.0, 0.0], vec![-1.0, 3.0, 1.0], vec![0.5, 0.0, 4.0]];
        let known = vec![1.0, 2.0, -1.0];
        let rhs = dense_matvec(&a, &known);
        let (x, rep) = gmres_solve(&dense_op(a), &rhs, None, 1e-14, 10, 10).unwrap();
        assert!(rep.iterations <= 3);
        for (p, q) in x.iter().zip(&known) {
            assert!((p - q).abs() < 1e-13);
        }
    }

    #[test]
    fn gmres_random_with_restarts() {
        let mut rng = StdRng::seed_from_u64(5);
        let n = 80;
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                a[i][j] = rng.gen_range(-1.0..1.0) / (n as f64).sqrt();
            }
            a[i][i] += 3.0;
        }
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let xd = dense_solve(&a, &b).unwrap();
        for restart in [5, 20, 100] {
            let (x, rep) = gmres_solve(&dense_op(a.clone()), &b, None, 1e-13, restart, 1000).unwrap();
            assert!(rep.converged, "restart {restart}");
            for (p, q) in x.iter().zip(&xd) {
                assert!((p - q).abs() < 1e-11);
            }
            // non-increasing within each cycle
            for (k, w) in rep.history.windows(2).enumerate() {
                if (k + 1) % restart != 0 {
                    assert!(w[1] <= w[0] * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn gmres_reports_stagnation() {
        // cyclic shift: GMRES makes no progress until the n-th iteration
        let n = 10;
        let op = FnOperator::new(n, move |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                y[i] = x[(i + 1) % n];
            }
            Ok(())
        });
        let mut b = vec![0.0; n];
        b[0] = 1.0;
        let (_, rep) = gmres_solve(&op, &b, None, 1e-10, 5, 20).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.iterations, 20);
        let (_, zero) = gmres_solve(&op, &[0.0; 10], None, 1e-10, 5, 20).unwrap();
        assert!(zero.converged && zero.iterations == 0);
    }
}
