use crate::error::{Error, Result};

/// Largest matrix accepted by [`dense_symmetric_eig`].
pub const EIG_DIM_LIMIT: usize = 4096;

pub fn dense_matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| super::dot(row, x)).collect()
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns ascending eigenvalues and the matching orthonormal eigenvectors,
/// one `Vec` per eigenvalue.
pub fn dense_symmetric_eig(matrix: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = matrix.len();
    if n > EIG_DIM_LIMIT {
        return Err(Error::TooLarge { dim: n, limit: EIG_DIM_LIMIT });
    }
    if matrix.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidParameter("matrix is not square".into()));
    }
    if n == 0 {
        return Ok((vec![], vec![]));
    }
    // row-major copies; v holds eigenvectors as columns
    let mut a: Vec<f64> = matrix.iter().flatten().copied().collect();
    for i in 0..n {
        for j in 0..i {
            let m = 0.5 * (a[i * n + j] + a[j * n + i]);
            a[i * n + j] = m;
            a[j * n + i] = m;
        }
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    if scale == 0.0 {
        return Ok((vec![0.0; n], (0..n).map(|k| unit(n, k)).collect()));
    }
    let mut converged = false;
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j].powi(2))
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::NoConvergence("Jacobi eigensolver exceeded 100 sweeps".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));
    let values = order.iter().map(|&k| a[k * n + k]).collect();
    let vectors = order
        .iter()
        .map(|&k| (0..n).map(|i| v[i * n + k]).collect())
        .collect();
    Ok((values, vectors))
}

fn unit(n: usize, k: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[k] = 1.0;
    e
}

/// Gaussian elimination with partial pivoting.
pub fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let n = a.len();
    if b.len() != n || a.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidParameter("dense_solve dimension mismatch".into()));
    }
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut x = b.to_vec();
    let scale = m.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs()));
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs())).unwrap();
        if m[p][k].abs() <= 1e-14 * scale {
            return Err(Error::Singular(format!("zero pivot in column {k}")));
        }
        m.swap(k, p);
        x.swap(k, p);
        for i in k + 1..n {
            let f = m[i][k] / m[k][k];
            if f != 0.0 {
                for j in k..n {
                    m[i][j] -= f * m[k][j];
                }
                x[i] -= f * x[k];
            }
        }
    }
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| m[k][j] * x[j]).sum();
        x[k] = (x[k] - s) / m[k][k];
    }
    Ok(x)
}

/// Tridiagonal solve. `lower[i]` couples row `i+1` to `i`, `upper[i]` couples row `i` to `i+1`.
pub fn thomas_solve(lower: &[f64], diag: &[f64], upper: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if b.len() != n || lower.len() + 1 != n.max(1) || upper.len() + 1 != n.max(1) {
        return Err(Error::InvalidParameter("tridiagonal dimension mismatch".into()));
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    for i in 0..n {
        let sub = if i > 0 { lower[i - 1] } else { 0.0 };
        let prev_c = if i > 0 { c[i - 1] } else { 0.0 };
        let prev_d = if i > 0 { d[i - 1] } else { 0.0 };
        let denom = diag[i] - sub * prev_c;
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::Singular(format!("zero pivot at row {i}")));
        }
        c[i] = if i + 1 < n { upper[i] / denom } else { 0.0 };
        d[i] = (b[i] - sub * prev_d) / denom;
    }
    for i in (0..n.saturating_sub(1)).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

/// A square band matrix stored LAPACK-style, column-major, with room for the
/// fill-in created by row pivoting.
#[derive(Clone, Debug)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ld: usize,
    ab: Vec<f64>,
}

/// Entries beyond this many band values are refused.
const BAND_STORAGE_LIMIT: usize = 80_000_000;

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Result<Self> {
        let ld = 2 * kl + ku + 1;
        if n.saturating_mul(ld) > BAND_STORAGE_LIMIT {
            return Err(Error::TooLarge { dim: n * ld, limit: BAND_STORAGE_LIMIT });
        }
        Ok(Self { n, kl, ku, ld, ab: vec![0.0; n * ld] })
    }

    /// Builds the matrix from sparse rows `[(col, value)]`.
    pub fn from_rows(rows: &[Vec<(usize, f64)>]) -> Result<Self> {
        let n = rows.len();
        let (mut kl, mut ku) = (0, 0);
        for (i, row) in rows.iter().enumerate() {
            for &(j, _) in row {
                if j >= n {
                    return Err(Error::InvalidParameter(format!("column {j} out of range")));
                }
                if j < i {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
        let mut m = Self::zeros(n, kl, ku)?;
        for (i, row) in rows.iter().enumerate() {
            for &(j, v) in row {
                *m.at_mut(i, j) += v;
            }
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        self.kl + self.ku + i - j + j * self.ld
    }

    #[inline]
    fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        let k = self.idx(i, j);
        &mut self.ab[k]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i + self.ku || i > j + self.kl {
            0.0
        } else {
            self.ab[self.idx(i, j)]
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            for i in lo..=hi {
                y[i] += self.ab[self.idx(i, j)] * x[j];
            }
        }
        y
    }

    /// LU factorization with partial pivoting.
    pub fn factor(mut self) -> Result<BandedLu> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let kv = kl + ku;
        let scale = self.ab.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        let mut ipiv = vec![0usize; n];
        let mut ju = 0usize;
        let mut min_pivot = f64::INFINITY;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut p = 0;
            let mut best = 0.0;
            for i in 0..=km {
                let v = self.ab[self.idx(j + i, j)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            ipiv[j] = j + p;
            if best <= 1e-300 || best <= 1e-15 * scale {
                return Err(Error::Singular(format!("zero pivot in column {j}")));
            }
            min_pivot = min_pivot.min(best);
            ju = ju.max((j + ku + p).min(n - 1));
            if p != 0 {
                for c in j..=ju {
                    let a = self.idx(j, c);
                    let b = self.idx(j + p, c);
                    self.ab.swap(a, b);
                }
            }
            let pivot = self.ab[self.idx(j, j)];
            for i in 1..=km {
                let k = self.idx(j + i, j);
                self.ab[k] /= pivot;
            }
            for c in j + 1..=ju {
                let ajc = self.ab[self.idx(j, c)];
                if ajc == 0.0 {
                    continue;
                }
                for i in 1..=km {
                    let l = self.ab[self.idx(j + i, j)];
                    let k = self.idx(j + i, c);
                    self.ab[k] -= l * ajc;
                }
            }
        }
        let _ = kv;
        Ok(BandedLu { m: self, ipiv, pivot_ratio: min_pivot / scale.max(f64::MIN_POSITIVE) })
    }
}

/// Factored band matrix.
#[derive(Clone, Debug)]
pub struct BandedLu {
    m: BandedMatrix,
    ipiv: Vec<usize>,
    pivot_ratio: f64,
}

impl BandedLu {
    pub fn dim(&self) -> usize {
        self.m.n
    }

    /// Smallest pivot magnitude over the largest matrix entry, a cheap conditioning hint.
    pub fn pivot_ratio(&self) -> f64 {
        self.pivot_ratio
    }

    pub fn solve_in_place(&self, b: &mut [f64]) -> Result<()> {
        let m = &self.m;
        let n = m.n;
        if b.len() != n {
            return Err(Error::InvalidParameter("right-hand side length mismatch".into()));
        }
        let kv = m.kl + m.ku;
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let km = m.kl.min(n - 1 - j);
            let bj = b[j];
            if bj != 0.0 {
                for i in 1..=km {
                    b[j + i] -= m.ab[m.idx(j + i, j)] * bj;
                }
            }
        }
        for j in (0..n).rev() {
            b[j] /= m.ab[m.idx(j, j)];
            let bj = b[j];
            if bj != 0.0 {
                for i in j.saturating_sub(kv)..j {
                    b[i] -= m.ab[m.idx(i, j)] * bj;
                }
            }
        }
        Ok(())
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }
}
