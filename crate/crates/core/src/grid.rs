//! Cartesian grids in one and two dimensions, grid fields with ghost layers,
//! and the order-p discrete Laplacian `c² Δ_h`.
//!
//! Field storage always includes the physical boundary points of Dirichlet
//! axes plus a ghost layer of width [`GHOST_WIDTH`] on every side. For a
//! periodic axis with `N` cells only the points `0..N` are stored; point `N`
//! is identified with point `0`.
//!
//! Homogeneous Dirichlet ghosts are filled by odd reflection about the
//! boundary point, `u(-j) = -u(j)`, which keeps the operator symmetric and
//! the discrete sines exact eigenvectors for both p = 2 and p = 4.

use std::f64::consts::PI;
use std::ops::Range;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::pollution::b_coeff_f64;

/// Width of the ghost layer stored around every field.
pub const GHOST_WIDTH: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryCondition {
    Dirichlet,
    Periodic,
}

/// One coordinate direction of a Cartesian grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
    /// Conditions on the low and high faces.
    pub bc: [BoundaryCondition; 2],
}

impl Axis {
    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / self.cells as f64
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_periodic(&self) -> bool {
        self.bc[0] == BoundaryCondition::Periodic
    }

    /// Number of stored (non-ghost) points along this axis.
    pub fn points(&self) -> usize {
        if self.is_periodic() {
            self.cells
        } else {
            self.cells + 1
        }
    }

    /// Indices of points where the interior equation is applied.
    pub fn interior(&self) -> Range<usize> {
        if self.is_periodic() {
            0..self.cells
        } else {
            1..self.cells
        }
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.spacing()
    }
}

/// Axis-aligned grid on an interval or a rectangle.
#[derive(Clone, Debug, PartialEq)]
pub struct CartesianGrid {
    axes: Vec<Axis>,
}

impl CartesianGrid {
    /// Builds a grid from per-axis bounds, cell counts and face conditions.
    pub fn new(
        bounds: &[(f64, f64)],
        cells: &[usize],
        bcs: &[[BoundaryCondition; 2]],
    ) -> Result<Self> {
        let dim = bounds.len();
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in {{1,2}}")));
        }
        if cells.len() != dim || bcs.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "expected {dim} cell counts and boundary pairs, got {} and {}",
                cells.len(),
                bcs.len()
            )));
        }
        let mut axes = Vec::with_capacity(dim);
        for m in 0..dim {
            let (lo, hi) = bounds[m];
            if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
                return Err(Error::InvalidGrid(format!(
                    "axis {m}: bounds [{lo}, {hi}] are not a nonempty interval"
                )));
            }
            if cells[m] < 4 {
                return Err(Error::InvalidGrid(format!(
                    "axis {m}: {} cells, need at least 4 for the stencil",
                    cells[m]
                )));
            }
            let [low, high] = bcs[m];
            if (low == BoundaryCondition::Periodic) != (high == BoundaryCondition::Periodic) {
                return Err(Error::InvalidGrid(format!(
                    "axis {m}: periodic faces must come in pairs"
                )));
            }
            axes.push(Axis { lo, hi, cells: cells[m], bc: bcs[m] });
        }
        Ok(Self { axes })
    }

    /// Grid with the same interval, cell count and boundary condition on every axis.
    pub fn uniform(dim: usize, bounds: (f64, f64), cells: usize, bc: BoundaryCondition) -> Result<Self> {
        Self::new(&vec![bounds; dim], &vec![cells; dim], &vec![[bc, bc]; dim])
    }

    pub fn line(lo: f64, hi: f64, cells: usize, bc: BoundaryCondition) -> Result<Self> {
        Self::uniform(1, (lo, hi), cells, bc)
    }

    pub fn unit_square(cells: usize) -> Result<Self> {
        Self::uniform(2, (0.0, 1.0), cells, BoundaryCondition::Dirichlet)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axis(&self, m: usize) -> &Axis {
        &self.axes[m]
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn spacing(&self, m: usize) -> f64 {
        self.axes[m].spacing()
    }

    /// Product of the spacings; the weight of the discrete inner product.
    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(Axis::spacing).product()
    }

    /// Stored points per axis, padded to two entries (1 for an absent axis).
    pub fn point_counts(&self) -> [usize; 2] {
        [self.axes[0].points(), self.axes.get(1).map_or(1, Axis::points)]
    }

    pub fn interior_ranges(&self) -> [Range<usize>; 2] {
        [self.axes[0].interior(), self.axes.get(1).map_or(0..1, Axis::interior)]
    }

    pub fn num_points(&self) -> usize {
        let [nx, ny] = self.point_counts();
        nx * ny
    }

    /// Number of points where the interior equation holds (the unknowns).
    pub fn num_unknowns(&self) -> usize {
        let [rx, ry] = self.interior_ranges();
        rx.len() * ry.len()
    }

    pub fn is_all_dirichlet(&self) -> bool {
        self.axes.iter().all(|a| !a.is_periodic())
    }

    pub fn is_all_periodic(&self) -> bool {
        self.axes.iter().all(Axis::is_periodic)
    }

    /// Physical coordinates of point `idx` (second entry ignored in 1D).
    pub fn coordinates(&self, idx: [usize; 2]) -> [f64; 2] {
        let x = self.axes[0].coordinate(idx[0]);
        let y = self.axes.get(1).map_or(0.0, |a| a.coordinate(idx[1]));
        [x, y]
    }

    /// Grid with every axis coarsened by a factor of two, if the cell counts allow it.
    pub fn coarsened(&self) -> Option<Self> {
        if self.axes.iter().any(|a| a.cells % 2 != 0 || a.cells / 2 < 4) {
            return None;
        }
        let axes = self
            .axes
            .iter()
            .map(|a| Axis { cells: a.cells / 2, ..a.clone() })
            .collect();
        Some(Self { axes })
    }
}

fn same_grid(a: &Arc<CartesianGrid>, b: &Arc<CartesianGrid>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

/// Real values at every grid point plus a ghost layer.
#[derive(Clone, Debug)]
pub struct GridField {
    grid: Arc<CartesianGrid>,
    data: Vec<f64>,
    /// Padded extents (x, y).
    extents: [usize; 2],
    /// Ghost widths (x, y); the y width is zero in 1D.
    ghosts: [usize; 2],
    generation: u64,
    ghost_generation: Option<u64>,
}

impl PartialEq for GridField {
    fn eq(&self, other: &Self) -> bool {
        same_grid(&self.grid, &other.grid)
            && self.points().all(|p| self.get(p) == other.get(p))
    }
}

impl GridField {
    pub fn zeros(grid: &Arc<CartesianGrid>) -> Self {
        let [nx, ny] = grid.point_counts();
        let gy = if grid.dim() == 2 { GHOST_WIDTH } else { 0 };
        let extents = [nx + 2 * GHOST_WIDTH, ny + 2 * gy];
        Self {
            grid: Arc::clone(grid),
            data: vec![0.0; extents[0] * extents[1]],
            extents,
            ghosts: [GHOST_WIDTH, gy],
            generation: 0,
            ghost_generation: None,
        }
    }

    /// Samples `f` at every stored point; Dirichlet boundary points are set to zero.
    pub fn sample(grid: &Arc<CartesianGrid>, f: impl Fn([f64; 2]) -> f64) -> Self {
        let mut field = Self::zeros(grid);
        for idx in field.grid.clone().interior_points() {
            let v = f(grid.coordinates(idx));
            field.set(idx, v);
        }
        field
    }

    /// Builds a field from a vector of interior unknowns (see [`GridField::to_unknowns`]).
    pub fn from_unknowns(grid: &Arc<CartesianGrid>, values: &[f64]) -> Result<Self> {
        let mut field = Self::zeros(grid);
        field.set_unknowns(values)?;
        Ok(field)
    }

    pub fn grid(&self) -> &Arc<CartesianGrid> {
        &self.grid
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn ghosts_fresh(&self) -> bool {
        self.ghost_generation == Some(self.generation)
    }

    #[inline]
    fn offset(&self, i: isize, j: isize) -> usize {
        let x = (i + self.ghosts[0] as isize) as usize;
        let y = (j + self.ghosts[1] as isize) as usize;
        x * self.extents[1] + y
    }

    #[inline]
    pub fn get(&self, idx: [usize; 2]) -> f64 {
        self.data[self.offset(idx[0] as isize, idx[1] as isize)]
    }

    /// Value at a possibly-ghost index.
    #[inline]
    pub fn get_padded(&self, i: isize, j: isize) -> f64 {
        self.data[self.offset(i, j)]
    }

    #[inline]
    pub fn set(&mut self, idx: [usize; 2], value: f64) {
        let o = self.offset(idx[0] as isize, idx[1] as isize);
        self.data[o] = value;
        self.generation += 1;
    }

    /// All stored (non-ghost) point indices, x-major.
    pub fn points(&self) -> impl Iterator<Item = [usize; 2]> {
        let [nx, ny] = self.grid.point_counts();
        (0..nx).flat_map(move |i| (0..ny).map(move |j| [i, j]))
    }

    /// Flat interior values, x-major. The ordering defines the unknown vector
    /// used by the linear solvers.
    pub fn to_unknowns(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.grid.num_unknowns());
        for idx in self.grid.interior_points() {
            out.push(self.get(idx));
        }
        out
    }

    /// Overwrites interior values from an unknown vector and zeroes Dirichlet boundary points.
    pub fn set_unknowns(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.grid.num_unknowns() {
            return Err(Error::GridMismatch(format!(
                "unknown vector has length {}, grid has {} unknowns",
                values.len(),
                self.grid.num_unknowns()
            )));
        }
        self.data.iter_mut().for_each(|v| *v = 0.0);
        let grid = Arc::clone(&self.grid);
        for (idx, &v) in grid.interior_points().zip(values) {
            let o = self.offset(idx[0] as isize, idx[1] as isize);
            self.data[o] = v;
        }
        self.generation += 1;
        Ok(())
    }

    /// Fills the ghost layer from the boundary rule of each axis.
    pub fn refresh_ghosts(&mut self) {
        let [nx, ny] = self.grid.point_counts();
        let g = GHOST_WIDTH as isize;
        let (nx_i, ny_i) = (nx as isize, ny as isize);
        // x ghosts, for all stored y
        let periodic_x = self.grid.axis(0).is_periodic();
        for j in 0..ny_i {
            for k in 1..=g {
                let (lo, hi) = if periodic_x {
                    (self.get_padded(nx_i - k, j), self.get_padded(k - 1, j))
                } else {
                    (-self.get_padded(k, j), -self.get_padded(nx_i - 1 - k, j))
                };
                let o = self.offset(-k, j);
                self.data[o] = lo;
                let o = self.offset(nx_i - 1 + k, j);
                self.data[o] = hi;
            }
        }
        if self.grid.dim() == 2 {
            let periodic_y = self.grid.axis(1).is_periodic();
            for i in 0..nx_i {
                for k in 1..=g {
                    let (lo, hi) = if periodic_y {
                        (self.get_padded(i, ny_i - k), self.get_padded(i, k - 1))
                    } else {
                        (-self.get_padded(i, k), -self.get_padded(i, ny_i - 1 - k))
                    };
                    let o = self.offset(i, -k);
                    self.data[o] = lo;
                    let o = self.offset(i, ny_i - 1 + k);
                    self.data[o] = hi;
                }
            }
        }
        self.ghost_generation = Some(self.generation);
    }

    fn check_same_grid(&self, other: &GridField) -> Result<()> {
        if same_grid(&self.grid, &other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch("fields live on different grids".into()))
        }
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|v| *v = value);
        self.generation += 1;
    }

    pub fn copy_from(&mut self, other: &GridField) -> Result<()> {
        self.check_same_grid(other)?;
        self.data.copy_from_slice(&other.data);
        self.generation += 1;
        Ok(())
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &GridField) -> Result<()> {
        self.check_same_grid(other)?;
        for (s, o) in self.data.iter_mut().zip(&other.data) {
            *s += a * o;
        }
        self.generation += 1;
        Ok(())
    }

    pub fn scale(&mut self, a: f64) {
        self.data.iter_mut().for_each(|v| *v *= a);
        self.generation += 1;
    }

    /// Applies `f(self_value, other_value)` pointwise over the whole padded storage.
    pub fn zip_apply(&mut self, other: &GridField, f: impl Fn(f64, f64) -> f64) -> Result<()> {
        self.check_same_grid(other)?;
        for (s, &o) in self.data.iter_mut().zip(&other.data) {
            *s = f(*s, o);
        }
        self.generation += 1;
        Ok(())
    }

    /// Raw padded storage; ghost entries are included.
    pub fn raw(&self) -> &[f64] {
        &self.data
    }

    /// Mutable raw padded storage. Invalidates the ghost layer.
    pub fn raw_mut(&mut self) -> &mut [f64] {
        self.generation += 1;
        &mut self.data
    }

    pub fn max_norm(&self) -> f64 {
        self.points().map(|p| self.get(p).abs()).fold(0.0, f64::max)
    }

    /// Euclidean norm over stored points scaled by `1/sqrt(N)`, N the number of grid points.
    pub fn norm_2h(&self) -> f64 {
        let sum: f64 = self.points().map(|p| self.get(p).powi(2)).sum();
        (sum / self.grid.num_points() as f64).sqrt()
    }

    /// Discrete inner product over interior points weighted by the cell volume.
    pub fn inner(&self, other: &GridField) -> Result<f64> {
        self.check_same_grid(other)?;
        let sum: f64 = self
            .grid
            .interior_points()
            .map(|p| self.get(p) * other.get(p))
            .sum();
        Ok(sum * self.grid.cell_volume())
    }
}

impl CartesianGrid {
    /// Interior point indices, x-major.
    pub fn interior_points(&self) -> impl Iterator<Item = [usize; 2]> {
        let [rx, ry] = self.interior_ranges();
        rx.flat_map(move |i| ry.clone().map(move |j| [i, j]))
    }
}

/// Central stencil of the order-p second difference, scaled by `1/dx²`.
///
/// Built by expanding `D+D- Σ_{μ<p/2} b_μ (-dx² D+D-)^μ` as a polynomial in
/// the shift operator.
pub fn stencil_coefficients(order: usize, dx: f64) -> Result<Vec<f64>> {
    if order != 2 && order != 4 {
        return Err(Error::UnsupportedOrder(order));
    }
    if dx.is_nan() || dx <= 0.0 {
        return Err(Error::InvalidParameter(format!("grid spacing {dx} must be positive")));
    }
    let second_diff = [1.0, -2.0, 1.0];
    let width = order + 1;
    let mut total = vec![0.0; width];
    // power = (D+D-)^(μ+1) with dx = 1
    let mut power = second_diff.to_vec();
    for mu in 0..order / 2 {
        let coeff = b_coeff_f64(mu) * if mu % 2 == 0 { 1.0 } else { -1.0 };
        let offset = (width - power.len()) / 2;
        for (k, p) in power.iter().enumerate() {
            total[offset + k] += coeff * p;
        }
        power = convolve(&power, &second_diff);
    }
    let scale = 1.0 / (dx * dx);
    Ok(total.into_iter().map(|v| v * scale).collect())
}

fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// The order-p approximation to `c² Δ` on a Cartesian grid.
#[derive(Clone, Debug)]
pub struct DiscreteOperator {
    order: usize,
    wave_speed: f64,
    grid: Arc<CartesianGrid>,
    /// `c²`-scaled stencil per axis.
    stencils: Vec<Vec<f64>>,
}

impl DiscreteOperator {
    pub fn new(grid: &Arc<CartesianGrid>, order: usize, wave_speed: f64) -> Result<Self> {
        if wave_speed.is_nan() || wave_speed <= 0.0 {
            return Err(Error::InvalidParameter(format!("wave speed {wave_speed} must be positive")));
        }
        let c2 = wave_speed * wave_speed;
        let stencils = grid
            .axes()
            .iter()
            .map(|a| {
                stencil_coefficients(order, a.spacing())
                    .map(|s| s.into_iter().map(|v| v * c2).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { order, wave_speed, grid: Arc::clone(grid), stencils })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn wave_speed(&self) -> f64 {
        self.wave_speed
    }

    pub fn grid(&self) -> &Arc<CartesianGrid> {
        &self.grid
    }

    pub fn stencil(&self, axis: usize) -> &[f64] {
        &self.stencils[axis]
    }

    /// Returns `c² Δ_h u` as a new field.
    pub fn apply(&self, u: &GridField) -> Result<GridField> {
        let mut out = GridField::zeros(&self.grid);
        self.apply_into(u, &mut out)?;
        Ok(out)
    }

    /// Writes `c² Δ_h u` into `out`. Dirichlet boundary points of `out` are set to zero.
    ///
    /// `u` must have fresh ghosts.
    pub fn apply_into(&self, u: &GridField, out: &mut GridField) -> Result<()> {
        if !same_grid(&self.grid, &u.grid) || !same_grid(&self.grid, &out.grid) {
            return Err(Error::GridMismatch("operator and field grids differ".into()));
        }
        if !u.ghosts_fresh() {
            return Err(Error::StaleGhosts {
                data: u.generation,
                ghosts: u.ghost_generation.unwrap_or(0),
            });
        }
        out.data.iter_mut().for_each(|v| *v = 0.0);
        let [rx, ry] = self.grid.interior_ranges();
        let sx = &self.stencils[0];
        let half = (sx.len() / 2) as isize;
        let stride_x = u.extents[1] as isize;
        let two_d = self.grid.dim() == 2;
        let sy: &[f64] = if two_d { &self.stencils[1] } else { &[] };
        for i in rx {
            for j in ry.clone() {
                let o = u.offset(i as isize, j as isize) as isize;
                let mut acc = 0.0;
                for (k, c) in sx.iter().enumerate() {
                    acc += c * u.data[(o + (k as isize - half) * stride_x) as usize];
                }
                for (k, c) in sy.iter().enumerate() {
                    acc += c * u.data[(o + k as isize - half) as usize];
                }
                out.data[o as usize] = acc;
            }
        }
        out.generation += 1;
        Ok(())
    }

    /// Applies the operator to a vector of interior unknowns.
    pub fn apply_unknowns(&self, x: &[f64], y: &mut [f64], scratch: &mut GridField) -> Result<()> {
        scratch.set_unknowns(x)?;
        scratch.refresh_ghosts();
        let mut out = GridField::zeros(&self.grid);
        self.apply_into(scratch, &mut out)?;
        for (slot, idx) in y.iter_mut().zip(self.grid.interior_points()) {
            *slot = out.get(idx);
        }
        Ok(())
    }

    /// Dense matrix of the operator restricted to the interior unknowns (row-major).
    pub fn assemble_dense(&self) -> Result<Vec<Vec<f64>>> {
        let n = self.grid.num_unknowns();
        let mut scratch = GridField::zeros(&self.grid);
        let mut cols = vec![vec![0.0; n]; n];
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            self.apply_unknowns(&e, &mut cols[j], &mut scratch)?;
            e[j] = 0.0;
        }
        let mut rows = vec![vec![0.0; n]; n];
        for (j, col) in cols.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                rows[i][j] = *v;
            }
        }
        Ok(rows)
    }

    /// Sparse rows of the operator on interior unknowns: `(row, [(col, value)])`.
    pub(crate) fn sparse_rows(&self) -> Vec<Vec<(usize, f64)>> {
        let grid = &self.grid;
        let [rx, ry] = grid.interior_ranges();
        let (nix, niy) = (rx.len(), ry.len());
        let [nx, ny] = grid.point_counts();
        let unknown_index = |i: usize, j: usize| (i - rx.start) * niy + (j - ry.start);
        // map a shifted 1D index to (stored index, sign); None for a Dirichlet boundary point
        let resolve = |k: isize, n: usize, periodic: bool| -> Option<(usize, f64)> {
            let n_i = n as isize;
            if periodic {
                Some((k.rem_euclid(n_i) as usize, 1.0))
            } else {
                let last = n_i - 1;
                if k == 0 || k == last {
                    None
                } else if k < 0 {
                    Some(((-k) as usize, -1.0))
                } else if k > last {
                    Some(((2 * last - k) as usize, -1.0))
                } else {
                    Some((k as usize, 1.0))
                }
            }
        };
        let periodic = [grid.axis(0).is_periodic(), grid.dim() == 2 && grid.axis(1).is_periodic()];
        let mut rows = Vec::with_capacity(nix * niy);
        for i in rx.clone() {
            for j in ry.clone() {
                let mut entries: Vec<(usize, f64)> = Vec::new();
                let mut push = |col: usize, v: f64| {
                    if let Some(e) = entries.iter_mut().find(|e| e.0 == col) {
                        e.1 += v;
                    } else {
                        entries.push((col, v));
                    }
                };
                let sx = &self.stencils[0];
                let half = (sx.len() / 2) as isize;
                for (k, c) in sx.iter().enumerate() {
                    if let Some((ii, s)) = resolve(i as isize + k as isize - half, nx, periodic[0]) {
                        push(unknown_index(ii, j), s * c);
                    }
                }
                if grid.dim() == 2 {
                    let sy = &self.stencils[1];
                    for (k, c) in sy.iter().enumerate() {
                        if let Some((jj, s)) = resolve(j as isize + k as isize - half, ny, periodic[1]) {
                            push(unknown_index(i, jj), s * c);
                        }
                    }
                }
                entries.sort_by_key(|e| e.0);
                rows.push(entries);
            }
        }
        rows
    }
}

/// Squared 1D symbol of the order-p second difference at angle `theta`, times `1/dx²`.
pub fn symbol_1d(order: usize, dx: f64, theta: f64) -> f64 {
    let s = 4.0 * (0.5 * theta).sin().powi(2);
    let mut sum = 0.0;
    for mu in 0..order / 2 {
        sum += b_coeff_f64(mu) * s.powi(mu as i32 + 1);
    }
    sum / (dx * dx)
}

/// A discrete eigenpair label: λ and the per-axis mode numbers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiscreteMode {
    pub lambda: f64,
    pub index: [usize; 2],
}

fn axis_modes(axis: &Axis) -> Vec<(usize, f64)> {
    if axis.is_periodic() {
        (0..axis.cells)
            .map(|m| (m, 2.0 * PI * m as f64 / axis.cells as f64))
            .collect()
    } else {
        (1..axis.cells)
            .map(|m| (m, PI * m as f64 / axis.cells as f64))
            .collect()
    }
}

/// All discrete modes of `L_ph` on a tensor-product grid with their eigenvalues λ ≥ 0,
/// sorted ascending in λ.
pub fn discrete_modes(grid: &CartesianGrid, order: usize, wave_speed: f64) -> Result<Vec<DiscreteMode>> {
    if order != 2 && order != 4 {
        return Err(Error::UnsupportedOrder(order));
    }
    if !(grid.is_all_dirichlet() || grid.is_all_periodic()) {
        return Err(Error::MixedBoundaries(
            "symbolic eigenvalues need all-Dirichlet or all-periodic axes; use the dense oracle".into(),
        ));
    }
    let c2 = wave_speed * wave_speed;
    let per_axis: Vec<Vec<(usize, f64)>> = grid
        .axes()
        .iter()
        .map(|a| {
            axis_modes(a)
                .into_iter()
                .map(|(m, th)| (m, symbol_1d(order, a.spacing(), th)))
                .collect()
        })
        .collect();
    let mut modes = Vec::new();
    if grid.dim() == 1 {
        for &(m, s) in &per_axis[0] {
            modes.push(DiscreteMode { lambda: (c2 * s).sqrt(), index: [m, 0] });
        }
    } else {
        for &(mx, sx) in &per_axis[0] {
            for &(my, sy) in &per_axis[1] {
                modes.push(DiscreteMode { lambda: (c2 * (sx + sy)).sqrt(), index: [mx, my] });
            }
        }
    }
    modes.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    Ok(modes)
}

/// Sorted discrete eigenvalues λ_h,m with `L_ph Φ_m = -λ_h,m² Φ_m`.
pub fn discrete_eigenvalues_symbolic(grid: &CartesianGrid, order: usize, wave_speed: f64) -> Result<Vec<f64>> {
    Ok(discrete_modes(grid, order, wave_speed)?
        .into_iter()
        .map(|m| m.lambda)
        .collect())
}

/// The discrete sine mode with mode numbers `index` on an all-Dirichlet grid,
/// normalized to unit discrete norm.
pub fn sine_mode(grid: &Arc<CartesianGrid>, index: [usize; 2]) -> Result<GridField> {
    if !grid.is_all_dirichlet() {
        return Err(Error::MixedBoundaries("sine modes need Dirichlet axes".into()));
    }
    let dim = grid.dim();
    let mut field = GridField::zeros(grid);
    for p in grid.interior_points() {
        let mut v = 1.0;
        for m in 0..dim {
            let n = grid.axis(m).cells as f64;
            v *= (PI * index[m] as f64 * p[m] as f64 / n).sin();
        }
        field.set(p, v);
    }
    let norm = field.inner(&field)?.sqrt();
    if norm == 0.0 {
        return Err(Error::InvalidParameter(format!("mode {index:?} vanishes on this grid")));
    }
    field.scale(1.0 / norm);
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense_symmetric_eig;
    use rand::{rngs::StdRng, Rng, SeedableRng};

    fn line(n: usize) -> Arc<CartesianGrid> {
        Arc::new(CartesianGrid::line(0.0, 1.0, n, BoundaryCondition::Dirichlet).unwrap())
    }

    fn random_field(grid: &Arc<CartesianGrid>, rng: &mut StdRng) -> GridField {
        let v: Vec<f64> = (0..grid.num_unknowns()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        GridField::from_unknowns(grid, &v).unwrap()
    }

    #[test]
    fn build_grid_spacing_and_errors() {
        let g = CartesianGrid::line(0.0, 1.0, 10, BoundaryCondition::Dirichlet).unwrap();
        assert!((g.spacing(0) - 0.1).abs() < 1e-15);
        assert!((g.spacing(0) * 10.0 - 1.0).abs() < 1e-14);
        let sq = CartesianGrid::unit_square(256).unwrap();
        assert_eq!(sq.dim(), 2);
        assert_eq!(sq.num_points(), 257 * 257);
        assert!(CartesianGrid::line(0.0, 1.0, 3, BoundaryCondition::Dirichlet).is_err());
        assert!(CartesianGrid::line(1.0, 0.0, 8, BoundaryCondition::Dirichlet).is_err());
        let unpaired = CartesianGrid::new(
            &[(0.0, 1.0)],
            &[8],
            &[[BoundaryCondition::Periodic, BoundaryCondition::Dirichlet]],
        );
        assert!(unpaired.is_err());
    }

    #[test]
    fn stencils() {
        let s2 = stencil_coefficients(2, 1.0).unwrap();
        assert_eq!(s2, vec![1.0, -2.0, 1.0]);
        let s4 = stencil_coefficients(4, 1.0).unwrap();
        let expect = [-1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0];
        for (a, b) in s4.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15, "{s4:?}");
        }
        let s4h = stencil_coefficients(4, 0.5).unwrap();
        for (a, b) in s4h.iter().zip(&s4) {
            assert!((a - 4.0 * b).abs() < 1e-14);
        }
        assert!(matches!(stencil_coefficients(6, 1.0), Err(Error::UnsupportedOrder(6))));
    }

    #[test]
    fn stale_ghosts_are_rejected() {
        let g = line(8);
        let op = DiscreteOperator::new(&g, 2, 1.0).unwrap();
        let mut u = GridField::zeros(&g);
        assert!(matches!(op.apply(&u), Err(Error::StaleGhosts { .. })));
        u.refresh_ghosts();
        assert!(op.apply(&u).is_ok());
        u.set([3, 0], 1.0);
        assert!(matches!(op.apply(&u), Err(Error::StaleGhosts { .. })));
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let op = DiscreteOperator::new(&line(8), 2, 1.0).unwrap();
        let mut u = GridField::zeros(&line(10));
        u.refresh_ghosts();
        assert!(matches!(op.apply(&u), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn zero_and_constant_in_kernel() {
        let g = line(12);
        let op = DiscreteOperator::new(&g, 4, 2.0).unwrap();
        let mut u = GridField::zeros(&g);
        u.refresh_ghosts();
        assert_eq!(op.apply(&u).unwrap().max_norm(), 0.0);

        let per = Arc::new(CartesianGrid::uniform(2, (0.0, 1.0), 8, BoundaryCondition::Periodic).unwrap());
        for p in [2, 4] {
            let op = DiscreteOperator::new(&per, p, 1.0).unwrap();
            let mut u = GridField::sample(&per, |_| 3.5);
            u.refresh_ghosts();
            assert!(op.apply(&u).unwrap().max_norm() < 1e-12);
        }
    }

    #[test]
    fn sine_modes_are_eigenvectors() {
        for (dim, p) in [(1, 2), (1, 4), (2, 2), (2, 4)] {
            let g = Arc::new(CartesianGrid::uniform(dim, (0.0, 1.3), 16, BoundaryCondition::Dirichlet).unwrap());
            let c = 1.7;
            let op = DiscreteOperator::new(&g, p, c).unwrap();
            for mode in discrete_modes(&g, p, c).unwrap().iter().step_by(7) {
                let mut phi = sine_mode(&g, mode.index).unwrap();
                phi.refresh_ghosts();
                let mut lphi = op.apply(&phi).unwrap();
                lphi.axpy(mode.lambda.powi(2), &phi).unwrap();
                let scale = mode.lambda.powi(2) * phi.max_norm();
                assert!(lphi.max_norm() <= 1e-11 * scale, "dim {dim} p {p} mode {mode:?}");
            }
        }
    }

    #[test]
    fn p2_eigenvalue_formula_against_dense() {
        // N = 16 on [0,1], p = 2: λ² = (4/Δx²) sin²(mπΔx/2)
        let g = line(16);
        let op = DiscreteOperator::new(&g, 2, 1.0).unwrap();
        let a = op.assemble_dense().unwrap();
        let neg: Vec<Vec<f64>> = a.iter().map(|r| r.iter().map(|v| -v).collect()).collect();
        let (vals, _) = dense_symmetric_eig(&neg).unwrap();
        let dx = 1.0 / 16.0;
        for (m, v) in vals.iter().enumerate() {
            let mm = (m + 1) as f64;
            let expect = 4.0 / (dx * dx) * (mm * PI * dx / 2.0).sin().powi(2);
            assert!((v - expect).abs() <= 1e-11 * expect, "{v} {expect}");
        }
        // N = 4: m = 1..3, λ² = (4/Δx²) sin²(mπ/8)
        let g4 = line(4);
        let ev = discrete_eigenvalues_symbolic(&g4, 2, 1.0).unwrap();
        for (m, l) in ev.iter().enumerate() {
            let expect = 64.0 * ((m + 1) as f64 * PI / 8.0).sin().powi(2);
            assert!((l * l - expect).abs() < 1e-12 * expect);
        }
    }

    #[test]
    fn symbolic_eigenvalues_match_dense_oracle() {
        let mut grids = Vec::new();
        for n in [4usize, 7, 16, 32] {
            grids.push(Arc::new(CartesianGrid::line(0.0, 2.0, n, BoundaryCondition::Dirichlet).unwrap()));
            grids.push(Arc::new(CartesianGrid::line(0.0, 2.0, n, BoundaryCondition::Periodic).unwrap()));
        }
        for n in [4usize, 8] {
            grids.push(Arc::new(CartesianGrid::new(&[(0.0, 1.0), (0.0, 1.5)], &[n, n + 2], &[[BoundaryCondition::Dirichlet; 2]; 2]).unwrap()));
            grids.push(Arc::new(CartesianGrid::uniform(2, (0.0, 1.0), n, BoundaryCondition::Periodic).unwrap()));
        }
        for g in &grids {
            for p in [2, 4] {
                let op = DiscreteOperator::new(g, p, 1.3).unwrap();
                let neg: Vec<Vec<f64>> = op
                    .assemble_dense()
                    .unwrap()
                    .iter()
                    .map(|r| r.iter().map(|v| -v).collect())
                    .collect();
                let (vals, _) = dense_symmetric_eig(&neg).unwrap();
                let sym = discrete_eigenvalues_symbolic(g, p, 1.3).unwrap();
                assert_eq!(vals.len(), sym.len());
                let top = sym.last().unwrap().powi(2);
                for (d, s) in vals.iter().zip(&sym) {
                    assert!((d - s * s).abs() <= 1e-10 * top.max(1.0), "{d} vs {}", s * s);
                }
            }
        }
    }

    #[test]
    fn eigenvalues_converge_to_continuum() {
        let ev = discrete_eigenvalues_symbolic(&line(4096), 2, 1.0).unwrap();
        for m in 1..=3 {
            assert!((ev[m - 1] - m as f64 * PI).abs() < 1e-5);
        }
    }

    #[test]
    fn symmetry_and_semidefiniteness() {
        let mut rng = StdRng::seed_from_u64(7);
        let grids = [
            line(20),
            Arc::new(CartesianGrid::line(0.0, 1.0, 20, BoundaryCondition::Periodic).unwrap()),
            Arc::new(CartesianGrid::unit_square(12).unwrap()),
            Arc::new(CartesianGrid::uniform(2, (0.0, 1.0), 10, BoundaryCondition::Periodic).unwrap()),
        ];
        for g in &grids {
            for p in [2, 4] {
                let op = DiscreteOperator::new(g, p, 1.0).unwrap();
                for _ in 0..5 {
                    let mut u = random_field(g, &mut rng);
                    let mut v = random_field(g, &mut rng);
                    u.refresh_ghosts();
                    v.refresh_ghosts();
                    let lu = op.apply(&u).unwrap();
                    let lv = op.apply(&v).unwrap();
                    let a = lu.inner(&v).unwrap();
                    let b = u.inner(&lv).unwrap();
                    assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()));
                    assert!(lu.inner(&u).unwrap() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn order_of_accuracy() {
        // u = sin(πx) sin(2πy) + boundary-vanishing in x; use a periodic grid to isolate the interior order
        for p in [2usize, 4] {
            let mut errs = Vec::new();
            for n in [16usize, 32, 64, 128] {
                let g = Arc::new(CartesianGrid::uniform(2, (0.0, 1.0), n, BoundaryCondition::Periodic).unwrap());
                let op = DiscreteOperator::new(&g, p, 1.0).unwrap();
                let f = |x: [f64; 2]| (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos() + (4.0 * PI * x[1]).sin();
                let exact = |x: [f64; 2]| {
                    -8.0 * PI * PI * (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos()
                        - 16.0 * PI * PI * (4.0 * PI * x[1]).sin()
                };
                let mut u = GridField::sample(&g, f);
                u.refresh_ghosts();
                let lu = op.apply(&u).unwrap();
                let err = g
                    .interior_points()
                    .map(|i| (lu.get(i) - exact(g.coordinates(i))).abs())
                    .fold(0.0, f64::max);
                errs.push(err);
            }
            for w in errs.windows(2) {
                let rate = (w[0] / w[1]).log2();
                assert!((rate - p as f64).abs() < 0.2, "p={p} rate={rate}");
            }
        }
    }

    #[test]
    fn odd_reflection_ghosts() {
        let g = line(8);
        let mut u = GridField::sample(&g, |x| x[0] * (1.0 - x[0]));
        u.refresh_ghosts();
        assert_eq!(u.get_padded(-1, 0), -u.get([1, 0]));
        assert_eq!(u.get_padded(-2, 0), -u.get([2, 0]));
        assert_eq!(u.get_padded(9, 0), -u.get([7, 0]));
        assert_eq!(u.get([0, 0]), 0.0);
        assert_eq!(u.get([8, 0]), 0.0);
    }

    #[test]
    fn sparse_rows_match_dense() {
        for g in [line(9), Arc::new(CartesianGrid::unit_square(6).unwrap())] {
            for p in [2, 4] {
                let op = DiscreteOperator::new(&g, p, 1.1).unwrap();
                let dense = op.assemble_dense().unwrap();
                let sparse = op.sparse_rows();
                for (i, row) in sparse.iter().enumerate() {
                    let mut full = vec![0.0; dense.len()];
                    for &(j, v) in row {
                        full[j] = v;
                    }
                    for (a, b) in full.iter().zip(&dense[i]) {
                        assert!((a - b).abs() < 1e-9);
                    }
                }
            }
        }
    }
}
