//! Uniform Cartesian grids, nodal scalar fields and the Neumann 5-point stencil.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::real::Real;

/// A point in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Point<T> {
    pub fn new(x: T, y: T) -> Self {
        Point { x, y }
    }

    pub fn origin() -> Self {
        Point::new(T::zero(), T::zero())
    }

    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Node-centred uniform grid over `[xmin, xmax] x [ymin, ymax]`.
///
/// Node `k` along x sits at `xmin + k dx` with `dx = (xmax - xmin) / (nx - 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D<T> {
    nx: usize,
    ny: usize,
    xmin: T,
    xmax: T,
    ymin: T,
    ymax: T,
    dx: T,
    dy: T,
}

impl<T: Real> Grid2D<T> {
    /// Builds a grid from node counts and `[xmin, xmax, ymin, ymax]`.
    pub fn new(nx: usize, ny: usize, bounds: [T; 4]) -> Result<Self> {
        let [xmin, xmax, ymin, ymax] = bounds;
        if nx < 3 || ny < 3 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 nodes per axis, got {nx} x {ny}"
            )));
        }
        if !bounds.iter().all(|b| b.is_finite()) || !(xmax > xmin) || !(ymax > ymin) {
            return Err(Error::InvalidGrid(format!(
                "degenerate bounds [{xmin}, {xmax}] x [{ymin}, {ymax}]"
            )));
        }
        let dx = (xmax - xmin) / T::from_count(nx - 1);
        let dy = (ymax - ymin) / T::from_count(ny - 1);
        Ok(Grid2D { nx, ny, xmin, xmax, ymin, ymax, dx, dy })
    }

    /// Square `n x n` grid on `[lo, hi]^2`.
    pub fn square(n: usize, lo: T, hi: T) -> Result<Self> {
        Self::new(n, n, [lo, hi, lo, hi])
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> T {
        self.dx
    }

    pub fn dy(&self) -> T {
        self.dy
    }

    pub fn bounds(&self) -> [T; 4] {
        [self.xmin, self.xmax, self.ymin, self.ymax]
    }

    /// Smaller of the two spacings.
    pub fn min_spacing(&self) -> T {
        self.dx.min(self.dy)
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    // Nodes in the upper half are measured from the far bound so that grids on
    // symmetric domains have exactly mirrored coordinates.
    #[inline]
    fn axis_coord(k: usize, n: usize, lo: T, hi: T, h: T) -> T {
        if 2 * k <= n - 1 {
            lo + T::from_count(k) * h
        } else {
            hi - T::from_count(n - 1 - k) * h
        }
    }

    #[inline]
    pub fn x(&self, i: usize) -> T {
        Self::axis_coord(i, self.nx, self.xmin, self.xmax, self.dx)
    }

    #[inline]
    pub fn y(&self, j: usize) -> T {
        Self::axis_coord(j, self.ny, self.ymin, self.ymax, self.dy)
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> Point<T> {
        Point::new(self.x(i), self.y(j))
    }

    pub fn contains(&self, p: Point<T>) -> bool {
        p.x >= self.xmin && p.x <= self.xmax && p.y >= self.ymin && p.y <= self.ymax
    }

    /// Distance from node `(i, j)` to the nearest edge of the domain.
    pub fn boundary_distance(&self, i: usize, j: usize) -> T {
        let p = self.node(i, j);
        (p.x - self.xmin)
            .min(self.xmax - p.x)
            .min(p.y - self.ymin)
            .min(self.ymax - p.y)
    }

    // Cell index along one axis containing `v`, corrected against the exact
    // node coordinates so that nodes map onto their own lower corner.
    fn cell_along(&self, v: T, lo: T, h: T, n: usize, coord: impl Fn(usize) -> T) -> usize {
        let raw = ((v - lo) / h).floor().to_usize().unwrap_or(0);
        let mut k = raw.min(n - 2);
        if k + 1 < n - 1 && v >= coord(k + 1) {
            k += 1;
        }
        if k > 0 && v < coord(k) {
            k -= 1;
        }
        k
    }
}

/// Validated `make_grid` entry point.
pub fn make_grid<T: Real>(nx: usize, ny: usize, bounds: [T; 4]) -> Result<Grid2D<T>> {
    Grid2D::new(nx, ny, bounds)
}

/// Nodal values on a [`Grid2D`], stored row-major with `y` as the outer index.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField<T> {
    grid: Grid2D<T>,
    values: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    /// Wraps raw values, rejecting wrong lengths and non-finite entries.
    pub fn from_values(grid: Grid2D<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch { expected: grid.len(), found: values.len() });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { i: k % grid.nx, j: k / grid.nx });
        }
        Ok(ScalarField { grid, values })
    }

    pub(crate) fn from_values_unchecked(grid: Grid2D<T>, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        ScalarField { grid, values }
    }

    pub fn constant(grid: &Grid2D<T>, c: T) -> Self {
        ScalarField { grid: grid.clone(), values: vec![c; grid.len()] }
    }

    pub fn zeros(grid: &Grid2D<T>) -> Self {
        Self::constant(grid, T::zero())
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: &Grid2D<T>, f: impl Fn(Point<T>) -> T + Sync) -> Self {
        let nx = grid.nx;
        let mut values = vec![T::zero(); grid.len()];
        values.par_chunks_mut(nx).enumerate().for_each(|(j, row)| {
            for (i, v) in row.iter_mut().enumerate() {
                *v = f(grid.node(i, j));
            }
        });
        ScalarField { grid: grid.clone(), values }
    }

    pub fn grid(&self) -> &Grid2D<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[self.grid.index(i, j)]
    }

    /// Value at a possibly out-of-range index, using the even (mirror) extension
    /// across each boundary node. This is the ghost layer behind `du/dn = 0`.
    #[inline]
    pub fn reflected(&self, i: isize, j: isize) -> T {
        let i = reflect_index(i, self.grid.nx);
        let j = reflect_index(j, self.grid.ny);
        self.get(i, j)
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.grid == other.grid
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(k) => Err(Error::NonFinite { i: k % self.grid.nx, j: k / self.grid.nx }),
            None => Ok(()),
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T + Sync) -> Self {
        let values = self.values.par_iter().map(|&v| f(v)).collect();
        ScalarField { grid: self.grid.clone(), values }
    }

    pub fn scaled(&self, a: T) -> Self {
        self.map(|v| a * v)
    }

    /// `a * self + b * other`.
    pub fn lincomb(&self, a: T, other: &Self, b: T) -> Result<Self> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch);
        }
        let values = self
            .values
            .par_iter()
            .zip(other.values.par_iter())
            .map(|(&u, &v)| a * u + b * v)
            .collect();
        Ok(ScalarField { grid: self.grid.clone(), values })
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<T> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs())))
    }

    /// 5-point Laplacian with ghost reflection at the boundary.
    pub fn laplacian(&self) -> Self {
        let mut out = vec![T::zero(); self.values.len()];
        laplacian_into(&self.grid, &self.values, &mut out);
        ScalarField { grid: self.grid.clone(), values: out }
    }

    /// Bilinear interpolation; exact at nodes and for bilinear functions.
    pub fn eval_bilinear(&self, p: Point<T>) -> Result<T> {
        let g = &self.grid;
        if !p.x.is_finite() || !p.y.is_finite() || !g.contains(p) {
            return Err(Error::OutOfDomain { x: p.x.as_f64(), y: p.y.as_f64() });
        }
        let i = g.cell_along(p.x, g.xmin, g.dx, g.nx, |k| g.x(k));
        let j = g.cell_along(p.y, g.ymin, g.dy, g.ny, |k| g.y(k));
        let frac = |v: T, a: T, b: T| if v == b { T::one() } else { (v - a) / (b - a) };
        let s = frac(p.x, g.x(i), g.x(i + 1));
        let t = frac(p.y, g.y(j), g.y(j + 1));
        let one = T::one();
        let v00 = self.get(i, j);
        let v10 = self.get(i + 1, j);
        let v01 = self.get(i, j + 1);
        let v11 = self.get(i + 1, j + 1);
        Ok((one - s) * (one - t) * v00 + s * (one - t) * v10 + (one - s) * t * v01 + s * t * v11)
    }

    /// Writes `x,y,value` rows in storage order.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,y,value")?;
        for j in 0..self.grid.ny {
            for i in 0..self.grid.nx {
                let p = self.grid.node(i, j);
                writeln!(w, "{},{},{}", p.x, p.y, self.get(i, j))?;
            }
        }
        Ok(())
    }
}

#[inline]
fn reflect_index(k: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * (n - 1);
    let mut m = k.rem_euclid(period);
    if m >= n {
        m = period - m;
    }
    m as usize
}

/// Writes the Neumann 5-point Laplacian of `u` into `out`, one row per task.
pub(crate) fn laplacian_into<T: Real>(grid: &Grid2D<T>, u: &[T], out: &mut [T]) {
    stencil_rows(grid, u, out, |lap, _| lap);
}

/// Applies `f(laplacian(u)[k], k)` at every node, parallel over rows.
#[inline]
pub(crate) fn stencil_rows<T: Real, F>(grid: &Grid2D<T>, u: &[T], out: &mut [T], f: F)
where
    F: Fn(T, usize) -> T + Sync,
{
    let nx = grid.nx;
    let ny = grid.ny;
    let idx2 = T::one() / (grid.dx * grid.dx);
    let idy2 = T::one() / (grid.dy * grid.dy);
    let two = T::two();
    out.par_chunks_mut(nx).enumerate().for_each(|(j, row)| {
        let jd = if j == 0 { 1 } else { j - 1 };
        let ju = if j == ny - 1 { ny - 2 } else { j + 1 };
        let c = &u[j * nx..(j + 1) * nx];
        let d = &u[jd * nx..(jd + 1) * nx];
        let up = &u[ju * nx..(ju + 1) * nx];
        for i in 0..nx {
            let il = if i == 0 { 1 } else { i - 1 };
            let ir = if i == nx - 1 { nx - 2 } else { i + 1 };
            let lap = (c[il] + c[ir] - two * c[i]) * idx2 + (d[i] + up[i] - two * c[i]) * idy2;
            row[i] = f(lap, j * nx + i);
        }
    });
}

/// Free-function form of [`ScalarField::laplacian`].
pub fn laplacian<T: Real>(f: &ScalarField<T>) -> ScalarField<T> {
    f.laplacian()
}

/// Free-function form of [`ScalarField::eval_bilinear`].
pub fn eval_bilinear<T: Real>(f: &ScalarField<T>, p: Point<T>) -> Result<T> {
    f.eval_bilinear(p)
}
