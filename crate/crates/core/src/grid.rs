//! Uniform cell-centered grids over the square `[-L, L]^2` and the fields
//! that live on them.
//!
//! Storage is row-major with `i` (the x index) running fastest, so cell
//! `(i, j)` sits at `j * nx + i`.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

pub const MIN_CELLS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub half_width: f64,
    pub dx: f64,
    pub dy: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, half_width: f64) -> Result<Self> {
        if nx < MIN_CELLS || ny < MIN_CELLS {
            return Err(Error::InvalidGrid(format!(
                "need at least {MIN_CELLS} cells per axis, got {nx}x{ny}"
            )));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "half width must be positive, got {half_width}"
            )));
        }
        Ok(Self {
            nx,
            ny,
            half_width,
            dx: 2.0 * half_width / nx as f64,
            dy: 2.0 * half_width / ny as f64,
        })
    }

    pub fn square(n: usize, half_width: f64) -> Result<Self> {
        Self::new(n, n, half_width)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        -self.half_width + (i as f64 + 0.5) * self.dx
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        -self.half_width + (j as f64 + 0.5) * self.dy
    }

    #[inline]
    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        (self.x(i), self.y(j))
    }

    #[inline]
    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    #[inline]
    pub fn min_spacing(&self) -> f64 {
        self.dx.min(self.dy)
    }

    /// Iterator over `(i, j, x, y)` in storage order.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, f64, f64)> + '_ {
        (0..self.ny).flat_map(move |j| (0..self.nx).map(move |i| (i, j, self.x(i), self.y(j))))
    }

    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Field {
        let data = self.cells().map(|(_, _, x, y)| f(x, y)).collect();
        Field {
            nx: self.nx,
            ny: self.ny,
            data,
        }
    }

    pub fn sample_vector(&self, f: impl Fn(f64, f64) -> [f64; 2]) -> VectorField {
        let mut v = VectorField::zeros(self);
        for (i, j, x, y) in self.cells() {
            let [a, b] = f(x, y);
            v.x[(i, j)] = a;
            v.y[(i, j)] = b;
        }
        v
    }

    pub fn zeros(&self) -> Field {
        Field::constant(self, 0.0)
    }

    pub fn constant(&self, c: f64) -> Field {
        Field::constant(self, c)
    }
}

/// Cell-centered scalar field.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    pub nx: usize,
    pub ny: usize,
    pub data: Vec<f64>,
}

impl Field {
    pub fn constant(grid: &Grid, c: f64) -> Self {
        Self {
            nx: grid.nx,
            ny: grid.ny,
            data: vec![c; grid.len()],
        }
    }

    pub fn from_vec(grid: &Grid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "field has {} values, grid has {} cells",
                data.len(),
                grid.len()
            )));
        }
        Ok(Self {
            nx: grid.nx,
            ny: grid.ny,
            data,
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            nx: self.nx,
            ny: self.ny,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        debug_assert_eq!(self.data.len(), other.data.len());
        Field {
            nx: self.nx,
            ny: self.ny,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    /// `self + c * other`
    pub fn axpy(&self, c: f64, other: &Field) -> Field {
        self.zip_map(other, |a, b| a + c * b)
    }

    pub fn sum(&self) -> f64 {
        neumaier_sum(self.data.iter().copied())
    }

    /// Midpoint-rule integral.
    pub fn integral(&self, grid: &Grid) -> f64 {
        self.sum() * grid.cell_area()
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Discrete L2 norm, `sqrt(sum f^2 dx dy)`.
    pub fn l2_norm(&self, grid: &Grid) -> f64 {
        (neumaier_sum(self.data.iter().map(|v| v * v)) * grid.cell_area()).sqrt()
    }

    /// First cell holding a NaN or infinity, if any.
    pub fn first_non_finite(&self) -> Option<(usize, usize)> {
        self.data
            .iter()
            .position(|v| !v.is_finite())
            .map(|k| (k % self.nx, k / self.nx))
    }

    pub fn check_finite(&self, name: &'static str) -> Result<()> {
        match self.first_non_finite() {
            Some((i, j)) => Err(Error::NonFinite { field: name, i, j }),
            None => Ok(()),
        }
    }
}

impl Index<(usize, usize)> for Field {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[j * self.nx + i]
    }
}

impl IndexMut<(usize, usize)> for Field {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[j * self.nx + i]
    }
}

/// Cell-centered two-component field.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub x: Field,
    pub y: Field,
}

impl VectorField {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            x: grid.zeros(),
            y: grid.zeros(),
        }
    }

    pub fn new(x: Field, y: Field) -> Self {
        Self { x, y }
    }

    pub fn component(&self, k: usize) -> &Field {
        match k {
            0 => &self.x,
            _ => &self.y,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            x: self.x.map(&f),
            y: self.y.map(&f),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            x: self.x.scale(c),
            y: self.y.scale(c),
        }
    }

    pub fn axpy(&self, c: f64, other: &VectorField) -> Self {
        Self {
            x: self.x.axpy(c, &other.x),
            y: self.y.axpy(c, &other.y),
        }
    }

    /// Pointwise multiplication of both components by a scalar field.
    pub fn mul_scalar(&self, s: &Field) -> Self {
        Self {
            x: self.x.zip_map(s, |a, b| a * b),
            y: self.y.zip_map(s, |a, b| a * b),
        }
    }

    pub fn magnitude_sq(&self) -> Field {
        self.x.zip_map(&self.y, |a, b| a * a + b * b)
    }

    pub fn l2_norm(&self, grid: &Grid) -> f64 {
        self.magnitude_sq().integral(grid).sqrt()
    }

    pub fn check_finite(&self, name: &'static str) -> Result<()> {
        self.x.check_finite(name)?;
        self.y.check_finite(name)
    }
}

/// Scalar field padded with one ghost layer on every side.
#[derive(Clone, Debug, PartialEq)]
pub struct Ghosted {
    pub nx: usize,
    pub ny: usize,
    data: Vec<f64>,
}

impl Ghosted {
    /// Copies the interior and zeroes every ghost cell.
    pub fn from_field(f: &Field) -> Self {
        let (nx, ny) = (f.nx, f.ny);
        let mut data = vec![0.0; (nx + 2) * (ny + 2)];
        for j in 0..ny {
            let row = (j + 1) * (nx + 2) + 1;
            data[row..row + nx].copy_from_slice(&f.data[j * nx..(j + 1) * nx]);
        }
        Self { nx, ny, data }
    }

    #[inline]
    fn offset(&self, i: isize, j: isize) -> usize {
        debug_assert!(i >= -1 && i <= self.nx as isize && j >= -1 && j <= self.ny as isize);
        ((j + 1) as usize) * (self.nx + 2) + (i + 1) as usize
    }

    #[inline]
    pub fn get(&self, i: isize, j: isize) -> f64 {
        self.data[self.offset(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: isize, j: isize, v: f64) {
        let k = self.offset(i, j);
        self.data[k] = v;
    }

    pub fn interior(&self) -> Field {
        let mut data = Vec::with_capacity(self.nx * self.ny);
        for j in 0..self.ny {
            let row = (j + 1) * (self.nx + 2) + 1;
            data.extend_from_slice(&self.data[row..row + self.nx]);
        }
        Field {
            nx: self.nx,
            ny: self.ny,
            data,
        }
    }
}

/// Compensated summation in a fixed order, so repeated reductions over the
/// same data agree bitwise.
pub fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Discrete inner product `sum f g dx dy`.
pub fn inner(grid: &Grid, f: &Field, g: &Field) -> f64 {
    neumaier_sum(f.data.iter().zip(&g.data).map(|(a, b)| a * b)) * grid.cell_area()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_tiny_grids() {
        assert!(Grid::new(4, 16, 1.0).is_err());
        assert!(Grid::new(16, 16, 0.0).is_err());
        assert!(Grid::new(16, 16, f64::NAN).is_err());
    }

    #[test]
    fn cell_centers_follow_the_layout() {
        let g = Grid::square(8, 1.0).unwrap();
        assert_eq!(g.dx, 0.25);
        assert_eq!(g.center(0, 0), (-0.875, -0.875));
        assert_eq!(g.center(7, 7), (0.875, 0.875));
        let f = g.sample(|x, y| x + 10.0 * y);
        assert_eq!(f[(3, 5)], g.x(3) + 10.0 * g.y(5));
    }

    #[test]
    fn unit_field_integrates_to_area() {
        let g = Grid::square(32, 1.0).unwrap();
        assert_eq!(g.constant(1.0).integral(&g), 4.0);
    }

    #[test]
    fn ghost_padding_round_trips() {
        let g = Grid::new(9, 11, 2.0).unwrap();
        let f = g.sample(|x, y| x * y + 1.0);
        let mut p = Ghosted::from_field(&f);
        p.set(-1, 3, 7.0);
        assert_eq!(p.get(-1, 3), 7.0);
        assert_eq!(p.get(4, 5), f[(4, 5)]);
        assert_eq!(p.interior(), f);
    }

    #[test]
    fn compensated_sum_beats_naive_cancellation() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(neumaier_sum(v), 2.0);
    }
}
