//! Spatially discretized model state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Uniform grid descriptor.
///
/// The 1D grid is periodic on `[0, n*dx)` with nodes at `i*dx`. The 2D grid is
/// cell-centred on `[0, nx*dx] x [0, ny*dy]` with nodes at `((i+1/2)dx, (j+1/2)dy)`
/// and is stored row-major (x fastest).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Grid<T> {
    Line { n: usize, dx: T },
    Plane { nx: usize, ny: usize, dx: T, dy: T },
}

impl<T: Scalar> Grid<T> {
    /// Periodic grid covering `[0, length)` with spacing `dx`.
    pub fn periodic_unit(dx: T, length: T) -> Result<Self> {
        if !(dx > T::zero()) || !dx.is_finite() {
            return Err(Error::Field(format!("grid spacing must be positive, got {dx}")));
        }
        let n = (length / dx).round().to_usize().unwrap_or(0);
        if n < 3 {
            return Err(Error::Field(format!("grid needs at least 3 points, got {n}")));
        }
        Ok(Grid::Line { n, dx })
    }

    /// Cell-centred square grid on `[0, side]^2`.
    pub fn square(side: T, nx: usize, ny: usize) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::Field(format!("grid must be at least 2x2, got {nx}x{ny}")));
        }
        Ok(Grid::Plane {
            nx,
            ny,
            dx: side / T::from_usize_lossy(nx),
            dy: side / T::from_usize_lossy(ny),
        })
    }

    pub fn points(&self) -> usize {
        match *self {
            Grid::Line { n, .. } => n,
            Grid::Plane { nx, ny, .. } => nx * ny,
        }
    }

    /// Physical coordinates of node `p` (`y` is zero on a line).
    pub fn coord(&self, p: usize) -> (T, T) {
        match *self {
            Grid::Line { dx, .. } => (T::from_usize_lossy(p) * dx, T::zero()),
            Grid::Plane { nx, dx, dy, .. } => {
                let half = T::lit(0.5);
                let (i, j) = (p % nx, p / nx);
                ((T::from_usize_lossy(i) + half) * dx, (T::from_usize_lossy(j) + half) * dy)
            }
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            Grid::Line { .. } => 1,
            Grid::Plane { .. } => 2,
        }
    }

    /// Lossless comparison used by the report tooling to reject mismatched grids.
    pub fn same_shape(&self, other: &Self) -> bool {
        self == other
    }
}

/// Values of one or more scalar components on a grid, component-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field<T> {
    grid: Grid<T>,
    components: usize,
    values: Vec<T>,
}

impl<T: Scalar> Field<T> {
    /// Builds a field, checking the length and finiteness invariants.
    pub fn new(grid: Grid<T>, components: usize, values: Vec<T>) -> Result<Self> {
        let expected = grid.points() * components;
        if values.len() != expected {
            return Err(Error::LengthMismatch { what: "field values", expected, given: values.len() });
        }
        if let Some(p) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Field(format!("entry {p} is not finite")));
        }
        Ok(Self { grid, components, values })
    }

    /// Builds a field without the finiteness scan; length is still enforced.
    pub fn from_parts(grid: Grid<T>, components: usize, values: Vec<T>) -> Self {
        assert_eq!(values.len(), grid.points() * components, "field length");
        Self { grid, components, values }
    }

    pub fn zeros(grid: Grid<T>, components: usize) -> Self {
        Self::from_parts(grid, components, vec![T::zero(); grid.points() * components])
    }

    /// Evaluates `f(component, x, y)` at every node.
    pub fn from_fn(grid: Grid<T>, components: usize, mut f: impl FnMut(usize, T, T) -> T) -> Self {
        let n = grid.points();
        let mut values = Vec::with_capacity(n * components);
        for c in 0..components {
            for p in 0..n {
                let (x, y) = grid.coord(p);
                values.push(f(c, x, y));
            }
        }
        Self::from_parts(grid, components, values)
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn component(&self, c: usize) -> &[T] {
        let n = self.grid.points();
        &self.values[c * n..(c + 1) * n]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [T] {
        let n = self.grid.points();
        &mut self.values[c * n..(c + 1) * n]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn same_layout(&self, other: &Self) -> bool {
        self.components == other.components && self.grid == other.grid
    }

    /// Elementwise sum with another field of the same layout.
    pub fn plus(&self, other: &Self) -> Result<Self> {
        if !self.same_layout(other) {
            return Err(Error::LengthMismatch {
                what: "field layout",
                expected: self.len(),
                given: other.len(),
            });
        }
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| a + b).collect();
        Ok(Self::from_parts(self.grid, self.components, values))
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::from_parts(self.grid, self.components, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Sum of one component's values.
    pub fn component_sum(&self, c: usize) -> T {
        let mut acc = crate::scalar::CompensatedSum::new();
        for &v in self.component(c) {
            acc.add(v);
        }
        acc.value()
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_wrong_length_and_non_finite() {
        let g = Grid::<f64>::periodic_unit(0.25, 1.0).unwrap();
        assert!(matches!(Field::new(g, 1, vec![0.0; 3]), Err(Error::LengthMismatch { .. })));
        assert!(Field::new(g, 1, vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
        assert!(Field::new(g, 1, vec![0.0; 4]).is_ok());
    }

    #[test]
    fn line_grid_covers_unit_interval() {
        let g = Grid::<f64>::periodic_unit(0.01, 1.0).unwrap();
        assert_eq!(g.points(), 100);
        assert!((g.coord(25).0 - 0.25).abs() < 1e-15);
    }

    #[test]
    fn plane_grid_is_cell_centred() {
        let g = Grid::<f64>::square(2.5, 50, 50).unwrap();
        let (x, y) = g.coord(17 + 50 * 17);
        assert!((x - 0.875).abs() < 1e-14 && (y - 0.875).abs() < 1e-14);
    }
}
