//! The time-independent external potential and its sampled derivatives.

use serde::Serialize;

use crate::grid::{Field, Grid, VectorField};

/// Closed-form potential family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PotentialSpec {
    Zero,
    /// `amplitude * exp(-|x|^2 / (2 width^2))`
    Gaussian { amplitude: f64, width: f64 },
}

impl Default for PotentialSpec {
    fn default() -> Self {
        PotentialSpec::Gaussian {
            amplitude: 0.5,
            width: 0.5,
        }
    }
}

impl PotentialSpec {
    pub fn value(&self, x: f64, y: f64) -> f64 {
        match *self {
            PotentialSpec::Zero => 0.0,
            PotentialSpec::Gaussian { amplitude, width } => {
                amplitude * (-(x * x + y * y) / (2.0 * width * width)).exp()
            }
        }
    }

    pub fn gradient(&self, x: f64, y: f64) -> [f64; 2] {
        match *self {
            PotentialSpec::Zero => [0.0, 0.0],
            PotentialSpec::Gaussian { width, .. } => {
                let phi = self.value(x, y);
                let w2 = width * width;
                [-x / w2 * phi, -y / w2 * phi]
            }
        }
    }

    pub fn laplacian(&self, x: f64, y: f64) -> f64 {
        match *self {
            PotentialSpec::Zero => 0.0,
            PotentialSpec::Gaussian { width, .. } => {
                let phi = self.value(x, y);
                let w2 = width * width;
                phi * ((x * x + y * y) / (w2 * w2) - 2.0 / w2)
            }
        }
    }

    pub fn is_valid(&self) -> bool {
        match *self {
            PotentialSpec::Zero => true,
            PotentialSpec::Gaussian { amplitude, width } => {
                amplitude.is_finite() && amplitude >= 0.0 && width.is_finite() && width > 0.0
            }
        }
    }
}

/// `Phi`, `grad Phi` and `lap Phi` sampled at the cell centers of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialField {
    pub spec: PotentialSpec,
    pub phi: Field,
    pub grad_phi: VectorField,
    pub lap_phi: Field,
}

impl PotentialField {
    pub fn sample(spec: PotentialSpec, grid: &Grid) -> Self {
        Self {
            spec,
            phi: grid.sample(|x, y| spec.value(x, y)),
            grad_phi: grid.sample_vector(|x, y| spec.gradient(x, y)),
            lap_phi: grid.sample(|x, y| spec.laplacian(x, y)),
        }
    }

    pub fn zero(grid: &Grid) -> Self {
        Self::sample(PotentialSpec::Zero, grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_match_the_formula_exactly() {
        let grid = Grid::square(16, 1.0).unwrap();
        let spec = PotentialSpec::Gaussian {
            amplitude: 0.7,
            width: 0.4,
        };
        let pf = PotentialField::sample(spec, &grid);
        for (i, j, x, y) in grid.cells() {
            assert_eq!(pf.phi[(i, j)], spec.value(x, y));
            assert_eq!(pf.grad_phi.x[(i, j)], spec.gradient(x, y)[0]);
            assert_eq!(pf.lap_phi[(i, j)], spec.laplacian(x, y));
            assert!(pf.phi[(i, j)] >= 0.0);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let spec = PotentialSpec::Gaussian {
            amplitude: 1.3,
            width: 0.6,
        };
        let h = 1e-4;
        for &(x, y) in &[(0.1, -0.3), (0.7, 0.2), (-1.1, 0.9)] {
            let gx = (spec.value(x + h, y) - spec.value(x - h, y)) / (2.0 * h);
            let gy = (spec.value(x, y + h) - spec.value(x, y - h)) / (2.0 * h);
            let lap = (spec.value(x + h, y) + spec.value(x - h, y) + spec.value(x, y + h)
                + spec.value(x, y - h)
                - 4.0 * spec.value(x, y))
                / (h * h);
            let g = spec.gradient(x, y);
            assert!((g[0] - gx).abs() < 1e-7);
            assert!((g[1] - gy).abs() < 1e-7);
            assert!((spec.laplacian(x, y) - lap).abs() < 1e-5);
        }
    }
}
