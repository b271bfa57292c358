//! Complex fields on a [`Grid`] and the unitary Fourier transform.
//!
//! The continuum convention is `f^(xi) = (2 pi)^(-d/2) ∫ f(x) e^{-i x.xi} dx`.
//! On the lattice this is realised as a DFT with weights `(dx / sqrt(2 pi))^d`
//! forward and `(dxi / sqrt(2 pi))^d` inverse, which makes Plancherel exact:
//! `sum |f|^2 dx^d = sum |f^|^2 dxi^d`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Grid, MAX_DIM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    Physical,
    Frequency,
}

impl Space {
    pub fn opposite(self) -> Space {
        match self {
            Space::Physical => Space::Frequency,
            Space::Frequency => Space::Physical,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("field is already in {0:?} space; transform target must be the opposite space")]
    WrongSpace(Space),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("expected {expected} values, got {got}")]
    Length { expected: usize, got: usize },
}

#[derive(Debug, Clone)]
pub struct SpectralField {
    grid: Arc<Grid>,
    values: Vec<Complex64>,
    space: Space,
}

impl SpectralField {
    pub fn zeros(grid: &Arc<Grid>, space: Space) -> Self {
        SpectralField {
            grid: Arc::clone(grid),
            values: vec![Complex64::default(); grid.len()],
            space,
        }
    }

    pub fn from_values(
        grid: &Arc<Grid>,
        values: Vec<Complex64>,
        space: Space,
    ) -> Result<Self, FieldError> {
        if values.len() != grid.len() {
            return Err(FieldError::Length {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(SpectralField {
            grid: Arc::clone(grid),
            values,
            space,
        })
    }

    /// Samples `f(x)` on the physical lattice.
    pub fn from_physical_fn<F>(grid: &Arc<Grid>, mut f: F) -> Self
    where
        F: FnMut(&[f64]) -> Complex64,
    {
        let dim = grid.dim();
        let mut x = [0.0; MAX_DIM];
        let values = (0..grid.len())
            .map(|i| {
                grid.position_at(i, &mut x);
                f(&x[..dim])
            })
            .collect();
        SpectralField {
            grid: Arc::clone(grid),
            values,
            space: Space::Physical,
        }
    }

    /// Samples `f^(xi)` on the frequency lattice.
    pub fn from_frequency_fn<F>(grid: &Arc<Grid>, mut f: F) -> Self
    where
        F: FnMut(&[f64]) -> Complex64,
    {
        let dim = grid.dim();
        let mut xi = [0.0; MAX_DIM];
        let values = (0..grid.len())
            .map(|i| {
                grid.freq_at(i, &mut xi);
                f(&xi[..dim])
            })
            .collect();
        SpectralField {
            grid: Arc::clone(grid),
            values,
            space: Space::Frequency,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// Unitary transform into `target`, which must be the opposite space.
    pub fn transform(&self, target: Space) -> Result<SpectralField, FieldError> {
        if self.space == target {
            return Err(FieldError::WrongSpace(self.space));
        }
        let grid = &self.grid;
        let d = grid.dim() as i32;
        let mut data = self.values.clone();
        match target {
            Space::Frequency => {
                grid.fft_in_place(&mut data, false);
                let w = (grid.spacing() / (2.0 * PI).sqrt()).powi(d);
                for (i, v) in data.iter_mut().enumerate() {
                    *v *= w * grid.checkerboard(i);
                }
            }
            Space::Physical => {
                for (i, v) in data.iter_mut().enumerate() {
                    *v *= grid.checkerboard(i);
                }
                grid.fft_in_place(&mut data, true);
                let w = (grid.freq_spacing() / (2.0 * PI).sqrt()).powi(d);
                for v in data.iter_mut() {
                    *v *= w;
                }
            }
        }
        Ok(SpectralField {
            grid: Arc::clone(grid),
            values: data,
            space: target,
        })
    }

    /// Returns the field in `space`, transforming only when needed.
    pub fn in_space(&self, space: Space) -> SpectralField {
        if self.space == space {
            self.clone()
        } else {
            self.transform(space).expect("opposite space")
        }
    }

    pub fn to_frequency(&self) -> SpectralField {
        self.in_space(Space::Frequency)
    }

    pub fn to_physical(&self) -> SpectralField {
        self.in_space(Space::Physical)
    }

    pub(crate) fn check_compatible(&self, other: &SpectralField) -> Result<(), FieldError> {
        if self.grid != other.grid {
            Err(FieldError::GridMismatch)
        } else {
            Ok(())
        }
    }

    /// `self + a * other`, with `other` moved into `self`'s space if needed.
    pub fn axpy(&self, a: Complex64, other: &SpectralField) -> Result<SpectralField, FieldError> {
        self.check_compatible(other)?;
        let other = other.in_space(self.space);
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| x + a * y)
            .collect();
        Ok(SpectralField {
            grid: Arc::clone(&self.grid),
            values,
            space: self.space,
        })
    }

    pub fn add(&self, other: &SpectralField) -> Result<SpectralField, FieldError> {
        self.axpy(Complex64::new(1.0, 0.0), other)
    }

    pub fn sub(&self, other: &SpectralField) -> Result<SpectralField, FieldError> {
        self.axpy(Complex64::new(-1.0, 0.0), other)
    }

    pub fn scale(&self, a: Complex64) -> SpectralField {
        SpectralField {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|v| a * v).collect(),
            space: self.space,
        }
    }

    /// Multiplies by `m(xi)` in frequency space; the result is in frequency space.
    pub fn apply_multiplier<F>(&self, m: F) -> SpectralField
    where
        F: Fn(&[f64]) -> Complex64,
    {
        let mut out = self.to_frequency();
        let grid = Arc::clone(&self.grid);
        let dim = grid.dim();
        let mut xi = [0.0; MAX_DIM];
        for (i, v) in out.values.iter_mut().enumerate() {
            grid.freq_at(i, &mut xi);
            *v *= m(&xi[..dim]);
        }
        out
    }

    /// Pointwise product in physical space.
    pub fn pointwise_mul(&self, other: &SpectralField) -> Result<SpectralField, FieldError> {
        self.check_compatible(other)?;
        let a = self.to_physical();
        let b = other.to_physical();
        let values = a.values.iter().zip(&b.values).map(|(x, y)| x * y).collect();
        Ok(SpectralField {
            grid: Arc::clone(&self.grid),
            values,
            space: Space::Physical,
        })
    }

    pub fn conj(&self) -> SpectralField {
        // conj of f(x) has transform conj(f^(-xi))
        let phys = self.to_physical();
        SpectralField {
            grid: Arc::clone(&self.grid),
            values: phys.values.iter().map(|v| v.conj()).collect(),
            space: Space::Physical,
        }
    }

    /// L^2 norm with the quadrature weight of the field's current space.
    pub fn l2_norm(&self) -> f64 {
        let w = match self.space {
            Space::Physical => self.grid.cell_volume(),
            Space::Frequency => self.grid.freq_cell_volume(),
        };
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * w).sqrt()
    }

    /// Largest modulus over the lattice in the current space.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Physical-space `L^p` norm by lattice quadrature; `p = inf` gives the sup.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let phys = self.to_physical();
        if p.is_infinite() {
            return phys.sup_norm();
        }
        let w = self.grid.cell_volume();
        (phys.values.iter().map(|v| v.norm().powf(p)).sum::<f64>() * w).powf(1.0 / p)
    }

    /// Largest absolute difference against another field in a common space.
    pub fn max_abs_diff(&self, other: &SpectralField) -> f64 {
        let other = other.in_space(self.space);
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(grid: &Arc<Grid>, seed: u64) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..grid.len())
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        SpectralField::from_values(grid, values, Space::Physical).unwrap()
    }

    #[test]
    fn round_trip_and_plancherel_all_dims() {
        for (dim, n) in [(1, 64), (2, 16), (3, 8), (4, 4), (5, 4)] {
            let g = Grid::new(dim, n, 7.3).unwrap();
            let f = random_field(&g, dim as u64);
            let fh = f.transform(Space::Frequency).unwrap();
            let back = fh.transform(Space::Physical).unwrap();
            let scale = f.sup_norm();
            assert!(back.max_abs_diff(&f) / scale < 1e-12, "dim {dim}");
            let rel = (fh.l2_norm() - f.l2_norm()).abs() / f.l2_norm();
            assert!(rel < 1e-10, "dim {dim}: {rel}");
        }
    }

    #[test]
    fn wrong_tag_is_rejected() {
        let g = Grid::new(1, 8, 1.0).unwrap();
        let f = SpectralField::zeros(&g, Space::Physical);
        assert_eq!(
            f.transform(Space::Physical).unwrap_err(),
            FieldError::WrongSpace(Space::Physical)
        );
    }

    #[test]
    fn gaussian_is_self_dual() {
        let g = Grid::new(1, 256, 40.0).unwrap();
        let f = SpectralField::from_physical_fn(&g, |x| Complex64::new((-x[0] * x[0] / 2.0).exp(), 0.0));
        let fh = f.to_frequency();
        let mut xi = [0.0; MAX_DIM];
        for i in 0..g.len() {
            g.freq_at(i, &mut xi);
            let expect = (-xi[0] * xi[0] / 2.0).exp();
            assert!((fh.values()[i] - expect).norm() < 1e-12);
            let mirror = fh.values()[g.negated(i)];
            if i != g.len() / 2 {
                assert!((fh.values()[i] - mirror).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn product_of_transforms_matches_convolution_normalisation() {
        // F(fg) = (2 pi)^(-d/2) dxi^d sum f^(xi - eta) g^(eta)
        let g = Grid::new(1, 32, 9.0).unwrap();
        let f1 = random_field(&g, 1);
        let f2 = random_field(&g, 2);
        let prod = f1.pointwise_mul(&f2).unwrap().to_frequency();
        let a = f1.to_frequency();
        let b = f2.to_frequency();
        let c = g.freq_spacing() / (2.0 * PI).sqrt();
        for k in 0..g.len() {
            let mut acc = Complex64::default();
            for m in 0..g.len() {
                acc += a.values()[g.difference(k, m)] * b.values()[m];
            }
            assert!((prod.values()[k] - c * acc).norm() < 1e-12);
        }
    }
}
