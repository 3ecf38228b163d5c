//! Uniform periodic tensor grids and real fields sampled on them.
//!
//! A [`Grid`] covers the box `[-R, R)^d` with `n` points per axis and spacing
//! `h = 2R/n`; the two faces `x = -R` and `x = R` are identified. Values of a
//! [`Field`] are stored row-major, axis 0 slowest.

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shared transform plans and the squared wavenumber table for one grid shape.
struct Plan {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    xi_sq: Vec<f64>,
}

#[derive(Clone)]
pub struct Grid {
    dim: usize,
    half_width: f64,
    n: usize,
    plan: Arc<Plan>,
}

/// Plain description of a grid, used for serialization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridShape {
    pub dim: usize,
    pub half_width: f64,
    pub points_per_axis: usize,
}

impl Grid {
    pub fn new(dim: usize, half_width: f64, n: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if n < 8 || !n.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be even and >= 8, got {n}"
            )));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "half width must be positive, got {half_width}"
            )));
        }
        let total = n
            .checked_pow(dim as u32)
            .filter(|&t| t <= 1 << 28)
            .ok_or_else(|| Error::InvalidGrid(format!("{n}^{dim} points is too many")))?;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let axis: Vec<f64> = (0..n)
            .map(|j| wavenumber_index(j, n) as f64 * std::f64::consts::PI / half_width)
            .collect();
        let mut xi_sq = vec![0.0; total];
        for (flat, slot) in xi_sq.iter_mut().enumerate() {
            let mut rest = flat;
            let mut acc = 0.0;
            for _ in 0..dim {
                let k = axis[rest % n];
                acc += k * k;
                rest /= n;
            }
            *slot = acc;
        }
        Ok(Self {
            dim,
            half_width,
            n,
            plan: Arc::new(Plan {
                forward,
                inverse,
                xi_sq,
            }),
        })
    }

    /// Grid whose spacing is exactly `spacing` and whose half width is at
    /// least `min_half_width`; the point count is rounded up to an even number.
    pub fn with_spacing(dim: usize, min_half_width: f64, spacing: f64) -> Result<Self> {
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidGrid(format!("spacing {spacing}")));
        }
        let mut n = (2.0 * min_half_width / spacing - 1e-9).ceil().max(8.0) as usize;
        if n % 2 == 1 {
            n += 1;
        }
        Self::new(dim, 0.5 * n as f64 * spacing, n)
    }

    pub fn from_shape(shape: GridShape) -> Result<Self> {
        Self::new(shape.dim, shape.half_width, shape.points_per_axis)
    }

    pub fn shape(&self) -> GridShape {
        GridShape {
            dim: self.dim,
            half_width: self.half_width,
            points_per_axis: self.n,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.plan.xi_sq.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight `h^d` of the rectangle rule.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Integer wavenumbers `k` in `[-n/2, n/2)`, in transform order.
    pub fn wavenumber_indices(&self) -> Vec<i64> {
        (0..self.n).map(|j| wavenumber_index(j, self.n)).collect()
    }

    /// Angular wavenumbers `ξ_k = πk/R`, in transform order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        self.wavenumber_indices()
            .into_iter()
            .map(|k| k as f64 * std::f64::consts::PI / self.half_width)
            .collect()
    }

    pub(crate) fn xi_sq(&self) -> &[f64] {
        &self.plan.xi_sq
    }

    pub fn axis_coordinate(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    pub fn axis_coordinates(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.axis_coordinate(i)).collect()
    }

    /// Per-axis indices of a flat (row-major) index.
    pub fn unravel(&self, flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim];
        let mut rest = flat;
        for slot in idx.iter_mut().rev() {
            *slot = rest % self.n;
            rest /= self.n;
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.unravel(flat)
            .into_iter()
            .map(|i| self.axis_coordinate(i))
            .collect()
    }

    /// Visit every grid point as `(flat index, coordinates)`.
    pub fn for_each_point(&self, mut visit: impl FnMut(usize, &[f64])) {
        let axis = self.axis_coordinates();
        let mut x = vec![0.0; self.dim];
        for flat in 0..self.len() {
            let mut rest = flat;
            for slot in x.iter_mut().rev() {
                *slot = axis[rest % self.n];
                rest /= self.n;
            }
            visit(flat, &x);
        }
    }

    /// Minimal-image displacement `x - y` on the torus, per axis.
    pub fn periodic_displacement(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let period = 2.0 * self.half_width;
        x.iter()
            .zip(y)
            .map(|(a, b)| {
                let d = a - b;
                d - period * (d / period).round()
            })
            .collect()
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self.dim == other.dim && self.n == other.n && self.half_width == other.half_width
    }

    /// In-place forward (`inverse = false`) or unnormalized inverse transform
    /// over every axis.
    pub(crate) fn transform(&self, data: &mut [Complex<f64>], inverse: bool) {
        let fft = if inverse {
            &self.plan.inverse
        } else {
            &self.plan.forward
        };
        let n = self.n;
        let total = data.len();
        let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        let mut line = vec![Complex::new(0.0, 0.0); n];
        for axis in 0..self.dim {
            let stride = n.pow((self.dim - 1 - axis) as u32);
            if stride == 1 {
                fft.process_with_scratch(data, &mut scratch);
                continue;
            }
            let block = stride * n;
            for outer in (0..total).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    for (k, slot) in line.iter_mut().enumerate() {
                        *slot = data[base + k * stride];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for (k, value) in line.iter().enumerate() {
                        data[base + k * stride] = *value;
                    }
                }
            }
        }
    }
}

fn wavenumber_index(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.same_shape(other)
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.dim)
            .field("half_width", &self.half_width)
            .field("n", &self.n)
            .finish()
    }
}

/// Real samples on a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "field has {} values, grid has {} points",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    /// Build without the finiteness check; callers guarantee the invariant
    /// or check it afterwards.
    pub(crate) fn from_raw(grid: &Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::from_raw(grid, vec![0.0; grid.len()])
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        Self::from_raw(grid, vec![value; grid.len()])
    }

    pub fn from_fn(grid: &Grid, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let mut values = vec![0.0; grid.len()];
        grid.for_each_point(|flat, x| values[flat] = f(x));
        Self::from_raw(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.values.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite)
        }
    }

    pub fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid.same_shape(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_raw(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, factor: f64) -> Field {
        self.map(|v| v * factor)
    }

    /// `self + factor * other`.
    pub fn axpy(&self, factor: f64, other: &Field) -> Result<Field> {
        self.check_same_grid(other)?;
        Ok(Field::from_raw(
            &self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + factor * b)
                .collect(),
        ))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}
