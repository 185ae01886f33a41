//! Uniform node-centred grids on the unit interval or unit square, scalar
//! fields on them, and the Neumann Laplacian.
//!
//! Boundary nodes use a mirrored ghost value (`u[-1] = u[1]`), which keeps
//! the stencil second order and enforces a zero normal derivative. The
//! trapezoidal node weights make `W·Δ` symmetric, so the weighted sum of a
//! discrete Laplacian vanishes exactly (up to rounding).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    n: usize,
    h: f64,
}

impl Grid {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::Domain(format!("grid dimension must be 1 or 2, got {dim}")));
        }
        if n < 3 {
            return Err(Error::Domain(format!("grid needs at least 3 points per axis, got {n}")));
        }
        Ok(Self {
            dim,
            n,
            h: 1.0 / (n - 1) as f64,
        })
    }

    pub fn line(n: usize) -> Result<Self> {
        Self::new(1, n)
    }

    pub fn square(n: usize) -> Result<Self> {
        Self::new(2, n)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinates of node `k` (row-major, `x` fastest). `y` is 0 in 1D.
    pub fn coords(&self, k: usize) -> (f64, f64) {
        let i = k % self.n;
        let j = k / self.n;
        (i as f64 * self.h, j as f64 * self.h)
    }

    fn axis_weight(&self, i: usize) -> f64 {
        if i == 0 || i == self.n - 1 {
            0.5 * self.h
        } else {
            self.h
        }
    }

    /// Trapezoidal quadrature weights; they sum to 1 on the unit domain.
    pub fn weights(&self) -> Vec<f64> {
        (0..self.len())
            .map(|k| {
                let i = k % self.n;
                let j = k / self.n;
                match self.dim {
                    1 => self.axis_weight(i),
                    _ => self.axis_weight(i) * self.axis_weight(j),
                }
            })
            .collect()
    }

    /// Neumann Laplacian of `u` written into `out`.
    pub fn laplacian_into(&self, u: &[f64], out: &mut [f64]) {
        let n = self.n;
        let inv_h2 = 1.0 / (self.h * self.h);
        // Mirror ghost: neighbour outside the domain is the reflected interior node.
        let lo = |i: usize| if i == 0 { 1 } else { i - 1 };
        let hi = |i: usize| if i == n - 1 { n - 2 } else { i + 1 };
        match self.dim {
            1 => {
                for i in 0..n {
                    out[i] = ((u[lo(i)] + u[hi(i)]) - 2.0 * u[i]) * inv_h2;
                }
            }
            _ => {
                for j in 0..n {
                    for i in 0..n {
                        let k = j * n + i;
                        let horizontal = u[j * n + lo(i)] + u[j * n + hi(i)];
                        let vertical = u[lo(j) * n + i] + u[hi(j) * n + i];
                        out[k] = ((horizontal + vertical) - 4.0 * u[k]) * inv_h2;
                    }
                }
            }
        }
    }
}

/// Discrete L1, L2 and max norms with trapezoidal weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub l2: f64,
    pub linf: f64,
    pub l1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Domain(format!(
                "field has {} values, grid has {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite field value at point {k}")));
        }
        Ok(Self { grid, values })
    }

    /// Builds a field without the finiteness check; callers guarantee it.
    pub(crate) fn from_vec(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|k| {
                let (x, y) = grid.coords(k);
                f(x, y)
            })
            .collect();
        Self { grid, values }
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

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Largest pointwise absolute difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn laplacian_neumann(&self) -> Self {
        let mut out = vec![0.0; self.values.len()];
        self.grid.laplacian_into(&self.values, &mut out);
        Self {
            grid: self.grid,
            values: out,
        }
    }

    pub fn norms(&self) -> Norms {
        let w = self.grid.weights();
        let mut l1 = 0.0;
        let mut l2 = 0.0;
        let mut linf: f64 = 0.0;
        for (v, wk) in self.values.iter().zip(&w) {
            l1 += wk * v.abs();
            l2 += wk * v * v;
            linf = linf.max(v.abs());
        }
        Norms {
            l2: l2.sqrt(),
            linf,
            l1,
        }
    }

    /// Weighted integral over the unit domain.
    pub fn integral(&self) -> f64 {
        self.grid
            .weights()
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * v)
            .sum()
    }

    /// Largest absolute forward difference quotient along any axis.
    pub fn max_gradient(&self) -> f64 {
        let n = self.grid.n;
        let h = self.grid.h;
        let mut g: f64 = 0.0;
        for k in 0..self.values.len() {
            let i = k % n;
            let j = k / n;
            if i + 1 < n {
                g = g.max((self.values[k + 1] - self.values[k]).abs() / h);
            }
            if self.grid.dim == 2 && j + 1 < n {
                g = g.max((self.values[k + n] - self.values[k]).abs() / h);
            }
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn rejects_bad_grids_and_fields() {
        assert!(Grid::new(3, 10).is_err());
        assert!(Grid::line(2).is_err());
        let g = Grid::line(5).unwrap();
        assert!(ScalarField::new(g, vec![0.0; 4]).is_err());
        assert!(ScalarField::new(g, vec![0.0, 1.0, f64::NAN, 0.0, 0.0]).is_err());
    }

    #[test]
    fn constant_has_zero_laplacian() {
        for grid in [Grid::line(17).unwrap(), Grid::square(9).unwrap()] {
            let lap = ScalarField::constant(grid, 0.37).laplacian_neumann();
            assert!(lap.values().iter().all(|&v| v.abs() < 1e-10));
        }
    }

    fn cos_error_1d(n: usize) -> f64 {
        let g = Grid::line(n).unwrap();
        let u = ScalarField::from_fn(g, |x, _| (PI * x).cos());
        let exact = ScalarField::from_fn(g, |x, _| -PI * PI * (PI * x).cos());
        u.laplacian_neumann().max_abs_diff(&exact)
    }

    fn cos_error_2d(n: usize) -> f64 {
        let g = Grid::square(n).unwrap();
        let u = ScalarField::from_fn(g, |x, y| (PI * x).cos() * (2.0 * PI * y).cos());
        let exact = u.map(|v| -5.0 * PI * PI * v);
        u.laplacian_neumann().max_abs_diff(&exact)
    }

    #[test]
    fn laplacian_second_order_1d() {
        let ratio = cos_error_1d(65) / cos_error_1d(129);
        assert!((3.6..=4.4).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn laplacian_second_order_2d() {
        let ratio = cos_error_2d(65) / cos_error_2d(129);
        assert!((3.6..=4.4).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn norms_of_trivial_fields() {
        let g = Grid::square(11).unwrap();
        let z = ScalarField::constant(g, 0.0).norms();
        assert_eq!((z.l1, z.l2, z.linf), (0.0, 0.0, 0.0));
        let c = ScalarField::constant(g, -2.5).norms();
        assert!((c.l2 - 2.5).abs() < 1e-14);
        assert!((c.l1 - 2.5).abs() < 1e-14);
        assert_eq!(c.linf, 2.5);
    }

    #[test]
    fn norms_match_direct_summation() {
        // Independent double loop over the tensor trapezoid rule.
        let n = 13;
        let g = Grid::square(n).unwrap();
        let u = ScalarField::from_fn(g, |x, y| (7.3 * x + 1.1).sin() * (3.9 * y).cos() + x * y);
        let h = 1.0 / (n - 1) as f64;
        let (mut s1, mut s2, mut smax) = (0.0f64, 0.0f64, 0.0f64);
        for j in 0..n {
            for i in 0..n {
                let wx = if i == 0 || i == n - 1 { h / 2.0 } else { h };
                let wy = if j == 0 || j == n - 1 { h / 2.0 } else { h };
                let v = u.values()[j * n + i];
                s1 += wx * wy * v.abs();
                s2 += wx * wy * v * v;
                smax = smax.max(v.abs());
            }
        }
        let got = u.norms();
        assert!((got.l1 - s1).abs() <= 1e-12 * s1);
        assert!((got.l2 - s2.sqrt()).abs() <= 1e-12 * s2.sqrt());
        assert_eq!(got.linf, smax);
    }

    proptest! {
        #[test]
        fn weighted_laplacian_sums_to_zero(vals in proptest::collection::vec(-1.0f64..1.0, 81), two_d in any::<bool>()) {
            let grid = if two_d { Grid::square(9).unwrap() } else { Grid::line(81).unwrap() };
            let u = ScalarField::new(grid, vals).unwrap();
            let lap = u.laplacian_neumann();
            let scale: f64 = lap.values().iter().zip(grid.weights()).map(|(v, w)| (v * w).abs()).sum();
            prop_assert!(lap.integral().abs() <= 1e-10 * scale.max(1.0));
        }

        #[test]
        fn mirror_symmetry_is_preserved(half in proptest::collection::vec(-1.0f64..1.0, 9)) {
            let n = 17;
            let grid = Grid::line(n).unwrap();
            let vals: Vec<f64> = (0..n).map(|i| half[i.min(n - 1 - i)]).collect();
            let lap = ScalarField::new(grid, vals).unwrap().laplacian_neumann();
            for i in 0..n {
                prop_assert_eq!(lap.values()[i], lap.values()[n - 1 - i]);
            }
        }
    }
}
