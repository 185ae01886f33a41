use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};

/// Fields on a uniform time grid `t0, t0 + dt, …, t0 + steps·dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSeries {
    pub t0: f64,
    pub dt: f64,
    pub levels: Vec<ScalarField>,
}

impl FieldSeries {
    pub fn new(t0: f64, dt: f64, levels: Vec<ScalarField>) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::Domain(format!("time step must be positive, got {dt}")));
        }
        let Some(first) = levels.first() else {
            return Err(Error::Domain("empty time series".into()));
        };
        let grid = *first.grid();
        if levels.iter().any(|f| *f.grid() != grid) {
            return Err(Error::Domain("time series mixes grids".into()));
        }
        Ok(Self { t0, dt, levels })
    }

    /// `field` repeated on `steps + 1` levels.
    pub fn constant(t0: f64, dt: f64, steps: usize, field: &ScalarField) -> Self {
        Self {
            t0,
            dt,
            levels: vec![field.clone(); steps + 1],
        }
    }

    pub fn from_fn(t0: f64, dt: f64, steps: usize, f: impl Fn(f64) -> ScalarField) -> Self {
        Self {
            t0,
            dt,
            levels: (0..=steps).map(|k| f(t0 + k as f64 * dt)).collect(),
        }
    }

    pub fn grid(&self) -> &Grid {
        self.levels[0].grid()
    }

    pub fn steps(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn first(&self) -> &ScalarField {
        &self.levels[0]
    }

    pub fn last(&self) -> &ScalarField {
        &self.levels[self.levels.len() - 1]
    }

    pub fn min(&self) -> f64 {
        self.levels.iter().map(ScalarField::min).fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.levels.iter().map(ScalarField::max).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Copy) -> Self {
        Self {
            t0: self.t0,
            dt: self.dt,
            levels: self.levels.iter().map(|l| l.map(f)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64 + Copy) -> Self {
        Self {
            t0: self.t0,
            dt: self.dt,
            levels: self
                .levels
                .iter()
                .zip(&other.levels)
                .map(|(a, b)| a.zip_map(b, f))
                .collect(),
        }
    }

    /// Difference quotients `(u[n+1] − u[n]) / dt`, one per step.
    pub fn rates(&self) -> Vec<ScalarField> {
        self.levels
            .windows(2)
            .map(|w| w[1].zip_map(&w[0], |b, a| (b - a) / self.dt))
            .collect()
    }

    /// Max over all levels and points of `|self − other|`.
    pub fn sup_distance(&self, other: &Self) -> f64 {
        self.levels
            .iter()
            .zip(&other.levels)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }

    /// Discrete `L²(Q)` distance: trapezoid in time, node weights in space.
    pub fn l2q_distance(&self, other: &Self) -> f64 {
        let w = self.grid().weights();
        let last = self.levels.len() - 1;
        let mut acc = 0.0;
        for (k, (a, b)) in self.levels.iter().zip(&other.levels).enumerate() {
            let tw = if k == 0 || k == last { 0.5 * self.dt } else { self.dt };
            let s: f64 = a
                .values()
                .iter()
                .zip(b.values())
                .zip(&w)
                .map(|((x, y), wk)| wk * (x - y) * (x - y))
                .sum();
            acc += tw * s;
        }
        acc.sqrt()
    }
}
