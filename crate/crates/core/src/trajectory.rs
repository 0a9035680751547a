//! Uniform time grids, sampled trajectories and the discrete norms used on them.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Uniform grid `t_k = t0 + k h` on `[t0, t0 + horizon]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    horizon: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        Self::with_start(0.0, horizon, n_steps)
    }

    /// Grid starting at `t0`; used for continuation windows.
    pub fn with_start(t0: f64, horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "horizon must be positive and finite, got {horizon}"
            )));
        }
        if n_steps == 0 {
            return Err(Error::InvalidParameter("n_steps must be positive".into()));
        }
        if !t0.is_finite() {
            return Err(Error::InvalidParameter("grid start must be finite".into()));
        }
        Ok(Self { t0, horizon, n_steps })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    pub fn end(&self) -> f64 {
        self.t0 + self.horizon
    }

    /// Time of node `k`. The last node is pinned to the exact end point.
    pub fn node(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.end()
        } else {
            self.t0 + k as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n_steps).map(move |k| self.node(k))
    }

    /// Composite trapezoid rule for samples taken at the grid nodes.
    pub fn trapezoid(&self, samples: &[f64]) -> f64 {
        debug_assert_eq!(samples.len(), self.n_nodes());
        let h = self.step();
        samples.windows(2).map(|w| 0.5 * h * (w[0] + w[1])).sum()
    }

    /// Running trapezoid integral; entry `k` approximates `∫_{t0}^{t_k}`.
    pub fn cumulative_trapezoid(&self, samples: &[f64]) -> Vec<f64> {
        let h = self.step();
        let mut out = Vec::with_capacity(samples.len());
        let mut acc = 0.0;
        out.push(acc);
        for w in samples.windows(2) {
            acc += 0.5 * h * (w[0] + w[1]);
            out.push(acc);
        }
        out
    }

    /// Trapezoid integral of a function sampled at the nodes.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        let samples: Vec<f64> = self.nodes().map(&mut f).collect();
        self.trapezoid(&samples)
    }
}

/// Vector samples at every node of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    grid: TimeGrid,
    values: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn new(grid: TimeGrid, values: Vec<DVector<f64>>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::DimensionMismatch {
                what: "trajectory length",
                expected: grid.n_nodes(),
                found: values.len(),
            });
        }
        if let Some(first) = values.first() {
            let dim = first.len();
            if let Some(bad) = values.iter().find(|v| v.len() != dim) {
                return Err(Error::DimensionMismatch {
                    what: "trajectory sample",
                    expected: dim,
                    found: bad.len(),
                });
            }
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: TimeGrid, value: &DVector<f64>) -> Self {
        Self {
            grid,
            values: vec![value.clone(); grid.n_nodes()],
        }
    }

    pub fn from_fn<F: FnMut(f64) -> DVector<f64>>(grid: TimeGrid, f: F) -> Result<Self> {
        let values = grid.nodes().map(f).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[DVector<f64>] {
        &self.values
    }

    pub fn into_values(self) -> Vec<DVector<f64>> {
        self.values
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn at(&self, k: usize) -> &DVector<f64> {
        &self.values[k]
    }

    pub fn first(&self) -> &DVector<f64> {
        &self.values[0]
    }

    pub fn last(&self) -> &DVector<f64> {
        self.values.last().expect("trajectory is never empty")
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.iter().all(|x| x.is_finite()))
    }

    /// `max_k |u_k|`.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `max_k |self_k - other_k|`.
    pub fn sup_distance(&self, other: &Trajectory) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Exponentially weighted sup distance `max_k e^{-L (t_k - t0)} |self_k - other_k|`.
    pub fn chi_distance(&self, other: &Trajectory, weight: f64) -> f64 {
        let t0 = self.grid.t0();
        self.grid
            .nodes()
            .zip(self.values.iter().zip(&other.values))
            .map(|(t, (a, b))| (-weight * (t - t0)).exp() * (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Squared pointwise distance `|self_k - other_k|^2` per node.
    pub fn pointwise_distance_sq(&self, other: &Trajectory) -> Vec<f64> {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm_squared())
            .collect()
    }
}

/// Subgradient samples `eta_k ∈ dPsi(v_{k+1})`, one per time step.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionTrajectory {
    grid: TimeGrid,
    values: Vec<DVector<f64>>,
}

impl SelectionTrajectory {
    pub fn new(grid: TimeGrid, values: Vec<DVector<f64>>) -> Result<Self> {
        if values.len() != grid.n_steps() {
            return Err(Error::DimensionMismatch {
                what: "selection trajectory length",
                expected: grid.n_steps(),
                found: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[DVector<f64>] {
        &self.values
    }

    pub fn at(&self, k: usize) -> &DVector<f64> {
        &self.values[k]
    }
}
