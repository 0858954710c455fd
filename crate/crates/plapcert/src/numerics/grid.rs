//! Uniform grids on [0,1] and piecewise-linear grid functions.

use crate::real::{real, Real};
use serde::{Deserialize, Serialize};

/// Uniform partition of [0,1] into `n_intervals` cells (`n_intervals + 1` nodes).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    n_intervals: usize,
}

impl Grid {
    /// `n_intervals` must be at least 1.
    pub fn new(n_intervals: usize) -> Self {
        assert!(n_intervals >= 1, "grid needs at least one interval");
        Self { n_intervals }
    }

    pub fn n_intervals(&self) -> usize {
        self.n_intervals
    }

    pub fn n_nodes(&self) -> usize {
        self.n_intervals + 1
    }

    /// Node spacing `1 / n_intervals`.
    pub fn spacing<R: Real>(&self) -> R {
        real::<R>(1.0) / R::from_usize(self.n_intervals).unwrap()
    }

    /// `k`-th node, `t_k = k / n`. Nodes are strictly increasing with
    /// `t_0 = 0` and `t_n = 1`.
    pub fn node<R: Real>(&self, k: usize) -> R {
        debug_assert!(k <= self.n_intervals);
        R::from_usize(k).unwrap() / R::from_usize(self.n_intervals).unwrap()
    }

    /// Index of the cell containing `x`, clamped to `[0, n-1]`.
    pub fn cell_of<R: Real>(&self, x: R) -> usize {
        let n = R::from_usize(self.n_intervals).unwrap();
        let idx = (x * n).floor();
        let idx = idx.to_usize().unwrap_or(0);
        idx.min(self.n_intervals - 1)
    }
}

/// Nodal values of a function on a [`Grid`], interpreted piecewise-linearly
/// between nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction<R> {
    grid: Grid,
    values: Vec<R>,
}

impl<R: Real> GridFunction<R> {
    pub fn new(grid: Grid, values: Vec<R>) -> Self {
        assert_eq!(
            values.len(),
            grid.n_nodes(),
            "value count must match node count"
        );
        Self { grid, values }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(R) -> R) -> Self {
        let values = (0..grid.n_nodes()).map(|k| f(grid.node(k))).collect();
        Self { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![R::zero(); grid.n_nodes()],
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[R] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [R] {
        &mut self.values
    }

    /// Piecewise-linear interpolation; `x` is clamped to [0,1].
    pub fn at(&self, x: R) -> R {
        let x = x.max(R::zero()).min(R::one());
        let cell = self.grid.cell_of(x);
        let t0: R = self.grid.node(cell);
        let h: R = self.grid.spacing();
        let theta = (x - t0) / h;
        self.values[cell] + theta * (self.values[cell + 1] - self.values[cell])
    }

    /// Sup norm over the nodes.
    pub fn max_abs(&self) -> R {
        self.values
            .iter()
            .fold(R::zero(), |acc, v| acc.max(v.abs()))
    }

    /// Largest nodal value.
    pub fn max_value(&self) -> R {
        self.values
            .iter()
            .fold(R::neg_infinity(), |acc, v| acc.max(*v))
    }

    /// Smallest nodal value over nodes with `t_k` in `[lo, hi]`.
    pub fn min_on(&self, lo: R, hi: R) -> R {
        let mut best = R::infinity();
        for k in 0..self.grid.n_nodes() {
            let t: R = self.grid.node(k);
            if t >= lo && t <= hi {
                best = best.min(self.values[k]);
            }
        }
        best
    }

    /// Sup-norm distance to another function on the same grid.
    pub fn sup_distance(&self, other: &Self) -> R {
        assert_eq!(self.grid, other.grid, "grids must match");
        self.values
            .iter()
            .zip(&other.values)
            .fold(R::zero(), |acc, (a, b)| acc.max((*a - *b).abs()))
    }

    /// Pointwise convex blend `(1 - omega) self + omega other`.
    pub fn blend(&self, other: &Self, omega: R) -> Self {
        assert_eq!(self.grid, other.grid, "grids must match");
        let one = R::one();
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (one - omega) * *a + omega * *b)
            .collect();
        Self {
            grid: self.grid,
            values,
        }
    }
}

/// Cumulative trapezoid integral: returns `W` with `W(t_k) = int_0^{t_k} w`.
///
/// `W` is nondecreasing whenever `w >= 0` at the nodes and starts at 0.
pub fn cumulative_integral<R: Real>(w: &GridFunction<R>) -> GridFunction<R> {
    let grid = w.grid();
    let h: R = grid.spacing();
    let half = real::<R>(0.5);
    let mut out = Vec::with_capacity(grid.n_nodes());
    let mut acc = R::zero();
    out.push(acc);
    for k in 0..grid.n_intervals() {
        acc = acc + h * half * (w.values()[k] + w.values()[k + 1]);
        out.push(acc);
    }
    GridFunction::new(grid, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_are_uniform_and_span_unit_interval() {
        let g = Grid::new(4);
        let nodes: Vec<f64> = (0..g.n_nodes()).map(|k| g.node(k)).collect();
        assert_eq!(nodes, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(g.spacing::<f64>(), 0.25);
    }

    #[test]
    fn cumulative_of_unit_weight_is_the_node_vector() {
        let g = Grid::new(4);
        let w = GridFunction::from_fn(g, |_t: f64| 1.0);
        let cum = cumulative_integral(&w);
        assert_eq!(cum.values(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn cumulative_of_identity_weight_hits_half_at_one() {
        let g = Grid::new(1024);
        let w = GridFunction::from_fn(g, |t: f64| t);
        let cum = cumulative_integral(&w);
        let last = *cum.values().last().unwrap();
        assert!((last - 0.5).abs() <= 1e-6, "got {last}");
        // nondecreasing for nonnegative weights
        for k in 0..g.n_intervals() {
            assert!(cum.values()[k] <= cum.values()[k + 1]);
        }
    }

    #[test]
    fn interpolation_is_linear_between_nodes() {
        let g = Grid::new(2);
        let f = GridFunction::new(g, vec![0.0_f64, 1.0, 0.0]);
        assert!((f.at(0.25) - 0.5).abs() < 1e-15);
        assert!((f.at(0.75) - 0.5).abs() < 1e-15);
        assert_eq!(f.at(-3.0), 0.0);
        assert_eq!(f.at(7.0), 0.0);
    }

    #[test]
    fn min_on_subinterval() {
        let g = Grid::new(4);
        let f = GridFunction::new(g, vec![5.0_f64, 4.0, 3.0, 2.0, 1.0]);
        assert_eq!(f.min_on(0.0, 0.5), 3.0);
        assert_eq!(f.min_on(0.25, 1.0), 1.0);
    }

    #[test]
    fn works_in_f32() {
        let g = Grid::new(8);
        let w = GridFunction::from_fn(g, |_t: f32| 2.0);
        let cum = cumulative_integral(&w);
        assert!((cum.at(1.0) - 2.0).abs() < 1e-6);
    }
}
