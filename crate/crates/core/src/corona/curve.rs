//! Piecewise-linear vector functions on the line and lifted curves `phi: R -> W`.

use crate::error::{IlgError, Result};
use crate::grid::GridFunction;
use crate::heisenberg::{SampledMap, SubgroupSplit};
use crate::scalar::{lit, Scalar};

/// Continuous piecewise-linear map `R -> R^m` with increasing knots, extended by constants
/// outside the first and last knot.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear<T> {
    knots: Vec<T>,
    values: Vec<Vec<T>>,
}

impl<T: Scalar> PiecewiseLinear<T> {
    pub fn new(knots: Vec<T>, values: Vec<Vec<T>>) -> Result<Self> {
        if knots.is_empty() {
            return Err(IlgError::TooFewPoints { needed: 1, got: 0 });
        }
        if values.len() != knots.len() {
            return Err(IlgError::DimensionMismatch { expected: knots.len(), found: values.len() });
        }
        let m = values[0].len();
        if let Some(v) = values.iter().find(|v| v.len() != m) {
            return Err(IlgError::DimensionMismatch { expected: m, found: v.len() });
        }
        if knots.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(IlgError::InvalidParameter("knots must be strictly increasing".into()));
        }
        if knots.iter().chain(values.iter().flatten()).any(|c| !c.is_finite()) {
            return Err(IlgError::NonFinite("piecewise-linear map"));
        }
        Ok(Self { knots, values })
    }

    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    pub fn values(&self) -> &[Vec<T>] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    fn segment(&self, s: T) -> Option<usize> {
        let k = &self.knots;
        if k.len() < 2 || s <= k[0] || s >= k[k.len() - 1] {
            return None;
        }
        Some(k.partition_point(|&x| x <= s) - 1)
    }

    pub fn eval(&self, s: T) -> Vec<T> {
        let k = &self.knots;
        match self.segment(s) {
            Some(i) => {
                let u = (s - k[i]) / (k[i + 1] - k[i]);
                self.values[i]
                    .iter()
                    .zip(&self.values[i + 1])
                    .map(|(&a, &b)| a + (b - a) * u)
                    .collect()
            }
            None if s <= k[0] => self.values[0].clone(),
            None => self.values[k.len() - 1].clone(),
        }
    }

    /// Right derivative at `s` (zero outside the knot range).
    pub fn slope(&self, s: T) -> Vec<T> {
        let k = &self.knots;
        if k.len() < 2 || s < k[0] || s >= k[k.len() - 1] {
            return vec![T::zero(); self.dim()];
        }
        let i = k.partition_point(|&x| x <= s) - 1;
        self.segment_slope(i)
    }

    fn segment_slope(&self, i: usize) -> Vec<T> {
        let h = self.knots[i + 1] - self.knots[i];
        self.values[i].iter().zip(&self.values[i + 1]).map(|(&a, &b)| (b - a) / h).collect()
    }

    /// Largest Euclidean slope over the segments.
    pub fn lipschitz(&self) -> T {
        (0..self.knots.len().saturating_sub(1))
            .map(|i| crate::scalar::euclid(&self.segment_slope(i)))
            .fold(T::zero(), T::max)
    }
}

/// A curve `phi = (phi_2, ..., phi_{2n+1})` on the line in the intrinsic convention, given by
/// node values on a uniform grid. The horizontal components are linear between nodes; the
/// last component is the exact integral of
/// `phi'_{2n+1} = -phi_{n+1} + 1/2 sum_{i=2..n} (phi_i phi'_{n+i} - phi'_i phi_{n+i})`
/// on each cell, plus a linear drift making it match the node values.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedCurve<T> {
    n: usize,
    origin: T,
    step: T,
    nodes: Vec<Vec<T>>,
    drift: Vec<T>,
}

impl<T: Scalar> LiftedCurve<T> {
    /// `nodes[j]` is `(phi_2, ..., phi_{2n+1})` at `origin + j * step`.
    pub fn new(n: usize, origin: T, step: T, nodes: Vec<Vec<T>>) -> Result<Self> {
        if n == 0 {
            return Err(IlgError::InvalidParameter("n must be positive".into()));
        }
        if nodes.len() < 2 {
            return Err(IlgError::TooFewPoints { needed: 2, got: nodes.len() });
        }
        if !(step > T::zero()) || !step.is_finite() || !origin.is_finite() {
            return Err(IlgError::InvalidParameter("grid step must be positive".into()));
        }
        if let Some(v) = nodes.iter().find(|v| v.len() != 2 * n) {
            return Err(IlgError::DimensionMismatch { expected: 2 * n, found: v.len() });
        }
        if nodes.iter().flatten().any(|c| !c.is_finite()) {
            return Err(IlgError::NonFinite("curve nodes"));
        }
        let mut c = Self { n, origin, step, nodes, drift: Vec::new() };
        c.drift = (0..c.nodes.len() - 1)
            .map(|j| {
                let (g0, g1) = c.cell_integrand(j);
                let exact = g0 * step + g1 * step * step * lit(0.5);
                (c.nodes[j + 1][2 * n - 1] - c.nodes[j][2 * n - 1] - exact) / step
            })
            .collect();
        Ok(c)
    }

    /// Horizontal node values `(phi_2, ..., phi_{2n})`; the last component starts at `last0`
    /// and follows the equation exactly for the piecewise-linear interpolant.
    pub fn from_horizontal(n: usize, origin: T, step: T, horizontal: Vec<Vec<T>>, last0: T) -> Result<Self> {
        if n == 0 {
            return Err(IlgError::InvalidParameter("n must be positive".into()));
        }
        if let Some(v) = horizontal.iter().find(|v| v.len() != 2 * n - 1) {
            return Err(IlgError::DimensionMismatch { expected: 2 * n - 1, found: v.len() });
        }
        let mut nodes = horizontal;
        let mut last = last0;
        for j in 0..nodes.len() {
            if j > 0 {
                let (p, q) = (&nodes[j - 1], &nodes[j]);
                let d: Vec<T> = p.iter().zip(q).map(|(&a, &b)| (b - a) / step).collect();
                let g = |v: &[T]| {
                    let mut b = T::zero();
                    for i in 0..n - 1 {
                        b = b + v[i] * d[n + i] - d[i] * v[n + i];
                    }
                    -v[n - 1] + b * lit(0.5)
                };
                last = last + step * (g(p) + g(&q[..2 * n - 1])) * lit(0.5);
            }
            nodes[j].push(last);
        }
        Self::new(n, origin, step, nodes)
    }

    /// Reads an intrinsic-convention `k = 1` grid function.
    pub fn from_grid(g: &GridFunction<T>) -> Result<Self> {
        if g.split().k() != 1 {
            return Err(IlgError::Unsupported("lifted curves need k = 1".into()));
        }
        Self::new(g.split().n(), g.origin()[0], g.spacing(), g.values().to_vec())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn origin(&self) -> T {
        self.origin
    }

    pub fn step(&self) -> T {
        self.step
    }

    pub fn nodes(&self) -> &[Vec<T>] {
        &self.nodes
    }

    pub fn node(&self, j: usize) -> T {
        self.origin + self.step * lit(j as f64)
    }

    pub fn domain(&self) -> (T, T) {
        (self.origin, self.node(self.nodes.len() - 1))
    }

    /// Largest node-to-node mismatch absorbed by the drift term, relative to the step.
    pub fn max_drift(&self) -> T {
        self.drift.iter().fold(T::zero(), |a, &d| a.max(d.abs()))
    }

    fn cell_slope(&self, j: usize, c: usize) -> T {
        (self.nodes[j + 1][c] - self.nodes[j][c]) / self.step
    }

    /// Integrand on cell `j` as `g0 + g1 * u`, `u` measured from the left node.
    fn cell_integrand(&self, j: usize) -> (T, T) {
        let n = self.n;
        let v = &self.nodes[j];
        let mut g0 = -v[n - 1];
        let mut b = T::zero();
        for i in 0..n - 1 {
            b = b + v[i] * self.cell_slope(j, n + i) - self.cell_slope(j, i) * v[n + i];
        }
        g0 = g0 + b * lit(0.5);
        (g0, -self.cell_slope(j, n - 1))
    }

    fn locate(&self, s: T) -> (usize, T) {
        let last = self.nodes.len() - 2;
        let f = ((s - self.origin) / self.step).floor();
        let j = if f < T::zero() { 0 } else { f.to_usize().unwrap_or(usize::MAX).min(last) };
        (j, s - self.node(j))
    }

    /// Horizontal part `(phi_2, ..., phi_{2n})` at `s` (linear extrapolation outside the grid).
    pub fn horizontal(&self, s: T) -> Vec<T> {
        let (j, u) = self.locate(s);
        (0..2 * self.n - 1).map(|c| self.nodes[j][c] + self.cell_slope(j, c) * u).collect()
    }

    /// Derivative of the horizontal part on the cell containing `s`.
    pub fn horizontal_slope(&self, s: T) -> Vec<T> {
        let (j, _) = self.locate(s);
        (0..2 * self.n - 1).map(|c| self.cell_slope(j, c)).collect()
    }

    /// `phi_{2n+1}(s)`.
    pub fn last(&self, s: T) -> T {
        let (j, u) = self.locate(s);
        let (g0, g1) = self.cell_integrand(j);
        self.nodes[j][2 * self.n - 1] + (g0 + self.drift[j]) * u + g1 * u * u * lit(0.5)
    }

    /// All components at `s`.
    pub fn eval(&self, s: T) -> Vec<T> {
        let mut v = self.horizontal(s);
        v.push(self.last(s));
        v
    }

    /// Node samples as an intrinsic-convention sampled map, restricted to `[a, b]`.
    pub fn sampled_on(&self, a: T, b: T) -> Result<SampledMap<T>> {
        let split = SubgroupSplit::new(self.n, 1)?;
        let (mut dom, mut vals) = (Vec::new(), Vec::new());
        for (j, v) in self.nodes.iter().enumerate() {
            let x = self.node(j);
            if x >= a && x <= b {
                dom.push(vec![x]);
                vals.push(v.clone());
            }
        }
        SampledMap::new(split, dom, vals)
    }

    /// The grid function with the same nodes.
    pub fn to_grid(&self) -> Result<GridFunction<T>> {
        GridFunction::new(
            SubgroupSplit::new(self.n, 1)?,
            vec![self.origin],
            self.step,
            vec![self.nodes.len()],
            self.nodes.clone(),
        )
    }
}
