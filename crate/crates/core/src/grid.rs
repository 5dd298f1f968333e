//! Uniformly gridded samples of a map `V -> W` and the finite-difference checks of the
//! infinitesimal characterizations (the `k = 1` ODE and the `k = n` gradient equation).

use serde::{Deserialize, Serialize};

use crate::error::{IlgError, Result};
use crate::heisenberg::{SampledMap, SubgroupSplit};
use crate::scalar::{lit, Scalar};

/// Values on the grid `origin + h * (i_1, ..., i_k)`, `0 <= i_a < shape[a]`, stored in
/// row-major order (last axis fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction<T> {
    split: SubgroupSplit,
    origin: Vec<T>,
    spacing: T,
    shape: Vec<usize>,
    values: Vec<Vec<T>>,
}

impl<T: Scalar> GridFunction<T> {
    pub fn new(
        split: SubgroupSplit,
        origin: Vec<T>,
        spacing: T,
        shape: Vec<usize>,
        values: Vec<Vec<T>>,
    ) -> Result<Self> {
        let k = split.k();
        if origin.len() != k {
            return Err(IlgError::DimensionMismatch { expected: k, found: origin.len() });
        }
        if shape.len() != k {
            return Err(IlgError::DimensionMismatch { expected: k, found: shape.len() });
        }
        if !(spacing > T::zero()) || !spacing.is_finite() {
            return Err(IlgError::InvalidParameter("grid spacing must be positive".into()));
        }
        let total: usize = shape.iter().product();
        if values.len() != total || total == 0 {
            return Err(IlgError::DimensionMismatch { expected: total, found: values.len() });
        }
        if let Some(v) = values.iter().find(|v| v.len() != split.value_len()) {
            return Err(IlgError::DimensionMismatch { expected: split.value_len(), found: v.len() });
        }
        if values.iter().flatten().chain(&origin).any(|c| !c.is_finite()) {
            return Err(IlgError::NonFinite("grid function"));
        }
        Ok(Self { split, origin, spacing, shape, values })
    }

    /// Samples `f` on the grid.
    pub fn from_fn(
        split: SubgroupSplit,
        origin: Vec<T>,
        spacing: T,
        shape: Vec<usize>,
        f: impl Fn(&[T]) -> Vec<T>,
    ) -> Result<Self> {
        let total: usize = shape.iter().product();
        let mut values = Vec::with_capacity(total);
        let mut g = Self { split, origin, spacing, shape, values: Vec::new() };
        for flat in 0..total {
            values.push(f(&g.node(flat)));
        }
        g.values = values;
        Self::new(g.split, g.origin, g.spacing, g.shape, g.values)
    }

    pub fn split(&self) -> SubgroupSplit {
        self.split
    }
    pub fn origin(&self) -> &[T] {
        &self.origin
    }
    pub fn spacing(&self) -> T {
        self.spacing
    }
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }
    pub fn values(&self) -> &[Vec<T>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.shape.len()];
        for a in (0..self.shape.len()).rev() {
            idx[a] = flat % self.shape[a];
            flat /= self.shape[a];
        }
        idx
    }

    fn stride(&self, axis: usize) -> usize {
        self.shape[axis + 1..].iter().product()
    }

    /// Coordinates of the node with the given flat index.
    pub fn node(&self, flat: usize) -> Vec<T> {
        self.multi_index(flat)
            .iter()
            .zip(&self.origin)
            .map(|(&i, &o)| o + self.spacing * T::from_usize(i).expect("index fits"))
            .collect()
    }

    fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&f| {
            self.multi_index(f).iter().zip(&self.shape).all(|(&i, &s)| i > 0 && i + 1 < s)
        })
    }

    fn central(&self, flat: usize, axis: usize, slot: usize) -> T {
        let st = self.stride(axis);
        (self.values[flat + st][slot] - self.values[flat - st][slot]) / (lit::<T>(2.0) * self.spacing)
    }

    /// Converts to a sampled map on the grid nodes.
    pub fn to_sampled(&self) -> Result<SampledMap<T>> {
        SampledMap::new(self.split, (0..self.len()).map(|f| self.node(f)).collect(), self.values.clone())
    }

    /// Copy with the last component negated (switches between the tame and intrinsic sign).
    pub fn negate_last(&self) -> Self {
        let mut g = self.clone();
        for v in &mut g.values {
            let l = v.len() - 1;
            v[l] = -v[l];
        }
        g
    }
}

/// Sup over interior nodes of the residual of
/// `phi'_{2n+1} = phi_{n+1} + 1/2 sum_{i=2..n} (phi'_i phi_{n+i} - phi_i phi'_{n+i})`
/// with central differences.
pub fn check_ode_k1<T: Scalar>(f: &GridFunction<T>) -> Result<T> {
    let split = f.split;
    if split.k() != 1 {
        return Err(IlgError::Unsupported("check_ode_k1 needs k = 1".into()));
    }
    if split.n() < 2 {
        return Err(IlgError::Unsupported("check_ode_k1 needs n > 1".into()));
    }
    if f.len() < 3 {
        return Err(IlgError::TooFewPoints { needed: 3, got: f.len() });
    }
    let n = split.n();
    let last = split.slot(2 * n + 1);
    let mut worst = T::zero();
    for node in f.interior_nodes() {
        let val = &f.values[node];
        let lhs = f.central(node, 0, last);
        let mut bil = T::zero();
        for i in 2..=n {
            let (a, b) = (split.slot(i), split.slot(n + i));
            bil = bil + f.central(node, 0, a) * val[b] - val[a] * f.central(node, 0, b);
        }
        let rhs = val[split.slot(n + 1)] + bil * lit(0.5);
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}

/// Sup over interior nodes of `|grad phi_{2n+1} - (phi_{n+1}, ..., phi_{2n})|` (max norm over
/// axes) with central differences.
pub fn check_gradient_kn<T: Scalar>(f: &GridFunction<T>) -> Result<T> {
    let split = f.split;
    if split.k() != split.n() {
        return Err(IlgError::Unsupported("check_gradient_kn needs k = n".into()));
    }
    if let Some(&s) = f.shape.iter().find(|&&s| s < 3) {
        return Err(IlgError::TooFewPoints { needed: 3, got: s });
    }
    let n = split.n();
    let last = split.slot(2 * n + 1);
    let mut worst = T::zero();
    for node in f.interior_nodes() {
        for a in 0..n {
            let r = f.central(node, a, last) - f.values[node][split.slot(n + 1 + a)];
            worst = worst.max(r.abs());
        }
    }
    Ok(worst)
}

/// JSON layout of a [`GridFunction`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunctionJson {
    pub k: usize,
    pub n: usize,
    pub origin: Vec<f64>,
    pub spacing: f64,
    pub shape: Vec<usize>,
    pub values: Vec<Vec<f64>>,
}

impl GridFunction<f64> {
    pub fn to_json(&self) -> GridFunctionJson {
        GridFunctionJson {
            k: self.split.k(),
            n: self.split.n(),
            origin: self.origin.clone(),
            spacing: self.spacing,
            shape: self.shape.clone(),
            values: self.values.clone(),
        }
    }

    pub fn from_json(j: &GridFunctionJson) -> Result<Self> {
        Self::new(SubgroupSplit::new(j.n, j.k)?, j.origin.clone(), j.spacing, j.shape.clone(), j.values.clone())
    }
}
