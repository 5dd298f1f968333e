//! Group law, metric, subgroup projections and graph maps in the Heisenberg group `H^n`.
//!
//! A point is `(x_1, ..., x_{2n}, t)` with product
//! `(x, t) * (x', t') = (x + x', t + t' + 1/2 * sum_i (x_i x'_{n+i} - x'_i x_{n+i}))`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{IlgError, Result};
use crate::scalar::{euclid, lit, sup_dist, Scalar};

/// A point of `H^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeisPoint<T> {
    x: Vec<T>,
    t: T,
}

/// Half the symplectic pairing: the `t`-increment of `a * b` for horizontal parts `a`, `b`.
#[inline]
pub(crate) fn omega_half<T: Scalar>(a: &[T], b: &[T]) -> T {
    let n = a.len() / 2;
    let mut s = T::zero();
    for i in 0..n {
        s = s + a[i] * b[n + i] - b[i] * a[n + i];
    }
    s * lit(0.5)
}

impl<T: Scalar> HeisPoint<T> {
    /// Builds a point from horizontal coordinates (even, positive length) and `t`.
    pub fn new(x: Vec<T>, t: T) -> Result<Self> {
        if x.is_empty() || x.len() % 2 != 0 {
            return Err(IlgError::InvalidParameter(format!(
                "horizontal part must have positive even length, got {}",
                x.len()
            )));
        }
        if !t.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(IlgError::NonFinite("HeisPoint"));
        }
        Ok(Self { x, t })
    }

    pub fn identity(n: usize) -> Self {
        assert!(n > 0, "n must be positive");
        Self { x: vec![T::zero(); 2 * n], t: T::zero() }
    }

    /// Parses the flat layout `[x_1, ..., x_{2n}, t]`.
    pub fn from_flat(flat: &[T]) -> Result<Self> {
        match flat.split_last() {
            Some((&t, x)) => Self::new(x.to_vec(), t),
            None => Err(IlgError::InvalidParameter("empty point".into())),
        }
    }

    pub fn to_flat(&self) -> Vec<T> {
        let mut v = self.x.clone();
        v.push(self.t);
        v
    }

    pub fn n(&self) -> usize {
        self.x.len() / 2
    }

    pub fn horizontal(&self) -> &[T] {
        &self.x
    }

    pub fn vertical(&self) -> T {
        self.t
    }

    fn same_n(&self, q: &Self) -> Result<()> {
        if self.x.len() != q.x.len() {
            return Err(IlgError::DimensionMismatch { expected: self.x.len(), found: q.x.len() });
        }
        Ok(())
    }

    pub(crate) fn mul_unchecked(&self, q: &Self) -> Self {
        let x = self.x.iter().zip(&q.x).map(|(&a, &b)| a + b).collect();
        Self { x, t: self.t + q.t + omega_half(&self.x, &q.x) }
    }

    /// Group product `self * q`.
    pub fn product(&self, q: &Self) -> Result<Self> {
        self.same_n(q)?;
        Ok(self.mul_unchecked(q))
    }

    /// Group inverse (coordinate negation).
    pub fn inverse(&self) -> Self {
        Self { x: self.x.iter().map(|&v| -v).collect(), t: -self.t }
    }

    /// `max(|x|, sqrt|t|)`.
    pub fn norm(&self) -> T {
        euclid(&self.x).max(self.t.abs().sqrt())
    }

    /// Left-invariant distance `|| q^{-1} * self ||`.
    pub fn distance(&self, q: &Self) -> Result<T> {
        self.same_n(q)?;
        Ok(q.inverse().mul_unchecked(self).norm())
    }

    /// Anisotropic dilation `(r x, r^2 t)`.
    pub fn dilate(&self, r: T) -> Result<Self> {
        if !(r > T::zero()) || !r.is_finite() {
            return Err(IlgError::InvalidParameter("dilation factor must be positive".into()));
        }
        Ok(Self { x: self.x.iter().map(|&v| r * v).collect(), t: r * r * self.t })
    }
}

pub fn product<T: Scalar>(p: &HeisPoint<T>, q: &HeisPoint<T>) -> Result<HeisPoint<T>> {
    p.product(q)
}

pub fn inverse<T: Scalar>(p: &HeisPoint<T>) -> HeisPoint<T> {
    p.inverse()
}

pub fn heis_norm<T: Scalar>(p: &HeisPoint<T>) -> T {
    p.norm()
}

pub fn distance<T: Scalar>(p: &HeisPoint<T>, q: &HeisPoint<T>) -> Result<T> {
    p.distance(q)
}

pub fn dilation<T: Scalar>(r: T, p: &HeisPoint<T>) -> Result<HeisPoint<T>> {
    p.dilate(r)
}

impl<T: Scalar + Serialize> Serialize for HeisPoint<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_flat().serialize(s)
    }
}

impl<'de, T: Scalar + Deserialize<'de>> Deserialize<'de> for HeisPoint<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let flat = Vec::<T>::deserialize(d)?;
        HeisPoint::from_flat(&flat).map_err(serde::de::Error::custom)
    }
}

/// The splitting `H^n = V * W` with `V` spanned by the first `k` horizontal axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SubgroupSplit {
    n: usize,
    k: usize,
}

impl SubgroupSplit {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if n == 0 || k == 0 || k > n {
            return Err(IlgError::InvalidParameter(format!(
                "need 1 <= k <= n, got k = {k}, n = {n}"
            )));
        }
        Ok(Self { n, k })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of components of a map `V -> W`, i.e. `2n + 1 - k`.
    pub fn value_len(&self) -> usize {
        2 * self.n + 1 - self.k
    }

    /// Index inside a value vector of the component `phi_i`, `k < i <= 2n + 1`.
    pub fn slot(&self, i: usize) -> usize {
        debug_assert!(i > self.k && i <= 2 * self.n + 1);
        i - self.k - 1
    }

    fn check_point<T: Scalar>(&self, p: &HeisPoint<T>) -> Result<()> {
        if p.n() != self.n {
            return Err(IlgError::DimensionMismatch { expected: self.n, found: p.n() });
        }
        Ok(())
    }
}

/// Projection onto `V`: keeps `x_1..x_k`.
pub fn project_v<T: Scalar>(p: &HeisPoint<T>, split: &SubgroupSplit) -> Result<HeisPoint<T>> {
    split.check_point(p)?;
    let mut x = vec![T::zero(); 2 * split.n];
    x[..split.k].copy_from_slice(&p.x[..split.k]);
    Ok(HeisPoint { x, t: T::zero() })
}

/// Projection onto `W`, the factor with `pi_V(p) * pi_W(p) = p`.
pub fn project_w<T: Scalar>(p: &HeisPoint<T>, split: &SubgroupSplit) -> Result<HeisPoint<T>> {
    split.check_point(p)?;
    let n = split.n;
    let mut x = p.x.clone();
    let mut corr = T::zero();
    for i in 0..split.k {
        corr = corr + p.x[i] * p.x[n + i];
        x[i] = T::zero();
    }
    Ok(HeisPoint { x, t: p.t - corr * lit(0.5) })
}

/// Reads the value vector `(phi_{k+1}, ..., phi_{2n+1})` of a point of `W`.
pub fn w_coordinates<T: Scalar>(p: &HeisPoint<T>, split: &SubgroupSplit) -> Vec<T> {
    let mut v = p.x[split.k..].to_vec();
    v.push(p.t);
    v
}

fn check_graph_dims<T>(v: &[T], value: &[T], split: &SubgroupSplit) -> Result<()> {
    if v.len() != split.k {
        return Err(IlgError::DimensionMismatch { expected: split.k, found: v.len() });
    }
    if value.len() != split.value_len() {
        return Err(IlgError::DimensionMismatch { expected: split.value_len(), found: value.len() });
    }
    Ok(())
}

fn graph_point_unchecked<T: Scalar>(v: &[T], value: &[T], split: &SubgroupSplit) -> HeisPoint<T> {
    let (n, k) = (split.n, split.k);
    let mut x = Vec::with_capacity(2 * n);
    x.extend_from_slice(v);
    x.extend_from_slice(&value[..2 * n - k]);
    let mut corr = T::zero();
    for i in 0..k {
        corr = corr + v[i] * x[n + i];
    }
    HeisPoint { x, t: value[2 * n - k] + corr * lit(0.5) }
}

/// The graph map `Phi(v) = v * phi(v)`.
pub fn graph_map<T: Scalar>(v: &[T], value: &[T], split: &SubgroupSplit) -> Result<HeisPoint<T>> {
    check_graph_dims(v, value, split)?;
    let p = graph_point_unchecked(v, value, split);
    if !p.t.is_finite() || p.x.iter().any(|c| !c.is_finite()) {
        return Err(IlgError::NonFinite("graph point"));
    }
    Ok(p)
}

/// Componentwise gaps and the vertical quantity `H(v, w)` of the projected difference
/// `pi_W(Phi(v)^{-1} * Phi(w))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualPair<T> {
    pub horizontal_gap: Vec<T>,
    pub h_value: T,
    pub vertical_homog: T,
}

impl<T: Scalar> ResidualPair<T> {
    /// Homogeneous norm of the projected difference.
    pub fn norm(&self) -> T {
        euclid(&self.horizontal_gap).max(self.vertical_homog)
    }
}

#[inline]
fn h_value<T: Scalar>(v: &[T], fv: &[T], w: &[T], fw: &[T], split: &SubgroupSplit) -> T {
    let (n, k) = (split.n, split.k);
    let last = 2 * n - k;
    let mut h = fw[last] - fv[last];
    for i in 0..k {
        // psi_i(v) = phi_{n+i+1}(v)
        h = h + fv[n + i - k] * (w[i] - v[i]);
    }
    if k < n {
        let mut b = T::zero();
        for i in k..n {
            // phi_{i+1} and phi_{n+i+1}
            b = b + fw[i - k] * fv[n + i - k] - fv[i - k] * fw[n + i - k];
        }
        h = h + b * lit(0.5);
    }
    h
}

/// Residual of the intrinsic Lipschitz condition for the ordered pair `(v, w)`.
pub fn ilg_residual<T: Scalar>(
    v: &[T],
    v_val: &[T],
    w: &[T],
    w_val: &[T],
    split: &SubgroupSplit,
) -> Result<ResidualPair<T>> {
    check_graph_dims(v, v_val, split)?;
    check_graph_dims(w, w_val, split)?;
    let m = 2 * split.n - split.k;
    let horizontal_gap = (0..m).map(|i| w_val[i] - v_val[i]).collect();
    let h = h_value(v, v_val, w, w_val, split);
    Ok(ResidualPair { horizontal_gap, h_value: h, vertical_homog: h.abs().sqrt() })
}

/// A finite sample of a map `phi: V -> W` given on a set `E` of `R^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledMap<T> {
    split: SubgroupSplit,
    domain: Vec<Vec<T>>,
    values: Vec<Vec<T>>,
}

/// Sup-norm tolerance below which two domain points count as duplicates.
pub const DUPLICATE_TOL: f64 = 1e-12;

pub(crate) fn find_duplicate<T: Scalar>(points: &[Vec<T>], tol: T) -> Option<(usize, usize)> {
    if points.is_empty() {
        return None;
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a][0].partial_cmp(&points[b][0]).unwrap_or(std::cmp::Ordering::Equal)
    });
    for (pos, &a) in order.iter().enumerate() {
        for &b in &order[pos + 1..] {
            if points[b][0] - points[a][0] > tol {
                break;
            }
            if sup_dist(&points[a], &points[b]) <= tol {
                return Some((a.min(b), a.max(b)));
            }
        }
    }
    None
}

impl<T: Scalar> SampledMap<T> {
    pub fn new(split: SubgroupSplit, domain: Vec<Vec<T>>, values: Vec<Vec<T>>) -> Result<Self> {
        if domain.len() != values.len() {
            return Err(IlgError::DimensionMismatch { expected: domain.len(), found: values.len() });
        }
        for (v, val) in domain.iter().zip(&values) {
            check_graph_dims(v, val, &split)?;
            if v.iter().chain(val).any(|c| !c.is_finite()) {
                return Err(IlgError::NonFinite("sampled map"));
            }
        }
        if let Some((i, j)) = find_duplicate(&domain, lit(DUPLICATE_TOL)) {
            return Err(IlgError::DuplicatePoint(i, j));
        }
        Ok(Self { split, domain, values })
    }

    pub fn split(&self) -> SubgroupSplit {
        self.split
    }

    pub fn domain(&self) -> &[Vec<T>] {
        &self.domain
    }

    pub fn values(&self) -> &[Vec<T>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.domain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domain.is_empty()
    }

    /// Graph points `Phi(v)` for every sample.
    pub fn graph_points(&self) -> Vec<HeisPoint<T>> {
        self.domain
            .iter()
            .zip(&self.values)
            .map(|(v, val)| graph_point_unchecked(v, val, &self.split))
            .collect()
    }

    /// Same domain, values replaced. Used by sign conversions.
    pub(crate) fn with_values(&self, values: Vec<Vec<T>>) -> Self {
        Self { split: self.split, domain: self.domain.clone(), values }
    }
}

/// Ratio attained by the worst ordered pair, with the pair's indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipWitness<T> {
    pub constant: T,
    pub pair: Option<(usize, usize)>,
}

/// Least `L` such that the sample is intrinsic `L`-Lipschitz, with the maximizing ordered pair.
/// Ties keep the first pair in lexicographic order.
pub fn intrinsic_lip_witness<T: Scalar>(map: &SampledMap<T>) -> Result<LipWitness<T>> {
    if map.len() < 2 {
        return Err(IlgError::TooFewPoints { needed: 2, got: map.len() });
    }
    let split = map.split;
    let m = 2 * split.n - split.k;
    let mut best = LipWitness { constant: T::zero(), pair: None };
    for i in 0..map.len() {
        let (vi, fi) = (&map.domain[i], &map.values[i]);
        for j in 0..map.len() {
            if i == j {
                continue;
            }
            let (vj, fj) = (&map.domain[j], &map.values[j]);
            let mut gap2 = T::zero();
            for c in 0..m {
                let d = fi[c] - fj[c];
                gap2 = gap2 + d * d;
            }
            // projected difference pi_W(Phi(v_j)^{-1} Phi(v_i))
            let h = h_value(vj, fj, vi, fi, &split);
            let num = gap2.sqrt().max(h.abs().sqrt());
            let ratio = num / crate::scalar::dist(vi, vj);
            if ratio > best.constant || best.pair.is_none() {
                best = LipWitness { constant: ratio, pair: Some((i, j)) };
            }
        }
    }
    Ok(best)
}

/// Least `L` such that the sample is intrinsic `L`-Lipschitz.
pub fn intrinsic_lip_constant<T: Scalar>(map: &SampledMap<T>) -> Result<T> {
    intrinsic_lip_witness(map).map(|w| w.constant)
}
