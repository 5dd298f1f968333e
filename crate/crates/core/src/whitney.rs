//! C^{1,1} extension of first-order jets on finite sets (Whitney cubes plus a smooth
//! partition of unity) and McShane extension of scalar Lipschitz functions.
//!
//! The Whitney cubes are the maximal dyadic cubes `Q` with `diam Q <= dist(Q, E)`; each
//! such cube also satisfies `dist(Q, E) <= 4 diam Q`. The family is never stored: the
//! cubes relevant to a point are located on demand, so the decomposition covers all of
//! `R^n \ E` without truncation.

use serde::{Deserialize, Serialize};

use crate::error::{IlgError, Result};
use crate::heisenberg::{find_duplicate, DUPLICATE_TOL};
use crate::rng::SeededRng;
use crate::scalar::{dist, lit, Scalar};

/// Side of each inflated cube relative to its cube.
pub const INFLATION: f64 = 2.5;

/// Frozen bound on `Lip(grad f) / lambda` for extensions built here, indexed by `n - 1`.
pub const C_IMPL: [f64; 3] = [450.0, 500.0, 600.0];

/// Largest supported dimension.
pub const MAX_DIM: usize = 3;

/// `C_IMPL` for dimension `n`.
pub fn c_impl(n: usize) -> f64 {
    C_IMPL[n - 1]
}

/// Values `f` and gradients `grad` prescribed on a finite set of `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct JetData<T> {
    points: Vec<Vec<T>>,
    f: Vec<T>,
    grad: Vec<Vec<T>>,
}

impl<T: Scalar> JetData<T> {
    pub fn new(points: Vec<Vec<T>>, f: Vec<T>, grad: Vec<Vec<T>>) -> Result<Self> {
        if points.is_empty() {
            return Err(IlgError::TooFewPoints { needed: 1, got: 0 });
        }
        if f.len() != points.len() || grad.len() != points.len() {
            return Err(IlgError::DimensionMismatch { expected: points.len(), found: f.len().min(grad.len()) });
        }
        let n = points[0].len();
        if n == 0 || n > MAX_DIM {
            return Err(IlgError::Unsupported(format!("jet dimension must be 1..={MAX_DIM}, got {n}")));
        }
        if let Some(p) = points.iter().chain(&grad).find(|p| p.len() != n) {
            return Err(IlgError::DimensionMismatch { expected: n, found: p.len() });
        }
        if points.iter().chain(&grad).flatten().chain(&f).any(|c| !c.is_finite()) {
            return Err(IlgError::NonFinite("jet"));
        }
        if let Some((i, j)) = find_duplicate(&points, lit(DUPLICATE_TOL)) {
            return Err(IlgError::DuplicatePoint(i, j));
        }
        Ok(Self { points, f, grad })
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }
    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
    pub fn points(&self) -> &[Vec<T>] {
        &self.points
    }
    pub fn f(&self) -> &[T] {
        &self.f
    }
    pub fn grad(&self) -> &[Vec<T>] {
        &self.grad
    }

    /// Jet scaled by `s` (values and gradients).
    pub fn scaled(&self, s: T) -> Self {
        Self {
            points: self.points.clone(),
            f: self.f.iter().map(|&v| v * s).collect(),
            grad: self.grad.iter().map(|g| g.iter().map(|&v| v * s).collect()).collect(),
        }
    }

    /// `P_e(x) = f(e) + <grad(e), x - e>`.
    fn taylor(&self, e: usize, x: &[T]) -> T {
        let p = &self.points[e];
        let mut s = self.f[e];
        for a in 0..x.len() {
            s = s + self.grad[e][a] * (x[a] - p[a]);
        }
        s
    }
}

/// JSON layout `{"points": [...], "f": [...], "grad": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JetDataJson {
    pub points: Vec<Vec<f64>>,
    pub f: Vec<f64>,
    pub grad: Vec<Vec<f64>>,
}

impl JetData<f64> {
    pub fn to_json(&self) -> JetDataJson {
        JetDataJson { points: self.points.clone(), f: self.f.clone(), grad: self.grad.clone() }
    }
    pub fn from_json(j: &JetDataJson) -> Result<Self> {
        Self::new(j.points.clone(), j.f.clone(), j.grad.clone())
    }
}

/// Least `lambda` with `|psi(x) - psi(y)| <= lambda |x - y|` and
/// `|f(x) - f(y) - <psi(x), x - y>| <= lambda |x - y|^2` on all pairs.
pub fn validate_jet<T: Scalar>(jet: &JetData<T>) -> Result<T> {
    if jet.is_empty() {
        return Err(IlgError::TooFewPoints { needed: 1, got: 0 });
    }
    let mut lambda = T::zero();
    for i in 0..jet.len() {
        for j in 0..jet.len() {
            if i == j {
                continue;
            }
            let d = dist(&jet.points[i], &jet.points[j]);
            if i < j {
                lambda = lambda.max(dist(&jet.grad[i], &jet.grad[j]) / d);
            }
            let r = (jet.f[j] - jet.taylor(i, &jet.points[j])).abs();
            lambda = lambda.max(r / (d * d));
        }
    }
    Ok(lambda)
}

/// A dyadic cube `2^{-level} * (index + [0, 1)^n)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DyadicCube {
    pub level: i32,
    pub index: Vec<i64>,
}

impl DyadicCube {
    pub fn side<T: Scalar>(&self) -> T {
        lit::<T>(2.0).powi(-self.level)
    }

    pub fn lower<T: Scalar>(&self) -> Vec<T> {
        let s = self.side::<T>();
        self.index.iter().map(|&m| T::from_i64(m).expect("index fits") * s).collect()
    }

    pub fn parent(&self) -> Self {
        Self { level: self.level - 1, index: self.index.iter().map(|m| m.div_euclid(2)).collect() }
    }

    fn containing<T: Scalar>(x: &[T], level: i32) -> Self {
        let s = lit::<T>(2.0).powi(-level);
        Self {
            level,
            index: x.iter().map(|&v| (v / s).floor().to_i64().expect("cube index fits")).collect(),
        }
    }
}

/// Euclidean distance from `p` to the closed cube.
fn box_dist<T: Scalar>(lo: &[T], side: T, p: &[T]) -> T {
    let mut s = T::zero();
    for a in 0..p.len() {
        let g = (lo[a] - p[a]).max(p[a] - (lo[a] + side)).max(T::zero());
        s = s + g * g;
    }
    s.sqrt()
}

/// The scalar profile `theta(s) = s^3 (10 - 15 s + 6 s^2)` on `[0, 1]` with its first derivative.
#[inline]
fn profile<T: Scalar>(s: T) -> (T, T) {
    if s <= T::zero() {
        return (T::zero(), T::zero());
    }
    if s >= T::one() {
        return (T::one(), T::zero());
    }
    let (c6, c10, c15, c30) = (lit::<T>(6.0), lit::<T>(10.0), lit::<T>(15.0), lit::<T>(30.0));
    let v = s * s * s * (c10 - c15 * s + c6 * s * s);
    let d = c30 * s * s * (T::one() - s) * (T::one() - s);
    (v, d)
}

/// The C^{1,1} extension of a jet.
#[derive(Debug, Clone)]
pub struct WhitneyExtension<T> {
    jet: JetData<T>,
    /// Jet indices sorted lexicographically by point (tie order for nearest-point queries).
    order: Vec<usize>,
    lambda: T,
    measured_grad_lip: T,
}

/// A Whitney cube active at some point, with its bump value and gradient there.
struct Active<T> {
    nearest: usize,
    theta: T,
    dtheta: Vec<T>,
}

/// Pairs used when the gradient Lipschitz constant is measured at construction.
pub const BUILD_AUDIT_PAIRS: usize = 300;

impl<T: Scalar> WhitneyExtension<T> {
    pub fn jet(&self) -> &JetData<T> {
        &self.jet
    }

    /// `lambda` of the jet as computed by [`validate_jet`].
    pub fn lambda(&self) -> T {
        self.lambda
    }

    /// Gradient Lipschitz constant measured at construction on random pairs.
    pub fn measured_grad_lip(&self) -> T {
        self.measured_grad_lip
    }

    /// The frozen constant `C_impl(n)` for this jet's dimension.
    pub fn c_impl(&self) -> T {
        lit(c_impl(self.jet.dim()))
    }

    fn nearest_to_point(&self, x: &[T]) -> (usize, T) {
        let mut best = (self.order[0], T::infinity());
        for &e in &self.order {
            let d = dist(&self.jet.points[e], x);
            if d < best.1 {
                best = (e, d);
            }
        }
        best
    }

    /// Nearest jet point to a cube and the distance.
    fn nearest_to_cube(&self, q: &DyadicCube) -> (usize, T) {
        let lo = q.lower::<T>();
        let side = q.side::<T>();
        let mut best = (self.order[0], T::infinity());
        for &e in &self.order {
            let d = box_dist(&lo, side, &self.jet.points[e]);
            if d < best.1 {
                best = (e, d);
            }
        }
        best
    }

    fn diam(&self, q: &DyadicCube) -> T {
        q.side::<T>() * T::from_usize(self.jet.dim()).expect("dim").sqrt()
    }

    fn admissible(&self, q: &DyadicCube) -> bool {
        self.diam(q) <= self.nearest_to_cube(q).1
    }

    /// Whether `q` is one of the (maximal) Whitney cubes.
    pub fn is_whitney_cube(&self, q: &DyadicCube) -> bool {
        self.admissible(q) && !self.admissible(&q.parent())
    }

    /// Nearest jet point (index into the jet) assigned to a cube.
    pub fn cube_nearest_point(&self, q: &DyadicCube) -> usize {
        self.nearest_to_cube(q).0
    }

    /// The Whitney cube containing `x`, or `None` for `x` in `E`.
    pub fn cube_containing(&self, x: &[T]) -> Option<DyadicCube> {
        let (_, d) = self.nearest_to_point(x);
        if d == T::zero() {
            return None;
        }
        let sqrt_n = T::from_usize(self.jet.dim()).expect("dim").sqrt();
        // diam of the Whitney cube lies in [d/5, d]; start strictly coarser.
        let start = (sqrt_n / d).log2().floor().to_i32().expect("level fits") - 2;
        for level in start..start + 64 {
            let q = DyadicCube::containing(x, level);
            if self.admissible(&q) {
                return Some(q);
            }
        }
        None
    }

    /// Whitney cubes whose inflated cube contains `x`.
    fn active_cubes(&self, x: &[T], home: &DyadicCube) -> Vec<Active<T>> {
        let half_ext = lit::<T>((INFLATION - 1.0) / 2.0);
        let mut out = Vec::new();
        for level in home.level - 3..=home.level + 3 {
            let side = lit::<T>(2.0).powi(-level);
            let ranges: Vec<(i64, i64)> = x
                .iter()
                .map(|&v| {
                    let lo = ((v - half_ext * side) / side - T::one()).ceil().to_i64().expect("fits");
                    let hi = ((v + half_ext * side) / side).floor().to_i64().expect("fits");
                    (lo, hi)
                })
                .collect();
            for_each_index(&ranges, |idx| {
                let q = DyadicCube { level, index: idx.to_vec() };
                if let Some(a) = self.bump(&q, x) {
                    if self.is_whitney_cube(&q) {
                        out.push(Active { nearest: self.cube_nearest_point(&q), ..a });
                    }
                }
            });
        }
        out
    }

    /// Bump of `q` at `x`: product over axes of `theta((w - |x_a - c_a|) / w)` with `w` the
    /// half-side of the inflated cube. `None` outside its support.
    fn bump(&self, q: &DyadicCube, x: &[T]) -> Option<Active<T>> {
        let side = q.side::<T>();
        let w = side * lit(INFLATION / 2.0);
        let lo = q.lower::<T>();
        let n = x.len();
        let mut vals = Vec::with_capacity(n);
        let mut ders = Vec::with_capacity(n);
        for a in 0..n {
            let u = x[a] - (lo[a] + side * lit(0.5));
            let s = (w - u.abs()) / w;
            if s <= T::zero() {
                return None;
            }
            let (v, d) = profile(s);
            vals.push(v);
            // ds/dx_a = -sign(u) / w
            ders.push(if u > T::zero() { -d / w } else { d / w });
        }
        let theta = vals.iter().fold(T::one(), |acc, &v| acc * v);
        let dtheta = (0..n)
            .map(|a| (0..n).fold(T::one(), |acc, b| acc * if a == b { ders[b] } else { vals[b] }))
            .collect();
        Some(Active { nearest: 0, theta, dtheta })
    }

    /// Value and gradient of the extension at `x`.
    pub fn evaluate(&self, x: &[T]) -> (T, Vec<T>) {
        assert_eq!(x.len(), self.jet.dim(), "evaluation point dimension");
        let (star, d) = self.nearest_to_point(x);
        let grad_star = self.jet.grad[star].clone();
        if d == T::zero() {
            return (self.jet.f[star], grad_star);
        }
        let p_star = self.jet.taylor(star, x);
        if self.jet.len() == 1 {
            return (p_star, grad_star);
        }
        let home = match self.cube_containing(x) {
            Some(q) => q,
            None => return (p_star, grad_star),
        };
        let active = self.active_cubes(x, &home);
        let n = x.len();
        let sum = active.iter().fold(T::zero(), |acc, a| acc + a.theta);
        if !(sum > T::zero()) {
            return (p_star, grad_star);
        }
        let mut dsum = vec![T::zero(); n];
        for a in &active {
            for c in 0..n {
                dsum[c] = dsum[c] + a.dtheta[c];
            }
        }
        let mut value = p_star;
        let mut grad = grad_star.clone();
        for a in &active {
            if a.nearest == star {
                continue;
            }
            let diff = self.jet.taylor(a.nearest, x) - p_star;
            let w = a.theta / sum;
            value = value + w * diff;
            for c in 0..n {
                let dw = (a.dtheta[c] * sum - a.theta * dsum[c]) / (sum * sum);
                grad[c] = grad[c] + dw * diff + w * (self.jet.grad[a.nearest][c] - grad_star[c]);
            }
        }
        (value, grad)
    }

    /// Sup of `|grad(x) - grad(y)| / |x - y|` over seeded random pairs: pairs of jet
    /// points, short pairs scaled to the local cube size and long pairs, all inside the
    /// bounding box inflated by 2.
    pub fn measure_grad_lip(&self, pairs: usize, seed: u64) -> T {
        let mut best = T::zero();
        let pts = &self.jet.points;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                best = best.max(dist(&self.jet.grad[i], &self.jet.grad[j]) / dist(&pts[i], &pts[j]));
            }
        }
        if pts.len() == 1 {
            return best;
        }
        let (lo, hi) = inflated_box(pts, 2.0);
        let mut rng = SeededRng::new(seed);
        let n = self.jet.dim();
        for p in 0..pairs {
            let x: Vec<T> = (0..n).map(|a| lit(rng.range(lo[a], hi[a]))).collect();
            let (_, dx) = self.nearest_to_point(&x);
            let u = rng.unit_vector(n);
            let r = if p % 4 == 3 {
                lit::<T>(rng.range(0.05, 1.0)) * lit(hi[0] - lo[0])
            } else {
                dx * lit(10f64.powf(rng.range(-4.0, -1.0)))
            };
            let y: Vec<T> = x.iter().zip(&u).map(|(&a, &b)| a + r * lit(b)).collect();
            let (_, gx) = self.evaluate(&x);
            let (_, gy) = self.evaluate(&y);
            let d = dist(&x, &y);
            if d > T::zero() {
                best = best.max(dist(&gx, &gy) / d);
            }
        }
        best
    }

    /// Whitney cubes meeting the box `[lo, hi]` with level at most `max_level`
    /// (cubes finer than that are omitted).
    pub fn cubes_in_box(&self, lo: &[T], hi: &[T], max_level: i32) -> Vec<DyadicCube> {
        let n = self.jet.dim();
        let extent = (0..n).fold(T::zero(), |m, a| m.max(hi[a] - lo[a]));
        let level0 = (-(extent.log2().ceil())).to_i32().expect("level fits");
        let a = DyadicCube::containing(lo, level0);
        let b = DyadicCube::containing(hi, level0);
        let mut stack = Vec::new();
        let ranges: Vec<(i64, i64)> = a.index.iter().zip(&b.index).map(|(&l, &h)| (l, h)).collect();
        for_each_index(&ranges, |idx| stack.push(DyadicCube { level: level0, index: idx.to_vec() }));
        let mut out = Vec::new();
        while let Some(q) = stack.pop() {
            if self.is_whitney_cube(&q) {
                out.push(q);
            } else if !self.admissible(&q) && q.level < max_level {
                for mask in 0..(1u32 << n) {
                    let index = q.index.iter().enumerate().map(|(c, &m)| 2 * m + ((mask >> c) & 1) as i64).collect();
                    stack.push(DyadicCube { level: q.level + 1, index });
                }
            }
        }
        out.sort();
        out
    }
}

/// Calls `f` on every integer vector in the product of the inclusive ranges.
fn for_each_index(ranges: &[(i64, i64)], mut f: impl FnMut(&[i64])) {
    if ranges.iter().any(|r| r.0 > r.1) {
        return;
    }
    let mut idx: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    loop {
        f(&idx);
        let mut a = 0;
        loop {
            if a == ranges.len() {
                return;
            }
            idx[a] += 1;
            if idx[a] <= ranges[a].1 {
                break;
            }
            idx[a] = ranges[a].0;
            a += 1;
        }
    }
}

/// Bounding box of `pts` scaled by `factor` about its center (degenerate axes get width 1).
pub fn inflated_box<T: Scalar>(pts: &[Vec<T>], factor: f64) -> (Vec<f64>, Vec<f64>) {
    let n = pts[0].len();
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for p in pts {
        for a in 0..n {
            let v = p[a].to_f64().unwrap_or(0.0);
            lo[a] = lo[a].min(v);
            hi[a] = hi[a].max(v);
        }
    }
    let width = (0..n).map(|a| hi[a] - lo[a]).fold(0.0, f64::max).max(1e-9);
    for a in 0..n {
        let c = 0.5 * (lo[a] + hi[a]);
        let w = (hi[a] - lo[a]).max(width) * factor * 0.5;
        lo[a] = c - w;
        hi[a] = c + w;
    }
    (lo, hi)
}

/// Builds the extension; the gradient Lipschitz constant is measured on
/// [`BUILD_AUDIT_PAIRS`] seeded pairs.
pub fn build_extension<T: Scalar>(jet: &JetData<T>) -> Result<WhitneyExtension<T>> {
    let lambda = validate_jet(jet)?;
    let mut order: Vec<usize> = (0..jet.len()).collect();
    order.sort_by(|&a, &b| {
        jet.points[a]
            .iter()
            .zip(&jet.points[b])
            .map(|(x, y)| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut ext = WhitneyExtension { jet: jet.clone(), order, lambda, measured_grad_lip: T::zero() };
    ext.measured_grad_lip = ext.measure_grad_lip(BUILD_AUDIT_PAIRS, 0x5eed);
    Ok(ext)
}

/// `x -> min_e f(e) + L |x - e|`.
#[derive(Debug, Clone, PartialEq)]
pub struct McShane<T> {
    points: Vec<Vec<T>>,
    values: Vec<T>,
    l: T,
}

impl<T: Scalar> McShane<T> {
    pub fn evaluate(&self, x: &[T]) -> T {
        self.points
            .iter()
            .zip(&self.values)
            .map(|(p, &v)| v + self.l * dist(p, x))
            .fold(T::infinity(), T::min)
    }

    pub fn lipschitz(&self) -> T {
        self.l
    }
}

/// McShane extension; the data must be `L`-Lipschitz (up to the slack `1e-9`).
pub fn mcshane_extend<T: Scalar>(points: &[Vec<T>], values: &[T], l: T) -> Result<McShane<T>> {
    if points.is_empty() {
        return Err(IlgError::TooFewPoints { needed: 1, got: 0 });
    }
    if points.len() != values.len() {
        return Err(IlgError::DimensionMismatch { expected: points.len(), found: values.len() });
    }
    if !(l >= T::zero()) || !l.is_finite() {
        return Err(IlgError::InvalidParameter("Lipschitz constant must be finite and >= 0".into()));
    }
    let slack = T::one() + lit(crate::tame::CONSTANT_SLACK);
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if (values[i] - values[j]).abs() > l * dist(&points[i], &points[j]) * slack {
                return Err(IlgError::LipschitzViolated(i, j));
            }
        }
    }
    Ok(McShane { points: points.to_vec(), values: values.to_vec(), l })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn jet1(pts: &[f64], f: &[f64], g: &[f64]) -> JetData<f64> {
        JetData::new(pts.iter().map(|&p| vec![p]).collect(), f.to_vec(), g.iter().map(|&v| vec![v]).collect())
            .unwrap()
    }

    fn half_square() -> JetData<f64> {
        jet1(&[0.0, 0.5, 1.0], &[0.0, 0.125, 0.5], &[0.0, 0.5, 1.0])
    }

    #[test]
    fn validate_jet_examples() {
        assert_eq!(validate_jet(&jet1(&[0.0], &[3.0], &[1.0])).unwrap(), 0.0);
        // x^2/2 on {0, 1}: gradient gap 1, Taylor remainder 1/2.
        assert_abs_diff_eq!(validate_jet(&jet1(&[0.0, 1.0], &[0.0, 0.5], &[0.0, 1.0])).unwrap(), 1.0);
        assert_abs_diff_eq!(validate_jet(&half_square()).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn jet_rejects_bad_input() {
        assert!(JetData::<f64>::new(vec![], vec![], vec![]).is_err());
        assert!(matches!(
            JetData::new(vec![vec![0.0], vec![0.0]], vec![0.0, 1.0], vec![vec![0.0], vec![0.0]]),
            Err(IlgError::DuplicatePoint(0, 1))
        ));
        assert!(JetData::new(vec![vec![0.0; 4]], vec![0.0], vec![vec![0.0; 4]]).is_err());
        assert!(JetData::new(vec![vec![f64::NAN]], vec![0.0], vec![vec![0.0]]).is_err());
    }

    #[test]
    fn single_point_is_affine() {
        let jet = JetData::new(vec![vec![0.3, -0.2]], vec![1.5], vec![vec![2.0, -1.0]]).unwrap();
        let ext = build_extension(&jet).unwrap();
        for x in [[0.0, 0.0], [10.0, -3.0], [0.3, -0.2]] {
            let (v, g) = ext.evaluate(&x);
            assert_eq!(v, 1.5 + 2.0 * (x[0] - 0.3) - (x[1] + 0.2));
            assert_eq!(g, vec![2.0, -1.0]);
        }
        assert_eq!(ext.measured_grad_lip(), 0.0);
    }

    #[test]
    fn zero_jet_extends_to_zero() {
        let ext = build_extension(&jet1(&[0.0, 1.0], &[0.0, 0.0], &[0.0, 0.0])).unwrap();
        for i in 0..=40 {
            let x = -1.0 + 0.075 * i as f64;
            assert_eq!(ext.evaluate(&[x]), (0.0, vec![0.0]));
        }
    }

    #[test]
    fn half_square_jet() {
        let jet = half_square();
        let ext = build_extension(&jet).unwrap();
        for (i, p) in jet.points().iter().enumerate() {
            assert_eq!(ext.evaluate(p), (jet.f()[i], jet.grad()[i].clone()));
        }
        let lip = ext.measure_grad_lip(2000, 1);
        assert!(lip >= 1.0 && lip <= c_impl(1), "{lip}");
        let mut rng = SeededRng::new(3);
        let h = 1e-5;
        for _ in 0..500 {
            let x = rng.range(-0.5, 1.5);
            let fd = (ext.evaluate(&[x + h]).0 - ext.evaluate(&[x - h]).0) / (2.0 * h);
            assert!((fd - ext.evaluate(&[x]).1[0]).abs() <= 1e-7, "x = {x}");
        }
    }

    #[test]
    fn doubling_the_jet_doubles_the_extension() {
        let jet = JetData::new(
            vec![vec![0.0, 0.0], vec![1.0, 0.2], vec![0.4, 0.9]],
            vec![0.1, -0.3, 0.7],
            vec![vec![1.0, 0.0], vec![-0.5, 0.25], vec![0.3, 0.3]],
        )
        .unwrap();
        let a = build_extension(&jet).unwrap();
        let b = build_extension(&jet.scaled(2.0)).unwrap();
        let mut rng = SeededRng::new(5);
        for _ in 0..200 {
            let x = [rng.range(-1.0, 2.0), rng.range(-1.0, 2.0)];
            let (va, ga) = a.evaluate(&x);
            let (vb, gb) = b.evaluate(&x);
            assert_eq!(vb, 2.0 * va);
            assert_eq!(gb, ga.iter().map(|g| 2.0 * g).collect::<Vec<_>>());
        }
    }

    #[test]
    fn whitney_cubes_tile_and_respect_distance_bounds() {
        let jet = JetData::new(vec![vec![0.0, 0.0], vec![1.0, 0.5]], vec![0.0; 2], vec![vec![0.0; 2]; 2]).unwrap();
        let ext = build_extension(&jet).unwrap();
        let cubes = ext.cubes_in_box(&[-1.0, -1.0], &[2.0, 2.0], 7);
        assert!(!cubes.is_empty());
        for q in &cubes {
            let d = ext.nearest_to_cube(q).1;
            let diam = ext.diam(q);
            assert!(diam <= d && d <= 4.0 * diam, "{q:?}");
        }
        // interiors are disjoint: no cube is an ancestor of another
        let set: std::collections::HashSet<_> = cubes.iter().cloned().collect();
        for q in &cubes {
            let mut p = q.parent();
            for _ in 0..10 {
                assert!(!set.contains(&p));
                p = p.parent();
            }
        }
        // every point away from E lies in exactly the cube reported by cube_containing
        let mut rng = SeededRng::new(8);
        for _ in 0..200 {
            let x = [rng.range(-1.0, 2.0), rng.range(-1.0, 2.0)];
            let q = ext.cube_containing(&x).unwrap();
            assert!(ext.is_whitney_cube(&q));
            let lo = q.lower::<f64>();
            assert!((0..2).all(|a| lo[a] <= x[a] && x[a] < lo[a] + q.side::<f64>()));
        }
        assert_eq!(ext.cube_containing(&[0.0, 0.0]), None);
    }

    #[test]
    fn line_probe_is_continuous() {
        let jet = jet1(&[0.0, 0.3, 1.0], &[0.0, 1.0, -1.0], &[1.0, -2.0, 0.5]);
        let ext = build_extension(&jet).unwrap();
        let step = 1e-4;
        let mut prev = ext.evaluate(&[-0.5]);
        for i in 1..20000 {
            let cur = ext.evaluate(&[-0.5 + step * i as f64]);
            assert!((cur.0 - prev.0).abs() <= 1e-2, "value jump at {i}");
            assert!((cur.1[0] - prev.1[0]).abs() <= c_impl(1) * ext.lambda() * step * 1.01, "gradient jump at {i}");
            prev = cur;
        }
    }

    #[test]
    fn f32_restriction() {
        let jet = JetData::<f32>::new(vec![vec![0.0], vec![1.0]], vec![0.0, 0.5], vec![vec![0.0], vec![1.0]]).unwrap();
        let ext = build_extension(&jet).unwrap();
        assert_eq!(ext.evaluate(&[1.0]), (0.5, vec![1.0]));
        let (v, _) = ext.evaluate(&[0.5]);
        assert!(v.is_finite());
    }

    #[test]
    fn json_round_trip() {
        let jet = half_square();
        let s = serde_json::to_string(&jet.to_json()).unwrap();
        assert!(s.starts_with("{\"points\":"));
        let back = JetData::from_json(&serde_json::from_str(&s).unwrap()).unwrap();
        assert_eq!(back, jet);
    }

    #[test]
    fn mcshane_examples() {
        let m = mcshane_extend(&[vec![0.0], vec![1.0]], &[0.0, 1.0], 1.0).unwrap();
        assert_eq!(m.evaluate(&[0.5]), 0.5);
        assert_eq!(m.evaluate(&[-2.0]), 2.0);
        assert_eq!(m.evaluate(&[1.0]), 1.0);
        assert!(matches!(
            mcshane_extend(&[vec![0.0], vec![1.0]], &[0.0, 2.0], 1.0),
            Err(IlgError::LipschitzViolated(0, 1))
        ));
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let m = mcshane_extend(&pts, &[0.0, 0.5, -0.5], 0.8).unwrap();
        let mut rng = SeededRng::new(2);
        for _ in 0..500 {
            let x = [rng.range(-2.0, 3.0), rng.range(-2.0, 3.0)];
            let y = [rng.range(-2.0, 3.0), rng.range(-2.0, 3.0)];
            assert!((m.evaluate(&x) - m.evaluate(&y)).abs() <= 0.8 * dist(&x, &y) * (1.0 + 1e-12));
        }
    }
}
