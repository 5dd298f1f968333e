//! Reparameterizing a graph over `V` whose horizontal part is `psi + L` as a graph over the
//! horizontal line `V_L` spanned by `(1, a)`.

use serde::Serialize;

use super::curve::LiftedCurve;
use crate::error::{IlgError, Result};
use crate::scalar::{dot, euclid, lit, to_f64, Scalar};

/// Frozen constant `c` of the bound `c sqrt(eta)` on the intrinsic constant over `V_L`.
pub const REPARAM_C_IMPL: f64 = 1.0;

/// Graph-set gap tolerance in units of the squared grid step.
pub const GRAPH_GAP_FACTOR: f64 = 100.0;

/// Slack on the `sqrt(2) - 1` lower bound for `z'`.
const SLOPE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReparamReport {
    pub min_z_slope: f64,
    /// Largest distance between interpolated reparameterized points and the original graph.
    pub graph_gap: f64,
    pub graph_tolerance: f64,
    pub intrinsic_constant: f64,
    pub bound: f64,
}

impl ReparamReport {
    pub fn passes(&self) -> bool {
        self.min_z_slope >= 2f64.sqrt() - 1.0 - SLOPE_SLACK
            && self.graph_gap <= self.graph_tolerance
            && self.intrinsic_constant <= self.bound
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReparamGraph<T> {
    n: usize,
    /// Orthonormal basis of `R^{2n}`, `basis[0] = v_1`.
    basis: Vec<Vec<T>>,
    xs: Vec<T>,
    zs: Vec<T>,
    /// Per node: `(w_2, ..., w_{2n}, phi~_{2n+1})`.
    values: Vec<Vec<T>>,
    pub report: ReparamReport,
}

fn omega<T: Scalar>(n: usize, p: &[T], q: &[T]) -> T {
    (0..n).fold(T::zero(), |acc, i| acc + p[i] * q[n + i] - p[n + i] * q[i])
}

/// Orthonormal basis with first vector `v` (unit), via the Householder reflection sending
/// `e_1` to `v`.
fn complete_basis<T: Scalar>(v: &[T]) -> Vec<Vec<T>> {
    let d = v.len();
    let mut u: Vec<T> = v.iter().map(|&x| -x).collect();
    u[0] = u[0] + T::one();
    let uu = dot(&u, &u);
    (0..d)
        .map(|j| {
            let mut col: Vec<T> = (0..d).map(|i| if i == j { T::one() } else { T::zero() }).collect();
            if uu > lit(1e-30) {
                let f = lit::<T>(2.0) * u[j] / uu;
                for (c, &ui) in col.iter_mut().zip(&u) {
                    *c = *c - f * ui;
                }
            }
            col
        })
        .collect()
}

impl<T: Scalar> ReparamGraph<T> {
    pub fn direction(&self) -> &[T] {
        &self.basis[0]
    }

    pub fn basis(&self) -> &[Vec<T>] {
        &self.basis
    }

    /// `(x_i, z(x_i))` table.
    pub fn z_table(&self) -> (&[T], &[T]) {
        (&self.xs, &self.zs)
    }

    pub fn values(&self) -> &[Vec<T>] {
        &self.values
    }

    /// `x` with `z(x) = z`, by monotone linear interpolation in the table.
    pub fn invert(&self, z: T) -> T {
        let zs = &self.zs;
        let i = zs.partition_point(|&q| q <= z).clamp(1, zs.len() - 1) - 1;
        let u = (z - zs[i]) / (zs[i + 1] - zs[i]);
        self.xs[i] + (self.xs[i + 1] - self.xs[i]) * u
    }

    /// Linear interpolation of the reparameterized components at `z`.
    pub fn eval(&self, z: T) -> Vec<T> {
        let zs = &self.zs;
        let i = zs.partition_point(|&q| q <= z).clamp(1, zs.len() - 1) - 1;
        let u = (z - zs[i]) / (zs[i + 1] - zs[i]);
        self.values[i].iter().zip(&self.values[i + 1]).map(|(&a, &b)| a + (b - a) * u).collect()
    }

    /// Heisenberg point of the graph over `V_L` at parameter `z`.
    pub fn graph_point(&self, z: T) -> (Vec<T>, T) {
        let v = self.eval(z);
        point_from(self.n, &self.basis, z, &v)
    }
}

fn point_from<T: Scalar>(n: usize, basis: &[Vec<T>], z: T, v: &[T]) -> (Vec<T>, T) {
    let mut x: Vec<T> = basis[0].iter().map(|&b| b * z).collect();
    for (j, b) in basis.iter().enumerate().skip(1) {
        for (xi, &bi) in x.iter_mut().zip(b) {
            *xi = *xi + v[j - 1] * bi;
        }
    }
    let t = v[2 * n - 1] + omega(n, &basis[0], &x) * z * lit(0.5);
    (x, t)
}

fn original_point<T: Scalar>(phi: &LiftedCurve<T>, x: T) -> (Vec<T>, T) {
    let n = phi.n();
    let h = phi.horizontal(x);
    let mut p = vec![x];
    p.extend_from_slice(&h);
    let t = phi.last(x) + x * h[n - 1] * lit(0.5);
    (p, t)
}

/// Reparameterizes the graph of `phi` over `[x0, x1]` (sampled at `count` nodes) as a graph
/// over `V_L`, `L(x) = a x`, and audits it. `eta` is the Lipschitz constant of the
/// horizontal part minus `L`.
pub fn reparameterize_over_vl<T: Scalar>(
    phi: &LiftedCurve<T>,
    a: &[T],
    eta: T,
    x0: T,
    x1: T,
    count: usize,
) -> Result<ReparamGraph<T>> {
    let n = phi.n();
    if !(eta >= T::zero() && eta < T::one()) {
        return Err(IlgError::InvalidParameter(format!("eta must lie in [0, 1), got {eta}")));
    }
    if a.len() != 2 * n - 1 {
        return Err(IlgError::DimensionMismatch { expected: 2 * n - 1, found: a.len() });
    }
    if a.iter().any(|c| !c.is_finite()) {
        return Err(IlgError::NonFinite("slope"));
    }
    if count < 2 || !(x1 > x0) {
        return Err(IlgError::InvalidParameter("need count >= 2 and x0 < x1".into()));
    }
    let mut v1 = vec![T::one()];
    v1.extend_from_slice(a);
    let norm = euclid(&v1);
    v1.iter_mut().for_each(|c| *c = *c / norm);
    let basis = complete_basis(&v1);

    let step = (x1 - x0) / lit((count - 1) as f64);
    let xs: Vec<T> = (0..count).map(|i| x0 + step * lit(i as f64)).collect();
    let points: Vec<(Vec<T>, T)> = xs.iter().map(|&x| original_point(phi, x)).collect();
    let zs: Vec<T> = points.iter().map(|(p, _)| dot(p, &basis[0])).collect();
    let values: Vec<Vec<T>> = points
        .iter()
        .zip(&zs)
        .map(|((p, t), &z)| {
            let mut v: Vec<T> = basis[1..].iter().map(|b| dot(p, b)).collect();
            v.push(*t - z * omega(n, &basis[0], p) * lit(0.5));
            v
        })
        .collect();
    let min_z_slope = zs.windows(2).map(|w| to_f64((w[1] - w[0]) / step)).fold(f64::INFINITY, f64::min);

    let mut out = ReparamGraph {
        n,
        basis,
        xs,
        zs,
        values,
        report: ReparamReport {
            min_z_slope,
            graph_gap: 0.0,
            graph_tolerance: GRAPH_GAP_FACTOR * to_f64(step * step),
            intrinsic_constant: 0.0,
            bound: REPARAM_C_IMPL * to_f64(eta).sqrt(),
        },
    };
    if min_z_slope <= 0.0 {
        return Ok(out);
    }

    let mut gap = T::zero();
    for w in out.zs.windows(2) {
        let z = (w[0] + w[1]) * lit(0.5);
        let (p, t) = out.graph_point(z);
        let (q, s) = original_point(phi, out.invert(z));
        let d = p.iter().zip(&q).fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y)).sqrt();
        gap = gap.max(d.max((t - s).abs()));
    }
    out.report.graph_gap = to_f64(gap);

    let mut worst = T::zero();
    for i in 0..count {
        let (pi, ti) = &points[i];
        for j in i + 1..count {
            let (pj, tj) = &points[j];
            // g = P_i^{-1} P_j
            let xg: Vec<T> = pj.iter().zip(pi).map(|(&b, &a)| b - a).collect();
            let tg = *tj - *ti - omega(n, pi, pj) * lit(0.5);
            let u = dot(&xg, &out.basis[0]);
            let wx: Vec<T> = xg.iter().zip(&out.basis[0]).map(|(&x, &b)| x - u * b).collect();
            let wt = tg - omega(n, &out.basis[0], &xg) * u * lit(0.5);
            let r = euclid(&wx).max(wt.abs().sqrt()) / u.abs();
            worst = worst.max(r);
        }
    }
    out.report.intrinsic_constant = to_f64(worst);
    Ok(out)
}
