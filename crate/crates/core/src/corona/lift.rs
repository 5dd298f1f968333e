//! Intrinsic lift of a Euclidean tree approximant: tent corrections on minimal intervals
//! and the integrated last component.

use serde::{Deserialize, Serialize};

use super::curve::{LiftedCurve, PiecewiseLinear};
use super::dyadic::DyadicInterval;
use super::euclidean::{Coronization, EuclideanApprox};
use crate::error::{IlgError, Result};
use crate::scalar::{dist, lit, to_f64, Scalar};

/// Extra dyadic levels of the last-component table below the truncation depth.
pub const TABLE_REFINEMENT: i32 = 4;

/// Panels of the composite Simpson rule used for cross-checks.
pub const SIMPSON_PANELS: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct Correction<T> {
    pub s: DyadicInterval,
    /// Tent height is `c |S|` at the midpoint of `S`, support `S/2`.
    pub c: T,
    /// The same constant from Simpson quadrature of the defining integral with the input curve.
    pub c_quadrature: T,
}

impl<T: Scalar> Correction<T> {
    pub fn tent(&self, s: T) -> T {
        let len = self.s.len::<T>();
        let r = (len - lit::<T>(4.0) * (s - self.s.mid::<T>()).abs()).max(T::zero());
        self.c * r
    }

    pub fn tent_slope(&self, s: T) -> T {
        let (a, b) = self.s.half::<T>();
        let mid = self.s.mid::<T>();
        if s < a || s >= b {
            T::zero()
        } else if s < mid {
            lit::<T>(4.0) * self.c
        } else {
            lit::<T>(-4.0) * self.c
        }
    }
}

/// Bound checks produced while lifting one tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftReport {
    /// `max |c|`.
    pub max_c: f64,
    /// `max |c| / (24 n delta)`.
    pub c_ratio: f64,
    /// `max Lip(xi_S) / (96 n delta)`.
    pub xi_lipschitz_ratio: f64,
    /// `max sup|xi_S| / (24 n delta |S|)`.
    pub xi_sup_ratio: f64,
    /// `max |Simpson(xi_S) - c |S|^2 / 4|`.
    pub xi_integral_error: f64,
    /// `max |c - c_quadrature|`.
    pub c_quadrature_gap: f64,
    /// Largest slope of `psi~_T + xi` over breakpoints.
    pub lipschitz: f64,
}

/// Approximant `phi_T` of one tree.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeApprox<T> {
    pub tree: usize,
    pub top: DyadicInterval,
    n: usize,
    slope: Vec<T>,
    psi: PiecewiseLinear<T>,
    corrections: Vec<Correction<T>>,
    knots: Vec<T>,
    table_origin: T,
    table_step: T,
    table: Vec<T>,
    pub report: LiftReport,
}

fn simpson<T: Scalar>(f: impl Fn(T) -> T, a: T, b: T) -> T {
    let h = (b - a) / lit(SIMPSON_PANELS as f64);
    let mut acc = f(a) + f(b);
    for i in 1..SIMPSON_PANELS {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc = acc + lit::<T>(w) * f(a + h * lit(i as f64));
    }
    acc * h / lit(3.0)
}

/// `-h_{n+1} + 1/2 sum_{i=2..n} (h_i d_{n+i} - d_i h_{n+i})` on a horizontal vector `h` with
/// derivative `d`.
fn integrand<T: Scalar>(n: usize, h: &[T], d: &[T]) -> T {
    let mut b = T::zero();
    for i in 0..n - 1 {
        b = b + h[i] * d[n + i] - d[i] * h[n + i];
    }
    -h[n - 1] + b * lit(0.5)
}

impl<T: Scalar> TreeApprox<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn slope(&self) -> &[T] {
        &self.slope
    }

    /// `psi~_T` without the tent corrections.
    pub fn psi(&self) -> &PiecewiseLinear<T> {
        &self.psi
    }

    pub fn corrections(&self) -> &[Correction<T>] {
        &self.corrections
    }

    /// `(origin, step, values)` of the cumulative table of `phi_{T,2n+1}`.
    pub fn table(&self) -> (T, T, &[T]) {
        (self.table_origin, self.table_step, &self.table)
    }

    fn correction_at(&self, s: T) -> Option<&Correction<T>> {
        let i = self.corrections.partition_point(|c| c.s.hi::<T>() <= s);
        self.corrections.get(i).filter(|c| c.s.lo::<T>() <= s)
    }

    pub fn xi(&self, s: T) -> T {
        self.correction_at(s).map_or(T::zero(), |c| c.tent(s))
    }

    /// Horizontal part `psi~_T + L_T + xi e_{n+1}` at `s`.
    pub fn horizontal(&self, s: T) -> Vec<T> {
        let mut v: Vec<T> = self.psi.eval(s).iter().zip(&self.slope).map(|(&p, &a)| p + a * s).collect();
        v[self.n - 1] = v[self.n - 1] + self.xi(s);
        v
    }

    /// Right derivative of the horizontal part.
    pub fn horizontal_slope(&self, s: T) -> Vec<T> {
        let mut d: Vec<T> = self.psi.slope(s).iter().zip(&self.slope).map(|(&p, &a)| p + a).collect();
        if let Some(c) = self.correction_at(s) {
            d[self.n - 1] = d[self.n - 1] + c.tent_slope(s);
        }
        d
    }

    /// Exact integral of the lifting integrand over `[x, y]`.
    pub fn integral(&self, x: T, y: T) -> T {
        if y < x {
            return -self.integral(y, x);
        }
        let start = self.knots.partition_point(|&k| k <= x);
        let mut pts = vec![x];
        pts.extend(self.knots[start..].iter().copied().take_while(|&k| k < y));
        pts.push(y);
        let mut acc = T::zero();
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b <= a {
                continue;
            }
            let d = self.horizontal_slope(a + (b - a) * lit(0.5));
            let ga = integrand(self.n, &self.horizontal(a), &d);
            let gb = integrand(self.n, &self.horizontal(b), &d);
            acc = acc + (b - a) * (ga + gb) * lit(0.5);
        }
        acc
    }

    /// `phi_{T,2n+1}(s)` from the nearest table node at or below `s`.
    pub fn last(&self, s: T) -> T {
        let f = ((s - self.table_origin) / self.table_step).floor();
        let j = if f < T::zero() { 0 } else { f.to_usize().unwrap_or(usize::MAX).min(self.table.len() - 1) };
        let x = self.table_origin + self.table_step * lit(j as f64);
        self.table[j] + self.integral(x, s)
    }

    /// Index of the table node at `s`, if `s` is one.
    pub fn table_node(&self, s: T) -> Option<usize> {
        let f = (s - self.table_origin) / self.table_step;
        let r = f.round();
        ((f - r).abs() < lit(1e-9) && r >= T::zero()).then(|| r.to_usize()).flatten().filter(|&j| j < self.table.len())
    }

    /// Adds `amount` to one table node (fault injection).
    pub fn perturb_table(&mut self, node: usize, amount: T) {
        self.table[node] = self.table[node] + amount;
    }
}

fn build<T: Scalar>(
    n: usize,
    tree: usize,
    top: DyadicInterval,
    slope: Vec<T>,
    psi: PiecewiseLinear<T>,
    corrections: Vec<Correction<T>>,
) -> TreeApprox<T> {
    let mut knots: Vec<T> = psi.knots().to_vec();
    for c in &corrections {
        let (a, b) = c.s.half::<T>();
        knots.extend([a, c.s.mid::<T>(), b]);
    }
    knots.sort_by(|a, b| a.partial_cmp(b).expect("finite knots"));
    knots.dedup();
    TreeApprox {
        tree,
        top,
        n,
        slope,
        psi,
        corrections,
        knots,
        table_origin: T::zero(),
        table_step: T::one(),
        table: vec![T::zero()],
        report: LiftReport {
            max_c: 0.0,
            c_ratio: 0.0,
            xi_lipschitz_ratio: 0.0,
            xi_integral_error: 0.0,
            xi_sup_ratio: 0.0,
            c_quadrature_gap: 0.0,
            lipschitz: 0.0,
        },
    }
}

/// `eta^2 / (100 n)`.
pub fn delta_for_eta<T: Scalar>(eta: T, n: usize) -> T {
    eta * eta / lit(100.0 * n as f64)
}

/// Lifts the matched approximant of tree `index` of `corona`.
pub fn lift_tree<T: Scalar>(
    phi: &LiftedCurve<T>,
    corona: &Coronization,
    index: usize,
    approx: &EuclideanApprox<T>,
    eta: T,
) -> Result<TreeApprox<T>> {
    let n = phi.n();
    if n < 2 {
        return Err(IlgError::Unsupported(
            "n = 1 (the first Heisenberg group) is out of scope; see Fassler and Orponen for that case".into(),
        ));
    }
    if approx.slope.len() != 2 * n - 1 {
        return Err(IlgError::DimensionMismatch { expected: 2 * n - 1, found: approx.slope.len() });
    }
    let tree = corona
        .trees
        .get(index)
        .ok_or_else(|| IlgError::InvalidParameter(format!("no tree with index {index}")))?;
    let delta = delta_for_eta(eta, n);
    let top = tree.top;
    let bare = build(n, index, top, approx.slope.clone(), approx.psi.clone(), Vec::new());
    let mut corrections = Vec::new();
    for s in tree.minimal() {
        let (a, b) = (s.lo::<T>(), s.hi::<T>());
        let len = s.len::<T>();
        let scale = lit::<T>(4.0) / (len * len);
        let c = (bare.integral(a, b) - (phi.last(b) - phi.last(a))) * scale;
        let eps = len * lit(1e-9);
        let diff = |r: T| {
            let (h, hp) = (bare.horizontal(r), phi.horizontal(r));
            let one_sided = |x: T| integrand(n, &h, &bare.horizontal_slope(x)) - integrand(n, &hp, &phi.horizontal_slope(x));
            let left = if r - eps < a { r + eps } else { r - eps };
            let right = if r + eps > b { r - eps } else { r + eps };
            (one_sided(left) + one_sided(right)) * lit(0.5)
        };
        let c_quadrature = simpson(diff, a, b) * scale;
        corrections.push(Correction { s, c, c_quadrature });
    }
    let mut out = build(n, index, top, approx.slope.clone(), approx.psi.clone(), corrections);

    let root_len = corona.root.len::<T>();
    let step = root_len * lit::<T>(2.0).powi(-(corona.depth as i32 + TABLE_REFINEMENT));
    let (lo2, hi2) = top.double::<T>();
    let count = ((hi2 - lo2) / step).round().to_usize().expect("table size") + 1;
    let anchor = ((top.lo::<T>() - lo2) / step).round().to_usize().expect("anchor");
    let node = |j: usize| lo2 + step * lit(j as f64);
    let mut table = vec![T::zero(); count];
    table[anchor] = phi.last(top.lo());
    for j in anchor..count - 1 {
        table[j + 1] = table[j] + out.integral(node(j), node(j + 1));
    }
    for j in (0..anchor).rev() {
        table[j] = table[j + 1] - out.integral(node(j), node(j + 1));
    }
    out.table_origin = lo2;
    out.table_step = step;
    out.table = table;

    let scale_c = lit::<T>(24.0 * n as f64) * delta;
    let mut r = out.report.clone();
    for c in &out.corrections {
        let len = c.s.len::<T>();
        let ac = to_f64(c.c.abs());
        r.max_c = r.max_c.max(ac);
        r.c_ratio = r.c_ratio.max(ac / to_f64(scale_c));
        r.xi_lipschitz_ratio = r.xi_lipschitz_ratio.max(4.0 * ac / to_f64(lit::<T>(4.0) * scale_c));
        let sup = [c.s.half::<T>().0, c.s.mid::<T>(), c.s.half::<T>().1]
            .iter()
            .map(|&x| c.tent(x).abs())
            .fold(T::zero(), T::max);
        r.xi_sup_ratio = r.xi_sup_ratio.max(to_f64(sup / (scale_c * len)));
        let integral = simpson(|x| c.tent(x), c.s.lo(), c.s.hi());
        r.xi_integral_error = r.xi_integral_error.max(to_f64((integral - c.c * len * len / lit(4.0)).abs()));
        r.c_quadrature_gap = r.c_quadrature_gap.max(to_f64((c.c - c.c_quadrature).abs()));
    }
    let k = &out.knots;
    for w in k.windows(2) {
        let mid = w[0] + (w[1] - w[0]) * lit(0.5);
        let mut d = out.horizontal_slope(mid);
        for (x, a) in d.iter_mut().zip(&out.slope) {
            *x = *x - *a;
        }
        r.lipschitz = r.lipschitz.max(to_f64(crate::scalar::euclid(&d)));
    }
    out.report = r;
    Ok(out)
}

/// One verification sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub tree: usize,
    pub interval: DyadicInterval,
    pub s: f64,
    /// `d(phi(s), phi_T(s)) / (eta |Q|)`.
    pub ratio: f64,
    /// `A / (eta^2 |Q|^2)`.
    pub quadratic_ratio: f64,
}

/// Sampled comparison of `phi` and `phi_T` on one tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntrinsicCheck {
    pub tree: usize,
    pub worst_ratio: f64,
    pub worst_quadratic_ratio: f64,
    pub witness_interval: Option<DyadicInterval>,
    pub witness_s: Option<f64>,
    /// `max |phi_{2n+1} - phi_{T,2n+1}| / |Q(T)|^2` over minimal-interval endpoints.
    pub endpoint_vertical_gap: f64,
    /// `max |psi - (psi~_T + L_T)|` over minimal-interval endpoints.
    pub endpoint_horizontal_gap: f64,
    pub records: Vec<SampleRecord>,
}

/// Vertical part of `pi_W(Phi_T(s)^{-1} Phi(s))` for `k = 1`.
pub fn vertical_gap<T: Scalar>(n: usize, phi: &[T], phi_t: &[T]) -> T {
    let last = 2 * n - 1;
    let mut cross = T::zero();
    for i in 0..n - 1 {
        cross = cross - phi_t[i] * phi[n + i] + phi[i] * phi_t[n + i];
    }
    phi[last] - phi_t[last] + cross * lit(0.5)
}

/// Checks `d(phi(s), phi_T(s)) <= eta |Q|` and `A <= eta^2 |Q|^2` at the samples of `2Q` for
/// every member `Q`, and the matching of `phi_T` with `phi` at minimal-interval endpoints.
pub fn verify_intrinsic_approx<T: Scalar>(
    phi: &LiftedCurve<T>,
    corona: &Coronization,
    approx: &TreeApprox<T>,
    eta: T,
) -> IntrinsicCheck {
    let n = phi.n();
    let tree = &corona.trees[approx.tree];
    let mut out = IntrinsicCheck {
        tree: approx.tree,
        worst_ratio: 0.0,
        worst_quadratic_ratio: 0.0,
        witness_interval: None,
        witness_s: None,
        endpoint_vertical_gap: 0.0,
        endpoint_horizontal_gap: 0.0,
        records: Vec::new(),
    };
    let mut worst = f64::NEG_INFINITY;
    for q in &tree.members {
        let len = q.len::<T>();
        for s in q.samples::<T>() {
            let p = phi.eval(s);
            let mut pt = approx.horizontal(s);
            pt.push(approx.last(s));
            let horiz = dist(&p[..2 * n - 1], &pt[..2 * n - 1]);
            let a = vertical_gap(n, &p, &pt).abs();
            let d = horiz.max(a.sqrt());
            let ratio = to_f64(d / (eta * len));
            let quadratic_ratio = to_f64(a / (eta * eta * len * len));
            out.worst_ratio = out.worst_ratio.max(ratio);
            out.worst_quadratic_ratio = out.worst_quadratic_ratio.max(quadratic_ratio);
            let score = ratio.max(quadratic_ratio);
            if score > worst {
                worst = score;
                out.witness_interval = Some(*q);
                out.witness_s = Some(to_f64(s));
            }
            out.records.push(SampleRecord { tree: approx.tree, interval: *q, s: to_f64(s), ratio, quadratic_ratio });
        }
    }
    let top_len = tree.top.len::<T>();
    for s in tree.minimal() {
        for e in [s.lo::<T>(), s.hi::<T>()] {
            let v = (phi.last(e) - approx.last(e)).abs() / (top_len * top_len);
            out.endpoint_vertical_gap = out.endpoint_vertical_gap.max(to_f64(v));
            let mut h = approx.horizontal(e);
            h[n - 1] = h[n - 1] - approx.xi(e);
            out.endpoint_horizontal_gap = out.endpoint_horizontal_gap.max(to_f64(dist(&phi.horizontal(e), &h)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corona::euclidean::matched_corona;
    use crate::corona::euclidean::EuclideanApprox;

    fn affine_curve(n: usize, slope: &[f64]) -> LiftedCurve<f64> {
        // horizontal part linear, last component integrated exactly
        let h = 1.0 / 64.0;
        let nodes = (0..=192)
            .map(|j| {
                let s = -1.0 + j as f64 * h;
                let mut v: Vec<f64> = slope.iter().map(|a| a * s).collect();
                v.push(-0.5 * slope[n - 1] * s * s);
                v
            })
            .collect();
        LiftedCurve::new(n, -1.0, h, nodes).unwrap()
    }

    #[test]
    fn own_lift_has_zero_error() {
        let n = 2;
        let phi = affine_curve(n, &[0.3, 0.2, -0.4]);
        let root = DyadicInterval::new(0, 0);
        let eta = 0.3;
        let delta = delta_for_eta(eta, n);
        let (c, a, _) = matched_corona(|s| phi.horizontal(s), root, 5, delta).unwrap();
        assert_eq!(c.trees.len(), 1);
        let t = lift_tree(&phi, &c, 0, &a[0], eta).unwrap();
        assert!(t.corrections().iter().all(|c| c.c.abs() < 1e-12));
        let chk = verify_intrinsic_approx(&phi, &c, &t, eta);
        assert!(chk.worst_ratio < 1e-6, "{}", chk.worst_ratio);
        assert!(chk.endpoint_vertical_gap < 1e-12);
    }

    #[test]
    fn tent_integral_and_slopes() {
        let c = Correction { s: DyadicInterval::new(2, 1), c: -0.5, c_quadrature: -0.5 };
        assert_eq!(c.tent(0.375), -0.125);
        assert_eq!(c.tent(0.25), 0.0);
        assert_eq!(c.tent(0.3), 0.0);
        assert_eq!(c.tent_slope(0.33), -2.0);
        assert_eq!(c.tent_slope(0.4), 2.0);
        let i: f64 = simpson(|x| c.tent(x), 0.25, 0.5);
        assert!((i - (-0.5 * 0.0625 / 4.0)).abs() < 1e-15);
    }

    #[test]
    fn rejects_n_equal_one() {
        let phi = affine_curve(1, &[0.5]);
        let root = DyadicInterval::new(0, 0);
        let (c, a, _) = matched_corona(|s| phi.horizontal(s), root, 3, 0.01).unwrap();
        assert!(matches!(lift_tree(&phi, &c, 0, &a[0], 0.3), Err(IlgError::Unsupported(_))));
    }

    #[test]
    fn bumped_approximant_gets_nonzero_corrections() {
        let n = 2;
        let h = 1.0 / 1024.0;
        let nodes: Vec<Vec<f64>> = (0..=3072)
            .map(|j| {
                let s = -1.0 + j as f64 * h;
                vec![0.2 * s, -0.1 * s, 0.3 * s, 0.05 * s * s]
            })
            .collect();
        let phi = LiftedCurve::new(n, -1.0, h, nodes).unwrap();
        let eta = 0.3;
        let delta = delta_for_eta(eta, n);
        let root = DyadicInterval::new(0, 0);
        let (c, a, _) = matched_corona(|s| phi.horizontal(s), root, 6, delta).unwrap();
        assert_eq!(c.trees.len(), 1);
        let minimal = c.trees[0].minimal();
        let mut knots = Vec::new();
        let mut vals = Vec::new();
        for (i, q) in minimal.iter().enumerate() {
            let bump = 1e-7 * if i % 2 == 0 { 1.0 } else { -1.0 };
            for (x, b) in [(q.lo::<f64>(), 0.0), (q.mid::<f64>(), bump)] {
                knots.push(x);
                let mut v = a[0].psi.eval(x);
                v[0] += b;
                v[2] += 2.0 * b;
                vals.push(v);
            }
        }
        knots.push(1.0);
        vals.push(a[0].psi.eval(1.0));
        let bumped = EuclideanApprox { slope: a[0].slope.clone(), psi: PiecewiseLinear::new(knots, vals).unwrap(), clamped: false };
        let t = lift_tree(&phi, &c, 0, &bumped, eta).unwrap();
        assert!(t.corrections().iter().all(|c| c.c != 0.0));
        assert!(t.report.c_quadrature_gap < 1e-9, "{}", t.report.c_quadrature_gap);
        assert!(t.report.xi_integral_error < 1e-15);
        assert!(t.report.c_ratio <= 1.0);
        let chk = verify_intrinsic_approx(&phi, &c, &t, eta);
        assert!(chk.endpoint_vertical_gap < 1e-12, "{}", chk.endpoint_vertical_gap);
        assert!(chk.worst_ratio <= 1.0);
    }
}
