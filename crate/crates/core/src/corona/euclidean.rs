//! Stopping-time coronization of a Lipschitz map `psi: R -> R^m` and endpoint matching.

use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::curve::PiecewiseLinear;
use super::dyadic::{sort_by_position, DyadicInterval};
use crate::error::{IlgError, Result};
use crate::scalar::{dist, euclid, lit, to_f64, Scalar};

/// Deepest supported truncation.
pub const MAX_DEPTH: u32 = 16;

/// Fit thresholds are `delta / FIT_DIVISOR`.
pub const FIT_DIVISOR: f64 = 5.0;

/// Bound on `|a_T|`; larger fitted slopes are clamped and flagged.
pub const SLOPE_CLAMP: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub top: DyadicInterval,
    /// Sorted.
    pub members: Vec<DyadicInterval>,
}

impl Tree {
    pub fn contains(&self, q: &DyadicInterval) -> bool {
        self.members.binary_search(q).is_ok()
    }

    /// Members with no children in the tree, left to right.
    pub fn minimal(&self) -> Vec<DyadicInterval> {
        let mut m: Vec<_> = self.members.iter().copied().filter(|q| !self.contains(&q.children()[0])).collect();
        sort_by_position(&mut m);
        m
    }

    /// Checks that the tree has a unique maximal top, is closed under parents up to the top, and
    /// holds either both children of a member or neither.
    pub fn check(&self) -> std::result::Result<(), String> {
        if !self.contains(&self.top) {
            return Err(format!("tree {}: top is not a member", self.top));
        }
        for q in &self.members {
            if !self.top.contains(q) {
                return Err(format!("tree {}: member {q} not under the top", self.top));
            }
            if *q != self.top && !self.contains(&q.parent()) {
                return Err(format!("tree {}: member {q} breaks coherence", self.top));
            }
            let [c0, c1] = q.children();
            if self.contains(&c0) != self.contains(&c1) {
                return Err(format!("tree {}: children of {q} not paired", self.top));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coronization {
    pub root: DyadicInterval,
    pub depth: u32,
    pub bad: Vec<DyadicInterval>,
    pub trees: Vec<Tree>,
    pub packing_constant: f64,
}

impl Coronization {
    /// All intervals of the truncated grid.
    pub fn grid(&self) -> Vec<DyadicInterval> {
        self.root.descendants(self.depth)
    }

    pub fn good(&self) -> Vec<DyadicInterval> {
        let mut g: Vec<_> = self.trees.iter().flat_map(|t| t.members.iter().copied()).collect();
        g.sort();
        g
    }

    pub fn tops(&self) -> Vec<DyadicInterval> {
        self.trees.iter().map(|t| t.top).collect()
    }

    /// Smallest `C` with both Carleson sums bounded by `C |Q0|` for every grid `Q0`.
    pub fn measure_packing(&self) -> f64 {
        let root = self.root;
        let depth = self.depth;
        let accumulate = |coll: &[DyadicInterval]| {
            let mut acc: HashMap<DyadicInterval, f64> = HashMap::new();
            for q in coll {
                let len = q.len::<f64>();
                let mut a = *q;
                while a.j >= root.j {
                    *acc.entry(a).or_default() += len;
                    if a.j == root.j {
                        break;
                    }
                    a = a.parent();
                }
            }
            acc
        };
        let bad = accumulate(&self.bad);
        let tops = accumulate(&self.tops());
        root.descendants(depth)
            .iter()
            .map(|q| {
                let s = bad.get(q).copied().unwrap_or(0.0).max(tops.get(q).copied().unwrap_or(0.0));
                s / q.len::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// Partition, disjointness, tree axioms and the recorded packing constant.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let mut seen: HashMap<DyadicInterval, usize> = HashMap::new();
        for q in self.bad.iter().chain(self.trees.iter().flat_map(|t| t.members.iter())) {
            *seen.entry(*q).or_default() += 1;
        }
        let grid = self.grid();
        for q in &grid {
            match seen.get(q) {
                Some(1) => {}
                Some(c) => return Err(format!("interval {q} appears {c} times in B and the trees")),
                None => return Err(format!("interval {q} is in neither B nor a tree")),
            }
        }
        if seen.len() != grid.len() {
            return Err("B or a tree contains an interval outside the truncated grid".into());
        }
        for t in &self.trees {
            t.check()?;
        }
        let c = self.measure_packing();
        if c > self.packing_constant * (1.0 + 1e-12) {
            return Err(format!("Carleson sums need C = {c}, recorded {}", self.packing_constant));
        }
        Ok(())
    }
}

/// Per-tree approximant: `L_T(s) = slope * s` and the piecewise-linear `psi_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct EuclideanApprox<T> {
    pub slope: Vec<T>,
    pub psi: PiecewiseLinear<T>,
    pub clamped: bool,
}

impl<T: Scalar> EuclideanApprox<T> {
    /// `(psi_T + L_T)(s)`.
    pub fn eval(&self, s: T) -> Vec<T> {
        self.psi.eval(s).iter().zip(&self.slope).map(|(&p, &a)| p + a * s).collect()
    }
}

struct Fit<T> {
    slope: Vec<T>,
    dev: T,
    osc: T,
}

fn fit<T: Scalar>(psi: &impl Fn(T) -> Vec<T>, q: &DyadicInterval) -> Fit<T> {
    let xs = q.samples::<T>();
    let ys: Vec<Vec<T>> = xs.iter().map(|&x| psi(x)).collect();
    let m = ys[0].len();
    let count = lit::<T>(xs.len() as f64);
    let xbar = q.mid::<T>();
    let ybar: Vec<T> = (0..m).map(|c| ys.iter().map(|y| y[c]).sum::<T>() / count).collect();
    let sxx: T = xs.iter().map(|&x| (x - xbar) * (x - xbar)).sum();
    let slope: Vec<T> = (0..m)
        .map(|c| xs.iter().zip(&ys).map(|(&x, y)| (x - xbar) * (y[c] - ybar[c])).sum::<T>() / sxx)
        .collect();
    let mut dev = T::zero();
    let mut osc = T::zero();
    for (i, (&x, y)) in xs.iter().zip(&ys).enumerate() {
        let r: Vec<T> = (0..m).map(|c| y[c] - ybar[c] - slope[c] * (x - xbar)).collect();
        dev = dev.max(euclid(&r));
        for z in &ys[..i] {
            osc = osc.max(dist(y, z));
        }
    }
    Fit { slope, dev, osc }
}

/// `delta / (8 sqrt(m))`, the parameter at which the coronization is run before matching.
pub fn tightened_delta<T: Scalar>(delta: T, m: usize) -> T {
    delta / (lit::<T>(8.0) * lit::<T>(m as f64).sqrt())
}

fn check_delta<T: Scalar>(delta: T) -> Result<()> {
    if !(delta > T::zero() && delta < T::one()) {
        return Err(IlgError::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok(())
}

/// Stopping-time coronization of `psi` over the grid of `depth` levels under `root`.
///
/// Returns the coronization and, per tree in order, `(a_T, psi_T)` with
/// `|psi(s) - (psi_T + L_T)(s)| <= delta |Q|` on the samples of `2Q`, `Q` in the tree.
pub fn euclidean_corona<T: Scalar>(
    psi: impl Fn(T) -> Vec<T>,
    root: DyadicInterval,
    depth: u32,
    delta: T,
) -> Result<(Coronization, Vec<EuclideanApprox<T>>)> {
    check_delta(delta)?;
    if depth > MAX_DEPTH {
        return Err(IlgError::InvalidParameter(format!("depth must be at most {MAX_DEPTH}")));
    }
    let m = psi(root.mid()).len();
    if m == 0 {
        return Err(IlgError::InvalidParameter("psi has no components".into()));
    }
    let tau = delta / lit(FIT_DIVISOR);
    let last_level = root.j + depth as i32;
    let good_fit = |f: &Fit<T>, q: &DyadicInterval| f.dev <= tau * q.len::<T>();

    let mut bad = Vec::new();
    let mut trees = Vec::new();
    let mut approxes = Vec::new();
    let mut candidates = VecDeque::from([root]);
    while let Some(top) = candidates.pop_front() {
        let f = fit(&psi, &top);
        if f.osc > lit::<T>(2.0) * top.len::<T>() * lit(1.0 + 1e-12) || !good_fit(&f, &top) {
            bad.push(top);
            if top.j < last_level {
                candidates.extend(top.children());
            }
            continue;
        }
        let a_t = f.slope;
        let mut members = BTreeSet::from([top]);
        let mut leaves = Vec::new();
        let mut stack = vec![top];
        while let Some(q) = stack.pop() {
            if q.j == last_level {
                leaves.push(q);
                continue;
            }
            let children = q.children();
            let ok = children.iter().all(|c| {
                let fc = fit(&psi, c);
                good_fit(&fc, c) && dist(&fc.slope, &a_t) <= tau
            });
            if ok {
                members.extend(children);
                stack.extend(children);
            } else {
                leaves.push(q);
                candidates.extend(children);
            }
        }
        let norm = euclid(&a_t);
        let clamp = lit::<T>(SLOPE_CLAMP);
        let clamped = norm > clamp;
        let slope: Vec<T> = if clamped { a_t.iter().map(|&a| a * clamp / norm).collect() } else { a_t };
        sort_by_position(&mut leaves);
        let mut knots: Vec<T> = leaves.iter().map(|l| l.lo::<T>()).collect();
        knots.push(top.hi());
        let values = knots
            .iter()
            .map(|&s| psi(s).iter().zip(&slope).map(|(&p, &a)| p - a * s).collect())
            .collect();
        approxes.push((top, EuclideanApprox { slope, psi: PiecewiseLinear::new(knots, values)?, clamped }));
        trees.push(Tree { top, members: members.into_iter().collect() });
    }
    bad.sort();
    let mut order: Vec<usize> = (0..trees.len()).collect();
    order.sort_by_key(|&i| trees[i].top);
    let trees: Vec<Tree> = order.iter().map(|&i| trees[i].clone()).collect();
    let approxes: Vec<EuclideanApprox<T>> = order.iter().map(|&i| approxes[i].1.clone()).collect();
    let mut c = Coronization { root, depth, bad, trees, packing_constant: 0.0 };
    c.packing_constant = c.measure_packing();
    Ok((c, approxes))
}

/// Worst sampled ratio `|psi(s) - (psi_T + L_T)(s)| / (delta |Q|)` with its witness.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApproxCheck {
    pub worst_ratio: f64,
    pub witness_tree: Option<usize>,
    pub witness_interval: Option<DyadicInterval>,
    pub witness_s: Option<f64>,
    pub samples: usize,
}

impl ApproxCheck {
    pub fn passes(&self, slack: f64) -> bool {
        self.worst_ratio <= 1.0 + slack
    }
}

fn check_tree_approx<T: Scalar>(
    psi: &impl Fn(T) -> Vec<T>,
    ti: usize,
    tree: &Tree,
    approx: &EuclideanApprox<T>,
    delta: T,
    out: &mut ApproxCheck,
) {
    for q in &tree.members {
        let scale = delta * q.len::<T>();
        for s in q.samples::<T>() {
            let r = to_f64(dist(&psi(s), &approx.eval(s)) / scale);
            out.samples += 1;
            if r > out.worst_ratio || out.witness_tree.is_none() {
                *out = ApproxCheck {
                    worst_ratio: r.max(out.worst_ratio),
                    witness_tree: Some(ti),
                    witness_interval: Some(*q),
                    witness_s: Some(to_f64(s)),
                    samples: out.samples,
                };
            }
        }
    }
}

/// Sampled check of the approximation property of every tree at parameter `delta`.
pub fn check_approximation<T: Scalar>(
    psi: impl Fn(T) -> Vec<T>,
    corona: &Coronization,
    approxes: &[EuclideanApprox<T>],
    delta: T,
) -> ApproxCheck {
    let mut out =
        ApproxCheck { worst_ratio: 0.0, witness_tree: None, witness_interval: None, witness_s: None, samples: 0 };
    for (ti, (t, a)) in corona.trees.iter().zip(approxes).enumerate() {
        check_tree_approx(&psi, ti, t, a, delta, &mut out);
    }
    out
}

/// Per-interval affine corrections applied by [`boundary_match`].
#[derive(Debug, Clone, PartialEq)]
pub struct MatchReport<T> {
    pub corrections: Vec<(DyadicInterval, Vec<T>)>,
    /// `max |c_S|` over minimal intervals.
    pub max_correction: T,
    /// `max |psi~_T(e) - (psi - L_T)(e)|` over minimal-interval endpoints after matching.
    pub endpoint_gap: T,
    /// Largest slope of `psi~_T` over its breakpoints.
    pub lipschitz: T,
}

/// Adds to `psi_T` on each minimal interval `S = [a, b]` the affine map that makes it agree
/// with `psi - L_T` at `a` and `b`. Requires the approximation property at
/// `delta / (8 sqrt(m))`.
pub fn boundary_match<T: Scalar>(
    tree: &Tree,
    approx: &EuclideanApprox<T>,
    psi: impl Fn(T) -> Vec<T>,
    delta: T,
) -> Result<(EuclideanApprox<T>, MatchReport<T>)> {
    check_delta(delta)?;
    let m = approx.slope.len();
    let tight = tightened_delta(delta, m);
    let mut pre =
        ApproxCheck { worst_ratio: 0.0, witness_tree: None, witness_interval: None, witness_s: None, samples: 0 };
    check_tree_approx(&psi, 0, tree, approx, tight, &mut pre);
    if !pre.passes(1e-9) {
        return Err(IlgError::Precondition(format!(
            "approximation at the tightened parameter fails on {} at s = {} (ratio {})",
            pre.witness_interval.map(|q| q.to_string()).unwrap_or_default(),
            pre.witness_s.unwrap_or(f64::NAN),
            pre.worst_ratio
        )));
    }
    let gap = |s: T| -> Vec<T> {
        let base = approx.psi.eval(s);
        psi(s).iter().zip(&approx.slope).zip(&base).map(|((&p, &a), &b)| p - a * s - b).collect()
    };
    let minimal = tree.minimal();
    let (top_lo, top_hi) = (tree.top.lo::<T>(), tree.top.hi::<T>());
    let mut corrections = Vec::with_capacity(minimal.len());
    let mut offsets = Vec::with_capacity(minimal.len());
    for s in &minimal {
        let (a, b) = (s.lo::<T>(), s.hi::<T>());
        let (ga, gb) = (gap(a), gap(b));
        let c: Vec<T> = ga.iter().zip(&gb).map(|(&x, &y)| (y - x) / (b - a)).collect();
        corrections.push((*s, c));
        offsets.push(ga);
    }
    let mut knots: Vec<T> = approx.psi.knots().iter().copied().filter(|&k| k >= top_lo && k <= top_hi).collect();
    knots.extend(minimal.iter().flat_map(|s| [s.lo::<T>(), s.hi::<T>()]));
    knots.push(top_lo);
    knots.push(top_hi);
    knots.sort_by(|a, b| a.partial_cmp(b).expect("finite knots"));
    knots.dedup();
    let values: Vec<Vec<T>> = knots
        .iter()
        .map(|&x| {
            let base = approx.psi.eval(x);
            let idx = minimal.partition_point(|s| s.hi::<T>() <= x);
            let idx = if idx == minimal.len() || x < minimal[idx].lo::<T>() {
                // on the right end of a minimal interval or outside all of them
                minimal.iter().position(|s| s.hi::<T>() == x)
            } else {
                Some(idx)
            };
            match idx {
                Some(i) => {
                    let a = minimal[i].lo::<T>();
                    base.iter()
                        .zip(&offsets[i])
                        .zip(&corrections[i].1)
                        .map(|((&b, &g), &c)| b + g + c * (x - a))
                        .collect()
                }
                None => base,
            }
        })
        .collect();
    let psi_new = PiecewiseLinear::new(knots, values)?;
    let matched = EuclideanApprox { slope: approx.slope.clone(), psi: psi_new, clamped: approx.clamped };
    let mut endpoint_gap = T::zero();
    for s in &minimal {
        for e in [s.lo::<T>(), s.hi::<T>()] {
            let target: Vec<T> = psi(e).iter().zip(&matched.slope).map(|(&p, &a)| p - a * e).collect();
            endpoint_gap = endpoint_gap.max(dist(&target, &matched.psi.eval(e)));
        }
    }
    let max_correction = corrections.iter().map(|(_, c)| euclid(c)).fold(T::zero(), T::max);
    let lipschitz = matched.psi.lipschitz();
    Ok((matched, MatchReport { corrections, max_correction, endpoint_gap, lipschitz }))
}

/// Runs [`euclidean_corona`] at the tightened parameter and matches every tree at `delta`.
pub fn matched_corona<T: Scalar>(
    psi: impl Fn(T) -> Vec<T> + Copy,
    root: DyadicInterval,
    depth: u32,
    delta: T,
) -> Result<(Coronization, Vec<EuclideanApprox<T>>, Vec<MatchReport<T>>)> {
    check_delta(delta)?;
    let m = psi(root.mid()).len();
    let (corona, approxes) = euclidean_corona(psi, root, depth, tightened_delta(delta, m))?;
    let mut matched = Vec::with_capacity(approxes.len());
    let mut reports = Vec::with_capacity(approxes.len());
    for (t, a) in corona.trees.iter().zip(&approxes) {
        let (ma, r) = boundary_match(t, a, psi, delta)?;
        matched.push(ma);
        reports.push(r);
    }
    Ok((corona, matched, reports))
}
