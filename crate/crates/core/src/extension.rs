//! Extension of tame maps and intrinsic Lipschitz maps from a finite set of `V` to all of `V`.
//!
//! For `k = n` the last component is Whitney-extended as a C^{1,1} function and the
//! components `n+1..2n` are its gradient. For `k < n` the sample is lifted to the graph
//! of `(phi_{k+1}, ..., phi_n)` in `R^n`, extended there, and pulled back along McShane
//! extensions of `phi_{k+1}, ..., phi_n`.
//!
//! Constants recorded for an extension follow closed formulas in the input constants and
//! the frozen [`c_impl`]; every extension is also audited on a uniform grid.

use serde::{Deserialize, Serialize};

use crate::error::{IlgError, Result};
use crate::grid::GridFunction;
use crate::heisenberg::{intrinsic_lip_constant, SampledMap, SubgroupSplit};
use crate::scalar::{euclid, lit, sup_dist, Scalar};
use crate::tame::{check_tame, estimate_tame_constants, ilg_to_tame, TameConstants};
use crate::whitney::{build_extension, c_impl, inflated_box, mcshane_extend, JetData, McShane, WhitneyExtension};

/// Uniform audit grid over the hull of `E` scaled by `factor` about its center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditGrid {
    pub points_per_axis: usize,
    pub factor: f64,
}

impl AuditGrid {
    /// 200 points for `k = 1`, 24 per axis for `k = 2`, 10 per axis for `k = 3`; factor 2.
    pub fn default_for(k: usize) -> Self {
        let points_per_axis = match k {
            1 => 200,
            2 => 24,
            _ => 10,
        };
        Self { points_per_axis, factor: 2.0 }
    }

    /// Origin, spacing and shape of the grid for the domain `E`.
    pub fn layout<T: Scalar>(&self, domain: &[Vec<T>]) -> Result<(Vec<T>, T, Vec<usize>)> {
        if self.points_per_axis < 3 || !(self.factor > 0.0) {
            return Err(IlgError::InvalidParameter("audit grid needs >= 3 points per axis and factor > 0".into()));
        }
        if domain.is_empty() {
            return Err(IlgError::TooFewPoints { needed: 1, got: 0 });
        }
        let (lo, hi) = inflated_box(domain, self.factor);
        let spacing = (hi[0] - lo[0]) / (self.points_per_axis - 1) as f64;
        Ok((lo.iter().map(|&v| lit(v)).collect(), lit(spacing), vec![self.points_per_axis; lo.len()]))
    }
}

#[derive(Debug, Clone)]
enum Parts<T> {
    Full(WhitneyExtension<T>),
    Embedded { lipschitz: Vec<McShane<T>>, outer: WhitneyExtension<T> },
}

/// A tame map defined on all of `R^k`, with the constants of its construction.
#[derive(Debug, Clone)]
pub struct ExtendedTameMap<T> {
    split: SubgroupSplit,
    parts: Parts<T>,
    input: TameConstants<T>,
    formula: TameConstants<T>,
    measured: TameConstants<T>,
    restriction_max_error: T,
    audit: AuditGrid,
}

/// Serializable summary of an extension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtensionReport {
    pub input_constants: TameConstants<f64>,
    pub formula_constants: TameConstants<f64>,
    pub measured_constants: TameConstants<f64>,
    pub restriction_max_error: f64,
}

impl<T: Scalar> ExtendedTameMap<T> {
    pub fn split(&self) -> SubgroupSplit {
        self.split
    }

    /// Constants the input was verified against.
    pub fn input_constants(&self) -> &TameConstants<T> {
        &self.input
    }

    /// Constants given by the extension formulas with `c_impl`.
    pub fn formula_constants(&self) -> &TameConstants<T> {
        &self.formula
    }

    /// Minimal tame constants of the extension sampled on the audit grid.
    pub fn measured_constants(&self) -> &TameConstants<T> {
        &self.measured
    }

    pub fn restriction_max_error(&self) -> T {
        self.restriction_max_error
    }

    pub fn audit(&self) -> AuditGrid {
        self.audit
    }

    /// The Whitney extension of the last component (of the embedded map when `k < n`).
    pub fn whitney(&self) -> &WhitneyExtension<T> {
        match &self.parts {
            Parts::Full(w) => w,
            Parts::Embedded { outer, .. } => outer,
        }
    }

    /// Value `(phi_{k+1}, ..., phi_{2n+1})(x)` in the tame convention.
    pub fn evaluate(&self, x: &[T]) -> Vec<T> {
        match &self.parts {
            Parts::Full(w) => {
                let (f, mut g) = w.evaluate(x);
                g.push(f);
                g
            }
            Parts::Embedded { lipschitz, outer } => {
                let low: Vec<T> = lipschitz.iter().map(|m| m.evaluate(x)).collect();
                let mut q = x.to_vec();
                q.extend_from_slice(&low);
                let (f, g) = outer.evaluate(&q);
                let (n, k) = (self.split.n(), self.split.k());
                let mut corr = T::zero();
                for i in k..n {
                    corr = corr + low[i - k] * g[i];
                }
                let mut out = low;
                out.extend_from_slice(&g);
                out.push(f - corr * lit(0.5));
                out
            }
        }
    }

    /// The extension sampled on `grid` over the hull of `domain`.
    pub fn sample_grid(&self, grid: &AuditGrid, domain: &[Vec<T>]) -> Result<GridFunction<T>> {
        let (origin, spacing, shape) = grid.layout(domain)?;
        GridFunction::from_fn(self.split, origin, spacing, shape, |x| self.evaluate(x))
    }

    /// Sup over the nodes of `grid` of `|phi_{n+a} - D_a phi_{2n+1}|` with central differences
    /// of step `h` taken on the extension itself. Only meaningful for `k = n`.
    pub fn gradient_identity_residual(&self, grid: &AuditGrid, domain: &[Vec<T>], h: T) -> Result<T> {
        let (n, k) = (self.split.n(), self.split.k());
        if k != n {
            return Err(IlgError::Unsupported("gradient identity needs k = n".into()));
        }
        let g = self.sample_grid(grid, domain)?;
        let mut worst = T::zero();
        for flat in 0..g.len() {
            let x = g.node(flat);
            let v = &g.values()[flat];
            for a in 0..n {
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp[a] = xp[a] + h;
                xm[a] = xm[a] - h;
                let fd = (self.evaluate(&xp)[n] - self.evaluate(&xm)[n]) / (h + h);
                worst = worst.max((fd - v[a]).abs());
            }
        }
        Ok(worst)
    }
}

impl ExtendedTameMap<f64> {
    pub fn report(&self) -> ExtensionReport {
        ExtensionReport {
            input_constants: self.input.clone(),
            formula_constants: self.formula.clone(),
            measured_constants: self.measured.clone(),
            restriction_max_error: self.restriction_max_error,
        }
    }
}

fn require_tame<T: Scalar>(map: &SampledMap<T>, constants: &TameConstants<T>) -> Result<()> {
    let split = map.split();
    let m = 2 * split.n() - split.k();
    if constants.per_component.len() != m {
        return Err(IlgError::DimensionMismatch { expected: m, found: constants.per_component.len() });
    }
    if map.is_empty() {
        return Err(IlgError::TooFewPoints { needed: 1, got: 0 });
    }
    if map.len() >= 2 {
        if let Some(v) = check_tame(map, constants)?.violation {
            return Err(IlgError::NotTame(format!("{} exceeds its constant on pair {:?}", v.family, v.pair)));
        }
    }
    Ok(())
}

fn jet_of<T: Scalar>(domain: &[Vec<T>], values: &[Vec<T>], n: usize) -> Result<JetData<T>> {
    JetData::new(
        domain.to_vec(),
        values.iter().map(|v| v[n]).collect(),
        values.iter().map(|v| v[..n].to_vec()).collect(),
    )
}

/// `lambda = max(|(L_{n+1}, ..., L_{2n})|, L_{2n+1})` from the `R^n -> R^{n+1}` part of the constants.
fn lambda_of<T: Scalar>(upper: &[T], quadratic: T) -> T {
    euclid(upper).max(quadratic)
}

fn finish<T: Scalar>(
    map: &SampledMap<T>,
    parts: Parts<T>,
    input: TameConstants<T>,
    formula: TameConstants<T>,
    audit: &AuditGrid,
) -> Result<ExtendedTameMap<T>> {
    let mut ext = ExtendedTameMap {
        split: map.split(),
        parts,
        input,
        formula,
        measured: TameConstants::zeros(&map.split()),
        restriction_max_error: T::zero(),
        audit: *audit,
    };
    let mut err = T::zero();
    for (v, val) in map.domain().iter().zip(map.values()) {
        err = err.max(sup_dist(&ext.evaluate(v), val));
    }
    ext.restriction_max_error = err;
    let sample = ext.sample_grid(audit, map.domain())?.to_sampled()?;
    ext.measured = estimate_tame_constants(&sample)?;
    Ok(ext)
}

/// Extension of a tame map with `k = n`: Whitney extension of the jet
/// `(phi_{2n+1}, (phi_{n+1}, ..., phi_{2n}))`, with constants `L'_i = C lambda` and
/// `L'_{2n+1} = 2 C lambda`, `C = c_impl(n)`.
pub fn extend_tame_kn<T: Scalar>(
    map: &SampledMap<T>,
    constants: &TameConstants<T>,
    audit: &AuditGrid,
) -> Result<ExtendedTameMap<T>> {
    let split = map.split();
    let n = split.n();
    if split.k() != n {
        return Err(IlgError::Unsupported("extend_tame_kn needs k = n".into()));
    }
    require_tame(map, constants)?;
    let whitney = build_extension(&jet_of(map.domain(), map.values(), n)?)?;
    let c: T = lit(c_impl(n));
    let lambda = lambda_of(&constants.per_component, constants.quadratic);
    let formula = TameConstants { per_component: vec![c * lambda; n], quadratic: lit::<T>(2.0) * c * lambda };
    finish(map, Parts::Full(whitney), constants.clone(), formula, audit)
}

/// A `k < n` sample lifted to the graph of `(phi_{k+1}, ..., phi_n)` in `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedGraphMap<T> {
    base: SampledMap<T>,
    graph_points: Vec<Vec<T>>,
    f_values: Vec<Vec<T>>,
}

impl<T: Scalar> EmbeddedGraphMap<T> {
    pub fn base(&self) -> &SampledMap<T> {
        &self.base
    }

    /// `(x, phi_{k+1}(x), ..., phi_n(x))` for `x` in `E`.
    pub fn graph_points(&self) -> &[Vec<T>] {
        &self.graph_points
    }

    /// `(phi_{n+1}, ..., phi_{2n}, phi_{2n+1} + 1/2 sum_{i>k} eta_i phi_{n+i})` at each graph point.
    pub fn f_values(&self) -> &[Vec<T>] {
        &self.f_values
    }

    /// The lifted sample as a map with `k = n`.
    pub fn as_full_map(&self) -> Result<SampledMap<T>> {
        let n = self.base.split().n();
        SampledMap::new(SubgroupSplit::new(n, n)?, self.graph_points.clone(), self.f_values.clone())
    }

    /// `L''_i = L_i` for `n < i <= 2n` and `L''_{2n+1} = L_{2n+1} + sum_{i>k} L_{n+i} min(1, L_i)`.
    pub fn constants(&self, input: &TameConstants<T>) -> TameConstants<T> {
        let split = self.base.split();
        let (n, k) = (split.n(), split.k());
        let upper: Vec<T> = (n + 1..=2 * n).map(|i| input.component(&split, i)).collect();
        let mut quadratic = input.quadratic;
        for i in k + 1..=n {
            quadratic = quadratic + input.component(&split, n + i) * input.component(&split, i).min(T::one());
        }
        TameConstants { per_component: upper, quadratic }
    }
}

/// Lifts a `k < n` sample to the graph of its low components.
pub fn embed_k_lt_n<T: Scalar>(map: &SampledMap<T>) -> Result<EmbeddedGraphMap<T>> {
    let split = map.split();
    let (n, k) = (split.n(), split.k());
    if k >= n {
        return Err(IlgError::Unsupported("embedding needs k < n".into()));
    }
    let mut graph_points = Vec::with_capacity(map.len());
    let mut f_values = Vec::with_capacity(map.len());
    for (x, val) in map.domain().iter().zip(map.values()) {
        let low = &val[..n - k];
        let mut eta = x.clone();
        eta.extend_from_slice(low);
        let mut f = val[n - k..2 * n - k].to_vec();
        let mut last = val[2 * n - k];
        for i in k..n {
            last = last + lit::<T>(0.5) * eta[i] * val[n + i - k];
        }
        f.push(last);
        graph_points.push(eta);
        f_values.push(f);
    }
    Ok(EmbeddedGraphMap { base: map.clone(), graph_points, f_values })
}

/// `c_n = C(n) (2 + sqrt(n))` used in the `k < n` constant formulas.
pub fn c_n(n: usize) -> f64 {
    c_impl(n) * (2.0 + (n as f64).sqrt())
}

/// Extension of a tame map with `k < n`. Recorded constants: `L_i` for `k < i <= n`,
/// `c_n S^{1/2} lambda''` for `n < i <= 2n` and `c_n S lambda''` for the last component,
/// where `S = 1 + sum_{k<j<=n} L_j^2` and `lambda''` is `lambda` of the embedded constants.
pub fn extend_tame_kltn<T: Scalar>(
    map: &SampledMap<T>,
    constants: &TameConstants<T>,
    audit: &AuditGrid,
) -> Result<ExtendedTameMap<T>> {
    let split = map.split();
    let (n, k) = (split.n(), split.k());
    if k >= n {
        return Err(IlgError::Unsupported("extend_tame_kltn needs k < n".into()));
    }
    require_tame(map, constants)?;
    let emb = embed_k_lt_n(map)?;
    let inner = emb.constants(constants);
    let outer = build_extension(&jet_of(&emb.graph_points, &emb.f_values, n)?)?;
    let mut lipschitz = Vec::with_capacity(n - k);
    for i in k + 1..=n {
        let vals: Vec<T> = map.values().iter().map(|v| v[split.slot(i)]).collect();
        lipschitz.push(mcshane_extend(map.domain(), &vals, constants.component(&split, i))?);
    }
    let s = (k + 1..=n).fold(T::one(), |acc, j| {
        let l = constants.component(&split, j);
        acc + l * l
    });
    let lambda = lambda_of(&inner.per_component, inner.quadratic);
    let cn: T = lit(c_n(n));
    let mut per_component: Vec<T> = (k + 1..=n).map(|i| constants.component(&split, i)).collect();
    per_component.extend(std::iter::repeat(cn * s.sqrt() * lambda).take(n));
    let formula = TameConstants { per_component, quadratic: cn * s * lambda };
    finish(map, Parts::Embedded { lipschitz, outer }, constants.clone(), formula, audit)
}

/// Dispatches to [`extend_tame_kn`] or [`extend_tame_kltn`].
pub fn extend_tame<T: Scalar>(
    map: &SampledMap<T>,
    constants: &TameConstants<T>,
    audit: &AuditGrid,
) -> Result<ExtendedTameMap<T>> {
    if map.split().k() == map.split().n() {
        extend_tame_kn(map, constants, audit)
    } else {
        extend_tame_kltn(map, constants, audit)
    }
}

/// Extension of an intrinsic Lipschitz sample, with its constants.
#[derive(Debug, Clone)]
pub struct IlgExtension<T> {
    pub tame: ExtendedTameMap<T>,
    /// Intrinsic constant of the input sample.
    pub l_input: T,
    /// `max(|(L'_{k+1}, ..., L'_{2n})|, sqrt(L'_{2n+1}))` from the formula constants.
    pub l_formula: T,
    /// Intrinsic constant of the extension sampled on the audit grid.
    pub l_measured: T,
    /// For `k = n = 1`: `2 c_impl(1) max(L, L^2)`.
    pub l_bound: Option<T>,
    pub restriction_max_error: T,
}

/// Serializable summary of an [`IlgExtension`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IlgExtensionReport {
    pub l_input: f64,
    pub l_formula: f64,
    pub l_measured: f64,
    pub l_bound: Option<f64>,
    pub restriction_max_error: f64,
    pub tame: ExtensionReport,
    pub audit: AuditGrid,
}

impl<T: Scalar> IlgExtension<T> {
    /// Value of the intrinsic extension at `x` (last component in the intrinsic sign).
    pub fn evaluate(&self, x: &[T]) -> Vec<T> {
        let mut v = self.tame.evaluate(x);
        let l = v.len() - 1;
        v[l] = -v[l];
        v
    }

    /// Whether the audited constant is within the formula constant (slack `1e-9`).
    pub fn within_formula(&self) -> bool {
        self.l_measured <= self.l_formula * lit(1.0 + crate::tame::CONSTANT_SLACK)
    }
}

impl IlgExtension<f64> {
    pub fn report(&self) -> IlgExtensionReport {
        IlgExtensionReport {
            l_input: self.l_input,
            l_formula: self.l_formula,
            l_measured: self.l_measured,
            l_bound: self.l_bound,
            restriction_max_error: self.restriction_max_error,
            tame: self.tame.report(),
            audit: self.tame.audit(),
        }
    }
}

/// Pipeline constant for `k = n = 1`: `L' <= pipeline_constant_11() * max(L, L^2)`.
pub fn pipeline_constant_11() -> f64 {
    2.0 * c_impl(1)
}

/// Intrinsic Lipschitz extension: convert to a tame map, extend, convert back and audit.
pub fn extend_ilg<T: Scalar>(map: &SampledMap<T>, audit: &AuditGrid) -> Result<IlgExtension<T>> {
    let (tame_map, constants) = ilg_to_tame(map)?;
    let tame = extend_tame(&tame_map, &constants, audit)?;
    let l_input = if map.len() < 2 { T::zero() } else { intrinsic_lip_constant(map)? };
    let l_formula = tame.formula.intrinsic_constant();
    let grid = tame.sample_grid(audit, map.domain())?.negate_last().to_sampled()?;
    let l_measured = intrinsic_lip_constant(&grid)?;
    let split = map.split();
    let l_bound = (split.n() == 1).then(|| lit::<T>(pipeline_constant_11()) * l_input.max(l_input * l_input));
    let restriction_max_error = tame.restriction_max_error;
    Ok(IlgExtension { tame, l_input, l_formula, l_measured, l_bound, restriction_max_error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use crate::tame::{check_tame_with_slack, tame_to_ilg};

    fn split(n: usize, k: usize) -> SubgroupSplit {
        SubgroupSplit::new(n, k).unwrap()
    }

    fn map(s: SubgroupSplit, dom: Vec<Vec<f64>>, vals: Vec<Vec<f64>>) -> SampledMap<f64> {
        SampledMap::new(s, dom, vals).unwrap()
    }

    /// Tame sample of `(cos, sin)` style data on `R` for `n = 1`.
    fn sine_sample(m: usize, seed: u64) -> SampledMap<f64> {
        let mut rng = SeededRng::new(seed);
        let dom: Vec<Vec<f64>> = (0..m).map(|i| vec![i as f64 / m as f64 + rng.range(0.0, 0.5 / m as f64)]).collect();
        let vals = dom.iter().map(|x| vec![x[0].cos(), x[0].sin()]).collect();
        map(split(1, 1), dom, vals)
    }

    #[test]
    fn zero_map_extends_to_zero() {
        let m = map(split(1, 1), vec![vec![0.0], vec![1.0]], vec![vec![0.0; 2]; 2]);
        let c = TameConstants::zeros(&m.split());
        let ext = extend_tame_kn(&m, &c, &AuditGrid::default_for(1)).unwrap();
        assert_eq!(ext.evaluate(&[0.37]), vec![0.0, 0.0]);
        assert_eq!(ext.formula_constants(), &c);
        assert_eq!(ext.measured_constants(), &c);
    }

    #[test]
    fn single_point_is_affine() {
        let m = map(split(1, 1), vec![vec![0.5]], vec![vec![2.0, 1.0]]);
        let ext = extend_tame_kn(&m, &TameConstants::zeros(&m.split()), &AuditGrid::default_for(1)).unwrap();
        assert_eq!(ext.evaluate(&[1.5]), vec![2.0, 3.0]);
        assert_eq!(ext.measured_constants().quadratic, 0.0);
    }

    #[test]
    fn half_square_jet_gradient_identity() {
        let m = map(split(1, 1), vec![vec![0.0], vec![1.0]], vec![vec![0.0, 0.0], vec![1.0, 0.5]]);
        let c = estimate_tame_constants(&m).unwrap();
        assert_eq!(c, TameConstants { per_component: vec![1.0], quadratic: 1.0 });
        let audit = AuditGrid::default_for(1);
        let ext = extend_tame_kn(&m, &c, &audit).unwrap();
        assert_eq!(ext.restriction_max_error(), 0.0);
        assert!(ext.gradient_identity_residual(&audit, m.domain(), 1e-6).unwrap() <= 1e-7);
        let f = ext.formula_constants();
        assert_eq!(f.per_component, vec![c_impl(1)]);
        assert_eq!(f.quadratic, 2.0 * c_impl(1));
        let r = check_tame(&ext.sample_grid(&audit, m.domain()).unwrap().to_sampled().unwrap(), f).unwrap();
        assert!(r.pass);
    }

    #[test]
    fn kn_rejects_non_tame_input() {
        let m = sine_sample(6, 1);
        let c = TameConstants { per_component: vec![0.1], quadratic: 0.1 };
        assert!(matches!(extend_tame_kn(&m, &c, &AuditGrid::default_for(1)), Err(IlgError::NotTame(_))));
        assert!(extend_tame_kltn(&m, &c, &AuditGrid::default_for(1)).is_err());
    }

    #[test]
    fn embedding_examples() {
        let s = split(2, 1);
        let zero_low = map(s, vec![vec![0.0], vec![1.0]], vec![vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 4.0, 5.0, 6.0]]);
        let e = embed_k_lt_n(&zero_low).unwrap();
        assert_eq!(e.graph_points(), &[vec![0.0, 0.0], vec![1.0, 0.0]]);
        assert_eq!(e.f_values(), &[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]);

        let c = 0.5;
        let m = map(s, vec![vec![0.0], vec![1.0]], vec![vec![c, 1.0, 2.0, 3.0], vec![c, 4.0, 5.0, 6.0]]);
        let e = embed_k_lt_n(&m).unwrap();
        assert_eq!(e.f_values()[0][2], 3.0 + 0.5 * c * 2.0);
        assert_eq!(e.f_values()[1][2], 6.0 + 0.5 * c * 5.0);

        let z = map(s, vec![vec![0.0]], vec![vec![0.0; 4]]);
        assert_eq!(embed_k_lt_n(&z).unwrap().f_values(), &[vec![0.0; 3]]);
        assert!(embed_k_lt_n(&sine_sample(3, 0)).is_err());
    }

    fn random_tame(s: SubgroupSplit, m: usize, seed: u64) -> (SampledMap<f64>, TameConstants<f64>) {
        let mut rng = SeededRng::new(seed);
        let dom: Vec<Vec<f64>> = (0..m).map(|_| (0..s.k()).map(|_| rng.uniform()).collect()).collect();
        let vals = (0..m).map(|_| (0..s.value_len()).map(|_| rng.range(-0.5, 0.5)).collect()).collect();
        let m = map(s, dom, vals);
        let c = estimate_tame_constants(&m).unwrap();
        (m, c)
    }

    #[test]
    fn embedded_constants_hold_on_the_lift() {
        for seed in 0..5 {
            let (m, c) = random_tame(split(3, 1), 6, seed);
            let e = embed_k_lt_n(&m).unwrap();
            let r = check_tame(&e.as_full_map().unwrap(), &e.constants(&c)).unwrap();
            assert!(r.pass, "seed {seed}: {:?}", r.violation);
        }
    }

    #[test]
    fn kltn_random_sample_passes_audit() {
        let (m, c) = random_tame(split(2, 1), 5, 11);
        let audit = AuditGrid::default_for(1);
        let ext = extend_tame_kltn(&m, &c, &audit).unwrap();
        assert!(ext.restriction_max_error() <= 1e-10);
        let grid = ext.sample_grid(&audit, m.domain()).unwrap().to_sampled().unwrap();
        assert_eq!(grid.len(), 200);
        let r = check_tame(&grid, ext.formula_constants()).unwrap();
        assert!(r.pass, "{:?}", r.violation);
        assert_eq!(ext.formula_constants().per_component[0], c.per_component[0]);
    }

    #[test]
    fn vanishing_low_components_reduce_to_kn() {
        let (m, c) = random_tame(split(2, 1), 5, 4);
        let vals: Vec<Vec<f64>> = m.values().iter().map(|v| {
            let mut w = v.clone();
            w[0] = 0.0;
            w
        }).collect();
        let m = map(m.split(), m.domain().to_vec(), vals);
        let c = TameConstants::new(vec![0.0, c.per_component[1], c.per_component[2]], 10.0 * c.quadratic).unwrap();
        let audit = AuditGrid::default_for(1);
        let low = extend_tame_kltn(&m, &c, &audit).unwrap();
        let e = embed_k_lt_n(&m).unwrap();
        let full = e.as_full_map().unwrap();
        let direct = extend_tame_kn(&full, &e.constants(&c), &AuditGrid::default_for(2)).unwrap();
        let g = low.sample_grid(&audit, m.domain()).unwrap();
        for flat in 0..g.len() {
            let x = g.node(flat);
            let d = direct.evaluate(&[x[0], 0.0]);
            let v = &g.values()[flat];
            assert_eq!(v[0], 0.0);
            for a in 0..3 {
                assert!((v[a + 1] - d[a]).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn ilg_zero_map() {
        let m = map(split(2, 1), vec![vec![0.0], vec![0.5], vec![1.0]], vec![vec![0.0; 4]; 3]);
        let e = extend_ilg(&m, &AuditGrid::default_for(1)).unwrap();
        assert_eq!((e.l_input, e.l_formula, e.l_measured), (0.0, 0.0, 0.0));
    }

    #[test]
    fn ilg_k1_n1_within_bound() {
        let tame = sine_sample(8, 3);
        let c = estimate_tame_constants(&tame).unwrap();
        let (ilg, _) = tame_to_ilg(&tame, &c).unwrap();
        let e = extend_ilg(&ilg, &AuditGrid::default_for(1)).unwrap();
        assert!(e.restriction_max_error <= 1e-10);
        assert!(e.within_formula(), "{} > {}", e.l_measured, e.l_formula);
        let bound = e.l_bound.unwrap();
        assert!(e.l_formula <= bound * (1.0 + 1e-12) && e.l_measured <= bound);
        for (x, v) in ilg.domain().iter().zip(ilg.values()) {
            let w = e.evaluate(x);
            assert!(sup_dist(&w, v) <= 1e-10);
        }
    }

    #[test]
    fn k2_extension_audits() {
        let (m, c) = random_tame(split(2, 2), 6, 9);
        let audit = AuditGrid::default_for(2);
        let ext = extend_tame_kn(&m, &c, &audit).unwrap();
        assert_eq!(ext.restriction_max_error(), 0.0);
        let grid = ext.sample_grid(&audit, m.domain()).unwrap().to_sampled().unwrap();
        assert!(check_tame_with_slack(&grid, ext.formula_constants(), 1e-9).unwrap().pass);
        assert!(ext.gradient_identity_residual(&audit, m.domain(), 1e-6).unwrap() <= 1e-6);
        let json = serde_json::to_string(&ext.report()).unwrap();
        for key in ["input_constants", "formula_constants", "measured_constants", "restriction_max_error"] {
            assert!(json.contains(key));
        }
    }
}
