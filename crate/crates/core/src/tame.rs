//! Tame maps: residuals, verification, minimal constants and the conversions to and
//! from intrinsic Lipschitz maps.

use serde::{Deserialize, Serialize};

use crate::error::{IlgError, Result};
use crate::heisenberg::{intrinsic_lip_constant, SampledMap, SubgroupSplit};
use crate::scalar::{dist, euclid, lit, Scalar};

/// Default multiplicative slack on constant comparisons.
pub const CONSTANT_SLACK: f64 = 1e-9;

/// Constants `(L_{k+1}, ..., L_{2n})` and `L_{2n+1}` of a tame map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TameConstants<T> {
    pub per_component: Vec<T>,
    pub quadratic: T,
}

impl<T: Scalar> TameConstants<T> {
    pub fn new(per_component: Vec<T>, quadratic: T) -> Result<Self> {
        if per_component.iter().chain(std::iter::once(&quadratic)).any(|c| !(*c >= T::zero())) {
            return Err(IlgError::InvalidParameter("tame constants must be >= 0".into()));
        }
        Ok(Self { per_component, quadratic })
    }

    pub fn zeros(split: &SubgroupSplit) -> Self {
        Self { per_component: vec![T::zero(); 2 * split.n() - split.k()], quadratic: T::zero() }
    }

    /// `L_i` for the component index `k < i <= 2n`.
    pub fn component(&self, split: &SubgroupSplit, i: usize) -> T {
        self.per_component[split.slot(i)]
    }

    fn check_len(&self, split: &SubgroupSplit) -> Result<()> {
        let m = 2 * split.n() - split.k();
        if self.per_component.len() != m {
            return Err(IlgError::DimensionMismatch { expected: m, found: self.per_component.len() });
        }
        Ok(())
    }

    /// `max(|(L_{k+1}, ..., L_{2n})|, sqrt(L_{2n+1}))`: the intrinsic constant of the tame map.
    pub fn intrinsic_constant(&self) -> T {
        euclid(&self.per_component).max(self.quadratic.sqrt())
    }
}

/// The two absolute values of the quadratic tameness condition for the pair `(x, y)`.
pub fn tame_residuals<T: Scalar>(
    x: &[T],
    y: &[T],
    phi_x: &[T],
    phi_y: &[T],
    split: &SubgroupSplit,
) -> Result<(T, T)> {
    let k = split.k();
    for (p, f) in [(x, phi_x), (y, phi_y)] {
        if p.len() != k {
            return Err(IlgError::DimensionMismatch { expected: k, found: p.len() });
        }
        if f.len() != split.value_len() {
            return Err(IlgError::DimensionMismatch { expected: split.value_len(), found: f.len() });
        }
    }
    if x == y {
        return Err(IlgError::CoincidentPoints);
    }
    Ok(residuals_unchecked(x, y, phi_x, phi_y, split))
}

#[inline]
pub(crate) fn residuals_unchecked<T: Scalar>(
    x: &[T],
    y: &[T],
    fx: &[T],
    fy: &[T],
    split: &SubgroupSplit,
) -> (T, T) {
    let (n, k) = (split.n(), split.k());
    let last = 2 * n - k;
    let mut base = fy[last] - fx[last];
    if k < n {
        let mut b = T::zero();
        for i in k..n {
            b = b + fy[i - k] * fx[n + i - k] - fx[i - k] * fy[n + i - k];
        }
        base = base - b * lit(0.5);
    }
    let (mut py, mut px) = (T::zero(), T::zero());
    for i in 0..k {
        let d = y[i] - x[i];
        py = py + fy[n + i - k] * d;
        px = px + fx[n + i - k] * d;
    }
    ((base - py).abs(), (base - px).abs())
}

/// Which condition of the tameness definition a measurement belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TameFamily {
    /// Euclidean Lipschitz bound on `phi_i` (component index `i`).
    Component(usize),
    /// The two-sided quadratic bound on the last component.
    Quadratic,
}

impl std::fmt::Display for TameFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TameFamily::Component(i) => write!(f, "lipschitz(phi_{i})"),
            TameFamily::Quadratic => write!(f, "quadratic"),
        }
    }
}

/// Supremum of one family over all pairs, with the first maximizing pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilyMax<T> {
    pub family: TameFamily,
    pub value: T,
    pub pair: Option<(usize, usize)>,
}

/// Pairwise suprema of every family (components first, then quadratic).
pub fn tame_family_maxima<T: Scalar>(map: &SampledMap<T>) -> Result<Vec<FamilyMax<T>>> {
    if map.len() < 2 {
        return Err(IlgError::TooFewPoints { needed: 2, got: map.len() });
    }
    let split = map.split();
    let (n, k) = (split.n(), split.k());
    let m = 2 * n - k;
    let mut out: Vec<FamilyMax<T>> = (0..m)
        .map(|c| FamilyMax { family: TameFamily::Component(c + k + 1), value: T::zero(), pair: None })
        .chain(std::iter::once(FamilyMax {
            family: TameFamily::Quadratic,
            value: T::zero(),
            pair: None,
        }))
        .collect();
    let (dom, val) = (map.domain(), map.values());
    for i in 0..map.len() {
        for j in i + 1..map.len() {
            let d = dist(&dom[i], &dom[j]);
            for c in 0..m {
                let r = (val[j][c] - val[i][c]).abs() / d;
                if r > out[c].value || out[c].pair.is_none() {
                    out[c].value = r;
                    out[c].pair = Some((i, j));
                }
            }
            let (rf, rb) = residuals_unchecked(&dom[i], &dom[j], &val[i], &val[j], &split);
            let q = (rf + rb) / (d * d);
            if q > out[m].value || out[m].pair.is_none() {
                out[m].value = q;
                out[m].pair = Some((i, j));
            }
        }
    }
    Ok(out)
}

/// Minimal tame constants of the sample (pairwise suprema).
pub fn estimate_tame_constants<T: Scalar>(map: &SampledMap<T>) -> Result<TameConstants<T>> {
    let fam = tame_family_maxima(map)?;
    let (q, comps) = fam.split_last().expect("quadratic family present");
    Ok(TameConstants { per_component: comps.iter().map(|f| f.value).collect(), quadratic: q.value })
}

/// Outcome of [`check_tame`].
#[derive(Debug, Clone, PartialEq)]
pub struct TameReport<T> {
    pub pass: bool,
    /// Largest measured/allowed ratio over all families.
    pub worst_ratio: T,
    pub worst_family: TameFamily,
    pub worst_pair: Option<(usize, usize)>,
    /// First violated family, if any.
    pub violation: Option<FamilyMax<T>>,
    pub measured: TameConstants<T>,
}

fn ratio<T: Scalar>(measured: T, allowed: T) -> T {
    if allowed > T::zero() {
        measured / allowed
    } else if measured > T::zero() {
        T::infinity()
    } else {
        T::zero()
    }
}

/// Checks the tameness conditions with the default slack `1 + 1e-9`.
pub fn check_tame<T: Scalar>(map: &SampledMap<T>, constants: &TameConstants<T>) -> Result<TameReport<T>> {
    check_tame_with_slack(map, constants, lit(CONSTANT_SLACK))
}

/// Checks the tameness conditions, accepting ratios up to `1 + slack`.
pub fn check_tame_with_slack<T: Scalar>(
    map: &SampledMap<T>,
    constants: &TameConstants<T>,
    slack: T,
) -> Result<TameReport<T>> {
    constants.check_len(&map.split())?;
    let fam = tame_family_maxima(map)?;
    let allowed: Vec<T> =
        constants.per_component.iter().copied().chain(std::iter::once(constants.quadratic)).collect();
    let mut worst = 0;
    let mut worst_ratio = T::zero();
    let mut violation = None;
    for (idx, f) in fam.iter().enumerate() {
        let r = ratio(f.value, allowed[idx]);
        if r > worst_ratio {
            worst_ratio = r;
            worst = idx;
        }
        if f.value > allowed[idx] * (T::one() + slack) && violation.is_none() {
            violation = Some(*f);
        }
    }
    let (q, comps) = fam.split_last().expect("quadratic family present");
    Ok(TameReport {
        pass: violation.is_none(),
        worst_ratio,
        worst_family: fam[worst].family,
        worst_pair: fam[worst].pair,
        violation,
        measured: TameConstants {
            per_component: comps.iter().map(|f| f.value).collect(),
            quadratic: q.value,
        },
    })
}

fn negate_last<T: Scalar>(map: &SampledMap<T>) -> SampledMap<T> {
    let values = map
        .values()
        .iter()
        .map(|v| {
            let mut w = v.clone();
            let last = w.len() - 1;
            w[last] = -w[last];
            w
        })
        .collect();
    map.with_values(values)
}

/// Formula constants for the tame counterpart of an intrinsic `L`-Lipschitz map.
pub fn tame_constants_from_lip<T: Scalar>(split: &SubgroupSplit, l: T) -> TameConstants<T> {
    let m = 2 * split.n() - split.k();
    let quadratic = lit::<T>(2.0) * l * l;
    let mut per_component = vec![l; m];
    if split.k() == 1 {
        per_component[split.slot(split.n() + 1)] = l.min(quadratic);
    }
    TameConstants { per_component, quadratic }
}

/// Negates the last component and attaches the constants `(L, ..., L, 2L^2)`,
/// with `L_{n+1} = min(L, 2L^2)` when `k = 1`.
pub fn ilg_to_tame<T: Scalar>(map: &SampledMap<T>) -> Result<(SampledMap<T>, TameConstants<T>)> {
    if map.is_empty() {
        return Err(IlgError::TooFewPoints { needed: 1, got: 0 });
    }
    let l = if map.len() < 2 { T::zero() } else { intrinsic_lip_constant(map)? };
    Ok((negate_last(map), tame_constants_from_lip(&map.split(), l)))
}

/// Verifies tameness, flips the last component back and returns the intrinsic constant
/// `max(|(L_{k+1}, ..., L_{2n})|, sqrt(L_{2n+1}))`.
pub fn tame_to_ilg<T: Scalar>(
    map: &SampledMap<T>,
    constants: &TameConstants<T>,
) -> Result<(SampledMap<T>, T)> {
    constants.check_len(&map.split())?;
    if map.len() >= 2 {
        let report = check_tame(map, constants)?;
        if let Some(v) = report.violation {
            return Err(IlgError::NotTame(format!(
                "{} exceeds its constant on pair {:?} (measured {})",
                v.family, v.pair, v.value
            )));
        }
    }
    Ok((negate_last(map), constants.intrinsic_constant()))
}

/// Replaces `L_{2n+1}` by `min(L_{2n+1}, 2 |(L_{n+1}, ..., L_{2n})|)` for `k = n` maps on a box.
pub fn self_improve_quadratic<T: Scalar>(
    map: &SampledMap<T>,
    constants: &TameConstants<T>,
) -> Result<TameConstants<T>> {
    let split = map.split();
    if split.k() != split.n() {
        return Err(IlgError::Unsupported("self-improvement needs k = n".into()));
    }
    constants.check_len(&split)?;
    let bound = lit::<T>(2.0) * euclid(&constants.per_component);
    Ok(TameConstants {
        per_component: constants.per_component.clone(),
        quadratic: constants.quadratic.min(bound),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(n: usize, k: usize) -> SubgroupSplit {
        SubgroupSplit::new(n, k).unwrap()
    }

    fn line_map(f: impl Fn(f64) -> Vec<f64>, pts: &[f64]) -> SampledMap<f64> {
        let len = f(0.0).len();
        let n = len / 2;
        SampledMap::new(s(n, 1), pts.iter().map(|&v| vec![v]).collect(), pts.iter().map(|&v| f(v)).collect())
            .unwrap()
    }

    #[test]
    fn residual_examples() {
        let sp = s(1, 1);
        assert_eq!(tame_residuals(&[0.0], &[1.0], &[0.0, 0.0], &[0.0, 0.0], &sp).unwrap(), (0.0, 0.0));
        let (rf, rb) = tame_residuals(&[0.0], &[1.0], &[0.0, 0.0], &[1.0, 0.5], &sp).unwrap();
        assert_eq!((rf, rb), (0.5, 0.5));
        assert_eq!(
            tame_residuals(&[1.0], &[1.0], &[0.0, 0.0], &[0.0, 0.0], &sp).unwrap_err(),
            IlgError::CoincidentPoints
        );
    }

    #[test]
    fn bilinear_term_vanishes_for_constant_components() {
        // k=1, n=2: components (phi_2, phi_3, phi_4, phi_5); phi_2, phi_4 constant.
        let sp = s(2, 1);
        let fx = [2.0, 0.3, 2.0, 1.0];
        let fy = [2.0, -0.4, 2.0, 1.7];
        let (rf, rb) = tame_residuals(&[0.0], &[1.5], &fx, &fy, &sp).unwrap();
        // k=n style: |Δphi_5 - psi(y)(y-x)|, |Δphi_5 - psi(x)(y-x)|
        assert!((rf - (0.7f64 + 0.4 * 1.5).abs()).abs() < 1e-15);
        assert!((rb - (0.7f64 - 0.3 * 1.5).abs()).abs() < 1e-15);
    }

    #[test]
    fn check_tame_examples() {
        let pts = [0.0, 0.5, 1.5, 2.0];
        let zero = line_map(|_| vec![0.0, 0.0], &pts);
        assert!(check_tame(&zero, &TameConstants::new(vec![0.0], 0.0).unwrap()).unwrap().pass);

        let lin = line_map(|v| vec![3.0 * v, 1.5 * v * v], &pts);
        let rep = check_tame(&lin, &TameConstants::new(vec![3.0], 3.0).unwrap()).unwrap();
        assert!(rep.pass);
        assert!((rep.worst_ratio - 1.0).abs() < 1e-12);

        let bad = line_map(|v| vec![0.0, v], &pts);
        let rep = check_tame(&bad, &TameConstants::new(vec![0.0], 0.0).unwrap()).unwrap();
        assert!(!rep.pass);
        let viol = rep.violation.unwrap();
        assert_eq!(viol.family, TameFamily::Quadratic);
        // 2|y-x| / |y-x|^2 is largest for the closest pair (0, 0.5)
        assert_eq!(viol.pair, Some((0, 1)));
    }

    #[test]
    fn estimate_examples() {
        let pts = [0.0, 0.25, 1.0, 1.75, 3.0];
        let z = estimate_tame_constants(&line_map(|_| vec![0.0, 0.0], &pts)).unwrap();
        assert_eq!(z, TameConstants { per_component: vec![0.0], quadratic: 0.0 });
        let lin = estimate_tame_constants(&line_map(|v| vec![2.0 * v, 0.0], &pts)).unwrap();
        assert_eq!(lin.per_component, vec![2.0]);
        let q = estimate_tame_constants(&line_map(|v| vec![v, v * v / 2.0], &pts)).unwrap();
        assert!((q.quadratic - 1.0).abs() < 1e-15);
    }

    #[test]
    fn lip_to_tame_constants() {
        let c = tame_constants_from_lip(&s(2, 2), 1.0);
        assert_eq!(c.per_component, vec![1.0, 1.0]);
        assert_eq!(c.quadratic, 2.0);
        let c = tame_constants_from_lip(&s(2, 1), 0.25);
        assert_eq!(c.per_component, vec![0.25, 0.125, 0.25]);
        assert_eq!(c.quadratic, 0.125);
    }

    #[test]
    fn ilg_to_tame_zero_map() {
        let m = line_map(|_| vec![0.0, 0.0], &[0.0, 1.0]);
        let (t, c) = ilg_to_tame(&m).unwrap();
        assert_eq!(t, m);
        assert_eq!(c, TameConstants { per_component: vec![0.0], quadratic: 0.0 });
    }

    #[test]
    fn tame_to_ilg_examples() {
        let m = line_map(|v| vec![v, v * v / 2.0], &[0.0, 1.0, 2.0]);
        let (_, l) = tame_to_ilg(&m, &TameConstants::new(vec![1.0], 4.0).unwrap()).unwrap();
        assert_eq!(l, 2.0);
        let z = line_map(|_| vec![0.0, 0.0], &[0.0, 1.0]);
        let (_, l) = tame_to_ilg(&z, &TameConstants::new(vec![0.0], 0.0).unwrap()).unwrap();
        assert_eq!(l, 0.0);
        assert!(matches!(
            tame_to_ilg(&m, &TameConstants::new(vec![0.5], 4.0).unwrap()),
            Err(IlgError::NotTame(_))
        ));
    }

    #[test]
    fn round_trip_restores_values() {
        let m = line_map(|v| vec![0.3 * v, -v * 0.1], &[0.0, 1.0, 2.5]);
        let (t, c) = ilg_to_tame(&m).unwrap();
        let (back, _) = tame_to_ilg(&t, &c).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn self_improvement() {
        let sp = s(2, 2);
        let m = SampledMap::new(sp, vec![vec![0.0, 0.0], vec![1.0, 0.0]], vec![vec![0.0; 3]; 2]).unwrap();
        let c = TameConstants::new(vec![1.0, 1.0], 10.0).unwrap();
        let out = self_improve_quadratic(&m, &c).unwrap();
        assert_eq!(out.quadratic, 2.0 * 2f64.sqrt());
        let c = TameConstants::new(vec![1.0, 1.0], 0.5).unwrap();
        assert_eq!(self_improve_quadratic(&m, &c).unwrap(), c);
        let z = TameConstants::zeros(&sp);
        assert_eq!(self_improve_quadratic(&m, &z).unwrap(), z);
        let lm = line_map(|_| vec![0.0; 4], &[0.0, 1.0]);
        assert!(self_improve_quadratic(&lm, &TameConstants::new(vec![0.0; 3], 0.0).unwrap()).is_err());
    }

    #[test]
    fn negative_constants_rejected() {
        assert!(TameConstants::new(vec![-1.0], 0.0).is_err());
        assert!(TameConstants::new(vec![1.0], f64::NAN).is_err());
    }
}
