//! End-to-end intrinsic corona: coronize the horizontal part, match, lift and verify.

use serde::{Deserialize, Serialize};

use super::curve::LiftedCurve;
use super::dyadic::DyadicInterval;
use super::euclidean::{check_approximation, matched_corona, Coronization};
use super::lift::{delta_for_eta, lift_tree, verify_intrinsic_approx, IntrinsicCheck, SampleRecord, TreeApprox};
use crate::error::{IlgError, Result};
use crate::heisenberg::intrinsic_lip_witness;
use crate::scalar::{lit, to_f64, Scalar};

/// Slack on the intrinsic 1-Lipschitz precondition.
pub const LIP_SLACK: f64 = 1e-9;

/// Tolerances of the corona checks, before scaling.
pub mod tol {
    /// Relative slack on ratio checks (integration tolerance).
    pub const RATIO: f64 = 1e-6;
    /// Matching of `psi` at minimal-interval endpoints.
    pub const HORIZONTAL_MATCH: f64 = 1e-10;
    /// Matching of the last component, relative to `|Q(T)|^2`.
    pub const VERTICAL_MATCH: f64 = 1e-6;
    /// Simpson integral of the tents against `c |S|^2 / 4`.
    pub const TENT_INTEGRAL: f64 = 1e-12;
}

/// Aggregate of all corona checks (ratios are measured over bound; pass means `<= 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoronaReport {
    pub n: usize,
    pub eta: f64,
    pub delta: f64,
    pub intrinsic_constant: f64,
    pub trees: usize,
    pub bad: usize,
    pub minimal_intervals: usize,
    pub packing_constant: f64,
    pub clamped_slopes: usize,
    /// Sampled `|psi - (psi~_T + L_T)| / (delta |Q|)`.
    pub euclidean_ratio: f64,
    /// `max |c_S| / (delta / 4)` of the endpoint matching.
    pub match_correction_ratio: f64,
    /// `Lip(psi~_T) / (3 delta / 8)`.
    pub match_lipschitz_ratio: f64,
    pub horizontal_endpoint_gap: f64,
    pub c_ratio: f64,
    pub xi_lipschitz_ratio: f64,
    pub xi_sup_ratio: f64,
    pub xi_integral_error: f64,
    pub c_quadrature_gap: f64,
    /// `Lip(psi~_T + xi) / eta`.
    pub approx_lipschitz_ratio: f64,
    pub distance_ratio: f64,
    pub quadratic_ratio: f64,
    /// `max |phi_{2n+1} - phi_{T,2n+1}| / |Q(T)|^2` at minimal-interval endpoints.
    pub vertical_endpoint_gap: f64,
    pub witness_tree: Option<usize>,
    pub witness_interval: Option<DyadicInterval>,
    pub witness_s: Option<f64>,
}

impl CoronaReport {
    /// Violated invariants with witnesses; tolerances multiplied by `scale`.
    pub fn failures(&self, scale: f64) -> Vec<String> {
        let witness = || {
            format!(
                "tree {:?}, interval {}, s = {:?}",
                self.witness_tree,
                self.witness_interval.map(|q| q.to_string()).unwrap_or_else(|| "-".into()),
                self.witness_s
            )
        };
        let ratio_ok = |r: f64| r <= 1.0 + tol::RATIO * scale;
        let mut f = Vec::new();
        let mut need = |ok: bool, msg: String| {
            if !ok {
                f.push(msg);
            }
        };
        need(ratio_ok(self.euclidean_ratio), format!("euclidean approximation ratio {}", self.euclidean_ratio));
        need(ratio_ok(self.match_correction_ratio), format!("matching correction ratio {}", self.match_correction_ratio));
        need(ratio_ok(self.match_lipschitz_ratio), format!("matched Lipschitz ratio {}", self.match_lipschitz_ratio));
        need(
            self.horizontal_endpoint_gap <= tol::HORIZONTAL_MATCH * scale,
            format!("horizontal endpoint gap {}", self.horizontal_endpoint_gap),
        );
        need(ratio_ok(self.c_ratio), format!("|c| / (24 n delta) = {}", self.c_ratio));
        need(ratio_ok(self.xi_lipschitz_ratio), format!("tent Lipschitz ratio {}", self.xi_lipschitz_ratio));
        need(ratio_ok(self.xi_sup_ratio), format!("tent sup ratio {}", self.xi_sup_ratio));
        need(
            self.xi_integral_error <= tol::TENT_INTEGRAL * scale,
            format!("tent integral error {}", self.xi_integral_error),
        );
        need(ratio_ok(self.approx_lipschitz_ratio), format!("approximant Lipschitz ratio {}", self.approx_lipschitz_ratio));
        need(ratio_ok(self.distance_ratio), format!("distance ratio {} at {}", self.distance_ratio, witness()));
        need(ratio_ok(self.quadratic_ratio), format!("quadratic ratio {} at {}", self.quadratic_ratio, witness()));
        need(
            self.vertical_endpoint_gap <= tol::VERTICAL_MATCH * scale,
            format!("vertical endpoint gap {}", self.vertical_endpoint_gap),
        );
        need(self.clamped_slopes == 0, format!("{} tree slopes clamped", self.clamped_slopes));
        f
    }

    pub fn passes(&self, scale: f64) -> bool {
        self.failures(scale).is_empty()
    }
}

/// Output of [`corona_pipeline`].
#[derive(Debug, Clone)]
pub struct CoronaRun<T> {
    pub corona: Coronization,
    pub approxes: Vec<TreeApprox<T>>,
    pub checks: Vec<IntrinsicCheck>,
    pub report: CoronaReport,
}

fn fold_max(a: f64, b: f64) -> f64 {
    a.max(b)
}

/// Aggregates the per-tree checks into `report` (used again after fault injection).
pub fn summarize(report: &mut CoronaReport, approxes: &[TreeApprox<impl Scalar>], checks: &[IntrinsicCheck]) {
    report.c_ratio = approxes.iter().map(|a| a.report.c_ratio).fold(0.0, fold_max);
    report.xi_lipschitz_ratio = approxes.iter().map(|a| a.report.xi_lipschitz_ratio).fold(0.0, fold_max);
    report.xi_sup_ratio = approxes.iter().map(|a| a.report.xi_sup_ratio).fold(0.0, fold_max);
    report.xi_integral_error = approxes.iter().map(|a| a.report.xi_integral_error).fold(0.0, fold_max);
    report.c_quadrature_gap = approxes.iter().map(|a| a.report.c_quadrature_gap).fold(0.0, fold_max);
    report.approx_lipschitz_ratio =
        approxes.iter().map(|a| a.report.lipschitz / report.eta).fold(0.0, fold_max);
    report.distance_ratio = checks.iter().map(|c| c.worst_ratio).fold(0.0, fold_max);
    report.quadratic_ratio = checks.iter().map(|c| c.worst_quadratic_ratio).fold(0.0, fold_max);
    report.vertical_endpoint_gap = checks.iter().map(|c| c.endpoint_vertical_gap).fold(0.0, fold_max);
    report.horizontal_endpoint_gap =
        checks.iter().map(|c| c.endpoint_horizontal_gap).fold(report.horizontal_endpoint_gap, fold_max);
    let worst = checks
        .iter()
        .max_by(|a, b| a.worst_ratio.max(a.worst_quadratic_ratio).total_cmp(&b.worst_ratio.max(b.worst_quadratic_ratio)));
    report.witness_tree = worst.map(|c| c.tree);
    report.witness_interval = worst.and_then(|c| c.witness_interval);
    report.witness_s = worst.and_then(|c| c.witness_s);
}

/// Coronization of an intrinsic 1-Lipschitz curve with verified intrinsic approximants.
pub fn corona_pipeline<T: Scalar>(
    phi: &LiftedCurve<T>,
    root: DyadicInterval,
    depth: u32,
    eta: T,
) -> Result<CoronaRun<T>> {
    let n = phi.n();
    if n < 2 {
        return Err(IlgError::Unsupported(
            "n = 1 (the first Heisenberg group) is out of scope; see Fassler and Orponen for that case".into(),
        ));
    }
    if !(eta > T::zero() && eta < T::one()) {
        return Err(IlgError::InvalidParameter(format!("eta must lie in (0, 1), got {eta}")));
    }
    let (lo2, hi2) = root.double::<T>();
    let (a, b) = phi.domain();
    if a > lo2 || b < hi2 {
        return Err(IlgError::Precondition(format!("curve domain [{a}, {b}] does not cover 2 * root [{lo2}, {hi2}]")));
    }
    let lip = intrinsic_lip_witness(&phi.sampled_on(lo2, hi2)?)?;
    if lip.constant > T::one() + lit(LIP_SLACK) {
        return Err(IlgError::Precondition(format!(
            "intrinsic constant {} exceeds 1 (witness nodes {:?}); rescale first",
            lip.constant, lip.pair
        )));
    }
    let delta = delta_for_eta(eta, n);
    let psi = |s: T| phi.horizontal(s);
    let (corona, matched, matches) = matched_corona(psi, root, depth, delta)?;
    let euclid = check_approximation(psi, &corona, &matched, delta);
    let mut approxes = Vec::with_capacity(matched.len());
    for (i, m) in matched.iter().enumerate() {
        approxes.push(lift_tree(phi, &corona, i, m, eta)?);
    }
    let checks: Vec<IntrinsicCheck> = approxes.iter().map(|a| verify_intrinsic_approx(phi, &corona, a, eta)).collect();
    let d = to_f64(delta);
    let mut report = CoronaReport {
        n,
        eta: to_f64(eta),
        delta: d,
        intrinsic_constant: to_f64(lip.constant),
        trees: corona.trees.len(),
        bad: corona.bad.len(),
        minimal_intervals: corona.trees.iter().map(|t| t.minimal().len()).sum(),
        packing_constant: corona.packing_constant,
        clamped_slopes: matched.iter().filter(|m| m.clamped).count(),
        euclidean_ratio: euclid.worst_ratio,
        match_correction_ratio: matches.iter().map(|m| to_f64(m.max_correction) / (d / 4.0)).fold(0.0, fold_max),
        match_lipschitz_ratio: matches.iter().map(|m| to_f64(m.lipschitz) / (0.375 * d)).fold(0.0, fold_max),
        horizontal_endpoint_gap: matches.iter().map(|m| to_f64(m.endpoint_gap)).fold(0.0, fold_max),
        c_ratio: 0.0,
        xi_lipschitz_ratio: 0.0,
        xi_sup_ratio: 0.0,
        xi_integral_error: 0.0,
        c_quadrature_gap: 0.0,
        approx_lipschitz_ratio: 0.0,
        distance_ratio: 0.0,
        quadratic_ratio: 0.0,
        vertical_endpoint_gap: 0.0,
        witness_tree: None,
        witness_interval: None,
        witness_s: None,
    };
    summarize(&mut report, &approxes, &checks);
    Ok(CoronaRun { corona, approxes, checks, report })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionJson {
    #[serde(rename = "S")]
    pub s: DyadicInterval,
    pub c: f64,
    pub c_simpson: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeJson {
    pub top: DyadicInterval,
    pub members: Vec<DyadicInterval>,
    pub slope: Vec<f64>,
    pub psi_breaks: Vec<f64>,
    pub psi_vals: Vec<Vec<f64>>,
    pub corrections: Vec<CorrectionJson>,
    pub t_origin: f64,
    pub t_step: f64,
    pub t_table: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationJson {
    pub report: CoronaReport,
    pub pass: bool,
    pub failures: Vec<String>,
    pub samples: Vec<SampleRecord>,
}

/// File format of a corona run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoronaJson {
    pub root: DyadicInterval,
    pub depth: u32,
    pub bad: Vec<DyadicInterval>,
    pub trees: Vec<TreeJson>,
    pub packing_constant: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verification: Option<VerificationJson>,
}

impl<T: Scalar> CoronaRun<T> {
    pub fn to_json(&self, tolerance_scale: f64) -> CoronaJson {
        let v = |xs: &[T]| xs.iter().map(|&x| to_f64(x)).collect::<Vec<f64>>();
        let trees = self
            .corona
            .trees
            .iter()
            .zip(&self.approxes)
            .map(|(t, a)| {
                let (origin, step, table) = a.table();
                TreeJson {
                    top: t.top,
                    members: t.members.clone(),
                    slope: v(a.slope()),
                    psi_breaks: v(a.psi().knots()),
                    psi_vals: a.psi().values().iter().map(|x| v(x)).collect(),
                    corrections: a
                        .corrections()
                        .iter()
                        .map(|c| CorrectionJson { s: c.s, c: to_f64(c.c), c_simpson: to_f64(c.c_quadrature) })
                        .collect(),
                    t_origin: to_f64(origin),
                    t_step: to_f64(step),
                    t_table: v(table),
                }
            })
            .collect();
        let failures = self.report.failures(tolerance_scale);
        CoronaJson {
            root: self.corona.root,
            depth: self.corona.depth,
            bad: self.corona.bad.clone(),
            trees,
            packing_constant: self.corona.packing_constant,
            verification: Some(VerificationJson {
                report: self.report.clone(),
                pass: failures.is_empty(),
                failures,
                samples: self.checks.iter().flat_map(|c| c.records.iter().cloned()).collect(),
            }),
        }
    }
}
