//! File formats, synthetic generators and the subcommand driver behind `heis-ilg`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corona::{corona_pipeline, CoronaJson, DyadicInterval, LiftedCurve};
use crate::error::IlgError;
use crate::extension::{extend_ilg, AuditGrid, IlgExtensionReport};
use crate::grid::{check_ode_k1, GridFunction};
use crate::heisenberg::{intrinsic_lip_witness, SampledMap, SubgroupSplit};
use crate::rng::SeededRng;
use crate::tame::{check_tame_with_slack, estimate_tame_constants, ilg_to_tame, TameConstants, CONSTANT_SLACK};

/// Environment variable scaling every tolerance.
pub const TOL_ENV: &str = "HEIS_ILG_TOL";

/// Restriction error allowed by `extend`.
pub const RESTRICTION_TOL: f64 = 1e-10;

/// Relative spacing deviation accepted when reading a uniform grid from a file.
const UNIFORM_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: malformed JSON: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Lib(#[from] IlgError),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    Intrinsic,
    Tame,
}

/// JSON layout of a sampled map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapFile {
    pub k: usize,
    pub n: usize,
    pub convention: Convention,
    pub domain: Vec<Vec<f64>>,
    pub values: Vec<Vec<f64>>,
}

impl MapFile {
    pub fn from_map(map: &SampledMap<f64>, convention: Convention) -> Self {
        let s = map.split();
        Self { k: s.k(), n: s.n(), convention, domain: map.domain().to_vec(), values: map.values().to_vec() }
    }

    pub fn to_map(&self) -> CliResult<SampledMap<f64>> {
        Ok(SampledMap::new(SubgroupSplit::new(self.n, self.k)?, self.domain.clone(), self.values.clone())?)
    }

    /// Intrinsic-convention copy.
    pub fn intrinsic(&self) -> Self {
        let mut f = self.clone();
        if f.convention == Convention::Tame {
            for v in &mut f.values {
                if let Some(last) = v.last_mut() {
                    *last = -*last;
                }
            }
            f.convention = Convention::Intrinsic;
        }
        f
    }

    /// Reads a `k = 1` map on a uniform grid as a lifted curve.
    pub fn to_curve(&self) -> CliResult<LiftedCurve<f64>> {
        if self.k != 1 {
            return Err(CliError::Input(format!("a curve needs k = 1, got k = {}", self.k)));
        }
        if self.domain.len() < 2 {
            return Err(CliError::Input("a curve needs at least two samples".into()));
        }
        let xs: Vec<f64> = self.domain.iter().map(|d| d.first().copied().unwrap_or(f64::NAN)).collect();
        let step = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
        for (j, &x) in xs.iter().enumerate() {
            if (x - (xs[0] + step * j as f64)).abs() > UNIFORM_TOL * step.abs().max(1.0) {
                return Err(CliError::Input(format!("domain is not a uniform increasing grid at sample {j}")));
            }
        }
        let me = self.intrinsic();
        Ok(LiftedCurve::new(self.n, xs[0], step, me.values)?)
    }
}

/// Tame constants as read from `--constants`, optionally with an intrinsic bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsFile {
    #[serde(default)]
    pub per_component: Option<Vec<f64>>,
    #[serde(default)]
    pub quadratic: Option<f64>,
    #[serde(default)]
    pub intrinsic: Option<f64>,
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })?;
    serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.into(), source })
}

pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|source| CliError::Io { path: path.into(), source })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    write_text(path, &to_json_string(value))
}

/// Tolerance multiplier from [`TOL_ENV`] (default 1).
pub fn tolerance_scale() -> CliResult<f64> {
    match std::env::var(TOL_ENV) {
        Err(_) => Ok(1.0),
        Ok(s) => match s.trim().parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
            _ => Err(CliError::Input(format!("{TOL_ENV} must be a positive number, got {s:?}"))),
        },
    }
}

/// Random `k = 1` intrinsic Lipschitz sample on the grid `a, a + step, ..., b`: the
/// horizontal components are piecewise linear with slopes in `[-l, l]` and shared random
/// breakpoints, the last one solves the equation exactly. Returned in the tame convention.
pub fn generate_ilg_k1(
    seed: u64,
    n: usize,
    l: f64,
    breakpoints: usize,
    domain: (f64, f64),
    step: f64,
) -> CliResult<GridFunction<f64>> {
    let (a, b) = domain;
    if n == 0 || !(l >= 0.0) || !l.is_finite() || !(b > a) || !(step > 0.0) {
        return Err(CliError::Input("generate needs n >= 1, L >= 0, a < b and step > 0".into()));
    }
    let cells = ((b - a) / step).round() as usize;
    if cells < 1 || cells > 10_000_000 {
        return Err(CliError::Input(format!("grid of {cells} cells is out of range")));
    }
    let mut rng = SeededRng::new(seed);
    let m = 2 * n - 1;
    let mut corners: Vec<usize> = (0..breakpoints).map(|_| 1 + rng.below(cells.max(2) - 1)).collect();
    corners.push(0);
    corners.push(cells);
    corners.sort_unstable();
    corners.dedup();
    let mut hor = vec![vec![0.0; m]; cells + 1];
    hor[0] = (0..m).map(|_| rng.range(-0.5, 0.5)).collect();
    for w in corners.windows(2) {
        let slopes: Vec<f64> = (0..m).map(|_| rng.range(-l, l)).collect();
        for j in w[0] + 1..=w[1] {
            let prev = hor[j - 1].clone();
            hor[j] = prev.iter().zip(&slopes).map(|(p, s)| p + s * step).collect();
        }
    }
    let last0 = rng.range(-0.5, 0.5);
    let curve = LiftedCurve::from_horizontal(n, a, step, hor, last0)?;
    Ok(curve.to_grid()?.negate_last())
}

/// Polynomial potential `P(v) = b.v + v^T A v / 2 + sum_i c_i v_i^3 / 6` (`A` symmetric).
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    pub linear: Vec<f64>,
    pub quadratic: Vec<Vec<f64>>,
    pub cubic: Vec<f64>,
}

impl Potential {
    pub fn zero(n: usize) -> Self {
        Self { linear: vec![0.0; n], quadratic: vec![vec![0.0; n]; n], cubic: vec![0.0; n] }
    }

    /// `|v|^2 / 2`.
    pub fn half_square(n: usize) -> Self {
        let mut p = Self::zero(n);
        for i in 0..n {
            p.quadratic[i][i] = 1.0;
        }
        p
    }

    pub fn random(rng: &mut SeededRng, n: usize) -> Self {
        let mut p = Self::zero(n);
        for i in 0..n {
            p.linear[i] = rng.range(-1.0, 1.0);
            p.cubic[i] = rng.range(-0.5, 0.5);
            for j in i..n {
                let v = rng.range(-1.0, 1.0);
                p.quadratic[i][j] = v;
                p.quadratic[j][i] = v;
            }
        }
        p
    }

    pub fn value(&self, v: &[f64]) -> f64 {
        let n = v.len();
        let mut s = 0.0;
        for i in 0..n {
            s += self.linear[i] * v[i] + self.cubic[i] * v[i].powi(3) / 6.0;
            for j in 0..n {
                s += 0.5 * self.quadratic[i][j] * v[i] * v[j];
            }
        }
        s
    }

    pub fn gradient(&self, v: &[f64]) -> Vec<f64> {
        let n = v.len();
        (0..n)
            .map(|i| {
                self.linear[i]
                    + self.cubic[i] * v[i] * v[i] / 2.0
                    + (0..n).map(|j| self.quadratic[i][j] * v[j]).sum::<f64>()
            })
            .collect()
    }
}

/// The `k = n` tame map `(grad P, P)` sampled at `count` points of `[lo, hi]^n`.
pub fn tame_kn_from_potential(
    potential: &Potential,
    seed: u64,
    n: usize,
    bounds: (f64, f64),
    count: usize,
) -> CliResult<SampledMap<f64>> {
    let (lo, hi) = bounds;
    if n == 0 || !(hi > lo) || count == 0 {
        return Err(CliError::Input("need n >= 1, lo < hi and at least one point".into()));
    }
    if potential.linear.len() != n {
        return Err(CliError::Input(format!("potential has dimension {}, expected {n}", potential.linear.len())));
    }
    let mut rng = SeededRng::new(seed);
    let domain: Vec<Vec<f64>> = (0..count).map(|_| (0..n).map(|_| rng.range(lo, hi)).collect()).collect();
    let values = domain
        .iter()
        .map(|v| {
            let mut g = potential.gradient(v);
            g.push(potential.value(v));
            g
        })
        .collect();
    Ok(SampledMap::new(SubgroupSplit::new(n, n)?, domain, values)?)
}

/// Random polynomial potential, then [`tame_kn_from_potential`]. Tame convention.
pub fn generate_tame_kn(seed: u64, n: usize, bounds: (f64, f64), count: usize) -> CliResult<SampledMap<f64>> {
    let mut rng = SeededRng::new(seed ^ 0x9e37_79b9_7f4a_7c15);
    let p = Potential::random(&mut rng, n);
    tame_kn_from_potential(&p, seed, n, bounds, count)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenerateKind {
    IlgK1,
    TameKn,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Verify { input: PathBuf, constants: Option<PathBuf>, out: Option<PathBuf> },
    Extend { input: PathBuf, audit_grid: Option<PathBuf>, out: PathBuf },
    Corona { input: PathBuf, eta: f64, root: DyadicInterval, depth: u32, out: PathBuf },
    Generate(GenerateConfig),
    Report { input: PathBuf, csv: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateConfig {
    pub kind: GenerateKind,
    pub seed: u64,
    pub n: usize,
    pub lipschitz: f64,
    pub breakpoints: usize,
    pub domain: (f64, f64),
    pub step: f64,
    pub points: usize,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub tolerance_scale: f64,
}

/// Exit status and a one-line summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub message: String,
}

impl Outcome {
    fn pass(message: String) -> Self {
        Self { code: 0, message }
    }
    fn fail(message: String) -> Self {
        Self { code: 1, message }
    }
    pub fn input_error(e: &CliError) -> Self {
        Self { code: 2, message: format!("error: {e}") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub k: usize,
    pub n: usize,
    pub points: usize,
    pub convention: Convention,
    pub intrinsic_constant: Option<f64>,
    pub intrinsic_witness: Option<(usize, usize)>,
    pub intrinsic_bound: Option<f64>,
    pub tame_constants: TameConstants<f64>,
    pub tame_worst_ratio: f64,
    pub tame_worst_family: String,
    pub tame_worst_pair: Option<(usize, usize)>,
    pub ode_residual: Option<f64>,
    pub pass: bool,
    pub failures: Vec<String>,
}

fn verify(file: &MapFile, constants: Option<ConstantsFile>, scale: f64) -> CliResult<VerifyReport> {
    let map = file.to_map()?;
    let split = map.split();
    let slack = CONSTANT_SLACK * scale;
    let mut failures = Vec::new();
    let (intrinsic_constant, intrinsic_witness, tame_map, tame_constants) = match file.convention {
        Convention::Intrinsic => {
            let (tame_map, formula) = ilg_to_tame(&map)?;
            let w = (map.len() >= 2).then(|| intrinsic_lip_witness(&map)).transpose()?;
            (w.map(|w| w.constant), w.and_then(|w| w.pair), tame_map, formula)
        }
        Convention::Tame => (None, None, map.clone(), estimate_tame_constants(&map)?),
    };
    let mut tame_constants = tame_constants;
    let mut intrinsic_bound = None;
    if let Some(c) = constants {
        if let (Some(p), Some(q)) = (c.per_component.clone(), c.quadratic) {
            tame_constants = TameConstants::new(p, q)?;
        } else if c.per_component.is_some() != c.quadratic.is_some() {
            return Err(CliError::Input("constants need both per_component and quadratic".into()));
        }
        intrinsic_bound = c.intrinsic;
    }
    let tame = if map.len() >= 2 {
        Some(check_tame_with_slack(&tame_map, &tame_constants, slack)?)
    } else {
        None
    };
    if let Some(t) = &tame {
        if let Some(v) = &t.violation {
            failures.push(format!("tame family {} exceeds its constant on pair {:?} (measured {})", v.family, v.pair, v.value));
        }
    }
    if let (Some(l), Some(bound)) = (intrinsic_constant, intrinsic_bound) {
        if l > bound * (1.0 + slack) {
            failures.push(format!("intrinsic constant {l} exceeds {bound} on pair {intrinsic_witness:?}"));
        }
    }
    let ode_residual = if split.k() == 1 && file.to_curve().is_ok() {
        let c = file.to_curve()?;
        Some(check_ode_k1(&c.to_grid()?.negate_last())?)
    } else {
        None
    };
    Ok(VerifyReport {
        k: split.k(),
        n: split.n(),
        points: map.len(),
        convention: file.convention,
        intrinsic_constant,
        intrinsic_witness,
        intrinsic_bound,
        tame_constants,
        tame_worst_ratio: tame.as_ref().map_or(0.0, |t| t.worst_ratio),
        tame_worst_family: tame.as_ref().map_or_else(|| "-".into(), |t| t.worst_family.to_string()),
        tame_worst_pair: tame.as_ref().and_then(|t| t.worst_pair),
        ode_residual,
        pass: failures.is_empty(),
        failures,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtendReport {
    #[serde(flatten)]
    pub extension: IlgExtensionReport,
    pub pass: bool,
    pub failures: Vec<String>,
}

fn extend(file: &MapFile, audit: AuditGrid, scale: f64) -> CliResult<ExtendReport> {
    let map = file.intrinsic().to_map()?;
    let ext = extend_ilg(&map, &audit)?;
    let r = ext.report();
    let slack = 1.0 + CONSTANT_SLACK * scale;
    let mut failures = Vec::new();
    if r.restriction_max_error > RESTRICTION_TOL * scale {
        failures.push(format!("restriction error {} exceeds {}", r.restriction_max_error, RESTRICTION_TOL * scale));
    }
    if r.l_measured > r.l_formula * slack {
        failures.push(format!("audited constant {} exceeds the formula constant {}", r.l_measured, r.l_formula));
    }
    if let Some(b) = r.l_bound {
        if r.l_formula > b * slack {
            failures.push(format!("formula constant {} exceeds the k = n = 1 bound {b}", r.l_formula));
        }
    }
    Ok(ExtendReport { extension: r, pass: failures.is_empty(), failures })
}

/// `tree,j,m,s,ratio,quadratic_ratio` rows of the per-sample verification.
pub fn corona_csv(c: &CoronaJson) -> String {
    let mut out = String::from("tree,j,m,s,ratio,quadratic_ratio\n");
    if let Some(v) = &c.verification {
        for r in &v.samples {
            let _ = writeln!(out, "{},{},{},{:?},{:?},{:?}", r.tree, r.interval.j, r.interval.m, r.s, r.ratio, r.quadratic_ratio);
        }
    }
    out
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_inner(config: &RunConfig) -> CliResult<Outcome> {
    let scale = config.tolerance_scale;
    match &config.command {
        Command::Verify { input, constants, out } => {
            let file: MapFile = read_json(input)?;
            let c = constants.as_deref().map(read_json::<ConstantsFile>).transpose()?;
            let r = verify(&file, c, scale)?;
            emit(out.as_deref(), &to_json_string(&r))?;
            Ok(if r.pass {
                Outcome::pass(format!("verify: pass ({} points)", r.points))
            } else {
                Outcome::fail(format!("verify: FAIL: {}", r.failures.join("; ")))
            })
        }
        Command::Extend { input, audit_grid, out } => {
            let file: MapFile = read_json(input)?;
            let audit = match audit_grid {
                Some(p) => read_json(p)?,
                None => AuditGrid::default_for(file.k),
            };
            let r = extend(&file, audit, scale)?;
            write_json(out, &r)?;
            Ok(if r.pass {
                Outcome::pass(format!(
                    "extend: pass (L = {}, L' = {}, audited {}, restriction error {:e})",
                    r.extension.l_input, r.extension.l_formula, r.extension.l_measured, r.extension.restriction_max_error
                ))
            } else {
                Outcome::fail(format!("extend: FAIL: {}", r.failures.join("; ")))
            })
        }
        Command::Corona { input, eta, root, depth, out } => {
            let file: MapFile = read_json(input)?;
            if file.n == 1 {
                return Err(CliError::Lib(IlgError::Unsupported(
                    "corona needs n > 1; the case of the first Heisenberg group H^1 is out of scope (see Fassler and Orponen)"
                        .into(),
                )));
            }
            let curve = file.to_curve()?;
            let run = corona_pipeline(&curve, *root, *depth, *eta)?;
            let json = run.to_json(scale);
            write_json(out, &json)?;
            let v = json.verification.as_ref().expect("verification present");
            Ok(if v.pass {
                Outcome::pass(format!(
                    "corona: pass ({} trees, {} bad, packing constant {}, worst distance ratio {:e})",
                    run.report.trees, run.report.bad, run.report.packing_constant, run.report.distance_ratio
                ))
            } else {
                Outcome::fail(format!("corona: FAIL: {}", v.failures.join("; ")))
            })
        }
        Command::Generate(g) => {
            let file = match g.kind {
                GenerateKind::IlgK1 => {
                    let grid = generate_ilg_k1(g.seed, g.n, g.lipschitz, g.breakpoints, g.domain, g.step)?;
                    MapFile::from_map(&grid.negate_last().to_sampled()?, Convention::Intrinsic)
                }
                GenerateKind::TameKn => {
                    MapFile::from_map(&generate_tame_kn(g.seed, g.n, g.domain, g.points)?, Convention::Tame)
                }
            };
            write_json(&g.out, &file)?;
            Ok(Outcome::pass(format!("generate: wrote {} samples to {}", file.domain.len(), g.out.display())))
        }
        Command::Report { input, csv } => {
            let c: CoronaJson = read_json(input)?;
            write_text(csv, &corona_csv(&c))?;
            let failures = c.verification.as_ref().map(|v| v.report.failures(scale)).unwrap_or_default();
            Ok(if failures.is_empty() {
                Outcome::pass(format!("report: wrote {}", csv.display()))
            } else {
                Outcome::fail(format!("report: stored run fails: {}", failures.join("; ")))
            })
        }
    }
}

/// Runs one subcommand. Exit codes: 0 pass, 1 verification failure, 2 input error.
pub fn run(config: &RunConfig) -> Outcome {
    run_inner(config).unwrap_or_else(|e| Outcome::input_error(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tame::check_tame;

    #[test]
    fn zero_slope_generator_is_affine() {
        let g = generate_ilg_k1(3, 2, 0.0, 4, (0.0, 1.0), 0.01).unwrap();
        let v = g.values();
        for j in 1..v.len() {
            assert_eq!(v[j][..3], v[0][..3]);
            let slope = (v[j][3] - v[j - 1][3]) / 0.01;
            assert!((slope - v[0][1]).abs() < 1e-9);
        }
    }

    #[test]
    fn generator_is_deterministic() {
        let a = generate_ilg_k1(11, 3, 0.5, 5, (-1.0, 2.0), 1e-3).unwrap();
        let b = generate_ilg_k1(11, 3, 0.5, 5, (-1.0, 2.0), 1e-3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_ilg_k1(12, 3, 0.5, 5, (-1.0, 2.0), 1e-3).unwrap());
    }

    #[test]
    fn generated_map_satisfies_the_equation() {
        let h = 1e-3;
        let g = generate_ilg_k1(5, 2, 0.5, 6, (0.0, 1.0), h).unwrap();
        assert!(check_ode_k1(&g).unwrap() <= 10.0 * h);
    }

    #[test]
    fn tame_generator_examples() {
        let z = tame_kn_from_potential(&Potential::zero(2), 1, 2, (0.0, 1.0), 10).unwrap();
        assert!(z.values().iter().flatten().all(|&x| x == 0.0));
        let h = tame_kn_from_potential(&Potential::half_square(2), 1, 2, (0.0, 1.0), 30).unwrap();
        for (d, v) in h.domain().iter().zip(h.values()) {
            assert_eq!(v[..2], d[..]);
        }
        let c = estimate_tame_constants(&h).unwrap();
        assert!((c.quadratic - 1.0).abs() < 1e-9);
        let r = generate_tame_kn(9, 3, (0.0, 1.0), 25).unwrap();
        assert!(check_tame(&r, &estimate_tame_constants(&r).unwrap()).unwrap().pass);
        assert_eq!(r, generate_tame_kn(9, 3, (0.0, 1.0), 25).unwrap());
    }

    #[test]
    fn map_file_round_trip_and_curve() {
        let g = generate_ilg_k1(1, 2, 0.3, 2, (-1.0, 2.0), 0.01).unwrap();
        let f = MapFile::from_map(&g.negate_last().to_sampled().unwrap(), Convention::Intrinsic);
        let text = to_json_string(&f);
        let back: MapFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back, f);
        let c = back.to_curve().unwrap();
        assert!(c.max_drift() < 1e-12);
        let mut bad = back.clone();
        bad.domain[5][0] += 1e-4;
        assert!(bad.to_curve().is_err());
    }

    #[test]
    fn csv_header_only_without_verification() {
        let c = CoronaJson {
            root: DyadicInterval::new(0, 0),
            depth: 0,
            bad: vec![],
            trees: vec![],
            packing_constant: 0.0,
            verification: None,
        };
        assert_eq!(corona_csv(&c), "tree,j,m,s,ratio,quadratic_ratio\n");
    }
}
