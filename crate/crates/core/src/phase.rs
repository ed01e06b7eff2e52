//! The shooting map `d ↦ θ_d(R₂)` and the search for its level crossings.
//!
//! A shot with `u(R₁) = 1 - d` is a solution with `j` intersections with 1
//! exactly when `θ_d(R₂) = (j+1)π_p`. Solutions are found by a dense d-scan
//! followed by bisection of every bracket.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::integrator::{integrate_shot, PhasePath, ShotSpec, SolverSettings};
use crate::model::{classify_c1, f_hat_shifted, C1Regime, Nonlinearity, Prototype, RadialDomain};
use crate::ptrig::PContext;
use crate::quad::GaussLegendre;

/// A nonlinearity on a domain, with the solver settings used for every shot.
#[derive(Debug, Clone)]
pub struct Problem {
    pub ctx: PContext,
    pub nl: Arc<dyn Nonlinearity>,
    pub dom: RadialDomain,
    pub settings: SolverSettings,
}

impl Problem {
    pub fn new(nl: Arc<dyn Nonlinearity>, dom: RadialDomain, settings: SolverSettings) -> Result<Self> {
        settings.validate()?;
        Ok(Problem {
            ctx: PContext::new(nl.p())?,
            nl,
            dom,
            settings,
        })
    }

    pub fn prototype(p: f64, q: f64, dom: RadialDomain) -> Result<Self> {
        Problem::new(Arc::new(Prototype::new(p, q)?), dom, SolverSettings::default())
    }

    pub fn shot(&self, d: f64) -> Result<PhasePath> {
        integrate_shot(
            &self.ctx,
            self.nl.as_ref(),
            &self.dom,
            &ShotSpec::with_settings(d, self.settings),
        )
    }

    pub fn pi_p(&self) -> f64 {
        self.ctx.pi_p()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathDigest {
    pub min_u: f64,
    pub max_u: f64,
    pub sup_rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootOutcome {
    pub d: f64,
    pub theta_end: f64,
    /// `(θ_d(R₂) - π_p) / π_p`.
    pub winding: f64,
    pub digest: PathDigest,
}

impl ShootOutcome {
    fn from_path(path: &PhasePath) -> Self {
        ShootOutcome {
            d: path.d,
            theta_end: path.theta_end(),
            winding: (path.theta_end() - path.pi_p) / path.pi_p,
            digest: PathDigest {
                min_u: path.min_u(),
                max_u: path.max_u(),
                sup_rho: path.sup_rho(),
            },
        }
    }
}

pub fn shooting_map(problem: &Problem, d: f64) -> Result<ShootOutcome> {
    Ok(ShootOutcome::from_path(&problem.shot(d)?))
}

/// Branch label of a solution within its level `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BranchLabel {
    Unique,
    Minus,
    Plus,
    /// One of more than two roots at the same level, numbered from 1 by `d`.
    Extra(u32),
}

impl fmt::Display for BranchLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BranchLabel::Unique => f.write_str("unique"),
            BranchLabel::Minus => f.write_str("minus"),
            BranchLabel::Plus => f.write_str("plus"),
            BranchLabel::Extra(i) => write!(f, "extra{i}"),
        }
    }
}

impl std::str::FromStr for BranchLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unique" => Ok(BranchLabel::Unique),
            "minus" | "-" => Ok(BranchLabel::Minus),
            "plus" | "+" => Ok(BranchLabel::Plus),
            _ => s
                .strip_prefix("extra")
                .and_then(|n| n.parse().ok())
                .map(BranchLabel::Extra)
                .ok_or_else(|| Error::Parse(format!("unknown branch label `{s}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolutionRecord {
    pub d: f64,
    /// `u(R₁)`, exact even when `d` rounds to 1.
    pub u0: f64,
    pub j: u32,
    pub label: BranchLabel,
    pub theta_end: f64,
    pub profile: PhasePath,
    /// `|u'(R₂)|`.
    pub boundary_residual: f64,
    /// Max-norm of `v' + r^{N-1} f̂(u)` in integral form on 512 cells.
    pub equation_residual: f64,
    pub min_u: f64,
    pub positive: bool,
}

impl SolutionRecord {
    pub fn param(&self) -> ShotParam {
        ShotParam { d: self.d, u0: self.u0 }
    }

    pub fn u_end(&self) -> f64 {
        *self.profile.u.last().unwrap()
    }

    pub fn max_abs_u_prime(&self) -> f64 {
        self.profile.max_abs_u_prime()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub zeros: u32,
    pub extrema: Vec<f64>,
    pub monotone: bool,
}

/// Zeros of `u - 1` and interior extrema, read off the angle.
pub fn classify(path: &PhasePath) -> Classification {
    let pi_p = path.pi_p;
    let end = path.theta_end();
    let tol = 1e-9 * pi_p;
    let mut zeros = 0;
    let mut m = 1;
    while (m as f64 + 0.5) * pi_p < end {
        zeros += 1;
        m += 1;
    }
    let mut extrema = vec![];
    let mut m = 2;
    while (m as f64) * pi_p < end - tol {
        extrema.push(crossing_radius(path, m as f64 * pi_p));
        m += 1;
    }
    Classification {
        zeros,
        monotone: zeros == 1 && extrema.is_empty(),
        extrema,
    }
}

/// Radius where the (non-decreasing) angle first reaches `level`.
fn crossing_radius(path: &PhasePath, level: f64) -> f64 {
    let i = path.theta.partition_point(|&t| t < level);
    if i == 0 {
        return path.r_start();
    }
    if i >= path.len() {
        return path.r_end();
    }
    let (mut lo, mut hi) = (path.r[i - 1], path.r[i]);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if path.state_at(mid).theta < level {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi.abs().max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Max over 512 cells of `|Δv + ∫ r^{N-1} f̂(u) dr| / Δr`, using the dense
/// output of the path.
pub fn equation_residual(path: &PhasePath, nl: &dyn Nonlinearity) -> f64 {
    let (a, b) = (path.dense_start(), path.r_end());
    if !(b > a) {
        return 0.0;
    }
    let n = path.n;
    let cells = 512;
    let h = (b - a) / cells as f64;
    let rule = GaussLegendre::g16();
    (0..cells)
        .map(|i| {
            let lo = a + i as f64 * h;
            let hi = if i + 1 == cells { b } else { lo + h };
            let source = rule.integrate(lo, hi, |r| {
                let w = path.state_at(r).w;
                let rn1 = if n == 1 { 1.0 } else { r.powi(n as i32 - 1) };
                rn1 * f_hat_shifted(nl, w)
            });
            let dv = path.state_at(hi).v - path.state_at(lo).v;
            (dv + source).abs() / (hi - lo)
        })
        .fold(0.0, f64::max)
}

/// A shooting parameter, kept as both `d` and `u0 = 1 - d` so that either end
/// of `[0, 1]` can be approached beyond machine epsilon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotParam {
    pub d: f64,
    pub u0: f64,
}

impl ShotParam {
    pub fn from_d(d: f64) -> Self {
        ShotParam { d, u0: 1.0 - d }
    }

    pub fn from_u0(u0: f64) -> Self {
        ShotParam { d: 1.0 - u0, u0 }
    }

    /// Whether `u0` is the exact coordinate.
    fn upper(&self) -> bool {
        self.d > 0.5
    }

    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.d.total_cmp(&other.d).then(other.u0.total_cmp(&self.u0))
    }
}

impl Problem {
    pub fn shot_at(&self, at: ShotParam) -> Result<PhasePath> {
        let spec = if at.upper() {
            ShotSpec::from_u0(at.u0, self.settings)
        } else {
            ShotSpec::with_settings(at.d, self.settings)
        };
        integrate_shot(&self.ctx, self.nl.as_ref(), &self.dom, &spec)
    }
}

/// Controls of the d-scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanSpec {
    pub points: usize,
    /// Smallest `d` scanned; chosen from the C₁ regime when `None`.
    pub d_min: Option<f64>,
    /// Smallest `u(R₁) = 1 - d` scanned; chosen adaptively when `None`.
    pub u0_min: Option<f64>,
    /// How often the grid may be doubled when a level shows more than two roots.
    pub max_doublings: u32,
    /// Parameter intervals where roots are expected (e.g. from a neighbouring
    /// sweep value); they only add scan nodes.
    pub hints: Vec<(ShotParam, ShotParam)>,
}

impl Default for ScanSpec {
    fn default() -> Self {
        ScanSpec {
            points: 256,
            d_min: None,
            u0_min: None,
            max_doublings: 1,
            hints: vec![],
        }
    }
}

impl ScanSpec {
    pub fn with_points(points: usize) -> Self {
        ScanSpec {
            points,
            ..ScanSpec::default()
        }
    }
}

const U0_DEFAULT_MIN: f64 = 1e-9;
const D_FINITE_MIN: f64 = 1e-8;
const D_FLOOR: f64 = 1e-250;

fn geometric(a: f64, b: f64, count: usize, include_end: bool) -> impl Iterator<Item = f64> {
    let (la, lb) = (a.ln(), b.ln());
    let div = if include_end { (count - 1).max(1) } else { count } as f64;
    (0..count).map(move |i| (la + (lb - la) * i as f64 / div).exp())
}

/// Scan nodes: half geometric in `d ∈ [d_min, 1/2)`, half geometric in
/// `u0 ∈ [u0_min, 1/2]`, plus 17 nodes per hint interval. Sorted by `d`.
pub fn scan_grid(d_min: f64, u0_min: f64, points: usize, hints: &[(ShotParam, ShotParam)]) -> Vec<ShotParam> {
    let lower = points / 2;
    let upper = points - lower;
    let mut grid: Vec<ShotParam> = geometric(d_min, 0.5, lower, false)
        .map(ShotParam::from_d)
        .chain(geometric(0.5, u0_min, upper, true).map(ShotParam::from_u0))
        .collect();
    for &(a, b) in hints {
        let (a, b) = if a.cmp(&b).is_le() { (a, b) } else { (b, a) };
        if b.upper() {
            let (hi, lo) = (a.u0.min(0.5).max(u0_min), b.u0.max(u0_min));
            if hi > lo {
                grid.extend(geometric(hi, lo, 17, true).map(ShotParam::from_u0));
            }
        } else {
            let (lo, hi) = (a.d.max(d_min), b.d);
            if hi > lo {
                grid.extend(geometric(lo, hi, 17, true).map(ShotParam::from_d));
            }
        }
    }
    grid.sort_by(ShotParam::cmp);
    grid.dedup_by(|a, b| a.cmp(b).is_eq());
    grid
}

/// Regime-dependent lower end of the scan.
///
/// For C₁ = 0 the angle collapses to π_p as `d → 0` and for C₁ = ∞ it grows
/// without bound, in both cases at a rate that can be extremely slow in `d`,
/// so `d` is decreased by decades until the end angle is clearly past every
/// level of interest.
pub fn choose_d_min(problem: &Problem, regime: C1Regime, j_max: u32) -> Result<f64> {
    let pi_p = problem.pi_p();
    match regime {
        C1Regime::Finite(_) => Ok(D_FINITE_MIN),
        C1Regime::Zero => descend(problem, ShotParam::from_d, |th| th < 1.75 * pi_p, "d"),
        C1Regime::Infinite => descend(
            problem,
            ShotParam::from_d,
            |th| th > (j_max as f64 + 1.5) * pi_p,
            "d",
        ),
    }
}

/// Upper end of the scan. As `u(R₁) → 0` the angle returns to π_p, but only
/// once the profile stays near 0 over the whole interval, which on long
/// intervals needs starting values far below machine epsilon.
pub fn choose_u0_min(problem: &Problem) -> Result<f64> {
    let pi_p = problem.pi_p();
    let th = problem.shot_at(ShotParam::from_u0(U0_DEFAULT_MIN))?.theta_end();
    if th < 1.75 * pi_p {
        return Ok(U0_DEFAULT_MIN);
    }
    descend(problem, ShotParam::from_u0, |th| th < 1.75 * pi_p, "u(R1)")
}

fn descend(
    problem: &Problem,
    make: impl Fn(f64) -> ShotParam,
    done: impl Fn(f64) -> bool,
    name: &str,
) -> Result<f64> {
    let mut x = 1e-2;
    loop {
        let th = problem.shot_at(make(x))?.theta_end();
        if done(th) {
            return Ok(x * 0.1);
        }
        if x * 0.1 < D_FLOOR {
            log::warn!("scan floor {D_FLOOR:e} reached for {name} with theta(R2) = {th}; roots may be missed");
            return Ok(x);
        }
        x *= 0.1;
    }
}

/// One evaluated scan node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanNode {
    pub at: ShotParam,
    pub theta_end: f64,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub regime: C1Regime,
    pub d_min: f64,
    pub u0_min: f64,
    pub scan: Vec<ScanNode>,
    /// Sorted by `(j, d)`.
    pub records: Vec<SolutionRecord>,
    /// Levels without any root on the scan.
    pub absent: Vec<u32>,
    pub warnings: Vec<String>,
}

impl SolveReport {
    pub fn at_level(&self, j: u32) -> impl Iterator<Item = &SolutionRecord> {
        self.records.iter().filter(move |r| r.j == j)
    }
}

fn scan(problem: &Problem, grid: &[ShotParam]) -> Result<Vec<ScanNode>> {
    grid.par_iter()
        .map(|&at| {
            Ok(ScanNode {
                at,
                theta_end: problem.shot_at(at)?.theta_end(),
            })
        })
        .collect()
}

/// A located root: either a node hit within tolerance or a bracket.
#[derive(Debug, Clone, Copy)]
enum Root {
    Node(ShotParam),
    Bracket(ShotParam, ShotParam),
}

fn roots_at_level(scan: &[ScanNode], target: f64, tie: f64) -> Vec<Root> {
    let g: Vec<f64> = scan.iter().map(|n| n.theta_end - target).collect();
    let mut roots = vec![];
    for i in 0..scan.len() {
        if g[i].abs() <= tie {
            roots.push(Root::Node(scan[i].at));
            continue;
        }
        if i + 1 < scan.len() && g[i + 1].abs() > tie && (g[i] > 0.0) != (g[i + 1] > 0.0) {
            roots.push(Root::Bracket(scan[i].at, scan[i + 1].at));
        }
    }
    roots
}

/// Bisection in whichever coordinate is exact on the bracket, geometric while
/// the bracket spans more than a factor 4; stops at relative width 1e-12.
fn bisect(problem: &Problem, lo: ShotParam, hi: ShotParam, target: f64) -> Result<ShotParam> {
    let in_u0 = lo.upper() && hi.upper();
    let (make, mut a, mut b): (fn(f64) -> ShotParam, f64, f64) = if in_u0 {
        (ShotParam::from_u0, hi.u0, lo.u0)
    } else {
        (ShotParam::from_d, lo.d, hi.d)
    };
    let g_a = problem.shot_at(make(a))?.theta_end() - target;
    for _ in 0..400 {
        if b - a <= 1e-12 * b {
            break;
        }
        let mid = if b > 4.0 * a { (a * b).sqrt() } else { 0.5 * (a + b) };
        let g = problem.shot_at(make(mid))?.theta_end() - target;
        if g == 0.0 {
            return Ok(make(mid));
        }
        if (g > 0.0) == (g_a > 0.0) {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(make(0.5 * (a + b)))
}

fn make_record(problem: &Problem, at: ShotParam, j: u32, label: BranchLabel) -> Result<SolutionRecord> {
    let profile = problem.shot_at(at)?;
    let end = profile.len() - 1;
    let boundary_residual = profile.u_prime(end).abs();
    let equation_residual = equation_residual(&profile, problem.nl.as_ref());
    let min_u = profile.min_u();
    Ok(SolutionRecord {
        d: at.d,
        u0: at.u0,
        j,
        label,
        theta_end: profile.theta_end(),
        boundary_residual,
        equation_residual,
        min_u,
        positive: min_u > 0.0,
        profile,
    })
}

/// All roots of `θ_d(R₂) = (j+1)π_p` for `1 ≤ j ≤ j_max` visible on the scan.
pub fn find_solutions(problem: &Problem, j_max: u32, spec: &ScanSpec) -> Result<SolveReport> {
    if j_max < 1 {
        return Err(Error::Domain("j_max must be at least 1".into()));
    }
    if spec.points < 64 {
        return Err(Error::Domain(format!("scan needs at least 64 points, got {}", spec.points)));
    }
    let regime = classify_c1(problem.nl.as_ref())?;
    let d_min = match spec.d_min {
        Some(d) if d > 0.0 && d < 0.5 => d,
        Some(d) => return Err(Error::Domain(format!("d_min must lie in (0, 0.5), got {d}"))),
        None => choose_d_min(problem, regime, j_max)?,
    };
    let u0_min = match spec.u0_min {
        Some(u) if u > 0.0 && u < 0.5 => u,
        Some(u) => return Err(Error::Domain(format!("u0_min must lie in (0, 0.5), got {u}"))),
        None => choose_u0_min(problem)?,
    };
    let pi_p = problem.pi_p();
    let tie = 10.0 * problem.settings.tol_rel * pi_p;
    let mut warnings = vec![];

    let mut points = spec.points;
    let mut doublings = 0;
    let (table, levels) = loop {
        let grid = scan_grid(d_min, u0_min, points, &spec.hints);
        let table = scan(problem, &grid)?;
        let levels: Vec<Vec<Root>> = (1..=j_max)
            .map(|j| roots_at_level(&table, (j + 1) as f64 * pi_p, tie))
            .collect();
        let crowded = levels.iter().any(|l| l.len() > 2);
        if !crowded || doublings >= spec.max_doublings {
            break (table, levels);
        }
        doublings += 1;
        points *= 2;
        log::info!("more than two roots on one level; rescanning with {points} points");
    };

    let mut absent = vec![];
    let mut jobs = vec![];
    for (idx, roots) in levels.iter().enumerate() {
        let j = idx as u32 + 1;
        if roots.is_empty() {
            absent.push(j);
            continue;
        }
        if roots.len() > 2 {
            warnings.push(format!(
                "level j = {j} has {} roots; all are reported without interpretation",
                roots.len()
            ));
        }
        for (i, root) in roots.iter().enumerate() {
            let label = match roots.len() {
                1 => BranchLabel::Unique,
                2 if i == 0 => BranchLabel::Minus,
                2 => BranchLabel::Plus,
                _ => BranchLabel::Extra(i as u32 + 1),
            };
            jobs.push((j, label, *root));
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }

    let mut records = jobs
        .par_iter()
        .map(|&(j, label, root)| {
            let target = (j + 1) as f64 * pi_p;
            let at = match root {
                Root::Node(at) => at,
                Root::Bracket(lo, hi) => bisect(problem, lo, hi, target)?,
            };
            make_record(problem, at, j, label)
        })
        .collect::<Result<Vec<_>>>()?;
    records.sort_by(|a, b| a.j.cmp(&b.j).then(a.param().cmp(&b.param())));
    for r in records.iter().filter(|r| !r.positive) {
        log::warn!("solution j = {} at d = {:e} is not positive (min u = {:e})", r.j, r.d, r.min_u);
    }

    Ok(SolveReport {
        regime,
        d_min,
        u0_min,
        scan: table,
        records,
        absent,
        warnings,
    })
}
