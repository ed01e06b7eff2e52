//! One-parameter sweeps over the prototype family and branch diagrams.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::integrator::SolverSettings;
use crate::io::{self, num, parse_num, Csv};
use crate::model::{Nonlinearity, Prototype, RadialDomain};
use crate::phase::{find_solutions, BranchLabel, Problem, ScanSpec, ShotParam, SolveReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SweepParam {
    Q,
    P,
    R2,
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParam::Q => "q",
            SweepParam::P => "p",
            SweepParam::R2 => "R2",
        })
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "q" => Ok(SweepParam::Q),
            "p" => Ok(SweepParam::P),
            "R2" | "r2" => Ok(SweepParam::R2),
            _ => Err(Error::Domain(format!("unknown sweep parameter `{s}` (expected q, p or R2)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchPoint {
    pub param_name: SweepParam,
    pub param_value: f64,
    pub j: u32,
    pub label: BranchLabel,
    pub d: f64,
    pub u0: f64,
    pub u_r2: f64,
    /// `|u'(R₂)|` of the solution.
    pub residual: f64,
}

/// The fixed part of a prototype sweep.
#[derive(Debug, Clone)]
pub struct SweepBase {
    pub p: f64,
    pub q: f64,
    pub dom: RadialDomain,
    pub settings: SolverSettings,
    pub scan: ScanSpec,
}

impl SweepBase {
    pub fn problem_at(&self, param: SweepParam, value: f64) -> Result<Problem> {
        let (mut p, mut q, mut dom) = (self.p, self.q, self.dom);
        match param {
            SweepParam::Q => q = value,
            SweepParam::P => p = value,
            SweepParam::R2 => dom = RadialDomain::new(dom.r1, value, dom.n)?,
        }
        let nl: Arc<dyn Nonlinearity> = Arc::new(Prototype::new(p, q)?);
        Problem::new(nl, dom, self.settings)
    }
}

/// First parameter value at which a level acquires a root, refined by
/// bisection in the parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Onset {
    pub j: u32,
    pub value: f64,
    /// Half-width of the final parameter bracket.
    pub uncertainty: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchBreak {
    pub j: u32,
    pub label: BranchLabel,
    pub from: f64,
    pub to: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointFailure {
    pub value: f64,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct SweepReport {
    pub points: Vec<BranchPoint>,
    pub onsets: Vec<Onset>,
    pub breaks: Vec<BranchBreak>,
    pub failures: Vec<PointFailure>,
}

const ONSET_BISECTIONS: u32 = 4;

fn hints_from(report: &SolveReport) -> Vec<(ShotParam, ShotParam)> {
    report
        .records
        .iter()
        .map(|r| {
            let at = r.param();
            if at.d > 0.5 {
                (ShotParam::from_u0((4.0 * at.u0).min(0.5)), ShotParam::from_u0(0.25 * at.u0))
            } else {
                (ShotParam::from_d(0.25 * at.d), ShotParam::from_d((4.0 * at.d).min(0.5)))
            }
        })
        .collect()
}

fn points_of(report: &SolveReport, param: SweepParam, value: f64) -> Vec<BranchPoint> {
    report
        .records
        .iter()
        .map(|r| BranchPoint {
            param_name: param,
            param_value: value,
            j: r.j,
            label: r.label,
            d: r.d,
            u0: r.u0,
            u_r2: r.u_end(),
            residual: r.boundary_residual,
        })
        .collect()
}

/// Log-spacing of the scan grid around a parameter of the shooting map.
fn local_resolution(report: &SolveReport, at: ShotParam, points: usize) -> f64 {
    let half = (points / 2).max(1) as f64;
    if at.d > 0.5 {
        at.u0 * (0.5 / report.u0_min).ln() / half
    } else {
        at.d * (0.5 / report.d_min).ln() / half
    }
}

/// Solves the prototype problem at each value in turn, seeding each scan
/// with the roots of the previous value. Failing values are recorded and
/// skipped.
pub fn sweep_branches(base: &SweepBase, param: SweepParam, values: &[f64], j_max: u32) -> Result<SweepReport> {
    if values.windows(2).any(|w| !(w[0] < w[1]) && !(w[0] > w[1])) {
        return Err(Error::Domain("sweep values must be strictly ordered".into()));
    }
    let mut report = SweepReport::default();
    let mut prev: Option<(f64, SolveReport)> = None;
    let mut seen: Vec<bool> = vec![false; j_max as usize];
    let mut resolution: BTreeMap<(u32, BranchLabel), (f64, ShotParam, f64)> = BTreeMap::new();

    for &value in values {
        let mut scan = base.scan.clone();
        if let Some((_, ref rep)) = prev {
            scan.hints = hints_from(rep);
        }
        let solved = base
            .problem_at(param, value)
            .and_then(|pb| find_solutions(&pb, j_max, &scan));
        let rep = match solved {
            Ok(rep) => rep,
            Err(e) => {
                log::warn!("sweep: {param} = {value} failed: {e}");
                report.failures.push(PointFailure {
                    value,
                    message: e.to_string(),
                });
                continue;
            }
        };

        for j in 1..=j_max {
            let idx = j as usize - 1;
            let has = rep.at_level(j).next().is_some();
            if has && !seen[idx] {
                seen[idx] = true;
                if let Some((pv, _)) = prev {
                    report.onsets.push(refine_onset(base, param, &scan, j, pv, value));
                }
            }
        }

        for r in &rep.records {
            let key = (r.j, r.label);
            let res = local_resolution(&rep, r.param(), base.scan.points);
            if let Some(&(pv, pat, pres)) = resolution.get(&key) {
                let jump = if pat.d > 0.5 && r.d > 0.5 {
                    (pat.u0 - r.u0).abs()
                } else {
                    (pat.d - r.d).abs()
                };
                if jump > 10.0 * res.max(pres) {
                    report.breaks.push(BranchBreak {
                        j: r.j,
                        label: r.label,
                        from: pv,
                        to: value,
                    });
                }
            }
            resolution.insert(key, (value, r.param(), res));
        }
        report.points.extend(points_of(&rep, param, value));
        prev = Some((value, rep));
    }
    for o in &report.onsets {
        log::info!("onset of level {} at {param} = {:.6} ± {:.1e}", o.j, o.value, o.uncertainty);
    }
    Ok(report)
}

fn refine_onset(base: &SweepBase, param: SweepParam, scan: &ScanSpec, j: u32, below: f64, above: f64) -> Onset {
    let (mut lo, mut hi) = (below, above);
    for _ in 0..ONSET_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let found = base
            .problem_at(param, mid)
            .and_then(|pb| find_solutions(&pb, j, scan))
            .map(|rep| rep.at_level(j).next().is_some());
        match found {
            Ok(true) => hi = mid,
            Ok(false) => lo = mid,
            Err(e) => {
                log::warn!("onset refinement at {param} = {mid} failed: {e}");
                break;
            }
        }
    }
    Onset {
        j,
        value: 0.5 * (lo + hi),
        uncertainty: 0.5 * (hi - lo).abs(),
    }
}

const BRANCH_COLUMNS: [&str; 7] = ["param", "j", "label", "d", "u0", "uR2", "residual"];

pub fn branches_csv(points: &[BranchPoint]) -> Result<Csv> {
    let first = points.first().ok_or(Error::EmptySelection)?;
    let mut csv = Csv::new(&BRANCH_COLUMNS).comment(format!("param: {}", first.param_name));
    for b in points {
        csv.push(vec![
            num(b.param_value),
            b.j.to_string(),
            b.label.to_string(),
            num(b.d),
            num(b.u0),
            num(b.u_r2),
            num(b.residual),
        ]);
    }
    Ok(csv)
}

pub fn parse_branches(text: &str) -> Result<Vec<BranchPoint>> {
    let csv = Csv::parse(text)?;
    let param_name = csv
        .comments
        .iter()
        .find_map(|c| c.strip_prefix("param:"))
        .map(|s| s.trim().parse())
        .transpose()?
        .unwrap_or(SweepParam::Q);
    let col: Vec<usize> = BRANCH_COLUMNS
        .iter()
        .map(|c| csv.column(c))
        .collect::<Result<_>>()?;
    csv.rows
        .iter()
        .map(|row| {
            Ok(BranchPoint {
                param_name,
                param_value: parse_num(&row[col[0]])?,
                j: row[col[1]]
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad level `{}`", row[col[1]])))?,
                label: row[col[2]].parse()?,
                d: parse_num(&row[col[3]])?,
                u0: parse_num(&row[col[4]])?,
                u_r2: parse_num(&row[col[5]])?,
                residual: parse_num(&row[col[6]])?,
            })
        })
        .collect()
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// `u(R₁)` against the parameter, one polyline per `(j, label)`, with the
/// constant solution `u ≡ 1` as a dashed reference line.
pub fn branches_svg(points: &[BranchPoint]) -> Result<String> {
    let first = points.first().ok_or(Error::EmptySelection)?;
    let (w, h, m) = (640.0, 420.0, 50.0);
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (0.0f64, 1.1f64);
    for b in points {
        x0 = x0.min(b.param_value);
        x1 = x1.max(b.param_value);
        y0 = y0.min(b.u0);
        y1 = y1.max(b.u0);
    }
    if x1 <= x0 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);

    let mut branches: BTreeMap<(u32, BranchLabel), Vec<(f64, f64)>> = BTreeMap::new();
    for b in points {
        branches.entry((b.j, b.label)).or_default().push((b.param_value, b.u0));
    }

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    );
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += &format!(
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
        b = h - m,
        r = w - m
    );
    for i in 0..=4 {
        let xv = x0 + (x1 - x0) * i as f64 / 4.0;
        let yv = y0 + (y1 - y0) * i as f64 / 4.0;
        svg += &format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"middle\">{xv:.3}</text>\n",
            sx(xv),
            h - m + 16.0
        );
        svg += &format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"end\">{yv:.3}</text>\n",
            m - 6.0,
            sy(yv) + 4.0
        );
    }
    svg += &format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n",
        w / 2.0,
        h - 10.0,
        first.param_name
    );
    svg += &format!(
        "<text x=\"14\" y=\"{:.2}\" font-size=\"13\" transform=\"rotate(-90 14 {:.2})\" text-anchor=\"middle\">u(R1)</text>\n",
        h / 2.0,
        h / 2.0
    );
    svg += &format!(
        "<line class=\"reference\" x1=\"{m}\" y1=\"{y:.2}\" x2=\"{r}\" y2=\"{y:.2}\" stroke=\"gray\" stroke-dasharray=\"6 4\"/>\n",
        y = sy(1.0),
        r = w - m
    );
    for ((j, label), pts) in &branches {
        let color = PALETTE[(*j as usize - 1) % PALETTE.len()];
        let dash = match label {
            BranchLabel::Plus => " stroke-dasharray=\"3 2\"",
            _ => "",
        };
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        svg += &format!(
            "<polyline class=\"branch\" data-j=\"{j}\" data-label=\"{label}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"{dash} points=\"{}\"/>\n",
            coords.join(" ")
        );
        for c in &coords {
            let (x, y) = c.split_once(',').unwrap();
            svg += &format!("<circle cx=\"{x}\" cy=\"{y}\" r=\"1.8\" fill=\"{color}\"/>\n");
        }
    }
    svg += "</svg>\n";
    Ok(svg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagramFormat {
    Csv,
    Svg,
}

impl FromStr for DiagramFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(DiagramFormat::Csv),
            "svg" => Ok(DiagramFormat::Svg),
            _ => Err(Error::Domain(format!("unknown output format `{s}`"))),
        }
    }
}

/// Writes the branch data; `comments` go into the CSV header.
pub fn emit_diagram(points: &[BranchPoint], format: DiagramFormat, path: &Path, comments: &[String]) -> Result<()> {
    match format {
        DiagramFormat::Csv => {
            let mut csv = branches_csv(points)?;
            let mut all = comments.to_vec();
            all.append(&mut csv.comments);
            csv.comments = all;
            csv.write(path)
        }
        DiagramFormat::Svg => io::write_atomic(path, branches_svg(points)?.as_bytes()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sample() -> Vec<BranchPoint> {
        let mk = |v: f64, j: u32, label, d: f64| BranchPoint {
            param_name: SweepParam::Q,
            param_value: v,
            j,
            label,
            d,
            u0: 1.0 - d,
            u_r2: 1.0 + d,
            residual: 1e-12 * d,
        };
        vec![
            mk(12.0, 1, BranchLabel::Unique, 0.1),
            mk(12.5, 1, BranchLabel::Unique, 0.2),
            mk(42.0, 2, BranchLabel::Minus, 1e-30),
            mk(42.0, 2, BranchLabel::Plus, 1.0 / 3.0),
        ]
    }

    #[test]
    fn csv_round_trip() {
        let pts = sample();
        let text = branches_csv(&pts).unwrap().render();
        assert_eq!(parse_branches(&text).unwrap(), pts);
        assert!(branches_csv(&[]).is_err());
        assert!(matches!(branches_svg(&[]), Err(Error::EmptySelection)));
    }

    #[test]
    fn svg_has_one_polyline_per_branch() {
        let svg = branches_svg(&sample()).unwrap();
        assert_eq!(svg.matches("class=\"branch\"").count(), 3);
        assert_eq!(svg.matches("class=\"reference\"").count(), 1);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn emits_files() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("b.csv");
        emit_diagram(&sample(), DiagramFormat::Csv, &csv, &["hello".into()]).unwrap();
        let text = std::fs::read_to_string(&csv).unwrap();
        assert!(text.starts_with("# hello\n# param: q\n"));
        let svg = dir.path().join("b.svg");
        emit_diagram(&sample(), DiagramFormat::Svg, &svg, &[]).unwrap();
        assert!(std::fs::read_to_string(&svg).unwrap().contains("polyline"));
    }

    #[test]
    fn parameters_parse() {
        assert_eq!("R2".parse::<SweepParam>().unwrap(), SweepParam::R2);
        assert!("x".parse::<SweepParam>().is_err());
        assert_eq!("svg".parse::<DiagramFormat>().unwrap(), DiagramFormat::Svg);
    }

    fn base(p: f64, q: f64) -> SweepBase {
        SweepBase {
            p,
            q,
            dom: RadialDomain::new(0.0, 1.0, 1).unwrap(),
            settings: SolverSettings::default(),
            scan: ScanSpec::default(),
        }
    }

    #[test]
    fn onset_near_the_first_eigenvalue() {
        let values: Vec<f64> = (0..9).map(|i| 11.0 + 0.25 * i as f64).collect();
        let rep = sweep_branches(&base(2.0, 0.0), SweepParam::Q, &values, 1).unwrap();
        assert_eq!(rep.onsets.len(), 1);
        let o = &rep.onsets[0];
        assert!((o.value - (2.0 + PI * PI)).abs() < 0.1, "onset {}", o.value);
        assert!(o.uncertainty <= 0.25 / 32.0 + 1e-12);
        assert!(rep.failures.is_empty() && rep.breaks.is_empty());
        assert!(rep.points.iter().all(|b| b.j == 1 && b.u0 < 1.0 && b.param_value > 2.0 + PI * PI));
    }

    #[test]
    fn failures_are_skipped() {
        // q <= p is rejected by the model, the rest still runs
        let rep = sweep_branches(&base(2.0, 0.0), SweepParam::Q, &[1.5, 13.0], 1).unwrap();
        assert_eq!(rep.failures.len(), 1);
        assert_eq!(rep.points.len(), 1);
        assert!(sweep_branches(&base(2.0, 0.0), SweepParam::Q, &[13.0, 13.0], 1).is_err());
    }

    #[test]
    fn forward_and_backward_sweeps_agree() {
        let values = [20.0, 24.0, 28.0];
        let b = base(2.0, 0.0);
        let fwd = sweep_branches(&b, SweepParam::Q, &values, 1).unwrap();
        let rev: Vec<f64> = values.iter().rev().copied().collect();
        let bwd = sweep_branches(&b, SweepParam::Q, &rev, 1).unwrap();
        assert_eq!(fwd.points.len(), bwd.points.len());
        for p in &fwd.points {
            let q = bwd
                .points
                .iter()
                .find(|q| q.param_value == p.param_value && q.label == p.label)
                .unwrap();
            assert!((p.d - q.d).abs() <= 1e-8);
        }
    }
}
