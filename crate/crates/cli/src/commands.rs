use std::path::{Path, PathBuf};

use rayon::prelude::*;

use pneumann::eigen::radial_eigenvalue_with;
use pneumann::eigen::EigenSettings;
use pneumann::integrator::ShotSpec;
use pneumann::io::{num, profile_csv, Csv, VERSION};
use pneumann::model::check_hypotheses;
use pneumann::phase::{classify, find_solutions, Problem};
use pneumann::ptrig::PContext;
use pneumann::sweep::{branches_csv, emit_diagram, sweep_branches, DiagramFormat, SweepBase, SweepParam};
use pneumann::{Error, Result};

use crate::config::{NonlinearityChoice, RunConfig};
use crate::{Cli, Command};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_SOLVER: u8 = 3;
pub const EXIT_NO_SOLUTION: u8 = 4;

fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Config {
                line: 0,
                key: "config".into(),
                message: format!("cannot read {}: {e}", p.display()),
            })?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    cfg.apply_overrides(overrides)?;
    Ok(cfg)
}

/// Header comment lines: version and command with the full config echo, then
/// the provenance of the structural constants.
fn header(command: &str, cfg: &RunConfig, problem: Option<&Problem>) -> Result<Vec<String>> {
    let mut lines = vec![format!("pneumann {VERSION} {command}; {}", cfg.echo())];
    if let Some(pb) = problem {
        let h = check_hypotheses(pb.nl.as_ref())?;
        let c0 = match h.c0 {
            Some(c) => format!("{}{}", c.value, if c.estimated { " (estimated)" } else { "" }),
            None => "unavailable".into(),
        };
        lines.push(format!(
            "C0 = {c0}; {}{}",
            h.c1.value,
            if h.c1.estimated { " (estimated)" } else { "" }
        ));
    }
    Ok(lines)
}

fn with_comments(mut csv: Csv, comments: &[String]) -> Csv {
    let mut all = comments.to_vec();
    all.append(&mut csv.comments);
    csv.comments = all;
    csv
}

pub fn run(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Ptrig { p, theta, table, out } => ptrig(*p, *theta, *table, out.as_deref()),
        Command::Shoot { config, d, u0, out } => {
            let cfg = load_config(config.as_deref(), &cli.set)?;
            shoot(&cfg, *d, *u0, out.as_deref())
        }
        Command::Solve {
            config,
            jmax,
            scan,
            out,
            require_solution,
        } => {
            let mut cfg = load_config(config.as_deref(), &cli.set)?;
            if let Some(n) = scan {
                cfg.scan_points = *n;
            }
            if let Some(dir) = out {
                cfg.output_dir = dir.clone();
            }
            cfg.validate()?;
            solve(&cfg, *jmax, *require_solution)
        }
        Command::Eigen { config, k, kmax, out } => {
            let cfg = load_config(config.as_deref(), &cli.set)?;
            eigen(&cfg, *k, kmax.unwrap_or(*k), out.as_deref())
        }
        Command::Sweep {
            config,
            param,
            from,
            to,
            step,
            jmax,
            out,
            svg,
            require_solution,
        } => {
            let mut cfg = load_config(config.as_deref(), &cli.set)?;
            if let Some(dir) = out {
                cfg.output_dir = dir.clone();
            }
            if *svg && !cfg.formats.iter().any(|f| f == "svg") {
                cfg.formats.push("svg".into());
            }
            let param: SweepParam = param.parse()?;
            sweep(&cfg, param, (*from, *to, *step), *jmax, *require_solution)
        }
    }
}

fn ptrig(p: f64, theta: Option<f64>, table: Option<usize>, out: Option<&Path>) -> Result<u8> {
    let ctx = PContext::new(p)?;
    let row = |t: f64| {
        let (c, s) = ctx.cos_sin_p(t);
        let (cp, sp) = ctx.energy_parts(t);
        let residual = cp / p + sp / ctx.p_conj() - 1.0 / p;
        vec![num(t), num(c), num(s), num(residual)]
    };
    let columns = ["theta", "cos_p", "sin_p", "identity_residual"];
    if let Some(t) = theta {
        let mut csv = Csv::new(&columns);
        csv.push(row(t));
        print!("{}", csv.render());
    }
    if let Some(n) = table {
        if n == 0 {
            return Err(Error::Domain("--table needs at least one interval".into()));
        }
        let out = out.expect("clap enforces --out with --table");
        let mut csv = Csv::new(&columns).comment(format!("pneumann {VERSION} ptrig; p = {p}; table = {n}"));
        let period = 2.0 * ctx.pi_p();
        for i in 0..=n {
            csv.push(row(period * i as f64 / n as f64));
        }
        csv.write(out)?;
    }
    if theta.is_none() && table.is_none() {
        println!("p = {p}\np' = {}\npi_p = {}", num(ctx.p_conj()), num(ctx.pi_p()));
    }
    Ok(EXIT_OK)
}

fn shoot(cfg: &RunConfig, d: Option<f64>, u0: Option<f64>, out: Option<&Path>) -> Result<u8> {
    let pb = cfg.problem()?;
    let spec = match (d, u0) {
        (Some(d), _) => ShotSpec::with_settings(d, pb.settings),
        (None, Some(u0)) => ShotSpec::from_u0(u0, pb.settings),
        (None, None) => unreachable!("clap requires --d or --u0"),
    };
    spec.validate()?;
    let path = pneumann::integrator::integrate_shot(&pb.ctx, pb.nl.as_ref(), &pb.dom, &spec)?;
    let out = out.map_or_else(|| cfg.output_dir.join("shot.csv"), Path::to_path_buf);
    let mut comments = header("shoot", cfg, Some(&pb))?;
    comments.push(format!("d = {}; u(R1) = {}", num(spec.d), num(spec.u0)));
    with_comments(profile_csv(&path), &comments).write(&out)?;
    let c = classify(&path);
    println!(
        "d = {}\ntheta(R2) = {}\nwinding = {}\nzeros = {}\nmin u = {}\nmax u = {}",
        num(path.d),
        num(path.theta_end()),
        num((path.theta_end() - pb.pi_p()) / pb.pi_p()),
        c.zeros,
        num(path.min_u()),
        num(path.max_u())
    );
    Ok(EXIT_OK)
}

fn solve(cfg: &RunConfig, j_max: u32, require: bool) -> Result<u8> {
    let pb = cfg.problem()?;
    let report = find_solutions(&pb, j_max, &cfg.scan())?;
    let comments = header("solve", cfg, Some(&pb))?;
    let dir = &cfg.output_dir;

    let mut summary = Csv::new(&["j", "branch", "d", "u0", "uR2", "boundary_residual", "min_u"]);
    for r in &report.records {
        summary.push(vec![
            r.j.to_string(),
            r.label.to_string(),
            num(r.d),
            num(r.u0),
            num(r.u_end()),
            num(r.boundary_residual),
            num(r.min_u),
        ]);
        let mut lines = comments.clone();
        lines.push(format!(
            "solution j = {}; branch = {}; d = {}; u(R1) = {}",
            r.j,
            r.label,
            num(r.d),
            num(r.u0)
        ));
        with_comments(profile_csv(&r.profile), &lines).write(&dir.join(format!("solution_j{}_{}.csv", r.j, r.label)))?;
    }
    with_comments(summary, &comments).write(&dir.join("solutions.csv"))?;

    println!("regime {}; scanned d in [{:e}, 1 - {:e}]", report.regime, report.d_min, report.u0_min);
    for r in &report.records {
        println!(
            "j = {} {:<7} d = {:.12e}  u(R1) = {:.12e}  |u'(R2)| = {:.2e}  residual = {:.2e}  min u = {:.6}",
            r.j, r.label, r.d, r.u0, r.boundary_residual, r.equation_residual, r.min_u
        );
    }
    for j in &report.absent {
        println!("j = {j}: no solution on the scan");
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if require && report.records.is_empty() {
        eprintln!("no solution found");
        return Ok(EXIT_NO_SOLUTION);
    }
    Ok(EXIT_OK)
}

fn eigen(cfg: &RunConfig, k: u32, kmax: u32, out: Option<&Path>) -> Result<u8> {
    if k < 1 || kmax < k {
        return Err(Error::Domain(format!("need 1 <= k <= kmax, got k = {k}, kmax = {kmax}")));
    }
    let ctx = cfg.context()?;
    let dom = cfg.domain()?;
    let settings = EigenSettings {
        r_start_eps: cfg.r_start_eps,
        ..EigenSettings::default()
    };
    let results = (k..=kmax)
        .into_par_iter()
        .map(|k| radial_eigenvalue_with(&ctx, &dom, k, &settings))
        .collect::<Result<Vec<_>>>()?;
    let mut csv = Csv::new(&["k", "lambda", "theta_end", "residual"]);
    for r in &results {
        csv.push(vec![r.k.to_string(), num(r.lambda), num(r.theta_end), num(r.residual)]);
        println!("k = {}  lambda = {:.12e}  zeros = {}  residual = {:.2e}", r.k, r.lambda, r.eigen_zeros, r.residual);
    }
    let out: PathBuf = out.map_or_else(|| cfg.output_dir.join("eigen.csv"), Path::to_path_buf);
    with_comments(csv, &header("eigen", cfg, None)?).write(&out)?;
    Ok(EXIT_OK)
}

fn sweep_values(from: f64, to: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && from.is_finite() && to.is_finite() && to >= from) {
        return Err(Error::Domain(format!("need from <= to and step > 0, got {from}..{to} step {step}")));
    }
    let n = ((to - from) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| from + i as f64 * step).collect())
}

fn sweep(cfg: &RunConfig, param: SweepParam, range: (f64, f64, f64), j_max: u32, require: bool) -> Result<u8> {
    if cfg.nonlinearity != NonlinearityChoice::Prototype {
        return Err(Error::Config {
            line: 0,
            key: "nonlinearity".into(),
            message: "sweeps run over the prototype family only".into(),
        });
    }
    let q = match (param, cfg.q) {
        (SweepParam::Q, q) => q.unwrap_or(f64::NAN),
        (_, Some(q)) => q,
        (_, None) => {
            return Err(Error::Config {
                line: 0,
                key: "q".into(),
                message: "the prototype nonlinearity needs q".into(),
            })
        }
    };
    let values = sweep_values(range.0, range.1, range.2)?;
    let base = SweepBase {
        p: cfg.p,
        q,
        dom: cfg.domain()?,
        settings: cfg.settings(),
        scan: cfg.scan(),
    };
    let report = sweep_branches(&base, param, &values, j_max)?;
    let mut comments = header("sweep", cfg, None)?;
    comments.push(format!(
        "sweep {param} from {} to {} step {}; jmax = {j_max}",
        range.0, range.1, range.2
    ));
    for o in &report.onsets {
        let line = format!("onset j = {} at {param} = {:.6} +/- {:.1e}", o.j, o.value, o.uncertainty);
        println!("{line}");
        comments.push(line);
    }
    for b in &report.breaks {
        println!("branch break j = {} {} between {param} = {} and {}", b.j, b.label, b.from, b.to);
    }
    for f in &report.failures {
        eprintln!("warning: {param} = {} skipped: {}", f.value, f.message);
    }
    println!("{} branch points over {} values", report.points.len(), values.len());
    if report.points.is_empty() {
        eprintln!("no branch points found");
        return Ok(if require { EXIT_NO_SOLUTION } else { EXIT_OK });
    }
    let dir = &cfg.output_dir;
    for f in &cfg.formats {
        match f.as_str() {
            "csv" => with_comments(branches_csv(&report.points)?, &comments).write(&dir.join("branches.csv"))?,
            "svg" => emit_diagram(&report.points, DiagramFormat::Svg, &dir.join("diagram.svg"), &[])?,
            _ => unreachable!("formats are validated"),
        }
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_grid_includes_both_ends() {
        let v = sweep_values(10.0, 14.0, 0.05).unwrap();
        assert_eq!(v.len(), 81);
        assert!((v[80] - 14.0).abs() < 1e-9);
        assert_eq!(sweep_values(1.0, 1.0, 0.5).unwrap(), vec![1.0]);
        assert!(sweep_values(2.0, 1.0, 0.5).is_err());
        assert!(sweep_values(1.0, 2.0, 0.0).is_err());
    }
}
