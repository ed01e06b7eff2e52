//! `key = value` run configuration.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use pneumann::integrator::SolverSettings;
use pneumann::model::{plugin, Nonlinearity, Prototype, RadialDomain};
use pneumann::phase::{Problem, ScanSpec};
use pneumann::ptrig::{PContext, DEFAULT_TABLE_NODES};
use pneumann::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum NonlinearityChoice {
    Prototype,
    Plugin(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub p: f64,
    pub q: Option<f64>,
    pub r1: f64,
    pub r2: f64,
    pub n: u32,
    pub nonlinearity: NonlinearityChoice,
    pub tol_rel: f64,
    pub tol_abs: f64,
    pub r_start_eps: f64,
    pub scan_points: usize,
    pub d_min: Option<f64>,
    pub u0_min: Option<f64>,
    pub table_nodes: usize,
    pub output_dir: PathBuf,
    pub formats: Vec<String>,
    /// Line of each key's last assignment (0 for command-line overrides).
    lines: BTreeMap<String, usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let s = SolverSettings::default();
        RunConfig {
            p: 2.0,
            q: None,
            r1: 0.0,
            r2: 1.0,
            n: 1,
            nonlinearity: NonlinearityChoice::Prototype,
            tol_rel: s.tol_rel,
            tol_abs: s.tol_abs,
            r_start_eps: s.r_start_eps,
            scan_points: ScanSpec::default().points,
            d_min: None,
            u0_min: None,
            table_nodes: DEFAULT_TABLE_NODES,
            output_dir: PathBuf::from("out"),
            formats: vec!["csv".into()],
            lines: BTreeMap::new(),
        }
    }
}

const KEYS: [&str; 15] = [
    "p",
    "q",
    "R1",
    "R2",
    "N",
    "nonlinearity",
    "tol_rel",
    "tol_abs",
    "r_start_eps",
    "scan_points",
    "d_min",
    "u0_min",
    "table_nodes",
    "output_dir",
    "formats",
];

fn config_error(line: usize, key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        key: key.to_string(),
        message: message.into(),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap().trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| config_error(line, content, "expected `key = value`"))?;
            let key = key.trim();
            if let Some(first) = seen.insert(key.to_string(), line) {
                return Err(config_error(line, key, format!("duplicate key (first set on line {first})")));
            }
            cfg.set(key, value.trim(), line)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one assignment; `line` is 0 for command-line overrides.
    pub fn set(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
        let real = || -> Result<f64> {
            value
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| config_error(line, key, format!("`{value}` is not a finite number")))
        };
        let int = || -> Result<usize> {
            value
                .parse::<usize>()
                .map_err(|_| config_error(line, key, format!("`{value}` is not a non-negative integer")))
        };
        match key {
            "p" => self.p = real()?,
            "q" => self.q = Some(real()?),
            "R1" => self.r1 = real()?,
            "R2" => self.r2 = real()?,
            "N" => {
                self.n = u32::try_from(int()?).map_err(|_| config_error(line, key, "dimension too large"))?
            }
            "nonlinearity" => {
                self.nonlinearity = if value == "prototype" {
                    NonlinearityChoice::Prototype
                } else if let Some(name) = value.strip_prefix("plugin:") {
                    NonlinearityChoice::Plugin(name.trim().to_string())
                } else {
                    return Err(config_error(line, key, "expected `prototype` or `plugin:<name>`"));
                }
            }
            "tol_rel" => self.tol_rel = real()?,
            "tol_abs" => self.tol_abs = real()?,
            "r_start_eps" => self.r_start_eps = real()?,
            "scan_points" => self.scan_points = int()?,
            "d_min" => self.d_min = Some(real()?),
            "u0_min" => self.u0_min = Some(real()?),
            "table_nodes" => self.table_nodes = int()?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "formats" => {
                self.formats = value
                    .split(',')
                    .map(|f| f.trim().to_string())
                    .filter(|f| !f.is_empty())
                    .collect()
            }
            _ => {
                return Err(config_error(
                    line,
                    key,
                    format!("unknown key (expected one of {})", KEYS.join(", ")),
                ))
            }
        }
        self.lines.insert(key.to_string(), line);
        Ok(())
    }

    /// Applies `key=value` overrides from the command line and revalidates.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<()> {
        for item in overrides {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| config_error(0, item, "override must look like key=value"))?;
            self.set(key.trim(), value.trim(), 0)?;
        }
        self.validate()
    }

    fn line_of(&self, key: &str) -> usize {
        self.lines.get(key).copied().unwrap_or(0)
    }

    fn fail(&self, key: &str, message: impl Into<String>) -> Error {
        config_error(self.line_of(key), key, message)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0) {
            return Err(self.fail("p", format!("need p > 1, got {}", self.p)));
        }
        if let Some(q) = self.q {
            if self.nonlinearity == NonlinearityChoice::Prototype && !(q > self.p) {
                return Err(self.fail("q", format!("need q > p, got q = {q}, p = {}", self.p)));
            }
        }
        if !(self.r1 >= 0.0) {
            return Err(self.fail("R1", format!("need R1 >= 0, got {}", self.r1)));
        }
        if !(self.r2 > self.r1) {
            let key = if self.line_of("R2") >= self.line_of("R1") { "R2" } else { "R1" };
            return Err(self.fail(key, format!("need R2 > R1, got R1 = {}, R2 = {}", self.r1, self.r2)));
        }
        if self.n < 1 {
            return Err(self.fail("N", "need N >= 1"));
        }
        for (key, v) in [("tol_rel", self.tol_rel), ("tol_abs", self.tol_abs)] {
            if !(v > 0.0) {
                return Err(self.fail(key, format!("tolerance must be positive, got {v}")));
            }
        }
        if !(self.r_start_eps > 0.0 && self.r_start_eps < 1.0) {
            return Err(self.fail("r_start_eps", "must lie in (0, 1)"));
        }
        if self.scan_points < 64 {
            return Err(self.fail("scan_points", format!("need at least 64, got {}", self.scan_points)));
        }
        for (key, v) in [("d_min", self.d_min), ("u0_min", self.u0_min)] {
            if let Some(v) = v {
                if !(v > 0.0 && v < 0.5) {
                    return Err(self.fail(key, format!("must lie in (0, 0.5), got {v}")));
                }
            }
        }
        if self.table_nodes < 32 {
            return Err(self.fail("table_nodes", "need at least 32 nodes"));
        }
        if let Some(f) = self.formats.iter().find(|f| *f != "csv" && *f != "svg") {
            return Err(self.fail("formats", format!("unknown format `{f}` (csv, svg)")));
        }
        if let NonlinearityChoice::Plugin(name) = &self.nonlinearity {
            plugin(name, self.p).map_err(|e| self.fail("nonlinearity", e.to_string()))?;
        }
        Ok(())
    }

    pub fn settings(&self) -> SolverSettings {
        SolverSettings {
            tol_rel: self.tol_rel,
            tol_abs: self.tol_abs,
            r_start_eps: self.r_start_eps,
        }
    }

    pub fn scan(&self) -> ScanSpec {
        ScanSpec {
            points: self.scan_points,
            d_min: self.d_min,
            u0_min: self.u0_min,
            ..ScanSpec::default()
        }
    }

    pub fn domain(&self) -> Result<RadialDomain> {
        RadialDomain::new(self.r1, self.r2, self.n)
    }

    pub fn context(&self) -> Result<PContext> {
        PContext::with_resolution(self.p, self.table_nodes)
    }

    /// The nonlinearity; `q` is only required here, since eigenvalue runs
    /// do not need it.
    pub fn nonlinearity(&self) -> Result<Arc<dyn Nonlinearity>> {
        match &self.nonlinearity {
            NonlinearityChoice::Prototype => Ok(Arc::new(Prototype::new(
                self.p,
                self.q.ok_or_else(|| self.fail("q", "the prototype nonlinearity needs q"))?,
            )?)),
            NonlinearityChoice::Plugin(name) => plugin(name, self.p),
        }
    }

    pub fn problem(&self) -> Result<Problem> {
        let mut pb = Problem::new(self.nonlinearity()?, self.domain()?, self.settings())?;
        if self.table_nodes != DEFAULT_TABLE_NODES {
            pb.ctx = self.context()?;
        }
        Ok(pb)
    }

    /// One-line echo of every setting that affects results.
    pub fn echo(&self) -> String {
        let nl = match &self.nonlinearity {
            NonlinearityChoice::Prototype => "prototype".to_string(),
            NonlinearityChoice::Plugin(n) => format!("plugin:{n}"),
        };
        let opt = |v: Option<f64>| v.map_or("auto".to_string(), |x| format!("{x:e}"));
        format!(
            "p = {}; q = {}; R1 = {}; R2 = {}; N = {}; nonlinearity = {nl}; tol_rel = {:e}; tol_abs = {:e}; \
             r_start_eps = {:e}; scan_points = {}; d_min = {}; u0_min = {}; table_nodes = {}",
            self.p,
            self.q.map_or("none".to_string(), |q| q.to_string()),
            self.r1,
            self.r2,
            self.n,
            self.tol_rel,
            self.tol_abs,
            self.r_start_eps,
            self.scan_points,
            opt(self.d_min),
            opt(self.u0_min),
            self.table_nodes
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_and_key(e: Error) -> (usize, String) {
        match e {
            Error::Config { line, key, .. } => (line, key),
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn parses_a_full_file() {
        let cfg = RunConfig::parse(
            "# problem\np = 2\nq = 50   # steep\nR1 = 0\nR2 = 1\nN = 1\n\
             nonlinearity = prototype\ntol_rel = 1e-10\nscan_points = 128\nformats = csv, svg\n",
        )
        .unwrap();
        assert_eq!(cfg.q, Some(50.0));
        assert_eq!(cfg.scan_points, 128);
        assert_eq!(cfg.formats, vec!["csv", "svg"]);
        assert!(cfg.echo().contains("q = 50"));
        let pb = cfg.problem().unwrap();
        assert_eq!(pb.dom.r2, 1.0);
    }

    #[test]
    fn diagnostics_name_line_and_key() {
        let e = RunConfig::parse("p = 2\nq = 4\nR1 = 1\nR2 = 0.5\n").unwrap_err();
        assert_eq!(line_and_key(e), (4, "R2".into()));
        let e = RunConfig::parse("p = 2\nq = 4\nbogus = 1\n").unwrap_err();
        assert_eq!(line_and_key(e), (3, "bogus".into()));
        let e = RunConfig::parse("p = 2\nq = x\n").unwrap_err();
        assert_eq!(line_and_key(e), (2, "q".into()));
        let e = RunConfig::parse("p = 2\nq = 1.5\n").unwrap_err();
        assert_eq!(line_and_key(e), (2, "q".into()));
        let e = RunConfig::parse("p = 2\np = 3\n").unwrap_err();
        assert_eq!(line_and_key(e), (2, "p".into()));
        let e = RunConfig::parse("p = 2\njust words\n").unwrap_err();
        assert_eq!(line_and_key(e).0, 2);
        let e = RunConfig::parse("p = 2\nnonlinearity = plugin:nope\n").unwrap_err();
        assert_eq!(line_and_key(e), (2, "nonlinearity".into()));
        assert!(RunConfig::parse("p = 2\nq = 4\nscan_points = 10\n").is_err());
        assert!(RunConfig::parse("p = 2\nq = 4\nformats = pdf\n").is_err());
        assert!(RunConfig::parse("p = 2\nq = 4\ntol_abs = 0\n").is_err());
        assert!(RunConfig::parse("p = 2\nq = 4\nN = 0\n").is_err());
    }

    #[test]
    fn overrides_win_and_are_validated() {
        let mut cfg = RunConfig::parse("p = 2\nq = 4\n").unwrap();
        cfg.apply_overrides(&["q=50".into(), "R2 = 2".into()]).unwrap();
        assert_eq!((cfg.q, cfg.r2), (Some(50.0), 2.0));
        let e = cfg.apply_overrides(&["R2=0".into()]).unwrap_err();
        assert_eq!(line_and_key(e), (0, "R2".into()));
        assert!(cfg.apply_overrides(&["nonsense".into()]).is_err());
    }

    #[test]
    fn plugins_do_not_need_q() {
        let cfg = RunConfig::parse("p = 2\nnonlinearity = plugin:exp\n").unwrap();
        assert_eq!(cfg.nonlinearity().unwrap().name(), "plugin:exp");
        let bare = RunConfig::parse("p = 2\n").unwrap();
        assert!(bare.problem().unwrap_err().is_config_error());
    }
}
