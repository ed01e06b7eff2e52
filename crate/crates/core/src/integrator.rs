//! Shots of the radial system.
//!
//! The state is `(w, v, θ)` with `w = u - 1`, `v = r^{N-1} φ_p(u')` and the
//! polar-like angle θ around the equilibrium `(1, 0)`:
//!
//! ```text
//! w' = φ_{p'}(v / r^{N-1})
//! v' = -r^{N-1} f̂(1 + w)
//! θ' = r^{N-1} [(p-1)|u'|^p + w f̂(1 + w)] / ρ²,   ρ² = |w|^p + (p-1)|v|^{p'}
//! ```
//!
//! Working with `w` instead of `u` keeps shots with `d` far below machine
//! epsilon meaningful. Symmetrically, shots with `d > 1/2` carry `u` itself so
//! that starting values `u(R₁)` far below machine epsilon stay meaningful.

use crate::error::{Error, Result};
use crate::model::{f_hat, f_hat_shifted, F_hat, F_hat_shifted, Nonlinearity, RadialDomain};
use crate::ode::{self, DenseStep, Options, System};
use crate::ptrig::{abs_pow, phi, PContext};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub tol_rel: f64,
    pub tol_abs: f64,
    /// Singular-start offset, as a fraction of `R₂`; only used for balls with `N ≥ 2`.
    pub r_start_eps: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tol_rel: 1e-10,
            tol_abs: 1e-12,
            r_start_eps: 1e-6,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if !ok(self.tol_rel) || !ok(self.tol_abs) {
            return Err(Error::Domain(format!(
                "tolerances must be positive, got tol_rel = {}, tol_abs = {}",
                self.tol_rel, self.tol_abs
            )));
        }
        if !(ok(self.r_start_eps) && self.r_start_eps < 1.0) {
            return Err(Error::Domain(format!(
                "r_start_eps must lie in (0, 1), got {}",
                self.r_start_eps
            )));
        }
        Ok(())
    }
}

/// One shot: `u(R₁) = 1 - d`, `v(R₁) = 0`.
///
/// Both `d` and `u0 = 1 - d` are kept; the smaller of the two is the exact
/// one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotSpec {
    pub d: f64,
    pub u0: f64,
    pub settings: SolverSettings,
}

impl ShotSpec {
    pub fn new(d: f64) -> Self {
        ShotSpec::with_settings(d, SolverSettings::default())
    }

    pub fn with_settings(d: f64, settings: SolverSettings) -> Self {
        ShotSpec {
            d,
            u0: 1.0 - d,
            settings,
        }
    }

    /// Shot given by its starting value `u(R₁) = u0`.
    pub fn from_u0(u0: f64, settings: SolverSettings) -> Self {
        ShotSpec {
            d: 1.0 - u0,
            u0,
            settings,
        }
    }

    /// Whether the shot is integrated in `u` rather than in `u - 1`.
    pub fn absolute(&self) -> bool {
        self.d > 0.5
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.d) {
            return Err(Error::Domain(format!("shooting parameter d must lie in [0, 1], got {}", self.d)));
        }
        if !(0.0..=1.0).contains(&self.u0) || (self.d + self.u0 - 1.0).abs() > 1e-15 {
            return Err(Error::Domain(format!(
                "inconsistent shot: d = {}, u(R1) = {}",
                self.d, self.u0
            )));
        }
        self.settings.validate()
    }
}

/// A shot sampled on the accepted steps of the adaptive integrator, with dense
/// output in between.
#[derive(Debug, Clone)]
pub struct PhasePath {
    pub d: f64,
    pub u0: f64,
    pub p: f64,
    pub n: u32,
    pub pi_p: f64,
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    /// `u - 1`, carried separately for tiny amplitudes.
    pub w: Vec<f64>,
    pub v: Vec<f64>,
    pub theta: Vec<f64>,
    pub rho2: Vec<f64>,
    /// Energy `|u'|^p / p' + F̂(u)`.
    pub h: Vec<f64>,
    absolute: bool,
    dense: Vec<DenseStep<3>>,
}

/// State of a path at one radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathState {
    pub r: f64,
    pub u: f64,
    pub w: f64,
    pub v: f64,
    pub theta: f64,
}

impl PhasePath {
    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn r_start(&self) -> f64 {
        self.r[0]
    }

    pub fn r_end(&self) -> f64 {
        *self.r.last().unwrap()
    }

    /// Start of the integrated span (after the singular-start gap, if any).
    pub fn dense_start(&self) -> f64 {
        self.dense.first().map_or(self.r_start(), |s| s.t0)
    }

    pub fn theta_end(&self) -> f64 {
        *self.theta.last().unwrap()
    }

    /// `u'` at sample `i`.
    pub fn u_prime(&self, i: usize) -> f64 {
        u_prime(self.p, self.n, self.r[i], self.v[i])
    }

    pub fn max_abs_u_prime(&self) -> f64 {
        (0..self.len()).map(|i| self.u_prime(i).abs()).fold(0.0, f64::max)
    }

    pub fn min_u(&self) -> f64 {
        self.u.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_u(&self) -> f64 {
        self.u.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Dense evaluation at `r` (clamped to the path span).
    pub fn state_at(&self, r: f64) -> PathState {
        let r = r.clamp(self.r_start(), self.r_end());
        let from_dense = !self.dense.is_empty() && r >= self.dense[0].t0;
        let y = if from_dense {
            let idx = self.dense.partition_point(|s| s.t1() < r);
            let step = &self.dense[idx.min(self.dense.len() - 1)];
            step.eval(r.clamp(step.t0, step.t1()))
        } else {
            // constant paths, or the singular-start gap [0, r₀] of a ball
            let i = self.r.partition_point(|&x| x <= r).clamp(1, self.len().max(2) - 1);
            let first = if self.absolute { &self.u } else { &self.w };
            if self.len() < 2 {
                [first[0], self.v[0], self.theta[0]]
            } else {
                let (r0, r1) = (self.r[i - 1], self.r[i]);
                let t = if r1 > r0 { (r - r0) / (r1 - r0) } else { 0.0 };
                let lerp = |a: &[f64]| a[i - 1] + t * (a[i] - a[i - 1]);
                [lerp(first), lerp(&self.v), lerp(&self.theta)]
            }
        };
        let (u, w) = if self.absolute { (y[0], y[0] - 1.0) } else { (1.0 + y[0], y[0]) };
        PathState {
            r,
            u,
            w,
            v: y[1],
            theta: y[2],
        }
    }

    /// `f̂(u)` at a state of this path, evaluated in the path's own variable.
    pub fn source(&self, nl: &dyn Nonlinearity, st: &PathState) -> f64 {
        if self.absolute {
            f_hat(nl, st.u)
        } else {
            f_hat_shifted(nl, st.w)
        }
    }

    /// Largest `ρ` over the samples.
    pub fn sup_rho(&self) -> f64 {
        self.rho2.iter().copied().fold(0.0, f64::max).sqrt()
    }
}

fn u_prime(p: f64, n: u32, r: f64, v: f64) -> f64 {
    let p_conj = p / (p - 1.0);
    if n == 1 {
        phi(p_conj, v)
    } else if r == 0.0 {
        0.0
    } else {
        phi(p_conj, v / r.powi(n as i32 - 1))
    }
}

/// `ρ² = |w|^p + (p-1)|v|^{p'}`.
pub fn rho_squared(p: f64, w: f64, v: f64) -> f64 {
    abs_pow(w, p) + (p - 1.0) * abs_pow(v, p / (p - 1.0))
}

struct RadialSystem<'a> {
    nl: &'a dyn Nonlinearity,
    /// First component is `u` instead of `u - 1`.
    absolute: bool,
    p: f64,
    p_conj: f64,
    n: u32,
    /// Per-step cap on Δθ; active for p > 2.
    angle_cap: Option<f64>,
}

impl System<3> for RadialSystem<'_> {
    fn rhs(&self, r: f64, y: &[f64; 3]) -> [f64; 3] {
        let [x, v, _] = *y;
        let (w, f) = if self.absolute {
            (x - 1.0, f_hat(self.nl, x))
        } else {
            (x, f_hat_shifted(self.nl, x))
        };
        let rn1 = if self.n == 1 { 1.0 } else { r.powi(self.n as i32 - 1) };
        let scaled = v / rn1;
        let du = phi(self.p_conj, scaled);
        let dv = -rn1 * f;
        let rho2 = abs_pow(w, self.p) + (self.p - 1.0) * abs_pow(v, self.p_conj);
        let dtheta = if rho2 > 0.0 {
            rn1 * ((self.p - 1.0) * abs_pow(scaled, self.p_conj) + w * f) / rho2
        } else {
            0.0
        };
        [du, dv, dtheta]
    }

    fn max_step(&self, _r: f64, _y: &[f64; 3], dy: &[f64; 3]) -> f64 {
        match self.angle_cap {
            Some(cap) if dy[2] > 0.0 => cap / dy[2],
            _ => f64::INFINITY,
        }
    }
}

/// Asymptotic state at `r₀ = r_start_eps · R₂` for a ball with `N ≥ 2`:
/// `u(r₀) = u₀ + (1/p') φ_{p'}(-f̂(u₀)/N) r₀^{p'}`, `v(r₀) = -(r₀^N/N) f̂(u₀)`.
/// Returns `r₀` and the state `[w, v, θ]`, or `[u, v, θ]` for shots with `d > 1/2`.
pub fn singular_start(
    ctx: &PContext,
    nl: &dyn Nonlinearity,
    dom: &RadialDomain,
    spec: &ShotSpec,
) -> Result<(f64, [f64; 3])> {
    if !dom.is_ball() || dom.n < 2 {
        return Err(Error::Domain(
            "singular start applies only to balls with N >= 2".into(),
        ));
    }
    let r0 = (spec.settings.r_start_eps * dom.r2).max(1e-8 * dom.r2);
    let (x0, f0) = if spec.absolute() {
        (spec.u0, f_hat(nl, spec.u0))
    } else {
        (-spec.d, f_hat_shifted(nl, -spec.d))
    };
    let (x, v) = singular_state(ctx.p(), dom.n, r0, x0, f0);
    let w = if spec.absolute() { x - 1.0 } else { x };
    let theta = if w == 0.0 && v == 0.0 {
        ctx.pi_p()
    } else {
        ctx.angle(w, -v)
    };
    Ok((r0, [x, v, theta]))
}

/// Leading-order expansion of `(x, v)` at small `r0` for a regular start at
/// `r = 0` with `x(0) = x0` (either `u` or `u - 1`) and source value `f0`.
pub(crate) fn singular_state(p: f64, n: u32, r0: f64, x0: f64, f0: f64) -> (f64, f64) {
    let p_conj = p / (p - 1.0);
    let nf = n as f64;
    let x = x0 + phi(p_conj, -f0 / nf) * r0.powf(p_conj) / p_conj;
    let v = -(r0.powi(n as i32) / nf) * f0;
    (x, v)
}

/// Integrates one shot over `[R₁, R₂]`.
pub fn integrate_shot(
    ctx: &PContext,
    nl: &dyn Nonlinearity,
    dom: &RadialDomain,
    spec: &ShotSpec,
) -> Result<PhasePath> {
    spec.validate()?;
    if (ctx.p() - nl.p()).abs() > 1e-12 {
        return Err(Error::Domain(format!(
            "exponent mismatch: context p = {}, nonlinearity p = {}",
            ctx.p(),
            nl.p()
        )));
    }
    let p = ctx.p();
    let d = spec.d;
    let absolute = spec.absolute();
    let pi_p = ctx.pi_p();
    let mut path = PhasePath {
        d,
        u0: spec.u0,
        p,
        n: dom.n,
        pi_p,
        r: vec![dom.r1],
        u: vec![spec.u0],
        w: vec![-d],
        v: vec![0.0],
        theta: vec![pi_p],
        rho2: vec![],
        h: vec![],
        absolute,
        dense: vec![],
    };

    if d == 0.0 {
        // the equilibrium u ≡ 1
        path.r.push(dom.r2);
        path.u.push(1.0);
        path.w.push(0.0);
        path.v.push(0.0);
        path.theta.push(pi_p);
        fill_diagnostics(&mut path, nl);
        return Ok(path);
    }

    let push = |path: &mut PhasePath, r: f64, y: &[f64; 3]| {
        path.r.push(r);
        let (u, w) = if absolute { (y[0], y[0] - 1.0) } else { (1.0 + y[0], y[0]) };
        path.u.push(u);
        path.w.push(w);
        path.v.push(y[1]);
        path.theta.push(y[2]);
    };
    let (r_from, y0) = if dom.is_ball() && dom.n >= 2 {
        let (r0, y0) = singular_start(ctx, nl, dom, spec)?;
        push(&mut path, r0, &y0);
        (r0, y0)
    } else {
        (dom.r1, [if absolute { spec.u0 } else { -d }, 0.0, pi_p])
    };

    let sys = RadialSystem {
        nl,
        absolute,
        p,
        p_conj: ctx.p_conj(),
        n: dom.n,
        angle_cap: (p > 2.0).then_some(pi_p / 64.0),
    };
    let s = &spec.settings;
    // tolerances follow the amplitude of the exact variable
    let amplitude = if absolute { spec.u0.min(d) } else { d };
    let scale_w = amplitude.max(1e-300);
    let scale_v = amplitude.powf(p - 1.0).max(1e-300);
    let mut opts = Options::new(s.tol_rel, s.tol_abs);
    opts.atol = [s.tol_abs * scale_w, s.tol_abs * scale_v, s.tol_abs];
    let traj = ode::integrate(&sys, r_from, y0, dom.r2, &opts)?;

    for (&r, y) in traj.t.iter().zip(&traj.y).skip(1) {
        push(&mut path, r, y);
    }
    path.dense = traj.steps;
    fill_diagnostics(&mut path, nl);

    if d < 1.0 {
        if let Some(i) = path.rho2.iter().position(|&x| !(x > 0.0)) {
            return Err(Error::InvariantBreach(format!(
                "rho^2 vanished at r = {} for d = {d}",
                path.r[i]
            )));
        }
    }
    let scale = 1.0 + path.h.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let rise = energy_profile(&path);
    if rise > 1e-6 * scale {
        return Err(Error::InvariantBreach(format!(
            "energy increased by {rise:.3e} along the shot d = {d}"
        )));
    }
    Ok(path)
}

fn fill_diagnostics(path: &mut PhasePath, nl: &dyn Nonlinearity) {
    let p = path.p;
    let p_conj = p / (p - 1.0);
    path.rho2 = path
        .w
        .iter()
        .zip(&path.v)
        .map(|(&w, &v)| rho_squared(p, w, v))
        .collect();
    path.h = (0..path.len())
        .map(|i| {
            let du = path.u_prime(i);
            let primitive = if path.absolute {
                F_hat(nl, path.u[i])
            } else {
                F_hat_shifted(nl, path.w[i])
            };
            abs_pow(du, p) / p_conj + primitive
        })
        .collect();
}

/// Largest increase of the energy between consecutive samples.
pub fn energy_profile(path: &PhasePath) -> f64 {
    path.h
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Prototype;

    fn setup(p: f64, q: f64) -> (PContext, Prototype) {
        (PContext::new(p).unwrap(), Prototype::new(p, q).unwrap())
    }

    #[test]
    fn equilibrium_shot() {
        let (ctx, nl) = setup(2.0, 4.0);
        let dom = RadialDomain::new(0.0, 1.0, 3).unwrap();
        let path = integrate_shot(&ctx, &nl, &dom, &ShotSpec::new(0.0)).unwrap();
        assert!(path.u.iter().all(|&u| u == 1.0));
        assert!(path.v.iter().all(|&v| v == 0.0));
        assert!(path.theta.iter().all(|&t| t == ctx.pi_p()));
        assert_eq!(energy_profile(&path), 0.0);
        assert!(path.h.iter().all(|&h| h == 0.0));
    }

    #[test]
    fn zero_shot_stays_at_zero() {
        for (p, n) in [(2.0, 1), (1.5, 2), (3.0, 3)] {
            let (ctx, nl) = setup(p, p + 2.0);
            let dom = RadialDomain::new(0.0, 1.0, n).unwrap();
            let path = integrate_shot(&ctx, &nl, &dom, &ShotSpec::new(1.0)).unwrap();
            assert!(path.u.iter().all(|&u| u.abs() < 1e-15), "p={p}");
            assert!(path.v.iter().all(|&v| v.abs() < 1e-15));
            assert!((path.theta_end() - ctx.pi_p()).abs() < 1e-12);
        }
    }

    #[test]
    fn small_amplitude_matches_linearization() {
        let (ctx, nl) = setup(2.0, 14.0);
        let dom = RadialDomain::new(0.0, 1.0, 1).unwrap();
        let d = 1e-3;
        let path = integrate_shot(&ctx, &nl, &dom, &ShotSpec::new(d)).unwrap();
        let k = 12f64.sqrt();
        let worst = path
            .r
            .iter()
            .zip(&path.u)
            .map(|(&r, &u)| (u - (1.0 - d * (k * r).cos())).abs())
            .fold(0.0, f64::max);
        // O(d²) deviation with a moderate constant
        assert!(worst < 20.0 * d * d, "worst {worst}");
        assert!(worst > 0.0);
    }

    #[test]
    fn singular_start_examples() {
        let (ctx, nl) = setup(2.0, 4.0);
        let dom = RadialDomain::new(0.0, 1.0, 3).unwrap();
        let (r0, y) = singular_start(&ctx, &nl, &dom, &ShotSpec::new(0.0)).unwrap();
        assert_eq!((y[0], y[1]), (0.0, 0.0));
        assert_eq!(y[2], ctx.pi_p());
        assert_eq!(r0, 1e-6);

        let (r0, y) = singular_start(&ctx, &nl, &dom, &ShotSpec::new(0.5)).unwrap();
        // f̂(0.5) = -0.5 + 0.125, v = -r0³ f̂ / 3
        assert!((y[1] - 0.125 * r0.powi(3)).abs() < 1e-15 * r0.powi(3));
        assert!(y[2] >= ctx.pi_p() && y[2] < ctx.pi_p() + 1e-12);

        let flat = RadialDomain::new(0.0, 1.0, 1).unwrap();
        assert!(singular_start(&ctx, &nl, &flat, &ShotSpec::new(0.5)).is_err());
        let annulus = RadialDomain::new(0.5, 1.0, 3).unwrap();
        assert!(singular_start(&ctx, &nl, &annulus, &ShotSpec::new(0.5)).is_err());
    }

    #[test]
    fn singular_expansion_error_order() {
        // error of the expansion after integrating to a fixed radius should drop
        // like r0^{2p'} when r0 is halved
        let (ctx, nl) = setup(2.0, 4.0);
        let dom = RadialDomain::new(0.0, 1.0, 3).unwrap();
        let mut spec = ShotSpec::new(0.5);
        spec.settings.tol_rel = 1e-13;
        spec.settings.tol_abs = 1e-15;
        let reference = {
            let mut s = spec;
            s.settings.r_start_eps = 1e-5;
            integrate_shot(&ctx, &nl, &dom, &s).unwrap().state_at(0.5).w
        };
        let errs: Vec<f64> = [0.08, 0.04, 0.02]
            .iter()
            .map(|&eps| {
                let mut s = spec;
                s.settings.r_start_eps = eps;
                (integrate_shot(&ctx, &nl, &dom, &s).unwrap().state_at(0.5).w - reference).abs()
            })
            .collect();
        for pair in errs.windows(2) {
            let order = (pair[0] / pair[1]).log2();
            assert!(order > 3.0, "observed order {order} from {errs:?}");
        }
    }

    #[test]
    fn energy_constant_in_one_dimension() {
        let (ctx, nl) = setup(2.0, 4.0);
        let dom = RadialDomain::new(0.0, 3.0, 1).unwrap();
        let path = integrate_shot(&ctx, &nl, &dom, &ShotSpec::new(0.5)).unwrap();
        let h0 = path.h[0];
        let scale = 1.0 + path.h.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for &h in &path.h {
            assert!((h - h0).abs() <= 1e-8 * scale);
        }
        assert!(energy_profile(&path) <= 1e-8 * scale);
    }

    #[test]
    fn energy_decreases_in_three_dimensions() {
        let (ctx, nl) = setup(2.0, 4.0);
        let dom = RadialDomain::new(0.0, 1.0, 3).unwrap();
        let path = integrate_shot(&ctx, &nl, &dom, &ShotSpec::new(0.5)).unwrap();
        let scale = 1.0 + path.h.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(energy_profile(&path) <= 1e-8 * scale);
        assert!(path.h[0] - *path.h.last().unwrap() > 1e-4);
    }

    #[test]
    fn angle_is_consistent_with_state() {
        for (p, n, r1) in [(2.0, 1, 0.0), (1.5, 2, 0.0), (3.0, 3, 0.0), (2.5, 2, 0.5)] {
            let (ctx, nl) = setup(p, p + 2.5);
            let dom = RadialDomain::new(r1, r1 + 2.0, n).unwrap();
            let path = integrate_shot(&ctx, &nl, &dom, &ShotSpec::new(0.4)).unwrap();
            for i in 0..path.len() {
                let rho = path.rho2[i].sqrt();
                let (c, s) = ctx.cos_sin_p(path.theta[i]);
                let w = rho.powf(2.0 / p) * c;
                let v = -rho.powf(2.0 / ctx.p_conj()) * s;
                let scale = rho.powf(2.0 / p).max(rho.powf(2.0 / ctx.p_conj()));
                assert!(
                    (w - path.w[i]).abs() <= 1e-7 * scale && (v - path.v[i]).abs() <= 1e-7 * scale,
                    "p={p} N={n} r={} w {w} vs {} v {v} vs {}",
                    path.r[i],
                    path.w[i],
                    path.v[i]
                );
            }
            for pair in path.theta.windows(2) {
                assert!(pair[1] >= pair[0] - 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let (ctx, nl) = setup(2.0, 4.0);
        let dom = RadialDomain::new(0.0, 1.0, 1).unwrap();
        assert!(integrate_shot(&ctx, &nl, &dom, &ShotSpec::new(1.5)).is_err());
        assert!(integrate_shot(&ctx, &nl, &dom, &ShotSpec::new(-0.1)).is_err());
        let mut bad = ShotSpec::new(0.5);
        bad.settings.tol_rel = 0.0;
        assert!(integrate_shot(&ctx, &nl, &dom, &bad).is_err());
        let other = Prototype::new(3.0, 4.0).unwrap();
        assert!(integrate_shot(&ctx, &other, &dom, &ShotSpec::new(0.5)).is_err());
    }

    #[test]
    fn tiny_starting_values_are_resolved() {
        let (ctx, nl) = setup(1.5, 3.0);
        let dom = RadialDomain::new(0.0, 40.0, 1).unwrap();
        let settings = SolverSettings::default();
        let near = integrate_shot(&ctx, &nl, &dom, &ShotSpec::from_u0(1e-30, settings)).unwrap();
        assert_eq!(near.d, 1.0);
        assert_eq!(near.u[0], 1e-30);
        assert!(near.theta_end() < 2.0 * ctx.pi_p());
        // d = 1 in both parametrizations
        let zero = integrate_shot(&ctx, &nl, &dom, &ShotSpec::from_u0(0.0, settings)).unwrap();
        assert_eq!(zero.theta_end(), ctx.pi_p());
    }

    #[test]
    fn parametrizations_agree_across_one_half() {
        for n in [1, 3] {
            let (ctx, nl) = setup(2.0, 6.0);
            let dom = RadialDomain::new(0.0, 2.0, n).unwrap();
            let below = integrate_shot(&ctx, &nl, &dom, &ShotSpec::new(0.5)).unwrap();
            let above = integrate_shot(&ctx, &nl, &dom, &ShotSpec::new(0.5 + 1e-14)).unwrap();
            assert!((below.theta_end() - above.theta_end()).abs() < 1e-8);
            let (a, b) = (below.state_at(1.3), above.state_at(1.3));
            assert!((a.u - b.u).abs() < 1e-8 && (a.v - b.v).abs() < 1e-8);
        }
        assert!(ShotSpec { d: 0.3, u0: 0.3, settings: SolverSettings::default() }.validate().is_err());
    }

    #[test]
    fn tiny_amplitudes_are_resolved() {
        let (ctx, nl) = setup(1.97, 50.0);
        let dom = RadialDomain::new(0.0, 1.0, 1).unwrap();
        let path = integrate_shot(&ctx, &nl, &dom, &ShotSpec::new(1e-30)).unwrap();
        assert!(path.rho2.iter().all(|&x| x > 0.0));
        assert!(path.theta_end() > ctx.pi_p());
        assert!(path.w.iter().all(|w| w.abs() < 1e-28));
    }
}
