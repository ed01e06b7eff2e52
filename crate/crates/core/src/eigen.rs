//! Radial Neumann eigenvalues via the Prüfer-type angle
//!
//! ```text
//! ϑ' = (p-1) r^{(N-1)(1-p')} |sin_p ϑ|^{p'} + λ r^{N-1} |cos_p ϑ|^p,   ϑ(R₁) = π_p
//! ```
//!
//! λ is an eigenvalue with index k exactly when ϑ_λ(R₂) = kπ_p.

use crate::error::{Error, Result};
use crate::integrator::singular_state;
use crate::model::RadialDomain;
use crate::ode::{self, Options, System, Trajectory};
use crate::ptrig::{abs_pow, phi, PContext};

/// Tolerances for the angle integration; tighter than for shots since the
/// spectrum is read off a single scalar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenSettings {
    pub tol_rel: f64,
    pub tol_abs: f64,
    pub r_start_eps: f64,
    /// Relative width at which the λ bisection stops.
    pub lambda_rel_tol: f64,
}

impl Default for EigenSettings {
    fn default() -> Self {
        EigenSettings {
            tol_rel: 1e-12,
            tol_abs: 1e-14,
            r_start_eps: 1e-6,
            lambda_rel_tol: 1e-10,
        }
    }
}

const LAMBDA_CEILING: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    pub k: u32,
    pub lambda: f64,
    pub theta_end: f64,
    /// Sign changes of the reconstructed eigenfunction on (R₁, R₂).
    pub eigen_zeros: u32,
    /// `|φ'(R₂)| / max|φ'|` of the reconstructed eigenfunction.
    pub residual: f64,
}

struct AngleSystem<'a> {
    ctx: &'a PContext,
    n: u32,
    lambda: f64,
}

impl System<1> for AngleSystem<'_> {
    // the state is η = ϑ - π_p
    fn rhs(&self, r: f64, y: &[f64; 1]) -> [f64; 1] {
        let (c, s) = self.ctx.energy_parts(self.ctx.pi_p() + y[0]);
        let p = self.ctx.p();
        if self.n == 1 {
            return [(p - 1.0) * s + self.lambda * c];
        }
        let rn1 = r.powi(self.n as i32 - 1);
        let weight = rn1.powf(1.0 - self.ctx.p_conj());
        [(p - 1.0) * weight * s + self.lambda * rn1 * c]
    }

    fn max_step(&self, _r: f64, _y: &[f64; 1], dy: &[f64; 1]) -> f64 {
        if dy[0] > 0.0 {
            self.ctx.pi_p() / (16.0 * dy[0])
        } else {
            f64::INFINITY
        }
    }
}

/// ϑ_λ on `[R₁, R₂]` with dense output.
#[derive(Debug, Clone)]
pub struct AnglePath {
    pub lambda: f64,
    pi_p: f64,
    traj: Trajectory<1>,
}

impl AnglePath {
    pub fn at(&self, r: f64) -> f64 {
        if r <= self.traj.t[0] {
            // inside the singular-start gap the angle is π_p to leading order
            return self.pi_p + if r < self.traj.t[0] { 0.0 } else { self.traj.y[0][0] };
        }
        self.pi_p + self.traj.eval(r)[0]
    }

    pub fn end(&self) -> f64 {
        self.pi_p + self.traj.last()[0]
    }

    pub fn radii(&self) -> &[f64] {
        &self.traj.t
    }
}

fn start_point(ctx: &PContext, dom: &RadialDomain, lambda: f64, eps: f64) -> (f64, f64) {
    if !(dom.is_ball() && dom.n >= 2) {
        return (dom.r1, 0.0);
    }
    let r0 = (eps * dom.r2).max(1e-8 * dom.r2);
    if lambda == 0.0 {
        return (r0, 0.0);
    }
    // eigenfunction normalized to -1 at the centre, so that ϑ starts at π_p
    let (x, v) = singular_state(ctx.p(), dom.n, r0, -1.0, -lambda);
    (r0, ctx.angle(x, -v) - ctx.pi_p())
}

pub fn eigen_angle_path(
    ctx: &PContext,
    dom: &RadialDomain,
    lambda: f64,
    settings: &EigenSettings,
) -> Result<AnglePath> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!("eigenvalue parameter must be >= 0, got {lambda}")));
    }
    let (r0, eta0) = start_point(ctx, dom, lambda, settings.r_start_eps);
    let sys = AngleSystem {
        ctx,
        n: dom.n,
        lambda,
    };
    let opts = Options::new(settings.tol_rel, settings.tol_abs);
    let traj = if lambda == 0.0 {
        // ϑ₀ ≡ π_p: sin_p vanishes and the λ term is switched off
        Trajectory {
            t: vec![r0, dom.r2],
            y: vec![[0.0], [0.0]],
            steps: vec![],
        }
    } else {
        ode::integrate(&sys, r0, [eta0], dom.r2, &opts)?
    };
    Ok(AnglePath {
        lambda,
        pi_p: ctx.pi_p(),
        traj,
    })
}

/// ϑ_λ(R₂) with default settings.
pub fn eigen_angle(ctx: &PContext, dom: &RadialDomain, lambda: f64) -> Result<f64> {
    Ok(eigen_angle_path(ctx, dom, lambda, &EigenSettings::default())?.end())
}

/// λ_k^rad, found by doubling from `1/(R₂-R₁)^p` and bisecting ϑ_λ(R₂) = kπ_p.
pub fn radial_eigenvalue(ctx: &PContext, dom: &RadialDomain, k: u32) -> Result<EigenResult> {
    radial_eigenvalue_with(ctx, dom, k, &EigenSettings::default())
}

pub fn radial_eigenvalue_with(
    ctx: &PContext,
    dom: &RadialDomain,
    k: u32,
    settings: &EigenSettings,
) -> Result<EigenResult> {
    if k == 0 {
        return Err(Error::Domain("eigenvalue index starts at 1".into()));
    }
    if k == 1 {
        return Ok(EigenResult {
            k,
            lambda: 0.0,
            theta_end: ctx.pi_p(),
            eigen_zeros: 0,
            residual: 0.0,
        });
    }
    let target = k as f64 * ctx.pi_p();
    let theta = |lambda: f64| -> Result<f64> {
        Ok(eigen_angle_path(ctx, dom, lambda, settings)?.end())
    };
    let mut lo = 0.0;
    let mut hi = 1.0 / dom.length().powf(ctx.p());
    let mut theta_hi = theta(hi)?;
    while theta_hi <= target {
        lo = hi;
        hi *= 2.0;
        if hi > LAMBDA_CEILING {
            return Err(Error::BracketOverflow {
                k: k as usize,
                lambda: lo,
                theta: theta_hi,
                target,
            });
        }
        theta_hi = theta(hi)?;
    }
    while hi - lo > settings.lambda_rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        if theta(mid)? > target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let lambda = 0.5 * (lo + hi);
    let theta_end = theta(lambda)?;
    let ef = eigenfunction(ctx, dom, lambda, settings)?;
    log::debug!("lambda_{k} = {lambda:.12e}, theta(R2) - k pi_p = {:.3e}", theta_end - target);
    Ok(EigenResult {
        k,
        lambda,
        theta_end,
        eigen_zeros: ef.sign_changes(),
        residual: ef.boundary_residual(),
    })
}

/// Solution of `(r^{N-1} φ_p(φ'))' + λ r^{N-1} φ_p(φ) = 0` with `φ(R₁) = 1`,
/// `φ'(R₁) = 0`, sampled on the accepted steps.
#[derive(Debug, Clone)]
pub struct Eigenfunction {
    pub r: Vec<f64>,
    pub phi: Vec<f64>,
    pub dphi: Vec<f64>,
}

impl Eigenfunction {
    pub fn sign_changes(&self) -> u32 {
        let mut count = 0;
        let mut last = 0.0f64;
        for &x in &self.phi {
            if x != 0.0 {
                if last != 0.0 && x.signum() != last.signum() {
                    count += 1;
                }
                last = x;
            }
        }
        count
    }

    pub fn boundary_residual(&self) -> f64 {
        let max = self.dphi.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if max == 0.0 {
            0.0
        } else {
            self.dphi.last().unwrap().abs() / max
        }
    }
}

struct EigenODE {
    p: f64,
    p_conj: f64,
    n: u32,
    lambda: f64,
}

impl System<2> for EigenODE {
    fn rhs(&self, r: f64, y: &[f64; 2]) -> [f64; 2] {
        let rn1 = if self.n == 1 { 1.0 } else { r.powi(self.n as i32 - 1) };
        [
            phi(self.p_conj, y[1] / rn1),
            -rn1 * self.lambda * phi(self.p, y[0]),
        ]
    }
}

pub fn eigenfunction(
    ctx: &PContext,
    dom: &RadialDomain,
    lambda: f64,
    settings: &EigenSettings,
) -> Result<Eigenfunction> {
    let p = ctx.p();
    let (r0, y0) = if dom.is_ball() && dom.n >= 2 {
        let r0 = (settings.r_start_eps * dom.r2).max(1e-8 * dom.r2);
        let (x, v) = singular_state(p, dom.n, r0, 1.0, lambda);
        (r0, [x, v])
    } else {
        (dom.r1, [1.0, 0.0])
    };
    let sys = EigenODE {
        p,
        p_conj: ctx.p_conj(),
        n: dom.n,
        lambda,
    };
    let traj = ode::integrate(&sys, r0, y0, dom.r2, &Options::new(settings.tol_rel, settings.tol_abs))?;
    let dphi = traj
        .t
        .iter()
        .zip(&traj.y)
        .map(|(&r, y)| {
            let rn1 = if dom.n == 1 { 1.0 } else { r.powi(dom.n as i32 - 1) };
            phi(ctx.p_conj(), y[1] / rn1)
        })
        .collect();
    Ok(Eigenfunction {
        phi: traj.y.iter().map(|y| y[0]).collect(),
        r: traj.t,
        dphi,
    })
}

/// `λ_k` for N = 1 on an interval of length `len`: `((k-1) π_p / len)^p`.
pub fn interval_eigenvalue(ctx: &PContext, k: u32, len: f64) -> f64 {
    abs_pow((k as f64 - 1.0) * ctx.pi_p() / len, ctx.p())
}
