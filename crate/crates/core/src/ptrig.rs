//! Generalized p-trigonometric functions.
//!
//! `(cos_p, sin_p)` is the solution of `x' = -φ_{p'}(y)`, `y' = φ_p(x)`,
//! `x(0) = 1`, `y(0) = 0`. It satisfies `|x|^p/p + |y|^{p'}/p' = 1/p`, has
//! half-period `π_p`, and obeys the same parity/shift rules as cos/sin.
//!
//! Values are served from a per-exponent table over the first quarter period
//! `[0, π_p/2]` and extended to the real line by symmetry. On the quarter
//! period the flow is parametrized by whichever component is smaller
//! (`y = sin_p` up to the point where both energy terms are equal, then
//! `x = cos_p`); the other component is recovered from the conserved
//! identity, so the identity holds to rounding at every evaluation.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quad::{graded_from_zero, GaussLegendre};

/// Default number of table nodes per quarter period.
pub const DEFAULT_TABLE_NODES: usize = 4096;

/// `|s|^{p-2} s`, evaluated in log form so that `p < 2` never produces `0 * inf`.
#[inline]
pub fn phi(p: f64, s: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else if p == 2.0 {
        s
    } else {
        s.signum() * ((p - 1.0) * s.abs().ln()).exp()
    }
}

/// `|s|^e` with `0^e = 0` for `e > 0`.
#[inline]
pub(crate) fn abs_pow(s: f64, e: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        (e * s.abs().ln()).exp()
    }
}

/// Closed-form half-period `2π (p-1)^{1/p} / (p sin(π/p))`.
pub fn closed_form_pi_p(p: f64) -> f64 {
    2.0 * PI * (p - 1.0).powf(1.0 / p) / (p * (PI / p).sin())
}

/// Exponent `p` with its conjugate and the p-trigonometric tables.
#[derive(Debug, Clone)]
pub struct PContext {
    p: f64,
    p_conj: f64,
    pi_p: f64,
    table: Arc<QuarterTable>,
}

impl PContext {
    pub fn new(p: f64) -> Result<Self> {
        Self::with_resolution(p, DEFAULT_TABLE_NODES)
    }

    pub fn with_resolution(p: f64, nodes: usize) -> Result<Self> {
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::Domain(format!("exponent p must satisfy p > 1, got {p}")));
        }
        if nodes < 32 {
            return Err(Error::Domain(format!("table needs at least 32 nodes, got {nodes}")));
        }
        let p_conj = p / (p - 1.0);
        let pi_p = if p == 2.0 { PI } else { closed_form_pi_p(p) };
        let table = Arc::new(QuarterTable::build(p, p_conj, nodes));
        Ok(PContext {
            p,
            p_conj,
            pi_p,
            table,
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn p_conj(&self) -> f64 {
        self.p_conj
    }

    /// Half-period from the closed form.
    pub fn pi_p(&self) -> f64 {
        self.pi_p
    }

    /// Half-period measured on the integrated quarter-period flow, i.e. twice
    /// the first zero of `cos_p`.
    pub fn pi_p_numeric(&self) -> f64 {
        2.0 * self.table.quarter
    }

    pub fn table_nodes(&self) -> usize {
        self.table.a_nodes.len() + self.table.b_nodes.len() - 2
    }

    pub fn phi_p(&self, s: f64) -> f64 {
        phi(self.p, s)
    }

    /// `φ_p^{-1} = φ_{p'}`.
    pub fn phi_p_inv(&self, s: f64) -> f64 {
        phi(self.p_conj, s)
    }

    pub fn cos_sin_p(&self, theta: f64) -> (f64, f64) {
        let (a, sc, ss) = self.reduce(theta);
        let q = self.table.eval(a);
        (sc * q.x, ss * q.y)
    }

    pub fn cos_p(&self, theta: f64) -> f64 {
        self.cos_sin_p(theta).0
    }

    pub fn sin_p(&self, theta: f64) -> f64 {
        self.cos_sin_p(theta).1
    }

    /// `(|cos_p θ|^p, |sin_p θ|^{p'})` without extra powers.
    pub fn energy_parts(&self, theta: f64) -> (f64, f64) {
        let (a, _, _) = self.reduce(theta);
        let q = self.table.eval(a);
        (q.xp, q.yq)
    }

    /// Angle `θ ∈ [0, 2π_p)` with `x = ρ^{2/p} cos_p θ`, `y = ρ^{2/p'} sin_p θ`
    /// for `ρ² = |x|^p + (p-1)|y|^{p'}`. Returns 0 at the origin.
    pub fn angle(&self, x: f64, y: f64) -> f64 {
        let xp = abs_pow(x, self.p);
        let yq = abs_pow(y, self.p_conj);
        let rho2 = xp + (self.p - 1.0) * yq;
        if rho2 == 0.0 {
            return 0.0;
        }
        let c = (xp / rho2).min(1.0);
        let s = (yq / rho2).min(1.0 / (self.p - 1.0));
        let a = self.table.quarter_angle(c, s);
        let pi_p = self.pi_p;
        match (x >= 0.0, y >= 0.0) {
            (true, true) => a,
            (false, true) => pi_p - a,
            (false, false) => pi_p + a,
            (true, false) => {
                if a == 0.0 {
                    0.0
                } else {
                    2.0 * pi_p - a
                }
            }
        }
    }

    /// Maps θ to a quarter-period argument plus the signs of cos_p and sin_p.
    fn reduce(&self, theta: f64) -> (f64, f64, f64) {
        let pi_p = self.pi_p;
        let r = theta.rem_euclid(2.0 * pi_p);
        let half = 0.5 * pi_p;
        if r <= half {
            (r, 1.0, 1.0)
        } else if r <= pi_p {
            (pi_p - r, -1.0, 1.0)
        } else if r <= pi_p + half {
            (r - pi_p, -1.0, -1.0)
        } else {
            (2.0 * pi_p - r, 1.0, -1.0)
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct QuarterPoint {
    x: f64,
    y: f64,
    /// x^p
    xp: f64,
    /// y^{p'}
    yq: f64,
}

/// Quarter-period table.
///
/// Segment A runs from θ = 0 to the balance point, parametrized by `s = sin_p`:
/// `dθ/ds = (1 - (p-1) s^{p'})^{-1/p'}`. Segment B runs from the balance point
/// to θ = π_p/2, parametrized by `t = cos_p` and the distance `π_p/2 - θ`:
/// `d(π_p/2 - θ)/dt = ((p-1)/(1 - t^p))^{1/p}`.
#[derive(Debug)]
struct QuarterTable {
    p: f64,
    p_conj: f64,
    a_nodes: Vec<f64>,
    a_theta: Vec<f64>,
    b_nodes: Vec<f64>,
    b_dist: Vec<f64>,
    theta_split: f64,
    quarter: f64,
}

impl QuarterTable {
    fn build(p: f64, p_conj: f64, nodes: usize) -> Self {
        let s_split = (0.5 / (p - 1.0)).powf(1.0 / p_conj);
        let t_split = 0.5f64.powf(1.0 / p);

        let ga = |s: f64| (1.0 - (p - 1.0) * abs_pow(s, p_conj)).powf(-1.0 / p_conj);
        let gb = |t: f64| ((p - 1.0) / (1.0 - abs_pow(t, p))).powf(1.0 / p);

        let len_a = graded_from_zero(&ga, s_split);
        let len_b = graded_from_zero(&gb, t_split);
        let quarter = len_a + len_b;

        let n_a = ((nodes as f64 * len_a / quarter).round() as usize).clamp(16, nodes - 16);
        let n_b = nodes - n_a;

        let cumulative = |g: &dyn Fn(f64) -> f64, end: f64, n: usize| {
            let grid: Vec<f64> = (0..=n).map(|i| end * i as f64 / n as f64).collect();
            let mut acc = Vec::with_capacity(n + 1);
            acc.push(0.0);
            let mut total = 0.0;
            for w in grid.windows(2) {
                total += if w[0] == 0.0 {
                    graded_from_zero(&g, w[1])
                } else {
                    GaussLegendre::g16().integrate(w[0], w[1], g)
                };
                acc.push(total);
            }
            (grid, acc)
        };
        let (a_nodes, mut a_theta) = cumulative(&ga, s_split, n_a);
        let (b_nodes, mut b_dist) = cumulative(&gb, t_split, n_b);
        // pin the split point to the directly integrated lengths
        *a_theta.last_mut().unwrap() = len_a;
        *b_dist.last_mut().unwrap() = len_b;

        QuarterTable {
            p,
            p_conj,
            a_nodes,
            a_theta,
            b_nodes,
            b_dist,
            theta_split: len_a,
            quarter,
        }
    }

    fn ga(&self, s: f64) -> f64 {
        (1.0 - (self.p - 1.0) * abs_pow(s, self.p_conj)).powf(-1.0 / self.p_conj)
    }

    fn gb(&self, t: f64) -> f64 {
        ((self.p - 1.0) / (1.0 - abs_pow(t, self.p))).powf(1.0 / self.p)
    }

    fn point_from_s(&self, s: f64) -> QuarterPoint {
        let yq = abs_pow(s, self.p_conj);
        let xp = (1.0 - (self.p - 1.0) * yq).max(0.0);
        QuarterPoint {
            x: xp.powf(1.0 / self.p),
            y: s,
            xp,
            yq,
        }
    }

    fn point_from_t(&self, t: f64) -> QuarterPoint {
        let xp = abs_pow(t, self.p);
        let yq = ((1.0 - xp) / (self.p - 1.0)).max(0.0);
        QuarterPoint {
            x: t,
            y: yq.powf(1.0 / self.p_conj),
            xp,
            yq,
        }
    }

    /// Point on the quarter arc at angle `a ∈ [0, π_p/2]`.
    fn eval(&self, a: f64) -> QuarterPoint {
        if a <= self.theta_split {
            let s = invert(&self.a_nodes, &self.a_theta, a.max(0.0), |s| self.ga(s));
            self.point_from_s(s)
        } else {
            let dist = (self.quarter - a).max(0.0);
            let t = invert(&self.b_nodes, &self.b_dist, dist, |t| self.gb(t));
            self.point_from_t(t)
        }
    }

    /// Quarter angle of the normalized point with `x^p = xp`, `y^{p'} = yq`.
    fn quarter_angle(&self, xp: f64, yq: f64) -> f64 {
        if xp >= 0.5 {
            let s = yq.powf(1.0 / self.p_conj);
            forward(&self.a_nodes, &self.a_theta, s, |s| self.ga(s))
        } else {
            let t = xp.powf(1.0 / self.p);
            self.quarter - forward(&self.b_nodes, &self.b_dist, t, |t| self.gb(t))
        }
    }
}

/// Cumulative integral at `x` from the node table plus a partial interval.
fn forward(nodes: &[f64], cum: &[f64], x: f64, g: impl Fn(f64) -> f64) -> f64 {
    let last = nodes.len() - 1;
    let x = x.clamp(0.0, nodes[last]);
    let i = (nodes.partition_point(|&n| n <= x).max(1) - 1).min(last - 1);
    if x == nodes[i] {
        return cum[i];
    }
    cum[i] + GaussLegendre::g8().integrate(nodes[i], x, g)
}

/// Solves `cum(x) = target` for the table parameter `x`: cubic Hermite guess
/// followed by Newton polishing on the exact partial integral.
fn invert(nodes: &[f64], cum: &[f64], target: f64, g: impl Fn(f64) -> f64) -> f64 {
    let last = nodes.len() - 1;
    if target <= 0.0 {
        return 0.0;
    }
    if target >= cum[last] {
        return nodes[last];
    }
    let i = (cum.partition_point(|&c| c <= target).max(1) - 1).min(last - 1);
    let (c0, c1) = (cum[i], cum[i + 1]);
    let (x0, x1) = (nodes[i], nodes[i + 1]);
    let h = c1 - c0;
    let m0 = 1.0 / g(x0);
    let m1 = 1.0 / g(x1);
    let tau = (target - c0) / h;
    let h00 = (1.0 + 2.0 * tau) * (1.0 - tau) * (1.0 - tau);
    let h10 = tau * (1.0 - tau) * (1.0 - tau);
    let h01 = tau * tau * (3.0 - 2.0 * tau);
    let h11 = tau * tau * (tau - 1.0);
    let mut x = h00 * x0 + h10 * h * m0 + h01 * x1 + h11 * h * m1;
    for _ in 0..3 {
        x = x.clamp(x0, x1);
        let resid = c0 + GaussLegendre::g8().integrate(x0, x, &g) - target;
        let dx = resid / g(x);
        x -= dx;
        if dx.abs() <= 4.0 * f64::EPSILON * x.abs().max(1e-300) {
            break;
        }
    }
    x.clamp(x0, x1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn phi_examples() {
        let c2 = PContext::new(2.0).unwrap();
        assert_eq!(c2.phi_p(-3.5), -3.5);
        assert_eq!(c2.phi_p_inv(7.0), 7.0);
        let c3 = PContext::new(3.0).unwrap();
        assert_relative_eq!(c3.phi_p(2.0), 4.0, max_relative = 1e-15);
        assert_relative_eq!(c3.phi_p_inv(4.0), 2.0, max_relative = 1e-15);
        let c15 = PContext::new(1.5).unwrap();
        assert_eq!(c15.phi_p(0.0), 0.0);
        assert_relative_eq!(c15.phi_p_inv(-1.0), -1.0, max_relative = 1e-15);
    }

    #[test]
    fn context_rejects_bad_exponent() {
        for p in [1.0, 0.5, -2.0, f64::NAN, f64::INFINITY] {
            assert!(matches!(PContext::new(p), Err(Error::Domain(_))), "p = {p}");
        }
    }

    #[test]
    fn context_examples() {
        let c2 = PContext::new(2.0).unwrap();
        assert_eq!(c2.p_conj(), 2.0);
        assert_eq!(c2.pi_p(), PI);
        // 2π(0.5)^{2/3} / (1.5 sin(2π/3))
        let c15 = PContext::new(1.5).unwrap();
        let expected = 2.0 * PI * 0.5f64.powf(2.0 / 3.0) / (1.5 * (2.0 * PI / 3.0).sin());
        assert_relative_eq!(c15.pi_p(), expected, max_relative = 1e-14);
        assert!((c15.pi_p() - 3.0470).abs() < 5e-5);
        let c4 = PContext::new(4.0).unwrap();
        let expected = 2.0 * PI * 3f64.powf(0.25) / (4.0 * (PI / 4.0).sin());
        assert_relative_eq!(c4.pi_p(), expected, max_relative = 1e-14);
        assert!((c4.pi_p() - 2.9236).abs() < 5e-5);
        assert_relative_eq!(c4.p_conj(), 4.0 / 3.0, max_relative = 1e-15);
    }

    #[test]
    fn origin_and_classical_reduction() {
        for p in [1.2, 1.5, 2.0, 3.0, 8.0] {
            let ctx = PContext::new(p).unwrap();
            let (c, s) = ctx.cos_sin_p(0.0);
            assert_eq!((c, s), (1.0, 0.0));
        }
        let ctx = PContext::new(2.0).unwrap();
        let (c, s) = ctx.cos_sin_p(1.234);
        assert!((c - 1.234f64.cos()).abs() < 1e-13);
        assert!((s - 1.234f64.sin()).abs() < 1e-13);
        for i in 0..200 {
            let th = -7.0 + 0.07 * i as f64;
            let (c, s) = ctx.cos_sin_p(th);
            assert!((c - th.cos()).abs() < 1e-13 && (s - th.sin()).abs() < 1e-13, "θ = {th}");
        }
    }

    #[test]
    fn quarter_point_for_p4() {
        let ctx = PContext::new(4.0).unwrap();
        let (c, s) = ctx.cos_sin_p(ctx.pi_p() / 2.0);
        assert!(c.abs() < 1e-10);
        assert!((s - (1.0f64 / 3.0).powf(0.75)).abs() < 1e-10);
        assert!((s - 0.4386).abs() < 1e-4);
    }

    #[test]
    fn zero_sets() {
        for p in [1.2, 1.5, 3.0, 8.0] {
            let ctx = PContext::new(p).unwrap();
            for k in -3..4 {
                let k = k as f64;
                assert!(ctx.sin_p(k * ctx.pi_p()).abs() < 1e-10);
                assert!(ctx.cos_p((k + 0.5) * ctx.pi_p()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn angle_inverts_cos_sin() {
        for p in [1.2, 1.5, 2.0, 3.0, 8.0] {
            let ctx = PContext::new(p).unwrap();
            for i in 0..400 {
                let th = 2.0 * ctx.pi_p() * (i as f64 + 0.37) / 400.0;
                let (c, s) = ctx.cos_sin_p(th);
                let rho = 0.3 + i as f64 * 0.01;
                let got = ctx.angle(rho.powf(2.0 / p) * c, rho.powf(2.0 / ctx.p_conj()) * s);
                assert!((got - th).abs() < 1e-11, "p={p} θ={th} got {got}");
            }
        }
    }

    #[test]
    fn numeric_half_period_matches_closed_form() {
        for p in [1.2, 1.5, 2.0, 3.0, 4.0, 8.0] {
            let ctx = PContext::new(p).unwrap();
            assert!(
                (ctx.pi_p_numeric() - ctx.pi_p()).abs() < 1e-12,
                "p={p}: {} vs {}",
                ctx.pi_p_numeric(),
                ctx.pi_p()
            );
        }
    }

    #[test]
    fn coarse_tables_stay_accurate() {
        let fine = PContext::new(3.0).unwrap();
        let coarse = PContext::with_resolution(3.0, 64).unwrap();
        assert_eq!(coarse.table_nodes(), 64);
        for i in 0..100 {
            let th = 0.061 * i as f64;
            let (a, b) = (fine.cos_sin_p(th), coarse.cos_sin_p(th));
            assert!((a.0 - b.0).abs() < 1e-11 && (a.1 - b.1).abs() < 1e-11);
        }
        assert!(PContext::with_resolution(3.0, 8).is_err());
    }
}
