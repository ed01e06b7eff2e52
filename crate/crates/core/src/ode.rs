//! Dormand–Prince 5(4) integrator with PI step control and 4th-order dense output.
//!
//! The engine is written for small fixed-size systems `y' = f(t, y)` with
//! `y: [f64; D]`. Every accepted step is kept as a [`DenseStep`], so a
//! [`Trajectory`] can be evaluated anywhere inside its span.

use crate::error::{Error, Result};

/// A first-order system in `D` unknowns.
pub trait System<const D: usize> {
    fn rhs(&self, t: f64, y: &[f64; D]) -> [f64; D];

    /// Upper bound on the next step size, given the state and its derivative.
    fn max_step(&self, _t: f64, _y: &[f64; D], _dy: &[f64; D]) -> f64 {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Options<const D: usize> {
    pub rtol: f64,
    pub atol: [f64; D],
    pub h_init: Option<f64>,
    pub h_max: f64,
    pub max_steps: usize,
}

impl<const D: usize> Options<D> {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Options {
            rtol,
            atol: [atol; D],
            h_init: None,
            h_max: f64::INFINITY,
            max_steps: 2_000_000,
        }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Continuous extension of one accepted step.
#[derive(Debug, Clone, Copy)]
pub struct DenseStep<const D: usize> {
    pub t0: f64,
    pub h: f64,
    coeffs: [[f64; D]; 5],
}

impl<const D: usize> DenseStep<D> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn eval(&self, t: f64) -> [f64; D] {
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        let c = &self.coeffs;
        let mut out = [0.0; D];
        for i in 0..D {
            out[i] = c[0][i] + s * (c[1][i] + s1 * (c[2][i] + s * (c[3][i] + s1 * c[4][i])));
        }
        out
    }

    pub fn start(&self) -> [f64; D] {
        self.coeffs[0]
    }

    pub fn end(&self) -> [f64; D] {
        let mut out = [0.0; D];
        for (o, (a, b)) in out.iter_mut().zip(self.coeffs[0].iter().zip(&self.coeffs[1])) {
            *o = a + b;
        }
        out
    }
}

/// Accepted steps of one integration.
#[derive(Debug, Clone)]
pub struct Trajectory<const D: usize> {
    pub t: Vec<f64>,
    pub y: Vec<[f64; D]>,
    pub steps: Vec<DenseStep<D>>,
}

impl<const D: usize> Trajectory<D> {
    pub fn last(&self) -> [f64; D] {
        *self.y.last().expect("trajectory has at least one sample")
    }

    /// Dense evaluation; `t` is clamped to the integrated span.
    pub fn eval(&self, t: f64) -> [f64; D] {
        if self.steps.is_empty() {
            return self.y[0];
        }
        let idx = self.steps.partition_point(|s| s.t1() < t);
        let step = &self.steps[idx.min(self.steps.len() - 1)];
        let tc = t.clamp(step.t0, step.t1());
        step.eval(tc)
    }
}

fn add_scaled<const D: usize>(y: &[f64; D], h: f64, terms: &[(f64, &[f64; D])]) -> [f64; D] {
    let mut out = *y;
    for (coef, k) in terms {
        for i in 0..D {
            out[i] += h * coef * k[i];
        }
    }
    out
}

fn weighted_rms<const D: usize>(v: &[f64; D], scale: &[f64; D]) -> f64 {
    let sum: f64 = v.iter().zip(scale).map(|(x, s)| (x / s).powi(2)).sum();
    (sum / D as f64).sqrt()
}

fn initial_step<const D: usize, S: System<D>>(
    sys: &S,
    t0: f64,
    y0: &[f64; D],
    f0: &[f64; D],
    opts: &Options<D>,
    span: f64,
) -> f64 {
    let mut sc = [0.0; D];
    for i in 0..D {
        sc[i] = opts.atol[i] + opts.rtol * y0[i].abs();
    }
    let d0 = weighted_rms(y0, &sc);
    let d1 = weighted_rms(f0, &sc);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(span).min(opts.h_max);
    let y1 = add_scaled(y0, h0, &[(1.0, f0)]);
    let f1 = sys.rhs(t0 + h0, &y1);
    let mut diff = [0.0; D];
    for i in 0..D {
        diff[i] = f1[i] - f0[i];
    }
    let d2 = weighted_rms(&diff, &sc) / h0;
    let dm = d1.max(d2);
    let h1 = if dm <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / dm).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span).min(opts.h_max)
}

/// Integrates from `t0` to `t1 > t0`. `observer` sees every accepted step and
/// may stop the integration early by returning `false`.
pub fn integrate_with<const D: usize, S, O>(
    sys: &S,
    t0: f64,
    y0: [f64; D],
    t1: f64,
    opts: &Options<D>,
    mut observer: O,
) -> Result<Trajectory<D>>
where
    S: System<D>,
    O: FnMut(&DenseStep<D>) -> bool,
{
    let span = t1 - t0;
    let mut traj = Trajectory {
        t: vec![t0],
        y: vec![y0],
        steps: Vec::new(),
    };
    if span <= 0.0 {
        return Ok(traj);
    }

    const SAFE: f64 = 0.9;
    const BETA: f64 = 0.04;
    const EXPO1: f64 = 0.2 - BETA * 0.75;
    const FAC_MIN: f64 = 0.2;
    const FAC_MAX: f64 = 10.0;

    let mut t = t0;
    let mut y = y0;
    let mut k1 = sys.rhs(t, &y);
    let mut h = opts
        .h_init
        .unwrap_or_else(|| initial_step(sys, t0, &y0, &k1, opts, span));
    let mut facold: f64 = 1e-4;
    let mut rejected_last = false;
    let mut n_steps = 0usize;

    while t < t1 {
        n_steps += 1;
        if n_steps > opts.max_steps {
            return Err(Error::StepSizeUnderflow {
                r: t,
                state: y.to_vec(),
            });
        }
        h = h.min(opts.h_max).min(sys.max_step(t, &y, &k1));
        let last = t + h >= t1 || (t1 - t - h).abs() <= 1e-13 * t1.abs().max(1.0);
        if last {
            h = t1 - t;
        }
        if h <= 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepSizeUnderflow {
                r: t,
                state: y.to_vec(),
            });
        }

        let k2 = sys.rhs(t + C2 * h, &add_scaled(&y, h, &[(A21, &k1)]));
        let k3 = sys.rhs(t + C3 * h, &add_scaled(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = sys.rhs(
            t + C4 * h,
            &add_scaled(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
        );
        let k5 = sys.rhs(
            t + C5 * h,
            &add_scaled(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = sys.rhs(
            t + h,
            &add_scaled(
                &y,
                h,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            ),
        );
        let y_new = add_scaled(
            &y,
            h,
            &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
        );
        let t_new = if last { t1 } else { t + h };
        let k7 = sys.rhs(t_new, &y_new);

        let mut err_vec = [0.0; D];
        let mut sc = [0.0; D];
        for i in 0..D {
            err_vec[i] = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            sc[i] = opts.atol[i] + opts.rtol * y[i].abs().max(y_new[i].abs());
        }
        let err = weighted_rms(&err_vec, &sc);
        let err = if err.is_nan() { f64::INFINITY } else { err };

        let fac11 = err.powf(EXPO1);
        if err <= 1.0 {
            let mut fac = fac11 / facold.powf(BETA);
            fac = (fac / SAFE).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = h / fac;
            facold = err.max(1e-4);

            let mut coeffs = [[0.0; D]; 5];
            for i in 0..D {
                let ydiff = y_new[i] - y[i];
                let bspl = h * k1[i] - ydiff;
                coeffs[0][i] = y[i];
                coeffs[1][i] = ydiff;
                coeffs[2][i] = bspl;
                coeffs[3][i] = ydiff - h * k7[i] - bspl;
                coeffs[4][i] = h
                    * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i]
                        + D7 * k7[i]);
            }
            let step = DenseStep { t0: t, h, coeffs };
            traj.steps.push(step);
            traj.t.push(t_new);
            traj.y.push(y_new);

            if rejected_last {
                h_new = h_new.min(h);
            }
            rejected_last = false;
            t = t_new;
            y = y_new;
            k1 = k7;
            h = h_new;
            if !observer(&step) {
                break;
            }
        } else {
            if !err.is_finite() {
                h *= 0.1;
            } else {
                h /= (fac11 / SAFE).min(1.0 / FAC_MIN);
            }
            rejected_last = true;
        }
    }
    Ok(traj)
}

pub fn integrate<const D: usize, S: System<D>>(
    sys: &S,
    t0: f64,
    y0: [f64; D],
    t1: f64,
    opts: &Options<D>,
) -> Result<Trajectory<D>> {
    integrate_with(sys, t0, y0, t1, opts, |_| true)
}
