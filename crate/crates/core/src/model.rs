//! Nonlinearities `f` with equilibrium at `u ≡ 1`, their zero extension and
//! primitive, the limit constants `C₀`, `C₁`, and the radial domain.

use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::ptrig::{abs_pow, phi};
use crate::quad;

/// Limit of `f(s)/φ_p(s-1)` as `s → 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum C1Regime {
    Zero,
    Finite(f64),
    Infinite,
}

impl C1Regime {
    /// Finite values, with `Zero` mapped to 0.
    pub fn finite_value(&self) -> Option<f64> {
        match *self {
            C1Regime::Zero => Some(0.0),
            C1Regime::Finite(v) => Some(v),
            C1Regime::Infinite => None,
        }
    }
}

impl fmt::Display for C1Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            C1Regime::Zero => write!(f, "C1=0"),
            C1Regime::Finite(v) => write!(f, "C1={v}"),
            C1Regime::Infinite => write!(f, "C1=inf"),
        }
    }
}

/// A nonlinearity on `[0, ∞)` with `f(0) = f(1) = 0`, `f < 0` on `(0,1)`
/// and `f > 0` on `(1, ∞)`.
pub trait Nonlinearity: Send + Sync + fmt::Debug {
    fn name(&self) -> String;

    /// The exponent `p` the nonlinearity is paired with.
    fn p(&self) -> f64;

    /// `f(s)` for `s ≥ 0`.
    fn f(&self, s: f64) -> f64;

    /// `f(1 + w)` for `w ≥ -1`. Override when `f` can be evaluated without
    /// cancellation for tiny `w`.
    fn f_near_one(&self, w: f64) -> f64 {
        self.f(1.0 + w)
    }

    fn f_prime(&self, _s: f64) -> Option<f64> {
        None
    }

    fn c0_closed_form(&self) -> Option<f64> {
        None
    }

    fn c1_closed_form(&self) -> Option<C1Regime> {
        None
    }

    /// `F̂(1 + w) = ∫_0^w f̂(1 + t) dt` in closed form, if known.
    fn primitive_near_one(&self, _w: f64) -> Option<f64> {
        None
    }
}

/// Zero extension `f̂`.
pub fn f_hat(nl: &dyn Nonlinearity, s: f64) -> f64 {
    if s < 0.0 {
        0.0
    } else {
        nl.f(s)
    }
}

/// `f̂(1 + w)`.
pub fn f_hat_shifted(nl: &dyn Nonlinearity, w: f64) -> f64 {
    if w < -1.0 {
        0.0
    } else {
        nl.f_near_one(w)
    }
}

/// `F̂(s) = ∫_1^s f̂`.
#[allow(non_snake_case)]
pub fn F_hat(nl: &dyn Nonlinearity, s: f64) -> f64 {
    F_hat_shifted(nl, s - 1.0)
}

/// `F̂(1 + w)`.
#[allow(non_snake_case)]
pub fn F_hat_shifted(nl: &dyn Nonlinearity, w: f64) -> f64 {
    let w = w.max(-1.0);
    if let Some(v) = nl.primitive_near_one(w) {
        return v;
    }
    let g = |t: f64| nl.f_near_one(t);
    quad::adaptive(&g, 0.0, w, 1e-12)
}

/// Numerical estimate of `C₁` from the limit probes, or the closed form.
pub fn classify_c1(nl: &dyn Nonlinearity) -> Result<C1Regime> {
    if let Some(c1) = nl.c1_closed_form() {
        return Ok(c1);
    }
    let p = nl.p();
    if p == 2.0 {
        if let Some(d) = nl.f_prime(1.0) {
            return Ok(C1Regime::Finite(d));
        }
    }
    let probe = |delta: f64| {
        let up = nl.f_near_one(delta) / phi(p, delta);
        let down = nl.f_near_one(-delta) / phi(p, -delta);
        0.5 * (up + down)
    };
    let (r1, r2) = (probe(1e-3), probe(1e-5));
    let probes = vec![r1, r2];
    if !(r1.is_finite() && r2.is_finite()) || r1 <= 0.0 || r2 <= 0.0 {
        return Err(Error::Indeterminate { probes });
    }
    if (r1 - r2).abs() <= 0.1 * r1.max(r2) {
        return Ok(C1Regime::Finite(r2));
    }
    // local power law r(δ) ~ δ^α between the two probes
    let alpha = (r1 / r2).ln() / 100f64.ln();
    if alpha > 0.05 {
        Ok(C1Regime::Zero)
    } else if alpha < -0.05 {
        Ok(C1Regime::Infinite)
    } else {
        Err(Error::Indeterminate { probes })
    }
}

/// A constant together with its provenance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constant<T> {
    pub value: T,
    pub estimated: bool,
}

/// Outcome of checking the structural hypotheses on a nonlinearity.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypotheses {
    /// `None` when the probes only support boundedness of `f(s)/s^{p-1}` near 0.
    pub c0: Option<Constant<f64>>,
    pub c1: Constant<C1Regime>,
}

/// Spot-checks the equilibrium/sign structure and determines `C₀`, `C₁`.
pub fn check_hypotheses(nl: &dyn Nonlinearity) -> Result<Hypotheses> {
    let p = nl.p();
    let name = nl.name();
    for (s, label) in [(0.0, "f(0)"), (1.0, "f(1)")] {
        let v = nl.f(s);
        if !(v.abs() <= 1e-14) {
            return Err(Error::Domain(format!("{name}: {label} = {v}, expected 0")));
        }
    }
    for i in 1..1000 {
        let s = 3.0 * i as f64 / 1000.0;
        if (s - 1.0).abs() < 1e-12 {
            continue;
        }
        let v = nl.f(s);
        let ok = if s < 1.0 { v < 0.0 } else { v > 0.0 };
        if !ok {
            return Err(Error::Domain(format!(
                "{name}: sign condition violated at s = {s} (f = {v})"
            )));
        }
    }

    let c0 = match nl.c0_closed_form() {
        Some(value) => Some(Constant {
            value,
            estimated: false,
        }),
        None => {
            let r = |s: f64| nl.f(s) / abs_pow(s, p - 1.0);
            let (a, b) = (r(1e-4), r(1e-6));
            if a.is_finite() && b.is_finite() && (a - b).abs() <= 0.1 * a.abs().max(b.abs()) {
                Some(Constant {
                    value: -b,
                    estimated: true,
                })
            } else {
                log::info!("{name}: f(s)/s^(p-1) has no clear limit at 0; C0 diagnostics skipped");
                None
            }
        }
    };

    let estimated = nl.c1_closed_form().is_none();
    let c1 = classify_c1(nl)?;
    Ok(Hypotheses {
        c0,
        c1: Constant {
            value: c1,
            estimated,
        },
    })
}

/// `f(s) = -s^{p-1} + s^{q-1}` with `q > p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prototype {
    p: f64,
    q: f64,
}

impl Prototype {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::Domain(format!("prototype needs p > 1, got {p}")));
        }
        if !(q.is_finite() && q > p) {
            return Err(Error::Domain(format!("prototype needs q > p, got p = {p}, q = {q}")));
        }
        Ok(Prototype { p, q })
    }

    pub fn q(&self) -> f64 {
        self.q
    }
}

impl Nonlinearity for Prototype {
    fn name(&self) -> String {
        format!("prototype(p={}, q={})", self.p, self.q)
    }

    fn p(&self) -> f64 {
        self.p
    }

    fn f(&self, s: f64) -> f64 {
        abs_pow(s, self.q - 1.0) - abs_pow(s, self.p - 1.0)
    }

    fn f_near_one(&self, w: f64) -> f64 {
        if w.abs() < 0.5 {
            let l = w.ln_1p();
            ((self.q - 1.0) * l).exp_m1() - ((self.p - 1.0) * l).exp_m1()
        } else {
            self.f(1.0 + w)
        }
    }

    fn f_prime(&self, s: f64) -> Option<f64> {
        Some((self.q - 1.0) * abs_pow(s, self.q - 2.0) - (self.p - 1.0) * abs_pow(s, self.p - 2.0))
    }

    fn c0_closed_form(&self) -> Option<f64> {
        Some(1.0)
    }

    fn c1_closed_form(&self) -> Option<C1Regime> {
        Some(if self.p < 2.0 {
            C1Regime::Zero
        } else if self.p == 2.0 {
            C1Regime::Finite(self.q - 2.0)
        } else {
            C1Regime::Infinite
        })
    }

    fn primitive_near_one(&self, w: f64) -> Option<f64> {
        let (p, q) = (self.p, self.q);
        if w.abs() < 1e-3 {
            // Σ_{n≥2} [(q-1)…(q-n+1) − (p-1)…(p-n+1)] wⁿ / n!
            let (mut pq, mut pp, mut fact, mut wn) = (1.0, 1.0, 1.0, w);
            let mut sum = 0.0;
            for n in 2..60 {
                let k = (n - 1) as f64;
                pq *= q - k;
                pp *= p - k;
                fact *= n as f64;
                wn *= w;
                let term = (pq - pp) / fact * wn;
                sum += term;
                if term.abs() <= 1e-18 * sum.abs() {
                    break;
                }
            }
            Some(sum)
        } else {
            let l = w.ln_1p();
            Some((q * l).exp_m1() / q - (p * l).exp_m1() / p)
        }
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user-supplied nonlinearity. Missing constants are estimated by limit probes
/// and the primitive is tabulated by quadrature on first use.
#[derive(Clone)]
pub struct Custom {
    name: String,
    p: f64,
    f: ScalarFn,
    f_prime: Option<ScalarFn>,
    c0: Option<f64>,
    c1: Option<C1Regime>,
    primitive: Arc<OnceLock<PrimitiveTable>>,
}

impl fmt::Debug for Custom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Custom")
            .field("name", &self.name)
            .field("p", &self.p)
            .field("c0", &self.c0)
            .field("c1", &self.c1)
            .finish()
    }
}

impl Custom {
    pub fn new(
        name: impl Into<String>,
        p: f64,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::Domain(format!("nonlinearity needs p > 1, got {p}")));
        }
        Ok(Custom {
            name: name.into(),
            p,
            f: Arc::new(f),
            f_prime: None,
            c0: None,
            c1: None,
            primitive: Arc::new(OnceLock::new()),
        })
    }

    pub fn with_derivative(mut self, df: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.f_prime = Some(Arc::new(df));
        self
    }

    pub fn with_c0(mut self, c0: f64) -> Self {
        self.c0 = Some(c0);
        self
    }

    pub fn with_c1(mut self, c1: C1Regime) -> Self {
        self.c1 = Some(c1);
        self
    }
}

impl Nonlinearity for Custom {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn p(&self) -> f64 {
        self.p
    }

    fn f(&self, s: f64) -> f64 {
        (self.f)(s)
    }

    fn f_prime(&self, s: f64) -> Option<f64> {
        self.f_prime.as_ref().map(|d| d(s))
    }

    fn c0_closed_form(&self) -> Option<f64> {
        self.c0
    }

    fn c1_closed_form(&self) -> Option<C1Regime> {
        self.c1
    }

    fn primitive_near_one(&self, w: f64) -> Option<f64> {
        let table = self.primitive.get_or_init(|| PrimitiveTable::build(&*self.f));
        Some(table.eval(&*self.f, w))
    }
}

/// Cumulative primitive `∫_0^w f(1+t) dt` on a fixed grid over `w ∈ [-1, 4]`.
#[derive(Debug)]
struct PrimitiveTable {
    step: f64,
    values: Vec<f64>,
}

impl PrimitiveTable {
    const LO: f64 = -1.0;
    const HI: f64 = 4.0;
    const CELLS: usize = 1280;

    fn build(f: &(dyn Fn(f64) -> f64 + Send + Sync)) -> Self {
        let step = (Self::HI - Self::LO) / Self::CELLS as f64;
        let g = |t: f64| f(1.0 + t);
        let zero = ((0.0 - Self::LO) / step).round() as usize;
        let mut values = vec![0.0; Self::CELLS + 1];
        for i in zero + 1..=Self::CELLS {
            let a = Self::LO + (i - 1) as f64 * step;
            values[i] = values[i - 1] + quad::adaptive(&g, a, a + step, 1e-14);
        }
        for i in (0..zero).rev() {
            let a = Self::LO + i as f64 * step;
            values[i] = values[i + 1] - quad::adaptive(&g, a, a + step, 1e-14);
        }
        PrimitiveTable { step, values }
    }

    fn eval(&self, f: &(dyn Fn(f64) -> f64 + Send + Sync), w: f64) -> f64 {
        let g = |t: f64| f(1.0 + t);
        let pos = ((w - Self::LO) / self.step).round();
        let i = pos.clamp(0.0, Self::CELLS as f64) as usize;
        let anchor = Self::LO + i as f64 * self.step;
        // anchor at w = 0 exactly so that F̂(1) = 0 without rounding
        let anchor = if anchor.abs() < 0.5 * self.step { 0.0 } else { anchor };
        self.values[i] + quad::adaptive(&g, anchor, w, 1e-14)
    }
}

/// Named nonlinearities available through `nonlinearity = plugin:<name>`.
pub fn plugin(name: &str, p: f64) -> Result<Arc<dyn Nonlinearity>> {
    let nl: Custom = match name {
        // s^{p-1} (e^{s-1} - 1)
        "exp" => Custom::new("plugin:exp", p, move |s: f64| {
            abs_pow(s, p - 1.0) * (s - 1.0).exp_m1()
        })?,
        // φ_p(s) (s² - 1)
        "cubic" => Custom::new("plugin:cubic", p, move |s: f64| {
            abs_pow(s, p - 1.0) * (s * s - 1.0)
        })?,
        other => {
            return Err(Error::Domain(format!(
                "unknown nonlinearity plugin `{other}` (available: exp, cubic)"
            )))
        }
    };
    Ok(Arc::new(nl))
}

/// Ball `B(R₂)` when `r1 = 0`, annulus `A(R₁, R₂)` otherwise, in dimension `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialDomain {
    pub r1: f64,
    pub r2: f64,
    pub n: u32,
}

impl RadialDomain {
    pub fn new(r1: f64, r2: f64, n: u32) -> Result<Self> {
        if !(r1.is_finite() && r1 >= 0.0) {
            return Err(Error::Domain(format!("inner radius must be >= 0, got {r1}")));
        }
        if !(r2.is_finite() && r2 > r1) {
            return Err(Error::Domain(format!("need R2 > R1, got R1 = {r1}, R2 = {r2}")));
        }
        if n < 1 {
            return Err(Error::Domain("dimension N must be >= 1".into()));
        }
        Ok(RadialDomain { r1, r2, n })
    }

    pub fn ball(r2: f64, n: u32) -> Result<Self> {
        Self::new(0.0, r2, n)
    }

    pub fn is_ball(&self) -> bool {
        self.r1 == 0.0
    }

    pub fn length(&self) -> f64 {
        self.r2 - self.r1
    }
}
