//! Nonlinearities `f` with antiderivative `F` and derivative `f'`, and sampled
//! checks of the structural hypotheses an asymptotically linear `f` must meet.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type ScalarMap = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// User-supplied `(f, f', F)`; values at `t ≤ 0` are forced to zero by
/// [`NonlinearitySpec::eval`].
#[derive(Clone)]
pub struct CustomNonlinearity {
    pub f: ScalarMap,
    pub fprime: ScalarMap,
    pub antiderivative: ScalarMap,
}

impl fmt::Debug for CustomNonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomNonlinearity")
    }
}

#[derive(Clone, Debug)]
pub enum NonlinearityKind {
    /// `f(t) = t³ / (1 + s t²)` for `t > 0`.
    Saturable { s: f64 },
    /// `f(t) = t^{p-1}` for `t > 0`; superlinear, so not asymptotically linear.
    Power { exponent: f64 },
    /// `f ≡ 0`; only useful for linear test problems.
    Zero,
    Custom(CustomNonlinearity),
}

#[derive(Clone, Debug)]
pub struct NonlinearitySpec {
    pub kind: NonlinearityKind,
    /// `lim f(t)/t` as `t → ∞` (may be `+∞`).
    pub l0: f64,
    /// Growth exponent for the `|f'(t)| ≤ C0 (1 + |t|^{q-2})` bound; chosen
    /// automatically when absent.
    pub growth_q: Option<f64>,
    pub c0: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinValues {
    pub f: f64,
    pub fprime: f64,
    pub antiderivative: f64,
}

impl NonlinearitySpec {
    pub fn saturable(s: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidInput(format!("saturation s = {s} must be positive")));
        }
        Ok(Self {
            kind: NonlinearityKind::Saturable { s },
            l0: 1.0 / s,
            growth_q: None,
            c0: Some(3.0 / s),
        })
    }

    pub fn power(exponent: f64) -> Result<Self> {
        if !(exponent > 2.0) {
            return Err(Error::InvalidInput(format!("power exponent {exponent} <= 2")));
        }
        Ok(Self {
            kind: NonlinearityKind::Power { exponent },
            l0: f64::INFINITY,
            growth_q: None,
            c0: None,
        })
    }

    pub fn zero() -> Self {
        Self {
            kind: NonlinearityKind::Zero,
            l0: 0.0,
            growth_q: None,
            c0: None,
        }
    }

    pub fn custom(custom: CustomNonlinearity, l0: f64) -> Self {
        Self {
            kind: NonlinearityKind::Custom(custom),
            l0,
            growth_q: None,
            c0: None,
        }
    }

    /// `(f(t), f'(t), F(t))`, all zero for `t ≤ 0`.
    pub fn eval(&self, t: f64) -> NonlinValues {
        if !(t > 0.0) {
            return NonlinValues {
                f: 0.0,
                fprime: 0.0,
                antiderivative: 0.0,
            };
        }
        match &self.kind {
            NonlinearityKind::Saturable { s } => {
                let t2 = t * t;
                let den = 1.0 + s * t2;
                NonlinValues {
                    f: t * t2 / den,
                    fprime: t2 * (3.0 + s * t2) / (den * den),
                    antiderivative: saturable_antiderivative(*s, t),
                }
            }
            NonlinearityKind::Power { exponent: p } => NonlinValues {
                f: t.powf(p - 1.0),
                fprime: (p - 1.0) * t.powf(p - 2.0),
                antiderivative: t.powf(*p) / p,
            },
            NonlinearityKind::Zero => NonlinValues {
                f: 0.0,
                fprime: 0.0,
                antiderivative: 0.0,
            },
            NonlinearityKind::Custom(c) => NonlinValues {
                f: (c.f)(t),
                fprime: (c.fprime)(t),
                antiderivative: (c.antiderivative)(t),
            },
        }
    }

    pub fn f(&self, t: f64) -> f64 {
        if !(t > 0.0) {
            return 0.0;
        }
        match &self.kind {
            NonlinearityKind::Saturable { s } => t * t * t / (1.0 + s * t * t),
            _ => self.eval(t).f,
        }
    }

    pub fn antiderivative(&self, t: f64) -> f64 {
        if !(t > 0.0) {
            return 0.0;
        }
        match &self.kind {
            NonlinearityKind::Saturable { s } => saturable_antiderivative(*s, t),
            _ => self.eval(t).antiderivative,
        }
    }
}

/// `F(t) = t²/(2s) - ln(1 + s t²)/(2s²) = (x - ln(1+x)) / (2s²)` with
/// `x = s t²`; a series avoids cancellation for small `x`.
fn saturable_antiderivative(s: f64, t: f64) -> f64 {
    let x = s * t * t;
    let g = if x < 1e-2 {
        // x - ln(1+x) = x²/2 - x³/3 + x⁴/4 - ...
        let mut term = x * x;
        let mut sum = 0.0;
        for k in 2..14 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sum += sign * term / k as f64;
            term *= x;
        }
        sum
    } else {
        x - x.ln_1p()
    };
    g / (2.0 * s * s)
}

/// Critical Sobolev exponent `2d/(d - 2α)`, or `+∞` when `d ≤ 2α`.
pub fn critical_exponent(dim: usize, alpha: f64) -> f64 {
    let d = dim as f64;
    if d > 2.0 * alpha {
        2.0 * d / (d - 2.0 * alpha)
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub pass: bool,
    pub detail: String,
}

impl HypothesisCheck {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

/// Sampling setup for [`validate_nonlinearity`].
#[derive(Debug, Clone)]
pub struct NonlinearityCheck {
    /// Positive sample points; the horizon is appended if missing.
    pub t_samples: Vec<f64>,
    pub horizon: f64,
    /// `|V|_∞`, compared against `l0`.
    pub sup_v: Option<f64>,
    pub dim: usize,
    pub alpha: f64,
    /// Level `½ f(T) T - F(T)` must exceed at the horizon.
    pub f5_bound: f64,
}

impl NonlinearityCheck {
    pub fn new(dim: usize, alpha: f64, sup_v: Option<f64>) -> Self {
        let horizon = 1e3;
        Self {
            t_samples: geometric_samples(1e-3, horizon, 400),
            horizon,
            sup_v,
            dim,
            alpha,
            f5_bound: 1.0,
        }
    }
}

pub fn geometric_samples(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let ratio = (hi / lo).ln() / (count.max(2) - 1) as f64;
    (0..count.max(2))
        .map(|i| lo * (ratio * i as f64).exp())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearityReport {
    pub f1: HypothesisCheck,
    pub f2: HypothesisCheck,
    pub f3: HypothesisCheck,
    pub f4: HypothesisCheck,
    pub f5: HypothesisCheck,
    /// `None` when `d <= 2α` and every power is subcritical.
    pub critical_exponent: Option<f64>,
    pub growth_q: f64,
    pub c0: f64,
    pub horizon: f64,
}

impl NonlinearityReport {
    pub fn all_pass(&self) -> bool {
        self.f1.pass && self.f2.pass && self.f3.pass && self.f4.pass && self.f5.pass
    }

    pub fn failures(&self) -> Vec<&'static str> {
        [
            ("f1", &self.f1),
            ("f2", &self.f2),
            ("f3", &self.f3),
            ("f4", &self.f4),
            ("f5", &self.f5),
        ]
        .into_iter()
        .filter(|(_, c)| !c.pass)
        .map(|(name, _)| name)
        .collect()
    }
}

pub fn validate_nonlinearity(spec: &NonlinearitySpec, check: &NonlinearityCheck) -> NonlinearityReport {
    let horizon = check.horizon;
    let mut ts: Vec<f64> = check
        .t_samples
        .iter()
        .copied()
        .filter(|&t| t > 0.0 && t <= horizon)
        .collect();
    ts.push(horizon);
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let vals: Vec<NonlinValues> = ts.iter().map(|&t| spec.eval(t)).collect();
    let slope_at_horizon = vals.last().map_or(0.0, |v| v.f / horizon);

    // (f1)
    let zero_on_negatives = ts.iter().all(|&t| {
        let v = spec.eval(-t);
        v.f == 0.0 && v.fprime == 0.0 && v.antiderivative == 0.0
    }) && spec.eval(0.0).f == 0.0;
    let small_ratio = vals[0].f / ts[0];
    let f1 = HypothesisCheck::new(
        zero_on_negatives && small_ratio.abs() <= 1e-3 * slope_at_horizon.abs().max(1e-300),
        format!("f(t)=0 on t<=0: {zero_on_negatives}; f(t)/t at t={:.3e}: {small_ratio:.3e}", ts[0]),
    );

    // (f2)
    let crit = critical_exponent(check.dim, check.alpha);
    let q = spec
        .growth_q
        .unwrap_or_else(|| 2.0 + 0.5 * (crit.min(4.0) - 2.0));
    let ratio = |v: &NonlinValues, t: f64| v.fprime.abs() / (1.0 + t.powf(q - 2.0));
    let (c0, c0_pass) = match spec.c0 {
        Some(c0) => (c0, ts.iter().zip(&vals).all(|(&t, v)| ratio(v, t) <= c0)),
        None => {
            let core = horizon.sqrt();
            let c0 = ts
                .iter()
                .zip(&vals)
                .filter(|(&t, _)| t <= core)
                .map(|(&t, v)| ratio(v, t))
                .fold(0.0, f64::max);
            (
                c0,
                ts.iter().zip(&vals).all(|(&t, v)| ratio(v, t) <= 2.0 * c0),
            )
        }
    };
    let q_ok = q > 2.0 && q < crit;
    let f2 = HypothesisCheck::new(
        q_ok && c0_pass,
        format!("q = {q}, 2*_α = {crit}, C0 = {c0}, bound holds on samples: {c0_pass}"),
    );

    // (f3)
    let l0 = spec.l0;
    let slope_ok = l0.is_finite() && (slope_at_horizon - l0).abs() <= 0.05 * l0.abs();
    let above_v = check.sup_v.is_none_or(|sv| l0 > sv);
    let f3 = HypothesisCheck::new(
        slope_ok && above_v,
        format!(
            "f(T)/T = {slope_at_horizon:.6e} at T = {horizon}, declared l0 = {l0}, sup|V| = {:?}",
            check.sup_v
        ),
    );

    // (f4)
    let quotients: Vec<f64> = ts.iter().zip(&vals).map(|(&t, v)| v.f / t).collect();
    let increasing = quotients.windows(2).all(|w| w[1] > w[0]);
    let f4 = HypothesisCheck::new(increasing, format!("f(t)/t strictly increasing on {} samples: {increasing}", ts.len()));

    // (f5)
    let fbar: Vec<f64> = ts
        .iter()
        .zip(&vals)
        .map(|(&t, v)| 0.5 * v.f * t - v.antiderivative)
        .collect();
    let fbar_inc = fbar.windows(2).all(|w| w[1] >= w[0]) && fbar.iter().all(|&v| v >= 0.0);
    let fbar_top = *fbar.last().unwrap_or(&0.0);
    let f5 = HypothesisCheck::new(
        fbar_inc && fbar_top > check.f5_bound,
        format!(
            "½f(t)t-F(t) nondecreasing: {fbar_inc}; value {fbar_top:.6e} at T = {horizon} vs bound {}",
            check.f5_bound
        ),
    );

    NonlinearityReport {
        f1,
        f2,
        f3,
        f4,
        f5,
        critical_exponent: crit.is_finite().then_some(crit),
        growth_q: q,
        c0,
        horizon,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Simpson rule, independent of the closed-form antiderivative.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn saturable_values() {
        let spec = NonlinearitySpec::saturable(0.5).unwrap();
        assert!((spec.eval(2.0).f - 8.0 / 3.0).abs() < 1e-15);
        let v = spec.eval(1.0);
        let oracle = simpson(|t| spec.f(t), 0.0, 1.0, 2000);
        assert!((v.antiderivative - oracle).abs() < 1e-12);
        assert!((v.antiderivative - 0.189_069_783_783_671_2).abs() < 1e-12);
        assert!((oracle - (1.0 - 2.0 * 1.5f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn vanishes_on_nonpositive() {
        for spec in [
            NonlinearitySpec::saturable(0.4).unwrap(),
            NonlinearitySpec::power(4.0).unwrap(),
            NonlinearitySpec::zero(),
        ] {
            for t in [-1.0, 0.0, -1e-9] {
                let v = spec.eval(t);
                assert_eq!((v.f, v.fprime, v.antiderivative), (0.0, 0.0, 0.0));
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let spec = NonlinearitySpec::saturable(0.4).unwrap();
        for t in [0.1, 0.7, 1.5, 4.0, 20.0] {
            let h = 1e-5 * t;
            let v = spec.eval(t);
            let df = (spec.f(t + h) - spec.f(t - h)) / (2.0 * h);
            let dfa = (spec.antiderivative(t + h) - spec.antiderivative(t - h)) / (2.0 * h);
            assert!((df - v.fprime).abs() < 1e-7 * (1.0 + v.fprime.abs()));
            assert!((dfa - v.f).abs() < 1e-7 * (1.0 + v.f.abs()));
        }
    }

    #[test]
    fn antiderivative_matches_quadrature_on_0_10() {
        let spec = NonlinearitySpec::saturable(0.4).unwrap();
        for b in [1e-3, 0.05, 0.5, 1.0, 3.0, 10.0] {
            let oracle = simpson(|t| spec.f(t), 0.0, b, 20_000);
            let closed = spec.antiderivative(b);
            assert!(
                (closed - oracle).abs() <= 1e-8 * oracle.abs(),
                "b = {b}: {closed} vs {oracle}"
            );
        }
    }

    #[test]
    fn saturable_s04_passes_all() {
        let spec = NonlinearitySpec::saturable(0.4).unwrap();
        let report = validate_nonlinearity(&spec, &NonlinearityCheck::new(1, 0.5, Some(2.0)));
        assert!(report.all_pass(), "{report:?}");
    }

    #[test]
    fn saturable_s1_fails_f3_against_v() {
        let spec = NonlinearitySpec::saturable(1.0).unwrap();
        let report = validate_nonlinearity(&spec, &NonlinearityCheck::new(1, 0.5, Some(1.5)));
        assert!(!report.f3.pass);
        assert_eq!(report.failures(), vec!["f3"]);
    }

    #[test]
    fn saturable_slope_gap_is_exact() {
        // 1/s - t²/(1+st²) = 1/(s + s²t²); for s < 1/2 this exceeds 2/(st²).
        for s in [0.1, 0.4, 0.9] {
            let spec = NonlinearitySpec::saturable(s).unwrap();
            for t in [10.0, 100.0, 1000.0] {
                let gap = 1.0 / s - spec.f(t) / t;
                let exact = 1.0 / (s + s * s * t * t);
                assert!((gap - exact).abs() <= 1e-9 * exact, "s={s} t={t}");
                assert_eq!(gap < 2.0 / (s * t * t), s > 0.5, "s={s} t={t}");
            }
        }
    }

    #[test]
    fn cubic_fails_f3() {
        let spec = NonlinearitySpec::power(4.0).unwrap();
        let report = validate_nonlinearity(&spec, &NonlinearityCheck::new(1, 0.5, Some(1.0)));
        assert!(!report.f3.pass);
        assert!(!report.f2.pass);
    }

    #[test]
    fn f2_uses_critical_exponent() {
        assert_eq!(critical_exponent(1, 0.5), f64::INFINITY);
        assert!((critical_exponent(3, 0.5) - 3.0).abs() < 1e-15);
        let spec = NonlinearitySpec {
            growth_q: Some(3.5),
            ..NonlinearitySpec::saturable(0.4).unwrap()
        };
        let report = validate_nonlinearity(&spec, &NonlinearityCheck::new(3, 0.5, Some(2.0)));
        assert!(!report.f2.pass);
    }

    #[test]
    fn custom_nonlinearity_is_evaluated() {
        // f(t) = 2 t³ / (1 + t²): asymptotic slope 2.
        let custom = CustomNonlinearity {
            f: Arc::new(|t| 2.0 * t * t * t / (1.0 + t * t)),
            fprime: Arc::new(|t| 2.0 * t * t * (3.0 + t * t) / ((1.0 + t * t) * (1.0 + t * t))),
            antiderivative: Arc::new(|t| t * t - (t * t).ln_1p()),
        };
        let spec = NonlinearitySpec::custom(custom, 2.0);
        assert_eq!(spec.eval(-2.0).f, 0.0);
        let report = validate_nonlinearity(&spec, &NonlinearityCheck::new(1, 0.5, Some(1.5)));
        assert!(report.f3.pass && report.f4.pass && report.f5.pass, "{report:?}");
    }
}
