//! Problem parameters, the exponent hypotheses and the Riesz normalization.
//!
//! Two admissibility gates are provided. [`ProblemParams::check_h1`] is the
//! variational setting (existence, Hölder-type exponents for the
//! Hardy–Littlewood–Sobolev bound) and [`ProblemParams::check_h2`] adds the
//! restriction `p, q ≥ 2` needed by the symmetry result. All comparisons are
//! strict floating-point comparisons without slack: a boundary value fails.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A critical Sobolev-type exponent, which is infinite in dimensions one and two.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CriticalExponent {
    Finite(f64),
    Unbounded,
}

impl CriticalExponent {
    /// `x < self`, exactly.
    pub fn exceeds(self, x: f64) -> bool {
        match self {
            CriticalExponent::Finite(c) => x < c,
            CriticalExponent::Unbounded => x.is_finite(),
        }
    }

    /// `1 / self`, with `1/∞ = 0`.
    pub fn reciprocal(self) -> f64 {
        match self {
            CriticalExponent::Finite(c) => 1.0 / c,
            CriticalExponent::Unbounded => 0.0,
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            CriticalExponent::Finite(c) => Some(c),
            CriticalExponent::Unbounded => None,
        }
    }
}

impl fmt::Display for CriticalExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CriticalExponent::Finite(c) => write!(f, "{c}"),
            CriticalExponent::Unbounded => f.write_str("inf"),
        }
    }
}

/// Dimension, Riesz order, nonlinearity exponents and the two frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ProblemParams {
    dimension: usize,
    alpha: f64,
    p: f64,
    q: f64,
    tau: f64,
    eta: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    #[serde(rename = "N")]
    dimension: usize,
    alpha: f64,
    p: f64,
    q: f64,
    tau: f64,
    eta: f64,
}

impl TryFrom<RawParams> for ProblemParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        ProblemParams::new(raw.dimension, raw.alpha, raw.p, raw.q, raw.tau, raw.eta)
    }
}

impl From<ProblemParams> for RawParams {
    fn from(p: ProblemParams) -> Self {
        RawParams {
            dimension: p.dimension,
            alpha: p.alpha,
            p: p.p,
            q: p.q,
            tau: p.tau,
            eta: p.eta,
        }
    }
}

/// Outcome of an admissibility gate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub admissible: bool,
    /// Names of the failing inequalities, in a fixed order.
    pub violations: Vec<String>,
}

impl Verdict {
    fn from_checks(checks: &[(bool, &str)]) -> Self {
        let violations: Vec<String> = checks
            .iter()
            .filter(|(ok, _)| !ok)
            .map(|(_, name)| name.to_string())
            .collect();
        Verdict {
            admissible: violations.is_empty(),
            violations,
        }
    }
}

impl ProblemParams {
    pub fn new(dimension: usize, alpha: f64, p: f64, q: f64, tau: f64, eta: f64) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if dimension == 0 {
            return bad("dimension N must be at least 1".into());
        }
        if !(alpha > 0.0 && alpha < dimension as f64) {
            return Err(Error::AlphaOutOfRange { alpha, dimension });
        }
        if !(p > 1.0 && p.is_finite()) {
            return bad(format!("p must be a finite real > 1, got {p}"));
        }
        if !(q > 1.0 && q.is_finite()) {
            return bad(format!("q must be a finite real > 1, got {q}"));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return bad(format!("tau must be positive, got {tau}"));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return bad(format!("eta must be positive, got {eta}"));
        }
        Ok(ProblemParams {
            dimension,
            alpha,
            p,
            q,
            tau,
            eta,
        })
    }

    /// Symmetric parameters `p = q`, `tau = eta`.
    pub fn symmetric(dimension: usize, alpha: f64, p: f64, tau: f64) -> Result<Self> {
        Self::new(dimension, alpha, p, p, tau, tau)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn q(&self) -> f64 {
        self.q
    }
    pub fn tau(&self) -> f64 {
        self.tau
    }
    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn with_frequencies(&self, tau: f64, eta: f64) -> Result<Self> {
        Self::new(self.dimension, self.alpha, self.p, self.q, tau, eta)
    }

    pub fn with_exponents(&self, p: f64, q: f64) -> Result<Self> {
        Self::new(self.dimension, self.alpha, p, q, self.tau, self.eta)
    }

    /// `p = q` and `tau = eta`, the setting of the classification result.
    pub fn is_symmetric(&self) -> bool {
        self.p == self.q && self.tau == self.eta
    }

    /// `2* = 2N/(N-2)` for `N ≥ 3`, unbounded otherwise.
    pub fn two_star(&self) -> CriticalExponent {
        two_star(self.dimension)
    }

    /// `2*_α = 2(N+α)/(N-2)` for `N ≥ 3`, unbounded otherwise.
    pub fn two_alpha_star(&self) -> CriticalExponent {
        two_alpha_star(self.dimension, self.alpha)
    }

    pub fn check_h1(&self) -> Verdict {
        let n = self.dimension as f64;
        let lower = (2.0 * self.alpha / n).max(1.0);
        let two_star = self.two_star();
        let sum = self.p + self.q;
        Verdict::from_checks(&[
            (lower < self.p, "max{1, 2alpha/N} < p"),
            (two_star.exceeds(self.p), "p < 2*"),
            (lower < self.q, "max{1, 2alpha/N} < q"),
            (two_star.exceeds(self.q), "q < 2*"),
            (2.0 * (n + self.alpha) / n < sum, "2(N+alpha)/N < p+q"),
            (self.two_alpha_star().exceeds(sum), "p+q < 2*_alpha"),
        ])
    }

    pub fn check_h2(&self) -> Verdict {
        let two_star = self.two_star();
        Verdict::from_checks(&[
            (2.0 <= self.p, "2 <= p"),
            (two_star.exceeds(self.p), "p < 2*"),
            (2.0 <= self.q, "2 <= q"),
            (two_star.exceeds(self.q), "q < 2*"),
            (self.two_alpha_star().exceeds(self.p + self.q), "p+q < 2*_alpha"),
        ])
    }

    /// The scalar equation's range `1 + α/N < p < 2*_α / 2`, i.e. (H1) with `q = p`.
    pub fn scalar_admissible(&self) -> bool {
        let n = self.dimension as f64;
        let lower = 1.0 + self.alpha / n;
        let upper_ok = match self.two_alpha_star() {
            CriticalExponent::Finite(c) => self.p < c / 2.0,
            CriticalExponent::Unbounded => true,
        };
        lower < self.p && upper_ok
    }

    /// Intervals of admissible `s = 1/θ₁`, from the four strict conditions
    /// `2 < θ₁p < 2*`, `2 < θ₂q < 2*`, `θ_i ∈ (1, N/α)` with `1/θ₂ = (N+α)/N − s`.
    fn theta_interval(&self) -> (f64, f64) {
        let n = self.dimension as f64;
        let sum = (n + self.alpha) / n;
        let inv_two_star = self.two_star().reciprocal();
        let lo = (self.alpha / n)
            .max(self.p * inv_two_star)
            .max(sum - self.q / 2.0);
        let hi = 1.0f64
            .min(self.p / 2.0)
            .min(sum - self.q * inv_two_star)
            .min(sum - self.alpha / n);
        (lo, hi)
    }

    /// Deterministic admissible Hölder pair: midpoint of the feasible `1/θ₁` interval.
    pub fn find_thetas(&self) -> Result<ThetaPair> {
        let (lo, hi) = self.theta_interval();
        if !(lo < hi) {
            return Err(Error::InfeasibleThetas { lo, hi });
        }
        let n = self.dimension as f64;
        let s = 0.5 * (lo + hi);
        let t = (n + self.alpha) / n - s;
        Ok(ThetaPair {
            theta1: 1.0 / s,
            theta2: 1.0 / t,
        })
    }
}

pub fn two_star(dimension: usize) -> CriticalExponent {
    if dimension <= 2 {
        CriticalExponent::Unbounded
    } else {
        let n = dimension as f64;
        CriticalExponent::Finite(2.0 * n / (n - 2.0))
    }
}

pub fn two_alpha_star(dimension: usize, alpha: f64) -> CriticalExponent {
    if dimension <= 2 {
        CriticalExponent::Unbounded
    } else {
        let n = dimension as f64;
        CriticalExponent::Finite(2.0 * (n + alpha) / (n - 2.0))
    }
}

/// Hölder-type exponents pairing `|u|^p` and `|v|^q` in the HLS inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaPair {
    pub theta1: f64,
    pub theta2: f64,
}

impl ThetaPair {
    /// Names of the violated invariants, empty when the pair is admissible for `params`.
    pub fn violations(&self, params: &ProblemParams) -> Vec<String> {
        let n = params.dimension() as f64;
        let upper = n / params.alpha();
        let target = (n + params.alpha()) / n;
        let sum = 1.0 / self.theta1 + 1.0 / self.theta2;
        let two_star = params.two_star();
        let mut out = Vec::new();
        let mut check = |ok: bool, name: &str| {
            if !ok {
                out.push(name.to_string());
            }
        };
        check(self.theta1 > 1.0 && self.theta1 < upper, "theta1 in (1, N/alpha)");
        check(self.theta2 > 1.0 && self.theta2 < upper, "theta2 in (1, N/alpha)");
        check(((sum - target) / target).abs() <= 1e-12, "1/theta1 + 1/theta2 = (N+alpha)/N");
        check(2.0 < self.theta1 * params.p(), "2 < theta1 p");
        check(2.0 < self.theta2 * params.q(), "2 < theta2 q");
        check(two_star.exceeds(self.theta1 * params.p()), "theta1 p < 2*");
        check(two_star.exceeds(self.theta2 * params.q()), "theta2 q < 2*");
        out
    }
}

/// Normalization `A(N,α) = Γ((N−α)/2) / (Γ(α/2) π^{N/2} 2^α)` of the Riesz kernel `A |x|^{α−N}`.
pub fn riesz_constant(dimension: usize, alpha: f64) -> Result<f64> {
    if dimension == 0 || !(alpha > 0.0 && alpha < dimension as f64) {
        return Err(Error::AlphaOutOfRange { alpha, dimension });
    }
    let n = dimension as f64;
    let num = libm::tgamma((n - alpha) / 2.0);
    let den = libm::tgamma(alpha / 2.0) * PI.powf(n / 2.0) * 2f64.powf(alpha);
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: usize, alpha: f64, p: f64, q: f64) -> ProblemParams {
        ProblemParams::new(n, alpha, p, q, 1.0, 1.0).unwrap()
    }

    #[test]
    fn h1_examples() {
        assert!(params(3, 1.9, 2.0, 2.0).check_h1().admissible);
        let v = params(3, 1.9, 1.05, 2.0).check_h1();
        assert!(!v.admissible);
        assert_eq!(
            v.violations,
            vec!["max{1, 2alpha/N} < p".to_string(), "2(N+alpha)/N < p+q".to_string()]
        );
        let v = params(3, 1.9, 1.5, 1.3).check_h1();
        assert_eq!(v.violations, vec!["2(N+alpha)/N < p+q".to_string()]);
        assert!(params(1, 0.5, 2.0, 2.0).check_h1().admissible);
    }

    #[test]
    fn h2_examples() {
        assert!(params(3, 1.9, 2.0, 2.0).check_h2().admissible);
        let v = params(2, 1.0, 1.9, 2.2).check_h2();
        assert_eq!(v.violations, vec!["2 <= p".to_string()]);
        let v = params(3, 0.5, 3.0, 4.0).check_h2();
        assert_eq!(v.violations, vec!["p+q < 2*_alpha".to_string()]);
    }

    #[test]
    fn boundary_values_fail() {
        // p exactly at 2alpha/N = 4/3 and q exactly at 2* = 6.
        let v = params(3, 2.0, 4.0 / 3.0, 2.0).check_h1();
        assert!(v.violations.contains(&"max{1, 2alpha/N} < p".to_string()));
        let v = params(3, 1.0, 2.0, 6.0).check_h1();
        assert!(v.violations.contains(&"q < 2*".to_string()));
    }

    #[test]
    fn unbounded_branch() {
        assert_eq!(two_star(1), CriticalExponent::Unbounded);
        assert_eq!(two_alpha_star(2, 1.0), CriticalExponent::Unbounded);
        assert_eq!(two_star(3), CriticalExponent::Finite(6.0));
        assert_eq!(two_alpha_star(3, 1.9), CriticalExponent::Finite(2.0 * 4.9));
        assert!(CriticalExponent::Unbounded.exceeds(1e300));
        assert!(!CriticalExponent::Unbounded.exceeds(f64::INFINITY));
    }

    #[test]
    fn construction_rejects_bad_values() {
        assert!(matches!(
            ProblemParams::new(2, 2.0, 2.0, 2.0, 1.0, 1.0),
            Err(Error::AlphaOutOfRange { .. })
        ));
        assert!(ProblemParams::new(2, 1.0, 1.0, 2.0, 1.0, 1.0).is_err());
        assert!(ProblemParams::new(2, 1.0, 2.0, 2.0, 0.0, 1.0).is_err());
        assert!(ProblemParams::new(0, 0.5, 2.0, 2.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn thetas_benchmark_and_bruteforce() {
        let pr = params(2, 1.0, 2.0, 2.0);
        let th = pr.find_thetas().unwrap();
        assert!(th.violations(&pr).is_empty(), "{:?}", th.violations(&pr));
        assert!((1.0 / th.theta1 + 1.0 / th.theta2 - 1.5).abs() < 1e-12);
        assert!((th.theta1 - th.theta2).abs() < 1e-12);

        // Independent scan of s = 1/theta1 over a fine lattice.
        let n = 2.0;
        let sum = 1.5;
        let feasible = |s: f64| {
            let t = sum - s;
            let (t1, t2) = (1.0 / s, 1.0 / t);
            t1 > 1.0 && t1 < n && t2 > 1.0 && t2 < n && 2.0 < 2.0 * t1 && 2.0 < 2.0 * t2
        };
        let pts: Vec<f64> = (0..1_000_000)
            .map(|i| i as f64 / 1_000_000.0)
            .filter(|&s| feasible(s))
            .collect();
        let (lo, hi) = (pts[0], *pts.last().unwrap());
        assert!((1.0 / th.theta1 - 0.5 * (lo + hi)).abs() < 2e-6);
        assert!(feasible(1.0 / th.theta1));
    }

    #[test]
    fn riesz_constant_values() {
        let a = riesz_constant(3, 2.0).unwrap();
        assert!((a - 1.0 / (4.0 * PI)).abs() < 1e-15);
        let a = riesz_constant(2, 1.0).unwrap();
        assert!((a - 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert!(riesz_constant(2, 2.0).is_err());
        assert!(riesz_constant(2, 0.0).is_err());
    }

    #[test]
    fn riesz_constant_limits() {
        // Near alpha = N the constant blows up through Γ((N−α)/2); near 0 it vanishes.
        for n in 1..=3 {
            let up: Vec<f64> = (1..=6)
                .map(|k| riesz_constant(n, n as f64 - 10f64.powi(-k)).unwrap())
                .collect();
            assert!(up.windows(2).all(|w| w[1] > w[0]), "{up:?}");
            let down: Vec<f64> = (1..=6)
                .map(|k| riesz_constant(n, 10f64.powi(-k)).unwrap())
                .collect();
            assert!(down.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0), "{down:?}");
            assert!(down[5] < 1e-5);
        }
    }

    #[test]
    fn riesz_constant_continuous() {
        for n in 1..=3 {
            let vals: Vec<f64> = (1..400)
                .map(|i| riesz_constant(n, n as f64 * i as f64 / 400.0).unwrap())
                .collect();
            assert!(vals.iter().all(|&v| v > 0.0 && v.is_finite()));
            for w in vals[20..380].windows(2) {
                assert!((w[1] - w[0]).abs() < 0.1 * w[0].max(w[1]));
            }
        }
    }

    #[test]
    fn serde_uses_fixed_keys() {
        let pr = params(2, 1.0, 2.0, 2.0);
        let json = serde_json::to_string(&pr).unwrap();
        assert_eq!(json, r#"{"N":2,"alpha":1.0,"p":2.0,"q":2.0,"tau":1.0,"eta":1.0}"#);
        let back: ProblemParams = serde_json::from_str(&json).unwrap();
        assert_eq!(back, pr);
        let err = serde_json::from_str::<ProblemParams>(r#"{"N":2,"p":2,"q":2,"tau":1,"eta":1}"#)
            .unwrap_err();
        assert!(err.to_string().contains("alpha"));
        assert!(serde_json::from_str::<ProblemParams>(
            r#"{"N":2,"alpha":3,"p":2,"q":2,"tau":1,"eta":1}"#
        )
        .is_err());
    }
}
