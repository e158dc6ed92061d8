//! Actions, residuals and Nehari constraints for the scalar equation
//!
//! ```text
//!   -Δw + τw = (I_α ∗ |w|^p)|w|^{p-2}w
//! ```
//!
//! and for the coupled system
//!
//! ```text
//!   -Δu + τu = c₁ (I_α ∗ |v|^q)|u|^{p-2}u,   c₁ = 2p/(p+q)
//!   -Δv + ηv = c₂ (I_α ∗ |u|^p)|v|^{q-2}v,   c₂ = 2q/(p+q)
//! ```
//!
//! whose action is `E(u,v) = ½‖u‖²_τ + ½‖v‖²_η − (2/(p+q)) D(u,v)` with the
//! coupling `D(u,v) = ∫ (I_α ∗ |u|^p)|v|^q`. When `p = q` and `τ = η` the
//! coefficient `2/(p+q)` equals `1/p` and `E` is the action `J`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::params::ProblemParams;
use crate::potentials::{riesz_bilinear, riesz_convolve};

fn coefficients(params: &ProblemParams) -> (f64, f64) {
    let s = params.p() + params.q();
    (2.0 * params.p() / s, 2.0 * params.q() / s)
}

fn require_symmetric(params: &ProblemParams) -> Result<()> {
    if params.is_symmetric() {
        Ok(())
    } else {
        Err(Error::Unsupported("p = q and tau = eta".into()))
    }
}

/// `D(u,v) = ∫ (I_α ∗ |u|^p)|v|^q`.
pub fn coupling_integral(u: &Field, v: &Field, params: &ProblemParams) -> Result<f64> {
    riesz_bilinear(
        &u.pointwise_power(params.p(), false),
        &v.pointwise_power(params.q(), false),
        params.alpha(),
    )
}

/// `∫ (I_α ∗ |w|^p)|w|^p`.
pub fn self_interaction(w: &Field, p: f64, alpha: f64) -> Result<f64> {
    let wp = w.pointwise_power(p, false);
    riesz_bilinear(&wp, &wp, alpha)
}

/// The pair of PDE residuals `(r₁, r₂)`.
pub fn residual_system(u: &Field, v: &Field, params: &ProblemParams) -> Result<(Field, Field)> {
    u.same_grid(v)?;
    let (c1, c2) = coefficients(params);
    let alpha = params.alpha();
    let phi_v = riesz_convolve(&v.pointwise_power(params.q(), false), alpha)?;
    let psi_u = riesz_convolve(&u.pointwise_power(params.p(), false), alpha)?;
    let n1 = phi_v.mul(&u.pointwise_power(params.p() - 1.0, true))?;
    let n2 = psi_u.mul(&v.pointwise_power(params.q() - 1.0, true))?;
    let r1 = u.helmholtz(params.tau()).axpby(1.0, &n1, -c1)?;
    let r2 = v.helmholtz(params.eta()).axpby(1.0, &n2, -c2)?;
    Ok((r1, r2))
}

/// `(-Δ + τ)w − (I_α ∗ |w|^p)|w|^{p-2}w` using `p` and `τ` from `params`.
pub fn scalar_residual(w: &Field, params: &ProblemParams) -> Result<Field> {
    let p = params.p();
    let phi = riesz_convolve(&w.pointwise_power(p, false), params.alpha())?;
    let nl = phi.mul(&w.pointwise_power(p - 1.0, true))?;
    w.helmholtz(params.tau()).sub(&nl)
}

/// `E(u,v)` for arbitrary admissible exponents.
pub fn action_general(u: &Field, v: &Field, params: &ProblemParams) -> Result<f64> {
    u.same_grid(v)?;
    let d = coupling_integral(u, v, params)?;
    Ok(0.5 * (u.h1_norm_sq(params.tau()) + v.h1_norm_sq(params.eta()))
        - 2.0 / (params.p() + params.q()) * d)
}

/// `J(u,v) = ½(‖u‖² + ‖v‖²) − (1/p) ∫ (I_α ∗ |u|^p)|v|^p`; requires `p = q`, `τ = η`.
pub fn action_j(u: &Field, v: &Field, params: &ProblemParams) -> Result<f64> {
    require_symmetric(params)?;
    u.same_grid(v)?;
    let tau = params.tau();
    let d = coupling_integral(u, v, params)?;
    Ok(0.5 * (u.h1_norm_sq(tau) + v.h1_norm_sq(tau)) - d / params.p())
}

/// `𝒜(w) = ½‖w‖²_τ − (1/2p) ∫ (I_α ∗ |w|^p)|w|^p`.
pub fn scalar_action(w: &Field, params: &ProblemParams) -> Result<f64> {
    let p = params.p();
    let d = self_interaction(w, p, params.alpha())?;
    Ok(0.5 * w.h1_norm_sq(params.tau()) - d / (2.0 * p))
}

/// `Q(w) = ‖w‖²_τ / (∫ (I_α ∗ |w|^p)|w|^p)^{1/p}`.
pub fn quotient_q(w: &Field, params: &ProblemParams) -> Result<f64> {
    let p = params.p();
    let d = self_interaction(w, p, params.alpha())?;
    if d <= 0.0 {
        return Err(Error::Degenerate("quotient undefined for a vanishing field".into()));
    }
    Ok(w.h1_norm_sq(params.tau()) / d.powf(1.0 / p))
}

/// `(F₁, F₂) = (‖u‖²_τ − c₁D, ‖v‖²_η − c₂D)`. With `p = q` these are the
/// defects `‖u‖² − ∫(I_α ∗ |v|^p)|u|^p` and its mirror.
pub fn nehari_defects(u: &Field, v: &Field, params: &ProblemParams) -> Result<(f64, f64)> {
    u.same_grid(v)?;
    let (c1, c2) = coefficients(params);
    let d = coupling_integral(u, v, params)?;
    Ok((
        u.h1_norm_sq(params.tau()) - c1 * d,
        v.h1_norm_sq(params.eta()) - c2 * d,
    ))
}

/// Whether both components are nonzero and both defects are within `tol`
/// relative to the norms involved.
pub fn on_nehari_manifold(u: &Field, v: &Field, params: &ProblemParams, tol: f64) -> Result<bool> {
    let (nu, nv) = (u.h1_norm_sq(params.tau()), v.h1_norm_sq(params.eta()));
    if nu == 0.0 || nv == 0.0 {
        return Ok(false);
    }
    let (f1, f2) = nehari_defects(u, v, params)?;
    Ok(f1.abs() <= tol * nu && f2.abs() <= tol * nv)
}

/// The scaling `t > 0` that places `(tu, tv)` on the constraint
/// `⟨E'(tu,tv), (tu,tv)⟩ = 0`.
pub fn nehari_scale(u: &Field, v: &Field, params: &ProblemParams) -> Result<f64> {
    let d = coupling_integral(u, v, params)?;
    if d <= 0.0 {
        return Err(Error::Degenerate("coupling integral vanishes; pair is unscalable".into()));
    }
    let norm = u.h1_norm_sq(params.tau()) + v.h1_norm_sq(params.eta());
    Ok((norm / (2.0 * d)).powf(1.0 / (params.p() + params.q() - 2.0)))
}

/// The scaling `k > 0` with `⟨𝒜'(kw), kw⟩ = 0`.
pub fn scalar_nehari_scale(w: &Field, params: &ProblemParams) -> Result<f64> {
    let p = params.p();
    let d = self_interaction(w, p, params.alpha())?;
    if d <= 0.0 {
        return Err(Error::Degenerate("field vanishes; no Nehari scaling".into()));
    }
    Ok((w.h1_norm_sq(params.tau()) / d).powf(1.0 / (2.0 * (p - 1.0))))
}

/// Independent scalings `(s, t)` with `F₁(su, tv) = F₂(su, tv) = 0`.
///
/// Taking logarithms of `s²‖u‖² = c₁ s^p t^q D` and `t²‖v‖² = c₂ s^p t^q D`
/// gives a 2×2 linear system whose determinant `4 − 2(p+q)` never vanishes
/// for admissible exponents.
pub fn pair_nehari_scales(u: &Field, v: &Field, params: &ProblemParams) -> Result<(f64, f64)> {
    let (c1, c2) = coefficients(params);
    let (p, q) = (params.p(), params.q());
    let d = coupling_integral(u, v, params)?;
    let (a1, a2) = (u.h1_norm_sq(params.tau()), v.h1_norm_sq(params.eta()));
    if d <= 0.0 || a1 == 0.0 || a2 == 0.0 {
        return Err(Error::Degenerate("pair cannot be projected onto the constraint".into()));
    }
    let r1 = (c1 * d / a1).ln();
    let r2 = (c2 * d / a2).ln();
    let det = (2.0 - p) * (2.0 - q) - p * q;
    let ln_s = ((2.0 - q) * r1 + q * r2) / det;
    let ln_t = (p * r1 + (2.0 - p) * r2) / det;
    Ok((ln_s.exp(), ln_t.exp()))
}

/// Level and constraint quantities at a computed state. Entries that do not
/// apply to the run that produced the report are `None`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub j: Option<f64>,
    pub a_scalar: Option<f64>,
    pub q: Option<f64>,
    pub f1: f64,
    pub f2: f64,
    pub a: f64,
    pub b: f64,
    pub s_est: Option<f64>,
    pub t_est: Option<f64>,
    pub c_est: Option<f64>,
}

impl EnergyReport {
    /// Report for a system state. `j` holds `J` when `p = q, τ = η` and the
    /// general action otherwise; `b` uses the exponent `q`.
    pub fn for_system(u: &Field, v: &Field, params: &ProblemParams) -> Result<Self> {
        let j = action_general(u, v, params)?;
        let (f1, f2) = nehari_defects(u, v, params)?;
        Ok(EnergyReport {
            j: Some(j),
            f1,
            f2,
            a: self_interaction(u, params.p(), params.alpha())?,
            b: self_interaction(v, params.q(), params.alpha())?,
            c_est: Some(j),
            ..Default::default()
        })
    }

    pub fn for_scalar(w: &Field, params: &ProblemParams) -> Result<Self> {
        let a = scalar_action(w, params)?;
        let q = quotient_q(w, params)?;
        let d = self_interaction(w, params.p(), params.alpha())?;
        let defect = w.h1_norm_sq(params.tau()) - d;
        Ok(EnergyReport {
            j: Some(2.0 * a),
            a_scalar: Some(a),
            q: Some(q),
            f1: defect,
            f2: defect,
            a: d,
            b: d,
            s_est: Some(q),
            t_est: Some(a),
            c_est: None,
        })
    }
}
