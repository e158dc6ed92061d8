//! Ground-state solvers.
//!
//! The descent solvers take preconditioned gradient steps
//! `w ← w − s (-Δ + τ)^{-1} r(w)`, clip to nonnegative values, rescale back
//! onto the Nehari constraint and backtrack on `s` until the action does not
//! increase. A unit step is exactly one Picard sweep followed by the rescaling.
//! Once the decrease is lost in the rounding of the action, a step that keeps
//! the action within that noise and lowers the residual is accepted instead.
//!
//! After every step the state is translated so that the phase of its lowest
//! Fourier mode places the bump at the lattice origin. The continuum problem is
//! translation invariant and the lattice breaks this only weakly, so without
//! the gauge fix the iterates creep along an almost flat direction.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{
    action_general, pair_nehari_scales, scalar_action, scalar_nehari_scale, EnergyReport,
};
use crate::grid::{signed_mode, Field, Grid};
use crate::params::ProblemParams;
use crate::potentials::{bessel_solve, riesz_convolve};

const COLLAPSE_RATIO: f64 = 1e-12;
const MAX_BACKTRACKS: usize = 40;
const ENERGY_SLACK: f64 = 1e-14;
const NOISE_AMPLITUDE: f64 = 0.01;
const ENERGY_NOISE: f64 = 1e-13;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub max_iters: usize,
    pub tol_residual: f64,
    pub step0: f64,
    pub backtrack: f64,
    pub seed: u64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            max_iters: 2000,
            tol_residual: 1e-8,
            step0: 1.0,
            backtrack: 0.5,
            seed: 0,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_residual > 0.0) {
            return Err(Error::InvalidParams("tol_residual must be positive".into()));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::InvalidParams("backtrack must lie in (0, 1)".into()));
        }
        if !(self.step0 > 0.0 && self.step0.is_finite()) {
            return Err(Error::InvalidParams("step0 must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub energy_history: Vec<f64>,
    pub energy: EnergyReport,
    pub converged: bool,
}

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    Scalar,
    System,
}

fn nonlinear_terms(kind: Kind, params: &ProblemParams, st: &[Field]) -> Result<Vec<Field>> {
    let alpha = params.alpha();
    match kind {
        Kind::Scalar => {
            let w = &st[0];
            let phi = riesz_convolve(&w.pointwise_power(params.p(), false), alpha)?;
            Ok(vec![phi.mul(&w.pointwise_power(params.p() - 1.0, true))?])
        }
        Kind::System => {
            let (u, v) = (&st[0], &st[1]);
            let (p, q) = (params.p(), params.q());
            let phi_v = riesz_convolve(&v.pointwise_power(q, false), alpha)?;
            let psi_u = riesz_convolve(&u.pointwise_power(p, false), alpha)?;
            let c1 = 2.0 * p / (p + q);
            let c2 = 2.0 * q / (p + q);
            Ok(vec![
                phi_v.mul(&u.pointwise_power(p - 1.0, true))?.scale(c1),
                psi_u.mul(&v.pointwise_power(q - 1.0, true))?.scale(c2),
            ])
        }
    }
}

fn frequencies(kind: Kind, params: &ProblemParams) -> Vec<f64> {
    match kind {
        Kind::Scalar => vec![params.tau()],
        Kind::System => vec![params.tau(), params.eta()],
    }
}

fn residuals(kind: Kind, params: &ProblemParams, st: &[Field]) -> Result<(Vec<Field>, f64)> {
    let nl = nonlinear_terms(kind, params, st)?;
    let mut res = Vec::with_capacity(st.len());
    let (mut num, mut den) = (0.0, 0.0);
    for ((f, n), freq) in st.iter().zip(&nl).zip(frequencies(kind, params)) {
        let hf = f.helmholtz(freq);
        let r = hf.sub(n)?;
        num += r.l2_norm().powi(2);
        den += hf.l2_norm().powi(2);
        res.push(r);
    }
    let rel = if den > 0.0 { (num / den).sqrt() } else { f64::INFINITY };
    Ok((res, rel))
}

fn project(kind: Kind, params: &ProblemParams, st: Vec<Field>) -> Result<Vec<Field>> {
    match kind {
        Kind::Scalar => {
            let k = scalar_nehari_scale(&st[0], params)?;
            Ok(vec![st[0].scale(k)])
        }
        Kind::System => {
            let (s, t) = pair_nehari_scales(&st[0], &st[1], params)?;
            Ok(vec![st[0].scale(s), st[1].scale(t)])
        }
    }
}

fn energy(kind: Kind, params: &ProblemParams, st: &[Field]) -> Result<f64> {
    match kind {
        Kind::Scalar => scalar_action(&st[0], params),
        Kind::System => action_general(&st[0], &st[1], params),
    }
}

fn total_norm(st: &[Field]) -> f64 {
    st.iter().map(|f| f.l2_norm().powi(2)).sum::<f64>().sqrt()
}

/// Displacement of a bump from the origin, read off the phase of the first
/// Fourier mode on each axis.
fn phase_center(f: &Field) -> Vec<f64> {
    let grid = f.grid();
    let n = grid.points();
    let dim = grid.dim();
    let spec = grid.forward(f.values());
    let k1 = PI / grid.half_width();
    (0..dim)
        .map(|axis| {
            let stride = n.pow((dim - 1 - axis) as u32);
            debug_assert_eq!(signed_mode(1, n), 1);
            // Sample positions start at -L, contributing a factor e^{-i k₁ (-L)}... = -1.
            let c = -spec[stride];
            -c.arg() / k1
        })
        .collect()
}

fn gauge_fix(st: &[Field]) -> Result<Vec<Field>> {
    let mut sum = st[0].clone();
    for f in &st[1..] {
        sum = sum.add(f)?;
    }
    let shift: Vec<f64> = phase_center(&sum).iter().map(|x| -x).collect();
    Ok(st
        .iter()
        .map(|f| f.translate(&shift).map(|x| x.max(0.0)))
        .collect())
}

fn smooth_noise(grid: &Grid, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = grid.dim();
    let base = PI / grid.half_width();
    let modes: Vec<([f64; 3], f64, f64)> = (0..6)
        .map(|_| {
            let mut k = [0.0; 3];
            for kk in k.iter_mut().take(dim) {
                *kk = base * rng.gen_range(-3i32..=3) as f64;
            }
            (k, rng.gen_range(0.0..2.0 * PI), rng.gen_range(-1.0..1.0))
        })
        .collect();
    let raw = Field::from_fn(grid, |x| {
        modes
            .iter()
            .map(|(k, phase, amp)| {
                let kx: f64 = x.iter().zip(k).map(|(a, b)| a * b).sum();
                amp * (kx + phase).cos()
            })
            .sum()
    })
    .expect("finite noise");
    let m = raw.max_abs();
    if m > 0.0 {
        raw.scale(1.0 / m)
    } else {
        raw
    }
}

/// Centered Gaussian of width `L/8` with 1% smooth multiplicative noise.
pub fn initial_bump(grid: &Grid, seed: u64) -> Field {
    let sigma = grid.half_width() / 8.0;
    let noise = smooth_noise(grid, seed);
    let g = Field::from_fn(grid, |x| {
        let r2: f64 = x.iter().map(|a| a * a).sum();
        (-r2 / (2.0 * sigma * sigma)).exp()
    })
    .expect("finite gaussian");
    g.zip_with(&noise, |a, b| a * (1.0 + NOISE_AMPLITUDE * b))
        .expect("same grid")
}

/// The system's starting pair `(g, (1+a) g (1 + (a/3) x₁/σ))`. The amplitude
/// skew and the odd dipole both break the swap symmetry when `a ≠ 0`.
pub fn initial_pair(grid: &Grid, seed: u64, asymmetry: f64) -> (Field, Field) {
    let g = initial_bump(grid, seed);
    let sigma = grid.half_width() / 8.0;
    let dipole = Field::from_fn(grid, |x| 1.0 + asymmetry / 3.0 * x[0] / sigma).expect("finite");
    let v = g
        .mul(&dipole)
        .expect("same grid")
        .map(|x| ((1.0 + asymmetry) * x).max(0.0));
    (g, v)
}

fn descend(
    kind: Kind,
    params: &ProblemParams,
    init: Vec<Field>,
    config: &SolveConfig,
) -> Result<(Vec<Field>, SolveReport)> {
    config.validate()?;
    let initial_norm = total_norm(&init);
    if initial_norm == 0.0 {
        return Err(Error::Degenerate("initial state is zero".into()));
    }
    let freqs = frequencies(kind, params);
    let mut st = project(kind, params, init.iter().map(|f| f.map(|x| x.max(0.0))).collect())?;
    let mut e = energy(kind, params, &st)?;
    let mut residual_history = Vec::new();
    let mut energy_history = vec![e];
    let mut step = config.step0;
    let mut converged = false;
    let mut iterations = 0;

    loop {
        let (res, rel) = residuals(kind, params, &st)?;
        residual_history.push(rel);
        if rel <= config.tol_residual {
            converged = true;
            break;
        }
        if iterations >= config.max_iters {
            break;
        }
        iterations += 1;

        let grad: Vec<Field> = res
            .iter()
            .zip(&freqs)
            .map(|(r, &f)| bessel_solve(r, f))
            .collect::<Result<_>>()?;
        let mut s = step;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let cand: Vec<Field> = st
                .iter()
                .zip(&grad)
                .map(|(f, g)| f.axpby(1.0, g, -s).map(|x| x.map(|y| y.max(0.0))))
                .collect::<Result<_>>()?;
            let ratio = total_norm(&cand) / initial_norm;
            if ratio < COLLAPSE_RATIO || cand.iter().any(|f| f.max() == 0.0) {
                return Err(Error::Collapse {
                    iteration: iterations,
                    norm_ratio: ratio,
                });
            }
            let cand = project(kind, params, cand)?;
            let ec = energy(kind, params, &cand)?;
            if ec <= e + ENERGY_SLACK * e.abs() {
                accepted = Some((cand, ec));
                break;
            }
            // Near convergence the true decrease drops below the rounding
            // noise of the energy, so fall back to the residual.
            if ec <= e + ENERGY_NOISE * e.abs() && residuals(kind, params, &cand)?.1 < rel {
                accepted = Some((cand, ec));
                break;
            }
            s *= config.backtrack;
        }
        match accepted {
            Some((cand, _)) => {
                st = gauge_fix(&cand)?;
                e = energy(kind, params, &st)?;
                energy_history.push(e);
                step = (s / config.backtrack).min(config.step0);
            }
            None => break,
        }
    }

    let energy = match kind {
        Kind::Scalar => EnergyReport::for_scalar(&st[0], params)?,
        Kind::System => EnergyReport::for_system(&st[0], &st[1], params)?,
    };
    Ok((
        st,
        SolveReport {
            iterations,
            residual_history,
            energy_history,
            energy,
            converged,
        },
    ))
}

fn check_scalar(params: &ProblemParams) -> Result<()> {
    if params.scalar_admissible() {
        Ok(())
    } else {
        Err(Error::InvalidParams(
            "scalar solve requires 1 + alpha/N < p < 2*_alpha/2".into(),
        ))
    }
}

fn check_system(params: &ProblemParams) -> Result<()> {
    let v = params.check_h1();
    if v.admissible {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!(
            "system solve requires (H1); violated: {}",
            v.violations.join(", ")
        )))
    }
}

fn check_grid(params: &ProblemParams, grid: &Grid) -> Result<()> {
    if params.dimension() == grid.dim() {
        Ok(())
    } else {
        Err(Error::InvalidGrid(format!(
            "grid dimension {} differs from N = {}",
            grid.dim(),
            params.dimension()
        )))
    }
}

/// Scalar ground state from the default Gaussian start. Uses `p` and `τ`.
pub fn solve_scalar(
    params: &ProblemParams,
    grid: &Grid,
    config: &SolveConfig,
) -> Result<(Field, SolveReport)> {
    check_grid(params, grid)?;
    solve_scalar_from(params, initial_bump(grid, config.seed), config)
}

pub fn solve_scalar_from(
    params: &ProblemParams,
    init: Field,
    config: &SolveConfig,
) -> Result<(Field, SolveReport)> {
    check_scalar(params)?;
    check_grid(params, init.grid())?;
    let (mut st, report) = descend(Kind::Scalar, params, vec![init], config)?;
    Ok((st.remove(0), report))
}

pub fn solve_system(
    params: &ProblemParams,
    grid: &Grid,
    config: &SolveConfig,
    init_asymmetry: f64,
) -> Result<(Field, Field, SolveReport)> {
    check_grid(params, grid)?;
    let (u, v) = initial_pair(grid, config.seed, init_asymmetry);
    solve_system_from(params, u, v, config)
}

pub fn solve_system_from(
    params: &ProblemParams,
    u: Field,
    v: Field,
    config: &SolveConfig,
) -> Result<(Field, Field, SolveReport)> {
    check_system(params)?;
    check_grid(params, u.grid())?;
    u.same_grid(&v)?;
    let (mut st, report) = descend(Kind::System, params, vec![u, v], config)?;
    let v = st.pop().expect("two components");
    let u = st.pop().expect("two components");
    Ok((u, v, report))
}

/// One sweep of the integral identities
/// `u⁺ = c₁ (-Δ+τ)^{-1}(φ_v |u|^{p-2}u)`, `v⁺ = c₂ (-Δ+η)^{-1}(ψ_u |v|^{q-2}v)`.
pub fn picard_step(u: &Field, v: &Field, params: &ProblemParams) -> Result<(Field, Field)> {
    u.same_grid(v)?;
    let nl = nonlinear_terms(Kind::System, params, &[u.clone(), v.clone()])?;
    Ok((
        bessel_solve(&nl[0], params.tau())?,
        bessel_solve(&nl[1], params.eta())?,
    ))
}

pub fn solve_picard(
    params: &ProblemParams,
    grid: &Grid,
    config: &SolveConfig,
    init_asymmetry: f64,
    rescale: bool,
) -> Result<(Field, Field, SolveReport)> {
    check_grid(params, grid)?;
    let (u, v) = initial_pair(grid, config.seed, init_asymmetry);
    solve_picard_from(params, u, v, config, rescale)
}

/// Picard iteration. With `rescale` each sweep is followed by the Nehari
/// rescaling; without it the map is homogeneous of degree `p+q-1` and small
/// states contract to zero, which is reported as [`Error::Collapse`].
/// The residual is `(‖u⁺−u‖ + ‖v⁺−v‖) / (‖u‖ + ‖v‖)`.
pub fn solve_picard_from(
    params: &ProblemParams,
    u: Field,
    v: Field,
    config: &SolveConfig,
    rescale: bool,
) -> Result<(Field, Field, SolveReport)> {
    config.validate()?;
    check_system(params)?;
    check_grid(params, u.grid())?;
    u.same_grid(&v)?;
    let initial_norm = total_norm(&[u.clone(), v.clone()]);
    if initial_norm == 0.0 {
        return Err(Error::Degenerate("initial state is zero".into()));
    }
    let mut st = vec![u.map(|x| x.max(0.0)), v.map(|x| x.max(0.0))];
    if rescale {
        st = project(Kind::System, params, st)?;
    }
    let mut residual_history = Vec::new();
    let mut energy_history = vec![action_general(&st[0], &st[1], params)?];
    let mut converged = false;
    let mut iterations = 0;
    loop {
        let (un, vn) = picard_step(&st[0], &st[1], params)?;
        let next = vec![un.map(|x| x.max(0.0)), vn.map(|x| x.max(0.0))];
        let ratio = total_norm(&next) / initial_norm;
        if ratio < COLLAPSE_RATIO || next.iter().any(|f| f.max() == 0.0) {
            return Err(Error::Collapse {
                iteration: iterations,
                norm_ratio: ratio,
            });
        }
        let mut next = gauge_fix(&next)?;
        if rescale {
            next = project(Kind::System, params, next)?;
        }
        let change = next[0].sub(&st[0])?.l2_norm() + next[1].sub(&st[1])?.l2_norm();
        let rel = change / (st[0].l2_norm() + st[1].l2_norm());
        residual_history.push(rel);
        if rel <= config.tol_residual {
            converged = true;
            st = next;
            break;
        }
        if iterations >= config.max_iters {
            break;
        }
        iterations += 1;
        st = next;
        energy_history.push(action_general(&st[0], &st[1], params)?);
    }
    let energy = EnergyReport::for_system(&st[0], &st[1], params)?;
    let v = st.pop().expect("two components");
    let u = st.pop().expect("two components");
    Ok((
        u,
        v,
        SolveReport {
            iterations,
            residual_history,
            energy_history,
            energy,
            converged,
        },
    ))
}
