//! Checks applied to computed states: radial symmetry and monotonicity,
//! reflection comparisons, the classification ledger relating `a`, `b`, `S`
//! and the action levels, the `τ`-rescaling map and the admissible-region
//! raster.
//!
//! Fields are centered at the lattice origin, index `n/2` on every axis.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{
    action_j, nehari_defects, quotient_q, scalar_action, scalar_nehari_scale, self_interaction,
};
use crate::grid::{Field, Grid};
use crate::params::{two_alpha_star, two_star, ProblemParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckStatus {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyCheck {
    pub name: String,
    pub deviation: Option<f64>,
    pub tolerance: f64,
    pub status: CheckStatus,
}

impl VerifyCheck {
    /// Passes iff `deviation ≤ tolerance`; a NaN deviation fails.
    pub fn measured(name: impl Into<String>, deviation: f64, tolerance: f64) -> Self {
        VerifyCheck {
            name: name.into(),
            deviation: Some(deviation),
            tolerance,
            status: if deviation <= tolerance {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            },
        }
    }

    pub fn not_applicable(name: impl Into<String>, tolerance: f64) -> Self {
        VerifyCheck {
            name: name.into(),
            deviation: None,
            tolerance,
            status: CheckStatus::NotApplicable,
        }
    }

    pub fn passed(&self) -> bool {
        self.status != CheckStatus::Fail
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<VerifyCheck>,
}

impl VerifyReport {
    pub fn push(&mut self, check: VerifyCheck) {
        self.checks.push(check);
    }

    pub fn extend(&mut self, other: VerifyReport) {
        self.checks.extend(other.checks);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(VerifyCheck::passed)
    }

    pub fn get(&self, name: &str) -> Option<&VerifyCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &VerifyCheck> {
        self.checks.iter().filter(|c| !c.passed())
    }
}

/// Integer shift that moves the (interpolated) maximum of `f` to the origin.
pub fn recenter_shift(f: &Field) -> Result<Vec<i64>> {
    if f.max() == f.min() {
        return Err(Error::Degenerate("cannot recenter a constant field".into()));
    }
    let grid = f.grid();
    let n = grid.points();
    let dim = grid.dim();
    let peak = f.argmax();
    let idx = grid.unflatten(peak);
    let vals = f.values();
    let origin = grid.origin_index() as i64;
    Ok((0..dim)
        .map(|axis| {
            let neighbor = |d: i64| {
                let mut j = idx;
                j[axis] = (idx[axis] as i64 + d).rem_euclid(n as i64) as usize;
                vals[grid.flatten(&j)]
            };
            let (fm, f0, fp) = (neighbor(-1), vals[peak], neighbor(1));
            let curvature = fm - 2.0 * f0 + fp;
            let offset = if curvature < 0.0 {
                0.5 * (fm - fp) / curvature
            } else {
                0.0
            };
            origin - (idx[axis] as f64 + offset).round() as i64
        })
        .collect())
}

pub fn recenter(f: &Field) -> Result<Field> {
    Ok(f.roll(&recenter_shift(f)?))
}

/// Recenters `u` and applies the same shift to `v`. Also returns the distance
/// in cells between the two maxima after the shift.
pub fn recenter_pair(u: &Field, v: &Field) -> Result<(Field, Field, f64)> {
    u.same_grid(v)?;
    let shift = recenter_shift(u)?;
    let (ru, rv) = (u.roll(&shift), v.roll(&shift));
    let grid = u.grid();
    let (iu, iv) = (grid.unflatten(ru.argmax()), grid.unflatten(rv.argmax()));
    let n = grid.points() as f64;
    let dist = (0..grid.dim())
        .map(|a| {
            let d = (iu[a] as f64 - iv[a] as f64).abs();
            d.min(n - d).powi(2)
        })
        .sum::<f64>()
        .sqrt();
    Ok((ru, rv, dist))
}

/// Squared integer lattice radius about the origin index, per flat index.
fn shell_keys(grid: &Grid) -> Vec<u64> {
    let o = grid.origin_index() as i64;
    (0..grid.len())
        .map(|i| {
            let idx = grid.unflatten(i);
            idx[..grid.dim()]
                .iter()
                .map(|&j| ((j as i64 - o) * (j as i64 - o)) as u64)
                .sum()
        })
        .collect()
}

/// Shell means of `f` over exact lattice shells, in ascending radius.
fn shell_means(f: &Field) -> (Vec<u64>, BTreeMap<u64, f64>) {
    let keys = shell_keys(f.grid());
    let mut acc: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for (k, &v) in keys.iter().zip(f.values()) {
        let e = acc.entry(*k).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
    }
    let means = acc.into_iter().map(|(k, (s, c))| (k, s / c as f64)).collect();
    (keys, means)
}

/// Replaces each value by the mean over its lattice shell about the origin.
pub fn radialize(f: &Field) -> Field {
    let (keys, means) = shell_means(f);
    let values = keys.iter().map(|k| means[k]).collect();
    Field::new(f.grid(), values).expect("means of finite values")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialDeviation {
    /// `‖f − radialize(f)‖₂ / ‖f‖₂`.
    pub deviation: f64,
    /// Largest increase between consecutive shell means, absolute.
    pub monotonicity_violation: f64,
}

/// Distance of a recentered field from its radialization, and the worst
/// increase of the radial profile. Shells are the sets of lattice points with
/// equal `|x|`.
pub fn radial_deviation(f: &Field) -> RadialDeviation {
    let norm = f.l2_norm();
    let radial = radialize(f);
    let deviation = if norm == 0.0 {
        0.0
    } else {
        f.sub(&radial).expect("same grid").l2_norm() / norm
    };
    let (_, means) = shell_means(f);
    let profile: Vec<f64> = means.values().copied().collect();
    let monotonicity_violation = profile
        .windows(2)
        .map(|w| (w[1] - w[0]).max(0.0))
        .fold(0.0, f64::max);
    RadialDeviation {
        deviation,
        monotonicity_violation,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReflectionSpec {
    pub lambda: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HalfSpace {
    /// `x₁ − λ ∈ [0, L)` on the torus.
    Upper,
    /// `λ − x₁ ∈ [0, L)` on the torus.
    Lower,
}

/// `f(x^λ)` with `x^λ = (2λ − x₁, x₂, …)`, periodic. Exact when `2λ` is a
/// multiple of the spacing, band-limited interpolation otherwise.
pub fn reflect(f: &Field, lambda: f64) -> Field {
    let grid = f.grid();
    let n = grid.points();
    let dim = grid.dim();
    let stride = n.pow((dim - 1) as u32);
    // Reflection through x₁ = 0 maps index j to (n − j) mod n.
    let mut mirrored = vec![0.0; f.values().len()];
    for (i, &v) in f.values().iter().enumerate() {
        let j = i / stride;
        let rest = i % stride;
        mirrored[((n - j) % n) * stride + rest] = v;
    }
    let mirrored = Field::new(grid, mirrored).expect("finite");
    let cells = 2.0 * lambda / grid.spacing();
    let mut shift = vec![0.0; dim];
    if (cells - cells.round()).abs() < 1e-9 {
        let mut roll = vec![0i64; dim];
        roll[0] = cells.round() as i64;
        return mirrored.roll(&roll);
    }
    shift[0] = 2.0 * lambda;
    mirrored.translate(&shift)
}

/// `max (f(x^λ) − f(x))₊` over the chosen half of the torus.
pub fn reflection_defect(f: &Field, lambda: f64, side: HalfSpace) -> Result<f64> {
    let grid = f.grid();
    let l = grid.half_width();
    if !(lambda.abs() < l) {
        return Err(Error::PlaneOutsideBox {
            lambda,
            half_width: l,
        });
    }
    let reflected = reflect(f, lambda);
    let stride = grid.points().pow((grid.dim() - 1) as u32);
    let period = 2.0 * l;
    let mut worst: f64 = 0.0;
    for (i, (&a, &b)) in reflected.values().iter().zip(f.values()).enumerate() {
        let x1 = grid.coordinate(i / stride);
        let d = match side {
            HalfSpace::Upper => (x1 - lambda).rem_euclid(period),
            HalfSpace::Lower => (lambda - x1).rem_euclid(period),
        };
        if d < l {
            worst = worst.max(a - b);
        }
    }
    Ok(worst)
}

/// Reflection comparison on the half-space `x₁ > λ`. The torus is periodic,
/// so a reflection through `x₁ = λ` is also one through `x₁ = λ + L`; the
/// comparison region is the half-torus between the two planes.
pub fn reflection_check(f: &Field, spec: ReflectionSpec) -> Result<f64> {
    reflection_defect(f, spec.lambda, HalfSpace::Upper)
}

/// Tolerances for the symmetry checks, all relative to the peak value
/// except `radial`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetryTolerances {
    pub radial: f64,
    pub monotonicity: f64,
    pub reflection: f64,
}

impl Default for SymmetryTolerances {
    fn default() -> Self {
        SymmetryTolerances {
            radial: 1e-3,
            monotonicity: 1e-6,
            reflection: 1e-8,
        }
    }
}

/// Radial, monotonicity and reflection checks on an already recentered field,
/// named `{label}_…`.
pub fn symmetry_checks(label: &str, f: &Field, tol: &SymmetryTolerances) -> Result<VerifyReport> {
    let peak = f.max();
    if !(peak > 0.0) {
        return Err(Error::Degenerate(format!("{label} has no positive peak")));
    }
    let rd = radial_deviation(f);
    let mut report = VerifyReport::default();
    report.push(VerifyCheck::measured(
        format!("{label}_radial_deviation"),
        rd.deviation,
        tol.radial,
    ));
    report.push(VerifyCheck::measured(
        format!("{label}_monotonicity"),
        rd.monotonicity_violation / peak,
        tol.monotonicity,
    ));
    let l = f.grid().half_width();
    for (tag, lambda) in [("minus_quarter", -l / 4.0), ("minus_eighth", -l / 8.0), ("zero", 0.0)] {
        let d = reflection_check(f, ReflectionSpec { lambda })?;
        report.push(VerifyCheck::measured(
            format!("{label}_reflection_{tag}"),
            d / peak,
            tol.reflection,
        ));
    }
    Ok(report)
}

/// Checks relating a system state `(u, v)` to the scalar ground state `w`:
/// the two-sided bounds on `‖u‖²`, the constraint identities, `a = b = S^{p/(p-1)}`,
/// the level chain, `J(u,v) ≤ J(w,w)`, `J(u,v) = 2𝒜(w)` and `u ≈ ±v`.
/// Requires `p = q` and `τ = η`.
pub fn classification_report(
    u: &Field,
    v: &Field,
    w: &Field,
    params: &ProblemParams,
    tolerance: f64,
) -> Result<VerifyReport> {
    if !params.is_symmetric() {
        return Err(Error::Unsupported("p = q and tau = eta".into()));
    }
    u.same_grid(v)?;
    u.same_grid(w)?;
    let (p, tau, alpha) = (params.p(), params.tau(), params.alpha());
    let s = quotient_q(w, params)?;
    let level = s.powf(p / (p - 1.0));
    let a = self_interaction(u, p, alpha)?;
    let b = self_interaction(v, p, alpha)?;
    let (nu, nv) = (u.h1_norm_sq(tau), v.h1_norm_sq(tau));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::Degenerate("classification needs nonzero u and v".into()));
    }
    let rel_excess = |lhs: f64, rhs: f64| (lhs - rhs).max(0.0) / rhs.abs();

    let mut r = VerifyReport::default();
    r.push(VerifyCheck::measured(
        "lower_bound",
        rel_excess(s * a.powf(1.0 / p), nu).max(rel_excess(s * b.powf(1.0 / p), nv)),
        tolerance,
    ));
    let geo = (a * b).sqrt();
    r.push(VerifyCheck::measured(
        "upper_bound",
        (rel_excess(nu, geo)).max(rel_excess(nv, geo)),
        tolerance,
    ));
    let (f1, f2) = nehari_defects(u, v, params)?;
    r.push(VerifyCheck::measured(
        "nehari_identities",
        (f1.abs() / nu).max(f2.abs() / nv),
        tolerance,
    ));
    r.push(VerifyCheck::measured(
        "a_b_equal_s_power",
        ((a - level).abs() / level).max((b - level).abs() / level),
        tolerance,
    ));
    let (ra, rb) = (a.powf(1.0 / p), b.powf(1.0 / p));
    r.push(VerifyCheck::measured(
        "a_equals_b",
        (ra - rb).abs() / ra.max(rb),
        tolerance,
    ));
    let jww = action_j(w, w, params)?;
    let chain = (p - 1.0) / p * level;
    r.push(VerifyCheck::measured(
        "level_chain",
        (jww - chain).abs() / jww.abs(),
        tolerance,
    ));
    let juv = action_j(u, v, params)?;
    r.push(VerifyCheck::measured(
        "system_level_below_diagonal",
        rel_excess(juv, jww),
        tolerance,
    ));
    let a_w = scalar_action(w, params)?;
    r.push(VerifyCheck::measured(
        "levels_agree",
        (juv - 2.0 * a_w).abs() / juv.abs(),
        tolerance,
    ));
    let diff = u.sub(v)?.l2_norm().min(u.add(v)?.l2_norm());
    r.push(VerifyCheck::measured(
        "u_equals_v",
        diff / u.l2_norm().max(v.l2_norm()),
        tolerance,
    ));
    Ok(r)
}

/// `|2𝒜(k w) − ((p−1)/p) S^{p/(p−1)}| / |2𝒜(k w)|` with `S = Q(w)` and `k`
/// the Nehari scaling of `w`.
pub fn scalar_level_identity(w: &Field, params: &ProblemParams) -> Result<f64> {
    let p = params.p();
    let s = quotient_q(w, params)?;
    let k = scalar_nehari_scale(w, params)?;
    let twice = 2.0 * scalar_action(&w.scale(k), params)?;
    Ok((twice - (p - 1.0) / p * s.powf(p / (p - 1.0))).abs() / twice.abs())
}

/// Amplitude exponents `(a, b)` of the frequency scaling
/// `(u, v) ↦ (s^a u(√s ·), s^b v(√s ·))`.
pub fn rescale_exponents(params: &ProblemParams) -> (f64, f64) {
    let (p, q) = (params.p(), params.q());
    let rhs = -(1.0 + params.alpha() / 2.0);
    let det = (2.0 - p) * (2.0 - q) - p * q;
    let a = ((2.0 - q) * rhs + q * rhs) / det;
    let b = ((2.0 - p) * rhs + p * rhs) / det;
    (a, b)
}

/// Fraction of spectral energy carried by the outer eighth of each axis band.
pub fn spectral_tail_fraction(f: &Field) -> f64 {
    let grid = f.grid();
    let n = grid.points();
    let cutoff = (n / 2 - n / 8) as i64;
    let spec = grid.forward(f.values());
    let (mut tail, mut total) = (0.0, 0.0);
    for (i, c) in spec.iter().enumerate() {
        let e = c.norm_sqr();
        total += e;
        let mut rest = i;
        let mut outer = false;
        for _ in 0..grid.dim() {
            let m = crate::grid::signed_mode(rest % n, n);
            rest /= n;
            outer |= m.abs() >= cutoff;
        }
        if outer {
            tail += e;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        tail / total
    }
}

/// Threshold on [`spectral_tail_fraction`] above which rescaling is refused.
pub const ALIASING_THRESHOLD: f64 = 1e-8;

/// Maps a solution with frequencies `(τ, η)` to one with `(sτ, sη)` where
/// `s = tau_new / τ`. The output lives on a box of half-width `L/√s` with the
/// same number of points, so each sample is the input sample times `s^a` or
/// `s^b`.
pub fn tau_rescale(
    u: &Field,
    v: &Field,
    tau_new: f64,
    params: &ProblemParams,
) -> Result<(Field, Field, ProblemParams)> {
    u.same_grid(v)?;
    if !(tau_new > 0.0 && tau_new.is_finite()) {
        return Err(Error::NonPositiveFrequency(tau_new));
    }
    for f in [u, v] {
        let tail = spectral_tail_fraction(f);
        if tail > ALIASING_THRESHOLD {
            return Err(Error::Aliasing(tail));
        }
    }
    let s = tau_new / params.tau();
    let grid = u.grid().with_half_width(u.grid().half_width() / s.sqrt())?;
    let (ea, eb) = rescale_exponents(params);
    let (fa, fb) = (s.powf(ea), s.powf(eb));
    let new_params = params.with_frequencies(s * params.tau(), s * params.eta())?;
    Ok((
        Field::new(&grid, u.values().iter().map(|x| fa * x).collect())?,
        Field::new(&grid, v.values().iter().map(|x| fb * x).collect())?,
        new_params,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionPoint {
    pub p: f64,
    pub q: f64,
    pub admissible: bool,
}

/// Upper end of the `(p, q)` raster when `2*` is infinite.
pub const UNBOUNDED_RASTER_LIMIT: f64 = 8.0;

/// Evaluates the hypothesis set `2 ≤ p, q < 2*`, `p + q < 2*_α` at the cell
/// centers of a `resolution × resolution` raster over `[1, 2*]²`.
pub fn region_plot_data(dimension: usize, alpha: f64, resolution: usize) -> Result<Vec<RegionPoint>> {
    if resolution < 16 {
        return Err(Error::InvalidParams(format!(
            "resolution {resolution} below the minimum of 16"
        )));
    }
    // Validates N and α.
    ProblemParams::symmetric(dimension, alpha, 2.0, 1.0)?;
    let upper = two_star(dimension).finite().unwrap_or(UNBOUNDED_RASTER_LIMIT);
    let ts = two_star(dimension);
    let tas = two_alpha_star(dimension, alpha);
    let step = (upper - 1.0) / resolution as f64;
    let coords: Vec<f64> = (0..resolution).map(|i| 1.0 + (i as f64 + 0.5) * step).collect();
    let mut out = Vec::with_capacity(resolution * resolution);
    for &p in &coords {
        for &q in &coords {
            let admissible = 2.0 <= p
                && 2.0 <= q
                && ts.exceeds(p)
                && ts.exceeds(q)
                && tas.exceeds(p + q);
            out.push(RegionPoint { p, q, admissible });
        }
    }
    Ok(out)
}

/// CSV with header `p,q,admissible`; admissible is written as `1` or `0`.
pub fn region_csv(points: &[RegionPoint]) -> String {
    let mut s = String::from("p,q,admissible\n");
    for pt in points {
        let _ = writeln!(s, "{},{},{}", pt.p, pt.q, u8::from(pt.admissible));
    }
    s
}
