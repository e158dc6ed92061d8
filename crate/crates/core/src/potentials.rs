//! Riesz potential `I_α ∗ f` and Bessel resolvent `(-Δ + τ)^{-1} f`.
//!
//! The Riesz kernel is singular at `k = 0` on a torus, so a plain periodic
//! multiplier `|k|^{-α}` cannot represent a free-space convolution. Instead the
//! field is zero-padded onto a box twice as wide and convolved with the kernel
//! truncated to `|x| < R = 2L`. The truncated kernel has a smooth Fourier
//! transform
//!
//! ```text
//!   K̂(k) = A(N,α) c_N |k|^{-α} G(|k| R),   G(X) = ∫_0^X s^{α-1} j_N(s) ds,
//! ```
//!
//! with `j_1 = cos`, `j_2 = J_0`, `j_3 = sin(s)/s` and `c_N` the sphere
//! measure factor. For points inside the original box every source within
//! distance `2L` is seen exactly and periodic images never interfere. The
//! padded wavenumbers are `π m / (2L)`, so `|k| R = π √(Σ m_i²)` and the table
//! depends on the integer `Σ m_i²` alone.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{mode_norm_sq, Field, Grid};
use crate::params::riesz_constant;

/// Padded-grid Fourier multiplier of the truncated Riesz kernel.
pub(crate) struct RieszKernel {
    multiplier: Vec<f64>,
}

fn radial_factor(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 4.0 * PI,
    }
}

/// Taylor coefficients of `j_N(s) = Σ c_m s^{2m}`.
fn series_coefficients(dim: usize, terms: usize) -> Vec<f64> {
    let mut c = Vec::with_capacity(terms);
    let mut term = 1.0;
    for m in 0..terms {
        c.push(term);
        let m1 = (m + 1) as f64;
        term *= -1.0
            / match dim {
                1 => (2.0 * m1 - 1.0) * (2.0 * m1),
                2 => 4.0 * m1 * m1,
                _ => (2.0 * m1) * (2.0 * m1 + 1.0),
            };
    }
    c
}

fn angular(dim: usize, s: f64) -> f64 {
    match dim {
        1 => s.cos(),
        2 => libm::j0(s),
        _ => {
            if s == 0.0 {
                1.0
            } else {
                s.sin() / s
            }
        }
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let n = order as f64;
    for i in 0..order.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=order {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if order == 1 {
                p0 = 1.0;
                p1 = x;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        nodes[order - 1 - i] = -x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}

/// `G(X) = ∫_0^X s^{α-1} j_N(s) ds` for every `X` in an ascending list.
fn cumulative_radial_integral(dim: usize, alpha: f64, xs: &[f64]) -> Vec<f64> {
    let coeffs = series_coefficients(dim, 24);
    let series = |x: f64| -> f64 {
        coeffs
            .iter()
            .enumerate()
            .map(|(m, c)| {
                let e = alpha + 2.0 * m as f64;
                c * x.powf(e) / e
            })
            .sum()
    };
    let (gx, gw) = gauss_legendre(20);
    let panel = |a: f64, b: f64| -> f64 {
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        gx.iter()
            .zip(&gw)
            .map(|(&t, &w)| {
                let s = mid + half * t;
                w * s.powf(alpha - 1.0) * angular(dim, s)
            })
            .sum::<f64>()
            * half
    };

    let mut out = Vec::with_capacity(xs.len());
    let (mut pos, mut acc) = (1.0, series(1.0));
    for &x in xs {
        if x <= 1.0 {
            out.push(series(x));
            continue;
        }
        while pos < x {
            let next = (pos + 1.0).min(x);
            acc += panel(pos, next);
            pos = next;
        }
        out.push(acc);
    }
    out
}

impl RieszKernel {
    pub(crate) fn new(grid: &Grid, alpha: f64) -> Result<Self> {
        let dim = grid.dim();
        let constant = riesz_constant(dim, alpha)?;
        let scale = constant * radial_factor(dim);
        let radius = 2.0 * grid.half_width();
        let np = 2 * grid.points();
        let total = np.pow(dim as u32);

        let shells: Vec<u64> = (0..total).map(|i| mode_norm_sq(i, np, dim)).collect();
        let mut distinct = shells.clone();
        distinct.sort_unstable();
        distinct.dedup();
        let xs: Vec<f64> = distinct.iter().map(|&s| PI * (s as f64).sqrt()).collect();
        let g = cumulative_radial_integral(dim, alpha, &xs);
        let per_shell: Vec<f64> = distinct
            .iter()
            .zip(&g)
            .map(|(&s, &gv)| {
                if s == 0 {
                    scale * radius.powf(alpha) / alpha
                } else {
                    let k = PI * (s as f64).sqrt() / radius;
                    // Tiny negative lobes are dropped so the bilinear form stays
                    // positive semidefinite.
                    (scale * k.powf(-alpha) * gv).max(0.0)
                }
            })
            .collect();
        let multiplier = shells
            .iter()
            .map(|s| per_shell[distinct.binary_search(s).expect("shell present")])
            .collect();
        Ok(RieszKernel { multiplier })
    }
}

fn check_alpha(dim: usize, alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < dim as f64 {
        Ok(())
    } else {
        Err(Error::AlphaOutOfRange {
            alpha,
            dimension: dim,
        })
    }
}

/// Zero-pads `values` into the doubled box and transforms it.
fn padded_spectrum(grid: &Grid, values: &[f64]) -> Vec<Complex64> {
    let n = grid.points();
    let np = 2 * n;
    let dim = grid.dim();
    let mut buf = vec![Complex64::default(); np.pow(dim as u32)];
    let off = n / 2;
    for (i, &v) in values.iter().enumerate() {
        let idx = grid.unflatten(i);
        let flat = idx[..dim].iter().fold(0, |acc, &j| acc * np + j + off);
        buf[flat] = Complex64::new(v, 0.0);
    }
    grid.padded_fft().forward(&mut buf);
    buf
}

/// `I_α ∗ f` with kernel `A(N,α)|x|^{α-N}`.
pub fn riesz_convolve(f: &Field, alpha: f64) -> Result<Field> {
    let grid = f.grid();
    let dim = grid.dim();
    check_alpha(dim, alpha)?;
    let kernel = grid.riesz_kernel(alpha)?;
    let mut spec = padded_spectrum(grid, f.values());
    for (c, &m) in spec.iter_mut().zip(&kernel.multiplier) {
        *c *= m;
    }
    grid.padded_fft().inverse(&mut spec);
    let inv = 1.0 / spec.len() as f64;
    let n = grid.points();
    let np = 2 * n;
    let off = n / 2;
    let values = (0..grid.len())
        .map(|i| {
            let idx = grid.unflatten(i);
            let flat = idx[..dim].iter().fold(0, |acc, &j| acc * np + j + off);
            spec[flat].re * inv
        })
        .collect();
    Field::new(grid, values)
}

/// `∫ (I_α ∗ f) g dμ`, evaluated symmetrically in Fourier space.
pub fn riesz_bilinear(f: &Field, g: &Field, alpha: f64) -> Result<f64> {
    f.same_grid(g)?;
    let grid = f.grid();
    check_alpha(grid.dim(), alpha)?;
    let kernel = grid.riesz_kernel(alpha)?;
    let fs = padded_spectrum(grid, f.values());
    let gs = padded_spectrum(grid, g.values());
    let s: f64 = fs
        .iter()
        .zip(&gs)
        .zip(&kernel.multiplier)
        .map(|((a, b), &m)| m * (a * b.conj()).re)
        .sum();
    Ok(s * grid.cell_volume() / fs.len() as f64)
}

/// Solves `(-Δ + τ) u = f` on the periodic box.
pub fn bessel_solve(f: &Field, tau: f64) -> Result<Field> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::NonPositiveFrequency(tau));
    }
    let values = f.grid().apply_multiplier(f.values(), |k2| 1.0 / (k2 + tau));
    Field::new(f.grid(), values)
}
