#![allow(dead_code)]

use std::f64::consts::PI;

use choquard_core::params::riesz_constant;
use choquard_core::{Field, Grid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `∫_{[-h/2,h/2]^N} |x|^{α-N} dx`.
///
/// Splitting the cell into `m^N` subcells, the central one is a copy of the
/// whole cell shrunk by `m`, whose integral is `m^{-α}` times the total. The
/// remaining subcells have smooth integrands and take a tensor Gauss rule, so
/// `I = S / (1 − m^{-α})`.
pub fn self_cell_integral(dim: usize, alpha: f64, h: f64) -> f64 {
    let m = 9usize;
    let sub = h / m as f64;
    let gauss = [
        (-0.774_596_669_241_483_4, 5.0 / 9.0),
        (0.0, 8.0 / 9.0),
        (0.774_596_669_241_483_4, 5.0 / 9.0),
    ];
    let centre = m / 2;
    let mut total = 0.0;
    let cells = m.pow(dim as u32);
    for c in 0..cells {
        let mut idx = [0usize; 3];
        let mut rest = c;
        for a in 0..dim {
            idx[a] = rest % m;
            rest /= m;
        }
        if idx[..dim].iter().all(|&i| i == centre) {
            continue;
        }
        let nodes = 3usize.pow(dim as u32);
        for g in 0..nodes {
            let mut rest = g;
            let mut r2 = 0.0;
            let mut w = 1.0;
            for a in 0..dim {
                let (t, wt) = gauss[rest % 3];
                rest /= 3;
                let lo = -h / 2.0 + idx[a] as f64 * sub;
                let x = lo + sub * (t + 1.0) / 2.0;
                r2 += x * x;
                w *= wt * sub / 2.0;
            }
            total += w * r2.powf((alpha - dim as f64) / 2.0);
        }
    }
    total / (1.0 - (m as f64).powf(-alpha))
}

/// Direct real-space quadrature of `A(N,α) ∫ f(y)|x−y|^{α−N} dy` over the box,
/// with the singular cell integrated exactly.
pub fn direct_riesz(f: &Field, alpha: f64) -> Vec<f64> {
    let grid = f.grid();
    let dim = grid.dim();
    let n = grid.points();
    let h = grid.spacing();
    let a = riesz_constant(dim, alpha).unwrap();
    // Kernel table over index differences in (-n, n) per axis.
    let span = 2 * n - 1;
    let len = span.pow(dim as u32);
    let mut table = vec![0.0; len];
    for (t, slot) in table.iter_mut().enumerate() {
        let mut rest = t;
        let mut r2 = 0.0;
        for _ in 0..dim {
            let d = (rest % span) as f64 - (n as f64 - 1.0);
            rest /= span;
            r2 += d * d;
        }
        *slot = if r2 == 0.0 {
            self_cell_integral(dim, alpha, h)
        } else {
            (r2.sqrt() * h).powf(alpha - dim as f64) * h.powi(dim as i32)
        };
    }
    let vals = f.values();
    let nonzero: Vec<(usize, [usize; 3])> = vals
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(i, _)| (i, grid.unflatten(i)))
        .collect();
    (0..grid.len())
        .map(|i| {
            let xi = grid.unflatten(i);
            let mut s = 0.0;
            for &(j, yj) in &nonzero {
                let mut t = 0;
                for ax in (0..dim).rev() {
                    t = t * span + (xi[ax] + n - 1 - yj[ax]);
                }
                s += table[t] * vals[j];
            }
            a * s
        })
        .collect()
}

pub fn relative_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

/// Sum of a few Gaussians with random centers, widths and weights, evaluated
/// at `x / scale` (so `scale > 1` dilates).
pub struct GaussianSum {
    terms: Vec<([f64; 3], f64, f64)>,
}

impl GaussianSum {
    pub fn random(rng: &mut ChaCha8Rng, dim: usize, count: usize, spread: f64) -> Self {
        let terms = (0..count)
            .map(|_| {
                let mut c = [0.0; 3];
                for v in c.iter_mut().take(dim) {
                    *v = rng.gen_range(-spread..spread);
                }
                (c, rng.gen_range(0.7..1.5), rng.gen_range(0.3..1.0))
            })
            .collect();
        GaussianSum { terms }
    }

    pub fn sample(&self, grid: &Grid, scale: f64) -> Field {
        Field::from_fn(grid, |x| {
            self.terms
                .iter()
                .map(|(c, w, amp)| {
                    let r2: f64 = x.iter().zip(c).map(|(a, b)| (a / scale - b).powi(2)).sum();
                    amp * (-r2 / (w * w)).exp()
                })
                .sum()
        })
        .unwrap()
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random trigonometric polynomial using only modes with `|m_i| ≤ max_mode`.
pub fn band_limited(grid: &Grid, rng: &mut ChaCha8Rng, max_mode: i32) -> Field {
    let dim = grid.dim();
    let base = PI / grid.half_width();
    let modes: Vec<([f64; 3], f64, f64)> = (0..12)
        .map(|_| {
            let mut k = [0.0; 3];
            for v in k.iter_mut().take(dim) {
                *v = base * rng.gen_range(-max_mode..=max_mode) as f64;
            }
            (k, rng.gen_range(0.0..2.0 * PI), rng.gen_range(-1.0..1.0))
        })
        .collect();
    Field::from_fn(grid, |x| {
        modes
            .iter()
            .map(|(k, ph, a)| a * (x.iter().zip(k).map(|(p, q)| p * q).sum::<f64>() + ph).cos())
            .sum()
    })
    .unwrap()
}

pub fn random_field(grid: &Grid, rng: &mut ChaCha8Rng) -> Field {
    Field::new(grid, (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}
