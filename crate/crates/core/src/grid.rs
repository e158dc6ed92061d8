//! Truncated periodic box `[-L, L)^N`, lattice fields and spectral transforms.
//!
//! Lattice points are `x_j = -L + j h` with `h = 2L/n`, stored row-major with
//! axis 0 slowest. The origin sits at index `n/2` on every axis. Wavenumbers
//! follow the FFT ordering `k = (π/L) m`, `m ∈ {0, …, n/2-1, -n/2, …, -1}`.
//! Integrals are the rectangle rule `h^N Σ f`, which is spectrally accurate
//! for periodic band-limited data.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::potentials::RieszKernel;

/// Largest points-per-axis accepted for three-dimensional grids.
pub const MAX_POINTS_3D: usize = 128;

const RIESZ_CACHE_SIZE: usize = 8;
const MAGIC: &[u8; 4] = b"CHQF";
pub const FORMAT_VERSION: u32 = 1;

/// Multi-dimensional complex FFT over a row-major cube, one axis at a time.
pub(crate) struct CubeFft {
    n: usize,
    dim: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl CubeFft {
    fn new(n: usize, dim: usize) -> Self {
        let mut planner = FftPlanner::new();
        CubeFft {
            n,
            dim,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub(crate) fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.forward);
    }

    /// Unnormalized inverse transform; callers divide by `len()`.
    pub(crate) fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inverse);
    }

    fn run(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        let total = data.len();
        debug_assert_eq!(total, self.len());
        let scratch_len = fft.get_inplace_scratch_len();
        let process = |lines: &mut [Complex64]| {
            lines.par_chunks_mut(n).for_each_init(
                || vec![Complex64::default(); scratch_len],
                |scratch, line| fft.process_with_scratch(line, scratch),
            );
        };
        for axis in 0..self.dim {
            let stride = n.pow((self.dim - 1 - axis) as u32);
            if stride == 1 {
                process(data);
                continue;
            }
            // Gather strided lines into contiguous storage, transform, scatter back.
            let block = n * stride;
            let mut lines = vec![Complex64::default(); total];
            for (b, chunk) in data.chunks(block).enumerate() {
                for i in 0..stride {
                    let dst = &mut lines[(b * stride + i) * n..(b * stride + i + 1) * n];
                    for (j, d) in dst.iter_mut().enumerate() {
                        *d = chunk[j * stride + i];
                    }
                }
            }
            process(&mut lines);
            for (b, chunk) in data.chunks_mut(block).enumerate() {
                for i in 0..stride {
                    let src = &lines[(b * stride + i) * n..(b * stride + i + 1) * n];
                    for (j, s) in src.iter().enumerate() {
                        chunk[j * stride + i] = *s;
                    }
                }
            }
        }
    }
}

/// Signed frequency index of FFT slot `j` on an `n`-point axis.
#[inline]
pub(crate) fn signed_mode(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// `Σ m_i²` of the signed frequency indices of a flat slot in an `n^dim` cube.
#[inline]
pub(crate) fn mode_norm_sq(mut flat: usize, n: usize, dim: usize) -> u64 {
    let mut s = 0u64;
    for _ in 0..dim {
        let m = signed_mode(flat % n, n);
        s += (m * m) as u64;
        flat /= n;
    }
    s
}

struct GridInner {
    dim: usize,
    half_width: f64,
    points: usize,
    k2: Vec<f64>,
    fft: CubeFft,
    padded_fft: CubeFft,
    riesz: Mutex<Vec<(u64, Arc<RieszKernel>)>>,
}

/// The computational box. Cheap to clone; clones share transform plans and caches.
#[derive(Clone)]
pub struct Grid {
    inner: Arc<GridInner>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.dim())
            .field("half_width", &self.half_width())
            .field("points", &self.points())
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.dim() == other.dim()
                && self.points() == other.points()
                && self.half_width().to_bits() == other.half_width().to_bits())
    }
}

impl Grid {
    pub fn new(dim: usize, half_width: f64, points: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidGrid(format!("half-width {half_width} must be positive")));
        }
        if points < 16 || !points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per axis {points} must be a power of two >= 16"
            )));
        }
        if dim == 3 && points > MAX_POINTS_3D {
            return Err(Error::InvalidGrid(format!(
                "three-dimensional grids are capped at {MAX_POINTS_3D} points per axis"
            )));
        }
        let total = points.pow(dim as u32);
        let base = std::f64::consts::PI / half_width;
        let k2 = (0..total)
            .map(|i| mode_norm_sq(i, points, dim) as f64 * base * base)
            .collect();
        Ok(Grid {
            inner: Arc::new(GridInner {
                dim,
                half_width,
                points,
                k2,
                fft: CubeFft::new(points, dim),
                padded_fft: CubeFft::new(2 * points, dim),
                riesz: Mutex::new(Vec::new()),
            }),
        })
    }

    pub fn dim(&self) -> usize {
        self.inner.dim
    }
    pub fn half_width(&self) -> f64 {
        self.inner.half_width
    }
    pub fn points(&self) -> usize {
        self.inner.points
    }
    pub fn len(&self) -> usize {
        self.inner.k2.len()
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn spacing(&self) -> f64 {
        2.0 * self.inner.half_width / self.inner.points as f64
    }
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim() as i32)
    }
    pub fn volume(&self) -> f64 {
        (2.0 * self.half_width()).powi(self.dim() as i32)
    }
    /// Lattice index of the coordinate origin on each axis.
    pub fn origin_index(&self) -> usize {
        self.points() / 2
    }

    /// `|k|²` per spectral slot, FFT ordering.
    pub fn wavenumbers_sq(&self) -> &[f64] {
        &self.inner.k2
    }

    pub fn coordinate(&self, j: usize) -> f64 {
        -self.half_width() + j as f64 * self.spacing()
    }

    /// Per-axis lattice indices of a flat index, axis 0 first.
    pub fn unflatten(&self, mut flat: usize) -> [usize; 3] {
        let n = self.points();
        let mut idx = [0usize; 3];
        for axis in (0..self.dim()).rev() {
            idx[axis] = flat % n;
            flat /= n;
        }
        idx
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx[..self.dim()]
            .iter()
            .fold(0, |acc, &i| acc * self.points() + i)
    }

    /// Cartesian coordinates of a flat index (unused axes are zero).
    pub fn point(&self, flat: usize) -> [f64; 3] {
        let idx = self.unflatten(flat);
        let mut x = [0.0; 3];
        for axis in 0..self.dim() {
            x[axis] = self.coordinate(idx[axis]);
        }
        x
    }

    pub(crate) fn fft(&self) -> &CubeFft {
        &self.inner.fft
    }

    pub(crate) fn padded_fft(&self) -> &CubeFft {
        &self.inner.padded_fft
    }

    pub(crate) fn riesz_kernel(&self, alpha: f64) -> Result<Arc<RieszKernel>> {
        let key = alpha.to_bits();
        let mut cache = self.inner.riesz.lock().expect("riesz cache poisoned");
        if let Some((_, k)) = cache.iter().find(|(a, _)| *a == key) {
            return Ok(Arc::clone(k));
        }
        let kernel = Arc::new(RieszKernel::new(self, alpha)?);
        if cache.len() >= RIESZ_CACHE_SIZE {
            cache.remove(0);
        }
        cache.push((key, Arc::clone(&kernel)));
        Ok(kernel)
    }

    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft().forward(&mut buf);
        buf
    }

    /// Normalized inverse transform, real part.
    pub fn inverse(&self, mut spectrum: Vec<Complex64>) -> Vec<f64> {
        self.fft().inverse(&mut spectrum);
        let scale = 1.0 / spectrum.len() as f64;
        spectrum.into_iter().map(|c| c.re * scale).collect()
    }

    /// Applies a radial Fourier multiplier `m(|k|²)`.
    pub fn apply_multiplier(&self, values: &[f64], m: impl Fn(f64) -> f64) -> Vec<f64> {
        let mut spec = self.forward(values);
        for (c, &k2) in spec.iter_mut().zip(self.wavenumbers_sq()) {
            *c *= m(k2);
        }
        self.inverse(spec)
    }

    /// A grid with the same dimension and resolution but a different half-width.
    pub fn with_half_width(&self, half_width: f64) -> Result<Grid> {
        Grid::new(self.dim(), half_width, self.points())
    }
}

/// A real-valued lattice function.
#[derive(Clone, Debug)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.values == other.values
    }
}

impl Field {
    pub fn new(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Degenerate("field contains non-finite values".into()));
        }
        Ok(Field {
            grid: grid.clone(),
            values,
        })
    }

    pub(crate) fn from_vec_unchecked(grid: &Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Field {
            grid: grid.clone(),
            values,
        }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Field::from_vec_unchecked(grid, vec![0.0; grid.len()])
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        Field::from_vec_unchecked(grid, vec![c; grid.len()])
    }

    /// Samples `f` at every lattice point. Non-finite samples are rejected.
    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let dim = grid.dim();
        let values = (0..grid.len())
            .map(|i| {
                let x = grid.point(i);
                f(&x[..dim])
            })
            .collect();
        Field::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn same_grid(&self, other: &Field) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_vec_unchecked(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.same_grid(other)?;
        Ok(Field::from_vec_unchecked(
            &self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn scale(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a * b)
    }

    /// `a·self + b·other`.
    pub fn axpby(&self, a: f64, other: &Field, b: f64) -> Result<Field> {
        self.zip_with(other, |x, y| a * x + b * y)
    }

    /// `∫ f dμ ≈ h^N Σ f`.
    pub fn integrate(&self) -> f64 {
        self.grid.cell_volume() * self.values.iter().sum::<f64>()
    }

    /// `∫ f g dμ`.
    pub fn dot(&self, other: &Field) -> Result<f64> {
        self.same_grid(other)?;
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        Ok(self.grid.cell_volume() * s)
    }

    pub fn l2_norm(&self) -> f64 {
        (self.grid.cell_volume() * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    /// `∫ |f|^r dμ` raised to `1/r`.
    pub fn lp_norm(&self, r: f64) -> f64 {
        let s: f64 = self.values.iter().map(|v| v.abs().powf(r)).sum();
        (self.grid.cell_volume() * s).powf(1.0 / r)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Flat index of the largest entry (first one on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        best
    }

    /// `∫ |∇f|² + freq·f² dμ`, evaluated as `(h^N/M) Σ (|k|² + freq)|f̂|²`.
    pub fn h1_norm_sq(&self, freq: f64) -> f64 {
        let spec = self.grid.forward(&self.values);
        let s: f64 = spec
            .iter()
            .zip(self.grid.wavenumbers_sq())
            .map(|(c, &k2)| (k2 + freq) * c.norm_sqr())
            .sum();
        s * self.grid.cell_volume() / spec.len() as f64
    }

    /// `(-Δ + freq) f`, spectrally.
    pub fn helmholtz(&self, freq: f64) -> Field {
        let v = self.grid.apply_multiplier(&self.values, |k2| k2 + freq);
        Field::from_vec_unchecked(&self.grid, v)
    }

    /// `|f|^r` when `signed` is false; `|f|^(r-1) f` when `signed` is true.
    /// Zero maps to zero for every `r > 0`.
    pub fn pointwise_power(&self, r: f64, signed: bool) -> Field {
        if signed {
            self.map(|v| {
                if v == 0.0 {
                    0.0
                } else {
                    v.abs().powf(r - 1.0) * v
                }
            })
        } else {
            self.map(|v| if v == 0.0 { 0.0 } else { v.abs().powf(r) })
        }
    }

    /// Periodic integer translation: output at index `j` is input at `j - shift`.
    pub fn roll(&self, shift: &[i64]) -> Field {
        let n = self.grid.points() as i64;
        let dim = self.grid.dim();
        let mut out = vec![0.0; self.values.len()];
        for (i, &v) in self.values.iter().enumerate() {
            let idx = self.grid.unflatten(i);
            let mut dst = [0usize; 3];
            for a in 0..dim {
                dst[a] = (idx[a] as i64 + shift[a]).rem_euclid(n) as usize;
            }
            out[self.grid.flatten(&dst)] = v;
        }
        Field::from_vec_unchecked(&self.grid, out)
    }

    /// Band-limited translation by a real displacement: `f(x - d)`.
    pub fn translate(&self, displacement: &[f64]) -> Field {
        let grid = &self.grid;
        let n = grid.points();
        let dim = grid.dim();
        let base = std::f64::consts::PI / grid.half_width();
        let mut spec = grid.forward(&self.values);
        for (flat, c) in spec.iter_mut().enumerate() {
            let mut rest = flat;
            let mut phase = 0.0;
            for axis in (0..dim).rev() {
                let m = signed_mode(rest % n, n);
                rest /= n;
                phase -= base * m as f64 * displacement[axis];
            }
            *c *= Complex64::from_polar(1.0, phase);
        }
        Field::from_vec_unchecked(grid, grid.inverse(spec))
    }

    /// Largest absolute value on the box faces relative to the peak magnitude.
    pub fn boundary_ratio(&self) -> f64 {
        let peak = self.max_abs();
        if peak == 0.0 {
            return 0.0;
        }
        let n = self.grid.points();
        let dim = self.grid.dim();
        let mut m: f64 = 0.0;
        for (i, v) in self.values.iter().enumerate() {
            let idx = self.grid.unflatten(i);
            if idx[..dim].iter().any(|&j| j == 0 || j == n - 1) {
                m = m.max(v.abs());
            }
        }
        m / peak
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let g = &self.grid;
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(g.dim() as u32).to_le_bytes())?;
        w.write_all(&(g.points() as u32).to_le_bytes())?;
        w.write_all(&g.half_width().to_le_bytes())?;
        let mut buf = Vec::with_capacity(8 * self.values.len());
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Field> {
        let mut head = [0u8; 24];
        r.read_exact(&mut head)?;
        if &head[0..4] != MAGIC {
            return Err(Error::Format("bad magic bytes".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(head[o..o + 4].try_into().unwrap());
        let version = u32_at(4);
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let dim = u32_at(8) as usize;
        let points = u32_at(12) as usize;
        let half_width = f64::from_le_bytes(head[16..24].try_into().unwrap());
        let grid = Grid::new(dim, half_width, points)?;
        let mut bytes = vec![0u8; 8 * grid.len()];
        r.read_exact(&mut bytes)
            .map_err(|e| Error::Format(format!("truncated payload: {e}")))?;
        let mut extra = [0u8; 1];
        if r.read(&mut extra)? != 0 {
            return Err(Error::Format("trailing bytes after payload".into()));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Field::new(&grid, values)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Field> {
        let file = std::fs::File::open(path)?;
        Field::read_from(std::io::BufReader::new(file))
    }

    /// Copies this field onto `target`, whose spacing must be an integer multiple
    /// of this grid's and whose lattice must align with it. Target points outside
    /// this box are set to zero.
    pub fn embed_into(&self, target: &Grid) -> Result<Field> {
        let src = &self.grid;
        if src.dim() != target.dim() {
            return Err(Error::GridMismatch);
        }
        let ratio = target.spacing() / src.spacing();
        let stride = ratio.round();
        if stride < 1.0 || (ratio - stride).abs() > 1e-9 {
            return Err(Error::InvalidGrid(format!(
                "spacing ratio {ratio} is not a positive integer"
            )));
        }
        let stride = stride as i64;
        let offset = (target.coordinate(0) - src.coordinate(0)) / src.spacing();
        if (offset - offset.round()).abs() > 1e-9 {
            return Err(Error::InvalidGrid("lattices are not aligned".into()));
        }
        let offset = offset.round() as i64;
        let n_src = src.points() as i64;
        let dim = target.dim();
        let values = (0..target.len())
            .map(|i| {
                let idx = target.unflatten(i);
                let mut s = [0usize; 3];
                for a in 0..dim {
                    let j = offset + stride * idx[a] as i64;
                    if !(0..n_src).contains(&j) {
                        return 0.0;
                    }
                    s[a] = j as usize;
                }
                self.values[src.flatten(&s)]
            })
            .collect();
        Ok(Field::from_vec_unchecked(target, values))
    }
}
