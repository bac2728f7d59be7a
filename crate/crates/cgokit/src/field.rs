//! Periodic grids and grid-sampled complex scalar and vector fields.
//!
//! Physical points sit at `x = −L/2 + i·h`, `h = L/N`. Spectra follow the
//! unnormalized forward DFT; lattice frequencies are `(2π/L)·m` with the
//! signed index `m ∈ {−N/2, …, N/2 − 1}`.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, Index, Mul, Sub};
use std::sync::OnceLock;

use cgokit_core::Vec3;
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::fft;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("N must be even, got {0}")]
    OddN(usize),
    #[error("N must be at least 8, got {0}")]
    SmallN(usize),
    #[error("box length must be positive and finite, got {0}")]
    BadLength(f64),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("expected {expected} samples, got {got}")]
    SampleCount { expected: usize, got: usize },
    #[error("unsupported exponent {0}")]
    UnsupportedExponent(f64),
}

/// Periodic box `[−L/2, L/2)³` sampled at `N` points per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid3 {
    n: usize,
    l: f64,
}

impl Grid3 {
    pub fn new(n: usize, l: f64) -> Result<Self, FieldError> {
        if !n.is_multiple_of(2) {
            return Err(FieldError::OddN(n));
        }
        if n < 8 {
            return Err(FieldError::SmallN(n));
        }
        if !(l > 0.0 && l.is_finite()) {
            return Err(FieldError::BadLength(l));
        }
        Ok(Grid3 { n, l })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn h(&self) -> f64 {
        self.l / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        let h = self.h();
        h * h * h
    }

    /// Lattice spacing `2π/L` in frequency.
    pub fn dk(&self) -> f64 {
        TAU / self.l
    }

    /// Largest `|ξ|∞` on the lattice, `πN/L`.
    pub fn nyquist(&self) -> f64 {
        PI * self.n as f64 / self.l
    }

    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (ix * self.n + iy) * self.n + iz
    }

    pub fn unravel(&self, idx: usize) -> [usize; 3] {
        let n = self.n;
        [idx / (n * n), (idx / n) % n, idx % n]
    }

    /// Signed frequency index of axis position `i`.
    pub fn signed(&self, i: usize) -> i64 {
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    /// Axis position of a signed frequency index (taken modulo `N`).
    pub fn wrap(&self, m: i64) -> usize {
        m.rem_euclid(self.n as i64) as usize
    }

    pub fn point(&self, idx: usize) -> Vec3 {
        let [ix, iy, iz] = self.unravel(idx);
        let c = |i: usize| -self.l / 2.0 + i as f64 * self.h();
        Vec3::new(c(ix), c(iy), c(iz))
    }

    pub fn freq(&self, idx: usize) -> Vec3 {
        let [ix, iy, iz] = self.unravel(idx);
        let dk = self.dk();
        Vec3::new(
            dk * self.signed(ix) as f64,
            dk * self.signed(iy) as f64,
            dk * self.signed(iz) as f64,
        )
    }

    pub fn signed_triple(&self, idx: usize) -> [i64; 3] {
        let [ix, iy, iz] = self.unravel(idx);
        [self.signed(ix), self.signed(iy), self.signed(iz)]
    }

    /// Index of the lattice mode with signed indices `m`.
    pub fn mode_index(&self, m: [i64; 3]) -> usize {
        self.index(self.wrap(m[0]), self.wrap(m[1]), self.wrap(m[2]))
    }

    /// Whether any axis of `idx` sits on the Nyquist row `m = −N/2`.
    pub fn on_nyquist(&self, idx: usize) -> bool {
        self.unravel(idx).contains(&(self.n / 2))
    }

    /// Lattice frequency closest to `k`, or `None` if `k` is off-lattice by
    /// more than `1e−9·dk`.
    pub fn lattice_mode(&self, k: Vec3) -> Option<[i64; 3]> {
        let dk = self.dk();
        let mut m = [0i64; 3];
        for a in 0..3 {
            let t = k[a] / dk;
            let r = t.round();
            if (t - r).abs() > 1e-9 || r.abs() >= (self.n / 2) as f64 {
                return None;
            }
            m[a] = r as i64;
        }
        Some(m)
    }
}

/// Complex scalar samples on a grid, with a lazily computed spectrum.
#[derive(Debug, Clone)]
pub struct ComplexField {
    grid: Grid3,
    values: Vec<Complex64>,
    spectrum: OnceLock<Vec<Complex64>>,
}

impl PartialEq for ComplexField {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.values == other.values
    }
}

impl ComplexField {
    pub fn zeros(grid: Grid3) -> Self {
        Self::from_values_unchecked(grid, vec![ZERO; grid.len()])
    }

    pub fn constant(grid: Grid3, c: Complex64) -> Self {
        Self::from_values_unchecked(grid, vec![c; grid.len()])
    }

    pub fn from_values(grid: Grid3, values: Vec<Complex64>) -> Result<Self, FieldError> {
        if values.len() != grid.len() {
            return Err(FieldError::SampleCount {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(Self::from_values_unchecked(grid, values))
    }

    fn from_values_unchecked(grid: Grid3, values: Vec<Complex64>) -> Self {
        ComplexField {
            grid,
            values,
            spectrum: OnceLock::new(),
        }
    }

    pub fn from_fn<F>(grid: Grid3, f: F) -> Self
    where
        F: Fn(Vec3) -> Complex64 + Sync,
    {
        let values = (0..grid.len()).into_par_iter().map(|i| f(grid.point(i))).collect();
        Self::from_values_unchecked(grid, values)
    }

    pub fn from_real_fn<F>(grid: Grid3, f: F) -> Self
    where
        F: Fn(Vec3) -> f64 + Sync,
    {
        Self::from_fn(grid, |x| Complex64::new(f(x), 0.0))
    }

    /// Field whose DFT coefficients are `spectrum`.
    pub fn from_spectrum(grid: Grid3, spectrum: Vec<Complex64>) -> Result<Self, FieldError> {
        if spectrum.len() != grid.len() {
            return Err(FieldError::SampleCount {
                expected: grid.len(),
                got: spectrum.len(),
            });
        }
        let mut values = spectrum.clone();
        fft::inverse(&mut values, grid.n());
        let cell = OnceLock::new();
        let _ = cell.set(spectrum);
        Ok(ComplexField {
            grid,
            values,
            spectrum: cell,
        })
    }

    /// The plane wave `e^{iξ·x}` for lattice mode `m`.
    pub fn plane_wave(grid: Grid3, m: [i64; 3]) -> Self {
        let xi = grid.freq(grid.mode_index(m));
        Self::from_fn(grid, |x| Complex64::from_polar(1.0, xi.dot(x)))
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn spectrum(&self) -> &[Complex64] {
        self.spectrum.get_or_init(|| {
            let mut s = self.values.clone();
            fft::forward(&mut s, self.grid.n());
            s
        })
    }

    pub fn same_grid(&self, other: &ComplexField) -> Result<(), FieldError> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(FieldError::GridMismatch)
        }
    }

    pub fn map<F>(&self, f: F) -> ComplexField
    where
        F: Fn(Complex64) -> Complex64 + Sync,
    {
        let values = self.values.par_iter().map(|v| f(*v)).collect();
        Self::from_values_unchecked(self.grid, values)
    }

    /// Pointwise map that also sees the sample position.
    pub fn map_at<F>(&self, f: F) -> ComplexField
    where
        F: Fn(Vec3, Complex64) -> Complex64 + Sync,
    {
        let g = self.grid;
        let values = self
            .values
            .par_iter()
            .enumerate()
            .map(|(i, v)| f(g.point(i), *v))
            .collect();
        Self::from_values_unchecked(g, values)
    }

    pub fn zip_with<F>(&self, other: &ComplexField, f: F) -> ComplexField
    where
        F: Fn(Complex64, Complex64) -> Complex64 + Sync,
    {
        assert_eq!(self.grid, other.grid, "zip_with across different grids");
        let values = self
            .values
            .par_iter()
            .zip(&other.values)
            .map(|(a, b)| f(*a, *b))
            .collect();
        Self::from_values_unchecked(self.grid, values)
    }

    pub fn scale(&self, c: Complex64) -> ComplexField {
        self.map(|v| v * c)
    }

    pub fn scale_real(&self, c: f64) -> ComplexField {
        self.map(|v| v * c)
    }

    pub fn conj(&self) -> ComplexField {
        self.map(|v| v.conj())
    }

    pub fn re(&self) -> ComplexField {
        self.map(|v| Complex64::new(v.re, 0.0))
    }

    pub fn im(&self) -> ComplexField {
        self.map(|v| Complex64::new(v.im, 0.0))
    }

    /// Multiply the spectrum by `symbol(ξ)` and transform back.
    pub fn apply_symbol<F>(&self, symbol: F) -> ComplexField
    where
        F: Fn(Vec3) -> Complex64 + Sync,
    {
        let g = self.grid;
        let spec: Vec<Complex64> = self
            .spectrum()
            .par_iter()
            .enumerate()
            .map(|(i, s)| if *s == ZERO { ZERO } else { s * symbol(g.freq(i)) })
            .collect();
        Self::from_spectrum(g, spec).expect("grid length preserved")
    }

    pub fn apply_real_symbol<F>(&self, symbol: F) -> ComplexField
    where
        F: Fn(Vec3) -> f64 + Sync,
    {
        self.apply_symbol(|xi| Complex64::new(symbol(xi), 0.0))
    }

    /// `∂f/∂x_axis` by spectral differentiation.
    pub fn partial(&self, axis: usize) -> ComplexField {
        self.apply_symbol(|xi| Complex64::new(0.0, xi[axis]))
    }

    /// `e·∇f` for a real direction `e`.
    pub fn directional(&self, e: Vec3) -> ComplexField {
        self.apply_symbol(|xi| Complex64::new(0.0, xi.dot(e)))
    }

    pub fn gradient(&self) -> VectorField {
        VectorField::from_components([self.partial(0), self.partial(1), self.partial(2)])
            .expect("components share a grid")
    }

    pub fn laplacian(&self) -> ComplexField {
        self.apply_real_symbol(|xi| -xi.norm_sq())
    }

    /// Discrete `Lᵖ` norm with cell-volume weight `h³`; `p = ∞` is the max.
    pub fn norm(&self, p: f64) -> Result<f64, FieldError> {
        if p.is_infinite() && p > 0.0 {
            return Ok(self.values.par_iter().map(|v| v.norm()).reduce(|| 0.0, f64::max));
        }
        if !(p >= 1.0 && p.is_finite()) {
            return Err(FieldError::UnsupportedExponent(p));
        }
        let s: f64 = if p == 2.0 {
            self.values.par_iter().map(|v| v.norm_sqr()).sum()
        } else {
            self.values.par_iter().map(|v| v.norm().powf(p)).sum()
        };
        Ok((s * self.grid.cell_volume()).powf(1.0 / p))
    }

    pub fn l2(&self) -> f64 {
        self.norm(2.0).expect("p = 2 is supported")
    }

    pub fn linf(&self) -> f64 {
        self.norm(f64::INFINITY).expect("p = ∞ is supported")
    }

    /// `L²` norm computed from the spectrum via Parseval.
    pub fn l2_spectral(&self) -> f64 {
        let s: f64 = self.spectrum().par_iter().map(|v| v.norm_sqr()).sum();
        (s * self.grid.cell_volume() / self.grid.len() as f64).sqrt()
    }

    /// `∫ f` by the cell sum.
    pub fn integral(&self) -> Complex64 {
        let s: Complex64 = self.values.par_iter().copied().sum();
        s * self.grid.cell_volume()
    }

    /// `⟨f, g⟩ = ∫ f ḡ`.
    pub fn inner(&self, other: &ComplexField) -> Complex64 {
        assert_eq!(self.grid, other.grid, "inner product across different grids");
        let s: Complex64 = self
            .values
            .par_iter()
            .zip(&other.values)
            .map(|(a, b)| a * b.conj())
            .sum();
        s * self.grid.cell_volume()
    }

    /// `∫ f g` without conjugation.
    pub fn bilinear(&self, other: &ComplexField) -> Complex64 {
        assert_eq!(self.grid, other.grid, "bilinear pairing across different grids");
        let s: Complex64 = self.values.par_iter().zip(&other.values).map(|(a, b)| a * b).sum();
        s * self.grid.cell_volume()
    }

    /// Continuum-normalized transform `f̂(k) = h³ Σ f(x) e^{−ik·x}` by
    /// direct summation; `k` need not lie on the lattice.
    pub fn fourier_at(&self, k: Vec3) -> Complex64 {
        let g = self.grid;
        let s: Complex64 = self
            .values
            .par_iter()
            .enumerate()
            .map(|(i, v)| v * Complex64::from_polar(1.0, -k.dot(g.point(i))))
            .sum();
        s * g.cell_volume()
    }

    /// The same transform at lattice mode `m`, read off the DFT:
    /// `f̂ = h³ (−1)^{m₁+m₂+m₃} F_m`.
    pub fn fourier_mode(&self, m: [i64; 3]) -> Complex64 {
        let idx = self.grid.mode_index(m);
        let sign = if (m[0] + m[1] + m[2]).rem_euclid(2) == 0 {
            1.0
        } else {
            -1.0
        };
        self.spectrum()[idx] * (sign * self.grid.cell_volume())
    }

    pub fn max_abs_diff(&self, other: &ComplexField) -> f64 {
        self.values
            .par_iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .reduce(|| 0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

impl Add for &ComplexField {
    type Output = ComplexField;
    fn add(self, rhs: &ComplexField) -> ComplexField {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &ComplexField {
    type Output = ComplexField;
    fn sub(self, rhs: &ComplexField) -> ComplexField {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul for &ComplexField {
    type Output = ComplexField;
    fn mul(self, rhs: &ComplexField) -> ComplexField {
        self.zip_with(rhs, |a, b| a * b)
    }
}

/// Three complex components on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    comps: [ComplexField; 3],
}

impl VectorField {
    pub fn from_components(comps: [ComplexField; 3]) -> Result<Self, FieldError> {
        comps[0].same_grid(&comps[1])?;
        comps[0].same_grid(&comps[2])?;
        Ok(VectorField { comps })
    }

    pub fn zeros(grid: Grid3) -> Self {
        let z = ComplexField::zeros(grid);
        VectorField {
            comps: [z.clone(), z.clone(), z],
        }
    }

    pub fn from_real_fn<F>(grid: Grid3, f: F) -> Self
    where
        F: Fn(Vec3) -> Vec3 + Sync,
    {
        let c = |a: usize| ComplexField::from_real_fn(grid, |x| f(x)[a]);
        VectorField {
            comps: [c(0), c(1), c(2)],
        }
    }

    pub fn grid(&self) -> &Grid3 {
        self.comps[0].grid()
    }

    pub fn components(&self) -> &[ComplexField; 3] {
        &self.comps
    }

    pub fn into_components(self) -> [ComplexField; 3] {
        self.comps
    }

    pub fn map_components<F>(&self, f: F) -> VectorField
    where
        F: Fn(&ComplexField) -> ComplexField,
    {
        VectorField {
            comps: [f(&self.comps[0]), f(&self.comps[1]), f(&self.comps[2])],
        }
    }

    pub fn scale_real(&self, c: f64) -> VectorField {
        self.map_components(|f| f.scale_real(c))
    }

    pub fn add(&self, other: &VectorField) -> VectorField {
        VectorField {
            comps: std::array::from_fn(|a| &self.comps[a] + &other.comps[a]),
        }
    }

    pub fn sub(&self, other: &VectorField) -> VectorField {
        VectorField {
            comps: std::array::from_fn(|a| &self.comps[a] - &other.comps[a]),
        }
    }

    /// Each component multiplied pointwise by the scalar field `s`.
    pub fn mul_scalar(&self, s: &ComplexField) -> VectorField {
        self.map_components(|f| f * s)
    }

    /// `Σ cₐ Fₐ` for complex coefficients (no conjugation).
    pub fn dot_const(&self, c: [Complex64; 3]) -> ComplexField {
        let [x, y, z] = &self.comps;
        let g = *self.grid();
        let values = (0..g.len())
            .into_par_iter()
            .map(|i| c[0] * x.values()[i] + c[1] * y.values()[i] + c[2] * z.values()[i])
            .collect();
        ComplexField::from_values(g, values).expect("grid length preserved")
    }

    pub fn dot_real(&self, e: Vec3) -> ComplexField {
        self.dot_const([e[0], e[1], e[2]].map(|v| Complex64::new(v, 0.0)))
    }

    /// Pointwise bilinear `F·G = Σ Fₐ Gₐ`.
    pub fn dot(&self, other: &VectorField) -> ComplexField {
        let mut acc = &self.comps[0] * &other.comps[0];
        for a in 1..3 {
            acc = &acc + &(&self.comps[a] * &other.comps[a]);
        }
        acc
    }

    pub fn divergence(&self) -> ComplexField {
        let g = *self.grid();
        let specs: [&[Complex64]; 3] = std::array::from_fn(|a| self.comps[a].spectrum());
        let spec = (0..g.len())
            .into_par_iter()
            .map(|i| {
                let xi = g.freq(i);
                I * (specs[0][i] * xi[0] + specs[1][i] * xi[1] + specs[2][i] * xi[2])
            })
            .collect();
        ComplexField::from_spectrum(g, spec).expect("grid length preserved")
    }

    pub fn curl(&self) -> VectorField {
        let [x, y, z] = &self.comps;
        VectorField {
            comps: [
                &z.partial(1) - &y.partial(2),
                &x.partial(2) - &z.partial(0),
                &y.partial(0) - &x.partial(1),
            ],
        }
    }

    /// `‖(∫ |F|²)^{1/2}‖`: the `L²` norm of the pointwise magnitude.
    pub fn l2(&self) -> f64 {
        self.comps.iter().map(|c| c.l2().powi(2)).sum::<f64>().sqrt()
    }

    /// `Lᵖ` norm of the pointwise Euclidean magnitude.
    pub fn norm(&self, p: f64) -> Result<f64, FieldError> {
        self.magnitude().norm(p)
    }

    pub fn magnitude(&self) -> ComplexField {
        let [x, y, z] = &self.comps;
        let g = *self.grid();
        let values = (0..g.len())
            .into_par_iter()
            .map(|i| {
                let m = x.values()[i].norm_sqr() + y.values()[i].norm_sqr() + z.values()[i].norm_sqr();
                Complex64::new(m.sqrt(), 0.0)
            })
            .collect();
        ComplexField::from_values(g, values).expect("grid length preserved")
    }

    /// `F̂(k)` componentwise, continuum-normalized, by direct summation.
    pub fn fourier_at(&self, k: Vec3) -> [Complex64; 3] {
        std::array::from_fn(|a| self.comps[a].fourier_at(k))
    }

    pub fn fourier_mode(&self, m: [i64; 3]) -> [Complex64; 3] {
        std::array::from_fn(|a| self.comps[a].fourier_mode(m))
    }
}

impl Index<usize> for VectorField {
    type Output = ComplexField;
    fn index(&self, a: usize) -> &ComplexField {
        &self.comps[a]
    }
}

/// `Σ aᵢ bᵢ` for complex 3-vectors (no conjugation).
pub fn cdot(a: [Complex64; 3], b: [Complex64; 3]) -> Complex64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// The complex vector `re + i·im`.
pub fn cvec(re: Vec3, im: Vec3) -> [Complex64; 3] {
    std::array::from_fn(|a| Complex64::new(re[a], im[a]))
}
