//! The conjugated Laplacian `Δ_ζ = e^{−x·ζ} Δ e^{x·ζ}`, a Fourier multiplier
//! with symbol `p_ζ(ξ) = (iξ + ζ)²`, its magnitude-clamped inverse, and
//! the weighted spectral norms `X^b_ζ`, `Ẋ^b_ζ`, `H^b_τ`.

use cgokit_core::{Vec3, ZetaParams};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::field::{ComplexField, Grid3, ZERO};

pub const DEFAULT_DELTA: f64 = 1e-3;
/// Largest clamped fraction the inverse accepts.
pub const MAX_CLAMPED_FRACTION: f64 = 0.01;
/// Clamped fraction above which `τ` is jittered.
pub const JITTER_FRACTION: f64 = 0.001;
/// `|p_ζ(ξ)| ≤ KERNEL_TOL·τ²` is treated as an exact zero of the symbol.
pub const KERNEL_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConjlapError {
    #[error("clamp floor must lie in (0, 0.1], got {0}")]
    BadDelta(f64),
    #[error("resonant ζ; jitter τ ({clamped} of {total} modes clamped)")]
    Resonant { clamped: usize, total: usize },
    #[error("homogeneous norm undefined on kernel modes")]
    KernelMass,
    #[error("exponent b must lie in [-1, 1], got {0}")]
    BadExponent(f64),
}

pub fn symbol_p(xi: Vec3, z: &ZetaParams) -> Complex64 {
    z.symbol(xi)
}

pub fn dist_to_char(xi: Vec3, z: &ZetaParams) -> f64 {
    z.dist_to_char(xi)
}

fn is_kernel(p: Complex64, tau: f64) -> bool {
    p.norm() <= KERNEL_TOL * tau * tau
}

/// Diagnostics of one clamped inversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseReport {
    pub clamped: usize,
    pub total: usize,
    pub min_abs_p: f64,
}

impl InverseReport {
    pub fn fraction(&self) -> f64 {
        self.clamped as f64 / self.total as f64
    }
}

/// The clamped reciprocal of `p`: `1/p` when `|p| ≥ δτ`, otherwise the
/// phase of `1/p` with magnitude `1/(δτ)`. Exact zeros of the symbol map
/// to zero, making the inverse a pseudo-inverse there.
pub fn clamped_reciprocal(p: Complex64, tau: f64, delta: f64) -> Complex64 {
    let floor = delta * tau;
    let m = p.norm();
    if m >= floor {
        p.inv()
    } else if is_kernel(p, tau) {
        ZERO
    } else {
        p.conj() / (m * floor)
    }
}

fn check_delta(delta: f64) -> Result<(), ConjlapError> {
    if delta > 0.0 && delta <= 0.1 {
        Ok(())
    } else {
        Err(ConjlapError::BadDelta(delta))
    }
}

/// Clamp statistics of `ζ` over the lattice of `grid`.
pub fn clamp_report(grid: &Grid3, z: &ZetaParams, delta: f64) -> InverseReport {
    let floor = delta * z.tau();
    let (clamped, min_abs_p) = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let m = z.symbol(grid.freq(i)).norm();
            (usize::from(m < floor), m)
        })
        .reduce(|| (0, f64::INFINITY), |a, b| (a.0 + b.0, a.1.min(b.1)));
    InverseReport {
        clamped,
        total: grid.len(),
        min_abs_p,
    }
}

pub fn apply_delta_zeta(f: &ComplexField, z: &ZetaParams) -> ComplexField {
    f.apply_symbol(|xi| z.symbol(xi))
}

pub fn apply_delta_zeta_inverse(
    f: &ComplexField,
    z: &ZetaParams,
    delta: f64,
) -> Result<(ComplexField, InverseReport), ConjlapError> {
    check_delta(delta)?;
    let report = clamp_report(f.grid(), z, delta);
    if report.fraction() > MAX_CLAMPED_FRACTION {
        return Err(ConjlapError::Resonant {
            clamped: report.clamped,
            total: report.total,
        });
    }
    let tau = z.tau();
    let out = f.apply_symbol(|xi| clamped_reciprocal(z.symbol(xi), tau, delta));
    Ok((out, report))
}

/// Multiply `τ` by factors drawn uniformly from `[1, 1.01]` until at most
/// `JITTER_FRACTION` of the lattice is clamped (or attempts run out, in
/// which case the best candidate is returned).
pub fn jitter_tau<R: Rng + ?Sized>(
    grid: &Grid3,
    z: &ZetaParams,
    delta: f64,
    rng: &mut R,
) -> (ZetaParams, InverseReport) {
    let mut best = (*z, clamp_report(grid, z, delta));
    if best.1.fraction() <= JITTER_FRACTION {
        return best;
    }
    for _ in 0..32 {
        let factor = 1.0 + 0.01 * rng.random::<f64>();
        let Ok(cand) = z.with_tau_scaled(factor) else { continue };
        let rep = clamp_report(grid, &cand, delta);
        if rep.clamped < best.1.clamped {
            best = (cand, rep);
        }
        if rep.fraction() <= JITTER_FRACTION {
            break;
        }
    }
    best
}

fn check_b(b: f64) -> Result<(), ConjlapError> {
    if (-1.0..=1.0).contains(&b) {
        Ok(())
    } else {
        Err(ConjlapError::BadExponent(b))
    }
}

/// `(h³/N³ Σ w(ξ)|f̂(ξ)|²)^{1/2}`, the spectral `L²` norm with weight `w`.
pub fn weighted_norm<W>(f: &ComplexField, weight: W) -> f64
where
    W: Fn(Vec3) -> f64 + Sync,
{
    let g = f.grid();
    let s: f64 = f
        .spectrum()
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let m = c.norm_sqr();
            if m == 0.0 {
                0.0
            } else {
                weight(g.freq(i)) * m
            }
        })
        .sum();
    (s * g.cell_volume() / g.len() as f64).sqrt()
}

/// `‖f‖_{X^b_ζ}` with weight `(|p_ζ| + τ)^{2b}`, or `‖f‖_{Ẋ^b_ζ}` with
/// weight `|p_ζ|^{2b}` when `homogeneous`.
pub fn xb_norm(f: &ComplexField, z: &ZetaParams, b: f64, homogeneous: bool) -> Result<f64, ConjlapError> {
    check_b(b)?;
    if b == 0.0 {
        return Ok(f.l2_spectral());
    }
    let tau = z.tau();
    if !homogeneous {
        return Ok(weighted_norm(f, |xi| (z.symbol(xi).norm() + tau).powf(2.0 * b)));
    }
    if b < 0.0 {
        let g = f.grid();
        let hit = f
            .spectrum()
            .par_iter()
            .enumerate()
            .any(|(i, c)| c.norm() > 0.0 && is_kernel(z.symbol(g.freq(i)), tau));
        if hit {
            return Err(ConjlapError::KernelMass);
        }
    }
    Ok(weighted_norm(f, |xi| {
        let m = z.symbol(xi).norm();
        if m == 0.0 {
            0.0
        } else {
            m.powf(2.0 * b)
        }
    }))
}

/// `‖f‖_{H^b_τ}` with weight `(|ξ| + τ)^{2b}`.
pub fn hb_tau_norm(f: &ComplexField, tau: f64, b: f64) -> Result<f64, ConjlapError> {
    check_b(b)?;
    Ok(weighted_norm(f, |xi| (xi.norm() + tau).powf(2.0 * b)))
}

/// Extremes of the symbol-comparability ratios over unclamped modes:
/// `|p|/(τd)` where `d ≤ τ/8`, `|p|/(τ² + |ξ|²)` where `d ≥ τ/8`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolAudit {
    pub low_min: f64,
    pub low_max: f64,
    pub high_min: f64,
    pub high_max: f64,
    pub low_count: usize,
    pub high_count: usize,
    pub clamped: usize,
}

impl SymbolAudit {
    pub fn within(&self, low: (f64, f64), high: (f64, f64)) -> bool {
        let ok = |lo: f64, hi: f64, r: (f64, f64), n: usize| n == 0 || (lo >= r.0 && hi <= r.1);
        ok(self.low_min, self.low_max, low, self.low_count) && ok(self.high_min, self.high_max, high, self.high_count)
    }
}

pub fn symbol_audit(grid: &Grid3, z: &ZetaParams, delta: f64) -> SymbolAudit {
    let tau = z.tau();
    let floor = delta * tau;
    let init = SymbolAudit {
        low_min: f64::INFINITY,
        low_max: 0.0,
        high_min: f64::INFINITY,
        high_max: 0.0,
        low_count: 0,
        high_count: 0,
        clamped: 0,
    };
    let merge = |a: SymbolAudit, b: SymbolAudit| SymbolAudit {
        low_min: a.low_min.min(b.low_min),
        low_max: a.low_max.max(b.low_max),
        high_min: a.high_min.min(b.high_min),
        high_max: a.high_max.max(b.high_max),
        low_count: a.low_count + b.low_count,
        high_count: a.high_count + b.high_count,
        clamped: a.clamped + b.clamped,
    };
    (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let xi = grid.freq(i);
            let p = z.symbol(xi).norm();
            let mut s = init;
            if p < floor {
                s.clamped = 1;
                return s;
            }
            let d = z.dist_to_char(xi);
            if d <= tau / 8.0 {
                let r = p / (tau * d);
                s.low_min = r;
                s.low_max = r;
                s.low_count = 1;
            } else {
                let r = p / (tau * tau + xi.norm_sq());
                s.high_min = r;
                s.high_max = r;
                s.high_count = 1;
            }
            s
        })
        .reduce(|| init, merge)
}
