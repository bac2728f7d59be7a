//! Built-in potential families and the spatial cutoffs `χ`, `χ̃`.
//!
//! Every family is supported in the ball of radius 1/2: a smooth clip
//! `c(r)` equal to 1 for `r ≤ 1/4` and 0 for `r ≥ 1/2` multiplies the
//! profile. The clip is `C^∞` (built from `e^{−1/t}`) so spectra decay
//! faster than any power and grid quadrature converges spectrally.

use cgokit_core::cutoff::radial_step;
use cgokit_core::Vec3;
use num_complex::Complex64;

use crate::field::{ComplexField, Grid3, VectorField};

pub const CLIP_INNER: f64 = 0.25;
pub const CLIP_OUTER: f64 = 0.5;

fn psi(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// `C^∞` radial transition from 1 (`r ≤ inner`) to 0 (`r ≥ outer`).
pub fn smooth_clip(r: f64, inner: f64, outer: f64) -> f64 {
    let a = psi((outer - r) / (outer - inner));
    let b = psi((r - inner) / (outer - inner));
    if a + b == 0.0 {
        0.0
    } else {
        a / (a + b)
    }
}

/// `d/dr` of `smooth_clip`: with `a = ψ((o−r)/w)`, `b = ψ((r−i)/w)` and
/// `ψ' = ψ/t²`, `c' = (a'b − ab')/(a + b)²`.
pub fn smooth_clip_derivative(r: f64, inner: f64, outer: f64) -> f64 {
    let w = outer - inner;
    let (ta, tb) = ((outer - r) / w, (r - inner) / w);
    if ta <= 0.0 || tb <= 0.0 {
        return 0.0;
    }
    let (a, b) = (psi(ta), psi(tb));
    let da = -a / (ta * ta * w);
    let db = b / (tb * tb * w);
    (da * b - a * db) / ((a + b) * (a + b))
}

/// The clip that confines built-in potentials to the half ball.
pub fn half_ball_clip(x: Vec3) -> f64 {
    smooth_clip(x.norm(), CLIP_INNER, CLIP_OUTER)
}

/// `χ`: 1 on `|x| ≤ 0.7`, 0 from `|x| ≥ 7/8`.
pub fn chi(x: Vec3) -> f64 {
    radial_step(x.norm(), CHI_INNER, CHI_OUTER)
}

/// `χ̃`: 1 on `|x| ≤ 1/2`, 0 from `|x| ≥ 0.7`, so `χ χ̃ = χ̃`.
pub fn chi_tilde(x: Vec3) -> f64 {
    radial_step(x.norm(), 0.5, 0.7)
}

const CHI_INNER: f64 = 0.7;
const CHI_OUTER: f64 = 0.875;

/// `(χ'(r), χ''(r))` from the closed form of the degree-9 step:
/// `S' = 630 s⁴(1−s)⁴`, `S'' = 2520 s³(1−s)³(1−2s)`.
fn chi_radial_derivs(r: f64) -> (f64, f64) {
    let w = CHI_OUTER - CHI_INNER;
    let s = (r - CHI_INNER) / w;
    if s <= 0.0 || s >= 1.0 {
        return (0.0, 0.0);
    }
    let u = s * (1.0 - s);
    (-630.0 * u.powi(4) / w, -2520.0 * u.powi(3) * (1.0 - 2.0 * s) / (w * w))
}

/// `∇χ` in closed form; spectral differentiation of the finitely smooth
/// step would leak Gibbs ripple into the plateau.
pub fn chi_gradient_field(grid: Grid3) -> VectorField {
    VectorField::from_real_fn(grid, |x| {
        let r = x.norm();
        let (d1, _) = chi_radial_derivs(r);
        if d1 == 0.0 {
            Vec3::ZERO
        } else {
            x * (d1 / r)
        }
    })
}

/// `Δχ = χ'' + 2χ'/r` in closed form.
pub fn chi_laplacian_field(grid: Grid3) -> ComplexField {
    ComplexField::from_real_fn(grid, |x| {
        let r = x.norm();
        let (d1, d2) = chi_radial_derivs(r);
        if d1 == 0.0 && d2 == 0.0 {
            0.0
        } else {
            d2 + 2.0 * d1 / r
        }
    })
}

pub fn chi_field(grid: Grid3) -> ComplexField {
    ComplexField::from_real_fn(grid, chi)
}

pub fn chi_tilde_field(grid: Grid3) -> ComplexField {
    ComplexField::from_real_fn(grid, chi_tilde)
}

/// `amplitude · (1 + Σ cⱼ xⱼ) · e^{−|x−c|²/w²}` clipped to the half ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianBump {
    pub center: Vec3,
    pub width: f64,
    pub amplitude: f64,
    /// Linear envelope coefficients.
    pub envelope: Vec3,
}

impl GaussianBump {
    pub fn eval(&self, x: Vec3) -> f64 {
        let d = x - self.center;
        self.amplitude
            * (1.0 + self.envelope.dot(x))
            * (-d.norm_sq() / (self.width * self.width)).exp()
            * half_ball_clip(x)
    }

    pub fn scalar(&self, grid: Grid3) -> ComplexField {
        ComplexField::from_real_fn(grid, |x| self.eval(x))
    }

    /// Closed-form gradient, supported in the half ball like the bump.
    pub fn gradient(&self, x: Vec3) -> Vec3 {
        let d = x - self.center;
        let g = (-d.norm_sq() / (self.width * self.width)).exp();
        let env = 1.0 + self.envelope.dot(x);
        let r = x.norm();
        let c = half_ball_clip(x);
        let dc = smooth_clip_derivative(r, CLIP_INNER, CLIP_OUTER);
        let radial = if r > 0.0 { x * (dc / r) } else { Vec3::ZERO };
        (self.envelope * (g * c) + d * (-2.0 * env * g * c / (self.width * self.width)) + radial * (env * g))
            * self.amplitude
    }
}

/// A real vector potential `Σⱼ vⱼ cos(kⱼ·x + θⱼ)` multiplied by the clip.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierModes {
    pub modes: Vec<(Vec3, Vec3, f64)>,
}

impl FourierModes {
    pub fn eval(&self, x: Vec3) -> Vec3 {
        let c = half_ball_clip(x);
        self.modes
            .iter()
            .fold(Vec3::ZERO, |acc, (k, v, th)| acc + *v * ((k.dot(x) + th).cos() * c))
    }

    pub fn vector(&self, grid: Grid3) -> VectorField {
        VectorField::from_real_fn(grid, |x| self.eval(x))
    }
}

/// Vector potential with one Gaussian bump per component.
pub fn bump_vector(grid: Grid3, bumps: [GaussianBump; 3]) -> VectorField {
    VectorField::from_real_fn(grid, |x| {
        Vec3::new(bumps[0].eval(x), bumps[1].eval(x), bumps[2].eval(x))
    })
}

/// Gauge function `ψ_g = amplitude·(1 − |x − c|²/R²)₊^m`. With `|c| + R ≤ 1/2`
/// it lives in the half ball, and for large `m` its spectrum is negligible at
/// the grid's alias frequencies, so sampled gradients stay exact gradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaugeBump {
    pub center: Vec3,
    pub radius: f64,
    pub amplitude: f64,
    pub power: i32,
}

impl GaugeBump {
    pub fn new(amplitude: f64, center: Vec3) -> Self {
        GaugeBump {
            center,
            radius: CLIP_OUTER - center.norm() - 0.02,
            amplitude,
            power: 12,
        }
    }

    pub fn eval(&self, x: Vec3) -> f64 {
        let s = 1.0 - (x - self.center).norm_sq() / (self.radius * self.radius);
        if s <= 0.0 {
            0.0
        } else {
            self.amplitude * s.powi(self.power)
        }
    }

    pub fn gradient(&self, x: Vec3) -> Vec3 {
        let d = x - self.center;
        let r2 = self.radius * self.radius;
        let s = 1.0 - d.norm_sq() / r2;
        if s <= 0.0 {
            return Vec3::ZERO;
        }
        d * (-2.0 * self.amplitude * self.power as f64 * s.powi(self.power - 1) / r2)
    }

    pub fn scalar(&self, grid: Grid3) -> ComplexField {
        ComplexField::from_real_fn(grid, |x| self.eval(x))
    }
}

/// `(A, A + ∇ψ_g)` with the gradient taken in closed form, so the second
/// potential keeps the half-ball support exactly.
pub fn gauge_pair(a: &VectorField, psi_g: &GaugeBump) -> (VectorField, VectorField) {
    let grad = VectorField::from_real_fn(*a.grid(), |x| psi_g.gradient(x));
    (a.clone(), a.add(&grad))
}

/// Real part of every sample, dropping round-off imaginary parts.
pub fn realify(f: &ComplexField) -> ComplexField {
    f.map(|v| Complex64::new(v.re, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clip_profile() {
        assert_eq!(smooth_clip(0.1, 0.25, 0.5), 1.0);
        assert_eq!(smooth_clip(0.5, 0.25, 0.5), 0.0);
        assert_eq!(smooth_clip(0.9, 0.25, 0.5), 0.0);
        let mid = smooth_clip(0.375, 0.25, 0.5);
        assert!((mid - 0.5).abs() < 1e-15);
    }

    #[test]
    fn chi_derivatives_match_differences() {
        let h = 1e-5;
        for i in 1..40 {
            let r = 0.68 + 0.005 * i as f64;
            let f = |t: f64| chi(Vec3::new(t, 0.0, 0.0));
            let (d1, d2) = chi_radial_derivs(r);
            assert!((d1 - (f(r + h) - f(r - h)) / (2.0 * h)).abs() < 1e-5);
            assert!((d2 - (f(r + h) - 2.0 * f(r) + f(r - h)) / (h * h)).abs() < 1e-2 * (1.0 + d2.abs()));
        }
    }

    #[test]
    fn bump_gradient_matches_differences() {
        let b = GaussianBump {
            center: Vec3::new(0.05, -0.1, 0.0),
            width: 0.2,
            amplitude: 0.7,
            envelope: Vec3::new(0.3, 0.0, -0.5),
        };
        let h = 1e-6;
        for i in 0..60 {
            let x = Vec3::new(0.009 * i as f64, 0.004 * i as f64, -0.002 * i as f64);
            let g = b.gradient(x);
            for (j, e) in [Vec3::E1, Vec3::E2, Vec3::E3].into_iter().enumerate() {
                let fd = (b.eval(x + e * h) - b.eval(x - e * h)) / (2.0 * h);
                assert!((g[j] - fd).abs() < 1e-6, "{x:?} {j} {} {fd}", g[j]);
            }
        }
    }

    #[test]
    fn gauge_bump_gradient_matches_differences() {
        let b = GaugeBump::new(0.4, Vec3::new(0.02, 0.03, -0.01));
        assert!(b.center.norm() + b.radius <= CLIP_OUTER);
        let h = 1e-6;
        for i in 0..60 {
            let x = Vec3::new(0.008 * i as f64, -0.004 * i as f64, 0.003 * i as f64);
            let g = b.gradient(x);
            for (j, e) in [Vec3::E1, Vec3::E2, Vec3::E3].into_iter().enumerate() {
                let fd = (b.eval(x + e * h) - b.eval(x - e * h)) / (2.0 * h);
                assert!((g[j] - fd).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn cutoffs_nest() {
        for i in 0..200 {
            let x = Vec3::new(i as f64 / 200.0, 0.0, 0.0);
            let (c, ct) = (chi(x), chi_tilde(x));
            assert_eq!(c * ct, ct);
            if x.norm() <= 0.5 {
                assert_eq!(c, 1.0);
                assert_eq!(ct, 1.0);
            }
            if x.norm() >= 0.875 {
                assert_eq!(c, 0.0);
            }
        }
    }

    #[test]
    fn families_vanish_outside_half_ball() {
        let g = Grid3::new(16, 4.0).unwrap();
        let b = GaussianBump {
            center: Vec3::new(0.1, 0.0, 0.0),
            width: 0.3,
            amplitude: 2.0,
            envelope: Vec3::new(0.5, 0.0, 0.0),
        };
        let f = b.scalar(g);
        let fm = FourierModes {
            modes: vec![(Vec3::E3 * 3.0, Vec3::E1, 0.2)],
        }
        .vector(g);
        for i in 0..g.len() {
            if g.point(i).norm() >= 0.5 {
                assert_eq!(f.values()[i].norm(), 0.0);
                assert_eq!(fm[0].values()[i].norm(), 0.0);
            }
        }
    }
}
