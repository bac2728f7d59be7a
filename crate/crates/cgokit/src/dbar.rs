//! The Cauchy-Riemann operator `∂̄_e = (e₁ + ie₂)·∇` acting on each plane
//! spanned by `e₁, e₂`, its inverses, and the phase-removal identity.
//!
//! Two inverses are provided. [`dbar_inverse`] is the periodic
//! pseudo-inverse `1/(i e·ξ)`, which zeroes the kernel line `ξ ∥ e₃`.
//! [`dbar_inverse_free`] convolves each plane with the Cauchy kernel
//! `1/(2πz)` truncated to `|z| < R`; its symbol is
//! `(1 − J₀(R|ξ_∥|))/(i e·ξ)`. For data supported in the in-plane disc of
//! radius `ρ`, the truncated kernel agrees with the free-space transform on
//! `|w| ≤ R − ρ`, and with `R + ρ ≤ L/2` no periodic image interferes.

use cgokit_core::{Frame, Vec3};
use num_complex::Complex64;
use thiserror::Error;

use crate::field::{ComplexField, VectorField, I, ZERO};

/// Default truncation radius of the free-space kernel for `L = 4`.
pub const DEFAULT_KERNEL_RADIUS: f64 = 1.5;
/// Radius of the ball containing admissible supports.
pub const SUPPORT_RADIUS: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DbarError {
    #[error("frame vectors are not orthonormal")]
    NotOrthonormal,
    #[error("k must be orthogonal to e1 and e2 (k·e1 = {0}, k·e2 = {1})")]
    KNotOrthogonal(f64, f64),
    #[error("field has mass {0:e} outside the support ball")]
    SupportViolation(f64),
}

/// `e = e₁ + ie₂` for orthonormal real `e₁, e₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexFrame {
    pub e1: Vec3,
    pub e2: Vec3,
}

impl ComplexFrame {
    pub fn new(e1: Vec3, e2: Vec3) -> Result<Self, DbarError> {
        let bad = (e1.norm() - 1.0).abs() > 1e-12 || (e2.norm() - 1.0).abs() > 1e-12 || e1.dot(e2).abs() > 1e-12;
        if bad {
            return Err(DbarError::NotOrthonormal);
        }
        Ok(ComplexFrame { e1, e2 })
    }

    pub fn from_frame(f: &Frame) -> Self {
        ComplexFrame { e1: f.e1, e2: f.e2 }
    }

    pub fn e3(&self) -> Vec3 {
        self.e1.cross(self.e2)
    }

    /// `e·v = v·e₁ + i v·e₂`.
    pub fn pair(&self, v: Vec3) -> Complex64 {
        Complex64::new(v.dot(self.e1), v.dot(self.e2))
    }

    /// The complex vector `e` as three components.
    pub fn vector(&self) -> [Complex64; 3] {
        std::array::from_fn(|a| Complex64::new(self.e1[a], self.e2[a]))
    }

    /// `e·A = e₁·A + i e₂·A`.
    pub fn dot_field(&self, a: &VectorField) -> ComplexField {
        a.dot_const(self.vector())
    }

    /// In-plane distance `|x_∥|`.
    pub fn in_plane_norm(&self, x: Vec3) -> f64 {
        self.pair(x).norm()
    }
}

/// Tolerance below which `|ξ_∥|` counts as the kernel line.
fn on_kernel_line(c: Complex64, dk: f64) -> bool {
    c.norm() <= 1e-9 * dk
}

/// Spectrum multiplied by `i(ξ·e₁ + iξ·e₂)`.
pub fn dbar_apply(f: &ComplexField, frame: &ComplexFrame) -> ComplexField {
    f.apply_symbol(|xi| I * frame.pair(xi))
}

/// Periodic pseudo-inverse, returning the `L²` mass of the zeroed
/// kernel-line component.
pub fn dbar_inverse(f: &ComplexField, frame: &ComplexFrame) -> (ComplexField, f64) {
    let dk = f.grid().dk();
    let out = f.apply_symbol(|xi| {
        let c = frame.pair(xi);
        if on_kernel_line(c, dk) {
            ZERO
        } else {
            (I * c).inv()
        }
    });
    (out, fiber_mean(f, frame).l2())
}

/// Projection onto the kernel line: the mean of `f` over each `e₁,e₂`
/// plane (as resolved by the lattice).
pub fn fiber_mean(f: &ComplexField, frame: &ComplexFrame) -> ComplexField {
    let dk = f.grid().dk();
    f.apply_real_symbol(|xi| if on_kernel_line(frame.pair(xi), dk) { 1.0 } else { 0.0 })
}

/// Symbol of the truncated free-space inverse.
pub fn free_symbol(xi: Vec3, frame: &ComplexFrame, radius: f64) -> Complex64 {
    let c = frame.pair(xi);
    let rho = c.norm();
    if rho == 0.0 {
        return ZERO;
    }
    let taper = if rho * radius < 1e-4 {
        // 1 − J₀(x) = x²/4 − x⁴/64 + …
        let x2 = (rho * radius).powi(2);
        x2 / 4.0 - x2 * x2 / 64.0
    } else {
        1.0 - libm::j0(rho * radius)
    };
    taper / (I * c)
}

/// Convolution of each `e₁,e₂` plane with `1_{|z|<R}/(2πz)`.
pub fn dbar_inverse_free(f: &ComplexField, frame: &ComplexFrame, radius: f64) -> ComplexField {
    f.apply_symbol(|xi| free_symbol(xi, frame, radius))
}

/// Largest `|f|` outside the ball of radius `r` relative to `‖f‖_∞`.
pub fn mass_outside(f: &ComplexField, r: f64) -> f64 {
    let g = *f.grid();
    let max = f.linf();
    if max == 0.0 {
        return 0.0;
    }
    f.values()
        .iter()
        .enumerate()
        .filter(|(i, _)| g.point(*i).norm() > r)
        .map(|(_, v)| v.norm())
        .fold(0.0, f64::max)
        / max
}

/// Empirical constant `sup ⟨w⟩|∂̄⁻¹f(w)| / ‖f‖_∞` over the region where
/// the truncated kernel is exact, `|w_∥| ≤ R − 1/2`.
pub fn check_dbli_decay(f: &ComplexField, frame: &ComplexFrame) -> Result<f64, DbarError> {
    let h = f.grid().h();
    let leak = mass_outside(f, SUPPORT_RADIUS + h);
    if leak > 1e-10 {
        return Err(DbarError::SupportViolation(leak));
    }
    let norm = f.linf();
    if norm == 0.0 {
        return Ok(0.0);
    }
    let g = *f.grid();
    let trusted = DEFAULT_KERNEL_RADIUS - SUPPORT_RADIUS;
    let u = dbar_inverse_free(f, frame, DEFAULT_KERNEL_RADIUS);
    let sup = u
        .values()
        .iter()
        .enumerate()
        .filter_map(|(i, v)| {
            let w = frame.in_plane_norm(g.point(i));
            (w <= trusted).then(|| (1.0 + w * w).sqrt() * v.norm())
        })
        .fold(0.0, f64::max);
    Ok(sup / norm)
}

/// Both sides of `e·∫A e^{∓iφ} e^{ik·x} = e·∫A e^{ik·x}` with
/// `φ = ∂̄_e⁻¹(e·A)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UndophaseCheck {
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub discrepancy: f64,
    /// `discrepancy / ‖e·A‖_{L¹}`.
    pub relative: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseSign {
    /// `e^{−iφ}`, the sign of the lemma statement.
    Minus,
    Plus,
}

pub fn verify_undophase(a: &VectorField, frame: &ComplexFrame, k: Vec3) -> Result<UndophaseCheck, DbarError> {
    verify_undophase_signed(a, frame, k, PhaseSign::Minus)
}

pub fn verify_undophase_signed(
    a: &VectorField,
    frame: &ComplexFrame,
    k: Vec3,
    sign: PhaseSign,
) -> Result<UndophaseCheck, DbarError> {
    let (k1, k2) = (k.dot(frame.e1), k.dot(frame.e2));
    let tol = 1e-10 * (1.0 + k.norm());
    if k1.abs() > tol || k2.abs() > tol {
        return Err(DbarError::KNotOrthogonal(k1, k2));
    }
    let ea = frame.dot_field(a);
    let phi = dbar_inverse_free(&ea, frame, DEFAULT_KERNEL_RADIUS);
    let s = match sign {
        PhaseSign::Minus => -I,
        PhaseSign::Plus => I,
    };
    let wave = |x: Vec3| Complex64::from_polar(1.0, k.dot(x));
    let with_phase = ea.zip_with(&phi, |v, p| v * (s * p).exp()).map_at(|x, v| v * wave(x));
    let plain = ea.map_at(|x, v| v * wave(x));
    let lhs = with_phase.integral();
    let rhs = plain.integral();
    let discrepancy = (lhs - rhs).norm();
    let scale = ea.norm(1.0).expect("p = 1 is supported");
    let relative = if scale == 0.0 { 0.0 } else { discrepancy / scale };
    Ok(UndophaseCheck {
        lhs,
        rhs,
        discrepancy,
        relative,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid3;

    fn grid(n: usize) -> Grid3 {
        Grid3::new(n, 4.0).unwrap()
    }

    fn std_frame() -> ComplexFrame {
        ComplexFrame::new(Vec3::E1, Vec3::E2).unwrap()
    }

    #[test]
    fn plane_wave_eigenvalues() {
        let g = grid(16);
        let fr = std_frame();
        let m = [2, -1, 3];
        let w = ComplexField::plane_wave(g, m);
        let xi = g.freq(g.mode_index(m));
        let out = dbar_apply(&w, &fr);
        let expect = w.scale(I * fr.pair(xi));
        assert!((&out - &expect).l2() < 1e-12 * expect.l2());
        let c = ComplexField::constant(g, Complex64::new(2.0, 0.0));
        assert!(dbar_apply(&c, &fr).l2() < 1e-12);
    }

    #[test]
    fn inverse_on_unit_in_plane_frequency() {
        // ξ₀·e₁ = 0, ξ₀·e₂ = 1 gives e·ξ₀ = i and multiplier 1/(i·i) = −1;
        // with L = 2π the lattice spacing is exactly 1.
        let g = Grid3::new(8, std::f64::consts::TAU).unwrap();
        let w = ComplexField::plane_wave(g, [0, 1, 0]);
        let (inv, mass) = dbar_inverse(&w, &std_frame());
        assert!((&inv - &w.scale_real(-1.0)).l2() < 1e-12 * w.l2());
        assert!(mass < 1e-12);
    }

    #[test]
    fn constant_is_all_kernel() {
        let g = grid(8);
        let c = ComplexField::constant(g, Complex64::new(1.0, 0.0));
        let (inv, mass) = dbar_inverse(&c, &std_frame());
        assert!(inv.l2() < 1e-14);
        assert!((mass - c.l2()).abs() < 1e-12);
    }

    #[test]
    fn composite_removes_fiber_means() {
        let g = grid(16);
        let fr = ComplexFrame::new(Vec3::E2, Vec3::E3).unwrap();
        let f = ComplexField::from_real_fn(g, |x| (-6.0 * (x - Vec3::new(0.2, 0.0, -0.1)).norm_sq()).exp());
        let (inv, _) = dbar_inverse(&f, &fr);
        let back = dbar_apply(&inv, &fr);
        let expect = &f - &fiber_mean(&f, &fr);
        assert!((&back - &expect).l2() <= 1e-12 * f.l2());
    }

    #[test]
    fn free_symbol_vanishes_on_kernel_line_and_tends_to_cauchy() {
        let fr = std_frame();
        assert_eq!(free_symbol(Vec3::E3 * 5.0, &fr, 1.5), ZERO);
        let xi = Vec3::new(3.0, 4.0, 0.0);
        let s = free_symbol(xi, &fr, 1.5);
        let cauchy = (I * fr.pair(xi)).inv();
        assert!((s - cauchy * (1.0 - libm::j0(7.5))).norm() < 1e-15);
        let small = free_symbol(Vec3::new(1e-6, 0.0, 0.0), &fr, 1.5);
        // small-argument branch: (Rρ)²/4 / (iρ) = −i R²ρ/4
        let expect = Complex64::new(0.0, -1.5 * 1.5 * 1e-6 / 4.0);
        assert!((small - expect).norm() < 1e-12 * expect.norm());
    }

    #[test]
    fn undophase_trivial_cases() {
        let g = grid(16);
        let fr = std_frame();
        let zero = VectorField::zeros(g);
        let r = verify_undophase(&zero, &fr, Vec3::ZERO).unwrap();
        assert_eq!(r.discrepancy, 0.0);
        assert!(matches!(
            verify_undophase(&zero, &fr, Vec3::E1),
            Err(DbarError::KNotOrthogonal(..))
        ));
    }
}
