//! The CGO amplitude `a = e^{−iφ}` whose phase solves the transport
//! equation `∂̄_e φ = χ e·P_{≤cap}A`, the planar mollifier `P̃^e`, and the
//! left-hand quantities of the averaged lemmas evaluated for one frame.

use cgokit_core::cutoff::radial_step;
use cgokit_core::{Projection, Vec3, ZetaParams};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::conjlap::{self, ConjlapError};
use crate::dbar::{self, ComplexFrame, DbarError, DEFAULT_KERNEL_RADIUS, SUPPORT_RADIUS};
use crate::field::{ComplexField, Grid3, VectorField, I};
use crate::multipliers;

/// Frequency cap multiplier: the phase sees `P_{≤100τ}A`.
pub const CAP_FACTOR: f64 = 100.0;
/// Kernel-line mass (relative to the input) that triggers a warning.
pub const KERNEL_WARN: f64 = 1e-3;

/// Planar mollifier with spectral profile `η̂(ξ_∥)`: 1 for `|ξ_∥| ≤ 1/2`,
/// 0 for `|ξ_∥| ≥ 1`. Since `η̂ − 1` vanishes near the origin, every
/// moment condition holds exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mollifier {
    pub inner: f64,
    pub outer: f64,
}

impl Default for Mollifier {
    fn default() -> Self {
        Mollifier { inner: 0.5, outer: 1.0 }
    }
}

impl Mollifier {
    pub fn profile(&self, rho: f64) -> f64 {
        radial_step(rho, self.inner, self.outer)
    }
}

pub fn build_mollifier() -> Mollifier {
    Mollifier::default()
}

/// `P̃^e f = η^e * f`, convolution in each `e₁,e₂` plane.
pub fn mollify(m: &Mollifier, f: &ComplexField, frame: &ComplexFrame) -> ComplexField {
    f.apply_real_symbol(|xi| m.profile(frame.pair(xi).norm()))
}

/// Scalar summaries of an amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplitudeDiagnostics {
    pub phi_linf: f64,
    pub grad_phi_l2_ball: f64,
    pub a_linf: f64,
    pub grad_a_l2_ball: f64,
    pub hess_a_linf: f64,
    /// `L²` mass of the transport source on the kernel line `ξ ∥ e₃`.
    pub kernel_mass: f64,
    /// Set when `kernel_mass > 10⁻³‖source‖₂`.
    pub kernel_warning: bool,
}

#[derive(Debug, Clone)]
pub struct AmplitudeBundle {
    pub zeta: ZetaParams,
    pub frame: ComplexFrame,
    pub phi: ComplexField,
    pub a: ComplexField,
    pub grad_phi: VectorField,
    pub grad_a: VectorField,
    /// `P_{≤cap}A` as used by the phase.
    pub a_trunc: VectorField,
    pub diagnostics: AmplitudeDiagnostics,
}

/// `P_{≤cap}` that is the identity, bit for bit, when the cutoff equals 1
/// on the whole lattice.
pub fn truncate_frequencies(a: &VectorField, cap: f64) -> VectorField {
    let max = a.grid().nyquist() * 3f64.sqrt();
    if !cap.is_finite() || max <= 0.75 * cap {
        return a.clone();
    }
    a.map_components(|c| multipliers::project(Projection::LpLeq(cap), c))
}

/// Restriction of the `L²` norm to the ball of radius `r`.
pub fn l2_ball(f: &ComplexField, r: f64) -> f64 {
    let g = *f.grid();
    let s: f64 = f
        .values()
        .par_iter()
        .enumerate()
        .filter(|(i, _)| g.point(*i).norm() <= r)
        .map(|(_, v)| v.norm_sqr())
        .sum();
    (s * g.cell_volume()).sqrt()
}

pub fn l2_ball_vec(v: &VectorField, r: f64) -> f64 {
    v.components().iter().map(|c| l2_ball(c, r).powi(2)).sum::<f64>().sqrt()
}

/// Largest Frobenius norm of the Hessian.
fn hessian_linf(a: &ComplexField) -> f64 {
    let g = *a.grid();
    let mut acc = vec![0.0f64; g.len()];
    for i in 0..3 {
        for j in i..3 {
            let d = a.apply_symbol(move |xi| Complex64::new(-xi[i] * xi[j], 0.0));
            let w = if i == j { 1.0 } else { 2.0 };
            acc.par_iter_mut()
                .zip(d.values())
                .for_each(|(s, v)| *s += w * v.norm_sqr());
        }
    }
    acc.into_iter().fold(0.0, f64::max).sqrt()
}

/// `φ = ∂̄_e⁻¹(χ e·P_{≤cap}A)` with `e = e₁ + ie₂` the frame of `ζ`, and
/// `a = e^{−iφ}`. With `ζ = τ(e₁ + ie₂)` the transport equation
/// `ζ·∇φ = χ ζ·A_trunc` holds wherever the truncated Cauchy kernel is exact.
pub fn build_phase(a_field: &VectorField, z: &ZetaParams, chi: &ComplexField, freq_cap: f64) -> AmplitudeBundle {
    let frame = ComplexFrame { e1: z.e1(), e2: z.e2() };
    let a_trunc = truncate_frequencies(a_field, freq_cap);
    let source = chi * &frame.dot_field(&a_trunc);
    let phi = dbar::dbar_inverse_free(&source, &frame, DEFAULT_KERNEL_RADIUS);
    let kernel_mass = dbar::fiber_mean(&source, &frame).l2();
    let a = phi.map(|p| (-I * p).exp());
    let grad_phi = phi.gradient();
    let grad_a = grad_phi.mul_scalar(&a).map_components(|c| c.scale(-I));
    let diagnostics = AmplitudeDiagnostics {
        phi_linf: phi.linf(),
        grad_phi_l2_ball: l2_ball_vec(&grad_phi, 1.0),
        a_linf: a.linf(),
        grad_a_l2_ball: l2_ball_vec(&grad_a, 1.0),
        hess_a_linf: hessian_linf(&a),
        kernel_mass,
        kernel_warning: kernel_mass > KERNEL_WARN * source.l2(),
    };
    AmplitudeBundle {
        zeta: *z,
        frame,
        phi,
        a,
        grad_phi,
        grad_a,
        a_trunc,
        diagnostics,
    }
}

impl AmplitudeBundle {
    /// The trivial amplitude `a ≡ 1` (for `A = 0`).
    pub fn trivial(grid: Grid3, z: &ZetaParams) -> Self {
        let zero = VectorField::zeros(grid);
        build_phase(&zero, z, &ComplexField::zeros(grid), f64::INFINITY)
    }

    /// `‖χ(ζ·∇a + iζ·A_trunc a)‖₂ / (τ‖a‖₂)`.
    pub fn transport_residual(&self, chi: &ComplexField) -> f64 {
        let zc = crate::field::cvec(self.zeta.re(), self.zeta.im());
        let lhs = self.grad_a.dot_const(zc);
        let src = &self.a_trunc.dot_const(zc) * &self.a;
        let res = chi * &(&lhs + &src.scale(I));
        res.l2() / (self.zeta.tau() * self.a.l2())
    }
}

/// `‖∂̄⁻¹_e ∇A‖_{L²(B)}` summed in quadrature over the components of `A`.
pub fn diag_h1(a: &VectorField, frame: &ComplexFrame) -> Result<f64, DbarError> {
    let mut s = 0.0;
    for c in a.components() {
        check_support(c)?;
        let g = c
            .gradient()
            .map_components(|d| dbar::dbar_inverse_free(d, frame, DEFAULT_KERNEL_RADIUS));
        s += l2_ball_vec(&g, 1.0).powi(2);
    }
    Ok(s.sqrt())
}

/// `‖∂̄⁻¹_e f‖_∞` over the region where the truncated kernel is exact.
pub fn diag_phili(f: &ComplexField, frame: &ComplexFrame) -> Result<f64, DbarError> {
    check_support(f)?;
    let g = *f.grid();
    let u = dbar::dbar_inverse_free(f, frame, DEFAULT_KERNEL_RADIUS);
    let trusted = DEFAULT_KERNEL_RADIUS - SUPPORT_RADIUS;
    Ok(u.values()
        .iter()
        .enumerate()
        .filter(|(i, _)| frame.in_plane_norm(g.point(*i)) <= trusted)
        .map(|(_, v)| v.norm())
        .fold(0.0, f64::max))
}

/// `‖f‖_{L^∞L¹_e}`: the largest integral of `|f|` over a plane
/// `x·e₃ = t`. Slices are bins of width `h` in `t`.
pub fn diag_lil2(f: &ComplexField, frame: &ComplexFrame) -> Result<f64, DbarError> {
    check_support(f)?;
    let g = *f.grid();
    let e3 = frame.e3();
    let h = g.h();
    let nb = (2.0 * g.l() / h).ceil() as usize + 1;
    let mut bins = vec![0.0f64; nb];
    for (i, v) in f.values().iter().enumerate() {
        let t = g.point(i).dot(e3);
        let b = ((t + g.l()) / h).round() as usize;
        bins[b.min(nb - 1)] += v.norm();
    }
    Ok(bins.into_iter().fold(0.0, f64::max) * g.cell_volume() / h)
}

fn check_support(f: &ComplexField) -> Result<(), DbarError> {
    let leak = dbar::mass_outside(f, SUPPORT_RADIUS + f.grid().h());
    if leak > 1e-10 {
        Err(DbarError::SupportViolation(leak))
    } else {
        Ok(())
    }
}

/// `‖χ a q‖_{X^{−1/2}_ζ}`.
pub fn x_minus_half_of_aq(
    a: &ComplexField,
    q: &ComplexField,
    z: &ZetaParams,
    chi: &ComplexField,
) -> Result<f64, ConjlapError> {
    conjlap::xb_norm(&(&(chi * a) * q), z, -0.5, false)
}

/// `‖Δ(χa)‖_{X^{−1/2}_ζ}`.
pub fn x_minus_half_of_lap_chia(a: &ComplexField, chi: &ComplexField, z: &ZetaParams) -> Result<f64, ConjlapError> {
    conjlap::xb_norm(&(chi * a).laplacian(), z, -0.5, false)
}

/// A convenience frame from `ζ`.
pub fn frame_of(z: &ZetaParams) -> ComplexFrame {
    ComplexFrame { e1: z.e1(), e2: z.e2() }
}

/// Largest pointwise deviation of `|∇a|` from `|a||∇φ|`.
pub fn chain_rule_defect(b: &AmplitudeBundle) -> f64 {
    let ga = b.grad_a.magnitude();
    let gp = b.grad_phi.magnitude();
    ga.values()
        .iter()
        .zip(gp.values())
        .zip(b.a.values())
        .map(|((x, y), a)| (x.re - a.norm() * y.re).abs())
        .fold(0.0, f64::max)
}

/// Relative `L²` gap between the chain-rule gradient `−i a ∇φ` and the
/// spectral gradient of `a` (a discretization diagnostic).
pub fn spectral_gradient_gap(b: &AmplitudeBundle) -> f64 {
    b.a.gradient().sub(&b.grad_a).l2() / b.grad_a.l2().max(f64::MIN_POSITIVE)
}

/// `sup | |a| − e^{Im φ} |`.
pub fn modulus_defect(b: &AmplitudeBundle) -> f64 {
    b.a.values()
        .iter()
        .zip(b.phi.values())
        .map(|(a, p)| (a.norm() - p.im.exp()).abs())
        .fold(0.0, f64::max)
}

pub fn in_plane(frame: &ComplexFrame, x: Vec3) -> Complex64 {
    frame.pair(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{bump_vector, chi_field, GaussianBump};
    use cgokit_core::Frame;

    fn grid() -> Grid3 {
        Grid3::new(32, 4.0).unwrap()
    }

    fn sample_a(g: Grid3) -> VectorField {
        let b = |c: Vec3, amp: f64| GaussianBump {
            center: c,
            width: 0.25,
            amplitude: amp,
            envelope: Vec3::new(0.2, 0.0, -0.1),
        };
        bump_vector(
            g,
            [
                b(Vec3::new(0.05, 0.0, 0.0), 0.8),
                b(Vec3::ZERO, -0.5),
                b(Vec3::new(0.0, 0.1, 0.0), 0.3),
            ],
        )
    }

    #[test]
    fn zero_potential_gives_unit_amplitude() {
        let g = grid();
        let z = ZetaParams::null(16.0, &Frame::STANDARD).unwrap();
        let b = build_phase(&VectorField::zeros(g), &z, &chi_field(g), CAP_FACTOR * 16.0);
        assert_eq!(b.phi.linf(), 0.0);
        assert!(b.a.values().iter().all(|v| *v == Complex64::new(1.0, 0.0)));
    }

    #[test]
    fn transport_equation_holds_on_chi_support() {
        // the clipped bump is only approximately band-limited; N = 64 resolves it
        let g = Grid3::new(64, 4.0).unwrap();
        let frame = Frame::from_pair(Vec3::new(0.0, 0.6, 0.8), Vec3::new(1.0, 0.0, 0.0)).unwrap();
        let z = ZetaParams::null(16.0, &frame).unwrap();
        let chi = chi_field(g);
        let b = build_phase(&sample_a(g), &z, &chi, CAP_FACTOR * 16.0);
        let r = b.transport_residual(&chi);
        assert!(r <= 1e-6, "transport residual {r}");
        assert!(chain_rule_defect(&b) <= 1e-10);
        let gap = spectral_gradient_gap(&b);
        assert!(gap <= 1e-3, "spectral gradient gap {gap}");
        assert!(modulus_defect(&b) <= 1e-12);
    }

    #[test]
    fn infinite_cap_is_bitwise_identical() {
        let g = grid();
        let z = ZetaParams::null(16.0, &Frame::STANDARD).unwrap();
        let chi = chi_field(g);
        let a = sample_a(g);
        let b1 = build_phase(&a, &z, &chi, CAP_FACTOR * 16.0);
        let b2 = build_phase(&a, &z, &chi, f64::INFINITY);
        assert_eq!(b1.phi, b2.phi);
        assert_eq!(b1.a, b2.a);
    }

    #[test]
    fn mollifier_support() {
        let g = Grid3::new(8, std::f64::consts::TAU * 4.0).unwrap();
        let fr = ComplexFrame::new(Vec3::E1, Vec3::E2).unwrap();
        let m = build_mollifier();
        // dk = 1/4: in-plane frequency 1/4 passes, 5/4 is removed
        let low = ComplexField::plane_wave(g, [1, 1, 3]);
        let out = mollify(&m, &low, &fr);
        assert!((&out - &low).l2() < 1e-12 * low.l2());
        let high = ComplexField::plane_wave(g, [3, 4, 0]);
        assert!(mollify(&m, &high, &fr).l2() < 1e-12 * high.l2());
    }

    #[test]
    fn lemma_quantities_vanish_on_zero_and_scale() {
        let g = grid();
        let fr = ComplexFrame::new(Vec3::E1, Vec3::E2).unwrap();
        let zero = ComplexField::zeros(g);
        assert_eq!(diag_phili(&zero, &fr).unwrap(), 0.0);
        assert_eq!(diag_lil2(&zero, &fr).unwrap(), 0.0);
        assert_eq!(diag_h1(&VectorField::zeros(g), &fr).unwrap(), 0.0);
        let a = sample_a(g);
        let h = diag_h1(&a, &fr).unwrap();
        let h2 = diag_h1(&a.scale_real(2.0), &fr).unwrap();
        assert!((h2 - 2.0 * h).abs() <= 1e-12 * h2);
    }

    #[test]
    fn lil2_matches_slice_sums_for_axis_frame() {
        let g = grid();
        let fr = ComplexFrame::new(Vec3::E1, Vec3::E2).unwrap();
        let f = GaussianBump {
            center: Vec3::ZERO,
            width: 0.3,
            amplitude: 1.0,
            envelope: Vec3::ZERO,
        }
        .scalar(g);
        let n = g.n();
        let mut best = 0.0f64;
        for iz in 0..n {
            let mut s = 0.0;
            for ix in 0..n {
                for iy in 0..n {
                    s += f.values()[g.index(ix, iy, iz)].norm();
                }
            }
            best = best.max(s * g.h() * g.h());
        }
        assert!((diag_lil2(&f, &fr).unwrap() - best).abs() < 1e-12 * best);
    }

    #[test]
    fn aq_with_unit_amplitude_matches_spectral_sum() {
        let g = grid();
        let z = ZetaParams::null(16.0, &Frame::STANDARD).unwrap();
        let one = ComplexField::constant(g, Complex64::new(1.0, 0.0));
        let chi = chi_field(g);
        let q = ComplexField::plane_wave(g, [1, 2, 0]);
        let v = x_minus_half_of_aq(&one, &q, &z, &chi).unwrap();
        let target = &chi * &q;
        let direct = conjlap::weighted_norm(&target, |xi| 1.0 / (z.symbol(xi).norm() + 16.0));
        assert!((v - direct).abs() < 1e-12 * v);
        assert_eq!(
            x_minus_half_of_aq(&one, &ComplexField::zeros(g), &z, &chi).unwrap(),
            0.0
        );
    }
}
