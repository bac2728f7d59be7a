//! Complex frequencies `ζ = τ(e₁ + iη)` and the symbol of the conjugated
//! Laplacian `Δ_ζ = e^{-x·ζ} Δ e^{x·ζ}`.

use num_complex::Complex64;

use crate::error::CoreError;
use crate::vec3::{Frame, Vec3};

/// Tolerance for the `Re ζ ⊥ Im ζ` and `|η| ≤ 1` checks, relative to `τ`.
const ZETA_TOL: f64 = 1e-10;

/// `ζ = τ(e₁ + iη)` with `|e₁| = 1`, `η ⊥ e₁`, `|η| ≤ 1`; vectors are
/// stored in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZetaParams {
    tau: f64,
    e1: Vec3,
    eta: Vec3,
}

/// The characteristic circle `Σ_ζ = {ξ·e₁ = 0, |ξ + τη| = τ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharSetGeometry {
    pub center: Vec3,
    pub radius: f64,
    pub normal: Vec3,
}

impl CharSetGeometry {
    pub fn contains_origin(&self) -> bool {
        (self.center.norm() - self.radius).abs() <= ZETA_TOL * self.radius.max(1.0)
    }
}

impl ZetaParams {
    /// `ζ = τ U(e₁ + iη_local)` with `η_local` given in frame coordinates.
    pub fn new(tau: f64, frame: &Frame, eta_local: Vec3) -> Result<Self, CoreError> {
        if frame.orthonormality_defect() > crate::vec3::ORTHO_TOL {
            return Err(CoreError::NotOrthonormal);
        }
        Self::from_parts(tau, frame.e1, frame.apply(eta_local))
    }

    /// The null frequency `ζ = τ U(e₁ + ie₂)`.
    pub fn null(tau: f64, frame: &Frame) -> Result<Self, CoreError> {
        Self::new(tau, frame, Vec3::E2)
    }

    /// Build from `Re ζ` and `Im ζ` directly.
    pub fn from_complex(re: Vec3, im: Vec3) -> Result<Self, CoreError> {
        let tau = re.norm();
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(CoreError::NonPositiveTau(tau));
        }
        Self::from_parts(tau, re.scale(1.0 / tau), im.scale(1.0 / tau))
    }

    fn from_parts(tau: f64, e1: Vec3, eta: Vec3) -> Result<Self, CoreError> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(CoreError::NonPositiveTau(tau));
        }
        let n = eta.norm();
        if n > 1.0 + ZETA_TOL {
            return Err(CoreError::EtaTooLarge(n));
        }
        let d = e1.dot(eta);
        if d.abs() > ZETA_TOL {
            return Err(CoreError::EtaNotOrthogonal(d));
        }
        Ok(ZetaParams { tau, e1, eta })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Unit vector along `Re ζ`.
    pub fn e1(&self) -> Vec3 {
        self.e1
    }

    /// `η = Im ζ / τ` in world coordinates.
    pub fn eta(&self) -> Vec3 {
        self.eta
    }

    pub fn re(&self) -> Vec3 {
        self.e1 * self.tau
    }

    pub fn im(&self) -> Vec3 {
        self.eta * self.tau
    }

    /// Unit in-plane direction paired with `e₁`: `η/|η|`, or an arbitrary
    /// orthogonal direction when `η = 0`.
    pub fn e2(&self) -> Vec3 {
        self.eta.normalized().unwrap_or_else(|| self.e1.any_orthogonal())
    }

    /// Right-handed frame `{e₁, e₂, e₁ × e₂}` attached to `ζ`.
    pub fn frame(&self) -> Frame {
        let e2 = self.e2();
        Frame {
            e1: self.e1,
            e2,
            e3: self.e1.cross(e2),
        }
    }

    /// `ζ·v` for a real vector `v`.
    pub fn dot_real(&self, v: Vec3) -> Complex64 {
        Complex64::new(self.tau * self.e1.dot(v), self.tau * self.eta.dot(v))
    }

    /// `ζ·ζ = τ²(1 − |η|²)` (the cross term vanishes since `η ⊥ e₁`).
    pub fn zeta_dot_zeta(&self) -> Complex64 {
        let re = self.re();
        let im = self.im();
        Complex64::new(re.norm_sq() - im.norm_sq(), 2.0 * re.dot(im))
    }

    /// `ζ·ζ = 0`, equivalently `|η| = 1`.
    pub fn null_condition(&self) -> bool {
        (self.eta.norm() - 1.0).abs() <= ZETA_TOL
    }

    pub fn char_set(&self) -> CharSetGeometry {
        CharSetGeometry {
            center: -(self.eta * self.tau),
            radius: self.tau,
            normal: self.e1,
        }
    }

    /// `p_ζ(ξ) = (iξ + ζ)² = −|ξ + τη|² + 2iτ e₁·ξ + τ²`.
    ///
    /// The real part is evaluated as `−a² − (|w| − τ)(|w| + τ)` with
    /// `a = ξ·e₁`, `w = ξ^⊥ + τη`, which keeps full relative accuracy near
    /// the characteristic circle.
    pub fn symbol(&self, xi: Vec3) -> Complex64 {
        let a = xi.dot(self.e1);
        let w = (xi - self.e1 * a) + self.eta * self.tau;
        let wn = w.norm();
        let re = -a * a - (wn - self.tau) * (wn + self.tau);
        Complex64::new(re, 2.0 * self.tau * a)
    }

    /// Euclidean distance from `ξ` to `Σ_ζ`:
    /// `√((ξ·e₁)² + (|ξ^⊥ + τη| − τ)²)`.
    pub fn dist_to_char(&self, xi: Vec3) -> f64 {
        let a = xi.dot(self.e1);
        let w = (xi - self.e1 * a) + self.eta * self.tau;
        let b = w.norm() - self.tau;
        libm::sqrt(a * a + b * b)
    }

    /// The same frequency with `τ` multiplied by `factor` (used to step off
    /// resonant lattice configurations).
    pub fn with_tau_scaled(&self, factor: f64) -> Result<Self, CoreError> {
        Self::from_parts(self.tau * factor, self.e1, self.eta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn symbol_examples() {
        let tau = 3.0;
        let z = ZetaParams::null(tau, &Frame::STANDARD).unwrap();
        assert!(close(z.symbol(Vec3::ZERO), Complex64::new(0.0, 0.0), 1e-14));
        let antipode = Vec3::E2 * (-2.0 * tau);
        assert!(close(z.symbol(antipode), Complex64::new(0.0, 0.0), 1e-12));
        let p = z.symbol(Vec3::E1 * tau);
        assert!(close(p, Complex64::new(-tau * tau, 2.0 * tau * tau), 1e-12));
    }

    #[test]
    fn symbol_matches_complex_square() {
        let frame = Frame::from_pair(Vec3::new(0.6, 0.8, 0.0), Vec3::new(0.0, 0.0, 1.0)).unwrap();
        let z = ZetaParams::new(5.0, &frame, Vec3::new(0.0, 0.3, -0.4)).unwrap();
        let xi = Vec3::new(1.3, -0.7, 2.2);
        // (iξ + ζ)·(iξ + ζ) componentwise
        let mut direct = Complex64::new(0.0, 0.0);
        for k in 0..3 {
            let c = Complex64::new(z.re()[k], xi[k] + z.im()[k]);
            direct += c * c;
        }
        assert!(close(z.symbol(xi), direct, 1e-12));
    }

    #[test]
    fn distance_examples() {
        let tau = 2.5;
        let z = ZetaParams::null(tau, &Frame::STANDARD).unwrap();
        assert_eq!(z.dist_to_char(Vec3::ZERO), 0.0);
        assert!((z.dist_to_char(Vec3::E1 * tau) - tau).abs() < 1e-14);
        assert!((z.dist_to_char(Vec3::E2 * (2.0 * tau)) - 2.0 * tau).abs() < 1e-14);
    }

    #[test]
    fn null_condition_tracks_eta_norm() {
        let z = ZetaParams::null(4.0, &Frame::STANDARD).unwrap();
        assert!(z.null_condition());
        assert!(z.zeta_dot_zeta().norm() < 1e-12);
        assert!(z.char_set().contains_origin());
        let w = ZetaParams::new(4.0, &Frame::STANDARD, Vec3::new(0.0, 0.5, 0.0)).unwrap();
        assert!(!w.null_condition());
        assert!((w.zeta_dot_zeta().re - 12.0).abs() < 1e-12);
        assert!(!w.char_set().contains_origin());
    }

    #[test]
    fn rejects_bad_eta() {
        let f = Frame::STANDARD;
        assert!(matches!(
            ZetaParams::new(1.0, &f, Vec3::new(0.0, 1.5, 0.0)),
            Err(CoreError::EtaTooLarge(_))
        ));
        assert!(matches!(
            ZetaParams::new(1.0, &f, Vec3::new(0.2, 0.5, 0.0)),
            Err(CoreError::EtaNotOrthogonal(_))
        ));
        assert!(matches!(ZetaParams::null(0.0, &f), Err(CoreError::NonPositiveTau(_))));
    }
}
