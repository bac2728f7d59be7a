//! Symbols of the dyadic projections: radial Littlewood-Paley cutoffs,
//! directional cutoffs along one or two frame axes, and modulation cutoffs
//! localizing near the characteristic circle of a complex frequency.

use crate::cutoff::CutoffProfile;
use crate::error::CoreError;
use crate::vec3::{Frame, Vec3};
use crate::zeta::ZetaParams;

/// A real Fourier symbol with values in `[0, 1]`.
///
/// `*Leq` variants are `χ(·/s)`; `*Eq` variants are the dyadic differences
/// `χ(·/s) − χ(·/(s/2))` for `s > 1`, with the convention that the shell at
/// `s = 1` is the full `*Leq(1)`. `*Gt` is `1 − *Leq`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection {
    LpLeq(f64),
    LpEq(f64),
    LpGt(f64),
    /// `χ(|ξ·e|/λ)`.
    DirLeq {
        e: Vec3,
        scale: f64,
    },
    DirEq {
        e: Vec3,
        scale: f64,
    },
    /// `χ(|ξ·e₁|/λ) χ(|ξ·e₂|/λ)`.
    PlaneLeq {
        frame: Frame,
        scale: f64,
    },
    PlaneEq {
        frame: Frame,
        scale: f64,
    },
    /// `χ(||ξ^⊥ + τη| − τ|/ν) χ(|ξ·e₁|/ν)`.
    ModLeq {
        zeta: ZetaParams,
        scale: f64,
    },
    ModEq {
        zeta: ZetaParams,
        scale: f64,
    },
    /// `Q_{≤τ/8}`.
    ModLow(ZetaParams),
    /// `I − Q_{≤τ/8}`.
    ModHigh(ZetaParams),
}

fn check_scale(s: f64) -> Result<(), CoreError> {
    if s > 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(CoreError::BadScale(s))
    }
}

/// Whether `s` is `2^j` for some integer `j ≥ 0`.
pub fn is_dyadic(s: f64) -> bool {
    if !(s >= 1.0 && s.is_finite()) {
        return false;
    }
    let (m, _) = libm::frexp(s);
    m == 0.5
}

fn check_dyadic(s: f64) -> Result<(), CoreError> {
    if is_dyadic(s) {
        Ok(())
    } else {
        Err(CoreError::NotDyadic(s))
    }
}

fn check_unit(e: Vec3) -> Result<(), CoreError> {
    if libm::fabs(e.norm() - 1.0) > crate::vec3::ORTHO_TOL {
        Err(CoreError::NotOrthonormal)
    } else {
        Ok(())
    }
}

fn check_frame(f: &Frame) -> Result<(), CoreError> {
    if f.orthonormality_defect() > crate::vec3::ORTHO_TOL {
        Err(CoreError::NotOrthonormal)
    } else {
        Ok(())
    }
}

impl Projection {
    /// Checked constructors: `Leq` scales must be positive and finite, `Eq`
    /// scales dyadic.
    pub fn lp_leq(lambda: f64) -> Result<Self, CoreError> {
        check_scale(lambda).map(|_| Projection::LpLeq(lambda))
    }

    pub fn lp_eq(lambda: f64) -> Result<Self, CoreError> {
        check_dyadic(lambda).map(|_| Projection::LpEq(lambda))
    }

    pub fn lp_gt(lambda: f64) -> Result<Self, CoreError> {
        check_scale(lambda).map(|_| Projection::LpGt(lambda))
    }

    pub fn dir_leq(e: Vec3, scale: f64) -> Result<Self, CoreError> {
        check_unit(e)?;
        check_scale(scale).map(|_| Projection::DirLeq { e, scale })
    }

    pub fn dir_eq(e: Vec3, scale: f64) -> Result<Self, CoreError> {
        check_unit(e)?;
        check_dyadic(scale).map(|_| Projection::DirEq { e, scale })
    }

    pub fn plane_leq(frame: Frame, scale: f64) -> Result<Self, CoreError> {
        check_frame(&frame)?;
        check_scale(scale).map(|_| Projection::PlaneLeq { frame, scale })
    }

    pub fn plane_eq(frame: Frame, scale: f64) -> Result<Self, CoreError> {
        check_frame(&frame)?;
        check_dyadic(scale).map(|_| Projection::PlaneEq { frame, scale })
    }

    pub fn mod_leq(zeta: ZetaParams, scale: f64) -> Result<Self, CoreError> {
        check_scale(scale).map(|_| Projection::ModLeq { zeta, scale })
    }

    pub fn mod_eq(zeta: ZetaParams, scale: f64) -> Result<Self, CoreError> {
        check_dyadic(scale).map(|_| Projection::ModEq { zeta, scale })
    }

    /// Symbol value at `xi` with the default smooth profile.
    pub fn symbol(&self, xi: Vec3) -> f64 {
        self.symbol_with(CutoffProfile::Smooth, xi)
    }

    pub fn symbol_with(&self, chi: CutoffProfile, xi: Vec3) -> f64 {
        let shell = |leq: &dyn Fn(f64) -> f64, s: f64| {
            if s <= 1.0 {
                leq(s)
            } else {
                leq(s) - leq(s / 2.0)
            }
        };
        match *self {
            Projection::LpLeq(l) => chi.eval(xi.norm() / l),
            Projection::LpEq(l) => shell(&|s| chi.eval(xi.norm() / s), l),
            Projection::LpGt(l) => 1.0 - chi.eval(xi.norm() / l),
            Projection::DirLeq { e, scale } => chi.eval(libm::fabs(xi.dot(e)) / scale),
            Projection::DirEq { e, scale } => shell(&|s| chi.eval(libm::fabs(xi.dot(e)) / s), scale),
            Projection::PlaneLeq { frame, scale } => plane(chi, &frame, xi, scale),
            Projection::PlaneEq { frame, scale } => shell(&|s| plane(chi, &frame, xi, s), scale),
            Projection::ModLeq { zeta, scale } => modulation(chi, &zeta, xi, scale),
            Projection::ModEq { zeta, scale } => shell(&|s| modulation(chi, &zeta, xi, s), scale),
            Projection::ModLow(zeta) => modulation(chi, &zeta, xi, zeta.tau() / 8.0),
            Projection::ModHigh(zeta) => 1.0 - modulation(chi, &zeta, xi, zeta.tau() / 8.0),
        }
    }
}

fn plane(chi: CutoffProfile, f: &Frame, xi: Vec3, s: f64) -> f64 {
    chi.eval(libm::fabs(xi.dot(f.e1)) / s) * chi.eval(libm::fabs(xi.dot(f.e2)) / s)
}

fn modulation(chi: CutoffProfile, z: &ZetaParams, xi: Vec3, s: f64) -> f64 {
    let e1 = z.e1();
    let a = xi.dot(e1);
    let w = (xi - e1 * a) + z.eta() * z.tau();
    let ring = libm::fabs(w.norm() - z.tau());
    chi.eval(ring / s) * chi.eval(libm::fabs(a) / s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dyadic_detection() {
        assert!(is_dyadic(1.0));
        assert!(is_dyadic(64.0));
        assert!(!is_dyadic(0.5));
        assert!(!is_dyadic(3.0));
        assert!(!is_dyadic(f64::NAN));
        assert!(matches!(Projection::lp_eq(6.0), Err(CoreError::NotDyadic(_))));
        assert!(matches!(Projection::lp_leq(-1.0), Err(CoreError::BadScale(_))));
    }

    #[test]
    fn low_band_passes_inner_frequencies() {
        let p = Projection::lp_leq(8.0).unwrap();
        assert_eq!(p.symbol(Vec3::new(6.0, 0.0, 0.0)), 1.0);
        assert_eq!(p.symbol(Vec3::new(8.0, 0.0, 0.0)), 0.0);
    }

    #[test]
    fn modulation_passes_origin_for_null_zeta() {
        let z = ZetaParams::null(32.0, &Frame::STANDARD).unwrap();
        for nu in [1.0, 2.0, 4.0, 16.0] {
            assert_eq!(Projection::mod_leq(z, nu).unwrap().symbol(Vec3::ZERO), 1.0);
        }
    }

    #[test]
    fn low_plus_high_is_identity() {
        let z = ZetaParams::null(20.0, &Frame::STANDARD).unwrap();
        for xi in [Vec3::new(0.3, -2.0, 1.0), Vec3::new(1.0, -38.0, 4.0), Vec3::ZERO] {
            let s = Projection::ModLow(z).symbol(xi) + Projection::ModHigh(z).symbol(xi);
            assert!((s - 1.0).abs() <= f64::EPSILON);
        }
    }

    proptest! {
        #[test]
        fn shells_telescope(x in -90.0f64..90.0, y in -90.0f64..90.0, z in -90.0f64..90.0) {
            let xi = Vec3::new(x, y, z);
            let mut sum = 0.0;
            let mut l = 1.0;
            while l <= 256.0 {
                sum += Projection::LpEq(l).symbol(xi);
                l *= 2.0;
            }
            prop_assert!((sum - Projection::LpLeq(256.0).symbol(xi)).abs() < 1e-14);
            prop_assert!((sum - 1.0).abs() < 1e-14);
        }

        #[test]
        fn symbols_in_unit_interval(x in -90.0f64..90.0, y in -90.0f64..90.0, z in -90.0f64..90.0, s in 0usize..8) {
            let xi = Vec3::new(x, y, z);
            let scale = (1u32 << s) as f64;
            let zeta = ZetaParams::null(40.0, &Frame::STANDARD).unwrap();
            let all = [
                Projection::LpEq(scale),
                Projection::LpGt(scale),
                Projection::DirEq { e: Vec3::E3, scale },
                Projection::PlaneEq { frame: Frame::STANDARD, scale },
                Projection::ModEq { zeta, scale },
                Projection::ModHigh(zeta),
            ];
            for p in all {
                let v = p.symbol(xi);
                prop_assert!((-1e-15..=1.0 + 1e-15).contains(&v), "{:?} -> {}", p, v);
            }
        }

        #[test]
        fn distant_shells_are_disjoint(x in -90.0f64..90.0, y in -90.0f64..90.0, z in -90.0f64..90.0, a in 0u32..5, gap in 2u32..4) {
            let xi = Vec3::new(x, y, z);
            let l = (1u32 << a) as f64;
            let m = l * (1u32 << gap) as f64;
            prop_assert_eq!(Projection::LpEq(l).symbol(xi) * Projection::LpEq(m).symbol(xi), 0.0);
        }
    }
}
