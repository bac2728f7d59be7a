//! The complex-frequency schedule pairing two CGO solutions whose
//! exponentials combine into a single plane wave `e^{ik·x}`.

use crate::error::CoreError;
use crate::vec3::{Frame, Vec3};
use crate::zeta::ZetaParams;

/// How the in-plane imaginary component of `ζ̃ᵢ` is sized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScheduleVariant {
    /// `s = √(τ² − r²/4)`, which makes `ζ̃ᵢ·ζ̃ᵢ = 0`.
    #[default]
    Null,
    /// `s = √(τ² − r²)` as literally printed; `ζ̃ᵢ·ζ̃ᵢ = 3r²/4`.
    Paper,
}

impl ScheduleVariant {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "null" => Some(ScheduleVariant::Null),
            "paper" => Some(ScheduleVariant::Paper),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ScheduleVariant::Null => "null",
            ScheduleVariant::Paper => "paper",
        }
    }
}

/// `ζ₁ = τU(e₁ + ie₂)`, `ζ₂ = −ζ₁`,
/// `ζ̃₁ = τUe₁ + i(r/2 Ue₃ + s Ue₂)`, `ζ̃₂ = −τUe₁ + i(r/2 Ue₃ − s Ue₂)`,
/// `k = rUe₃`, so that `ζ̃₁ + ζ̃₂ = ik`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZetaSchedule {
    pub tau: f64,
    pub frame: Frame,
    pub r: f64,
    pub variant: ScheduleVariant,
    zeta1: ZetaParams,
    zeta2: ZetaParams,
    zeta_tilde1: ZetaParams,
    zeta_tilde2: ZetaParams,
}

impl ZetaSchedule {
    pub fn new(tau: f64, frame: Frame, r: f64, variant: ScheduleVariant) -> Result<Self, CoreError> {
        if !(1.0..=2.0).contains(&r) {
            return Err(CoreError::RadiusOutOfRange(r));
        }
        if !(tau > r) {
            return Err(CoreError::TauNotAboveRadius { tau, r });
        }
        if frame.orthonormality_defect() > crate::vec3::ORTHO_TOL {
            return Err(CoreError::NotOrthonormal);
        }
        let s = match variant {
            ScheduleVariant::Null => libm::sqrt(tau * tau - r * r / 4.0),
            ScheduleVariant::Paper => libm::sqrt(tau * tau - r * r),
        };
        let (u1, u2, u3) = (frame.e1, frame.e2, frame.e3);
        let zeta1 = ZetaParams::from_complex(u1 * tau, u2 * tau)?;
        let zeta2 = ZetaParams::from_complex(-(u1 * tau), -(u2 * tau))?;
        let zeta_tilde1 = ZetaParams::from_complex(u1 * tau, u3 * (r / 2.0) + u2 * s)?;
        let zeta_tilde2 = ZetaParams::from_complex(-(u1 * tau), u3 * (r / 2.0) - u2 * s)?;
        Ok(ZetaSchedule {
            tau,
            frame,
            r,
            variant,
            zeta1,
            zeta2,
            zeta_tilde1,
            zeta_tilde2,
        })
    }

    pub fn zeta1(&self) -> &ZetaParams {
        &self.zeta1
    }

    pub fn zeta2(&self) -> &ZetaParams {
        &self.zeta2
    }

    pub fn zeta_tilde1(&self) -> &ZetaParams {
        &self.zeta_tilde1
    }

    pub fn zeta_tilde2(&self) -> &ZetaParams {
        &self.zeta_tilde2
    }

    /// `k = rUe₃`.
    pub fn k(&self) -> Vec3 {
        self.frame.e3 * self.r
    }

    /// Largest of `|ζᵢ − ζ̃ᵢ|` over both solutions.
    pub fn max_perturbation(&self) -> f64 {
        let d = |a: &ZetaParams, b: &ZetaParams| libm::sqrt((a.re() - b.re()).norm_sq() + (a.im() - b.im()).norm_sq());
        d(&self.zeta1, &self.zeta_tilde1).max(d(&self.zeta2, &self.zeta_tilde2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rotated() -> Frame {
        let c = libm::cos(0.7);
        let s = libm::sin(0.7);
        Frame::from_pair(Vec3::new(c, s, 0.0), Vec3::new(-s * 0.6, c * 0.6, 0.8)).unwrap()
    }

    #[test]
    fn tilde_sum_is_ik() {
        let sch = ZetaSchedule::new(16.0, rotated(), 1.5, ScheduleVariant::Null).unwrap();
        let re = sch.zeta_tilde1().re() + sch.zeta_tilde2().re();
        let im = sch.zeta_tilde1().im() + sch.zeta_tilde2().im();
        assert!(re.norm() < 1e-13);
        assert!((im - sch.k()).norm() < 1e-13);
    }

    #[test]
    fn null_variant_is_null() {
        let sch = ZetaSchedule::new(16.0, rotated(), 2.0, ScheduleVariant::Null).unwrap();
        assert!(sch.zeta_tilde1().zeta_dot_zeta().norm() < 1e-11);
        assert!(sch.zeta_tilde2().zeta_dot_zeta().norm() < 1e-11);
    }

    #[test]
    fn paper_variant_has_three_quarters_r_squared() {
        let r = 1.25;
        let sch = ZetaSchedule::new(16.0, rotated(), r, ScheduleVariant::Paper).unwrap();
        let zz = sch.zeta_tilde1().zeta_dot_zeta();
        assert!((zz.re - 0.75 * r * r).abs() < 1e-11);
        assert!(zz.im.abs() < 1e-11);
    }

    #[test]
    fn rejects_small_tau_and_bad_r() {
        let f = Frame::STANDARD;
        assert!(matches!(
            ZetaSchedule::new(1.5, f, 1.5, ScheduleVariant::Null),
            Err(CoreError::TauNotAboveRadius { .. })
        ));
        assert!(matches!(
            ZetaSchedule::new(8.0, f, 2.5, ScheduleVariant::Null),
            Err(CoreError::RadiusOutOfRange(_))
        ));
    }

    proptest! {
        #[test]
        fn schedule_invariants(
            tau in 4.0f64..512.0,
            r in 1.0f64..=2.0,
            theta in 0.0f64..core::f64::consts::TAU,
            phi in 0.0f64..core::f64::consts::PI,
            paper in any::<bool>(),
        ) {
            let e1 = Vec3::new(libm::sin(phi) * libm::cos(theta), libm::sin(phi) * libm::sin(theta), libm::cos(phi));
            let e2 = e1.any_orthogonal();
            let frame = Frame::from_pair(e1, e2).unwrap();
            let v = if paper { ScheduleVariant::Paper } else { ScheduleVariant::Null };
            let sch = ZetaSchedule::new(tau, frame, r, v).unwrap();
            let im = sch.zeta_tilde1().im() + sch.zeta_tilde2().im();
            prop_assert!((im - sch.k()).norm() <= 1e-12 * tau);
            prop_assert!(sch.max_perturbation() <= 4.0);
            for z in [sch.zeta_tilde1(), sch.zeta_tilde2()] {
                prop_assert!(z.re().dot(z.im()).abs() <= 1e-10 * tau * tau);
                prop_assert!((z.re().norm() - tau).abs() <= 1e-12 * tau);
            }
        }
    }
}
