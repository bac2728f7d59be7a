//! Fourier multipliers: the dyadic projection calculus applied to grid
//! fields, arbitrary symbol functions, and discrete Besov norms.

use std::fmt;
use std::sync::Arc;

use cgokit_core::{CutoffProfile, Projection, Vec3};
use num_complex::Complex64;
use thiserror::Error;

use crate::field::{ComplexField, FieldError, Grid3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MultiplierError {
    #[error(transparent)]
    Core(#[from] cgokit_core::CoreError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("unsupported Besov exponents p = {p}, q = {q}")]
    BesovExponent { p: f64, q: f64 },
}

pub type SymbolFn = Arc<dyn Fn(Vec3) -> Complex64 + Send + Sync>;

/// A Fourier multiplier: one of the dyadic projections (evaluated with a
/// cutoff profile) or a caller-supplied symbol.
#[derive(Clone)]
pub enum MultiplierSpec {
    Projection { proj: Projection, profile: CutoffProfile },
    Symbol(SymbolFn),
}

impl fmt::Debug for MultiplierSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MultiplierSpec::Projection { proj, profile } => {
                write!(f, "Projection({proj:?}, {profile:?})")
            }
            MultiplierSpec::Symbol(_) => write!(f, "Symbol(<fn>)"),
        }
    }
}

impl From<Projection> for MultiplierSpec {
    fn from(proj: Projection) -> Self {
        MultiplierSpec::Projection {
            proj,
            profile: CutoffProfile::default(),
        }
    }
}

impl MultiplierSpec {
    pub fn with_profile(proj: Projection, profile: CutoffProfile) -> Self {
        MultiplierSpec::Projection { proj, profile }
    }

    pub fn symbol(&self, xi: Vec3) -> Complex64 {
        match self {
            MultiplierSpec::Projection { proj, profile } => Complex64::new(proj.symbol_with(*profile, xi), 0.0),
            MultiplierSpec::Symbol(s) => s(xi),
        }
    }
}

pub fn apply(spec: &MultiplierSpec, f: &ComplexField) -> ComplexField {
    match spec {
        MultiplierSpec::Projection { proj, profile } => f.apply_real_symbol(|xi| proj.symbol_with(*profile, xi)),
        MultiplierSpec::Symbol(s) => f.apply_symbol(|xi| s(xi)),
    }
}

/// Shorthand for applying a projection with the default profile.
pub fn project(proj: Projection, f: &ComplexField) -> ComplexField {
    f.apply_real_symbol(|xi| proj.symbol(xi))
}

/// Dyadic scales `1, 2, 4, …` up to the first `Λ` with `χ(|ξ|/Λ) = 1` on
/// the whole lattice, so the shells `P_1 = P_{≤1}, P_2, …, P_Λ` sum to the
/// identity. The Nyquist corner lands in the last shell.
pub fn dyadic_scales(grid: &Grid3) -> Vec<f64> {
    let max = grid.nyquist() * 3f64.sqrt();
    let mut out = vec![1.0];
    let mut l = 1.0;
    while 0.75 * l < max {
        l *= 2.0;
        out.push(l);
    }
    out
}

/// `‖P_{≤1}f‖_p + (Σ_{λ>1} λ^{sq}‖P_λ f‖_p^q)^{1/q}` over dyadic `λ`.
pub fn besov_norm(f: &ComplexField, s: f64, p: f64, q: f64) -> Result<f64, MultiplierError> {
    let p_ok = [2.0, 3.0, 6.0].contains(&p) || p == f64::INFINITY;
    let q_ok = q == 1.0 || q == 2.0 || q == p || q == f64::INFINITY;
    if !(p_ok && q_ok) {
        return Err(MultiplierError::BesovExponent { p, q });
    }
    let scales = dyadic_scales(f.grid());
    let low = project(Projection::LpLeq(1.0), f).norm(p)?;
    let mut acc = 0.0f64;
    for &l in &scales[1..] {
        let v = l.powf(s) * project(Projection::LpEq(l), f).norm(p)?;
        if q.is_infinite() {
            acc = acc.max(v);
        } else {
            acc += v.powf(q);
        }
    }
    Ok(low + if q.is_infinite() { acc } else { acc.powf(1.0 / q) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use cgokit_core::{Frame, ZetaParams};

    fn grid() -> Grid3 {
        Grid3::new(16, 4.0).unwrap()
    }

    #[test]
    fn low_pass_keeps_inner_plane_wave() {
        let g = grid();
        // |ξ₀| = 3·(π/2) ≈ 4.71 ≤ 3λ/4 for λ = 8
        let w = ComplexField::plane_wave(g, [3, 0, 0]);
        let out = project(Projection::LpLeq(8.0), &w);
        assert!((&out - &w).l2() < 1e-12 * w.l2());
    }

    #[test]
    fn null_modulation_passes_dc() {
        let g = grid();
        let one = ComplexField::constant(g, Complex64::new(1.0, 0.0));
        let z = ZetaParams::null(12.0, &Frame::STANDARD).unwrap();
        for nu in [1.0, 2.0, 4.0] {
            let out = project(Projection::ModLeq { zeta: z, scale: nu }, &one);
            assert!((&out - &one).l2() < 1e-12);
        }
    }

    #[test]
    fn custom_symbol_applies() {
        let g = grid();
        let w = ComplexField::plane_wave(g, [1, 2, -1]);
        let spec = MultiplierSpec::Symbol(Arc::new(|xi: Vec3| Complex64::new(0.0, xi[1])));
        let out = apply(&spec, &w);
        let expect = w.scale(Complex64::new(0.0, 2.0 * g.dk()));
        assert!((&out - &expect).l2() < 1e-12 * expect.l2());
    }

    #[test]
    fn besov_examples() {
        let g = grid();
        let zero = ComplexField::zeros(g);
        assert_eq!(besov_norm(&zero, 0.5, 3.0, 3.0).unwrap(), 0.0);
        // |ξ₀| = 3π/2 ∈ [λ/2, 3λ/4] for λ = 8, so P_8 is the identity on it
        let w = ComplexField::plane_wave(g, [3, 0, 0]);
        for p in [2.0, 3.0, 6.0] {
            let b = besov_norm(&w, 0.0, p, p).unwrap();
            assert!((b - w.norm(p).unwrap()).abs() < 1e-12 * b);
        }
        assert!(matches!(
            besov_norm(&w, 0.0, 4.0, 2.0),
            Err(MultiplierError::BesovExponent { .. })
        ));
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        #[test]
        fn projections_do_not_grow_l2(seed in 0u64..1000, l in 0u32..5, tau in 2.0f64..20.0) {
            let g = Grid3::new(8, 4.0).unwrap();
            let f = ComplexField::from_fn(g, |x| {
                let s = seed as f64;
                Complex64::new((s * x[0] + 1.3 * x[1]).sin(), (x[2] * s).cos() * x[0])
            });
            let lam = 2f64.powi(l as i32);
            let z = ZetaParams::null(tau, &Frame::STANDARD).unwrap();
            for p in [
                Projection::LpEq(lam),
                Projection::LpGt(lam),
                Projection::PlaneEq { frame: Frame::STANDARD, scale: lam },
                Projection::ModEq { zeta: z, scale: lam },
                Projection::ModHigh(z),
            ] {
                proptest::prop_assert!(project(p, &f).l2() <= f.l2() * (1.0 + 1e-12));
            }
        }
    }
}
