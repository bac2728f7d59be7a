//! The pinned smooth cutoff `χ`: identically one on `[0, 3/4]`, zero on
//! `[1, ∞)`, with a degree-9 polynomial transition whose first four
//! derivatives vanish at both ends.

/// Degree-9 smooth step on `[0, 1]`: `S(0) = 0`, `S(1) = 1`, and
/// `S^{(k)}(0) = S^{(k)}(1) = 0` for `k = 1..=4`.
pub fn smooth_step(s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    if s >= 1.0 {
        return 1.0;
    }
    let s5 = s * s * s * s * s;
    s5 * (126.0 + s * (-420.0 + s * (540.0 + s * (-315.0 + s * 70.0))))
}

/// Smooth radial transition: `1` for `r <= inner`, `0` for `r >= outer`.
pub fn radial_step(r: f64, inner: f64, outer: f64) -> f64 {
    debug_assert!(outer > inner);
    1.0 - smooth_step((r - inner) / (outer - inner))
}

/// The cutoff profile used by every projection symbol.
///
/// `Flat` (constant one) exists only as a negative control: swapping it in
/// removes all frequency localization and must make averaged constants
/// blow up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CutoffProfile {
    #[default]
    Smooth,
    Flat,
}

impl CutoffProfile {
    /// `χ(t)` for `t >= 0`.
    pub fn eval(self, t: f64) -> f64 {
        match self {
            CutoffProfile::Smooth => radial_step(t, 0.75, 1.0),
            CutoffProfile::Flat => 1.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateau_and_support() {
        let chi = CutoffProfile::Smooth;
        for t in [0.0, 0.3, 0.75] {
            assert_eq!(chi.eval(t), 1.0);
        }
        for t in [1.0, 1.5, 10.0] {
            assert_eq!(chi.eval(t), 0.0);
        }
    }

    #[test]
    fn monotone_on_transition() {
        let chi = CutoffProfile::Smooth;
        let mut prev = 1.0;
        for i in 0..=1000 {
            let t = 0.75 + 0.25 * i as f64 / 1000.0;
            let v = chi.eval(t);
            assert!(v <= prev + 1e-15 && (0.0..=1.0).contains(&v));
            prev = v;
        }
    }

    #[test]
    fn derivative_has_fourth_order_zeros_at_ends() {
        // S'(s) = 630 s^4 (1-s)^4, so S^(k) vanishes at 0 and 1 for k <= 4
        let d1 = |s: f64| 630.0 * s.powi(4) * (1.0 - s).powi(4);
        for s in [0.1, 0.37, 0.5, 0.9] {
            let fd = (smooth_step(s + 1e-6) - smooth_step(s - 1e-6)) / 2e-6;
            assert!((fd - d1(s)).abs() < 1e-6);
        }
    }

    #[test]
    fn flat_profile_is_constant() {
        assert_eq!(CutoffProfile::Flat.eval(123.0), 1.0);
    }
}
