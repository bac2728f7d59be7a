use cgokit_core::haar::sample_haar;
use cgokit_core::{stats, Projection, ScheduleVariant, Vec3, ZetaSchedule};
use proptest::prelude::*;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn dist(a: Vec3, b: Vec3) -> f64 {
    (a - b).norm()
}

proptest! {
    #[test]
    fn null_schedule_pairs_for_the_identity(seed in 0u64..500, tau in 2.0f64..400.0, r in 1.0f64..2.0) {
        let frame = sample_haar(&mut ChaCha8Rng::seed_from_u64(seed));
        let s = ZetaSchedule::new(tau, frame, r, ScheduleVariant::Null).unwrap();
        let (t1, t2) = (s.zeta_tilde1(), s.zeta_tilde2());
        // ζ̃₁ + ζ̃₂ = ik: real parts cancel, imaginary parts add to k
        prop_assert!((t1.re() + t2.re()).norm() <= 1e-9 * tau);
        prop_assert!(dist(t1.im() + t2.im(), s.k()) <= 1e-9 * tau);
        prop_assert!(t1.zeta_dot_zeta().norm() <= 1e-8 * tau * tau);
        prop_assert!(t2.zeta_dot_zeta().norm() <= 1e-8 * tau * tau);
        prop_assert!(s.max_perturbation() <= 4.0);
        prop_assert!((s.k().norm() - r).abs() <= 1e-12);
    }

    #[test]
    fn low_and_high_modulation_split_every_frequency(seed in 0u64..200, x in -60.0f64..60.0, y in -60.0f64..60.0, z in -60.0f64..60.0) {
        let frame = sample_haar(&mut ChaCha8Rng::seed_from_u64(seed));
        let s = ZetaSchedule::new(24.0, frame, 1.5, ScheduleVariant::Null).unwrap();
        let xi = Vec3::new(x, y, z);
        let zeta = *s.zeta1();
        let sum = Projection::ModLow(zeta).symbol(xi) + Projection::ModHigh(zeta).symbol(xi);
        prop_assert!((sum - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn haar_first_columns_have_no_preferred_direction() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let z: Vec<f64> = (0..4000).map(|_| sample_haar(&mut rng).e1[2]).collect();
    // e₁·e₃ is uniform on [−1, 1] under Haar measure
    let uniform: Vec<f64> = (0..4000).map(|i| -1.0 + (2 * i + 1) as f64 / 4000.0).collect();
    let (_, p) = stats::ks_two_sample(&z, &uniform).unwrap();
    assert!(p > 0.01, "KS p-value {p}");
}
