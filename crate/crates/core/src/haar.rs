//! Haar-distributed samples on O(3): a uniform unit quaternion gives a
//! uniform rotation, and an independent fair coin composes it with `−I`.

use core::f64::consts::TAU;

use rand_core::RngCore;

use crate::vec3::{Frame, Vec3};

/// Uniform double in `[0, 1)` from the top 53 bits of a `u64`.
pub fn unit_f64<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform unit quaternion `(w, x, y, z)` by Shoemake's subgroup algorithm.
pub fn uniform_quaternion<R: RngCore + ?Sized>(rng: &mut R) -> [f64; 4] {
    let u1 = unit_f64(rng);
    let u2 = unit_f64(rng);
    let u3 = unit_f64(rng);
    let a = libm::sqrt(1.0 - u1);
    let b = libm::sqrt(u1);
    [
        b * libm::cos(TAU * u3),
        a * libm::sin(TAU * u2),
        a * libm::cos(TAU * u2),
        b * libm::sin(TAU * u3),
    ]
}

/// Rotation matrix of a unit quaternion, as a frame of its columns.
pub fn quaternion_to_frame(q: [f64; 4]) -> Frame {
    let [w, x, y, z] = q;
    let col1 = Vec3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y + w * z),
        2.0 * (x * z - w * y),
    );
    let col2 = Vec3::new(
        2.0 * (x * y - w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z + w * x),
    );
    let col3 = Vec3::new(
        2.0 * (x * z + w * y),
        2.0 * (y * z - w * x),
        1.0 - 2.0 * (x * x + y * y),
    );
    Frame {
        e1: col1,
        e2: col2,
        e3: col3,
    }
}

/// Haar sample on SO(3).
pub fn sample_rotation<R: RngCore + ?Sized>(rng: &mut R) -> Frame {
    quaternion_to_frame(uniform_quaternion(rng))
}

/// Haar sample on O(3).
pub fn sample_haar<R: RngCore + ?Sized>(rng: &mut R) -> Frame {
    let u = sample_rotation(rng);
    if rng.next_u32() & 1 == 1 {
        Frame {
            e1: -u.e1,
            e2: -u.e2,
            e3: -u.e3,
        }
    } else {
        u
    }
}

/// Uniform point on the unit sphere (the first column of a Haar sample).
pub fn sample_sphere<R: RngCore + ?Sized>(rng: &mut R) -> Vec3 {
    let z = 2.0 * unit_f64(rng) - 1.0;
    let t = TAU * unit_f64(rng);
    let s = libm::sqrt((1.0 - z * z).max(0.0));
    Vec3::new(s * libm::cos(t), s * libm::sin(t), z)
}
