//! 3-D FFTs on `N³` cubes stored with `z` fastest, built from 1-D rustfft
//! passes. Plans are cached process-wide behind a mutex; the plans
//! themselves are immutable and shared across threads.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

type PlanPair = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

fn plans(n: usize) -> PlanPair {
    static CACHE: OnceLock<Mutex<HashMap<usize, PlanPair>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
        })
        .clone()
}

#[derive(Clone, Copy)]
enum Direction {
    Forward,
    Inverse,
}

fn lines(data: &mut [Complex64], n: usize, fft: &Arc<dyn Fft<f64>>) {
    data.par_chunks_mut(n * n).for_each_init(
        || vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()],
        |scratch, slab| fft.process_with_scratch(slab, scratch),
    );
}

/// Cyclic axis rotation `(a, b, c) -> (b, c, a)`: `out[(b*n + c)*n + a] = data[(a*n + b)*n + c]`.
fn rotate_axes(data: &[Complex64], out: &mut [Complex64], n: usize) {
    out.par_chunks_mut(n * n).enumerate().for_each(|(b, slab)| {
        for c in 0..n {
            for a in 0..n {
                slab[c * n + a] = data[(a * n + b) * n + c];
            }
        }
    });
}

fn transform(data: &mut [Complex64], n: usize, dir: Direction) {
    assert_eq!(data.len(), n * n * n, "fft buffer is not N³");
    let (fwd, inv) = plans(n);
    let fft = match dir {
        Direction::Forward => fwd,
        Direction::Inverse => inv,
    };
    let mut tmp = vec![Complex64::new(0.0, 0.0); data.len()];
    // Three passes over the contiguous axis, rotating axes between passes;
    // after three rotations the original layout is restored.
    for _ in 0..3 {
        lines(data, n, &fft);
        rotate_axes(data, &mut tmp, n);
        data.copy_from_slice(&tmp);
    }
}

/// Unnormalized forward DFT `F_k = Σ_j f_j e^{−2πi j·k/N}`, in place.
pub fn forward(data: &mut [Complex64], n: usize) {
    transform(data, n, Direction::Forward);
}

/// Inverse DFT including the `1/N³` factor, in place.
pub fn inverse(data: &mut [Complex64], n: usize) {
    transform(data, n, Direction::Inverse);
    let s = 1.0 / (n * n * n) as f64;
    data.par_iter_mut().for_each(|v| *v *= s);
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn naive(data: &[Complex64], n: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); data.len()];
        for k in 0..data.len() {
            let (k0, k1, k2) = (k / (n * n), (k / n) % n, k % n);
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, v) in data.iter().enumerate() {
                let (j0, j1, j2) = (j / (n * n), (j / n) % n, j % n);
                let ph = -TAU * ((j0 * k0 + j1 * k1 + j2 * k2) % n) as f64 / n as f64;
                acc += v * Complex64::from_polar(1.0, ph);
            }
            out[k] = acc;
        }
        out
    }

    #[test]
    fn matches_naive_dft() {
        let n = 4;
        let data: Vec<Complex64> = (0..64)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 1.3).cos()))
            .collect();
        let expect = naive(&data, n);
        let mut got = data.clone();
        forward(&mut got, n);
        for (a, b) in got.iter().zip(&expect) {
            assert!((a - b).norm() < 1e-12);
        }
        inverse(&mut got, n);
        for (a, b) in got.iter().zip(&data) {
            assert!((a - b).norm() < 1e-14);
        }
    }
}
