//! Averages over frequency frames `(τ, U) ∈ [2, ∞) × O(3)` and Monte-Carlo
//! checks of the averaged estimates.
//!
//! Frames are Haar samples. Sample `i` of a plan draws from its own ChaCha
//! stream, so results do not depend on how work is split across threads.
//! The `τ` measure is `dm = (τ log τ)⁻¹ dτ dσ`.

use std::fmt::Write as _;

use cgokit_core::cutoff::CutoffProfile;
use cgokit_core::{haar, stats, Frame, Projection, Vec3, ZetaParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::amplitude;
use crate::cgosolve::{self, PotentialPair};
use crate::dbar::ComplexFrame;
use crate::field::{ComplexField, VectorField};
use crate::multipliers::{self, MultiplierSpec};
use crate::potentials;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AveragingError {
    #[error("n_frames must be at least 8 (got {0})")]
    TooFewFrames(usize),
    #[error("scale separation violated: need 8μ ≤ λ and 8ν ≤ λ (λ={lambda}, μ={mu}, ν={nu})")]
    ScaleSeparation { lambda: f64, mu: f64, nu: f64 },
    #[error("parameter out of range: {0}")]
    Range(String),
    #[error("K = {k} too large for the grid: 2^K = {low} exceeds τ cap {cap}")]
    KTooLarge { k: u32, low: f64, cap: f64 },
    #[error("empty τ grid")]
    NoTau,
    #[error(transparent)]
    Core(#[from] cgokit_core::CoreError),
    #[error(transparent)]
    Field(#[from] crate::field::FieldError),
    #[error(transparent)]
    Multiplier(#[from] multipliers::MultiplierError),
    #[error("{0}")]
    Sample(String),
}

/// How `τ` is drawn inside a dyadic window `[τ*, 2τ*]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightMode {
    /// `τ` uniform, unit weights.
    Uniform,
    /// `log τ` uniform with weights `1/log τ`, which realizes `dm`.
    #[default]
    LogLog,
}

impl WeightMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "uniform" => Some(WeightMode::Uniform),
            "log-log" | "loglog" => Some(WeightMode::LogLog),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPlan {
    pub n_frames: usize,
    /// Dyadic window starts `τ*`.
    pub taus: Vec<f64>,
    /// `K` for the `[2^K, 2^{K²}]` window.
    pub k: u32,
    pub weight: WeightMode,
    pub seed: u64,
}

impl SamplingPlan {
    pub fn new(n_frames: usize, taus: Vec<f64>, k: u32, weight: WeightMode, seed: u64) -> Result<Self, AveragingError> {
        if n_frames < 8 {
            return Err(AveragingError::TooFewFrames(n_frames));
        }
        Ok(SamplingPlan {
            n_frames,
            taus,
            k,
            weight,
            seed,
        })
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        SamplingPlan { seed, ..self.clone() }
    }

    pub fn with_frames(&self, n_frames: usize) -> Self {
        SamplingPlan {
            n_frames,
            ..self.clone()
        }
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(stream);
        r
    }

    /// Haar frame number `i`.
    pub fn frame(&self, i: usize) -> Frame {
        sample_haar(self.seed, i as u64)
    }

    /// `(τ, weight, U)` for sample `i` in the window starting at `tau_star`.
    pub fn tau_sample(&self, tau_star: f64, i: usize) -> (f64, f64, Frame) {
        let mut rng = self.rng(i as u64);
        let u = haar::sample_haar(&mut rng);
        let t: f64 = rng.random();
        match self.weight {
            WeightMode::Uniform => (tau_star * (1.0 + t), 1.0, u),
            WeightMode::LogLog => {
                let tau = tau_star * 2f64.powf(t);
                (tau, 1.0 / tau.ln(), u)
            }
        }
    }
}

/// Haar-distributed `U ∈ O(3)` from stream `stream` of `seed`.
pub fn sample_haar(seed: u64, stream: u64) -> Frame {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    haar::sample_haar(&mut r)
}

/// `E^p` of the values with their weights, plus a delta-method standard
/// error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub constant: f64,
    pub stderr: f64,
    pub n_samples: usize,
}

impl Estimate {
    fn from_weighted(values: &[f64], weights: &[f64], p: f64, denom: f64) -> Result<Self, AveragingError> {
        let n = values.len();
        let e = stats::weighted_expectation(values, weights, p)?;
        if denom == 0.0 || e == 0.0 {
            return Ok(Estimate {
                constant: 0.0,
                stderr: 0.0,
                n_samples: n,
            });
        }
        // M = weighted mean of |Z|^p; E^p = M^{1/p}
        let wsum: f64 = weights.iter().sum();
        let m = e.powf(p);
        let var = values
            .iter()
            .zip(weights)
            .map(|(v, w)| w / wsum * (v.abs().powf(p) - m).powi(2))
            .sum::<f64>();
        let neff = wsum * wsum / weights.iter().map(|w| w * w).sum::<f64>();
        let se_m = (var / (neff - 1.0).max(1.0)).sqrt();
        Ok(Estimate {
            constant: e / denom,
            stderr: m.powf(1.0 / p - 1.0) * se_m / p / denom,
            n_samples: n,
        })
    }
}

/// `E^p` of the values under the plan's weights (uniform here).
pub fn expectation(values: &[f64], p: f64) -> Result<f64, AveragingError> {
    Ok(stats::expectation(values, p)?)
}

fn japanese(x: f64) -> f64 {
    (1.0 + x * x).sqrt()
}

fn dir(e: Vec3, scale: f64, profile: CutoffProfile) -> MultiplierSpec {
    MultiplierSpec::with_profile(Projection::DirLeq { e, scale }, profile)
}

/// `P^{Ue₁}_{≤μ} P^{Ue₂}_{≤ν} u` as one multiplier.
fn plane_filter(u: &ComplexField, frame: &Frame, mu: f64, nu: f64, profile: CutoffProfile) -> ComplexField {
    let (a, b) = (dir(frame.e1, mu, profile), dir(frame.e2, nu, profile));
    u.apply_symbol(|xi| a.symbol(xi) * b.symbol(xi))
}

/// `E^p[⟨λ/ν⟩^{1/p}⟨λ/μ⟩^{1/p}‖P^{Ue₁}_{≤μ}P^{Ue₂}_{≤ν}P_λ u‖_p] / ‖u‖_p`
/// over the plan's Haar frames. `profile` replaces the cutoff of the two
/// directional projections (the negative control uses `Flat`).
pub fn verify_pavg(
    u: &ComplexField,
    lambda: f64,
    mu: f64,
    nu: f64,
    p: f64,
    plan: &SamplingPlan,
    profile: CutoffProfile,
) -> Result<Estimate, AveragingError> {
    if 8.0 * mu > lambda || 8.0 * nu > lambda {
        return Err(AveragingError::ScaleSeparation { lambda, mu, nu });
    }
    if ![2.0, 3.0, 4.0].contains(&p) {
        return Err(AveragingError::Range(format!("pavg needs p ∈ {{2,3,4}}, got {p}")));
    }
    let shell = multipliers::project(Projection::lp_eq(lambda)?, u);
    let weight = (japanese(lambda / nu) * japanese(lambda / mu)).powf(1.0 / p);
    let values = (0..plan.n_frames)
        .into_par_iter()
        .map(|i| {
            plane_filter(&shell, &plan.frame(i), mu, nu, profile)
                .norm(p)
                .map(|n| weight * n)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let w = vec![1.0; values.len()];
    Estimate::from_weighted(&values, &w, p, u.norm(p)?)
}

/// The `p = 2` value of `verify_pavg` computed exactly: by the Haar
/// formula `E_U|m(U⁻¹ξ)|² = E_ω|m(|ξ|ω)|²`, a cap-area integral over the
/// sphere evaluated by brute-force quadrature for each lattice radius.
pub fn pavg_oracle(u: &ComplexField, lambda: f64, mu: f64, nu: f64) -> Result<f64, AveragingError> {
    let shell = multipliers::project(Projection::lp_eq(lambda)?, u);
    let chi = CutoffProfile::Smooth;
    let cap = |r: f64| {
        sphere_mean(|w| {
            let v = chi.eval(r * w[0].abs() / mu) * chi.eval(r * w[1].abs() / nu);
            v * v
        })
    };
    let g = *u.grid();
    let spec = shell.spectrum();
    let mut by_radius: std::collections::BTreeMap<i64, f64> = Default::default();
    for (i, v) in spec.iter().enumerate() {
        let m = g.signed_triple(i);
        *by_radius.entry(m.iter().map(|c| c * c).sum()).or_default() += v.norm_sqr();
    }
    let dk = g.dk();
    let num: f64 = by_radius
        .par_iter()
        .map(|(m2, mass)| {
            if *mass == 0.0 {
                0.0
            } else {
                mass * cap((*m2 as f64).sqrt() * dk)
            }
        })
        .sum();
    let total: f64 = u.spectrum().iter().map(|v| v.norm_sqr()).sum();
    let weight = japanese(lambda / nu) * japanese(lambda / mu);
    Ok((weight * num / total).sqrt())
}

/// Mean of `f` over the unit sphere by midpoint quadrature in `(cos θ, φ)`
/// (area-uniform), for `f` even in each coordinate.
fn sphere_mean(f: impl Fn([f64; 3]) -> f64) -> f64 {
    const NT: usize = 400;
    const NP: usize = 400;
    let mut s = 0.0;
    // octant: cos θ ∈ [0, 1], φ ∈ [0, π/2]
    for i in 0..NT {
        let c = (i as f64 + 0.5) / NT as f64;
        let st = (1.0 - c * c).sqrt();
        for j in 0..NP {
            let ph = (j as f64 + 0.5) / NP as f64 * std::f64::consts::FRAC_PI_2;
            s += f([st * ph.cos(), st * ph.sin(), c]);
        }
    }
    s / (NT * NP) as f64
}

/// `E^p_{τ*}[(1 + log₊(τ/ν))^{5(1/p−1/2)}⟨λ/ν⟩^{3/p−1/2}‖Q^{τ(Ue₁+iUe₂)}_{≤ν}P_λ u‖_p] / ‖u‖_p`,
/// maximized over the plan's windows `τ* ∈ taus`.
pub fn verify_qavg(
    u: &ComplexField,
    lambda: f64,
    nu: f64,
    p: f64,
    plan: &SamplingPlan,
    profile: CutoffProfile,
) -> Result<Estimate, AveragingError> {
    if !(2.0..=4.0).contains(&p) {
        return Err(AveragingError::Range(format!("qavg needs p ∈ [2,4], got {p}")));
    }
    if plan.taus.is_empty() {
        return Err(AveragingError::NoTau);
    }
    if let Some(t) = plan.taus.iter().find(|t| nu > **t / 8.0) {
        return Err(AveragingError::Range(format!("ν = {nu} exceeds τ/8 for τ = {t}")));
    }
    let shell = multipliers::project(Projection::lp_eq(lambda)?, u);
    let unorm = u.norm(p)?;
    let mut worst: Option<Estimate> = None;
    for &tau_star in &plan.taus {
        let rows = (0..plan.n_frames)
            .into_par_iter()
            .map(|i| {
                let (tau, w, frame) = plan.tau_sample(tau_star, i);
                let z = ZetaParams::null(tau, &frame)?;
                let q = MultiplierSpec::with_profile(Projection::mod_leq(z, nu)?, profile);
                let n = multipliers::apply(&q, &shell).norm(p)?;
                let logw = (1.0 + (tau / nu).ln().max(0.0)).powf(5.0 * (1.0 / p - 0.5));
                Ok((logw * japanese(lambda / nu).powf(3.0 / p - 0.5) * n, w))
            })
            .collect::<Result<Vec<_>, AveragingError>>()?;
        let (v, w): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
        let e = Estimate::from_weighted(&v, &w, p, unorm)?;
        if worst.is_none_or(|b| e.constant > b.constant) {
            worst = Some(e);
        }
    }
    Ok(worst.expect("non-empty τ grid"))
}

/// The `p = 2` value of `verify_qavg` for one window by quadrature: the
/// Haar formula turns the frame average into a sphere average, and `τ` is
/// integrated with the `dm` weight (the annulus-volume computation).
pub fn qavg_oracle(u: &ComplexField, lambda: f64, nu: f64, tau_star: f64) -> Result<f64, AveragingError> {
    let shell = multipliers::project(Projection::lp_eq(lambda)?, u);
    let g = *u.grid();
    let spec = shell.spectrum();
    let mut by_radius: std::collections::BTreeMap<i64, f64> = Default::default();
    for (i, v) in spec.iter().enumerate() {
        let m = g.signed_triple(i);
        *by_radius.entry(m.iter().map(|c| c * c).sum()).or_default() += v.norm_sqr();
    }
    const NTAU: usize = 24;
    let chi = CutoffProfile::Smooth;
    let dk = g.dk();
    // E over the window of |Q(ξ)|², which depends on ξ only through |ξ|
    let mean_q = |r: f64| {
        let mut acc = 0.0;
        let mut wsum = 0.0;
        for t in 0..NTAU {
            let tau = tau_star * 2f64.powf((t as f64 + 0.5) / NTAU as f64);
            let w = 1.0 / tau.ln();
            // ζ = τ(e₁ + ie₂), η = e₂: Q = χ(||ξ⊥ + τe₂| − τ|/ν)χ(|ξ₁|/ν)
            let m = sphere_mean_full(|o| {
                let x = [r * o[0], r * o[1], r * o[2]];
                let perp = (x[1] + tau).hypot(x[2]);
                let v = chi.eval((perp - tau).abs() / nu) * chi.eval(x[0].abs() / nu);
                v * v
            });
            acc += w * m;
            wsum += w;
        }
        acc / wsum
    };
    let num: f64 = by_radius
        .par_iter()
        .map(|(m2, mass)| {
            if *mass == 0.0 {
                0.0
            } else {
                mass * mean_q((*m2 as f64).sqrt() * dk)
            }
        })
        .sum();
    let total: f64 = u.spectrum().iter().map(|v| v.norm_sqr()).sum();
    Ok(japanese(lambda / nu) * (num / total).sqrt())
}

/// Sphere mean for `f` even in the first and third coordinate only.
fn sphere_mean_full(f: impl Fn([f64; 3]) -> f64) -> f64 {
    const NT: usize = 120;
    const NP: usize = 240;
    let mut s = 0.0;
    for i in 0..NT {
        let c = (i as f64 + 0.5) / NT as f64;
        let st = (1.0 - c * c).sqrt();
        for j in 0..NP {
            let ph = (j as f64 + 0.5) / NP as f64 * std::f64::consts::TAU;
            s += f([st * ph.cos(), st * ph.sin(), c]);
        }
    }
    s / (NT * NP) as f64
}

/// Largest `τ` the loggain window may start at: beyond eight times the top
/// dyadic scale of the grid every shell is already in the sum.
pub fn loggain_tau_cap(grid: &crate::field::Grid3) -> f64 {
    8.0 * multipliers::dyadic_scales(grid).last().copied().unwrap_or(1.0)
}

/// `(log K)^{1/p} Ẽ^p_K[Σ_{λ≤τ/8}(λ/τ)^α(log τ)^{1/p}‖P_λ f‖_p] / ‖f‖_p`.
///
/// The summand depends on `τ` only, so the `dm`-average over
/// `[2^K, 2^{K²}]` is a 1-D integral in `t = log τ`: it is split at the
/// points `τ = 8λ` where shells enter and done by Simpson's rule. Since
/// `∫dm = log K`, the prefactor cancels the normalization.
pub fn verify_loggain(f: &ComplexField, p: f64, k: u32, alpha: f64) -> Result<Estimate, AveragingError> {
    if !(2.0..=3.0).contains(&p) {
        return Err(AveragingError::Range(format!("loggain needs p ∈ [2,3], got {p}")));
    }
    if alpha <= 0.0 {
        return Err(AveragingError::Range(format!("α must be positive, got {alpha}")));
    }
    if k < 2 {
        return Err(AveragingError::Range(format!("K must be at least 2, got {k}")));
    }
    let low = 2f64.powi(k as i32);
    let high = 2f64.powi((k * k) as i32);
    let cap = loggain_tau_cap(f.grid());
    if low > cap {
        return Err(AveragingError::KTooLarge { k, low, cap });
    }
    let scales = multipliers::dyadic_scales(f.grid());
    let shells: Vec<(f64, f64)> = scales
        .iter()
        .map(|&l| {
            let pr = if l <= 1.0 {
                Projection::LpLeq(1.0)
            } else {
                Projection::LpEq(l)
            };
            Ok((l, multipliers::project(pr, f).norm(p)?))
        })
        .collect::<Result<_, AveragingError>>()?;
    let integral = loggain_integral(&shells, p, alpha, low, high);
    let fnorm = f.norm(p)?;
    Ok(Estimate {
        constant: if fnorm == 0.0 {
            0.0
        } else {
            integral.powf(1.0 / p) / fnorm
        },
        stderr: 0.0,
        n_samples: 0,
    })
}

/// `∫_{low}^{high} S(τ)^p dm(τ)` with `S(τ) = Σ_{λ≤τ/8}(λ/τ)^α(log τ)^{1/p}n_λ`.
fn loggain_integral(shells: &[(f64, f64)], p: f64, alpha: f64, low: f64, high: f64) -> f64 {
    let s_pow = |t: f64| {
        let tau = t.exp();
        let sum: f64 = shells
            .iter()
            .filter(|(l, _)| *l <= tau / 8.0)
            .map(|(l, n)| (l / tau).powf(alpha) * n)
            .sum();
        // S^p · (τ log τ)⁻¹ dτ = sum^p · log τ · dt / log τ
        sum.powf(p)
    };
    let mut breaks: Vec<f64> = vec![low.ln(), high.ln()];
    breaks.extend(
        shells
            .iter()
            .map(|(l, _)| (8.0 * l).ln())
            .filter(|b| *b > low.ln() && *b < high.ln()),
    );
    breaks.sort_by(f64::total_cmp);
    breaks.windows(2).map(|w| simpson(&s_pow, w[0], w[1], 2000)).sum()
}

fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// One row of the averaged-lemma report.
#[derive(Debug, Clone, PartialEq)]
pub struct LemmaRow {
    pub lemma: &'static str,
    pub p: f64,
    pub params: String,
    pub estimate: Estimate,
    pub seed: u64,
}

/// Indices whose diagnostic is at most twice the ensemble median: the
/// Chebyshev-style good set of frames.
pub fn good_set(diagnostic: &[f64]) -> Vec<usize> {
    let Ok(med) = stats::median(diagnostic) else {
        return Vec::new();
    };
    (0..diagnostic.len()).filter(|&i| diagnostic[i] <= 2.0 * med).collect()
}

/// `‖f‖_{H^s}`.
pub fn sobolev_norm(f: &ComplexField, s: f64) -> f64 {
    f.apply_real_symbol(|xi| (1.0 + xi.norm_sq()).powf(s / 2.0)).l2()
}

/// `‖⟨D⟩⁻¹f‖_p`, the `W^{−1,p}` norm.
pub fn negative_sobolev_norm(f: &ComplexField, p: f64) -> Result<f64, AveragingError> {
    Ok(f.apply_real_symbol(|xi| 1.0 / (1.0 + xi.norm_sq()).sqrt()).norm(p)?)
}

/// Exponent of the Sobolev norm on the right of the `∂̄⁻¹∇` estimate.
pub const H1_SOBOLEV_S: f64 = 0.5;

/// Monte-Carlo constants for the amplitude lemmas (`∂̄⁻¹∇` in `L²(B)`,
/// `∂̄⁻¹` in `L^∞`, the mixed `L^∞L¹` norm), the `a·q` estimate and the
/// solvability operator norm, each divided by its right-hand norm.
///
/// The `a·q` and solvability rows average over `(τ, U)` with the `dm`
/// weight, restricted to the good set of frames (phase diagnostic at most
/// twice the median).
pub fn averaged_lemma_suite(
    a: &VectorField,
    q: &ComplexField,
    plan: &SamplingPlan,
) -> Result<Vec<LemmaRow>, AveragingError> {
    let g = *q.grid();
    let frames: Vec<Frame> = (0..plan.n_frames).map(|i| plan.frame(i)).collect();
    let err = |e: crate::dbar::DbarError| AveragingError::Sample(e.to_string());

    let per_frame = frames
        .par_iter()
        .map(|u| {
            let cf = ComplexFrame::from_frame(u);
            let h1 = amplitude::diag_h1(a, &cf).map_err(err)?;
            let ea = cf.dot_field(a);
            let phili = amplitude::diag_phili(&ea, &cf).map_err(err)?;
            let lil2 = amplitude::diag_lil2(q, &cf).map_err(err)?;
            Ok((h1, phili, lil2))
        })
        .collect::<Result<Vec<_>, AveragingError>>()?;
    let h1: Vec<f64> = per_frame.iter().map(|r| r.0).collect();
    let phili: Vec<f64> = per_frame.iter().map(|r| r.1).collect();
    let lil2: Vec<f64> = per_frame.iter().map(|r| r.2).collect();
    let ones = vec![1.0; frames.len()];

    let hs = a
        .components()
        .iter()
        .map(|c| sobolev_norm(c, H1_SOBOLEV_S).powi(2))
        .sum::<f64>()
        .sqrt();
    let b031 = a
        .components()
        .iter()
        .map(|c| multipliers::besov_norm(c, 0.0, 3.0, 1.0))
        .sum::<Result<f64, _>>()?;
    let mut rows = vec![
        LemmaRow {
            lemma: "h1",
            p: 2.0,
            params: format!("s={H1_SOBOLEV_S}"),
            estimate: Estimate::from_weighted(&h1, &ones, 2.0, hs)?,
            seed: plan.seed,
        },
        LemmaRow {
            lemma: "phili",
            p: 3.0,
            params: "B031".into(),
            estimate: Estimate::from_weighted(&phili, &ones, 3.0, b031)?,
            seed: plan.seed,
        },
        LemmaRow {
            lemma: "lil2",
            p: 2.0,
            params: "f=q".into(),
            estimate: Estimate::from_weighted(&lil2, &ones, 2.0, q.norm(2.0)?)?,
            seed: plan.seed,
        },
    ];

    // (τ, U) rows over the good set
    let z0: Vec<f64> = h1.iter().zip(&phili).map(|(x, y)| x + y).collect();
    let good = good_set(&z0);
    let pair = PotentialPair {
        a: a.clone(),
        q: q.clone(),
    };
    let chi = potentials::chi_field(g);
    let qnorm = negative_sobolev_norm(q, 2.0)? + negative_sobolev_norm(q, 3.0)?;
    let rhs_v = a.components().iter().map(|c| c.norm(3.0)).sum::<Result<f64, _>>()? + negative_sobolev_norm(q, 3.0)?;
    let mut aq = Vec::new();
    let mut solv = Vec::new();
    let mut wts = Vec::new();
    for &tau_star in &plan.taus {
        let rows_t = good
            .par_iter()
            .map(|&i| {
                let (tau, w, _) = plan.tau_sample(tau_star, i);
                let z = ZetaParams::null(tau, &frames[i])?;
                let b = amplitude::build_phase(a, &z, &chi, amplitude::CAP_FACTOR * tau);
                let grad_inf = b.grad_a.magnitude().linf();
                let m = b.diagnostics.a_linf
                    + grad_inf / tau
                    + b.diagnostics.hess_a_linf / (tau * tau)
                    + b.diagnostics.grad_a_l2_ball;
                let x = amplitude::x_minus_half_of_aq(&b.a, q, &z, &chi)
                    .map_err(|e| AveragingError::Sample(e.to_string()))?;
                let op = cgosolve::estimate_opnorm(&pair, &z, 12, crate::conjlap::DEFAULT_DELTA, i as u64)
                    .map_err(|e| AveragingError::Sample(e.to_string()))?;
                Ok((if qnorm == 0.0 { 0.0 } else { x / (m * qnorm) }, op, w))
            })
            .collect::<Result<Vec<_>, AveragingError>>()?;
        for (x, o, w) in rows_t {
            aq.push(x);
            solv.push(o);
            wts.push(w);
        }
    }
    if !aq.is_empty() {
        rows.push(LemmaRow {
            lemma: "aq",
            p: 2.0,
            params: format!("K={} taus={:?}", plan.k, plan.taus),
            estimate: Estimate::from_weighted(&aq, &wts, 2.0, 1.0)?,
            seed: plan.seed,
        });
        rows.push(LemmaRow {
            lemma: "solvability",
            p: 2.0,
            params: format!("taus={:?}", plan.taus),
            estimate: Estimate::from_weighted(&solv, &wts, 2.0, rhs_v)?,
            seed: plan.seed,
        });
    }
    Ok(rows)
}

pub fn report_csv(rows: &[LemmaRow]) -> String {
    let mut out = String::from("lemma,p,params,n_samples,constant,stderr,seed\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},\"{}\",{},{:e},{:e},{}",
            r.lemma, r.p, r.params, r.estimate.n_samples, r.estimate.constant, r.estimate.stderr, r.seed
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid3;
    use crate::potentials::GaussianBump;

    fn plan(n: usize, seed: u64) -> SamplingPlan {
        SamplingPlan::new(n, vec![32.0], 3, WeightMode::LogLog, seed).unwrap()
    }

    fn noise(g: Grid3, seed: u64) -> ComplexField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = (0..g.len())
            .map(|_| num_complex::Complex64::new(rng.random::<f64>() - 0.5, 0.0))
            .collect();
        ComplexField::from_values(g, v).unwrap()
    }

    #[test]
    fn haar_frames_are_reproducible_and_orthonormal() {
        let p = plan(8, 5);
        for i in 0..8 {
            let u = p.frame(i);
            assert!(u.orthonormality_defect() < 1e-14);
            assert_eq!(u, p.frame(i));
        }
        assert_ne!(p.frame(0), p.with_seed(6).frame(0));
        assert!(matches!(
            SamplingPlan::new(4, vec![], 3, WeightMode::Uniform, 0),
            Err(AveragingError::TooFewFrames(4))
        ));
    }

    #[test]
    fn haar_mean_and_orientation_balance() {
        let n = 10_000;
        let (mut mean, mut pos) = (0.0, 0usize);
        for i in 0..n {
            let u = sample_haar(11, i as u64);
            mean += u.entry(0, 0);
            pos += (u.det() > 0.0) as usize;
        }
        assert!((mean / n as f64).abs() < 0.02);
        assert!((pos as f64 / n as f64 - 0.5).abs() < 0.02);
    }

    #[test]
    fn haar_cap_fraction_matches_area() {
        // cap {ω₃ ≥ cos 0.6} has area fraction (1 − cos 0.6)/2
        let theta = Vec3::new(0.3, -0.4, 0.5).normalized().unwrap();
        let n = 10_000;
        let hits = (0..n)
            .filter(|&i| sample_haar(3, i as u64).apply(theta)[2] >= 0.6f64.cos())
            .count();
        let expect = (1.0 - 0.6f64.cos()) / 2.0;
        assert!((hits as f64 / n as f64 - expect).abs() < 0.02 * expect.max(0.1) + 0.005);
    }

    #[test]
    fn haar_is_left_invariant() {
        let v = sample_haar(99, 0);
        let a: Vec<f64> = (0..10_000).map(|i| sample_haar(1, i).entry(0, 0)).collect();
        let b: Vec<f64> = (0..10_000).map(|i| v.compose(&sample_haar(2, i)).entry(0, 0)).collect();
        let (_, pval) = stats::ks_two_sample(&a, &b).unwrap();
        assert!(pval > 0.01, "{pval}");
    }

    #[test]
    fn expectation_normalization() {
        assert_eq!(expectation(&[3.0; 5], 2.0).unwrap(), 3.0);
        let e = Estimate::from_weighted(&[2.0, 2.0, 2.0], &[0.1, 5.0, 1.0], 3.0, 1.0).unwrap();
        assert!((e.constant - 2.0).abs() < 1e-12);
        assert!(expectation(&[], 2.0).is_err());
    }

    #[test]
    fn pavg_matches_cap_area_oracle() {
        let g = Grid3::new(32, 4.0).unwrap();
        let u = noise(g, 1);
        let mc = verify_pavg(&u, 16.0, 2.0, 2.0, 2.0, &plan(256, 3), CutoffProfile::Smooth).unwrap();
        let oracle = pavg_oracle(&u, 16.0, 2.0, 2.0).unwrap();
        assert!(
            (mc.constant - oracle).abs() < 3.0 * mc.stderr + 0.05 * oracle,
            "{mc:?} vs {oracle}"
        );
        assert!(mc.constant <= 4.0);
    }

    #[test]
    fn pavg_is_homogeneous_and_zero_on_zero() {
        let g = Grid3::new(16, 4.0).unwrap();
        let u = noise(g, 2);
        let p = plan(8, 1);
        let a = verify_pavg(&u, 16.0, 2.0, 2.0, 3.0, &p, CutoffProfile::Smooth).unwrap();
        let b = verify_pavg(&u.scale_real(2.0), 16.0, 2.0, 2.0, 3.0, &p, CutoffProfile::Smooth).unwrap();
        assert!((a.constant - b.constant).abs() <= 1e-12 * a.constant);
        let z = verify_pavg(&ComplexField::zeros(g), 16.0, 2.0, 2.0, 2.0, &p, CutoffProfile::Smooth).unwrap();
        assert_eq!(z.constant, 0.0);
        assert!(matches!(
            verify_pavg(&u, 16.0, 4.0, 2.0, 2.0, &p, CutoffProfile::Smooth),
            Err(AveragingError::ScaleSeparation { .. })
        ));
    }

    #[test]
    fn flat_profile_blows_up_pavg() {
        // without directional localization the constant is ⟨λ/μ⟩ times the shell fraction
        let g = Grid3::new(32, 4.0).unwrap();
        let u = multipliers::project(Projection::LpEq(32.0), &noise(g, 4));
        let p = plan(16, 1);
        let good = verify_pavg(&u, 32.0, 2.0, 2.0, 2.0, &p, CutoffProfile::Smooth).unwrap();
        let bad = verify_pavg(&u, 32.0, 2.0, 2.0, 2.0, &p, CutoffProfile::Flat).unwrap();
        assert!(
            bad.constant > 10.0 && bad.constant > 3.0 * good.constant,
            "{good:?} {bad:?}"
        );
    }

    #[test]
    fn stderr_shrinks_like_inverse_root_n() {
        let g = Grid3::new(16, 4.0).unwrap();
        let u = noise(g, 6);
        let se: Vec<f64> = [16usize, 64, 256]
            .iter()
            .map(|&n| {
                verify_pavg(&u, 16.0, 2.0, 2.0, 2.0, &plan(n, 9), CutoffProfile::Smooth)
                    .unwrap()
                    .stderr
            })
            .collect();
        for w in se.windows(2) {
            let ratio = w[0] / w[1];
            assert!((1.0..=4.0).contains(&ratio), "{se:?}");
        }
    }

    #[test]
    fn qavg_matches_annulus_oracle() {
        let g = Grid3::new(32, 4.0).unwrap();
        let u = noise(g, 7);
        let p = SamplingPlan::new(128, vec![32.0], 3, WeightMode::LogLog, 2).unwrap();
        let mc = verify_qavg(&u, 16.0, 2.0, 2.0, &p, CutoffProfile::Smooth).unwrap();
        let oracle = qavg_oracle(&u, 16.0, 2.0, 32.0).unwrap();
        assert!(
            (mc.constant - oracle).abs() < 3.0 * mc.stderr + 0.05 * oracle,
            "{mc:?} vs {oracle}"
        );
        assert!(mc.constant <= 8.0);
    }

    #[test]
    fn loggain_matches_closed_form_for_one_shell() {
        // |ξ| = 3dk ≈ 4.7 lies on the plateau of the λ₀ = 8 shell and outside every other
        let g = Grid3::new(32, 4.0).unwrap();
        let k0 = 3.0 * g.dk();
        let f = ComplexField::from_real_fn(g, |x| (k0 * x[0]).cos());
        let l0: f64 = 8.0;
        assert!(
            (multipliers::project(Projection::LpEq(l0), &f).norm(2.0).unwrap() - f.norm(2.0).unwrap()).abs() < 1e-10
        );
        for (p, k) in [(2.0, 3u32), (3.0, 4), (2.0, 5)] {
            let alpha = 0.5;
            let est = verify_loggain(&f, p, k, alpha).unwrap();
            // S^p dm = λ₀^{αp}τ^{−αp−1}dτ on [max(2^K, 8λ₀), 2^{K²}]
            let (a, b) = (2f64.powi(k as i32).max(8.0 * l0), 2f64.powi((k * k) as i32));
            let ap = alpha * p;
            let oracle = (l0.powf(ap) * (a.powf(-ap) - b.powf(-ap)) / ap).powf(1.0 / p);
            assert!(
                (est.constant - oracle).abs() < 0.01 * oracle,
                "{} vs {oracle}",
                est.constant
            );
        }
        assert_eq!(
            verify_loggain(&ComplexField::zeros(g), 2.0, 3, 0.5).unwrap().constant,
            0.0
        );
    }

    #[test]
    fn loggain_is_stable_across_k() {
        let g = Grid3::new(32, 4.0).unwrap();
        let f = noise(g, 9);
        let c: Vec<f64> = (3..=5)
            .map(|k| verify_loggain(&f, 2.0, k, 0.5).unwrap().constant)
            .collect();
        let (lo, hi) = (
            c.iter().cloned().fold(f64::INFINITY, f64::min),
            c.iter().cloned().fold(0.0, f64::max),
        );
        assert!(hi <= 2.0 * lo, "{c:?}");
        let cap = loggain_tau_cap(&g);
        let k = (cap.log2() as u32) + 1;
        assert!(matches!(
            verify_loggain(&f, 2.0, k, 0.5),
            Err(AveragingError::KTooLarge { .. })
        ));
    }

    #[test]
    fn suite_is_zero_for_zero_potentials_and_linear_in_a() {
        let g = Grid3::new(16, 4.0).unwrap();
        let p = SamplingPlan::new(8, vec![16.0], 3, WeightMode::LogLog, 1).unwrap();
        let rows = averaged_lemma_suite(&VectorField::zeros(g), &ComplexField::zeros(g), &p).unwrap();
        assert!(rows.iter().all(|r| r.estimate.constant == 0.0), "{rows:?}");

        let bump = GaussianBump {
            center: Vec3::ZERO,
            width: 0.2,
            amplitude: 0.3,
            envelope: Vec3::new(0.2, 0.0, 0.0),
        };
        let a = potentials::bump_vector(g, [bump; 3]);
        let cf = ComplexFrame::from_frame(&p.frame(0));
        let h = amplitude::diag_h1(&a, &cf).unwrap();
        let h2 = amplitude::diag_h1(&a.scale_real(2.0), &cf).unwrap();
        assert!((h2 - 2.0 * h).abs() <= 1e-12 * h);
    }

    #[test]
    fn suite_constants_are_seed_stable() {
        let g = Grid3::new(32, 4.0).unwrap();
        let bump = |c: f64| GaussianBump {
            center: Vec3::new(c, 0.0, 0.0),
            width: 0.12,
            amplitude: 0.5,
            envelope: Vec3::ZERO,
        };
        let a = potentials::bump_vector(g, [bump(0.05), bump(-0.05), bump(0.0)]);
        let q = bump(0.0).scalar(g);
        let run = |seed| {
            let p = SamplingPlan::new(16, vec![16.0], 3, WeightMode::LogLog, seed).unwrap();
            averaged_lemma_suite(&a, &q, &p).unwrap()
        };
        let (r1, r2) = (run(1), run(2));
        assert_eq!(r1.len(), 5);
        for (x, y) in r1.iter().zip(&r2) {
            let (c1, c2) = (x.estimate.constant, y.estimate.constant);
            assert!(c1.is_finite() && c1 > 0.0, "{x:?}");
            assert!(c1 <= 2.0 * c2 && c2 <= 2.0 * c1, "{x:?} {y:?}");
        }
        assert!(report_csv(&r1).starts_with("lemma,p,params,n_samples,constant,stderr,seed\n"));
    }
}
