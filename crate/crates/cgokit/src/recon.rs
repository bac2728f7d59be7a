//! Recovery of Fourier data of `curl(A₁ − A₂)` and `q₁ − q₂` from the
//! integral identity
//! `∫ iH·(u₁∇u₂ − u₂∇u₁) + (A₁² − A₂² + q₁ − q₂)u₁u₂ dx`, `H = A₁ − A₂`,
//! evaluated on CGO solutions `u₁` for `(A₁, q₁)` and `u₂` for `(−A₂, q₂)`.
//!
//! Solutions are held in conjugated form `uᵢ = e^{x·ζ̃ᵢ}wᵢ`. Because
//! `ζ̃₁ + ζ̃₂ = ik`, the exponentials combine analytically:
//! `u₁u₂ = e^{ik·x}w₁w₂` and
//! `u₁∇u₂ − u₂∇u₁ = e^{ik·x}[(ζ̃₂ − ζ̃₁)w₁w₂ + w₁∇w₂ − w₂∇w₁]`.

use std::fmt::Write as _;

use cgokit_core::stats;
use cgokit_core::{Frame, ScheduleVariant, Vec3, ZetaSchedule};
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::cgosolve::{self, CgoSolution, PotentialPair, SolveError, SolveOptions};
use crate::field::{cvec, ComplexField, FieldError, VectorField, I};
use crate::potentials;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReconError {
    #[error("not curl-free: ‖curl H‖₂/‖H‖₂ = {0:e}")]
    NotCurlFree(f64),
    #[error("ζ̃₁ + ζ̃₂ differs from ik by {0:e}")]
    NotConjugate(f64),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Core(#[from] cgokit_core::CoreError),
}

/// `∫ f(x) e^{ik·x} dx` by cell sums, the transform that appears in the
/// identity (note the sign of the exponent).
pub fn transform(f: &ComplexField, k: Vec3) -> Complex64 {
    f.fourier_at(-k)
}

pub fn transform_vec(v: &VectorField, k: Vec3) -> [Complex64; 3] {
    v.fourier_at(-k)
}

/// `w = χa + ψ` with `∇w = χ∇a + a∇χ + ∇ψ` (closed-form `∇χ`).
fn w_and_gradient(sol: &CgoSolution) -> (ComplexField, VectorField) {
    let g = *sol.psi.grid();
    let chi = potentials::chi_field(g);
    let a = &sol.bundle.a;
    let w = &(&chi * a) + &sol.psi;
    let grad = sol
        .bundle
        .grad_a
        .mul_scalar(&chi)
        .add(&potentials::chi_gradient_field(g).mul_scalar(a))
        .add(&sol.psi.gradient());
    (w, grad)
}

/// The identity evaluated on `u₁ = e^{x·ζ̃₁}w₁` (for `pair₁`) and
/// `u₂ = e^{x·ζ̃₂}w₂` (for `(−A₂, q₂)`), where `pair₂ = (A₂, q₂)`.
pub fn integral_identity(
    u1: &CgoSolution,
    u2: &CgoSolution,
    pair1: &PotentialPair,
    pair2: &PotentialPair,
    k: Vec3,
) -> Result<Complex64, ReconError> {
    u1.psi.same_grid(&u2.psi)?;
    pair1.q.same_grid(&pair2.q)?;
    u1.psi.same_grid(&pair1.q)?;
    let (z1, z2) = (&u1.z_tilde, &u2.z_tilde);
    let sum_re = z1.re() + z2.re();
    let sum_im = z1.im() + z2.im() - k;
    let gap = (sum_re.norm_sq() + sum_im.norm_sq()).sqrt();
    if gap > 1e-9 * (1.0 + z1.tau()) {
        return Err(ReconError::NotConjugate(gap));
    }
    let (w1, gw1) = w_and_gradient(u1);
    let (w2, gw2) = w_and_gradient(u2);
    let h = pair1.a.sub(&pair2.a);
    let ww = &w1 * &w2;
    let diff: [Complex64; 3] = {
        let (a, b) = (cvec(z1.re(), z1.im()), cvec(z2.re(), z2.im()));
        std::array::from_fn(|i| b[i] - a[i])
    };
    // (ζ̃₂ − ζ̃₁)w₁w₂ + w₁∇w₂ − w₂∇w₁
    let flux = gw2
        .mul_scalar(&w1)
        .sub(&gw1.mul_scalar(&w2))
        .add(&VectorField::from_components(std::array::from_fn(|i| {
            ww.scale(diff[i])
        }))?);
    let magnetic = h.dot(&flux).scale(I);
    let potential = &(&(&pair1.a_squared() - &pair2.a_squared()) + &pair1.q) - &pair2.q;
    let integrand = &magnetic + &(&potential * &ww);
    Ok(transform(&integrand, k))
}

/// `i(ζ₂ − ζ₁)·∫(A₁ − A₂)e^{ik·x}dx`.
pub fn main_term(schedule: &ZetaSchedule, a1: &VectorField, a2: &VectorField) -> Complex64 {
    let (z1, z2) = (schedule.zeta1(), schedule.zeta2());
    let (c1, c2) = (cvec(z1.re(), z1.im()), cvec(z2.re(), z2.im()));
    let hk = transform_vec(&a1.sub(a2), schedule.k());
    I * (0..3).map(|i| (c2[i] - c1[i]) * hk[i]).sum::<Complex64>()
}

/// `U(e₁ + ie₂)·∫He^{ik·x}dx`, the quantity the identity recovers.
pub fn reference_e_dot_h(frame: &Frame, h: &VectorField, k: Vec3) -> Complex64 {
    let e = cvec(frame.e1, frame.e2);
    let hk = transform_vec(h, k);
    (0..3).map(|i| e[i] * hk[i]).sum()
}

/// One `(τ, U, r)` point of an experiment plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanPoint {
    pub tau: f64,
    pub frame: Frame,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoverySample {
    pub point: PlanPoint,
    pub k: Vec3,
    pub identity: Complex64,
    pub main: Complex64,
    /// `|identity − main|`.
    pub abs_err: f64,
    /// Quantity recovered from the identity: `e·Ĥ(k)` for the curl stage,
    /// `∫(q₁ − q₂)e^{ik·x}` for the potential stage.
    pub estimate: Complex64,
    /// The grid value of that quantity.
    pub reference: Complex64,
    pub solver_iters: usize,
    pub clamp_count: usize,
    pub opnorm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleFailure {
    pub point: PlanPoint,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RecoveryRecord {
    pub samples: Vec<RecoverySample>,
    pub failures: Vec<SampleFailure>,
}

/// Mean over the samples sharing one `τ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauSummary {
    pub tau: f64,
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

impl RecoveryRecord {
    fn group(&self, f: impl Fn(&RecoverySample) -> f64) -> Vec<TauSummary> {
        let mut taus: Vec<f64> = self.samples.iter().map(|s| s.point.tau).collect();
        taus.sort_by(f64::total_cmp);
        taus.dedup();
        taus.into_iter()
            .map(|tau| {
                let vals: Vec<f64> = self.samples.iter().filter(|s| s.point.tau == tau).map(&f).collect();
                let (mean, stderr) = stats::mean_stderr(&vals).unwrap_or((f64::NAN, f64::NAN));
                TauSummary {
                    tau,
                    mean,
                    stderr,
                    count: vals.len(),
                }
            })
            .collect()
    }

    /// `|identity − main|/τ` grouped by `τ`.
    pub fn normalized_error(&self) -> Vec<TauSummary> {
        self.group(|s| s.abs_err / s.point.tau)
    }

    /// `|estimate − reference|/|reference|` grouped by `τ`.
    pub fn relative_error(&self) -> Vec<TauSummary> {
        self.group(|s| (s.estimate - s.reference).norm() / s.reference.norm())
    }

    /// `|estimate|` grouped by `τ`, for experiments whose reference is 0.
    pub fn estimate_size(&self) -> Vec<TauSummary> {
        self.group(|s| s.estimate.norm())
    }

    /// Least-squares slope of `log(|identity − main|/τ)` against `log τ`.
    pub fn decay_slope(&self) -> Option<f64> {
        let rows = self.normalized_error();
        let (x, y): (Vec<f64>, Vec<f64>) = rows.iter().map(|r| (r.tau, r.mean)).unzip();
        stats::loglog_slope(&x, &y).ok()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("tau,r");
        for i in 0..9 {
            let _ = write!(out, ",U{}{}", i / 3 + 1, i % 3 + 1);
        }
        out.push_str(",k1,k2,k3,identity_re,identity_im,main_re,main_im,abs_err,solver_iters,clamp_count\n");
        for s in &self.samples {
            let _ = write!(out, "{:e},{:e}", s.point.tau, s.point.r);
            for i in 0..9 {
                let _ = write!(out, ",{:e}", s.point.frame.entry(i / 3, i % 3));
            }
            let _ = writeln!(
                out,
                ",{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{}",
                s.k[0],
                s.k[1],
                s.k[2],
                s.identity.re,
                s.identity.im,
                s.main.re,
                s.main.im,
                s.abs_err,
                s.solver_iters,
                s.clamp_count
            );
        }
        out
    }
}

/// Settings shared by both recovery stages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoverySettings {
    pub solve: SolveOptions,
    pub variant: ScheduleVariant,
    /// Record `estimate_opnorm` per sample (costs a power iteration).
    pub opnorm_samples: Option<usize>,
}

impl Default for RecoverySettings {
    fn default() -> Self {
        RecoverySettings {
            solve: SolveOptions::default(),
            variant: ScheduleVariant::Null,
            opnorm_samples: None,
        }
    }
}

/// Both CGO solutions for one plan point.
pub fn solve_pair(
    schedule: &ZetaSchedule,
    pair1: &PotentialPair,
    pair2: &PotentialPair,
    settings: &RecoverySettings,
) -> Result<(CgoSolution, CgoSolution), ReconError> {
    let u1 = cgosolve::build_cgo(pair1, schedule.zeta1(), schedule.zeta_tilde1(), &settings.solve)?;
    let u2 = cgosolve::build_cgo(
        &pair2.negated_a(),
        schedule.zeta2(),
        schedule.zeta_tilde2(),
        &settings.solve,
    )?;
    Ok((u1, u2))
}

fn run_point(
    point: &PlanPoint,
    pair1: &PotentialPair,
    pair2: &PotentialPair,
    settings: &RecoverySettings,
    finish: impl Fn(&ZetaSchedule, Complex64, Complex64) -> (Complex64, Complex64),
) -> Result<RecoverySample, ReconError> {
    let schedule = ZetaSchedule::new(point.tau, point.frame, point.r, settings.variant)?;
    let (u1, u2) = solve_pair(&schedule, pair1, pair2, settings)?;
    let k = schedule.k();
    let identity = integral_identity(&u1, &u2, pair1, pair2, k)?;
    let main = main_term(&schedule, &pair1.a, &pair2.a);
    let (estimate, reference) = finish(&schedule, identity, main);
    let opnorm = match settings.opnorm_samples {
        Some(n) => Some(cgosolve::estimate_opnorm(
            pair1,
            schedule.zeta_tilde1(),
            n,
            settings.solve.delta,
            0,
        )?),
        None => None,
    };
    Ok(RecoverySample {
        point: *point,
        k,
        identity,
        main,
        abs_err: (identity - main).norm(),
        estimate,
        reference,
        solver_iters: u1.iterations() + u2.iterations(),
        clamp_count: u1.clamp.clamped + u2.clamp.clamped,
        opnorm,
    })
}

fn run_plan(
    plan: &[PlanPoint],
    pair1: &PotentialPair,
    pair2: &PotentialPair,
    settings: &RecoverySettings,
    finish: impl Fn(&ZetaSchedule, Complex64, Complex64) -> (Complex64, Complex64) + Sync,
) -> RecoveryRecord {
    let outcomes: Vec<_> = plan
        .par_iter()
        .map(|p| (p, run_point(p, pair1, pair2, settings, &finish)))
        .collect();
    let mut rec = RecoveryRecord::default();
    for (p, o) in outcomes {
        match o {
            Ok(s) => rec.samples.push(s),
            Err(e) => rec.failures.push(SampleFailure {
                point: *p,
                error: e.to_string(),
            }),
        }
    }
    rec
}

/// The magnetic stage: per plan point, `e·Ĥ(k) ≈ identity/(−2iτ)` since
/// `ζ₂ − ζ₁ = −2τU(e₁ + ie₂)`.
pub fn recover_curl_samples(
    pair1: &PotentialPair,
    pair2: &PotentialPair,
    plan: &[PlanPoint],
    settings: &RecoverySettings,
) -> RecoveryRecord {
    let h = pair1.a.sub(&pair2.a);
    run_plan(plan, pair1, pair2, settings, |s, identity, _| {
        let estimate = identity / Complex64::new(0.0, -2.0 * s.tau);
        (estimate, reference_e_dot_h(&s.frame, &h, s.k()))
    })
}

/// The potential stage, once the magnetic potentials agree (or differ by
/// a gauge): the identity itself estimates `∫(q₁ − q₂)e^{ik·x}dx`.
pub fn recover_q_samples(
    pair1: &PotentialPair,
    pair2: &PotentialPair,
    plan: &[PlanPoint],
    settings: &RecoverySettings,
) -> RecoveryRecord {
    let dq = &pair1.q - &pair2.q;
    run_plan(plan, pair1, pair2, settings, |s, identity, _| {
        (identity, transform(&dq, s.k()))
    })
}

/// `ψ_g = Δ⁻¹ div H` with zero mean, so that `∇ψ_g = H` for curl-free,
/// mean-free `H`.
pub fn gauge_potential(h: &VectorField, tol: f64) -> Result<ComplexField, ReconError> {
    let hn = h.l2();
    if hn == 0.0 {
        return Ok(ComplexField::zeros(*h.grid()));
    }
    let c = h.curl().l2() / hn;
    if c > tol {
        return Err(ReconError::NotCurlFree(c));
    }
    // ψ̂ = −i ξ·Ĥ/|ξ|², the same ξ the spectral gradient uses
    let div = h.divergence();
    Ok(div.apply_real_symbol(|xi| {
        let n = xi.norm_sq();
        if n == 0.0 {
            0.0
        } else {
            -1.0 / n
        }
    }))
}

/// Replace `A₂` by `A₂ + ∇ψ_g` with `ψ_g = gauge_potential(A₁ − A₂)`, the
/// gauge transform that makes the magnetic potentials agree. `ψ_g` is
/// constant off the support of `A₁ − A₂`, so its gradient is cut to the
/// half ball (dropping periodic-inverse ripple outside).
pub fn align_gauge(pair1: &PotentialPair, pair2: &PotentialPair, tol: f64) -> Result<PotentialPair, ReconError> {
    let h = pair1.a.sub(&pair2.a);
    let psi = gauge_potential(&h, tol)?;
    let g = *h.grid();
    let edge = crate::dbar::SUPPORT_RADIUS + g.h();
    let grad = psi.gradient().map_components(|c| {
        c.map_at(|x, v| {
            if x.norm() <= edge {
                Complex64::new(v.re, 0.0)
            } else {
                Complex64::ZERO
            }
        })
    });
    Ok(PotentialPair::new(pair2.a.add(&grad), pair2.q.clone())?)
}

/// Frames sharing `Ue₃ = k/|k|`: `U`, `U` with `e₂` flipped and `U` turned
/// by 45° about `e₃`.
pub fn curl_frames(frame: &Frame) -> Result<[Frame; 3], ReconError> {
    let (c, s) = (std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2);
    let turned = Frame::new(frame.e1 * c + frame.e2 * s, frame.e2 * c - frame.e1 * s, frame.e3)?;
    Ok([*frame, frame.flip_e2(), turned])
}

/// Curl data assembled from the three frames of `curl_frames`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurlAssembly {
    /// `∫ curl H e^{ik·x}dx = −ik × Ĥ_⊥(k)` from the first two frames.
    pub curl: [Complex64; 3],
    /// Mismatch between the third frame's value and its prediction from
    /// the first two.
    pub consistency: f64,
}

/// `j` holds the recovered `e·Ĥ(k)` for the three `curl_frames`.
pub fn assemble_curl(frame: &Frame, k: Vec3, j: [Complex64; 3]) -> CurlAssembly {
    // e·Ĥ = Ĥ₁ + iĤ₂ and ē·Ĥ = Ĥ₁ − iĤ₂ in the in-plane coordinates
    let h1 = (j[0] + j[1]) * 0.5;
    let h2 = (j[0] - j[1]) / Complex64::new(0.0, 2.0);
    let c = std::f64::consts::FRAC_1_SQRT_2;
    let predicted = (h1 * c + h2 * c) + I * (h2 * c - h1 * c);
    let perp: [Complex64; 3] = std::array::from_fn(|i| h1 * frame.e1[i] + h2 * frame.e2[i]);
    let kc = [k[0], k[1], k[2]];
    let cross = [
        kc[1] * perp[2] - kc[2] * perp[1],
        kc[2] * perp[0] - kc[0] * perp[2],
        kc[0] * perp[1] - kc[1] * perp[0],
    ];
    CurlAssembly {
        curl: cross.map(|v| -I * v),
        consistency: (predicted - j[2]).norm(),
    }
}

/// `∫ curl H e^{ik·x}dx` by the spectral curl, for comparison.
pub fn direct_curl(h: &VectorField, k: Vec3) -> [Complex64; 3] {
    transform_vec(&h.curl(), k)
}
