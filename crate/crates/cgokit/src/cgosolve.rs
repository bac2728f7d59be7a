//! The remainder equation for a CGO solution `u = e^{x·ζ̃}(χa + ψ)`.
//!
//! Conjugating `(D + A)² + q` by `e^{x·ζ̃}` gives
//! `L_ζ̃ = −Δ_ζ̃ + V`, `V = −2iζ̃·A + (D·A) + 2A·D + A² + q`, `D = −i∇`.
//! On the support of `χ̃` (where `χ = 1`), `L_ζ̃(χa) = F + G`, so the
//! remainder solves `L_ζ̃ψ = −χ̃(F + G)`. It is found by the fixed point
//! `ψ ← Δ_ζ̃⁻¹(Vψ + χ̃(F + G))`, which contracts when `Δ_ζ̃⁻¹V` is small.

use cgokit_core::ZetaParams;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::amplitude::{self, AmplitudeBundle};
use crate::conjlap::{self, ConjlapError, InverseReport};
use crate::field::{cvec, ComplexField, Grid3, VectorField, I};
use crate::potentials;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("divergent: perturbation not contractive (residual history {0:?})")]
    Divergent(Vec<f64>),
    #[error("max_iter exceeded ({iters} iterations, last residual {last:e})")]
    MaxIter { iters: usize, last: f64 },
    #[error("|ζ − ζ̃| = {0} exceeds 4")]
    ZetaGap(f64),
    #[error("potential is not real-valued (max imaginary part {0:e})")]
    NotReal(f64),
    #[error("potential leaks outside the half ball (relative size {0:e})")]
    Support(f64),
    #[error(transparent)]
    Conjlap(#[from] ConjlapError),
    #[error(transparent)]
    Field(#[from] crate::field::FieldError),
}

/// Real potentials `(A, q)` supported in the half ball.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialPair {
    pub a: VectorField,
    pub q: ComplexField,
}

impl PotentialPair {
    pub fn new(a: VectorField, q: ComplexField) -> Result<Self, SolveError> {
        a[0].same_grid(&q)?;
        let im = a
            .components()
            .iter()
            .chain(std::iter::once(&q))
            .map(|c| c.values().iter().map(|v| v.im.abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if im > 0.0 {
            return Err(SolveError::NotReal(im));
        }
        let h = q.grid().h();
        let leak = a
            .components()
            .iter()
            .chain(std::iter::once(&q))
            .map(|c| crate::dbar::mass_outside(c, crate::dbar::SUPPORT_RADIUS + h))
            .fold(0.0, f64::max);
        if leak > 1e-10 {
            return Err(SolveError::Support(leak));
        }
        Ok(PotentialPair { a, q })
    }

    pub fn zero(grid: Grid3) -> Self {
        PotentialPair {
            a: VectorField::zeros(grid),
            q: ComplexField::zeros(grid),
        }
    }

    pub fn grid(&self) -> &Grid3 {
        self.q.grid()
    }

    /// `(−A, q)`, the pair whose solution enters the identity as `u₂`.
    pub fn negated_a(&self) -> Self {
        PotentialPair {
            a: self.a.scale_real(-1.0),
            q: self.q.clone(),
        }
    }

    pub fn scaled(&self, sa: f64, sq: f64) -> Self {
        PotentialPair {
            a: self.a.scale_real(sa),
            q: self.q.scale_real(sq),
        }
    }

    /// `A·A` (no conjugation; `A` is real).
    pub fn a_squared(&self) -> ComplexField {
        self.a.dot(&self.a)
    }
}

/// The five terms of `F = −Δ(χa) + (D·A)a + 2A·Da + A²a + qa`.
#[derive(Debug, Clone)]
pub struct FTerms {
    pub laplacian: ComplexField,
    pub div_a: ComplexField,
    pub a_dot_d: ComplexField,
    pub a_squared: ComplexField,
    pub qa: ComplexField,
}

impl FTerms {
    pub fn total(&self) -> ComplexField {
        let s = &(&self.laplacian + &self.div_a) + &self.a_dot_d;
        &(&s + &self.a_squared) + &self.qa
    }
}

/// `(D·A)` as a function: `−i div A`.
pub fn d_dot_a(a: &VectorField) -> ComplexField {
    a.divergence().scale(-I)
}

/// `−Δ(χa) = −(Δχ)a − 2∇χ·∇a − χΔa`, with the derivatives of `χ` taken
/// in closed form.
fn neg_laplacian_chi_a(b: &AmplitudeBundle) -> ComplexField {
    let g = *b.a.grid();
    let chi = potentials::chi_field(g);
    let t1 = &potentials::chi_laplacian_field(g) * &b.a;
    let t2 = potentials::chi_gradient_field(g).dot(&b.grad_a).scale_real(2.0);
    let t3 = &chi * &b.a.laplacian();
    (&(&t1 + &t2) + &t3).scale_real(-1.0)
}

pub fn assemble_f(b: &AmplitudeBundle, a: &VectorField, q: &ComplexField) -> FTerms {
    let amp = &b.a;
    FTerms {
        laplacian: neg_laplacian_chi_a(b),
        div_a: &d_dot_a(a) * amp,
        // 2A·Da = −2i A·∇a
        a_dot_d: a.dot(&b.grad_a).scale(Complex64::new(0.0, -2.0)),
        a_squared: &a.dot(a) * amp,
        qa: q * amp,
    }
}

/// Both forms of `G = −2ζ̃·∇a − 2iζ̃·A a − (ζ̃·ζ̃)a` (the last term is zero
/// for null `ζ̃`).
#[derive(Debug, Clone)]
pub struct GForms {
    /// `−2iζ·A_{>cap} a − (ζ̃ − ζ)·(2∇a + 2iAa)`, equal to `G` wherever
    /// the transport equation holds (on the support of `χ̃`).
    pub cancelled: ComplexField,
    /// The literal form, assembled only for `τ ≤ 8` where its `O(τ)`
    /// cancellation is harmless.
    pub uncancelled: Option<ComplexField>,
}

pub const G_CROSSCHECK_TAU: f64 = 8.0;

fn zeta_gap(z: &ZetaParams, zt: &ZetaParams) -> f64 {
    ((zt.re() - z.re()).norm_sq() + (zt.im() - z.im()).norm_sq()).sqrt()
}

pub fn assemble_g(
    b: &AmplitudeBundle,
    a: &VectorField,
    z_tilde: &ZetaParams,
    z: &ZetaParams,
) -> Result<GForms, SolveError> {
    let gap = zeta_gap(z, z_tilde);
    if gap > 4.0 {
        return Err(SolveError::ZetaGap(gap));
    }
    let amp = &b.a;
    let zc = cvec(z.re(), z.im());
    let ztc = cvec(z_tilde.re(), z_tilde.im());
    let diff = std::array::from_fn(|k| ztc[k] - zc[k]);
    let a_high = a.sub(&b.a_trunc);
    let high = &a_high.dot_const(zc) * amp;
    // 2∇a + 2iAa
    let bracket = b
        .grad_a
        .add(&a.mul_scalar(amp).map_components(|c| c.scale(I)))
        .scale_real(2.0);
    // −(ζ̃·ζ̃)a vanishes for the null schedule and is kept for the other
    let self_dot = amp.scale(-z_tilde.zeta_dot_zeta());
    let cancelled = &(&high.scale(Complex64::new(0.0, -2.0)) - &bracket.dot_const(diff)) + &self_dot;
    let uncancelled = (z_tilde.tau() <= G_CROSSCHECK_TAU).then(|| {
        let t1 = b.grad_a.dot_const(ztc).scale_real(-2.0);
        let t2 = (&a.dot_const(ztc) * amp).scale(Complex64::new(0.0, -2.0));
        &(&t1 + &t2) + &self_dot
    });
    Ok(GForms { cancelled, uncancelled })
}

/// `(−2iζ̃·A + (D·A) + 2A·D + q)ψ`.
pub fn apply_perturbation(a: &VectorField, q: &ComplexField, psi: &ComplexField, z_tilde: &ZetaParams) -> ComplexField {
    let ztc = cvec(z_tilde.re(), z_tilde.im());
    let t1 = (&a.dot_const(ztc) * psi).scale(Complex64::new(0.0, -2.0));
    let t2 = &d_dot_a(a) * psi;
    let t3 = a.dot(&psi.gradient()).scale(Complex64::new(0.0, -2.0));
    let t4 = q * psi;
    &(&(&t1 + &t2) + &t3) + &t4
}

/// The full perturbation including `A²`: the solver passes `q + A²`.
fn effective_q(pair: &PotentialPair) -> ComplexField {
    &pair.q + &pair.a_squared()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub delta: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-8,
            max_iter: 200,
            delta: conjlap::DEFAULT_DELTA,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CgoSolution {
    pub z_tilde: ZetaParams,
    pub bundle: AmplitudeBundle,
    pub psi: ComplexField,
    /// `−χ̃(F + G)`.
    pub rhs: ComplexField,
    /// Mean-cancelling source outside the unit ball added in the last step.
    pub compensation: ComplexField,
    pub residual_history: Vec<f64>,
    pub clamp: InverseReport,
    pub opnorm_estimate: Option<f64>,
}

impl CgoSolution {
    pub fn iterations(&self) -> usize {
        self.residual_history.len()
    }

    /// `w = χa + ψ`, the conjugated part of `u = e^{x·ζ̃} w`.
    pub fn w(&self, chi: &ComplexField) -> ComplexField {
        &(chi * &self.bundle.a) + &self.psi
    }
}

/// The right-hand side `−χ̃(F + G)`.
pub fn remainder_rhs(
    pair: &PotentialPair,
    bundle: &AmplitudeBundle,
    z: &ZetaParams,
    z_tilde: &ZetaParams,
) -> Result<ComplexField, SolveError> {
    let g = *pair.grid();
    let chi_t = potentials::chi_tilde_field(g);
    let f = assemble_f(bundle, &pair.a, &pair.q).total();
    let gg = assemble_g(bundle, &pair.a, z_tilde, z)?.cancelled;
    Ok((&chi_t * &(&f + &gg)).scale_real(-1.0))
}

/// Solve `L_ζ̃ψ = −χ̃(F + G)` by the preconditioned fixed point. The
/// residual of iterate `n+1` is `V(ψ_{n+1} − ψ_n)` (exactly
/// `L_ζ̃ψ_{n+1} − rhs` on unclamped modes), in `X^{−1/2}_ζ̃` relative to the
/// right-hand side.
pub fn solve_remainder(
    pair: &PotentialPair,
    bundle: &AmplitudeBundle,
    z: &ZetaParams,
    z_tilde: &ZetaParams,
    opts: &SolveOptions,
) -> Result<CgoSolution, SolveError> {
    let rhs = remainder_rhs(pair, bundle, z, z_tilde)?;
    solve_with_rhs(pair, bundle.clone(), z_tilde, rhs, opts)
}

/// Weight supported in `|x| ≥ 1.2` (equal to 1 beyond 1.6), well outside
/// the unit ball.
fn outer_weight(grid: Grid3) -> ComplexField {
    ComplexField::from_real_fn(grid, |x| 1.0 - cgokit_core::cutoff::radial_step(x.norm(), 1.2, 1.6))
}

/// `Δ_ζ̃⁻¹` for a source that must be solved on the unit ball only. The DC
/// mode is an exact kernel mode of the periodic operator (`p_ζ̃(0) = ζ̃·ζ̃ = 0`),
/// so the source's mean is cancelled by a multiple of a weight living
/// outside the ball before inverting. Returns `(ψ, compensation, report)`.
fn compensated_inverse(
    g: &ComplexField,
    outer: &ComplexField,
    z_tilde: &ZetaParams,
    delta: f64,
) -> Result<(ComplexField, ComplexField, InverseReport), SolveError> {
    let comp = outer.scale(-g.integral() / outer.integral());
    let (psi, rep) = conjlap::apply_delta_zeta_inverse(&(g + &comp), z_tilde, delta)?;
    Ok((psi, comp, rep))
}

pub fn solve_with_rhs(
    pair: &PotentialPair,
    bundle: AmplitudeBundle,
    z_tilde: &ZetaParams,
    rhs: ComplexField,
    opts: &SolveOptions,
) -> Result<CgoSolution, SolveError> {
    let q_eff = effective_q(pair);
    let scale = conjlap::xb_norm(&rhs, z_tilde, -0.5, false)?;
    let outer = outer_weight(*pair.grid());
    let mut v_psi = ComplexField::zeros(*pair.grid());
    let mut history = Vec::new();
    let mut rises = 0;
    for _ in 0..opts.max_iter {
        let (next, compensation, clamp) = compensated_inverse(&(&v_psi - &rhs), &outer, z_tilde, opts.delta)?;
        let v_next = apply_perturbation(&pair.a, &q_eff, &next, z_tilde);
        let res = if scale == 0.0 {
            0.0
        } else {
            conjlap::xb_norm(&(&v_next - &v_psi), z_tilde, -0.5, false)? / scale
        };
        if let Some(&last) = history.last() {
            rises = if res > last { rises + 1 } else { 0 };
        }
        history.push(res);
        v_psi = v_next;
        if !res.is_finite() || rises >= 3 {
            return Err(SolveError::Divergent(history));
        }
        if res <= opts.tol {
            return Ok(CgoSolution {
                z_tilde: *z_tilde,
                bundle,
                psi: next,
                rhs,
                compensation,
                residual_history: history,
                clamp,
                opnorm_estimate: None,
            });
        }
    }
    Err(SolveError::MaxIter {
        iters: opts.max_iter,
        last: history.last().copied().unwrap_or(f64::NAN),
    })
}

/// Power-iteration estimate of the `Ẋ^{1/2}_ζ̃` growth factor of
/// the fixed-point map `ψ ↦ Δ_ζ̃⁻¹Vψ` (with `V` including `A²`), from a
/// seeded random start.
pub fn estimate_opnorm(
    pair: &PotentialPair,
    z_tilde: &ZetaParams,
    samples: usize,
    delta: f64,
    seed: u64,
) -> Result<f64, SolveError> {
    let samples = samples.max(4);
    let g = *pair.grid();
    let q_eff = effective_q(pair);
    let outer = outer_weight(g);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..g.len())
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let mut psi = ComplexField::from_values(g, values)?;
    let norm = |f: &ComplexField| conjlap::xb_norm(f, z_tilde, 0.5, true);
    let n0 = norm(&psi)?;
    if n0 == 0.0 {
        return Ok(0.0);
    }
    psi = psi.scale_real(1.0 / n0);
    let mut ratios = Vec::with_capacity(samples);
    for _ in 0..samples {
        let v = apply_perturbation(&pair.a, &q_eff, &psi, z_tilde);
        let (t, _, _) = compensated_inverse(&v, &outer, z_tilde, delta)?;
        let nt = norm(&t)?;
        ratios.push(nt);
        if nt == 0.0 {
            return Ok(0.0);
        }
        psi = t.scale_real(1.0 / nt);
    }
    // geometric mean over the second half smooths two-cycle oscillation
    let tail = &ratios[samples / 2..];
    Ok((tail.iter().map(|r| r.ln()).sum::<f64>() / tail.len() as f64).exp())
}

/// Equation residual of `w = χa + ψ` restricted to unclamped modes:
/// `R = L_ζ̃(χa + ψ)` on the support of `χ̃` with clamped lattice modes
/// (including the compensated DC mode) removed, tested against each `v` and normalized by
/// `‖v‖_{X^{1/2}}‖χ̃(F+G)‖_{X^{−1/2}}`. Test functions should be supported
/// where `χ̃ = 1`.
pub fn residual_check(
    sol: &CgoSolution,
    pair: &PotentialPair,
    tests: &[ComplexField],
    delta: f64,
) -> Result<f64, SolveError> {
    let zt = &sol.z_tilde;
    let q_eff = effective_q(pair);
    // L_ζ̃ψ − rhs = −Δ_ζ̃ψ + Vψ + χ̃(F+G)
    let lpsi = &apply_perturbation(&pair.a, &q_eff, &sol.psi, zt) - &conjlap::apply_delta_zeta(&sol.psi, zt);
    // the compensation lives outside the ball; adding it back leaves only
    // the iteration and clamping error
    let r = &(&lpsi - &sol.rhs) + &sol.compensation;
    let floor = delta * zt.tau();
    let r = r.apply_real_symbol(|xi| if zt.symbol(xi).norm() < floor { 0.0 } else { 1.0 });
    let scale = conjlap::xb_norm(&sol.rhs, zt, -0.5, false)?;
    if scale == 0.0 {
        return Ok(r.l2());
    }
    let mut worst = 0.0f64;
    for v in tests {
        let nv = conjlap::xb_norm(v, zt, 0.5, false)?;
        if nv > 0.0 {
            worst = worst.max(r.inner(v).norm() / (nv * scale));
        }
    }
    Ok(worst)
}

/// Build the amplitude for `ζ` and solve for the remainder at `ζ̃`.
pub fn build_cgo(
    pair: &PotentialPair,
    z: &ZetaParams,
    z_tilde: &ZetaParams,
    opts: &SolveOptions,
) -> Result<CgoSolution, SolveError> {
    let g = *pair.grid();
    let bundle = amplitude::build_phase(&pair.a, z, &potentials::chi_field(g), amplitude::CAP_FACTOR * z.tau());
    solve_remainder(pair, &bundle, z, z_tilde, opts)
}

/// Smooth test functions supported in the half ball, for `residual_check`.
pub fn default_test_functions(grid: Grid3) -> Vec<ComplexField> {
    let centers = [
        cgokit_core::Vec3::ZERO,
        cgokit_core::Vec3::new(0.15, 0.0, 0.0),
        cgokit_core::Vec3::new(0.0, -0.15, 0.1),
    ];
    let mut out: Vec<ComplexField> = centers
        .iter()
        .map(|c| {
            potentials::GaussianBump {
                center: *c,
                width: 0.2,
                amplitude: 1.0,
                envelope: cgokit_core::Vec3::ZERO,
            }
            .scalar(grid)
        })
        .collect();
    out.push(ComplexField::from_fn(grid, |x| {
        Complex64::from_polar(potentials::half_ball_clip(x), 3.0 * x[0] - 2.0 * x[2])
    }));
    out
}
