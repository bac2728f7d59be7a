//! The `cgokit` experiment runner.
//!
//! Exit codes: 0 on success, 2 when a run completes but violates its
//! acceptance threshold, 1 on any error (bad config, I/O, solver setup).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use cgokit_core::cutoff::CutoffProfile;
use cgokit_core::{Frame, Vec3, ZetaParams, ZetaSchedule};
use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::averaging::{self, SamplingPlan};
use crate::cgosolve::{self, PotentialPair, SolveError, SolveOptions};
use crate::config::{self, ExperimentConfig, Family};
use crate::conjlap;
use crate::dbar::{self, ComplexFrame};
use crate::field::{ComplexField, Grid3, VectorField};
use crate::io;
use crate::multipliers;
use crate::potentials::{self, FourierModes, GaugeBump, GaussianBump};
use crate::recon::{self, PlanPoint, RecoveryRecord, RecoverySettings};

/// Largest startup operator-norm estimate accepted without `--force`.
pub const OPNORM_PROBE_LIMIT: f64 = 0.5;
/// Relative tolerance for recovered coefficients at the largest `τ`.
pub const RECOVERY_REL_TOL: f64 = 0.1;
/// Absolute floor for recovered coefficients, relative to the `L¹` size of
/// the potentials (which bounds every Fourier coefficient).
pub const RECOVERY_ABS_TOL: f64 = 1e-6;
/// Curl-free tolerance (`‖curl H‖₂/‖H‖₂`, units of inverse length) for the
/// gauge alignment before the potential stage.
pub const GAUGE_TOL: f64 = 0.1;
pub const UNDOPHASE_TOL: f64 = 1e-3;
/// Averaged-estimate constants above this count as a blow-up.
pub const ESTIMATE_LIMIT: f64 = 10.0;

#[derive(Debug, Parser)]
#[command(
    name = "cgokit",
    version,
    about = "CGO solutions, reconstruction and averaged estimates on 3-D grids"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `plan.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Skip the startup operator-norm probe.
    #[arg(long, global = true)]
    force: bool,
    #[arg(long, global = true, env = "CGOKIT_THREADS")]
    threads: Option<usize>,
    /// Test hook: replace the cutoff profile of the averaged estimates.
    #[arg(long, global = true, hide = true, value_enum)]
    tamper_profile: Option<ProfileArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ProfileArg {
    Smooth,
    Flat,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Build one CGO solution and report its residuals.
    Cgo,
    /// Recover `e·Ĥ(k)` from the integral identity over the plan.
    RecoverCurl,
    /// Align gauges, then recover `∫(q₁ − q₂)e^{ik·x}` over the plan.
    RecoverQ,
    /// Check that removing the phase leaves `e·∫A e^{ik·x}` unchanged.
    Undophase,
    /// Monte-Carlo constants of the averaged estimates.
    VerifyEstimates,
    /// Symbol comparability ratios over the lattice.
    SymbolAudit,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Cgo => "cgo",
            Command::RecoverCurl => "recover-curl",
            Command::RecoverQ => "recover-q",
            Command::Undophase => "undophase",
            Command::VerifyEstimates => "verify-estimates",
            Command::SymbolAudit => "symbol-audit",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Outcome {
    Pass,
    Violation(String),
}

type RunResult = Result<Outcome, String>;

/// Parse `args` (including the program name) and run. Returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let Some(path) = cli.config.clone() else {
        eprintln!("error: --config is required");
        return 1;
    };
    let mut cfg = match config::parse_config(&path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    if let Some(s) = cli.seed {
        cfg.plan.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output.dir = o.clone();
    }
    let threads = cli.threads.unwrap_or(0);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return 1;
        }
    };
    if let Err(e) = std::fs::create_dir_all(&cfg.output.dir) {
        eprintln!("error: cannot create {}: {e}", cfg.output.dir.display());
        return 1;
    }
    let start = Instant::now();
    let result = pool.install(|| dispatch(&cli, &cfg));
    let code = match &result {
        Ok(Outcome::Pass) => 0,
        Ok(Outcome::Violation(msg)) => {
            eprintln!("threshold violated: {msg}");
            2
        }
        Err(msg) => {
            eprintln!("error: {msg}");
            1
        }
    };
    let manifest = format!(
        "# cgokit manifest\ncommand = {}\nversion = {}\nseed = {}\nthreads = {}\nwall_time_s = {:.3}\nexit_code = {code}\n\n{}",
        cli.command.name(),
        env!("CARGO_PKG_VERSION"),
        cfg.plan.seed,
        pool.current_num_threads(),
        start.elapsed().as_secs_f64(),
        cfg.echo()
    );
    if let Err(e) = std::fs::write(cfg.output.dir.join("manifest.txt"), manifest) {
        eprintln!("error: cannot write manifest: {e}");
        return 1;
    }
    code
}

fn dispatch(cli: &Cli, cfg: &ExperimentConfig) -> RunResult {
    let g = Grid3::new(cfg.grid.n, cfg.grid.l).map_err(|e| e.to_string())?;
    match cli.command {
        Command::SymbolAudit => return symbol_audit(cfg, g),
        Command::VerifyEstimates => {
            let profile = match cli.tamper_profile {
                Some(ProfileArg::Flat) => CutoffProfile::Flat,
                _ => CutoffProfile::Smooth,
            };
            let (p1, _) = build_pairs(cfg, g)?;
            return verify_estimates(cfg, g, &p1, profile);
        }
        _ => {}
    }
    let (p1, p2) = build_pairs(cfg, g)?;
    if !cli.force && !matches!(cli.command, Command::Undophase) {
        probe_opnorm(cfg, &[&p1, &p2])?;
    }
    match cli.command {
        Command::Cgo => cgo(cfg, &p1),
        Command::RecoverCurl => recover_curl(cfg, &p1, &p2),
        Command::RecoverQ => recover_q(cfg, &p1, &p2),
        Command::Undophase => undophase(cfg, &p1),
        Command::VerifyEstimates | Command::SymbolAudit => unreachable!("handled above"),
    }
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), String> {
    std::fs::write(dir.join(name), text).map_err(|e| format!("cannot write {name}: {e}"))
}

fn frames(cfg: &ExperimentConfig) -> Vec<Frame> {
    (0..cfg.plan.n_frames)
        .map(|i| averaging::sample_haar(cfg.plan.seed, i as u64))
        .collect()
}

fn solve_options(cfg: &ExperimentConfig) -> SolveOptions {
    SolveOptions {
        tol: cfg.solver.tol,
        max_iter: cfg.solver.max_iter,
        delta: cfg.solver.delta_clamp,
    }
}

fn first_schedule(cfg: &ExperimentConfig) -> Result<ZetaSchedule, String> {
    let tau = cfg.plan.tau_list.iter().cloned().fold(f64::INFINITY, f64::min);
    ZetaSchedule::new(tau, frames(cfg)[0], cfg.plan.r_list[0], cfg.solver.zeta_variant).map_err(|e| e.to_string())
}

/// The two potential pairs of the configured family.
pub fn built_in_pairs(family: Family, g: Grid3, scale: f64, width: f64, dq: f64) -> (PotentialPair, PotentialPair) {
    let bump = |c: Vec3, amp: f64| GaussianBump {
        center: c,
        width,
        amplitude: amp * scale,
        envelope: Vec3::new(0.3, -0.2, 0.0),
    };
    let a_bumps = potentials::bump_vector(
        g,
        [
            bump(Vec3::new(0.05, 0.0, 0.0), 1.0),
            bump(Vec3::new(0.0, -0.05, 0.0), 1.0),
            bump(Vec3::new(0.0, 0.0, 0.05), 1.0),
        ],
    );
    let k0 = 3.0 * g.dk();
    let mode = |amp: f64| ComplexField::from_real_fn(g, |x| amp * (k0 * x[0]).cos() * potentials::half_ball_clip(x));
    let pair = |a: VectorField, q: ComplexField| PotentialPair::new(a, q).expect("built-in potentials are admissible");
    match family {
        Family::GaussianBump => {
            let a2 = potentials::bump_vector(
                g,
                [
                    bump(Vec3::new(-0.05, 0.0, 0.05), -0.5),
                    bump(Vec3::new(0.0, 0.05, 0.0), 0.5),
                    bump(Vec3::new(0.05, 0.0, -0.05), 0.5),
                ],
            );
            (
                pair(a_bumps, bump(Vec3::ZERO, 1.0).scalar(g)),
                pair(a2, bump(Vec3::new(0.05, 0.05, 0.0), 0.5).scalar(g)),
            )
        }
        Family::FourierModes => {
            let m1 = FourierModes {
                modes: vec![
                    (Vec3::new(1.0, 0.5, 0.0), Vec3::new(0.0, 0.0, scale), 0.3),
                    (Vec3::new(0.0, 2.0, -1.0), Vec3::new(scale, 0.5 * scale, 0.0), -0.7),
                ],
            };
            let m2 = FourierModes {
                modes: vec![(Vec3::new(-1.0, 0.0, 1.5), Vec3::new(0.5 * scale, -scale, 0.0), 1.1)],
            };
            (
                pair(m1.vector(g), mode(scale)),
                pair(m2.vector(g), ComplexField::zeros(g)),
            )
        }
        Family::GaugePair => {
            let (a1, a2) = potentials::gauge_pair(&a_bumps, &GaugeBump::new(scale, Vec3::new(0.02, 0.03, -0.01)));
            (pair(a1, mode(dq)), pair(a2, ComplexField::zeros(g)))
        }
        Family::File => unreachable!("file potentials are read, not built"),
    }
}

fn build_pairs(cfg: &ExperimentConfig, g: Grid3) -> Result<(PotentialPair, PotentialPair), String> {
    let p = &cfg.potentials;
    if p.family != Family::File {
        return Ok(built_in_pairs(p.family, g, p.scale, p.width, p.dq));
    }
    let vector = |f: &Option<PathBuf>| -> Result<VectorField, String> {
        match f {
            Some(path) => io::read_vector_field(path)
                .map(|v| v.scale_real(p.scale))
                .map_err(|e| format!("{}: {e}", path.display())),
            None => Ok(VectorField::zeros(g)),
        }
    };
    let scalar = |f: &Option<PathBuf>| -> Result<ComplexField, String> {
        match f {
            Some(path) => io::read_field(path)
                .map(|v| v.scale_real(p.scale))
                .map_err(|e| format!("{}: {e}", path.display())),
            None => Ok(ComplexField::zeros(g)),
        }
    };
    let make = |a: VectorField, q: ComplexField| -> Result<PotentialPair, String> {
        if *a.grid() != g || *q.grid() != g {
            return Err("potential files do not match [grid]".into());
        }
        PotentialPair::new(a, q).map_err(|e| e.to_string())
    };
    Ok((
        make(vector(&p.a1)?, scalar(&p.q1)?)?,
        make(vector(&p.a2)?, scalar(&p.q2)?)?,
    ))
}

fn probe_opnorm(cfg: &ExperimentConfig, pairs: &[&PotentialPair]) -> Result<(), String> {
    let s = first_schedule(cfg)?;
    for (i, (p, zt)) in pairs.iter().zip([s.zeta_tilde1(), s.zeta_tilde2()]).enumerate() {
        let est = cgosolve::estimate_opnorm(p, zt, cfg.solver.opnorm_samples, cfg.solver.delta_clamp, cfg.plan.seed)
            .map_err(|e| e.to_string())?;
        if est >= OPNORM_PROBE_LIMIT {
            return Err(format!(
                "operator-norm probe for pair {} at τ = {} is {est:.3} ≥ {OPNORM_PROBE_LIMIT}; reduce potentials.scale or pass --force",
                i + 1,
                s.tau
            ));
        }
    }
    Ok(())
}

fn cgo(cfg: &ExperimentConfig, pair: &PotentialPair) -> RunResult {
    let s = first_schedule(cfg)?;
    let dir = &cfg.output.dir;
    let g = *pair.grid();
    let sol = match cgosolve::build_cgo(pair, s.zeta1(), s.zeta_tilde1(), &solve_options(cfg)) {
        Ok(sol) => sol,
        Err(e @ (SolveError::Divergent(_) | SolveError::MaxIter { .. })) => {
            write(dir, "cgo_report.txt", &format!("status = {e}\n"))?;
            return Ok(Outcome::Violation(e.to_string()));
        }
        Err(e) => return Err(e.to_string()),
    };
    let check = cgosolve::residual_check(&sol, pair, &cgosolve::default_test_functions(g), cfg.solver.delta_clamp)
        .map_err(|e| e.to_string())?;
    let mut hist = String::from("iteration,residual\n");
    for (i, r) in sol.residual_history.iter().enumerate() {
        let _ = writeln!(hist, "{},{r:e}", i + 1);
    }
    write(dir, "residuals.csv", &hist)?;
    let report = format!(
        "tau = {}\nr = {}\niterations = {}\nfinal_residual = {:e}\nresidual_check = {check:e}\nclamped_modes = {}\ntotal_modes = {}\n",
        s.tau,
        s.r,
        sol.iterations(),
        sol.residual_history.last().copied().unwrap_or(0.0),
        sol.clamp.clamped,
        sol.clamp.total
    );
    write(dir, "cgo_report.txt", &report)?;
    if cfg.output.emit_fields {
        let chi = potentials::chi_field(g);
        for (name, f) in [
            ("psi.cgo", &sol.psi),
            ("amplitude.cgo", &sol.bundle.a),
            ("w.cgo", &sol.w(&chi)),
        ] {
            io::write_field(&dir.join(name), f).map_err(|e| e.to_string())?;
        }
    }
    let limit = 1e-6;
    if check > limit {
        return Ok(Outcome::Violation(format!("residual check {check:e} > {limit:e}")));
    }
    Ok(Outcome::Pass)
}

fn plan_points(cfg: &ExperimentConfig) -> Vec<PlanPoint> {
    let fr = frames(cfg);
    let mut out = Vec::new();
    for &tau in &cfg.plan.tau_list {
        for f in &fr {
            for &r in &cfg.plan.r_list {
                out.push(PlanPoint { tau, frame: *f, r });
            }
        }
    }
    out
}

fn settings(cfg: &ExperimentConfig) -> RecoverySettings {
    RecoverySettings {
        solve: solve_options(cfg),
        variant: cfg.solver.zeta_variant,
        opnorm_samples: None,
    }
}

fn l1_size(fields: &[&ComplexField]) -> f64 {
    fields.iter().map(|f| f.norm(1.0).unwrap_or(0.0)).fold(0.0, f64::max)
}

/// Write the record, log failures, and compare the recovered values at the
/// largest `τ` against the grid reference.
fn finish_recovery(cfg: &ExperimentConfig, rec: &RecoveryRecord, name: &str, abs_scale: f64) -> RunResult {
    let dir = &cfg.output.dir;
    write(dir, &format!("{name}.csv"), &rec.to_csv())?;
    let mut est = String::from("tau,k1,k2,k3,estimate_re,estimate_im,reference_re,reference_im\n");
    for s in &rec.samples {
        let _ = writeln!(
            est,
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            s.point.tau, s.k[0], s.k[1], s.k[2], s.estimate.re, s.estimate.im, s.reference.re, s.reference.im
        );
    }
    write(dir, &format!("{name}_estimates.csv"), &est)?;
    let mut fails = String::from("tau,r,frame,error\n");
    for f in &rec.failures {
        eprintln!(
            "sample failed at τ = {}, r = {}, U = {:?}: {}",
            f.point.tau, f.point.r, f.point.frame, f.error
        );
        let _ = writeln!(
            fails,
            "{:e},{:e},\"{:?}\",\"{}\"",
            f.point.tau, f.point.r, f.point.frame, f.error
        );
    }
    write(dir, &format!("{name}_failures.csv"), &fails)?;
    if !rec.failures.is_empty() {
        return Ok(Outcome::Violation(format!(
            "{} plan samples failed",
            rec.failures.len()
        )));
    }
    let top = cfg.plan.tau_list.iter().cloned().fold(0.0, f64::max);
    for s in rec.samples.iter().filter(|s| s.point.tau == top) {
        let err = (s.estimate - s.reference).norm();
        let allowed = RECOVERY_REL_TOL * s.reference.norm() + RECOVERY_ABS_TOL * abs_scale;
        if err > allowed {
            return Ok(Outcome::Violation(format!(
                "at τ = {top}, k = {:?}: |estimate − reference| = {err:e} > {allowed:e}",
                s.k
            )));
        }
    }
    Ok(Outcome::Pass)
}

fn recover_curl(cfg: &ExperimentConfig, p1: &PotentialPair, p2: &PotentialPair) -> RunResult {
    let rec = recon::recover_curl_samples(p1, p2, &plan_points(cfg), &settings(cfg));
    let mut comps: Vec<&ComplexField> = p1.a.components().iter().collect();
    comps.extend(p2.a.components().iter());
    finish_recovery(cfg, &rec, "recover_curl", l1_size(&comps))
}

fn recover_q(cfg: &ExperimentConfig, p1: &PotentialPair, p2: &PotentialPair) -> RunResult {
    let aligned = recon::align_gauge(p1, p2, GAUGE_TOL).map_err(|e| format!("gauge alignment: {e}"))?;
    let rec = recon::recover_q_samples(p1, &aligned, &plan_points(cfg), &settings(cfg));
    let dq = &p1.q - &p2.q;
    finish_recovery(cfg, &rec, "recover_q", l1_size(&[&dq]))
}

fn undophase(cfg: &ExperimentConfig, pair: &PotentialPair) -> RunResult {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.plan.seed);
    let mut out = String::from("frame,k1,k2,k3,relative\n");
    let mut worst = 0.0f64;
    for (i, f) in frames(cfg).iter().enumerate() {
        let k = f.e3 * rng.random_range(1.0..8.0);
        let c = dbar::verify_undophase(&pair.a, &ComplexFrame::from_frame(f), k).map_err(|e| e.to_string())?;
        worst = worst.max(c.relative);
        let _ = writeln!(out, "{i},{:e},{:e},{:e},{:e}", k[0], k[1], k[2], c.relative);
    }
    write(&cfg.output.dir, "undophase.csv", &out)?;
    if worst > UNDOPHASE_TOL {
        return Ok(Outcome::Violation(format!(
            "relative discrepancy {worst:e} > {UNDOPHASE_TOL:e}"
        )));
    }
    Ok(Outcome::Pass)
}

fn symbol_audit(cfg: &ExperimentConfig, g: Grid3) -> RunResult {
    let mut out = String::from("tau,frame,low_min,low_max,high_min,high_max,low_count,high_count,clamped\n");
    let mut bad = None;
    for &tau in &cfg.plan.tau_list {
        for (i, f) in frames(cfg).iter().enumerate() {
            let z = ZetaParams::null(tau, f).map_err(|e| e.to_string())?;
            let a = conjlap::symbol_audit(&g, &z, cfg.solver.delta_clamp);
            let _ = writeln!(
                out,
                "{tau:e},{i},{:e},{:e},{:e},{:e},{},{},{}",
                a.low_min, a.low_max, a.high_min, a.high_max, a.low_count, a.high_count, a.clamped
            );
            if bad.is_none() && !a.within((0.25, 4.0), (0.01, 4.0)) {
                bad = Some(format!("ratios out of range at τ = {tau}, frame {i}"));
            }
        }
    }
    write(&cfg.output.dir, "symbol_audit.csv", &out)?;
    Ok(bad.map_or(Outcome::Pass, Outcome::Violation))
}

/// Real white noise from the plan seed: the averaged estimates hold for
/// every `u`, and noise fills every shell.
pub fn noise_field(g: Grid3, seed: u64) -> ComplexField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x006e_6f69_7365);
    ComplexField::from_values(
        g,
        (0..g.len())
            .map(|_| num_complex::Complex64::new(rng.random::<f64>() - 0.5, 0.0))
            .collect(),
    )
    .expect("length matches the grid")
}

fn verify_estimates(cfg: &ExperimentConfig, g: Grid3, pair: &PotentialPair, profile: CutoffProfile) -> RunResult {
    let pc = &cfg.plan;
    let plan =
        SamplingPlan::new(pc.n_frames, pc.tau_list.clone(), pc.k, pc.weight, pc.seed).map_err(|e| e.to_string())?;
    // the largest shell that fits inside the Nyquist cube, filled with noise;
    // λ/μ = 16 leaves room for an unlocalized profile to show its growth
    let lambda = multipliers::dyadic_scales(&g)
        .into_iter()
        .filter(|l| *l <= g.nyquist())
        .fold(1.0, f64::max);
    let shell = cgokit_core::Projection::lp_eq(lambda).map_err(|e| e.to_string())?;
    let u = multipliers::project(shell, &noise_field(g, pc.seed));
    let mu = lambda / 16.0;
    let tau_min = pc.tau_list.iter().cloned().fold(f64::INFINITY, f64::min);
    let nu = mu.min(tau_min / 8.0);
    let err = |e: averaging::AveragingError| e.to_string();
    let mut rows = Vec::new();
    for p in [2.0, 3.0] {
        rows.push(averaging::LemmaRow {
            lemma: "pavg",
            p,
            params: format!("lambda={lambda} mu={mu} nu={mu}"),
            estimate: averaging::verify_pavg(&u, lambda, mu, mu, p, &plan, profile).map_err(err)?,
            seed: pc.seed,
        });
    }
    rows.push(averaging::LemmaRow {
        lemma: "qavg",
        p: 2.0,
        params: format!("lambda={lambda} nu={nu}"),
        estimate: averaging::verify_qavg(&u, lambda, nu, 2.0, &plan, profile).map_err(err)?,
        seed: pc.seed,
    });
    for p in [2.0, 3.0] {
        rows.push(averaging::LemmaRow {
            lemma: "loggain",
            p,
            params: format!("K={} alpha=0.5", pc.k),
            estimate: averaging::verify_loggain(&noise_field(g, pc.seed), p, pc.k, 0.5).map_err(err)?,
            seed: pc.seed,
        });
    }
    rows.extend(averaging::averaged_lemma_suite(&pair.a, &pair.q, &plan).map_err(err)?);
    write(&cfg.output.dir, "estimates.csv", &averaging::report_csv(&rows))?;
    for r in &rows {
        let c = r.estimate.constant;
        if !c.is_finite() {
            return Ok(Outcome::Violation(format!("{} constant is not finite", r.lemma)));
        }
        if matches!(r.lemma, "pavg" | "qavg") && r.p == 2.0 && c > ESTIMATE_LIMIT {
            return Ok(Outcome::Violation(format!(
                "{} (p = 2) constant {c:.3} exceeds {ESTIMATE_LIMIT}",
                r.lemma
            )));
        }
    }
    Ok(Outcome::Pass)
}
