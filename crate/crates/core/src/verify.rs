//! Independent checks of the closed-form reduction.
//!
//! Three kinds of evidence are collected here:
//!
//! 1. Residuals of the order-by-order conjugacy equations, evaluated with
//!    hand-derived analytic derivatives of the closed forms (or central
//!    differences as a secondary mode).
//! 2. The exact rotating-wave solutions `z1 = R e^{iΩt}`, `z2 = e^{iψ*} z1`
//!    of the full delay system, used to check the frequency expansion order
//!    by order.
//! 3. Direct comparison of full-system trajectories against reconstructed
//!    states along the reduced flow.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::dde::{default_dt, integrate, DdeError, InitialHistory, IntegratorConfig, SlPair};
use crate::model::{sl_intrinsic, ComplexState, SLParams};
use crate::reduction::{
    ansatz_a, ansatz_b, e0, e0_history, e1, e1_history, f1, f2, integrate_phase, reconstruct_history,
    reconstruct_state, PhasePoint, ReductionError, ReductionOrder,
};
use crate::reduction::psi_rhs;
use crate::stability::{lyapunov_anti_phase, lyapunov_in_phase, LockedState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("locked {branch:?} state has negative squared amplitude {r2}")]
    NoRealAmplitude { branch: LockedState, r2: f64 },
    #[error("frequency equation did not converge (residual {residual})")]
    NoConvergence { residual: f64 },
    #[error("empty sample set")]
    EmptySamples,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Dde(#[from] DdeError),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EquationId {
    ZerothA,
    ZerothB,
    FirstA,
    FirstB,
    AbEquation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualReport {
    pub equation_id: EquationId,
    pub max_abs_residual: f64,
    pub sample_count: usize,
}

impl ResidualReport {
    fn new(equation_id: EquationId) -> Self {
        Self {
            equation_id,
            max_abs_residual: 0.0,
            sample_count: 0,
        }
    }

    fn add(&mut self, r: f64) {
        // NaN must poison the report
        if r.is_nan() || r > self.max_abs_residual || self.max_abs_residual.is_nan() {
            self.max_abs_residual = if self.max_abs_residual.is_nan() { f64::NAN } else { r };
        }
        self.sample_count += 1;
    }

    fn merge(&mut self, other: &Self) {
        self.add(other.max_abs_residual);
        self.sample_count += other.sample_count - 1;
    }
}

/// A torus point together with a history coordinate `s ≤ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualSample {
    pub phi: PhasePoint,
    pub s: f64,
}

/// How derivatives of the closed forms are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeMode {
    Analytic,
    /// Central differences with step `1e-6`.
    FiniteDifference,
}

const FD_STEP: f64 = 1e-6;

fn norm_diff(a: &ComplexState, b: &ComplexState) -> f64 {
    a.max_abs_diff(b)
}

fn add(a: &ComplexState, b: &ComplexState) -> ComplexState {
    ComplexState::new(a.z[0] + b.z[0], a.z[1] + b.z[1])
}

fn scale(a: &ComplexState, c: f64) -> ComplexState {
    ComplexState::new(a.z[0] * c, a.z[1] * c)
}

fn central_difference(f: impl Fn(f64) -> ComplexState) -> ComplexState {
    let (p, m) = (f(FD_STEP), f(-FD_STEP));
    ComplexState::new((p.z[0] - m.z[0]) / (2.0 * FD_STEP), (p.z[1] - m.z[1]) / (2.0 * FD_STEP))
}

/// `∂e0/∂φ1`, `∂e0/∂φ2`.
pub fn e0_partials(params: &SLParams, phi: &PhasePoint) -> [ComplexState; 2] {
    let r = params.radius();
    let zero = Complex64::new(0.0, 0.0);
    [
        ComplexState::new(Complex64::i() * r * Complex64::from_polar(1.0, phi.phi1), zero),
        ComplexState::new(zero, Complex64::i() * r * Complex64::from_polar(1.0, phi.phi2)),
    ]
}

/// `∂e1/∂φ1`, `∂e1/∂φ2`.
pub fn e1_partials(params: &SLParams, phi: &PhasePoint) -> [ComplexState; 2] {
    let inv = 1.0 / (2.0 * params.radius());
    let wt = params.omega() * params.tau;
    // Δ_1 = φ2 − φ1 − ωτ + ρ, Δ_2 = φ1 − φ2 − ωτ + ρ
    let d1 = phi.phi2 - phi.phi1 - wt + params.rho;
    let d2 = phi.phi1 - phi.phi2 - wt + params.rho;
    let (c1, c2) = (d1.cos() - params.rho.cos(), d2.cos() - params.rho.cos());
    let (u1, u2) = (Complex64::from_polar(1.0, phi.phi1), Complex64::from_polar(1.0, phi.phi2));
    let i = Complex64::i();
    // e1_1 = inv u1 (cos Δ_1 − cos ρ), ∂Δ_1/∂φ1 = −1, ∂Δ_1/∂φ2 = +1
    let de1_dphi1 = inv * (i * u1 * c1 + u1 * d1.sin());
    let de1_dphi2 = inv * (-u1 * d1.sin());
    let de2_dphi2 = inv * (i * u2 * c2 + u2 * d2.sin());
    let de2_dphi1 = inv * (-u2 * d2.sin());
    [
        ComplexState::new(de1_dphi1, de2_dphi1),
        ComplexState::new(de1_dphi2, de2_dphi2),
    ]
}

/// `(∂E1/∂φ1, ∂E1/∂φ2, ∂E1/∂s)`.
pub fn e1_history_partials(params: &SLParams, s: f64, phi: &PhasePoint) -> ([ComplexState; 2], ComplexState) {
    let w = params.omega();
    let r = params.radius();
    let shifted = phi.advanced(w, s);
    let de = e1_partials(params, &shifted);
    let b = f1(params, phi);
    let i = Complex64::i();
    let u = [
        Complex64::from_polar(1.0, phi.phi1 + w * s),
        Complex64::from_polar(1.0, phi.phi2 + w * s),
    ];
    // ∂B_j/∂φ_j = −cos Δ_j, ∂B_j/∂φ_k = +cos Δ_j
    let wt = w * params.tau;
    let cd = [
        (phi.phi2 - phi.phi1 - wt + params.rho).cos(),
        (phi.phi1 - phi.phi2 - wt + params.rho).cos(),
    ];
    let mut dphi = de;
    for l in 0..2 {
        for j in 0..2 {
            let db = if l == j { -cd[j] } else { cd[j] };
            let own = if l == j { i * b[j] } else { Complex64::new(0.0, 0.0) };
            dphi[l].z[j] += s * i * r * u[j] * (own + db);
        }
    }
    let de1_ds = add(&scale(&de[0], w), &scale(&de[1], w));
    let ds = ComplexState::new(
        de1_ds.z[0] + i * r * u[0] * b[0] + s * i * r * (i * w) * u[0] * b[0],
        de1_ds.z[1] + i * r * u[1] * b[1] + s * i * r * (i * w) * u[1] * b[1],
    );
    (dphi, ds)
}

/// Real Jacobian of the SL vector field applied to `w`. The cubic term is
/// not holomorphic, so this is genuinely a 2×2 real matrix per oscillator.
pub fn sl_jacobian_apply(a: f64, b: f64, z: Complex64, w: Complex64) -> Complex64 {
    let (x, y) = (z.re, z.im);
    let j11 = a - 3.0 * x * x - y * y;
    let j12 = -b - 2.0 * x * y;
    let j21 = b - 2.0 * x * y;
    let j22 = a - x * x - 3.0 * y * y;
    Complex64::new(j11 * w.re + j12 * w.im, j21 * w.re + j22 * w.im)
}

/// First-order inhomogeneity `h1_j = e^{iρ}(E0_k(−τ) − e0_j)`.
fn h1(params: &SLParams, phi: &PhasePoint) -> ComplexState {
    let rot = Complex64::from_polar(1.0, params.rho);
    let here = e0(params, phi);
    let past = e0_history(params, -params.tau, phi);
    ComplexState::new(rot * (past.z[1] - here.z[0]), rot * (past.z[0] - here.z[1]))
}

/// Residuals of the zeroth-order equations
/// `∂e0·ω = F(e0)` and `∂E0·ω = ∂_s E0`.
pub fn residual_zeroth(
    params: &SLParams,
    samples: &[ResidualSample],
    mode: DerivativeMode,
) -> Result<[ResidualReport; 2], VerifyError> {
    if samples.is_empty() {
        return Err(VerifyError::EmptySamples);
    }
    let w = params.omega();
    let mut ra = ResidualReport::new(EquationId::ZerothA);
    let mut rb = ResidualReport::new(EquationId::ZerothB);
    for smp in samples {
        let phi = smp.phi;
        let z = e0(params, &phi);
        let f = ComplexState::new(
            sl_intrinsic(params.a, params.b, z.z[0]),
            sl_intrinsic(params.a, params.b, z.z[1]),
        );
        let (lhs_a, dphi_e, ds_e) = match mode {
            DerivativeMode::Analytic => {
                let d = e0_partials(params, &phi);
                let dh = e0_partials(params, &phi.advanced(w, smp.s));
                let along = add(&scale(&dh[0], w), &scale(&dh[1], w));
                let hist = e0_history(params, smp.s, &phi);
                let ds = ComplexState::new(Complex64::i() * w * hist.z[0], Complex64::i() * w * hist.z[1]);
                (add(&scale(&d[0], w), &scale(&d[1], w)), along, ds)
            }
            DerivativeMode::FiniteDifference => (
                central_difference(|h| e0(params, &phi.advanced(w, h))),
                central_difference(|h| e0_history(params, smp.s, &phi.advanced(w, h))),
                central_difference(|h| e0_history(params, smp.s + h, &phi)),
            ),
        };
        ra.add(norm_diff(&lhs_a, &f));
        rb.add(norm_diff(&dphi_e, &ds_e));
    }
    Ok([ra, rb])
}

/// Residuals of the first-order equations:
///
/// - `∂e0·f1 + ∂e1·ω − DF(e0) e1 = h1`
/// - `∂E1·ω − ∂_s E1 = H1 = −∂E0·f1`
pub fn residual_first(
    params: &SLParams,
    samples: &[ResidualSample],
    mode: DerivativeMode,
) -> Result<[ResidualReport; 2], VerifyError> {
    if samples.is_empty() {
        return Err(VerifyError::EmptySamples);
    }
    let w = params.omega();
    let mut ra = ResidualReport::new(EquationId::FirstA);
    let mut rb = ResidualReport::new(EquationId::FirstB);
    for smp in samples {
        let (phi, s) = (smp.phi, smp.s);
        let g = f1(params, &phi);
        let z0 = e0(params, &phi);
        let z1 = e1(params, &phi);
        let shift = |p: &PhasePoint, d: [f64; 2], h: f64| PhasePoint::new(p.phi1 + h * d[0], p.phi2 + h * d[1]);

        let (de0_f1, de1_w, de0h_f1, de1h_w, de1h_s) = match mode {
            DerivativeMode::Analytic => {
                let d0 = e0_partials(params, &phi);
                let d1 = e1_partials(params, &phi);
                let d0h = e0_partials(params, &phi.advanced(w, s));
                let (d1h, d1h_s) = e1_history_partials(params, s, &phi);
                (
                    add(&scale(&d0[0], g[0]), &scale(&d0[1], g[1])),
                    add(&scale(&d1[0], w), &scale(&d1[1], w)),
                    add(&scale(&d0h[0], g[0]), &scale(&d0h[1], g[1])),
                    add(&scale(&d1h[0], w), &scale(&d1h[1], w)),
                    d1h_s,
                )
            }
            DerivativeMode::FiniteDifference => (
                central_difference(|h| e0(params, &shift(&phi, g, h))),
                central_difference(|h| e1(params, &phi.advanced(w, h))),
                central_difference(|h| e0_history(params, s, &shift(&phi, g, h))),
                central_difference(|h| e1_history(params, s, &phi.advanced(w, h))),
                central_difference(|h| e1_history(params, s + h, &phi)),
            ),
        };

        let jac = ComplexState::new(
            sl_jacobian_apply(params.a, params.b, z0.z[0], z1.z[0]),
            sl_jacobian_apply(params.a, params.b, z0.z[1], z1.z[1]),
        );
        let lhs_a = ComplexState::new(
            de0_f1.z[0] + de1_w.z[0] - jac.z[0],
            de0_f1.z[1] + de1_w.z[1] - jac.z[1],
        );
        ra.add(norm_diff(&lhs_a, &h1(params, &phi)));

        let lhs_b = ComplexState::new(de1h_w.z[0] - de1h_s.z[0], de1h_w.z[1] - de1h_s.z[1]);
        let rhs_b = scale(&de0h_f1, -1.0);
        rb.add(norm_diff(&lhs_b, &rhs_b));
    }
    Ok([ra, rb])
}

/// Residual of `i√a B(θ) + 2a A(θ) = √a e^{iρ}(e^{i(θ−ωτ)} − 1)`.
pub fn residual_ab(params: &SLParams, thetas: &[f64]) -> Result<ResidualReport, VerifyError> {
    if thetas.is_empty() {
        return Err(VerifyError::EmptySamples);
    }
    let mut rep = ResidualReport::new(EquationId::AbEquation);
    for &theta in thetas {
        let (lhs, rhs) = ab_sides(params, theta);
        rep.add((lhs - rhs).norm());
    }
    Ok(rep)
}

/// Both sides of the complex A/B equation at `θ`.
pub fn ab_sides(params: &SLParams, theta: f64) -> (Complex64, Complex64) {
    let r = params.radius();
    let lhs = Complex64::new(2.0 * params.a * ansatz_a(params, theta), r * ansatz_b(params, theta));
    let rhs = r
        * Complex64::from_polar(1.0, params.rho)
        * (Complex64::from_polar(1.0, theta - params.omega() * params.tau) - 1.0);
    (lhs, rhs)
}

/// Exact rotating-wave solution of the full delay system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LockedSolution {
    pub branch: LockedState,
    pub omega: f64,
    pub r: f64,
}

impl LockedSolution {
    fn psi_sign(branch: LockedState) -> f64 {
        match branch {
            LockedState::InPhase => 1.0,
            LockedState::AntiPhase => -1.0,
        }
    }

    /// `Ω − b − ε[sin(ρ + ψ* − Ωτ) − sin ρ]`.
    pub fn frequency_residual(params: &SLParams, branch: LockedState, omega: f64) -> f64 {
        let sgn = Self::psi_sign(branch);
        omega - params.b - params.eps * (sgn * (params.rho - omega * params.tau).sin() - params.rho.sin())
    }

    /// `a + ε[cos(ρ + ψ* − Ωτ) − cos ρ]`.
    pub fn squared_amplitude(params: &SLParams, branch: LockedState, omega: f64) -> f64 {
        let sgn = Self::psi_sign(branch);
        params.a + params.eps * (sgn * (params.rho - omega * params.tau).cos() - params.rho.cos())
    }

    /// Full state at time `t`.
    pub fn state_at(&self, t: f64) -> ComplexState {
        let z1 = Complex64::from_polar(self.r, self.omega * t);
        ComplexState::new(z1, z1 * Self::psi_sign(self.branch))
    }
}

/// Solves the scalar frequency equation of the locked state on `branch`.
///
/// Fixed-point iteration when `ετ < 1` (the map is a contraction), bracketed
/// bisection on `[b − 2ε, b + 2ε]` otherwise.
pub fn solve_locked(params: &SLParams, branch: LockedState) -> Result<LockedSolution, VerifyError> {
    let res = |w: f64| LockedSolution::frequency_residual(params, branch, w);
    let mut omega = params.b;
    if params.eps * params.tau < 1.0 {
        for _ in 0..10_000 {
            let next = omega - res(omega);
            let done = (next - omega).abs() <= 1e-16 * next.abs().max(1.0);
            omega = next;
            if done {
                break;
            }
        }
    }
    if !(res(omega).abs() <= 1e-13) {
        let (mut lo, mut hi) = (params.b - 2.0 * params.eps - 1e-12, params.b + 2.0 * params.eps + 1e-12);
        let (flo, _) = (res(lo), res(hi));
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let fm = res(mid);
            if fm == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if (fm < 0.0) == (flo < 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        omega = 0.5 * (lo + hi);
    }
    let residual = res(omega);
    if !(residual.abs() <= 1e-12) {
        return Err(VerifyError::NoConvergence { residual });
    }
    let r2 = LockedSolution::squared_amplitude(params, branch, omega);
    if r2 < 0.0 {
        return Err(VerifyError::NoRealAmplitude { branch, r2 });
    }
    Ok(LockedSolution {
        branch,
        omega,
        r: r2.sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpansionRow {
    pub eps: f64,
    pub omega_exact: f64,
    pub err1: f64,
    pub err2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyExpansion {
    pub branch: LockedState,
    pub rows: Vec<ExpansionRow>,
    /// Least-squares log-log slope of `err1` against `ε`; `None` when some
    /// error is at the round-off floor and the slope is meaningless.
    pub slope1: Option<f64>,
    pub slope2: Option<f64>,
}

fn loglog_slope(xs: &[f64], ys: &[f64], floor: f64) -> Option<f64> {
    if ys.iter().any(|&y| !(y > floor)) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    Some(sxy / sxx)
}

/// Compares the exact locked frequency against the truncated expansions
/// `ω + ε f1` and `ω + ε f1 + ε² f2` at the locked phase difference.
pub fn frequency_expansion_check(
    base: &SLParams,
    branch: LockedState,
    eps_list: &[f64],
) -> Result<FrequencyExpansion, VerifyError> {
    if eps_list.len() < 2 || eps_list.iter().any(|&e| !(e > 0.0)) {
        return Err(VerifyError::InvalidInput("need at least two positive ε values".into()));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(VerifyError::InvalidInput("ε values must be decreasing".into()));
    }
    let psi_star = match branch {
        LockedState::InPhase => 0.0,
        LockedState::AntiPhase => PI,
    };
    let phi = PhasePoint::new(psi_star, 0.0);
    let g1 = f1(base, &phi)[0];
    let g2 = f2(base, &phi)[0];
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let p = base.with_eps(eps);
        let sol = solve_locked(&p, branch)?;
        let first = base.omega() + eps * g1;
        let second = first + eps * eps * g2;
        rows.push(ExpansionRow {
            eps,
            omega_exact: sol.omega,
            err1: (sol.omega - first).abs(),
            err2: (sol.omega - second).abs(),
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    let floor = 8.0 * f64::EPSILON * base.omega().abs().max(1.0);
    let e1s: Vec<f64> = rows.iter().map(|r| r.err1).collect();
    let e2s: Vec<f64> = rows.iter().map(|r| r.err2).collect();
    Ok(FrequencyExpansion {
        branch,
        slope1: loglog_slope(&xs, &e1s, floor),
        slope2: loglog_slope(&xs, &e2s, floor),
        rows,
    })
}

/// Maximum distance between the full delay system started on the reduced
/// manifold and the reconstructed state along the reduced flow, over
/// `[0, t_end]`.
///
/// The initial history is `E0 (+ ε E1)` along `s ∈ [−τ, 0]`; the reduced flow
/// is integrated one order above the reconstruction.
pub fn trajectory_comparison(
    params: &SLParams,
    phi0: &PhasePoint,
    t_end: f64,
    order: ReductionOrder,
) -> Result<f64, VerifyError> {
    let phase_order = match order {
        ReductionOrder::Zeroth => ReductionOrder::First,
        ReductionOrder::First => ReductionOrder::Second,
        ReductionOrder::Second => return Err(ReductionError::UnsupportedOrder(2).into()),
    };
    let p = *params;
    let phi = *phi0;
    let history = InitialHistory::Function(std::sync::Arc::new(move |s, x, dx| {
        let z = reconstruct_history(&p, s, &phi, order).expect("order 0 or 1");
        x.copy_from_slice(&z.to_real());
        let i = Complex64::i();
        let h0 = e0_history(&p, s, &phi);
        let mut dz = ComplexState::new(i * p.omega() * h0.z[0], i * p.omega() * h0.z[1]);
        if order == ReductionOrder::First {
            let (_, ds) = e1_history_partials(&p, s, &phi);
            dz = add(&dz, &scale(&ds, p.eps));
        }
        dx.copy_from_slice(&dz.to_real());
    }));
    let dt = default_dt(params.tau);
    let traj = integrate(&SlPair::new(*params), &history, &IntegratorConfig::new(dt, t_end))?;
    let phases = integrate_phase(params, phi0, phase_order, t_end, dt, 1)?;
    if traj.len() != phases.times().len() {
        return Err(VerifyError::InvalidInput("time grids of full and reduced runs differ".into()));
    }
    let mut worst: f64 = 0.0;
    for ((t, x), (tp, ph)) in traj.iter().zip(phases.times().iter().zip(phases.phases())) {
        debug_assert!((t - tp).abs() < 1e-9);
        let z = ComplexState::from_real(x);
        let zr = reconstruct_state(params, ph, order)?;
        worst = worst.max(z.max_abs_diff(&zr));
    }
    Ok(worst)
}

/// One line of the verification report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub seed: u64,
    pub checks: Vec<CheckOutcome>,
    pub residuals: Vec<ResidualReport>,
    pub frequency: Vec<FrequencyExpansion>,
    pub passed: bool,
}

/// Tolerance for analytic residuals of the closed forms.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Tolerance for the finite-difference residual mode.
pub const FD_RESIDUAL_TOL: f64 = 1e-6;

/// Random parameter set with `a ∈ [0.5, 2]`, `|b| ∈ [0.5, 2]`,
/// `ρ ∈ [−π, π]`, `τ ∈ [0, 2π]`, `ε ∈ (0, 0.3]`.
pub fn random_params<R: Rng>(rng: &mut R) -> SLParams {
    let b = rng.gen_range(0.5..=2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    SLParams {
        a: rng.gen_range(0.5..=2.0),
        b,
        rho: rng.gen_range(-PI..=PI),
        eps: rng.gen_range(1e-3..=0.3),
        tau: rng.gen_range(0.0..=2.0 * PI),
    }
}

/// Random torus points with history coordinates in `[−(τ + 1), 0]`.
pub fn random_samples<R: Rng>(rng: &mut R, params: &SLParams, n: usize) -> Vec<ResidualSample> {
    (0..n)
        .map(|_| ResidualSample {
            phi: PhasePoint::new(rng.gen_range(-PI..PI), rng.gen_range(-PI..PI)),
            s: -rng.gen_range(0.0..=params.tau + 1.0),
        })
        .collect()
}

/// Residual families accumulated over `n_sets` random parameter sets with
/// `n_samples` samples each.
pub fn residual_suite(seed: u64, n_sets: usize, n_samples: usize, mode: DerivativeMode) -> Result<Vec<ResidualReport>, VerifyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total: Option<Vec<ResidualReport>> = None;
    for _ in 0..n_sets {
        let p = random_params(&mut rng);
        let samples = random_samples(&mut rng, &p, n_samples);
        let thetas: Vec<f64> = samples.iter().map(|s| s.phi.phi2 - s.phi.phi1).collect();
        let mut reps: Vec<ResidualReport> = residual_zeroth(&p, &samples, mode)?.to_vec();
        reps.extend(residual_first(&p, &samples, mode)?);
        reps.push(residual_ab(&p, &thetas)?);
        match &mut total {
            None => total = Some(reps),
            Some(t) => t.iter_mut().zip(&reps).for_each(|(a, b)| a.merge(b)),
        }
    }
    total.ok_or(VerifyError::EmptySamples)
}

/// Worst mismatch between the central-difference slope of the second-order
/// ψ equation at the equilibria and `−2ε λ`, over `n` random draws.
pub fn linearization_contract(seed: u64, n: usize) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-6;
    let slope = |p: &SLParams, psi: f64| {
        (psi_rhs(p, psi + h, ReductionOrder::Second) - psi_rhs(p, psi - h, ReductionOrder::Second)) / (2.0 * h)
    };
    let (mut worst_in, mut worst_anti): (f64, f64) = (0.0, 0.0);
    for _ in 0..n {
        let p = random_params(&mut rng);
        worst_in = worst_in.max((slope(&p, 0.0) + 2.0 * p.eps * lyapunov_in_phase(&p)).abs());
        worst_anti = worst_anti.max((slope(&p, PI) + 2.0 * p.eps * lyapunov_anti_phase(&p)).abs());
    }
    (worst_in, worst_anti)
}

/// Runs every check with its tolerance and collects a report.
pub fn run_suite(seed: u64) -> Result<VerificationReport, VerifyError> {
    let mut checks = Vec::new();
    let mut push = |name: &str, value: f64, tolerance: f64, passed: bool| {
        checks.push(CheckOutcome {
            name: name.to_string(),
            value,
            tolerance,
            passed,
        })
    };

    let residuals = residual_suite(seed, 10, 100, DerivativeMode::Analytic)?;
    for r in &residuals {
        let name = serde_json::to_value(r.equation_id)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        push(&format!("residual_{name}"), r.max_abs_residual, RESIDUAL_TOL, r.max_abs_residual <= RESIDUAL_TOL);
    }
    let fd = residual_suite(seed ^ 0x5eed, 10, 100, DerivativeMode::FiniteDifference)?;
    let fd_worst = fd.iter().map(|r| r.max_abs_residual).fold(0.0, f64::max);
    push("residual_finite_difference", fd_worst, FD_RESIDUAL_TOL, fd_worst <= FD_RESIDUAL_TOL);

    let eps_list = [0.1, 0.05, 0.025, 0.0125];
    let mut frequency = Vec::new();
    for (branch, rho, tau) in [(LockedState::InPhase, 0.5, 1.0), (LockedState::AntiPhase, 0.5, 1.5)] {
        let base = SLParams::new(1.0, 1.0, rho, 0.1, tau).expect("valid");
        let fe = frequency_expansion_check(&base, branch, &eps_list)?;
        let tag = match branch {
            LockedState::InPhase => "in_phase",
            LockedState::AntiPhase => "anti_phase",
        };
        let s1 = fe.slope1.unwrap_or(f64::NAN);
        let s2 = fe.slope2.unwrap_or(f64::NAN);
        push(&format!("frequency_slope1_{tag}"), s1, 0.15, (s1 - 2.0).abs() <= 0.15);
        push(&format!("frequency_slope2_{tag}"), s2, 0.25, (s2 - 3.0).abs() <= 0.25);
        frequency.push(fe);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut worst_locked: f64 = 0.0;
    for _ in 0..50 {
        let p = random_params(&mut rng);
        for branch in [LockedState::InPhase, LockedState::AntiPhase] {
            if let Ok(sol) = solve_locked(&p, branch) {
                worst_locked = worst_locked.max(LockedSolution::frequency_residual(&p, branch, sol.omega).abs());
            }
        }
    }
    push("locked_frequency_residual", worst_locked, 1e-12, worst_locked <= 1e-12);

    let (lin_in, lin_anti) = linearization_contract(seed.wrapping_add(2), 1000);
    push("linearization_in_phase", lin_in, 1e-8, lin_in <= 1e-8);
    push("linearization_anti_phase", lin_anti, 1e-8, lin_anti <= 1e-8);

    let passed = checks.iter().all(|c| c.passed);
    Ok(VerificationReport {
        seed,
        checks,
        residuals,
        frequency,
        passed,
    })
}
