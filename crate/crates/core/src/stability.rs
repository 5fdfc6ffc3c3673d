//! Linear stability of in-phase and anti-phase locking.
//!
//! Exponents follow the convention that a *positive* value means the locked
//! state is stable: `λ = −slope / (2ε)` where `slope` is `dψ̇/dψ` of the
//! second-order phase-difference equation at the equilibrium. The name
//! "Lyapunov exponent" is kept for continuity with the literature even
//! though the sign is flipped relative to the usual meaning.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contour::{march, Polyline, ScalarGrid};
use crate::model::SLParams;
use crate::reduction::{PsiDynamics, ReductionOrder};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StabilityError {
    #[error("empty or invalid range [{lo}, {hi}] for {axis}")]
    EmptyRange { axis: &'static str, lo: f64, hi: f64 },
    #[error("grid must be at least 2×2, got {0}×{1}")]
    GridTooSmall(usize, usize),
    #[error("boundary order must be 1 or 2, got {0}")]
    UnsupportedOrder(u8),
}

/// Which locked state a boundary refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LockedState {
    InPhase,
    AntiPhase,
}

/// `λ(0) = cos α + ε(τ + sin²(2α)/(2a) − τ sin ρ sin α)`.
pub fn lyapunov_in_phase(params: &SLParams) -> f64 {
    let alpha = params.alpha();
    let s2a = (2.0 * alpha).sin();
    alpha.cos()
        + params.eps * (params.tau + s2a * s2a / (2.0 * params.a) - params.tau * params.rho.sin() * alpha.sin())
}

/// `λ(π) = −cos α + ε(τ + sin²(2α)/(2a) + τ sin ρ sin α)`.
pub fn lyapunov_anti_phase(params: &SLParams) -> f64 {
    let alpha = params.alpha();
    let s2a = (2.0 * alpha).sin();
    -alpha.cos()
        + params.eps * (params.tau + s2a * s2a / (2.0 * params.a) + params.tau * params.rho.sin() * alpha.sin())
}

/// Exponent of `which` at the given truncation order. Order 1 keeps only the
/// phase-lag term `±cos α`.
pub fn exponent(params: &SLParams, which: LockedState, order: ReductionOrder) -> Result<f64, StabilityError> {
    let sign = match which {
        LockedState::InPhase => 1.0,
        LockedState::AntiPhase => -1.0,
    };
    match order {
        ReductionOrder::First => Ok(sign * params.alpha().cos()),
        ReductionOrder::Second => Ok(match which {
            LockedState::InPhase => lyapunov_in_phase(params),
            LockedState::AntiPhase => lyapunov_anti_phase(params),
        }),
        ReductionOrder::Zeroth => Err(StabilityError::UnsupportedOrder(0)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityReport {
    pub alpha: f64,
    pub lambda_in: f64,
    pub lambda_anti: f64,
    pub stable_in: bool,
    pub stable_anti: bool,
    /// `dψ̇/dψ` at `ψ = 0` under the second-order equation.
    pub slope_in: f64,
    /// `dψ̇/dψ` at `ψ = π` under the second-order equation.
    pub slope_anti: f64,
}

impl StabilityReport {
    pub fn new(params: &SLParams) -> Self {
        let d = PsiDynamics::new(params, ReductionOrder::Second);
        let slope_in = d.c1 + 2.0 * d.c2;
        let slope_anti = -d.c1 + 2.0 * d.c2;
        Self {
            alpha: params.alpha(),
            lambda_in: lyapunov_in_phase(params),
            lambda_anti: lyapunov_anti_phase(params),
            stable_in: slope_in < 0.0,
            stable_anti: slope_anti < 0.0,
            slope_in,
            slope_anti,
        }
    }

    pub fn bistable(&self) -> bool {
        self.stable_in && self.stable_anti
    }
}

/// Uniform samples of `[lo, hi]`, endpoints included.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
        .collect()
}

pub(crate) fn check_range(axis: &'static str, (lo, hi): (f64, f64)) -> Result<(), StabilityError> {
    if lo.is_finite() && hi.is_finite() && lo < hi {
        Ok(())
    } else {
        Err(StabilityError::EmptyRange { axis, lo, hi })
    }
}

/// Exponent field on the `(τ, ρ)` grid. Row `i` is `τ_i`.
pub fn exponent_grid(
    base: &SLParams,
    tau_range: (f64, f64),
    rho_range: (f64, f64),
    grid: (usize, usize),
    which: LockedState,
    order: ReductionOrder,
) -> Result<ScalarGrid, StabilityError> {
    check_range("tau", tau_range)?;
    check_range("rho", rho_range)?;
    if grid.0 < 2 || grid.1 < 2 {
        return Err(StabilityError::GridTooSmall(grid.0, grid.1));
    }
    exponent(base, which, order)?;
    let taus = linspace(tau_range.0, tau_range.1, grid.0);
    let rhos = linspace(rho_range.0, rho_range.1, grid.1);
    let values: Vec<f64> = taus
        .par_iter()
        .flat_map_iter(|&tau| {
            rhos.iter().map(move |&rho| {
                exponent(&base.with_tau_rho(tau, rho), which, order).expect("order checked above")
            })
        })
        .collect();
    Ok(ScalarGrid {
        xs: taus,
        ys: rhos,
        values,
    })
}

/// Zero-level curves `λ = 0` in the `(τ, ρ)` plane. Points are `(τ, ρ)`.
pub fn boundary_curves(
    base: &SLParams,
    tau_range: (f64, f64),
    rho_range: (f64, f64),
    grid: (usize, usize),
    which: LockedState,
    order: ReductionOrder,
) -> Result<Vec<Polyline>, StabilityError> {
    let field = exponent_grid(base, tau_range, rho_range, grid, which, order)?;
    Ok(march(&field, 0.0))
}

/// Writes `curve_id, tau, rho` rows.
pub fn write_curves_csv<W: Write>(curves: &[Polyline], mut w: W) -> io::Result<()> {
    writeln!(w, "curve_id,tau,rho")?;
    for (id, c) in curves.iter().enumerate() {
        for (tau, rho) in c {
            writeln!(w, "{id},{tau},{rho}")?;
        }
    }
    Ok(())
}
