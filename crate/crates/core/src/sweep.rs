//! `(τ, ρ)` grid experiments.
//!
//! Each cell runs one engine (full delay system or a truncated phase model)
//! from one or more initial conditions and labels the final phase
//! difference. Cells are independent; results are collected by cell index so
//! the output does not depend on the number of worker threads.

use std::f64::consts::PI;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circular_distance;
use crate::dde::integrate_sl;
use crate::model::{ComplexState, SLParams};
use crate::reduction::{PsiDynamics, ReductionOrder};
use crate::stability::linspace;
use crate::wrap_pi;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid sweep configuration: {0}")]
    InvalidConfig(String),
    #[error("could not build worker pool: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Dde,
    Phase1,
    Phase2,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::Dde => "dde",
            Engine::Phase1 => "phase1",
            Engine::Phase2 => "phase2",
        }
    }
}

impl std::str::FromStr for Engine {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "dde" => Ok(Engine::Dde),
            "phase1" => Ok(Engine::Phase1),
            "phase2" => Ok(Engine::Phase2),
            other => Err(format!("unknown engine `{other}` (expected dde, phase1 or phase2)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IcMode {
    FixedIc,
    RandomIc,
}

impl std::str::FromStr for IcMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "fixed_ic" => Ok(IcMode::FixedIc),
            "random_ic" => Ok(IcMode::RandomIc),
            other => Err(format!("unknown mode `{other}` (expected fixed_ic or random_ic)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    InPhase,
    AntiPhase,
    Other,
}

/// Labels a final phase difference. Non-finite values are `Other`.
pub fn classify(psi: f64, tol: f64) -> Label {
    if !psi.is_finite() {
        return Label::Other;
    }
    if circular_distance(psi, 0.0) <= tol {
        Label::InPhase
    } else if circular_distance(psi, PI) <= tol {
        Label::AntiPhase
    } else {
        Label::Other
    }
}

/// Step of the RK4 integrator used by the phase engines.
pub const PHASE_DT: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// `a`, `b`, `eps` are used; `tau` and `rho` are overwritten per cell.
    pub base: SLParams,
    pub tau_range: (f64, f64),
    pub rho_range: (f64, f64),
    /// `(n_tau, n_rho)`.
    pub grid: (usize, usize),
    #[serde(rename = "T")]
    pub t_end: f64,
    pub mode: IcMode,
    pub ic: ComplexState,
    pub n_samples: usize,
    pub seed: u64,
    pub classify_tol: f64,
    pub engine: Engine,
    /// Draw random radii from `[0.8√a, 1.2√a]` instead of exactly `√a`.
    pub radial_jitter: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let base = SLParams {
            a: 1.0,
            b: 1.0,
            rho: 0.0,
            eps: 0.1,
            tau: 0.0,
        };
        Self {
            tau_range: (0.0, 3.0 * PI / base.b.abs()),
            rho_range: (-PI, PI),
            grid: (81, 81),
            t_end: 1000.0,
            mode: IcMode::FixedIc,
            ic: ComplexState::from_polar(1.0, 0.0, 0.01),
            n_samples: 20,
            seed: 0,
            classify_tol: 0.15,
            engine: Engine::Dde,
            radial_jitter: false,
            base,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), SweepError> {
        let bad = |m: String| Err(SweepError::InvalidConfig(m));
        if let Err(e) = self.base.validate() {
            return bad(e.to_string());
        }
        for (name, (lo, hi)) in [("tau_range", self.tau_range), ("rho_range", self.rho_range)] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return bad(format!("{name} must be a finite interval, got [{lo}, {hi}]"));
            }
        }
        if self.tau_range.0 < 0.0 {
            return bad("delays must be nonnegative".into());
        }
        if self.grid.0 < 2 || self.grid.1 < 2 {
            return bad(format!("grid must be at least 2x2, got {}x{}", self.grid.0, self.grid.1));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("T must be positive, got {}", self.t_end));
        }
        if !(self.classify_tol > 0.0 && self.classify_tol < PI / 2.0) {
            return bad(format!("classify_tol must lie in (0, π/2), got {}", self.classify_tol));
        }
        if self.mode == IcMode::RandomIc && self.n_samples == 0 {
            return bad("n_samples must be positive".into());
        }
        if self.mode == IcMode::FixedIc && !self.ic.is_finite() {
            return bad("initial condition must be finite".into());
        }
        Ok(())
    }

    pub fn taus(&self) -> Vec<f64> {
        linspace(self.tau_range.0, self.tau_range.1, self.grid.0)
    }

    pub fn rhos(&self) -> Vec<f64> {
        linspace(self.rho_range.0, self.rho_range.1, self.grid.1)
    }

    pub fn samples_per_cell(&self) -> usize {
        match self.mode {
            IcMode::FixedIc => 1,
            IcMode::RandomIc => self.n_samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub psi_final: f64,
    pub label: Label,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub tau: f64,
    pub rho: f64,
    pub outcomes: Vec<Outcome>,
    /// `(f_in, f_anti, f_other)`.
    pub fractions: (f64, f64, f64),
    pub bistable: bool,
}

impl CellResult {
    fn from_outcomes(tau: f64, rho: f64, outcomes: Vec<Outcome>) -> Self {
        let n = outcomes.len() as f64;
        let count = |l| outcomes.iter().filter(|o| o.label == l).count();
        let (ni, na) = (count(Label::InPhase), count(Label::AntiPhase));
        let no = outcomes.len() - ni - na;
        Self {
            tau,
            rho,
            fractions: (ni as f64 / n, na as f64 / n, no as f64 / n),
            bistable: ni > 0 && na > 0,
            outcomes,
        }
    }
}

/// Cells in row-major order with `τ` as the slow index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub taus: Vec<f64>,
    pub rhos: Vec<f64>,
    pub cells: Vec<CellResult>,
}

impl SweepResult {
    pub fn cell(&self, i_tau: usize, i_rho: usize) -> &CellResult {
        &self.cells[i_tau * self.rhos.len() + i_rho]
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "tau,rho,f_in,f_anti,f_other,bistable,psi_final_first_sample")?;
        for c in &self.cells {
            let (fi, fa, fo) = c.fractions;
            let psi = c.outcomes.first().map_or(f64::NAN, |o| o.psi_final);
            writeln!(w, "{},{},{fi},{fa},{fo},{},{psi}", c.tau, c.rho, c.bistable)?;
        }
        Ok(())
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Independent stream for sample `sample` of cell `cell`.
pub fn sample_rng(seed: u64, cell: u64, sample: u64) -> ChaCha8Rng {
    let key = splitmix64(splitmix64(splitmix64(seed) ^ cell) ^ sample);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    // keep the (cell, sample) pair visible in the stream id as well
    rng.set_stream(cell.wrapping_shl(32) ^ sample);
    rng
}

/// On-cycle random initial state (optionally with radial jitter).
pub fn random_initial_state(config: &SweepConfig, cell: u64, sample: u64) -> ComplexState {
    let mut rng = sample_rng(config.seed, cell, sample);
    let r0 = config.base.radius();
    let th1 = rng.gen_range(0.0..2.0 * PI);
    let th2 = rng.gen_range(0.0..2.0 * PI);
    let (r1, r2) = if config.radial_jitter {
        (rng.gen_range(0.8 * r0..=1.2 * r0), rng.gen_range(0.8 * r0..=1.2 * r0))
    } else {
        (r0, r0)
    };
    ComplexState::new(
        num_complex::Complex64::from_polar(r1, th1),
        num_complex::Complex64::from_polar(r2, th2),
    )
}

/// Runs one engine from `ic` for `t_end` and labels the result.
pub fn run_sample(params: &SLParams, ic: &ComplexState, engine: Engine, t_end: f64, tol: f64) -> Outcome {
    let psi = match engine {
        Engine::Dde => integrate_sl(params, ic, t_end)
            .map(|z| z.phase_difference())
            .map_err(|e| e.to_string()),
        Engine::Phase1 | Engine::Phase2 => {
            let order = if engine == Engine::Phase1 {
                ReductionOrder::First
            } else {
                ReductionOrder::Second
            };
            let psi = PsiDynamics::new(params, order).integrate(ic.phase_difference(), t_end, PHASE_DT);
            if psi.is_finite() {
                Ok(wrap_pi(psi))
            } else {
                Err("phase model produced a non-finite value".to_string())
            }
        }
    };
    match psi {
        Ok(psi_final) => Outcome {
            psi_final,
            label: classify(psi_final, tol),
            note: None,
        },
        Err(note) => Outcome {
            psi_final: f64::NAN,
            label: Label::Other,
            note: Some(note),
        },
    }
}

fn run_cell(config: &SweepConfig, taus: &[f64], rhos: &[f64], idx: usize) -> CellResult {
    let (tau, rho) = (taus[idx / rhos.len()], rhos[idx % rhos.len()]);
    let params = config.base.with_tau_rho(tau, rho);
    let outcomes = (0..config.samples_per_cell())
        .map(|s| {
            let ic = match config.mode {
                IcMode::FixedIc => config.ic,
                IcMode::RandomIc => random_initial_state(config, idx as u64, s as u64),
            };
            run_sample(&params, &ic, config.engine, config.t_end, config.classify_tol)
        })
        .collect();
    CellResult::from_outcomes(tau, rho, outcomes)
}

/// Runs the sweep on the current rayon pool.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepResult, SweepError> {
    config.validate()?;
    let (taus, rhos) = (config.taus(), config.rhos());
    let cells = (0..taus.len() * rhos.len())
        .into_par_iter()
        .map(|i| run_cell(config, &taus, &rhos, i))
        .collect();
    Ok(SweepResult { taus, rhos, cells })
}

/// Runs the sweep on a dedicated pool of `threads` workers (`0` = rayon's
/// default).
pub fn run_sweep_with_threads(config: &SweepConfig, threads: usize) -> Result<SweepResult, SweepError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| SweepError::ThreadPool(e.to_string()))?;
    pool.install(|| run_sweep(config))
}

/// Worker count from `DPL_THREADS` (`0` or unset means automatic).
pub fn threads_from_env() -> Result<usize, SweepError> {
    match std::env::var("DPL_THREADS") {
        Err(_) => Ok(0),
        Ok(s) if s.trim().is_empty() => Ok(0),
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| SweepError::InvalidConfig(format!("DPL_THREADS must be a nonnegative integer, got `{s}`"))),
    }
}

/// Metadata written next to sweep outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: &'a SweepConfig,
    pub cells: usize,
    pub wall_time_seconds: f64,
}

impl<'a> RunManifest<'a> {
    pub fn new(config: &'a SweepConfig, wall_time_seconds: f64) -> Self {
        Self {
            tool: "dpl",
            version: env!("CARGO_PKG_VERSION"),
            config,
            cells: config.grid.0 * config.grid.1,
            wall_time_seconds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EngineComparison {
    pub taus: Vec<f64>,
    pub rhos: Vec<f64>,
    pub dde_vs_phase1: Vec<bool>,
    pub dde_vs_phase2: Vec<bool>,
    pub rate_phase1: f64,
    pub rate_phase2: f64,
}

impl EngineComparison {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "tau,rho,agree_phase1,agree_phase2")?;
        for (k, (a1, a2)) in self.dde_vs_phase1.iter().zip(&self.dde_vs_phase2).enumerate() {
            let (t, r) = (self.taus[k / self.rhos.len()], self.rhos[k % self.rhos.len()]);
            writeln!(w, "{t},{r},{a1},{a2}")?;
        }
        Ok(())
    }
}

/// Compares two sweeps over the same grid cell by cell: a cell agrees when
/// every sample received the same label.
pub fn agreement(a: &SweepResult, b: &SweepResult) -> Vec<bool> {
    a.cells
        .iter()
        .zip(&b.cells)
        .map(|(x, y)| x.outcomes.iter().zip(&y.outcomes).all(|(p, q)| p.label == q.label))
        .collect()
}

fn rate(v: &[bool]) -> f64 {
    v.iter().filter(|&&b| b).count() as f64 / v.len() as f64
}

/// Builds the comparison from three finished sweeps (dde, phase1, phase2).
pub fn compare_results(
    dde: &SweepResult,
    phase1: &SweepResult,
    phase2: &SweepResult,
) -> Result<EngineComparison, SweepError> {
    if dde.taus != phase1.taus || dde.taus != phase2.taus || dde.rhos != phase1.rhos || dde.rhos != phase2.rhos {
        return Err(SweepError::InvalidConfig("engine sweeps use different grids".into()));
    }
    let d1 = agreement(dde, phase1);
    let d2 = agreement(dde, phase2);
    Ok(EngineComparison {
        taus: dde.taus.clone(),
        rhos: dde.rhos.clone(),
        rate_phase1: rate(&d1),
        rate_phase2: rate(&d2),
        dde_vs_phase1: d1,
        dde_vs_phase2: d2,
    })
}

/// Runs all three engines on `config`'s grid (its `engine` field is
/// ignored) and compares their labels.
pub fn compare_engines(config: &SweepConfig) -> Result<(EngineComparison, [SweepResult; 3]), SweepError> {
    let run = |engine| run_sweep(&SweepConfig { engine, ..config.clone() });
    let dde = run(Engine::Dde)?;
    let p1 = run(Engine::Phase1)?;
    let p2 = run(Engine::Phase2)?;
    let cmp = compare_results(&dde, &p1, &p2)?;
    Ok((cmp, [dde, p1, p2]))
}
