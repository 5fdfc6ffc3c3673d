//! Parameter sets, state types and right-hand sides.
//!
//! Two views of the same dynamics live here: the concrete Stuart-Landau pair
//! (`SLParams` + [`sl_rhs`]) and the generic delay network ([`NetworkSpec`])
//! that the integrator in [`crate::dde`] understands. The SL pair can be
//! lowered onto the generic form with [`as_network_spec`].

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("network shape mismatch: {0}")]
    Shape(String),
}

/// The five scalars of the delay-coupled Stuart-Landau pair.
///
/// `a` is the squared limit-cycle radius, `b` the intrinsic frequency,
/// `rho` the coupling phase, `eps` the coupling strength and `tau` the delay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SLParams {
    pub a: f64,
    pub b: f64,
    pub rho: f64,
    pub eps: f64,
    pub tau: f64,
}

impl SLParams {
    /// Builds a validated parameter set.
    pub fn new(a: f64, b: f64, rho: f64, eps: f64, tau: f64) -> Result<Self, ModelError> {
        let p = Self { a, b, rho, eps, tau };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |name, reason: &str| {
            Err(ModelError::InvalidParameter {
                name,
                reason: reason.to_string(),
            })
        };
        for (name, v) in [
            ("a", self.a),
            ("b", self.b),
            ("rho", self.rho),
            ("eps", self.eps),
            ("tau", self.tau),
        ] {
            if !v.is_finite() {
                return bad(name, "must be finite");
            }
        }
        if self.a <= 0.0 {
            return bad("a", "must be positive");
        }
        if self.b == 0.0 {
            return bad("b", "must be nonzero");
        }
        if self.eps < 0.0 {
            return bad("eps", "must be nonnegative");
        }
        if self.tau < 0.0 {
            return bad("tau", "must be nonnegative");
        }
        Ok(())
    }

    /// Intrinsic angular frequency of the uncoupled limit cycle.
    #[inline]
    pub fn omega(&self) -> f64 {
        self.b
    }

    /// Limit-cycle radius `sqrt(a)`.
    #[inline]
    pub fn radius(&self) -> f64 {
        self.a.sqrt()
    }

    /// Period of the uncoupled oscillation, `2π/|ω|`.
    pub fn period(&self) -> f64 {
        2.0 * PI / self.b.abs()
    }

    /// Effective phase lag `ρ − ωτ`.
    #[inline]
    pub fn alpha(&self) -> f64 {
        self.rho - self.b * self.tau
    }

    pub fn with_tau_rho(&self, tau: f64, rho: f64) -> Self {
        Self { tau, rho, ..*self }
    }

    pub fn with_eps(&self, eps: f64) -> Self {
        Self { eps, ..*self }
    }
}

/// State of the oscillator pair, `(z1, z2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[[f64; 2]; 2]", into = "[[f64; 2]; 2]")]
pub struct ComplexState {
    pub z: [Complex64; 2],
}

impl From<[[f64; 2]; 2]> for ComplexState {
    fn from(v: [[f64; 2]; 2]) -> Self {
        Self::new(Complex64::new(v[0][0], v[0][1]), Complex64::new(v[1][0], v[1][1]))
    }
}

impl From<ComplexState> for [[f64; 2]; 2] {
    fn from(s: ComplexState) -> Self {
        [[s.z[0].re, s.z[0].im], [s.z[1].re, s.z[1].im]]
    }
}

impl ComplexState {
    pub fn new(z1: Complex64, z2: Complex64) -> Self {
        Self { z: [z1, z2] }
    }

    /// Both oscillators at radius `r` with phases `theta1`, `theta2`.
    pub fn from_polar(r: f64, theta1: f64, theta2: f64) -> Self {
        Self::new(Complex64::from_polar(r, theta1), Complex64::from_polar(r, theta2))
    }

    /// Real-vector view `[re z1, im z1, re z2, im z2]`.
    pub fn to_real(&self) -> [f64; 4] {
        [self.z[0].re, self.z[0].im, self.z[1].re, self.z[1].im]
    }

    pub fn from_real(x: &[f64]) -> Self {
        Self::new(Complex64::new(x[0], x[1]), Complex64::new(x[2], x[3]))
    }

    pub fn is_finite(&self) -> bool {
        self.z.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Phase difference `arg(z1 · conj z2)` in `(−π, π]`.
    pub fn phase_difference(&self) -> f64 {
        crate::wrap_pi((self.z[0] * self.z[1].conj()).arg())
    }

    pub fn rotate(&self, chi: f64) -> Self {
        let r = Complex64::from_polar(1.0, chi);
        Self::new(r * self.z[0], r * self.z[1])
    }

    pub fn swapped(&self) -> Self {
        Self::new(self.z[1], self.z[0])
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.z
            .iter()
            .zip(other.z.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Right-hand side of a single uncoupled SL oscillator.
#[inline]
pub fn sl_intrinsic(a: f64, b: f64, z: Complex64) -> Complex64 {
    Complex64::new(a, b) * z - z.norm_sqr() * z
}

/// Right-hand side of the delay-coupled SL pair.
///
/// `z_delayed` holds `(z1(t−τ), z2(t−τ))`; oscillator 1 is driven by the
/// delayed state of oscillator 2 and vice versa.
pub fn sl_rhs(params: &SLParams, z: &ComplexState, z_delayed: &ComplexState) -> ComplexState {
    let coupling = Complex64::from_polar(params.eps, params.rho);
    sl_rhs_with(params.a, params.b, coupling, z, z_delayed)
}

/// [`sl_rhs`] with the complex coupling constant `ε e^{iρ}` precomputed.
#[inline]
pub(crate) fn sl_rhs_with(
    a: f64,
    b: f64,
    coupling: Complex64,
    z: &ComplexState,
    z_delayed: &ComplexState,
) -> ComplexState {
    let [z1, z2] = z.z;
    let [d1, d2] = z_delayed.z;
    ComplexState::new(
        sl_intrinsic(a, b, z1) + coupling * (d2 - z1),
        sl_intrinsic(a, b, z2) + coupling * (d1 - z2),
    )
}

/// Intrinsic vector field `F_j : R^m -> R^m`. Writes into `out`.
pub type VectorField = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Pairwise coupling `G_{j,k}(x_j, x_k(t − τ_{j,k}))`. Writes into `out`,
/// which has the dimension of oscillator `j`.
pub type CouplingFn = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;

/// Generic network of `n` delay-coupled oscillators.
#[derive(Clone)]
pub struct NetworkSpec {
    dims: Vec<usize>,
    offsets: Vec<usize>,
    intrinsic: Vec<VectorField>,
    coupling: Vec<Vec<Option<CouplingFn>>>,
    delays: Vec<Vec<f64>>,
    eps: f64,
    // distinct lags and, per coupled pair, the index into `lags`
    lags: Vec<f64>,
    lag_index: Vec<Vec<usize>>,
}

impl fmt::Debug for NetworkSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NetworkSpec")
            .field("dims", &self.dims)
            .field("delays", &self.delays)
            .field("eps", &self.eps)
            .finish_non_exhaustive()
    }
}

impl NetworkSpec {
    pub fn new(
        dims: Vec<usize>,
        intrinsic: Vec<VectorField>,
        coupling: Vec<Vec<Option<CouplingFn>>>,
        delays: Vec<Vec<f64>>,
        eps: f64,
    ) -> Result<Self, ModelError> {
        let n = dims.len();
        if n == 0 {
            return Err(ModelError::Shape("network has no oscillators".into()));
        }
        if intrinsic.len() != n {
            return Err(ModelError::Shape(format!(
                "{} intrinsic fields for {n} oscillators",
                intrinsic.len()
            )));
        }
        if coupling.len() != n || coupling.iter().any(|row| row.len() != n) {
            return Err(ModelError::Shape("coupling matrix must be n×n".into()));
        }
        if delays.len() != n || delays.iter().any(|row| row.len() != n) {
            return Err(ModelError::Shape("delay matrix must be n×n".into()));
        }
        if delays.iter().flatten().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(ModelError::InvalidParameter {
                name: "delays",
                reason: "entries must be finite and nonnegative".into(),
            });
        }
        if !eps.is_finite() || eps < 0.0 {
            return Err(ModelError::InvalidParameter {
                name: "eps",
                reason: "must be finite and nonnegative".into(),
            });
        }

        let mut offsets = Vec::with_capacity(n);
        let mut acc = 0;
        for &m in &dims {
            offsets.push(acc);
            acc += m;
        }

        let mut lags: Vec<f64> = Vec::new();
        let mut lag_index = vec![vec![usize::MAX; n]; n];
        for j in 0..n {
            for k in 0..n {
                if coupling[j][k].is_none() {
                    continue;
                }
                let d = delays[j][k];
                let idx = match lags.iter().position(|&l| l == d) {
                    Some(i) => i,
                    None => {
                        lags.push(d);
                        lags.len() - 1
                    }
                };
                lag_index[j][k] = idx;
            }
        }

        Ok(Self {
            dims,
            offsets,
            intrinsic,
            coupling,
            delays,
            eps,
            lags,
            lag_index,
        })
    }

    pub fn n(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn delays(&self) -> &[Vec<f64>] {
        &self.delays
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn max_delay(&self) -> f64 {
        self.lags.iter().copied().fold(0.0, f64::max)
    }

    pub(crate) fn total_dim(&self) -> usize {
        self.dims.iter().sum()
    }

    pub(crate) fn distinct_lags(&self) -> &[f64] {
        &self.lags
    }

    pub(crate) fn max_oscillator_dim(&self) -> usize {
        self.dims.iter().copied().max().unwrap_or(0)
    }

    /// Evaluates the full right-hand side.
    ///
    /// `delayed` is laid out lag-major: entry `l * dim .. (l + 1) * dim` is the
    /// whole network state at `t − lags[l]`. `work` needs room for one
    /// oscillator state.
    pub(crate) fn eval(&self, x: &[f64], delayed: &[f64], out: &mut [f64], work: &mut [f64]) {
        let dim = self.total_dim();
        for j in 0..self.n() {
            let (oj, mj) = (self.offsets[j], self.dims[j]);
            let xj = &x[oj..oj + mj];
            (self.intrinsic[j])(xj, &mut out[oj..oj + mj]);
            for k in 0..self.n() {
                let Some(g) = &self.coupling[j][k] else {
                    continue;
                };
                let (ok, mk) = (self.offsets[k], self.dims[k]);
                let base = self.lag_index[j][k] * dim + ok;
                let xk = &delayed[base..base + mk];
                let w = &mut work[..mj];
                g(xj, xk, w);
                for (o, wi) in out[oj..oj + mj].iter_mut().zip(w.iter()) {
                    *o += self.eps * wi;
                }
            }
        }
    }
}

/// Lowers the SL pair onto the generic network form: two oscillators with
/// real dimension 2 each, diffusive coupling `e^{iρ}(x_k − x_j)` and a
/// uniform off-diagonal delay.
pub fn as_network_spec(params: &SLParams) -> NetworkSpec {
    let (a, b) = (params.a, params.b);
    let field: VectorField = Arc::new(move |x: &[f64], out: &mut [f64]| {
        let f = sl_intrinsic(a, b, Complex64::new(x[0], x[1]));
        out[0] = f.re;
        out[1] = f.im;
    });
    let rot = Complex64::from_polar(1.0, params.rho);
    let coupling: CouplingFn = Arc::new(move |xj: &[f64], xk: &[f64], out: &mut [f64]| {
        let g = rot * (Complex64::new(xk[0], xk[1]) - Complex64::new(xj[0], xj[1]));
        out[0] = g.re;
        out[1] = g.im;
    });
    let tau = params.tau;
    NetworkSpec::new(
        vec![2, 2],
        vec![field.clone(), field],
        vec![
            vec![None, Some(coupling.clone())],
            vec![Some(coupling), None],
        ],
        vec![vec![0.0, tau], vec![tau, 0.0]],
        params.eps,
    )
    .expect("SL network shape is fixed")
}
