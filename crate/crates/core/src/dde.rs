//! Method-of-steps integration of delay networks.
//!
//! The integrator is classical RK4 on a fixed grid. Every positive delay must
//! be an integer multiple of the step, so the delayed argument of the first
//! and last RK stage is a stored grid node; only the half-step stages read the
//! past through cubic Hermite interpolation. The past itself lives in a
//! [`HistoryBuffer`] that retains exactly one maximal delay of nodes.

use std::io::{self, Write};
use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::model::{sl_rhs_with, ComplexState, NetworkSpec, SLParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DdeError {
    #[error("step {dt} does not divide delay {delay}")]
    StepMisaligned { delay: f64, dt: f64 },
    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("invalid integrator config: {0}")]
    InvalidConfig(String),
    #[error("initial history has dimension {got}, system needs {expected}")]
    HistoryDimension { expected: usize, got: usize },
    #[error("history query at t = {t} outside [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },
}

/// A system the integrator can step: a right-hand side that reads the state
/// at a fixed set of lags.
pub trait DelaySystem {
    fn dim(&self) -> usize;

    /// Distinct lags the right-hand side reads. Zero is allowed and means the
    /// current state.
    fn lags(&self) -> &[f64];

    /// Scratch length needed by [`DelaySystem::eval`].
    fn work_len(&self) -> usize {
        0
    }

    /// Writes `dx/dt` into `out`. `delayed[l * dim .. (l + 1) * dim]` is the
    /// state at `t − lags()[l]`.
    fn eval(&self, x: &[f64], delayed: &[f64], out: &mut [f64], work: &mut [f64]);
}

impl DelaySystem for NetworkSpec {
    fn dim(&self) -> usize {
        self.total_dim()
    }

    fn lags(&self) -> &[f64] {
        self.distinct_lags()
    }

    fn work_len(&self) -> usize {
        self.max_oscillator_dim()
    }

    fn eval(&self, x: &[f64], delayed: &[f64], out: &mut [f64], work: &mut [f64]) {
        NetworkSpec::eval(self, x, delayed, out, work)
    }
}

/// The SL pair as a [`DelaySystem`], with the coupling constant precomputed.
#[derive(Debug, Clone, Copy)]
pub struct SlPair {
    params: SLParams,
    coupling: Complex64,
    lag: [f64; 1],
}

impl SlPair {
    pub fn new(params: SLParams) -> Self {
        Self {
            params,
            coupling: Complex64::from_polar(params.eps, params.rho),
            lag: [params.tau],
        }
    }

    pub fn params(&self) -> &SLParams {
        &self.params
    }
}

impl DelaySystem for SlPair {
    fn dim(&self) -> usize {
        4
    }

    fn lags(&self) -> &[f64] {
        &self.lag
    }

    #[inline]
    fn eval(&self, x: &[f64], delayed: &[f64], out: &mut [f64], _work: &mut [f64]) {
        let z = ComplexState::from_real(x);
        let zd = ComplexState::from_real(delayed);
        let dz = sl_rhs_with(self.params.a, self.params.b, self.coupling, &z, &zd);
        out[..4].copy_from_slice(&dz.to_real());
    }
}

/// Past of the system on `t ≤ 0`, before integration starts.
#[derive(Clone)]
pub enum InitialHistory {
    /// The state is frozen at this value for all `t ≤ 0`.
    Constant(Vec<f64>),
    /// A path `t ↦ (x(t), x'(t))` for `t ≤ 0`, written into the two slices.
    Function(Arc<dyn Fn(f64, &mut [f64], &mut [f64]) + Send + Sync>),
}

impl std::fmt::Debug for InitialHistory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Constant(x) => f.debug_tuple("Constant").field(x).finish(),
            Self::Function(_) => f.write_str("Function(..)"),
        }
    }
}

impl InitialHistory {
    pub fn constant_sl(z: &ComplexState) -> Self {
        Self::Constant(z.to_real().to_vec())
    }

    /// History that rotates rigidly on the uncoupled cycle:
    /// `z_j(t) = z_j(0) e^{iωt}` for `t < 0`.
    pub fn rotating_sl(z: &ComplexState, omega: f64) -> Self {
        let z0 = *z;
        Self::Function(Arc::new(move |t, x, dx| {
            let r = Complex64::from_polar(1.0, omega * t);
            let zt = z0.rotate(omega * t);
            x.copy_from_slice(&zt.to_real());
            let dz = ComplexState::new(
                Complex64::i() * omega * r * z0.z[0],
                Complex64::i() * omega * r * z0.z[1],
            );
            dx.copy_from_slice(&dz.to_real());
        }))
    }

    fn sample(&self, t: f64, x: &mut [f64], dx: &mut [f64]) -> Result<(), DdeError> {
        match self {
            Self::Constant(c) => {
                if c.len() != x.len() {
                    return Err(DdeError::HistoryDimension {
                        expected: x.len(),
                        got: c.len(),
                    });
                }
                x.copy_from_slice(c);
                dx.fill(0.0);
            }
            Self::Function(f) => f(t, x, dx),
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Record every `record_stride`-th step; the endpoints are always kept.
    pub record_stride: usize,
}

impl IntegratorConfig {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            record_stride: 1,
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride;
        self
    }

    /// Steps per delay for each lag; errors if a positive lag is not a whole
    /// number of steps.
    fn lag_steps(&self, lags: &[f64]) -> Result<Vec<usize>, DdeError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(DdeError::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(DdeError::InvalidConfig(format!(
                "t_end must be finite and nonnegative, got {}",
                self.t_end
            )));
        }
        if self.record_stride == 0 {
            return Err(DdeError::InvalidConfig("record_stride must be positive".into()));
        }
        lags.iter()
            .map(|&lag| {
                if lag == 0.0 {
                    return Ok(0);
                }
                let ratio = lag / self.dt;
                let steps = ratio.round();
                if steps < 1.0 || (ratio - steps).abs() > 1e-12 * ratio {
                    return Err(DdeError::StepMisaligned { delay: lag, dt: self.dt });
                }
                Ok(steps as usize)
            })
            .collect()
    }
}

/// Default step for a delay `tau`: at least 20 steps per delay and never more
/// than 0.01.
pub fn default_dt(tau: f64) -> f64 {
    if tau > 0.0 {
        tau / (tau / 0.01).ceil().max(20.0)
    } else {
        0.01
    }
}

/// Dense record of the recent past `[t_now − horizon, t_now]`.
///
/// Nodes carry the state and its one-sided derivatives; between nodes the
/// path is the cubic Hermite interpolant. Nodes older than the horizon are
/// overwritten in ring order.
#[derive(Debug, Clone)]
pub struct HistoryBuffer {
    dim: usize,
    horizon: f64,
    capacity: usize,
    // absolute index of the oldest node and node count
    first: i64,
    len: usize,
    times: Vec<f64>,
    // per slot: [x, dx_left, dx_right]
    data: Vec<f64>,
}

impl HistoryBuffer {
    /// Empty buffer for `capacity` nodes. The horizon is informational and
    /// used for range checks.
    pub fn new(dim: usize, capacity: usize, horizon: f64) -> Self {
        let capacity = capacity.max(1);
        Self {
            dim,
            horizon,
            capacity,
            first: 0,
            len: 0,
            times: vec![f64::NAN; capacity],
            data: vec![f64::NAN; capacity * 3 * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Time of the newest node.
    pub fn t_now(&self) -> f64 {
        self.times[self.slot(self.last_index())]
    }

    /// Time of the oldest retained node.
    pub fn t_start(&self) -> f64 {
        self.times[self.slot(self.first)]
    }

    fn last_index(&self) -> i64 {
        self.first + self.len as i64 - 1
    }

    #[inline]
    fn slot(&self, k: i64) -> usize {
        k.rem_euclid(self.capacity as i64) as usize
    }

    #[inline]
    fn block(&self, k: i64) -> &[f64] {
        let s = self.slot(k) * 3 * self.dim;
        &self.data[s..s + 3 * self.dim]
    }

    /// Appends a node with absolute index `first + len`, evicting the oldest
    /// node when full. Times must increase.
    pub fn push(&mut self, t: f64, x: &[f64], dx_left: &[f64], dx_right: &[f64]) {
        if self.len == self.capacity {
            self.first += 1;
            self.len -= 1;
        }
        let k = self.first + self.len as i64;
        let slot = self.slot(k);
        self.times[slot] = t;
        let d = self.dim;
        let s = slot * 3 * d;
        self.data[s..s + d].copy_from_slice(x);
        self.data[s + d..s + 2 * d].copy_from_slice(dx_left);
        self.data[s + 2 * d..s + 3 * d].copy_from_slice(dx_right);
        self.len += 1;
    }

    pub(crate) fn start_at(&mut self, first: i64) {
        debug_assert!(self.len == 0);
        self.first = first;
    }

    pub(crate) fn set_derivatives(&mut self, k: i64, left: Option<&[f64]>, right: &[f64]) {
        let d = self.dim;
        let s = self.slot(k) * 3 * d;
        if let Some(l) = left {
            self.data[s + d..s + 2 * d].copy_from_slice(l);
        }
        self.data[s + 2 * d..s + 3 * d].copy_from_slice(right);
    }

    /// State at absolute node index `k`.
    #[inline]
    pub fn node_state(&self, k: i64) -> &[f64] {
        &self.block(k)[..self.dim]
    }

    pub fn node_time(&self, k: i64) -> f64 {
        self.times[self.slot(k)]
    }

    /// Absolute index range of retained nodes.
    pub fn index_range(&self) -> std::ops::RangeInclusive<i64> {
        self.first..=self.last_index()
    }

    /// Hermite interpolation on `[t_k, t_{k+1}]` at fraction `theta`.
    #[inline]
    pub fn interpolate_into(&self, k: i64, theta: f64, out: &mut [f64]) {
        let d = self.dim;
        let h = self.node_time(k + 1) - self.node_time(k);
        let b0 = self.block(k);
        let b1 = self.block(k + 1);
        let (x0, d0) = (&b0[..d], &b0[2 * d..3 * d]);
        let (x1, d1) = (&b1[..d], &b1[d..2 * d]);
        let t2 = theta * theta;
        let t3 = t2 * theta;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = (t3 - 2.0 * t2 + theta) * h;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = (t3 - t2) * h;
        for i in 0..d {
            out[i] = h00 * x0[i] + h10 * d0[i] + h01 * x1[i] + h11 * d1[i];
        }
    }

    /// State at an arbitrary time inside the retained window. Exact at node
    /// times.
    pub fn query(&self, t: f64, out: &mut [f64]) -> Result<(), DdeError> {
        let (start, end) = (self.t_start(), self.t_now());
        if self.is_empty() || !(t >= start && t <= end) {
            return Err(DdeError::OutOfRange { t, start, end });
        }
        // largest node index with time <= t
        let (mut lo, mut hi) = (0usize, self.len - 1);
        while lo < hi {
            let mid = (lo + hi + 1) / 2;
            if self.node_time(self.first + mid as i64) <= t {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        let k = self.first + lo as i64;
        let tk = self.node_time(k);
        if tk == t || lo == self.len - 1 {
            out.copy_from_slice(self.node_state(k));
            return Ok(());
        }
        let theta = (t - tk) / (self.node_time(k + 1) - tk);
        self.interpolate_into(k, theta, out);
        Ok(())
    }
}

/// Recorded path of an integration run plus the final history window.
#[derive(Debug, Clone)]
pub struct Trajectory {
    dim: usize,
    times: Vec<f64>,
    states: Vec<f64>,
    history: HistoryBuffer,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory has at least the initial sample")
    }

    pub fn final_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    /// History window retained at the end of the run.
    pub fn history(&self) -> &HistoryBuffer {
        &self.history
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        self.times.iter().copied().zip(self.states.chunks_exact(self.dim))
    }

    /// Writes `t, re_z1, im_z1, re_z2, im_z2, psi` rows for SL-pair runs.
    pub fn write_sl_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        if self.dim != 4 {
            return Err(io::Error::new(
                io::ErrorKind::InvalidInput,
                "SL CSV export needs a 4-dimensional trajectory",
            ));
        }
        writeln!(w, "t,re_z1,im_z1,re_z2,im_z2,psi")?;
        for (t, x) in self.iter() {
            let psi = ComplexState::from_real(x).phase_difference();
            writeln!(w, "{t},{},{},{},{},{psi}", x[0], x[1], x[2], x[3])?;
        }
        Ok(())
    }
}

/// Whole steps, plus one shorter step if `t_end` is off-grid.
fn step_plan(config: &IntegratorConfig) -> (u64, Option<f64>) {
    let dt = config.dt;
    let ratio = config.t_end / dt;
    let mut n_full = ratio.round();
    if (ratio - n_full).abs() > 1e-9 * ratio.max(1.0) {
        n_full = ratio.floor();
    }
    let n_full = n_full as u64;
    let tail = config.t_end - n_full as f64 * dt;
    (n_full, if tail > 1e-12 * dt { Some(tail) } else { None })
}

/// Integrates `system` on `[0, t_end]` by the method of steps.
pub fn integrate<S: DelaySystem + ?Sized>(
    system: &S,
    history: &InitialHistory,
    config: &IntegratorConfig,
) -> Result<Trajectory, DdeError> {
    let dim = system.dim();
    let lags = system.lags();
    let lag_steps = config.lag_steps(lags)?;
    let dt = config.dt;
    let max_steps = lag_steps.iter().copied().max().unwrap_or(0);
    let horizon = lags.iter().copied().fold(0.0, f64::max);

    let (n_full, tail) = step_plan(config);

    let mut buf = HistoryBuffer::new(dim, max_steps + 2, horizon);
    buf.start_at(-(max_steps as i64));
    let mut x = vec![0.0; dim];
    let mut dxl = vec![0.0; dim];
    for k in -(max_steps as i64)..=0 {
        let t = k as f64 * dt;
        history.sample(t, &mut x, &mut dxl)?;
        buf.push(t, &x, &dxl, &dxl);
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(DdeError::NonFiniteState { t: 0.0 });
    }

    let mut times = vec![0.0];
    let mut states = x.clone();

    let n_lags = lags.len();
    let mut delayed = vec![0.0; n_lags * dim];
    let mut work = vec![0.0; system.work_len()];
    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut stage = vec![0.0; dim];

    let total_steps = n_full + tail.is_some() as u64;
    for n in 0..total_steps {
        let h = if n < n_full { dt } else { tail.unwrap_or(dt) };
        let ni = n as i64;

        // stage 1: delayed arguments are grid nodes
        for (l, &m) in lag_steps.iter().enumerate() {
            let dst = &mut delayed[l * dim..(l + 1) * dim];
            if m == 0 {
                dst.copy_from_slice(&x);
            } else {
                dst.copy_from_slice(buf.node_state(ni - m as i64));
            }
        }
        system.eval(&x, &delayed, &mut k1, &mut work);
        buf.set_derivatives(ni, (n > 0).then_some(&k1[..]), &k1);

        // stages 2 and 3 share the interpolated midpoint of the past
        let theta_mid = 0.5 * h / dt;
        fill_delayed(&buf, &lag_steps, ni, theta_mid, dim, &mut delayed);
        for i in 0..dim {
            stage[i] = x[i] + 0.5 * h * k1[i];
        }
        fill_current(&lag_steps, &stage, dim, &mut delayed);
        system.eval(&stage, &delayed, &mut k2, &mut work);
        for i in 0..dim {
            stage[i] = x[i] + 0.5 * h * k2[i];
        }
        fill_current(&lag_steps, &stage, dim, &mut delayed);
        system.eval(&stage, &delayed, &mut k3, &mut work);

        // stage 4
        let theta_end = h / dt;
        fill_delayed(&buf, &lag_steps, ni, theta_end, dim, &mut delayed);
        for i in 0..dim {
            stage[i] = x[i] + h * k3[i];
        }
        fill_current(&lag_steps, &stage, dim, &mut delayed);
        system.eval(&stage, &delayed, &mut k4, &mut work);

        for i in 0..dim {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let t = if n + 1 <= n_full {
            (n + 1) as f64 * dt
        } else {
            config.t_end
        };
        if !x.iter().all(|v| v.is_finite()) {
            return Err(DdeError::NonFiniteState { t });
        }
        // derivatives of the new node are filled in by the next stage 1
        buf.push(t, &x, &k4, &k4);

        let last = n + 1 == total_steps;
        if last || (n + 1) % config.record_stride as u64 == 0 {
            times.push(t);
            states.extend_from_slice(&x);
        }
    }

    // complete the derivative of the final node so the window is queryable
    let last = total_steps as i64;
    for (l, &m) in lag_steps.iter().enumerate() {
        let dst = &mut delayed[l * dim..(l + 1) * dim];
        if m == 0 || tail.is_some() {
            // off-grid final node: fall back to a general query
            if m == 0 {
                dst.copy_from_slice(&x);
            } else {
                let t_lag = config.t_end - lags[l];
                buf.query(t_lag, dst)?;
            }
        } else {
            dst.copy_from_slice(buf.node_state(last - m as i64));
        }
    }
    system.eval(&x, &delayed, &mut k1, &mut work);
    buf.set_derivatives(last, (total_steps > 0).then_some(&k1[..]), &k1);

    Ok(Trajectory {
        dim,
        times,
        states,
        history: buf,
    })
}

#[inline]
fn fill_delayed(
    buf: &HistoryBuffer,
    lag_steps: &[usize],
    n: i64,
    theta: f64,
    dim: usize,
    delayed: &mut [f64],
) {
    for (l, &m) in lag_steps.iter().enumerate() {
        if m == 0 {
            continue;
        }
        let dst = &mut delayed[l * dim..(l + 1) * dim];
        let k = n - m as i64;
        if theta == 1.0 {
            dst.copy_from_slice(buf.node_state(k + 1));
        } else {
            buf.interpolate_into(k, theta, dst);
        }
    }
}

#[inline]
fn fill_current(lag_steps: &[usize], stage: &[f64], dim: usize, delayed: &mut [f64]) {
    for (l, &m) in lag_steps.iter().enumerate() {
        if m == 0 {
            delayed[l * dim..(l + 1) * dim].copy_from_slice(stage);
        }
    }
}

/// Integrates the SL pair from a constant history equal to `initial` with the
/// default step, keeping only the endpoint.
///
/// Same scheme and arithmetic as [`integrate`] with [`SlPair`], specialised
/// to fixed-size state so long sweeps do not pay for the general path.
pub fn integrate_sl(params: &SLParams, initial: &ComplexState, t_end: f64) -> Result<ComplexState, DdeError> {
    let config = IntegratorConfig::new(default_dt(params.tau), t_end);
    let m = config.lag_steps(&[params.tau])?[0];
    let (n_full, tail) = step_plan(&config);
    let dt = config.dt;
    let sys = SlPair::new(*params);
    let eval = |x: &[f64; 4], d: &[f64; 4], out: &mut [f64; 4]| sys.eval(x, d, out, &mut []);

    // ring of m + 2 nodes: state, left and right derivative, time
    let cap = m as i64 + 2;
    let slot = |k: i64| k.rem_euclid(cap) as usize;
    let mut xs = vec![[0.0; 4]; cap as usize];
    let mut dl = vec![[0.0; 4]; cap as usize];
    let mut dr = vec![[0.0; 4]; cap as usize];
    let mut ts = vec![0.0; cap as usize];
    let mut x = initial.to_real();
    if !x.iter().all(|v| v.is_finite()) {
        return Err(DdeError::NonFiniteState { t: 0.0 });
    }
    for k in -(m as i64)..=0 {
        let s = slot(k);
        xs[s] = x;
        ts[s] = k as f64 * dt;
    }
    let hermite = |xs: &[[f64; 4]], dl: &[[f64; 4]], dr: &[[f64; 4]], ts: &[f64], s0: usize, theta: f64| {
        let s1 = if s0 + 1 == cap as usize { 0 } else { s0 + 1 };
        if theta == 1.0 {
            return xs[s1];
        }
        let h = ts[s1] - ts[s0];
        let t2 = theta * theta;
        let t3 = t2 * theta;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = (t3 - 2.0 * t2 + theta) * h;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = (t3 - t2) * h;
        let mut out = [0.0; 4];
        for i in 0..4 {
            out[i] = h00 * xs[s0][i] + h10 * dr[s0][i] + h01 * xs[s1][i] + h11 * dl[s1][i];
        }
        out
    };

    let (mut k1, mut k2, mut k3, mut k4) = ([0.0; 4], [0.0; 4], [0.0; 4], [0.0; 4]);
    let mut stage = [0.0; 4];
    let total_steps = n_full + tail.is_some() as u64;
    // slots of the node one delay back and of the current node
    let next = |s: usize| if s + 1 == cap as usize { 0 } else { s + 1 };
    let (mut sk, mut s) = (slot(-(m as i64)), slot(0));
    for n in 0..total_steps {
        let h = if n < n_full { dt } else { tail.unwrap_or(dt) };

        let d1 = if m == 0 { x } else { xs[sk] };
        eval(&x, &d1, &mut k1);
        if n > 0 {
            dl[s] = k1;
        }
        dr[s] = k1;

        let mid = if m == 0 { None } else { Some(hermite(&xs, &dl, &dr, &ts, sk, 0.5 * h / dt)) };
        for i in 0..4 {
            stage[i] = x[i] + 0.5 * h * k1[i];
        }
        eval(&stage, &mid.unwrap_or(stage), &mut k2);
        for i in 0..4 {
            stage[i] = x[i] + 0.5 * h * k2[i];
        }
        eval(&stage, &mid.unwrap_or(stage), &mut k3);

        for i in 0..4 {
            stage[i] = x[i] + h * k3[i];
        }
        let end = if m == 0 { stage } else { hermite(&xs, &dl, &dr, &ts, sk, h / dt) };
        eval(&stage, &end, &mut k4);

        for i in 0..4 {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let t = if n + 1 <= n_full { (n + 1) as f64 * dt } else { config.t_end };
        if !x.iter().all(|v| v.is_finite()) {
            return Err(DdeError::NonFiniteState { t });
        }
        s = next(s);
        sk = next(sk);
        xs[s] = x;
        dl[s] = k4;
        dr[s] = k4;
        ts[s] = t;
    }
    Ok(ComplexState::from_real(&x))
}

/// Final phase difference `arg(z1 conj z2)` in `(−π, π]` after `t_end`.
pub fn integrate_to_phase_difference(
    params: &SLParams,
    initial: &ComplexState,
    t_end: f64,
) -> Result<f64, DdeError> {
    if !(t_end > 0.0) {
        return Err(DdeError::InvalidConfig(format!("horizon must be positive, got {t_end}")));
    }
    Ok(integrate_sl(params, initial, t_end)?.phase_difference())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::as_network_spec;
    use std::f64::consts::PI;

    #[test]
    fn specialised_sl_path_matches_general_integrator_bitwise() {
        let cases = [
            (0.3, 1.0, 50.0),
            (-2.0, 0.0, 13.37),
            (1.1, 0.37, 20.0),
            (0.0, 2.0 * PI, 30.004),
            (2.5, 0.005, 7.0),
        ];
        for (rho, tau, t_end) in cases {
            let p = SLParams::new(1.3, -0.8, rho, 0.2, tau).unwrap();
            let ic = ComplexState::from_polar(0.9, 0.2, -2.5);
            let fast = integrate_sl(&p, &ic, t_end).unwrap();
            let cfg = IntegratorConfig::new(default_dt(tau), t_end);
            let slow = integrate(&SlPair::new(p), &InitialHistory::constant_sl(&ic), &cfg).unwrap();
            assert_eq!(fast.to_real().as_slice(), slow.final_state(), "rho={rho} tau={tau}");
        }
    }

    /// z' = −z(t − 1) as a one-dimensional delay system.
    struct NegativeFeedback([f64; 1]);

    impl DelaySystem for NegativeFeedback {
        fn dim(&self) -> usize {
            1
        }
        fn lags(&self) -> &[f64] {
            &self.0
        }
        fn eval(&self, _x: &[f64], delayed: &[f64], out: &mut [f64], _w: &mut [f64]) {
            out[0] = -delayed[0];
        }
    }

    // method of steps by hand: 1 − t on [0, 1], t²/2 − 2t + 3/2 on [1, 2]
    fn exact(t: f64) -> f64 {
        if t <= 1.0 {
            1.0 - t
        } else {
            t * t / 2.0 - 2.0 * t + 1.5
        }
    }

    #[test]
    fn scalar_dde_matches_piecewise_polynomial() {
        let traj = integrate(
            &NegativeFeedback([1.0]),
            &InitialHistory::Constant(vec![1.0]),
            &IntegratorConfig::new(0.01, 2.0),
        )
        .unwrap();
        let at = |t: f64| {
            let i = traj.times().iter().position(|&s| (s - t).abs() < 1e-12).unwrap();
            traj.state(i)[0]
        };
        assert!((at(1.0) - 0.0).abs() <= 1e-8);
        assert!((at(2.0) + 0.5).abs() <= 1e-8);
        for (t, x) in traj.iter() {
            assert!((x[0] - exact(t)).abs() <= 1e-8, "t={t}");
        }
    }

    #[test]
    fn misaligned_step_is_rejected() {
        let err = integrate(
            &NegativeFeedback([1.0]),
            &InitialHistory::Constant(vec![1.0]),
            &IntegratorConfig::new(0.03, 2.0),
        )
        .unwrap_err();
        assert!(matches!(err, DdeError::StepMisaligned { .. }));
    }

    #[test]
    fn blow_up_is_reported() {
        struct Explode([f64; 1]);
        impl DelaySystem for Explode {
            fn dim(&self) -> usize {
                1
            }
            fn lags(&self) -> &[f64] {
                &self.0
            }
            fn eval(&self, x: &[f64], _d: &[f64], out: &mut [f64], _w: &mut [f64]) {
                out[0] = x[0] * x[0];
            }
        }
        let err = integrate(
            &Explode([0.0]),
            &InitialHistory::Constant(vec![1.0]),
            &IntegratorConfig::new(0.01, 5.0),
        )
        .unwrap_err();
        assert!(matches!(err, DdeError::NonFiniteState { .. }));
    }

    #[test]
    fn history_dimension_is_checked() {
        let err = integrate(
            &NegativeFeedback([1.0]),
            &InitialHistory::Constant(vec![1.0, 2.0]),
            &IntegratorConfig::new(0.01, 1.0),
        )
        .unwrap_err();
        assert!(matches!(err, DdeError::HistoryDimension { .. }));
    }

    #[test]
    fn default_dt_resolves_delay() {
        assert_eq!(default_dt(0.0), 0.01);
        assert!((default_dt(0.1) - 0.005).abs() < 1e-15);
        let tau = 3.0 * PI;
        let dt = default_dt(tau);
        assert!(dt <= 0.01);
        let r = tau / dt;
        assert!((r - r.round()).abs() <= 1e-12 * r);
    }

    #[test]
    fn off_grid_end_time_lands_exactly() {
        let traj = integrate(
            &NegativeFeedback([1.0]),
            &InitialHistory::Constant(vec![1.0]),
            &IntegratorConfig::new(0.01, 0.505),
        )
        .unwrap();
        assert_eq!(traj.final_time(), 0.505);
        assert!((traj.final_state()[0] - exact(0.505)).abs() < 1e-10);
    }

    #[test]
    fn buffer_keeps_one_horizon_and_queries_nodes_exactly() {
        let traj = integrate(
            &NegativeFeedback([1.0]),
            &InitialHistory::Constant(vec![1.0]),
            &IntegratorConfig::new(0.01, 2.0),
        )
        .unwrap();
        let h = traj.history();
        assert!((h.t_now() - 2.0).abs() < 1e-12);
        assert!(h.t_start() <= h.t_now() - h.horizon() + 1e-12);
        for k in h.index_range() {
            let mut out = [0.0];
            h.query(h.node_time(k), &mut out).unwrap();
            assert_eq!(out[0], h.node_state(k)[0]);
        }
        for (t, x) in traj.iter().filter(|(t, _)| *t >= h.t_start()) {
            let mut out = [0.0];
            h.query(t, &mut out).unwrap();
            assert_eq!(out[0], x[0]);
        }
        let mut out = [0.0];
        assert!(h.query(0.5, &mut out).is_err());
        // mid-node queries follow the smooth solution
        h.query(1.5051, &mut out).unwrap();
        assert!((out[0] - exact(1.5051)).abs() < 1e-8);
    }

    #[test]
    fn uncoupled_pair_stays_on_cycle() {
        let p = SLParams::new(1.7, 1.0, 0.4, 0.0, 2.0).unwrap();
        let z0 = ComplexState::from_polar(p.radius(), 0.3, 2.0);
        let config = IntegratorConfig::new(default_dt(p.tau), 100.0).with_stride(50);
        let traj = integrate(&SlPair::new(p), &InitialHistory::constant_sl(&z0), &config).unwrap();
        for (_, x) in traj.iter() {
            let z = ComplexState::from_real(x);
            for zj in z.z {
                assert!((zj.norm() - p.radius()).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn in_phase_data_stays_in_phase() {
        let p = SLParams::new(1.0, 1.0, 0.7, 0.3, 1.3).unwrap();
        let z0 = ComplexState::from_polar(0.8, 0.4, 0.4);
        let config = IntegratorConfig::new(default_dt(p.tau), 50.0).with_stride(7);
        let traj = integrate(&SlPair::new(p), &InitialHistory::constant_sl(&z0), &config).unwrap();
        for (_, x) in traj.iter() {
            assert_eq!(x[0], x[2]);
            assert_eq!(x[1], x[3]);
        }
    }

    #[test]
    fn network_spec_and_direct_pair_agree() {
        let p = SLParams::new(1.2, 0.9, -0.6, 0.2, 0.8).unwrap();
        let z0 = ComplexState::from_polar(1.0, 0.0, 1.0);
        let config = IntegratorConfig::new(default_dt(p.tau), 30.0);
        let hist = InitialHistory::constant_sl(&z0);
        let a = integrate(&SlPair::new(p), &hist, &config).unwrap();
        let b = integrate(&as_network_spec(&p), &hist, &config).unwrap();
        assert_eq!(a.len(), b.len());
        for i in 0..a.len() {
            for j in 0..4 {
                assert!((a.state(i)[j] - b.state(i)[j]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn zero_delay_bypasses_the_buffer() {
        let p = SLParams::new(1.0, 1.0, 0.0, 0.1, 0.0).unwrap();
        let z0 = ComplexState::from_polar(1.0, 0.0, 0.5);
        let traj = integrate(
            &SlPair::new(p),
            &InitialHistory::constant_sl(&z0),
            &IntegratorConfig::new(0.01, 1.0),
        )
        .unwrap();
        assert_eq!(traj.history().len(), 2);
        assert!(traj.final_state().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn uncoupled_phase_difference_is_conserved() {
        for &(tau, rho) in &[(0.0, 0.0), (1.0, 2.0), (4.3, -1.0)] {
            let p = SLParams::new(1.0, 1.0, rho, 0.0, tau).unwrap();
            let z0 = ComplexState::from_polar(1.0, 0.0, 0.01);
            let psi = integrate_to_phase_difference(&p, &z0, 1000.0).unwrap();
            assert!((psi + 0.01).abs() <= 1e-9, "psi = {psi}");
        }
    }

    #[test]
    fn rotating_history_matches_constant_at_origin() {
        let z0 = ComplexState::from_polar(1.0, 0.2, -0.4);
        let h = InitialHistory::rotating_sl(&z0, 1.0);
        let (mut x, mut dx) = ([0.0; 4], [0.0; 4]);
        h.sample(0.0, &mut x, &mut dx).unwrap();
        assert_eq!(ComplexState::from_real(&x), z0);
        h.sample(-PI, &mut x, &mut dx).unwrap();
        assert!(ComplexState::from_real(&x).max_abs_diff(&z0.rotate(PI)) < 1e-15);
    }

    #[test]
    fn sl_csv_has_header_and_rows() {
        let p = SLParams::new(1.0, 1.0, 0.0, 0.1, 0.5).unwrap();
        let z0 = ComplexState::from_polar(1.0, 0.0, 0.2);
        let traj = integrate(
            &SlPair::new(p),
            &InitialHistory::constant_sl(&z0),
            &IntegratorConfig::new(0.01, 1.0).with_stride(10),
        )
        .unwrap();
        let mut out = Vec::new();
        traj.write_sl_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,re_z1,im_z1,re_z2,im_z2,psi"));
        assert_eq!(lines.count(), traj.len());
        assert_eq!(traj.len(), 11);
    }
}
