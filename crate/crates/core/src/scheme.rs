//! Symmetrized and absorbed Euler updates for the variance, and the Euler
//! update of the log-price.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{GridSpec, HestonParams};
use crate::rng::{GaussianStream, SeedSpec};

/// How a negative intermediate variance is repaired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    /// Reflect: `v_{k+1} = |z|`.
    Symmetrized,
    /// Absorb: `v_{k+1} = max(z, 0)`.
    Absorbed,
}

impl SchemeKind {
    pub const BOTH: [SchemeKind; 2] = [SchemeKind::Symmetrized, SchemeKind::Absorbed];

    pub fn short_name(self) -> &'static str {
        match self {
            SchemeKind::Symmetrized => "sym",
            SchemeKind::Absorbed => "abs",
        }
    }

    #[inline(always)]
    pub fn fix(self, z: f64) -> f64 {
        match self {
            SchemeKind::Symmetrized => z.abs(),
            SchemeKind::Absorbed => z.max(0.0),
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for SchemeKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sym" | "se" | "symmetrized" => Ok(SchemeKind::Symmetrized),
            "abs" | "ae" | "absorbed" => Ok(SchemeKind::Absorbed),
            other => Err(format!("unknown scheme '{other}' (valid: sym, abs)")),
        }
    }
}

/// State of one discretized path after `k` steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathState {
    pub x: f64,
    pub v: f64,
    pub k: usize,
}

impl PathState {
    pub fn initial(params: &HestonParams) -> Self {
        Self {
            x: params.s0.ln(),
            v: params.v0,
            k: 0,
        }
    }
}

/// The affine one-step variance update before the sign repair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZValue {
    pub z: f64,
}

impl ZValue {
    pub fn repaired(self, kind: SchemeKind) -> f64 {
        kind.fix(self.z)
    }
}

#[inline(always)]
fn affine_update(v: f64, params: &HestonParams, dt: f64, dw: f64) -> f64 {
    v + params.kappa * (params.theta - v) * dt + params.sigma * v.sqrt() * dw
}

/// `z = v + kappa (theta - v) dt_partial + sigma sqrt(v) dW`.
// negated comparisons also reject NaN
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn compute_z(v: f64, params: &HestonParams, dt_partial: f64, dw: f64) -> Result<ZValue> {
    if !(v >= 0.0) {
        return Err(Error::Precondition(format!("variance must be >= 0, got {v}")));
    }
    if !(dt_partial > 0.0) {
        return Err(Error::Precondition(format!(
            "partial step must be > 0, got {dt_partial}"
        )));
    }
    Ok(ZValue {
        z: affine_update(v, params, dt_partial, dw),
    })
}

pub fn step_variance(
    kind: SchemeKind,
    v: f64,
    params: &HestonParams,
    dt: f64,
    dw: f64,
) -> Result<f64> {
    Ok(compute_z(v, params, dt, dw)?.repaired(kind))
}

/// Euler step of the log-price, driven by the same `dW` as the variance step
/// that starts from `v_k`.
#[inline]
pub fn step_logprice(x: f64, v_k: f64, params: &HestonParams, dt: f64, dw: f64, db: f64) -> f64 {
    let rho_bar = (1.0 - params.rho * params.rho).max(0.0).sqrt();
    x + (params.r - 0.5 * v_k) * dt + v_k.sqrt() * (params.rho * dw + rho_bar * db)
}

/// Precomputed per-grid constants for the hot loop.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Stepper {
    kind: SchemeKind,
    kappa_dt: f64,
    kappa_theta_dt: f64,
    sigma: f64,
    r_dt: f64,
    half_dt: f64,
    rho: f64,
    rho_bar: f64,
    sqrt_dt: f64,
}

impl Stepper {
    pub(crate) fn new(kind: SchemeKind, params: &HestonParams, grid: &GridSpec) -> Self {
        let dt = grid.dt();
        Self {
            kind,
            kappa_dt: params.kappa * dt,
            kappa_theta_dt: params.kappa * params.theta * dt,
            sigma: params.sigma,
            r_dt: params.r * dt,
            half_dt: 0.5 * dt,
            rho: params.rho,
            rho_bar: (1.0 - params.rho * params.rho).max(0.0).sqrt(),
            sqrt_dt: dt.sqrt(),
        }
    }

    pub(crate) fn sqrt_dt(&self) -> f64 {
        self.sqrt_dt
    }

    /// Advances `(x, v)` one step from standard normals `(xi1, xi2)`.
    /// Returns the pre-repair `z` alongside.
    #[inline(always)]
    pub(crate) fn advance(&self, state: &mut PathState, xi1: f64, xi2: f64) -> f64 {
        let dw = self.sqrt_dt * xi1;
        let db = self.sqrt_dt * xi2;
        let v = state.v;
        let sv = v.sqrt();
        let z = v + (self.kappa_theta_dt - self.kappa_dt * v) + self.sigma * sv * dw;
        state.x += self.r_dt - self.half_dt * v + sv * (self.rho * dw + self.rho_bar * db);
        state.v = self.kind.fix(z);
        state.k += 1;
        debug_assert!(state.v >= 0.0);
        z
    }
}

/// Simulates one path of `N` steps with normals drawn from `seed`'s stream,
/// step `k` consuming `gaussian_pair(seed, k)`. Returns `(x_N, v_N)`.
pub fn simulate_terminal(
    kind: SchemeKind,
    params: &HestonParams,
    grid: &GridSpec,
    seed: SeedSpec,
) -> (f64, f64) {
    let stepper = Stepper::new(kind, params, grid);
    let mut stream = GaussianStream::new(seed);
    let mut state = PathState::initial(params);
    for _ in 0..grid.n_steps() {
        let (xi1, xi2) = stream.next_pair();
        stepper.advance(&mut state, xi1, xi2);
    }
    (state.x, state.v)
}

/// Same as [`simulate_terminal`] but with caller-supplied normals; used to
/// force deterministic inputs.
pub fn simulate_with_normals(
    kind: SchemeKind,
    params: &HestonParams,
    grid: &GridSpec,
    normals: impl IntoIterator<Item = (f64, f64)>,
) -> Vec<PathState> {
    let stepper = Stepper::new(kind, params, grid);
    let mut state = PathState::initial(params);
    let mut path = Vec::with_capacity(grid.n_steps() + 1);
    path.push(state);
    for (xi1, xi2) in normals.into_iter().take(grid.n_steps()) {
        stepper.advance(&mut state, xi1, xi2);
        path.push(state);
    }
    path
}

/// Full path `(x_k, v_k)`, `k = 0..=N`.
pub fn simulate_path(
    kind: SchemeKind,
    params: &HestonParams,
    grid: &GridSpec,
    seed: SeedSpec,
) -> Vec<PathState> {
    let mut stream = GaussianStream::new(seed);
    simulate_with_normals(
        kind,
        params,
        grid,
        std::iter::from_fn(move || Some(stream.next_pair())),
    )
}
