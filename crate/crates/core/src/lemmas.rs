//! Checks of the negativity-probability machinery for the discretized CIR
//! process: the auxiliary sequences `c_j`, `a_j`, the constant `c`, the
//! plug-in bound `c (dt/eps)^{nu (1 - eps)}`, and Monte Carlo estimates of
//! `P(Z_t <= 0)` at mid-step times. Also the empirical increment and moment
//! statistics of the schemes.

use crate::engine::{pairwise_sum, run_chunks, EngineConfig};
use crate::error::{Error, Result};
use crate::model::{GridSpec, HestonParams};
use crate::rng::{derive_seed, GaussianStream, SeedSpec};
use crate::scheme::{PathState, SchemeKind, Stepper};

/// Tag mixed into the master seed for the Brownian-bridge midpoint draws.
const BRIDGE_STREAM_TAG: u64 = 0x6272_6964_6765; // "bridge"

/// The epsilon grid {0.05, 0.10, ..., 0.50}.
pub fn epsilon_grid() -> Vec<f64> {
    (1..=10).map(|i| i as f64 * 0.05).collect()
}

fn check_lemma_preconditions(params: &HestonParams, n_steps: usize, epsilon: Option<f64>) -> Result<f64> {
    params.validate()?;
    if n_steps == 0 {
        return Err(Error::Precondition("number of steps N must be >= 1".into()));
    }
    let dt = params.maturity / n_steps as f64;
    if params.kappa * dt >= 1.0 {
        return Err(Error::Precondition(format!(
            "step dt = {dt} must be below 1/kappa = {} (N = {n_steps})",
            1.0 / params.kappa
        )));
    }
    if let Some(eps) = epsilon {
        if !(eps > 0.0 && eps <= 0.5) {
            return Err(Error::Precondition(format!("epsilon must lie in (0, 1/2], got {eps}")));
        }
    }
    Ok(dt)
}

/// `alpha_N = (1 - kappa dt) / 2`.
pub fn alpha_n(params: &HestonParams, n_steps: usize) -> f64 {
    0.5 * (1.0 - params.kappa * params.maturity / n_steps as f64)
}

/// The sequences `c_j` and `a_j` for `j = 0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceTrace {
    pub alpha_n: f64,
    pub c: Vec<f64>,
    pub a: Vec<f64>,
    pub epsilon: f64,
    pub delta_t: f64,
    // gap alpha_N - c_j, kept separately because it is what the recursion
    // actually propagates; includes j = N + 1
    gaps: Vec<f64>,
    sigma: f64,
}

/// Builds `c_0 = alpha`, `c_1 = alpha - alpha^2`,
/// `c_{j+1} = c_j^2 + alpha - alpha^2` and `a_j = 2 (alpha - c_j) / (sigma^2 dt)`.
///
/// The recursion is carried on the gap `delta_j = alpha - c_j`, which obeys
/// `delta_{j+1} = delta_j (2 alpha - delta_j)` and stays exactly nonnegative
/// in floating point.
pub fn build_sequence(params: &HestonParams, n_steps: usize, epsilon: f64) -> Result<SequenceTrace> {
    let dt = check_lemma_preconditions(params, n_steps, Some(epsilon))?;
    let alpha = alpha_n(params, n_steps);
    let mut gaps = Vec::with_capacity(n_steps + 2);
    gaps.push(0.0);
    gaps.push(alpha * alpha);
    while gaps.len() < n_steps + 2 {
        let d = *gaps.last().unwrap();
        gaps.push(d * (2.0 * alpha - d));
    }
    let scale = 2.0 / (params.sigma * params.sigma * dt);
    let c = gaps[..=n_steps].iter().map(|g| alpha - g).collect();
    let a = gaps[..=n_steps].iter().map(|g| scale * g).collect();
    Ok(SequenceTrace {
        alpha_n: alpha,
        c,
        a,
        epsilon,
        delta_t: dt,
        gaps,
        sigma: params.sigma,
    })
}

impl SequenceTrace {
    pub fn n_steps(&self) -> usize {
        self.c.len() - 1
    }

    /// `1 - alpha - eps (1 - eps) / (1 + eps (j - 1))`, for `j >= 1`.
    pub fn upper_bound(&self, j: usize) -> f64 {
        let eps = self.epsilon;
        1.0 - self.alpha_n - eps * (1.0 - eps) / (1.0 + eps * (j as f64 - 1.0))
    }

    /// `max_{1<=j<=N} (c_j - bound_j)`; the bound holds iff this is <= 0.
    pub fn max_bound_excess(&self) -> f64 {
        (1..self.c.len())
            .map(|j| self.c[j] - self.upper_bound(j))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max_j (c_j - alpha_N)`; should be <= 0.
    pub fn max_excess_over_alpha(&self) -> f64 {
        self.c.iter().map(|c| c - self.alpha_n).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_a(&self) -> f64 {
        self.a.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `max_j |c_{j+1} - (c_j^2 + alpha - alpha^2)|` for `j >= 1`.
    pub fn recursion_residual(&self) -> f64 {
        let alpha = self.alpha_n;
        self.c
            .windows(2)
            .skip(1)
            .map(|w| (w[1] - (w[0] * w[0] + alpha - alpha * alpha)).abs())
            .fold(0.0, f64::max)
    }

    fn a_extended(&self, j: usize) -> f64 {
        2.0 * self.gaps[j] / (self.sigma * self.sigma * self.delta_t)
    }

    /// `exp(-kappa theta sum_{j=0}^{k-1} a_{j+1} dt) exp(-v0 a_{k+1})`, the
    /// quantity dominated by the plug-in bound, for `k = 1..=N`.
    pub fn chain_terms(&self, params: &HestonParams) -> Vec<f64> {
        let n = self.n_steps();
        let kt = params.kappa * params.theta * self.delta_t;
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(n);
        for k in 1..=n {
            acc += self.a_extended(k);
            out.push((-kt * acc - params.v0 * self.a_extended(k + 1)).exp());
        }
        out
    }
}

/// `exp(kappa (nu T + 2 v0 / sigma^2)) * max{1, sigma^2 nu / (v0 e)}^nu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConstant {
    pub value: f64,
}

pub fn bound_constant(params: &HestonParams) -> BoundConstant {
    let nu = params.feller();
    let s2 = params.sigma * params.sigma;
    let growth = (params.kappa * (nu * params.maturity + 2.0 * params.v0 / s2)).exp();
    let ratio = (s2 * nu / (params.v0 * std::f64::consts::E)).max(1.0);
    BoundConstant {
        value: growth * ratio.powf(nu),
    }
}

/// `c (dt / eps)^{nu (1 - eps)}`.
pub fn negativity_bound(params: &HestonParams, n_steps: usize, epsilon: f64) -> Result<f64> {
    let dt = check_lemma_preconditions(params, n_steps, Some(epsilon))?;
    let nu = params.feller();
    Ok(bound_constant(params).value * (dt / epsilon).powf(nu * (1.0 - epsilon)))
}

/// Smallest plug-in bound over [`epsilon_grid`], returned as `(eps, bound)`.
pub fn tightest_negativity_bound(params: &HestonParams, n_steps: usize) -> Result<(f64, f64)> {
    let mut best = (f64::NAN, f64::INFINITY);
    for eps in epsilon_grid() {
        let b = negativity_bound(params, n_steps, eps)?;
        if b < best.1 {
            best = (eps, b);
        }
    }
    Ok(best)
}

/// Monte Carlo frequency of `{Z <= 0}` at the mid-step time `t_k + dt/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegativityPoint {
    pub k: usize,
    pub p_hat: f64,
    pub std_error: f64,
    /// Sample mean of `exp(-v_k (1 - kappa dt)^2 / (2 sigma^2 dt))`, the
    /// Gaussian-tail bound on `P(Z <= 0)`.
    pub tail_bound: f64,
}

/// Estimates `P(Z_{t_k + dt/2} <= 0)` for `k = 0..N-1`.
///
/// The grid path is exactly the one [`crate::scheme::simulate_terminal`]
/// produces. The midpoint Brownian increment is sampled from the bridge
/// `W_mid - W_k = dW_k / 2 + sqrt(dt) / 2 * zeta` with `zeta` drawn from an
/// independent stream, so it is consistent with the full-step increment.
pub fn estimate_negativity(
    kind: SchemeKind,
    params: &HestonParams,
    n_steps: usize,
    n_samples: u64,
    master_seed: u64,
    cfg: &EngineConfig,
) -> Result<Vec<NegativityPoint>> {
    let dt = check_lemma_preconditions(params, n_steps, None)?;
    if n_samples < 2 {
        return Err(Error::Precondition("sample count M must be >= 2".into()));
    }
    let grid = GridSpec::new(params.maturity, n_steps)?;
    let stepper = Stepper::new(kind, params, &grid);
    let bridge_seed = derive_seed(master_seed, BRIDGE_STREAM_TAG);
    let half = 0.5 * dt;
    let tail_coef = (1.0 - params.kappa * dt).powi(2) / (2.0 * params.sigma * params.sigma * dt);

    struct Chunk {
        hits: Vec<u64>,
        tail_sums: Vec<f64>,
    }

    let run = run_chunks(n_samples, cfg, |range| {
        let mut hits = vec![0u64; n_steps];
        let mut tail_sums = vec![0.0; n_steps];
        for j in range {
            let mut stream = GaussianStream::new(SeedSpec::new(master_seed, j));
            let mut bridge = GaussianStream::new(SeedSpec::new(bridge_seed, j));
            let mut state = PathState::initial(params);
            for k in 0..n_steps {
                let (xi1, xi2) = stream.next_pair();
                let (zeta, _) = bridge.next_pair();
                let dw = stepper.sqrt_dt() * xi1;
                let dw_mid = 0.5 * dw + 0.5 * stepper.sqrt_dt() * zeta;
                let v = state.v;
                let z_mid = v + params.kappa * (params.theta - v) * half + params.sigma * v.sqrt() * dw_mid;
                if z_mid <= 0.0 {
                    hits[k] += 1;
                }
                tail_sums[k] += (-v * tail_coef).exp();
                stepper.advance(&mut state, xi1, xi2);
            }
        }
        Ok(Chunk { hits, tail_sums })
    })?;
    if !run.complete {
        return Err(Error::Precondition("negativity estimate cut short by the resource budget".into()));
    }

    let m = n_samples as f64;
    Ok((0..n_steps)
        .map(|k| {
            let hits: u64 = run.results.iter().map(|c| c.hits[k]).sum();
            let tails: Vec<f64> = run.results.iter().map(|c| c.tail_sums[k]).collect();
            let p_hat = hits as f64 / m;
            NegativityPoint {
                k,
                p_hat,
                std_error: (p_hat * (1.0 - p_hat) / m).sqrt(),
                tail_bound: pairwise_sum(&tails) / m,
            }
        })
        .collect())
}

/// Per-step empirical moments of one scheme on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementMoments {
    pub n_steps: usize,
    pub delta_t: f64,
    /// `E|v_{k+1} - v_k|^2`, `k = 0..N-1`.
    pub sq_dv: Vec<f64>,
    /// `E|x_{k+1} - x_k|^2`.
    pub sq_dx: Vec<f64>,
    /// `E[v_k^4]`, `k = 0..=N`.
    pub v4: Vec<f64>,
}

impl IncrementMoments {
    pub fn max_sq_dv(&self) -> f64 {
        self.sq_dv.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_sq_dx(&self) -> f64 {
        self.sq_dx.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_v4(&self) -> f64 {
        self.v4.iter().copied().fold(0.0, f64::max)
    }
}

pub fn increment_moments(
    kind: SchemeKind,
    params: &HestonParams,
    n_steps: usize,
    n_samples: u64,
    master_seed: u64,
    cfg: &EngineConfig,
) -> Result<IncrementMoments> {
    params.validate()?;
    if n_samples < 2 {
        return Err(Error::Precondition("sample count M must be >= 2".into()));
    }
    let grid = GridSpec::new(params.maturity, n_steps)?;
    let stepper = Stepper::new(kind, params, &grid);

    let run = run_chunks(n_samples, cfg, |range| {
        let mut dv = vec![0.0; n_steps];
        let mut dx = vec![0.0; n_steps];
        let mut v4 = vec![0.0; n_steps + 1];
        for j in range {
            let mut stream = GaussianStream::new(SeedSpec::new(master_seed, j));
            let mut state = PathState::initial(params);
            v4[0] += state.v.powi(4);
            for k in 0..n_steps {
                let prev = state;
                let (xi1, xi2) = stream.next_pair();
                stepper.advance(&mut state, xi1, xi2);
                dv[k] += (state.v - prev.v).powi(2);
                dx[k] += (state.x - prev.x).powi(2);
                v4[k + 1] += state.v.powi(4);
            }
        }
        Ok([dv, dx, v4])
    })?;
    if !run.complete {
        return Err(Error::Precondition("moment estimate cut short by the resource budget".into()));
    }

    let m = n_samples as f64;
    let reduce = |which: usize, len: usize| -> Vec<f64> {
        (0..len)
            .map(|k| {
                let parts: Vec<f64> = run.results.iter().map(|c| c[which][k]).collect();
                pairwise_sum(&parts) / m
            })
            .collect()
    };
    Ok(IncrementMoments {
        n_steps,
        delta_t: grid.dt(),
        sq_dv: reduce(0, n_steps),
        sq_dx: reduce(1, n_steps),
        v4: reduce(2, n_steps + 1),
    })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let k = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
