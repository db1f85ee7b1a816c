//! Model parameters, the equidistant time grid, payoffs, and the closed-form
//! CIR moments used as analytic references for smooth functionals.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Parameters of the log-Heston model
///
/// ```text
/// dX = (r - V/2) dt + sqrt(V) (rho dW + sqrt(1 - rho^2) dB)
/// dV = kappa (theta - V) dt + sigma sqrt(V) dW
/// ```
///
/// The drift of the log-price is the risk-free rate `r`, matching the
/// discounting applied by the payoffs. `strike` only matters to payoffs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HestonParams {
    pub s0: f64,
    pub v0: f64,
    pub kappa: f64,
    pub theta: f64,
    pub sigma: f64,
    pub rho: f64,
    pub r: f64,
    pub maturity: f64,
    pub strike: f64,
}

impl HestonParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        s0: f64,
        v0: f64,
        kappa: f64,
        theta: f64,
        sigma: f64,
        rho: f64,
        r: f64,
        maturity: f64,
        strike: f64,
    ) -> Result<Self> {
        let p = Self {
            s0,
            v0,
            kappa,
            theta,
            sigma,
            rho,
            r,
            maturity,
            strike,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("s0", self.s0),
            ("v0", self.v0),
            ("kappa", self.kappa),
            ("theta", self.theta),
            ("sigma", self.sigma),
            ("T", self.maturity),
            ("K", self.strike),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be finite and > 0",
                });
            }
        }
        if !(-1.0..=1.0).contains(&self.rho) {
            return Err(Error::InvalidParameter {
                name: "rho",
                value: self.rho,
                reason: "must lie in [-1, 1]",
            });
        }
        if !self.r.is_finite() {
            return Err(Error::InvalidParameter {
                name: "r",
                value: self.r,
                reason: "must be finite",
            });
        }
        let nu = self.feller();
        if !(nu.is_finite() && nu > 0.0) {
            return Err(Error::InvalidParameter {
                name: "feller",
                value: nu,
                reason: "2 kappa theta / sigma^2 must be finite and > 0",
            });
        }
        Ok(())
    }

    /// Feller index `2 kappa theta / sigma^2`.
    pub fn feller(&self) -> f64 {
        2.0 * self.kappa * self.theta / (self.sigma * self.sigma)
    }

    pub fn discount(&self) -> f64 {
        (-self.r * self.maturity).exp()
    }

    pub fn with_strike(mut self, strike: f64) -> Self {
        self.strike = strike;
        self
    }
}

/// Feller index of the variance process.
pub fn feller(params: &HestonParams) -> f64 {
    params.feller()
}

/// The four parameter sets of the reference experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelPreset {
    Model1,
    Model2,
    Model3,
    Model4,
}

impl ModelPreset {
    pub const ALL: [ModelPreset; 4] = [
        ModelPreset::Model1,
        ModelPreset::Model2,
        ModelPreset::Model3,
        ModelPreset::Model4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelPreset::Model1 => "model1",
            ModelPreset::Model2 => "model2",
            ModelPreset::Model3 => "model3",
            ModelPreset::Model4 => "model4",
        }
    }

    pub fn params(self) -> HestonParams {
        let (s0, v0, strike, kappa, theta, sigma, rho, maturity, r) = match self {
            ModelPreset::Model1 => (100.0, 0.04, 100.0, 5.0, 0.04, 0.61, -0.7, 1.0, 0.0319),
            ModelPreset::Model2 => (100.0, 0.0457, 100.0, 5.07, 0.0457, 0.48, -0.767, 2.0, 0.0),
            ModelPreset::Model3 => (100.0, 0.010201, 100.0, 6.21, 0.019, 0.61, -0.7, 1.0, 0.0319),
            ModelPreset::Model4 => (100.0, 0.09, 100.0, 2.0, 0.09, 1.0, -0.3, 5.0, 0.05),
        };
        HestonParams {
            s0,
            v0,
            kappa,
            theta,
            sigma,
            rho,
            r,
            maturity,
            strike,
        }
    }
}

impl fmt::Display for ModelPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelPreset {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "model1" => Ok(ModelPreset::Model1),
            "model2" => Ok(ModelPreset::Model2),
            "model3" => Ok(ModelPreset::Model3),
            "model4" => Ok(ModelPreset::Model4),
            other => Err(format!(
                "unknown model preset '{other}' (valid presets: model1, model2, model3, model4)"
            )),
        }
    }
}

/// Equidistant grid `t_k = k * dt`, `k = 0..=n_steps`, on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    n_steps: usize,
    maturity: f64,
    dt: f64,
}

impl GridSpec {
    pub fn new(maturity: f64, n_steps: usize) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::Precondition("number of steps N must be >= 1".into()));
        }
        if !(maturity.is_finite() && maturity > 0.0) {
            return Err(Error::InvalidParameter {
                name: "T",
                value: maturity,
                reason: "must be finite and > 0",
            });
        }
        Ok(Self {
            n_steps,
            maturity,
            dt: maturity / n_steps as f64,
        })
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn maturity(&self) -> f64 {
        self.maturity
    }

    /// `t_k`; the last node is pinned to `T`.
    pub fn time(&self, k: usize) -> f64 {
        if k >= self.n_steps {
            self.maturity
        } else {
            k as f64 * self.dt
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n_steps).map(|k| self.time(k))
    }

    /// `n(t) = max{k : t_k <= t}` for `t` in `[0, T]`.
    pub fn step_index(&self, t: f64) -> usize {
        let guess = ((t / self.dt).floor().max(0.0) as usize).min(self.n_steps);
        // floor() can land one node off when t sits next to a node
        let mut k = guess;
        while k > 0 && self.time(k) > t {
            k -= 1;
        }
        while k < self.n_steps && self.time(k + 1) <= t {
            k += 1;
        }
        k
    }

    /// `eta(t) = t_{n(t)}`, the last grid node at or before `t`.
    pub fn last_node(&self, t: f64) -> f64 {
        self.time(self.step_index(t))
    }
}

/// Test functionals applied to the terminal state `(x_N, v_N)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Payoff {
    Call,
    Put,
    Digital,
    /// Raw `v_N`, undiscounted.
    SmoothV,
    /// Raw `x_N`, undiscounted.
    SmoothX,
}

impl Payoff {
    pub fn name(self) -> &'static str {
        match self {
            Payoff::Call => "call",
            Payoff::Put => "put",
            Payoff::Digital => "digital",
            Payoff::SmoothV => "smooth_v",
            Payoff::SmoothX => "smooth_x",
        }
    }
}

impl fmt::Display for Payoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Payoff {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "call" => Ok(Payoff::Call),
            "put" => Ok(Payoff::Put),
            "digital" => Ok(Payoff::Digital),
            "smooth_v" => Ok(Payoff::SmoothV),
            "smooth_x" => Ok(Payoff::SmoothX),
            other => Err(format!(
                "unknown payoff '{other}' (valid: call, put, digital, smooth_v, smooth_x)"
            )),
        }
    }
}

/// Evaluates a payoff on the terminal log-price and variance.
///
/// Option payoffs are discounted by `exp(-rT)` and read `S_T = exp(x)`; the
/// digital pays on the closed set `S_T <= K`.
pub fn eval_payoff(
    payoff: Payoff,
    params: &HestonParams,
    terminal_log_price: f64,
    terminal_variance: f64,
) -> Result<f64> {
    if !terminal_log_price.is_finite() {
        return Err(Error::NonFinite("terminal log-price"));
    }
    if !terminal_variance.is_finite() {
        return Err(Error::NonFinite("terminal variance"));
    }
    let k = params.strike;
    let value = match payoff {
        Payoff::Call => params.discount() * (terminal_log_price.exp() - k).max(0.0),
        Payoff::Put => params.discount() * (k - terminal_log_price.exp()).max(0.0),
        Payoff::Digital => {
            if terminal_log_price.exp() <= k {
                params.discount()
            } else {
                0.0
            }
        }
        Payoff::SmoothV => terminal_variance,
        Payoff::SmoothX => terminal_log_price,
    };
    Ok(value)
}

/// Exact mean of the CIR variance, `theta + (v0 - theta) exp(-kappa t)`.
pub fn cir_mean(params: &HestonParams, t: f64) -> f64 {
    params.theta + (params.v0 - params.theta) * (-params.kappa * t).exp()
}

/// Exact mean of the log-price, `log s0 + r t - (1/2) int_0^t E V_s ds`.
pub fn logprice_mean(params: &HestonParams, t: f64) -> f64 {
    let integrated_variance = params.theta * t
        + (params.v0 - params.theta) * (-(-params.kappa * t).exp_m1()) / params.kappa;
    params.s0.ln() + params.r * t - 0.5 * integrated_variance
}
