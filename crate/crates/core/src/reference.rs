//! Semi-analytic Heston prices used as the reference in weak-error studies.
//!
//! The call uses the two in-the-money probabilities
//!
//! ```text
//! P_j = 1/2 + 1/pi * int_0^inf Re[ exp(-i u ln K) f_j(u) / (i u) ] du
//! ```
//!
//! with the characteristic functions written in the rotation-count-free
//! ("little trap") form, `g = (beta - d) / (beta + d)` and `exp(-d tau)`. All
//! terms that carry `1/sigma^2` are rearranged so that `beta - d` is never
//! formed by subtraction, which keeps the formula usable as `sigma -> 0`.
//! The put follows from parity and the digital from `exp(-rT) (1 - P_2)`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{cir_mean, logprice_mean, HestonParams, Payoff};
use crate::quadrature::{integrate_semi_infinite, QuadratureConfig, QuadratureRule};

/// Which of the two Heston probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbIndex {
    P1,
    P2,
}

impl ProbIndex {
    fn u(self) -> f64 {
        match self {
            ProbIndex::P1 => 0.5,
            ProbIndex::P2 => -0.5,
        }
    }

    fn b(self, params: &HestonParams) -> f64 {
        match self {
            ProbIndex::P1 => params.kappa - params.rho * params.sigma,
            ProbIndex::P2 => params.kappa,
        }
    }
}

/// One evaluation of `f_j(u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharFnEval {
    pub u: f64,
    pub value: Complex64,
}

/// `ln(1 + w) / w`, accurate for small `|w|`.
fn ln1p_ratio(w: Complex64) -> Complex64 {
    if w.norm() < 1e-300 {
        return Complex64::new(1.0, 0.0);
    }
    let re = 0.5 * (2.0 * w.re + w.norm_sqr()).ln_1p();
    let im = w.im.atan2(1.0 + w.re);
    Complex64::new(re, im) / w
}

/// Logarithm of `f_j(u)` without the `i u ln s0` term.
fn log_charfn(j: ProbIndex, params: &HestonParams, u: f64) -> Complex64 {
    let i = Complex64::i();
    let sigma2 = params.sigma * params.sigma;
    let tau = params.maturity;
    let beta = Complex64::new(j.b(params), -params.rho * params.sigma * u);
    let q = Complex64::new(-u * u, 2.0 * j.u() * u);
    let d = (beta * beta - sigma2 * q).sqrt();
    let beta_plus_d = beta + d;
    // (beta - d) / sigma^2 without cancellation
    let n_over_s2 = q / beta_plus_d;
    let g = sigma2 * n_over_s2 / beta_plus_d;
    let e = (-d * tau).exp();
    let one = Complex64::new(1.0, 0.0);
    let d_coef = n_over_s2 * (one - e) / (one - g * e);
    // ln((1 - g e) / (1 - g)) / sigma^2 = ln1p(w) / sigma^2
    let w_over_s2 = n_over_s2 / beta_plus_d * (one - e) / (one - g);
    let w = sigma2 * w_over_s2;
    let log_term_over_s2 = ln1p_ratio(w) * w_over_s2;
    let c_coef = i * (params.r * u * tau)
        + params.kappa * params.theta * (n_over_s2 * tau - 2.0 * log_term_over_s2);
    c_coef + d_coef * params.v0
}

/// `f_j(u) = E_j[exp(i u X_T)]` with `X_T = ln S_T`.
pub fn charfn(j: ProbIndex, params: &HestonParams, u: f64) -> CharFnEval {
    let log = log_charfn(j, params, u) + Complex64::new(0.0, u * params.s0.ln());
    CharFnEval {
        u,
        value: log.exp(),
    }
}

// The integrand's limit at u = 0 is reached to O(u^2) here.
const ORIGIN_NUDGE: f64 = 1e-8;

fn prob_integrand(j: ProbIndex, params: &HestonParams, moneyness: f64, u: f64) -> f64 {
    let u = if u == 0.0 { ORIGIN_NUDGE } else { u };
    let log = log_charfn(j, params, u) + Complex64::new(0.0, u * moneyness);
    // Re[exp(L) / (i u)] = Im[exp(L)] / u
    log.re.exp() * log.im.sin() / u
}

/// `P_j` via the selected quadrature rule.
pub fn heston_prob_with(
    j: ProbIndex,
    params: &HestonParams,
    rule: QuadratureRule,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    let moneyness = (params.s0 / params.strike).ln();
    let integral = integrate_semi_infinite(|u| prob_integrand(j, params, moneyness, u), rule, cfg)?;
    let p = 0.5 + integral.value / PI;
    if !p.is_finite() {
        return Err(Error::Quadrature {
            context: "probability is not finite",
            residual: f64::NAN,
        });
    }
    Ok(p)
}

pub fn heston_prob(j: ProbIndex, params: &HestonParams) -> Result<f64> {
    heston_prob_with(j, params, QuadratureRule::AdaptiveSimpson, &QuadratureConfig::default())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceMethod {
    CallFormula,
    PutParity,
    DigitalP2,
    CirMean,
    LogPriceMean,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferencePrice {
    pub value: f64,
    /// For Fourier prices, the disagreement between the two quadrature rules.
    pub abs_tolerance: f64,
    pub method: ReferenceMethod,
}

/// Call, put and digital from one pair of probability evaluations per rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceSet {
    pub call: ReferencePrice,
    pub put: ReferencePrice,
    pub digital: ReferencePrice,
    /// `C - P - s0 + K exp(-rT)`.
    pub parity_residual: f64,
}

struct ProbPair {
    p1: f64,
    p2: f64,
}

fn probs(params: &HestonParams, rule: QuadratureRule, cfg: &QuadratureConfig) -> Result<ProbPair> {
    Ok(ProbPair {
        p1: heston_prob_with(ProbIndex::P1, params, rule, cfg)?,
        p2: heston_prob_with(ProbIndex::P2, params, rule, cfg)?,
    })
}

fn call_from(params: &HestonParams, pr: &ProbPair) -> f64 {
    params.s0 * pr.p1 - params.strike * params.discount() * pr.p2
}

fn put_from_call(params: &HestonParams, call: f64) -> f64 {
    call - params.s0 + params.strike * params.discount()
}

fn digital_from(params: &HestonParams, pr: &ProbPair) -> f64 {
    params.discount() * (1.0 - pr.p2)
}

pub fn reference_set_with(params: &HestonParams, cfg: &QuadratureConfig) -> Result<ReferenceSet> {
    params.validate()?;
    let primary = probs(params, QuadratureRule::AdaptiveSimpson, cfg)?;
    let check = probs(params, QuadratureRule::GaussLegendre, cfg)?;

    let call = call_from(params, &primary);
    let call_check = call_from(params, &check);
    let put = put_from_call(params, call);
    let put_check = put_from_call(params, call_check);
    let digital = digital_from(params, &primary);
    let digital_check = digital_from(params, &check);

    Ok(ReferenceSet {
        call: ReferencePrice {
            value: call,
            abs_tolerance: (call - call_check).abs(),
            method: ReferenceMethod::CallFormula,
        },
        put: ReferencePrice {
            value: put,
            abs_tolerance: (put - put_check).abs(),
            method: ReferenceMethod::PutParity,
        },
        digital: ReferencePrice {
            value: digital,
            abs_tolerance: (digital - digital_check).abs(),
            method: ReferenceMethod::DigitalP2,
        },
        parity_residual: call - put - params.s0 + params.strike * params.discount(),
    })
}

pub fn reference_set(params: &HestonParams) -> Result<ReferenceSet> {
    reference_set_with(params, &QuadratureConfig::default())
}

pub fn price_call(params: &HestonParams) -> Result<ReferencePrice> {
    Ok(reference_set(params)?.call)
}

pub fn price_put(params: &HestonParams) -> Result<ReferencePrice> {
    Ok(reference_set(params)?.put)
}

pub fn price_digital(params: &HestonParams) -> Result<ReferencePrice> {
    Ok(reference_set(params)?.digital)
}

/// Reference value `E f(X_T, V_T)` for any supported functional.
pub fn reference_for(payoff: Payoff, params: &HestonParams) -> Result<ReferencePrice> {
    match payoff {
        Payoff::Call => price_call(params),
        Payoff::Put => price_put(params),
        Payoff::Digital => price_digital(params),
        Payoff::SmoothV => Ok(ReferencePrice {
            value: cir_mean(params, params.maturity),
            abs_tolerance: 0.0,
            method: ReferenceMethod::CirMean,
        }),
        Payoff::SmoothX => Ok(ReferencePrice {
            value: logprice_mean(params, params.maturity),
            abs_tolerance: 0.0,
            method: ReferenceMethod::LogPriceMean,
        }),
    }
}
