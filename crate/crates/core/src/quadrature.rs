//! Two independent adaptive rules for integrals over `[0, inf)` with an
//! integrand-decay truncation test.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureRule {
    AdaptiveSimpson,
    GaussLegendre,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    /// Relative tolerance per panel.
    pub rel_tol: f64,
    /// Absolute floor on the per-panel tolerance.
    pub abs_tol: f64,
    /// Width of the panels appended while searching for the truncation point.
    pub panel_width: f64,
    /// Stop once a panel contributes less than this (absolute).
    pub tail_tol: f64,
    /// Hard cap on the truncation point.
    pub max_upper: f64,
    pub max_depth: u32,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-15,
            panel_width: 10.0,
            tail_tol: 1e-12,
            max_upper: 1e5,
            max_depth: 40,
        }
    }
}

/// Result of a semi-infinite integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    /// Truncation point actually used.
    pub upper: f64,
    /// Sum of local error estimates plus the last panel's contribution.
    pub error_estimate: f64,
}

/// Integrates `f` over `[0, inf)`: panels of fixed width are appended until
/// two consecutive panels each contribute less than `tail_tol`.
pub fn integrate_semi_infinite<F>(f: F, rule: QuadratureRule, cfg: &QuadratureConfig) -> Result<Integral>
where
    F: Fn(f64) -> f64,
{
    let mut total = 0.0;
    let mut err = 0.0;
    let mut lower = 0.0;
    let mut quiet_panels = 0;
    let mut last = f64::INFINITY;
    while lower < cfg.max_upper {
        let upper = lower + cfg.panel_width;
        let (value, e) = match rule {
            QuadratureRule::AdaptiveSimpson => adaptive_simpson(&f, lower, upper, cfg)?,
            QuadratureRule::GaussLegendre => adaptive_gauss_legendre(&f, lower, upper, cfg)?,
        };
        total += value;
        err += e;
        last = value.abs();
        lower = upper;
        if last < cfg.tail_tol {
            quiet_panels += 1;
            if quiet_panels == 2 {
                return Ok(Integral {
                    value: total,
                    upper,
                    error_estimate: err + last,
                });
            }
        } else {
            quiet_panels = 0;
        }
    }
    Err(Error::Quadrature {
        context: "integrand did not decay before the truncation cap",
        residual: last,
    })
}

fn panel_tol(estimate: f64, cfg: &QuadratureConfig) -> f64 {
    (cfg.rel_tol * estimate.abs()).max(cfg.abs_tol)
}

/// Adaptive Simpson with Richardson correction. Returns (value, error estimate).
pub fn adaptive_simpson<F>(f: &F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    // seed the tolerance from a finer look at the panel
    let coarse = simpson_panel(f, a, b, fa, fm, fb, 4);
    let tol = panel_tol(coarse, cfg);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, cfg.max_depth)
}

fn simpson_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, levels: u32) -> f64 {
    let n = 1usize << levels;
    let h = (b - a) / n as f64;
    let mut s = fa + fb;
    for i in 1..n {
        let x = a + i as f64 * h;
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * if i == n / 2 { fm } else { f(x) };
    }
    s * h / 3.0
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if !delta.is_finite() {
        return Err(Error::Quadrature {
            context: "non-finite integrand in adaptive Simpson",
            residual: f64::INFINITY,
        });
    }
    if delta.abs() <= 15.0 * tol {
        return Ok((left + right + delta / 15.0, delta.abs() / 15.0));
    }
    if depth == 0 {
        return Err(Error::Quadrature {
            context: "adaptive Simpson exhausted its recursion depth",
            residual: delta.abs() / 15.0,
        });
    }
    let (l, el) = simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?;
    let (r, er) = simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?;
    Ok((l + r, el + er))
}

const GL_ORDER: usize = 20;

/// Gauss–Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
pub fn gauss_legendre_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Adaptive bisection driven by fixed-order Gauss–Legendre panels.
pub fn adaptive_gauss_legendre<F>(f: &F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    let (nodes, weights) = gauss_legendre_nodes(GL_ORDER);
    let rule = |lo: f64, hi: f64| -> f64 {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        nodes
            .iter()
            .zip(&weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    };
    let whole = rule(a, b);
    let tol = panel_tol(whole, cfg);
    gl_step(&rule, a, b, whole, tol, cfg.max_depth)
}

fn gl_step<R>(rule: &R, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> Result<(f64, f64)>
where
    R: Fn(f64, f64) -> f64,
{
    let m = 0.5 * (a + b);
    let left = rule(a, m);
    let right = rule(m, b);
    let delta = left + right - whole;
    if !delta.is_finite() {
        return Err(Error::Quadrature {
            context: "non-finite integrand in Gauss-Legendre panel",
            residual: f64::INFINITY,
        });
    }
    if delta.abs() <= tol {
        return Ok((left + right, delta.abs()));
    }
    if depth == 0 {
        return Err(Error::Quadrature {
            context: "Gauss-Legendre bisection exhausted its depth",
            residual: delta.abs(),
        });
    }
    let (l, el) = gl_step(rule, a, m, left, 0.5 * tol, depth - 1)?;
    let (r, er) = gl_step(rule, m, b, right, 0.5 * tol, depth - 1)?;
    Ok((l + r, el + er))
}
