use heston_lab::quadrature::{QuadratureConfig, QuadratureRule};
use heston_lab::reference::{heston_prob_with, reference_set_with, ProbIndex};
use heston_lab::*;
use statrs::distribution::{ContinuousCDF, Normal};

fn black_scholes_call(s: f64, k: f64, r: f64, vol: f64, t: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).unwrap();
    let sd = vol * t.sqrt();
    let d1 = ((s / k).ln() + (r + 0.5 * vol * vol) * t) / sd;
    s * n.cdf(d1) - k * (-r * t).exp() * n.cdf(d1 - sd)
}

#[test]
fn vanishing_vol_of_vol_recovers_black_scholes() {
    for model in ModelPreset::ALL {
        let mut p = model.params();
        p.sigma = 1e-8;
        p.v0 = p.theta;
        let bs = black_scholes_call(p.s0, p.strike, p.r, p.theta.sqrt(), p.maturity);
        let call = price_call(&p).unwrap().value;
        assert!((call - bs).abs() < 1e-3, "{model}: heston {call} vs bs {bs}");
    }
    let mut p = ModelPreset::Model1.params();
    p.sigma = 1e-8;
    let bs = black_scholes_call(100.0, 100.0, 0.0319, 0.2, 1.0);
    // scipy closed form
    assert!((bs - 9.509529570134703).abs() < 1e-9);
    assert!((price_call(&p).unwrap().value - bs).abs() < 1e-3);
}

#[test]
fn call_decreases_in_strike() {
    for model in ModelPreset::ALL {
        let base = model.params();
        let prices: Vec<f64> = (0..20)
            .map(|i| price_call(&base.with_strike(60.0 + 5.0 * i as f64)).unwrap().value)
            .collect();
        for w in prices.windows(2) {
            assert!(w[1] < w[0], "{model}: {prices:?}");
        }
        let digitals: Vec<f64> = (0..20)
            .map(|i| price_digital(&base.with_strike(60.0 + 5.0 * i as f64)).unwrap().value)
            .collect();
        for w in digitals.windows(2) {
            assert!(w[1] >= w[0], "{model}: {digitals:?}");
        }
    }
}

#[test]
fn call_increases_with_variance_level() {
    for model in ModelPreset::ALL {
        let p = model.params();
        let mut up = p;
        up.theta *= 1.5;
        up.v0 *= 1.5;
        assert!(price_call(&up).unwrap().value > price_call(&p).unwrap().value, "{model}");
    }
}

#[test]
fn quadrature_rules_agree() {
    let cfg = QuadratureConfig::default();
    for model in ModelPreset::ALL {
        let p = model.params();
        for j in [ProbIndex::P1, ProbIndex::P2] {
            let a = heston_prob_with(j, &p, QuadratureRule::AdaptiveSimpson, &cfg).unwrap();
            let b = heston_prob_with(j, &p, QuadratureRule::GaussLegendre, &cfg).unwrap();
            assert!((a - b).abs() < 1e-9, "{model} {j:?}");
        }
        let set = reference_set_with(&p, &cfg).unwrap();
        for price in [set.call, set.put, set.digital] {
            assert!(price.abs_tolerance <= 1e-7, "{model} {price:?}");
        }
        assert!(set.parity_residual.abs() < 1e-10, "{model}");
    }
}

#[test]
fn prices_lie_within_no_arbitrage_bounds() {
    for model in ModelPreset::ALL {
        let p = model.params();
        let set = reference_set(&p).unwrap();
        let df = p.discount();
        assert!(set.call.value >= (p.s0 - p.strike * df).max(0.0) && set.call.value <= p.s0);
        assert!(set.put.value >= (p.strike * df - p.s0).max(0.0) && set.put.value <= p.strike * df);
        assert!(set.digital.value > 0.0 && set.digital.value < df);
    }
}
