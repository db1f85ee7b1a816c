use heston_lab::*;

fn rk4_cir_mean(p: &HestonParams, t: f64, steps: usize) -> f64 {
    let f = |m: f64| p.kappa * (p.theta - m);
    let h = t / steps as f64;
    let mut m = p.v0;
    for _ in 0..steps {
        let k1 = f(m);
        let k2 = f(m + 0.5 * h * k1);
        let k3 = f(m + 0.5 * h * k2);
        let k4 = f(m + h * k3);
        m += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    m
}

#[test]
fn cir_mean_solves_its_ode() {
    for model in ModelPreset::ALL {
        let p = model.params();
        assert_eq!(cir_mean(&p, 0.0), p.v0);
        let h = 1e-5;
        for t in [0.1, 0.5, 1.0] {
            let dm = (cir_mean(&p, t + h) - cir_mean(&p, t - h)) / (2.0 * h);
            assert!((dm - p.kappa * (p.theta - cir_mean(&p, t))).abs() < 1e-7, "{model} t={t}");
        }
    }
}

#[test]
fn cir_mean_matches_rk4() {
    let p = ModelPreset::Model3.params();
    let rk = rk4_cir_mean(&p, 1.0, 10_000);
    assert!((cir_mean(&p, 1.0) - rk).abs() < 1e-13, "{} vs {rk}", cir_mean(&p, 1.0));
}

#[test]
fn logprice_mean_matches_integrated_variance() {
    // E x_t = x_0 + r t - (1/2) int_0^t E v_s ds, integral by composite Simpson
    for model in ModelPreset::ALL {
        let p = model.params();
        let t = p.maturity;
        let n = 2000;
        let h = t / n as f64;
        let mut s = cir_mean(&p, 0.0) + cir_mean(&p, t);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * cir_mean(&p, i as f64 * h);
        }
        let integral = s * h / 3.0;
        let expect = p.s0.ln() + p.r * t - 0.5 * integral;
        assert!((logprice_mean(&p, t) - expect).abs() < 1e-12, "{model}");
    }
}

#[test]
fn smooth_references_use_the_means() {
    let p = ModelPreset::Model2.params();
    let rv = reference_for(Payoff::SmoothV, &p).unwrap();
    let rx = reference_for(Payoff::SmoothX, &p).unwrap();
    assert_eq!(rv.value, cir_mean(&p, p.maturity));
    assert_eq!(rx.value, logprice_mean(&p, p.maturity));
    // Model 2 starts at its long-run level
    assert!((rv.value - p.theta).abs() < 1e-15);
}
