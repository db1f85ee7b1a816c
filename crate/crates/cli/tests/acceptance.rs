//! Acceptance suite. Runs every criterion at its stated size and tolerance,
//! prints one PASS/FAIL line each, and exits non-zero if any fails.
//!
//! `cargo test --release -p heston-weak-lab --test acceptance`

use std::process::{Command, ExitCode};
use std::time::Instant;

use heston_lab::engine::step_exceeds_reversion_time;
use heston_lab::lemmas::{build_sequence, epsilon_grid, estimate_negativity, increment_moments, log_log_slope, negativity_bound};
use heston_lab::*;
use statrs::distribution::{ContinuousCDF, Normal};

const SEED: u64 = 20_240_601;
const M: u64 = 4_000_000;
const GRID: [usize; 5] = [8, 16, 32, 64, 128];

struct Outcome {
    pass: bool,
    detail: String,
}

fn rates(
    model: ModelPreset,
    kinds: &[SchemeKind],
    payoffs: &[Payoff],
    ok: impl Fn(f64) -> bool,
) -> Outcome {
    let cfg = EngineConfig::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for &kind in kinds {
        match run_studies(kind, &model.params(), payoffs, &GRID, M, SEED, &cfg) {
            Ok(reports) => {
                for r in reports {
                    pass &= ok(r.study.rate);
                    parts.push(format!("{kind}/{} {:.3}", r.payoff, r.study.rate));
                }
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{kind}: {e}"));
            }
        }
    }
    Outcome {
        pass,
        detail: parts.join(", "),
    }
}

fn criterion_1() -> Outcome {
    rates(ModelPreset::Model1, &SchemeKind::BOTH, &[Payoff::Call, Payoff::Put], |r| (0.8..=1.25).contains(&r))
}

fn criterion_2() -> Outcome {
    rates(ModelPreset::Model3, &SchemeKind::BOTH, &[Payoff::Call], |r| (0.40..=0.75).contains(&r))
}

fn criterion_3() -> Outcome {
    rates(ModelPreset::Model4, &SchemeKind::BOTH, &[Payoff::Put], |r| (0.25..=0.55).contains(&r) && r <= 0.7)
}

fn criterion_4() -> Outcome {
    rates(ModelPreset::Model2, &SchemeKind::BOTH, &[Payoff::SmoothV], |r| r >= 0.8)
}

fn black_scholes_call(s: f64, k: f64, r: f64, vol: f64, t: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).unwrap();
    let sd = vol * t.sqrt();
    let d1 = ((s / k).ln() + (r + 0.5 * vol * vol) * t) / sd;
    s * n.cdf(d1) - k * (-r * t).exp() * n.cdf(d1 - sd)
}

fn criterion_5() -> Outcome {
    let (mut parity, mut dual, mut bs) = (0.0f64, 0.0f64, 0.0f64);
    for model in ModelPreset::ALL {
        let p = model.params();
        let set = match reference_set(&p) {
            Ok(s) => s,
            Err(e) => {
                return Outcome {
                    pass: false,
                    detail: format!("{model}: {e}"),
                }
            }
        };
        parity = parity.max(set.parity_residual.abs());
        dual = dual.max(set.call.abs_tolerance).max(set.put.abs_tolerance).max(set.digital.abs_tolerance);
        let mut flat = p;
        flat.sigma = 1e-8;
        flat.v0 = flat.theta;
        let heston = price_call(&flat).map(|r| r.value).unwrap_or(f64::NAN);
        let closed = black_scholes_call(p.s0, p.strike, p.r, p.theta.sqrt(), p.maturity);
        bs = bs.max((heston - closed).abs());
    }
    Outcome {
        pass: parity < 1e-10 && dual <= 1e-7 && bs <= 1e-3,
        detail: format!("max parity {parity:.2e}, max dual {dual:.2e}, max BS gap {bs:.2e}"),
    }
}

fn criterion_6() -> Outcome {
    let (mut checked, mut exceptions) = (0usize, 0usize);
    for model in ModelPreset::ALL {
        let p = model.params();
        for n in (3..=12).map(|e| 1usize << e).filter(|&n| !step_exceeds_reversion_time(&p, n)) {
            for eps in epsilon_grid() {
                checked += 1;
                match build_sequence(&p, n, eps) {
                    Ok(seq) => {
                        if !(seq.max_bound_excess() <= 0.0 && seq.max_excess_over_alpha() <= 0.0 && seq.min_a() >= 0.0) {
                            exceptions += 1;
                        }
                    }
                    Err(_) => exceptions += 1,
                }
            }
        }
    }
    Outcome {
        pass: exceptions == 0 && checked > 0,
        detail: format!("{checked} (model, N, eps) cases, {exceptions} exceptions"),
    }
}

fn criterion_7() -> Outcome {
    let cfg = EngineConfig::default();
    let n = 128;
    let mut pass = true;
    let mut parts = Vec::new();
    for model in ModelPreset::ALL {
        let p = model.params();
        let bound = epsilon_grid()
            .into_iter()
            .map(|eps| negativity_bound(&p, n, eps).unwrap_or(f64::NAN))
            .fold(f64::INFINITY, f64::min);
        for kind in SchemeKind::BOTH {
            match estimate_negativity(kind, &p, n, 1_000_000, SEED, &cfg) {
                Ok(points) => {
                    let ok = points.iter().all(|q| q.p_hat <= bound + 3.0 * q.std_error);
                    let worst = points.iter().map(|q| q.p_hat).fold(0.0, f64::max);
                    pass &= ok;
                    parts.push(format!("{model}/{kind} max p {worst:.2e} vs bound {bound:.3e}"));
                }
                Err(e) => {
                    pass = false;
                    parts.push(format!("{model}/{kind}: {e}"));
                }
            }
        }
    }
    Outcome {
        pass,
        detail: parts.join(", "),
    }
}

fn criterion_8() -> Outcome {
    let cfg = EngineConfig::default();
    let p = ModelPreset::Model1.params();
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in SchemeKind::BOTH {
        let mut dv = Vec::new();
        let mut dx = Vec::new();
        for e in 4..=9 {
            match increment_moments(kind, &p, 1 << e, 100_000, SEED, &cfg) {
                Ok(m) => {
                    dv.push((m.delta_t, m.max_sq_dv()));
                    dx.push((m.delta_t, m.max_sq_dx()));
                }
                Err(err) => {
                    return Outcome {
                        pass: false,
                        detail: err.to_string(),
                    }
                }
            }
        }
        let (sv, sx) = (log_log_slope(&dv), log_log_slope(&dx));
        pass &= sv >= 0.9 && sx >= 0.9;
        parts.push(format!("{kind}: v slope {sv:.3}, x slope {sx:.3}"));
    }
    Outcome {
        pass,
        detail: parts.join(", "),
    }
}

fn run_cli(args: &[&str], threads: &str, dir: &std::path::Path, out: &str) -> std::result::Result<Vec<u8>, String> {
    let path = dir.join(out);
    let status = Command::new(env!("CARGO_BIN_EXE_heston-weak-lab"))
        .args(args)
        .args(["--threads", threads, "--out"])
        .arg(&path)
        .status()
        .map_err(|e| e.to_string())?;
    if !status.success() {
        return Err(format!("{args:?} exited with {status}"));
    }
    let mut bytes = std::fs::read(&path).map_err(|e| e.to_string())?;
    let summary = dir.join(out.replace(".csv", "_summary.csv"));
    if let Ok(extra) = std::fs::read(summary) {
        bytes.extend(extra);
    }
    Ok(bytes)
}

fn criterion_9() -> Outcome {
    let dir = match tempfile::tempdir() {
        Ok(d) => d,
        Err(e) => {
            return Outcome {
                pass: false,
                detail: e.to_string(),
            }
        }
    };
    let commands: [&[&str]; 4] = [
        &["price", "--model", "model3", "--payoff", "call,digital", "--samples", "50000", "--steps", "64"],
        &["converge", "--model", "model1", "--scheme", "abs", "--samples", "20000", "--payoff", "call,put"],
        &["reference", "--model", "all"],
        &["verify-lemmas", "--model", "model2", "--mc-samples", "20000"],
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for args in commands {
        let runs: Vec<std::result::Result<Vec<u8>, String>> = ["1", "2", "4"]
            .iter()
            .map(|t| run_cli(args, t, dir.path(), &format!("{}_{t}.csv", args[0])))
            .collect();
        let same = match (&runs[0], &runs[1], &runs[2]) {
            (Ok(a), Ok(b), Ok(c)) => a == b && b == c && !a.is_empty(),
            _ => false,
        };
        pass &= same;
        parts.push(format!("{} {}", args[0], if same { "identical" } else { "DIFFERS" }));
    }
    Outcome {
        pass,
        detail: format!("threads 1/2/4: {}", parts.join(", ")),
    }
}

fn main() -> ExitCode {
    type Check = fn() -> Outcome;
    let criteria: [(&str, Check); 9] = [
        ("1 Model 1 call/put rates in [0.8, 1.25]", criterion_1),
        ("2 Model 3 call rates in [0.40, 0.75]", criterion_2),
        ("3 Model 4 put rates in [0.25, 0.55] and <= 0.7", criterion_3),
        ("4 Model 2 smooth_v rates >= 0.8", criterion_4),
        ("5 reference parity, dual quadrature, Black-Scholes limit", criterion_5),
        ("6 deterministic sequence inequalities", criterion_6),
        ("7 negativity probability below plug-in bound", criterion_7),
        ("8 increment slopes >= 0.9", criterion_8),
        ("9 byte-identical CSV across thread counts", criterion_9),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let t = Instant::now();
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} criterion {name}: {} [{:.1}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
