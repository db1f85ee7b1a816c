use std::io::Write;
use std::path::{Path, PathBuf};

use heston_lab::engine::{step_exceeds_reversion_time, validate_grid_sizes};
use heston_lab::lemmas::{build_sequence, epsilon_grid, estimate_negativity, negativity_bound, NegativityPoint};
use heston_lab::{estimate_many, reference_for, reference_set, run_studies, weak_error, ModelPreset};

use crate::config::{derived_summary_path, ConfigError, NamedModel, StudyConfig};

pub const CONVERGE_HEADER: [&str; 10] =
    ["model", "scheme", "payoff", "N", "M", "seed", "estimate", "std_error", "ref", "abs_error"];
pub const SUMMARY_HEADER: [&str; 10] =
    ["model", "scheme", "payoff", "rate", "intercept", "r_squared", "min_N", "max_N", "M", "seed"];
pub const LEMMA_HEADER: [&str; 10] = [
    "model",
    "N",
    "epsilon",
    "alpha_N",
    "max_cj_slack",
    "min_aj",
    "plugin_bound",
    "mc_estimate",
    "mc_stderr",
    "pass",
];
pub const REFERENCE_HEADER: [&str; 11] = [
    "model",
    "s0",
    "strike",
    "maturity",
    "call",
    "put",
    "digital",
    "call_dual_residual",
    "put_dual_residual",
    "digital_dual_residual",
    "parity_residual",
];

pub const DEFAULT_CONVERGE_GRID: [usize; 5] = [8, 16, 32, 64, 128];
pub const FULL_SCALE_GRID: [usize; 6] = [8, 16, 32, 64, 128, 256];
pub const FULL_SCALE_SAMPLES: u64 = 20_000_000;
const DEFAULT_CONVERGE_SAMPLES: u64 = 4_000_000;
const DEFAULT_PRICE_SAMPLES: u64 = 1_000_000;
const DEFAULT_PRICE_STEPS: usize = 128;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Lab(#[from] heston_lab::Error),
    #[error("{0} lemma check(s) failed")]
    LemmaViolation(usize),
    #[error("cannot write {path}: {source}")]
    Output { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use heston_lab::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Lab(E::InvalidParameter { .. } | E::Precondition(_)) => 2,
            CliError::Lab(E::Quadrature { .. }) => 3,
            CliError::Lab(E::ZeroError { .. }) => 4,
            CliError::LemmaViolation(_) => 5,
            CliError::Lab(E::BudgetExceeded { .. }) => 6,
            CliError::Lab(E::NonFinite(_)) | CliError::Output { .. } => 1,
        }
    }
}

type Rows = Vec<Vec<String>>;

fn fmt(x: f64) -> String {
    format!("{x:?}")
}

fn write_csv(path: Option<&Path>, header: &[&str], rows: &Rows) -> Result<(), CliError> {
    let name = path.map_or_else(|| "stdout".to_owned(), |p| p.display().to_string());
    let io_err = |source: std::io::Error| CliError::Output {
        path: name.clone(),
        source,
    };
    let sink: Box<dyn Write> = match path {
        Some(p) => Box::new(std::fs::File::create(p).map_err(io_err)?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    let csv_err = |e: csv::Error| io_err(e.into());
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush().map_err(io_err)
}

fn warn_coarse_grid(model: &NamedModel, n_steps: usize) {
    if step_exceeds_reversion_time(&model.params, n_steps) {
        eprintln!(
            "warning: {}: coarsest step T/N = {} is not below the mean-reversion time 1/kappa = {}",
            model.name,
            model.params.maturity / n_steps as f64,
            1.0 / model.params.kappa
        );
    }
}

pub fn cmd_price(cfg: &StudyConfig) -> Result<(), CliError> {
    let n = cfg.steps.unwrap_or(DEFAULT_PRICE_STEPS);
    let m = cfg.samples.unwrap_or(DEFAULT_PRICE_SAMPLES);
    let engine = cfg.engine();
    let mut rows = Rows::new();
    for model in &cfg.models {
        warn_coarse_grid(model, n);
        let refs = cfg
            .payoffs
            .iter()
            .map(|&p| reference_for(p, &model.params))
            .collect::<Result<Vec<_>, _>>()?;
        for &kind in &cfg.schemes {
            let ests = estimate_many(kind, &model.params, &cfg.payoffs, n, m, cfg.seed, &engine)?;
            for ((payoff, est), r) in cfg.payoffs.iter().zip(&ests).zip(&refs) {
                rows.push(vec![
                    model.name.to_owned(),
                    kind.short_name().to_owned(),
                    payoff.name().to_owned(),
                    n.to_string(),
                    m.to_string(),
                    cfg.seed.to_string(),
                    fmt(est.mean),
                    fmt(est.std_error),
                    fmt(r.value),
                    fmt(weak_error(est, r)),
                ]);
            }
        }
    }
    write_csv(cfg.output_path.as_deref(), &CONVERGE_HEADER, &rows)
}

pub fn cmd_converge(cfg: &StudyConfig, full_scale: bool) -> Result<(), CliError> {
    let grid: Vec<usize> = match (&cfg.grid_sizes, full_scale) {
        (Some(g), _) => g.clone(),
        (None, true) => FULL_SCALE_GRID.to_vec(),
        (None, false) => DEFAULT_CONVERGE_GRID.to_vec(),
    };
    validate_grid_sizes(&grid)?;
    let m = cfg
        .samples
        .unwrap_or(if full_scale { FULL_SCALE_SAMPLES } else { DEFAULT_CONVERGE_SAMPLES });
    let engine = cfg.engine();
    let (mut rows, mut summary) = (Rows::new(), Rows::new());
    for model in &cfg.models {
        warn_coarse_grid(model, grid[0]);
        for &kind in &cfg.schemes {
            let reports = run_studies(kind, &model.params, &cfg.payoffs, &grid, m, cfg.seed, &engine)?;
            for rep in reports {
                let head = [model.name.to_owned(), kind.short_name().to_owned(), rep.payoff.name().to_owned()];
                for (n, est) in grid.iter().zip(&rep.estimates) {
                    let mut row = head.to_vec();
                    row.extend([
                        n.to_string(),
                        m.to_string(),
                        cfg.seed.to_string(),
                        fmt(est.mean),
                        fmt(est.std_error),
                        fmt(rep.reference.value),
                        fmt(weak_error(est, &rep.reference)),
                    ]);
                    rows.push(row);
                }
                let mut row = head.to_vec();
                row.extend([
                    fmt(rep.study.rate),
                    fmt(rep.study.intercept),
                    fmt(rep.study.r_squared),
                    grid[0].to_string(),
                    grid[grid.len() - 1].to_string(),
                    m.to_string(),
                    cfg.seed.to_string(),
                ]);
                summary.push(row);
            }
        }
    }
    match &cfg.output_path {
        Some(out) => {
            let summary_path: PathBuf = cfg.summary_path.clone().unwrap_or_else(|| derived_summary_path(out));
            write_csv(Some(out), &CONVERGE_HEADER, &rows)?;
            write_csv(Some(&summary_path), &SUMMARY_HEADER, &summary)
        }
        None => {
            write_csv(None, &CONVERGE_HEADER, &rows)?;
            println!();
            write_csv(cfg.summary_path.as_deref(), &SUMMARY_HEADER, &summary)
        }
    }
}

pub fn cmd_reference(cfg: &StudyConfig) -> Result<(), CliError> {
    let models: Vec<NamedModel> = if cfg.model_explicit {
        cfg.models.clone()
    } else {
        all_presets()
    };
    let mut rows = Rows::new();
    for model in &models {
        let p = &model.params;
        let set = reference_set(p)?;
        rows.push(vec![
            model.name.to_owned(),
            fmt(p.s0),
            fmt(p.strike),
            fmt(p.maturity),
            fmt(set.call.value),
            fmt(set.put.value),
            fmt(set.digital.value),
            fmt(set.call.abs_tolerance),
            fmt(set.put.abs_tolerance),
            fmt(set.digital.abs_tolerance),
            fmt(set.parity_residual),
        ]);
    }
    write_csv(cfg.output_path.as_deref(), &REFERENCE_HEADER, &rows)
}

fn all_presets() -> Vec<NamedModel> {
    ModelPreset::ALL
        .iter()
        .map(|m| NamedModel {
            name: m.name(),
            params: m.params(),
        })
        .collect()
}

pub const DEFAULT_LEMMA_GRID: [usize; 10] = [8, 16, 32, 64, 128, 256, 512, 1024, 2048, 4096];

/// Largest `p_hat_k` and its standard error, and whether every mid-step
/// estimate stays within three standard errors of `bound`.
fn mc_summary(points: &[NegativityPoint], bound: f64) -> (f64, f64, bool) {
    let worst = points
        .iter()
        .max_by(|a, b| a.p_hat.total_cmp(&b.p_hat))
        .expect("at least one step");
    let ok = points.iter().all(|p| p.p_hat <= bound + 3.0 * p.std_error);
    (worst.p_hat, worst.std_error, ok)
}

pub fn cmd_verify_lemmas(cfg: &StudyConfig) -> Result<(), CliError> {
    let models: Vec<NamedModel> = if cfg.model_explicit {
        cfg.models.clone()
    } else {
        all_presets()
    };
    let explicit_grid = cfg.grid_sizes.clone().or(cfg.steps.map(|n| vec![n]));
    let epsilons = cfg.epsilons.clone().unwrap_or_else(epsilon_grid);
    let kind = cfg.single_scheme()?;
    let engine = cfg.engine();

    let mut rows = Rows::new();
    let mut failures = 0;
    for model in &models {
        let p = &model.params;
        let grid: Vec<usize> = match &explicit_grid {
            // explicit sizes are checked by the lemma preconditions (exit 2)
            Some(g) => g.clone(),
            None => DEFAULT_LEMMA_GRID
                .iter()
                .copied()
                .filter(|&n| !step_exceeds_reversion_time(p, n))
                .collect(),
        };
        for n in grid {
            let mc = if n == cfg.mc_grid && cfg.mc_samples > 0 {
                Some(estimate_negativity(kind, p, n, cfg.mc_samples, cfg.seed, &engine)?)
            } else {
                None
            };
            for &eps in &epsilons {
                let seq = build_sequence(p, n, eps)?;
                let bound = negativity_bound(p, n, eps)?;
                let chain_ok = seq.chain_terms(p).iter().all(|&t| t <= bound);
                let mut pass = seq.max_bound_excess() <= 0.0
                    && seq.max_excess_over_alpha() <= 0.0
                    && seq.min_a() >= 0.0
                    && chain_ok;
                let (mc_est, mc_se) = match &mc {
                    Some(points) => {
                        let (est, se, ok) = mc_summary(points, bound);
                        pass &= ok;
                        (fmt(est), fmt(se))
                    }
                    None => (String::new(), String::new()),
                };
                if !pass {
                    failures += 1;
                }
                rows.push(vec![
                    model.name.to_owned(),
                    n.to_string(),
                    fmt(eps),
                    fmt(seq.alpha_n),
                    fmt(seq.max_bound_excess()),
                    fmt(seq.min_a()),
                    fmt(bound),
                    mc_est,
                    mc_se,
                    pass.to_string(),
                ]);
            }
        }
    }
    write_csv(cfg.output_path.as_deref(), &LEMMA_HEADER, &rows)?;
    if failures > 0 {
        return Err(CliError::LemmaViolation(failures));
    }
    Ok(())
}
