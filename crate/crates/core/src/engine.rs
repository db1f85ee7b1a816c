//! Monte Carlo estimation with a reduction order fixed by chunk index, weak
//! errors against a reference, and log-log rate fits.
//!
//! Paths `[0, M)` are cut into chunks of `chunk_size` paths. Path `j` always
//! draws from stream `j`. Each chunk reduces its values by pairwise summation
//! and the chunk statistics are merged in a fixed binary tree, so the result
//! depends on `chunk_size` but never on the number of worker threads.

use std::ops::Range;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{eval_payoff, GridSpec, HestonParams, Payoff};
use crate::reference::{reference_for, ReferencePrice};
use crate::rng::{derive_seed, GaussianStream, SeedSpec};
use crate::scheme::{PathState, SchemeKind, Stepper};

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    /// Worker threads; 0 uses all available cores.
    pub threads: usize,
    pub chunk_size: usize,
    /// Simulate at most this many paths; more is reported as a budget error.
    pub max_paths: Option<u64>,
    pub time_budget: Option<Duration>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            threads: 0,
            chunk_size: 4096,
            max_paths: None,
            time_budget: None,
        }
    }
}

impl EngineConfig {
    pub fn with_threads(threads: usize) -> Self {
        Self {
            threads,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: u64,
    pub master_seed: u64,
}

/// Pairwise (cascade) summation with a fixed split rule.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 8;
    if values.len() <= LEAF {
        return values.iter().fold(0.0, |acc, &x| acc + x);
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Count, mean and sum of squared deviations of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub const EMPTY: Moments = Moments {
        count: 0,
        mean: 0.0,
        m2: 0.0,
    };

    /// Two-pass statistics of a buffer.
    pub fn from_slice(values: &[f64], scratch: &mut Vec<f64>) -> Self {
        if values.is_empty() {
            return Self::EMPTY;
        }
        let n = values.len() as f64;
        let mean = pairwise_sum(values) / n;
        scratch.clear();
        scratch.extend(values.iter().map(|&x| (x - mean) * (x - mean)));
        Self {
            count: values.len() as u64,
            mean,
            m2: pairwise_sum(scratch),
        }
    }

    pub fn merge(self, other: Moments) -> Moments {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let na = self.count as f64;
        let nb = other.count as f64;
        let n = na + nb;
        let delta = other.mean - self.mean;
        Moments {
            count: self.count + other.count,
            mean: self.mean + delta * nb / n,
            m2: self.m2 + other.m2 + delta * delta * na * nb / n,
        }
    }

    /// Merges in a balanced tree whose shape depends only on the length.
    pub fn merge_tree(parts: &[Moments]) -> Moments {
        match parts.len() {
            0 => Self::EMPTY,
            1 => parts[0],
            len => {
                let mid = len / 2;
                Self::merge_tree(&parts[..mid]).merge(Self::merge_tree(&parts[mid..]))
            }
        }
    }

    pub fn to_estimate(self, master_seed: u64) -> McEstimate {
        let std_error = if self.count > 1 {
            (self.m2 / (self.count - 1) as f64 / self.count as f64).sqrt()
        } else {
            f64::NAN
        };
        McEstimate {
            mean: self.mean,
            std_error,
            n_samples: self.count,
            master_seed,
        }
    }
}

pub(crate) struct ChunkRun<T> {
    pub results: Vec<T>,
    pub complete: bool,
}

fn chunk_ranges(total: u64, chunk_size: usize) -> Vec<Range<u64>> {
    let size = chunk_size.max(1) as u64;
    (0..total.div_ceil(size))
        .map(|c| c * size..((c + 1) * size).min(total))
        .collect()
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Precondition(format!("could not start worker pool: {e}")))
}

/// Runs `work` over the path chunks of `[0, total)`, returning per-chunk
/// results in chunk order. Stops early (with `complete == false`) when the
/// configured path cap or wall-clock budget is hit.
pub(crate) fn run_chunks<T, F>(total: u64, cfg: &EngineConfig, work: F) -> Result<ChunkRun<T>>
where
    T: Send,
    F: Fn(Range<u64>) -> Result<T> + Sync,
{
    let allowed = cfg.max_paths.map_or(total, |cap| cap.min(total));
    let ranges = chunk_ranges(allowed, cfg.chunk_size);
    let pool = thread_pool(cfg.threads)?;
    let start = Instant::now();
    let batch = pool.current_num_threads().max(1) * 4;

    let mut results = Vec::with_capacity(ranges.len());
    let mut paths_done = 0;
    let mut timed_out = false;
    for group in ranges.chunks(batch) {
        if let Some(budget) = cfg.time_budget {
            if start.elapsed() > budget {
                timed_out = true;
                break;
            }
        }
        let out: Vec<Result<T>> = pool.install(|| group.par_iter().cloned().map(&work).collect());
        for r in out {
            results.push(r?);
        }
        paths_done += group.iter().map(|r| r.end - r.start).sum::<u64>();
    }
    Ok(ChunkRun {
        results,
        complete: !timed_out && paths_done == total,
    })
}

/// Terminal states of paths `range` under master seed `master_seed`.
pub fn simulate_batch(
    kind: SchemeKind,
    params: &HestonParams,
    grid: &GridSpec,
    master_seed: u64,
    range: Range<u64>,
) -> Vec<(f64, f64)> {
    let stepper = Stepper::new(kind, params, grid);
    range
        .map(|j| {
            let mut stream = GaussianStream::new(SeedSpec::new(master_seed, j));
            let mut state = PathState::initial(params);
            for _ in 0..grid.n_steps() {
                let (xi1, xi2) = stream.next_pair();
                stepper.advance(&mut state, xi1, xi2);
            }
            (state.x, state.v)
        })
        .collect()
}

fn check_sizes(n_steps: usize, n_samples: u64) -> Result<()> {
    if n_samples < 2 {
        return Err(Error::Precondition(format!(
            "sample count M must be >= 2 for a standard error, got {n_samples}"
        )));
    }
    if n_steps < 1 {
        return Err(Error::Precondition("number of steps N must be >= 1".into()));
    }
    Ok(())
}

/// Estimates several functionals from one shared set of `M` paths.
pub fn estimate_many(
    kind: SchemeKind,
    params: &HestonParams,
    payoffs: &[Payoff],
    n_steps: usize,
    n_samples: u64,
    master_seed: u64,
    cfg: &EngineConfig,
) -> Result<Vec<McEstimate>> {
    params.validate()?;
    check_sizes(n_steps, n_samples)?;
    let grid = GridSpec::new(params.maturity, n_steps)?;

    let run = run_chunks(n_samples, cfg, |range| {
        let terminals = simulate_batch(kind, params, &grid, master_seed, range);
        let mut values = Vec::with_capacity(terminals.len());
        let mut scratch = Vec::with_capacity(terminals.len());
        payoffs
            .iter()
            .map(|&payoff| {
                values.clear();
                for &(x, v) in &terminals {
                    values.push(eval_payoff(payoff, params, x, v)?);
                }
                Ok(Moments::from_slice(&values, &mut scratch))
            })
            .collect::<Result<Vec<Moments>>>()
    })?;

    let estimates: Vec<McEstimate> = (0..payoffs.len())
        .map(|i| {
            let parts: Vec<Moments> = run.results.iter().map(|chunk| chunk[i]).collect();
            Moments::merge_tree(&parts).to_estimate(master_seed)
        })
        .collect();

    if !run.complete {
        return Err(Error::BudgetExceeded {
            partial: Box::new(estimates[0]),
            requested: n_samples,
        });
    }
    Ok(estimates)
}

/// Mean of `payoff` over `M` independent terminal simulations.
pub fn estimate(
    kind: SchemeKind,
    params: &HestonParams,
    payoff: Payoff,
    n_steps: usize,
    n_samples: u64,
    master_seed: u64,
    cfg: &EngineConfig,
) -> Result<McEstimate> {
    Ok(estimate_many(kind, params, &[payoff], n_steps, n_samples, master_seed, cfg)?[0])
}

/// `e(N) = |p_ref - p_{M,N}|`.
pub fn weak_error(estimate: &McEstimate, reference: &ReferencePrice) -> f64 {
    (reference.value - estimate.mean).abs()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub grid_sizes: Vec<usize>,
    pub errors: Vec<f64>,
    /// Negative slope of `log2 e` against `log2 N`.
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least-squares line through `(log2 N, log2 e(N))`.
pub fn fit_rate(points: &[(usize, f64)]) -> Result<ConvergenceStudy> {
    if points.len() < 3 {
        return Err(Error::Precondition(format!(
            "rate fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    let mut sorted = points.to_vec();
    sorted.sort_by_key(|&(n, _)| n);
    for &(n, e) in &sorted {
        if n == 0 {
            return Err(Error::Precondition("grid size N must be >= 1".into()));
        }
        if e == 0.0 {
            return Err(Error::ZeroError { n_steps: n });
        }
        if !(e.is_finite() && e > 0.0) {
            return Err(Error::NonFinite("weak error"));
        }
    }
    let xs: Vec<f64> = sorted.iter().map(|&(n, _)| (n as f64).log2()).collect();
    let ys: Vec<f64> = sorted.iter().map(|&(_, e)| e.log2()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Precondition("grid sizes must not all be equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(ConvergenceStudy {
        grid_sizes: sorted.iter().map(|&(n, _)| n).collect(),
        errors: sorted.iter().map(|&(_, e)| e).collect(),
        rate: -slope,
        intercept,
        r_squared,
    })
}

/// Grid sizes must be ascending powers of two.
pub fn validate_grid_sizes(grid_sizes: &[usize]) -> Result<()> {
    if grid_sizes.is_empty() {
        return Err(Error::Precondition("grid size list is empty".into()));
    }
    for &n in grid_sizes {
        if !n.is_power_of_two() {
            return Err(Error::Precondition(format!("grid size {n} is not a power of two")));
        }
    }
    if grid_sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Precondition("grid sizes must be strictly ascending".into()));
    }
    Ok(())
}

/// True when the step `T/N` is at least the mean-reversion time `1/kappa`.
pub fn step_exceeds_reversion_time(params: &HestonParams, n_steps: usize) -> bool {
    params.kappa * params.maturity / n_steps as f64 >= 1.0
}

/// Seed of the level with `N` steps; levels are mutually independent.
pub fn level_seed(master_seed: u64, n_steps: usize) -> u64 {
    derive_seed(master_seed, n_steps as u64)
}

/// Everything a convergence run produces for one functional.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    pub scheme: SchemeKind,
    pub payoff: Payoff,
    pub reference: ReferencePrice,
    pub estimates: Vec<McEstimate>,
    pub study: ConvergenceStudy,
}

/// Runs a convergence study for several functionals on shared paths: every
/// level `N` uses seed `level_seed(master_seed, N)` and all payoffs read the
/// same terminal states.
pub fn run_studies(
    kind: SchemeKind,
    params: &HestonParams,
    payoffs: &[Payoff],
    grid_sizes: &[usize],
    n_samples: u64,
    master_seed: u64,
    cfg: &EngineConfig,
) -> Result<Vec<StudyReport>> {
    validate_grid_sizes(grid_sizes)?;
    check_sizes(grid_sizes[0], n_samples)?;
    let references = payoffs
        .iter()
        .map(|&p| reference_for(p, params))
        .collect::<Result<Vec<_>>>()?;

    let mut per_payoff: Vec<Vec<McEstimate>> = vec![Vec::with_capacity(grid_sizes.len()); payoffs.len()];
    for &n in grid_sizes {
        let ests = estimate_many(kind, params, payoffs, n, n_samples, level_seed(master_seed, n), cfg)?;
        for (slot, e) in per_payoff.iter_mut().zip(ests) {
            slot.push(e);
        }
    }

    payoffs
        .iter()
        .zip(references)
        .zip(per_payoff)
        .map(|((&payoff, reference), estimates)| {
            let points: Vec<(usize, f64)> = grid_sizes
                .iter()
                .zip(&estimates)
                .map(|(&n, e)| (n, weak_error(e, &reference)))
                .collect();
            Ok(StudyReport {
                scheme: kind,
                payoff,
                reference,
                estimates,
                study: fit_rate(&points)?,
            })
        })
        .collect()
}

pub fn run_study(
    kind: SchemeKind,
    params: &HestonParams,
    payoff: Payoff,
    grid_sizes: &[usize],
    n_samples: u64,
    master_seed: u64,
    cfg: &EngineConfig,
) -> Result<StudyReport> {
    let mut reports = run_studies(kind, params, &[payoff], grid_sizes, n_samples, master_seed, cfg)?;
    Ok(reports.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelPreset;
    use crate::reference::ReferenceMethod;
    use crate::scheme::simulate_terminal;

    #[test]
    fn pairwise_matches_exact_sum_of_integers() {
        let v: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&v), 500_500.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn moments_merge_matches_single_pass() {
        let v: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.1).collect();
        let mut scratch = Vec::new();
        let whole = Moments::from_slice(&v, &mut scratch);
        let parts: Vec<Moments> = v.chunks(64).map(|c| Moments::from_slice(c, &mut scratch)).collect();
        let merged = Moments::merge_tree(&parts);
        assert_eq!(merged.count, whole.count);
        assert!((merged.mean - whole.mean).abs() < 1e-12);
        assert!((merged.m2 - whole.m2).abs() < 1e-9 * whole.m2);
    }

    #[test]
    fn weak_error_examples() {
        let est = McEstimate {
            mean: 9.0,
            std_error: 0.1,
            n_samples: 10,
            master_seed: 0,
        };
        let reference = ReferencePrice {
            value: 9.5,
            abs_tolerance: 0.0,
            method: ReferenceMethod::CallFormula,
        };
        assert_eq!(weak_error(&est, &reference), 0.5);
        let same = ReferencePrice { value: 9.0, ..reference };
        assert_eq!(weak_error(&est, &same), 0.0);
    }

    #[test]
    fn fit_rate_examples() {
        let exact: Vec<(usize, f64)> = [8, 16, 32, 64].iter().map(|&n| (n, 3.0 / n as f64)).collect();
        let s = fit_rate(&exact).unwrap();
        assert!((s.rate - 1.0).abs() < 1e-12);
        assert!((s.r_squared - 1.0).abs() < 1e-12);

        let flat: Vec<(usize, f64)> = [8, 16, 32].iter().map(|&n| (n, 0.25)).collect();
        let s = fit_rate(&flat).unwrap();
        assert!(s.rate.abs() < 1e-15);
        assert_eq!(s.intercept, -2.0);

        // frozen from numpy.polyfit on the same four points
        let s = fit_rate(&[(8, 0.4), (16, 0.21), (32, 0.09), (64, 0.052)]).unwrap();
        assert!((s.rate - 1.005_264_18).abs() < 1e-7, "{}", s.rate);
        assert!((s.intercept - 1.695_503_17).abs() < 1e-7);
    }

    #[test]
    fn fit_rate_sorts_and_rejects() {
        let s = fit_rate(&[(32, 0.1), (8, 0.4), (16, 0.2)]).unwrap();
        assert_eq!(s.grid_sizes, vec![8, 16, 32]);
        assert_eq!(s.errors, vec![0.4, 0.2, 0.1]);
        assert!(matches!(
            fit_rate(&[(8, 0.4), (16, 0.0), (32, 0.1)]),
            Err(Error::ZeroError { n_steps: 16 })
        ));
        assert!(fit_rate(&[(8, 0.4), (16, 0.2)]).is_err());
    }

    #[test]
    fn grid_size_validation() {
        assert!(validate_grid_sizes(&[8, 16, 32]).is_ok());
        assert!(validate_grid_sizes(&[8, 12, 32]).is_err());
        assert!(validate_grid_sizes(&[16, 8]).is_err());
        assert!(validate_grid_sizes(&[]).is_err());
    }

    #[test]
    fn estimate_rejects_single_sample() {
        let p = ModelPreset::Model1.params();
        let cfg = EngineConfig::default();
        assert!(estimate(SchemeKind::Symmetrized, &p, Payoff::Call, 8, 1, 0, &cfg).is_err());
        assert!(estimate(SchemeKind::Symmetrized, &p, Payoff::Call, 0, 10, 0, &cfg).is_err());
    }

    #[test]
    fn path_j_reads_stream_j() {
        let p = ModelPreset::Model1.params();
        let grid = GridSpec::new(p.maturity, 8).unwrap();
        let batch = simulate_batch(SchemeKind::Absorbed, &p, &grid, 77, 3..8);
        for (i, &(x, v)) in batch.iter().enumerate() {
            let expected = simulate_terminal(SchemeKind::Absorbed, &p, &grid, SeedSpec::new(77, 3 + i as u64));
            assert_eq!((x, v), expected);
        }
    }

    #[test]
    fn path_trace_at_m8_is_schedule_free() {
        let p = ModelPreset::Model3.params();
        let grid = GridSpec::new(p.maturity, 16).unwrap();
        let values: Vec<f64> = (0..8)
            .map(|j| {
                let (x, v) = simulate_terminal(SchemeKind::Symmetrized, &p, &grid, SeedSpec::new(5, j));
                eval_payoff(Payoff::Call, &p, x, v).unwrap()
            })
            .collect();
        let mut scratch = Vec::new();
        let direct = Moments::from_slice(&values, &mut scratch).to_estimate(5);
        for threads in [1, 3] {
            let cfg = EngineConfig {
                threads,
                chunk_size: 8,
                ..Default::default()
            };
            let est = estimate(SchemeKind::Symmetrized, &p, Payoff::Call, 16, 8, 5, &cfg).unwrap();
            assert_eq!(est, direct);
        }
    }

    #[test]
    fn thread_count_does_not_change_bits() {
        let p = ModelPreset::Model4.params();
        let run = |threads| {
            let cfg = EngineConfig {
                threads,
                chunk_size: 100,
                ..Default::default()
            };
            estimate_many(SchemeKind::Symmetrized, &p, &[Payoff::Put, Payoff::SmoothV], 8, 5_000, 11, &cfg).unwrap()
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn path_cap_reports_partial_result() {
        let p = ModelPreset::Model1.params();
        let cfg = EngineConfig {
            threads: 1,
            chunk_size: 64,
            max_paths: Some(256),
            time_budget: None,
        };
        match estimate(SchemeKind::Symmetrized, &p, Payoff::Call, 4, 10_000, 1, &cfg) {
            Err(Error::BudgetExceeded { partial, requested }) => {
                assert_eq!(requested, 10_000);
                assert_eq!(partial.n_samples, 256);
                assert!(partial.mean.is_finite());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn time_budget_stops_early() {
        let p = ModelPreset::Model1.params();
        let cfg = EngineConfig {
            threads: 1,
            chunk_size: 1,
            max_paths: None,
            time_budget: Some(Duration::ZERO),
        };
        let r = estimate(SchemeKind::Symmetrized, &p, Payoff::Call, 4, 10_000, 1, &cfg);
        assert!(matches!(r, Err(Error::BudgetExceeded { .. })));
    }
}
