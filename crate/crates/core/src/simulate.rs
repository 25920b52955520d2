//! Sampling plus ERM, run in the regime where empirical NeSy-risk
//! minimization over the restricted hypothesis space is exactly solving the
//! dataset constraint problem and picking one of its solutions.

use std::time::{Duration, Instant};

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dcsp::{self, concept_error, for_each_solution, Assignment, ClusterSeq, DcspInstance, SolveOptions};
use crate::error::{Error, Result};
use crate::kb::{check_seq, AbductionIndex, ConceptSeq, Label};
use crate::risks::assignment_nesy_risk;

/// Two-sided 99% standard normal quantile.
pub const Z_99: f64 = 2.575_829_303_548_901;

/// Normalization tolerance for explicit weights.
pub const WEIGHT_TOLERANCE: f64 = 1e-9;

/// Distribution over the candidate pool, aligned with `AbductionIndex::pool`.
#[derive(Clone, Debug)]
pub struct ConceptDistribution {
    weights: Vec<f64>,
    kappa: f64,
    uniform: bool,
    sampler: WeightedIndex<f64>,
}

impl ConceptDistribution {
    pub fn uniform(index: &AbductionIndex) -> Self {
        let n = index.pool_size();
        let weights = vec![1.0 / n as f64; n];
        Self::from_parts(weights, true)
    }

    /// Explicit weights; every pooled sequence needs a strictly positive weight.
    pub fn from_weights(index: &AbductionIndex, entries: &[(ConceptSeq, f64)]) -> Result<Self> {
        let mut weights = vec![None; index.pool_size()];
        for (z, w) in entries {
            let kb = index.kb();
            check_seq(z, kb.concepts(), kb.arity())?;
            if !w.is_finite() || *w < 0.0 {
                return Err(Error::InvalidDistribution(format!("weight {w} for {z:?} is not a probability")));
            }
            let pos = index
                .pool()
                .binary_search(z)
                .map_err(|_| Error::InvalidDistribution(format!("{z:?} is outside the candidate pool")))?;
            if weights[pos].replace(*w).is_some() {
                return Err(Error::InvalidDistribution(format!("{z:?} is listed twice")));
            }
        }
        let total: f64 = weights.iter().flatten().sum();
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("weights sum to {total}, not 1")));
        }
        let mut dense = Vec::with_capacity(weights.len());
        for (pos, w) in weights.into_iter().enumerate() {
            match w {
                Some(w) if w > 0.0 => dense.push(w),
                _ => {
                    return Err(Error::InvalidDistribution(format!(
                        "{:?} has zero probability; every pooled sequence needs weight >= kappa > 0",
                        index.pool()[pos]
                    )))
                }
            }
        }
        Ok(Self::from_parts(dense, false))
    }

    fn from_parts(weights: Vec<f64>, uniform: bool) -> Self {
        let kappa = weights.iter().copied().fold(f64::INFINITY, f64::min);
        let sampler = WeightedIndex::new(&weights).expect("positive weights");
        ConceptDistribution { weights, kappa, uniform, sampler }
    }

    /// Probability of the `i`-th pooled sequence.
    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Smallest sequence probability.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> usize {
        self.sampler.sample(rng)
    }
}

/// Per-trial seed from the base seed and the trial's position.
pub fn derive_seed(base_seed: u64, trial: u64) -> u64 {
    let mut z = base_seed ^ trial.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn draw_indices<R: Rng>(dist: &ConceptDistribution, samples: usize, rng: &mut R) -> Vec<usize> {
    (0..samples).map(|_| dist.draw(rng)).collect()
}

/// `samples` i.i.d. draws, each emitted as `(z, forward(z))`.
pub fn sample_dataset(
    index: &AbductionIndex,
    dist: &ConceptDistribution,
    samples: usize,
    seed: u64,
) -> Result<Vec<(ClusterSeq, Label)>> {
    if samples == 0 {
        return Err(Error::ParameterOutOfRange("sample count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kb = index.kb();
    Ok(draw_indices(dist, samples, &mut rng)
        .into_iter()
        .map(|i| {
            let z = index.pool()[i].clone();
            let y = kb.eval(&z);
            (z, y)
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialReport {
    pub seed: u64,
    pub samples: usize,
    pub num_solutions: usize,
    pub chosen: Option<Assignment>,
    pub concept_error: f64,
    pub nesy_error: f64,
    /// Every pooled sequence appeared in the sample.
    pub covered: bool,
    /// False when the solution cap fired; the choice is then among the first `cap` solutions.
    pub complete: bool,
    #[serde(skip)]
    pub runtime: Duration,
}

/// One seeded run: sample, build the dataset problem, pick a solution uniformly.
pub fn erm_trial(
    index: &AbductionIndex,
    dist: &ConceptDistribution,
    samples: usize,
    seed: u64,
    opts: &SolveOptions,
) -> Result<TrialReport> {
    if samples == 0 {
        return Err(Error::ParameterOutOfRange("sample count must be at least 1".into()));
    }
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let drawn = draw_indices(dist, samples, &mut rng);

    let mut seen = vec![false; index.pool_size()];
    for &i in &drawn {
        seen[i] = true;
    }
    let covered = seen.iter().all(|&s| s);

    let kb = index.kb();
    let data: Vec<(ClusterSeq, Label)> = seen
        .iter()
        .enumerate()
        .filter(|(_, &s)| s)
        .map(|(i, _)| {
            let z = &index.pool()[i];
            (z.clone(), kb.eval(z))
        })
        .collect();
    let inst = DcspInstance::from_dataset(index, &data)?.with_injective(opts.injective);

    // reservoir sampling keeps the choice uniform without storing the space
    let mut chosen: Option<Assignment> = None;
    let mut count = 0u64;
    let stats = for_each_solution(&inst, opts.solution_cap, |s| {
        count += 1;
        if rng.gen_range(0..count) == 0 {
            chosen = Some(s.to_vec());
        }
    })?;

    let (concept_error, nesy_error) = match &chosen {
        Some(a) => (concept_error(a), assignment_nesy_risk(index, dist, a)),
        None => (f64::NAN, f64::NAN),
    };
    Ok(TrialReport {
        seed,
        samples,
        num_solutions: stats.visited,
        chosen,
        concept_error,
        nesy_error,
        covered,
        complete: stats.complete,
        runtime: start.elapsed(),
    })
}

/// Mean and standard error (sample standard deviation over `sqrt(n)`).
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Smallest `k` with `Pr[Bin(n, p) <= k] >= level`.
pub fn binomial_quantile(p: f64, n: usize, level: f64) -> usize {
    let p = p.clamp(0.0, 1.0);
    if p == 0.0 {
        return 0;
    }
    if p == 1.0 {
        return n;
    }
    // pmf in log space so (1 - p)^n cannot underflow the running sum's start
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    let mut log_pmf = n as f64 * lq;
    let mut cdf = 0.0;
    for k in 0..n {
        cdf += log_pmf.exp();
        if cdf >= level {
            return k;
        }
        log_pmf += ((n - k) as f64).ln() - ((k + 1) as f64).ln() + lp - lq;
    }
    n
}

/// 99% one-sided slack for a binomial frequency with success probability `p`
/// over `n` trials: the exact 0.99 quantile of `Bin(n, p) / n`, minus `p`.
/// The normal approximation undershoots badly when `n p` is small, which is
/// exactly the regime of coverage failures at large `N`.
pub fn binomial_slack(p: f64, n: usize) -> f64 {
    if n == 0 {
        return f64::INFINITY;
    }
    let p = p.clamp(0.0, 1.0);
    (binomial_quantile(p, n, 0.99) as f64 / n as f64 - p).max(0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub samples: usize,
    pub mean_concept_accuracy: f64,
    pub concept_stderr: f64,
    pub mean_reasoning_accuracy: f64,
    pub reasoning_stderr: f64,
    /// Trials whose enumeration hit the solution cap.
    pub flagged: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepResult {
    pub task: String,
    /// `1 - d/L` from the task-level verdict.
    pub bound_line: f64,
    pub rows: Vec<SweepRow>,
    pub trials: Vec<TrialReport>,
}

impl SweepResult {
    pub fn flagged(&self) -> usize {
        self.rows.iter().map(|r| r.flagged).sum()
    }
}

/// Runs `repeats` trials at every grid size; trial `t` uses `derive_seed(base_seed, t)`
/// where `t` enumerates grid entries in order, repeats innermost.
pub fn sweep(
    index: &AbductionIndex,
    dist: &ConceptDistribution,
    grid: &[usize],
    repeats: usize,
    base_seed: u64,
    opts: &SolveOptions,
) -> Result<SweepResult> {
    if repeats == 0 {
        return Err(Error::ParameterOutOfRange("repeats must be at least 1".into()));
    }
    let report = dcsp::verdict(&dcsp::solve_task(index, opts)?)?;
    let trials = run_trials(index, dist, grid, repeats, base_seed, opts)?;
    let rows = grid
        .iter()
        .zip(trials.chunks(repeats))
        .map(|(&samples, chunk)| {
            let concept: Vec<f64> = chunk.iter().map(|t| 1.0 - t.concept_error).collect();
            let reasoning: Vec<f64> = chunk.iter().map(|t| 1.0 - t.nesy_error).collect();
            let (mean_concept_accuracy, concept_stderr) = mean_stderr(&concept);
            let (mean_reasoning_accuracy, reasoning_stderr) = mean_stderr(&reasoning);
            SweepRow {
                samples,
                mean_concept_accuracy,
                concept_stderr,
                mean_reasoning_accuracy,
                reasoning_stderr,
                flagged: chunk.iter().filter(|t| !t.complete).count(),
            }
        })
        .collect();
    Ok(SweepResult { task: index.kb().name().to_string(), bound_line: 1.0 - report.error_bound, rows, trials })
}

fn run_trials(
    index: &AbductionIndex,
    dist: &ConceptDistribution,
    grid: &[usize],
    repeats: usize,
    base_seed: u64,
    opts: &SolveOptions,
) -> Result<Vec<TrialReport>> {
    let jobs: Vec<(usize, u64)> = grid
        .iter()
        .flat_map(|&n| (0..repeats).map(move |r| (n, r)))
        .enumerate()
        .map(|(t, (n, _))| (n, derive_seed(base_seed, t as u64)))
        .collect();
    jobs.par_iter().map(|&(n, seed)| erm_trial(index, dist, n, seed, opts)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleComplexity {
    pub kappa: f64,
    pub pool_size: usize,
    pub epsilon: f64,
    /// `(1/kappa) ln(|B| / epsilon)`.
    pub bound: f64,
    /// Smallest integer sample count at or above the bound (0 when the bound is not positive).
    pub min_samples: u64,
}

/// `(1/kappa) ln(pool_size / epsilon)` without range checks.
pub fn bound_value(kappa: f64, pool_size: usize, epsilon: f64) -> f64 {
    (pool_size as f64 / epsilon).ln() / kappa
}

pub fn sample_complexity_bound(
    index: &AbductionIndex,
    dist: &ConceptDistribution,
    epsilon: f64,
) -> Result<SampleComplexity> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::ParameterOutOfRange(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let kappa = dist.kappa();
    let bound = bound_value(kappa, index.pool_size(), epsilon);
    Ok(SampleComplexity {
        kappa,
        pool_size: index.pool_size(),
        epsilon,
        bound,
        min_samples: if bound > 0.0 { bound.ceil() as u64 } else { 0 },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverageRow {
    pub samples: usize,
    pub trials: usize,
    /// Fraction of trials in which some pooled sequence was never drawn.
    pub empirical_q: f64,
    /// `|B| (1 - kappa)^N`.
    pub union_bound: f64,
    /// `|B| exp(-N kappa)`.
    pub exp_bound: f64,
    pub slack: f64,
    pub violation: bool,
    /// Fraction of trials whose chosen solution had positive concept error.
    pub error_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverageReport {
    pub task: String,
    pub kappa: f64,
    pub pool_size: usize,
    pub rows: Vec<CoverageRow>,
}

impl CoverageReport {
    pub fn has_violation(&self) -> bool {
        self.rows.iter().any(|r| r.violation)
    }
}

/// Empirical frequency of incomplete coverage against its union bound.
pub fn coverage_validation(
    index: &AbductionIndex,
    dist: &ConceptDistribution,
    grid: &[usize],
    repeats: usize,
    base_seed: u64,
    opts: &SolveOptions,
) -> Result<CoverageReport> {
    if repeats == 0 {
        return Err(Error::ParameterOutOfRange("repeats must be at least 1".into()));
    }
    let trials = run_trials(index, dist, grid, repeats, base_seed, opts)?;
    Ok(coverage_from_trials(index, dist, grid, repeats, &trials))
}

/// Coverage rows from already-run trials laid out as [`sweep`] lays them out.
pub fn coverage_from_trials(
    index: &AbductionIndex,
    dist: &ConceptDistribution,
    grid: &[usize],
    repeats: usize,
    trials: &[TrialReport],
) -> CoverageReport {
    let b = index.pool_size() as f64;
    let kappa = dist.kappa();
    let rows = grid
        .iter()
        .zip(trials.chunks(repeats))
        .map(|(&samples, chunk)| {
            let n = chunk.len();
            let empirical_q = chunk.iter().filter(|t| !t.covered).count() as f64 / n as f64;
            let error_rate = chunk.iter().filter(|t| t.concept_error > 0.0).count() as f64 / n as f64;
            let union_bound = b * (1.0 - kappa).powf(samples as f64);
            let exp_bound = b * (-(samples as f64) * kappa).exp();
            let capped = union_bound.min(1.0);
            let slack = binomial_slack(capped, n);
            CoverageRow {
                samples,
                trials: n,
                empirical_q,
                union_bound,
                exp_bound,
                slack,
                violation: empirical_q > capped + slack,
                error_rate,
            }
        })
        .collect();
    CoverageReport { task: index.kb().name().to_string(), kappa, pool_size: index.pool_size(), rows }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::kb::{KnowledgeBase, DEFAULT_POOL_CAP};

    fn index(kb: KnowledgeBase) -> AbductionIndex {
        AbductionIndex::build(Arc::new(kb), DEFAULT_POOL_CAP).unwrap()
    }

    #[test]
    fn sample_counts_and_determinism() {
        let idx = index(KnowledgeBase::xor());
        let dist = ConceptDistribution::uniform(&idx);
        assert!(sample_dataset(&idx, &dist, 0, 1).is_err());
        assert_eq!(sample_dataset(&idx, &dist, 1, 1).unwrap().len(), 1);
        let a = sample_dataset(&idx, &dist, 50, 7).unwrap();
        assert_eq!(a, sample_dataset(&idx, &dist, 50, 7).unwrap());
        assert!(a.iter().all(|(z, y)| idx.kb().forward(z).unwrap() == *y));
    }

    #[test]
    fn uniform_frequencies_within_three_sigma() {
        let idx = index(KnowledgeBase::xor());
        let dist = ConceptDistribution::uniform(&idx);
        let n = 10_000;
        let data = sample_dataset(&idx, &dist, n, 2023).unwrap();
        let sigma = (0.25f64 * 0.75 / n as f64).sqrt();
        for z in idx.pool() {
            let freq = data.iter().filter(|(s, _)| s == z).count() as f64 / n as f64;
            assert!((freq - 0.25).abs() <= 3.0 * sigma, "{z:?}: {freq}");
        }
    }

    #[test]
    fn distribution_validation() {
        let idx = index(KnowledgeBase::xor());
        let point = vec![(vec![0, 0], 1.0)];
        assert!(matches!(ConceptDistribution::from_weights(&idx, &point), Err(Error::InvalidDistribution(_))));
        let unnormalized: Vec<_> = idx.pool().iter().map(|z| (z.clone(), 0.3)).collect();
        assert!(ConceptDistribution::from_weights(&idx, &unnormalized).is_err());
        let outside = vec![(vec![0, 0], 0.5), (vec![0, 1], 0.5), (vec![2, 0], 0.0)];
        assert!(ConceptDistribution::from_weights(&idx, &outside).is_err());
        let ok = vec![(vec![0, 0], 0.1), (vec![0, 1], 0.2), (vec![1, 0], 0.3), (vec![1, 1], 0.4)];
        let dist = ConceptDistribution::from_weights(&idx, &ok).unwrap();
        assert!((dist.kappa() - 0.1).abs() < 1e-15);
        assert!(!dist.is_uniform());
        assert_eq!(ConceptDistribution::uniform(&idx).kappa(), 0.25);
    }

    #[test]
    fn bound_examples() {
        assert!((bound_value(0.01, 100, 0.01) - 921.034_037_197_618_3).abs() < 1e-9);
        assert!((bound_value(0.25, 4, 0.1) - 14.755_517_816_455_75).abs() < 1e-9);
        assert!(bound_value(0.5, 4, 4.0) <= 0.0);

        let idx = index(KnowledgeBase::addition(10, 1).unwrap());
        let dist = ConceptDistribution::uniform(&idx);
        let b = sample_complexity_bound(&idx, &dist, 0.01).unwrap();
        assert_eq!(b.min_samples, 922);
        assert!((b.kappa - 0.01).abs() < 1e-15);
        assert!(sample_complexity_bound(&idx, &dist, 0.0).is_err());
        assert!(sample_complexity_bound(&idx, &dist, 1.0).is_err());
    }

    #[test]
    fn covering_trial_on_learnable_task_is_exact() {
        let idx = index(KnowledgeBase::addition(10, 1).unwrap());
        let dist = ConceptDistribution::uniform(&idx);
        let t = erm_trial(&idx, &dist, 3000, 11, &SolveOptions::default()).unwrap();
        assert!(t.covered);
        assert_eq!(t.num_solutions, 1);
        assert_eq!(t.concept_error, 0.0);
        assert_eq!(t.nesy_error, 0.0);
    }

    #[test]
    fn xor_trials_pick_either_solution() {
        let idx = index(KnowledgeBase::xor());
        let dist = ConceptDistribution::uniform(&idx);
        let errors: Vec<f64> = (0..200)
            .map(|s| erm_trial(&idx, &dist, 200, s, &SolveOptions::default()).unwrap())
            .inspect(|t| assert!(t.covered && t.num_solutions == 2 && t.nesy_error == 0.0))
            .map(|t| t.concept_error)
            .collect();
        assert!(errors.iter().all(|&e| e == 0.0 || e == 1.0));
        let ones = errors.iter().filter(|&&e| e == 1.0).count() as f64 / 200.0;
        assert!((ones - 0.5).abs() <= binomial_slack(0.5, 200));
    }

    #[test]
    fn stats_helpers() {
        assert_eq!(mean_stderr(&[0.4]), (0.4, 0.0));
        let (m, se) = mean_stderr(&[0.0, 1.0]);
        assert_eq!(m, 0.5);
        assert!((se - 0.5).abs() < 1e-12);
        assert_eq!(binomial_slack(0.0, 10), 0.0);
        // reference quantiles from an independent statistics package
        assert_eq!(binomial_quantile(100.0 * 0.99f64.powi(1200), 600, 0.99), 2);
        assert_eq!(binomial_quantile(0.5, 10, 0.99), 9);
        assert_eq!(binomial_quantile(0.5, 100_000, 0.99), 50_368);
        assert_eq!(binomial_quantile(0.01, 600, 0.99), 12);
        assert_eq!(binomial_quantile(1.0, 7, 0.99), 7);
        assert!((binomial_slack(0.01, 600) - (12.0 / 600.0 - 0.01)).abs() < 1e-15);
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }

    #[test]
    fn sweep_repeats_one_has_zero_stderr() {
        let idx = index(KnowledgeBase::xor());
        let dist = ConceptDistribution::uniform(&idx);
        let r = sweep(&idx, &dist, &[5, 50], 1, 3, &SolveOptions::default()).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert!(r.rows.iter().all(|row| row.concept_stderr == 0.0));
        assert_eq!(r.bound_line, 0.0);
        assert!(sweep(&idx, &dist, &[5], 0, 3, &SolveOptions::default()).is_err());
    }

    #[test]
    fn small_sample_coverage_is_vacuous() {
        let idx = index(KnowledgeBase::addition(10, 1).unwrap());
        let dist = ConceptDistribution::uniform(&idx);
        let rep = coverage_validation(&idx, &dist, &[20], 20, 5, &SolveOptions::default()).unwrap();
        let row = &rep.rows[0];
        assert_eq!(row.empirical_q, 1.0);
        assert!(row.union_bound >= 1.0);
        assert!(!rep.has_violation());
    }
}
