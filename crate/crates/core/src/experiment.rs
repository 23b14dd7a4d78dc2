//! Seed × algorithm × harness sweeps for comparing MIO with Random.
//!
//! Every job owns its own simulated service, so jobs are independent. With
//! the `parallel` feature they run on the rayon pool; without it, in order.
//! Results come back in job order either way.

use serde::Serialize;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::fitness::TargetKind;
use crate::harness::build_harness;
use crate::search::{run_search, Algorithm, SearchConfig, SearchInputs};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SweepJob {
    pub harness: String,
    pub algorithm: Algorithm,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepResult {
    pub job: SweepJob,
    pub targets: usize,
    pub covered: usize,
    pub covered_branches: usize,
    pub calls_used: u64,
}

/// Every combination, harness-major then algorithm then seed.
pub fn sweep_jobs(harnesses: &[&str], algorithms: &[Algorithm], seeds: &[u64]) -> Vec<SweepJob> {
    let mut jobs = Vec::with_capacity(harnesses.len() * algorithms.len() * seeds.len());
    for h in harnesses {
        for &algorithm in algorithms {
            for &seed in seeds {
                jobs.push(SweepJob {
                    harness: h.to_string(),
                    algorithm,
                    seed,
                });
            }
        }
    }
    jobs
}

/// Panics on an unknown harness name.
pub fn run_job(job: &SweepJob, budget: u64) -> SweepResult {
    let mut sut = build_harness(&job.harness).unwrap_or_else(|| panic!("unknown harness '{}'", job.harness));
    let schema = sut.schema().clone();
    let auth = sut.default_auth().to_vec();
    let config = SearchConfig {
        algorithm: job.algorithm,
        budget,
        seed: job.seed,
        ..SearchConfig::default()
    };
    let inputs = SearchInputs {
        auth: &auth,
        ..SearchInputs::new(&schema)
    };
    let out = run_search(inputs, &mut sut, &config).expect("bundled harness functions are callable");
    SweepResult {
        job: job.clone(),
        targets: out.stats.len(),
        covered: out.covered_targets(),
        covered_branches: out.covered_of_kind(TargetKind::Branch),
        calls_used: out.calls_used,
    }
}

pub fn run_sweep_sequential(jobs: &[SweepJob], budget: u64) -> Vec<SweepResult> {
    jobs.iter().map(|j| run_job(j, budget)).collect()
}

#[cfg(feature = "parallel")]
pub fn run_sweep_parallel(jobs: &[SweepJob], budget: u64) -> Vec<SweepResult> {
    jobs.par_iter().map(|j| run_job(j, budget)).collect()
}

/// Parallel when the `parallel` feature is enabled.
pub fn run_sweep(jobs: &[SweepJob], budget: u64) -> Vec<SweepResult> {
    #[cfg(feature = "parallel")]
    {
        run_sweep_parallel(jobs, budget)
    }
    #[cfg(not(feature = "parallel"))]
    {
        run_sweep_sequential(jobs, budget)
    }
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Comparison {
    pub harness: String,
    pub runs: usize,
    pub mio_median: f64,
    pub random_median: f64,
    /// `(mio - random) / random`.
    pub relative_improvement: f64,
}

/// Median covered targets of MIO vs Random per harness, in first-seen order.
pub fn compare(results: &[SweepResult]) -> Vec<Comparison> {
    let mut harnesses: Vec<&str> = Vec::new();
    for r in results {
        if !harnesses.contains(&r.job.harness.as_str()) {
            harnesses.push(&r.job.harness);
        }
    }
    harnesses
        .into_iter()
        .filter_map(|h| {
            let covered = |a: Algorithm| -> Vec<f64> {
                results
                    .iter()
                    .filter(|r| r.job.harness == h && r.job.algorithm == a)
                    .map(|r| r.covered as f64)
                    .collect()
            };
            let (mut mio, mut random) = (covered(Algorithm::Mio), covered(Algorithm::Random));
            let runs = mio.len().min(random.len());
            let (m, r) = (median(&mut mio)?, median(&mut random)?);
            Some(Comparison {
                harness: h.to_string(),
                runs,
                mio_median: m,
                random_median: r,
                relative_improvement: if r > 0.0 { (m - r) / r } else { f64::INFINITY },
            })
        })
        .collect()
}

pub fn comparison_table(rows: &[Comparison]) -> String {
    let mut out = String::from("harness  runs  mio_median  random_median  improvement\n");
    for c in rows {
        out.push_str(&format!(
            "{:<8} {:>5} {:>11.1} {:>14.1} {:>11.2}%\n",
            c.harness,
            c.runs,
            c.mio_median,
            c.random_median,
            c.relative_improvement * 100.0
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn medians() {
        assert_eq!(median(&mut []), None);
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), Some(2.5));
    }

    #[test]
    fn job_grid_order() {
        let jobs = sweep_jobs(&["ncs", "scs"], &Algorithm::ALL, &[1, 2]);
        assert_eq!(jobs.len(), 8);
        assert_eq!((jobs[0].harness.as_str(), jobs[0].algorithm, jobs[0].seed), ("ncs", Algorithm::Mio, 1));
        assert_eq!((jobs[7].harness.as_str(), jobs[7].algorithm, jobs[7].seed), ("scs", Algorithm::Random, 2));
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_matches_sequential() {
        let jobs = sweep_jobs(&["ncs", "shop"], &Algorithm::ALL, &[7]);
        assert_eq!(run_sweep_parallel(&jobs, 300), run_sweep_sequential(&jobs, 300));
    }
}
