//! Monte Carlo comparison of quantile estimators.
//!
//! Replication `r` of a configuration draws its sample from random substream
//! `stream_id(stream_unit, r)` of the configuration seed, so replications can
//! run in any order or on any number of threads. Every method sees the same
//! sample. Relative errors `(q_e - q_t) / q_t` are aggregated per method over
//! that method's own successful fits.

use alloc::string::String;
use alloc::vec::Vec;

use crate::distribution::K4Params;
use crate::error::{Error, Result};
use crate::estimate::{Estimator, Method};
use crate::likelihood::OptimizerConfig;
use crate::lmoments;
use crate::math;
use crate::rng;

/// Quantile levels reported by default.
pub const DEFAULT_LEVELS: [f64; 5] = [0.90, 0.95, 0.99, 0.995, 0.999];

/// Cells whose true quantile is smaller than this in magnitude are flagged.
pub const ILL_CONDITIONED: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimConfig {
    pub true_params: K4Params,
    pub n: usize,
    pub reps: usize,
    pub levels: Vec<f64>,
    pub methods: Vec<Method>,
    pub seed: u64,
    /// High half of the stream id; campaigns give each configuration its own.
    pub stream_unit: u32,
    pub optimizer: OptimizerConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            true_params: K4Params::new(0.0, 1.0, -0.2, -0.2).expect("valid defaults"),
            n: 30,
            reps: 1000,
            levels: DEFAULT_LEVELS.to_vec(),
            methods: Method::all(),
            seed: 1,
            stream_unit: 0,
            optimizer: OptimizerConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let cfg_err = |m: String| Err(Error::Config(m));
        if self.reps == 0 {
            return cfg_err("reps must be at least 1".into());
        }
        if self.n < 5 {
            return cfg_err(alloc::format!("sample size must be at least 5, got {}", self.n));
        }
        if self.levels.is_empty() {
            return cfg_err("at least one quantile level is required".into());
        }
        if let Some(l) = self.levels.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
            return cfg_err(alloc::format!("quantile levels must lie in (0, 1), got {l}"));
        }
        if self.methods.is_empty() {
            return cfg_err("at least one method is required".into());
        }
        self.optimizer.validate()?;
        self.true_quantiles().map(|_| ())
    }

    /// True quantiles at each level; zero or non-finite values are a
    /// configuration error since relative errors are undefined there.
    pub fn true_quantiles(&self) -> Result<Vec<f64>> {
        let dist = self.true_params.dist();
        self.levels
            .iter()
            .map(|&l| {
                let q = dist.quantile(l)?;
                if q == 0.0 || !q.is_finite() {
                    Err(Error::Config(alloc::format!(
                        "true quantile at level {l} is {q}; relative errors are undefined"
                    )))
                } else {
                    Ok(q)
                }
            })
            .collect()
    }

    /// The sample of replication `index`.
    pub fn sample(&self, index: usize) -> Vec<f64> {
        let mut r = rng::substream(self.seed, rng::stream_id(self.stream_unit, index as u64));
        self.true_params.dist().sample_with(&mut r, self.n)
    }
}

/// Estimates from one replication, one entry per method (`None` = failed).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Replication {
    pub index: usize,
    pub estimates: Vec<Option<K4Params>>,
}

/// Fit every configured method to the sample of replication `index`. The
/// L-moment estimate is computed once and shared.
pub fn run_replication(cfg: &SimConfig, index: usize) -> Replication {
    let data = cfg.sample(index);
    let lme = lmoments::fit_lme(&data).ok();
    let estimates = cfg
        .methods
        .iter()
        .map(|m| {
            m.fit_with(&data, &cfg.optimizer, lme.as_ref())
                .ok()
                .and_then(|f| f.usable_params())
        })
        .collect();
    Replication { index, estimates }
}

/// Like [`run_replication`] but with arbitrary estimators.
pub fn run_replication_with(cfg: &SimConfig, estimators: &[&dyn Estimator], index: usize) -> Replication {
    let data = cfg.sample(index);
    Replication {
        index,
        estimates: estimators.iter().map(|e| e.estimate(&data)).collect(),
    }
}

/// RBIAS and RRMSE at one level. Both are `None` when the method never
/// succeeded.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Cell {
    pub level: f64,
    pub true_quantile: f64,
    pub rbias: Option<f64>,
    pub rrmse: Option<f64>,
    pub ill_conditioned: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MethodSummary {
    pub method: String,
    /// Successful replications (`M`).
    pub successes: usize,
    pub failures: usize,
    /// Indices of the failed replications.
    pub failed_reps: Vec<usize>,
    pub cells: Vec<Cell>,
    /// Per-replication estimates, indexed by replication.
    pub estimates: Vec<Option<K4Params>>,
}

impl MethodSummary {
    pub fn cell(&self, level: f64) -> Option<&Cell> {
        self.cells.iter().find(|c| math::abs(c.level - level) < 1e-12)
    }

    /// Successful estimates of `k`, in replication order.
    pub fn k_estimates(&self) -> Vec<f64> {
        self.estimates.iter().flatten().map(|p| p.k()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimReport {
    pub true_params: K4Params,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub stream_unit: u32,
    pub levels: Vec<f64>,
    pub methods: Vec<MethodSummary>,
}

impl SimReport {
    pub fn method(&self, name: &str) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == name)
    }
}

/// Fold replications into a report. `replications` may arrive in any order;
/// they are summed in index order so the result does not depend on it.
pub fn aggregate(cfg: &SimConfig, labels: &[String], replications: &[Replication]) -> Result<SimReport> {
    let q_true = cfg.true_quantiles()?;
    let mut order: Vec<&Replication> = replications.iter().collect();
    order.sort_by_key(|r| r.index);
    if let Some(r) = order.iter().find(|r| r.estimates.len() != labels.len()) {
        return Err(Error::Config(alloc::format!(
            "replication {} has {} estimates for {} methods",
            r.index,
            r.estimates.len(),
            labels.len()
        )));
    }

    let methods = labels
        .iter()
        .enumerate()
        .map(|(m, label)| {
            let mut sum = alloc::vec![0.0; q_true.len()];
            let mut sum_sq = alloc::vec![0.0; q_true.len()];
            let mut successes = 0;
            let mut failed_reps = Vec::new();
            let mut estimates = Vec::with_capacity(order.len());
            for rep in &order {
                let est = rep.estimates[m].and_then(|p| {
                    let dist = p.dist();
                    let q: Option<Vec<f64>> = cfg
                        .levels
                        .iter()
                        .map(|&l| dist.quantile(l).ok().filter(|v| v.is_finite()))
                        .collect();
                    q.map(|q| (p, q))
                });
                match est {
                    Some((p, q)) => {
                        successes += 1;
                        for (i, (qe, qt)) in q.iter().zip(&q_true).enumerate() {
                            let e = (qe - qt) / qt;
                            sum[i] += e;
                            sum_sq[i] += e * e;
                        }
                        estimates.push(Some(p));
                    }
                    None => {
                        failed_reps.push(rep.index);
                        estimates.push(None);
                    }
                }
            }
            let cells = cfg
                .levels
                .iter()
                .zip(&q_true)
                .enumerate()
                .map(|(i, (&level, &qt))| {
                    let (rbias, rrmse) = if successes > 0 {
                        let m = successes as f64;
                        let rbias = sum[i] / m;
                        // rounding can push the mean square a hair below bias^2
                        let rrmse = math::sqrt(sum_sq[i] / m).max(math::abs(rbias));
                        (Some(rbias), Some(rrmse))
                    } else {
                        (None, None)
                    };
                    Cell {
                        level,
                        true_quantile: qt,
                        rbias,
                        rrmse,
                        ill_conditioned: math::abs(qt) < ILL_CONDITIONED,
                    }
                })
                .collect();
            MethodSummary {
                method: label.clone(),
                successes,
                failures: failed_reps.len(),
                failed_reps,
                cells,
                estimates,
            }
        })
        .collect();

    Ok(SimReport {
        true_params: cfg.true_params,
        n: cfg.n,
        reps: cfg.reps,
        seed: cfg.seed,
        stream_unit: cfg.stream_unit,
        levels: cfg.levels.clone(),
        methods,
    })
}

/// Sequential study over the configured methods.
pub fn run_study(cfg: &SimConfig) -> Result<SimReport> {
    cfg.validate()?;
    let reps: Vec<Replication> = (0..cfg.reps).map(|r| run_replication(cfg, r)).collect();
    let labels: Vec<String> = cfg.methods.iter().map(Method::name).collect();
    aggregate(cfg, &labels, &reps)
}

/// Sequential study with caller-supplied estimators in place of
/// `cfg.methods`.
pub fn run_study_with(cfg: &SimConfig, estimators: &[&dyn Estimator]) -> Result<SimReport> {
    cfg.validate()?;
    if estimators.is_empty() {
        return Err(Error::Config("at least one estimator is required".into()));
    }
    let reps: Vec<Replication> = (0..cfg.reps)
        .map(|r| run_replication_with(cfg, estimators, r))
        .collect();
    let labels: Vec<String> = estimators.iter().map(|e| e.label()).collect();
    aggregate(cfg, &labels, &reps)
}

/// Give each configuration of a grid its own stream unit (its position), so
/// no two configurations share random numbers even with equal seeds.
pub fn prepare_campaign(grid: &[SimConfig]) -> Result<Vec<SimConfig>> {
    if grid.is_empty() {
        return Err(Error::Input("campaign grid is empty".into()));
    }
    Ok(grid
        .iter()
        .enumerate()
        .map(|(i, c)| SimConfig {
            stream_unit: i as u32,
            ..c.clone()
        })
        .collect())
}

/// Run every configuration; a failing configuration does not stop the rest.
pub fn campaign(grid: &[SimConfig]) -> Result<Vec<Result<SimReport>>> {
    Ok(prepare_campaign(grid)?.iter().map(run_study).collect())
}
