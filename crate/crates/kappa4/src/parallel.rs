//! Multi-threaded drivers. Work items draw from their own random substreams
//! and results are gathered in index order, so output does not depend on the
//! number of threads.

use kappa4_core::estimate::{Estimator, Method, MethodFit};
use kappa4_core::gof::{self, BootstrapPvalues};
use kappa4_core::lmoments;
use kappa4_core::study::{self, Replication, SimConfig, SimReport};
use kappa4_core::{K4Params, OptimizerConfig, Result};
use rayon::prelude::*;

pub fn run_study(cfg: &SimConfig) -> Result<SimReport> {
    cfg.validate()?;
    let reps: Vec<Replication> = (0..cfg.reps)
        .into_par_iter()
        .map(|r| study::run_replication(cfg, r))
        .collect();
    let labels: Vec<String> = cfg.methods.iter().map(Method::name).collect();
    study::aggregate(cfg, &labels, &reps)
}

/// Run a campaign; a failing configuration yields its error without
/// stopping the others.
pub fn campaign(grid: &[SimConfig]) -> Result<Vec<Result<SimReport>>> {
    Ok(study::prepare_campaign(grid)?.iter().map(run_study).collect())
}

/// Fit several methods to the same data concurrently, sharing one L-moment
/// estimate.
pub fn fit_methods(data: &[f64], methods: &[Method], cfg: &OptimizerConfig) -> Result<Vec<MethodFit>> {
    let lme = lmoments::fit_lme(data)?;
    methods
        .par_iter()
        .map(|m| m.fit_with(data, cfg, Some(&lme)))
        .collect()
}

pub fn bootstrap_from_fit<E: Estimator + Sync + ?Sized>(
    data: &[f64],
    fitted: &K4Params,
    estimator: &E,
    reps: usize,
    seed: u64,
) -> Result<BootstrapPvalues> {
    gof::check_bootstrap_reps(reps)?;
    let observed_ad = gof::ad_statistic(data, fitted)?.value;
    let observed_ks = gof::ks_statistic(data, fitted)?;
    let replicates: Vec<Option<(f64, f64)>> = (0..reps)
        .into_par_iter()
        .map(|b| gof::bootstrap_replicate(fitted, data.len(), estimator, seed, b))
        .collect();
    Ok(gof::summarize_bootstrap(observed_ad, observed_ks, &replicates))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_sequential_study() {
        let cfg = SimConfig {
            reps: 6,
            methods: vec![Method::Mle, Method::Lme, Method::parse("MPLE.MSo(k)MSo(h)").unwrap()],
            ..SimConfig::default()
        };
        let a = run_study(&cfg).unwrap();
        let b = study::run_study(&cfg).unwrap();
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let c = pool.install(|| run_study(&cfg)).unwrap();
        assert_eq!(a, c);
    }
}
