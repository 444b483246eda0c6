//! The subcommands. Each returns its exit code or an error; printing to the
//! terminal goes through the `out` writer so tests can capture it.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use kappa4_core::estimate::{MethodEstimator, MethodFit};
use kappa4_core::gof::GofReport;
use kappa4_core::profile::{self, ProfileOptions};
use kappa4_core::{likelihood, rng, K4Params, Kappa4, Method, OptimizerConfig};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{self, sha256_hex, RunConfig};
use crate::dataset::Dataset;
use crate::error::{CliError, EXIT_INPUT, EXIT_OK};
use crate::format::{opt17, sig17};
use crate::parallel;
use crate::report::{
    self, BootstrapInterval, CiReport, DatasetInfo, FitReport, MethodReport, ReturnLevelReport, TracePoint,
};

pub type Outcome = Result<i32, CliError>;

/// Points on the density grid written by `plotdata`.
pub const DENSITY_POINTS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Json,
    Csv,
}

/// Write `text` to `path`, or to `out` when no path is given.
pub fn emit(path: Option<&Path>, text: &str, out: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| CliError::io(Path::new("<stdout>"), e)),
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn dataset_info(d: &Dataset) -> DatasetInfo {
    DatasetInfo {
        path: d.path.display().to_string(),
        n: d.values.len(),
        sha256: d.sha256.clone(),
    }
}

fn method_names(methods: &[Method]) -> String {
    methods.iter().map(Method::name).collect::<Vec<_>>().join(",")
}

/// Resolve a `--method` value: `mle`, `lme`, a combination name, or `all`.
pub fn parse_method_arg(value: &str) -> Result<Vec<Method>, CliError> {
    config::parse_methods(value).map_err(CliError::Input)
}

fn single_method(value: &str) -> Result<Method, CliError> {
    Method::parse(value).map_err(|e| CliError::Input(format!("--method: {e}")))
}

fn run_digest(lines: &[(&str, String)]) -> String {
    let mut s = String::new();
    for (k, v) in lines {
        let _ = writeln!(s, "{k} = {v}");
    }
    sha256_hex(s.as_bytes())
}

pub struct FitArgs {
    pub data: PathBuf,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub bootstrap: Option<usize>,
    pub format: Format,
    pub output: Option<PathBuf>,
    pub optimizer: OptimizerConfig,
}

fn gof_for(
    fit: &MethodFit,
    data: &[f64],
    bootstrap: Option<usize>,
    seed: u64,
    cfg: &OptimizerConfig,
) -> Result<Option<GofReport>, CliError> {
    let Some(params) = fit.usable_params() else {
        return Ok(None);
    };
    let report = GofReport::new(data, &params)?;
    Ok(Some(match bootstrap {
        Some(reps) => {
            let est = MethodEstimator {
                method: fit.method,
                cfg: *cfg,
            };
            let p = parallel::bootstrap_from_fit(data, &params, &est, reps, seed)?;
            report.with_bootstrap(&p)
        }
        None => report,
    }))
}

pub fn fit(args: &FitArgs, out: &mut dyn Write) -> Outcome {
    if let Some(b) = args.bootstrap {
        kappa4_core::gof::check_bootstrap_reps(b)?;
    }
    let data = Dataset::read_for_fit(&args.data)?;
    let fits = parallel::fit_methods(&data.values, &args.methods, &args.optimizer)?;
    let mut methods = Vec::with_capacity(fits.len());
    for f in &fits {
        let gof = gof_for(f, &data.values, args.bootstrap, args.seed, &args.optimizer)?;
        methods.push(MethodReport::new(f, gof));
    }
    let digest = run_digest(&[
        ("command", "fit".into()),
        ("dataset_sha256", data.sha256.clone()),
        ("methods", method_names(&args.methods)),
        ("seed", args.seed.to_string()),
        ("bootstrap", args.bootstrap.map(|b| b.to_string()).unwrap_or_default()),
        ("optimizer", format!("{:?}", args.optimizer)),
    ]);
    let report = FitReport {
        command: "fit",
        seed: args.seed,
        config_sha256: digest,
        dataset: dataset_info(&data),
        bootstrap_reps: args.bootstrap.unwrap_or(0),
        methods,
    };
    let text = match args.format {
        Format::Json => json(&report),
        Format::Csv => report.to_csv(),
        Format::Text => report.to_text(),
    };
    emit(args.output.as_deref(), &text, out)?;
    if fits.iter().any(MethodFit::converged) {
        Ok(EXIT_OK)
    } else {
        Err(CliError::NoConvergence)
    }
}

pub struct SampleArgs {
    pub params: [f64; 4],
    pub n: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

pub fn sample(args: &SampleArgs, out: &mut dyn Write) -> Outcome {
    if args.n == 0 {
        return Err(CliError::Input("-n must be at least 1".into()));
    }
    let params = K4Params::from_array(args.params)?;
    let values = params.dist().sample(args.n, args.seed)?;
    let [mu, sigma, k, h] = args.params.map(sig17);
    let digest = run_digest(&[
        ("command", "sample".into()),
        ("params", format!("{mu},{sigma},{k},{h}")),
        ("n", args.n.to_string()),
        ("seed", args.seed.to_string()),
    ]);
    let mut s = String::with_capacity(24 * (args.n + 4));
    let _ = writeln!(
        s,
        "# kappa4 sample mu={mu} sigma={sigma} k={k} h={h} n={} seed={} config_sha256={digest}",
        args.n, args.seed
    );
    for v in values {
        let _ = writeln!(s, "{}", sig17(v));
    }
    emit(args.output.as_deref(), &s, out)?;
    Ok(EXIT_OK)
}

pub struct SimulateArgs {
    pub config: PathBuf,
    pub output: PathBuf,
}

#[derive(Serialize)]
struct ConfigEntry {
    index: usize,
    mu: f64,
    sigma: f64,
    k: f64,
    h: f64,
    n: usize,
    reps: usize,
    status: &'static str,
    error: Option<String>,
    successes: Vec<(String, usize)>,
    failures: Vec<(String, usize)>,
}

#[derive(Serialize)]
struct Manifest {
    command: &'static str,
    seed: u64,
    config_sha256: String,
    config: String,
    files: Vec<&'static str>,
    configs: Vec<ConfigEntry>,
}

pub fn simulate(args: &SimulateArgs, out: &mut dyn Write) -> Outcome {
    let cfg = RunConfig::read(&args.config)?;
    let grid = cfg.grid()?;
    create_dir(&args.output)?;
    let digest = cfg.digest();
    let results = parallel::campaign(&grid)?;

    let mut ok = Vec::new();
    let mut entries = Vec::new();
    let mut tables = String::new();
    let _ = writeln!(tables, "# kappa4 simulate seed={} config_sha256={digest}", cfg.seed);
    for (i, (c, r)) in grid.iter().zip(&results).enumerate() {
        let p = c.true_params;
        let mut e = ConfigEntry {
            index: i,
            mu: p.mu(),
            sigma: p.sigma(),
            k: p.k(),
            h: p.h(),
            n: c.n,
            reps: c.reps,
            status: "ok",
            error: None,
            successes: Vec::new(),
            failures: Vec::new(),
        };
        match r {
            Ok(rep) => {
                e.successes = rep.methods.iter().map(|m| (m.method.clone(), m.successes)).collect();
                e.failures = rep.methods.iter().map(|m| (m.method.clone(), m.failures)).collect();
                tables.push('\n');
                tables.push_str(&report::study_tables(i, rep));
                ok.push((i, rep));
            }
            Err(err) => {
                e.status = "error";
                e.error = Some(err.to_string());
                let _ = writeln!(out, "configuration {i} failed: {err}");
            }
        }
        entries.push(e);
    }

    let write = |name: &str, text: &str| -> Result<(), CliError> {
        let path = args.output.join(name);
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    };
    write("results.csv", &report::study_csv(&ok, cfg.seed, &digest))?;
    write("tables.txt", &tables)?;
    let manifest = Manifest {
        command: "simulate",
        seed: cfg.seed,
        config_sha256: digest,
        config: cfg.canonical(),
        files: vec!["results.csv", "tables.txt", "manifest.json"],
        configs: entries,
    };
    write("manifest.json", &json(&manifest))?;
    let _ = writeln!(
        out,
        "{} of {} configurations completed; results in {}",
        ok.len(),
        grid.len(),
        args.output.display()
    );
    Ok(if ok.is_empty() { EXIT_INPUT } else { EXIT_OK })
}

pub struct ReturnLevelArgs {
    pub data: PathBuf,
    pub years: f64,
    pub method: String,
    pub profile_ci: Option<f64>,
    pub bootstrap: Option<usize>,
    pub seed: u64,
    pub trace: Option<PathBuf>,
    pub format: Format,
    pub output: Option<PathBuf>,
    pub optimizer: OptimizerConfig,
}

/// Linear-interpolation sample quantile of sorted values.
fn percentile(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo]))
}

fn bootstrap_interval(
    fitted: &K4Params,
    n: usize,
    method: Method,
    cfg: &OptimizerConfig,
    years: f64,
    reps: usize,
    level: f64,
    seed: u64,
) -> Result<BootstrapInterval, CliError> {
    kappa4_core::gof::check_bootstrap_reps(reps)?;
    let dist = fitted.dist();
    let mut levels: Vec<f64> = (0..reps)
        .into_par_iter()
        .filter_map(|b| {
            let mut r = rng::substream(seed, b as u64);
            let x = dist.sample_with(&mut r, n);
            let p = method.fit(&x, cfg).ok()?.usable_params()?;
            likelihood::return_level(&p, years).ok().filter(|v| v.is_finite())
        })
        .collect();
    levels.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok(BootstrapInterval {
        reps,
        failures: reps - levels.len(),
        level,
        lower: percentile(&levels, tail),
        upper: percentile(&levels, 1.0 - tail),
    })
}

pub fn return_level(args: &ReturnLevelArgs, out: &mut dyn Write) -> Outcome {
    let method = single_method(&args.method)?;
    if !(args.years > 1.0) || !args.years.is_finite() {
        return Err(CliError::Input(format!("-T must exceed 1, got {}", args.years)));
    }
    if let Some(l) = args.profile_ci {
        if !(l > 0.0 && l < 1.0) {
            return Err(CliError::Input(format!("--profile-ci level must lie in (0, 1), got {l}")));
        }
    }
    let data = Dataset::read_for_fit(&args.data)?;
    let x = &data.values;
    let fit = method.fit(x, &args.optimizer)?;
    let Some(result) = fit.result.as_ref().filter(|r| r.converged) else {
        let why = match report::failure_name(fit.lme_failure) {
            Some(f) => format!("{} failed: {f}", method.name()),
            None => format!("{} did not converge", method.name()),
        };
        let _ = writeln!(out, "{why}");
        return Err(CliError::NoConvergence);
    };
    let params = result.params;
    let point = likelihood::return_level(&params, args.years)?;
    let combo = method.combo();
    let likelihood_based = method != Method::Lme;

    let se = if likelihood_based {
        likelihood::covariance(&params, x, &combo)
            .and_then(|c| likelihood::return_level_se(&params, &c, args.years).ok())
            .filter(|s| s.is_finite())
    } else {
        None
    };

    let mut ci = None;
    let mut trace = Vec::new();
    let mut note = None;
    if let Some(level) = args.profile_ci {
        if likelihood_based {
            let p = profile::profile_from_fit(
                x,
                result,
                args.years,
                level,
                &combo,
                &args.optimizer,
                &ProfileOptions::default(),
            )?;
            if p.is_open() {
                note = Some("the profile deviance did not reach the cutoff on at least one side; the interval is open there".into());
            }
            trace = p
                .trace
                .iter()
                .map(|t| TracePoint {
                    return_level: t.return_level,
                    profile_nll: t.profile_nll,
                    deviance: t.deviance,
                })
                .collect();
            ci = Some(CiReport::from(&p));
        } else {
            note = Some("profile likelihood intervals are not defined for the L-moment estimator; use --bootstrap".into());
        }
    }

    let bootstrap = match args.bootstrap {
        Some(reps) => Some(bootstrap_interval(
            &params,
            x.len(),
            method,
            &args.optimizer,
            args.years,
            reps,
            args.profile_ci.unwrap_or(0.95),
            args.seed,
        )?),
        None => None,
    };

    let digest = run_digest(&[
        ("command", "return-level".into()),
        ("dataset_sha256", data.sha256.clone()),
        ("method", method.name()),
        ("years", sig17(args.years)),
        ("profile_ci", args.profile_ci.map(sig17).unwrap_or_default()),
        ("bootstrap", args.bootstrap.map(|b| b.to_string()).unwrap_or_default()),
        ("seed", args.seed.to_string()),
        ("optimizer", format!("{:?}", args.optimizer)),
    ]);
    let report = ReturnLevelReport {
        command: "return-level",
        seed: args.seed,
        config_sha256: digest,
        dataset: dataset_info(&data),
        method: method.name(),
        converged: true,
        years: args.years,
        params: params.into(),
        return_level: point,
        se,
        ci,
        note,
        bootstrap,
        profile_trace: trace,
    };
    if let Some(path) = &args.trace {
        if report.ci.is_none() {
            return Err(CliError::Input("--trace needs a likelihood-based --profile-ci".into()));
        }
        std::fs::write(path, report.trace_csv()).map_err(|e| CliError::io(path, e))?;
    }
    let text = match args.format {
        Format::Json => json(&report),
        Format::Csv => {
            let mut s = String::new();
            let _ = writeln!(s, "{}", report.provenance());
            let _ = writeln!(s, "method,years,return_level,se,ci_level,ci_lower,ci_upper,lower_open,upper_open");
            let c = report.ci.as_ref();
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                report.method,
                sig17(report.years),
                sig17(point),
                opt17(se),
                opt17(c.map(|c| c.level)),
                opt17(c.map(|c| c.lower)),
                opt17(c.map(|c| c.upper)),
                c.map(|c| c.lower_open.to_string()).unwrap_or_default(),
                c.map(|c| c.upper_open.to_string()).unwrap_or_default(),
            );
            s
        }
        Format::Text => report.to_text(),
    };
    emit(args.output.as_deref(), &text, out)?;
    Ok(EXIT_OK)
}

pub struct PlotArgs {
    pub data: PathBuf,
    pub method: String,
    pub output: PathBuf,
    pub seed: u64,
    pub optimizer: OptimizerConfig,
}

/// Number of histogram bins by Sturges' rule.
pub fn sturges_bins(n: usize) -> usize {
    (n.max(1) as f64).log2().ceil() as usize + 1
}

/// `DENSITY_POINTS` evenly spaced `(x, pdf)` pairs from the 0.001 to the
/// 0.999 quantile.
pub fn density_grid(dist: &Kappa4) -> Result<Vec<(f64, f64)>, CliError> {
    let lo = dist.quantile(0.001)?;
    let hi = dist.quantile(0.999)?;
    let step = (hi - lo) / (DENSITY_POINTS - 1) as f64;
    (0..DENSITY_POINTS)
        .map(|i| {
            let x = if i == DENSITY_POINTS - 1 { hi } else { lo + step * i as f64 };
            Ok((x, dist.pdf(x)?))
        })
        .collect()
}

/// `(lower, upper, count)` over `[min, max]`; the last bin is closed.
pub fn histogram(values: &[f64], bins: usize) -> Vec<(f64, f64, usize)> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for &v in values {
        let i = (((v - lo) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            let upper = if i == bins - 1 { hi.max(lo + width) } else { lo + width * (i + 1) as f64 };
            (lo + width * i as f64, upper, c)
        })
        .collect()
}

pub fn plotdata(args: &PlotArgs, out: &mut dyn Write) -> Outcome {
    let method = single_method(&args.method)?;
    let data = Dataset::read_for_fit(&args.data)?;
    let fit = method.fit(&data.values, &args.optimizer)?;
    let Some(params) = fit.usable_params() else {
        let _ = writeln!(out, "{} did not produce a converged fit", method.name());
        return Err(CliError::NoConvergence);
    };
    let dist = params.dist();
    create_dir(&args.output)?;
    let digest = run_digest(&[
        ("command", "plotdata".into()),
        ("dataset_sha256", data.sha256.clone()),
        ("method", method.name()),
        ("seed", args.seed.to_string()),
        ("optimizer", format!("{:?}", args.optimizer)),
    ]);
    let head = format!(
        "# kappa4 plotdata dataset={} method={} mu={} sigma={} k={} h={} seed={} config_sha256={digest}\n",
        data.path.display(),
        method.name(),
        sig17(params.mu()),
        sig17(params.sigma()),
        sig17(params.k()),
        sig17(params.h()),
        args.seed
    );

    let mut density = format!("{head}x,pdf\n");
    for (x, f) in density_grid(&dist)? {
        let _ = writeln!(density, "{},{}", sig17(x), sig17(f));
    }

    let mut sorted = data.values.clone();
    sorted.sort_by(f64::total_cmp);
    let mut qq = format!("{head}plotting_position,empirical,fitted\n");
    for (x, p) in sorted.iter().zip(kappa4_core::gof::plotting_positions(sorted.len())) {
        let _ = writeln!(qq, "{},{},{}", sig17(p), sig17(*x), sig17(dist.quantile(p)?));
    }

    let mut hist = format!("{head}lower,upper,count,density\n");
    let n = sorted.len() as f64;
    for (lo, hi, c) in histogram(&sorted, sturges_bins(sorted.len())) {
        let _ = writeln!(hist, "{},{},{c},{}", sig17(lo), sig17(hi), sig17(c as f64 / (n * (hi - lo))));
    }

    for (name, text) in [("density.csv", density), ("qq.csv", qq), ("histogram.csv", hist)] {
        let path = args.output.join(name);
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    }
    let _ = writeln!(out, "wrote density.csv, qq.csv and histogram.csv to {}", args.output.display());
    Ok(EXIT_OK)
}

/// Exit code for an outcome, printing any error to `err`.
pub fn finish(outcome: Outcome, err: &mut dyn Write) -> i32 {
    match outcome {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sturges_and_histogram() {
        assert_eq!(sturges_bins(30), 6);
        assert_eq!(sturges_bins(32), 6);
        assert_eq!(sturges_bins(33), 7);
        let h = histogram(&[0.0, 0.5, 1.0, 1.0], 2);
        assert_eq!(h.iter().map(|b| b.2).sum::<usize>(), 4);
        assert_eq!(h[1].2, 3);
    }

    #[test]
    fn percentile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(percentile(&v, 0.5), Some(3.0));
        assert_eq!(percentile(&v, 0.125), Some(1.5));
        assert_eq!(percentile(&[], 0.5), None);
    }

    #[test]
    fn density_grid_integrates_close_to_mass() {
        let d = K4Params::new(0.0, 1.0, -0.2, -0.2).unwrap().dist();
        let g = density_grid(&d).unwrap();
        assert_eq!(g.len(), DENSITY_POINTS);
        let area: f64 = g.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum();
        assert!((area - 0.998).abs() < 2e-3, "{area}");
    }
}
