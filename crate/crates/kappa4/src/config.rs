//! `key = value` run configuration for simulation campaigns.
//!
//! ```text
//! # the four headline settings at n = 30
//! shapes = -0.2:-0.2, -0.2:0.2, 0.4:-0.5, 0.4:0.5
//! n = 30
//! reps = 1000
//! levels = 0.90, 0.95, 0.99, 0.995, 0.999
//! methods = all
//! seed = 20240101
//! ```
//!
//! | key | meaning | default |
//! |-----|---------|---------|
//! | `mu`, `sigma` | true location and scale | `0`, `1` |
//! | `k`, `h` | a single true shape pair (use together) | |
//! | `shapes` | list of `k:h` pairs; the campaign grid | `-0.2:-0.2` |
//! | `n` | list of sample sizes, crossed with `shapes` | `30` |
//! | `reps` | replications per configuration | `1000` |
//! | `levels` | quantile levels in `(0, 1)` | `0.90, 0.95, 0.99, 0.995, 0.999` |
//! | `methods` | `all`, or a list of `mle`, `lme` and combination names | `all` |
//! | `seed` | master seed | `1` |
//! | `rel_tolerance`, `max_iterations`, `restarts` | optimizer controls | `1e-10`, `2000`, `3` |
//! | `start_strategy` | `lme`, `moment` or `grid` | `lme` |
//!
//! Unknown or repeated keys and unparsable values are all reported, each
//! with its line number.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use kappa4_core::study::{SimConfig, DEFAULT_LEVELS};
use kappa4_core::{K4Params, Method, OptimizerConfig, StartStrategy};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const KEYS: [&str; 14] = [
    "mu",
    "sigma",
    "k",
    "h",
    "shapes",
    "n",
    "reps",
    "levels",
    "methods",
    "seed",
    "rel_tolerance",
    "max_iterations",
    "restarts",
    "start_strategy",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mu: f64,
    pub sigma: f64,
    pub shapes: Vec<(f64, f64)>,
    pub sizes: Vec<usize>,
    pub reps: usize,
    pub levels: Vec<f64>,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub optimizer: OptimizerConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mu: 0.0,
            sigma: 1.0,
            shapes: vec![(-0.2, -0.2)],
            sizes: vec![30],
            reps: 1000,
            levels: DEFAULT_LEVELS.to_vec(),
            methods: Method::all(),
            seed: 1,
            optimizer: OptimizerConfig::default(),
        }
    }
}

fn list<T, F: Fn(&str) -> Result<T, String>>(value: &str, item: F) -> Result<Vec<T>, String> {
    let items: Vec<&str> = value.split([',', ';']).map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err("empty list".into());
    }
    items.into_iter().map(item).collect()
}

fn real(s: &str) -> Result<f64, String> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("not a finite number: {s:?}"))
}

fn count(s: &str) -> Result<usize, String> {
    s.parse::<usize>().map_err(|_| format!("not a non-negative integer: {s:?}"))
}

fn shape_pair(s: &str) -> Result<(f64, f64), String> {
    let (k, h) = s.split_once(':').ok_or_else(|| format!("expected k:h, got {s:?}"))?;
    Ok((real(k.trim())?, real(h.trim())?))
}

fn strategy(s: &str) -> Result<StartStrategy, String> {
    match s.to_ascii_lowercase().as_str() {
        "lme" => Ok(StartStrategy::LmeStart),
        "moment" => Ok(StartStrategy::MomentStart),
        "grid" => Ok(StartStrategy::GridStart),
        _ => Err(format!("start_strategy must be lme, moment or grid, got {s:?}")),
    }
}

fn strategy_name(s: StartStrategy) -> &'static str {
    match s {
        StartStrategy::LmeStart => "lme",
        StartStrategy::MomentStart => "moment",
        StartStrategy::GridStart => "grid",
    }
}

/// Parse `all` or a list of method names.
pub fn parse_methods(value: &str) -> Result<Vec<Method>, String> {
    if value.trim().eq_ignore_ascii_case("all") {
        return Ok(Method::all());
    }
    list(value, |s| Method::parse(s).map_err(|e| e.to_string()))
}

impl RunConfig {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|m| CliError::Input(format!("{}: {m}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut cfg = RunConfig::default();
        let mut errors = Vec::new();
        let mut seen = BTreeSet::new();
        let (mut k, mut h, mut shapes) = (None, None, None);

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                errors.push(format!("line {line_no}: expected key = value"));
                continue;
            };
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                errors.push(format!("line {line_no}: unknown key {key:?} (valid keys: {})", KEYS.join(", ")));
                continue;
            }
            if !seen.insert(key.to_string()) {
                errors.push(format!("line {line_no}: key {key:?} given twice"));
                continue;
            }
            let result: Result<(), String> = (|| {
                match key {
                    "mu" => cfg.mu = real(value)?,
                    "sigma" => cfg.sigma = real(value)?,
                    "k" => k = Some(real(value)?),
                    "h" => h = Some(real(value)?),
                    "shapes" => shapes = Some(list(value, shape_pair)?),
                    "n" => cfg.sizes = list(value, count)?,
                    "reps" => cfg.reps = count(value)?,
                    "levels" => cfg.levels = list(value, real)?,
                    "methods" => cfg.methods = parse_methods(value)?,
                    "seed" => cfg.seed = value.parse().map_err(|_| format!("not a 64-bit seed: {value:?}"))?,
                    "rel_tolerance" => cfg.optimizer.rel_tolerance = real(value)?,
                    "max_iterations" => cfg.optimizer.max_iterations = count(value)?,
                    "restarts" => cfg.optimizer.restarts = count(value)?,
                    "start_strategy" => cfg.optimizer.start_strategy = strategy(value)?,
                    _ => unreachable!("key list checked above"),
                }
                Ok(())
            })();
            if let Err(m) = result {
                errors.push(format!("line {line_no}: {key}: {m}"));
            }
        }

        match (k, h, shapes) {
            (None, None, Some(s)) => cfg.shapes = s,
            (Some(k), Some(h), None) => cfg.shapes = vec![(k, h)],
            (None, None, None) => {}
            (_, _, Some(_)) => errors.push("use either k and h or shapes, not both".into()),
            _ => errors.push("k and h must be given together".into()),
        }
        if errors.is_empty() {
            if let Err(e) = cfg.grid() {
                errors.push(e.to_string());
            }
        }
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(errors.join("\n"))
        }
    }

    /// The campaign grid: every shape pair crossed with every sample size.
    pub fn grid(&self) -> Result<Vec<SimConfig>, CliError> {
        let mut out = Vec::with_capacity(self.shapes.len() * self.sizes.len());
        for &(k, h) in &self.shapes {
            let true_params = K4Params::new(self.mu, self.sigma, k, h)?;
            for &n in &self.sizes {
                let c = SimConfig {
                    true_params,
                    n,
                    reps: self.reps,
                    levels: self.levels.clone(),
                    methods: self.methods.clone(),
                    seed: self.seed,
                    stream_unit: 0,
                    optimizer: self.optimizer,
                };
                c.validate()?;
                out.push(c);
            }
        }
        Ok(out)
    }

    /// Fully resolved configuration, one `key = value` per line in a fixed
    /// order; the digest is taken over this text.
    pub fn canonical(&self) -> String {
        let join = |v: Vec<String>| v.join(", ");
        let mut s = String::new();
        let _ = writeln!(s, "mu = {}", self.mu);
        let _ = writeln!(s, "sigma = {}", self.sigma);
        let _ = writeln!(s, "shapes = {}", join(self.shapes.iter().map(|(k, h)| format!("{k}:{h}")).collect()));
        let _ = writeln!(s, "n = {}", join(self.sizes.iter().map(|n| n.to_string()).collect()));
        let _ = writeln!(s, "reps = {}", self.reps);
        let _ = writeln!(s, "levels = {}", join(self.levels.iter().map(|l| l.to_string()).collect()));
        let _ = writeln!(s, "methods = {}", join(self.methods.iter().map(Method::name).collect()));
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "rel_tolerance = {}", self.optimizer.rel_tolerance);
        let _ = writeln!(s, "max_iterations = {}", self.optimizer.max_iterations);
        let _ = writeln!(s, "restarts = {}", self.optimizer.restarts);
        let _ = writeln!(s, "start_strategy = {}", strategy_name(self.optimizer.start_strategy));
        s
    }

    pub fn digest(&self) -> String {
        sha256_hex(self.canonical().as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}
