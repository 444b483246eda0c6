//! Serializable reports and their text/CSV renderings.
//!
//! JSON field names are stable: `params`, `se`, `nll`, `converged`,
//! `method`, `gof`, `return_level`, `ci`. Non-finite numbers serialize as
//! JSON `null`.

use std::fmt::Write as _;

use kappa4_core::estimate::MethodFit;
use kappa4_core::gof::GofReport;
use kappa4_core::profile::ProfileCi;
use kappa4_core::study::SimReport;
use kappa4_core::{FailureReason, K4Params};
use serde::Serialize;

use crate::format::{opt17, short, sig17};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Params {
    pub mu: f64,
    pub sigma: f64,
    pub k: f64,
    pub h: f64,
}

impl From<K4Params> for Params {
    fn from(p: K4Params) -> Self {
        Self {
            mu: p.mu(),
            sigma: p.sigma(),
            k: p.k(),
            h: p.h(),
        }
    }
}

impl From<[f64; 4]> for Params {
    fn from(v: [f64; 4]) -> Self {
        Self {
            mu: v[0],
            sigma: v[1],
            k: v[2],
            h: v[3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetInfo {
    pub path: String,
    pub n: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodReport {
    pub method: String,
    pub converged: bool,
    pub params: Option<Params>,
    pub se: Option<Params>,
    pub nll: Option<f64>,
    pub penalized_nll: Option<f64>,
    pub iterations: Option<usize>,
    /// Set when the L-moment estimator produced no estimate.
    pub lme_failure: Option<String>,
    pub gof: Option<GofReport>,
}

pub fn failure_name(f: FailureReason) -> Option<String> {
    match f {
        FailureReason::None => None,
        FailureReason::RootSolveDiverged => Some("root_solve_diverged".into()),
        FailureReason::TauOutsideFeasible => Some("tau_outside_feasible".into()),
    }
}

impl MethodReport {
    pub fn new(fit: &MethodFit, gof: Option<GofReport>) -> Self {
        let r = fit.result.as_ref();
        Self {
            method: fit.method.name(),
            converged: fit.converged(),
            params: r.map(|r| r.params.into()),
            se: r.and_then(|r| r.se).map(Params::from),
            nll: r.map(|r| r.nll),
            penalized_nll: r.map(|r| r.penalized_nll),
            iterations: r.map(|r| r.iterations),
            lme_failure: failure_name(fit.lme_failure),
            gof,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub command: &'static str,
    pub seed: u64,
    pub config_sha256: String,
    pub dataset: DatasetInfo,
    pub bootstrap_reps: usize,
    pub methods: Vec<MethodReport>,
}

pub const FIT_CSV_HEADER: &str = "method,converged,mu,sigma,k,h,se_mu,se_sigma,se_k,se_h,nll,penalized_nll,iterations,lme_failure,mpae,ad,ad_clamped,ks,ad_pvalue,ks_pvalue,bootstrap_reps,bootstrap_failures";

impl FitReport {
    fn provenance(&self) -> String {
        format!(
            "# kappa4 fit dataset={} n={} seed={} config_sha256={}",
            self.dataset.path, self.dataset.n, self.seed, self.config_sha256
        )
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}", self.provenance());
        let _ = writeln!(s, "{FIT_CSV_HEADER}");
        for m in &self.methods {
            let p = m.params;
            let e = m.se;
            let g = m.gof.as_ref();
            let cells = [
                m.method.clone(),
                m.converged.to_string(),
                opt17(p.map(|p| p.mu)),
                opt17(p.map(|p| p.sigma)),
                opt17(p.map(|p| p.k)),
                opt17(p.map(|p| p.h)),
                opt17(e.map(|p| p.mu)),
                opt17(e.map(|p| p.sigma)),
                opt17(e.map(|p| p.k)),
                opt17(e.map(|p| p.h)),
                opt17(m.nll),
                opt17(m.penalized_nll),
                m.iterations.map(|i| i.to_string()).unwrap_or_default(),
                m.lme_failure.clone().unwrap_or_default(),
                opt17(g.map(|g| g.mpae)),
                opt17(g.map(|g| g.ad)),
                g.map(|g| g.ad_clamped.to_string()).unwrap_or_default(),
                opt17(g.map(|g| g.ks)),
                opt17(g.and_then(|g| g.ad_pvalue)),
                opt17(g.and_then(|g| g.ks_pvalue)),
                g.map(|g| g.bootstrap_reps.to_string()).unwrap_or_default(),
                g.map(|g| g.bootstrap_failures.to_string()).unwrap_or_default(),
            ];
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}", self.provenance());
        let mut rows = vec![[
            "method", "conv", "mu", "sigma", "k", "h", "nll", "MPAE", "AD", "KS", "p(AD)", "p(KS)",
        ]
        .map(String::from)
        .to_vec()];
        for m in &self.methods {
            let p = m.params;
            let g = m.gof.as_ref();
            let num = |x: Option<f64>| x.map(short).unwrap_or_else(|| "-".into());
            let mut conv = if m.converged { "yes" } else { "no" }.to_string();
            if let Some(f) = &m.lme_failure {
                conv = format!("no ({f})");
            }
            rows.push(vec![
                m.method.clone(),
                conv,
                num(p.map(|p| p.mu)),
                num(p.map(|p| p.sigma)),
                num(p.map(|p| p.k)),
                num(p.map(|p| p.h)),
                num(m.nll),
                num(g.map(|g| g.mpae)),
                num(g.map(|g| g.ad)),
                num(g.map(|g| g.ks)),
                num(g.and_then(|g| g.ad_pvalue)),
                num(g.and_then(|g| g.ks_pvalue)),
            ]);
        }
        s.push_str(&align(&rows));
        s
    }
}

/// Left-align the first column, right-align the rest.
pub fn align(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|v| v.chars().count()).max().unwrap_or(0))
        .collect();
    let mut s = String::new();
    for r in rows {
        let line: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(c, v)| {
                if c == 0 {
                    format!("{v:<w$}", w = widths[c])
                } else {
                    format!("{v:>w$}", w = widths[c])
                }
            })
            .collect();
        let _ = writeln!(s, "{}", line.join("  ").trim_end());
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CiReport {
    pub level: f64,
    pub cutoff: f64,
    pub lower: f64,
    pub upper: f64,
    pub lower_open: bool,
    pub upper_open: bool,
    pub lower_deviance: f64,
    pub upper_deviance: f64,
}

impl From<&ProfileCi> for CiReport {
    fn from(ci: &ProfileCi) -> Self {
        Self {
            level: ci.level,
            cutoff: ci.cutoff,
            lower: ci.lower.value,
            upper: ci.upper.value,
            lower_open: ci.lower.open,
            upper_open: ci.upper.open,
            lower_deviance: ci.lower.deviance,
            upper_deviance: ci.upper.deviance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TracePoint {
    pub return_level: f64,
    pub profile_nll: f64,
    pub deviance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapInterval {
    pub reps: usize,
    pub failures: usize,
    pub level: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReturnLevelReport {
    pub command: &'static str,
    pub seed: u64,
    pub config_sha256: String,
    pub dataset: DatasetInfo,
    pub method: String,
    pub converged: bool,
    pub years: f64,
    pub params: Params,
    pub return_level: f64,
    pub se: Option<f64>,
    pub ci: Option<CiReport>,
    pub note: Option<String>,
    pub bootstrap: Option<BootstrapInterval>,
    pub profile_trace: Vec<TracePoint>,
}

impl ReturnLevelReport {
    pub fn provenance(&self) -> String {
        format!(
            "# kappa4 return-level dataset={} method={} years={} seed={} config_sha256={}",
            self.dataset.path,
            self.method,
            sig17(self.years),
            self.seed,
            self.config_sha256
        )
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}", self.provenance());
        let p = self.params;
        let _ = writeln!(
            s,
            "parameters: mu={} sigma={} k={} h={}",
            sig17(p.mu),
            sig17(p.sigma),
            sig17(p.k),
            sig17(p.h)
        );
        let _ = writeln!(s, "{}-year return level: {}", self.years, sig17(self.return_level));
        match self.se {
            Some(se) => {
                let _ = writeln!(s, "standard error (delta method): {}", sig17(se));
            }
            None => {
                let _ = writeln!(s, "standard error: unavailable");
            }
        }
        if let Some(ci) = &self.ci {
            let open = |o: bool| if o { " (open: cutoff not reached)" } else { "" };
            let _ = writeln!(s, "profile-likelihood {}% interval:", ci.level * 100.0);
            let _ = writeln!(s, "  lower {}{} deviance {}", sig17(ci.lower), open(ci.lower_open), short(ci.lower_deviance));
            let _ = writeln!(s, "  upper {}{} deviance {}", sig17(ci.upper), open(ci.upper_open), short(ci.upper_deviance));
            let _ = writeln!(s, "  cutoff {}", sig17(ci.cutoff));
        }
        if let Some(note) = &self.note {
            let _ = writeln!(s, "note: {note}");
        }
        if let Some(b) = &self.bootstrap {
            let _ = writeln!(
                s,
                "parametric bootstrap {}% interval: {} .. {} ({} reps, {} failed)",
                b.level * 100.0,
                opt17(b.lower),
                opt17(b.upper),
                b.reps,
                b.failures
            );
        }
        s
    }

    pub fn trace_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}", self.provenance());
        let _ = writeln!(s, "return_level,profile_nll,deviance");
        for t in &self.profile_trace {
            let _ = writeln!(s, "{},{},{}", sig17(t.return_level), sig17(t.profile_nll), sig17(t.deviance));
        }
        s
    }
}

pub const STUDY_CSV_HEADER: &str =
    "config,mu,sigma,k,h,n,reps,method,level,true_quantile,rbias,rrmse,ill_conditioned,successes,failures";

/// One row per configuration x method x level.
pub fn study_csv(reports: &[(usize, &SimReport)], seed: u64, digest: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# kappa4 simulate seed={seed} config_sha256={digest}");
    let _ = writeln!(s, "{STUDY_CSV_HEADER}");
    for (idx, r) in reports {
        let p = r.true_params;
        for m in &r.methods {
            for c in &m.cells {
                let _ = writeln!(
                    s,
                    "{idx},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                    sig17(p.mu()),
                    sig17(p.sigma()),
                    sig17(p.k()),
                    sig17(p.h()),
                    r.n,
                    r.reps,
                    m.method,
                    sig17(c.level),
                    sig17(c.true_quantile),
                    opt17(c.rbias),
                    opt17(c.rrmse),
                    c.ill_conditioned,
                    m.successes,
                    m.failures
                );
            }
        }
    }
    s
}

/// RRMSE and RBIAS tables for one configuration, methods by quantile level.
pub fn study_tables(idx: usize, r: &SimReport) -> String {
    let p = r.true_params;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "Configuration {idx}: mu={} sigma={} k={} h={} n={} reps={} (stream unit {})",
        p.mu(),
        p.sigma(),
        p.k(),
        p.h(),
        r.n,
        r.reps,
        r.stream_unit
    );
    let mut flagged = false;
    for (title, pick) in [
        ("RRMSE", (|c: &kappa4_core::study::Cell| c.rrmse) as fn(&kappa4_core::study::Cell) -> Option<f64>),
        ("RBIAS", |c: &kappa4_core::study::Cell| c.rbias),
    ] {
        let _ = writeln!(s, "\n{title} of x(F)");
        let mut header = vec!["Methods".to_string()];
        header.extend(r.levels.iter().map(|l| format!("{l}")));
        header.push("M".into());
        let mut rows = vec![header];
        for m in &r.methods {
            let mut row = vec![m.method.clone()];
            for c in &m.cells {
                let mut v = pick(c).map(|x| format!("{x:.4}")).unwrap_or_else(|| "n/a".into());
                if c.ill_conditioned {
                    v.push('*');
                    flagged = true;
                }
                row.push(v);
            }
            row.push(m.successes.to_string());
            rows.push(row);
        }
        s.push_str(&align(&rows));
    }
    if flagged {
        let _ = writeln!(s, "* |true quantile| < 1e-3: relative errors are ill-conditioned");
    }
    s
}
