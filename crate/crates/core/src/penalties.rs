//! Penalty functions on the shape parameters.
//!
//! Two families are used:
//!
//! * the exponential form `exp(-lambda (1/(c + x) - d)^alpha)` on a negative
//!   interval `(lower, 0)`, equal to 1 for `x >= 0` and 0 for `x <= lower`
//!   (`c = d = 1`, `lower = -1` for the classical version on `k`);
//! * scaled beta densities `(x - lo)^(p-1) (hi - x)^(q-1) / B_E(p, q)` on
//!   `(lo, hi)`, zero elsewhere.
//!
//! A joint penalty treats `k` and `h` as independent, so its logarithm is the
//! sum of the two marginal log-penalties. A zero penalty is `-inf` in log space
//! and acts as a hard barrier in the optimizer.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{input_err, Result};
use crate::math;

/// `B_E(p, q) = integral over (lo, hi) of (x - lo)^(p-1) (hi - x)^(q-1) dx`,
/// which equals `(hi - lo)^(p+q-1) B(p, q)`.
pub fn b_e_normalizer(p: f64, q: f64, lo: f64, hi: f64) -> f64 {
    math::exp(ln_b_e_normalizer(p, q, lo, hi))
}

fn ln_b_e_normalizer(p: f64, q: f64, lo: f64, hi: f64) -> f64 {
    (p + q - 1.0) * math::ln(hi - lo) + math::ln_beta(p, q)
}

/// Hyperparameters of the exponential (Coles–Dixon style) penalty.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CdForm {
    pub lambda: f64,
    pub alpha: f64,
    /// `c` in `1/(c + x)`.
    pub shift: f64,
    /// `d` subtracted from `1/(c + x)`.
    pub offset: f64,
    /// Penalty is zero at and below this value.
    pub lower: f64,
}

impl CdForm {
    /// `lambda = alpha = 1` on `(-1, 0)`.
    pub const fn original() -> Self {
        Self {
            lambda: 1.0,
            alpha: 1.0,
            shift: 1.0,
            offset: 1.0,
            lower: -1.0,
        }
    }

    /// Adjusted to `(-1.2, 0)` with `c = 1.5`; `d = 2/3` keeps the penalty
    /// continuous at zero.
    pub const fn adjusted() -> Self {
        Self {
            lambda: 1.0,
            alpha: 1.0,
            shift: 1.5,
            offset: 2.0 / 3.0,
            lower: -1.2,
        }
    }

    /// The adjusted form with the printed constant `d = 0.67`, which lets the
    /// penalty exceed 1 just below zero.
    pub const fn adjusted_literal() -> Self {
        Self {
            offset: 0.67,
            ..Self::adjusted()
        }
    }

    pub fn ln_value(&self, x: f64) -> f64 {
        if x >= 0.0 {
            return 0.0;
        }
        if x <= self.lower || x.is_nan() {
            return f64::NEG_INFINITY;
        }
        let mut base = 1.0 / (self.shift + x) - self.offset;
        if base < 0.0 && self.alpha != math::floor(self.alpha) {
            base = 0.0;
        }
        -self.lambda * math::powf(base, self.alpha)
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.alpha >= 0.0) {
            return Err(input_err!("penalty lambda and alpha must be non-negative"));
        }
        if !(self.lower < 0.0 && self.shift + self.lower >= 0.0) {
            return Err(input_err!(
                "exponential penalty needs lower < 0 and shift + lower >= 0"
            ));
        }
        Ok(())
    }
}

/// Hyperparameters of a beta-density penalty on `(lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BetaForm {
    pub p: f64,
    pub q: f64,
    pub lo: f64,
    pub hi: f64,
}

impl BetaForm {
    /// `p = 6`, `q = 9` on `(-0.5, 0.5)`.
    pub const fn martins_stedinger() -> Self {
        Self {
            p: 6.0,
            q: 9.0,
            lo: -0.5,
            hi: 0.5,
        }
    }

    /// `p = q = 2.5` on `(-0.5, 0.5)`.
    pub const fn park() -> Self {
        Self {
            p: 2.5,
            q: 2.5,
            lo: -0.5,
            hi: 0.5,
        }
    }

    /// Same shape, widened to `(-1.2, 1.2)`.
    pub const fn adjusted(self) -> Self {
        Self {
            lo: -1.2,
            hi: 1.2,
            ..self
        }
    }

    pub fn normalizer(&self) -> f64 {
        b_e_normalizer(self.p, self.q, self.lo, self.hi)
    }

    pub fn ln_value(&self, x: f64) -> f64 {
        if !(x > self.lo && x < self.hi) {
            return f64::NEG_INFINITY;
        }
        (self.p - 1.0) * math::ln(x - self.lo) + (self.q - 1.0) * math::ln(self.hi - x)
            - ln_b_e_normalizer(self.p, self.q, self.lo, self.hi)
    }

    fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.q > 0.0) {
            return Err(input_err!("beta penalty needs p, q > 0"));
        }
        if !(self.lo < self.hi) {
            return Err(input_err!("beta penalty needs lo < hi"));
        }
        Ok(())
    }
}

/// Penalty on the first shape parameter `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum KPenalty {
    None,
    /// Coles–Dixon exponential form.
    Cd(CdForm),
    /// Martins–Stedinger beta form.
    Ms(BetaForm),
    /// Park's symmetric beta form.
    Park(BetaForm),
}

impl KPenalty {
    pub const fn cd() -> Self {
        KPenalty::Cd(CdForm::original())
    }

    pub const fn ms() -> Self {
        KPenalty::Ms(BetaForm::martins_stedinger())
    }

    pub const fn park() -> Self {
        KPenalty::Park(BetaForm::park())
    }

    pub fn ln_value(&self, k: f64) -> f64 {
        match self {
            KPenalty::None => 0.0,
            KPenalty::Cd(f) => f.ln_value(k),
            KPenalty::Ms(f) | KPenalty::Park(f) => f.ln_value(k),
        }
    }

    pub fn value(&self, k: f64) -> f64 {
        math::exp(self.ln_value(k))
    }

    /// Open interval on which the penalty is positive.
    pub fn support(&self) -> (f64, f64) {
        match self {
            KPenalty::None => (f64::NEG_INFINITY, f64::INFINITY),
            KPenalty::Cd(f) => (f.lower, f64::INFINITY),
            KPenalty::Ms(f) | KPenalty::Park(f) => (f.lo, f.hi),
        }
    }

    pub fn short_name(&self) -> &'static str {
        match self {
            KPenalty::None => "None",
            KPenalty::Cd(_) => "CDo",
            KPenalty::Ms(_) => "MSo",
            KPenalty::Park(_) => "Po",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            KPenalty::None => Ok(()),
            KPenalty::Cd(f) => f.validate(),
            KPenalty::Ms(f) | KPenalty::Park(f) => f.validate(),
        }
    }
}

/// Penalty on the second shape parameter `h`. The `O` variants reuse the
/// forms defined for `k`; the `A` variants are widened to `(-1.2, 1.2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum HPenalty {
    None,
    CdO(CdForm),
    MsO(BetaForm),
    PO(BetaForm),
    CdA(CdForm),
    MsA(BetaForm),
    PA(BetaForm),
}

impl HPenalty {
    pub const fn cd_o() -> Self {
        HPenalty::CdO(CdForm::original())
    }

    pub const fn ms_o() -> Self {
        HPenalty::MsO(BetaForm::martins_stedinger())
    }

    pub const fn p_o() -> Self {
        HPenalty::PO(BetaForm::park())
    }

    pub const fn cd_a() -> Self {
        HPenalty::CdA(CdForm::adjusted())
    }

    pub const fn ms_a() -> Self {
        HPenalty::MsA(BetaForm::martins_stedinger().adjusted())
    }

    pub const fn p_a() -> Self {
        HPenalty::PA(BetaForm::park().adjusted())
    }

    pub fn ln_value(&self, h: f64) -> f64 {
        match self {
            HPenalty::None => 0.0,
            HPenalty::CdO(f) | HPenalty::CdA(f) => f.ln_value(h),
            HPenalty::MsO(f) | HPenalty::PO(f) | HPenalty::MsA(f) | HPenalty::PA(f) => {
                f.ln_value(h)
            }
        }
    }

    pub fn value(&self, h: f64) -> f64 {
        math::exp(self.ln_value(h))
    }

    /// Open interval on which the penalty is positive.
    pub fn support(&self) -> (f64, f64) {
        match self {
            HPenalty::None => (f64::NEG_INFINITY, f64::INFINITY),
            HPenalty::CdO(f) | HPenalty::CdA(f) => (f.lower, f64::INFINITY),
            HPenalty::MsO(f) | HPenalty::PO(f) | HPenalty::MsA(f) | HPenalty::PA(f) => {
                (f.lo, f.hi)
            }
        }
    }

    pub fn short_name(&self) -> &'static str {
        match self {
            HPenalty::None => "None",
            HPenalty::CdO(_) => "CDo",
            HPenalty::MsO(_) => "MSo",
            HPenalty::PO(_) => "Po",
            HPenalty::CdA(_) => "CDa",
            HPenalty::MsA(_) => "MSa",
            HPenalty::PA(_) => "Pa",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            HPenalty::None => Ok(()),
            HPenalty::CdO(f) | HPenalty::CdA(f) => f.validate(),
            HPenalty::MsO(f) | HPenalty::PO(f) | HPenalty::MsA(f) | HPenalty::PA(f) => {
                f.validate()
            }
        }
    }
}

/// A joint penalty `p(k, h) = p(k) p(h)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PenaltyCombo {
    pub k_pen: KPenalty,
    pub h_pen: HPenalty,
}

const K_NAMES: [(&str, KPenalty); 3] = [
    ("CDo", KPenalty::cd()),
    ("MSo", KPenalty::ms()),
    ("Po", KPenalty::park()),
];

const H_NAMES: [(&str, HPenalty); 6] = [
    ("CDo", HPenalty::cd_o()),
    ("MSo", HPenalty::ms_o()),
    ("Po", HPenalty::p_o()),
    ("CDa", HPenalty::cd_a()),
    ("MSa", HPenalty::ms_a()),
    ("Pa", HPenalty::p_a()),
];

impl PenaltyCombo {
    pub const fn new(k_pen: KPenalty, h_pen: HPenalty) -> Self {
        Self { k_pen, h_pen }
    }

    /// No penalty on either shape: the plain likelihood.
    pub const fn none() -> Self {
        Self::new(KPenalty::None, HPenalty::None)
    }

    pub fn is_none(&self) -> bool {
        matches!(self.k_pen, KPenalty::None) && matches!(self.h_pen, HPenalty::None)
    }

    /// `ln p(k) + ln p(h)`; `-inf` when either factor vanishes.
    pub fn ln_value(&self, k: f64, h: f64) -> f64 {
        let lk = self.k_pen.ln_value(k);
        if lk == f64::NEG_INFINITY {
            return lk;
        }
        lk + self.h_pen.ln_value(h)
    }

    /// e.g. `MPLE.MSo(k)CDa(h)`.
    pub fn name(&self) -> String {
        format!(
            "MPLE.{}(k){}(h)",
            self.k_pen.short_name(),
            self.h_pen.short_name()
        )
    }

    /// Parses a combination name with default hyperparameters. Subscript
    /// markup is tolerated, so `MPLE.MS$_o$(k)MS$_a$(h)` is accepted.
    pub fn from_name(name: &str) -> Result<Self> {
        let cleaned: String = name
            .chars()
            .filter(|c| !matches!(c, '$' | '_' | '{' | '}' | ' '))
            .collect();
        let rest = strip_prefix_ci(&cleaned, "MPLE.")
            .ok_or_else(|| unknown_combo(name))?;
        let k_end = find_ci(rest, "(k)").ok_or_else(|| unknown_combo(name))?;
        let (k_part, rest) = (&rest[..k_end], &rest[k_end + 3..]);
        let h_part = strip_suffix_ci(rest, "(h)").ok_or_else(|| unknown_combo(name))?;

        let k_pen = if k_part.eq_ignore_ascii_case("None") {
            KPenalty::None
        } else {
            K_NAMES
                .iter()
                .find(|(n, _)| n.eq_ignore_ascii_case(k_part))
                .map(|(_, p)| *p)
                .ok_or_else(|| unknown_combo(name))?
        };
        let h_pen = if h_part.eq_ignore_ascii_case("None") {
            HPenalty::None
        } else {
            H_NAMES
                .iter()
                .find(|(n, _)| n.eq_ignore_ascii_case(h_part))
                .map(|(_, p)| *p)
                .ok_or_else(|| unknown_combo(name))?
        };
        Ok(Self::new(k_pen, h_pen))
    }

    pub fn validate(&self) -> Result<()> {
        self.k_pen.validate()?;
        self.h_pen.validate()
    }
}

fn unknown_combo(name: &str) -> crate::Error {
    let valid: Vec<String> = enumerate_combos().iter().map(|c| c.name()).collect();
    input_err!(
        "unknown penalty combination `{name}`; valid names: {}",
        valid.join(", ")
    )
}

fn strip_prefix_ci<'a>(s: &'a str, prefix: &str) -> Option<&'a str> {
    let head = s.get(..prefix.len())?;
    head.eq_ignore_ascii_case(prefix).then(|| &s[prefix.len()..])
}

fn strip_suffix_ci<'a>(s: &'a str, suffix: &str) -> Option<&'a str> {
    let split = s.len().checked_sub(suffix.len())?;
    let tail = s.get(split..)?;
    tail.eq_ignore_ascii_case(suffix).then(|| &s[..split])
}

fn find_ci(s: &str, needle: &str) -> Option<usize> {
    let lower = s.to_ascii_lowercase();
    lower.find(needle)
}

/// `ln p(k) + ln p(h)` for `combo`.
pub fn log_joint_penalty(k: f64, h: f64, combo: &PenaltyCombo) -> f64 {
    combo.ln_value(k, h)
}

/// The 18 combinations: three penalties on `k` crossed with six on `h`, in a
/// fixed order.
pub fn enumerate_combos() -> Vec<PenaltyCombo> {
    K_NAMES
        .iter()
        .flat_map(|(_, k)| H_NAMES.iter().map(move |(_, h)| PenaltyCombo::new(*k, *h)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cd_on_k() {
        let p = KPenalty::cd();
        assert_eq!(p.value(0.3), 1.0);
        assert_eq!(p.value(0.0), 1.0);
        assert!((p.value(-0.5) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(p.value(-1.0), 0.0);
        assert_eq!(p.value(-1.5), 0.0);
    }

    #[test]
    fn beta_forms_at_zero() {
        // 0.5^13 / B(6, 9) and 0.125 / B(2.5, 2.5), evaluated in 40-digit arithmetic
        assert!((KPenalty::ms().value(0.0) - 2.199_462_890_625).abs() < 1e-10);
        assert!((KPenalty::park().value(0.0) - 1.697_652_726_313_550_2).abs() < 1e-10);
        assert!((HPenalty::ms_a().value(0.0) - 0.916_442_871_093_750_03).abs() < 1e-10);
    }

    #[test]
    fn beta_forms_vanish_outside_range() {
        assert_eq!(HPenalty::ms_o().value(0.6), 0.0);
        assert_eq!(HPenalty::ms_o().value(0.5), 0.0);
        assert_eq!(KPenalty::ms().value(-0.5), 0.0);
        assert_eq!(HPenalty::p_a().value(1.2), 0.0);
        assert!(HPenalty::p_a().value(1.1) > 0.0);
    }

    #[test]
    fn adjusted_cd_on_h() {
        let p = HPenalty::cd_a();
        assert_eq!(p.value(0.7), 1.0);
        assert_eq!(p.value(-1.3), 0.0);
        assert_eq!(p.value(-1.2), 0.0);
        // continuous at zero with the exact offset
        assert!((p.value(-1e-12) - 1.0).abs() < 1e-10);
        // the printed offset overshoots 1 just below zero
        let literal = HPenalty::CdA(CdForm::adjusted_literal());
        assert!(literal.value(-1e-6) > 1.0);
    }

    #[test]
    fn normalizer_closed_form() {
        assert!((b_e_normalizer(1.0, 1.0, -1.2, 1.2) - 2.4).abs() < 1e-14);
        assert!((b_e_normalizer(2.0, 1.0, 0.0, 1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn joint_penalty() {
        assert_eq!(log_joint_penalty(3.0, -7.0, &PenaltyCombo::none()), 0.0);
        let cd = PenaltyCombo::new(KPenalty::cd(), HPenalty::cd_a());
        assert_eq!(log_joint_penalty(0.1, 0.1, &cd), 0.0);
        let ms = PenaltyCombo::new(KPenalty::ms(), HPenalty::ms_a());
        let expected = 2.199_462_890_625f64.ln() + 0.916_442_871_093_750_03f64.ln();
        assert!((log_joint_penalty(0.0, 0.0, &ms) - expected).abs() < 1e-12);
        assert_eq!(log_joint_penalty(0.7, 0.0, &ms), f64::NEG_INFINITY);
    }

    #[test]
    fn combo_names() {
        let combos = enumerate_combos();
        assert_eq!(combos.len(), 18);
        let names: Vec<String> = combos.iter().map(|c| c.name()).collect();
        assert!(names.iter().any(|n| n == "MPLE.Po(k)CDa(h)"));
        let mut dedup = names.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), 18);
        for c in &combos {
            assert_eq!(PenaltyCombo::from_name(&c.name()).unwrap(), *c);
        }
    }

    #[test]
    fn parse_markup_and_reject_unknown() {
        let c = PenaltyCombo::from_name("MPLE.MS$_o$(k)MS$_a$(h)").unwrap();
        assert_eq!(c, PenaltyCombo::new(KPenalty::ms(), HPenalty::ms_a()));
        let err = PenaltyCombo::from_name("MPLE.XX(k)").unwrap_err();
        let msg = alloc::format!("{err}");
        assert!(msg.contains("MPLE.CDo(k)CDo(h)") && msg.contains("MPLE.Po(k)Pa(h)"));
        assert!(PenaltyCombo::from_name("MPLE.MSo(k)XX(h)").is_err());
        assert!(PenaltyCombo::from_name("MSo(k)MSo(h)").is_err());
        assert!(PenaltyCombo::from_name("MPLE.None(k)None(h)").unwrap().is_none());
    }
}
