//! Case-study configuration files.
//!
//! Configurations are TOML with one table per concern. `family` selects the
//! model; the matching parameter table (`[chencox]`, `[twopop]`, `[cbd]`)
//! must be present. `[ages]` (or `[ages1]`/`[ages2]` for the two-population
//! model) describes the age grid and effect vectors; omitted beta vectors
//! fall back to the documented synthetic defaults. `[state]` carries the
//! Markov state at time 0, `[annuity]` the contract, and `[study]` the
//! design, budget, estimator list and benchmark sizes.

use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;

use crate::annuity::{AnnuitySpec, DiscountSpec};
use crate::design::DesignKind;
use crate::error::{Error, Result};
use crate::harness::{CbdProblem, ChenCoxProblem, EstimatorKind, Problem, TwoPopProblem};
use crate::mortality::{
    AgeStructure, CbdModel, CbdState, ChenCoxModel, ChenCoxState, CohortProcess, TwoPopModel,
};
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyFamily {
    ChenCox,
    TwoPop,
    Cbd,
}

impl StudyFamily {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "chen-cox" => StudyFamily::ChenCox,
            "two-pop" => StudyFamily::TwoPop,
            "cbd" => StudyFamily::Cbd,
            other => {
                return Err(Error::Config(format!(
                    "unknown family {other:?} (expected chen-cox, two-pop, cbd)"
                )))
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            StudyFamily::ChenCox => "chen-cox",
            StudyFamily::TwoPop => "two-pop",
            StudyFamily::Cbd => "cbd",
        }
    }
}

/// Study-level knobs shared by every family.
#[derive(Debug, Clone)]
pub struct StudySettings<R: Real> {
    pub design: DesignKind,
    pub n_tr: usize,
    pub n_out: usize,
    pub n_in: usize,
    pub percentile_test: bool,
    pub emulators: Vec<EstimatorKind>,
    pub seed: u64,
    pub alpha: R,
    /// Explicit bounding box for grid/LHS/Sobol designs; otherwise the
    /// pilot quantile box is used.
    pub bounds: Option<Vec<(R, R)>>,
    pub restarts: usize,
    pub power: R,
    pub pi: R,
    pub sobol_skip: usize,
}

/// Family-specific model and initial state.
#[derive(Debug, Clone)]
pub enum CaseStudy<R: Real> {
    ChenCox { model: ChenCoxModel<R>, state: ChenCoxState<R> },
    TwoPop { model: TwoPopModel<R>, kappa1_hist: Vec<R>, spread_hist: Vec<R> },
    Cbd { model: CbdModel<R>, state: CbdState<R> },
}

#[derive(Debug, Clone)]
pub struct CaseStudyConfig<R: Real> {
    pub family: StudyFamily,
    pub study: CaseStudy<R>,
    pub spec: AnnuitySpec<R>,
    pub settings: StudySettings<R>,
}

impl<R: Real> CaseStudyConfig<R> {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("toml parse error: {e}")))?;
        raw.build()
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Instantiate the valuation problem for this study.
    pub fn problem(&self) -> Arc<dyn Problem<R>> {
        match &self.study {
            CaseStudy::ChenCox { model, state } => Arc::new(ChenCoxProblem {
                model: model.clone(),
                state0: *state,
                spec: self.spec,
            }),
            CaseStudy::TwoPop { model, kappa1_hist, spread_hist } => Arc::new(TwoPopProblem {
                model: model.clone(),
                kappa1_hist: kappa1_hist.clone(),
                spread_hist: spread_hist.clone(),
                spec: self.spec,
                pi: self.settings.pi,
            }),
            CaseStudy::Cbd { model, state } => Arc::new(CbdProblem {
                model: model.clone(),
                state0: *state,
                spec: self.spec,
            }),
        }
    }
}

/// Synthetic default age effects for the log-rate models: beta1 linear from
/// -5.5 at the youngest age to -2.0 at the oldest, beta2 constant 1/n_a.
pub fn default_lc_betas<R: Real>(n_a: usize) -> (Vec<R>, Vec<R>) {
    let beta1 = (0..n_a)
        .map(|i| R::of(-5.5 + 3.5 * i as f64 / (n_a - 1).max(1) as f64))
        .collect();
    let beta2 = vec![R::one() / R::of_usize(n_a); n_a];
    (beta1, beta2)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    family: String,
    chencox: Option<RawChenCox>,
    twopop: Option<RawTwoPop>,
    cbd: Option<RawCbd>,
    ages: Option<RawAges>,
    ages1: Option<RawAges>,
    ages2: Option<RawAges>,
    cohort1: Option<RawCohort>,
    cohort2: Option<RawCohort>,
    history: Option<RawHistory>,
    state: Option<RawState>,
    annuity: RawAnnuity,
    study: RawStudy,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChenCox {
    mu1: f64,
    sigma1: f64,
    p: f64,
    mu2: f64,
    sigma2: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTwoPop {
    mu1: f64,
    sigma1: f64,
    mu2: f64,
    phi: f64,
    sigma2: f64,
    c: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCbd {
    mu: f64,
    theta11: f64,
    theta21: f64,
    theta31: f64,
    phi: f64,
    theta12: f64,
    theta22: f64,
    sd1: f64,
    sd2: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAges {
    x_min: u32,
    x_max: u32,
    #[serde(default)]
    beta1: Vec<f64>,
    #[serde(default)]
    beta2: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCohort {
    base_index: i64,
    history: Vec<f64>,
    #[serde(default)]
    ar1: f64,
    #[serde(default)]
    ar2: f64,
    #[serde(default)]
    intercept: f64,
    #[serde(default)]
    sd: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHistory {
    kappa1: Vec<f64>,
    spread: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawState {
    kappa: Option<f64>,
    shock: Option<f64>,
    kappa1: Option<f64>,
    kappa2_now: Option<f64>,
    kappa2_prev: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnnuity {
    x: u32,
    deferral: u32,
    xbar: u32,
    rate: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStudy {
    design: String,
    n_tr: usize,
    n_out: usize,
    n_in: usize,
    #[serde(default)]
    percentile_test: bool,
    emulators: Vec<String>,
    seed: u64,
    alpha: Option<f64>,
    bounds: Option<Vec<[f64; 2]>>,
    restarts: Option<usize>,
    power: Option<f64>,
    pi: Option<f64>,
    sobol_skip: Option<usize>,
}

impl RawConfig {
    fn build<R: Real>(self) -> Result<CaseStudyConfig<R>> {
        let family = StudyFamily::parse(&self.family)?;
        let spec = AnnuitySpec::new(
            self.annuity.x,
            self.annuity.deferral,
            self.annuity.xbar,
            DiscountSpec::new(R::of(self.annuity.rate)).map_err(cfg_err)?,
        )
        .map_err(cfg_err)?;
        let settings = self.study.build(family)?;
        let study = match family {
            StudyFamily::ChenCox => {
                let p = self
                    .chencox
                    .ok_or_else(|| Error::Config("[chencox] table required".into()))?;
                let ages = build_ages(self.ages.as_ref(), self.annuity.xbar, BetaDefault::LogRate)?;
                let model = ChenCoxModel::new(
                    R::of(p.mu1),
                    R::of(p.sigma1),
                    R::of(p.p),
                    R::of(p.mu2),
                    R::of(p.sigma2),
                    ages,
                )
                .map_err(cfg_err)?;
                let st = self
                    .state
                    .as_ref()
                    .ok_or_else(|| Error::Config("[state] table required".into()))?;
                let kappa = st
                    .kappa
                    .ok_or_else(|| Error::Config("state.kappa required for chen-cox".into()))?;
                let state = ChenCoxState::new(R::of(kappa), R::of(st.shock.unwrap_or(0.0)));
                CaseStudy::ChenCox { model, state }
            }
            StudyFamily::TwoPop => {
                let p = self
                    .twopop
                    .ok_or_else(|| Error::Config("[twopop] table required".into()))?;
                let ages1 =
                    build_ages(self.ages1.as_ref(), self.annuity.xbar, BetaDefault::LogRate)?;
                let ages2 =
                    build_ages(self.ages2.as_ref(), self.annuity.xbar, BetaDefault::LogRate)?;
                let cohort1 = build_cohort(self.cohort1.as_ref())?;
                let cohort2 = build_cohort(self.cohort2.as_ref())?;
                let model = TwoPopModel::new(
                    R::of(p.mu1),
                    R::of(p.sigma1),
                    R::of(p.mu2),
                    R::of(p.phi),
                    R::of(p.sigma2),
                    R::of(p.c),
                    ages1,
                    ages2,
                    cohort1,
                    cohort2,
                )
                .map_err(cfg_err)?;
                let hist = self
                    .history
                    .ok_or_else(|| Error::Config("[history] table required for two-pop".into()))?;
                if hist.kappa1.len() < 3 || hist.spread.len() < 3 {
                    return Err(Error::Config("histories need length >= 3".into()));
                }
                CaseStudy::TwoPop {
                    model,
                    kappa1_hist: hist.kappa1.iter().map(|&v| R::of(v)).collect(),
                    spread_hist: hist.spread.iter().map(|&v| R::of(v)).collect(),
                }
            }
            StudyFamily::Cbd => {
                let p = self.cbd.ok_or_else(|| Error::Config("[cbd] table required".into()))?;
                let ages = build_ages(self.ages.as_ref(), self.annuity.xbar, BetaDefault::Cbd)?;
                let model = CbdModel::new(
                    R::of(p.mu),
                    R::of(p.theta11),
                    R::of(p.theta21),
                    R::of(p.theta31),
                    R::of(p.phi),
                    R::of(p.theta12),
                    R::of(p.theta22),
                    R::of(p.sd1),
                    R::of(p.sd2),
                    ages,
                )
                .map_err(cfg_err)?;
                let st = self
                    .state
                    .as_ref()
                    .ok_or_else(|| Error::Config("[state] table required".into()))?;
                let (k1, k2, k2p) = match (st.kappa1, st.kappa2_now, st.kappa2_prev) {
                    (Some(a), Some(b), Some(c)) => (a, b, c),
                    _ => {
                        return Err(Error::Config(
                            "state.kappa1, state.kappa2_now, state.kappa2_prev required for cbd"
                                .into(),
                        ))
                    }
                };
                CaseStudy::Cbd {
                    model,
                    state: CbdState::new(R::of(k1), R::of(k2), R::of(k2p)),
                }
            }
        };
        Ok(CaseStudyConfig { family, study, spec, settings })
    }
}

fn cfg_err(e: Error) -> Error {
    Error::Config(e.to_string())
}

enum BetaDefault {
    /// beta1 linear -5.5..-2.0, beta2 = 1/n_a.
    LogRate,
    /// CBD M5 parameterization: beta1 = 1, beta2 = x - x_ave.
    Cbd,
}

fn build_ages<R: Real>(
    raw: Option<&RawAges>,
    cutoff: u32,
    default: BetaDefault,
) -> Result<AgeStructure<R>> {
    let raw = raw.ok_or_else(|| Error::Config("[ages] table required".into()))?;
    let n_a = raw
        .x_max
        .checked_sub(raw.x_min)
        .map(|d| d as usize + 1)
        .ok_or_else(|| Error::Config("ages.x_max must be >= ages.x_min".into()))?;
    let supplied = !raw.beta1.is_empty() || !raw.beta2.is_empty();
    let (beta1, beta2): (Vec<R>, Vec<R>) = if supplied {
        if raw.beta1.len() != n_a || raw.beta2.len() != n_a {
            return Err(Error::Config(format!(
                "beta vectors must both have length {n_a} when supplied"
            )));
        }
        (
            raw.beta1.iter().map(|&v| R::of(v)).collect(),
            raw.beta2.iter().map(|&v| R::of(v)).collect(),
        )
    } else {
        match default {
            BetaDefault::LogRate => default_lc_betas(n_a),
            BetaDefault::Cbd => {
                return AgeStructure::cbd_parameterization(raw.x_min, raw.x_max, cutoff)
                    .map_err(cfg_err)
            }
        }
    };
    AgeStructure::new(raw.x_min, raw.x_max, cutoff, beta1, beta2).map_err(cfg_err)
}

fn build_cohort<R: Real>(raw: Option<&RawCohort>) -> Result<CohortProcess<R>> {
    match raw {
        None => CohortProcess::constant(-200, 400, R::zero()).map_err(cfg_err),
        Some(c) => CohortProcess::new(
            c.base_index,
            c.history.iter().map(|&v| R::of(v)).collect(),
            R::of(c.ar1),
            R::of(c.ar2),
            R::of(c.intercept),
            R::of(c.sd),
        )
        .map_err(cfg_err),
    }
}

impl RawStudy {
    fn build<R: Real>(self, family: StudyFamily) -> Result<StudySettings<R>> {
        let design = match self.design.as_str() {
            "grid" => DesignKind::Grid,
            "lhs" => DesignKind::Lhs,
            "sobol" => DesignKind::Sobol,
            "empirical" => DesignKind::Empirical,
            other => {
                return Err(Error::Config(format!(
                    "unknown design {other:?} (expected grid, lhs, sobol, empirical)"
                )))
            }
        };
        if self.n_out < 2 || self.n_in < 2 {
            return Err(Error::Config("study.n_out and study.n_in must be >= 2".into()));
        }
        let emulators: Vec<EstimatorKind> = self
            .emulators
            .iter()
            .map(|s| EstimatorKind::parse(s))
            .collect::<Result<_>>()?;
        if emulators.is_empty() {
            return Err(Error::Config("study.emulators must name at least one estimator".into()));
        }
        for e in &emulators {
            let two_pop_only =
                matches!(e, EstimatorKind::AnalyticA1 | EstimatorKind::AnalyticA2);
            if two_pop_only && family != StudyFamily::TwoPop {
                return Err(Error::Config(format!(
                    "estimator {} applies to the two-pop family only",
                    e.name()
                )));
            }
        }
        let alpha = self.alpha.unwrap_or(0.05);
        if !(0.0 < alpha && alpha < 1.0) {
            return Err(Error::Config("study.alpha must lie in (0,1)".into()));
        }
        let power = self.power.unwrap_or(2.0);
        if !(1.0..=2.0).contains(&power) {
            return Err(Error::Config("study.power must lie in [1,2]".into()));
        }
        Ok(StudySettings {
            design,
            n_tr: self.n_tr,
            n_out: self.n_out,
            n_in: self.n_in,
            percentile_test: self.percentile_test,
            emulators,
            seed: self.seed,
            alpha: R::of(alpha),
            bounds: self
                .bounds
                .map(|bs| bs.iter().map(|b| (R::of(b[0]), R::of(b[1]))).collect()),
            restarts: self.restarts.unwrap_or(5),
            power: R::of(power),
            pi: R::of(self.pi.unwrap_or(1.0)),
            sobol_skip: self.sobol_skip.unwrap_or(1),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
family = "chen-cox"

[chencox]
mu1 = -0.2173
sigma1 = 0.3733
p = 0.0436
mu2 = 0.8393
sigma2 = 1.4316

[ages]
x_min = 50
x_max = 89

[state]
kappa = -14.0

[annuity]
x = 65
deferral = 10
xbar = 94
rate = 0.04

[study]
design = "grid"
n_tr = 125
n_out = 10
n_in = 100
percentile_test = true
emulators = ["analytic", "uk"]
seed = 7
bounds = [[-17.5, -10.0]]
"#;

    #[test]
    fn parses_minimal_chencox() {
        let cfg: CaseStudyConfig<f64> = CaseStudyConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.family, StudyFamily::ChenCox);
        assert_eq!(cfg.spec.payments(), 29);
        assert_eq!(cfg.settings.emulators.len(), 2);
        assert_eq!(cfg.settings.restarts, 5);
        match &cfg.study {
            CaseStudy::ChenCox { model, state } => {
                assert_eq!(model.ages.n_ages(), 40);
                assert_eq!(model.ages.beta2()[0], 1.0 / 40.0);
                assert_eq!(state.shock, 0.0);
            }
            _ => panic!("wrong family"),
        }
    }

    #[test]
    fn rejects_unknown_estimator_and_design() {
        let bad = MINIMAL.replace("\"uk\"", "\"frobnicate\"");
        assert!(matches!(
            CaseStudyConfig::<f64>::from_toml_str(&bad),
            Err(Error::Config(_))
        ));
        let bad = MINIMAL.replace("design = \"grid\"", "design = \"spiral\"");
        assert!(CaseStudyConfig::<f64>::from_toml_str(&bad).is_err());
    }

    #[test]
    fn rejects_a1_outside_twopop() {
        let bad = MINIMAL.replace("\"analytic\"", "\"analytic-a1\"");
        assert!(CaseStudyConfig::<f64>::from_toml_str(&bad).is_err());
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = format!("{MINIMAL}\n[typo]\nx = 1\n");
        assert!(CaseStudyConfig::<f64>::from_toml_str(&bad).is_err());
    }
}
