//! End-to-end case-study runner: builds the training design, batches
//! simulations, fits every requested estimator, benchmarks against nested
//! Monte Carlo on a shared test set, and reports Bias / sqrt(IMSE) / s_Ave
//! and summary statistics.

mod problem;
pub mod report;

pub use problem::{CbdProblem, ChenCoxProblem, DetVariant, Problem, TwoPopProblem};

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::annuity::nested_mc_value;
use crate::config::{CaseStudyConfig, StudySettings};
use crate::design::{
    allocate_budget, batch, empirical_design, lhs, percentile_test_set, sobol, uniform_grid,
    BudgetAllocation, Design, DesignKind,
};
use crate::emulate::{
    fit_hyperparams, fit_sk, fit_smoothing_spline_1d, fit_tps, fit_uk, EmulatorFit, KernelSpec,
    MleTrend, Smoothing, TrainingSet, UkBasis,
};
use crate::error::{Error, Result};
use crate::real::Real;
use crate::rng::RngStream;
use crate::stats;

/// Stream-id bases derived from the master seed, so the design, the training
/// noise, the test set and the benchmark are independent but reproducible,
/// and every estimator sees the same test set.
const STREAM_DESIGN: u64 = 0x01;
const STREAM_TRAIN: u64 = 0x02;
const STREAM_TEST: u64 = 0x03;
const STREAM_BENCH: u64 = 0x04;
const STREAM_PILOT: u64 = 0x05;

/// Estimators the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    Analytic,
    AnalyticA1,
    AnalyticA2,
    /// Simple kriging with the default deterministic estimator as trend.
    SkAnalyticTrend,
    OrdinaryKriging,
    UniversalKriging,
    ThinPlateSpline,
    SmoothingSpline1d,
}

impl EstimatorKind {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "analytic" => EstimatorKind::Analytic,
            "analytic-a1" => EstimatorKind::AnalyticA1,
            "analytic-a2" => EstimatorKind::AnalyticA2,
            "sk" => EstimatorKind::SkAnalyticTrend,
            "ok" => EstimatorKind::OrdinaryKriging,
            "uk" => EstimatorKind::UniversalKriging,
            "tps" => EstimatorKind::ThinPlateSpline,
            "spline1d" => EstimatorKind::SmoothingSpline1d,
            other => {
                return Err(Error::Config(format!(
                    "unknown estimator {other:?} (expected analytic, analytic-a1, analytic-a2, sk, ok, uk, tps, spline1d)"
                )))
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Analytic => "analytic",
            EstimatorKind::AnalyticA1 => "analytic-a1",
            EstimatorKind::AnalyticA2 => "analytic-a2",
            EstimatorKind::SkAnalyticTrend => "sk",
            EstimatorKind::OrdinaryKriging => "ok",
            EstimatorKind::UniversalKriging => "uk",
            EstimatorKind::ThinPlateSpline => "tps",
            EstimatorKind::SmoothingSpline1d => "spline1d",
        }
    }

    fn is_kriging(&self) -> bool {
        matches!(
            self,
            EstimatorKind::SkAnalyticTrend
                | EstimatorKind::OrdinaryKriging
                | EstimatorKind::UniversalKriging
        )
    }
}

/// Empirical mean error and root mean squared error of predictions against
/// benchmark values.
pub fn imse_bias<R: Real>(predictions: &[R], benchmarks: &[R]) -> Result<(R, R)> {
    if predictions.len() != benchmarks.len() {
        return Err(Error::invalid("prediction/benchmark length mismatch"));
    }
    if predictions.is_empty() {
        return Err(Error::invalid("imse_bias needs at least one site"));
    }
    let n = R::of_usize(predictions.len());
    let mut bias = R::zero();
    let mut imse = R::zero();
    for (&p, &b) in predictions.iter().zip(benchmarks) {
        let e = p - b;
        bias = bias + e;
        imse = imse + e * e;
    }
    Ok((bias / n, (imse / n).sqrt()))
}

#[derive(Debug, Clone, Copy)]
pub struct SummaryStats<R: Real> {
    pub mean: R,
    pub sd: R,
    pub quantile: R,
    pub expected_shortfall: R,
}

/// Mean, sample sd, interpolated alpha-quantile and the expected shortfall
/// (mean of the values at or below the quantile).
pub fn summary_stats<R: Real>(values: &[R], alpha: R) -> Result<SummaryStats<R>> {
    if values.len() < 2 {
        return Err(Error::invalid("summary stats need at least 2 values"));
    }
    if !(alpha > R::zero() && alpha < R::one()) {
        return Err(Error::invalid("alpha must lie in (0,1)"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let q = stats::quantile_sorted(&sorted, alpha)?;
    let tail: Vec<R> = sorted.iter().copied().take_while(|&v| v <= q).collect();
    Ok(SummaryStats {
        mean: stats::mean(values),
        sd: stats::sample_sd(values),
        quantile: q,
        expected_shortfall: stats::mean(&tail),
    })
}

#[derive(Debug, Clone)]
pub struct EstimatorRow<R: Real> {
    pub kind: EstimatorKind,
    pub bias: R,
    /// sqrt of the empirical IMSE.
    pub rmse: R,
    /// Root mean posterior variance over the test set (kriging only).
    pub s_ave: Option<R>,
    pub stats: SummaryStats<R>,
    pub predictions: Vec<R>,
    /// Posterior sd per test site (kriging only), for plot data.
    pub posterior_sd: Option<Vec<R>>,
    pub fit_seconds: f64,
    pub predict_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct EvalReport<R: Real> {
    pub sites: Vec<Vec<R>>,
    pub benchmark_mean: Vec<R>,
    pub benchmark_se: Vec<R>,
    pub rows: Vec<EstimatorRow<R>>,
    pub budget: BudgetAllocation,
    pub bench_budget: usize,
    /// Benchmark budget over emulator training budget; > 1 means the
    /// emulator pipeline is cheaper than the nested benchmark.
    pub speedup_ratio: f64,
    pub alpha: R,
    pub seed: u64,
}

impl<R: Real> EvalReport<R> {
    pub fn row(&self, kind: EstimatorKind) -> Option<&EstimatorRow<R>> {
        self.rows.iter().find(|r| r.kind == kind)
    }
}

/// Run the full pipeline for a configured case study.
pub fn run_case_study<R: Real>(config: &CaseStudyConfig<R>) -> Result<EvalReport<R>> {
    let problem = config.problem();
    run_problem(&problem, &config.settings)
}

/// Run the pipeline for an arbitrary problem.
pub fn run_problem<R: Real>(
    problem: &Arc<dyn Problem<R>>,
    settings: &StudySettings<R>,
) -> Result<EvalReport<R>> {
    let seed = settings.seed;
    let budget = allocate_budget(settings.n_tr)?;
    let d = problem.dim();

    // 1. training design
    let bounds = match &settings.bounds {
        Some(b) => {
            if b.len() != d {
                return Err(Error::Config(format!(
                    "bounds have dimension {}, state has {d}",
                    b.len()
                )));
            }
            b.clone()
        }
        None if settings.design != DesignKind::Empirical => pilot_bounds(problem.as_ref(), seed),
        None => Vec::new(),
    };
    let design_stream = RngStream::new(seed, STREAM_DESIGN);
    let design: Design<R> = match settings.design {
        DesignKind::Grid => {
            let counts = grid_counts(budget.n_sites, d);
            uniform_grid(&bounds, &counts)?
        }
        DesignKind::Lhs => lhs(&bounds, budget.n_sites, &mut design_stream.clone())?,
        DesignKind::Sobol => sobol(&bounds, budget.n_sites, settings.sobol_skip)?,
        DesignKind::Empirical => {
            empirical_design(|st| problem.draw_site(st), budget.n_sites, &design_stream)?
        }
    };

    // 2. batched training data
    let train_stream = RngStream::new(seed, STREAM_TRAIN);
    let train = batch(
        &design,
        |site, s| problem.sample_value(site, s),
        &train_stream,
        budget.n_reps,
    )?;

    // 3. test set
    let test_stream = RngStream::new(seed, STREAM_TEST);
    let sites: Vec<Vec<R>> = if settings.percentile_test {
        if d != 1 {
            return Err(Error::Config(
                "percentile test sets are defined for one-dimensional states only".into(),
            ));
        }
        let levels: Vec<R> = (0..settings.n_out)
            .map(|k| {
                R::of_usize(2 * k + 1) / R::of_usize(2 * settings.n_out)
            })
            .collect();
        let oversample = 10_000.max(100 * settings.n_out);
        percentile_test_set(
            |s| problem.draw_site(s)[0],
            &levels,
            oversample,
            &test_stream,
        )?
        .into_iter()
        .map(|z| vec![z])
        .collect()
    } else {
        (0..settings.n_out)
            .map(|i| {
                let mut s = test_stream.substream(i as u64);
                problem.draw_site(&mut s)
            })
            .collect()
    };

    // 4. nested Monte Carlo benchmark, parallel across sites
    let bench_stream = RngStream::new(seed, STREAM_BENCH);
    let bench: Vec<(R, R)> = sites
        .par_iter()
        .enumerate()
        .map(|(i, site)| {
            let est = nested_mc_value(
                |s| problem.sample_value(site, s),
                &bench_stream.substream(i as u64),
                settings.n_in,
            )?;
            Ok((est.mean, est.std_error))
        })
        .collect::<Result<_>>()?;
    let benchmark_mean: Vec<R> = bench.iter().map(|&(m, _)| m).collect();
    let benchmark_se: Vec<R> = bench.iter().map(|&(_, se)| se).collect();

    // 5. estimators
    let mut rows = Vec::with_capacity(settings.emulators.len());
    for &kind in &settings.emulators {
        let row = run_estimator(problem, kind, &train, &sites, &benchmark_mean, settings)?;
        rows.push(row);
    }

    let bench_budget = settings.n_out * settings.n_in;
    let train_budget = budget.n_sites.max(design.n_sites()) * budget.n_reps;
    Ok(EvalReport {
        sites,
        benchmark_mean,
        benchmark_se,
        rows,
        budget,
        bench_budget,
        speedup_ratio: bench_budget as f64 / train_budget as f64,
        alpha: settings.alpha,
        seed,
    })
}

/// Fit one emulator kind on a training set; rejects the analytic kinds,
/// which need no fitting.
pub fn fit_emulator<R: Real>(
    problem: &Arc<dyn Problem<R>>,
    kind: EstimatorKind,
    train: &TrainingSet<R>,
    settings: &StudySettings<R>,
) -> Result<EmulatorFit<R>> {
    match kind {
        EstimatorKind::Analytic | EstimatorKind::AnalyticA1 | EstimatorKind::AnalyticA2 => {
            Err(Error::invalid("analytic estimators are not fitted emulators"))
        }
        EstimatorKind::SkAnalyticTrend => {
            let trend = det_trend(problem);
            let resid: Vec<R> = train
                .sites()
                .iter()
                .zip(train.responses())
                .map(|(z, &y)| y - trend(z))
                .collect();
            let resid_train = TrainingSet::new(
                train.sites().to_vec(),
                resid,
                train.noise().to_vec(),
                train.reps().to_vec(),
            )?;
            let kernel = pick_kernel(&resid_train, MleTrend::Zero, settings)?;
            Ok(EmulatorFit::Kriging(fit_sk(train, kernel, trend)?))
        }
        EstimatorKind::OrdinaryKriging => {
            let kernel = pick_kernel(train, MleTrend::Constant, settings)?;
            Ok(EmulatorFit::Kriging(fit_uk(train, kernel, UkBasis::Constant)?))
        }
        EstimatorKind::UniversalKriging => {
            let kernel = pick_kernel(train, MleTrend::Linear, settings)?;
            Ok(EmulatorFit::Kriging(fit_uk(train, kernel, UkBasis::Linear)?))
        }
        EstimatorKind::ThinPlateSpline => Ok(EmulatorFit::Spline(fit_tps(train, Smoothing::Gcv)?)),
        EstimatorKind::SmoothingSpline1d => {
            Ok(EmulatorFit::Spline(fit_smoothing_spline_1d(train, Smoothing::Gcv)?))
        }
    }
}

fn run_estimator<R: Real>(
    problem: &Arc<dyn Problem<R>>,
    kind: EstimatorKind,
    train: &TrainingSet<R>,
    sites: &[Vec<R>],
    benchmark_mean: &[R],
    settings: &StudySettings<R>,
) -> Result<EstimatorRow<R>> {
    let started = Instant::now();
    let fitted: Option<EmulatorFit<R>> = match kind {
        EstimatorKind::Analytic | EstimatorKind::AnalyticA1 | EstimatorKind::AnalyticA2 => None,
        _ => Some(fit_emulator(problem, kind, train, settings)?),
    };
    let fit_seconds = started.elapsed().as_secs_f64();

    let started = Instant::now();
    let variant = match kind {
        EstimatorKind::AnalyticA1 => DetVariant::A1,
        EstimatorKind::AnalyticA2 => DetVariant::A2,
        _ => DetVariant::Default,
    };
    let mut predictions = Vec::with_capacity(sites.len());
    let mut posterior_sd: Option<Vec<R>> = if kind.is_kriging() { Some(Vec::new()) } else { None };
    for site in sites {
        match &fitted {
            None => predictions.push(problem.deterministic(variant, site)?),
            Some(fit) => {
                let (m, v) = fit.predict(site)?;
                predictions.push(m);
                if let (Some(sds), Some(v)) = (&mut posterior_sd, v) {
                    sds.push(v.max(R::zero()).sqrt());
                }
            }
        }
    }
    let predict_seconds = started.elapsed().as_secs_f64();

    let (bias, rmse) = imse_bias(&predictions, benchmark_mean)?;
    debug_assert!(bias * bias <= rmse * rmse + R::of(1.0e-30));
    let s_ave = posterior_sd.as_ref().map(|sds| {
        (sds.iter().map(|&s| s * s).sum::<R>() / R::of_usize(sds.len())).sqrt()
    });
    let stats = summary_stats(&predictions, settings.alpha)?;
    Ok(EstimatorRow {
        kind,
        bias,
        rmse,
        s_ave,
        stats,
        predictions,
        posterior_sd,
        fit_seconds,
        predict_seconds,
    })
}

/// The default deterministic estimator as a trend function for simple
/// kriging. The fit stores the closure, so it captures its own handle on the
/// problem.
fn det_trend<R: Real>(problem: &Arc<dyn Problem<R>>) -> Arc<dyn Fn(&[R]) -> R + Send + Sync> {
    let p = Arc::clone(problem);
    Arc::new(move |z: &[R]| {
        p.deterministic(DetVariant::Default, z)
            .expect("deterministic estimator is defined on fit sites")
    })
}

fn pick_kernel<R: Real>(
    train: &TrainingSet<R>,
    trend: MleTrend,
    settings: &StudySettings<R>,
) -> Result<KernelSpec<R>> {
    if train.len() < 4 {
        // degenerate designs (e.g. zero-volatility dynamics collapse to one
        // site) fall back to a fixed kernel; the fit still interpolates
        let ranges = train.ranges();
        let theta: Vec<R> = ranges
            .iter()
            .map(|&r| if r > R::zero() { r } else { R::one() })
            .collect();
        let var = crate::stats::sample_variance(train.responses()).max(R::of(1.0e-12));
        return KernelSpec::new(settings.power, theta, var);
    }
    Ok(fit_hyperparams(train, trend, settings.power, None, settings.restarts)?.kernel)
}

fn grid_counts(n_sites: usize, d: usize) -> Vec<usize> {
    if d == 1 {
        return vec![n_sites.max(2)];
    }
    let per_axis = ((n_sites as f64).powf(1.0 / d as f64).round() as usize).max(2);
    vec![per_axis; d]
}

/// Default bounding box for space-filling designs: the empirical
/// [0.5%, 99.5%] quantile box of Z(T) from a pilot sample.
fn pilot_bounds<R: Real>(problem: &dyn Problem<R>, seed: u64) -> Vec<(R, R)> {
    let n = 10_000;
    let stream = RngStream::new(seed, STREAM_PILOT);
    let draws: Vec<Vec<R>> = (0..n)
        .map(|i| {
            let mut s = stream.substream(i as u64);
            problem.draw_site(&mut s)
        })
        .collect();
    let d = problem.dim();
    (0..d)
        .map(|j| {
            let mut col: Vec<R> = draws.iter().map(|z| z[j]).collect();
            col.sort_by(|a, b| a.partial_cmp(b).expect("finite draws"));
            let lo = stats::quantile_sorted(&col, R::of(0.005)).expect("pilot quantile");
            let hi = stats::quantile_sorted(&col, R::of(0.995)).expect("pilot quantile");
            if hi > lo {
                (lo, hi)
            } else {
                // degenerate dynamics: widen so grid construction succeeds
                (lo - R::one(), hi + R::one())
            }
        })
        .collect()
}
