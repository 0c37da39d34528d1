//! Two-population cointegrated mortality model.
//!
//! Pool 1 (the index population) has a random-walk period effect
//! kappa1(t) = kappa1(t-1) + mu1 + sigma1*eps1(t). The spread
//! S(t) = kappa1(t) - kappa2(t) to the insured pool follows
//! S(t) = mu2 + phi*(S(t-1) - mu2) + sigma2*eps2(t-1) + c*eps1(t-1),
//! sharing last year's pool-1 innovation. Cohort effects are AR(2)
//! processes, historical where available. Log rates follow the APC form
//! beta1_k(x) + beta2_k(x)*kappa_k(t) + (1/n_a)*gamma_k(t-x).
//!
//! Scenario generation refits (mu2, phi) at the deferral date from the
//! simulated history ([`ppc_refit`]); the refitted values travel in the
//! state and drive the post-deferral dynamics.

use crate::error::{Error, Result};
use crate::real::Real;
use crate::rng::RngStream;
use crate::stats;

use super::{AgeStructure, MortalityPath};

/// Cohort effect process: a fitted history indexed by birth cohort, with
/// AR(2) coefficients for projecting past the end of history. Projection is
/// at the conditional mean (innovations zeroed); indices before the history
/// clamp to its first value.
#[derive(Debug, Clone)]
pub struct CohortProcess<R: Real> {
    base_index: i64,
    history: Vec<R>,
    pub ar1: R,
    pub ar2: R,
    pub intercept: R,
    pub innovation_sd: R,
}

impl<R: Real> CohortProcess<R> {
    pub fn new(
        base_index: i64,
        history: Vec<R>,
        ar1: R,
        ar2: R,
        intercept: R,
        innovation_sd: R,
    ) -> Result<Self> {
        if history.is_empty() {
            return Err(Error::invalid("cohort history must be non-empty"));
        }
        if innovation_sd < R::zero() {
            return Err(Error::invalid("cohort innovation sd must be >= 0"));
        }
        Ok(CohortProcess { base_index, history, ar1, ar2, intercept, innovation_sd })
    }

    pub fn constant(base_index: i64, len: usize, value: R) -> Result<Self> {
        Self::new(base_index, vec![value; len], R::zero(), R::zero(), value, R::zero())
    }

    fn last_index(&self) -> i64 {
        self.base_index + self.history.len() as i64 - 1
    }

    /// Cohort value at index `c`, AR(2)-projected beyond the history.
    pub fn value_at(&self, c: i64) -> R {
        if c <= self.base_index {
            return self.history[0];
        }
        let last = self.last_index();
        if c <= last {
            return self.history[(c - self.base_index) as usize];
        }
        let n = self.history.len();
        let mut prev2 = if n >= 2 { self.history[n - 2] } else { self.history[n - 1] };
        let mut prev1 = self.history[n - 1];
        for _ in 0..(c - last) {
            let next = self.intercept + self.ar1 * prev1 + self.ar2 * prev2;
            prev2 = prev1;
            prev1 = next;
        }
        prev1
    }
}

#[derive(Debug, Clone)]
pub struct TwoPopModel<R: Real> {
    pub mu1: R,
    pub sigma1: R,
    pub mu2: R,
    pub phi: R,
    pub sigma2: R,
    /// Loading of last year's pool-1 innovation on the spread (c = sigma1 - rho*sigma2).
    pub c: R,
    pub ages1: AgeStructure<R>,
    pub ages2: AgeStructure<R>,
    pub cohort1: CohortProcess<R>,
    pub cohort2: CohortProcess<R>,
}

impl<R: Real> TwoPopModel<R> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        mu1: R,
        sigma1: R,
        mu2: R,
        phi: R,
        sigma2: R,
        c: R,
        ages1: AgeStructure<R>,
        ages2: AgeStructure<R>,
        cohort1: CohortProcess<R>,
        cohort2: CohortProcess<R>,
    ) -> Result<Self> {
        if sigma1 < R::zero() || sigma2 < R::zero() {
            return Err(Error::invalid("volatilities must be >= 0"));
        }
        if phi.abs() >= R::one() {
            return Err(Error::invalid("spread AR(1) coefficient must satisfy |phi| < 1"));
        }
        Ok(TwoPopModel { mu1, sigma1, mu2, phi, sigma2, c, ages1, ages2, cohort1, cohort2 })
    }

    pub fn ages(&self, pool: Pool) -> &AgeStructure<R> {
        match pool {
            Pool::One => &self.ages1,
            Pool::Two => &self.ages2,
        }
    }

    pub fn cohort(&self, pool: Pool) -> &CohortProcess<R> {
        match pool {
            Pool::One => &self.cohort1,
            Pool::Two => &self.cohort2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pool {
    One,
    Two,
}

/// State at the deferral date: both period effects plus the spread
/// parameters refitted from the appended history.
#[derive(Debug, Clone, Copy)]
pub struct TwoPopState<R: Real> {
    pub kappa1: R,
    pub kappa2: R,
    pub mu2_refit: R,
    pub phi_refit: R,
}

impl<R: Real> TwoPopState<R> {
    pub fn new(kappa1: R, kappa2: R, mu2_refit: R, phi_refit: R) -> Self {
        TwoPopState { kappa1, kappa2, mu2_refit, phi_refit }
    }

    /// State carrying the model's own spread parameters (no refit).
    pub fn from_levels(model: &TwoPopModel<R>, kappa1: R, kappa2: R) -> Self {
        TwoPopState { kappa1, kappa2, mu2_refit: model.mu2, phi_refit: model.phi }
    }

    pub fn spread(&self) -> R {
        self.kappa1 - self.kappa2
    }

    pub fn as_vec(&self) -> Vec<R> {
        vec![self.kappa1, self.kappa2, self.mu2_refit, self.phi_refit]
    }

    pub fn from_slice(z: &[R]) -> Result<Self> {
        if z.len() != 4 {
            return Err(Error::invalid("two-population state has 4 components"));
        }
        Ok(TwoPopState { kappa1: z[0], kappa2: z[1], mu2_refit: z[2], phi_refit: z[3] })
    }
}

#[derive(Debug, Clone)]
pub struct TwoPopPaths<R: Real> {
    pub kappa1: Vec<R>,
    pub kappa2: Vec<R>,
}

/// Simulate both period effects for `horizon` years past the state date.
///
/// The spread recursion uses the refitted (mu2, phi) carried in the state and
/// the model's volatilities. Lagged innovations from the state year are
/// unobserved given the four-component state and are drawn fresh. The two
/// pools share eps1 draws, which is what makes the hedge pairing meaningful.
pub fn simulate_twopop<R: Real>(
    model: &TwoPopModel<R>,
    state: &TwoPopState<R>,
    stream: &mut RngStream,
    horizon: usize,
) -> TwoPopPaths<R> {
    assert!(horizon >= 1, "horizon must be >= 1");
    let (mu2, phi) = (state.mu2_refit, state.phi_refit);
    let mut kappa1 = Vec::with_capacity(horizon);
    let mut kappa2 = Vec::with_capacity(horizon);
    let mut k1 = state.kappa1;
    let mut s = state.spread();
    // stand-ins for the state-year innovations
    let mut e1_prev = R::of(stream.std_normal());
    let mut e2_prev = R::of(stream.std_normal());
    for _ in 0..horizon {
        let e1 = R::of(stream.std_normal());
        k1 = k1 + model.mu1 + model.sigma1 * e1;
        s = mu2 + phi * (s - mu2) + model.sigma2 * e2_prev + model.c * e1_prev;
        kappa1.push(k1);
        kappa2.push(k1 - s);
        e1_prev = e1;
        e2_prev = R::of(stream.std_normal());
    }
    TwoPopPaths { kappa1, kappa2 }
}

/// Rate surface for one pool: m(T+s, x) =
/// exp(beta1(x) + beta2(x)*kappa(T+s) + (1/n_a)*gamma(T+s-x)), where the
/// cohort index is calendar year minus age, with calendar time measured from
/// the end of the fitted history (the deferral date is `deferral`).
pub fn twopop_rates<R: Real>(
    model: &TwoPopModel<R>,
    pool: Pool,
    kappa_path: &[R],
    deferral: u32,
) -> MortalityPath<R> {
    let ages = model.ages(pool);
    let cohort = model.cohort(pool);
    let n_a = ages.n_ages();
    let inv_na = ages.inv_n_ages();
    let horizon = kappa_path.len();
    // pre-extend the cohort values over the index range this surface reads
    let c_lo = deferral as i64 + 1 - ages.x_max() as i64;
    let c_hi = deferral as i64 + horizon as i64 - ages.x_min() as i64;
    let gammas: Vec<R> = (c_lo..=c_hi).map(|c| cohort.value_at(c)).collect();
    let mut rates = Vec::with_capacity(horizon * n_a);
    for (j, &kappa) in kappa_path.iter().enumerate() {
        let s = j as i64 + 1;
        for i in 0..n_a {
            let age = ages.x_min() as i64 + i as i64;
            let c = deferral as i64 + s - age;
            let gamma = gammas[(c - c_lo) as usize];
            rates.push((ages.beta1()[i] + ages.beta2()[i] * kappa + inv_na * gamma).exp());
        }
    }
    MortalityPath::new(horizon, ages.x_min(), n_a, rates)
        .expect("dimensions are consistent by construction")
}

/// Refitted parameters from an appended history.
#[derive(Debug, Clone, Copy)]
pub struct PpcFit<R: Real> {
    pub mu1: R,
    pub sigma1: R,
    pub mu2: R,
    pub phi: R,
    pub sigma2: R,
}

/// Refit the random walk with drift on the pool-1 history and the AR(1) on
/// the spread history by conditional least squares.
pub fn ppc_refit<R: Real>(kappa1_hist: &[R], spread_hist: &[R]) -> Result<PpcFit<R>> {
    if kappa1_hist.len() < 3 || spread_hist.len() < 3 {
        return Err(Error::invalid("refit needs histories of length >= 3"));
    }
    let diffs: Vec<R> = kappa1_hist.windows(2).map(|w| w[1] - w[0]).collect();
    let mu1 = stats::mean(&diffs);
    let sigma1 = stats::sample_sd(&diffs);

    // regress S(t) on S(t-1)
    let n = spread_hist.len() - 1;
    let xs = &spread_hist[..n];
    let ys = &spread_hist[1..];
    let mx = stats::mean(xs);
    let my = stats::mean(ys);
    let mut sxx = R::zero();
    let mut sxy = R::zero();
    for i in 0..n {
        sxx = sxx + (xs[i] - mx) * (xs[i] - mx);
        sxy = sxy + (xs[i] - mx) * (ys[i] - my);
    }
    let scale = xs.iter().map(|v| *v * *v).sum::<R>().max(R::one());
    if sxx <= R::of(1.0e-14) * scale {
        return Err(Error::DegenerateFit(
            "constant spread history: AR(1) regressor has zero variance".into(),
        ));
    }
    let phi = sxy / sxx;
    let intercept = my - phi * mx;
    if (R::one() - phi).abs() < R::of(1.0e-10) {
        return Err(Error::DegenerateFit("spread refit hit a unit root (phi = 1)".into()));
    }
    let mu2 = intercept / (R::one() - phi);
    let mut rss = R::zero();
    for i in 0..n {
        let resid = ys[i] - intercept - phi * xs[i];
        rss = rss + resid * resid;
    }
    let dof = R::of_usize((n - 2).max(1));
    let sigma2 = (rss / dof).sqrt();
    Ok(PpcFit { mu1, sigma1, mu2, phi, sigma2 })
}
