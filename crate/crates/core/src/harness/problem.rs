//! Binds a mortality model, an initial state and an annuity contract into
//! the uniform interface the evaluation pipeline works with: draw a state at
//! the deferral date, sample one pathwise contract value given that state,
//! and evaluate the deterministic estimators.

use crate::analytic::{
    cbd_analytic_annuity, chencox_analytic_annuity, twopop_estimators, AnalyticVariant,
};
use crate::annuity::{annuity_path_value, hedge_portfolio_path, AnnuitySpec};
use crate::error::Result;
use crate::mortality::{
    cbd_rates, chencox_rates, simulate_cbd, simulate_chencox, simulate_twopop, twopop_rates,
    CbdModel, CbdState, ChenCoxModel, ChenCoxState, Pool, TwoPopModel, TwoPopState,
};
use crate::real::Real;
use crate::rng::RngStream;

/// Which deterministic estimator to evaluate. Models with a single estimator
/// treat every variant as the default one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetVariant {
    Default,
    A1,
    A2,
}

/// A valuation problem: the map z -> f(z) = E[F | Z(T) = z] sampled by
/// simulation, together with the outer law of Z(T) and the closed-form
/// approximations.
pub trait Problem<R: Real>: Send + Sync {
    fn dim(&self) -> usize;

    fn spec(&self) -> &AnnuitySpec<R>;

    /// One draw of Z(T) given Z(0).
    fn draw_site(&self, stream: &mut RngStream) -> Vec<R>;

    /// One pathwise sample of the contract value given Z(T) = `site`.
    fn sample_value(&self, site: &[R], stream: &mut RngStream) -> Result<R>;

    /// Deterministic estimator at `site`.
    fn deterministic(&self, variant: DetVariant, site: &[R]) -> Result<R>;
}

/// Deferred annuity under the shocked Lee-Carter model. The state coordinate
/// is the period effect kappa(T); conditioning treats it as unshocked, which
/// is exact up to the shift identity f(kappa, xi) = f(kappa - xi, 0).
pub struct ChenCoxProblem<R: Real> {
    pub model: ChenCoxModel<R>,
    pub state0: ChenCoxState<R>,
    pub spec: AnnuitySpec<R>,
}

impl<R: Real> Problem<R> for ChenCoxProblem<R> {
    fn dim(&self) -> usize {
        1
    }

    fn spec(&self) -> &AnnuitySpec<R> {
        &self.spec
    }

    fn draw_site(&self, stream: &mut RngStream) -> Vec<R> {
        let horizon = (self.spec.deferral as usize).max(1);
        let path = simulate_chencox(&self.model, &self.state0, stream, horizon);
        vec![path[horizon - 1]]
    }

    fn sample_value(&self, site: &[R], stream: &mut RngStream) -> Result<R> {
        let state = ChenCoxState::unshocked(site[0]);
        let path = simulate_chencox(&self.model, &state, stream, self.spec.payments());
        annuity_path_value(&chencox_rates(&self.model, &path), &self.spec)
    }

    fn deterministic(&self, _variant: DetVariant, site: &[R]) -> Result<R> {
        chencox_analytic_annuity(&self.model, &ChenCoxState::unshocked(site[0]), &self.spec)
    }
}

/// Hedge portfolio pi*a1 - a2 under the two-population model, with the
/// spread parameters refitted at the deferral date (PPC scenario
/// generation). The state is (kappa1, kappa2, mu2_refit, phi_refit).
pub struct TwoPopProblem<R: Real> {
    pub model: TwoPopModel<R>,
    pub kappa1_hist: Vec<R>,
    pub spread_hist: Vec<R>,
    pub spec: AnnuitySpec<R>,
    pub pi: R,
}

impl<R: Real> Problem<R> for TwoPopProblem<R> {
    fn dim(&self) -> usize {
        4
    }

    fn spec(&self) -> &AnnuitySpec<R> {
        &self.spec
    }

    fn draw_site(&self, stream: &mut RngStream) -> Vec<R> {
        let horizon = (self.spec.deferral as usize).max(1);
        let k1_0 = *self.kappa1_hist.last().expect("non-empty history");
        let s_0 = *self.spread_hist.last().expect("non-empty history");
        let state0 = TwoPopState::from_levels(&self.model, k1_0, k1_0 - s_0);
        let paths = simulate_twopop(&self.model, &state0, stream, horizon);
        let mut k1_hist = self.kappa1_hist.clone();
        k1_hist.extend_from_slice(&paths.kappa1);
        let mut s_hist = self.spread_hist.clone();
        s_hist.extend(paths.kappa1.iter().zip(&paths.kappa2).map(|(&a, &b)| a - b));
        // refit on the appended history; a degenerate (noise-free) history
        // carries no information, keep the model parameters then
        let (mu2, phi) = match crate::mortality::ppc_refit(&k1_hist, &s_hist) {
            Ok(fit) => (fit.mu2, fit.phi),
            Err(_) => (self.model.mu2, self.model.phi),
        };
        vec![
            paths.kappa1[horizon - 1],
            paths.kappa2[horizon - 1],
            mu2,
            phi,
        ]
    }

    fn sample_value(&self, site: &[R], stream: &mut RngStream) -> Result<R> {
        let state = TwoPopState::from_slice(site)?;
        let paths = simulate_twopop(&self.model, &state, stream, self.spec.payments());
        let p1 = twopop_rates(&self.model, Pool::One, &paths.kappa1, self.spec.deferral);
        let p2 = twopop_rates(&self.model, Pool::Two, &paths.kappa2, self.spec.deferral);
        hedge_portfolio_path(&p1, &p2, &self.spec, self.pi)
    }

    fn deterministic(&self, variant: DetVariant, site: &[R]) -> Result<R> {
        let state = TwoPopState::from_slice(site)?;
        let v = match variant {
            DetVariant::A1 => AnalyticVariant::A1,
            _ => AnalyticVariant::A2,
        };
        Ok(twopop_estimators(&self.model, &state, &self.spec, self.pi, v)?.delta)
    }
}

/// Deferred annuity under the CBD model; the state is
/// (kappa1(T), kappa2(T), kappa2(T-1)).
pub struct CbdProblem<R: Real> {
    pub model: CbdModel<R>,
    pub state0: CbdState<R>,
    pub spec: AnnuitySpec<R>,
}

impl<R: Real> Problem<R> for CbdProblem<R> {
    fn dim(&self) -> usize {
        3
    }

    fn spec(&self) -> &AnnuitySpec<R> {
        &self.spec
    }

    fn draw_site(&self, stream: &mut RngStream) -> Vec<R> {
        let horizon = (self.spec.deferral as usize).max(1);
        let (k1, k2) = simulate_cbd(&self.model, &self.state0, stream, horizon);
        let k2_prev = if horizon >= 2 { k2[horizon - 2] } else { self.state0.kappa2_now };
        vec![k1[horizon - 1], k2[horizon - 1], k2_prev]
    }

    fn sample_value(&self, site: &[R], stream: &mut RngStream) -> Result<R> {
        let state = CbdState::from_slice(site)?;
        let n = self.spec.payments();
        let (k1, k2) = if n >= 2 {
            simulate_cbd(&self.model, &state, stream, n - 1)
        } else {
            (Vec::new(), Vec::new())
        };
        annuity_path_value(&cbd_rates(&self.model, &state, &k1, &k2), &self.spec)
    }

    fn deterministic(&self, _variant: DetVariant, site: &[R]) -> Result<R> {
        cbd_analytic_annuity(&self.model, &CbdState::from_slice(site)?, &self.spec)
    }
}
