//! Lee-Carter model with transient mortality shocks.
//!
//! The period effect follows a random walk with drift plus a differenced
//! shock term: kappa(t+1) = kappa(t) + mu1 + xi1(t+1) + [xi2(t+1) - xi2(t)],
//! where xi1 ~ N(0, sigma1^2) and xi2 is zero-modified normal (a shock of
//! size N(mu2, sigma2^2) with probability p, else exactly 0). Shocks last a
//! single year: the differenced term removes last year's shock as this
//! year's enters. Log rates are beta1(x) + beta2(x) * kappa(t).

use crate::error::{Error, Result};
use crate::real::Real;
use crate::rng::RngStream;

use super::{AgeStructure, MortalityPath};

#[derive(Debug, Clone)]
pub struct ChenCoxModel<R: Real> {
    pub mu1: R,
    pub sigma1: R,
    /// Probability of a shock in any given year.
    pub p: R,
    /// Shock magnitude distribution N(mu2, sigma2^2).
    pub mu2: R,
    pub sigma2: R,
    pub ages: AgeStructure<R>,
}

impl<R: Real> ChenCoxModel<R> {
    pub fn new(
        mu1: R,
        sigma1: R,
        p: R,
        mu2: R,
        sigma2: R,
        ages: AgeStructure<R>,
    ) -> Result<Self> {
        if sigma1 < R::zero() || sigma2 < R::zero() {
            return Err(Error::invalid("volatilities must be >= 0"));
        }
        if !(R::zero()..=R::one()).contains(&p) {
            return Err(Error::invalid("shock probability must lie in [0,1]"));
        }
        Ok(ChenCoxModel { mu1, sigma1, p, mu2, sigma2, ages })
    }
}

/// Markov state at the valuation date: the period effect and the shock
/// currently in the system (which leaves at the next step).
#[derive(Debug, Clone, Copy)]
pub struct ChenCoxState<R: Real> {
    pub kappa: R,
    pub shock: R,
}

impl<R: Real> ChenCoxState<R> {
    pub fn new(kappa: R, shock: R) -> Self {
        ChenCoxState { kappa, shock }
    }

    pub fn unshocked(kappa: R) -> Self {
        ChenCoxState { kappa, shock: R::zero() }
    }
}

/// Simulate kappa(T+1)..kappa(T+horizon).
///
/// The first increment subtracts the incoming `state.shock`; afterwards each
/// year's shock enters and is removed the year after. Paths started from
/// (kappa, xi) and (kappa - xi, 0) with the same stream are identical.
pub fn simulate_chencox<R: Real>(
    model: &ChenCoxModel<R>,
    state: &ChenCoxState<R>,
    stream: &mut RngStream,
    horizon: usize,
) -> Vec<R> {
    assert!(horizon >= 1, "horizon must be >= 1");
    let mut path = Vec::with_capacity(horizon);
    let mut kappa = state.kappa;
    let mut prev_shock = state.shock;
    for _ in 0..horizon {
        let xi1 = model.sigma1 * R::of(stream.std_normal());
        let xi2 = draw_shock(model, stream);
        kappa = kappa + model.mu1 + xi1 + xi2 - prev_shock;
        prev_shock = xi2;
        path.push(kappa);
    }
    path
}

fn draw_shock<R: Real>(model: &ChenCoxModel<R>, stream: &mut RngStream) -> R {
    let u = R::of(stream.uniform());
    if u < model.p {
        model.mu2 + model.sigma2 * R::of(stream.std_normal())
    } else {
        R::zero()
    }
}

/// Rate surface m(T+s, x) = exp(beta1(x) + beta2(x) * kappa(T+s)).
pub fn chencox_rates<R: Real>(model: &ChenCoxModel<R>, kappa_path: &[R]) -> MortalityPath<R> {
    let ages = &model.ages;
    let n_a = ages.n_ages();
    let mut rates = Vec::with_capacity(kappa_path.len() * n_a);
    for &kappa in kappa_path {
        for i in 0..n_a {
            rates.push((ages.beta1()[i] + ages.beta2()[i] * kappa).exp());
        }
    }
    MortalityPath::new(kappa_path.len(), ages.x_min(), n_a, rates)
        .expect("dimensions are consistent by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn test_ages() -> AgeStructure<f64> {
        // the synthetic default used by the case studies: beta1 linear from
        // -5.5 at 50 to -2.0 at 89, beta2 = 1/n_a
        let n_a = 40;
        let beta1: Vec<f64> = (0..n_a)
            .map(|i| -5.5 + 3.5 * i as f64 / (n_a - 1) as f64)
            .collect();
        let beta2 = vec![1.0 / n_a as f64; n_a];
        AgeStructure::new(50, 89, 94, beta1, beta2).unwrap()
    }

    fn paper_model() -> ChenCoxModel<f64> {
        ChenCoxModel::new(-0.2173, 0.3733, 0.0436, 0.8393, 1.4316, test_ages()).unwrap()
    }

    fn deterministic_model() -> ChenCoxModel<f64> {
        ChenCoxModel::new(-0.2173, 0.0, 0.0, 0.8393, 1.4316, test_ages()).unwrap()
    }

    #[test]
    fn deterministic_drift_path() {
        let model = deterministic_model();
        let mut stream = RngStream::new(1, 0);
        let path = simulate_chencox(&model, &ChenCoxState::unshocked(-14.0), &mut stream, 3);
        for (i, v) in path.iter().enumerate() {
            assert_abs_diff_eq!(*v, -14.0 + (i + 1) as f64 * model.mu1, epsilon = 1e-12);
        }
    }

    #[test]
    fn incoming_shock_leaves_at_first_step() {
        let model = deterministic_model();
        let mut stream = RngStream::new(1, 0);
        let path = simulate_chencox(&model, &ChenCoxState::new(-14.0, 2.0), &mut stream, 3);
        assert_abs_diff_eq!(path[0], -14.0 + model.mu1 - 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(path[1], path[0] + model.mu1, epsilon = 1e-12);
        assert_abs_diff_eq!(path[2], path[1] + model.mu1, epsilon = 1e-12);
    }

    #[test]
    fn shock_shift_identity_on_paths() {
        // paths from (kappa, xi) and (kappa - xi, 0) are identical for a
        // matched noise stream
        let model = paper_model();
        let mut s1 = RngStream::new(33, 5);
        let mut s2 = RngStream::new(33, 5);
        let a = simulate_chencox(&model, &ChenCoxState::new(-13.0, 1.7), &mut s1, 20);
        let b = simulate_chencox(&model, &ChenCoxState::new(-14.7, 0.0), &mut s2, 20);
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(*x, *y, epsilon = 1e-12);
        }
    }

    #[test]
    fn monte_carlo_mean_matches_closed_form() {
        // E[kappa(T+10)] = kappa + 10*mu1 + p*mu2 with no incoming shock
        let model = paper_model();
        let n = 200_000;
        let horizon = 10;
        let base = RngStream::new(2024, 0);
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for i in 0..n {
            let mut s = base.substream(i as u64);
            let path =
                simulate_chencox(&model, &ChenCoxState::unshocked(-14.0), &mut s, horizon);
            let v = path[horizon - 1];
            sum += v;
            sumsq += v * v;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        let se = (var / n as f64).sqrt();
        let expect = -14.0 + 10.0 * model.mu1 + model.p * model.mu2;
        assert_abs_diff_eq!(expect, -16.1364, epsilon = 1e-3);
        assert!(
            (mean - expect).abs() < 4.0 * se,
            "mean {mean} vs {expect} (4se {:.2e})",
            4.0 * se
        );
    }

    #[test]
    fn rates_reduce_to_exp_beta1_when_beta2_zero() {
        let ages = AgeStructure::new(50, 54, 94, vec![-4.0; 5], vec![0.0; 5]).unwrap();
        let model = ChenCoxModel::new(-0.2, 0.1, 0.0, 0.0, 0.0, ages).unwrap();
        let path = chencox_rates(&model, &[-10.0, 0.0, 25.0]);
        for s in 1..=3 {
            for age in 50..=54 {
                assert_abs_diff_eq!(path.rate(s, age), (-4.0f64).exp(), epsilon = 1e-12);
            }
        }
        assert_abs_diff_eq!(path.rate(2, 52), 0.018316, epsilon = 1e-6);
    }

    #[test]
    fn rates_decrease_with_kappa_when_beta2_positive() {
        let model = paper_model();
        // monotone decreasing kappa path => strictly decreasing rates per age
        let kappas = [-12.0, -13.0, -14.5, -17.0];
        let path = chencox_rates(&model, &kappas);
        for age in 50..=89 {
            for s in 1..kappas.len() {
                assert!(path.rate(s + 1, age) < path.rate(s, age));
            }
        }
    }

    #[test]
    fn model_validation() {
        assert!(ChenCoxModel::new(0.0, -1.0, 0.5, 0.0, 1.0, test_ages()).is_err());
        assert!(ChenCoxModel::new(0.0, 1.0, 1.5, 0.0, 1.0, test_ages()).is_err());
    }
}
