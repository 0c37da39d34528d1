//! CBD stochastic survival-probability model.
//!
//! The one-year survival over calendar year [t, t+1) for someone aged x at
//! the start of the year is 1/(1 + exp(kappa1(t) + (x - x_ave)*kappa2(t))).
//! Period effects follow the fitted ARIMA forms: kappa1 is ARIMA(0,1,3) with
//! drift, kappa2 is ARIMA(1,1,2):
//!
//!   kappa1(t) = kappa1(t-1) + mu + e1(t) + sum_q theta_q1 * e1(t-q)
//!   kappa2(t) = (1+phi)*kappa2(t-1) - phi*kappa2(t-2)
//!               + e2(t) + sum_q theta_q2 * e2(t-q)
//!
//! The Markov state carries {kappa1(T), kappa2(T), kappa2(T-1)}; innovations
//! before the state date are unobserved given that state and are set to
//! their conditional mean, zero.
//!
//! For the valuation code the model is expressed as a rate surface with
//! m(t, x) = -log(one-year survival), so that the generic
//! exp(-sum of rates) survival machinery reproduces the product of logistic
//! factors exactly.

use crate::error::{Error, Result};
use crate::real::Real;
use crate::rng::RngStream;

use super::{AgeStructure, MortalityPath};

#[derive(Debug, Clone)]
pub struct CbdModel<R: Real> {
    pub mu: R,
    pub theta11: R,
    pub theta21: R,
    pub theta31: R,
    pub phi: R,
    pub theta12: R,
    pub theta22: R,
    pub sd1: R,
    pub sd2: R,
    pub ages: AgeStructure<R>,
}

impl<R: Real> CbdModel<R> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        mu: R,
        theta11: R,
        theta21: R,
        theta31: R,
        phi: R,
        theta12: R,
        theta22: R,
        sd1: R,
        sd2: R,
        ages: AgeStructure<R>,
    ) -> Result<Self> {
        if sd1 < R::zero() || sd2 < R::zero() {
            return Err(Error::invalid("innovation sds must be >= 0"));
        }
        Ok(CbdModel { mu, theta11, theta21, theta31, phi, theta12, theta22, sd1, sd2, ages })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CbdState<R: Real> {
    pub kappa1: R,
    pub kappa2_now: R,
    pub kappa2_prev: R,
}

impl<R: Real> CbdState<R> {
    pub fn new(kappa1: R, kappa2_now: R, kappa2_prev: R) -> Self {
        CbdState { kappa1, kappa2_now, kappa2_prev }
    }

    pub fn as_vec(&self) -> Vec<R> {
        vec![self.kappa1, self.kappa2_now, self.kappa2_prev]
    }

    pub fn from_slice(z: &[R]) -> Result<Self> {
        if z.len() != 3 {
            return Err(Error::invalid("CBD state has 3 components"));
        }
        Ok(CbdState { kappa1: z[0], kappa2_now: z[1], kappa2_prev: z[2] })
    }
}

/// Simulate (kappa1, kappa2) for years T+1..=T+horizon from the state at T,
/// with pre-state innovations set to zero.
pub fn simulate_cbd<R: Real>(
    model: &CbdModel<R>,
    state: &CbdState<R>,
    stream: &mut RngStream,
    horizon: usize,
) -> (Vec<R>, Vec<R>) {
    assert!(horizon >= 1, "horizon must be >= 1");
    let mut k1_path = Vec::with_capacity(horizon);
    let mut k2_path = Vec::with_capacity(horizon);
    let mut k1 = state.kappa1;
    let mut k2 = state.kappa2_now;
    let mut k2_prev = state.kappa2_prev;
    let mut e1_hist = [R::zero(); 3];
    let mut e2_hist = [R::zero(); 2];
    let one = R::one();
    for _ in 0..horizon {
        let e1 = model.sd1 * R::of(stream.std_normal());
        k1 = k1
            + model.mu
            + e1
            + model.theta11 * e1_hist[0]
            + model.theta21 * e1_hist[1]
            + model.theta31 * e1_hist[2];
        e1_hist = [e1, e1_hist[0], e1_hist[1]];

        let e2 = model.sd2 * R::of(stream.std_normal());
        let k2_next = (one + model.phi) * k2 - model.phi * k2_prev
            + e2
            + model.theta12 * e2_hist[0]
            + model.theta22 * e2_hist[1];
        e2_hist = [e2, e2_hist[0]];
        k2_prev = k2;
        k2 = k2_next;

        k1_path.push(k1);
        k2_path.push(k2);
    }
    (k1_path, k2_path)
}

/// Numerically stable log(1 + exp(u)).
fn softplus<R: Real>(u: R) -> R {
    let cut = R::of(30.0);
    if u > cut {
        u + (-u).exp()
    } else if u < -cut {
        u.exp()
    } else {
        u.exp().ln_1p()
    }
}

/// Rate surface equivalent of the logistic one-year survival.
///
/// Slot s, column x holds -log of the survival over year [T+s-1, T+s) for a
/// person aged x-1 at the start of that year, i.e. aged x when the year's
/// payment falls due. Slot 1 therefore uses the state values (kappa at T),
/// slot s >= 2 uses the simulated kappa(T+s-1). The valuation diagonal
/// (s, x+s) then reproduces the product of logistic factors with
/// start-of-year ages x, x+1, ...
pub fn cbd_rates<R: Real>(
    model: &CbdModel<R>,
    state: &CbdState<R>,
    kappa1_path: &[R],
    kappa2_path: &[R],
) -> MortalityPath<R> {
    assert_eq!(kappa1_path.len(), kappa2_path.len());
    let ages = &model.ages;
    let n_a = ages.n_ages();
    let horizon = kappa1_path.len() + 1;
    let mut rates = Vec::with_capacity(horizon * n_a);
    for s in 1..=horizon {
        let (k1, k2) = if s == 1 {
            (state.kappa1, state.kappa2_now)
        } else {
            (kappa1_path[s - 2], kappa2_path[s - 2])
        };
        for i in 0..n_a {
            let age_end = ages.x_min() + i as u32;
            let age_start = age_end.saturating_sub(1);
            let u = ages.beta1_at(age_start) * k1 + ages.beta2_at(age_start) * k2;
            rates.push(softplus(u));
        }
    }
    MortalityPath::new(horizon, ages.x_min(), n_a, rates)
        .expect("dimensions are consistent by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn paper_model(sd1: f64, sd2: f64) -> CbdModel<f64> {
        CbdModel::new(
            -0.0195,
            -0.5516,
            0.1736,
            0.5169,
            0.9206,
            -1.4664,
            0.6167,
            sd1,
            sd2,
            AgeStructure::cbd_parameterization(50, 89, 89).unwrap(),
        )
        .unwrap()
    }

    /// Closed-form conditional mean of kappa2, used as an independent oracle.
    fn xi2(phi: f64, k2: f64, k2_prev: f64, t: usize) -> f64 {
        phi.powi(t as i32 + 1) * (k2 - k2_prev) / (phi - 1.0) + (phi * k2_prev - k2) / (phi - 1.0)
    }

    #[test]
    fn one_step_recursion_arithmetic() {
        let mut m = paper_model(0.0, 0.0);
        m.theta12 = 0.0;
        m.theta22 = 0.0;
        let state = CbdState::new(0.0, 1.0, 1.1);
        let mut stream = RngStream::new(1, 0);
        let (_, k2) = simulate_cbd(&m, &state, &mut stream, 1);
        assert_abs_diff_eq!(k2[0], 1.9206 - 0.9206 * 1.1, epsilon = 1e-12);
        assert_abs_diff_eq!(k2[0], 0.90794, epsilon = 1e-10);
    }

    #[test]
    fn zero_vol_kappa1_is_pure_drift() {
        let m = paper_model(0.0, 0.0);
        let state = CbdState::new(-3.9, 0.1, 0.099);
        let mut stream = RngStream::new(1, 0);
        let (k1, _) = simulate_cbd(&m, &state, &mut stream, 25);
        for (t, v) in k1.iter().enumerate() {
            assert_abs_diff_eq!(*v, -3.9 + m.mu * (t + 1) as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_vol_kappa2_matches_closed_form() {
        let m = paper_model(0.0, 0.0);
        let state = CbdState::new(-3.9, 0.1, 0.097);
        let mut stream = RngStream::new(1, 0);
        let (_, k2) = simulate_cbd(&m, &state, &mut stream, 30);
        for (idx, v) in k2.iter().enumerate() {
            let expect = xi2(m.phi, state.kappa2_now, state.kappa2_prev, idx + 1);
            assert_abs_diff_eq!(*v, expect, epsilon = 1e-10);
        }
    }

    #[test]
    fn zero_difference_fixed_point() {
        let m = paper_model(0.0, 0.0);
        let state = CbdState::new(0.0, 0.25, 0.25);
        let mut stream = RngStream::new(1, 0);
        let (_, k2) = simulate_cbd(&m, &state, &mut stream, 10);
        for v in k2 {
            assert_abs_diff_eq!(v, 0.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn monte_carlo_mean_matches_closed_form() {
        let m = paper_model(0.05, 0.004);
        let state = CbdState::new(-3.9, 0.1, 0.097);
        let n = 200_000;
        let base = RngStream::new(21, 0);
        for t in [1usize, 5, 20] {
            let mut sum1 = 0.0;
            let mut sumsq1 = 0.0;
            let mut sum2 = 0.0;
            let mut sumsq2 = 0.0;
            for i in 0..n {
                let mut s = base.substream(i as u64);
                let (k1, k2) = simulate_cbd(&m, &state, &mut s, t);
                sum1 += k1[t - 1];
                sumsq1 += k1[t - 1] * k1[t - 1];
                sum2 += k2[t - 1];
                sumsq2 += k2[t - 1] * k2[t - 1];
            }
            let mean1 = sum1 / n as f64;
            let se1 = ((sumsq1 / n as f64 - mean1 * mean1) / n as f64).sqrt();
            let expect1 = state.kappa1 + m.mu * t as f64;
            assert!(
                (mean1 - expect1).abs() < 4.0 * se1.max(1e-12),
                "kappa1 t={t}: {mean1} vs {expect1}"
            );
            let mean2 = sum2 / n as f64;
            let se2 = ((sumsq2 / n as f64 - mean2 * mean2) / n as f64).sqrt();
            let expect2 = xi2(m.phi, state.kappa2_now, state.kappa2_prev, t);
            assert!(
                (mean2 - expect2).abs() < 4.0 * se2.max(1e-12),
                "kappa2 t={t}: {mean2} vs {expect2}"
            );
        }
    }

    #[test]
    fn rates_reproduce_logistic_factors() {
        let m = paper_model(0.0, 0.0);
        let state = CbdState::new(-3.9, 0.1, 0.1);
        let (k1, k2) = {
            let mut stream = RngStream::new(3, 0);
            simulate_cbd(&m, &state, &mut stream, 4)
        };
        let path = cbd_rates(&m, &state, &k1, &k2);
        assert_eq!(path.horizon(), 5);
        // slot 1, payment age 66: year [T, T+1), start age 65, uses the state
        let u = state.kappa1 + (65.0 - 69.5) * state.kappa2_now;
        let survival = 1.0 / (1.0 + u.exp());
        assert_abs_diff_eq!((-path.rate(1, 66)).exp(), survival, epsilon = 1e-12);
        // slot 3, payment age 68: year [T+2, T+3), start age 67, uses kappa(T+2)
        let u = k1[1] + (67.0 - 69.5) * k2[1];
        let survival = 1.0 / (1.0 + u.exp());
        assert_abs_diff_eq!((-path.rate(3, 68)).exp(), survival, epsilon = 1e-12);
    }

    #[test]
    fn zero_state_gives_half_survival() {
        let m = paper_model(0.0, 0.0);
        let state = CbdState::new(0.0, 0.0, 0.0);
        let (k1, k2) = {
            let mut stream = RngStream::new(3, 0);
            simulate_cbd(&m, &state, &mut stream, 2)
        };
        let path = cbd_rates(&m, &state, &k1, &k2);
        assert_abs_diff_eq!((-path.rate(1, 66)).exp(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn softplus_stability() {
        assert_abs_diff_eq!(softplus(0.0f64), 2.0f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(softplus(100.0f64), 100.0, epsilon = 1e-12);
        assert!(softplus(-100.0f64) > 0.0);
        assert!(softplus(-100.0f64) < 1e-40);
    }

    #[test]
    fn model_validation() {
        let ages = AgeStructure::cbd_parameterization(50, 89, 89).unwrap();
        assert!(CbdModel::new(0.0, 0.0, 0.0, 0.0, 0.9, 0.0, 0.0, -0.1, 0.0, ages).is_err());
    }
}
