//! Closed-form conditional expectations of the period effects and the
//! deterministic annuity estimators built from them.
//!
//! Each estimator projects the expected kappa path, feeds it through the same
//! rate-surface and pathwise-valuation code as the simulators, and reads the
//! same cohort diagonal. Differences against Monte Carlo therefore isolate
//! the projection (Jensen) error, not bookkeeping differences.

use crate::annuity::{annuity_path_value, survival_prob_path, AnnuitySpec};
use crate::error::{Error, Result};
use crate::mortality::{
    cbd_rates, chencox_rates, twopop_rates, CbdModel, CbdState, ChenCoxModel, ChenCoxState, Pool,
    TwoPopModel, TwoPopState,
};
use crate::real::Real;

/// E[kappa(t) | Z(s)] = kappa(s) + (t-s)*mu1 + mu2*p - xi(s) under the
/// shocked random walk. Valid for t > s; the year-s shock leaves the system
/// at the first step.
pub fn lemma1_kappa<R: Real>(
    model: &ChenCoxModel<R>,
    state: &ChenCoxState<R>,
    t_minus_s: usize,
) -> Result<R> {
    if t_minus_s == 0 {
        return Err(Error::invalid("lemma 1 closed form requires t > s"));
    }
    Ok(state.kappa + R::of_usize(t_minus_s) * model.mu1 + model.mu2 * model.p - state.shock)
}

fn chencox_expected_path<R: Real>(
    model: &ChenCoxModel<R>,
    state: &ChenCoxState<R>,
    horizon: usize,
) -> Vec<R> {
    (1..=horizon)
        .map(|s| lemma1_kappa(model, state, s).expect("s >= 1"))
        .collect()
}

/// Deterministic annuity estimate: expected kappas plugged into the log-rate
/// form and valued pathwise.
pub fn chencox_analytic_annuity<R: Real>(
    model: &ChenCoxModel<R>,
    state: &ChenCoxState<R>,
    spec: &AnnuitySpec<R>,
) -> Result<R> {
    let kappas = chencox_expected_path(model, state, spec.payments());
    annuity_path_value(&chencox_rates(model, &kappas), spec)
}

/// Deterministic estimate of the s-year survival probability from T.
pub fn chencox_analytic_survival<R: Real>(
    model: &ChenCoxModel<R>,
    state: &ChenCoxState<R>,
    x: u32,
    s: usize,
) -> Result<R> {
    let kappas = chencox_expected_path(model, state, s);
    survival_prob_path(&chencox_rates(model, &kappas), 0, s, x)
}

/// E[kappa2(T+t) | Z(T)] =
/// kappa1 + mu1*t - mu2*(1 - phi^t) - phi^t*(kappa1 - kappa2), with the
/// refitted (mu2, phi) carried in the state. At t = 0 this collapses to
/// kappa2 exactly.
pub fn lemma2_kappa2<R: Real>(model: &TwoPopModel<R>, state: &TwoPopState<R>, t: usize) -> R {
    let phit = state.phi_refit.powi(t as i32);
    state.kappa1 + model.mu1 * R::of_usize(t)
        - state.mu2_refit * (R::one() - phit)
        - phit * state.spread()
}

/// The two deterministic approximations for the insured pool: A1 drifts
/// kappa2 at the pool-1 drift from its own initial value; A2 uses the
/// mean-reverting conditional expectation from the spread dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalyticVariant {
    A1,
    A2,
}

#[derive(Debug, Clone, Copy)]
pub struct TwoPopEstimates<R: Real> {
    pub a1: R,
    pub a2: R,
    pub delta: R,
}

fn twopop_expected_paths<R: Real>(
    model: &TwoPopModel<R>,
    state: &TwoPopState<R>,
    variant: AnalyticVariant,
    horizon: usize,
) -> (Vec<R>, Vec<R>) {
    let k1: Vec<R> = (1..=horizon)
        .map(|t| state.kappa1 + model.mu1 * R::of_usize(t))
        .collect();
    let k2: Vec<R> = match variant {
        AnalyticVariant::A1 => (1..=horizon)
            .map(|t| state.kappa2 + model.mu1 * R::of_usize(t))
            .collect(),
        AnalyticVariant::A2 => (1..=horizon).map(|t| lemma2_kappa2(model, state, t)).collect(),
    };
    (k1, k2)
}

/// Deterministic annuity values for both pools and the hedge portfolio
/// Delta = pi*a1 - a2. The index-pool estimate a1 is variant-independent.
pub fn twopop_estimators<R: Real>(
    model: &TwoPopModel<R>,
    state: &TwoPopState<R>,
    spec: &AnnuitySpec<R>,
    pi: R,
    variant: AnalyticVariant,
) -> Result<TwoPopEstimates<R>> {
    let (k1, k2) = twopop_expected_paths(model, state, variant, spec.payments());
    let a1 = annuity_path_value(&twopop_rates(model, Pool::One, &k1, spec.deferral), spec)?;
    let a2 = annuity_path_value(&twopop_rates(model, Pool::Two, &k2, spec.deferral), spec)?;
    Ok(TwoPopEstimates { a1, a2, delta: pi * a1 - a2 })
}

/// Deterministic s-year survival from T for one pool.
pub fn twopop_analytic_survival<R: Real>(
    model: &TwoPopModel<R>,
    state: &TwoPopState<R>,
    pool: Pool,
    variant: AnalyticVariant,
    x: u32,
    deferral: u32,
    s: usize,
) -> Result<R> {
    let (k1, k2) = twopop_expected_paths(model, state, variant, s);
    let path = match pool {
        Pool::One => twopop_rates(model, Pool::One, &k1, deferral),
        Pool::Two => twopop_rates(model, Pool::Two, &k2, deferral),
    };
    survival_prob_path(&path, 0, s, x)
}

/// Conditional means of the CBD period effects for t > s:
/// xi1 = kappa1(s) + mu*(t-s);
/// xi2 = phi^{t+1-s} (kappa2(s)-kappa2(s-1))/(phi-1)
///       + (phi*kappa2(s-1) - kappa2(s))/(phi-1).
pub fn lemma3_xi<R: Real>(
    model: &CbdModel<R>,
    state: &CbdState<R>,
    t_minus_s: usize,
) -> Result<(R, R)> {
    if t_minus_s == 0 {
        return Err(Error::invalid("lemma 3 closed form requires t > s"));
    }
    let denom = model.phi - R::one();
    if denom.abs() < R::of(1.0e-12) {
        return Err(Error::SingularFormula(
            "CBD conditional mean undefined at phi = 1".into(),
        ));
    }
    let xi1 = state.kappa1 + model.mu * R::of_usize(t_minus_s);
    let xi2 = model.phi.powi(t_minus_s as i32 + 1) * (state.kappa2_now - state.kappa2_prev)
        / denom
        + (model.phi * state.kappa2_prev - state.kappa2_now) / denom;
    Ok((xi1, xi2))
}

fn cbd_expected_paths<R: Real>(
    model: &CbdModel<R>,
    state: &CbdState<R>,
    horizon: usize,
) -> Result<(Vec<R>, Vec<R>)> {
    let mut k1 = Vec::with_capacity(horizon);
    let mut k2 = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let (x1, x2) = lemma3_xi(model, state, t)?;
        k1.push(x1);
        k2.push(x2);
    }
    Ok((k1, k2))
}

/// Deterministic annuity estimate under the CBD model: the product of
/// logistic one-year factors evaluated at the conditional means.
pub fn cbd_analytic_annuity<R: Real>(
    model: &CbdModel<R>,
    state: &CbdState<R>,
    spec: &AnnuitySpec<R>,
) -> Result<R> {
    let n = spec.payments();
    // the rate surface needs kappa at T..T+n-1; slot 1 comes from the state
    let (k1, k2) = cbd_expected_paths(model, state, n.saturating_sub(1))?;
    annuity_path_value(&cbd_rates(model, state, &k1, &k2), spec)
}

/// Deterministic s-year survival from T under the CBD model.
pub fn cbd_analytic_survival<R: Real>(
    model: &CbdModel<R>,
    state: &CbdState<R>,
    x: u32,
    s: usize,
) -> Result<R> {
    let (k1, k2) = cbd_expected_paths(model, state, s.saturating_sub(1))?;
    survival_prob_path(&cbd_rates(model, state, &k1, &k2), 0, s, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annuity::DiscountSpec;
    use crate::mortality::{simulate_chencox, AgeStructure, CohortProcess};
    use crate::rng::RngStream;
    use approx::assert_abs_diff_eq;

    fn test_ages(cutoff: u32) -> AgeStructure<f64> {
        let n_a = 40;
        let beta1: Vec<f64> = (0..n_a)
            .map(|i| -5.5 + 3.5 * i as f64 / (n_a - 1) as f64)
            .collect();
        let beta2 = vec![1.0 / n_a as f64; n_a];
        AgeStructure::new(50, 89, cutoff, beta1, beta2).unwrap()
    }

    fn chencox_paper() -> ChenCoxModel<f64> {
        ChenCoxModel::new(-0.2173, 0.3733, 0.0436, 0.8393, 1.4316, test_ages(94)).unwrap()
    }

    fn spec_chencox() -> AnnuitySpec<f64> {
        AnnuitySpec::new(65, 10, 94, DiscountSpec::new(0.04).unwrap()).unwrap()
    }

    #[test]
    fn lemma1_arithmetic() {
        let m = chencox_paper();
        let v = lemma1_kappa(&m, &ChenCoxState::unshocked(-14.0), 1).unwrap();
        assert_abs_diff_eq!(v, -14.18071, epsilon = 1e-5);
        assert!(lemma1_kappa(&m, &ChenCoxState::unshocked(-14.0), 0).is_err());
    }

    #[test]
    fn lemma1_is_linear_in_the_shock() {
        let m = chencox_paper();
        for t in [1usize, 5, 20] {
            let with = lemma1_kappa(&m, &ChenCoxState::new(-14.0, 5.0), t).unwrap();
            let without = lemma1_kappa(&m, &ChenCoxState::unshocked(-14.0), t).unwrap();
            assert_abs_diff_eq!(with - without, -5.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn lemma1_against_monte_carlo() {
        let m = chencox_paper();
        let state = ChenCoxState::new(-14.0, 0.8);
        let base = RngStream::new(31, 0);
        let n = 200_000;
        for t in [1usize, 10] {
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for i in 0..n {
                let mut s = base.substream(i as u64);
                let path = simulate_chencox(&m, &state, &mut s, t);
                sum += path[t - 1];
                sumsq += path[t - 1] * path[t - 1];
            }
            let mean = sum / n as f64;
            let se = ((sumsq / n as f64 - mean * mean) / n as f64).sqrt();
            let expect = lemma1_kappa(&m, &state, t).unwrap();
            assert!(
                (mean - expect).abs() < 4.0 * se,
                "t={t}: {mean} vs {expect} (4se {:.2e})",
                4.0 * se
            );
        }
    }

    #[test]
    fn chencox_shift_equivariance_is_exact() {
        let m = chencox_paper();
        let spec = spec_chencox();
        let shocked = chencox_analytic_annuity(&m, &ChenCoxState::new(-13.2, 1.4), &spec).unwrap();
        let shifted =
            chencox_analytic_annuity(&m, &ChenCoxState::unshocked(-14.6), &spec).unwrap();
        assert_eq!(shocked, shifted);
    }

    #[test]
    fn chencox_analytic_equals_mc_when_deterministic() {
        let mut m = chencox_paper();
        m.sigma1 = 0.0;
        m.p = 0.0;
        let state = ChenCoxState::unshocked(-14.0);
        let spec = spec_chencox();
        let analytic = chencox_analytic_annuity(&m, &state, &spec).unwrap();
        let mut stream = RngStream::new(4, 0);
        let path = simulate_chencox(&m, &state, &mut stream, spec.payments());
        let pathwise = annuity_path_value(&chencox_rates(&m, &path), &spec).unwrap();
        assert_abs_diff_eq!(analytic, pathwise, epsilon = 1e-12);
    }

    #[test]
    fn chencox_survival_biased_high() {
        // deterministic survival estimate exceeds the Monte Carlo mean minus
        // three standard errors at every horizon
        let m = chencox_paper();
        let state = ChenCoxState::unshocked(-14.0);
        let x = 65;
        let n = 10_000;
        let horizon = 29;
        let base = RngStream::new(77, 0);
        let mut sums = vec![0.0; horizon];
        let mut sumsqs = vec![0.0; horizon];
        for i in 0..n {
            let mut s = base.substream(i as u64);
            let path = simulate_chencox(&m, &state, &mut s, horizon);
            let rates = chencox_rates(&m, &path);
            for t in 1..=horizon {
                let v = survival_prob_path(&rates, 0, t, x).unwrap();
                sums[t - 1] += v;
                sumsqs[t - 1] += v * v;
            }
        }
        for t in 1..=horizon {
            let mean = sums[t - 1] / n as f64;
            let se = ((sumsqs[t - 1] / n as f64 - mean * mean) / n as f64).sqrt();
            let det = chencox_analytic_survival(&m, &state, x, t).unwrap();
            assert!(
                det > mean - 3.0 * se,
                "horizon {t}: det {det} vs mc {mean} (3se {:.2e})",
                3.0 * se
            );
        }
    }

    fn twopop_paper() -> TwoPopModel<f64> {
        TwoPopModel::new(
            -0.5504,
            1.278,
            0.6105,
            0.9407,
            0.568,
            0.262,
            test_ages(89),
            test_ages(89),
            CohortProcess::constant(-150, 300, 0.0).unwrap(),
            CohortProcess::constant(-150, 300, 0.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn lemma2_arithmetic() {
        let m = twopop_paper();
        let state = TwoPopState::from_levels(&m, -30.0, -32.0);
        assert_abs_diff_eq!(lemma2_kappa2(&m, &state, 1), -32.46800, epsilon = 1e-5);
        assert_abs_diff_eq!(lemma2_kappa2(&m, &state, 0), -32.0, epsilon = 1e-12);
    }

    #[test]
    fn variants_coincide_when_spread_is_at_its_mean() {
        let m = twopop_paper();
        let spec = AnnuitySpec::new(65, 10, 89, DiscountSpec::new(0.04).unwrap()).unwrap();
        let state = TwoPopState::from_levels(&m, -30.0, -30.0 - m.mu2);
        let e1 = twopop_estimators(&m, &state, &spec, 1.0, AnalyticVariant::A1).unwrap();
        let e2 = twopop_estimators(&m, &state, &spec, 1.0, AnalyticVariant::A2).unwrap();
        assert_abs_diff_eq!(e1.a2, e2.a2, epsilon = 1e-12);
        assert_abs_diff_eq!(e1.a1, e2.a1, epsilon = 1e-12);
    }

    #[test]
    fn delta_is_zero_for_identical_pools() {
        let m = twopop_paper();
        let spec = AnnuitySpec::new(65, 10, 89, DiscountSpec::new(0.04).unwrap()).unwrap();
        // identical pools: spread pinned at zero with no reversion pull
        let state = TwoPopState::new(-30.0, -30.0, 0.0, 0.5);
        let mut st = state;
        st.mu2_refit = 0.0;
        let e = twopop_estimators(&m, &st, &spec, 1.0, AnalyticVariant::A2).unwrap();
        assert_abs_diff_eq!(e.delta, 0.0, epsilon = 1e-12);
    }

    fn cbd_paper(sd1: f64, sd2: f64) -> CbdModel<f64> {
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

    #[test]
    fn lemma3_recursion_and_closed_form_agree() {
        let m = cbd_paper(0.0, 0.0);
        let state = CbdState::new(0.0, 1.0, 1.1);
        let (_, x2) = lemma3_xi(&m, &state, 1).unwrap();
        let recursion = (1.0 + m.phi) * 1.0 - m.phi * 1.1;
        assert_abs_diff_eq!(x2, recursion, epsilon = 1e-10);
        assert_abs_diff_eq!(x2, 0.90794, epsilon = 1e-10);
    }

    #[test]
    fn lemma3_fixed_point_when_differences_vanish() {
        let m = cbd_paper(0.0, 0.0);
        let state = CbdState::new(2.0, 0.7, 0.7);
        for t in [1usize, 5, 40] {
            let (x1, x2) = lemma3_xi(&m, &state, t).unwrap();
            assert_abs_diff_eq!(x2, 0.7, epsilon = 1e-12);
            assert_abs_diff_eq!(x1, 2.0 + m.mu * t as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn lemma3_rejects_unit_phi() {
        let mut m = cbd_paper(0.0, 0.0);
        m.phi = 1.0;
        let state = CbdState::new(0.0, 1.0, 1.1);
        assert!(matches!(lemma3_xi(&m, &state, 1), Err(Error::SingularFormula(_))));
    }

    #[test]
    fn cbd_annuity_with_zero_exponent_is_geometric_half() {
        // mu = 0 and zero state make every one-year survival exactly 1/2
        let mut m = cbd_paper(0.0, 0.0);
        m.mu = 0.0;
        let state = CbdState::new(0.0, 0.0, 0.0);
        let spec = AnnuitySpec::new(65, 20, 89, DiscountSpec::new(0.04).unwrap()).unwrap();
        let v = cbd_analytic_annuity(&m, &state, &spec).unwrap();
        let expect: f64 = (1..=24)
            .map(|s| (-0.04 * s as f64).exp() * 0.5f64.powi(s as i32))
            .sum();
        assert_abs_diff_eq!(v, expect, epsilon = 1e-12);
    }

    #[test]
    fn cbd_annuity_saturates_to_zero_for_huge_kappa() {
        let m = cbd_paper(0.0, 0.0);
        let state = CbdState::new(500.0, 0.0, 0.0);
        let spec = AnnuitySpec::new(65, 20, 89, DiscountSpec::new(0.04).unwrap()).unwrap();
        let v = cbd_analytic_annuity(&m, &state, &spec).unwrap();
        assert!(v >= 0.0 && v < 1e-200);
    }
}
