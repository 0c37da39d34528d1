//! Pathwise survival probabilities, deferred-annuity present values, hedge
//! portfolio values and the inner Monte Carlo estimator.
//!
//! Conventions: the annuitant is aged `x` at the deferral date T. Payments of
//! 1 fall due at T+1, ..., T+(xbar-x) while the annuitant survives; survival
//! is read off a [`MortalityPath`] along the diagonal (T+s, x+s) as
//! exp(-sum of rates).

use crate::error::{Error, Result};
use crate::mortality::MortalityPath;
use crate::real::Real;
use crate::rng::RngStream;

/// Constant force of interest; the s-year bond price is exp(-r*s).
#[derive(Debug, Clone, Copy)]
pub struct DiscountSpec<R: Real> {
    pub rate: R,
}

impl<R: Real> DiscountSpec<R> {
    pub fn new(rate: R) -> Result<Self> {
        if !rate.is_finite() {
            return Err(Error::invalid("interest rate must be finite"));
        }
        Ok(DiscountSpec { rate })
    }

    pub fn bond_price(&self, years: usize) -> R {
        (-self.rate * R::of_usize(years)).exp()
    }
}

/// Deferred life annuity contract: aged `x` at deferral date T = `deferral`,
/// payments from T+1 until the cutoff age `xbar`.
#[derive(Debug, Clone, Copy)]
pub struct AnnuitySpec<R: Real> {
    pub x: u32,
    pub deferral: u32,
    pub xbar: u32,
    pub discount: DiscountSpec<R>,
}

impl<R: Real> AnnuitySpec<R> {
    pub fn new(x: u32, deferral: u32, xbar: u32, discount: DiscountSpec<R>) -> Result<Self> {
        if xbar <= x {
            return Err(Error::invalid("cutoff age must exceed the annuitant age at T"));
        }
        Ok(AnnuitySpec { x, deferral, xbar, discount })
    }

    /// Number of potential payments, xbar - x.
    pub fn payments(&self) -> usize {
        (self.xbar - self.x) as usize
    }

    /// Value of the annuity-certain: the upper bound sum of e^{-rs}.
    pub fn riskless_upper_bound(&self) -> R {
        (1..=self.payments()).map(|s| self.discount.bond_price(s)).sum()
    }
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy)]
pub struct McEstimate<R: Real> {
    pub mean: R,
    pub std_error: R,
    pub n: usize,
}

/// Pathwise survival between `from` and `to` years past the path origin for
/// someone aged `x` at the origin: exp(-sum_{s=from+1..=to} m(s, x+s)).
pub fn survival_prob_path<R: Real>(
    path: &MortalityPath<R>,
    from: usize,
    to: usize,
    x: u32,
) -> Result<R> {
    if from >= to {
        return Err(Error::invalid("survival interval needs from < to"));
    }
    if to > path.horizon() {
        return Err(Error::invalid(format!(
            "path horizon {} too short for survival to {to}",
            path.horizon()
        )));
    }
    let mut hazard = R::zero();
    for s in (from + 1)..=to {
        hazard = hazard + path.rate(s, x + s as u32);
    }
    Ok((-hazard).exp())
}

/// One pathwise sample of the deferred annuity value:
/// sum_s e^{-rs} * exp(-sum_{u<=s} m(u, x+u)).
pub fn annuity_path_value<R: Real>(path: &MortalityPath<R>, spec: &AnnuitySpec<R>) -> Result<R> {
    let n = spec.payments();
    if path.horizon() < n {
        return Err(Error::invalid(format!(
            "path horizon {} < {} payments",
            path.horizon(),
            n
        )));
    }
    let disc = (-spec.discount.rate).exp();
    let mut value = R::zero();
    let mut hazard = R::zero();
    let mut bond = R::one();
    for s in 1..=n {
        hazard = hazard + path.rate(s, spec.x + s as u32);
        bond = bond * disc;
        value = value + bond * (-hazard).exp();
    }
    Ok(value)
}

/// Hedge portfolio sample pi * a1 - a2 from a matched pair of pool paths
/// (both must come from the same joint simulation so the shared pool-1
/// innovations line up).
pub fn hedge_portfolio_path<R: Real>(
    path1: &MortalityPath<R>,
    path2: &MortalityPath<R>,
    spec: &AnnuitySpec<R>,
    pi: R,
) -> Result<R> {
    let a1 = annuity_path_value(path1, spec)?;
    let a2 = annuity_path_value(path2, spec)?;
    Ok(pi * a1 - a2)
}

/// Inner Monte Carlo: mean and standard error of `draw` over `n_in` fresh
/// paths. Each path gets its own child stream keyed by path index, so the
/// estimate does not depend on evaluation order.
pub fn nested_mc_value<R: Real>(
    mut draw: impl FnMut(&mut RngStream) -> Result<R>,
    stream: &RngStream,
    n_in: usize,
) -> Result<McEstimate<R>> {
    if n_in < 2 {
        return Err(Error::invalid("inner Monte Carlo needs n_in >= 2"));
    }
    let mut sum = R::zero();
    let mut sumsq = R::zero();
    for i in 0..n_in {
        let mut s = stream.substream(i as u64);
        let v = draw(&mut s)?;
        sum = sum + v;
        sumsq = sumsq + v * v;
    }
    let n = R::of_usize(n_in);
    let mean = sum / n;
    let var = ((sumsq - sum * sum / n) / (n - R::one())).max(R::zero());
    Ok(McEstimate { mean, std_error: (var / n).sqrt(), n: n_in })
}

/// Arithmetic mean of the outer stage.
pub fn outer_expectation<R: Real>(values: &[R]) -> Result<R> {
    if values.is_empty() {
        return Err(Error::invalid("outer expectation of an empty sample"));
    }
    Ok(values.iter().copied().sum::<R>() / R::of_usize(values.len()))
}
