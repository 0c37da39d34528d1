//! Small shared statistics helpers.

use crate::error::{Error, Result};
use crate::real::Real;

pub fn mean<R: Real>(values: &[R]) -> R {
    values.iter().copied().sum::<R>() / R::of_usize(values.len())
}

/// Unbiased sample variance (divisor n-1).
pub fn sample_variance<R: Real>(values: &[R]) -> R {
    let n = values.len();
    if n < 2 {
        return R::zero();
    }
    let m = mean(values);
    values.iter().map(|&v| (v - m) * (v - m)).sum::<R>() / R::of_usize(n - 1)
}

pub fn sample_sd<R: Real>(values: &[R]) -> R {
    sample_variance(values).sqrt()
}

pub fn pearson_corr<R: Real>(xs: &[R], ys: &[R]) -> R {
    assert_eq!(xs.len(), ys.len());
    let mx = mean(xs);
    let my = mean(ys);
    let mut sxy = R::zero();
    let mut sxx = R::zero();
    let mut syy = R::zero();
    for (&x, &y) in xs.iter().zip(ys) {
        sxy = sxy + (x - mx) * (y - my);
        sxx = sxx + (x - mx) * (x - mx);
        syy = syy + (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Empirical quantile with linear interpolation of order statistics
/// (the R type-7 convention: h = (n-1)*level + 1 on 1-based ranks).
/// Input must be sorted ascending.
pub fn quantile_sorted<R: Real>(sorted: &[R], level: R) -> Result<R> {
    if sorted.is_empty() {
        return Err(Error::invalid("quantile of empty sample"));
    }
    if !(level > R::zero() && level < R::one()) {
        return Err(Error::invalid("quantile level must lie in (0,1)"));
    }
    let n = sorted.len();
    if n == 1 {
        return Ok(sorted[0]);
    }
    let h = R::of_usize(n - 1) * level;
    let lo = h.floor().to_f64_lossy() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - h.floor();
    Ok(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}
