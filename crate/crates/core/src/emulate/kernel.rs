//! Power-exponential covariance kernels:
//! C(z, z') = sigma^2 * prod_j exp(-(|z_j - z'_j| / theta_j)^p), p in [1, 2].

use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec<R: Real> {
    /// Kernel power p; 1 is the exponential kernel, 2 the Gaussian.
    pub power: R,
    /// Per-dimension characteristic length-scales, all > 0.
    pub lengthscales: Vec<R>,
    /// Process variance sigma^2 >= 0.
    pub variance: R,
}

impl<R: Real> KernelSpec<R> {
    pub fn new(power: R, lengthscales: Vec<R>, variance: R) -> Result<Self> {
        if !(R::one()..=R::of(2.0)).contains(&power) {
            return Err(Error::invalid("kernel power must lie in [1, 2]"));
        }
        if lengthscales.is_empty() || lengthscales.iter().any(|&t| !(t > R::zero())) {
            return Err(Error::invalid("length-scales must be positive"));
        }
        if variance < R::zero() || !variance.is_finite() {
            return Err(Error::invalid("process variance must be >= 0"));
        }
        Ok(KernelSpec { power, lengthscales, variance })
    }

    /// Isotropic Gaussian kernel.
    pub fn gaussian(dim: usize, lengthscale: R, variance: R) -> Result<Self> {
        Self::new(R::of(2.0), vec![lengthscale; dim], variance)
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    /// Correlation (unit-variance kernel) between two points.
    pub fn correlation(&self, a: &[R], b: &[R]) -> R {
        debug_assert_eq!(a.len(), self.dim());
        debug_assert_eq!(b.len(), self.dim());
        let two = R::of(2.0);
        let mut expo = R::zero();
        for j in 0..a.len() {
            let h = (a[j] - b[j]).abs() / self.lengthscales[j];
            // powf is the slowest operation in the fit loop; special-case
            // the two standard powers
            expo = expo
                + if self.power == two {
                    h * h
                } else if self.power == R::one() {
                    h
                } else {
                    h.powf(self.power)
                };
        }
        (-expo).exp()
    }

    pub fn covariance(&self, a: &[R], b: &[R]) -> R {
        self.variance * self.correlation(a, b)
    }
}
