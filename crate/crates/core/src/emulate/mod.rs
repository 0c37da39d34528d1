//! Surrogate regression models: simple/ordinary/universal kriging with
//! power-exponential kernels and profile-likelihood hyperparameters, plus
//! thin-plate and 1-d smoothing splines.

mod kernel;
mod kriging;
mod serialize;
mod spline;

pub use kernel::KernelSpec;
pub use kriging::{
    fit_hyperparams, fit_sk, fit_uk, s_ave, HyperFit, KrigingFit, MleTrend, TrendModel, UkBasis,
};
pub use serialize::{load_fit, load_fit_with_trend, save_fit};
pub use spline::{fit_smoothing_spline_1d, fit_tps, Smoothing, SplineFit, SplineKind};

use crate::error::{Error, Result};
use crate::real::Real;

/// Batched training data: distinct design sites, batch-mean responses and
/// the estimated variance of each batch mean (tau^2 / m).
#[derive(Debug, Clone)]
pub struct TrainingSet<R: Real> {
    sites: Vec<Vec<R>>,
    responses: Vec<R>,
    noise: Vec<R>,
    reps: Vec<usize>,
}

impl<R: Real> TrainingSet<R> {
    pub fn new(
        sites: Vec<Vec<R>>,
        responses: Vec<R>,
        noise: Vec<R>,
        reps: Vec<usize>,
    ) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::invalid("training set must be non-empty"));
        }
        let n = sites.len();
        if responses.len() != n || noise.len() != n || reps.len() != n {
            return Err(Error::invalid("training set column lengths differ"));
        }
        let d = sites[0].len();
        if d == 0 || sites.iter().any(|s| s.len() != d) {
            return Err(Error::invalid("training sites must share a nonzero dimension"));
        }
        let finite = sites
            .iter()
            .flatten()
            .chain(responses.iter())
            .chain(noise.iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("training set entries must be finite"));
        }
        if noise.iter().any(|&v| v < R::zero()) {
            return Err(Error::invalid("noise variances must be >= 0"));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if sites[i] == sites[j] {
                    return Err(Error::invalid(format!(
                        "duplicate training sites at rows {i} and {j}"
                    )));
                }
            }
        }
        Ok(TrainingSet { sites, responses, noise, reps })
    }

    /// Convenience constructor for noiseless data.
    pub fn noiseless(sites: Vec<Vec<R>>, responses: Vec<R>) -> Result<Self> {
        let n = sites.len();
        Self::new(sites, responses, vec![R::zero(); n], vec![1; n])
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.sites[0].len()
    }

    pub fn site(&self, i: usize) -> &[R] {
        &self.sites[i]
    }

    pub fn sites(&self) -> &[Vec<R>] {
        &self.sites
    }

    pub fn responses(&self) -> &[R] {
        &self.responses
    }

    pub fn noise(&self) -> &[R] {
        &self.noise
    }

    pub fn reps(&self) -> &[usize] {
        &self.reps
    }

    /// Per-dimension site range, used to scale length-scale search bounds.
    pub fn ranges(&self) -> Vec<R> {
        let d = self.dim();
        (0..d)
            .map(|j| {
                let mut lo = self.sites[0][j];
                let mut hi = lo;
                for s in &self.sites {
                    lo = lo.min(s[j]);
                    hi = hi.max(s[j]);
                }
                hi - lo
            })
            .collect()
    }
}

/// Any fitted surrogate: kriging fits expose a posterior variance, splines
/// only a mean.
#[derive(Debug, Clone)]
pub enum EmulatorFit<R: Real> {
    Kriging(KrigingFit<R>),
    Spline(SplineFit<R>),
}

impl<R: Real> EmulatorFit<R> {
    pub fn predict(&self, z: &[R]) -> Result<(R, Option<R>)> {
        match self {
            EmulatorFit::Kriging(f) => {
                let (m, v) = f.predict(z)?;
                Ok((m, Some(v)))
            }
            EmulatorFit::Spline(f) => Ok((f.predict(z)?, None)),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            EmulatorFit::Kriging(f) => f.dim(),
            EmulatorFit::Spline(f) => f.dim(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn training_set_rejects_duplicates_and_bad_noise() {
        let sites = vec![vec![1.0f64], vec![1.0]];
        assert!(TrainingSet::new(sites, vec![0.0, 1.0], vec![0.0, 0.0], vec![1, 1]).is_err());
        let sites = vec![vec![1.0f64], vec![2.0]];
        assert!(TrainingSet::new(sites, vec![0.0, 1.0], vec![-0.1, 0.0], vec![1, 1]).is_err());
    }

    #[test]
    fn ranges_per_dimension() {
        let ts = TrainingSet::noiseless(
            vec![vec![0.0f64, -1.0], vec![2.0, 3.0], vec![1.0, 0.0]],
            vec![0.0, 1.0, 2.0],
        )
        .unwrap();
        assert_eq!(ts.ranges(), vec![2.0, 4.0]);
    }
}
