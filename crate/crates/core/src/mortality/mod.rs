//! Stochastic mortality models: period-effect simulation, central mortality
//! rate surfaces, and the refit step used for scenario generation at the
//! deferral horizon.
//!
//! Three families are implemented:
//! - a Lee-Carter random walk with transient mortality shocks ([`chencox`]);
//! - a two-population cointegrated model with an AR(1) spread ([`twopop`]);
//! - a CBD logistic survival model with ARIMA period effects ([`cbd`]).
//!
//! All simulators advance on an annual grid. A simulated path is turned into
//! a [`MortalityPath`] — the per-year, per-age rate surface — from which the
//! valuation code reads the cohort diagonal.

mod cbd;
mod chencox;
mod twopop;

pub use cbd::{cbd_rates, simulate_cbd, CbdModel, CbdState};
pub use chencox::{chencox_rates, simulate_chencox, ChenCoxModel, ChenCoxState};
pub use twopop::{
    ppc_refit, simulate_twopop, twopop_rates, CohortProcess, PpcFit, Pool, TwoPopModel,
    TwoPopPaths, TwoPopState,
};

use crate::error::{Error, Result};
use crate::real::Real;

/// Fitted age effects over an integer age grid, plus the cutoff age beyond
/// which annuity payments stop. Ages outside the grid clamp to the boundary
/// entries.
#[derive(Debug, Clone)]
pub struct AgeStructure<R: Real> {
    x_min: u32,
    x_max: u32,
    cutoff: u32,
    beta1: Vec<R>,
    beta2: Vec<R>,
    x_ave: R,
}

impl<R: Real> AgeStructure<R> {
    pub fn new(x_min: u32, x_max: u32, cutoff: u32, beta1: Vec<R>, beta2: Vec<R>) -> Result<Self> {
        if x_max < x_min {
            return Err(Error::invalid("age grid must satisfy x_min <= x_max"));
        }
        let n_a = (x_max - x_min + 1) as usize;
        if beta1.len() != n_a || beta2.len() != n_a {
            return Err(Error::invalid(format!(
                "beta vectors must have length {n_a} (grid {x_min}..={x_max})"
            )));
        }
        if beta1.iter().chain(beta2.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("beta vectors must be finite"));
        }
        if cutoff < x_min {
            return Err(Error::invalid("cutoff age must lie within or above the age grid"));
        }
        let x_ave = R::of((x_min + x_max) as f64 / 2.0);
        Ok(AgeStructure { x_min, x_max, cutoff, beta1, beta2, x_ave })
    }

    /// CBD (M5) parameterization: beta1(x) = 1, beta2(x) = x - x_ave.
    pub fn cbd_parameterization(x_min: u32, x_max: u32, cutoff: u32) -> Result<Self> {
        let x_ave = (x_min + x_max) as f64 / 2.0;
        let beta1 = vec![R::one(); (x_max - x_min + 1) as usize];
        let beta2 = (x_min..=x_max).map(|x| R::of(x as f64 - x_ave)).collect();
        Self::new(x_min, x_max, cutoff, beta1, beta2)
    }

    pub fn n_ages(&self) -> usize {
        self.beta1.len()
    }

    pub fn x_min(&self) -> u32 {
        self.x_min
    }

    pub fn x_max(&self) -> u32 {
        self.x_max
    }

    pub fn cutoff(&self) -> u32 {
        self.cutoff
    }

    pub fn x_ave(&self) -> R {
        self.x_ave
    }

    pub fn inv_n_ages(&self) -> R {
        R::one() / R::of_usize(self.n_ages())
    }

    /// Grid index for an age, clamped to the boundary.
    pub fn index_for(&self, age: u32) -> usize {
        age.clamp(self.x_min, self.x_max) as usize - self.x_min as usize
    }

    pub fn beta1_at(&self, age: u32) -> R {
        self.beta1[self.index_for(age)]
    }

    pub fn beta2_at(&self, age: u32) -> R {
        self.beta2[self.index_for(age)]
    }

    pub fn beta1(&self) -> &[R] {
        &self.beta1
    }

    pub fn beta2(&self) -> &[R] {
        &self.beta2
    }
}

/// Central mortality rate surface over a simulation horizon: entry `(s, x)`
/// is m(T+s, x) for s = 1..=horizon and x on the age grid. Stored row-major
/// by year.
#[derive(Debug, Clone)]
pub struct MortalityPath<R: Real> {
    horizon: usize,
    x_min: u32,
    n_ages: usize,
    rates: Vec<R>,
}

impl<R: Real> MortalityPath<R> {
    pub fn new(horizon: usize, x_min: u32, n_ages: usize, rates: Vec<R>) -> Result<Self> {
        if rates.len() != horizon * n_ages || horizon == 0 || n_ages == 0 {
            return Err(Error::invalid("mortality path dimensions do not match data"));
        }
        Ok(MortalityPath { horizon, x_min, n_ages, rates })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn x_min(&self) -> u32 {
        self.x_min
    }

    pub fn n_ages(&self) -> usize {
        self.n_ages
    }

    /// Rate m(T+s, age) with the age clamped to the grid; `s` is 1-based.
    pub fn rate(&self, s: usize, age: u32) -> R {
        debug_assert!(s >= 1 && s <= self.horizon);
        let col = (age.max(self.x_min) as usize - self.x_min as usize).min(self.n_ages - 1);
        self.rates[(s - 1) * self.n_ages + col]
    }

    pub fn year_row(&self, s: usize) -> &[R] {
        &self.rates[(s - 1) * self.n_ages..s * self.n_ages]
    }
}
