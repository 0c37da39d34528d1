//! Plain-text, versioned serialization of fitted surrogates, so a fit can be
//! trained once and reused for prediction elsewhere.
//!
//! Format (line oriented, space separated, 17 significant digits):
//!
//! ```text
//! longemu-fit v1
//! kind kriging|tps|spline1d
//! ... kind-specific header keys ...
//! data
//! <one row per site / knot>
//! ```
//!
//! Kriging fits store the kernel, trend kind, coefficients and the training
//! data; loading reruns the (deterministic) linear algebra so posterior
//! variances are available. A simple-kriging fit with a known trend function
//! needs that function again at load time ([`load_fit_with_trend`]).

use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::real::Real;

use super::kriging::{fit_sk, fit_uk, TrendModel, UkBasis};
use super::spline::{SplineFit, SplineKind};
use super::{EmulatorFit, KernelSpec, KrigingFit, TrainingSet};

const MAGIC: &str = "longemu-fit v1";

fn fmt<R: Real>(v: R) -> String {
    format!("{:.16e}", v.to_f64_lossy())
}

fn fmt_vec<R: Real>(vs: &[R]) -> String {
    vs.iter().map(|&v| fmt(v)).collect::<Vec<_>>().join(" ")
}

pub fn save_fit<R: Real>(fit: &EmulatorFit<R>, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{MAGIC}")?;
    match fit {
        EmulatorFit::Kriging(k) => save_kriging(&mut f, k)?,
        EmulatorFit::Spline(s) => save_spline(&mut f, s)?,
    }
    Ok(())
}

fn save_kriging<R: Real, W: Write>(f: &mut W, k: &KrigingFit<R>) -> Result<()> {
    writeln!(f, "kind kriging")?;
    let trend = match k.trend() {
        TrendModel::Known(_) => "known",
        TrendModel::Constant => "constant",
        TrendModel::Linear => "linear",
    };
    writeln!(f, "trend {trend}")?;
    writeln!(f, "power {}", fmt(k.kernel().power))?;
    writeln!(f, "variance {}", fmt(k.kernel().variance))?;
    writeln!(f, "lengthscales {}", fmt_vec(&k.kernel().lengthscales))?;
    writeln!(f, "dim {}", k.dim())?;
    writeln!(f, "n {}", k.n_sites())?;
    writeln!(f, "beta {}", fmt_vec(k.beta()))?;
    writeln!(f, "data")?;
    for i in 0..k.n_sites() {
        writeln!(
            f,
            "{} {} {}",
            fmt_vec(&k.sites()[i]),
            fmt(k.responses()[i]),
            fmt(k.noise()[i])
        )?;
    }
    Ok(())
}

fn save_spline<R: Real, W: Write>(f: &mut W, s: &SplineFit<R>) -> Result<()> {
    match &s.kind {
        SplineKind::ThinPlate { sites, alpha, beta0, beta } => {
            writeln!(f, "kind tps")?;
            writeln!(f, "lambda {}", fmt(s.lambda))?;
            writeln!(f, "df {}", fmt(s.df))?;
            writeln!(f, "dim {}", sites[0].len())?;
            writeln!(f, "n {}", sites.len())?;
            writeln!(f, "beta0 {}", fmt(*beta0))?;
            writeln!(f, "beta {}", fmt_vec(beta))?;
            writeln!(f, "data")?;
            for (site, a) in sites.iter().zip(alpha) {
                writeln!(f, "{} {}", fmt_vec(site), fmt(*a))?;
            }
        }
        SplineKind::Cubic1d { knots, values, second_derivs } => {
            writeln!(f, "kind spline1d")?;
            writeln!(f, "lambda {}", fmt(s.lambda))?;
            writeln!(f, "df {}", fmt(s.df))?;
            writeln!(f, "n {}", knots.len())?;
            writeln!(f, "data")?;
            for i in 0..knots.len() {
                writeln!(
                    f,
                    "{} {} {}",
                    fmt(knots[i]),
                    fmt(values[i]),
                    fmt(second_derivs[i])
                )?;
            }
        }
    }
    Ok(())
}

struct Lines {
    lines: Vec<String>,
    pos: usize,
}

impl Lines {
    fn next(&mut self) -> Result<&str> {
        let line = self
            .lines
            .get(self.pos)
            .ok_or_else(|| Error::invalid("fit file truncated"))?;
        self.pos += 1;
        Ok(line)
    }

    fn key(&mut self, key: &str) -> Result<String> {
        let line = self.next()?;
        line.strip_prefix(key)
            .map(|rest| rest.trim().to_string())
            .ok_or_else(|| Error::invalid(format!("expected key {key:?}, got {line:?}")))
    }
}

fn parse_real<R: Real>(s: &str) -> Result<R> {
    s.trim()
        .parse::<f64>()
        .map(R::of)
        .map_err(|e| Error::invalid(format!("bad number {s:?}: {e}")))
}

fn parse_vec<R: Real>(s: &str) -> Result<Vec<R>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split_whitespace().map(parse_real).collect()
}

/// Load a fit; fails for simple-kriging fits, which need their trend
/// function supplied via [`load_fit_with_trend`].
pub fn load_fit<R: Real>(path: &Path) -> Result<EmulatorFit<R>> {
    load_impl(path, None)
}

/// Load a fit, supplying the known trend function for simple kriging.
pub fn load_fit_with_trend<R: Real>(
    path: &Path,
    trend: Arc<dyn Fn(&[R]) -> R + Send + Sync>,
) -> Result<EmulatorFit<R>> {
    load_impl(path, Some(trend))
}

fn load_impl<R: Real>(
    path: &Path,
    trend: Option<Arc<dyn Fn(&[R]) -> R + Send + Sync>>,
) -> Result<EmulatorFit<R>> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    let lines: Vec<String> = f.lines().collect::<std::io::Result<_>>()?;
    let mut l = Lines { lines, pos: 0 };
    if l.next()? != MAGIC {
        return Err(Error::invalid("not a longemu fit file (bad magic line)"));
    }
    let kind = l.key("kind")?;
    match kind.as_str() {
        "kriging" => load_kriging(&mut l, trend),
        "tps" => load_tps(&mut l),
        "spline1d" => load_spline1d(&mut l),
        other => Err(Error::invalid(format!("unknown fit kind {other:?}"))),
    }
}

fn load_kriging<R: Real>(
    l: &mut Lines,
    trend: Option<Arc<dyn Fn(&[R]) -> R + Send + Sync>>,
) -> Result<EmulatorFit<R>> {
    let trend_kind = l.key("trend")?;
    let power: R = parse_real(&l.key("power")?)?;
    let variance: R = parse_real(&l.key("variance")?)?;
    let lengthscales: Vec<R> = parse_vec(&l.key("lengthscales")?)?;
    let dim: usize = l
        .key("dim")?
        .parse()
        .map_err(|e| Error::invalid(format!("bad dim: {e}")))?;
    let n: usize = l
        .key("n")?
        .parse()
        .map_err(|e| Error::invalid(format!("bad n: {e}")))?;
    let _beta: Vec<R> = parse_vec(&l.key("beta")?)?;
    if l.next()? != "data" {
        return Err(Error::invalid("expected data section"));
    }
    let mut sites = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    let mut noise = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<R> = parse_vec(l.next()?)?;
        if row.len() != dim + 2 {
            return Err(Error::invalid("kriging data row has wrong width"));
        }
        sites.push(row[..dim].to_vec());
        ys.push(row[dim]);
        noise.push(row[dim + 1]);
    }
    let train = TrainingSet::new(sites, ys, noise, vec![1; n])?;
    let kernel = KernelSpec::new(power, lengthscales, variance)?;
    let fit = match trend_kind.as_str() {
        "known" => {
            let trend = trend.ok_or_else(|| {
                Error::invalid(
                    "fit has a known trend; load it with load_fit_with_trend",
                )
            })?;
            fit_sk(&train, kernel, trend)?
        }
        "constant" => fit_uk(&train, kernel, UkBasis::Constant)?,
        "linear" => fit_uk(&train, kernel, UkBasis::Linear)?,
        other => return Err(Error::invalid(format!("unknown trend kind {other:?}"))),
    };
    Ok(EmulatorFit::Kriging(fit))
}

fn load_tps<R: Real>(l: &mut Lines) -> Result<EmulatorFit<R>> {
    let lambda: R = parse_real(&l.key("lambda")?)?;
    let df: R = parse_real(&l.key("df")?)?;
    let dim: usize = l
        .key("dim")?
        .parse()
        .map_err(|e| Error::invalid(format!("bad dim: {e}")))?;
    let n: usize = l
        .key("n")?
        .parse()
        .map_err(|e| Error::invalid(format!("bad n: {e}")))?;
    let beta0: R = parse_real(&l.key("beta0")?)?;
    let beta: Vec<R> = parse_vec(&l.key("beta")?)?;
    if beta.len() != dim {
        return Err(Error::invalid("tps beta length does not match dim"));
    }
    if l.next()? != "data" {
        return Err(Error::invalid("expected data section"));
    }
    let mut sites = Vec::with_capacity(n);
    let mut alpha = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<R> = parse_vec(l.next()?)?;
        if row.len() != dim + 1 {
            return Err(Error::invalid("tps data row has wrong width"));
        }
        sites.push(row[..dim].to_vec());
        alpha.push(row[dim]);
    }
    Ok(EmulatorFit::Spline(SplineFit {
        kind: SplineKind::ThinPlate { sites, alpha, beta0, beta },
        lambda,
        df,
    }))
}

fn load_spline1d<R: Real>(l: &mut Lines) -> Result<EmulatorFit<R>> {
    let lambda: R = parse_real(&l.key("lambda")?)?;
    let df: R = parse_real(&l.key("df")?)?;
    let n: usize = l
        .key("n")?
        .parse()
        .map_err(|e| Error::invalid(format!("bad n: {e}")))?;
    if l.next()? != "data" {
        return Err(Error::invalid("expected data section"));
    }
    let mut knots = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    let mut second = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<R> = parse_vec(l.next()?)?;
        if row.len() != 3 {
            return Err(Error::invalid("spline1d data row has wrong width"));
        }
        knots.push(row[0]);
        values.push(row[1]);
        second.push(row[2]);
    }
    Ok(EmulatorFit::Spline(SplineFit {
        kind: SplineKind::Cubic1d { knots, values, second_derivs: second },
        lambda,
        df,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emulate::{fit_smoothing_spline_1d, fit_tps, Smoothing};
    use crate::rng::RngStream;

    fn noisy_1d(n: usize, seed: u64) -> TrainingSet<f64> {
        let mut stream = RngStream::new(seed, 0);
        let sites: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 / (n - 1) as f64]).collect();
        let ys: Vec<f64> = sites
            .iter()
            .map(|z| (4.0 * z[0]).sin() + 0.1 * stream.std_normal())
            .collect();
        let noise = vec![0.01; n];
        TrainingSet::new(sites, ys, noise, vec![4; n]).unwrap()
    }

    #[test]
    fn kriging_round_trip_reproduces_predictions() {
        let train = noisy_1d(12, 3);
        let kernel = KernelSpec::gaussian(1, 0.3, 0.8).unwrap();
        let fit = EmulatorFit::Kriging(fit_uk(&train, kernel, UkBasis::Linear).unwrap());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fit.txt");
        save_fit(&fit, &path).unwrap();
        let back: EmulatorFit<f64> = load_fit(&path).unwrap();
        for z in [-0.3, 0.0, 0.41, 0.9, 1.4] {
            let (m1, v1) = fit.predict(&[z]).unwrap();
            let (m2, v2) = back.predict(&[z]).unwrap();
            assert_eq!(m1, m2);
            assert_eq!(v1, v2);
        }
    }

    #[test]
    fn known_trend_requires_the_function_back() {
        let train = noisy_1d(10, 4);
        let kernel = KernelSpec::gaussian(1, 0.3, 0.5).unwrap();
        let trend: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync> = Arc::new(|z: &[f64]| 2.0 * z[0]);
        let fit = EmulatorFit::Kriging(
            crate::emulate::fit_sk(&train, kernel, trend.clone()).unwrap(),
        );
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sk.txt");
        save_fit(&fit, &path).unwrap();
        assert!(load_fit::<f64>(&path).is_err());
        let back = load_fit_with_trend(&path, trend).unwrap();
        let (m1, _) = fit.predict(&[0.37]).unwrap();
        let (m2, _) = back.predict(&[0.37]).unwrap();
        assert_eq!(m1, m2);
    }

    #[test]
    fn spline_round_trips() {
        let mut stream = RngStream::new(5, 0);
        let mut sites = Vec::new();
        for _ in 0..30 {
            sites.push(vec![stream.uniform(), stream.uniform()]);
        }
        let ys: Vec<f64> = sites.iter().map(|s| s[0] * s[1]).collect();
        let train = TrainingSet::noiseless(sites, ys).unwrap();
        let fit = EmulatorFit::Spline(fit_tps(&train, Smoothing::Gcv).unwrap());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tps.txt");
        save_fit(&fit, &path).unwrap();
        let back: EmulatorFit<f64> = load_fit(&path).unwrap();
        for z in [[0.1, 0.9], [0.5, 0.5]] {
            assert_eq!(fit.predict(&z).unwrap(), back.predict(&z).unwrap());
        }

        let train1 = noisy_1d(15, 6);
        let fit1 =
            EmulatorFit::Spline(fit_smoothing_spline_1d(&train1, Smoothing::Gcv).unwrap());
        let path1 = dir.path().join("s1.txt");
        save_fit(&fit1, &path1).unwrap();
        let back1: EmulatorFit<f64> = load_fit(&path1).unwrap();
        assert_eq!(fit1.predict(&[0.3]).unwrap(), back1.predict(&[0.3]).unwrap());
    }

    #[test]
    fn rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.txt");
        std::fs::write(&path, "not a fit\n").unwrap();
        assert!(load_fit::<f64>(&path).is_err());
    }
}
