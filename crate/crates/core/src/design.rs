//! Experimental designs for the training stage: uniform grids, Latin
//! hypercube samples, Sobol points and empirical draws of the state, plus
//! the replication budget split and the batching step that turns a design
//! into a training set with per-site noise estimates.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::emulate::TrainingSet;
use crate::error::{Error, Result};
use crate::real::Real;
use crate::rng::RngStream;
use crate::stats;

/// Split of a total simulation budget N into N1 design sites with N2
/// replications each: N1 ~ N^(2/3), N2 ~ N^(1/3).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BudgetAllocation {
    pub n_total: usize,
    pub n_sites: usize,
    pub n_reps: usize,
}

/// Allocate a training budget. The site count wins the rounding: it starts
/// at round(N^(2/3)) and steps down until the implied grid fits the budget;
/// replications take the floor of the remainder.
pub fn allocate_budget(n_total: usize) -> Result<BudgetAllocation> {
    if n_total < 8 {
        return Err(Error::invalid("budget must be at least 8 (needs 2 sites x 2 reps)"));
    }
    let mut n_sites = (n_total as f64).powf(2.0 / 3.0).round() as usize;
    n_sites = n_sites.max(2);
    while n_sites > 2 {
        let reps = (n_total as f64 / n_sites as f64).round() as usize;
        if n_sites * reps <= n_total {
            break;
        }
        n_sites -= 1;
    }
    let mut n_reps = n_total / n_sites;
    if n_reps < 2 {
        n_reps = 2;
        n_sites = n_total / n_reps;
    }
    debug_assert!(n_sites >= 2 && n_reps >= 2 && n_sites * n_reps <= n_total);
    Ok(BudgetAllocation { n_total, n_sites, n_reps })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignKind {
    Grid,
    Lhs,
    Sobol,
    Empirical,
}

impl DesignKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DesignKind::Grid => "grid",
            DesignKind::Lhs => "lhs",
            DesignKind::Sobol => "sobol",
            DesignKind::Empirical => "empirical",
        }
    }
}

/// A set of training sites in R^d. Empirical designs may carry multiplicity
/// greater than one where duplicate draws were merged.
#[derive(Debug, Clone)]
pub struct Design<R: Real> {
    pub kind: DesignKind,
    sites: Vec<Vec<R>>,
    multiplicity: Vec<usize>,
    pub bounds: Option<Vec<(R, R)>>,
    /// (seed, stream id) of the generating stream, when randomness was used.
    pub generator: Option<(u64, u64)>,
}

impl<R: Real> Design<R> {
    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn dim(&self) -> usize {
        self.sites.first().map_or(0, |s| s.len())
    }

    pub fn sites(&self) -> &[Vec<R>] {
        &self.sites
    }

    pub fn site(&self, i: usize) -> &[R] {
        &self.sites[i]
    }

    pub fn multiplicity(&self) -> &[usize] {
        &self.multiplicity
    }
}

fn check_bounds<R: Real>(bounds: &[(R, R)]) -> Result<()> {
    if bounds.is_empty() {
        return Err(Error::invalid("bounding box must have at least one dimension"));
    }
    if bounds.iter().any(|(lo, hi)| !(hi > lo) || !lo.is_finite() || !hi.is_finite()) {
        return Err(Error::invalid("degenerate bounding box"));
    }
    Ok(())
}

/// Equally spaced lattice including both endpoints on every axis. One count
/// per dimension; the total number of sites is the product of counts.
pub fn uniform_grid<R: Real>(bounds: &[(R, R)], counts: &[usize]) -> Result<Design<R>> {
    check_bounds(bounds)?;
    if counts.len() != bounds.len() {
        return Err(Error::invalid("one grid count per dimension required"));
    }
    if counts.iter().any(|&c| c < 2) {
        return Err(Error::invalid("grid needs at least 2 points per axis"));
    }
    let d = bounds.len();
    let total: usize = counts.iter().product();
    let mut sites = Vec::with_capacity(total);
    let mut idx = vec![0usize; d];
    loop {
        let site: Vec<R> = (0..d)
            .map(|j| {
                let (lo, hi) = bounds[j];
                let frac = R::of_usize(idx[j]) / R::of_usize(counts[j] - 1);
                lo + (hi - lo) * frac
            })
            .collect();
        sites.push(site);
        // odometer increment
        let mut j = 0;
        loop {
            idx[j] += 1;
            if idx[j] < counts[j] {
                break;
            }
            idx[j] = 0;
            j += 1;
            if j == d {
                return Ok(Design {
                    kind: DesignKind::Grid,
                    multiplicity: vec![1; sites.len()],
                    sites,
                    bounds: Some(bounds.to_vec()),
                    generator: None,
                });
            }
        }
    }
}

/// Latin hypercube sample: per dimension, exactly one point in each of n
/// equal strata, placed uniformly within its stratum, with strata assigned
/// by independent random permutations.
pub fn lhs<R: Real>(bounds: &[(R, R)], n: usize, stream: &mut RngStream) -> Result<Design<R>> {
    check_bounds(bounds)?;
    if n == 0 {
        return Err(Error::invalid("LHS needs at least one point"));
    }
    let d = bounds.len();
    let mut sites = vec![vec![R::zero(); d]; n];
    let mut perm: Vec<usize> = (0..n).collect();
    for (j, &(lo, hi)) in bounds.iter().enumerate() {
        // Fisher-Yates
        for i in (1..n).rev() {
            let k = stream.uniform_index(i + 1);
            perm.swap(i, k);
        }
        let width = hi - lo;
        for (i, site) in sites.iter_mut().enumerate() {
            let u = R::of(stream.uniform());
            site[j] = lo + width * (R::of_usize(perm[i]) + u) / R::of_usize(n);
        }
    }
    Ok(Design {
        kind: DesignKind::Lhs,
        multiplicity: vec![1; n],
        sites,
        bounds: Some(bounds.to_vec()),
        generator: Some((stream.seed(), stream.stream_id())),
    })
}

const SOBOL_MAX_DIM: usize = 8;
const SOBOL_BITS: u32 = 52;

/// Primitive polynomial degree, coefficient bits, initial direction numbers
/// for dimensions 2..=8 (dimension 1 is the plain binary radical inverse).
const SOBOL_PARAMS: [(u32, u64, &[u64]); 7] = [
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
    (3, 2, &[1, 1, 1]),
    (4, 1, &[1, 1, 3, 3]),
    (4, 4, &[1, 3, 5, 13]),
    (5, 2, &[1, 1, 5, 5, 17]),
];

fn sobol_directions(dim_index: usize) -> Vec<u64> {
    let bits = SOBOL_BITS as usize;
    let mut v = vec![0u64; bits + 1]; // 1-based
    if dim_index == 0 {
        for k in 1..=bits {
            v[k] = 1u64 << (SOBOL_BITS - k as u32);
        }
        return v;
    }
    let (s, a, m) = SOBOL_PARAMS[dim_index - 1];
    let s = s as usize;
    for k in 1..=s.min(bits) {
        v[k] = m[k - 1] << (SOBOL_BITS - k as u32);
    }
    for k in (s + 1)..=bits {
        v[k] = v[k - s] ^ (v[k - s] >> s);
        for i in 1..s {
            if (a >> (s - 1 - i)) & 1 == 1 {
                v[k] ^= v[k - i];
            }
        }
    }
    v
}

/// First `n` Sobol points after skipping `skip` (index 0 is the origin;
/// skip = 1 drops it). Gray-code ordering; direction numbers ship for
/// dimensions up to 8.
pub fn sobol<R: Real>(bounds: &[(R, R)], n: usize, skip: usize) -> Result<Design<R>> {
    check_bounds(bounds)?;
    let d = bounds.len();
    if d > SOBOL_MAX_DIM {
        return Err(Error::UnsupportedDimension { got: d, max: SOBOL_MAX_DIM });
    }
    let dirs: Vec<Vec<u64>> = (0..d).map(sobol_directions).collect();
    let scale = R::of((1u64 << SOBOL_BITS) as f64);
    let mut state = vec![0u64; d];
    let mut sites = Vec::with_capacity(n);
    for i in 1..(skip + n) {
        let k = i.trailing_zeros() as usize + 1;
        for j in 0..d {
            state[j] ^= dirs[j][k];
        }
        if i >= skip.max(1) {
            let site: Vec<R> = (0..d)
                .map(|j| {
                    let (lo, hi) = bounds[j];
                    lo + (hi - lo) * (R::of(state[j] as f64) / scale)
                })
                .collect();
            sites.push(site);
        }
    }
    if skip == 0 {
        sites.insert(0, bounds.iter().map(|&(lo, _)| lo).collect());
        sites.truncate(n);
    }
    Ok(Design {
        kind: DesignKind::Sobol,
        multiplicity: vec![1; sites.len()],
        sites,
        bounds: Some(bounds.to_vec()),
        generator: None,
    })
}

/// Empirical design: n independent draws of the state at the deferral date.
/// Exact duplicate draws (possible under degenerate dynamics) are merged,
/// accumulating multiplicity.
pub fn empirical_design<R: Real>(
    mut draw: impl FnMut(&mut RngStream) -> Vec<R>,
    n: usize,
    stream: &RngStream,
) -> Result<Design<R>> {
    if n == 0 {
        return Err(Error::invalid("empirical design needs at least one draw"));
    }
    let mut sites: Vec<Vec<R>> = Vec::with_capacity(n);
    let mut multiplicity: Vec<usize> = Vec::with_capacity(n);
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
    for i in 0..n {
        let mut s = stream.substream(i as u64);
        let site = draw(&mut s);
        let key: Vec<u64> = site.iter().map(|v| v.to_f64_lossy().to_bits()).collect();
        match seen.get(&key) {
            Some(&idx) => multiplicity[idx] += 1,
            None => {
                seen.insert(key, sites.len());
                sites.push(site);
                multiplicity.push(1);
            }
        }
    }
    Ok(Design {
        kind: DesignKind::Empirical,
        sites,
        multiplicity,
        bounds: None,
        generator: Some((stream.seed(), stream.stream_id())),
    })
}

/// Batch the design: per site, average `n_reps` pathwise values (times the
/// site multiplicity) into a response, and keep the sample variance as the
/// noise estimate. The training noise entry is tau^2 / m, the variance of
/// the batch mean.
pub fn batch<R: Real>(
    design: &Design<R>,
    mut sample: impl FnMut(&[R], &mut RngStream) -> Result<R>,
    stream: &RngStream,
    n_reps: usize,
) -> Result<TrainingSet<R>> {
    if n_reps < 2 {
        return Err(Error::invalid("batching needs at least 2 replications per site"));
    }
    let mut responses = Vec::with_capacity(design.n_sites());
    let mut noise = Vec::with_capacity(design.n_sites());
    let mut reps_used = Vec::with_capacity(design.n_sites());
    for (i, site) in design.sites.iter().enumerate() {
        let m = design.multiplicity[i] * n_reps;
        let site_stream = stream.substream(i as u64);
        let mut values = Vec::with_capacity(m);
        for j in 0..m {
            let mut s = site_stream.substream(j as u64);
            values.push(sample(site, &mut s)?);
        }
        let y = stats::mean(&values);
        let tau2 = stats::sample_variance(&values);
        responses.push(y);
        noise.push(tau2 / R::of_usize(m));
        reps_used.push(m);
    }
    TrainingSet::new(design.sites.clone(), responses, noise, reps_used)
}

/// Default test-set percentile levels: 1%, 3%, ..., 99%.
pub fn default_percentile_levels<R: Real>() -> Vec<R> {
    (0..50).map(|i| R::of(0.01 + 0.02 * i as f64)).collect()
}

/// Empirical percentiles of a large sample of a one-dimensional state.
pub fn percentile_test_set<R: Real>(
    mut draw: impl FnMut(&mut RngStream) -> R,
    levels: &[R],
    oversample: usize,
    stream: &RngStream,
) -> Result<Vec<R>> {
    if oversample < 10_000 {
        return Err(Error::invalid("percentile test set needs oversample >= 10^4"));
    }
    if levels.is_empty() {
        return Err(Error::invalid("percentile test set needs at least one level"));
    }
    let mut sample: Vec<R> = (0..oversample)
        .map(|i| {
            let mut s = stream.substream(i as u64);
            draw(&mut s)
        })
        .collect();
    sample.sort_by(|a, b| a.partial_cmp(b).expect("finite draws"));
    levels.iter().map(|&l| stats::quantile_sorted(&sample, l)).collect()
}

fn fmt_real<R: Real>(v: R) -> String {
    format!("{:.16e}", v.to_f64_lossy())
}

/// Write a design (no responses yet) in the training CSV schema: header,
/// then z1..zd, y, tau2, n_rep per row, 17 significant digits. For a bare
/// design y and tau2 are written as 0 with n_rep carrying the multiplicity.
pub fn write_design_csv<R: Real>(design: &Design<R>, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_header(&mut f, design.dim())?;
    for (i, site) in design.sites.iter().enumerate() {
        for v in site {
            write!(f, "{},", fmt_real(*v))?;
        }
        writeln!(f, "0,0,{}", design.multiplicity[i])?;
    }
    Ok(())
}

/// Write a batched training set: z1..zd, y, tau2, n_rep.
pub fn write_training_csv<R: Real>(ts: &TrainingSet<R>, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_header(&mut f, ts.dim())?;
    for i in 0..ts.len() {
        for v in ts.site(i) {
            write!(f, "{},", fmt_real(*v))?;
        }
        let tau2 = ts.noise()[i] * R::of_usize(ts.reps()[i]);
        writeln!(
            f,
            "{},{},{}",
            fmt_real(ts.responses()[i]),
            fmt_real(tau2),
            ts.reps()[i]
        )?;
    }
    Ok(())
}

fn write_header<W: Write>(f: &mut W, dim: usize) -> Result<()> {
    let cols: Vec<String> = (1..=dim).map(|j| format!("z{j}")).collect();
    writeln!(f, "{},y,tau2,n_rep", cols.join(","))?;
    Ok(())
}

/// Read a training CSV back.
pub fn read_training_csv<R: Real>(path: &Path) -> Result<TrainingSet<R>> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut lines = f.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::invalid("empty training csv"))??;
    let dim = header.split(',').filter(|c| c.starts_with('z')).count();
    if dim == 0 {
        return Err(Error::invalid("training csv header has no site columns"));
    }
    let mut sites = Vec::new();
    let mut responses = Vec::new();
    let mut noise = Vec::new();
    let mut reps = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim + 3 {
            return Err(Error::invalid(format!(
                "training csv row has {} fields, expected {}",
                fields.len(),
                dim + 3
            )));
        }
        let parse = |s: &str| -> Result<R> {
            s.trim()
                .parse::<f64>()
                .map(R::of)
                .map_err(|e| Error::invalid(format!("bad number {s:?}: {e}")))
        };
        let site: Vec<R> = fields[..dim].iter().map(|s| parse(s)).collect::<Result<_>>()?;
        let y = parse(fields[dim])?;
        let tau2 = parse(fields[dim + 1])?;
        let m: usize = fields[dim + 2]
            .trim()
            .parse()
            .map_err(|e| Error::invalid(format!("bad rep count: {e}")))?;
        sites.push(site);
        responses.push(y);
        noise.push(if m > 0 { tau2 / R::of_usize(m) } else { R::zero() });
        reps.push(m.max(1));
    }
    TrainingSet::new(sites, responses, noise, reps)
}
