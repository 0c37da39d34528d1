//! Penalized spline surrogates: thin-plate splines in d >= 2 and natural
//! cubic smoothing splines in 1-d, with GCV selection of the smoothing
//! parameter over a fixed log-spaced grid.

use crate::error::{Error, Result};
use crate::linalg::{cholesky, DenseMatrix, JitterPolicy};
use crate::real::Real;

use super::TrainingSet;

/// Smoothing parameter choice.
#[derive(Debug, Clone, Copy)]
pub enum Smoothing<R: Real> {
    Fixed(R),
    /// Minimize generalized cross-validation over the grid.
    Gcv,
    /// Target effective degrees of freedom (1-d splines only).
    DegreesOfFreedom(R),
}

#[derive(Debug, Clone)]
pub struct SplineFit<R: Real> {
    pub kind: SplineKind<R>,
    pub lambda: R,
    /// Effective degrees of freedom tr(S_lambda).
    pub df: R,
}

#[derive(Debug, Clone)]
pub enum SplineKind<R: Real> {
    /// f(z) = beta0 + beta.z + sum_j alpha_j ||z - z_j||^2 log ||z - z_j||
    ThinPlate { sites: Vec<Vec<R>>, alpha: Vec<R>, beta0: R, beta: Vec<R> },
    /// Natural cubic spline: values and second derivatives at the knots,
    /// linear beyond the boundary.
    Cubic1d { knots: Vec<R>, values: Vec<R>, second_derivs: Vec<R> },
}

impl<R: Real> SplineFit<R> {
    pub fn dim(&self) -> usize {
        match &self.kind {
            SplineKind::ThinPlate { sites, .. } => sites[0].len(),
            SplineKind::Cubic1d { .. } => 1,
        }
    }

    pub fn predict(&self, z: &[R]) -> Result<R> {
        if z.len() != self.dim() {
            return Err(Error::invalid(format!(
                "prediction point has dimension {}, fit has {}",
                z.len(),
                self.dim()
            )));
        }
        match &self.kind {
            SplineKind::ThinPlate { sites, alpha, beta0, beta } => {
                let mut v = *beta0;
                for (j, &zj) in z.iter().enumerate() {
                    v = v + beta[j] * zj;
                }
                for (site, &a) in sites.iter().zip(alpha) {
                    v = v + a * tps_kernel(z, site);
                }
                Ok(v)
            }
            SplineKind::Cubic1d { knots, values, second_derivs } => {
                Ok(eval_natural_cubic(knots, values, second_derivs, z[0]))
            }
        }
    }
}

/// r^2 log r radial kernel, zero at coincident points.
fn tps_kernel<R: Real>(a: &[R], b: &[R]) -> R {
    let mut r2 = R::zero();
    for j in 0..a.len() {
        let d = a[j] - b[j];
        r2 = r2 + d * d;
    }
    if r2 == R::zero() {
        R::zero()
    } else {
        // r^2 log r = r^2 * log(r^2) / 2
        r2 * r2.ln() / R::of(2.0)
    }
}

/// Householder QR with explicit Q. Returns (Q, R-upper) for an n x p matrix;
/// the upper triangle of R sits in the top p x p block.
fn householder_qr<R: Real>(t: &DenseMatrix<R>) -> (DenseMatrix<R>, DenseMatrix<R>) {
    let n = t.rows();
    let p = t.cols();
    let mut a = t.clone();
    let mut q = DenseMatrix::identity(n);
    for k in 0..p.min(n - 1) {
        let mut norm = R::zero();
        for i in k..n {
            norm = norm + a[(i, k)] * a[(i, k)];
        }
        let norm = norm.sqrt();
        if norm == R::zero() {
            continue;
        }
        let alpha = if a[(k, k)] >= R::zero() { -norm } else { norm };
        let mut v = vec![R::zero(); n];
        for i in k..n {
            v[i] = a[(i, k)];
        }
        v[k] = v[k] - alpha;
        let vnorm2: R = v.iter().map(|&x| x * x).sum();
        if vnorm2 == R::zero() {
            continue;
        }
        let two = R::of(2.0);
        // apply H = I - 2 v v^T / (v^T v) to A (left) and Q (right)
        for j in k..p {
            let mut dotv = R::zero();
            for i in k..n {
                dotv = dotv + v[i] * a[(i, j)];
            }
            let f = two * dotv / vnorm2;
            for i in k..n {
                a[(i, j)] = a[(i, j)] - f * v[i];
            }
        }
        for i in 0..n {
            let mut dotv = R::zero();
            for j in k..n {
                dotv = dotv + q[(i, j)] * v[j];
            }
            let f = two * dotv / vnorm2;
            for j in k..n {
                q[(i, j)] = q[(i, j)] - f * v[j];
            }
        }
    }
    (q, a)
}

const GCV_GRID_SIZE: usize = 31;
const GCV_GRID_DECADES: f64 = 12.0;
const GCV_GRID_LOW_EXP: f64 = -9.0;

fn gcv_grid<R: Real>(scale: R) -> Vec<R> {
    (0..GCV_GRID_SIZE)
        .map(|k| {
            let expo =
                GCV_GRID_LOW_EXP + GCV_GRID_DECADES * k as f64 / (GCV_GRID_SIZE - 1) as f64;
            scale * R::of(10.0f64.powf(expo))
        })
        .collect()
}

/// Thin-plate spline fit for d >= 2. Solves the augmented system
/// [(K + lambda I) T; T^T 0] [alpha; b] = [y; 0] through the null space of
/// T = [1 Z], so the side conditions sum(alpha) = 0, sum(alpha z) = 0 hold by
/// construction. GCV minimizes n RSS / (n - tr S)^2 over the fixed grid.
pub fn fit_tps<R: Real>(train: &TrainingSet<R>, smoothing: Smoothing<R>) -> Result<SplineFit<R>> {
    let n = train.len();
    let d = train.dim();
    if d < 2 {
        return Err(Error::invalid("thin-plate splines need d >= 2 (use the 1-d spline)"));
    }
    if n < d + 2 {
        return Err(Error::invalid(format!("thin-plate spline needs at least {} sites", d + 2)));
    }
    let p = d + 1;
    // T = [1 Z]
    let mut t = DenseMatrix::zeros(n, p);
    for i in 0..n {
        t[(i, 0)] = R::one();
        for j in 0..d {
            t[(i, j + 1)] = train.site(i)[j];
        }
    }
    let (q, r_upper) = householder_qr(&t);
    let rscale = (0..p).map(|k| r_upper[(k, k)].abs()).fold(R::zero(), |m, v| m.max(v));
    for k in 0..p {
        if r_upper[(k, k)].abs() <= R::of(1.0e-10) * rscale.max(R::one()) {
            return Err(Error::DegenerateDesign(
                "sites are affinely dependent; the thin-plate frame is singular".into(),
            ));
        }
    }
    // K and its projection onto the null space of T^T
    let mut kmat = DenseMatrix::zeros(n, n);
    let mut k_abs_sum = R::zero();
    for i in 0..n {
        for j in 0..i {
            let v = tps_kernel(train.site(i), train.site(j));
            kmat[(i, j)] = v;
            kmat[(j, i)] = v;
            k_abs_sum = k_abs_sum + v.abs() + v.abs();
        }
    }
    let scale = (k_abs_sum / R::of_usize(n * n)).max(R::of(1.0e-12));
    let m = n - p;
    // Q2: last n-p columns of Q
    let mut q2 = DenseMatrix::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            q2[(i, j)] = q[(i, j + p)];
        }
    }
    let kq2 = kmat.matmul(&q2)?;
    let m0 = q2.transpose().matmul(&kq2)?;
    let qty = q2.transpose().matvec(train.responses())?;

    let any_noise = train.noise().iter().any(|&v| v > R::zero());
    let grid = gcv_grid(scale);
    let lambdas: Vec<R> = match smoothing {
        Smoothing::Fixed(l) => {
            if l < R::zero() {
                return Err(Error::invalid("smoothing parameter must be >= 0"));
            }
            // exact zero is disallowed with noisy responses; the minimum
            // grid value stands in
            if l == R::zero() && any_noise {
                vec![grid[0]]
            } else {
                vec![l]
            }
        }
        Smoothing::Gcv => grid,
        Smoothing::DegreesOfFreedom(_) => {
            return Err(Error::invalid("df targeting is only supported for 1-d splines"))
        }
    };

    let mut best: Option<(R, R, Vec<R>, R)> = None; // (gcv, lambda, w, trace_m_inv)
    for &lambda in &lambdas {
        let mut msys = m0.clone();
        for i in 0..m {
            msys[(i, i)] = msys[(i, i)] + lambda;
        }
        let chol = match cholesky(&msys, JitterPolicy::default()) {
            Ok(c) => c,
            Err(_) => continue,
        };
        let w = chol.solve_vec(&qty)?;
        let tr_minv = chol.trace_inv()?;
        let rss: R = w.iter().map(|&v| (lambda * v) * (lambda * v)).sum();
        // n - tr(S) = lambda * tr(M^{-1}); guard against an interpolating fit
        let denom = lambda * tr_minv;
        let gcv = if denom > R::zero() {
            R::of_usize(n) * rss / (denom * denom)
        } else {
            R::infinity()
        };
        if best.as_ref().map_or(true, |(g, ..)| gcv < *g) {
            best = Some((gcv, lambda, w, tr_minv));
        }
    }
    let (_, lambda, w, tr_minv) =
        best.ok_or_else(|| Error::DegenerateDesign("no smoothing value factorized".into()))?;
    // alpha = Q2 w
    let alpha = (0..n)
        .map(|i| (0..m).map(|j| q2[(i, j)] * w[j]).sum::<R>())
        .collect::<Vec<R>>();
    // T b = y - (K + lambda I) alpha, solved through Q1 and the R factor
    let kalpha = kmat.matvec(&alpha)?;
    let resid: Vec<R> = (0..n)
        .map(|i| train.responses()[i] - kalpha[i] - lambda * alpha[i])
        .collect();
    let mut b = vec![R::zero(); p];
    for k in 0..p {
        let mut s = R::zero();
        for i in 0..n {
            s = s + q[(i, k)] * resid[i];
        }
        b[k] = s;
    }
    for k in (0..p).rev() {
        let mut s = b[k];
        for j in (k + 1)..p {
            s = s - r_upper[(k, j)] * b[j];
        }
        b[k] = s / r_upper[(k, k)];
    }
    let df = R::of_usize(n) - lambda * tr_minv;
    Ok(SplineFit {
        kind: SplineKind::ThinPlate {
            sites: train.sites().to_vec(),
            alpha,
            beta0: b[0],
            beta: b[1..].to_vec(),
        },
        lambda,
        df,
    })
}

/// Natural cubic smoothing spline on distinct 1-d sites (Reinsch form).
pub fn fit_smoothing_spline_1d<R: Real>(
    train: &TrainingSet<R>,
    smoothing: Smoothing<R>,
) -> Result<SplineFit<R>> {
    if train.dim() != 1 {
        return Err(Error::invalid("1-d smoothing spline needs one-dimensional sites"));
    }
    let n = train.len();
    if n < 4 {
        return Err(Error::invalid("1-d smoothing spline needs at least 4 distinct sites"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| train.site(i)[0].partial_cmp(&train.site(j)[0]).expect("finite"));
    let knots: Vec<R> = order.iter().map(|&i| train.site(i)[0]).collect();
    let y: Vec<R> = order.iter().map(|&i| train.responses()[i]).collect();
    let h: Vec<R> = knots.windows(2).map(|w| w[1] - w[0]).collect();

    // Green-Silverman band matrices
    let m = n - 2;
    let mut qmat = DenseMatrix::zeros(n, m);
    for jj in 0..m {
        qmat[(jj, jj)] = R::one() / h[jj];
        qmat[(jj + 1, jj)] = -(R::one() / h[jj] + R::one() / h[jj + 1]);
        qmat[(jj + 2, jj)] = R::one() / h[jj + 1];
    }
    let mut rmat = DenseMatrix::zeros(m, m);
    let three = R::of(3.0);
    let six = R::of(6.0);
    for ii in 0..m {
        rmat[(ii, ii)] = (h[ii] + h[ii + 1]) / three;
        if ii + 1 < m {
            rmat[(ii, ii + 1)] = h[ii + 1] / six;
            rmat[(ii + 1, ii)] = h[ii + 1] / six;
        }
    }
    let chol_r = cholesky(&rmat, JitterPolicy::default())?;
    // X = R^{-1} Q^T, penalty K = Q X
    let x = chol_r.solve_matrix(&qmat.transpose())?;
    let mut kpen = qmat.matmul(&x)?;
    for i in 0..n {
        for j in 0..i {
            let v = (kpen[(i, j)] + kpen[(j, i)]) / R::of(2.0);
            kpen[(i, j)] = v;
            kpen[(j, i)] = v;
        }
    }
    let scale_diag =
        (0..n).map(|i| kpen[(i, i)].abs()).sum::<R>() / R::of_usize(n);
    let scale = (R::one() / scale_diag.max(R::of(1.0e-300))).max(R::of(1.0e-300));

    let solve_at = |lambda: R| -> Result<(Vec<R>, R, R)> {
        let mut a = DenseMatrix::identity(n);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = a[(i, j)] + lambda * kpen[(i, j)];
            }
        }
        let chol = cholesky(&a, JitterPolicy::default())?;
        let g = chol.solve_vec(&y)?;
        let tr_s = chol.trace_inv()?;
        let rss: R = y.iter().zip(&g).map(|(&yi, &gi)| (yi - gi) * (yi - gi)).sum();
        Ok((g, tr_s, rss))
    };

    let any_noise = train.noise().iter().any(|&v| v > R::zero());
    let grid = gcv_grid(scale);
    let (lambda, g, df) = match smoothing {
        Smoothing::Fixed(l) => {
            if l < R::zero() {
                return Err(Error::invalid("smoothing parameter must be >= 0"));
            }
            let l = if l == R::zero() && any_noise { grid[0] } else { l };
            let (g, tr_s, _) = solve_at(l)?;
            (l, g, tr_s)
        }
        Smoothing::Gcv => {
            let mut best: Option<(R, R, Vec<R>, R)> = None;
            for &l in &grid {
                let (g, tr_s, rss) = match solve_at(l) {
                    Ok(v) => v,
                    Err(_) => continue,
                };
                let denom = R::of_usize(n) - tr_s;
                let gcv = if denom > R::zero() {
                    R::of_usize(n) * rss / (denom * denom)
                } else {
                    R::infinity()
                };
                if best.as_ref().map_or(true, |(bg, ..)| gcv < *bg) {
                    best = Some((gcv, l, g, tr_s));
                }
            }
            let (_, l, g, tr_s) =
                best.ok_or_else(|| Error::DegenerateFit("no smoothing value factorized".into()))?;
            (l, g, tr_s)
        }
        Smoothing::DegreesOfFreedom(target) => {
            if !(target > R::of(2.0) && target < R::of_usize(n)) {
                return Err(Error::invalid("df target must lie in (2, n)"));
            }
            // tr S is monotone decreasing in lambda: bisect in log space
            let (mut lo, mut hi) = (grid[0].ln(), grid[GCV_GRID_SIZE - 1].ln());
            let mut out = None;
            for _ in 0..50 {
                let mid = (lo + hi) / R::of(2.0);
                let l = mid.exp();
                let (g, tr_s, _) = solve_at(l)?;
                if (tr_s - target).abs() < R::of(0.01) {
                    out = Some((l, g, tr_s));
                    break;
                }
                if tr_s > target {
                    lo = mid;
                } else {
                    hi = mid;
                }
                out = Some((l, g, tr_s));
            }
            out.ok_or_else(|| Error::DegenerateFit("df bisection failed".into()))?
        }
    };

    // second derivatives at the interior knots, zero at the boundary
    let gamma_interior = x.matvec(&g)?;
    let mut second_derivs = vec![R::zero(); n];
    second_derivs[1..(m + 1)].copy_from_slice(&gamma_interior[..m]);
    Ok(SplineFit {
        kind: SplineKind::Cubic1d { knots, values: g, second_derivs },
        lambda,
        df,
    })
}

fn eval_natural_cubic<R: Real>(knots: &[R], g: &[R], gamma: &[R], z: R) -> R {
    let n = knots.len();
    let six = R::of(6.0);
    if z <= knots[0] {
        let h = knots[1] - knots[0];
        let slope = (g[1] - g[0]) / h - h * gamma[1] / six;
        return g[0] + slope * (z - knots[0]);
    }
    if z >= knots[n - 1] {
        let h = knots[n - 1] - knots[n - 2];
        let slope = (g[n - 1] - g[n - 2]) / h + h * gamma[n - 2] / six;
        return g[n - 1] + slope * (z - knots[n - 1]);
    }
    // binary search for the interval with knots[i] <= z < knots[i+1]
    let mut lo = 0usize;
    let mut hi = n - 1;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if knots[mid] <= z {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let h = knots[lo + 1] - knots[lo];
    let a = (knots[lo + 1] - z) / h;
    let b = (z - knots[lo]) / h;
    a * g[lo] + b * g[lo + 1]
        + ((a * a * a - a) * gamma[lo] + (b * b * b - b) * gamma[lo + 1]) * h * h / six
}
