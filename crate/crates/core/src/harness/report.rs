//! CSV output for evaluation reports. All CSVs are byte-deterministic for a
//! fixed config and seed; wall-clock timings go to a separate text file that
//! is excluded from that guarantee.

use std::io::Write;
use std::path::Path;

use crate::error::Result;
use crate::real::Real;

use super::EvalReport;

fn fmt<R: Real>(v: R) -> String {
    format!("{:.16e}", v.to_f64_lossy())
}

/// Per-estimator metrics: `report.csv`.
pub fn write_report_csv<R: Real>(report: &EvalReport<R>, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        f,
        "estimator,bias,sqrt_imse,s_ave,pred_mean,pred_sd,pred_q{},pred_es{}",
        report.alpha, report.alpha
    )?;
    for row in &report.rows {
        writeln!(
            f,
            "{},{},{},{},{},{},{},{}",
            row.kind.name(),
            fmt(row.bias),
            fmt(row.rmse),
            row.s_ave.map_or(String::new(), fmt),
            fmt(row.stats.mean),
            fmt(row.stats.sd),
            fmt(row.stats.quantile),
            fmt(row.stats.expected_shortfall),
        )?;
    }
    Ok(())
}

/// Per-site benchmark values and predictions: `predictions.csv`.
pub fn write_predictions_csv<R: Real>(report: &EvalReport<R>, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    let dim = report.sites.first().map_or(0, |s| s.len());
    let mut header: Vec<String> = (1..=dim).map(|j| format!("z{j}")).collect();
    header.push("benchmark".into());
    header.push("benchmark_se".into());
    for row in &report.rows {
        header.push(row.kind.name().into());
        if row.posterior_sd.is_some() {
            header.push(format!("{}_sd", row.kind.name()));
        }
    }
    writeln!(f, "{}", header.join(","))?;
    for i in 0..report.sites.len() {
        let mut fields: Vec<String> = report.sites[i].iter().map(|&v| fmt(v)).collect();
        fields.push(fmt(report.benchmark_mean[i]));
        fields.push(fmt(report.benchmark_se[i]));
        for row in &report.rows {
            fields.push(fmt(row.predictions[i]));
            if let Some(sds) = &row.posterior_sd {
                fields.push(fmt(sds[i]));
            }
        }
        writeln!(f, "{}", fields.join(","))?;
    }
    Ok(())
}

/// Budget accounting: `run_meta.csv`.
pub fn write_meta_csv<R: Real>(report: &EvalReport<R>, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        f,
        "seed,n_tr,n_sites,n_reps,n_out,n_in,train_budget,bench_budget,speedup_ratio,alpha"
    )?;
    writeln!(
        f,
        "{},{},{},{},{},{},{},{},{},{}",
        report.seed,
        report.budget.n_total,
        report.budget.n_sites,
        report.budget.n_reps,
        report.benchmark_mean.len(),
        report.bench_budget / report.benchmark_mean.len().max(1),
        report.budget.n_sites * report.budget.n_reps,
        report.bench_budget,
        format_args!("{:.6e}", report.speedup_ratio),
        report.alpha,
    )?;
    Ok(())
}

/// Figure-style curves for one-dimensional studies:
/// `plotdata_<estimator>.csv` with columns z, benchmark, mean and the
/// two-posterior-sd band (band columns repeat the mean for estimators
/// without a variance).
pub fn write_plotdata_csv<R: Real>(report: &EvalReport<R>, dir: &Path) -> Result<()> {
    let dim = report.sites.first().map_or(0, |s| s.len());
    if dim != 1 {
        return Ok(());
    }
    let mut order: Vec<usize> = (0..report.sites.len()).collect();
    order.sort_by(|&a, &b| {
        report.sites[a][0]
            .partial_cmp(&report.sites[b][0])
            .expect("finite sites")
    });
    let two = R::of(2.0);
    for row in &report.rows {
        let path = dir.join(format!("plotdata_{}.csv", row.kind.name()));
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "z,benchmark,mean,lower,upper")?;
        for &i in &order {
            let m = row.predictions[i];
            let (lo, hi) = match &row.posterior_sd {
                Some(sds) => (m - two * sds[i], m + two * sds[i]),
                None => (m, m),
            };
            writeln!(
                f,
                "{},{},{},{},{}",
                fmt(report.sites[i][0]),
                fmt(report.benchmark_mean[i]),
                fmt(m),
                fmt(lo),
                fmt(hi),
            )?;
        }
    }
    Ok(())
}

/// Wall-clock timings: `timings.txt` (not byte-reproducible).
pub fn write_timings<R: Real>(report: &EvalReport<R>, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "estimator fit_seconds predict_seconds")?;
    for row in &report.rows {
        writeln!(
            f,
            "{} {:.6} {:.6}",
            row.kind.name(),
            row.fit_seconds,
            row.predict_seconds
        )?;
    }
    Ok(())
}

/// Write the full report bundle into a directory.
pub fn write_all<R: Real>(report: &EvalReport<R>, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_report_csv(report, &dir.join("report.csv"))?;
    write_predictions_csv(report, &dir.join("predictions.csv"))?;
    write_meta_csv(report, &dir.join("run_meta.csv"))?;
    write_plotdata_csv(report, dir)?;
    write_timings(report, &dir.join("timings.txt"))?;
    Ok(())
}
