//! Command-line front end: simulate mortality paths, build designs, fit
//! emulators, and run full evaluation case studies.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use longemu::config::{CaseStudy, CaseStudyConfig, StudyFamily};
use longemu::design::{self, DesignKind};
use longemu::emulate::{save_fit, EmulatorFit};
use longemu::harness::{self, report, EstimatorKind, Problem};
use longemu::rng::RngStream;
use longemu::mortality::{simulate_cbd, simulate_chencox, simulate_twopop};
use longemu::Error;

const CHENCOX_TOML: &str = include_str!("../../../configs/chencox.toml");
const TWOPOP_TOML: &str = include_str!("../../../configs/twopop.toml");
const CBD_TOML: &str = include_str!("../../../configs/cbd.toml");

#[derive(Parser)]
#[command(
    name = "longemu",
    about = "Deferred-annuity valuation and emulation under stochastic mortality",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Configuration file (TOML); required unless a named case study
    /// supplies its embedded default.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Training budget override.
    #[arg(long = "n-tr")]
    n_tr: Option<usize>,
    /// Test-set size override.
    #[arg(long = "n-out")]
    n_out: Option<usize>,
    /// Inner benchmark paths override.
    #[arg(long = "n-in")]
    n_in: Option<usize>,
    /// Comma-separated estimator list override.
    #[arg(long, value_delimiter = ',')]
    emulators: Option<Vec<String>>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate state paths from time 0 and write them to CSV.
    Simulate {
        #[command(flatten)]
        common: CommonOpts,
        /// Number of paths.
        #[arg(long, default_value_t = 100)]
        paths: usize,
        /// Years to simulate; defaults to deferral + payment horizon.
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Generate the training design and write it to CSV.
    Design {
        #[command(flatten)]
        common: CommonOpts,
        /// Design kind override (grid, lhs, sobol, empirical).
        #[arg(long)]
        kind: Option<String>,
    },
    /// Build the training set and fit the configured emulators to files.
    Fit {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Run the full pipeline and write the evaluation report.
    Evaluate {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Run a named case study with its shipped configuration.
    CaseStudy {
        /// One of: chen-cox, two-pop, cbd.
        study: String,
        #[command(flatten)]
        common: CommonOpts,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) => 2,
        Error::Io(_) => 1,
        _ => 3,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate { common, paths, horizon } => {
            let config = load_config(None, &common)?;
            simulate_cmd(&config, paths, horizon, &common.out)
        }
        Command::Design { common, kind } => {
            let config = load_config(None, &common)?;
            design_cmd(&config, kind.as_deref(), &common.out)
        }
        Command::Fit { common } => {
            let config = load_config(None, &common)?;
            fit_cmd(&config, &common.out)
        }
        Command::Evaluate { common } => {
            let config = load_config(None, &common)?;
            evaluate_cmd(&config, &common.out)
        }
        Command::CaseStudy { study, common } => {
            let family = StudyFamily::parse(&study)?;
            let config = load_config(Some(family), &common)?;
            evaluate_cmd(&config, &common.out)
        }
    }
}

fn load_config(
    family: Option<StudyFamily>,
    common: &CommonOpts,
) -> Result<CaseStudyConfig<f64>, Error> {
    let mut config = match (&common.config, family) {
        (Some(path), _) => CaseStudyConfig::from_path(path)?,
        (None, Some(StudyFamily::ChenCox)) => CaseStudyConfig::from_toml_str(CHENCOX_TOML)?,
        (None, Some(StudyFamily::TwoPop)) => CaseStudyConfig::from_toml_str(TWOPOP_TOML)?,
        (None, Some(StudyFamily::Cbd)) => CaseStudyConfig::from_toml_str(CBD_TOML)?,
        (None, None) => {
            return Err(Error::Config("--config PATH is required".into()));
        }
    };
    if let Some(family) = family {
        if config.family != family {
            return Err(Error::Config(format!(
                "config family {} does not match requested case study {}",
                config.family.name(),
                family.name()
            )));
        }
    }
    if let Some(seed) = common.seed {
        config.settings.seed = seed;
    }
    if let Some(n_tr) = common.n_tr {
        config.settings.n_tr = n_tr;
    }
    if let Some(n_out) = common.n_out {
        config.settings.n_out = n_out;
    }
    if let Some(n_in) = common.n_in {
        config.settings.n_in = n_in;
    }
    if let Some(emulators) = &common.emulators {
        config.settings.emulators = emulators
            .iter()
            .map(|s| EstimatorKind::parse(s))
            .collect::<Result<_, _>>()?;
    }
    Ok(config)
}

fn simulate_cmd(
    config: &CaseStudyConfig<f64>,
    paths: usize,
    horizon: Option<usize>,
    out: &Path,
) -> Result<(), Error> {
    std::fs::create_dir_all(out)?;
    let horizon = horizon
        .unwrap_or(config.spec.deferral as usize + config.spec.payments())
        .max(1);
    let base = RngStream::new(config.settings.seed, 0x51);
    let file = std::fs::File::create(out.join("paths.csv"))?;
    let mut w = std::io::BufWriter::new(file);
    match &config.study {
        CaseStudy::ChenCox { model, state } => {
            writeln!(w, "path,year,kappa")?;
            for p in 0..paths {
                let mut s = base.substream(p as u64);
                let path = simulate_chencox(model, state, &mut s, horizon);
                for (t, v) in path.iter().enumerate() {
                    writeln!(w, "{p},{},{:.16e}", t + 1, v)?;
                }
            }
        }
        CaseStudy::TwoPop { model, kappa1_hist, spread_hist } => {
            writeln!(w, "path,year,kappa1,kappa2")?;
            let k1_0 = *kappa1_hist.last().expect("non-empty history");
            let s_0 = *spread_hist.last().expect("non-empty history");
            let state =
                longemu::mortality::TwoPopState::from_levels(model, k1_0, k1_0 - s_0);
            for p in 0..paths {
                let mut s = base.substream(p as u64);
                let tp = simulate_twopop(model, &state, &mut s, horizon);
                for t in 0..horizon {
                    writeln!(
                        w,
                        "{p},{},{:.16e},{:.16e}",
                        t + 1,
                        tp.kappa1[t],
                        tp.kappa2[t]
                    )?;
                }
            }
        }
        CaseStudy::Cbd { model, state } => {
            writeln!(w, "path,year,kappa1,kappa2")?;
            for p in 0..paths {
                let mut s = base.substream(p as u64);
                let (k1, k2) = simulate_cbd(model, state, &mut s, horizon);
                for t in 0..horizon {
                    writeln!(w, "{p},{},{:.16e},{:.16e}", t + 1, k1[t], k2[t])?;
                }
            }
        }
    }
    println!("wrote {}", out.join("paths.csv").display());
    Ok(())
}

fn build_design(
    config: &CaseStudyConfig<f64>,
    kind: DesignKind,
) -> Result<longemu::Design64, Error> {
    let problem = config.problem();
    let budget = design::allocate_budget(config.settings.n_tr)?;
    let seed = config.settings.seed;
    let stream = RngStream::new(seed, 0x52);
    let bounds = match (&config.settings.bounds, kind) {
        (_, DesignKind::Empirical) => Vec::new(),
        (Some(b), _) => b.clone(),
        (None, _) => pilot_box(problem.as_ref(), seed),
    };
    Ok(match kind {
        DesignKind::Grid => {
            let d = problem.dim();
            let counts = if d == 1 {
                vec![budget.n_sites.max(2)]
            } else {
                let per = ((budget.n_sites as f64).powf(1.0 / d as f64).round() as usize).max(2);
                vec![per; d]
            };
            design::uniform_grid(&bounds, &counts)?
        }
        DesignKind::Lhs => design::lhs(&bounds, budget.n_sites, &mut stream.clone())?,
        DesignKind::Sobol => {
            design::sobol(&bounds, budget.n_sites, config.settings.sobol_skip)?
        }
        DesignKind::Empirical => {
            design::empirical_design(|s| problem.draw_site(s), budget.n_sites, &stream)?
        }
    })
}

fn pilot_box(problem: &dyn Problem<f64>, seed: u64) -> Vec<(f64, f64)> {
    let stream = RngStream::new(seed, 0x55);
    let n = 10_000;
    let draws: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut s = stream.substream(i as u64);
            problem.draw_site(&mut s)
        })
        .collect();
    (0..problem.dim())
        .map(|j| {
            let mut col: Vec<f64> = draws.iter().map(|z| z[j]).collect();
            col.sort_by(f64::total_cmp);
            let lo = longemu::stats::quantile_sorted(&col, 0.005).expect("pilot quantile");
            let hi = longemu::stats::quantile_sorted(&col, 0.995).expect("pilot quantile");
            if hi > lo {
                (lo, hi)
            } else {
                (lo - 1.0, hi + 1.0)
            }
        })
        .collect()
}

fn design_cmd(
    config: &CaseStudyConfig<f64>,
    kind: Option<&str>,
    out: &Path,
) -> Result<(), Error> {
    std::fs::create_dir_all(out)?;
    let kind = match kind {
        None => config.settings.design,
        Some("grid") => DesignKind::Grid,
        Some("lhs") => DesignKind::Lhs,
        Some("sobol") => DesignKind::Sobol,
        Some("empirical") => DesignKind::Empirical,
        Some(other) => {
            return Err(Error::Config(format!("unknown design kind {other:?}")));
        }
    };
    let d = build_design(config, kind)?;
    design::write_design_csv(&d, &out.join("design.csv"))?;
    println!(
        "wrote {} ({} sites, kind {})",
        out.join("design.csv").display(),
        d.n_sites(),
        kind.as_str()
    );
    Ok(())
}

fn fit_cmd(config: &CaseStudyConfig<f64>, out: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(out)?;
    let problem = config.problem();
    let budget = design::allocate_budget(config.settings.n_tr)?;
    let d = build_design(config, config.settings.design)?;
    let train_stream = RngStream::new(config.settings.seed, 0x53);
    let train = design::batch(
        &d,
        |site, s| problem.sample_value(site, s),
        &train_stream,
        budget.n_reps,
    )?;
    design::write_training_csv(&train, &out.join("training.csv"))?;
    for &kind in &config.settings.emulators {
        let fit: Option<EmulatorFit<f64>> = match kind {
            EstimatorKind::Analytic | EstimatorKind::AnalyticA1 | EstimatorKind::AnalyticA2 => {
                None
            }
            _ => Some(harness::fit_emulator(&problem, kind, &train, &config.settings)?),
        };
        if let Some(fit) = fit {
            let path = out.join(format!("fit_{}.txt", kind.name()));
            save_fit(&fit, &path)?;
            println!("wrote {}", path.display());
        }
    }
    println!("wrote {}", out.join("training.csv").display());
    Ok(())
}

fn evaluate_cmd(config: &CaseStudyConfig<f64>, out: &Path) -> Result<(), Error> {
    let report = harness::run_case_study(config)?;
    report::write_all(&report, out)?;
    println!(
        "{:<12} {:>13} {:>13} {:>13}",
        "estimator", "bias", "sqrt_imse", "s_ave"
    );
    for row in &report.rows {
        println!(
            "{:<12} {:>13.4e} {:>13.4e} {:>13}",
            row.kind.name(),
            row.bias,
            row.rmse,
            row.s_ave.map_or(String::from("-"), |v| format!("{v:.4e}")),
        );
    }
    println!(
        "budget: {} training sims vs {} benchmark sims (speed-up ratio {:.1})",
        report.budget.n_sites * report.budget.n_reps,
        report.bench_budget,
        report.speedup_ratio
    );
    println!("wrote report to {}", out.display());
    Ok(())
}
