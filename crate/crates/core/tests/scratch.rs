//! Temporary diagnostics (removed before release).

use std::sync::Arc;

use longemu::config::CaseStudyConfig;
use longemu::design::{allocate_budget, batch, empirical_design};
use longemu::emulate::{fit_hyperparams, fit_uk, KernelSpec, MleTrend, UkBasis};
use longemu::harness::{imse_bias, DetVariant};
use longemu::rng::RngStream;

const CBD_TOML: &str = include_str!("../../../configs/cbd.toml");

#[test]
#[ignore]
fn cbd_uk_diagnostics() {
    let config: CaseStudyConfig<f64> = CaseStudyConfig::from_toml_str(CBD_TOML).unwrap();
    let problem = config.problem();
    let seed = 1234u64;
    let budget = allocate_budget(1000).unwrap();
    let design_stream = RngStream::new(seed, 1);
    let design =
        empirical_design(|s| problem.draw_site(s), budget.n_sites, &design_stream).unwrap();
    let train_stream = RngStream::new(seed, 2);
    let train = batch(
        &design,
        |site, s| problem.sample_value(site, s),
        &train_stream,
        budget.n_reps,
    )
    .unwrap();
    let mean_noise = train.noise().iter().sum::<f64>() / train.len() as f64;
    println!("mean nugget {:.4e} (sd {:.4e})", mean_noise, mean_noise.sqrt());
    println!("site ranges {:?}", train.ranges());

    let hyper = fit_hyperparams(&train, MleTrend::Linear, 2.0, None, 5).unwrap();
    println!(
        "MLE: theta {:?} sigma2 {:.4e} ll {:.4} converged {}",
        hyper.kernel.lengthscales, hyper.kernel.variance, hyper.log_likelihood, hyper.converged
    );

    // test set + benchmark
    let test_stream = RngStream::new(seed, 3);
    let sites: Vec<Vec<f64>> = (0..100)
        .map(|i| {
            let mut s = test_stream.substream(i);
            problem.draw_site(&mut s)
        })
        .collect();
    let bench_stream = RngStream::new(seed, 4);
    let bench: Vec<f64> = sites
        .iter()
        .enumerate()
        .map(|(i, z)| {
            longemu::annuity::nested_mc_value(
                |s| problem.sample_value(z, s),
                &bench_stream.substream(i as u64),
                2000,
            )
            .unwrap()
            .mean
        })
        .collect();

    let eval = |kernel: KernelSpec<f64>, label: &str| {
        let fit = fit_uk(&train, kernel, UkBasis::Linear).unwrap();
        let preds: Vec<f64> = sites.iter().map(|z| fit.predict(z).unwrap().0).collect();
        let (bias, rmse) = imse_bias(&preds, &bench).unwrap();
        println!("{label}: bias {bias:.4e} rmse {rmse:.4e}");
    };
    eval(hyper.kernel.clone(), "mle");
    let ranges = train.ranges();
    for mult in [0.5, 1.0, 2.0, 5.0] {
        let theta: Vec<f64> = ranges.iter().map(|r| r * mult).collect();
        eval(
            KernelSpec::new(2.0, theta, 0.05).unwrap(),
            &format!("fixed x{mult} var .05"),
        );
    }
    // analytic for comparison
    let det: Vec<f64> = sites
        .iter()
        .map(|z| problem.deterministic(DetVariant::Default, z).unwrap())
        .collect();
    let (bias, rmse) = imse_bias(&det, &bench).unwrap();
    println!("analytic: bias {bias:.4e} rmse {rmse:.4e}");
    let _ = Arc::clone(&problem);
}
