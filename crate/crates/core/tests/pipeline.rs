use geobayes::bayes::{density_map, DensityConfig, DensityStatus, PosteriorDraws};
use geobayes::copula::{fit_copula_mle, joint_density};
use geobayes::empvario::{empirical_variogram, uniform_edges, Estimator};
use geobayes::fit::{fit_nested_matern_batch, fit_variogram, Family, FitBounds, FitMethod};
use geobayes::krige::{krige_map, KrigingMethod, MapStatus, DEFAULT_MIN_NEIGHBORS};
use geobayes::optim::MinimizeOptions;
use geobayes::sim::{simulate_variograms, synth_spec, synthetic_lognormal, Grid, SYNTH_EXTENT};
use geobayes::CovarianceKind;

#[test]
fn survey_to_predictive_density() {
    let data = synthetic_lognormal(160, 1.0, 31).unwrap();
    let log_data = data.log_transformed().unwrap();

    let emp = empirical_variogram(&log_data, &uniform_edges(150.0, 12), Estimator::Matheron, None).unwrap();
    let family = Family::Single(CovarianceKind::Exponential);
    let fit = fit_variogram(&emp, family, FitMethod::Ols, &FitBounds::default_for(family, &emp), None).unwrap();
    assert!(fit.converged);
    let model = family.build(&fit.params).unwrap();

    let [x0, x1, y0, y1] = SYNTH_EXTENT;
    let grid = Grid::rect_inclusive(x0, x1, y0, y1, 9, 7).unwrap();
    let kriged = krige_map(grid.coords(), &log_data, &model, &KrigingMethod::Ordinary, 60.0, DEFAULT_MIN_NEIGHBORS);
    let ok: Vec<_> = kriged.iter().filter(|e| e.status == MapStatus::Ok).collect();
    assert!(ok.len() > 40, "{} kriged", ok.len());
    for e in &ok {
        let r = e.result.as_ref().unwrap();
        assert!(r.prediction.is_finite() && r.sd >= 0.0);
    }

    let table = simulate_variograms(log_data.coords(), 2, &synth_spec(), &uniform_edges(200.0, 20), 16, 32, false, None).unwrap();
    let fits = fit_nested_matern_batch(&table, FitMethod::Ols, &FitBounds::nested_matern_default(), &MinimizeOptions::default()).unwrap();
    let draws = PosteriorDraws::from_fits(&fits).unwrap();
    assert!(draws.len() >= 14);

    let rows = density_map(grid.coords(), &log_data, &draws, &DensityConfig::new(0.0, 10000.0, 40.0)).unwrap();
    let done = rows.iter().filter(|r| r.status == DensityStatus::Ok).count();
    assert!(done > 40);
    for r in rows.iter().filter_map(|r| r.summary) {
        assert!(r.q025 <= r.median && r.median <= r.q075 && r.approx_sd >= 0.0);
    }

    let cop = fit_copula_mle(&draws).unwrap();
    assert_eq!(cop.n_rows, draws.len());
    let dens = joint_density(&cop, &draws.rows().iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap();
    assert!(dens.iter().all(|d| d.is_finite() && *d >= 0.0));
}

#[test]
fn map_is_identical_across_thread_counts() {
    let data = synthetic_lognormal(90, 0.5, 8).unwrap().log_transformed().unwrap();
    let model = synth_spec();
    let grid = Grid::rect_inclusive(-100.0, 100.0, -80.0, 80.0, 12, 9).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| krige_map(grid.coords(), &data, &model, &KrigingMethod::Ordinary, 70.0, DEFAULT_MIN_NEIGHBORS))
    };
    assert_eq!(run(1), run(6));
}
