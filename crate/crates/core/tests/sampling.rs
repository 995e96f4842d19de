//! Predictive samplers against the analytic cell masses they should follow.

use std::collections::BTreeMap;

use polyamix::predictive::{sample_posterior_predictive, sample_predictive, MixtureApproximation};
use polyamix::{PosteriorModel, PredictiveGrid, SegmentationFamily};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn fitted_model(rng: &mut ChaCha8Rng) -> PosteriorModel {
    let family = SegmentationFamily::balanced(2, &BTreeMap::from([(1, 3), (2, 3)]), &[]).unwrap();
    let data: Vec<Vec<f64>> = (0..60)
        .map(|_| {
            let x: f64 = rng.random();
            vec![x, (0.6 * x + 0.4 * rng.random::<f64>()).min(1.0)]
        })
        .collect();
    PosteriorModel::fit(&data, &family, 1.0).unwrap()
}

/// Pearson goodness-of-fit p-value of points binned on the grid cells.
fn grid_gof(points: &[Vec<f64>], grid: &PredictiveGrid) -> f64 {
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut observed = vec![0.0; nx * ny];
    for u in points {
        let ix = ((u[0] * nx as f64) as usize).min(nx - 1);
        let iy = ((u[1] * ny as f64) as usize).min(ny - 1);
        observed[ix * ny + iy] += 1.0;
    }
    let n = points.len() as f64;
    let mut statistic = 0.0;
    let mut cells = 0;
    for ix in 0..nx {
        for iy in 0..ny {
            let expected = n * grid.cell(ix, iy);
            if expected > 0.0 {
                statistic += (observed[ix * ny + iy] - expected).powi(2) / expected;
                cells += 1;
            }
        }
    }
    1.0 - ChiSquared::new((cells - 1) as f64).unwrap().cdf(statistic)
}

#[test]
fn exact_sampler_matches_exact_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let model = fitted_model(&mut rng);
    let grid = PredictiveGrid::from_model(&model).unwrap();
    let sample = sample_posterior_predictive(&model, 100_000, &mut rng).unwrap();
    let p = grid_gof(&sample.points, &grid);
    assert!(p > 0.001, "p = {p}");
}

#[test]
fn mixture_sampler_matches_mixture_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let model = fitted_model(&mut rng);
    let mix = MixtureApproximation::build(&model, 20, &mut rng).unwrap();
    let grid = PredictiveGrid::from_mixture(&mix).unwrap();
    let sample = sample_predictive(&mix, 100_000, &mut rng).unwrap();
    let p = grid_gof(&sample.points, &grid);
    assert!(p > 0.001, "p = {p}");
}

#[test]
fn mixture_grid_approaches_exact_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let model = fitted_model(&mut rng);
    let exact = PredictiveGrid::from_model(&model).unwrap();
    let mix = MixtureApproximation::build(&model, 400, &mut rng).unwrap();
    let approx = PredictiveGrid::from_mixture(&mix).unwrap();
    let mut worst: f64 = 0.0;
    for ix in 0..exact.nx() {
        for iy in 0..exact.ny() {
            worst = worst.max((exact.cell(ix, iy) - approx.cell(ix, iy)).abs());
        }
    }
    assert!(worst < 0.01, "largest cell difference {worst}");
}
