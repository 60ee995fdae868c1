use ac2d_core::besov::{besov_norm_with, BesovIndex, BlockGrid, DyadicPartition};
use ac2d_core::dynamics::{run_galerkin, GalerkinConfig, SolverOptions};
use ac2d_core::harness::{fit_rate, run_linear_rate_study, run_nonlinear_rate_study, InitialData, StudyConfig};
use ac2d_core::noise::sample_driving_path;
use ac2d_core::wick::{renorm_constant, CoefficientSet};
use ac2d_core::SpectralField;
use proptest::prelude::*;

fn small_linear(paths: usize) -> StudyConfig {
    StudyConfig {
        levels: vec![2, 4, 8],
        reference_cutoff: 32,
        paths,
        step: 0.5,
        horizon: 1.0,
        snapshots: 2,
        seed: 1234,
        ..StudyConfig::default()
    }
}

#[test]
fn nested_levels_give_nonincreasing_mean_error() {
    let r = run_linear_rate_study(&small_linear(16)).unwrap();
    for s in &r.series {
        assert!(s.monotone, "{}: {:?}", s.label, s.levels);
    }
}

#[test]
fn reported_constants_grow_logarithmically() {
    let r = run_linear_rate_study(&StudyConfig {
        levels: vec![4, 8, 16, 32],
        reference_cutoff: 64,
        orders: vec![1],
        paths: 1,
        ..small_linear(1)
    })
    .unwrap();
    let consts: Vec<f64> = r.series[0].levels.iter().map(|l| l.renorm).collect();
    let increments: Vec<f64> = consts.windows(2).map(|w| w[1] - w[0]).collect();
    let limit = 2f64.ln() / (4.0 * std::f64::consts::PI);
    // Lattice-point fluctuations keep the increments within 1% of the limit.
    for inc in &increments {
        assert!((inc - limit).abs() < 0.01 * limit, "increment {inc} vs {limit}");
    }
}

#[test]
fn doubling_paths_shrinks_slope_error() {
    let a = run_linear_rate_study(&small_linear(16)).unwrap();
    let b = run_linear_rate_study(&small_linear(32)).unwrap();
    for (sa, sb) in a.series.iter().zip(&b.series) {
        let ratio = sa.fit.unwrap().slope_stderr / sb.fit.unwrap().slope_stderr;
        assert!((1.0..2.0).contains(&ratio), "{}: {ratio}", sa.label);
    }
    // The first paths are shared.
    assert_eq!(a.paths[..], b.paths[..16]);
}

#[test]
fn random_initial_data_enters_every_level() {
    let cfg = StudyConfig {
        initial: InitialData::BandLimited {
            cutoff: 6,
            decay: 1.0,
            amplitude: 2.0,
        },
        ..small_linear(2)
    };
    let with = run_linear_rate_study(&cfg).unwrap();
    let without = run_linear_rate_study(&small_linear(2)).unwrap();
    assert_ne!(with.paths, without.paths);
}

#[test]
fn nonlinear_report_fits_both_series() {
    let cfg = StudyConfig {
        regularity: 0.2,
        time_weight: 0.35,
        levels: vec![2, 4, 8],
        reference_cutoff: 16,
        paths: 3,
        step: 0.01,
        horizon: 0.2,
        snapshots: 4,
        ..StudyConfig::default()
    };
    let r = run_nonlinear_rate_study(&cfg).unwrap();
    assert_eq!(r.study, "nonlinear");
    for s in &r.series {
        let fit = s.fit.expect("three levels with positive error");
        assert!(fit.slope < 0.0, "{}: {}", s.label, fit.slope);
        let direct = fit_rate(&s.levels.iter().map(|l| (l.cutoff, l.mean, l.stderr)).collect::<Vec<_>>()).unwrap();
        assert_eq!(fit, direct);
    }
}

#[test]
fn galerkin_levels_share_the_noise() {
    let path = sample_driving_path(8, 16, 0.01, 10).unwrap();
    let cfg = |n| GalerkinConfig {
        cutoff: n,
        coefficients: CoefficientSet::new(0.0, 1.0, 0.0, -1.0),
        snapshot_steps: vec![10],
        options: SolverOptions::default(),
    };
    let fine = run_galerkin(&path, &SpectralField::zeros(0), &cfg(16)).unwrap();
    let coarse = run_galerkin(&path, &SpectralField::zeros(0), &cfg(4)).unwrap();
    // The linear parts agree exactly on the coarse modes.
    assert_eq!(fine[0].zbar.project(4), coarse[0].zbar);
    let c = renorm_constant(16);
    assert!(c > renorm_constant(4));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn holder_norm_scales_and_splits(seed in 0u64..1000, s in 0.1f64..10.0) {
        let f = ac2d_core::harness::random_band_limited(seed, 16);
        let p = DyadicPartition::covering(f.cutoff()).unwrap();
        let idx = BesovIndex::holder(-0.3);
        let grid = BlockGrid::Oversampled(4.0);
        let n = besov_norm_with(&f, idx, &p, grid).unwrap().value;
        let scaled = besov_norm_with(&f.scale(s), idx, &p, grid).unwrap().value;
        prop_assert!((scaled - s * n).abs() <= 1e-12 * s * n);
        // Common storage cutoff, so every block is sampled on the same grid.
        let g = ac2d_core::harness::random_band_limited(seed + 1, 16);
        let c = f.cutoff().max(g.cutoff());
        let (f, g) = (f.with_cutoff(c), g.with_cutoff(c));
        let pg = DyadicPartition::covering(c).unwrap();
        let sum = besov_norm_with(&(&f + &g), idx, &pg, grid).unwrap().value;
        let nf = besov_norm_with(&f, idx, &pg, grid).unwrap().value;
        let ng = besov_norm_with(&g, idx, &pg, grid).unwrap().value;
        prop_assert!(sum <= (nf + ng) * (1.0 + 1e-12));
    }
}
