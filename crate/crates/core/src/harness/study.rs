use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use super::config::StudyConfig;
use super::fit::{fit_rate, RateFit};
use crate::besov::{besov_norms, BesovIndex, BlockGrid, DyadicPartition};
use crate::dynamics::{run_galerkin, zbar_snapshots, GalerkinConfig, SolverOptions};
use crate::error::{Error, Result};
use crate::noise::{path_seed, sample_driving_path};
use crate::spectrum::{pointwise, SpectralField};
use crate::wick::{hermite, renorm_constant};

pub const VERSION: &str = concat!("ac2d-core ", env!("CARGO_PKG_VERSION"));

/// Aggregate error of one series at one level.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelStat {
    pub cutoff: usize,
    /// `𝔯ᴺ` at this level.
    pub renorm: f64,
    /// Path mean of the weighted sup over snapshots.
    pub mean: f64,
    pub stderr: f64,
    /// Path mean of the unweighted sup over the tail window.
    pub tail_mean: f64,
    pub tail_stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Series {
    pub label: String,
    pub levels: Vec<LevelStat>,
    /// Fit of the weighted errors over levels with positive mean error.
    pub fit: Option<RateFit>,
    pub tail_fit: Option<RateFit>,
    /// Mean error nonincreasing in `N` up to 3 combined standard errors.
    pub monotone: bool,
}

/// Per-path errors, indexed `[series][level]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathRecord {
    pub index: usize,
    pub seed: u64,
    pub weighted: Vec<Vec<f64>>,
    pub tail: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateReport {
    pub study: String,
    pub version: String,
    pub config: StudyConfig,
    pub series: Vec<Series>,
    pub paths: Vec<PathRecord>,
    /// Wall-clock time; kept out of the serialized report.
    #[serde(skip)]
    pub runtime: Duration,
}

impl RateReport {
    pub fn series(&self, label: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.label == label)
    }
}

/// Running weighted and tail-window sups for one path.
struct SupTracker {
    weight: f64,
    tail_from: f64,
    weighted: Vec<Vec<f64>>,
    tail: Vec<Vec<f64>>,
}

impl SupTracker {
    fn new(series: usize, levels: usize, cfg: &StudyConfig) -> Self {
        SupTracker {
            weight: cfg.time_weight,
            tail_from: cfg.tail_start * cfg.horizon * (1.0 - 1e-12),
            weighted: vec![vec![0.0; levels]; series],
            tail: vec![vec![0.0; levels]; series],
        }
    }

    fn push(&mut self, t: f64, norms: &[Vec<f64>]) {
        let w = if self.weight == 0.0 { 1.0 } else { t.powf(self.weight) };
        for (s, row) in norms.iter().enumerate() {
            for (l, &e) in row.iter().enumerate() {
                self.weighted[s][l] = self.weighted[s][l].max(w * e);
                if t >= self.tail_from {
                    self.tail[s][l] = self.tail[s][l].max(e);
                }
            }
        }
    }

    fn finish(self, index: usize, seed: u64) -> PathRecord {
        PathRecord {
            index,
            seed,
            weighted: self.weighted,
            tail: self.tail,
        }
    }
}

fn partition_for(cfg: &StudyConfig, cutoff: usize) -> Result<DyadicPartition> {
    match cfg.j_max {
        Some(j) => crate::besov::build_partition(j),
        None => DyadicPartition::covering(cutoff),
    }
}

/// Norms `‖d‖_{C^{-α}}` of the error fields, reshaped to `[series][level]`.
fn norms(diffs: &[SpectralField], levels: usize, cfg: &StudyConfig, partition: &DyadicPartition) -> Result<Vec<Vec<f64>>> {
    let refs: Vec<&SpectralField> = diffs.iter().collect();
    let values = besov_norms(&refs, BesovIndex::holder(-cfg.regularity), partition, BlockGrid::Oversampled(cfg.oversample))?;
    Ok(values.chunks(levels).map(|c| c.iter().map(|n| n.value).collect()).collect())
}

fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn fit_positive(points: Vec<(usize, f64, f64)>) -> Option<RateFit> {
    let pts: Vec<_> = points.into_iter().filter(|p| p.1 > 0.0).collect();
    if pts.len() < 3 {
        return None;
    }
    fit_rate(&pts).ok()
}

fn aggregate(labels: &[String], cfg: &StudyConfig, records: &[PathRecord]) -> Vec<Series> {
    labels
        .iter()
        .enumerate()
        .map(|(s, label)| {
            let levels: Vec<LevelStat> = cfg
                .levels
                .iter()
                .enumerate()
                .map(|(l, &cutoff)| {
                    let w: Vec<f64> = records.iter().map(|r| r.weighted[s][l]).collect();
                    let t: Vec<f64> = records.iter().map(|r| r.tail[s][l]).collect();
                    let (mean, stderr) = mean_stderr(&w);
                    let (tail_mean, tail_stderr) = mean_stderr(&t);
                    LevelStat {
                        cutoff,
                        renorm: renorm_constant(cutoff),
                        mean,
                        stderr,
                        tail_mean,
                        tail_stderr,
                    }
                })
                .collect();
            let fit = fit_positive(levels.iter().map(|l| (l.cutoff, l.mean, l.stderr)).collect());
            let tail_fit = fit_positive(levels.iter().map(|l| (l.cutoff, l.tail_mean, l.tail_stderr)).collect());
            let monotone = levels.windows(2).all(|w| {
                let slack = 3.0 * (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt();
                w[1].mean <= w[0].mean + slack
            });
            Series {
                label: label.clone(),
                levels,
                fit,
                tail_fit,
                monotone,
            }
        })
        .collect()
}

/// Runs `per_path` for every path index in parallel and keeps path order.
fn run_paths<F>(cfg: &StudyConfig, per_path: F) -> Result<Vec<PathRecord>>
where
    F: Fn(usize, u64) -> Result<PathRecord> + Sync,
{
    let results: Vec<Result<PathRecord>> = (0..cfg.paths)
        .into_par_iter()
        .map(|i| {
            let seed = path_seed(cfg.seed, i as u64);
            per_path(i, seed).map_err(|e| Error::PathFailure {
                path: i,
                seed,
                source: Box::new(e),
            })
        })
        .collect();
    results.into_iter().collect()
}

/// Error fields `Z̄^{:n:} - (P_N Z̄)^{:n:}` for every order and level, series-major.
fn wick_errors(z: &SpectralField, cfg: &StudyConfig) -> Result<Vec<SpectralField>> {
    let reference = cfg.reference_cutoff;
    let c_ref = renorm_constant(reference);
    // Levels at the reference cutoff have identically zero error.
    let active: Vec<usize> = cfg.levels.iter().copied().filter(|&n| n < reference).collect();
    let consts: Vec<f64> = active.iter().map(|&n| renorm_constant(n)).collect();
    let projected: Vec<SpectralField> = active.iter().map(|&n| z.project(n)).collect();
    let higher: Vec<usize> = cfg.orders.iter().copied().filter(|&n| n > 1).collect();
    let mut nonlinear = Vec::new();
    if !higher.is_empty() && !active.is_empty() {
        let mut inputs: Vec<&SpectralField> = vec![z];
        inputs.extend(projected.iter());
        let cutoffs: Vec<usize> = higher
            .iter()
            .flat_map(|&n| std::iter::repeat_n(n * reference, active.len()))
            .collect();
        let band = higher.iter().max().unwrap() * reference;
        let count = active.len();
        nonlinear = pointwise(&inputs, &cutoffs, band, |x, out| {
            let h_ref = hermite(x[0], c_ref);
            for (k, &n) in higher.iter().enumerate() {
                for l in 0..count {
                    out[k * count + l] = h_ref[n] - hermite(x[1 + l], consts[l])[n];
                }
            }
        })?;
    }
    let mut out = Vec::with_capacity(cfg.orders.len() * cfg.levels.len());
    let mut rest = nonlinear.into_iter();
    for &n in &cfg.orders {
        let mut level_fields = projected.iter();
        for &level in &cfg.levels {
            if level == reference {
                out.push(SpectralField::zeros(n * reference));
            } else if n == 1 {
                out.push(z - level_fields.next().unwrap());
            } else {
                out.push(rest.next().unwrap());
            }
        }
    }
    Ok(out)
}

/// Self-convergence of `(Z̄ᴺ)^{:n:}` towards the reference level on shared
/// noise, in the `t`-weighted `C^{-α}` sup over snapshots.
pub fn run_linear_rate_study(cfg: &StudyConfig) -> Result<RateReport> {
    cfg.validate_linear()?;
    let clock = Instant::now();
    let steps = cfg.steps()?;
    let snaps = cfg.snapshot_steps()?;
    let top = cfg.orders.iter().max().unwrap() * cfg.reference_cutoff;
    let partition = partition_for(cfg, top)?;
    let labels: Vec<String> = cfg.orders.iter().map(|n| format!("order-{n}")).collect();
    let records = run_paths(cfg, |i, seed| {
        let path = sample_driving_path(seed, cfg.reference_cutoff, cfg.step, steps)?;
        let x0 = cfg.initial.sample(seed);
        let mut tracker = SupTracker::new(labels.len(), cfg.levels.len(), cfg);
        for (t, z) in zbar_snapshots(&path, &x0, cfg.reference_cutoff, &snaps)? {
            let diffs = wick_errors(&z, cfg)?;
            tracker.push(t, &norms(&diffs, cfg.levels.len(), cfg, &partition)?);
        }
        Ok(tracker.finish(i, seed))
    })?;
    Ok(RateReport {
        study: "linear".into(),
        version: VERSION.into(),
        config: cfg.clone(),
        series: aggregate(&labels, cfg, &records),
        paths: records,
        runtime: clock.elapsed(),
    })
}

/// Self-convergence of the full solution with the default solver options.
pub fn run_nonlinear_rate_study(cfg: &StudyConfig) -> Result<RateReport> {
    run_nonlinear_rate_study_with(cfg, &SolverOptions::default())
}

/// Self-convergence of `Xᴺ` towards the reference level on shared noise.
/// Series `full` measures `X^{ref} - Xᴺ`, series `projected` measures
/// `P_N X^{ref} - Xᴺ`.
pub fn run_nonlinear_rate_study_with(cfg: &StudyConfig, options: &SolverOptions) -> Result<RateReport> {
    cfg.validate_nonlinear(options)?;
    let clock = Instant::now();
    let steps = cfg.steps()?;
    let snaps = cfg.snapshot_steps()?;
    let partition = partition_for(cfg, cfg.reference_cutoff)?;
    let labels = vec!["full".to_string(), "projected".to_string()];
    let solver = |cutoff: usize| GalerkinConfig {
        cutoff,
        coefficients: cfg.coefficients,
        snapshot_steps: snaps.clone(),
        options: *options,
    };
    let records = run_paths(cfg, |i, seed| {
        let path = sample_driving_path(seed, cfg.reference_cutoff, cfg.step, steps)?;
        let x0 = cfg.initial.sample(seed);
        let reference = run_galerkin(&path, &x0, &solver(cfg.reference_cutoff))?;
        let coarse = cfg
            .levels
            .iter()
            .map(|&n| run_galerkin(&path, &x0, &solver(n)))
            .collect::<Result<Vec<_>>>()?;
        let mut tracker = SupTracker::new(labels.len(), cfg.levels.len(), cfg);
        for (k, snap) in reference.iter().enumerate() {
            let x_ref = snap.solution();
            let xs: Vec<SpectralField> = coarse.iter().map(|c| c[k].solution()).collect();
            let mut diffs: Vec<SpectralField> = xs.iter().map(|x| &x_ref - x).collect();
            diffs.extend(cfg.levels.iter().zip(&xs).map(|(&n, x)| &x_ref.project(n) - x));
            tracker.push(snap.time, &norms(&diffs, cfg.levels.len(), cfg, &partition)?);
        }
        Ok(tracker.finish(i, seed))
    })?;
    Ok(RateReport {
        study: "nonlinear".into(),
        version: VERSION.into(),
        config: cfg.clone(),
        series: aggregate(&labels, cfg, &records),
        paths: records,
        runtime: clock.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wick::CoefficientSet;

    fn small() -> StudyConfig {
        StudyConfig {
            levels: vec![2, 4, 8],
            reference_cutoff: 16,
            paths: 4,
            step: 0.125,
            horizon: 0.5,
            snapshots: 2,
            seed: 17,
            ..StudyConfig::default()
        }
    }

    #[test]
    fn reference_level_has_zero_error() {
        let cfg = StudyConfig {
            levels: vec![4, 8, 16],
            ..small()
        };
        let r = run_linear_rate_study(&cfg).unwrap();
        for s in &r.series {
            assert_eq!(s.levels[2].mean, 0.0, "{}", s.label);
            assert!(s.levels[0].mean > 0.0);
        }
        assert!(r.series[0].fit.is_none());
    }

    #[test]
    fn first_order_error_is_the_spectral_tail() {
        let cfg = StudyConfig {
            orders: vec![1],
            paths: 1,
            snapshots: 1,
            ..small()
        };
        let r = run_linear_rate_study(&cfg).unwrap();
        let seed = path_seed(cfg.seed, 0);
        let path = sample_driving_path(seed, 16, cfg.step, 4).unwrap();
        let (_, z) = zbar_snapshots(&path, &SpectralField::zeros(0), 16, &[4]).unwrap().pop().unwrap();
        let p = DyadicPartition::covering(16).unwrap();
        for (l, &n) in cfg.levels.iter().enumerate() {
            let d = &z - &z.project(n);
            let idx = BesovIndex::holder(-0.5);
            let direct = crate::besov::besov_norm_with(&d, idx, &p, BlockGrid::Oversampled(cfg.oversample)).unwrap().value;
            let got = r.paths[0].weighted[0][l];
            assert!((got - direct).abs() < 1e-12 * direct, "N = {n}: {got} vs {direct}");
            // Sampling loss against a fine grid stays small.
            let fine = crate::besov::besov_norm(&d, idx, &p, 256).unwrap().value;
            assert!(got <= fine * (1.0 + 1e-12) && got > 0.85 * fine, "N = {n}: {got} vs {fine}");
        }
    }

    #[test]
    fn wick_error_fields_match_direct_powers() {
        let seed = 5;
        let z = crate::noise::sample_stationary(8, seed);
        let cfg = StudyConfig {
            levels: vec![2, 4],
            reference_cutoff: 8,
            orders: vec![1, 2, 3],
            ..small()
        };
        let diffs = wick_errors(&z, &cfg).unwrap();
        assert_eq!(diffs.len(), 6);
        let c8 = renorm_constant(8);
        for (l, &n) in cfg.levels.iter().enumerate() {
            let zn = z.project(n);
            let cn = renorm_constant(n);
            let t_ref = crate::wick::wick_powers(&z, c8);
            let t_n = crate::wick::wick_powers(&zn, cn);
            let d2 = &t_ref.z2 - &t_n.z2;
            let d3 = &t_ref.z3 - &t_n.z3;
            assert!((&diffs[2 + l] - &d2).max_abs_coeff() < 1e-12);
            assert!((&diffs[4 + l] - &d3).max_abs_coeff() < 1e-12);
            assert!((&diffs[l] - &(&z - &zn)).max_abs_coeff() == 0.0);
        }
    }

    #[test]
    fn reruns_are_identical() {
        let cfg = small();
        let a = run_linear_rate_study(&cfg).unwrap();
        let b = run_linear_rate_study(&cfg).unwrap();
        assert_eq!(a.series, b.series);
        assert_eq!(a.paths, b.paths);
    }

    #[test]
    fn massive_linear_problem_matches_first_order() {
        let base = StudyConfig {
            regularity: 0.2,
            time_weight: 0.35,
            orders: vec![1],
            coefficients: CoefficientSet::new(0.0, -1.0, 0.0, 0.0),
            step: 0.01,
            horizon: 0.2,
            snapshots: 4,
            paths: 2,
            ..small()
        };
        let lin = run_linear_rate_study(&base).unwrap();
        let opts = SolverOptions {
            require_dissipative: false,
            ..SolverOptions::default()
        };
        let full = run_nonlinear_rate_study_with(&base, &opts).unwrap();
        for (a, b) in lin.paths.iter().zip(&full.paths) {
            for l in 0..base.levels.len() {
                let (x, y) = (a.weighted[0][l], b.weighted[0][l]);
                assert!((x - y).abs() < 1e-10 * x, "{x} vs {y}");
                assert!((a.tail[0][l] - b.tail[0][l]).abs() < 1e-10 * x);
            }
        }
        assert!(run_nonlinear_rate_study(&base).is_err());
    }

    #[test]
    fn divergence_names_the_path() {
        let cfg = StudyConfig {
            regularity: 0.2,
            time_weight: 0.35,
            coefficients: CoefficientSet::new(0.0, 200.0, 0.0, -1e-6),
            step: 0.01,
            horizon: 0.5,
            snapshots: 2,
            paths: 2,
            ..small()
        };
        let opts = SolverOptions {
            guard: 10.0,
            ..SolverOptions::default()
        };
        match run_nonlinear_rate_study_with(&cfg, &opts) {
            Err(Error::PathFailure { path: 0, source, .. }) => {
                assert!(matches!(*source, Error::Divergence { .. }), "{source}")
            }
            other => panic!("expected a path failure, got {other:?}"),
        }
    }

    #[test]
    fn projected_error_is_smaller_than_full() {
        let cfg = StudyConfig {
            regularity: 0.2,
            time_weight: 0.35,
            step: 0.01,
            horizon: 0.2,
            snapshots: 2,
            paths: 2,
            ..small()
        };
        let r = run_nonlinear_rate_study(&cfg).unwrap();
        let (full, proj) = (r.series("full").unwrap(), r.series("projected").unwrap());
        for (f, p) in full.levels.iter().zip(&proj.levels) {
            assert!(p.mean <= f.mean, "{} > {}", p.mean, f.mean);
            assert!(p.mean > 0.0);
        }
    }
}
