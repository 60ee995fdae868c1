use serde::{Deserialize, Serialize};

use crate::dynamics::SolverOptions;
use crate::error::{invalid, Result};
use crate::noise::sample_initial_data;
use crate::spectrum::SpectralField;
use crate::wick::CoefficientSet;

/// Initial condition `X₀`, drawn per path when random.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialData {
    Zero,
    /// `amplitude · ζ_m (1 + |m|²)^{-decay/2}` for `|m| ≤ cutoff`.
    BandLimited { cutoff: usize, decay: f64, amplitude: f64 },
}

impl InitialData {
    pub fn sample(&self, seed: u64) -> SpectralField {
        match *self {
            InitialData::Zero => SpectralField::zeros(0),
            InitialData::BandLimited {
                cutoff,
                decay,
                amplitude,
            } => sample_initial_data(cutoff, decay, seed).scale(amplitude),
        }
    }
}

/// Parameters of a self-convergence study. Every level is measured against
/// `reference_cutoff` on the same noise path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    /// Errors are measured in `C^{-regularity}`.
    pub regularity: f64,
    /// Exponent `w` of the time weight `t^w` in the weighted sup.
    pub time_weight: f64,
    pub levels: Vec<usize>,
    pub reference_cutoff: usize,
    pub paths: usize,
    /// Time step of the noise path (and of the solver).
    pub step: f64,
    pub horizon: f64,
    pub seed: u64,
    pub coefficients: CoefficientSet,
    pub initial: InitialData,
    /// Evenly spaced snapshot times in `(0, horizon]`.
    pub snapshots: usize,
    /// Tail window `t ≥ tail_start · horizon` for the unweighted sup.
    pub tail_start: f64,
    /// Finest block; defaults to the smallest partition covering the error fields.
    pub j_max: Option<i32>,
    pub oversample: f64,
    /// Wick orders measured by the linear study.
    pub orders: Vec<usize>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            regularity: 0.5,
            time_weight: 0.0,
            levels: vec![4, 8, 16, 32],
            reference_cutoff: 128,
            paths: 64,
            step: 1.0 / 32.0,
            horizon: 1.0,
            seed: 0,
            coefficients: CoefficientSet::new(0.0, 1.0, 0.0, -1.0),
            initial: InitialData::Zero,
            snapshots: 32,
            tail_start: 0.25,
            j_max: None,
            oversample: crate::besov::DEFAULT_OVERSAMPLE,
            orders: vec![1, 2, 3],
        }
    }
}

impl StudyConfig {
    /// Number of path steps covering the horizon.
    pub fn steps(&self) -> Result<usize> {
        if !(self.step > 0.0 && self.horizon > 0.0) || !self.step.is_finite() || !self.horizon.is_finite() {
            return invalid(format!("step {} and horizon {} must be positive", self.step, self.horizon));
        }
        let ratio = self.horizon / self.step;
        let steps = ratio.round();
        if (ratio - steps).abs() > 1e-9 * ratio || steps < 1.0 {
            return invalid(format!("horizon {} is not a multiple of step {}", self.horizon, self.step));
        }
        Ok(steps as usize)
    }

    /// Step indices of the snapshots, `round(i · steps / S)` for `i = 1..=S`.
    pub fn snapshot_steps(&self) -> Result<Vec<usize>> {
        let steps = self.steps()?;
        let s = self.snapshots;
        if s < 1 || s > steps {
            return invalid(format!("snapshot count {s} not in 1..={steps}"));
        }
        Ok((1..=s).map(|i| (i * steps + s / 2) / s).collect())
    }

    fn validate_common(&self) -> Result<()> {
        self.snapshot_steps()?;
        if self.levels.is_empty() {
            return invalid("at least one level is required");
        }
        if self.levels[0] < 1 || self.levels.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("levels must be positive and strictly increasing");
        }
        if *self.levels.last().unwrap() > self.reference_cutoff {
            return invalid(format!("levels must not exceed the reference cutoff {}", self.reference_cutoff));
        }
        if self.paths < 1 {
            return invalid("at least one path is required");
        }
        if !(0.0..=1.0).contains(&self.tail_start) {
            return invalid(format!("tail_start {} outside [0, 1]", self.tail_start));
        }
        if !(self.time_weight >= 0.0) || !self.time_weight.is_finite() {
            return invalid(format!("time weight {} must be nonnegative", self.time_weight));
        }
        if !(self.oversample > 0.0) || !self.oversample.is_finite() {
            return invalid(format!("oversampling factor {} must be positive", self.oversample));
        }
        if let InitialData::BandLimited { decay, amplitude, .. } = self.initial {
            if !decay.is_finite() || !amplitude.is_finite() {
                return invalid("initial data parameters must be finite");
            }
        }
        Ok(())
    }

    pub fn validate_linear(&self) -> Result<()> {
        self.validate_common()?;
        if !(self.regularity > 0.0 && self.regularity < 1.0) {
            return invalid(format!("regularity {} outside (0, 1)", self.regularity));
        }
        if self.orders.is_empty() || self.orders.iter().any(|n| !(1..=3).contains(n)) {
            return invalid("orders must be a nonempty subset of {1, 2, 3}");
        }
        if self.orders.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("orders must be strictly increasing");
        }
        Ok(())
    }

    pub fn validate_nonlinear(&self, options: &SolverOptions) -> Result<()> {
        self.validate_common()?;
        let alpha = self.regularity;
        if !(alpha > 0.0 && alpha < 2.0 / 9.0) {
            return invalid(format!("regularity {alpha} outside (0, 2/9)"));
        }
        if !(self.time_weight > 1.5 * alpha) {
            return invalid(format!("time weight {} must exceed 3/2 · {alpha}", self.time_weight));
        }
        if options.require_dissipative && !(self.coefficients.a3 < 0.0) {
            return invalid(format!("cubic coefficient {} must be negative", self.coefficients.a3));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_grid() {
        let cfg = StudyConfig {
            step: 1e-3,
            horizon: 0.5,
            snapshots: 32,
            ..StudyConfig::default()
        };
        let s = cfg.snapshot_steps().unwrap();
        assert_eq!(s.len(), 32);
        assert_eq!(*s.last().unwrap(), 500);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(s[0], 16);
    }

    #[test]
    fn rejects_bad_configs() {
        let base = StudyConfig::default();
        base.validate_linear().unwrap();
        let bad = |c: StudyConfig| c.validate_linear().is_err();
        assert!(bad(StudyConfig { levels: vec![8, 4], ..base.clone() }));
        assert!(bad(StudyConfig { levels: vec![256], ..base.clone() }));
        assert!(bad(StudyConfig { regularity: 1.0, ..base.clone() }));
        assert!(bad(StudyConfig { orders: vec![4], ..base.clone() }));
        assert!(bad(StudyConfig { step: 0.3, ..base.clone() }));
        assert!(bad(StudyConfig { snapshots: 64, ..base.clone() }));
        let nl = StudyConfig {
            regularity: 0.2,
            time_weight: 0.35,
            ..base.clone()
        };
        let opts = SolverOptions::default();
        nl.validate_nonlinear(&opts).unwrap();
        assert!(StudyConfig { time_weight: 0.3, ..nl.clone() }.validate_nonlinear(&opts).is_err());
        assert!(StudyConfig { regularity: 0.25, ..nl.clone() }.validate_nonlinear(&opts).is_err());
        let flat = StudyConfig {
            coefficients: CoefficientSet::new(0.0, -1.0, 0.0, 0.0),
            ..nl
        };
        assert!(flat.validate_nonlinear(&opts).is_err());
        let relaxed = SolverOptions {
            require_dissipative: false,
            ..opts
        };
        flat.validate_nonlinear(&relaxed).unwrap();
    }

    #[test]
    fn initial_data_draws() {
        assert_eq!(InitialData::Zero.sample(3).max_abs_coeff(), 0.0);
        let spec = InitialData::BandLimited {
            cutoff: 6,
            decay: 2.0,
            amplitude: 0.5,
        };
        let a = spec.sample(11);
        assert_eq!(a, spec.sample(11));
        assert_ne!(a, spec.sample(12));
        assert_eq!(a.cutoff(), 6);
        a.check_symmetry(0.0).unwrap();
    }
}
