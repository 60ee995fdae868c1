//! Space-time white noise in Fourier space and exact Ornstein-Uhlenbeck
//! transitions of the stochastic heat equation's modes.
//!
//! Every Gaussian draw is addressed by `(seed, stream, mode)`: the stream is
//! the time-step index and the mode's position in a cutoff-independent
//! square-shell enumeration fixes the word offset inside a ChaCha8 stream.
//! A coarse level therefore reads a prefix of exactly the same numbers as
//! the reference level, which is the coupling `ξᴺ = P_N ξ`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::spectrum::{Mode, SpectralField};

/// Stream reserved for the stationary initial sample `Z_{-∞,0}`.
const STATIONARY_STREAM: u64 = u64::MAX;
/// Stream reserved for random initial data.
const INITIAL_DATA_STREAM: u64 = u64::MAX - 1;
/// `u32` words consumed per enumerated mode (two `u64` for Box-Muller).
const WORDS_PER_MODE: u128 = 4;

/// Position of `m` in the square-shell enumeration (shell `s = max(|m1|,|m2|)`
/// starts at `(2s-1)²`).
pub fn shell_index(m: Mode) -> u64 {
    let s = m.m1.abs().max(m.m2.abs());
    if s == 0 {
        return 0;
    }
    let base = ((2 * s - 1) * (2 * s - 1)) as u64;
    let off = if m.m2 == s {
        m.m1 + s
    } else if m.m2 == -s {
        (2 * s + 1) + (m.m1 + s)
    } else if m.m1 == -s {
        2 * (2 * s + 1) + (m.m2 + s - 1)
    } else {
        2 * (2 * s + 1) + (2 * s - 1) + (m.m2 + s - 1)
    };
    base + off as u64
}

fn shell(s: i64) -> impl Iterator<Item = Mode> {
    let top = (-s..=s).map(move |m1| Mode::new(m1, s));
    let bottom = (-s..=s).map(move |m1| Mode::new(m1, -s));
    let left = (-s + 1..s).map(move |m2| Mode::new(-s, m2));
    let right = (-s + 1..s).map(move |m2| Mode::new(s, m2));
    let zero = (s == 0).then_some(Mode::ZERO);
    zero.into_iter()
        .chain(top.chain(bottom).chain(left).chain(right).filter(move |_| s > 0))
}

fn uniform_open(x: u64) -> f64 {
    ((x >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn uniform_closed(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard complex normal (`E|ζ|² = 1`) from two raw words; real `N(0,1)` at `m = 0`.
fn box_muller(a: u64, b: u64, zero_mode: bool) -> Complex64 {
    let r = (-2.0 * uniform_open(a).ln()).sqrt();
    let (s, c) = (2.0 * PI * uniform_closed(b)).sin_cos();
    if zero_mode {
        Complex64::new(r * c, 0.0)
    } else {
        Complex64::new(r * c * FRAC_1_SQRT_2, r * s * FRAC_1_SQRT_2)
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Standard draws `ζ_m`, `|m| ≤ cutoff`, conjugate paired, from one stream.
pub fn standard_draws(seed: u64, stream: u64, cutoff: usize) -> SpectralField {
    let mut rng = stream_rng(seed, stream);
    let mut out = SpectralField::zeros(cutoff);
    for s in 0..=cutoff as i64 {
        for m in shell(s) {
            let a = rng.next_u64();
            let b = rng.next_u64();
            if !m.in_ball(cutoff) || !(m.is_canonical() || m == Mode::ZERO) {
                continue;
            }
            let z = box_muller(a, b, m == Mode::ZERO);
            out.set_raw(m, z);
            if m != Mode::ZERO {
                out.set_raw(-m, z.conj());
            }
        }
    }
    out
}

/// The single draw at `m` (canonical representative), addressed directly.
pub fn draw_at(seed: u64, stream: u64, m: Mode) -> Complex64 {
    let flip = !(m.is_canonical() || m == Mode::ZERO);
    let key = if flip { -m } else { m };
    let mut rng = stream_rng(seed, stream);
    rng.set_word_pos(WORDS_PER_MODE * shell_index(key) as u128);
    let a = rng.next_u64();
    let b = rng.next_u64();
    let z = box_muller(a, b, key == Mode::ZERO);
    if flip {
        z.conj()
    } else {
        z
    }
}

/// Per-path seed derived from a study seed and a path index (splitmix64).
pub fn path_seed(base: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stationary law of `Z^N_{-∞,0}`: `E|ẑ_m|² = 1/(2 I_m)`.
pub fn sample_stationary(cutoff: usize, seed: u64) -> SpectralField {
    standard_draws(seed, STATIONARY_STREAM, cutoff)
        .apply_radial(|r2| (0.5 / decay_rate(r2, true)).sqrt())
}

/// Random band-limited initial data `x̂_m = ζ_m (1 + |m|²)^{-decay/2}`.
pub fn sample_initial_data(cutoff: usize, decay: f64, seed: u64) -> SpectralField {
    standard_draws(seed, INITIAL_DATA_STREAM, cutoff).apply_radial(|r2| (1.0 + r2 as f64).powf(-0.5 * decay))
}

/// One realization of the driving noise on a time grid of `steps` blocks of
/// length `step`, at reference resolution `ref_cutoff`. Increments are
/// regenerated from the seed on demand.
#[derive(Clone, Debug, PartialEq)]
pub struct NoisePath {
    seed: u64,
    ref_cutoff: usize,
    step: f64,
    steps: usize,
    amplitude: f64,
}

pub fn sample_driving_path(seed: u64, ref_cutoff: usize, step: f64, steps: usize) -> Result<NoisePath> {
    if ref_cutoff < 1 {
        return invalid("reference cutoff must be at least 1");
    }
    if !(step > 0.0) || !step.is_finite() {
        return invalid(format!("step must be positive, got {step}"));
    }
    if steps < 1 {
        return invalid("a path needs at least one step");
    }
    Ok(NoisePath {
        seed,
        ref_cutoff,
        step,
        steps,
        amplitude: 1.0,
    })
}

impl NoisePath {
    /// A path with the same time grid whose increments are all zero.
    pub fn silent(ref_cutoff: usize, step: f64, steps: usize) -> Result<NoisePath> {
        let mut p = sample_driving_path(0, ref_cutoff, step, steps)?;
        p.amplitude = 0.0;
        Ok(p)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn ref_cutoff(&self) -> usize {
        self.ref_cutoff
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_silent(&self) -> bool {
        self.amplitude == 0.0
    }

    /// Standard increments `ζ_{k,m}` for `|m| ≤ cutoff`.
    pub fn increment(&self, k: usize, cutoff: usize) -> Result<SpectralField> {
        if k >= self.steps {
            return invalid(format!("increment {k} beyond path length {}", self.steps));
        }
        if cutoff > self.ref_cutoff {
            return invalid(format!("cutoff {cutoff} exceeds path reference {}", self.ref_cutoff));
        }
        if self.is_silent() {
            return Ok(SpectralField::zeros(cutoff));
        }
        Ok(standard_draws(self.seed, k as u64, cutoff))
    }

    /// `Z^N_{-∞,0}` for this path; zero for a silent path.
    pub fn stationary_start(&self, cutoff: usize) -> SpectralField {
        if self.is_silent() {
            SpectralField::zeros(cutoff)
        } else {
            sample_stationary(cutoff, self.seed)
        }
    }
}

/// Current Fourier state of `Z` with the generator it evolves under.
#[derive(Clone, Debug, PartialEq)]
pub struct OuState {
    pub field: SpectralField,
    pub time: f64,
    /// `A = Δ - I` when set, `Δ` otherwise.
    pub massive: bool,
    next_block: usize,
}

impl OuState {
    pub fn new(field: SpectralField, massive: bool) -> Self {
        OuState {
            field,
            time: 0.0,
            massive,
            next_block: 0,
        }
    }

    /// First increment block this state has not consumed yet.
    pub fn next_block(&self) -> usize {
        self.next_block
    }
}

/// Decay rate of mode `m` under the chosen generator.
pub(crate) fn decay_rate(r2: i64, massive: bool) -> f64 {
    let lap = 4.0 * PI * PI * r2 as f64;
    if massive {
        1.0 + lap
    } else {
        lap
    }
}

/// Standard deviation of the exact transition noise over a step `h`.
pub(crate) fn transition_sd(r2: i64, massive: bool, h: f64) -> f64 {
    let rate = decay_rate(r2, massive);
    if rate == 0.0 {
        h.sqrt()
    } else {
        (-(-2.0 * rate * h).exp_m1() / (2.0 * rate)).sqrt()
    }
}

/// Exact transition `ẑ_m ← e^{-λ_m h} ẑ_m + η_m` using increment block `k`.
pub fn ou_transition(state: &OuState, h: f64, path: &NoisePath, k: usize) -> Result<OuState> {
    if !(h > 0.0) {
        return invalid(format!("step must be positive, got {h}"));
    }
    if (h - path.step).abs() > 1e-12 * path.step {
        return invalid(format!("step {h} does not match the path's step {}", path.step));
    }
    if k < state.next_block {
        return Err(Error::IncrementReused {
            requested: k,
            next: state.next_block,
        });
    }
    let noise = path.increment(k, state.field.cutoff())?;
    let massive = state.massive;
    let mut field = state.field.apply_radial(|r2| (-decay_rate(r2, massive) * h).exp());
    let scale = path.amplitude;
    if scale != 0.0 {
        let shaped = noise.apply_radial(|r2| scale * transition_sd(r2, massive, h));
        field = field.axpy(1.0, &shaped);
    }
    Ok(OuState {
        field,
        time: state.time + h,
        massive,
        next_block: k + 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::ball_modes;
    use crate::wick::renorm_constant;

    #[test]
    fn shell_enumeration_is_a_bijection() {
        let c = 6i64;
        let mut seen = vec![false; ((2 * c + 1) * (2 * c + 1)) as usize];
        for s in 0..=c {
            for (k, m) in shell(s).enumerate() {
                let idx = shell_index(m) as usize;
                assert_eq!(idx, if s == 0 { 0 } else { ((2 * s - 1) * (2 * s - 1)) as usize + k });
                assert!(!seen[idx]);
                seen[idx] = true;
            }
        }
        assert!(seen.iter().all(|&b| b));
    }

    #[test]
    fn draws_are_addressable_and_prefix_consistent() {
        let fine = standard_draws(42, 3, 9);
        let coarse = standard_draws(42, 3, 4);
        assert_eq!(fine.project(4), coarse);
        for m in [Mode::new(0, 0), Mode::new(3, -2), Mode::new(-5, 1), Mode::new(0, 7)] {
            assert_eq!(draw_at(42, 3, m), fine.get(m));
        }
        assert!(fine.check_symmetry(0.0).is_ok());
        assert_eq!(fine.get(Mode::ZERO).im, 0.0);
    }

    #[test]
    fn same_seed_same_path() {
        let a = sample_driving_path(7, 8, 0.1, 4).unwrap();
        let b = sample_driving_path(7, 8, 0.1, 4).unwrap();
        assert_eq!(a.increment(2, 8).unwrap(), b.increment(2, 8).unwrap());
        assert_ne!(a.increment(2, 8).unwrap(), a.increment(1, 8).unwrap());
    }

    #[test]
    fn stationary_zero_mode_variance() {
        let n = 20_000;
        let mean_sq: f64 = (0..n)
            .map(|s| sample_stationary(0, s).get(Mode::ZERO).re.powi(2))
            .sum::<f64>()
            / n as f64;
        // Var of the estimator: 2σ⁴/n with σ² = 1/2.
        let se = (2.0 * 0.25 / n as f64).sqrt();
        assert!((mean_sq - 0.5).abs() < 4.0 * se);
    }

    #[test]
    fn stationary_pointwise_variance_and_mean() {
        let n = 10_000;
        let cutoff = 1;
        let samples: Vec<f64> = (0..n).map(|s| sample_stationary(cutoff, 1000 + s).eval([0.0, 0.0])).collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|v| v * v).sum::<f64>() / n as f64;
        let r = renorm_constant(cutoff);
        assert!((r - 0.5494090).abs() < 1e-7);
        assert!(mean.abs() < 3.0 * (r / n as f64).sqrt());
        assert!((var - r).abs() < 3.0 * r * (2.0 / n as f64).sqrt());
    }

    #[test]
    fn silent_transition_is_heat_decay() {
        let path = NoisePath::silent(4, 0.05, 3).unwrap();
        let f = SpectralField::from_half(4, |m| Complex64::new(1.0 + m.m1 as f64, m.m2 as f64));
        let s0 = OuState::new(f.clone(), true);
        let s1 = ou_transition(&s0, 0.05, &path, 0).unwrap();
        for m in ball_modes(4) {
            let want = f.get(m) * (-0.05 * m.mass_eigenvalue()).exp();
            assert!((s1.field.get(m) - want).norm() < 1e-15);
        }
        assert!((s1.time - 0.05).abs() < 1e-15);
    }

    #[test]
    fn reused_block_is_rejected() {
        let path = sample_driving_path(1, 4, 0.1, 5).unwrap();
        let s0 = OuState::new(SpectralField::zeros(4), true);
        let s1 = ou_transition(&s0, 0.1, &path, 2).unwrap();
        assert!(matches!(
            ou_transition(&s1, 0.1, &path, 2),
            Err(Error::IncrementReused { requested: 2, next: 3 })
        ));
        assert!(ou_transition(&s1, 0.2, &path, 3).is_err());
    }

    #[test]
    fn transition_variances() {
        let h = 0.3;
        let sd0 = transition_sd(0, true, h);
        assert!((sd0 * sd0 - (1.0 - (-2.0 * h).exp()) / 2.0).abs() < 1e-15);
        let sd0_massless = transition_sd(0, false, h);
        assert!((sd0_massless * sd0_massless - h).abs() < 1e-15);
    }

    #[test]
    fn iterated_transitions_reach_stationary_variance() {
        let paths = 10_000u64;
        let h = 0.5;
        let steps = 12;
        let probe = [Mode::ZERO, Mode::new(1, 0), Mode::new(1, 1)];
        let mut acc = [0.0f64; 3];
        let mut acc2 = [0.0f64; 3];
        for p in 0..paths {
            let path = sample_driving_path(path_seed(99, p), 2, h, steps).unwrap();
            let mut st = OuState::new(SpectralField::zeros(2), true);
            for k in 0..steps {
                st = ou_transition(&st, h, &path, k).unwrap();
            }
            for (i, m) in probe.iter().enumerate() {
                let v = st.field.get(*m).norm_sqr();
                acc[i] += v;
                acc2[i] += v * v;
            }
        }
        for (i, m) in probe.iter().enumerate() {
            let mean = acc[i] / paths as f64;
            let var = acc2[i] / paths as f64 - mean * mean;
            let se = (var / paths as f64).sqrt();
            let target = (1.0 - (-2.0 * m.mass_eigenvalue() * h * steps as f64).exp()) / (2.0 * m.mass_eigenvalue());
            assert!((mean - target).abs() < 3.0 * se, "mode {m:?}: {mean} vs {target} (se {se})");
            assert!((target - 0.5 / m.mass_eigenvalue()).abs() < 1e-5);
        }
    }

    #[test]
    fn projected_path_commutes_with_linear_evolution() {
        let path = sample_driving_path(5, 12, 0.01, 6).unwrap();
        let start = path.stationary_start(12);
        let mut fine = OuState::new(start.clone(), true);
        let mut coarse = OuState::new(start.project(5), true);
        for k in 0..6 {
            fine = ou_transition(&fine, 0.01, &path, k).unwrap();
            coarse = ou_transition(&coarse, 0.01, &path, k).unwrap();
        }
        let diff = &fine.field.project(5) - &coarse.field;
        assert!(diff.max_abs_coeff() < 1e-12);
    }

    #[test]
    fn increments_at_distinct_addresses_uncorrelated() {
        let n = 10_000u64;
        let (a, b) = (Mode::new(1, 0), Mode::new(0, 1));
        let mut sxy = 0.0;
        let mut sxx = 0.0;
        let mut syy = 0.0;
        for p in 0..n {
            let seed = path_seed(3, p);
            let x = draw_at(seed, 0, a).re;
            let y = draw_at(seed, 1, b).re;
            sxy += x * y;
            sxx += x * x;
            syy += y * y;
        }
        let corr = sxy / (sxx * syy).sqrt();
        assert!(corr.abs() < 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn fourth_moment_within_hypercontractive_bound() {
        let n = 20_000u64;
        let m = Mode::new(2, 1);
        let (mut s2, mut s4) = (0.0, 0.0);
        for p in 0..n {
            let z = sample_stationary(3, path_seed(17, p)).get(m).re;
            s2 += z * z;
            s4 += z.powi(4);
        }
        let (m2, m4) = (s2 / n as f64, s4 / n as f64);
        assert!(m4 <= 3.0 * m2 * m2 * 1.1);
    }
}
