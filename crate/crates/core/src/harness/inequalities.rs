use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::besov::{besov_norm_with, BesovIndex, BlockGrid, DyadicPartition, DEFAULT_OVERSAMPLE};
use crate::dynamics::heat_propagate;
use crate::error::{invalid, Result};
use crate::noise::{path_seed, standard_draws};
use crate::spectrum::{multiply, SpectralField};

/// Growth of the sup ratio allowed when the sample is doubled.
pub const STABILITY_FACTOR: f64 = 2.0;

/// Largest observed ratio `lhs / rhs` of one inequality over a sample and
/// over the same sample doubled.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InequalityRow {
    pub name: String,
    pub samples: usize,
    pub max_ratio: f64,
    pub max_ratio_doubled: f64,
    pub stable: bool,
}

/// Random real field with a random cutoff in `4..=max_cutoff` and spectral
/// decay `(1+|m|²)^{-s/2}`, `s ∈ [-1, 2]`.
pub fn random_band_limited(seed: u64, max_cutoff: usize) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cutoff = rng.gen_range(4..=max_cutoff.max(4));
    let s: f64 = rng.gen_range(-1.0..2.0);
    let amplitude: f64 = 10f64.powf(rng.gen_range(-2.0..2.0));
    standard_draws(seed, 0, cutoff).apply_radial(|r2| amplitude * (1.0 + r2 as f64).powf(-0.5 * s))
}

fn holder(f: &SpectralField, alpha: f64) -> Result<f64> {
    norm(f, BesovIndex::holder(alpha))
}

fn norm(f: &SpectralField, idx: BesovIndex) -> Result<f64> {
    let p = DyadicPartition::covering(f.cutoff().max(1))?;
    Ok(besov_norm_with(f, idx, &p, BlockGrid::Oversampled(DEFAULT_OVERSAMPLE))?.value)
}

type Ratio = fn(u64) -> Result<f64>;

/// `t^{δ/2} ‖e^{tA} f‖_{α+δ} ≤ C ‖f‖_α` with `α = -1/2`, `δ = 1`.
fn schauder(seed: u64) -> Result<f64> {
    let f = random_band_limited(seed, 24);
    let t = 10f64.powf(ChaCha8Rng::seed_from_u64(seed ^ 1).gen_range(-3.0..0.0));
    let smooth = heat_propagate(&f, t, true)?;
    Ok(t.sqrt() * holder(&smooth, 0.5)? / holder(&f, -0.5)?)
}

/// `‖f‖_{α - 2/p} ≤ C ‖f‖_{B^α_{p,q}}` in two dimensions, `α = 1/2`, `p = q = 2`.
fn embedding(seed: u64) -> Result<f64> {
    let f = random_band_limited(seed, 24);
    Ok(holder(&f, -0.5)? / norm(&f, BesovIndex::new(0.5, 2.0, 2.0)?)?)
}

/// `‖fg‖_β ≤ C ‖f‖_α ‖g‖_β` with `α = 0.7 > 0 > β = -0.4`, `α + β > 0`.
fn multiplicative(seed: u64) -> Result<f64> {
    let f = random_band_limited(seed, 24);
    let g = random_band_limited(path_seed(seed, 1), 24);
    let fg = multiply(&f, &g, f.cutoff() + g.cutoff());
    Ok(holder(&fg, -0.4)? / (holder(&f, 0.7)? * holder(&g, -0.4)?))
}

/// `N^δ ‖f - P_N f‖_{α-δ} ≤ C ‖f‖_α` with `α = 0`, `δ = 1/2`.
fn projection(seed: u64) -> Result<f64> {
    let f = random_band_limited(seed, 32);
    let n = ChaCha8Rng::seed_from_u64(seed ^ 2).gen_range(1..f.cutoff());
    let tail = &f - &f.project(n);
    Ok((n as f64).sqrt() * holder(&tail, -0.5)? / holder(&f, 0.0)?)
}

/// Sup ratios of the Schauder, embedding, multiplicative and projection
/// inequalities over `samples` random fields, and over `2 · samples`.
pub fn besov_inequality_suite(samples: usize, seed: u64) -> Result<Vec<InequalityRow>> {
    if samples < 1 {
        return invalid("at least one sample is required");
    }
    let checks: [(&str, Ratio); 4] = [
        ("schauder", schauder),
        ("embedding", embedding),
        ("multiplicative", multiplicative),
        ("projection", projection),
    ];
    let mut rows = Vec::new();
    for (k, (name, ratio)) in checks.iter().enumerate() {
        let base = path_seed(seed, k as u64);
        let values = (0..2 * samples)
            .map(|i| ratio(path_seed(base, i as u64)))
            .collect::<Result<Vec<f64>>>()?;
        let max_ratio = values[..samples].iter().copied().fold(0.0, f64::max);
        let max_ratio_doubled = values.iter().copied().fold(0.0, f64::max);
        let finite = values.iter().all(|v| v.is_finite() && *v > 0.0);
        rows.push(InequalityRow {
            name: name.to_string(),
            samples,
            max_ratio,
            max_ratio_doubled,
            stable: finite && max_ratio_doubled <= STABILITY_FACTOR * max_ratio,
        });
    }
    Ok(rows)
}
