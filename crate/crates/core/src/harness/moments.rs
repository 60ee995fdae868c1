use rayon::prelude::*;
use serde::Serialize;

use crate::besov::DyadicPartition;
use crate::error::{invalid, Result};
use crate::kernels::ChaosDensity;
use crate::noise::{path_seed, sample_stationary};
use crate::spectrum::{ball_modes, SpectralField};
use crate::wick::{hermite, renorm_constant, wick_powers};

/// Passing threshold on `|z|`.
pub const Z_THRESHOLD: f64 = 3.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentRow {
    pub check: String,
    pub estimate: f64,
    pub target: f64,
    pub stderr: f64,
    pub z: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentTable {
    pub cutoff: usize,
    pub samples: usize,
    pub seed: u64,
    /// Constant used to form the Wick powers.
    pub constant: f64,
    pub rows: Vec<MomentRow>,
}

impl MomentTable {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn row(&self, check: &str) -> Option<&MomentRow> {
        self.rows.iter().find(|r| r.check == check)
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "check,estimate,target,stderr,z,pass")?;
        for r in &self.rows {
            writeln!(w, "{},{:e},{:e},{:e},{:e},{}", r.check, r.estimate, r.target, r.stderr, r.z, r.pass)?;
        }
        Ok(())
    }
}

/// Block energy `E‖Δ_j (Zᴺ)^{:n:}‖²_{L²}` estimated by Monte Carlo against the
/// chaos-density oracle `Σ_m θ_j(m)² ρ_n(m)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChaosBlockRow {
    pub order: usize,
    pub block: i32,
    pub estimate: f64,
    pub stderr: f64,
    pub oracle: f64,
    pub rel_error: f64,
}

/// Sample mean and its standard error.
fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

struct BlockWeights {
    order: usize,
    block: i32,
    /// `θ_j(m)²` over the ball of the order's output.
    weights: Vec<f64>,
}

fn block_weights(cutoff: usize, orders: &[usize], blocks: &[i32]) -> Result<(DyadicPartition, Vec<BlockWeights>)> {
    let partition = DyadicPartition::covering(3 * cutoff)?;
    let mut out = Vec::new();
    for &n in orders {
        for &j in blocks {
            if j < -1 || j > partition.j_max() {
                return invalid(format!("block {j} outside -1..={}", partition.j_max()));
            }
            let weights = ball_modes(n * cutoff).map(|m| partition.weight(j, m).powi(2)).collect();
            out.push(BlockWeights { order: n, block: j, weights });
        }
    }
    Ok((partition, out))
}

fn block_energy(f: &SpectralField, w: &[f64]) -> f64 {
    f.modes().zip(w).map(|((_, c), w)| w * c.norm_sqr()).sum()
}

/// Per-sample statistics: pointwise values at the origin and block energies.
struct SampleStats {
    point: f64,
    energies: Vec<f64>,
}

fn sample_stats(cutoff: usize, seed: u64, i: usize, constant: f64, weights: &[BlockWeights]) -> SampleStats {
    let z = sample_stationary(cutoff, path_seed(seed, i as u64));
    let needs_powers = weights.iter().any(|w| w.order > 1);
    let triple = needs_powers.then(|| wick_powers(&z, constant));
    let energies = weights
        .iter()
        .map(|bw| {
            let f = match (bw.order, &triple) {
                (1, _) => &z,
                (2, Some(t)) => &t.z2,
                (_, Some(t)) => &t.z3,
                _ => unreachable!(),
            };
            block_energy(f, &bw.weights)
        })
        .collect();
    SampleStats {
        point: z.eval([0.0, 0.0]),
        energies,
    }
}

fn collect(cutoff: usize, samples: usize, seed: u64, constant: f64, weights: &[BlockWeights]) -> Vec<SampleStats> {
    (0..samples)
        .into_par_iter()
        .map(|i| sample_stats(cutoff, seed, i, constant, weights))
        .collect()
}

fn chaos_rows(stats: &[SampleStats], weights: &[BlockWeights], cutoff: usize) -> Result<Vec<ChaosBlockRow>> {
    let mut densities: Vec<(usize, ChaosDensity)> = Vec::new();
    let mut rows = Vec::with_capacity(weights.len());
    for (k, bw) in weights.iter().enumerate() {
        if !densities.iter().any(|(n, _)| *n == bw.order) {
            densities.push((bw.order, ChaosDensity::build(bw.order as u32, cutoff, 0.0)?));
        }
        let rho = &densities.iter().find(|(n, _)| *n == bw.order).unwrap().1;
        let oracle: f64 = ball_modes(bw.order * cutoff)
            .zip(&bw.weights)
            .map(|(m, w)| w * rho.density(m))
            .sum();
        let e: Vec<f64> = stats.iter().map(|s| s.energies[k]).collect();
        let (estimate, stderr) = mean_se(&e);
        rows.push(ChaosBlockRow {
            order: bw.order,
            block: bw.block,
            estimate,
            stderr,
            oracle,
            rel_error: (estimate - oracle).abs() / oracle,
        });
    }
    Ok(rows)
}

/// Monte-Carlo block energies of `(Zᴺ)^{:n:}` for stationary samples against
/// the chaos-density oracle.
pub fn chaos_block_check(cutoff: usize, orders: &[usize], blocks: &[i32], samples: usize, seed: u64) -> Result<Vec<ChaosBlockRow>> {
    if samples < 2 {
        return invalid("at least two samples are required");
    }
    if orders.iter().any(|n| !(1..=3).contains(n)) {
        return invalid("orders must lie in 1..=3");
    }
    let (_, weights) = block_weights(cutoff, orders, blocks)?;
    let stats = collect(cutoff, samples, seed, renorm_constant(cutoff), &weights);
    chaos_rows(&stats, &weights, cutoff)
}

/// Moment checks at level `N` with the correct constant `𝔯ᴺ`.
pub fn moment_suite(cutoff: usize, samples: usize, seed: u64) -> Result<MomentTable> {
    moment_suite_with_constant(cutoff, samples, seed, renorm_constant(cutoff))
}

/// Moment checks with the Wick powers formed at `constant`; targets always
/// use the true `𝔯ᴺ`.
pub fn moment_suite_with_constant(cutoff: usize, samples: usize, seed: u64, constant: f64) -> Result<MomentTable> {
    if samples < 1000 {
        return invalid(format!("moment suite needs at least 1000 samples, got {samples}"));
    }
    if cutoff < 1 {
        return invalid("cutoff must be at least 1");
    }
    let r = renorm_constant(cutoff);
    let (_, weights) = block_weights(cutoff, &[1, 2, 3], &[1])?;
    let stats = collect(cutoff, samples, seed, constant, &weights);
    let mut rows = Vec::new();
    let mut push = |check: String, values: Vec<f64>, target: f64| {
        let (estimate, stderr) = mean_se(&values);
        let z = (estimate - target) / stderr;
        rows.push(MomentRow {
            check,
            estimate,
            target,
            stderr,
            z,
            pass: z.is_finite() && z.abs() < Z_THRESHOLD,
        });
    };
    let h: Vec<[f64; 4]> = stats.iter().map(|s| hermite(s.point, constant)).collect();
    push("stationary-variance".into(), stats.iter().map(|s| s.point * s.point).collect(), r);
    push("wick-mean".into(), h.iter().map(|v| v[2]).collect(), 0.0);
    push("hermite2-second-moment".into(), h.iter().map(|v| v[2] * v[2]).collect(), 2.0 * r * r);
    push("hermite3-second-moment".into(), h.iter().map(|v| v[3] * v[3]).collect(), 6.0 * r * r * r);
    for row in chaos_rows(&stats, &weights, cutoff)? {
        let k = weights
            .iter()
            .position(|w| w.order == row.order && w.block == row.block)
            .unwrap();
        push(
            format!("chaos-order{}-block{}", row.order, row.block),
            stats.iter().map(|s| s.energies[k]).collect(),
            row.oracle,
        );
    }
    Ok(MomentTable {
        cutoff,
        samples,
        seed,
        constant,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_and_reports_finite_scores() {
        let t = moment_suite(4, 4000, 21).unwrap();
        assert_eq!(t.rows.len(), 7);
        for r in &t.rows {
            assert!(r.z.is_finite(), "{}", r.check);
            assert!(r.stderr > 0.0);
        }
        assert!(t.all_pass(), "{:#?}", t.rows);
    }

    #[test]
    fn halved_constant_is_detected() {
        let r = renorm_constant(4);
        let t = moment_suite_with_constant(4, 2000, 3, 0.5 * r).unwrap();
        let row = t.row("wick-mean").unwrap();
        assert!(row.z.abs() > 10.0, "{}", row.z);
        assert!((row.estimate - 0.5 * r).abs() < 5.0 * row.stderr);
        assert!(row.z.is_finite() && !row.pass);
    }

    #[test]
    fn too_few_samples() {
        assert!(moment_suite(4, 999, 0).is_err());
    }

    #[test]
    fn chaos_oracle_of_first_order_is_the_weighted_variance() {
        let rows = chaos_block_check(4, &[1], &[0], 200, 1).unwrap();
        let p = DyadicPartition::covering(12).unwrap();
        let direct: f64 = ball_modes(4)
            .map(|m| p.weight(0, m).powi(2) / (2.0 * m.mass_eigenvalue()))
            .sum();
        assert!((rows[0].oracle - direct).abs() < 1e-14 * direct);
    }

    #[test]
    fn deterministic() {
        let a = chaos_block_check(3, &[2], &[1], 50, 9).unwrap();
        let b = chaos_block_check(3, &[2], &[1], 50, 9).unwrap();
        assert_eq!(a, b);
    }
}
