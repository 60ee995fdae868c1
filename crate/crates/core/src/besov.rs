//! Dyadic Littlewood-Paley blocks and Besov/Hölder norms of spectral fields.
//!
//! The radial profile `χ` equals 1 on `[0, lower]`, 0 on `[upper, ∞)` and
//! falls through a normalized integral of `exp(-1/(s(1-s)))` in between.
//! Blocks are `χ_{-1} = χ` and `χ_j(m) = θ(|m|/2ʲ)` with `θ(r) = χ(r/2) - χ(r)`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fft::fft_size;
use crate::spectrum::{to_grids, Mode, SpectralField};

const DEFAULT_LOWER: f64 = 9.0 / 8.0;
const DEFAULT_UPPER: f64 = 4.0 / 3.0;
const TABLE_INTERVALS: usize = 1024;

const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

fn bump(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        0.0
    } else {
        (-1.0 / (s * (1.0 - s))).exp()
    }
}

fn gauss5(a: f64, b: f64) -> f64 {
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    GL_NODES
        .iter()
        .zip(GL_WEIGHTS)
        .map(|(x, w)| w * bump(mid + half * x))
        .sum::<f64>()
        * half
}

/// Smooth monotone step on `[0, 1]`: 0 at 0, 1 at 1.
#[derive(Debug)]
struct SmoothStep {
    cumulative: Vec<f64>,
}

impl SmoothStep {
    fn new() -> Self {
        let h = 1.0 / TABLE_INTERVALS as f64;
        let mut cumulative = Vec::with_capacity(TABLE_INTERVALS + 1);
        let mut acc = 0.0;
        cumulative.push(0.0);
        for k in 0..TABLE_INTERVALS {
            acc += gauss5(k as f64 * h, (k + 1) as f64 * h);
            cumulative.push(acc);
        }
        SmoothStep { cumulative }
    }

    fn eval(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        if s >= 1.0 {
            return 1.0;
        }
        let h = 1.0 / TABLE_INTERVALS as f64;
        let k = ((s / h) as usize).min(TABLE_INTERVALS - 1);
        let part = self.cumulative[k] + gauss5(k as f64 * h, s);
        part / self.cumulative[TABLE_INTERVALS]
    }
}

/// Dyadic partition of unity with blocks `-1 ..= j_max`.
#[derive(Clone, Debug)]
pub struct DyadicPartition {
    j_max: i32,
    lower: f64,
    upper: f64,
    step: Arc<SmoothStep>,
}

/// Standard partition: transition of `χ` on `[9/8, 4/3]`.
pub fn build_partition(j_max: i32) -> Result<DyadicPartition> {
    DyadicPartition::with_transition(j_max, DEFAULT_LOWER, DEFAULT_UPPER)
}

impl DyadicPartition {
    /// Partition whose profile falls from 1 to 0 on `[lower, upper]`.
    /// Fails unless the support, covering and disjointness conditions hold.
    pub fn with_transition(j_max: i32, lower: f64, upper: f64) -> Result<Self> {
        if j_max < 0 {
            return Err(Error::Partition(format!("j_max must be nonnegative, got {j_max}")));
        }
        if j_max > 24 {
            return Err(Error::Partition(format!("j_max {j_max} is beyond any representable field")));
        }
        if !(lower > 0.0 && lower < upper) {
            return Err(Error::Partition(format!("transition [{lower}, {upper}] is empty")));
        }
        let p = DyadicPartition {
            j_max,
            lower,
            upper,
            step: Arc::new(SmoothStep::new()),
        };
        p.verify()?;
        Ok(p)
    }

    /// Smallest partition whose blocks cover every mode of a field at `cutoff`.
    pub fn covering(cutoff: usize) -> Result<Self> {
        let mut j = 0;
        while (cutoff as f64) > Self::reach(j, DEFAULT_LOWER) {
            j += 1;
        }
        build_partition(j)
    }

    fn reach(j_max: i32, lower: f64) -> f64 {
        2f64.powi(j_max + 1) * lower
    }

    pub fn j_max(&self) -> i32 {
        self.j_max
    }

    /// Largest `|m|` on which the blocks sum to one.
    pub fn coverage(&self) -> f64 {
        Self::reach(self.j_max, self.lower)
    }

    /// The profile `χ(r)`.
    pub fn chi(&self, r: f64) -> f64 {
        if r <= self.lower {
            1.0
        } else if r >= self.upper {
            0.0
        } else {
            1.0 - self.step.eval((r - self.lower) / (self.upper - self.lower))
        }
    }

    /// `θ(r) = χ(r/2) - χ(r)`.
    pub fn theta(&self, r: f64) -> f64 {
        self.chi(0.5 * r) - self.chi(r)
    }

    /// Block weight `χ_j` at radius `r`.
    pub fn weight_at(&self, j: i32, r: f64) -> f64 {
        if j < 0 {
            self.chi(r)
        } else {
            self.theta(r / 2f64.powi(j))
        }
    }

    pub fn weight(&self, j: i32, m: Mode) -> f64 {
        self.weight_at(j, m.norm())
    }

    /// Radius beyond which block `j` vanishes.
    pub fn block_radius(&self, j: i32) -> f64 {
        if j < 0 {
            self.upper
        } else {
            2f64.powi(j + 1) * self.upper
        }
    }

    /// Spectral cutoff of `Δ_j f` for a field at `cutoff`.
    pub fn block_cutoff(&self, j: i32, cutoff: usize) -> usize {
        (self.block_radius(j).ceil() as usize).min(cutoff)
    }

    fn verify(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Partition(msg));
        // Radial sampling of the support conditions.
        let samples = 4096;
        for k in 0..=samples {
            let r = 4.0 * k as f64 / samples as f64;
            let chi = self.chi(r);
            if r >= 4.0 / 3.0 && chi != 0.0 {
                return fail(format!("χ({r}) = {chi} outside B(0, 4/3)"));
            }
            let th = self.theta(r);
            if !(0.75..=8.0 / 3.0).contains(&r) && th != 0.0 {
                return fail(format!("θ({r}) = {th} outside the annulus [3/4, 8/3]"));
            }
            if !(0.0..=1.0).contains(&chi) {
                return fail(format!("χ({r}) = {chi} not in [0, 1]"));
            }
        }
        // Lattice checks on every attained |m|² up to the verified radius.
        let radius = 2f64.powi(self.j_max) * 9.0 / 8.0;
        let r2_max = (radius * radius).floor() as i64;
        let n = radius.floor() as i64;
        let mut attained = vec![false; r2_max as usize + 1];
        for m1 in 0..=n {
            for m2 in m1..=n {
                let r2 = m1 * m1 + m2 * m2;
                if r2 <= r2_max {
                    attained[r2 as usize] = true;
                }
            }
        }
        for (r2, _) in attained.iter().enumerate().filter(|(_, a)| **a) {
            let r = (r2 as f64).sqrt();
            let mut sum = 0.0;
            let mut live: Vec<i32> = Vec::new();
            for j in -1..=self.j_max {
                let w = self.weight_at(j, r);
                sum += w;
                if j >= 0 && w != 0.0 {
                    live.push(j);
                }
            }
            if (sum - 1.0).abs() >= 1e-12 {
                return fail(format!("weights sum to {sum} at |m|² = {r2}"));
            }
            if live.len() > 2 || (live.len() == 2 && live[1] - live[0] > 1) {
                return fail(format!("blocks {live:?} overlap at |m|² = {r2}"));
            }
        }
        Ok(())
    }

    /// Largest `|Σ_j χ_j(m) - 1|` over modes with `|m| ≤ 2^{j_max}·9/8`.
    pub fn unity_residual(&self) -> f64 {
        let radius = 2f64.powi(self.j_max) * 9.0 / 8.0;
        let n = radius.floor() as i64;
        let mut worst: f64 = 0.0;
        for m1 in 0..=n {
            for m2 in m1..=n {
                let r = ((m1 * m1 + m2 * m2) as f64).sqrt();
                if r > radius {
                    break;
                }
                let s: f64 = (-1..=self.j_max).map(|j| self.weight_at(j, r)).sum();
                worst = worst.max((s - 1.0).abs());
            }
        }
        worst
    }
}

/// `Δ_j f`: the multiplier `χ_j` applied to `f`, truncated to its support.
pub fn lp_block(f: &SpectralField, j: i32, partition: &DyadicPartition) -> Result<SpectralField> {
    if j < -1 || j > partition.j_max {
        return Err(Error::InvalidArgument(format!(
            "block {j} outside -1..={}",
            partition.j_max
        )));
    }
    let cut = partition.block_cutoff(j, f.cutoff());
    Ok(f.project(cut).apply_radial(|r2| partition.weight_at(j, (r2 as f64).sqrt())))
}

/// Regularity `α` with integrability `p` and summability `q`, both in `[1, ∞]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BesovIndex {
    pub alpha: f64,
    pub p: f64,
    pub q: f64,
}

impl BesovIndex {
    pub fn new(alpha: f64, p: f64, q: f64) -> Result<Self> {
        if !(p >= 1.0) || !(q >= 1.0) || !alpha.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "Besov index needs finite α and p, q ≥ 1, got ({alpha}, {p}, {q})"
            )));
        }
        Ok(BesovIndex { alpha, p, q })
    }

    /// `C^α = B^α_{∞,∞}`.
    pub fn holder(alpha: f64) -> Self {
        BesovIndex {
            alpha,
            p: f64::INFINITY,
            q: f64::INFINITY,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockNorm {
    pub j: i32,
    /// `‖Δ_j f‖_{L^p}`.
    pub lp: f64,
    /// `2^{jα}‖Δ_j f‖_{L^p}`.
    pub weighted: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BesovNorm {
    pub value: f64,
    pub blocks: Vec<BlockNorm>,
}

/// Grid policy for block sampling.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BlockGrid {
    /// Every block on the same `G x G` grid.
    Fixed(usize),
    /// Block of cutoff `B` on `fft_size(max(2B+1, ⌈factor·B⌉))` points per side.
    Oversampled(f64),
}

impl BlockGrid {
    fn size(self, cutoff: usize) -> usize {
        match self {
            BlockGrid::Fixed(g) => g,
            BlockGrid::Oversampled(factor) => {
                fft_size((2 * cutoff + 1).max((factor * cutoff as f64).ceil() as usize))
            }
        }
    }
}

/// Default block oversampling: four samples per shortest wavelength.
pub const DEFAULT_OVERSAMPLE: f64 = 4.0;

/// `‖f‖_{B^α_{p,q}}` with every block sampled on the `G x G` grid.
pub fn besov_norm(f: &SpectralField, idx: BesovIndex, partition: &DyadicPartition, g: usize) -> Result<BesovNorm> {
    let top = partition.block_cutoff(partition.j_max, f.cutoff());
    let required = 2 * top + 1;
    if g < required {
        return Err(Error::Resolution {
            grid: g,
            bandwidth: top,
            required,
        });
    }
    besov_norm_with(f, idx, partition, BlockGrid::Fixed(g))
}

/// `‖f‖_{B^α_{p,q}}` with a per-block grid policy.
pub fn besov_norm_with(
    f: &SpectralField,
    idx: BesovIndex,
    partition: &DyadicPartition,
    grid: BlockGrid,
) -> Result<BesovNorm> {
    Ok(besov_norms(&[f], idx, partition, grid)?.pop().unwrap())
}

/// Norms of several fields; blocks sharing a grid size are sampled two per
/// transform across fields.
pub fn besov_norms(
    fields: &[&SpectralField],
    idx: BesovIndex,
    partition: &DyadicPartition,
    grid: BlockGrid,
) -> Result<Vec<BesovNorm>> {
    for f in fields {
        if (f.cutoff() as f64) > partition.coverage() {
            return Err(Error::InvalidArgument(format!(
                "cutoff {} exceeds partition coverage {} (j_max = {})",
                f.cutoff(),
                partition.coverage(),
                partition.j_max
            )));
        }
    }
    // (field, block, sampled block, grid size)
    let mut pieces: Vec<(usize, i32, SpectralField, usize)> = Vec::new();
    for (k, f) in fields.iter().enumerate() {
        for j in -1..=partition.j_max {
            let block = lp_block(f, j, partition)?;
            if block.max_abs_coeff() == 0.0 {
                continue;
            }
            let g = grid.size(block.cutoff());
            pieces.push((k, j, block, g));
        }
    }
    pieces.sort_by_key(|p| p.3);
    let mut lps = vec![0.0; pieces.len()];
    let mut k = 0;
    while k < pieces.len() {
        let g = pieces[k].3;
        let mut end = k + 1;
        while end < pieces.len() && pieces[end].3 == g {
            end += 1;
        }
        let refs: Vec<&SpectralField> = pieces[k..end].iter().map(|p| &p.2).collect();
        for (slot, grid_field) in lps[k..end].iter_mut().zip(to_grids(&refs, g)?) {
            *slot = grid_field.lp_norm(idx.p);
        }
        k = end;
    }
    let mut per_field: Vec<Vec<BlockNorm>> = vec![Vec::new(); fields.len()];
    for ((field, j, _, _), &lp) in pieces.iter().zip(&lps) {
        per_field[*field].push(BlockNorm {
            j: *j,
            lp,
            weighted: 2f64.powf(*j as f64 * idx.alpha) * lp,
        });
    }
    Ok(per_field
        .into_iter()
        .map(|mut blocks| {
            blocks.sort_by_key(|b| b.j);
            let value = if idx.q.is_infinite() {
                blocks.iter().map(|b| b.weighted).fold(0.0, f64::max)
            } else {
                blocks.iter().map(|b| b.weighted.powf(idx.q)).sum::<f64>().powf(1.0 / idx.q)
            };
            BesovNorm { value, blocks }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn profile_values() {
        let p = build_partition(4).unwrap();
        assert_eq!(p.chi(0.0), 1.0);
        assert_eq!(p.theta(0.0), 0.0);
        assert_eq!(p.theta(2.0), 1.0);
        assert_eq!(p.theta(1.0), 0.0);
        let mid = p.chi(0.5 * (9.0 / 8.0 + 4.0 / 3.0));
        assert!((mid - 0.5).abs() < 1e-13, "{mid}");
        let mut prev = 1.0;
        for k in 0..=200 {
            let v = p.chi(1.1 + 0.25 * k as f64 / 200.0);
            assert!(v <= prev + 1e-15);
            prev = v;
        }
    }

    #[test]
    fn step_integral_is_accurate() {
        let s = SmoothStep::new();
        // Symmetry of the bump: step(s) + step(1 - s) = 1.
        for k in 1..50 {
            let x = k as f64 / 50.0;
            assert!((s.eval(x) + s.eval(1.0 - x) - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn unity_at_sample_mode() {
        let p = build_partition(4).unwrap();
        let m = Mode::new(3, 4);
        let s: f64 = (-1..=4).map(|j| p.weight(j, m)).sum();
        assert!((s - 1.0).abs() < 1e-14);
        assert!(p.unity_residual() < 1e-12);
    }

    #[test]
    fn bad_profiles_rejected() {
        assert!(matches!(DyadicPartition::with_transition(3, 1.0, 1.5), Err(Error::Partition(_))));
        assert!(matches!(DyadicPartition::with_transition(3, 0.6, 1.2), Err(Error::Partition(_))));
        assert!(build_partition(-1).is_err());
    }

    #[test]
    fn covering_levels() {
        assert_eq!(DyadicPartition::covering(2).unwrap().j_max(), 0);
        assert_eq!(DyadicPartition::covering(3).unwrap().j_max(), 1);
        assert_eq!(DyadicPartition::covering(64).unwrap().j_max(), 5);
    }

    #[test]
    fn block_examples() {
        let p = build_partition(3).unwrap();
        let m = Mode::new(2, 1);
        let e = SpectralField::single_mode(m, Complex64::new(0.5, 0.0));
        for j in -1..=3 {
            let b = lp_block(&e, j, &p).unwrap();
            assert!((b.get(m).re - 0.5 * p.weight(j, m)).abs() < 1e-15);
        }
        let c = SpectralField::constant(2.5);
        assert_eq!(lp_block(&c, -1, &p).unwrap().get(Mode::ZERO).re, 2.5);
        for j in 0..=3 {
            assert_eq!(lp_block(&c, j, &p).unwrap().max_abs_coeff(), 0.0);
        }
        assert!(lp_block(&c, 4, &p).is_err());
    }

    #[test]
    fn blocks_sum_to_field() {
        let p = build_partition(3).unwrap();
        let f = SpectralField::from_half(8, |m| Complex64::new(1.0 / (1.0 + m.norm()), 0.3 * m.m2 as f64));
        let mut acc = SpectralField::zeros(8);
        for j in -1..=3 {
            acc = acc.axpy(1.0, &lp_block(&f, j, &p).unwrap());
        }
        assert!((&acc - &f).max_abs_coeff() < 1e-14);
    }

    #[test]
    fn norm_examples() {
        let p = build_partition(3).unwrap();
        for alpha in [-0.5, 0.0, 0.3, 1.0] {
            let one = besov_norm(&SpectralField::constant(1.0), BesovIndex::holder(alpha), &p, 32).unwrap();
            assert!((one.value - 2f64.powf(-alpha)).abs() < 1e-14);
            let cos = SpectralField::single_mode(Mode::new(2, 0), Complex64::new(0.5, 0.0));
            let n = besov_norm(&cos, BesovIndex::holder(alpha), &p, 32).unwrap();
            assert!((n.value - 1.0).abs() < 1e-14, "{alpha}: {}", n.value);
            assert_eq!(n.blocks.len(), 1);
            assert_eq!(n.blocks[0].j, 0);
        }
    }

    #[test]
    fn under_resolved_grid_rejected() {
        let p = build_partition(3).unwrap();
        let f = SpectralField::from_half(8, |_| Complex64::new(1.0, 0.0));
        assert!(matches!(
            besov_norm(&f, BesovIndex::holder(0.0), &p, 12),
            Err(Error::Resolution { .. })
        ));
    }

    #[test]
    fn l2_besov_matches_parseval() {
        let p = build_partition(3).unwrap();
        let f = SpectralField::from_half(9, |m| Complex64::new((m.m1 as f64).sin(), (m.m2 as f64).cos()));
        let n = besov_norm(&f, BesovIndex::new(0.0, 2.0, 2.0).unwrap(), &p, 64).unwrap();
        let want: f64 = (-1..=3)
            .map(|j| lp_block(&f, j, &p).unwrap().l2_norm_sq())
            .sum::<f64>()
            .sqrt();
        assert!((n.value - want).abs() < 1e-12);
    }

    #[test]
    fn monotone_in_regularity() {
        let p = build_partition(4).unwrap();
        let f = SpectralField::from_half(20, |m| Complex64::new(1.0 / (1.0 + m.norm_sq() as f64), 0.0));
        let lo = besov_norm_with(&f, BesovIndex::holder(-0.3), &p, BlockGrid::Oversampled(4.0)).unwrap();
        let hi = besov_norm_with(&f, BesovIndex::holder(0.4), &p, BlockGrid::Oversampled(4.0)).unwrap();
        for (a, b) in lo.blocks.iter().zip(&hi.blocks).filter(|(a, _)| a.j >= 0) {
            assert!(a.weighted <= b.weighted);
        }
        assert!(lo.value <= hi.value);
    }

    #[test]
    fn batched_norms_match_single_norms() {
        let p = build_partition(4).unwrap();
        let fields: Vec<SpectralField> = (0..3)
            .map(|k| SpectralField::from_half(6 + 5 * k, |m| Complex64::new((m.m1 * (k as i64 + 1)) as f64 % 3.0, 0.1 * m.m2 as f64)))
            .collect();
        let refs: Vec<&SpectralField> = fields.iter().collect();
        let idx = BesovIndex::holder(-0.2);
        let grid = BlockGrid::Oversampled(4.0);
        let batched = besov_norms(&refs, idx, &p, grid).unwrap();
        for (f, b) in fields.iter().zip(&batched) {
            let single = besov_norm_with(f, idx, &p, grid).unwrap();
            assert_eq!(single.blocks.len(), b.blocks.len());
            assert!((single.value - b.value).abs() < 1e-13 * single.value);
        }
    }

    #[test]
    fn index_validation() {
        assert!(BesovIndex::new(0.1, 0.5, 1.0).is_err());
        assert!(BesovIndex::new(0.1, 2.0, f64::INFINITY).is_ok());
    }
}
