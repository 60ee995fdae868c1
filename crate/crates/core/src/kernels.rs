//! Lattice convolutions of the kernels `K(m) = (1 + |m|²)^{γ-1}` and exact
//! chaos spectral densities of Wick powers of the stationary field.
//!
//! Full convolutions run over the box `|l|_∞ ≤ L` for every intermediate
//! wavenumber; the neglected remainder carries an upper bound from an
//! integral comparison (each lattice point owns the unit square around it,
//! whose points lie within `c = √2/2`).

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::fft::{fft2, fft_size, Direction};
use crate::noise::decay_rate;
use crate::spectrum::{ball_modes, Mode};

const CELL: f64 = FRAC_1_SQRT_2;

/// `K(m) = (1 + |m|²)^{γ-1}` with lattice truncation radius `L`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelSpec {
    pub gamma: f64,
    pub radius: usize,
}

impl KernelSpec {
    pub fn new(gamma: f64, radius: usize) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return invalid(format!("γ must lie in [0, 1), got {gamma}"));
        }
        if radius < 4 {
            return invalid(format!("truncation radius {radius} too small"));
        }
        Ok(KernelSpec { gamma, radius })
    }

    fn decay(&self) -> f64 {
        1.0 - self.gamma
    }

    #[inline]
    pub fn eval(&self, m: Mode) -> f64 {
        self.radial((m.norm_sq() as f64).sqrt())
    }

    #[inline]
    fn radial(&self, r: f64) -> f64 {
        (1.0 + r * r).powf(-self.decay())
    }
}

/// Which intermediate wavenumbers a convolution ranges over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Variant {
    Full,
    /// Every intermediate `|l_i| ≤ N`.
    Leq(usize),
    /// `Full - Leq(N)`.
    Greater(usize),
}

/// A truncated lattice sum and an upper bound on what the truncation dropped.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelValue {
    pub value: f64,
    pub tail_bound: f64,
}

/// Square array indexed by modes with `|m|_∞ ≤ half`.
#[derive(Clone, Debug)]
struct Dense {
    half: i64,
    data: Vec<f64>,
}

impl Dense {
    fn new(half: i64) -> Self {
        let side = (2 * half + 1) as usize;
        Dense {
            half,
            data: vec![0.0; side * side],
        }
    }

    #[inline]
    fn idx(&self, m1: i64, m2: i64) -> usize {
        let side = 2 * self.half + 1;
        ((m1 + self.half) * side + (m2 + self.half)) as usize
    }

    #[inline]
    fn get(&self, m: Mode) -> f64 {
        if m.m1.abs() > self.half || m.m2.abs() > self.half {
            0.0
        } else {
            self.data[self.idx(m.m1, m.m2)]
        }
    }

    fn set(&mut self, m1: i64, m2: i64, v: f64) {
        let k = self.idx(m1, m2);
        self.data[k] = v;
    }
}

/// `∫_a^b g` by 5-point Gauss-Legendre on geometrically growing panels.
fn integrate(g: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    const X: [f64; 5] = [-0.906_179_845_938_664, -0.538_469_310_105_683, 0.0, 0.538_469_310_105_683, 0.906_179_845_938_664];
    const W: [f64; 5] = [0.236_926_885_056_189, 0.478_628_670_499_366, 0.568_888_888_888_889, 0.478_628_670_499_366, 0.236_926_885_056_189];
    let mut total = 0.0;
    let mut lo = a;
    while lo < b {
        let hi = (lo + (0.125 * lo).max(0.25)).min(b);
        let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        total += half * X.iter().zip(W).map(|(x, w)| w * g(mid + half * x)).sum::<f64>();
        lo = hi;
    }
    total
}

/// Upper end for tail integrals; the integrands decay at least like `r^{-5/3}`.
const FAR: f64 = 1e12;

/// `Σ_{|l| > R} f(|l|)` for `f` nonincreasing on `[R - 2c, ∞)`:
/// bounded by `2π ∫_{R-c}^∞ r f(r - c) dr`.
fn lattice_tail(f: impl Fn(f64) -> f64, r_min: f64) -> f64 {
    2.0 * PI * integrate(|r| r * f(r - CELL), r_min - CELL, FAR)
}

impl KernelSpec {
    /// Upper bound on `Σ_{|l| ≤ R} K(l)`.
    fn ball_sum_bound(&self, r: f64) -> f64 {
        let s = self.decay();
        let radial = if (s - 1.0).abs() < 1e-12 {
            0.5 * (1.0 + r * r).ln()
        } else {
            ((1.0 + r * r).powf(1.0 - s) - 1.0) / (2.0 * (1.0 - s))
        };
        let linear = if r <= 1.0 { r } else { 1.0 + (1.0 - r.powf(1.0 - 2.0 * s)) / (2.0 * s - 1.0) };
        1.0 + PI * CELL * CELL + 2.0 * PI * (radial + CELL * linear)
    }

    /// Upper bound on `Σ_{|l| > R} K(l)²`, `R > 2c`.
    fn square_tail_bound(&self, r: f64) -> f64 {
        let s = self.decay();
        let u0 = r - 2.0 * CELL;
        2.0 * PI * ((1.0 + u0 * u0).powf(1.0 - 2.0 * s) / (2.0 * (2.0 * s - 1.0)) + CELL * u0.powf(1.0 - 4.0 * s) / (4.0 * s - 1.0))
    }

    /// Upper bound on `(K⋆K)(y)` for `|y| = r ≥ 4`.
    fn pair_bound(&self, r: f64) -> f64 {
        2.0 * (1.0 + 0.25 * r * r).powf(-self.decay()) * self.ball_sum_bound(0.5 * r) + self.square_tail_bound(0.5 * r)
    }

    /// Bound on what the box truncation drops from `K⋆ⁿK(m)` at `|m| = radius`.
    fn tail_bound(&self, n: u32, radius: f64) -> Result<f64> {
        let l = self.radius as f64;
        if l - 2.0 * CELL - radius < 4.0 {
            return invalid(format!("|m| = {radius} too close to the truncation radius {l}"));
        }
        let k = |r: f64| self.radial(r);
        Ok(match n {
            1 => 0.0,
            2 => lattice_tail(|r| k((r - radius).max(0.0)) * k(r), l),
            3 => {
                // Pairs with the first or the second intermediate outside the box.
                let first = lattice_tail(|r| k(r) * self.pair_bound(r - radius), l);
                let second = lattice_tail(|r| k((r - radius).max(0.0)) * self.pair_bound(r), l);
                first + second
            }
            _ => return invalid(format!("convolution order {n} not in 1..=3")),
        })
    }
}

/// `K⋆ⁿK` on the box `|m|_∞ ≤ L` with every intermediate in the same box.
#[derive(Clone, Debug)]
pub struct FullTable {
    spec: KernelSpec,
    n: u32,
    table: Dense,
}

impl FullTable {
    pub fn build(spec: KernelSpec, n: u32) -> Result<Self> {
        if !(1..=3).contains(&n) {
            return invalid(format!("convolution order {n} not in 1..=3"));
        }
        let l = spec.radius as i64;
        let mut base = Dense::new(l);
        for m1 in -l..=l {
            for m2 in -l..=l {
                base.set(m1, m2, spec.eval(Mode::new(m1, m2)));
            }
        }
        let mut table = base.clone();
        if n > 1 {
            // Cyclic convolution is exact on the box once P ≥ 4L + 1.
            let p = fft_size(4 * spec.radius + 1);
            let pi = p as i64;
            let wrap = |x: i64| x.rem_euclid(pi) as usize;
            let mut kernel = vec![Complex64::new(0.0, 0.0); p * p];
            for i in 0..p {
                let x1 = if (i as i64) > pi / 2 { i as i64 - pi } else { i as i64 };
                for j in 0..p {
                    let x2 = if (j as i64) > pi / 2 { j as i64 - pi } else { j as i64 };
                    kernel[i * p + j] = Complex64::new(spec.eval(Mode::new(x1, x2)), 0.0);
                }
            }
            fft2(&mut kernel, p, Direction::Forward);
            let scale = 1.0 / (p * p) as f64;
            for _ in 1..n {
                let mut buf = vec![Complex64::new(0.0, 0.0); p * p];
                for m1 in -l..=l {
                    for m2 in -l..=l {
                        buf[wrap(m1) * p + wrap(m2)] = Complex64::new(table.get(Mode::new(m1, m2)), 0.0);
                    }
                }
                fft2(&mut buf, p, Direction::Forward);
                for (b, k) in buf.iter_mut().zip(&kernel) {
                    *b *= k;
                }
                fft2(&mut buf, p, Direction::Inverse);
                let mut next = Dense::new(l);
                for m1 in -l..=l {
                    for m2 in -l..=l {
                        next.set(m1, m2, buf[wrap(m1) * p + wrap(m2)].re * scale);
                    }
                }
                table = next;
            }
        }
        Ok(FullTable { spec, n, table })
    }

    pub fn value(&self, m: Mode) -> Result<KernelValue> {
        let tail_bound = self.spec.tail_bound(self.n, m.norm())?;
        Ok(KernelValue {
            value: self.table.get(m),
            tail_bound,
        })
    }
}

/// `K⋆ⁿ_{≤N}K` by exact finite sums over the ball `|l| ≤ N`.
#[derive(Clone, Debug)]
pub struct LeqTable {
    spec: KernelSpec,
    n: u32,
    cutoff: usize,
    /// `K⋆^{n-1}_{≤N}K` on the ball.
    inner: Vec<(Mode, f64)>,
}

impl LeqTable {
    pub fn build(spec: KernelSpec, n: u32, cutoff: usize) -> Result<Self> {
        if !(1..=3).contains(&n) {
            return invalid(format!("convolution order {n} not in 1..=3"));
        }
        let ball: Vec<Mode> = ball_modes(cutoff).collect();
        let mut inner: Vec<(Mode, f64)> = ball.iter().map(|&l| (l, spec.eval(l))).collect();
        if n == 3 {
            inner = ball
                .iter()
                .map(|&l2| (l2, ball.iter().map(|&l1| spec.eval(l2 - l1) * spec.eval(l1)).sum()))
                .collect();
        }
        Ok(LeqTable { spec, n, cutoff, inner })
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn value(&self, m: Mode) -> f64 {
        if self.n == 1 {
            return self.spec.eval(m);
        }
        self.inner.iter().map(|&(l, v)| self.spec.eval(m - l) * v).sum()
    }
}

/// One value of `K⋆ⁿK`, `K⋆ⁿ_{≤N}K` or `K⋆ⁿ_{>N}K` at `m`. Fails when the
/// truncation bound exceeds `tolerance`.
pub fn iterated_convolution(spec: &KernelSpec, n: u32, m: Mode, variant: Variant, tolerance: Option<f64>) -> Result<KernelValue> {
    let leq = |cut| -> Result<f64> { Ok(LeqTable::build(*spec, n, cut)?.value(m)) };
    let out = match variant {
        Variant::Leq(cut) => {
            let value = leq(cut)?;
            return Ok(KernelValue { value, tail_bound: 0.0 });
        }
        Variant::Full => FullTable::build(*spec, n)?.value(m)?,
        Variant::Greater(cut) => {
            let full = FullTable::build(*spec, n)?.value(m)?;
            KernelValue {
                value: full.value - leq(cut)?,
                tail_bound: full.tail_bound,
            }
        }
    };
    if let Some(tol) = tolerance {
        if out.tail_bound > tol {
            return Err(Error::TailTolerance {
                tail: out.tail_bound,
                tolerance: tol,
                radius: spec.radius,
            });
        }
    }
    Ok(out)
}

/// Claimed decay of the convolutions.
fn bound_exponent(n: u32, gamma: f64, eps: f64) -> f64 {
    if gamma > 0.0 {
        1.0 - n as f64 * gamma
    } else {
        1.0 - eps
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KernelRow {
    pub n: u32,
    pub gamma: f64,
    pub cutoff: usize,
    pub m1: i64,
    pub m2: i64,
    pub variant: Variant,
    pub lhs: f64,
    pub tail: f64,
    pub bound: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KernelReport {
    pub rows: Vec<KernelRow>,
}

impl KernelReport {
    /// Largest ratio among rows of a variant kind at one cutoff.
    pub fn max_ratio(&self, cutoff: usize, pick: fn(&Variant) -> bool) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.cutoff == cutoff && pick(&r.variant))
            .map(|r| r.ratio)
            .fold(0.0, f64::max)
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n,gamma,N,m1,m2,variant,lhs,tail,bound,ratio")?;
        for r in &self.rows {
            let v = match r.variant {
                Variant::Full => "full",
                Variant::Leq(_) => "leq",
                Variant::Greater(_) => "greater",
            };
            writeln!(
                w,
                "{},{:e},{},{},{},{},{:e},{:e},{:e},{:e}",
                r.n, r.gamma, r.cutoff, r.m1, r.m2, v, r.lhs, r.tail, r.bound, r.ratio
            )?;
        }
        Ok(())
    }
}

/// Modes at which bounds are checked.
#[derive(Clone, Debug, PartialEq)]
pub enum ModeSet {
    /// Every `m` with `0 ≤ m2 ≤ m1` and `|m| ≤ factor·N` (the kernels are
    /// invariant under the symmetries of the square lattice).
    Octant(f64),
    Explicit(Vec<Mode>),
}

impl ModeSet {
    fn modes(&self, cutoff: usize) -> Vec<Mode> {
        match self {
            ModeSet::Explicit(v) => v.clone(),
            ModeSet::Octant(f) => {
                let r = f * cutoff as f64;
                let r2 = (r * r).floor() as i64;
                let n = r.floor() as i64;
                (0..=n)
                    .flat_map(|m1| (0..=m1).map(move |m2| Mode::new(m1, m2)))
                    .filter(|m| m.norm_sq() <= r2)
                    .collect()
            }
        }
    }
}

/// Ratios of `K⋆ⁿK`, `K⋆ⁿ_{≤N}K` and `K⋆ⁿ_{>N}K` to their claimed decay
/// for each `N` and mode. Needs `γ ∈ [0, 1/n)` and `ε ∈ (0, 1)` when `γ = 0`.
pub fn verify_kernel_bounds(
    n: u32,
    gamma: f64,
    eps: f64,
    cutoffs: &[usize],
    modes: &ModeSet,
    radius: Option<usize>,
) -> Result<KernelReport> {
    if !(1..=3).contains(&n) {
        return invalid(format!("convolution order {n} not in 1..=3"));
    }
    if !(gamma >= 0.0 && gamma * (n as f64) < 1.0) {
        return invalid(format!("γ = {gamma} outside [0, 1/{n})"));
    }
    if gamma == 0.0 && !(eps > 0.0 && eps < 1.0) {
        return invalid(format!("ε = {eps} outside (0, 1)"));
    }
    let per_cutoff: Vec<(usize, Vec<Mode>)> = cutoffs.iter().map(|&c| (c, modes.modes(c))).collect();
    let max_m = per_cutoff
        .iter()
        .flat_map(|(_, ms)| ms.iter().map(|m| m.norm()))
        .fold(0.0, f64::max);
    let default_radius = (8.0 * max_m).ceil() as usize + 16;
    let spec = KernelSpec::new(gamma, radius.unwrap_or(default_radius).max(64))?;
    let full = FullTable::build(spec, n)?;
    let e = bound_exponent(n, gamma, eps);
    let mut rows = Vec::new();
    for (cutoff, ms) in &per_cutoff {
        let leq = LeqTable::build(spec, n, *cutoff)?;
        for &m in ms {
            let f = full.value(m)?;
            let lq = leq.value(m);
            let decay = (1.0 + m.norm_sq() as f64).powf(-e);
            let gt_bound = if m.norm() >= *cutoff as f64 {
                decay
            } else {
                (1.0 + (*cutoff * *cutoff) as f64).powf(-e)
            };
            let mut push = |variant, lhs: f64, tail: f64, bound: f64| {
                rows.push(KernelRow {
                    n,
                    gamma,
                    cutoff: *cutoff,
                    m1: m.m1,
                    m2: m.m2,
                    variant,
                    lhs,
                    tail,
                    bound,
                    ratio: lhs / bound,
                })
            };
            push(Variant::Full, f.value, f.tail_bound, decay);
            push(Variant::Leq(*cutoff), lq, 0.0, decay);
            push(Variant::Greater(*cutoff), f.value - lq, f.tail_bound, gt_bound);
        }
    }
    Ok(KernelReport { rows })
}

/// `ρ_n(m) = n! Σ_{l₁+…+l_n = m, |l_i| ≤ N} Π e^{-I_{l_i} τ} / (2 I_{l_i})` on
/// the ball `|m| ≤ nN`, the spectral density of `(Zᴺ)^{:n:}` at time lag `τ`.
#[derive(Clone, Debug)]
pub struct ChaosDensity {
    n: u32,
    table: Dense,
}

impl ChaosDensity {
    pub fn build(n: u32, cutoff: usize, tau: f64) -> Result<Self> {
        if !(1..=3).contains(&n) {
            return invalid(format!("chaos order {n} not in 1..=3"));
        }
        if !(tau >= 0.0) {
            return invalid(format!("time lag must be nonnegative, got {tau}"));
        }
        let factor: Vec<(Mode, f64)> = ball_modes(cutoff)
            .map(|l| {
                let rate = decay_rate(l.norm_sq(), true);
                (l, (-rate * tau).exp() / (2.0 * rate))
            })
            .collect();
        let mut table = Dense::new(cutoff as i64);
        for &(l, v) in &factor {
            table.set(l.m1, l.m2, v);
        }
        for k in 2..=n {
            let half = (k as usize * cutoff) as i64;
            let mut next = Dense::new(half);
            for m1 in -half..=half {
                for m2 in -half..=half {
                    let m = Mode::new(m1, m2);
                    let v: f64 = factor.iter().map(|&(l, g)| g * table.get(m - l)).sum();
                    next.set(m1, m2, v);
                }
            }
            table = next;
        }
        let fact: f64 = (1..=n).map(|k| k as f64).product();
        table.data.iter_mut().for_each(|v| *v *= fact);
        Ok(ChaosDensity { n, table })
    }

    pub fn order(&self) -> u32 {
        self.n
    }

    pub fn density(&self, m: Mode) -> f64 {
        self.table.get(m)
    }

    /// `Σ_m w(m) ρ_n(m)` over the support.
    pub fn weighted_sum(&self, w: impl Fn(Mode) -> f64) -> f64 {
        let h = self.table.half;
        let mut total = 0.0;
        for m1 in -h..=h {
            for m2 in -h..=h {
                let v = self.table.data[self.table.idx(m1, m2)];
                if v != 0.0 {
                    total += w(Mode::new(m1, m2)) * v;
                }
            }
        }
        total
    }
}

/// Single value of the chaos density.
pub fn chaos_spectral_density(n: u32, cutoff: usize, m: Mode, tau: f64) -> Result<f64> {
    Ok(ChaosDensity::build(n, cutoff, tau)?.density(m))
}
