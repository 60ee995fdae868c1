//! Heat flows, the remainder nonlinearity and the split solver `X = Z̄ + Y`.
//!
//! `Z̄` solves the linear massive equation and is sampled exactly through the
//! noise module. `Y` solves `∂Y = ΔY + Ψ(Y, Z̄)` from `Y(0) = 0` with an
//! exponential Euler step that treats the nonlinearity at the left endpoint.

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::fft::{fft2, fft_size, Direction};
use crate::noise::{decay_rate, ou_transition, NoisePath, OuState};
use crate::spectrum::{ball_modes, pointwise, Mode, SpectralField};
use crate::wick::{hermite, renorm_constant, wick_powers, CoefficientSet, WickTriple};

/// Default ceiling on `sup |Y|` before a run is declared divergent.
pub const DEFAULT_GUARD: f64 = 1e6;

/// `e^{tA} f` (massive, multiplier `e^{-t I_m}`) or `e^{tΔ} f` (massless).
pub fn heat_propagate(f: &SpectralField, t: f64, massive: bool) -> Result<SpectralField> {
    if !(t >= 0.0) {
        return invalid(format!("propagation time must be nonnegative, got {t}"));
    }
    Ok(f.apply_radial(|r2| (-decay_rate(r2, massive) * t).exp()))
}

/// `P_N S(t) X₀`, the Galerkin level of the initial-data flow.
pub fn initial_flow(x0: &SpectralField, t: f64, cutoff: usize) -> Result<SpectralField> {
    heat_propagate(&x0.project(cutoff), t, true)
}

/// `Σ_j a_j Σ_k C(j,k) y^k z^{:j-k:} + z` at one point, with `h = hermite(z, 𝔯)`.
#[inline]
fn psi_point(a: &CoefficientSet, y: f64, z: f64, z2: f64, z3: f64) -> f64 {
    let y2 = y * y;
    a.a0 + a.a1 * (z + y)
        + a.a2 * (z2 + 2.0 * y * z + y2)
        + a.a3 * (z3 + 3.0 * y * z2 + 3.0 * y2 * z + y2 * y)
        + z
}

/// `Ψ(y, z)` truncated to `|m| ≤ out_cutoff`, alias-free.
pub fn psi(y: &SpectralField, z: &WickTriple, a: &CoefficientSet, out_cutoff: usize) -> SpectralField {
    let (ny, nz) = (y.cutoff(), z.z.cutoff().max(z.cutoff));
    let band = (3 * ny.max(nz)).max(z.z3.cutoff()).max(z.z2.cutoff() + ny);
    let out = pointwise(&[y, &z.z, &z.z2, &z.z3], &[out_cutoff.min(band)], band, |x, o| {
        o[0] = psi_point(a, x[0], x[1], x[2], x[3]);
    })
    .expect("grid sized from the inputs");
    out.into_iter().next().unwrap().with_cutoff(out_cutoff)
}

/// The remainder `Yᴺ` at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct RemainderState {
    pub y: SpectralField,
    pub time: f64,
    pub cutoff: usize,
}

impl RemainderState {
    /// `Y(0) = 0` at level `cutoff`.
    pub fn new(cutoff: usize) -> Self {
        RemainderState {
            y: SpectralField::zeros(cutoff),
            time: 0.0,
            cutoff,
        }
    }
}

/// Per-mode factors of one exponential Euler step under `Δ`:
/// `(e^{-λh}, h·φ₁(λh))` with `φ₁(x) = (1 - e^{-x})/x`, `φ₁(0) = 1`.
fn euler_factors(r2: i64, h: f64) -> (f64, f64) {
    let lam = decay_rate(r2, false);
    if lam == 0.0 {
        (1.0, h)
    } else {
        ((-lam * h).exp(), -(-lam * h).exp_m1() / lam)
    }
}

/// `y ← e^{hΔ} y + h φ₁(hΔ) P_N Ψ(y, z)`.
pub fn step_remainder(state: &RemainderState, z: &WickTriple, a: &CoefficientSet, h: f64) -> Result<RemainderState> {
    if !(h > 0.0) {
        return invalid(format!("step must be positive, got {h}"));
    }
    let forcing = psi(&state.y, z, a, state.cutoff);
    let mut y = state.y.with_cutoff(state.cutoff);
    for m in ball_modes(state.cutoff) {
        let (decay, weight) = euler_factors(m.norm_sq(), h);
        let k = y.index(m);
        y.coeffs_mut()[k] = decay * y.coeffs()[k] + weight * forcing.get(m);
    }
    Ok(RemainderState {
        y,
        time: state.time + h,
        cutoff: state.cutoff,
    })
}

/// Knobs shared by the remainder solvers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Ceiling on `sup |Y|`; exceeding it (or a NaN) is a divergence.
    pub guard: f64,
    /// Reject `a₃ ≥ 0`. Disabled only for the linear consistency checks.
    pub require_dissipative: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            guard: DEFAULT_GUARD,
            require_dissipative: true,
        }
    }
}

fn check_coefficients(a: &CoefficientSet, opts: &SolverOptions) -> Result<()> {
    if opts.require_dissipative && !(a.a3 < 0.0) {
        return invalid(format!("cubic coefficient must be negative, got {}", a.a3));
    }
    Ok(())
}

fn check_guard(sup: f64, time: f64, guard: f64) -> Result<()> {
    if sup.is_finite() && sup <= guard {
        Ok(())
    } else {
        Err(Error::Divergence {
            time,
            sup_norm: sup,
            guard,
        })
    }
}

/// Iterates [`step_remainder`] from `Y(0) = 0`; `triples[k]` is `Z̄` at `t = k h`.
/// Returns the states at `t = 0, h, …, K h`.
pub fn solve_remainder(
    triples: &[WickTriple],
    a: &CoefficientSet,
    cutoff: usize,
    h: f64,
    opts: &SolverOptions,
) -> Result<Vec<RemainderState>> {
    check_coefficients(a, opts)?;
    let g = fft_size(2 * cutoff + 1);
    let mut states = vec![RemainderState::new(cutoff)];
    for z in triples {
        let cur = states.last().unwrap();
        let next = step_remainder(cur, z, a, h)?;
        check_guard(next.y.to_grid(g)?.max_abs(), next.time, opts.guard)?;
        states.push(next);
    }
    Ok(states)
}

/// Time series of `Z̄ᴺ` (as Wick triples), `Yᴺ` and `Xᴺ = Z̄ᴺ + Yᴺ`.
#[derive(Clone, Debug, PartialEq)]
pub struct SolutionPath {
    pub times: Vec<f64>,
    pub wick_path: Vec<WickTriple>,
    pub remainder_path: Vec<SpectralField>,
    pub x_path: Vec<SpectralField>,
}

pub fn assemble_solution(
    times: &[f64],
    wick_path: Vec<WickTriple>,
    remainder_path: Vec<SpectralField>,
) -> Result<SolutionPath> {
    if wick_path.len() != times.len() || remainder_path.len() != times.len() {
        return invalid(format!(
            "misaligned paths: {} times, {} Wick triples, {} remainders",
            times.len(),
            wick_path.len(),
            remainder_path.len()
        ));
    }
    if times.windows(2).any(|w| !(w[0] < w[1])) {
        return invalid("times must be strictly increasing");
    }
    let x_path = wick_path.iter().zip(&remainder_path).map(|(w, y)| &w.z + y).collect();
    Ok(SolutionPath {
        times: times.to_vec(),
        wick_path,
        remainder_path,
        x_path,
    })
}

/// Fused remainder step on the grid `fft_size(4N + 1)`: `y` and `Z̄` are
/// sampled by one complex transform and the Wick powers are the Hermite
/// polynomials of the sampled `Z̄`.
struct Stepper {
    cutoff: usize,
    g: usize,
    a: CoefficientSet,
    constant: f64,
    factors: Vec<(usize, usize, usize, f64, f64)>,
    buf: Vec<Complex64>,
}

impl Stepper {
    fn new(cutoff: usize, a: CoefficientSet, constant: f64, h: f64) -> Self {
        let g = fft_size(4 * cutoff + 1);
        let gi = g as i64;
        let proto = SpectralField::zeros(cutoff);
        let at = |m: Mode| m.m1.rem_euclid(gi) as usize * g + m.m2.rem_euclid(gi) as usize;
        let factors = ball_modes(cutoff)
            .map(|m| {
                let (d, w) = euler_factors(m.norm_sq(), h);
                (proto.index(m), at(m), at(-m), d, w)
            })
            .collect();
        Stepper {
            cutoff,
            g,
            a,
            constant,
            factors,
            buf: vec![Complex64::new(0.0, 0.0); g * g],
        }
    }

    /// Advances `y` by one step; returns `sup |y|` before the step.
    fn step(&mut self, y: &mut SpectralField, zbar: &SpectralField) -> f64 {
        debug_assert_eq!(y.cutoff(), self.cutoff);
        let g = self.g;
        self.buf.fill(Complex64::new(0.0, 0.0));
        y.scatter(&mut self.buf, g, Complex64::new(1.0, 0.0));
        zbar.scatter(&mut self.buf, g, Complex64::new(0.0, 1.0));
        fft2(&mut self.buf, g, Direction::Inverse);
        let mut sup: f64 = 0.0;
        for v in self.buf.iter_mut() {
            let (yv, zv) = (v.re, v.im);
            sup = sup.max(yv.abs());
            let hz = hermite(zv, self.constant);
            *v = Complex64::new(psi_point(&self.a, yv, zv, hz[2], hz[3]), 0.0);
        }
        if !sup.is_finite() {
            return f64::NAN;
        }
        fft2(&mut self.buf, g, Direction::Forward);
        let scale = 0.5 / (g * g) as f64;
        let coeffs = y.coeffs_mut();
        for &(k, p, q, decay, weight) in &self.factors {
            let forcing = (self.buf[p] + self.buf[q].conj()) * scale;
            coeffs[k] = coeffs[k] * decay + forcing * weight;
        }
        sup
    }
}

/// Configuration of one Galerkin run on a given noise path.
#[derive(Clone, Debug, PartialEq)]
pub struct GalerkinConfig {
    pub cutoff: usize,
    pub coefficients: CoefficientSet,
    /// Step indices at which to record the state; `k` means `t = k h`.
    pub snapshot_steps: Vec<usize>,
    pub options: SolverOptions,
}

/// State of one level at a recorded time.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub zbar: SpectralField,
    pub remainder: SpectralField,
}

impl Snapshot {
    /// `Xᴺ = Z̄ᴺ + Yᴺ`.
    pub fn solution(&self) -> SpectralField {
        &self.zbar + &self.remainder
    }
}

/// Wick constant used with a path: `𝔯ᴺ`, or 0 for a silent path.
pub fn path_constant(path: &NoisePath, cutoff: usize) -> f64 {
    if path.is_silent() {
        0.0
    } else {
        renorm_constant(cutoff)
    }
}

/// Solves `Xᴺ = Z̄ᴺ + Yᴺ` on `path` with initial data `X₀`, recording the
/// requested snapshots. The path's step is the time step.
pub fn run_galerkin(path: &NoisePath, x0: &SpectralField, cfg: &GalerkinConfig) -> Result<Vec<Snapshot>> {
    check_coefficients(&cfg.coefficients, &cfg.options)?;
    let n = cfg.cutoff;
    if n > path.ref_cutoff() {
        return invalid(format!("cutoff {n} exceeds path reference {}", path.ref_cutoff()));
    }
    if cfg.snapshot_steps.windows(2).any(|w| w[0] >= w[1]) {
        return invalid("snapshot steps must be strictly increasing");
    }
    let last = match cfg.snapshot_steps.last() {
        Some(&k) if k <= path.steps() => k,
        Some(&k) => return invalid(format!("snapshot step {k} beyond path length {}", path.steps())),
        None => return Ok(Vec::new()),
    };
    let h = path.step();
    let constant = path_constant(path, n);
    let start = path.stationary_start(n);
    // Z̄_t = Z_{-∞,t} + S(t)(X₀ - Z_{-∞,0}).
    let offset = &x0.project(n).with_cutoff(n) - &start;
    let mut ou = OuState::new(start, true);
    let mut y = SpectralField::zeros(n);
    let mut stepper = Stepper::new(n, cfg.coefficients, constant, h);
    let mut out = Vec::with_capacity(cfg.snapshot_steps.len());
    let mut wanted = cfg.snapshot_steps.iter().peekable();
    for k in 0..=last {
        let t = k as f64 * h;
        let zbar = ou.field.axpy(1.0, &heat_propagate(&offset, t, true)?);
        if wanted.peek() == Some(&&k) {
            wanted.next();
            out.push(Snapshot {
                step: k,
                time: t,
                zbar: zbar.clone(),
                remainder: y.clone(),
            });
        }
        if k == last {
            break;
        }
        let sup = stepper.step(&mut y, &zbar);
        check_guard(sup, t, cfg.options.guard)?;
        ou = ou_transition(&ou, h, path, k)?;
    }
    if let Some(s) = out.last() {
        check_guard(s.remainder.to_grid(fft_size(2 * n + 1))?.max_abs(), s.time, cfg.options.guard)?;
    }
    Ok(out)
}

/// `Z̄ᴺ` alone at the given step indices, by exact transitions along `path`.
pub fn zbar_snapshots(path: &NoisePath, x0: &SpectralField, cutoff: usize, steps: &[usize]) -> Result<Vec<(f64, SpectralField)>> {
    let h = path.step();
    let start = path.stationary_start(cutoff);
    let offset = &x0.project(cutoff).with_cutoff(cutoff) - &start;
    let mut ou = OuState::new(start, true);
    let mut out = Vec::with_capacity(steps.len());
    let mut k = 0;
    for &target in steps {
        if target < k || target > path.steps() {
            return invalid(format!("snapshot step {target} out of order or beyond the path"));
        }
        while k < target {
            ou = ou_transition(&ou, h, path, k)?;
            k += 1;
        }
        let t = k as f64 * h;
        out.push((t, ou.field.axpy(1.0, &heat_propagate(&offset, t, true)?)));
    }
    Ok(out)
}

/// Snapshots as a [`SolutionPath`] with Wick triples at constant `constant`.
pub fn solution_path(snapshots: &[Snapshot], constant: f64) -> Result<SolutionPath> {
    let times: Vec<f64> = snapshots.iter().map(|s| s.time).collect();
    let wick = snapshots.iter().map(|s| wick_powers(&s.zbar, constant)).collect();
    let rem = snapshots.iter().map(|s| s.remainder.clone()).collect();
    assemble_solution(&times, wick, rem)
}
