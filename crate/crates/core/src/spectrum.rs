//! Real-valued spectral fields on the unit torus 𝕋².
//!
//! A field of cutoff `N` is `f(x) = Σ_{|m| ≤ N} f̂(m) e^{2πi m·x}` with the
//! Euclidean mode ball `|m| ≤ N`. Amplitudes are stored on the enclosing
//! `(2N+1)²` square; corner entries outside the ball are kept at zero.
//! Conjugate symmetry `f̂(-m) = conj f̂(m)` holds for every stored field.

use std::f64::consts::PI;
use std::io::{BufRead, Write};
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::fft::{fft2, fft_size, Direction};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Integer wavenumber on ℤ².
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Mode {
    pub m1: i64,
    pub m2: i64,
}

impl Mode {
    pub const ZERO: Mode = Mode { m1: 0, m2: 0 };

    pub const fn new(m1: i64, m2: i64) -> Self {
        Mode { m1, m2 }
    }

    pub fn norm_sq(self) -> i64 {
        self.m1 * self.m1 + self.m2 * self.m2
    }

    pub fn norm(self) -> f64 {
        (self.norm_sq() as f64).sqrt()
    }

    /// Eigenvalue of `-Δ`: `4π²|m|²`.
    pub fn laplace_eigenvalue(self) -> f64 {
        4.0 * PI * PI * self.norm_sq() as f64
    }

    /// Eigenvalue of `I - Δ`: `I_m = 1 + 4π²|m|²`.
    pub fn mass_eigenvalue(self) -> f64 {
        1.0 + self.laplace_eigenvalue()
    }

    pub fn in_ball(self, cutoff: usize) -> bool {
        self.norm_sq() <= (cutoff * cutoff) as i64
    }

    /// Representative of the pair `{m, -m}`: `m1 > 0`, or `m1 = 0` and `m2 > 0`.
    pub fn is_canonical(self) -> bool {
        self.m1 > 0 || (self.m1 == 0 && self.m2 > 0)
    }
}

impl Neg for Mode {
    type Output = Mode;
    fn neg(self) -> Mode {
        Mode::new(-self.m1, -self.m2)
    }
}

impl Add for Mode {
    type Output = Mode;
    fn add(self, o: Mode) -> Mode {
        Mode::new(self.m1 + o.m1, self.m2 + o.m2)
    }
}

impl Sub for Mode {
    type Output = Mode;
    fn sub(self, o: Mode) -> Mode {
        Mode::new(self.m1 - o.m1, self.m2 - o.m2)
    }
}

/// All modes of the ball `|m| ≤ cutoff`, ordered by `(m1, m2)`.
pub fn ball_modes(cutoff: usize) -> impl Iterator<Item = Mode> {
    let n = cutoff as i64;
    let r2 = n * n;
    (-n..=n).flat_map(move |m1| {
        let w = ((r2 - m1 * m1) as f64).sqrt().floor() as i64;
        (-w..=w).map(move |m2| Mode::new(m1, m2))
    })
}

/// Real field on 𝕋² held as Fourier amplitudes on the ball `|m| ≤ cutoff`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    cutoff: usize,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(cutoff: usize) -> Self {
        let side = 2 * cutoff + 1;
        SpectralField {
            cutoff,
            coeffs: vec![ZERO; side * side],
        }
    }

    pub fn constant(c: f64) -> Self {
        SpectralField {
            cutoff: 0,
            coeffs: vec![Complex64::new(c, 0.0)],
        }
    }

    /// Builds a field from amplitudes on the canonical half-ball and a real
    /// value at `m = 0`; the other half is filled by conjugation.
    pub fn from_half(cutoff: usize, mut amp: impl FnMut(Mode) -> Complex64) -> Self {
        let mut f = SpectralField::zeros(cutoff);
        for m in ball_modes(cutoff) {
            if m == Mode::ZERO {
                let a = amp(m);
                f.set_raw(m, Complex64::new(a.re, 0.0));
            } else if m.is_canonical() {
                let a = amp(m);
                f.set_raw(m, a);
                f.set_raw(-m, a.conj());
            }
        }
        f
    }

    /// Builds a field from an amplitude for every mode, rejecting inputs that
    /// are not conjugate symmetric within `tol`.
    pub fn from_fn(cutoff: usize, amp: impl Fn(Mode) -> Complex64, tol: f64) -> Result<Self> {
        let mut f = SpectralField::zeros(cutoff);
        for m in ball_modes(cutoff) {
            f.set_raw(m, amp(m));
        }
        f.check_symmetry(tol)?;
        Ok(f)
    }

    /// Single real Fourier mode `c·e_m + conj(c)·e_{-m}` (or `c·e_0` at zero).
    pub fn single_mode(m: Mode, c: Complex64) -> Self {
        let cutoff = m.norm().ceil() as usize;
        let mut f = SpectralField::zeros(cutoff);
        if m == Mode::ZERO {
            f.set_raw(m, Complex64::new(c.re, 0.0));
        } else {
            f.set_raw(m, c);
            f.set_raw(-m, c.conj());
        }
        f
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    #[inline]
    pub(crate) fn index(&self, m: Mode) -> usize {
        let n = self.cutoff as i64;
        ((m.m1 + n) * (2 * n + 1) + (m.m2 + n)) as usize
    }

    #[inline]
    pub(crate) fn set_raw(&mut self, m: Mode, v: Complex64) {
        let k = self.index(m);
        self.coeffs[k] = v;
    }

    /// Amplitude at `m`; zero outside the ball.
    #[inline]
    pub fn get(&self, m: Mode) -> Complex64 {
        if m.in_ball(self.cutoff) {
            self.coeffs[self.index(m)]
        } else {
            ZERO
        }
    }

    pub fn modes(&self) -> impl Iterator<Item = (Mode, Complex64)> + '_ {
        ball_modes(self.cutoff).map(move |m| (m, self.coeffs[self.index(m)]))
    }

    /// Largest `|f̂(-m) - conj f̂(m)|` plus `|Im f̂(0)|`.
    pub fn symmetry_defect(&self) -> (Mode, f64) {
        let mut worst = (Mode::ZERO, self.get(Mode::ZERO).im.abs());
        for (m, a) in self.modes() {
            let d = (self.get(-m) - a.conj()).norm();
            if d > worst.1 {
                worst = (m, d);
            }
        }
        worst
    }

    pub fn check_symmetry(&self, tol: f64) -> Result<()> {
        let (m, d) = self.symmetry_defect();
        if d > tol {
            return Err(Error::Symmetry {
                m1: m.m1,
                m2: m.m2,
                deviation: d,
            });
        }
        Ok(())
    }

    /// `Σ |f̂(m)|²`, equal to the spatial mean of `f²`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Value at a physical point `x ∈ [0,1)²` by direct summation.
    pub fn eval(&self, x: [f64; 2]) -> f64 {
        self.modes()
            .map(|(m, a)| {
                let phase = 2.0 * PI * (m.m1 as f64 * x[0] + m.m2 as f64 * x[1]);
                (a * Complex64::from_polar(1.0, phase)).re
            })
            .sum()
    }

    /// Same field stored with a different cutoff: zero padded or projected.
    pub fn with_cutoff(&self, cutoff: usize) -> Self {
        if cutoff == self.cutoff {
            return self.clone();
        }
        let mut out = SpectralField::zeros(cutoff);
        let keep = cutoff.min(self.cutoff);
        for m in ball_modes(keep) {
            out.set_raw(m, self.get(m));
        }
        out
    }

    /// Galerkin projection `P_N`: keeps `|m| ≤ n`, cutoff `min(n, self.cutoff)`.
    pub fn project(&self, n: usize) -> Self {
        self.with_cutoff(n.min(self.cutoff))
    }

    /// Fourier multiplier `f̂(m) ← σ(m) f̂(m)`. `σ` must be even in `m`.
    pub fn apply_multiplier(&self, sigma: impl Fn(Mode) -> f64) -> Result<Self> {
        let mut out = self.clone();
        for m in ball_modes(self.cutoff) {
            let s = sigma(m);
            let s_neg = sigma(-m);
            if (s - s_neg).abs() > 1e-14 * s.abs().max(1.0) || s.is_nan() {
                return Err(Error::Symmetry {
                    m1: m.m1,
                    m2: m.m2,
                    deviation: (s - s_neg).abs(),
                });
            }
            let k = out.index(m);
            out.coeffs[k] *= s;
        }
        Ok(out)
    }

    /// Multiplier known to be radial in `|m|²`; skips the evenness check.
    pub(crate) fn apply_radial(&self, sigma: impl Fn(i64) -> f64) -> Self {
        let mut out = self.clone();
        for m in ball_modes(self.cutoff) {
            let k = out.index(m);
            out.coeffs[k] *= sigma(m.norm_sq());
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        SpectralField {
            cutoff: self.cutoff,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// `self + s·other`, with cutoff `max` of the two.
    pub fn axpy(&self, s: f64, other: &SpectralField) -> Self {
        let mut out = self.with_cutoff(self.cutoff.max(other.cutoff));
        for m in ball_modes(other.cutoff) {
            let k = out.index(m);
            out.coeffs[k] += other.get(m) * s;
        }
        out
    }

    /// Samples the field on the `g x g` grid `x = (i/g, k/g)`.
    pub fn to_grid(&self, g: usize) -> Result<GridField> {
        check_grid(g, self.cutoff)?;
        let mut buf = vec![ZERO; g * g];
        self.scatter(&mut buf, g, Complex64::new(1.0, 0.0));
        fft2(&mut buf, g, Direction::Inverse);
        Ok(GridField {
            size: g,
            cutoff: self.cutoff,
            values: buf.into_iter().map(|c| c.re).collect(),
        })
    }

    pub(crate) fn scatter(&self, buf: &mut [Complex64], g: usize, factor: Complex64) {
        let gi = g as i64;
        for (m, a) in self.modes() {
            let i = m.m1.rem_euclid(gi) as usize;
            let k = m.m2.rem_euclid(gi) as usize;
            buf[i * g + k] += a * factor;
        }
    }

    pub(crate) fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub(crate) fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }
}

fn check_grid(g: usize, cutoff: usize) -> Result<()> {
    let required = 2 * cutoff + 1;
    if g < required {
        return Err(Error::Resolution {
            grid: g,
            bandwidth: cutoff,
            required,
        });
    }
    Ok(())
}

/// Samples two real fields at once through one complex transform.
pub fn to_grid_pair(f: &SpectralField, h: &SpectralField, g: usize) -> Result<(GridField, GridField)> {
    check_grid(g, f.cutoff.max(h.cutoff))?;
    let mut buf = vec![ZERO; g * g];
    f.scatter(&mut buf, g, Complex64::new(1.0, 0.0));
    h.scatter(&mut buf, g, Complex64::new(0.0, 1.0));
    fft2(&mut buf, g, Direction::Inverse);
    let (re, im): (Vec<f64>, Vec<f64>) = buf.into_iter().map(|c| (c.re, c.im)).unzip();
    Ok((
        GridField {
            size: g,
            cutoff: f.cutoff,
            values: re,
        },
        GridField {
            size: g,
            cutoff: h.cutoff,
            values: im,
        },
    ))
}

/// Samples a list of fields on one grid, two per transform.
pub fn to_grids(fields: &[&SpectralField], g: usize) -> Result<Vec<GridField>> {
    let mut out = Vec::with_capacity(fields.len());
    for chunk in fields.chunks(2) {
        match chunk {
            [a, b] => {
                let (ga, gb) = to_grid_pair(a, b, g)?;
                out.push(ga);
                out.push(gb);
            }
            [a] => out.push(a.to_grid(g)?),
            _ => unreachable!(),
        }
    }
    Ok(out)
}

/// Fourier analysis of real samples; symmetric by construction.
fn analyse(values: &[f64], g: usize, cutoff: usize) -> SpectralField {
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2(&mut buf, g, Direction::Forward);
    let scale = 1.0 / (g * g) as f64;
    let gi = g as i64;
    let at = |m: Mode| buf[m.m1.rem_euclid(gi) as usize * g + m.m2.rem_euclid(gi) as usize];
    let mut out = SpectralField::zeros(cutoff);
    for m in ball_modes(cutoff) {
        let v = (at(m) + at(-m).conj()) * (0.5 * scale);
        out.set_raw(m, v);
    }
    out
}

fn analyse_pair(u: &[f64], v: &[f64], g: usize, cu: usize, cv: usize) -> (SpectralField, SpectralField) {
    let mut buf: Vec<Complex64> = u.iter().zip(v).map(|(&a, &b)| Complex64::new(a, b)).collect();
    fft2(&mut buf, g, Direction::Forward);
    let scale = 1.0 / (g * g) as f64;
    let gi = g as i64;
    let at = |m: Mode| buf[m.m1.rem_euclid(gi) as usize * g + m.m2.rem_euclid(gi) as usize];
    let mut fu = SpectralField::zeros(cu);
    for m in ball_modes(cu) {
        fu.set_raw(m, (at(m) + at(-m).conj()) * (0.5 * scale));
    }
    let mut fv = SpectralField::zeros(cv);
    let half_i = Complex64::new(0.0, -0.5 * scale);
    for m in ball_modes(cv) {
        fv.set_raw(m, (at(m) - at(-m).conj()) * half_i);
    }
    (fu, fv)
}

/// Evaluates a pointwise map of several band-limited inputs and returns the
/// outputs truncated to the requested cutoffs, alias-free.
///
/// `bandwidth` bounds the spectral support of every output of `map` (for a
/// polynomial of degree `d` in fields of cutoff `N`, this is `d·N`).
pub(crate) fn pointwise<F>(
    inputs: &[&SpectralField],
    out_cutoffs: &[usize],
    bandwidth: usize,
    map: F,
) -> Result<Vec<SpectralField>>
where
    F: Fn(&[f64], &mut [f64]),
{
    let max_out = out_cutoffs.iter().copied().max().unwrap_or(0).min(bandwidth);
    let max_in = inputs.iter().map(|f| f.cutoff).max().unwrap_or(0);
    let g = fft_size((bandwidth + max_out + 1).max(2 * max_in + 1));
    let grids = to_grids(inputs, g)?;
    let n_out = out_cutoffs.len();
    let mut outs = vec![vec![0.0; g * g]; n_out];
    let mut xin = vec![0.0; inputs.len()];
    let mut xout = vec![0.0; n_out];
    for p in 0..g * g {
        for (slot, grid) in xin.iter_mut().zip(&grids) {
            *slot = grid.values[p];
        }
        map(&xin, &mut xout);
        for (o, v) in outs.iter_mut().zip(&xout) {
            o[p] = *v;
        }
    }
    let mut result = Vec::with_capacity(n_out);
    let mut k = 0;
    while k < n_out {
        if k + 1 < n_out {
            let (a, b) = analyse_pair(&outs[k], &outs[k + 1], g, out_cutoffs[k], out_cutoffs[k + 1]);
            result.push(a);
            result.push(b);
            k += 2;
        } else {
            result.push(analyse(&outs[k], g, out_cutoffs[k]));
            k += 1;
        }
    }
    Ok(result)
}

/// Alias-free spectral product truncated to `|m| ≤ out_cutoff`.
pub fn multiply(f: &SpectralField, h: &SpectralField, out_cutoff: usize) -> SpectralField {
    let band = f.cutoff + h.cutoff;
    let out = pointwise(&[f, h], &[out_cutoff.min(band)], band, |x, y| y[0] = x[0] * x[1])
        .expect("grid sized from the inputs");
    let mut p = out.into_iter().next().unwrap();
    if out_cutoff > p.cutoff {
        p = p.with_cutoff(out_cutoff);
    }
    p
}

impl Add for &SpectralField {
    type Output = SpectralField;
    fn add(self, o: &SpectralField) -> SpectralField {
        self.axpy(1.0, o)
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;
    fn sub(self, o: &SpectralField) -> SpectralField {
        self.axpy(-1.0, o)
    }
}

impl Neg for &SpectralField {
    type Output = SpectralField;
    fn neg(self) -> SpectralField {
        self.scale(-1.0)
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, s: f64) -> SpectralField {
        self.scale(s)
    }
}

/// Real samples on the uniform `size x size` grid, row `i` at `x₁ = i/size`,
/// column `k` at `x₂ = k/size`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    size: usize,
    cutoff: usize,
    values: Vec<f64>,
}

impl GridField {
    /// Wraps raw samples; `cutoff` is the Galerkin level they represent.
    pub fn new(size: usize, cutoff: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != size * size {
            return invalid(format!("expected {} samples, got {}", size * size, values.len()));
        }
        check_grid(size, cutoff)?;
        Ok(GridField { size, cutoff, values })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.size + k]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn mean_square(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64
    }

    /// Grid quadrature of `‖f‖_{L^p}`; `p = ∞` gives the sample maximum.
    pub fn lp_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.max_abs();
        }
        let mean = self.values.iter().map(|v| v.abs().powf(p)).sum::<f64>() / self.values.len() as f64;
        mean.powf(1.0 / p)
    }

    /// Inverse of [`SpectralField::to_grid`]: amplitudes for `|m| ≤ cutoff`.
    pub fn to_spectral(&self, cutoff: usize) -> Result<SpectralField> {
        check_grid(self.size, cutoff)?;
        Ok(analyse(&self.values, self.size, cutoff))
    }

    /// Writes the text format: a header line `G,N`, then `G` lines of `G`
    /// comma-separated samples in shortest round-trip exponent notation.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{},{}", self.size, self.cutoff)?;
        let mut line = String::new();
        for row in self.values.chunks(self.size) {
            line.clear();
            for (k, v) in row.iter().enumerate() {
                if k > 0 {
                    line.push(',');
                }
                line.push_str(&format!("{v:e}"));
            }
            line.push('\n');
            w.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty grid file".into()))??;
        let parts: Vec<&str> = header.trim().split(',').collect();
        if parts.len() != 2 {
            return Err(Error::Parse(format!("bad header `{header}`, expected `G,N`")));
        }
        let parse_usize = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|e| Error::Parse(format!("bad header value `{s}`: {e}")))
        };
        let size = parse_usize(parts[0])?;
        let cutoff = parse_usize(parts[1])?;
        let mut values = Vec::with_capacity(size * size);
        for (row, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let before = values.len();
            for tok in line.split(',') {
                let v = tok
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {row}: bad value `{tok}`: {e}")))?;
                values.push(v);
            }
            if values.len() - before != size {
                return Err(Error::Parse(format!("row {row} has {} values, expected {size}", values.len() - before)));
            }
        }
        GridField::new(size, cutoff, values)
    }
}
