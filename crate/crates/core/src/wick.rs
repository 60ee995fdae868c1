//! Renormalization constants, Wick powers and their binomial shifts.

use serde::{Deserialize, Serialize};

use crate::noise::decay_rate;
use crate::spectrum::{pointwise, Mode, SpectralField};

/// `𝔯ᴺ = Σ_{|m| ≤ N} 1 / (2 I_m)`, the variance of the stationary field at level `N`.
pub fn renorm_constant(cutoff: usize) -> f64 {
    let n = cutoff as i64;
    let r2 = n * n;
    let mut total = 0.0;
    // Sum from the outermost columns inward so small terms accumulate first.
    for m1 in (0..=n).rev() {
        let w = ((r2 - m1 * m1) as f64).sqrt().floor() as i64;
        let mut col = 0.0;
        for m2 in (1..=w).rev() {
            col += 1.0 / decay_rate(m1 * m1 + m2 * m2, true);
        }
        col += 0.5 / decay_rate(m1 * m1, true);
        total += if m1 == 0 { col } else { 2.0 * col };
    }
    total
}

/// Hermite values `(1, x, x² - c, x³ - 3cx)` at a point.
#[inline]
pub fn hermite(x: f64, c: f64) -> [f64; 4] {
    [1.0, x, x * x - c, x * x * x - 3.0 * c * x]
}

/// A Gaussian-type field with its second and third Wick powers.
#[derive(Clone, Debug, PartialEq)]
pub struct WickTriple {
    pub z: SpectralField,
    /// `z² - 𝔯`, stored at cutoff `2N`.
    pub z2: SpectralField,
    /// `z³ - 3𝔯z`, stored at cutoff `3N`.
    pub z3: SpectralField,
    pub constant: f64,
    pub cutoff: usize,
}

impl WickTriple {
    /// Powers of the zero field: `(0, -𝔯, 0)`.
    pub fn zero(cutoff: usize, constant: f64) -> Self {
        let mut z2 = SpectralField::zeros(2 * cutoff);
        z2.set_raw(Mode::ZERO, (-constant).into());
        WickTriple {
            z: SpectralField::zeros(cutoff),
            z2,
            z3: SpectralField::zeros(3 * cutoff),
            constant,
            cutoff,
        }
    }
}

/// Alias-free `z^{:2:}` and `z^{:3:}` of a band-limited field at constant `𝔯`.
pub fn wick_powers(z: &SpectralField, constant: f64) -> WickTriple {
    let n = z.cutoff();
    let out = pointwise(&[z], &[2 * n, 3 * n], 3 * n, |x, y| {
        let h = hermite(x[0], constant);
        y[0] = h[2];
        y[1] = h[3];
    })
    .expect("grid sized from the inputs");
    let mut it = out.into_iter();
    WickTriple {
        z: z.clone(),
        z2: it.next().unwrap(),
        z3: it.next().unwrap(),
        constant,
        cutoff: n,
    }
}

/// Wick powers of `z + v` from those of `z`: `(z+v)^{:n:} = Σ_k C(n,k) v^{n-k} z^{:k:}`.
pub fn shift_wick(base: &WickTriple, v: &SpectralField) -> WickTriple {
    let n = base.cutoff.max(v.cutoff());
    let out = pointwise(
        &[&base.z, &base.z2, &base.z3, v],
        &[n, 2 * n, 3 * n],
        3 * n,
        |x, y| {
            let (z1, z2, z3, s) = (x[0], x[1], x[2], x[3]);
            y[0] = z1 + s;
            y[1] = z2 + 2.0 * s * z1 + s * s;
            y[2] = z3 + 3.0 * s * z2 + 3.0 * s * s * z1 + s * s * s;
        },
    )
    .expect("grid sized from the inputs");
    let mut it = out.into_iter();
    WickTriple {
        z: it.next().unwrap(),
        z2: it.next().unwrap(),
        z3: it.next().unwrap(),
        constant: base.constant,
        cutoff: n,
    }
}

/// Coefficients of `:F(v): = Σ_j a_j v^{:j:}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSet {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
}

impl CoefficientSet {
    pub const fn new(a0: f64, a1: f64, a2: f64, a3: f64) -> Self {
        CoefficientSet { a0, a1, a2, a3 }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.a0, self.a1, self.a2, self.a3]
    }

    /// Ordinary polynomial `Σ a_j v^j`.
    pub fn eval_plain(&self, v: f64) -> f64 {
        ((self.a3 * v + self.a2) * v + self.a1) * v + self.a0
    }

    /// `Σ a_j v^{:j:}` with Hermite powers at constant `c`.
    pub fn eval_wick(&self, v: f64, c: f64) -> f64 {
        let h = hermite(v, c);
        self.as_array().iter().zip(h).map(|(a, p)| a * p).sum()
    }
}

/// Plain-polynomial coefficients of the Wick polynomial at level `N`:
/// `(a₀ - a₂𝔯ᴺ, a₁ - 3a₃𝔯ᴺ, a₂, a₃)`.
pub fn renormalized_coefficients(a: &CoefficientSet, cutoff: usize) -> CoefficientSet {
    let r = renorm_constant(cutoff);
    CoefficientSet::new(a.a0 - a.a2 * r, a.a1 - 3.0 * a.a3 * r, a.a2, a.a3)
}

/// Rows `(N, 𝔯ᴺ, 𝔯^{2N} - 𝔯ᴺ)`.
pub fn renorm_table(cutoffs: &[usize]) -> Vec<(usize, f64, f64)> {
    cutoffs
        .iter()
        .map(|&n| {
            let r = renorm_constant(n);
            (n, r, renorm_constant(2 * n) - r)
        })
        .collect()
}
