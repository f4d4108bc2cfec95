//! Normalized associated Legendre functions by upward recurrence in degree.
//!
//! For a fixed order `m` the functions are generated from
//!
//! ```text
//! P_mm(x)     = mu_m (1 - x^2)^(m/2)
//! P_m+1,m(x)  = beta_{m+1,m} x P_mm(x)
//! P_lm(x)     = beta_lm (x P_l-1,m(x) - P_l-2,m(x) / beta_l-1,m)
//! beta_lm     = sqrt((4 l^2 - 1) / (l^2 - m^2))
//! mu_m        = sqrt((2m + 1)! / 4π) / (2^m m!)
//! ```
//!
//! normalized so that `P_lm(cos θ) e^{imφ}` is orthonormal on the sphere,
//! without the Condon-Shortley phase.
//!
//! `P_mm` underflows double precision long before the recurrence climbs
//! back into the representable range, so values carry an integer exponent
//! on a ladder of powers of `F = 2^512`. During the recurrence the pair of
//! running values is rescaled whenever it crosses the upper threshold; once
//! the exponent reaches zero no further checks are needed because normalized
//! functions never exceed `F`.

use std::f64::consts::PI;

use crate::error::{invalid, Result, ShtError};

/// `2^512`.
const STEP: f64 = 1.340_780_792_994_259_7e154;
/// `2^-512`.
const INV_STEP: f64 = 7.458_340_731_200_207e-155;
/// `2^-256`, lower bound kept while multiplying scaled values.
const TIGHT_LO: f64 = 8.636_168_555_094_445e-78;
/// `2^256`.
const TIGHT_HI: f64 = 1.157_920_892_373_162e77;

/// Largest magnitude of a scale exponent reachable for band limits up to
/// `2 * 10^5`.
pub const MAX_SCALE_EXPONENT: i32 = 16;

/// Colatitude of a ring as `(cos θ, sin θ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Latitude {
    pub cos: f64,
    pub sin: f64,
}

impl Latitude {
    pub fn from_cos(x: f64) -> Result<Self> {
        check_argument(x)?;
        Ok(Latitude {
            cos: x,
            sin: ((1.0 - x) * (1.0 + x)).sqrt(),
        })
    }
}

pub(crate) fn check_argument(x: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&x) {
        return invalid(format!("cos(theta) = {x} lies outside [-1, 1]"));
    }
    Ok(())
}

/// Rescaling parameters for the recurrence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleLadder {
    /// Factor `F` between adjacent rungs.
    pub step_magnitude: f64,
    /// `F^-1`.
    pub inverse_step: f64,
    /// Magnitudes below this are considered underflowing.
    pub lo_threshold: f64,
    /// Magnitudes above this trigger a rescale by `F^-1`.
    pub hi_threshold: f64,
    // Window kept while multiplying scaled values so that products of two
    // mantissas stay normal.
    tight_lo: f64,
    tight_hi: f64,
}

impl Default for ScaleLadder {
    fn default() -> Self {
        ScaleLadder {
            step_magnitude: STEP,
            inverse_step: INV_STEP,
            lo_threshold: INV_STEP,
            hi_threshold: STEP,
            tight_lo: TIGHT_LO,
            tight_hi: TIGHT_HI,
        }
    }
}

impl ScaleLadder {
    /// A ladder that never rescales: plain double precision recurrence.
    pub fn disabled() -> Self {
        ScaleLadder {
            step_magnitude: STEP,
            inverse_step: INV_STEP,
            lo_threshold: 0.0,
            hi_threshold: f64::INFINITY,
            tight_lo: 0.0,
            tight_hi: f64::INFINITY,
        }
    }

    pub fn is_enabled(&self) -> bool {
        self.hi_threshold.is_finite()
    }

    /// `F^k` for the rungs that are representable without overflow,
    /// `k = -2 ..= 1`.
    pub fn power(&self, k: i32) -> Option<f64> {
        match k {
            -2 => Some(self.inverse_step * self.inverse_step),
            -1 => Some(self.inverse_step),
            0 => Some(1.0),
            1 => Some(self.step_magnitude),
            _ => None,
        }
    }
}

/// A real number stored as `mantissa * F^scale_exponent`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledValue {
    pub mantissa: f64,
    pub scale_exponent: i32,
}

impl ScaledValue {
    pub const ZERO: ScaledValue = ScaledValue {
        mantissa: 0.0,
        scale_exponent: 0,
    };

    pub fn new(value: f64) -> Self {
        ScaledValue {
            mantissa: value,
            scale_exponent: 0,
        }
    }

    fn normalize(mut self, ladder: &ScaleLadder) -> Self {
        if self.mantissa == 0.0 {
            self.scale_exponent = 0;
            return self;
        }
        while self.mantissa.abs() < ladder.tight_lo {
            self.mantissa *= ladder.step_magnitude;
            self.scale_exponent -= 1;
        }
        while self.mantissa.abs() > ladder.tight_hi {
            self.mantissa *= ladder.inverse_step;
            self.scale_exponent += 1;
        }
        self
    }

    fn mul(self, other: ScaledValue, ladder: &ScaleLadder) -> Self {
        ScaledValue {
            mantissa: self.mantissa * other.mantissa,
            scale_exponent: self.scale_exponent + other.scale_exponent,
        }
        .normalize(ladder)
    }

    /// Plain double value; underflows to zero, saturates to infinity.
    pub fn to_f64(self) -> f64 {
        let mut v = self.mantissa;
        let mut k = self.scale_exponent;
        while k < 0 && v != 0.0 {
            v *= INV_STEP;
            k += 1;
        }
        while k > 0 && v.is_finite() {
            v *= STEP;
            k -= 1;
        }
        v
    }
}

/// `beta_lm = sqrt((4 l^2 - 1) / (l^2 - m^2))`.
pub fn beta(l: usize, m: usize) -> Result<f64> {
    if l < m {
        return invalid(format!("beta requires l >= m, got l={l}, m={m}"));
    }
    if l == m {
        return Err(ShtError::Domain(format!(
            "beta is undefined for l = m = {m} (division by zero)"
        )));
    }
    Ok(beta_unchecked(l, m))
}

#[inline]
fn beta_unchecked(l: usize, m: usize) -> f64 {
    let (l, m) = (l as f64, m as f64);
    ((4.0 * l * l - 1.0) / ((l - m) * (l + m))).sqrt()
}

/// `mu_m` from a running sum of logarithms:
/// `ln mu_m = -ln(4π)/2 + sum_{k=1..m} ln(1 + 1/(2k)) / 2`.
pub fn recurrence_start(m: usize) -> ScaledValue {
    let mut log_mu = -0.5 * (4.0 * PI).ln();
    for k in 1..=m {
        log_mu += 0.5 * (0.5 / k as f64).ln_1p();
    }
    ScaledValue::new(log_mu.exp())
}

/// `mu_m` for every `m = 0 ..= mmax`, same log-sum as [`recurrence_start`].
pub fn recurrence_starts(mmax: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(mmax + 1);
    let mut log_mu = -0.5 * (4.0 * PI).ln();
    out.push(log_mu.exp());
    for k in 1..=mmax {
        log_mu += 0.5 * (0.5 / k as f64).ln_1p();
        out.push(log_mu.exp());
    }
    out
}

/// Coefficients of the degree recurrence for one order.
#[derive(Debug, Clone)]
pub struct RecurrenceCoeffs {
    pub m: usize,
    pub lmax: usize,
    /// `beta_lm` for `l = m+1 ..= lmax`.
    pub beta: Vec<f64>,
    // (beta_l, beta_l / beta_l-1) for l = m+1 ..= lmax; the ratio is 0 at
    // l = m+1 where the trailing term vanishes.
    pub(crate) steps: Vec<(f64, f64)>,
}

impl RecurrenceCoeffs {
    pub fn new(m: usize, lmax: usize) -> Result<Self> {
        if m > lmax {
            return invalid(format!("order m={m} exceeds lmax={lmax}"));
        }
        let beta: Vec<f64> = (m + 1..=lmax).map(|l| beta_unchecked(l, m)).collect();
        let steps = fill_steps(&beta);
        Ok(RecurrenceCoeffs { m, lmax, beta, steps })
    }
}

fn fill_steps(beta: &[f64]) -> Vec<(f64, f64)> {
    let mut steps = Vec::with_capacity(beta.len());
    let mut prev = f64::NAN;
    for (i, &b) in beta.iter().enumerate() {
        steps.push((b, if i == 0 { 0.0 } else { b / prev }));
        prev = b;
    }
    steps
}

/// Writes `(beta_l, beta_l / beta_l-1)` for `l = first ..` into `tile`.
pub(crate) fn fill_step_tile(m: usize, first: usize, tile: &mut [(f64, f64)]) {
    let mut prev = if first > m + 1 { beta_unchecked(first - 1, m) } else { f64::NAN };
    for (i, slot) in tile.iter_mut().enumerate() {
        let l = first + i;
        let b = beta_unchecked(l, m);
        *slot = (b, if l == m + 1 { 0.0 } else { b / prev });
        prev = b;
    }
}

/// `P_mm(x) = mu_m sin^m θ` as a scaled value.
pub fn start_value(mu_m: f64, m: usize, sin_theta: f64, ladder: &ScaleLadder) -> ScaledValue {
    let mut result = ScaledValue::new(mu_m);
    let mut base = ScaledValue::new(sin_theta);
    let mut e = m;
    while e > 0 {
        if e & 1 == 1 {
            result = result.mul(base, ladder);
        }
        e >>= 1;
        if e > 0 {
            base = base.mul(base, ladder);
        }
    }
    result.normalize(ladder)
}

/// Running state of the recurrence for one `(m, x)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Recurrence {
    x: f64,
    prev: f64,
    cur: f64,
    exponent: i32,
    hi: f64,
}

impl Recurrence {
    pub(crate) fn new(x: f64, start: ScaledValue, ladder: &ScaleLadder) -> Self {
        Recurrence {
            x,
            prev: 0.0,
            cur: start.mantissa,
            exponent: start.scale_exponent,
            hi: ladder.hi_threshold,
        }
    }

    /// Unscaled value at the current degree; negligible values are 0.
    #[inline]
    pub(crate) fn current(&self) -> f64 {
        match self.exponent {
            0 => self.cur,
            -1 => self.cur * INV_STEP,
            _ => 0.0,
        }
    }

    /// Advances one degree per entry of `steps`, writing the unscaled value
    /// of each new degree to `out`.
    #[inline]
    pub(crate) fn advance(&mut self, steps: &[(f64, f64)], out: &mut [f64]) {
        debug_assert_eq!(steps.len(), out.len());
        let x = self.x;
        let (mut prev, mut cur) = (self.prev, self.cur);
        let mut i = 0;
        let n = steps.len();
        while self.exponent < 0 && i < n {
            let (b, r) = steps[i];
            let next = b * x * cur - r * prev;
            prev = cur;
            cur = next;
            if cur.abs() > self.hi {
                cur *= INV_STEP;
                prev *= INV_STEP;
                self.exponent += 1;
            }
            out[i] = match self.exponent {
                0 => cur,
                -1 => cur * INV_STEP,
                _ => 0.0,
            };
            i += 1;
        }
        for (slot, &(b, r)) in out[i..].iter_mut().zip(&steps[i..]) {
            let next = b * x * cur - r * prev;
            prev = cur;
            cur = next;
            *slot = cur;
        }
        self.prev = prev;
        self.cur = cur;
    }
}

/// Fills `row[l - m]` with `P_lm(x)` for `l = m ..= lmax` given precomputed
/// coefficients and start value. Returns the offset of the first entry that
/// can be nonzero; everything before it is exactly 0.
pub(crate) fn fill_row(
    coeffs: &RecurrenceCoeffs,
    lat: Latitude,
    mu_m: f64,
    ladder: &ScaleLadder,
    row: &mut [f64],
) -> usize {
    let start = start_value(mu_m, coeffs.m, lat.sin, ladder);
    let mut rec = Recurrence::new(lat.cos, start, ladder);
    row[0] = rec.current();
    rec.advance(&coeffs.steps, &mut row[1..]);
    first_nonzero(row)
}

fn first_nonzero(row: &[f64]) -> usize {
    row.iter().position(|&v| v != 0.0).unwrap_or(row.len())
}

/// `P_lm(x)` for `l = m ..= lmax`, unscaled double precision.
pub fn plm_row(m: usize, x: f64, lmax: usize, ladder: &ScaleLadder) -> Result<Vec<f64>> {
    let lat = Latitude::from_cos(x)?;
    let coeffs = RecurrenceCoeffs::new(m, lmax)?;
    let mu = recurrence_start(m).to_f64();
    let mut row = vec![0.0; lmax - m + 1];
    fill_row(&coeffs, lat, mu, ladder, &mut row);
    Ok(row)
}

/// `P_lm(x)` for `l = m ..= lmax` with their scale exponents, for values
/// far below the double-precision range.
pub fn plm_row_scaled(m: usize, x: f64, lmax: usize, ladder: &ScaleLadder) -> Result<Vec<ScaledValue>> {
    let lat = Latitude::from_cos(x)?;
    let coeffs = RecurrenceCoeffs::new(m, lmax)?;
    let start = start_value(recurrence_start(m).to_f64(), m, lat.sin, ladder);
    let mut rec = Recurrence::new(lat.cos, start, ladder);
    let mut out = Vec::with_capacity(lmax - m + 1);
    out.push(start);
    let mut scratch = [0.0];
    for step in &coeffs.steps {
        rec.advance(std::slice::from_ref(step), &mut scratch);
        out.push(ScaledValue {
            mantissa: rec.cur,
            scale_exponent: rec.exponent,
        });
    }
    Ok(out)
}
