//! Per-ring Fourier synthesis and analysis.
//!
//! A ring with `n` samples at `phi_j = phi_0 + 2πj/n` connects to the
//! per-order coefficients `Δ_m` through
//!
//! ```text
//! synthesis: s_j = sum_{m=-mmax..mmax} Δ_m e^{i m phi_j},   Δ_-m = conj(Δ_m)
//! analysis:  Δ_m = w sum_j s_j e^{-i m phi_j}
//! ```
//!
//! Orders at or above `n/2` alias onto bin `m mod n`; they are folded in,
//! never truncated, so both directions equal the direct sums. Only `m >= 0`
//! is ever stored.
//!
//! Transforms of every length go through `rustfft`, whose planner picks
//! mixed-radix kernels for smooth lengths and Rader/Bluestein kernels for
//! lengths with large prime factors.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Result};
use crate::grid::{PixelGrid, RingDescriptor};

/// Per-order coefficients `Δ_m(r)` of one ring, `m = 0 ..= mmax`.
#[derive(Debug, Clone, PartialEq)]
pub struct RingSpectrum {
    pub ring: usize,
    pub m_values: Vec<Complex64>,
}

impl RingSpectrum {
    pub fn mmax(&self) -> usize {
        self.m_values.len().saturating_sub(1)
    }
}

struct Plan {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Forward and inverse plans for a set of ring lengths. Immutable once
/// built; share it between threads freely.
#[derive(Default)]
pub struct FftPlans {
    plans: HashMap<usize, Plan>,
}

impl std::fmt::Debug for FftPlans {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut lengths: Vec<_> = self.plans.keys().collect();
        lengths.sort();
        f.debug_struct("FftPlans").field("lengths", &lengths).finish()
    }
}

impl FftPlans {
    pub fn for_lengths(lengths: impl IntoIterator<Item = usize>) -> Self {
        let mut planner = FftPlanner::new();
        let mut plans = HashMap::new();
        for n in lengths {
            if n == 0 || plans.contains_key(&n) {
                continue;
            }
            plans.insert(
                n,
                Plan {
                    forward: planner.plan_fft_forward(n),
                    inverse: planner.plan_fft_inverse(n),
                },
            );
        }
        FftPlans { plans }
    }

    pub fn for_grid(grid: &PixelGrid) -> Self {
        Self::for_lengths(grid.rings.iter().map(|r| r.n_phi))
    }

    fn get(&self, n: usize) -> Result<&Plan> {
        match self.plans.get(&n) {
            Some(p) => Ok(p),
            None => invalid(format!("no FFT plan for ring length {n}")),
        }
    }
}

/// Reusable buffers for one thread.
#[derive(Debug, Default)]
pub struct FourierWorkspace {
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl FourierWorkspace {
    pub fn new() -> Self {
        Self::default()
    }

    fn prepare(&mut self, n: usize, scratch_len: usize) {
        self.buf.clear();
        self.buf.resize(n, Complex64::new(0.0, 0.0));
        if self.scratch.len() < scratch_len {
            self.scratch.resize(scratch_len, Complex64::new(0.0, 0.0));
        }
    }
}

#[inline]
fn phase(m: usize, phi_0: f64) -> Complex64 {
    if phi_0 == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        let (s, c) = (m as f64 * phi_0).sin_cos();
        Complex64::new(c, s)
    }
}

/// Writes the `n_phi` samples of `ring` synthesized from `delta`
/// (`Δ_m` for `m = 0 ..= delta.len() - 1`) into `out`.
pub fn ring_synthesis_into(
    delta: &[Complex64],
    ring: &RingDescriptor,
    plans: &FftPlans,
    work: &mut FourierWorkspace,
    out: &mut [f64],
) -> Result<()> {
    let n = ring.n_phi;
    if n == 0 {
        return invalid("ring has no samples");
    }
    if out.len() != n {
        return invalid(format!("output holds {} samples, ring has {n}", out.len()));
    }
    if delta.is_empty() {
        return invalid("spectrum must cover at least m = 0");
    }
    let plan = plans.get(n)?;
    work.prepare(n, plan.inverse.get_inplace_scratch_len());
    for (m, &d) in delta.iter().enumerate() {
        let v = d * phase(m, ring.phi_0);
        let bin = m % n;
        work.buf[bin] += v;
        if m > 0 {
            work.buf[(n - bin) % n] += v.conj();
        }
    }
    plan.inverse
        .process_with_scratch(&mut work.buf, &mut work.scratch[..plan.inverse.get_inplace_scratch_len()]);
    for (o, c) in out.iter_mut().zip(&work.buf) {
        *o = c.re;
    }
    Ok(())
}

/// Writes `Δ_m` for `m = 0 ..= out.len() - 1` computed from the samples of
/// `ring` into `out`.
pub fn ring_analysis_into(
    samples: &[f64],
    ring: &RingDescriptor,
    plans: &FftPlans,
    work: &mut FourierWorkspace,
    out: &mut [Complex64],
) -> Result<()> {
    let n = ring.n_phi;
    if n == 0 {
        return invalid("ring has no samples");
    }
    if samples.len() != n {
        return invalid(format!("ring has {n} samples, got {}", samples.len()));
    }
    let plan = plans.get(n)?;
    work.prepare(n, plan.forward.get_inplace_scratch_len());
    for (b, &s) in work.buf.iter_mut().zip(samples) {
        *b = Complex64::new(s, 0.0);
    }
    plan.forward
        .process_with_scratch(&mut work.buf, &mut work.scratch[..plan.forward.get_inplace_scratch_len()]);
    for (m, o) in out.iter_mut().enumerate() {
        *o = work.buf[m % n] * phase(m, ring.phi_0).conj() * ring.weight;
    }
    Ok(())
}

/// Samples of one ring from its spectrum.
pub fn ring_synthesis(spectrum: &RingSpectrum, ring: &RingDescriptor) -> Result<Vec<f64>> {
    if ring.n_phi == 0 {
        return invalid("ring has no samples");
    }
    let plans = FftPlans::for_lengths([ring.n_phi]);
    let mut out = vec![0.0; ring.n_phi];
    ring_synthesis_into(&spectrum.m_values, ring, &plans, &mut FourierWorkspace::new(), &mut out)?;
    Ok(out)
}

/// Spectrum `m = 0 ..= mmax` of one ring's samples, weighted by the ring's
/// quadrature weight.
pub fn ring_analysis(samples: &[f64], ring: &RingDescriptor, mmax: usize) -> Result<RingSpectrum> {
    if ring.n_phi == 0 {
        return invalid("ring has no samples");
    }
    let plans = FftPlans::for_lengths([ring.n_phi]);
    let mut m_values = vec![Complex64::new(0.0, 0.0); mmax + 1];
    ring_analysis_into(samples, ring, &plans, &mut FourierWorkspace::new(), &mut m_values)?;
    Ok(RingSpectrum {
        ring: ring.index,
        m_values,
    })
}
