use std::f64::consts::TAU;

use num_complex::Complex64;
use sht_core::fourier::{ring_analysis, ring_synthesis, RingSpectrum};
use sht_core::grid::RingDescriptor;

fn ring(n_phi: usize, phi_0: f64, weight: f64) -> RingDescriptor {
    RingDescriptor {
        index: 0,
        cos_theta: 0.0,
        sin_theta: 1.0,
        n_phi,
        phi_0,
        weight,
        pixel_offset: 0,
    }
}

fn lcg(state: &mut u64) -> f64 {
    *state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    (*state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
}

fn direct_synthesis(delta: &[Complex64], r: &RingDescriptor) -> Vec<f64> {
    (0..r.n_phi)
        .map(|j| {
            let phi = r.phi_0 + TAU * j as f64 / r.n_phi as f64;
            delta
                .iter()
                .enumerate()
                .map(|(m, d)| {
                    let t = (d * Complex64::new(0.0, m as f64 * phi).exp()).re;
                    if m == 0 {
                        t
                    } else {
                        2.0 * t
                    }
                })
                .sum()
        })
        .collect()
}

fn direct_analysis(samples: &[f64], r: &RingDescriptor, mmax: usize) -> Vec<Complex64> {
    (0..=mmax)
        .map(|m| {
            samples
                .iter()
                .enumerate()
                .map(|(j, &s)| {
                    let phi = r.phi_0 + TAU * j as f64 / r.n_phi as f64;
                    r.weight * s * Complex64::new(0.0, -(m as f64) * phi).exp()
                })
                .sum()
        })
        .collect()
}

#[test]
fn arbitrary_lengths_match_direct_sums() {
    let mut s = 5u64;
    for n in [1, 2, 7, 11, 13, 22, 64, 101, 257] {
        for mmax in [0, n / 2, n + 3] {
            let r = ring(n, 0.37, 0.9);
            let mut delta: Vec<Complex64> = (0..=mmax).map(|_| Complex64::new(lcg(&mut s), lcg(&mut s))).collect();
            delta[0].im = 0.0;
            let spec = RingSpectrum {
                ring: 0,
                m_values: delta.clone(),
            };
            let fast = ring_synthesis(&spec, &r).unwrap();
            let slow = direct_synthesis(&delta, &r);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() <= 1e-12 * (mmax as f64 + 1.0), "n={n} mmax={mmax}");
            }
            let samples: Vec<f64> = (0..n).map(|_| lcg(&mut s)).collect();
            let fast = ring_analysis(&samples, &r, mmax).unwrap();
            let slow = direct_analysis(&samples, &r, mmax);
            for (a, b) in fast.m_values.iter().zip(&slow) {
                assert!((a - b).norm() <= 1e-12 * n as f64, "n={n} mmax={mmax}");
            }
        }
    }
}

#[test]
fn phase_shift() {
    let mut s = 9u64;
    let samples: Vec<f64> = (0..13).map(|_| lcg(&mut s)).collect();
    let delta_shift = 0.21;
    let a = ring_analysis(&samples, &ring(13, 0.1, 1.0), 6).unwrap();
    let b = ring_analysis(&samples, &ring(13, 0.1 + delta_shift, 1.0), 6).unwrap();
    for (m, (x, y)) in a.m_values.iter().zip(&b.m_values).enumerate() {
        // Moving the samples by δ multiplies their spectrum by e^{-imδ}.
        let want = x * Complex64::new(0.0, -(m as f64) * delta_shift).exp();
        assert!((want - y).norm() <= 1e-13);
    }
    let delta: Vec<Complex64> = (0..=6).map(|m| Complex64::new(lcg(&mut s), if m == 0 { 0.0 } else { lcg(&mut s) })).collect();
    let rotated: Vec<Complex64> = delta
        .iter()
        .enumerate()
        .map(|(m, d)| d * Complex64::new(0.0, m as f64 * delta_shift).exp())
        .collect();
    let spec = |v: Vec<Complex64>| RingSpectrum { ring: 0, m_values: v };
    let x = ring_synthesis(&spec(delta), &ring(13, 0.1 + delta_shift, 1.0)).unwrap();
    let y = ring_synthesis(&spec(rotated), &ring(13, 0.1, 1.0)).unwrap();
    for (a, b) in x.iter().zip(&y) {
        assert!((a - b).abs() <= 1e-13);
    }
}
