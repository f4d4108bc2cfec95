//! Random coefficients, round-trip errors and map previews.
//!
//! Random streams come from SplitMix64 seeded with the raw seed: state
//! `s += 0x9E3779B97F4A7C15`, output `z = s`,
//! `z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9`,
//! `z = (z ^ (z >> 27)) * 0x94D049BB133111EB`, `z ^ (z >> 31)`.
//! Each output `u` becomes `2 ((u >> 11) + 0.5) 2^-53 - 1`, strictly inside
//! `(-1, 1)`. Coefficients draw real then imaginary part in m-major order;
//! `m = 0` entries draw only the real part.

use num_complex::Complex64;
use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;

use crate::error::{invalid, Result, ShtError};
use crate::transforms::{AlmSet, SkyMap};

fn open_unit(u: u64) -> f64 {
    2.0 * (((u >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)) - 1.0
}

/// Coefficients with independent uniform `(-1, 1)` parts; `a_l0` is real.
pub fn random_alm(lmax: usize, mmax: usize, seed: u64) -> Result<AlmSet> {
    let mut rng = SplitMix64::seed_from_u64(seed);
    let mut alm = AlmSet::zeros(lmax, mmax)?;
    for m in 0..=mmax {
        for v in alm.m_slice_mut(m) {
            let re = open_unit(rng.next_u64());
            let im = if m == 0 { 0.0 } else { open_unit(rng.next_u64()) };
            *v = Complex64::new(re, im);
        }
    }
    Ok(alm)
}

/// `sqrt(sum |a_init - a_out|^2 / sum |a_init|^2)` over the stored triangle.
pub fn roundtrip_error(a_init: &AlmSet, a_out: &AlmSet) -> Result<f64> {
    if a_init.lmax() != a_out.lmax() || a_init.mmax() != a_out.mmax() {
        return invalid("coefficient sets have different band limits");
    }
    let den: f64 = a_init.values().iter().map(|v| v.norm_sqr()).sum();
    if den == 0.0 {
        return Err(ShtError::Undefined("reference coefficients are all zero".into()));
    }
    let num: f64 = a_init
        .values()
        .iter()
        .zip(a_out.values())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    Ok((num / den).sqrt())
}

/// An 8-bit grayscale image, row-major from the top.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    /// Binary PGM (`P5`).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }
}

/// Equirectangular preview: each image pixel shows the nearest ring in
/// colatitude and the nearest sample on it in azimuth, scaled linearly
/// from the map minimum (black) to its maximum (white).
pub fn project_map(map: &SkyMap, width: usize, height: usize) -> Result<GrayImage> {
    if width == 0 || height == 0 {
        return invalid("image width and height must be at least 1");
    }
    if map.pixels.is_empty() {
        return invalid("map is empty");
    }
    let grid = &map.grid;
    let thetas: Vec<f64> = grid.rings.iter().map(|r| r.cos_theta.clamp(-1.0, 1.0).acos()).collect();
    let (lo, hi) = map
        .pixels
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = hi - lo;
    let tau = std::f64::consts::TAU;
    let mut pixels = Vec::with_capacity(width * height);
    for y in 0..height {
        let theta = (y as f64 + 0.5) / height as f64 * std::f64::consts::PI;
        // Rings are sorted by increasing colatitude.
        let k = thetas.partition_point(|&t| t < theta);
        let ring = match k {
            0 => 0,
            k if k == thetas.len() => k - 1,
            k if theta - thetas[k - 1] <= thetas[k] - theta => k - 1,
            k => k,
        };
        let r = &grid.rings[ring];
        let samples = map.ring_pixels(ring);
        for x in 0..width {
            let phi = (x as f64 + 0.5) / width as f64 * tau;
            let pos = ((phi - r.phi_0) / tau * r.n_phi as f64).round().rem_euclid(r.n_phi as f64);
            let v = samples[(pos as usize).min(r.n_phi - 1)];
            let g = if span > 0.0 { ((v - lo) / span * 255.0).round() } else { 128.0 };
            pixels.push(g as u8);
        }
    }
    Ok(GrayImage { width, height, pixels })
}
