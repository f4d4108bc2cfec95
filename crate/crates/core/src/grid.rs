//! Iso-latitude ring pixelizations.
//!
//! Every grid here is a stack of rings of constant colatitude, each ring
//! sampled at equidistant azimuths `phi_0 + j * 2π / n_phi`. Two layouts are
//! provided: the HEALPix ring scheme, and a Gauss-Legendre grid whose ring
//! latitudes are the Legendre roots, which makes analysis exact for
//! band-limited maps.
//!
//! Rings are stored north to south and `pixel_offset` accumulates in that
//! order. Grids are immutable after construction.

use std::f64::consts::PI;

use crate::error::{invalid, Result, ShtError};
use crate::legendre::Latitude;

const MAX_NEWTON_ITERATIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridScheme {
    HealpixRing,
    GaussLegendre,
}

impl GridScheme {
    pub fn name(self) -> &'static str {
        match self {
            GridScheme::HealpixRing => "healpix",
            GridScheme::GaussLegendre => "gauss-legendre",
        }
    }
}

/// One iso-latitude ring.
#[derive(Debug, Clone, PartialEq)]
pub struct RingDescriptor {
    /// 0-based ring number, north to south.
    pub index: usize,
    pub cos_theta: f64,
    pub sin_theta: f64,
    pub n_phi: usize,
    /// Azimuth of the first sample, radians.
    pub phi_0: f64,
    /// Quadrature weight of a single sample of this ring, steradians.
    pub weight: f64,
    /// Global index of the first pixel of this ring.
    pub pixel_offset: usize,
}

impl RingDescriptor {
    pub fn latitude(&self) -> Latitude {
        Latitude {
            cos: self.cos_theta,
            sin: self.sin_theta,
        }
    }

    pub fn pixel_range(&self) -> std::ops::Range<usize> {
        self.pixel_offset..self.pixel_offset + self.n_phi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PixelGrid {
    pub scheme: GridScheme,
    pub n_pix: usize,
    pub rings: Vec<RingDescriptor>,
    /// Resolution parameter, HEALPix grids only.
    pub nside: Option<usize>,
}

impl PixelGrid {
    pub fn n_rings(&self) -> usize {
        self.rings.len()
    }

    pub fn latitudes(&self) -> Vec<Latitude> {
        self.rings.iter().map(RingDescriptor::latitude).collect()
    }

    /// Largest number of samples on any ring.
    pub fn max_n_phi(&self) -> usize {
        self.rings.iter().map(|r| r.n_phi).max().unwrap_or(0)
    }

    /// Short human-readable description, e.g. `healpix nside=4`.
    pub fn describe(&self) -> String {
        match self.scheme {
            GridScheme::HealpixRing => format!("healpix nside={}", self.nside.unwrap_or(0)),
            GridScheme::GaussLegendre => format!(
                "gauss-legendre nrings={} nphi={}",
                self.n_rings(),
                self.rings.first().map_or(0, |r| r.n_phi)
            ),
        }
    }
}

/// Sorts rings north to south, assigns indices and pixel offsets.
fn finish(scheme: GridScheme, nside: Option<usize>, mut rings: Vec<RingDescriptor>) -> PixelGrid {
    let mut offset = 0;
    for (index, ring) in rings.iter_mut().enumerate() {
        ring.index = index;
        ring.pixel_offset = offset;
        offset += ring.n_phi;
    }
    PixelGrid {
        scheme,
        n_pix: offset,
        rings,
        nside,
    }
}

fn ring(cos_theta: f64, n_phi: usize, phi_0: f64, weight: f64) -> RingDescriptor {
    // (1 - z)(1 + z) has no cancellation near the poles, unlike 1 - z^2.
    let sin_theta = ((1.0 - cos_theta) * (1.0 + cos_theta)).sqrt();
    RingDescriptor {
        index: 0,
        cos_theta,
        sin_theta,
        n_phi,
        phi_0,
        weight,
        pixel_offset: 0,
    }
}

fn mirror(r: &RingDescriptor) -> RingDescriptor {
    RingDescriptor {
        cos_theta: -r.cos_theta,
        ..r.clone()
    }
}

/// HEALPix grid in ring ordering with `4 nside - 1` rings and
/// `12 nside^2` pixels. Every sample carries the uniform weight
/// `4π / n_pix`.
pub fn build_healpix_grid(nside: usize) -> Result<PixelGrid> {
    if nside < 1 {
        return invalid("nside must be at least 1");
    }
    let n_pix = nside
        .checked_mul(nside)
        .and_then(|v| v.checked_mul(12))
        .ok_or_else(|| ShtError::InvalidArgument(format!("nside {nside} is too large")))?;
    let weight = 4.0 * PI / n_pix as f64;
    let ns = nside as f64;

    // Northern half including the equator: rings i = 1 ..= 2 nside.
    let mut north = Vec::with_capacity(2 * nside);
    for i in 1..=2 * nside {
        if i < nside {
            let fi = i as f64;
            let one_minus = fi * fi / (3.0 * ns * ns);
            north.push(ring(1.0 - one_minus, 4 * i, PI / (4.0 * fi), weight));
        } else {
            // z = (4 nside - 2 i) / (3 nside); exact negation for the mirror ring.
            let numer = (4 * nside - 2 * i) as f64;
            let z = numer / (3.0 * ns);
            let phi_0 = if (i - nside).is_multiple_of(2) { PI / (4.0 * ns) } else { 0.0 };
            north.push(ring(z, 4 * nside, phi_0, weight));
        }
    }
    let equator = north.pop().expect("at least one ring");
    let mut rings: Vec<RingDescriptor> = north.clone();
    rings.push(equator);
    rings.extend(north.iter().rev().map(mirror));
    Ok(finish(GridScheme::HealpixRing, Some(nside), rings))
}

/// Gauss-Legendre nodes and weights on [-1, 1], nodes in decreasing order.
pub fn gauss_legendre_nodes(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n < 1 {
        return invalid("number of Gauss-Legendre nodes must be at least 1");
    }
    let nf = n as f64;
    let half = n / 2;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];

    // Returns (P_n(x), P_{n-1}(x)).
    let legendre = |x: f64| {
        let (mut p0, mut p1) = (1.0, x);
        for k in 2..=n {
            let kf = k as f64;
            let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
            p0 = p1;
            p1 = p2;
        }
        if n == 1 {
            (x, 1.0)
        } else {
            (p1, p0)
        }
    };
    let weight_at = |x: f64| {
        let (pn, pn1) = legendre(x);
        let dp = nf * (pn1 - x * pn) / (1.0 - x * x);
        2.0 / ((1.0 - x * x) * dp * dp)
    };

    for i in 0..half {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut converged = false;
        for _ in 0..MAX_NEWTON_ITERATIONS {
            let (pn, pn1) = legendre(x);
            let dp = nf * (pn1 - x * pn) / (1.0 - x * x);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() <= 4.0 * f64::EPSILON * x.abs().max(1e-300) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(ShtError::Internal(format!(
                "Gauss-Legendre node {i} of {n} did not converge"
            )));
        }
        let w = weight_at(x);
        nodes[i] = x;
        weights[i] = w;
        nodes[n - 1 - i] = -x;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[half] = 0.0;
        weights[half] = weight_at(0.0);
    }
    Ok((nodes, weights))
}

/// Grid with `n_rings` rings at the Gauss-Legendre nodes and `n_phi`
/// samples per ring starting at azimuth 0.
pub fn build_gauss_legendre_grid(n_rings: usize, n_phi: usize) -> Result<PixelGrid> {
    if n_phi < 1 {
        return invalid("n_phi must be at least 1");
    }
    let (nodes, weights) = gauss_legendre_nodes(n_rings)?;
    let dphi = 2.0 * PI / n_phi as f64;
    let rings = nodes
        .iter()
        .zip(&weights)
        .map(|(&x, &w)| ring(x, n_phi, 0.0, dphi * w))
        .collect();
    Ok(finish(GridScheme::GaussLegendre, None, rings))
}

/// Pairs every northern ring with its mirror. An odd central ring is
/// paired with nothing.
pub fn symmetric_ring_pairs(grid: &PixelGrid) -> Result<Vec<(usize, Option<usize>)>> {
    let n = grid.n_rings();
    let mut pairs = Vec::with_capacity(n.div_ceil(2));
    for k in 0..n / 2 {
        let (north, south) = (&grid.rings[k], &grid.rings[n - 1 - k]);
        if (north.cos_theta + south.cos_theta).abs() > 1e-15 || north.n_phi != south.n_phi {
            return invalid(format!(
                "grid is not equator-symmetric at rings {k} and {}",
                n - 1 - k
            ));
        }
        pairs.push((k, Some(n - 1 - k)));
    }
    if n % 2 == 1 {
        let mid = &grid.rings[n / 2];
        if mid.cos_theta.abs() > 1e-15 {
            return invalid("central ring of an odd grid must lie on the equator");
        }
        pairs.push((n / 2, None));
    }
    Ok(pairs)
}
