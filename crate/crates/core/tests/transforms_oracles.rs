use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use proptest::prelude::*;
use sht_core::experiment::{random_alm, roundtrip_error};
use sht_core::grid::{build_gauss_legendre_grid, build_healpix_grid};
use sht_core::legendre::{plm_row, Latitude, ScaleLadder};
use sht_core::transforms::{
    accumulate_alm, accumulate_alm_partial, analysis, analysis_with, compute_delta_a, compute_delta_a_ring_major,
    compute_delta_a_with, reduce_partials, synthesis, synthesis_with, AlmSet, DeltaPanel, KernelOptions,
    KernelVariant, PanelKind, SkyMap,
};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn lcg_unit(state: &mut u64) -> f64 {
    *state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    (*state >> 11) as f64 / (1u64 << 53) as f64
}

fn random_lats(n: usize, seed: u64) -> Vec<Latitude> {
    let mut s = seed;
    (0..n).map(|_| Latitude::from_cos(2.0 * lcg_unit(&mut s) - 1.0).unwrap()).collect()
}

/// `P[m][r][l - m]` from single rows.
fn dense_p(lats: &[Latitude], lmax: usize, mmax: usize) -> Vec<Vec<Vec<f64>>> {
    let ladder = ScaleLadder::default();
    (0..=mmax)
        .map(|m| lats.iter().map(|lat| plm_row(m, lat.cos, lmax, &ladder).unwrap()).collect())
        .collect()
}

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn delta_panel_matches_dense_product() {
    let (lmax, mmax) = (16, 16);
    let lats = random_lats(9, 3);
    let alm = random_alm(lmax, mmax, 11).unwrap();
    let p = dense_p(&lats, lmax, mmax);
    let m_set: Vec<usize> = (0..=mmax).collect();
    for panel in [
        compute_delta_a(&alm, &lats, &m_set).unwrap(),
        compute_delta_a_ring_major(&alm, &lats, &m_set).unwrap(),
    ] {
        for m in 0..=mmax {
            for (r, row) in p[m].iter().enumerate() {
                let want: Complex64 = (m..=lmax).map(|l| alm.get(l, m) * row[l - m]).sum();
                assert!((panel.get(r, m) - want).norm() <= 1e-13);
            }
        }
    }
}

#[test]
fn accumulation_matches_transposed_product() {
    let (lmax, mmax) = (16, 12);
    let lats = random_lats(9, 5);
    let p = dense_p(&lats, lmax, mmax);
    let mut s = 17u64;
    let entries: Vec<Complex64> = (0..(mmax + 1) * lats.len())
        .map(|_| c(2.0 * lcg_unit(&mut s) - 1.0, 2.0 * lcg_unit(&mut s) - 1.0))
        .collect();
    let m_set: Vec<usize> = (0..=mmax).collect();
    let panel = DeltaPanel::from_entries(PanelKind::S, (0..lats.len()).collect(), m_set.clone(), entries).unwrap();
    let alm = accumulate_alm(&panel, &lats, &m_set, lmax, mmax).unwrap();
    for m in 0..=mmax {
        for l in m..=lmax {
            let want: Complex64 = (0..lats.len()).map(|r| panel.get(r, m) * p[m][r][l - m]).sum();
            assert!((alm.get(l, m) - want).norm() <= 1e-13);
        }
    }
}

#[test]
fn synthesis_matches_direct_double_sum() {
    let grid = Arc::new(build_gauss_legendre_grid(32, 64).unwrap());
    let (lmax, mmax) = (31, 31);
    let alm = random_alm(lmax, mmax, 2024).unwrap();
    let map = synthesis(&alm, &grid).unwrap();
    let ladder = ScaleLadder::default();
    let mut s = 99u64;
    for _ in 0..20 {
        let pix = (lcg_unit(&mut s) * grid.n_pix as f64) as usize;
        let ring = grid.rings.iter().find(|r| r.pixel_range().contains(&pix)).unwrap();
        let phi = ring.phi_0 + 2.0 * PI * (pix - ring.pixel_offset) as f64 / ring.n_phi as f64;
        let mut want = 0.0;
        for m in 0..=mmax {
            let row = plm_row(m, ring.cos_theta, lmax, &ladder).unwrap();
            let e = c(0.0, m as f64 * phi).exp();
            for l in m..=lmax {
                let term = alm.get(l, m) * row[l - m] * e;
                want += if m == 0 { term.re } else { 2.0 * term.re };
            }
        }
        assert!((map.pixels[pix] - want).abs() <= 1e-11, "pixel {pix}");
    }
}

#[test]
fn dipole_map() {
    let grid = Arc::new(build_healpix_grid(4).unwrap());
    let mut alm = AlmSet::zeros(1, 1).unwrap();
    alm.set(1, 0, c(1.0, 0.0));
    let map = synthesis(&alm, &grid).unwrap();
    let k = (3.0 / (4.0 * PI)).sqrt();
    for ring in &grid.rings {
        for &v in map.ring_pixels(ring.index) {
            assert!((v - k * ring.cos_theta).abs() <= 1e-14);
        }
    }
}

#[test]
fn gauss_legendre_round_trip_is_exact() {
    let grid = Arc::new(build_gauss_legendre_grid(48, 97).unwrap());
    let alm = random_alm(47, 47, 8).unwrap();
    let back = analysis(&synthesis(&alm, &grid).unwrap(), 47, 47).unwrap();
    assert!(roundtrip_error(&alm, &back).unwrap() <= 1e-10);
}

#[test]
fn healpix_round_trip_is_approximate() {
    let gl = Arc::new(build_gauss_legendre_grid(65, 129).unwrap());
    let hp = Arc::new(build_healpix_grid(64).unwrap());
    let alm = random_alm(64, 64, 5).unwrap();
    let e_gl = roundtrip_error(&alm, &analysis(&synthesis(&alm, &gl).unwrap(), 64, 64).unwrap()).unwrap();
    let e_hp = roundtrip_error(&alm, &analysis(&synthesis(&alm, &hp).unwrap(), 64, 64).unwrap()).unwrap();
    assert!(e_hp < 1e-2, "{e_hp}");
    assert!(e_hp > e_gl);
}

#[test]
fn kernels_and_pairing_agree() {
    let grid = Arc::new(build_healpix_grid(32).unwrap());
    let alm = random_alm(128, 128, 77).unwrap();
    let base = synthesis(&alm, &grid).unwrap();
    let unpaired = KernelOptions {
        pair_rings: false,
        ..KernelOptions::default()
    };
    for (kernel, opts) in [
        (KernelVariant::RingMajor, KernelOptions::default()),
        (KernelVariant::MMajor, unpaired),
        (KernelVariant::RingMajor, unpaired),
    ] {
        let other = synthesis_with(&alm, &grid, kernel, opts).unwrap();
        let d = base.pixels.iter().zip(&other.pixels).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(d <= 1e-12, "{kernel:?}: {d}");
    }
    let a1 = analysis(&base, 128, 128).unwrap();
    let a2 = analysis_with(&base, 128, 128, KernelVariant::RingMajor, KernelOptions::default()).unwrap();
    let a3 = analysis_with(&base, 128, 128, KernelVariant::MMajor, unpaired).unwrap();
    assert!(max_diff(a1.values(), a2.values()) <= 1e-12);
    assert!(max_diff(a1.values(), a3.values()) <= 1e-12);
}

#[test]
fn partial_reductions() {
    let (lmax, mmax) = (20, 20);
    let grid = Arc::new(build_gauss_legendre_grid(24, 48).unwrap());
    let lats = grid.latitudes();
    let n = lats.len();
    let mut s = 4u64;
    let m_set: Vec<usize> = (0..=mmax).collect();
    let entries: Vec<Complex64> =
        (0..(mmax + 1) * n).map(|_| c(lcg_unit(&mut s) - 0.5, lcg_unit(&mut s) - 0.5)).collect();
    let full = DeltaPanel::from_entries(PanelKind::S, (0..n).collect(), m_set.clone(), entries).unwrap();
    let reference = accumulate_alm(&full, &lats, &m_set, lmax, mmax).unwrap();

    let restrict = |rings: &[usize]| {
        let mut p = DeltaPanel::zeros(PanelKind::S, rings.to_vec(), m_set.clone());
        for (pos, &r) in rings.iter().enumerate() {
            for mi in 0..m_set.len() {
                p.set(pos, mi, full.get(r, mi));
            }
        }
        accumulate_alm_partial(&p, &lats, &m_set, lmax, mmax).unwrap()
    };
    let split = |k: usize| -> Vec<_> {
        (0..k)
            .map(|i| {
                let rings: Vec<usize> = (0..n).filter(|r| r % k == i).collect();
                restrict(&rings)
            })
            .collect()
    };

    let one = reduce_partials(&[restrict(&(0..n).collect::<Vec<_>>())]).unwrap();
    assert_eq!(one, reference);
    let two = reduce_partials(&split(2)).unwrap();
    assert!(max_diff(two.values(), reference.values()) <= 1e-13);
    let eight = reduce_partials(&split(8)).unwrap();
    assert!(max_diff(eight.values(), two.values()) <= 1e-12);
    assert_eq!(reduce_partials(&split(8)).unwrap(), eight);

    let overlap = vec![restrict(&[0, 1, 2]), restrict(&[2, 3])];
    assert!(reduce_partials(&overlap).is_err());
}

#[test]
fn gauss_legendre_parseval() {
    let grid = Arc::new(build_gauss_legendre_grid(40, 81).unwrap());
    let alm = random_alm(39, 39, 31).unwrap();
    let map = synthesis(&alm, &grid).unwrap();
    let mut lhs = 0.0;
    for ring in &grid.rings {
        lhs += ring.weight * map.ring_pixels(ring.index).iter().map(|v| v * v).sum::<f64>();
    }
    let mut rhs = 0.0;
    for m in 0..=alm.mmax() {
        let k = if m == 0 { 1.0 } else { 2.0 };
        rhs += k * alm.m_slice(m).iter().map(|v| v.norm_sqr()).sum::<f64>();
    }
    assert!(((lhs - rhs) / rhs).abs() <= 1e-8);
}

fn scaled_sum(a: &AlmSet, x: f64, b: &AlmSet, y: f64) -> AlmSet {
    let values = a.values().iter().zip(b.values()).map(|(u, v)| u * x + v * y).collect();
    AlmSet::from_values(a.lmax(), a.mmax(), values).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn adjointness(seed in any::<u64>(), lmax in 0usize..24, n_rings in 1usize..12) {
        let mmax = lmax / 2;
        let lats = random_lats(n_rings, seed);
        let alm = random_alm(lmax, mmax, seed ^ 1).unwrap();
        let m_set: Vec<usize> = (0..=mmax).collect();
        let mut s = seed ^ 2;
        let d: Vec<Complex64> = (0..(mmax + 1) * n_rings)
            .map(|_| c(lcg_unit(&mut s) - 0.5, lcg_unit(&mut s) - 0.5))
            .collect();
        let panel = DeltaPanel::from_entries(PanelKind::S, (0..n_rings).collect(), m_set.clone(), d).unwrap();
        let delta = compute_delta_a_with(&alm, &lats, &m_set, KernelOptions::default()).unwrap();
        let acc = accumulate_alm(&panel, &lats, &m_set, lmax, mmax).unwrap();
        let lhs: Complex64 = delta.entries().iter().zip(panel.entries()).map(|(u, v)| u.conj() * v).sum();
        let rhs: Complex64 = alm.values().iter().zip(acc.values()).map(|(u, v)| u.conj() * v).sum();
        let scale = lhs.norm().max(rhs.norm()).max(1e-300);
        prop_assert!((lhs - rhs).norm() <= 1e-11 * scale.max(1.0));
    }

    #[test]
    fn linearity(seed in any::<u64>(), x in -2.0f64..2.0, y in -2.0f64..2.0) {
        let grid = Arc::new(build_gauss_legendre_grid(12, 25).unwrap());
        let a = random_alm(11, 11, seed).unwrap();
        let b = random_alm(11, 11, seed.wrapping_add(1)).unwrap();
        let sa = synthesis(&a, &grid).unwrap();
        let sb = synthesis(&b, &grid).unwrap();
        let sab = synthesis(&scaled_sum(&a, x, &b, y), &grid).unwrap();
        for i in 0..grid.n_pix {
            prop_assert!((sab.pixels[i] - (x * sa.pixels[i] + y * sb.pixels[i])).abs() <= 1e-12);
        }
        let combo = SkyMap::new(grid.clone(), (0..grid.n_pix).map(|i| x * sa.pixels[i] + y * sb.pixels[i]).collect()).unwrap();
        let aa = analysis(&sa, 11, 11).unwrap();
        let ab = analysis(&sb, 11, 11).unwrap();
        let ac = analysis(&combo, 11, 11).unwrap();
        let expect = scaled_sum(&aa, x, &ab, y);
        prop_assert!(max_diff(ac.values(), expect.values()) <= 1e-12);
    }
}
