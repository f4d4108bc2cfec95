//! Oracles shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use std::f64::consts::PI;

/// `P_lm(x)` from the explicit polynomial
/// `sqrt((2l+1)/4π (l-m)!/(l+m)!) (1-x^2)^(m/2) d^m/dx^m P_l(x)` with
/// `P_l(x) = 2^-l sum_k (-1)^k C(l,k) C(2l-2k,l) x^(l-2k)`.
pub fn explicit_plm(l: usize, m: usize, x: f64) -> f64 {
    fn fact(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }
    fn choose(n: usize, k: usize) -> f64 {
        fact(n) / (fact(k) * fact(n - k))
    }
    let mut d = 0.0;
    for k in 0..=(l - m) / 2 {
        let p = l - 2 * k - m;
        let c = choose(l, k) * choose(2 * l - 2 * k, l) * fact(l - 2 * k) / fact(p);
        d += if k % 2 == 0 { c } else { -c } * x.powi(p as i32);
    }
    d /= 2f64.powi(l as i32);
    let norm = ((2 * l + 1) as f64 / (4.0 * PI) * fact(l - m) / fact(l + m)).sqrt();
    norm * (1.0 - x * x).powf(m as f64 / 2.0) * d
}

// Sign and ln|P_lm(x)| from exact rational evaluation of the explicit
// polynomial (tests/oracles/legendre_spot.py).
#[allow(clippy::excessive_precision)]
pub const SPOT_VALUES: &[(usize, usize, f64, f64, f64)] = &[
    (2000, 2000, 0.999, 1.0, -6214.413025119277613551671),
    (2001, 2000, 0.999, 1.0, -6210.266625940114910276792),
    (2050, 2000, 0.999, 1.0, -6081.18025398093791841617),
    (2100, 2000, 0.999, 1.0, -5981.032340687153206260144),
    (2200, 2000, 0.999, 1.0, -5814.31493022111300117488),
    (2200, 2000, -0.3, 1.0, -1.407542027683129968263057),
    (1, 1, 0.5, 1.0, -1.206620605656453669219549),
    (10, 3, 0.25, -1.0, -1.681508134296765949721596),
];

/// Deterministic uniform numbers in [0, 1) for oracle inputs.
pub struct Lcg(pub u64);

impl Lcg {
    pub fn unit(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }
}
