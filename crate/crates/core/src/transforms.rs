//! Legendre-stage kernels and whole-sphere synthesis and analysis.
//!
//! Synthesis computes, for every order `m` and ring `r`,
//! `Δ^A_m(r) = sum_l a_lm P_lm(cos θ_r)` and then Fourier-synthesizes each
//! ring. Analysis Fourier-analyzes each ring into `Δ^S_m(r)` and then
//! accumulates `a_lm = sum_r Δ^S_m(r) P_lm(cos θ_r)`.
//!
//! Two loop orderings are provided. The m-major kernels precompute the
//! recurrence coefficients once per order and sweep all rings; the
//! ring-major kernels take one ring (or mirror pair) per work item and
//! regenerate the coefficients in fixed tiles of [`BETA_TILE`] entries. The
//! degree `l` is the innermost loop in both. Rings that mirror each other
//! across the equator share one recurrence: `P_lm(-x) = (-1)^(l+m) P_lm(x)`.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{invalid, Result, ShtError};
use crate::fourier::{ring_analysis_into, ring_synthesis_into, FftPlans, FourierWorkspace};
use crate::grid::PixelGrid;
use crate::legendre::{
    check_argument, fill_row, fill_step_tile, recurrence_starts, start_value, Latitude, Recurrence,
    RecurrenceCoeffs, ScaleLadder,
};

/// Size of the coefficient tile used by the ring-major kernels.
pub const BETA_TILE: usize = 256;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Complex harmonic coefficients `a_lm` for `0 <= m <= mmax`,
/// `m <= l <= lmax`, stored m-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AlmSet {
    lmax: usize,
    mmax: usize,
    values: Vec<Complex64>,
}

impl AlmSet {
    pub fn zeros(lmax: usize, mmax: usize) -> Result<Self> {
        if mmax > lmax {
            return invalid(format!("mmax={mmax} exceeds lmax={lmax}"));
        }
        Ok(AlmSet {
            lmax,
            mmax,
            values: vec![ZERO; Self::count(lmax, mmax)],
        })
    }

    pub fn from_values(lmax: usize, mmax: usize, values: Vec<Complex64>) -> Result<Self> {
        if mmax > lmax {
            return invalid(format!("mmax={mmax} exceeds lmax={lmax}"));
        }
        if values.len() != Self::count(lmax, mmax) {
            return invalid(format!(
                "expected {} coefficients for lmax={lmax} mmax={mmax}, got {}",
                Self::count(lmax, mmax),
                values.len()
            ));
        }
        Ok(AlmSet { lmax, mmax, values })
    }

    /// Number of stored coefficients, `sum_m (lmax - m + 1)`.
    pub fn count(lmax: usize, mmax: usize) -> usize {
        (mmax + 1) * (lmax + 1) - mmax * (mmax + 1) / 2
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    pub fn mmax(&self) -> usize {
        self.mmax
    }

    fn offset(&self, m: usize) -> usize {
        m * (2 * self.lmax + 3 - m) / 2
    }

    pub fn index(&self, l: usize, m: usize) -> usize {
        debug_assert!(m <= self.mmax && m <= l && l <= self.lmax);
        self.offset(m) + (l - m)
    }

    pub fn get(&self, l: usize, m: usize) -> Complex64 {
        self.values[self.index(l, m)]
    }

    pub fn set(&mut self, l: usize, m: usize, v: Complex64) {
        let i = self.index(l, m);
        self.values[i] = v;
    }

    /// Coefficients of order `m`, `l = m ..= lmax`.
    pub fn m_slice(&self, m: usize) -> &[Complex64] {
        let o = self.offset(m);
        &self.values[o..o + self.lmax - m + 1]
    }

    pub fn m_slice_mut(&mut self, m: usize) -> &mut [Complex64] {
        let o = self.offset(m);
        let n = self.lmax - m + 1;
        &mut self.values[o..o + n]
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Disjoint mutable views of every order, indexed by `m`.
    pub fn m_slices_mut(&mut self) -> Vec<&mut [Complex64]> {
        let mut out = Vec::with_capacity(self.mmax + 1);
        let mut rest: &mut [Complex64] = &mut self.values;
        for m in 0..=self.mmax {
            let (head, tail) = std::mem::take(&mut rest).split_at_mut(self.lmax - m + 1);
            out.push(head);
            rest = tail;
        }
        out
    }

    /// Views of the orders in `ms`, in that order. `ms` must not repeat.
    pub(crate) fn select_mut(&mut self, ms: &[usize]) -> Vec<&mut [Complex64]> {
        let mut all: Vec<Option<&mut [Complex64]>> = self.m_slices_mut().into_iter().map(Some).collect();
        ms.iter().map(|&m| all[m].take().expect("order listed once")).collect()
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PanelKind {
    /// Synthesis side, `Δ^A`.
    A,
    /// Analysis side, `Δ^S`.
    S,
}

/// `Δ_m(r)` over `ring_set × m_set`, stored m-major: the entries of one
/// order are contiguous over the rings.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaPanel {
    pub kind: PanelKind,
    pub ring_set: Vec<usize>,
    pub m_set: Vec<usize>,
    entries: Vec<Complex64>,
}

impl DeltaPanel {
    pub fn zeros(kind: PanelKind, ring_set: Vec<usize>, m_set: Vec<usize>) -> Self {
        let n = ring_set.len() * m_set.len();
        DeltaPanel {
            kind,
            ring_set,
            m_set,
            entries: vec![ZERO; n],
        }
    }

    pub fn from_entries(
        kind: PanelKind,
        ring_set: Vec<usize>,
        m_set: Vec<usize>,
        entries: Vec<Complex64>,
    ) -> Result<Self> {
        if entries.len() != ring_set.len() * m_set.len() {
            return invalid(format!(
                "panel of {} rings x {} orders needs {} entries, got {}",
                ring_set.len(),
                m_set.len(),
                ring_set.len() * m_set.len(),
                entries.len()
            ));
        }
        Ok(DeltaPanel {
            kind,
            ring_set,
            m_set,
            entries,
        })
    }

    pub fn n_rings(&self) -> usize {
        self.ring_set.len()
    }

    /// Entry at positions `(ring_pos, m_pos)` within `ring_set` and `m_set`.
    pub fn get(&self, ring_pos: usize, m_pos: usize) -> Complex64 {
        self.entries[m_pos * self.ring_set.len() + ring_pos]
    }

    pub fn set(&mut self, ring_pos: usize, m_pos: usize, v: Complex64) {
        let n = self.ring_set.len();
        self.entries[m_pos * n + ring_pos] = v;
    }

    /// All rings of the order at position `m_pos`.
    pub fn m_row(&self, m_pos: usize) -> &[Complex64] {
        let n = self.ring_set.len();
        &self.entries[m_pos * n..(m_pos + 1) * n]
    }

    pub fn m_row_mut(&mut self, m_pos: usize) -> &mut [Complex64] {
        let n = self.ring_set.len();
        &mut self.entries[m_pos * n..(m_pos + 1) * n]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    /// Entries of the ring at `ring_pos` across all orders of `m_set`.
    pub fn ring_column(&self, ring_pos: usize) -> Vec<Complex64> {
        let n = self.ring_set.len();
        (0..self.m_set.len()).map(|mi| self.entries[mi * n + ring_pos]).collect()
    }
}

/// Real map sampled on a grid, pixels in ring order.
#[derive(Debug, Clone, PartialEq)]
pub struct SkyMap {
    pub grid: Arc<PixelGrid>,
    pub pixels: Vec<f64>,
}

impl SkyMap {
    pub fn new(grid: Arc<PixelGrid>, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != grid.n_pix {
            return invalid(format!(
                "map has {} pixels, grid has {}",
                pixels.len(),
                grid.n_pix
            ));
        }
        Ok(SkyMap { grid, pixels })
    }

    pub fn zeros(grid: Arc<PixelGrid>) -> Self {
        let n = grid.n_pix;
        SkyMap {
            grid,
            pixels: vec![0.0; n],
        }
    }

    pub fn ring_pixels(&self, ring: usize) -> &[f64] {
        &self.pixels[self.grid.rings[ring].pixel_range()]
    }
}

/// Loop ordering of the Legendre stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KernelVariant {
    /// Orders outermost, rings, then degrees.
    #[default]
    MMajor,
    /// Rings outermost, orders, then degrees.
    RingMajor,
}

impl KernelVariant {
    pub fn name(self) -> &'static str {
        match self {
            KernelVariant::MMajor => "m-major",
            KernelVariant::RingMajor => "ring-major",
        }
    }
}

impl std::str::FromStr for KernelVariant {
    type Err = ShtError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "m-major" => Ok(KernelVariant::MMajor),
            "ring-major" => Ok(KernelVariant::RingMajor),
            _ => invalid(format!("unknown kernel variant '{s}'")),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct KernelOptions {
    /// Share one recurrence between mirror rings.
    pub pair_rings: bool,
    pub ladder: ScaleLadder,
}

impl Default for KernelOptions {
    fn default() -> Self {
        KernelOptions {
            pair_rings: true,
            ladder: ScaleLadder::default(),
        }
    }
}

/// One ring, or a ring and its mirror image across the equator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct RingGroup {
    pub north: usize,
    pub south: Option<usize>,
}

impl RingGroup {
    pub(crate) fn len(&self) -> usize {
        1 + self.south.is_some() as usize
    }
}

/// Groups the ring positions `ids` (indices into `lats`) into mirror pairs
/// where both members are present and mirror exactly.
pub(crate) fn ring_groups(lats: &[Latitude], ids: &[usize], pair: bool) -> Vec<RingGroup> {
    let mut southern: std::collections::HashMap<(u64, u64), Vec<usize>> = Default::default();
    if pair {
        for (pos, &r) in ids.iter().enumerate().rev() {
            let l = lats[r];
            if l.cos < 0.0 {
                southern.entry(((-l.cos).to_bits(), l.sin.to_bits())).or_default().push(pos);
            }
        }
    }
    let mut groups = Vec::with_capacity(ids.len());
    let mut taken = vec![false; ids.len()];
    for (pos, &r) in ids.iter().enumerate() {
        if taken[pos] {
            continue;
        }
        let l = lats[r];
        let south = if l.cos > 0.0 {
            southern.get_mut(&(l.cos.to_bits(), l.sin.to_bits())).and_then(|v| v.pop())
        } else {
            None
        };
        if let Some(s) = south {
            taken[s] = true;
        }
        taken[pos] = true;
        groups.push(RingGroup { north: pos, south });
    }
    groups
}

fn check_lats(lats: &[Latitude]) -> Result<()> {
    for l in lats {
        check_argument(l.cos)?;
    }
    Ok(())
}

fn check_m_set(m_set: &[usize], mmax: usize) -> Result<()> {
    let mut seen = vec![false; mmax + 1];
    for &m in m_set {
        if m > mmax {
            return invalid(format!("order {m} exceeds mmax={mmax}"));
        }
        if std::mem::replace(&mut seen[m], true) {
            return invalid(format!("order {m} listed twice"));
        }
    }
    Ok(())
}

/// `sum_i a_i p_i` split by the parity of `i`, skipping the leading zeros
/// of `p`. Returns (even, odd).
#[inline]
fn dot_by_parity(a: &[Complex64], p: &[f64], first: usize) -> (Complex64, Complex64) {
    let (mut even, mut odd) = (ZERO, ZERO);
    let mut i = first;
    if i % 2 == 1 && i < p.len() {
        odd += a[i] * p[i];
        i += 1;
    }
    let (a, p) = (&a[i..], &p[i..]);
    let mut ac = a.chunks_exact(2);
    let mut pc = p.chunks_exact(2);
    for (x, y) in (&mut ac).zip(&mut pc) {
        even += x[0] * y[0];
        odd += x[1] * y[1];
    }
    if let (Some(x), Some(y)) = (ac.remainder().first(), pc.remainder().first()) {
        even += x * y;
    }
    (even, odd)
}

/// `acc_i += (i even ? even : odd) * p_i` from `first` on.
#[inline]
fn axpy_by_parity(acc: &mut [Complex64], p: &[f64], first: usize, even: Complex64, odd: Complex64) {
    for i in first..p.len() {
        let c = if (i & 1) == 0 { even } else { odd };
        acc[i] += c * p[i];
    }
}

/// Shared state of one Legendre stage: band limits, starting amplitudes and
/// ring latitudes.
#[derive(Debug, Clone)]
pub(crate) struct LegendreStage<'a> {
    pub lmax: usize,
    pub mu: Vec<f64>,
    pub lats: &'a [Latitude],
    pub opts: KernelOptions,
}

impl<'a> LegendreStage<'a> {
    pub(crate) fn new(lmax: usize, mmax: usize, lats: &'a [Latitude], opts: KernelOptions) -> Self {
        LegendreStage {
            lmax,
            mu: recurrence_starts(mmax),
            lats,
            opts,
        }
    }

    fn steps_for(&self, m: usize, group: &RingGroup) -> u64 {
        ((self.lmax - m + 1) * group.len()) as u64
    }

    /// m-major synthesis kernel. For each order of `ms`, writes `Δ^A_m` of
    /// every ring in `ring_ids` into consecutive rows of `out`.
    pub(crate) fn synth_m_major(
        &self,
        alm: &AlmSet,
        ring_ids: &[usize],
        ms: &[usize],
        out: &mut [Complex64],
    ) -> u64 {
        let n = ring_ids.len();
        let groups = ring_groups(self.lats, ring_ids, self.opts.pair_rings);
        let mut row = vec![0.0; self.lmax + 1];
        let mut steps = 0;
        for (mi, &m) in ms.iter().enumerate() {
            let coeffs = RecurrenceCoeffs::new(m, self.lmax).expect("m <= lmax");
            let a = alm.m_slice(m);
            let row = &mut row[..self.lmax - m + 1];
            let dst = &mut out[mi * n..(mi + 1) * n];
            for g in &groups {
                let first = fill_row(&coeffs, self.lats[ring_ids[g.north]], self.mu[m], &self.opts.ladder, row);
                let (even, odd) = dot_by_parity(a, row, first);
                dst[g.north] = even + odd;
                if let Some(s) = g.south {
                    dst[s] = even - odd;
                }
                steps += self.steps_for(m, g);
            }
        }
        steps
    }

    /// Writes `P_lm` for the ring at `lats[ring]` into `row`, generating
    /// the recurrence coefficients tile by tile.
    fn fill_row_tiled(&self, m: usize, ring: usize, tile: &mut [(f64, f64)], row: &mut [f64]) -> usize {
        let lat = self.lats[ring];
        let start = start_value(self.mu[m], m, lat.sin, &self.opts.ladder);
        let mut rec = Recurrence::new(lat.cos, start, &self.opts.ladder);
        row[0] = rec.current();
        let mut l = m + 1;
        while l <= self.lmax {
            let len = (self.lmax + 1 - l).min(tile.len());
            fill_step_tile(m, l, &mut tile[..len]);
            rec.advance(&tile[..len], &mut row[l - m..l - m + len]);
            l += len;
        }
        row.iter().position(|&v| v != 0.0).unwrap_or(row.len())
    }

    /// Ring-major synthesis kernel over `groups` (positions into
    /// `ring_ids`); rows of `out` are orders of `ms`, columns positions of
    /// `ring_ids`.
    pub(crate) fn synth_ring_major(
        &self,
        alm: &AlmSet,
        ring_ids: &[usize],
        groups: &[RingGroup],
        ms: &[usize],
        out: &mut [Complex64],
    ) -> u64 {
        let n = ring_ids.len();
        let mut tile = [(0.0, 0.0); BETA_TILE];
        let mut row = vec![0.0; self.lmax + 1];
        let mut steps = 0;
        for g in groups {
            for (mi, &m) in ms.iter().enumerate() {
                let row = &mut row[..self.lmax - m + 1];
                let first = self.fill_row_tiled(m, ring_ids[g.north], &mut tile, row);
                let (even, odd) = dot_by_parity(alm.m_slice(m), row, first);
                out[mi * n + g.north] = even + odd;
                if let Some(s) = g.south {
                    out[mi * n + s] = even - odd;
                }
                steps += self.steps_for(m, g);
            }
        }
        steps
    }

    /// m-major analysis kernel: accumulates `a_lm` for every order of `ms`
    /// from the panel rows (`panel[mi * n + ring_pos]`) into `alm`.
    pub(crate) fn accumulate_m_major(
        &self,
        panel: &[Complex64],
        ring_ids: &[usize],
        ms: &[usize],
        acc: &mut [&mut [Complex64]],
    ) -> u64 {
        let n = ring_ids.len();
        let groups = ring_groups(self.lats, ring_ids, self.opts.pair_rings);
        let mut row = vec![0.0; self.lmax + 1];
        let mut steps = 0;
        for (mi, &m) in ms.iter().enumerate() {
            let coeffs = RecurrenceCoeffs::new(m, self.lmax).expect("m <= lmax");
            let row = &mut row[..self.lmax - m + 1];
            let src = &panel[mi * n..(mi + 1) * n];
            let acc = &mut *acc[mi];
            for g in &groups {
                let first = fill_row(&coeffs, self.lats[ring_ids[g.north]], self.mu[m], &self.opts.ladder, row);
                let (even, odd) = pair_combination(src, g);
                axpy_by_parity(acc, row, first, even, odd);
                steps += self.steps_for(m, g);
            }
        }
        steps
    }

    /// Ring-major analysis kernel: accumulates the contribution of `groups`
    /// into `alm` for every order of `ms`.
    pub(crate) fn accumulate_ring_major(
        &self,
        panel: &[Complex64],
        ring_ids: &[usize],
        groups: &[RingGroup],
        ms: &[usize],
        acc: &mut [&mut [Complex64]],
    ) -> u64 {
        let n = ring_ids.len();
        let mut tile = [(0.0, 0.0); BETA_TILE];
        let mut row = vec![0.0; self.lmax + 1];
        let mut steps = 0;
        for g in groups {
            for (mi, &m) in ms.iter().enumerate() {
                let row = &mut row[..self.lmax - m + 1];
                let first = self.fill_row_tiled(m, ring_ids[g.north], &mut tile, row);
                let (even, odd) = pair_combination(&panel[mi * n..(mi + 1) * n], g);
                axpy_by_parity(&mut *acc[mi], row, first, even, odd);
                steps += self.steps_for(m, g);
            }
        }
        steps
    }
}

/// Coefficients multiplying even and odd `l - m` for a ring group:
/// `Δ_n ± Δ_s` for a mirror pair, `Δ_n` for a single ring.
#[inline]
fn pair_combination(src: &[Complex64], g: &RingGroup) -> (Complex64, Complex64) {
    let dn = src[g.north];
    match g.south {
        Some(s) => (dn + src[s], dn - src[s]),
        None => (dn, dn),
    }
}

/// `Δ^A_m(r)` for every order in `m_set` and every ring, m-major ordering.
pub fn compute_delta_a(alm: &AlmSet, lats: &[Latitude], m_set: &[usize]) -> Result<DeltaPanel> {
    compute_delta_a_with(alm, lats, m_set, KernelOptions::default())
}

pub fn compute_delta_a_with(
    alm: &AlmSet,
    lats: &[Latitude],
    m_set: &[usize],
    opts: KernelOptions,
) -> Result<DeltaPanel> {
    check_lats(lats)?;
    check_m_set(m_set, alm.mmax())?;
    let stage = LegendreStage::new(alm.lmax(), alm.mmax(), lats, opts);
    let ring_ids: Vec<usize> = (0..lats.len()).collect();
    let mut panel = DeltaPanel::zeros(PanelKind::A, ring_ids.clone(), m_set.to_vec());
    stage.synth_m_major(alm, &ring_ids, m_set, &mut panel.entries);
    Ok(panel)
}

/// Same contract as [`compute_delta_a`], rings outermost.
pub fn compute_delta_a_ring_major(alm: &AlmSet, lats: &[Latitude], m_set: &[usize]) -> Result<DeltaPanel> {
    compute_delta_a_ring_major_with(alm, lats, m_set, KernelOptions::default())
}

pub fn compute_delta_a_ring_major_with(
    alm: &AlmSet,
    lats: &[Latitude],
    m_set: &[usize],
    opts: KernelOptions,
) -> Result<DeltaPanel> {
    check_lats(lats)?;
    check_m_set(m_set, alm.mmax())?;
    let stage = LegendreStage::new(alm.lmax(), alm.mmax(), lats, opts);
    let ring_ids: Vec<usize> = (0..lats.len()).collect();
    let groups = ring_groups(lats, &ring_ids, opts.pair_rings);
    let mut panel = DeltaPanel::zeros(PanelKind::A, ring_ids.clone(), m_set.to_vec());
    stage.synth_ring_major(alm, &ring_ids, &groups, m_set, &mut panel.entries);
    Ok(panel)
}

fn check_panel_orders(panel: &DeltaPanel, m_set: &[usize], mmax: usize) -> Result<Vec<usize>> {
    check_m_set(m_set, mmax)?;
    m_set
        .iter()
        .map(|m| {
            panel.m_set.iter().position(|x| x == m).ok_or_else(|| {
                ShtError::InvalidArgument(format!("panel does not contain order {m}"))
            })
        })
        .collect()
}

/// Panel rows for `m_set` in that order, contiguous.
pub(crate) fn gather_rows(panel: &DeltaPanel, positions: &[usize]) -> Vec<Complex64> {
    positions.iter().flat_map(|&p| panel.m_row(p).iter().copied()).collect()
}

/// `a_lm = sum_r Δ^S_m(r) P_lm(cos θ_r)` for the orders of `m_set`; the
/// remaining orders of the result are zero. The panel must cover every
/// ring of `lats`, in order.
pub fn accumulate_alm(
    panel: &DeltaPanel,
    lats: &[Latitude],
    m_set: &[usize],
    lmax: usize,
    mmax: usize,
) -> Result<AlmSet> {
    accumulate_alm_with(panel, lats, m_set, lmax, mmax, KernelOptions::default())
}

pub fn accumulate_alm_with(
    panel: &DeltaPanel,
    lats: &[Latitude],
    m_set: &[usize],
    lmax: usize,
    mmax: usize,
    opts: KernelOptions,
) -> Result<AlmSet> {
    check_lats(lats)?;
    if panel.ring_set.len() != lats.len() || panel.ring_set.iter().enumerate().any(|(i, &r)| i != r) {
        return invalid("panel does not cover every ring of the grid");
    }
    let mut alm = AlmSet::zeros(lmax, mmax)?;
    let positions = check_panel_orders(panel, m_set, mmax)?;
    let rows = gather_rows(panel, &positions);
    let stage = LegendreStage::new(lmax, mmax, lats, opts);
    stage.accumulate_m_major(&rows, &panel.ring_set, m_set, &mut alm.select_mut(m_set));
    Ok(alm)
}

/// Contribution of a subset of rings to the harmonic coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialAlm {
    pub rings: Vec<usize>,
    pub alm: AlmSet,
}

/// Ring-major accumulation over the rings present in `panel`. `lats` is
/// indexed by global ring number.
pub fn accumulate_alm_partial(
    panel: &DeltaPanel,
    lats: &[Latitude],
    m_set: &[usize],
    lmax: usize,
    mmax: usize,
) -> Result<PartialAlm> {
    accumulate_alm_partial_with(panel, lats, m_set, lmax, mmax, KernelOptions::default())
}

pub fn accumulate_alm_partial_with(
    panel: &DeltaPanel,
    lats: &[Latitude],
    m_set: &[usize],
    lmax: usize,
    mmax: usize,
    opts: KernelOptions,
) -> Result<PartialAlm> {
    check_lats(lats)?;
    if let Some(&r) = panel.ring_set.iter().find(|&&r| r >= lats.len()) {
        return invalid(format!("ring {r} is not part of the grid"));
    }
    let mut alm = AlmSet::zeros(lmax, mmax)?;
    let positions = check_panel_orders(panel, m_set, mmax)?;
    let rows = gather_rows(panel, &positions);
    let stage = LegendreStage::new(lmax, mmax, lats, opts);
    let groups = ring_groups(lats, &panel.ring_set, opts.pair_rings);
    stage.accumulate_ring_major(&rows, &panel.ring_set, &groups, m_set, &mut alm.select_mut(m_set));
    Ok(PartialAlm {
        rings: panel.ring_set.clone(),
        alm,
    })
}

/// Sums partial results in the order given (ascending worker id by
/// convention), so a fixed partition always yields the same bits.
pub fn reduce_partials(partials: &[PartialAlm]) -> Result<AlmSet> {
    let first = partials
        .first()
        .ok_or_else(|| ShtError::InvalidArgument("no partial results to reduce".into()))?;
    let (lmax, mmax) = (first.alm.lmax(), first.alm.mmax());
    let mut seen = std::collections::HashSet::new();
    for p in partials {
        if p.alm.lmax() != lmax || p.alm.mmax() != mmax {
            return invalid("partial results have different band limits");
        }
        for &r in &p.rings {
            if !seen.insert(r) {
                return invalid(format!("ring {r} appears in more than one partial result"));
            }
        }
    }
    let mut out = first.alm.clone();
    for p in &partials[1..] {
        for (o, v) in out.values.iter_mut().zip(&p.alm.values) {
            *o += v;
        }
    }
    Ok(out)
}

/// Fourier stage of synthesis for the rings in `ring_ids`: `columns[i]`
/// holds `Δ^A_m` for `m = 0..=mmax` of ring `ring_ids[i]`; samples are
/// written to the ring's pixel range of `pixels`.
pub(crate) fn fourier_synthesis_rings(
    grid: &PixelGrid,
    plans: &FftPlans,
    ring_ids: &[usize],
    columns: &[Vec<Complex64>],
    out: &mut [f64],
) -> Result<()> {
    let mut work = FourierWorkspace::new();
    for (&r, col) in ring_ids.iter().zip(columns) {
        let ring = &grid.rings[r];
        ring_synthesis_into(col, ring, plans, &mut work, &mut out[ring.pixel_range()])?;
    }
    Ok(())
}

/// Synthesizes a map from harmonic coefficients.
pub fn synthesis(alm: &AlmSet, grid: &Arc<PixelGrid>) -> Result<SkyMap> {
    synthesis_with(alm, grid, KernelVariant::MMajor, KernelOptions::default())
}

pub fn synthesis_with(
    alm: &AlmSet,
    grid: &Arc<PixelGrid>,
    kernel: KernelVariant,
    opts: KernelOptions,
) -> Result<SkyMap> {
    let lats = grid.latitudes();
    let m_set: Vec<usize> = (0..=alm.mmax()).collect();
    let panel = match kernel {
        KernelVariant::MMajor => compute_delta_a_with(alm, &lats, &m_set, opts)?,
        KernelVariant::RingMajor => compute_delta_a_ring_major_with(alm, &lats, &m_set, opts)?,
    };
    let plans = FftPlans::for_grid(grid);
    let ring_ids: Vec<usize> = (0..grid.n_rings()).collect();
    let columns: Vec<Vec<Complex64>> = ring_ids.iter().map(|&r| panel.ring_column(r)).collect();
    let mut map = SkyMap::zeros(grid.clone());
    fourier_synthesis_rings(grid, &plans, &ring_ids, &columns, &mut map.pixels)?;
    Ok(map)
}

/// `Δ^S_m(r)` for `m = 0..=mmax` of the rings in `ring_ids`, as a panel
/// over those rings.
pub(crate) fn fourier_analysis_rings(
    map: &SkyMap,
    plans: &FftPlans,
    ring_ids: &[usize],
    mmax: usize,
) -> Result<DeltaPanel> {
    let mut panel = DeltaPanel::zeros(PanelKind::S, ring_ids.to_vec(), (0..=mmax).collect());
    let mut work = FourierWorkspace::new();
    let mut spectrum = vec![ZERO; mmax + 1];
    for (pos, &r) in ring_ids.iter().enumerate() {
        let ring = &map.grid.rings[r];
        ring_analysis_into(map.ring_pixels(r), ring, plans, &mut work, &mut spectrum)?;
        for (m, v) in spectrum.iter().enumerate() {
            panel.set(pos, m, *v);
        }
    }
    Ok(panel)
}

/// Harmonic coefficients of a map up to `lmax`, `mmax`.
pub fn analysis(map: &SkyMap, lmax: usize, mmax: usize) -> Result<AlmSet> {
    analysis_with(map, lmax, mmax, KernelVariant::MMajor, KernelOptions::default())
}

pub fn analysis_with(
    map: &SkyMap,
    lmax: usize,
    mmax: usize,
    kernel: KernelVariant,
    opts: KernelOptions,
) -> Result<AlmSet> {
    if lmax < mmax {
        return invalid(format!("lmax={lmax} is smaller than mmax={mmax}"));
    }
    let grid = &map.grid;
    let plans = FftPlans::for_grid(grid);
    let ring_ids: Vec<usize> = (0..grid.n_rings()).collect();
    let panel = fourier_analysis_rings(map, &plans, &ring_ids, mmax)?;
    let lats = grid.latitudes();
    let m_set: Vec<usize> = (0..=mmax).collect();
    match kernel {
        KernelVariant::MMajor => accumulate_alm_with(&panel, &lats, &m_set, lmax, mmax, opts),
        KernelVariant::RingMajor => {
            Ok(accumulate_alm_partial_with(&panel, &lats, &m_set, lmax, mmax, opts)?.alm)
        }
    }
}
