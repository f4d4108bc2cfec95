//! Two-level parallel decomposition of the transforms.
//!
//! The harmonic domain is split over workers by order `m`, the map by rings.
//! A transform runs in two compute stages separated by one all-to-all
//! exchange of the `Δ` panel:
//!
//! ```text
//! synthesis: Legendre over M_i, all rings -> exchange -> FFT over R_i
//! analysis:  FFT over R_i -> exchange -> Legendre over M_i, all rings
//! ```
//!
//! Workers are simulated in-process: each one runs on its own OS threads,
//! the exchange is a barrier followed by delivery of one message per
//! ordered worker pair. Inside a worker the Legendre stage is split over
//! threads either by order (m-major kernel, min-max pairs per thread) or by
//! ring (ring-major kernel, per-thread partial sums reduced in thread
//! order).
//!
//! Orders are handed out in min-max pairs `(m', mmax - m')`, each of which
//! costs `2 lmax - mmax + 2` recurrence steps per ring whatever `m'` is.

use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use num_complex::Complex64;

use crate::error::{invalid, Result, ShtError};
use crate::fourier::{ring_synthesis_into, FftPlans, FourierWorkspace};
use crate::grid::PixelGrid;
use crate::legendre::Latitude;
use crate::transforms::{
    fourier_analysis_rings, gather_rows, ring_groups, AlmSet, DeltaPanel,
    KernelOptions, KernelVariant, LegendreStage, PanelKind, SkyMap,
};

/// Bytes per complex double.
pub const COMPLEX_BYTES: usize = 16;

/// Orders `M_i` and rings `R_i` owned by each worker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkerLayout {
    pub n_workers: usize,
    pub mmax: usize,
    pub n_rings: usize,
    pub m_sets: Vec<Vec<usize>>,
    pub ring_sets: Vec<Vec<usize>>,
}

impl WorkerLayout {
    pub fn new(grid: &PixelGrid, mmax: usize, n_workers: usize) -> Result<Self> {
        Ok(WorkerLayout {
            n_workers,
            mmax,
            n_rings: grid.n_rings(),
            m_sets: assign_m(mmax, n_workers)?,
            ring_sets: assign_rings(grid, n_workers)?,
        })
    }

    fn check(&self) -> Result<()> {
        if self.m_sets.len() != self.n_workers || self.ring_sets.len() != self.n_workers {
            return invalid("layout sets do not match the worker count");
        }
        let mut m_seen = vec![false; self.mmax + 1];
        for &m in self.m_sets.iter().flatten() {
            if m > self.mmax || std::mem::replace(&mut m_seen[m], true) {
                return invalid(format!("order {m} is out of range or assigned twice"));
            }
        }
        let mut r_seen = vec![false; self.n_rings];
        for &r in self.ring_sets.iter().flatten() {
            if r >= self.n_rings || std::mem::replace(&mut r_seen[r], true) {
                return invalid(format!("ring {r} is out of range or assigned twice"));
            }
        }
        if m_seen.iter().chain(&r_seen).any(|s| !s) {
            return invalid("layout does not cover every order and ring");
        }
        Ok(())
    }

    /// Recurrence steps per ring for worker `i`, `sum_{m in M_i} (lmax - m + 1)`.
    pub fn predicted_steps(&self, worker: usize, lmax: usize) -> u64 {
        self.m_sets[worker].iter().map(|&m| (lmax - m + 1) as u64).sum()
    }

    /// Text dump: one line per worker with its orders, rings and predicted
    /// recurrence steps over the whole grid.
    pub fn describe(&self, lmax: usize) -> String {
        let mut out = String::new();
        for w in 0..self.n_workers {
            out.push_str(&format!(
                "worker {w}: m={:?} rings={:?} predicted_steps={}\n",
                self.m_sets[w],
                self.ring_sets[w],
                self.predicted_steps(w, lmax) * self.n_rings as u64
            ));
        }
        out
    }
}

/// Upper bound on the worker count for `count` items when each worker must
/// hold at least two of them; a single worker is always allowed.
fn worker_cap(count: usize) -> usize {
    (count / 2).max(1)
}

/// Orders of each worker: worker `i` takes `i + k n` from the low end and
/// `mmax - i - k n` from the high end while the low value stays below the
/// high one. The middle order of an even `mmax` goes to worker
/// `(mmax / 2) mod n`.
pub fn assign_m(mmax: usize, n_workers: usize) -> Result<Vec<Vec<usize>>> {
    if n_workers == 0 {
        return invalid("need at least one worker");
    }
    if n_workers > worker_cap(mmax + 1) {
        return invalid(format!(
            "{n_workers} workers exceed the limit of {} for mmax={mmax}",
            worker_cap(mmax + 1)
        ));
    }
    let mut sets = Vec::with_capacity(n_workers);
    for i in 0..n_workers {
        let mut low = Vec::new();
        let mut high = Vec::new();
        let mut lo = i;
        while lo < mmax - lo {
            low.push(lo);
            high.push(mmax - lo);
            lo += n_workers;
        }
        if mmax.is_multiple_of(2) && (mmax / 2) % n_workers == i {
            low.push(mmax / 2);
        }
        high.reverse();
        low.extend(high);
        sets.push(low);
    }
    Ok(sets)
}

/// Rings of each worker: the northern rings (equator included) are split
/// into consecutive blocks of near-equal size, each joined by its mirror.
pub fn assign_rings(grid: &PixelGrid, n_workers: usize) -> Result<Vec<Vec<usize>>> {
    let n = grid.n_rings();
    if n_workers == 0 {
        return invalid("need at least one worker");
    }
    if n_workers > worker_cap(n) {
        return invalid(format!(
            "{n_workers} workers exceed the limit of {} for {n} rings",
            worker_cap(n)
        ));
    }
    let north = n.div_ceil(2);
    let (base, extra) = (north / n_workers, north % n_workers);
    let mut sets = Vec::with_capacity(n_workers);
    let mut start = 0;
    for w in 0..n_workers {
        let len = base + usize::from(w < extra);
        let mut set: Vec<usize> = (start..start + len).collect();
        set.extend((start..start + len).map(|k| n - 1 - k).filter(|&s| s >= north));
        set.sort_unstable();
        sets.push(set);
        start += len;
    }
    Ok(sets)
}

/// Orders of one worker split over its threads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThreadPartition {
    pub subsets: Vec<Vec<usize>>,
}

impl ThreadPartition {
    /// True when some thread received nothing.
    pub fn is_degenerate(&self) -> bool {
        self.subsets.iter().any(Vec::is_empty)
    }
}

/// Deals `(min, max)` pairs of `m_set` round-robin over `n_threads`; a
/// leftover single order goes to the thread with the smallest load, load
/// being recurrence steps `lmax - m + 1` per order.
pub fn thread_partition(m_set: &[usize], n_threads: usize, lmax: usize) -> Result<ThreadPartition> {
    if n_threads == 0 {
        return invalid("need at least one thread");
    }
    if let Some(&m) = m_set.iter().find(|&&m| m > lmax) {
        return invalid(format!("order {m} exceeds lmax={lmax}"));
    }
    let mut sorted = m_set.to_vec();
    sorted.sort_unstable();
    let mut subsets = vec![Vec::new(); n_threads];
    let (mut lo, mut hi) = (0, sorted.len());
    let mut next = 0;
    while hi - lo >= 2 {
        subsets[next].push(sorted[lo]);
        subsets[next].push(sorted[hi - 1]);
        lo += 1;
        hi -= 1;
        next = (next + 1) % n_threads;
    }
    if hi > lo {
        let load = |s: &Vec<usize>| s.iter().map(|&m| lmax - m + 1).sum::<usize>();
        let target = (0..n_threads).min_by_key(|&t| (load(&subsets[t]), t)).expect("n_threads >= 1");
        subsets[target].push(sorted[lo]);
    }
    for s in &mut subsets {
        s.sort_unstable();
    }
    Ok(ThreadPartition { subsets })
}

/// Elements shipped between every ordered pair of workers.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExchangeReport {
    /// `elements[src][dst]`.
    pub elements: Vec<Vec<usize>>,
}

impl ExchangeReport {
    pub fn total_elements(&self) -> usize {
        self.elements.iter().flatten().sum()
    }

    /// Elements crossing worker boundaries.
    pub fn remote_elements(&self) -> usize {
        let mut total = 0;
        for (s, row) in self.elements.iter().enumerate() {
            for (d, &e) in row.iter().enumerate() {
                if s != d {
                    total += e;
                }
            }
        }
        total
    }

    pub fn remote_bytes(&self) -> usize {
        self.remote_elements() * COMPLEX_BYTES
    }
}

fn position_table(items: &[usize], size: usize) -> Vec<Option<usize>> {
    let mut pos = vec![None; size];
    for (i, &v) in items.iter().enumerate() {
        pos[v] = Some(i);
    }
    pos
}

/// Redistributes panels sliced by order (worker `i` holds `M_i × all
/// rings`) into panels sliced by ring (worker `i` holds `R_i × all
/// orders`).
pub fn exchange(layout: &WorkerLayout, panels: &[DeltaPanel]) -> Result<(Vec<DeltaPanel>, ExchangeReport)> {
    layout.check()?;
    let n = layout.n_workers;
    if panels.len() != n {
        return invalid(format!("{} panels for {n} workers", panels.len()));
    }
    let all_rings: Vec<usize> = (0..layout.n_rings).collect();
    for (w, p) in panels.iter().enumerate() {
        if p.m_set != layout.m_sets[w] || p.ring_set != all_rings {
            return invalid(format!("panel of worker {w} does not match the layout"));
        }
    }
    let kind = panels[0].kind;
    let all_m: Vec<usize> = (0..=layout.mmax).collect();

    // mailbox[dst][src]: entries (m in M_src) x (r in R_dst), m-major.
    let mut report = ExchangeReport {
        elements: vec![vec![0; n]; n],
    };
    let mut mailbox: Vec<Vec<Vec<Complex64>>> = vec![vec![Vec::new(); n]; n];
    for (src, panel) in panels.iter().enumerate() {
        for (dst, rings) in layout.ring_sets.iter().enumerate() {
            let msg: Vec<Complex64> = (0..panel.m_set.len())
                .flat_map(|mi| rings.iter().map(move |&r| panel.get(r, mi)))
                .collect();
            report.elements[src][dst] = msg.len();
            mailbox[dst][src] = msg;
        }
    }

    let mut out = Vec::with_capacity(n);
    for (dst, rings) in layout.ring_sets.iter().enumerate() {
        let mut panel = DeltaPanel::zeros(kind, rings.clone(), all_m.clone());
        for (src, msg) in mailbox[dst].iter().enumerate() {
            let mut it = msg.iter();
            for &m in &layout.m_sets[src] {
                for ri in 0..rings.len() {
                    panel.set(ri, m, *it.next().expect("message length"));
                }
            }
        }
        out.push(panel);
    }
    Ok((out, report))
}

/// Inverse of [`exchange`]: ring-sliced panels back to order-sliced ones.
pub fn exchange_inverse(
    layout: &WorkerLayout,
    panels: &[DeltaPanel],
) -> Result<(Vec<DeltaPanel>, ExchangeReport)> {
    layout.check()?;
    let n = layout.n_workers;
    if panels.len() != n {
        return invalid(format!("{} panels for {n} workers", panels.len()));
    }
    let all_m: Vec<usize> = (0..=layout.mmax).collect();
    for (w, p) in panels.iter().enumerate() {
        if p.ring_set != layout.ring_sets[w] || p.m_set != all_m {
            return invalid(format!("panel of worker {w} does not match the layout"));
        }
    }
    let kind = panels[0].kind;
    let all_rings: Vec<usize> = (0..layout.n_rings).collect();

    let mut report = ExchangeReport {
        elements: vec![vec![0; n]; n],
    };
    let mut mailbox: Vec<Vec<Vec<Complex64>>> = vec![vec![Vec::new(); n]; n];
    for (src, panel) in panels.iter().enumerate() {
        for (dst, ms) in layout.m_sets.iter().enumerate() {
            let msg: Vec<Complex64> = ms
                .iter()
                .flat_map(|&m| (0..panel.ring_set.len()).map(move |ri| panel.get(ri, m)))
                .collect();
            report.elements[src][dst] = msg.len();
            mailbox[dst][src] = msg;
        }
    }

    let mut out = Vec::with_capacity(n);
    for (dst, ms) in layout.m_sets.iter().enumerate() {
        let mut panel = DeltaPanel::zeros(kind, all_rings.clone(), ms.clone());
        for (src, msg) in mailbox[dst].iter().enumerate() {
            let mut it = msg.iter();
            for mi in 0..ms.len() {
                for &r in &layout.ring_sets[src] {
                    panel.set(r, mi, *it.next().expect("message length"));
                }
            }
        }
        out.push(panel);
    }
    Ok((out, report))
}

/// Wall time per stage and exact recurrence step counts of one run.
#[derive(Debug, Clone, Default)]
pub struct RunStats {
    pub precompute: Duration,
    pub recurrence: Duration,
    pub exchange: Duration,
    pub fft: Duration,
    /// Recurrence steps per ring evaluated, `[worker][thread]`.
    pub thread_steps: Vec<Vec<u64>>,
    pub exchange_report: ExchangeReport,
}

impl RunStats {
    pub fn recurrence_steps(&self) -> u64 {
        self.thread_steps.iter().flatten().sum()
    }
}

/// Splits `items` into `n` contiguous chunks whose sizes differ by at most
/// one.
fn split_even<T: Clone>(items: &[T], n: usize) -> Vec<Vec<T>> {
    let (base, extra) = (items.len() / n, items.len() % n);
    let mut out = Vec::with_capacity(n);
    let mut start = 0;
    for i in 0..n {
        let len = base + usize::from(i < extra);
        out.push(items[start..start + len].to_vec());
        start += len;
    }
    out
}

/// Ring lists per thread, keeping mirror pairs together.
fn ring_chunks(lats: &[Latitude], rings: &[usize], n_threads: usize, pair: bool) -> Vec<Vec<usize>> {
    let groups = ring_groups(lats, rings, pair);
    split_even(&groups, n_threads)
        .into_iter()
        .map(|chunk| {
            let mut ids: Vec<usize> = chunk
                .iter()
                .flat_map(|g| std::iter::once(rings[g.north]).chain(g.south.map(|s| rings[s])))
                .collect();
            ids.sort_unstable();
            ids
        })
        .collect()
}

fn check_threads(n_threads: usize) -> Result<()> {
    if n_threads == 0 {
        return invalid("need at least one thread");
    }
    Ok(())
}

fn join<T>(handle: thread::ScopedJoinHandle<'_, T>) -> Result<T> {
    handle
        .join()
        .map_err(|_| ShtError::Internal("worker thread panicked".into()))
}

/// Legendre stage of synthesis for one worker: `Δ^A` for `M_i` over all
/// rings. Returns the panel and per-thread step counts.
fn synthesis_stage1(
    stage: &LegendreStage<'_>,
    alm: &AlmSet,
    m_set: &[usize],
    n_threads: usize,
    kernel: KernelVariant,
) -> Result<(DeltaPanel, Vec<u64>)> {
    let n_rings = stage.lats.len();
    let all_rings: Vec<usize> = (0..n_rings).collect();
    let mut panel = DeltaPanel::zeros(PanelKind::A, all_rings.clone(), m_set.to_vec());
    let mut steps = Vec::with_capacity(n_threads);
    match kernel {
        KernelVariant::MMajor => {
            let part = thread_partition(m_set, n_threads, stage.lmax)?;
            let results = thread::scope(|s| {
                let handles: Vec<_> = part
                    .subsets
                    .iter()
                    .map(|ms| {
                        let all_rings = &all_rings;
                        s.spawn(move || {
                            let mut rows = vec![Complex64::new(0.0, 0.0); ms.len() * n_rings];
                            let n = stage.synth_m_major(alm, all_rings, ms, &mut rows);
                            (rows, n)
                        })
                    })
                    .collect();
                handles.into_iter().map(join).collect::<Result<Vec<_>>>()
            })?;
            let pos = position_table(m_set, stage.mu.len());
            for (ms, (rows, n)) in part.subsets.iter().zip(results) {
                for (k, &m) in ms.iter().enumerate() {
                    let mi = pos[m].expect("thread order belongs to worker");
                    panel.m_row_mut(mi).copy_from_slice(&rows[k * n_rings..(k + 1) * n_rings]);
                }
                steps.push(n);
            }
        }
        KernelVariant::RingMajor => {
            let chunks = ring_chunks(stage.lats, &all_rings, n_threads, stage.opts.pair_rings);
            let results = thread::scope(|s| {
                let handles: Vec<_> = chunks
                    .iter()
                    .map(|ids| {
                        s.spawn(move || {
                            let groups = ring_groups(stage.lats, ids, stage.opts.pair_rings);
                            let mut rows = vec![Complex64::new(0.0, 0.0); m_set.len() * ids.len()];
                            let n = stage.synth_ring_major(alm, ids, &groups, m_set, &mut rows);
                            (rows, n)
                        })
                    })
                    .collect();
                handles.into_iter().map(join).collect::<Result<Vec<_>>>()
            })?;
            for (ids, (rows, n)) in chunks.iter().zip(results) {
                for mi in 0..m_set.len() {
                    let dst = panel.m_row_mut(mi);
                    for (k, &r) in ids.iter().enumerate() {
                        dst[r] = rows[mi * ids.len() + k];
                    }
                }
                steps.push(n);
            }
        }
    }
    Ok((panel, steps))
}

/// `(m, a_lm for l = m..=lmax)`.
type CoefficientRow = (usize, Vec<Complex64>);

/// Legendre stage of analysis for one worker: `a_lm` for `M_i` from a
/// panel over all rings. Returns `(m, coefficients)` rows and per-thread
/// step counts.
fn analysis_stage2(
    stage: &LegendreStage<'_>,
    panel: &DeltaPanel,
    n_threads: usize,
    kernel: KernelVariant,
) -> Result<(Vec<CoefficientRow>, Vec<u64>)> {
    let lmax = stage.lmax;
    let m_set = &panel.m_set;
    let all_rings = &panel.ring_set;
    let zeros_for = |ms: &[usize]| -> Vec<Vec<Complex64>> {
        ms.iter().map(|&m| vec![Complex64::new(0.0, 0.0); lmax - m + 1]).collect()
    };
    match kernel {
        KernelVariant::MMajor => {
            let part = thread_partition(m_set, n_threads, lmax)?;
            let pos = position_table(m_set, stage.mu.len());
            let results = thread::scope(|s| {
                let handles: Vec<_> = part
                    .subsets
                    .iter()
                    .map(|ms| {
                        let pos = &pos;
                        s.spawn(move || {
                            let positions: Vec<usize> =
                                ms.iter().map(|&m| pos[m].expect("order of worker")).collect();
                            let rows = gather_rows(panel, &positions);
                            let mut acc = zeros_for(ms);
                            let mut views: Vec<&mut [Complex64]> =
                                acc.iter_mut().map(|v| v.as_mut_slice()).collect();
                            let n = stage.accumulate_m_major(&rows, all_rings, ms, &mut views);
                            (ms.iter().copied().zip(acc).collect::<Vec<_>>(), n)
                        })
                    })
                    .collect();
                handles.into_iter().map(join).collect::<Result<Vec<_>>>()
            })?;
            let mut out = Vec::with_capacity(m_set.len());
            let mut steps = Vec::with_capacity(n_threads);
            for (rows, n) in results {
                out.extend(rows);
                steps.push(n);
            }
            Ok((out, steps))
        }
        KernelVariant::RingMajor => {
            let chunks = ring_chunks(stage.lats, all_rings, n_threads, stage.opts.pair_rings);
            let results = thread::scope(|s| {
                let handles: Vec<_> = chunks
                    .iter()
                    .map(|ids| {
                        s.spawn(move || {
                            let groups = ring_groups(stage.lats, ids, stage.opts.pair_rings);
                            let mut rows = Vec::with_capacity(m_set.len() * ids.len());
                            for mi in 0..m_set.len() {
                                rows.extend(ids.iter().map(|&r| panel.get(r, mi)));
                            }
                            let mut acc = zeros_for(m_set);
                            let mut views: Vec<&mut [Complex64]> =
                                acc.iter_mut().map(|v| v.as_mut_slice()).collect();
                            let n = stage.accumulate_ring_major(&rows, ids, &groups, m_set, &mut views);
                            (acc, n)
                        })
                    })
                    .collect();
                handles.into_iter().map(join).collect::<Result<Vec<_>>>()
            })?;
            // Partial sums reduced in ascending thread order.
            let mut total = zeros_for(m_set);
            let mut steps = Vec::with_capacity(n_threads);
            for (partial, n) in results {
                for (t, p) in total.iter_mut().zip(partial) {
                    for (a, b) in t.iter_mut().zip(p) {
                        *a += b;
                    }
                }
                steps.push(n);
            }
            Ok((m_set.iter().copied().zip(total).collect(), steps))
        }
    }
}

fn build_stages<'a>(
    layout: &WorkerLayout,
    lmax: usize,
    lats: &'a [Latitude],
    opts: KernelOptions,
) -> Vec<LegendreStage<'a>> {
    // Each worker precomputes its own starting values, as a separate
    // process would.
    (0..layout.n_workers)
        .map(|_| LegendreStage::new(lmax, layout.mmax, lats, opts))
        .collect()
}

/// Synthesis through the worker layout.
pub fn distributed_synthesis(
    alm: &AlmSet,
    grid: &Arc<PixelGrid>,
    layout: &WorkerLayout,
    n_threads: usize,
    kernel: KernelVariant,
) -> Result<SkyMap> {
    Ok(distributed_synthesis_profiled(alm, grid, layout, n_threads, kernel, KernelOptions::default())?.0)
}

pub fn distributed_synthesis_profiled(
    alm: &AlmSet,
    grid: &Arc<PixelGrid>,
    layout: &WorkerLayout,
    n_threads: usize,
    kernel: KernelVariant,
    opts: KernelOptions,
) -> Result<(SkyMap, RunStats)> {
    check_threads(n_threads)?;
    layout.check()?;
    if layout.mmax != alm.mmax() || layout.n_rings != grid.n_rings() {
        return invalid("layout does not match the coefficients or the grid");
    }
    let mut stats = RunStats::default();
    let lats = grid.latitudes();

    let t = Instant::now();
    let stages = build_stages(layout, alm.lmax(), &lats, opts);
    stats.precompute = t.elapsed();

    let t = Instant::now();
    let stage1 = thread::scope(|s| {
        let handles: Vec<_> = stages
            .iter()
            .zip(&layout.m_sets)
            .map(|(stage, ms)| s.spawn(move || synthesis_stage1(stage, alm, ms, n_threads, kernel)))
            .collect();
        handles
            .into_iter()
            .map(|h| join(h).and_then(|r| r))
            .collect::<Result<Vec<_>>>()
    })?;
    stats.recurrence = t.elapsed();
    let (panels, steps): (Vec<_>, Vec<_>) = stage1.into_iter().unzip();
    stats.thread_steps = steps;

    let t = Instant::now();
    let (ring_panels, report) = exchange(layout, &panels)?;
    drop(panels);
    stats.exchange = t.elapsed();
    stats.exchange_report = report;

    let t = Instant::now();
    let plans = FftPlans::for_grid(grid);
    let pieces = thread::scope(|s| {
        let handles: Vec<_> = ring_panels
            .iter()
            .map(|panel| {
                let plans = &plans;
                s.spawn(move || fft_synthesis_worker(grid, plans, panel, n_threads))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| join(h).and_then(|r| r))
            .collect::<Result<Vec<_>>>()
    })?;
    let mut map = SkyMap::zeros(grid.clone());
    for worker in pieces {
        for (r, samples) in worker {
            map.pixels[grid.rings[r].pixel_range()].copy_from_slice(&samples);
        }
    }
    stats.fft = t.elapsed();
    Ok((map, stats))
}

fn fft_synthesis_worker(
    grid: &PixelGrid,
    plans: &FftPlans,
    panel: &DeltaPanel,
    n_threads: usize,
) -> Result<Vec<(usize, Vec<f64>)>> {
    let positions: Vec<usize> = (0..panel.ring_set.len()).collect();
    let chunks = split_even(&positions, n_threads);
    let parts = thread::scope(|s| {
        let handles: Vec<_> = chunks
            .iter()
            .map(|chunk| {
                s.spawn(move || -> Result<Vec<(usize, Vec<f64>)>> {
                    let mut work = FourierWorkspace::new();
                    chunk
                        .iter()
                        .map(|&p| {
                            let ring = &grid.rings[panel.ring_set[p]];
                            let mut samples = vec![0.0; ring.n_phi];
                            ring_synthesis_into(&panel.ring_column(p), ring, plans, &mut work, &mut samples)?;
                            Ok((ring.index, samples))
                        })
                        .collect()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| join(h).and_then(|r| r))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(parts.into_iter().flatten().collect())
}

/// Analysis through the worker layout.
pub fn distributed_analysis(
    map: &SkyMap,
    layout: &WorkerLayout,
    n_threads: usize,
    lmax: usize,
    kernel: KernelVariant,
) -> Result<AlmSet> {
    Ok(distributed_analysis_profiled(map, layout, n_threads, lmax, kernel, KernelOptions::default())?.0)
}

pub fn distributed_analysis_profiled(
    map: &SkyMap,
    layout: &WorkerLayout,
    n_threads: usize,
    lmax: usize,
    kernel: KernelVariant,
    opts: KernelOptions,
) -> Result<(AlmSet, RunStats)> {
    check_threads(n_threads)?;
    layout.check()?;
    let grid = &map.grid;
    let mmax = layout.mmax;
    if lmax < mmax {
        return invalid(format!("lmax={lmax} is smaller than mmax={mmax}"));
    }
    if layout.n_rings != grid.n_rings() {
        return invalid("layout does not match the grid");
    }
    let mut stats = RunStats::default();

    let t = Instant::now();
    let plans = FftPlans::for_grid(grid);
    let ring_panels = thread::scope(|s| {
        let handles: Vec<_> = layout
            .ring_sets
            .iter()
            .map(|rings| {
                let plans = &plans;
                s.spawn(move || fft_analysis_worker(map, plans, rings, mmax, n_threads))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| join(h).and_then(|r| r))
            .collect::<Result<Vec<_>>>()
    })?;
    stats.fft = t.elapsed();

    let t = Instant::now();
    let (m_panels, report) = exchange_inverse(layout, &ring_panels)?;
    drop(ring_panels);
    stats.exchange = t.elapsed();
    stats.exchange_report = report;

    let lats = grid.latitudes();
    let t = Instant::now();
    let stages = build_stages(layout, lmax, &lats, opts);
    stats.precompute = t.elapsed();

    let t = Instant::now();
    let stage2 = thread::scope(|s| {
        let handles: Vec<_> = stages
            .iter()
            .zip(&m_panels)
            .map(|(stage, panel)| s.spawn(move || analysis_stage2(stage, panel, n_threads, kernel)))
            .collect();
        handles
            .into_iter()
            .map(|h| join(h).and_then(|r| r))
            .collect::<Result<Vec<_>>>()
    })?;
    stats.recurrence = t.elapsed();

    let mut alm = AlmSet::zeros(lmax, mmax)?;
    for (rows, steps) in stage2 {
        for (m, coeffs) in rows {
            alm.m_slice_mut(m).copy_from_slice(&coeffs);
        }
        stats.thread_steps.push(steps);
    }
    Ok((alm, stats))
}

fn fft_analysis_worker(
    map: &SkyMap,
    plans: &FftPlans,
    rings: &[usize],
    mmax: usize,
    n_threads: usize,
) -> Result<DeltaPanel> {
    let chunks = split_even(rings, n_threads);
    let parts = thread::scope(|s| {
        let handles: Vec<_> = chunks
            .iter()
            .map(|ids| s.spawn(move || fourier_analysis_rings(map, plans, ids, mmax)))
            .collect();
        handles
            .into_iter()
            .map(|h| join(h).and_then(|r| r))
            .collect::<Result<Vec<_>>>()
    })?;
    let mut panel = DeltaPanel::zeros(PanelKind::S, rings.to_vec(), (0..=mmax).collect());
    let mut offset = 0;
    for part in parts {
        for m in 0..=mmax {
            for ri in 0..part.n_rings() {
                panel.set(offset + ri, m, part.get(ri, m));
            }
        }
        offset += part.n_rings();
    }
    Ok(panel)
}
