//! Analytic cost model and measured stage breakdowns.
//!
//! Per-stage operation counts for `R_N` rings, band limits `lmax`, `mmax`
//! and `n` workers:
//!
//! ```text
//! precompute  c1 mmax
//! recurrence  c2 R_N lmax mmax / n
//! fft         c3 (R_N / n) mmax log2(mmax)
//! ```
//!
//! with `c1 = 3`, `c2 = 4` (two multiplies, one add, one threshold test per
//! recurrence step) and `c3 = 5`. The exchange moves messages of
//! `S = R_N (mmax / n) n_C` bytes and takes
//!
//! ```text
//! S <= switch:  alpha log2(n) + beta S (n/2) log2(n)
//! S >  switch:  alpha (n-1)   + beta S (n-1)
//! ```
//!
//! The message size uses `mmax` literally, one order short of the
//! `mmax + 1` orders the exchange actually moves.

use std::fmt::Write as _;

use crate::distribution::{RunStats, COMPLEX_BYTES};
use crate::error::{invalid, Result};

/// Flops per precomputed order.
pub const C_PRECOMPUTE: f64 = 3.0;
/// Flops per recurrence step.
pub const C_RECURRENCE: f64 = 4.0;
/// Flops per `n log2 n` unit of FFT work.
pub const C_FFT: f64 = 5.0;

/// Machine parameters of the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostParams {
    /// Latency, seconds.
    pub alpha: f64,
    /// Inverse bandwidth, seconds per byte.
    pub beta_inv_bw: f64,
    /// Seconds per flop.
    pub gamma: f64,
    /// Bytes per complex number.
    pub n_c: f64,
    /// Messages above this many bytes take the long-message branch.
    pub switch_bytes: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        CostParams {
            alpha: 1e-5,
            beta_inv_bw: 1e-9,
            gamma: 1e-10,
            n_c: COMPLEX_BYTES as f64,
            switch_bytes: 262_144.0,
        }
    }
}

impl CostParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.alpha, self.beta_inv_bw, self.gamma, self.n_c, self.switch_bytes];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            invalid("cost parameters must be positive and finite")
        }
    }
}

/// Estimated flops per stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlopEstimate {
    pub precompute: f64,
    pub recurrence: f64,
    pub fft: f64,
}

impl FlopEstimate {
    /// Flops of the two stages that shrink with the worker count.
    pub fn parallel(&self) -> f64 {
        self.recurrence + self.fft
    }
}

fn log2_or_zero(x: f64) -> f64 {
    if x > 1.0 {
        x.log2()
    } else {
        0.0
    }
}

pub fn flops_estimate(r_n: usize, lmax: usize, mmax: usize, n_workers: usize) -> Result<FlopEstimate> {
    if n_workers == 0 {
        return invalid("need at least one worker");
    }
    let (r, l, m, n) = (r_n as f64, lmax as f64, mmax as f64, n_workers as f64);
    Ok(FlopEstimate {
        precompute: C_PRECOMPUTE * m,
        recurrence: C_RECURRENCE * r * l * m / n,
        fft: C_FFT * (r / n) * m * log2_or_zero(m),
    })
}

/// Bytes per exchange message, `R_N (mmax / n) n_C`.
pub fn message_size(r_n: usize, mmax: usize, n_workers: usize, n_c: f64) -> Result<f64> {
    if n_workers == 0 {
        return invalid("need at least one worker");
    }
    if n_c.is_nan() || n_c <= 0.0 {
        return invalid("bytes per complex number must be positive");
    }
    Ok(r_n as f64 * (mmax as f64 / n_workers as f64) * n_c)
}

/// Seconds spent in the all-to-all exchange.
pub fn comm_time(s_msg: f64, n_workers: usize, params: &CostParams) -> Result<f64> {
    if n_workers == 0 {
        return invalid("need at least one worker");
    }
    if s_msg.is_nan() || s_msg < 0.0 {
        return invalid("message size must be non-negative");
    }
    let n = n_workers as f64;
    Ok(if s_msg <= params.switch_bytes {
        let lg = n.log2();
        params.alpha * lg + params.beta_inv_bw * s_msg * (n / 2.0) * lg
    } else {
        params.alpha * (n - 1.0) + params.beta_inv_bw * s_msg * (n - 1.0)
    })
}

/// A problem size for model sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProblemSize {
    pub label: usize,
    pub r_n: usize,
    pub lmax: usize,
    pub mmax: usize,
}

impl ProblemSize {
    /// HEALPix resolution with `lmax = mmax = 2 nside`.
    pub fn healpix(nside: usize) -> Self {
        ProblemSize {
            label: nside,
            r_n: 4 * nside - 1,
            lmax: 2 * nside,
            mmax: 2 * nside,
        }
    }
}

/// One point of a predicted runtime curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    pub size: ProblemSize,
    pub n_workers: usize,
    pub message_bytes: f64,
    pub compute_s: f64,
    pub comm_s: f64,
}

impl CurveRow {
    /// Computation over communication; infinite for a single worker.
    pub fn ratio(&self) -> f64 {
        if self.comm_s == 0.0 {
            f64::INFINITY
        } else {
            self.compute_s / self.comm_s
        }
    }
}

/// Predicted compute (`gamma` times the recurrence and FFT flops) and
/// communication time for every size and worker count.
pub fn runtime_curves(sizes: &[ProblemSize], workers: &[usize], params: &CostParams) -> Result<Vec<CurveRow>> {
    params.validate()?;
    let mut rows = Vec::with_capacity(sizes.len() * workers.len());
    for &size in sizes {
        for &n in workers {
            let flops = flops_estimate(size.r_n, size.lmax, size.mmax, n)?;
            let bytes = message_size(size.r_n, size.mmax, n, params.n_c)?;
            rows.push(CurveRow {
                size,
                n_workers: n,
                message_bytes: bytes,
                compute_s: params.gamma * flops.parallel(),
                comm_s: comm_time(bytes, n, params)?,
            });
        }
    }
    Ok(rows)
}

pub fn curves_csv(rows: &[CurveRow]) -> String {
    let mut out = String::from("size,r_n,lmax,mmax,n_workers,message_bytes,compute_s,comm_s,ratio\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{:e},{:e},{:e}",
            r.size.label,
            r.size.r_n,
            r.size.lmax,
            r.size.mmax,
            r.n_workers,
            r.message_bytes,
            r.compute_s,
            r.comm_s,
            r.ratio()
        );
    }
    out
}

/// Smallest worker count in `rows` of one size at which communication
/// takes at least as long as computation.
pub fn crossover_workers(rows: &[CurveRow], label: usize) -> Option<usize> {
    rows.iter()
        .filter(|r| r.size.label == label && r.ratio() <= 1.0)
        .map(|r| r.n_workers)
        .min()
}

/// Recurrence steps of a full transform, counted per ring:
/// `R_N sum_m (lmax - m + 1)`.
pub fn recurrence_step_count(r_n: usize, lmax: usize, mmax: usize) -> u64 {
    (0..=mmax.min(lmax)).map(|m| (lmax - m + 1) as u64).sum::<u64>() * r_n as u64
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return invalid("need at least two matching points");
    }
    if xs.iter().chain(ys).any(|v| v.is_nan() || *v <= 0.0) {
        return invalid("log-log fit needs positive values");
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return invalid("log-log fit needs distinct x values");
    }
    Ok(sxy / sxx)
}

/// One stage of a [`CostReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct StageCost {
    pub stage: &'static str,
    pub predicted_s: f64,
    pub measured_s: Option<f64>,
    pub flops: f64,
    pub bytes: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub stages: Vec<StageCost>,
    /// Exact recurrence steps, counted per ring.
    pub recurrence_steps: u64,
}

impl CostReport {
    pub fn stage(&self, name: &str) -> Option<&StageCost> {
        self.stages.iter().find(|s| s.stage == name)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("stage,predicted_s,measured_s,flops,bytes\n");
        for s in &self.stages {
            let measured = s.measured_s.map(|v| format!("{v:e}")).unwrap_or_default();
            let _ = writeln!(out, "{},{:e},{},{},{}", s.stage, s.predicted_s, measured, s.flops, s.bytes);
        }
        out
    }
}

/// Predicted and measured costs of one transform run. Recurrence flops come
/// from the exact step count; the exchange volume from the bytes that
/// actually crossed worker boundaries.
pub fn profile(
    stats: &RunStats,
    r_n: usize,
    lmax: usize,
    mmax: usize,
    n_workers: usize,
    params: &CostParams,
) -> Result<CostReport> {
    params.validate()?;
    let est = flops_estimate(r_n, lmax, mmax, n_workers)?;
    let steps = stats.recurrence_steps();
    let rec_flops = C_RECURRENCE * steps as f64;
    let msg = message_size(r_n, mmax, n_workers, params.n_c)?;
    let secs = |d: std::time::Duration| Some(d.as_secs_f64());
    let stages = vec![
        StageCost {
            stage: "precompute",
            predicted_s: params.gamma * est.precompute,
            measured_s: secs(stats.precompute),
            flops: est.precompute,
            bytes: 0.0,
        },
        StageCost {
            stage: "recurrence",
            predicted_s: params.gamma * rec_flops / n_workers as f64,
            measured_s: secs(stats.recurrence),
            flops: rec_flops,
            bytes: 0.0,
        },
        StageCost {
            stage: "exchange",
            predicted_s: comm_time(msg, n_workers, params)?,
            measured_s: secs(stats.exchange),
            flops: 0.0,
            bytes: stats.exchange_report.remote_bytes() as f64,
        },
        StageCost {
            stage: "fft",
            predicted_s: params.gamma * est.fft,
            measured_s: secs(stats.fft),
            flops: est.fft,
            bytes: 0.0,
        },
    ];
    Ok(CostReport {
        stages,
        recurrence_steps: steps,
    })
}
