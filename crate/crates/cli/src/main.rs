use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sht_core::distribution::{distributed_analysis_profiled, distributed_synthesis_profiled, WorkerLayout};
use sht_core::experiment::{project_map, random_alm, roundtrip_error};
use sht_core::io::{read_alm, read_map, write_alm, write_map};
use sht_core::perfmodel::{curves_csv, profile, runtime_curves, CostParams, CostReport, ProblemSize};
use sht_core::transforms::{KernelOptions, KernelVariant};
use sht_core::{build_gauss_legendre_grid, build_healpix_grid, PixelGrid, Result, ShtError};

#[derive(Parser)]
#[command(name = "sht", version, about = "Spherical harmonic transforms on ring grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Grid inspection.
    Grid {
        #[command(subcommand)]
        command: GridCommand,
    },
    /// Synthesize a map from coefficients (read with --in, or random from --seed).
    Synth(SynthArgs),
    /// Analyze a map into coefficients.
    Analyze(AnalyzeArgs),
    /// Random coefficients through synthesis and analysis; prints D_err.
    Roundtrip(RunArgs),
    /// Timed round trip; writes the per-stage cost report.
    Bench(RunArgs),
    /// Predicted compute and communication times.
    Model(ModelArgs),
    /// Orders and rings owned by every worker.
    Partition(PartitionArgs),
    /// Equirectangular grayscale preview (PGM) of a map.
    Render(RenderArgs),
}

#[derive(Subcommand)]
enum GridCommand {
    /// Prints ring geometry.
    Info(GridArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Scheme {
    Healpix,
    GaussLegendre,
}

#[derive(Args, Clone)]
struct GridArgs {
    #[arg(long, value_enum, default_value = "healpix")]
    grid: Scheme,
    #[arg(long)]
    nside: Option<usize>,
    #[arg(long)]
    nrings: Option<usize>,
    #[arg(long)]
    nphi: Option<usize>,
}

#[derive(Args, Clone)]
struct BandArgs {
    /// Defaults to 2 nside on HEALPix grids and nrings - 1 on Gauss-Legendre grids.
    #[arg(long)]
    lmax: Option<usize>,
    /// Defaults to lmax.
    #[arg(long)]
    mmax: Option<usize>,
}

#[derive(Args, Clone)]
struct ParallelArgs {
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, env = "SHT_THREADS", default_value_t = 1)]
    threads: usize,
    #[arg(long, default_value = "m-major")]
    kernel: KernelVariant,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    band: BandArgs,
    #[command(flatten)]
    parallel: ParallelArgs,
    /// Coefficient file; band limits come from its header.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Per-stage cost report.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    band: BandArgs,
    #[command(flatten)]
    parallel: ParallelArgs,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    band: BandArgs,
    #[command(flatten)]
    parallel: ParallelArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-stage cost report of both directions.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Output coefficients after the round trip.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ModelArgs {
    /// HEALPix resolutions, lmax = mmax = 2 nside.
    #[arg(long, value_delimiter = ',', default_value = "256,1024,4096")]
    nside: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16,32,64,128,256,512,1024")]
    workers: Vec<usize>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct PartitionArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    band: BandArgs,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, env = "SHT_THREADS", default_value_t = 1)]
    threads: usize,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 512)]
    width: usize,
    #[arg(long, default_value_t = 256)]
    height: usize,
    #[arg(long)]
    out: PathBuf,
}

fn bad(msg: impl Into<String>) -> ShtError {
    ShtError::InvalidArgument(msg.into())
}

impl GridArgs {
    fn build(&self) -> Result<PixelGrid> {
        match self.grid {
            Scheme::Healpix => build_healpix_grid(self.nside.ok_or_else(|| bad("--nside is required"))?),
            Scheme::GaussLegendre => build_gauss_legendre_grid(
                self.nrings.ok_or_else(|| bad("--nrings is required"))?,
                self.nphi.ok_or_else(|| bad("--nphi is required"))?,
            ),
        }
    }
}

impl BandArgs {
    fn resolve(&self, grid: &PixelGrid) -> Result<(usize, usize)> {
        let lmax = match (self.lmax, grid.nside) {
            (Some(l), _) => l,
            (None, Some(nside)) => 2 * nside,
            (None, None) => grid.n_rings().saturating_sub(1),
        };
        let mmax = self.mmax.unwrap_or(lmax);
        if mmax > lmax {
            return Err(bad(format!("mmax={mmax} exceeds lmax={lmax}")));
        }
        Ok((lmax, mmax))
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

fn prefixed_csv(reports: &[(&str, CostReport)]) -> String {
    let mut out = String::from("stage,predicted_s,measured_s,flops,bytes\n");
    for (prefix, report) in reports {
        for line in report.to_csv().lines().skip(1) {
            out.push_str(&format!("{prefix}.{line}\n"));
        }
    }
    out
}

fn synth(args: SynthArgs) -> Result<()> {
    let grid = Arc::new(args.grid.build()?);
    let alm = match &args.input {
        Some(path) => read_alm(path)?,
        None => {
            let (lmax, mmax) = args.band.resolve(&grid)?;
            random_alm(lmax, mmax, args.seed)?
        }
    };
    let p = &args.parallel;
    let layout = WorkerLayout::new(&grid, alm.mmax(), p.workers)?;
    let (map, stats) = distributed_synthesis_profiled(&alm, &grid, &layout, p.threads, p.kernel, KernelOptions::default())?;
    write_map(&args.out, &map)?;
    if let Some(csv) = &args.csv {
        let report = profile(&stats, grid.n_rings(), alm.lmax(), alm.mmax(), p.workers, &CostParams::default())?;
        write_text(csv, &report.to_csv())?;
    }
    Ok(())
}

fn analyze(args: AnalyzeArgs) -> Result<()> {
    let map = read_map(&args.input)?;
    let (lmax, mmax) = args.band.resolve(&map.grid)?;
    let p = &args.parallel;
    let layout = WorkerLayout::new(&map.grid, mmax, p.workers)?;
    let (alm, stats) = distributed_analysis_profiled(&map, &layout, p.threads, lmax, p.kernel, KernelOptions::default())?;
    write_alm(&args.out, &alm)?;
    if let Some(csv) = &args.csv {
        let report = profile(&stats, map.grid.n_rings(), lmax, mmax, p.workers, &CostParams::default())?;
        write_text(csv, &report.to_csv())?;
    }
    Ok(())
}

/// Runs the round trip; returns D_err and the cost reports of both directions.
fn run_round_trip(args: &RunArgs) -> Result<(f64, [(&'static str, CostReport); 2])> {
    let grid = Arc::new(args.grid.build()?);
    let (lmax, mmax) = args.band.resolve(&grid)?;
    let p = &args.parallel;
    let alm = random_alm(lmax, mmax, args.seed)?;
    let layout = WorkerLayout::new(&grid, mmax, p.workers)?;
    let opts = KernelOptions::default();
    let (map, s1) = distributed_synthesis_profiled(&alm, &grid, &layout, p.threads, p.kernel, opts)?;
    let (back, s2) = distributed_analysis_profiled(&map, &layout, p.threads, lmax, p.kernel, opts)?;
    if let Some(out) = &args.out {
        write_alm(out, &back)?;
    }
    let params = CostParams::default();
    let r_n = grid.n_rings();
    Ok((
        roundtrip_error(&alm, &back)?,
        [
            ("synthesis", profile(&s1, r_n, lmax, mmax, p.workers, &params)?),
            ("analysis", profile(&s2, r_n, lmax, mmax, p.workers, &params)?),
        ],
    ))
}

fn roundtrip(args: RunArgs) -> Result<()> {
    let (err, reports) = run_round_trip(&args)?;
    println!("D_err={err:e}");
    if let Some(csv) = &args.csv {
        write_text(csv, &prefixed_csv(&reports))?;
    }
    Ok(())
}

fn bench(args: RunArgs) -> Result<()> {
    let (err, reports) = run_round_trip(&args)?;
    let csv = prefixed_csv(&reports);
    match &args.csv {
        Some(path) => write_text(path, &csv)?,
        None => print!("{csv}"),
    }
    eprintln!("D_err={err:e}");
    Ok(())
}

fn model(args: ModelArgs) -> Result<()> {
    if args.nside.contains(&0) {
        return Err(bad("nside values must be positive"));
    }
    let sizes: Vec<ProblemSize> = args.nside.iter().map(|&n| ProblemSize::healpix(n)).collect();
    let rows = runtime_curves(&sizes, &args.workers, &CostParams::default())?;
    let csv = curves_csv(&rows);
    match &args.csv {
        Some(path) => write_text(path, &csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn partition(args: PartitionArgs) -> Result<()> {
    let grid = args.grid.build()?;
    let (lmax, mmax) = args.band.resolve(&grid)?;
    let layout = WorkerLayout::new(&grid, mmax, args.workers)?;
    print!("{}", layout.describe(lmax));
    for (w, ms) in layout.m_sets.iter().enumerate() {
        let part = sht_core::thread_partition(ms, args.threads, lmax)?;
        for (t, subset) in part.subsets.iter().enumerate() {
            println!("worker {w} thread {t}: m={subset:?}");
        }
    }
    Ok(())
}

fn grid_info(grid: &PixelGrid) {
    println!("{} npix={} nrings={}", grid.describe(), grid.n_pix, grid.n_rings());
    println!("ring,cos_theta,n_phi,phi_0,weight,pixel_offset");
    for r in &grid.rings {
        println!("{},{:.17e},{},{:.17e},{:.17e},{}", r.index, r.cos_theta, r.n_phi, r.phi_0, r.weight, r.pixel_offset);
    }
}

fn render(args: RenderArgs) -> Result<()> {
    let map = read_map(&args.input)?;
    let image = project_map(&map, args.width, args.height)?;
    std::fs::write(&args.out, image.to_pgm())?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Grid {
            command: GridCommand::Info(args),
        } => {
            grid_info(&args.build()?);
            Ok(())
        }
        Command::Synth(args) => synth(args),
        Command::Analyze(args) => analyze(args),
        Command::Roundtrip(args) => roundtrip(args),
        Command::Bench(args) => bench(args),
        Command::Model(args) => model(args),
        Command::Partition(args) => partition(args),
        Command::Render(args) => render(args),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
