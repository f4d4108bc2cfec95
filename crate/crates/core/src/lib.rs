//! Spherical harmonic transforms on iso-latitude ring grids.
//!
//! A band-limited real field on the sphere,
//! `s(θ, φ) = sum_{l,m} a_lm Y_lm(θ, φ)`, is moved between its coefficients
//! [`AlmSet`] and pixel samples [`SkyMap`] in three stages:
//!
//! 1. the Legendre stage, `Δ_m(r) = sum_l a_lm P_lm(cos θ_r)` evaluated by
//!    upward recurrence in `l` ([`legendre`], [`transforms`]),
//! 2. a redistribution of the `Δ` panel from order-major to ring-major
//!    ([`distribution`]),
//! 3. one FFT per ring ([`fourier`]).
//!
//! Analysis runs the same stages backwards with quadrature weights.
//! [`perfmodel`] predicts and measures the cost of each stage.

pub mod distribution;
pub mod error;
pub mod experiment;
pub mod fourier;
pub mod grid;
pub mod io;
pub mod legendre;
pub mod perfmodel;
pub mod transforms;

pub use distribution::{
    assign_m, assign_rings, distributed_analysis, distributed_synthesis, thread_partition, RunStats,
    ThreadPartition, WorkerLayout,
};
pub use error::{Result, ShtError};
pub use experiment::{project_map, random_alm, roundtrip_error};
pub use grid::{build_gauss_legendre_grid, build_healpix_grid, GridScheme, PixelGrid, RingDescriptor};
pub use legendre::{plm_row, Latitude, ScaleLadder};
pub use perfmodel::{CostParams, CostReport};
pub use transforms::{analysis, synthesis, AlmSet, DeltaPanel, KernelOptions, KernelVariant, SkyMap};
