//! Martingale averaging of positive integral-operator kernels.
//!
//! A measure space is discretized into dyadic atoms ([`space`]), a nested
//! sequence of partitions is built over it ([`filtration`]), and kernels
//! ([`kernel`]) are averaged over cell blocks ([`martingale`]). The
//! diagonal averages of those kernels, compared with eigenvalue sums of the
//! averaged operators ([`spectral`]), give a finite-resolution view of
//! whether the operator is trace-class. Infinite-measure domains go through
//! the exhaustion in [`sigma_finite`].

pub mod error;
pub mod filtration;
pub mod kernel;
pub mod martingale;
pub mod properties;
pub mod sigma_finite;
pub mod space;
pub mod spectral;
pub mod suite;

pub use error::{Error, Result};
pub use filtration::{Cell, Cover, Filtration, Mode, Region};
pub use kernel::{CosineCoeffs, DiagonalIntegral, Kernel, SampledGrid, SpectrumTruth};
pub use martingale::{AveragedKernel, GridFunction, Norm};
pub use sigma_finite::{Exhaustion, TruncationOperator};
pub use space::{Density, DomainKind, MeasureSpace, Point};
pub use spectral::{OperatorMatrix, TraceReport, Verdict};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
