//! Shared fixtures for the benchmarks.

use std::sync::Arc;

use mtrace_core::suite::random_functions;
use mtrace_core::{Density, DomainKind, Filtration, GridFunction, MeasureSpace};

/// Uniform `[0, 1)` grid with `2^level` atoms.
pub fn unit_interval(level: u32) -> Arc<MeasureSpace> {
    Arc::new(
        MeasureSpace::build(DomainKind::Interval { a: 0.0, b: 1.0 }, Density::Uniform { c: 1.0 }, level, None)
            .expect("valid unit interval"),
    )
}

/// Full-depth dyadic filtration on the unit interval.
pub fn dyadic(level: u32) -> Filtration {
    Filtration::dyadic(unit_interval(level), level as usize).expect("valid filtration")
}

pub fn functions(filtration: &Filtration, count: usize) -> Vec<GridFunction> {
    random_functions(filtration.space(), count, 42)
}
