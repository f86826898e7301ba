//! Discretized integral operators, their spectra, and the trace-class
//! diagnostics built on the averaged kernels.

mod eigen;
mod operator;
mod study;

pub use eigen::{
    check_symmetric, eigendecompose, eigenvalues, jacobi, singular_from, EigenMethod,
    SpectralDecomposition, JACOBI_MAX_SWEEPS, JACOBI_TOL,
};
pub use operator::{assemble, OperatorMatrix, DENSE_ATOM_BUDGET};
pub use study::{
    level_spectrum, singular_value_convergence, trace_study, trace_study_from_samples,
    upper_bound_check, verdict, LevelRow, SingularValueReport, SvRow, TraceReport, UpperBoundReport,
    UpperBoundRow, Verdict, VerdictRule, FINAL_GAP_TOL, TRACE_AGREEMENT_TOL, WEYL_SLACK,
};
