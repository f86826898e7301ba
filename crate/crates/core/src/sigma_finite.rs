//! Exhaustion of the half-line by prefixes `X_j = [0, T_j)` and the
//! truncations `P_j f = f·χ_{X_j}`.
//!
//! `P_j ℰ^n_K P_j` is studied in two shapes: restricted to the atoms of
//! `X_j`, and as a full-size matrix with the complement masked out. Their
//! nonzero spectra must coincide.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::filtration::Filtration;
use crate::kernel::Kernel;
use crate::martingale::{AveragedKernel, GridFunction};
use crate::space::{DomainKind, MeasureSpace};
use crate::spectral::{eigenvalues, OperatorMatrix, DENSE_ATOM_BUDGET};

pub const DEFAULT_STAGES: usize = 8;
pub const TRACE_AGREEMENT_TOL: f64 = 1e-8;
pub const SPECTRUM_TOL: f64 = 1e-9;

/// Increasing cutoffs `0 = T_0 < T_1 < … ≤ window` with `X_j` the atoms
/// whose midpoint lies below `T_j`.
#[derive(Debug, Clone)]
pub struct Exhaustion {
    space: Arc<MeasureSpace>,
    cutoffs: Vec<f64>,
    masks: Vec<Vec<bool>>,
}

impl Exhaustion {
    /// `T_j = j · window / stages` for `j = 0..=stages`.
    pub fn uniform(space: Arc<MeasureSpace>, stages: usize) -> Result<Self> {
        let window = half_line_window(&space)?;
        if stages == 0 {
            return Err(Error::Argument("an exhaustion needs at least one stage".into()));
        }
        let cutoffs = (0..=stages)
            .map(|j| if j == stages { window } else { window * j as f64 / stages as f64 })
            .collect();
        Self::new(space, cutoffs)
    }

    pub fn new(space: Arc<MeasureSpace>, cutoffs: Vec<f64>) -> Result<Self> {
        let window = half_line_window(&space)?;
        if cutoffs.windows(2).any(|p| p[1] <= p[0]) || cutoffs.iter().any(|t| *t < 0.0 || *t > window) {
            return Err(Error::Argument(format!(
                "cutoffs must increase within [0, {window}], got {cutoffs:?}"
            )));
        }
        let masks = cutoffs
            .iter()
            .map(|&t| space.atoms().iter().map(|a| a.rep.line().expect("half-line") < t).collect())
            .collect();
        Ok(Self { space, cutoffs, masks })
    }

    pub fn space(&self) -> &Arc<MeasureSpace> {
        &self.space
    }

    pub fn cutoffs(&self) -> &[f64] {
        &self.cutoffs
    }

    /// Number of stages after the empty stage 0.
    pub fn stages(&self) -> usize {
        self.cutoffs.len() - 1
    }

    pub fn stage(&self, j: usize) -> Result<TruncationOperator> {
        let mask = self
            .masks
            .get(j)
            .ok_or_else(|| Error::Argument(format!("stage {j} outside 0..={}", self.stages())))?;
        Ok(TruncationOperator { stage: j, mask: mask.clone() })
    }
}

fn half_line_window(space: &MeasureSpace) -> Result<f64> {
    match space.kind() {
        DomainKind::HalfLine => Ok(space.window().expect("half-line window")),
        other => Err(Error::Argument(format!("exhaustions need a half-line, got {}", other.name()))),
    }
}

/// `P_j`: multiplication by the indicator of `X_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationOperator {
    pub stage: usize,
    pub mask: Vec<bool>,
}

impl TruncationOperator {
    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        let values = f
            .values()
            .iter()
            .zip(&self.mask)
            .map(|(v, keep)| if *keep { *v } else { 0.0 })
            .collect();
        GridFunction::new(f.space().clone(), values)
    }

    pub fn len(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Matrix of `P_j 𝒦 P_j`.
pub fn truncate_operator(op: &OperatorMatrix, stage: &TruncationOperator) -> Result<OperatorMatrix> {
    op.masked(&stage.mask)
}

#[derive(Debug, Clone, Serialize)]
pub struct StageRow {
    pub j: usize,
    pub cutoff: f64,
    /// Eigenvalue sum of `P_j ℰ^n_K P_j`.
    pub truncated_trace: f64,
    /// `∫_{X_j} E_n(K)(x, x) dμ`.
    pub truncated_diag_integral: f64,
    pub agreement: f64,
    /// Max difference of the restricted and masked nonzero spectra.
    pub spectral_gap_check: f64,
    pub spectra_match: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TruncationStudy {
    pub kernel: String,
    pub level: usize,
    pub rows: Vec<StageRow>,
    pub nondecreasing: bool,
    pub traces_agree: bool,
    pub spectra_match: bool,
    /// Mass of the diagonal beyond the window; `None` when unknown or divergent.
    pub tail_bound: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceReport {
    pub stage: usize,
    pub restricted: Vec<f64>,
    pub masked: Vec<f64>,
    pub max_diff: f64,
    pub pass: bool,
}

fn relative_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// `∫_{X_j} E_n(K)(x, x) dμ` from cell diagonals.
fn restricted_diag(avg: &AveragedKernel, filtration: &Filtration, n: usize, stage: &TruncationOperator) -> Result<f64> {
    let cell = &filtration.level(n)?.atom_cell;
    Ok(filtration
        .space()
        .atoms()
        .iter()
        .filter(|a| stage.mask[a.index] && !avg.null[cell[a.index]])
        .map(|a| a.measure * avg.values[(cell[a.index], cell[a.index])])
        .sum())
}

/// Eigenvalue sum of `P_j ℰ^n_K P_j`, from the operator compressed onto the
/// pieces `cell ∩ X_j`.
fn truncated_trace(avg: &AveragedKernel, filtration: &Filtration, n: usize, stage: &TruncationOperator) -> Result<f64> {
    let level = filtration.level(n)?;
    let atoms = filtration.space().atoms();
    let pieces: Vec<(usize, f64)> = level
        .cells
        .iter()
        .filter_map(|c| {
            let m: f64 = c.atoms.iter().filter(|&&a| stage.mask[a]).map(|&a| atoms[a].measure).sum();
            (m > 0.0).then_some((c.id, m))
        })
        .collect();
    if pieces.is_empty() {
        return Ok(0.0);
    }
    let k = pieces.len();
    let sym = DMatrix::from_fn(k, k, |p, q| {
        let (u, mu) = pieces[p];
        let (v, mv) = pieces[q];
        0.5 * (avg.values[(u, v)] + avg.values[(v, u)]) * mu.sqrt() * mv.sqrt()
    });
    Ok(eigenvalues(&sym)?.iter().sum())
}

fn nonzero(values: Vec<f64>, scale: f64) -> Vec<f64> {
    let cut = 1e-12 * scale.max(f64::MIN_POSITIVE);
    values.into_iter().filter(|v| v.abs() > cut).collect()
}

fn equivalence(
    avg: &AveragedKernel,
    filtration: &Filtration,
    n: usize,
    stage: &TruncationOperator,
) -> Result<EquivalenceReport> {
    let space = filtration.space();
    let cell = &filtration.level(n)?.atom_cell;
    let sq: Vec<f64> = space.measures().iter().map(|w| w.sqrt()).collect();
    let entry = |a: usize, b: usize| {
        0.5 * (avg.values[(cell[a], cell[b])] + avg.values[(cell[b], cell[a])]) * sq[a] * sq[b]
    };
    let inside: Vec<usize> = (0..space.len()).filter(|&a| stage.mask[a]).collect();
    let restricted = if inside.is_empty() {
        Vec::new()
    } else {
        let k = inside.len();
        eigenvalues(&DMatrix::from_fn(k, k, |p, q| entry(inside[p], inside[q])))?
    };
    let n_atoms = space.len();
    let masked = eigenvalues(&DMatrix::from_fn(n_atoms, n_atoms, |a, b| {
        if stage.mask[a] && stage.mask[b] {
            entry(a, b)
        } else {
            0.0
        }
    }))?;
    let scale = restricted.iter().chain(&masked).fold(0.0f64, |m, v| m.max(v.abs()));
    let restricted = nonzero(restricted, scale);
    let masked = nonzero(masked, scale);
    let max_diff = if restricted.len() == masked.len() {
        restricted.iter().zip(&masked).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    Ok(EquivalenceReport { stage: stage.stage, restricted, masked, max_diff, pass: max_diff <= SPECTRUM_TOL })
}

/// Nonzero spectra of the restricted and masked forms of `P_j ℰ^n_K P_j`.
pub fn spectrum_equivalence_check(
    kernel: &Kernel,
    filtration: &Filtration,
    n: usize,
    exhaustion: &Exhaustion,
    j: usize,
) -> Result<EquivalenceReport> {
    check_budget(filtration.space())?;
    let samples = kernel.sample(filtration.space())?;
    let avg = AveragedKernel::from_samples(&samples, filtration, n)?;
    equivalence(&avg, filtration, n, &exhaustion.stage(j)?)
}

fn check_budget(space: &MeasureSpace) -> Result<()> {
    if space.len() > DENSE_ATOM_BUDGET {
        return Err(Error::AtomBudget { atoms: space.len(), budget: DENSE_ATOM_BUDGET });
    }
    Ok(())
}

/// Per-stage truncated traces of `ℰ^n_K`, checked against the restricted
/// diagonal integral and the restricted/masked spectral equivalence.
pub fn truncated_averaged_trace(
    kernel: &Kernel,
    filtration: &Filtration,
    n: usize,
    exhaustion: &Exhaustion,
) -> Result<TruncationStudy> {
    let space = filtration.space();
    check_budget(space)?;
    if exhaustion.space().len() != space.len() {
        return Err(Error::Dimension { expected: space.len(), got: exhaustion.space().len() });
    }
    let samples = kernel.sample(space)?;
    let avg = AveragedKernel::from_samples(&samples, filtration, n)?;
    let mut rows = Vec::with_capacity(exhaustion.cutoffs.len());
    for j in 0..=exhaustion.stages() {
        let stage = exhaustion.stage(j)?;
        let diag = restricted_diag(&avg, filtration, n, &stage)?;
        let trace = truncated_trace(&avg, filtration, n, &stage)?;
        let eq = equivalence(&avg, filtration, n, &stage)?;
        rows.push(StageRow {
            j,
            cutoff: exhaustion.cutoffs[j],
            truncated_trace: trace,
            truncated_diag_integral: diag,
            agreement: relative_gap(trace, diag),
            spectral_gap_check: eq.max_diff,
            spectra_match: eq.pass,
        });
    }
    let tail_bound = kernel.diagonal_integral(space).ok().and_then(|d| {
        let w = d.window_value?;
        (!d.divergent).then_some(d.value - w)
    });
    Ok(TruncationStudy {
        kernel: kernel.name().into(),
        level: n,
        nondecreasing: rows.windows(2).all(|p| p[1].truncated_diag_integral >= p[0].truncated_diag_integral),
        traces_agree: rows.iter().all(|r| r.agreement <= TRACE_AGREEMENT_TOL),
        spectra_match: rows.iter().all(|r| r.spectra_match),
        tail_bound,
        rows,
    })
}

/// `tr(P_j 𝒦 P_j)` for every stage.
pub fn truncation_traces(op: &OperatorMatrix, exhaustion: &Exhaustion) -> Result<Vec<f64>> {
    (0..=exhaustion.stages())
        .map(|j| Ok(truncate_operator(op, &exhaustion.stage(j)?)?.trace()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::martingale::Norm;
    use crate::space::Density;
    use crate::spectral::assemble;

    fn half_line(level: u32) -> Arc<MeasureSpace> {
        Arc::new(MeasureSpace::build(DomainKind::HalfLine, Density::Uniform { c: 1.0 }, level, Some(8.0)).unwrap())
    }

    #[test]
    fn truncation_examples() {
        let space = half_line(7);
        let ex = Exhaustion::uniform(space.clone(), 8).unwrap();
        let op = assemble(&Kernel::RankOneExp, &space).unwrap();
        let last = truncate_operator(&op, &ex.stage(8).unwrap()).unwrap();
        assert_eq!(last.symmetric(), op.symmetric());
        let empty = truncate_operator(&op, &ex.stage(0).unwrap()).unwrap();
        assert_eq!(empty.trace(), 0.0);
        let one = truncate_operator(&op, &ex.stage(1).unwrap()).unwrap();
        let exact = (1.0 - (-2.0f64).exp()) / 2.0;
        assert!((exact - 0.432_332).abs() < 1e-6);
        // midpoint rule, h = 1/16
        assert!((one.trace() - exact).abs() < 1e-3);
    }

    #[test]
    fn projections_are_idempotent_and_self_adjoint() {
        let space = half_line(5);
        let ex = Exhaustion::uniform(space.clone(), 4).unwrap();
        let f = GridFunction::from_fn(space.clone(), |p| (p.line().unwrap() * 1.7).sin());
        let g = GridFunction::from_fn(space.clone(), |p| 1.0 / (1.0 + p.line().unwrap()));
        let mut prev = f64::INFINITY;
        for j in 0..=4 {
            let p = ex.stage(j).unwrap();
            let pf = p.apply(&f).unwrap();
            assert_eq!(p.apply(&pf).unwrap(), pf);
            let lhs = pf.inner(&g);
            let rhs = f.inner(&p.apply(&g).unwrap());
            assert_eq!(lhs, rhs);
            let err = f.sub(&pf).norm(Norm::L2);
            assert!(err <= prev);
            prev = err;
        }
        assert_eq!(prev, 0.0);
    }

    #[test]
    fn rank_one_study() {
        let space = half_line(7);
        let filt = Filtration::dyadic(space.clone(), 7).unwrap();
        let ex = Exhaustion::uniform(space, 8).unwrap();
        let study = truncated_averaged_trace(&Kernel::RankOneExp, &filt, 7, &ex).unwrap();
        assert!(study.nondecreasing && study.traces_agree && study.spectra_match);
        assert_eq!(study.rows[0].truncated_trace, 0.0);
        let last = study.rows.last().unwrap();
        assert!((last.truncated_diag_integral - (1.0 - (-16.0f64).exp()) / 2.0).abs() < 1e-3);
        assert!((study.tail_bound.unwrap() - (-16.0f64).exp() / 2.0).abs() < 1e-15);

        let eq = spectrum_equivalence_check(&Kernel::RankOneExp, &filt, 7, &ex, 1).unwrap();
        assert_eq!(eq.restricted.len(), 1);
        assert!((eq.restricted[0] - (1.0 - (-2.0f64).exp()) / 2.0).abs() < 1e-3);
        let zero = spectrum_equivalence_check(&Kernel::constant(0.0).unwrap(), &filt, 3, &ex, 4).unwrap();
        assert!(zero.pass && zero.restricted.is_empty());
    }

    #[test]
    fn rejects_bounded_domains() {
        let space = Arc::new(
            MeasureSpace::build(DomainKind::Interval { a: 0.0, b: 1.0 }, Density::Uniform { c: 1.0 }, 3, None).unwrap(),
        );
        assert!(Exhaustion::uniform(space, 4).is_err());
    }
}
