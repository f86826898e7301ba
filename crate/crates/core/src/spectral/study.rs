//! Trace studies along a filtration.
//!
//! For each level the diagonal average `t_n = Σ_c μ(c) E_n(K)(c, c)` is
//! computed from cell blocks, and `tr(ℰ^n_K)` independently as the
//! eigenvalue sum of the averaged operator. The verdict is a fixed rule on
//! the tail of the `t_n` sequence.

use std::f64::consts::LN_2;

use nalgebra::DMatrix;
use serde::Serialize;

use super::eigen::{eigenvalues, singular_from};
use super::operator::{OperatorMatrix, DENSE_ATOM_BUDGET};
use crate::error::{Error, Result};
use crate::filtration::Filtration;
use crate::kernel::Kernel;
use crate::martingale::AveragedKernel;

/// Relative agreement required between `t_n` and the eigenvalue sum.
pub const TRACE_AGREEMENT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    TraceClassEvidence,
    DivergenceEvidence,
    Inconclusive,
}

/// Thresholds of the finite-data verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerdictRule {
    /// Levels inspected at the tail.
    pub window: usize,
    /// Required ratio between consecutive increments.
    pub shrink: f64,
    /// Final increment bound, relative to `max(1, |t_{n_max}|)`.
    pub settle: f64,
    /// Per-level growth required for divergence, relative to `t_{n_min}`.
    pub growth: f64,
}

impl Default for VerdictRule {
    fn default() -> Self {
        Self { window: 3, shrink: 1.5, settle: 1e-3, growth: 0.05 }
    }
}

/// Classifies a sequence `t_{n_min}, …, t_{n_max}`.
///
/// Trace-class evidence: each of the last `window` increments is at most
/// `1/shrink` of the one before it, and the final increment is at most
/// `settle · max(1, |t_{n_max}|)`. Divergence evidence: each of the last
/// `window` increments is positive and at least `growth · |t_{n_min}|`.
pub fn verdict(t: &[f64], rule: &VerdictRule) -> Verdict {
    let inc: Vec<f64> = t.windows(2).map(|p| p[1] - p[0]).collect();
    let w = rule.window;
    if inc.len() > w {
        let tail = &inc[inc.len() - w - 1..];
        let shrinking = tail.windows(2).all(|p| p[1].abs() * rule.shrink <= p[0].abs());
        let last = *t.last().expect("nonempty");
        let settled = inc.last().expect("nonempty").abs() <= rule.settle * last.abs().max(1.0);
        if shrinking && settled {
            return Verdict::TraceClassEvidence;
        }
    }
    if inc.len() >= w {
        let delta = rule.growth * t[0].abs();
        if inc[inc.len() - w..].iter().all(|&d| d > 0.0 && d >= delta) {
            return Verdict::DivergenceEvidence;
        }
    }
    Verdict::Inconclusive
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelRow {
    pub n: usize,
    pub cells: usize,
    /// `∫ E_n(K)(x, x) dμ` from cell diagonals.
    pub t_n: f64,
    /// Eigenvalue sum of `ℰ^n_K`.
    pub tr_sandwich: f64,
    pub agreement: f64,
    /// Leading eigenvalues of `ℰ^n_K`, zero padded.
    pub eigenvalues: Vec<f64>,
    /// `|s_j(ℰ^n_K) − s_j(𝒦_L)|`.
    pub gaps: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceReport {
    pub kernel: String,
    pub n_min: usize,
    pub n_max: usize,
    pub top_k: usize,
    pub levels: Vec<LevelRow>,
    /// Leading eigenvalues of the finest-grid operator `𝒦_L`.
    pub finest_eigenvalues: Vec<f64>,
    /// Analytic contribution of dropped series terms, when known.
    pub tail_correction: Option<f64>,
    pub estimate: f64,
    pub verdict: Verdict,
    pub rule: VerdictRule,
    pub increments: Vec<f64>,
    /// Increment per unit of `ln(resolution)`.
    pub log_slopes: Vec<f64>,
    pub max_disagreement: f64,
    pub traces_agree: bool,
}

impl TraceReport {
    pub fn t(&self) -> Vec<f64> {
        self.levels.iter().map(|r| r.t_n).collect()
    }
}

/// Spectrum of `ℰ^n_K` via its cell-level symmetric form.
pub fn level_spectrum(avg: &AveragedKernel) -> Result<Vec<f64>> {
    eigenvalues(&avg.symmetrized())
}

fn padded(values: &[f64], k: usize) -> Vec<f64> {
    (0..k).map(|j| values.get(j).copied().unwrap_or(0.0)).collect()
}

fn relative_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

pub fn trace_study(
    kernel: &Kernel,
    filtration: &Filtration,
    n_min: usize,
    n_max: usize,
    top_k: usize,
) -> Result<TraceReport> {
    let space = filtration.space();
    if space.len() > DENSE_ATOM_BUDGET {
        return Err(Error::AtomBudget { atoms: space.len(), budget: DENSE_ATOM_BUDGET });
    }
    let samples = kernel.sample(space)?;
    let tail_correction = kernel.diagonal_integral(space).ok().and_then(|d| d.series_tail);
    trace_study_from_samples(kernel.name(), &samples, filtration, n_min, n_max, top_k, tail_correction)
}

pub fn trace_study_from_samples(
    name: &str,
    samples: &DMatrix<f64>,
    filtration: &Filtration,
    n_min: usize,
    n_max: usize,
    top_k: usize,
    tail_correction: Option<f64>,
) -> Result<TraceReport> {
    if n_min > n_max {
        return Err(Error::Argument(format!("n_min {n_min} exceeds n_max {n_max}")));
    }
    if n_max > filtration.depth() {
        return Err(Error::Depth { depth: n_max, limit: filtration.depth() });
    }
    let op = OperatorMatrix::from_samples(filtration.space().clone(), samples.clone())?;
    let finest_spectrum = op.eigenvalues()?;
    let finest = singular_from(&finest_spectrum);
    let finest_eigenvalues = padded(&finest_spectrum, top_k);

    let mut levels = Vec::with_capacity(n_max - n_min + 1);
    for n in n_min..=n_max {
        let avg = AveragedKernel::from_samples(samples, filtration, n)?;
        let t_n = avg.diagonal_average();
        let spectrum = level_spectrum(&avg)?;
        let tr_sandwich: f64 = spectrum.iter().sum();
        let sv = singular_from(&spectrum);
        let gaps = (0..top_k)
            .map(|j| (sv.get(j).copied().unwrap_or(0.0) - finest.get(j).copied().unwrap_or(0.0)).abs())
            .collect();
        levels.push(LevelRow {
            n,
            cells: avg.cell_measures.len(),
            t_n,
            tr_sandwich,
            agreement: relative_gap(t_n, tr_sandwich),
            eigenvalues: padded(&spectrum, top_k),
            gaps,
        });
    }
    let t: Vec<f64> = levels.iter().map(|r| r.t_n).collect();
    let increments: Vec<f64> = t.windows(2).map(|p| p[1] - p[0]).collect();
    let log_slopes = increments.iter().map(|d| d / LN_2).collect();
    let max_disagreement = levels.iter().map(|r| r.agreement).fold(0.0, f64::max);
    let rule = VerdictRule::default();
    Ok(TraceReport {
        kernel: name.to_string(),
        n_min,
        n_max,
        top_k,
        finest_eigenvalues,
        tail_correction,
        estimate: t[t.len() - 1] + tail_correction.filter(|c| c.is_finite()).unwrap_or(0.0),
        verdict: verdict(&t, &rule),
        rule,
        increments,
        log_slopes,
        traces_agree: max_disagreement <= TRACE_AGREEMENT_TOL,
        max_disagreement,
        levels,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct UpperBoundRow {
    pub n: usize,
    pub trace: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct UpperBoundReport {
    pub truth: f64,
    pub tol: f64,
    pub rows: Vec<UpperBoundRow>,
    pub pass: bool,
}

/// Checks `tr(ℰ^n_K) ≤ tr(𝒦)` at every level against the analytic trace.
pub fn upper_bound_check(kernel: &Kernel, filtration: &Filtration) -> Result<UpperBoundReport> {
    let space = filtration.space();
    let truth = kernel
        .spectrum_truth(space)
        .and_then(|s| s.trace)
        .ok_or_else(|| Error::Argument(format!("{} has no analytic trace on this space", kernel.name())))?;
    let samples = kernel.sample(space)?;
    let tol = 1e-8;
    let rows = (0..=filtration.depth())
        .map(|n| {
            let avg = AveragedKernel::from_samples(&samples, filtration, n)?;
            let trace: f64 = level_spectrum(&avg)?.iter().sum();
            Ok(UpperBoundRow { n, trace, slack: truth - trace })
        })
        .collect::<Result<Vec<_>>>()?;
    let pass = rows.iter().all(|r| r.trace <= truth + tol);
    Ok(UpperBoundReport { truth, tol, rows, pass })
}

#[derive(Debug, Clone, Serialize)]
pub struct SvRow {
    pub n: usize,
    pub singular_values: Vec<f64>,
    pub gaps: Vec<f64>,
    /// `‖ℰ^n_K − 𝒦_L‖₂→₂`.
    pub operator_gap: f64,
    pub weyl_holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SingularValueReport {
    pub j_max: usize,
    pub finest: Vec<f64>,
    pub rows: Vec<SvRow>,
    /// Per `j`: the gap never increases with `n`.
    pub monotone: Vec<bool>,
    pub weyl_pass: bool,
    pub final_gap: f64,
    /// Set when the last level is the atomic partition.
    pub final_pass: Option<bool>,
}

pub const WEYL_SLACK: f64 = 1e-10;
pub const FINAL_GAP_TOL: f64 = 1e-10;

/// Singular values of `ℰ^n_K` against `𝒦_L` across all levels, with the
/// Weyl bound `|s_j(A) − s_j(B)| ≤ ‖A − B‖` checked at each level.
pub fn singular_value_convergence(
    kernel: &Kernel,
    filtration: &Filtration,
    j_max: usize,
) -> Result<SingularValueReport> {
    if !(1..=16).contains(&j_max) {
        return Err(Error::Argument(format!("j_max must be in 1..=16, got {j_max}")));
    }
    let space = filtration.space();
    if space.len() > DENSE_ATOM_BUDGET {
        return Err(Error::AtomBudget { atoms: space.len(), budget: DENSE_ATOM_BUDGET });
    }
    let samples = kernel.sample(space)?;
    let op = OperatorMatrix::from_samples(space.clone(), samples.clone())?;
    let finest_all = singular_from(&op.eigenvalues()?);
    let finest = padded(&finest_all, j_max);
    let sq: Vec<f64> = op.weights().iter().map(|w| w.sqrt()).collect();
    let n_atoms = space.len();

    let mut rows = Vec::new();
    for n in 0..=filtration.depth() {
        let avg = AveragedKernel::from_samples(&samples, filtration, n)?;
        let sv = padded(&singular_from(&level_spectrum(&avg)?), j_max);
        let cell = &filtration.level(n)?.atom_cell;
        let diff = DMatrix::from_fn(n_atoms, n_atoms, |a, b| {
            let e = 0.5 * (avg.values[(cell[a], cell[b])] + avg.values[(cell[b], cell[a])]);
            sq[a] * e * sq[b] - op.symmetric()[(a, b)]
        });
        let diff = 0.5 * (&diff + diff.transpose());
        let operator_gap = eigenvalues(&diff)?.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let gaps: Vec<f64> = sv.iter().zip(&finest).map(|(a, b)| (a - b).abs()).collect();
        let weyl_holds = gaps.iter().all(|g| *g <= operator_gap + WEYL_SLACK);
        rows.push(SvRow { n, singular_values: sv, gaps, operator_gap, weyl_holds });
    }
    let monotone = (0..j_max)
        .map(|j| rows.windows(2).all(|p| p[1].gaps[j] <= p[0].gaps[j] + 1e-12))
        .collect();
    let last = rows.last().expect("level 0 exists");
    let final_gap = last.gaps.iter().fold(0.0f64, |m, g| m.max(*g));
    let atomic = filtration
        .level(filtration.depth())?
        .cells
        .iter()
        .all(|c| c.atoms.len() == 1);
    Ok(SingularValueReport {
        j_max,
        finest,
        weyl_pass: rows.iter().all(|r| r.weyl_holds),
        final_pass: atomic.then_some(final_gap <= FINAL_GAP_TOL),
        final_gap,
        monotone,
        rows,
    })
}
