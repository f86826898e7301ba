//! Invariant suites over the standard kernel catalog.
//!
//! Each row reports the worst observed violation of one invariant for one
//! subject; a row passes when that value is within its tolerance.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;

use crate::error::Result;
use crate::filtration::{Filtration, Mode};
use crate::kernel::{CosineCoeffs, Kernel, SampledGrid, DEFAULT_SERIES_TERMS};
use crate::martingale::{
    apply_weighted, conditional_expectation, dn_operator_matrix, maximal_function, sandwich_from_samples,
    AveragedKernel, GridFunction, Norm, DN_ATOM_BUDGET,
};
use crate::sigma_finite::{truncated_averaged_trace, truncation_traces, Exhaustion};
use crate::space::{Density, DomainKind, MeasureSpace};
use crate::spectral::{
    eigenvalues, level_spectrum, singular_value_convergence, OperatorMatrix, TRACE_AGREEMENT_TOL,
};

pub const MARTINGALE_SLACK: f64 = 1e-12;
pub const SANDWICH_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-10;
pub const EIGEN_SUM_TOL: f64 = 1e-9;
pub const UPPER_BOUND_TOL: f64 = 1e-8;
pub const WEYL_J_MAX: usize = 8;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct PropertyRow {
    pub module: &'static str,
    pub invariant: &'static str,
    pub subject: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl PropertyRow {
    pub fn new(module: &'static str, invariant: &'static str, subject: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { module, invariant, subject: subject.into(), value, tolerance, pass: value <= tolerance }
    }
}

pub fn all_pass(rows: &[PropertyRow]) -> bool {
    rows.iter().all(|r| r.pass)
}

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: String,
    pub tags: Vec<&'static str>,
    pub kernel: Kernel,
    pub space: Arc<MeasureSpace>,
}

impl CatalogEntry {
    pub fn has_tag(&self, tag: &str) -> bool {
        self.name == tag || self.tags.contains(&tag)
    }
}

fn space(kind: DomainKind, density: Density, level: u32, window: Option<f64>) -> Result<Arc<MeasureSpace>> {
    Ok(Arc::new(MeasureSpace::build(kind, density, level, window)?))
}

/// The standard kernels at `atom_level`, each on its reference space.
pub fn standard_catalog(atom_level: u32) -> Result<Vec<CatalogEntry>> {
    let unit = space(DomainKind::Interval { a: 0.0, b: 1.0 }, Density::Uniform { c: 1.0 }, atom_level, None)?;
    let circle = space(
        DomainKind::Circle { circumference: 2.0 * PI },
        Density::Uniform { c: 1.0 / (2.0 * PI) },
        atom_level,
        None,
    )?;
    let half = space(DomainKind::HalfLine, Density::Uniform { c: 1.0 }, atom_level, Some(8.0))?;
    let decay = space(DomainKind::HalfLine, Density::ExponentialDecay { rate: 1.0 }, atom_level, Some(8.0))?;
    let snapshot = Kernel::ExpAbs { alpha: 3.0 }.sample(&unit)?;
    let grid = SampledGrid::new(unit.clone(), snapshot.transpose().as_slice().to_vec(), true)?;

    let entry = |name: &str, tags: &[&'static str], kernel: Kernel, space: &Arc<MeasureSpace>| CatalogEntry {
        name: name.into(),
        tags: tags.to_vec(),
        kernel,
        space: space.clone(),
    };
    Ok(vec![
        entry("brownian_min", &["psd", "interval", "trace_class"], Kernel::BrownianMin, &unit),
        entry("exp_abs", &["psd", "interval"], Kernel::exp_abs(1.0)?, &unit),
        entry("gaussian_rbf", &["psd", "interval"], Kernel::gaussian_rbf(10.0)?, &unit),
        entry(
            "cosine_series_inverse_square",
            &["psd", "circle", "trace_class"],
            Kernel::cosine_series(CosineCoeffs::InverseSquare, DEFAULT_SERIES_TERMS)?,
            &circle,
        ),
        entry(
            "cosine_series_inverse",
            &["psd", "circle", "divergent"],
            Kernel::cosine_series(CosineCoeffs::Inverse, DEFAULT_SERIES_TERMS)?,
            &circle,
        ),
        entry("rank_one_exp", &["psd", "half_line", "trace_class"], Kernel::RankOneExp, &half),
        entry("exp_abs_decay", &["psd", "half_line"], Kernel::exp_abs(1.0)?, &decay),
        entry("constant", &["psd", "interval", "trace_class"], Kernel::constant(1.0)?, &unit),
        entry("sampled", &["psd", "interval", "sampled"], Kernel::SampledGrid(Arc::new(grid)), &unit),
    ])
}

/// Measure sums, atom lookup and refinement of `space`.
pub fn space_suite(space: &MeasureSpace, subject: &str) -> Result<Vec<PropertyRow>> {
    let total = space.total_measure();
    let closed = space.closed_form_measure();
    let mut rows = vec![PropertyRow::new("space", "measure_sum", subject, (total - closed).abs(), 1e-10)];
    let misses = space.atoms().iter().filter(|a| space.atom_of(a.rep).ok() != Some(a.index)).count();
    rows.push(PropertyRow::new("space", "atom_of_left_inverse", subject, misses as f64, 0.0));
    if space.atom_level() < crate::space::MAX_ATOM_LEVEL && space.dim() == 1 {
        let fine = MeasureSpace::build(
            *space.kind(),
            space.density().clone(),
            space.atom_level() + 1,
            space.window(),
        )?;
        let worst = space
            .atoms()
            .iter()
            .map(|a| {
                let kids = fine.atoms()[2 * a.index].measure + fine.atoms()[2 * a.index + 1].measure;
                (kids - a.measure).abs()
            })
            .fold(0.0, f64::max);
        rows.push(PropertyRow::new("space", "refinement_additivity", subject, worst, 1e-12));
    }
    Ok(rows)
}

/// Nesting, additivity and uniqueness of the partitions.
pub fn filtration_suite(filtration: &Filtration, subject: &str) -> Result<Vec<PropertyRow>> {
    let atoms = filtration.space().atoms();
    let (mut nesting, mut additivity, mut uniqueness) = (0usize, 0.0f64, 0usize);
    for (n, level) in filtration.levels().iter().enumerate() {
        let mut seen = vec![0usize; atoms.len()];
        for cell in &level.cells {
            for &a in &cell.atoms {
                seen[a] += 1;
            }
            let sum: f64 = cell.atoms.iter().map(|&a| atoms[a].measure).sum();
            additivity = additivity.max((sum - cell.measure).abs());
        }
        uniqueness += seen.iter().filter(|&&c| c != 1).count();
        if n == 0 {
            continue;
        }
        let coarse = &filtration.levels()[n - 1];
        for cell in &level.cells {
            let parent = level.parent[cell.id];
            nesting += cell.atoms.iter().filter(|&&a| coarse.atom_cell[a] != parent).count();
        }
        let mut child_sum = vec![0.0; coarse.len()];
        for cell in &level.cells {
            child_sum[level.parent[cell.id]] += cell.measure;
        }
        for (p, s) in child_sum.iter().enumerate() {
            additivity = additivity.max((s - coarse.cells[p].measure).abs());
        }
    }
    Ok(vec![
        PropertyRow::new("filtration", "refinement", subject, nesting as f64, 0.0),
        PropertyRow::new("filtration", "measure_additivity", subject, additivity, 1e-12),
        PropertyRow::new("filtration", "unique_cell", subject, uniqueness as f64, 0.0),
    ])
}

fn worst(rows: impl IntoIterator<Item = f64>) -> f64 {
    rows.into_iter().fold(0.0, f64::max)
}

/// Martingale invariants over a function suite.
pub fn martingale_suite(filtration: &Filtration, functions: &[GridFunction], subject: &str) -> Result<Vec<PropertyRow>> {
    let depth = filtration.depth();
    let (mut l1, mut l2, mut linf, mut tower, mut block) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let (mut mean_rise, mut mean_final, mut domination, mut doob) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let atomic = filtration.level(depth)?.cells.iter().all(|c| c.atoms.len() == 1);

    for f in functions {
        let levels: Vec<GridFunction> =
            (0..=depth).map(|n| conditional_expectation(f, filtration, n)).collect::<Result<_>>()?;
        for (n, e) in levels.iter().enumerate() {
            l1 = l1.max(e.norm(Norm::L1) - f.norm(Norm::L1));
            l2 = l2.max(e.norm(Norm::L2) - f.norm(Norm::L2));
            linf = linf.max(e.norm(Norm::LInf) - f.norm(Norm::LInf));
            for cell in &filtration.level(n)?.cells {
                let first = e.values()[cell.atoms[0]];
                block = block.max(worst(cell.atoms.iter().map(|&a| (e.values()[a] - first).abs())));
            }
            for (m, coarse) in levels.iter().enumerate().take(n) {
                let em = conditional_expectation(e, filtration, m)?;
                tower = tower.max(worst(em.values().iter().zip(coarse.values()).map(|(a, b)| (a - b).abs())));
            }
        }
        let errors: Vec<f64> = levels.iter().map(|e| e.sub(f).norm(Norm::L2)).collect();
        match filtration.mode() {
            Mode::Dyadic => mean_rise = mean_rise.max(worst(errors.windows(2).map(|p| p[1] - p[0]))),
            Mode::CoverBased => mean_rise = mean_rise.max(errors[errors.len() - 1] - errors[0]),
        }
        if atomic {
            mean_final = mean_final.max(errors[depth]);
        }
        let mf = maximal_function(f, filtration)?;
        if atomic {
            domination = domination.max(worst(f.values().iter().zip(mf.values()).map(|(v, m)| v.abs() - m)));
        }
        doob = doob.max(mf.norm(Norm::L2) - 2.0 * f.norm(Norm::L2));
    }

    let s = MARTINGALE_SLACK;
    let mut rows = vec![
        PropertyRow::new("martingale", "contraction_l1", subject, l1, s),
        PropertyRow::new("martingale", "contraction_l2", subject, l2, s),
        PropertyRow::new("martingale", "contraction_linf", subject, linf, s),
        PropertyRow::new("martingale", "tower", subject, tower, s),
        PropertyRow::new("martingale", "block_constancy", subject, block, 0.0),
        PropertyRow::new("martingale", "mean_convergence_monotone", subject, mean_rise, s),
        PropertyRow::new("martingale", "doob_l2", subject, doob, s),
    ];
    if atomic {
        rows.push(PropertyRow::new("martingale", "mean_convergence_final", subject, mean_final, s));
        rows.push(PropertyRow::new("martingale", "pointwise_domination", subject, domination, s));
    }
    if filtration.space().len() <= DN_ATOM_BUDGET {
        rows.extend(dn_suite(filtration, functions, subject)?);
    }
    Ok(rows)
}

/// Self-adjointness and idempotence of the materialized `D_n`, and its
/// agreement with block-sum conditional expectations.
fn dn_suite(filtration: &Filtration, functions: &[GridFunction], subject: &str) -> Result<Vec<PropertyRow>> {
    let (mut adjoint, mut idempotent, mut agree) = (0.0f64, 0.0f64, 0.0f64);
    for n in 0..=filtration.depth() {
        let d = dn_operator_matrix(filtration, n)?;
        for (i, f) in functions.iter().enumerate() {
            let g = &functions[(i + 1) % functions.len()];
            let df = apply_weighted(&d, f);
            adjoint = adjoint.max((df.inner(g) - f.inner(&apply_weighted(&d, g))).abs());
            let ddf = apply_weighted(&d, &df);
            idempotent = idempotent.max(worst(ddf.values().iter().zip(df.values()).map(|(a, b)| (a - b).abs())));
            let e = conditional_expectation(f, filtration, n)?;
            agree = agree.max(worst(e.values().iter().zip(df.values()).map(|(a, b)| (a - b).abs())));
        }
    }
    let s = MARTINGALE_SLACK;
    Ok(vec![
        PropertyRow::new("martingale", "dn_self_adjoint", subject, adjoint, s),
        PropertyRow::new("martingale", "dn_idempotent", subject, idempotent, s),
        PropertyRow::new("martingale", "dn_matches_block_sums", subject, agree, s),
    ])
}

/// Kernel-level invariants: symmetry, trace = eigenvalue sum, the sandwich
/// identity at every level, PSD preservation, the trace upper bound and the
/// Weyl bound.
pub fn kernel_suite(kernel: &Kernel, filtration: &Filtration, subject: &str) -> Result<Vec<PropertyRow>> {
    let space = filtration.space();
    let samples = kernel.sample(space)?;
    let scale = samples.amax().max(f64::MIN_POSITIVE);
    let mut rows =
        vec![PropertyRow::new("kernel", "symmetry", subject, (&samples - samples.transpose()).amax() / scale, 1e-12)];

    let op = OperatorMatrix::from_samples(space.clone(), samples.clone())?;
    let spectrum = op.eigenvalues()?;
    let sum: f64 = spectrum.iter().sum();
    let gap = (sum - op.trace()).abs() / op.trace().abs().max(f64::MIN_POSITIVE);
    rows.push(PropertyRow::new("spectral", "trace_equals_eigenvalue_sum", subject, gap, EIGEN_SUM_TOL));

    let psd_input = kernel.psd_claim() && min_ratio(&spectrum) >= -PSD_TOL;
    let truth = kernel.spectrum_truth(space).and_then(|s| s.trace);
    let (mut sandwich, mut psd, mut agreement, mut excess) = (0.0f64, 0.0f64, 0.0f64, f64::NEG_INFINITY);
    for n in 0..=filtration.depth() {
        if n >= 1 && space.len() <= DN_ATOM_BUDGET {
            sandwich = sandwich.max(sandwich_from_samples(&samples, filtration, n, SANDWICH_TOL)?.max_abs_diff);
        }
        let avg = AveragedKernel::from_samples(&samples, filtration, n)?;
        let values = level_spectrum(&avg)?;
        psd = psd.max(-min_ratio(&values));
        let tr: f64 = values.iter().sum();
        let t = avg.diagonal_average();
        let scale = t.abs().max(tr.abs());
        if scale > 0.0 {
            agreement = agreement.max((tr - t).abs() / scale);
        }
        if let Some(truth) = truth {
            excess = excess.max(tr - truth);
        }
    }
    if space.len() <= DN_ATOM_BUDGET {
        rows.push(PropertyRow::new("martingale", "sandwich_identity", subject, sandwich, SANDWICH_TOL));
    }
    if psd_input {
        rows.push(PropertyRow::new("martingale", "psd_preservation", subject, psd, PSD_TOL));
    }
    rows.push(PropertyRow::new("spectral", "sandwich_trace_equals_diagonal", subject, agreement, TRACE_AGREEMENT_TOL));
    if truth.is_some() {
        rows.push(PropertyRow::new("spectral", "trace_upper_bound", subject, excess.max(0.0), UPPER_BOUND_TOL));
    }
    let weyl = singular_value_convergence(kernel, filtration, WEYL_J_MAX)?;
    let slack = worst(weyl.rows.iter().flat_map(|r| r.gaps.iter().map(move |g| g - r.operator_gap)));
    rows.push(PropertyRow::new("spectral", "weyl_bound", subject, slack.max(0.0), crate::spectral::WEYL_SLACK));
    Ok(rows)
}

/// `min λ / max |λ|`, or 0 for the zero spectrum.
fn min_ratio(values: &[f64]) -> f64 {
    let top = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if top == 0.0 {
        return 0.0;
    }
    values.iter().copied().fold(f64::INFINITY, f64::min).min(0.0) / top
}

/// Truncation invariants for half-line kernels.
pub fn sigma_finite_suite(
    kernel: &Kernel,
    filtration: &Filtration,
    functions: &[GridFunction],
    stages: usize,
    subject: &str,
) -> Result<Vec<PropertyRow>> {
    let space = filtration.space();
    let ex = Exhaustion::uniform(space.clone(), stages)?;
    let (mut idem, mut adjoint, mut rise, mut last) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (i, f) in functions.iter().enumerate() {
        let g = &functions[(i + 1) % functions.len()];
        let mut errors = Vec::with_capacity(stages + 1);
        for j in 0..=stages {
            let p = ex.stage(j)?;
            let pf = p.apply(f)?;
            idem = idem.max(worst(p.apply(&pf)?.values().iter().zip(pf.values()).map(|(a, b)| (a - b).abs())));
            adjoint = adjoint.max((pf.inner(g) - f.inner(&p.apply(g)?)).abs());
            errors.push(f.sub(&pf).norm(Norm::L2));
        }
        rise = rise.max(worst(errors.windows(2).map(|p| p[1] - p[0])));
        last = last.max(errors[stages]);
    }
    let op = OperatorMatrix::from_samples(space.clone(), kernel.sample(space)?)?;
    let traces = truncation_traces(&op, &ex)?;
    let trace_drop = worst(traces.windows(2).map(|p| p[0] - p[1]));
    let trace_final = (traces[stages] - op.trace()).abs();
    let study = truncated_averaged_trace(kernel, filtration, filtration.depth(), &ex)?;
    let qr = worst(study.rows.iter().map(|r| r.spectral_gap_check));
    let agree = worst(study.rows.iter().map(|r| r.agreement));
    let s = MARTINGALE_SLACK;
    Ok(vec![
        PropertyRow::new("sigma_finite", "projection_idempotent", subject, idem, 0.0),
        PropertyRow::new("sigma_finite", "projection_self_adjoint", subject, adjoint, s),
        PropertyRow::new("sigma_finite", "pointwise_identity_monotone", subject, rise, s),
        PropertyRow::new("sigma_finite", "pointwise_identity_final", subject, last, 0.0),
        PropertyRow::new("sigma_finite", "truncated_trace_monotone", subject, trace_drop, s),
        PropertyRow::new("sigma_finite", "truncated_trace_final", subject, trace_final, s),
        PropertyRow::new("sigma_finite", "restricted_masked_spectra", subject, qr, crate::sigma_finite::SPECTRUM_TOL),
        PropertyRow::new("sigma_finite", "truncated_trace_agreement", subject, agree, crate::sigma_finite::TRACE_AGREEMENT_TOL),
    ])
}

/// Every suite over every catalog entry, with a dyadic filtration of full
/// depth and a seeded function suite per space.
pub fn catalog_suite(entries: &[CatalogEntry], functions: usize, seed: u64, stages: usize) -> Result<Vec<PropertyRow>> {
    let mut rows = Vec::new();
    for entry in entries {
        let filtration = Filtration::dyadic(entry.space.clone(), entry.space.atom_level() as usize)?;
        let suite = crate::suite::random_functions(&entry.space, functions, seed);
        rows.extend(space_suite(&entry.space, &entry.name)?);
        rows.extend(filtration_suite(&filtration, &entry.name)?);
        rows.extend(martingale_suite(&filtration, &suite, &entry.name)?);
        rows.extend(kernel_suite(&entry.kernel, &filtration, &entry.name)?);
        if entry.has_tag("half_line") {
            rows.extend(sigma_finite_suite(&entry.kernel, &filtration, &suite, stages, &entry.name)?);
        }
    }
    Ok(rows)
}

/// Smallest eigenvalue of the symmetric form of `K` relative to the largest.
pub fn psd_margin(kernel: &Kernel, space: &Arc<MeasureSpace>) -> Result<f64> {
    let op = OperatorMatrix::from_samples(space.clone(), kernel.sample(space)?)?;
    Ok(min_ratio(&eigenvalues(op.symmetric())?))
}
