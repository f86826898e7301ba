//! One function per study. Each returns its CSV table, a JSON report and
//! the list of failed study checks.

use mtrace_core::martingale::{conditional_expectation, maximal_function, sandwich_from_samples};
use mtrace_core::properties::{
    catalog_suite, filtration_suite, kernel_suite, martingale_suite, sigma_finite_suite, space_suite,
    standard_catalog, PropertyRow,
};
use mtrace_core::sigma_finite::{truncated_averaged_trace, DEFAULT_STAGES};
use mtrace_core::spectral::{
    assemble, singular_value_convergence, trace_study, upper_bound_check, EigenMethod,
};
use mtrace_core::suite::{random_functions, DEFAULT_SUITE_SIZE};
use mtrace_core::{DomainKind, Exhaustion, Filtration, GridFunction, Kernel, MeasureSpace, Mode, Norm};
use serde_json::{json, Value};

use crate::config::{Experiment, Study};
use crate::error::CliError;

pub const DEFAULT_TOP_K: usize = 5;
pub const DEFAULT_J_MAX: usize = 8;
pub const DEFAULT_CATALOG_LEVEL: u32 = 8;
const RESIDUAL_TOL: f64 = 1e-9;
const SLACK: f64 = 1e-12;

#[derive(Debug)]
pub struct StudyOutput {
    pub csv: String,
    pub report: Value,
    pub failures: Vec<String>,
}

/// `{:.16e}`: 17 significant digits, `.` decimal point; `-0` prints as `0`.
pub fn real(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.16e}")
}

struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    fn new<S: AsRef<str>>(header: &[S]) -> Result<Self, CliError> {
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        writer.write_record(header.iter().map(AsRef::as_ref)).map_err(csv_err)?;
        Ok(Self { writer })
    }

    fn row(&mut self, cells: Vec<String>) -> Result<(), CliError> {
        self.writer.write_record(&cells).map_err(csv_err)
    }

    fn finish(self) -> Result<String, CliError> {
        let bytes = self.writer.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Runtime(e.to_string())
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

fn parts(exp: &Experiment) -> (&std::sync::Arc<MeasureSpace>, &Filtration) {
    (
        exp.space.as_ref().expect("validated space"),
        exp.filtration.as_ref().expect("validated filtration"),
    )
}

fn kernel(exp: &Experiment) -> &Kernel {
    exp.kernel.as_ref().expect("validated kernel")
}

pub fn execute(exp: &Experiment) -> Result<StudyOutput, CliError> {
    match exp.study {
        Study::TraceStudy => run_trace_study(exp),
        Study::Spectrum => run_spectrum(exp),
        Study::DoobConvergence => run_doob(exp),
        Study::MaximalFunction => run_maximal(exp),
        Study::SandwichIdentity => run_sandwich(exp),
        Study::TruncationStudy => run_truncation(exp),
        Study::PropertySuite => run_properties(exp),
    }
}

fn run_trace_study(exp: &Experiment) -> Result<StudyOutput, CliError> {
    let (space, filt) = parts(exp);
    let k = kernel(exp);
    let n_min = exp.params.n_min.unwrap_or(1.min(filt.depth()));
    let n_max = exp.params.n_max.unwrap_or(filt.depth());
    let top_k = exp.params.top_k.unwrap_or(DEFAULT_TOP_K);
    let report = trace_study(k, filt, n_min, n_max, top_k)?;

    let mut header = vec!["n".to_string(), "t_n".into(), "tr_sandwich".into()];
    header.extend((1..=top_k).map(|j| format!("lambda_{j}")));
    header.extend((1..=top_k).map(|j| format!("gap_{j}")));
    let mut table = Table::new(&header)?;
    for row in &report.levels {
        let mut cells = vec![row.n.to_string(), real(row.t_n), real(row.tr_sandwich)];
        cells.extend(row.eigenvalues.iter().map(|v| real(*v)));
        cells.extend(row.gaps.iter().map(|v| real(*v)));
        table.row(cells)?;
    }

    let mut failures = Vec::new();
    if !report.traces_agree {
        failures.push(format!(
            "diagonal average and eigenvalue sum differ by {:e} (relative)",
            report.max_disagreement
        ));
    }
    let truth = k.spectrum_truth(space);
    let bound = match truth.as_ref().and_then(|t| t.trace) {
        Some(_) => {
            let b = upper_bound_check(k, filt)?;
            if !b.pass {
                failures.push("averaged trace exceeds the analytic trace".into());
            }
            Some(b)
        }
        None => None,
    };
    let json = json!({
        "study": "trace_study",
        "report": to_value(&report),
        "analytic_trace": truth.as_ref().and_then(|t| t.trace),
        "analytic_divergent": truth.as_ref().map(|t| t.divergent),
        "upper_bound": bound.as_ref().map(to_value),
    });
    Ok(StudyOutput { csv: table.finish()?, report: json, failures })
}

fn run_spectrum(exp: &Experiment) -> Result<StudyOutput, CliError> {
    let (space, filt) = parts(exp);
    let k = kernel(exp);
    let top_k = exp.params.top_k.unwrap_or(10);
    let op = assemble(k, space)?;
    let dec = op.decompose(EigenMethod::TridiagonalQl)?;
    let scale = op.symmetric().amax();
    let truth = k.spectrum_truth(space);

    let mut table = Table::new(&["j", "eigenvalue", "singular_value", "analytic", "relative_error"])?;
    for j in 0..top_k.min(dec.eigenvalues.len()) {
        let analytic = truth.as_ref().and_then(|t| t.eigenvalues.get(j).copied());
        let rel = analytic.filter(|a| *a != 0.0).map(|a| (dec.eigenvalues[j] - a).abs() / a.abs());
        table.row(vec![
            (j + 1).to_string(),
            real(dec.eigenvalues[j]),
            real(dec.singular_values[j]),
            analytic.map(real).unwrap_or_default(),
            rel.map(real).unwrap_or_default(),
        ])?;
    }

    let mut failures = Vec::new();
    if dec.residual > RESIDUAL_TOL * scale {
        failures.push(format!("eigen residual {:e} exceeds {:e}", dec.residual, RESIDUAL_TOL * scale));
    }
    let sv = singular_value_convergence(k, filt, exp.params.j_max.unwrap_or(DEFAULT_J_MAX))?;
    if !sv.weyl_pass {
        failures.push("Weyl bound violated".into());
    }
    if sv.final_pass == Some(false) {
        failures.push(format!("final singular-value gap {:e} exceeds 1e-10", sv.final_gap));
    }
    let json = json!({
        "study": "spectrum",
        "atoms": space.len(),
        "trace": op.trace(),
        "eigenvalue_sum": dec.trace(),
        "residual": dec.residual,
        "residual_tol": RESIDUAL_TOL * scale,
        "eigenvalues": &dec.eigenvalues[..top_k.min(dec.eigenvalues.len())],
        "analytic": truth.as_ref().map(|t| json!({
            "eigenvalues": &t.eigenvalues[..top_k.min(t.eigenvalues.len())],
            "trace": t.trace,
            "source": t.source,
        })),
        "singular_value_convergence": to_value(&sv),
    });
    Ok(StudyOutput { csv: table.finish()?, report: json, failures })
}

fn suite(exp: &Experiment, space: &std::sync::Arc<MeasureSpace>) -> Vec<GridFunction> {
    random_functions(space, exp.params.functions.unwrap_or(DEFAULT_SUITE_SIZE), exp.seed)
}

fn atomic(filt: &Filtration) -> bool {
    filt.levels().last().is_some_and(|p| p.cells.iter().all(|c| c.atoms.len() == 1))
}

fn run_doob(exp: &Experiment) -> Result<StudyOutput, CliError> {
    let (space, filt) = parts(exp);
    let fs = suite(exp, space);
    let mut errors = vec![vec![0.0; fs.len()]; filt.depth() + 1];
    for (i, f) in fs.iter().enumerate() {
        for (n, row) in errors.iter_mut().enumerate() {
            row[i] = conditional_expectation(f, filt, n)?.sub(f).norm(Norm::L2);
        }
    }
    let mut table = Table::new(&["n", "cells", "max_error", "mean_error"])?;
    for (n, row) in errors.iter().enumerate() {
        let max = row.iter().copied().fold(0.0, f64::max);
        let mean = row.iter().sum::<f64>() / row.len() as f64;
        table.row(vec![n.to_string(), filt.level(n)?.len().to_string(), real(max), real(mean)])?;
    }

    let rise = (0..fs.len())
        .map(|i| match filt.mode() {
            Mode::Dyadic => errors.windows(2).map(|p| p[1][i] - p[0][i]).fold(0.0, f64::max),
            Mode::CoverBased => errors[errors.len() - 1][i] - errors[0][i],
        })
        .fold(0.0, f64::max);
    let final_error = errors[filt.depth()].iter().copied().fold(0.0, f64::max);
    let mut failures = Vec::new();
    if rise > SLACK {
        failures.push(format!("mean error increased by {rise:e}"));
    }
    if atomic(filt) && final_error > SLACK {
        failures.push(format!("mean error {final_error:e} at the atomic level"));
    }
    let json = json!({
        "study": "doob_convergence",
        "mode": format!("{:?}", filt.mode()).to_lowercase(),
        "functions": fs.len(),
        "seed": exp.seed,
        "max_rise": rise,
        "monotone": rise <= SLACK,
        "atomic_final_level": atomic(filt),
        "final_error": final_error,
    });
    Ok(StudyOutput { csv: table.finish()?, report: json, failures })
}

fn run_maximal(exp: &Experiment) -> Result<StudyOutput, CliError> {
    let (space, filt) = parts(exp);
    let fs = suite(exp, space);
    let full = atomic(filt);
    let mut table = Table::new(&["function", "l2_f", "l2_mf", "ratio", "domination_gap"])?;
    let (mut worst_ratio, mut worst_gap) = (0.0f64, f64::NEG_INFINITY);
    let mut failures = Vec::new();
    for (i, f) in fs.iter().enumerate() {
        let mf = maximal_function(f, filt)?;
        let (nf, nm) = (f.norm(Norm::L2), mf.norm(Norm::L2));
        let ratio = if nf > 0.0 { nm / nf } else { 0.0 };
        worst_ratio = worst_ratio.max(ratio);
        let gap = full.then(|| {
            f.values().iter().zip(mf.values()).map(|(v, m)| v.abs() - m).fold(f64::NEG_INFINITY, f64::max)
        });
        if let Some(g) = gap {
            worst_gap = worst_gap.max(g);
        }
        if nm > 2.0 * nf + SLACK {
            failures.push(format!("function {i}: ‖Mf‖₂ = {nm:e} exceeds 2‖f‖₂ = {:e}", 2.0 * nf));
        }
        table.row(vec![i.to_string(), real(nf), real(nm), real(ratio), gap.map(real).unwrap_or_default()])?;
    }
    if full && worst_gap > SLACK {
        failures.push(format!("|f| exceeds Mf by {worst_gap:e}"));
    }
    let json = json!({
        "study": "maximal_function",
        "functions": fs.len(),
        "seed": exp.seed,
        "depth": filt.depth(),
        "max_ratio": worst_ratio,
        "doob_constant": 2.0,
        "max_domination_gap": full.then_some(worst_gap),
    });
    Ok(StudyOutput { csv: table.finish()?, report: json, failures })
}

fn run_sandwich(exp: &Experiment) -> Result<StudyOutput, CliError> {
    let (space, filt) = parts(exp);
    let k = kernel(exp);
    let tol = exp.params.tol.unwrap_or(1e-10);
    let n_min = exp.params.n_min.unwrap_or(1.min(filt.depth()));
    let n_max = exp.params.n_max.unwrap_or(filt.depth());
    let samples = k.sample(space)?;
    let mut table = Table::new(&["n", "max_abs_diff", "tol", "pass"])?;
    let mut rows = Vec::new();
    for n in n_min..=n_max {
        let r = sandwich_from_samples(&samples, filt, n, tol)?;
        table.row(vec![n.to_string(), real(r.max_abs_diff), real(tol), r.pass.to_string()])?;
        rows.push(r);
    }
    let failures = rows
        .iter()
        .filter(|r| !r.pass)
        .map(|r| format!("level {}: max entrywise gap {:e} exceeds {tol:e}", r.level, r.max_abs_diff))
        .collect();
    let json = json!({ "study": "sandwich_identity", "kernel": k.name(), "rows": to_value(&rows) });
    Ok(StudyOutput { csv: table.finish()?, report: json, failures })
}

fn run_truncation(exp: &Experiment) -> Result<StudyOutput, CliError> {
    let (space, filt) = parts(exp);
    let k = kernel(exp);
    let stages = exp.params.stages.unwrap_or(DEFAULT_STAGES);
    let level = exp.params.level.unwrap_or(filt.depth());
    let ex = Exhaustion::uniform(space.clone(), stages)?;
    let study = truncated_averaged_trace(k, filt, level, &ex)?;
    let mut table = Table::new(&["j", "T_j", "truncated_trace", "truncated_diag_integral", "spectral_gap_check"])?;
    for r in &study.rows {
        table.row(vec![
            r.j.to_string(),
            real(r.cutoff),
            real(r.truncated_trace),
            real(r.truncated_diag_integral),
            real(r.spectral_gap_check),
        ])?;
    }
    let sv = singular_value_convergence(k, filt, exp.params.j_max.unwrap_or(1))?;
    let mut failures = Vec::new();
    if !study.spectra_match {
        failures.push("restricted and masked spectra differ".into());
    }
    if !study.traces_agree {
        failures.push("truncated trace and diagonal integral differ".into());
    }
    if !study.nondecreasing {
        failures.push("truncated traces decrease".into());
    }
    if !sv.weyl_pass {
        failures.push("Weyl bound violated".into());
    }
    let diag = k.diagonal_integral(space)?;
    let json = json!({
        "study": "truncation_study",
        "report": to_value(&study),
        "window_diag_integral": diag.window_value,
        "full_diag_integral": (!diag.divergent).then_some(diag.value),
        "singular_value_convergence": to_value(&sv),
    });
    Ok(StudyOutput { csv: table.finish()?, report: json, failures })
}

fn run_properties(exp: &Experiment) -> Result<StudyOutput, CliError> {
    let functions = exp.params.functions.unwrap_or(DEFAULT_SUITE_SIZE);
    let stages = exp.params.stages.unwrap_or(DEFAULT_STAGES);
    let (rows, scope) = match (&exp.kernel, &exp.space, &exp.filtration) {
        (Some(k), Some(space), Some(filt)) => {
            let fs = random_functions(space, functions, exp.seed);
            let mut rows = space_suite(space, k.name())?;
            rows.extend(filtration_suite(filt, k.name())?);
            rows.extend(martingale_suite(filt, &fs, k.name())?);
            rows.extend(kernel_suite(k, filt, k.name())?);
            if matches!(space.kind(), DomainKind::HalfLine) {
                rows.extend(sigma_finite_suite(k, filt, &fs, stages, k.name())?);
            }
            (rows, "configured".to_string())
        }
        _ => {
            let level = exp.params.catalog_level.unwrap_or(DEFAULT_CATALOG_LEVEL);
            let entries = standard_catalog(level)?;
            (catalog_suite(&entries, functions, exp.seed, stages)?, format!("catalog at atom level {level}"))
        }
    };
    let mut table = Table::new(&["module", "invariant", "subject", "value", "tolerance", "pass"])?;
    for r in &rows {
        table.row(vec![
            r.module.into(),
            r.invariant.into(),
            r.subject.clone(),
            real(r.value),
            real(r.tolerance),
            r.pass.to_string(),
        ])?;
    }
    let failures: Vec<String> = rows
        .iter()
        .filter(|r| !r.pass)
        .map(|r: &PropertyRow| format!("{}/{} on {}: {:e} > {:e}", r.module, r.invariant, r.subject, r.value, r.tolerance))
        .collect();
    let json = json!({
        "study": "property_suite",
        "scope": scope,
        "functions": functions,
        "seed": exp.seed,
        "rows": to_value(&rows),
        "all_pass": failures.is_empty(),
    });
    Ok(StudyOutput { csv: table.finish()?, report: json, failures })
}
