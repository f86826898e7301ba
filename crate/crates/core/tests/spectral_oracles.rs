use std::f64::consts::PI;
use std::sync::Arc;

use mtrace_core::spectral::{
    assemble, eigendecompose, singular_value_convergence, trace_study, upper_bound_check, EigenMethod,
};
use mtrace_core::{CosineCoeffs, Density, DomainKind, Filtration, Kernel, MeasureSpace, Verdict};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn unit(level: u32) -> Arc<MeasureSpace> {
    Arc::new(MeasureSpace::build(DomainKind::Interval { a: 0.0, b: 1.0 }, Density::Uniform { c: 1.0 }, level, None).unwrap())
}

fn circle(level: u32) -> Arc<MeasureSpace> {
    Arc::new(
        MeasureSpace::build(
            DomainKind::Circle { circumference: 2.0 * PI },
            Density::Uniform { c: 1.0 / (2.0 * PI) },
            level,
            None,
        )
        .unwrap(),
    )
}

fn nalgebra_spectrum(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn eigensolver_matches_library(n in 1usize..40, entries in prop::collection::vec(-5.0..5.0f64, 1600)) {
        let m = DMatrix::from_fn(n, n, |i, j| entries[i.min(j) * 40 + i.max(j)]);
        let ours = eigendecompose(&m, EigenMethod::TridiagonalQl).unwrap();
        let theirs = nalgebra_spectrum(&m);
        let scale = m.amax().max(1.0);
        for (a, b) in ours.eigenvalues.iter().zip(&theirs) {
            prop_assert!((a.abs() - b.abs()).abs() <= 1e-11 * scale * n as f64);
        }
        prop_assert!(ours.residual <= 1e-9 * scale);
        let trace: f64 = (0..n).map(|i| m[(i, i)]).sum();
        prop_assert!((ours.trace() - trace).abs() <= 1e-9 * scale * n as f64);
        let q = &ours.eigenvectors;
        let gram = q.transpose() * q;
        prop_assert!((gram - DMatrix::identity(n, n)).amax() < 1e-12 * n as f64);
    }

    #[test]
    fn jacobi_matches_ql(n in 1usize..24, entries in prop::collection::vec(-1.0..1.0f64, 576)) {
        let m = DMatrix::from_fn(n, n, |i, j| entries[i.min(j) * 24 + i.max(j)]);
        let ql = eigendecompose(&m, EigenMethod::TridiagonalQl).unwrap();
        let jc = eigendecompose(&m, EigenMethod::Jacobi).unwrap();
        for (a, b) in ql.eigenvalues.iter().zip(&jc.eigenvalues) {
            prop_assert!((a - b).abs() < 1e-12 * n as f64);
        }
    }

    #[test]
    fn weyl_holds_for_gaussian(gamma in 0.5..50.0f64) {
        let space = unit(6);
        let filt = Filtration::dyadic(space, 6).unwrap();
        let report = singular_value_convergence(&Kernel::gaussian_rbf(gamma).unwrap(), &filt, 8).unwrap();
        prop_assert!(report.weyl_pass);
        prop_assert_eq!(report.final_pass, Some(true));
    }
}

#[test]
fn brownian_mercer_eigenvalues() {
    // λ_j = 1 / (π² (j − ½)²), derived from −u'' = u/λ, u(0) = 0, u'(1) = 0
    let mercer = |j: usize| 1.0 / (PI * PI * (j as f64 - 0.5).powi(2));
    let op = assemble(&Kernel::BrownianMin, &unit(8)).unwrap();
    let ev = op.eigenvalues().unwrap();
    for j in 1..=5 {
        assert!((ev[j - 1] - mercer(j)).abs() / mercer(j) < 1e-2, "j={j}");
    }
    let truth = Kernel::BrownianMin.spectrum_truth(&unit(8)).unwrap();
    assert!((truth.eigenvalues[0] - 4.0 / (PI * PI)).abs() < 1e-15);
}

#[test]
fn brownian_trace_study() {
    let filt = Filtration::dyadic(unit(9), 9).unwrap();
    let report = trace_study(&Kernel::BrownianMin, &filt, 2, 9, 5).unwrap();
    let t = report.t();
    assert!(t.windows(2).all(|p| p[1] > p[0]));
    // midpoint double sum over a cell of width h with atoms of width δ:
    // mean of min = left edge + h/3 + δ²/(6h), so t_n = ½ − h/6 + δ²/(6h)
    let delta = 0.5f64.powi(9);
    for row in &report.levels {
        let h = 0.5f64.powi(row.n as i32);
        let want = 0.5 - h / 6.0 + delta * delta / (6.0 * h);
        assert!((row.t_n - want).abs() < 1e-12, "n={}", row.n);
    }
    assert!(report.traces_agree);
    assert_eq!(report.verdict, Verdict::TraceClassEvidence);
    assert!((report.estimate - 0.5).abs() < 5e-3);
}

#[test]
fn constant_kernel_trace_is_exact() {
    let filt = Filtration::dyadic(unit(6), 6).unwrap();
    let report = upper_bound_check(&Kernel::constant(1.0).unwrap(), &filt).unwrap();
    assert!(report.rows.iter().all(|r| r.slack.abs() <= 1e-12));
}

#[test]
fn cosine_spectrum_pairs() {
    let space = circle(8);
    let kernel = Kernel::cosine_series(CosineCoeffs::InverseSquare, 20).unwrap();
    let ev = assemble(&kernel, &space).unwrap().eigenvalues().unwrap();
    // each Fourier mode m ≤ 20 is exactly resolved on 256 equispaced points
    for m in 1..=20 {
        let want = 1.0 / (m * m) as f64;
        assert!((ev[2 * m - 2] - want).abs() < 1e-12, "m={m}");
        assert!((ev[2 * m - 1] - want).abs() < 1e-12, "m={m}");
    }
    assert!(ev[40].abs() < 1e-12);
}

#[test]
fn harmonic_cosine_diverges() {
    let filt = Filtration::dyadic(circle(9), 9).unwrap();
    let kernel = Kernel::cosine_series(CosineCoeffs::Inverse, 200).unwrap();
    let report = trace_study(&kernel, &filt, 2, 7, 3).unwrap();
    assert_eq!(report.verdict, Verdict::DivergenceEvidence);
    for inc in &report.increments[report.increments.len() - 3..] {
        assert!((inc / (2.0 * 2f64.ln()) - 1.0).abs() < 0.1);
    }
}

#[test]
fn rank_one_singular_values() {
    let space = Arc::new(MeasureSpace::build(DomainKind::HalfLine, Density::Uniform { c: 1.0 }, 7, Some(8.0)).unwrap());
    let filt = Filtration::dyadic(space, 7).unwrap();
    let report = singular_value_convergence(&Kernel::RankOneExp, &filt, 4).unwrap();
    for row in &report.rows {
        assert!(row.singular_values[1..].iter().all(|s| *s < 1e-12));
    }
    assert!(report.monotone[0]);
    assert!(report.final_gap <= 1e-10);
}
