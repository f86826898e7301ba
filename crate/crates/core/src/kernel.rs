//! Kernel catalog: evaluation, diagonal integrals and known spectra.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::space::{Density, DomainKind, MeasureSpace, Point};

/// Default number of retained terms for series kernels.
pub const DEFAULT_SERIES_TERMS: usize = 200;

/// Number of analytic eigenvalues listed for infinite-rank kernels.
const LISTED_EIGENVALUES: usize = 4096;

/// Coefficient family `a_m`, `m = 1, 2, …` of a cosine series kernel.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CosineCoeffs {
    /// `1/m²`
    InverseSquare,
    /// `1/m`; the full series has divergent trace.
    Inverse,
    /// `r^m`, `0 < r < 1`
    Geometric(f64),
    /// Explicit finite list; the series is exactly the listed terms.
    Explicit(Vec<f64>),
}

impl CosineCoeffs {
    fn terms(&self, m: usize) -> Vec<f64> {
        match self {
            CosineCoeffs::InverseSquare => (1..=m).map(|k| 1.0 / (k * k) as f64).collect(),
            CosineCoeffs::Inverse => (1..=m).map(|k| 1.0 / k as f64).collect(),
            CosineCoeffs::Geometric(r) => (1..=m).map(|k| r.powi(k as i32)).collect(),
            CosineCoeffs::Explicit(v) => v.clone(),
        }
    }

    /// `Σ_{m > M} a_m`, infinite when the series diverges.
    fn tail(&self, m: usize) -> f64 {
        match self {
            CosineCoeffs::InverseSquare => {
                // sum the head in reverse for accuracy
                let head: f64 = (1..=m).rev().map(|k| 1.0 / (k * k) as f64).sum();
                PI * PI / 6.0 - head
            }
            CosineCoeffs::Inverse => f64::INFINITY,
            CosineCoeffs::Geometric(r) => r.powi(m as i32 + 1) / (1.0 - r),
            CosineCoeffs::Explicit(_) => 0.0,
        }
    }
}

/// Explicit atom × atom kernel matrix on a fixed space.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledGrid {
    space: Arc<MeasureSpace>,
    values: DMatrix<f64>,
    psd: bool,
}

impl SampledGrid {
    /// `values` is row-major, `atoms × atoms`.
    pub fn new(space: Arc<MeasureSpace>, values: Vec<f64>, psd: bool) -> Result<Self> {
        let n = space.len();
        if values.len() != n * n {
            return Err(Error::Dimension { expected: n * n, got: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Kernel("sampled grid has non-finite entries".into()));
        }
        let values = DMatrix::from_row_slice(n, n, &values);
        let scale = values.amax().max(f64::MIN_POSITIVE);
        let asym = (&values - values.transpose()).amax();
        if asym > 1e-12 * scale {
            return Err(Error::NotSymmetric(asym));
        }
        Ok(Self { space, values, psd })
    }

    pub fn space(&self) -> &Arc<MeasureSpace> {
        &self.space
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    /// `min(x, y)`
    BrownianMin,
    /// `exp(-α|x - y|)`
    ExpAbs { alpha: f64 },
    /// `exp(-γ|x - y|²)`
    GaussianRbf { gamma: f64 },
    /// `Σ_{m ≤ M} 2 a_m cos(m(x - y))`
    CosineSeries { coeffs: CosineCoeffs, a: Vec<f64> },
    /// `exp(-(x + y))`
    RankOneExp,
    /// `K ≡ c`
    Constant { c: f64 },
    SampledGrid(Arc<SampledGrid>),
}

/// `x ↦ K(x, x)` in closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Diagonal {
    Const(f64),
    Identity,
    ExpNeg2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegralMethod {
    ClosedForm,
    Quadrature,
}

/// `∫ K(x, x) dμ(x)` together with what is known about truncation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagonalIntegral {
    /// Over the whole domain; infinite when divergent.
    pub value: f64,
    /// Over the materialized window (half-line only).
    pub window_value: Option<f64>,
    pub divergent: bool,
    /// Contribution of dropped series terms (cosine series only).
    pub series_tail: Option<f64>,
    pub method: IntegralMethod,
}

impl DiagonalIntegral {
    /// Value of the untruncated series kernel.
    pub fn full_value(&self) -> f64 {
        self.value + self.series_tail.unwrap_or(0.0)
    }
}

/// Closed-form eigenvalues of the integral operator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumTruth {
    /// Decreasing, with multiplicity; possibly a leading segment only.
    pub eigenvalues: Vec<f64>,
    /// Trace of the operator as represented (truncated series included).
    pub truncated_trace: f64,
    /// Trace of the full operator; `None` when divergent.
    pub trace: Option<f64>,
    pub divergent: bool,
    pub source: String,
}

impl Kernel {
    pub fn cosine_series(coeffs: CosineCoeffs, terms: usize) -> Result<Self> {
        if let CosineCoeffs::Geometric(r) = coeffs {
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::Kernel(format!("geometric ratio must be in (0, 1), got {r}")));
            }
        }
        let a = coeffs.terms(terms);
        if a.is_empty() {
            return Err(Error::Kernel("cosine series needs at least one term".into()));
        }
        if a.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Kernel("cosine coefficients must be finite and nonnegative".into()));
        }
        Ok(Kernel::CosineSeries { coeffs, a })
    }

    pub fn exp_abs(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::Kernel(format!("alpha must be positive, got {alpha}")));
        }
        Ok(Kernel::ExpAbs { alpha })
    }

    pub fn gaussian_rbf(gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::Kernel(format!("gamma must be positive, got {gamma}")));
        }
        Ok(Kernel::GaussianRbf { gamma })
    }

    pub fn constant(c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(Error::Kernel(format!("constant must be finite, got {c}")));
        }
        Ok(Kernel::Constant { c })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Kernel::BrownianMin => "brownian_min",
            Kernel::ExpAbs { .. } => "exp_abs",
            Kernel::GaussianRbf { .. } => "gaussian_rbf",
            Kernel::CosineSeries { .. } => "cosine_series",
            Kernel::RankOneExp => "rank_one_exp",
            Kernel::Constant { .. } => "constant",
            Kernel::SampledGrid(_) => "sampled",
        }
    }

    pub fn psd_claim(&self) -> bool {
        match self {
            Kernel::Constant { c } => *c >= 0.0,
            Kernel::SampledGrid(g) => g.psd,
            _ => true,
        }
    }

    /// Series coefficients actually retained, if this is a series kernel.
    pub fn series_terms(&self) -> Option<&[f64]> {
        match self {
            Kernel::CosineSeries { a, .. } => Some(a),
            _ => None,
        }
    }

    fn check_point(&self, x: Point) -> Result<()> {
        let ok = match (self, x) {
            (Kernel::BrownianMin | Kernel::RankOneExp, Point::Line(t)) => t.is_finite() && t >= 0.0,
            (Kernel::BrownianMin | Kernel::RankOneExp | Kernel::CosineSeries { .. }, Point::Plane(..)) => {
                return Err(Error::KernelDomain {
                    kernel: self.name().into(),
                    domain: "two-dimensional points".into(),
                })
            }
            (_, Point::Line(t)) => t.is_finite(),
            (_, Point::Plane(s, t)) => s.is_finite() && t.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::OutsideDomain(x.to_string()))
        }
    }

    /// `K(x, y)`.
    pub fn eval(&self, x: Point, y: Point) -> Result<f64> {
        if x.dim() != y.dim() {
            return Err(Error::OutsideDomain(format!("{x} and {y} differ in dimension")));
        }
        self.check_point(x)?;
        self.check_point(y)?;
        if let Kernel::SampledGrid(g) = self {
            let off = |p: Point| Error::OutsideDomain(format!("{p} is off the sampled atom grid"));
            let i = g.space.atom_of(x).map_err(|_| off(x))?;
            let j = g.space.atom_of(y).map_err(|_| off(y))?;
            return Ok(g.values[(i, j)]);
        }
        Ok(self.value(x, y))
    }

    /// Unchecked evaluation for validated points.
    fn value(&self, x: Point, y: Point) -> f64 {
        match self {
            Kernel::BrownianMin => line(x).min(line(y)),
            Kernel::ExpAbs { alpha } => (-alpha * dist_sq(x, y).sqrt()).exp(),
            Kernel::GaussianRbf { gamma } => (-gamma * dist_sq(x, y)).exp(),
            Kernel::CosineSeries { a, .. } => cosine_sum(a, line(x) - line(y)),
            Kernel::RankOneExp => (-(line(x) + line(y))).exp(),
            Kernel::Constant { c } => *c,
            Kernel::SampledGrid(_) => unreachable!("sampled grids index atoms"),
        }
    }

    fn check_space(&self, space: &MeasureSpace) -> Result<()> {
        let mismatch = || Error::KernelDomain {
            kernel: self.name().into(),
            domain: space.kind().name().into(),
        };
        match self {
            Kernel::BrownianMin | Kernel::RankOneExp => match space.kind() {
                DomainKind::Interval { a, .. } if *a < 0.0 => return Err(mismatch()),
                DomainKind::Torus2 { .. } => return Err(mismatch()),
                _ => {}
            },
            Kernel::CosineSeries { .. } if space.dim() != 1 => return Err(mismatch()),
            Kernel::SampledGrid(g) if g.space.len() != space.len() => {
                return Err(Error::Dimension { expected: g.space.len(), got: space.len() })
            }
            _ => {}
        }
        Ok(())
    }

    /// Kernel values at all pairs of atom midpoints.
    pub fn sample(&self, space: &MeasureSpace) -> Result<DMatrix<f64>> {
        self.check_space(space)?;
        if let Kernel::SampledGrid(g) = self {
            return Ok(g.values.clone());
        }
        let reps = space.reps();
        let n = reps.len();
        let mut out = DMatrix::zeros(n, n);
        out.as_mut_slice()
            .par_chunks_mut(n)
            .enumerate()
            .for_each(|(j, col)| {
                for (i, v) in col.iter_mut().enumerate() {
                    *v = self.value(reps[i], reps[j]);
                }
            });
        Ok(out)
    }

    fn analytic_diagonal(&self) -> Option<Diagonal> {
        match self {
            Kernel::BrownianMin => Some(Diagonal::Identity),
            Kernel::ExpAbs { .. } | Kernel::GaussianRbf { .. } => Some(Diagonal::Const(1.0)),
            Kernel::CosineSeries { a, .. } => Some(Diagonal::Const(2.0 * a.iter().sum::<f64>())),
            Kernel::RankOneExp => Some(Diagonal::ExpNeg2),
            Kernel::Constant { c } => Some(Diagonal::Const(*c)),
            Kernel::SampledGrid(_) => None,
        }
    }

    /// `x ↦ K(x, x)` when known in closed form.
    pub fn diagonal(&self, x: f64) -> Option<f64> {
        self.analytic_diagonal().map(|d| match d {
            Diagonal::Const(c) => c,
            Diagonal::Identity => x,
            Diagonal::ExpNeg2 => (-2.0 * x).exp(),
        })
    }

    /// `∫ K(x, x) dμ(x)`; divergence is reported, not an error.
    pub fn diagonal_integral(&self, space: &MeasureSpace) -> Result<DiagonalIntegral> {
        self.check_space(space)?;
        let series_tail = match self {
            Kernel::CosineSeries { coeffs, a } => {
                Some(2.0 * coeffs.tail(a.len()) * space.closed_form_measure())
            }
            _ => None,
        };
        let Some(diag) = self.analytic_diagonal() else {
            let Kernel::SampledGrid(g) = self else { unreachable!() };
            let value = space
                .atoms()
                .iter()
                .map(|a| a.measure * g.values[(a.index, a.index)])
                .sum();
            return Ok(DiagonalIntegral {
                value,
                window_value: None,
                divergent: series_tail.is_some_and(f64::is_infinite),
                series_tail,
                method: IntegralMethod::Quadrature,
            });
        };
        let density = space.density();
        let (value, window_value) = match *space.kind() {
            DomainKind::Interval { a, b } => (diag_integral(diag, density, a, b), None),
            DomainKind::Circle { circumference } => {
                (diag_integral(diag, density, 0.0, circumference), None)
            }
            DomainKind::Torus2 { .. } => match diag {
                Diagonal::Const(c) => (c * space.closed_form_measure(), None),
                _ => unreachable!("checked by check_space"),
            },
            DomainKind::HalfLine => {
                let t = space.window().expect("half-line window");
                (
                    diag_integral(diag, density, 0.0, f64::INFINITY),
                    Some(diag_integral(diag, density, 0.0, t)),
                )
            }
        };
        Ok(DiagonalIntegral {
            value,
            window_value,
            divergent: value.is_infinite() || series_tail.is_some_and(f64::is_infinite),
            series_tail,
            method: IntegralMethod::ClosedForm,
        })
    }

    /// Known spectrum of the operator on `space`, when one exists.
    pub fn spectrum_truth(&self, space: &MeasureSpace) -> Option<SpectrumTruth> {
        match (self, space.kind(), space.density()) {
            (Kernel::BrownianMin, DomainKind::Interval { a, b }, Density::Uniform { c }) if *a == 0.0 => {
                let scale = c * b * b / (PI * PI);
                let eigenvalues = (1..=LISTED_EIGENVALUES)
                    .map(|j| scale / ((j as f64 - 0.5) * (j as f64 - 0.5)))
                    .collect();
                let trace = c * b * b / 2.0;
                Some(SpectrumTruth {
                    eigenvalues,
                    truncated_trace: trace,
                    trace: Some(trace),
                    divergent: false,
                    source: "Sturm-Liouville: c b^2 / (pi^2 (j - 1/2)^2)".into(),
                })
            }
            (Kernel::CosineSeries { coeffs, a }, DomainKind::Circle { circumference }, Density::Uniform { c })
                if (circumference - 2.0 * PI).abs() < 1e-12 =>
            {
                let scale = 2.0 * PI * c;
                let mut eigenvalues: Vec<f64> =
                    a.iter().flat_map(|&am| [scale * am, scale * am]).collect();
                eigenvalues.sort_by(|x, y| y.total_cmp(x));
                let truncated_trace = eigenvalues.iter().sum::<f64>();
                let tail = coeffs.tail(a.len());
                let divergent = tail.is_infinite();
                Some(SpectrumTruth {
                    eigenvalues,
                    truncated_trace,
                    trace: (!divergent).then_some(truncated_trace + 2.0 * scale * tail),
                    divergent,
                    source: "Fourier modes: 2 pi c a_m, multiplicity 2".into(),
                })
            }
            (Kernel::RankOneExp, DomainKind::HalfLine, density) => {
                let lambda = match density {
                    Density::Uniform { c } => c / 2.0,
                    Density::ExponentialDecay { rate } => 1.0 / (2.0 + rate),
                    Density::Polynomial { coeffs } => {
                        coeffs.iter().enumerate().map(|(k, c)| c * exp_moment(k, 2.0)).sum()
                    }
                };
                Some(SpectrumTruth {
                    eigenvalues: vec![lambda],
                    truncated_trace: lambda,
                    trace: Some(lambda),
                    divergent: false,
                    source: "rank one: integral of exp(-2x)".into(),
                })
            }
            (Kernel::Constant { c }, kind, _) if !matches!(kind, DomainKind::HalfLine) => {
                let lambda = c * space.closed_form_measure();
                Some(SpectrumTruth {
                    eigenvalues: vec![lambda],
                    truncated_trace: lambda,
                    trace: Some(lambda),
                    divergent: false,
                    source: "rank one: c mu(X)".into(),
                })
            }
            _ => None,
        }
    }
}

fn line(p: Point) -> f64 {
    match p {
        Point::Line(x) => x,
        Point::Plane(..) => unreachable!("validated one-dimensional"),
    }
}

fn dist_sq(x: Point, y: Point) -> f64 {
    match (x, y) {
        (Point::Line(a), Point::Line(b)) => (a - b) * (a - b),
        (Point::Plane(a, b), Point::Plane(c, d)) => (a - c) * (a - c) + (b - d) * (b - d),
        _ => unreachable!("validated dimensions"),
    }
}

/// `Σ 2 a_m cos(mθ)` by the Chebyshev recurrence.
fn cosine_sum(a: &[f64], theta: f64) -> f64 {
    let c1 = theta.cos();
    let (mut prev, mut cur) = (1.0, c1);
    let mut sum = 0.0;
    for &am in a {
        sum += am * cur;
        let next = 2.0 * c1 * cur - prev;
        prev = cur;
        cur = next;
    }
    2.0 * sum
}

/// `∫_0^∞ x^k e^{-s x} dx = k! / s^{k+1}`.
fn exp_moment(k: usize, s: f64) -> f64 {
    (1..=k).map(|i| i as f64).product::<f64>() / s.powi(k as i32 + 1)
}

/// `∫_lo^hi x^k e^{-2x} dx` by integration by parts.
fn exp2_moment(k: usize, lo: f64, hi: f64) -> f64 {
    let boundary = |x: f64, j: usize| {
        if x.is_infinite() {
            0.0
        } else {
            -x.powi(j as i32) * (-2.0 * x).exp() / 2.0
        }
    };
    let mut acc = 0.5 * ((-2.0 * lo).exp() - if hi.is_infinite() { 0.0 } else { (-2.0 * hi).exp() });
    for j in 1..=k {
        acc = boundary(hi, j) - boundary(lo, j) + j as f64 / 2.0 * acc;
    }
    acc
}

fn diag_integral(diag: Diagonal, density: &Density, lo: f64, hi: f64) -> f64 {
    let infinite = hi.is_infinite();
    match (diag, density) {
        (Diagonal::Const(c), d) => {
            if c == 0.0 {
                0.0
            } else if infinite {
                match d {
                    Density::ExponentialDecay { rate } => c * (-rate * lo).exp() / rate,
                    _ => f64::INFINITY * c.signum(),
                }
            } else {
                c * d.measure(lo, hi)
            }
        }
        (Diagonal::Identity, Density::Uniform { c }) => {
            if infinite {
                f64::INFINITY
            } else {
                c * (hi * hi - lo * lo) / 2.0
            }
        }
        (Diagonal::Identity, Density::Polynomial { coeffs }) => {
            if infinite {
                f64::INFINITY
            } else {
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, c)| {
                        let p = (k + 2) as i32;
                        c * (hi.powi(p) - lo.powi(p)) / p as f64
                    })
                    .sum()
            }
        }
        (Diagonal::Identity, Density::ExponentialDecay { rate: r }) => {
            let anti = |x: f64| {
                if x.is_infinite() {
                    0.0
                } else {
                    -(-r * x).exp() * (x / r + 1.0 / (r * r))
                }
            };
            anti(hi) - anti(lo)
        }
        (Diagonal::ExpNeg2, Density::Uniform { c }) => c * exp2_moment(0, lo, hi),
        (Diagonal::ExpNeg2, Density::Polynomial { coeffs }) => coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * exp2_moment(k, lo, hi))
            .sum(),
        (Diagonal::ExpNeg2, Density::ExponentialDecay { rate }) => {
            let s = 2.0 + rate;
            let upper = if infinite { 0.0 } else { (-s * hi).exp() };
            ((-s * lo).exp() - upper) / s
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> MeasureSpace {
        MeasureSpace::build(
            DomainKind::Interval { a: 0.0, b: 1.0 },
            Density::Uniform { c: 1.0 },
            4,
            None,
        )
        .unwrap()
    }

    fn circle(level: u32) -> MeasureSpace {
        MeasureSpace::build(
            DomainKind::Circle { circumference: 2.0 * PI },
            Density::Uniform { c: 1.0 / (2.0 * PI) },
            level,
            None,
        )
        .unwrap()
    }

    fn half_line(window: f64) -> MeasureSpace {
        MeasureSpace::build(DomainKind::HalfLine, Density::Uniform { c: 1.0 }, 4, Some(window)).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(Kernel::BrownianMin.eval(0.3.into(), 0.7.into()).unwrap(), 0.3);
        let k = Kernel::exp_abs(1.0).unwrap();
        for x in [0.0, 0.4, 3.0] {
            assert_eq!(k.eval(x.into(), x.into()).unwrap(), 1.0);
        }
        let cs = Kernel::cosine_series(CosineCoeffs::InverseSquare, 200).unwrap();
        let partial: f64 = 2.0 * (1..=200).map(|m| 1.0 / (m * m) as f64).sum::<f64>();
        assert!((cs.eval(1.3.into(), 1.3.into()).unwrap() - partial).abs() < 1e-12);
        let tail = PI * PI / 3.0 - partial;
        assert!(tail > 0.0 && tail < 0.0101);
    }

    #[test]
    fn cosine_recurrence_matches_direct_sum() {
        let cs = Kernel::cosine_series(CosineCoeffs::Inverse, 200).unwrap();
        for theta in [0.1, 1.0, 2.5, -3.0] {
            let direct: f64 = (1..=200).map(|m| 2.0 / m as f64 * (m as f64 * theta).cos()).sum();
            assert!((cs.eval(theta.into(), 0.0.into()).unwrap() - direct).abs() < 1e-11);
        }
    }

    #[test]
    fn eval_domain_errors() {
        assert!(Kernel::BrownianMin.eval((-0.1).into(), 0.5.into()).is_err());
        assert!(Kernel::RankOneExp.eval((0.1, 0.2).into(), (0.1, 0.2).into()).is_err());
        assert!(Kernel::exp_abs(1.0).unwrap().eval(0.1.into(), (0.1, 0.2).into()).is_err());
        let space = Arc::new(unit());
        let n = space.len();
        let grid = SampledGrid::new(space, vec![1.0; n * n], true).unwrap();
        let k = Kernel::SampledGrid(Arc::new(grid));
        assert_eq!(k.eval(0.2.into(), 0.9.into()).unwrap(), 1.0);
        assert!(k.eval(1.2.into(), 0.9.into()).is_err());
    }

    #[test]
    fn sampled_grid_rejects_asymmetry() {
        let space = Arc::new(
            MeasureSpace::build(DomainKind::Interval { a: 0.0, b: 1.0 }, Density::Uniform { c: 1.0 }, 1, None)
                .unwrap(),
        );
        assert!(matches!(
            SampledGrid::new(space.clone(), vec![1.0, 2.0, 3.0, 1.0], false),
            Err(Error::NotSymmetric(_))
        ));
        assert!(matches!(SampledGrid::new(space, vec![1.0; 3], false), Err(Error::Dimension { .. })));
    }

    #[test]
    fn diagonal_integrals() {
        let b = Kernel::BrownianMin.diagonal_integral(&unit()).unwrap();
        assert!((b.value - 0.5).abs() < 1e-15);

        let r = Kernel::RankOneExp.diagonal_integral(&half_line(8.0)).unwrap();
        assert!((r.value - 0.5).abs() < 1e-15);
        assert!((r.window_value.unwrap() - (1.0 - (-16.0f64).exp()) / 2.0).abs() < 1e-15);

        let cs = Kernel::cosine_series(CosineCoeffs::InverseSquare, 200).unwrap();
        let d = cs.diagonal_integral(&circle(4)).unwrap();
        assert!((d.full_value() - PI * PI / 3.0).abs() < 1e-12);

        let e = Kernel::exp_abs(1.0).unwrap().diagonal_integral(&half_line(4.0)).unwrap();
        assert!(e.divergent && (e.window_value.unwrap() - 4.0).abs() < 1e-12);
        let bh = Kernel::BrownianMin.diagonal_integral(&half_line(4.0)).unwrap();
        assert!(bh.divergent);

        let harmonic = Kernel::cosine_series(CosineCoeffs::Inverse, 200).unwrap();
        assert!(harmonic.diagonal_integral(&circle(4)).unwrap().full_value().is_infinite());
    }

    #[test]
    fn closed_forms_match_quadrature() {
        // composite Simpson oracle for the polynomial- and exponential-weighted cases
        let simpson = |f: &dyn Fn(f64) -> f64, lo: f64, hi: f64| {
            let m = 20_000;
            let h = (hi - lo) / m as f64;
            (0..=m)
                .map(|i| {
                    let w = if i == 0 || i == m { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                    w * f(lo + i as f64 * h)
                })
                .sum::<f64>()
                * h
                / 3.0
        };
        let poly = Density::Polynomial { coeffs: vec![1.0, 0.5, 3.0] };
        let s = MeasureSpace::build(DomainKind::HalfLine, poly.clone(), 3, Some(6.0)).unwrap();
        let got = Kernel::RankOneExp.diagonal_integral(&s).unwrap();
        let want = simpson(&|x| (-2.0 * x).exp() * poly.value(x), 0.0, 6.0);
        assert!((got.window_value.unwrap() - want).abs() < 1e-10);
        let full = simpson(&|x| (-2.0 * x).exp() * poly.value(x), 0.0, 40.0);
        assert!((got.value - full).abs() < 1e-10);

        let dec = Density::ExponentialDecay { rate: 1.5 };
        let s = MeasureSpace::build(DomainKind::HalfLine, dec.clone(), 3, Some(5.0)).unwrap();
        let got = Kernel::BrownianMin.diagonal_integral(&s).unwrap();
        let want = simpson(&|x| x * dec.value(x), 0.0, 5.0);
        assert!((got.window_value.unwrap() - want).abs() < 1e-10);
        assert!((got.value - 1.0 / (1.5 * 1.5)).abs() < 1e-14);
    }

    #[test]
    fn spectra() {
        let b = Kernel::BrownianMin.spectrum_truth(&unit()).unwrap();
        assert!((b.eigenvalues[0] - 4.0 / (PI * PI)).abs() < 1e-15);
        assert!((b.eigenvalues[0] - 0.405_284_7).abs() < 1e-7);
        // trace identity, truncation-corrected with the integral tail 1/(π² J)
        let j = b.eigenvalues.len() as f64;
        let sum: f64 = b.eigenvalues.iter().rev().sum::<f64>() + 1.0 / (PI * PI * j);
        assert!((sum - 0.5).abs() < 1e-6 * 0.5);

        let r = Kernel::RankOneExp.spectrum_truth(&half_line(8.0)).unwrap();
        assert_eq!(r.eigenvalues, vec![0.5]);

        let cs = Kernel::cosine_series(CosineCoeffs::InverseSquare, 200).unwrap();
        let t = cs.spectrum_truth(&circle(4)).unwrap();
        assert_eq!(t.eigenvalues.len(), 400);
        assert!((t.eigenvalues[0] - 1.0).abs() < 1e-15 && t.eigenvalues[1] == t.eigenvalues[0]);
        let d = cs.diagonal_integral(&circle(4)).unwrap();
        assert!((t.truncated_trace - d.value).abs() < 1e-12);
        assert!((t.trace.unwrap() - d.full_value()).abs() < 1e-12);

        let h = Kernel::cosine_series(CosineCoeffs::Inverse, 200).unwrap();
        let th = h.spectrum_truth(&circle(4)).unwrap();
        assert!(th.divergent && th.trace.is_none());

        assert!(Kernel::gaussian_rbf(1.0).unwrap().spectrum_truth(&unit()).is_none());
    }

    #[test]
    fn sampling_is_symmetric() {
        let s = unit();
        for k in [
            Kernel::BrownianMin,
            Kernel::exp_abs(2.0).unwrap(),
            Kernel::gaussian_rbf(3.0).unwrap(),
        ] {
            let m = k.sample(&s).unwrap();
            assert_eq!(m, m.transpose());
        }
    }
}
