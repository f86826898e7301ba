//! Measure spaces realized as dyadic atomic grids.
//!
//! A [`MeasureSpace`] splits its domain into `2^L` half-open cells per axis.
//! Atom measures come from the density's cumulative function, so every
//! coarser dyadic cell is an exact union of atoms.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_ATOM_LEVEL: u32 = 16;

/// A point of a one- or two-dimensional domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Point {
    Line(f64),
    Plane(f64, f64),
}

impl Point {
    pub fn line(self) -> Option<f64> {
        match self {
            Point::Line(x) => Some(x),
            Point::Plane(..) => None,
        }
    }

    pub fn dim(self) -> usize {
        match self {
            Point::Line(_) => 1,
            Point::Plane(..) => 2,
        }
    }
}

impl From<f64> for Point {
    fn from(x: f64) -> Self {
        Point::Line(x)
    }
}

impl From<(f64, f64)> for Point {
    fn from((x, y): (f64, f64)) -> Self {
        Point::Plane(x, y)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Point::Line(x) => write!(f, "{x}"),
            Point::Plane(x, y) => write!(f, "({x}, {y})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainKind {
    Interval { a: f64, b: f64 },
    Circle { circumference: f64 },
    Torus2 { circumferences: [f64; 2] },
    /// `[0, ∞)`; only a window `[0, T)` is materialized.
    HalfLine,
}

impl DomainKind {
    pub fn name(&self) -> &'static str {
        match self {
            DomainKind::Interval { .. } => "interval",
            DomainKind::Circle { .. } => "circle",
            DomainKind::Torus2 { .. } => "torus2",
            DomainKind::HalfLine => "half_line",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            DomainKind::Torus2 { .. } => 2,
            _ => 1,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Domain(msg));
        match *self {
            DomainKind::Interval { a, b } => {
                if !(a.is_finite() && b.is_finite() && a < b) {
                    return bad(format!("interval needs finite a < b, got [{a}, {b}]"));
                }
            }
            DomainKind::Circle { circumference } => {
                if !(circumference.is_finite() && circumference > 0.0) {
                    return bad(format!("circumference must be positive, got {circumference}"));
                }
            }
            DomainKind::Torus2 { circumferences } => {
                if circumferences.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
                    return bad(format!("circumferences must be positive, got {circumferences:?}"));
                }
            }
            DomainKind::HalfLine => {}
        }
        Ok(())
    }
}

/// Density of μ with respect to Lebesgue measure.
///
/// On the torus the density is applied per axis: `Uniform(c)` means the
/// constant `c` on the square, `Polynomial(p)` means `p(x)·p(y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Density {
    Uniform { c: f64 },
    /// `Σ coeffs[k]·x^k`.
    Polynomial { coeffs: Vec<f64> },
    /// `e^{-rate·x}` on the half-line.
    ExponentialDecay { rate: f64 },
}

impl Density {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Density::Uniform { c } => *c,
            Density::Polynomial { coeffs } => horner(coeffs, x),
            Density::ExponentialDecay { rate } => (-rate * x).exp(),
        }
    }

    /// Antiderivative with `F(0) = 0`.
    pub fn cumulative(&self, x: f64) -> f64 {
        match self {
            Density::Uniform { c } => c * x,
            Density::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| c * x.powi(k as i32 + 1) / (k + 1) as f64)
                .sum(),
            Density::ExponentialDecay { rate } => -(-rate * x).exp_m1() / rate,
        }
    }

    /// `∫_lo^hi density`, evaluated as a cumulative difference arranged to
    /// avoid cancellation on short cells.
    pub fn measure(&self, lo: f64, hi: f64) -> f64 {
        match self {
            Density::Uniform { c } => c * (hi - lo),
            Density::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| c * (hi - lo) * power_sum(lo, hi, k) / (k + 1) as f64)
                .sum(),
            Density::ExponentialDecay { rate } => {
                (-rate * lo).exp() * -(-rate * (hi - lo)).exp_m1() / rate
            }
        }
    }

    fn validate(&self, kind: &DomainKind, window: Option<f64>) -> Result<()> {
        let bad = |msg: String| Err(Error::Density(msg));
        match self {
            Density::Uniform { c } => {
                if !(c.is_finite() && *c > 0.0) {
                    return bad(format!("uniform density must be positive, got {c}"));
                }
            }
            Density::ExponentialDecay { rate } => {
                if !matches!(kind, DomainKind::HalfLine) {
                    return bad("exponential decay is only defined on the half-line".into());
                }
                if !(rate.is_finite() && *rate > 0.0) {
                    return bad(format!("decay rate must be positive, got {rate}"));
                }
            }
            Density::Polynomial { coeffs } => {
                if coeffs.is_empty() || coeffs.iter().all(|c| *c == 0.0) {
                    return bad("polynomial density is identically zero".into());
                }
                if coeffs.iter().any(|c| !c.is_finite()) {
                    return bad("polynomial coefficients must be finite".into());
                }
                let ranges: Vec<(f64, f64)> = match *kind {
                    DomainKind::Interval { a, b } => vec![(a, b)],
                    DomainKind::Circle { circumference } => vec![(0.0, circumference)],
                    DomainKind::Torus2 { circumferences } => {
                        vec![(0.0, circumferences[0]), (0.0, circumferences[1])]
                    }
                    DomainKind::HalfLine => {
                        let lead = coeffs.iter().rev().find(|c| **c != 0.0).copied();
                        if lead.is_some_and(|c| c < 0.0) {
                            return bad("polynomial density eventually negative on the half-line".into());
                        }
                        vec![(0.0, window.unwrap_or(1.0))]
                    }
                };
                const SAMPLES: usize = 1 << 12;
                for (lo, hi) in ranges {
                    for i in 0..=SAMPLES {
                        let x = lo + (hi - lo) * i as f64 / SAMPLES as f64;
                        let v = horner(coeffs, x);
                        if v < 0.0 {
                            return bad(format!("polynomial density is negative at {x} ({v})"));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// `(hi^{k+1} - lo^{k+1}) / (hi - lo)` without forming the difference.
fn power_sum(lo: f64, hi: f64, k: usize) -> f64 {
    (0..=k).map(|j| hi.powi(j as i32) * lo.powi((k - j) as i32)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bounds {
    Line { lo: f64, hi: f64 },
    Rect { x: (f64, f64), y: (f64, f64) },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub index: usize,
    pub bounds: Bounds,
    pub measure: f64,
    pub rep: Point,
}

impl Atom {
    /// Atoms on which the density vanishes.
    pub fn is_null(&self) -> bool {
        self.measure == 0.0
    }
}

/// A finite atomic realization of `(X, μ)`. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureSpace {
    kind: DomainKind,
    density: Density,
    atom_level: u32,
    window: Option<f64>,
    atoms: Vec<Atom>,
}

impl MeasureSpace {
    /// Builds the level-`atom_level` dyadic grid. `window` is required for
    /// (and only used by) the half-line.
    pub fn build(
        kind: DomainKind,
        density: Density,
        atom_level: u32,
        window: Option<f64>,
    ) -> Result<Self> {
        if !(1..=MAX_ATOM_LEVEL).contains(&atom_level) {
            return Err(Error::AtomLevel(atom_level));
        }
        kind.validate()?;
        let window = match kind {
            DomainKind::HalfLine => match window {
                None => return Err(Error::MissingWindow),
                Some(t) if !(t.is_finite() && t > 0.0) => {
                    return Err(Error::Domain(format!("window must be positive, got {t}")))
                }
                Some(t) => Some(t),
            },
            _ => None,
        };
        density.validate(&kind, window)?;

        let per_axis = 1usize << atom_level;
        let atoms = match kind {
            DomainKind::Torus2 { circumferences: [cx, cy] } => {
                if atom_level > 12 {
                    return Err(Error::AtomLevel(atom_level));
                }
                let xs = axis_cells(0.0, cx, per_axis);
                let ys = axis_cells(0.0, cy, per_axis);
                let mut atoms = Vec::with_capacity(per_axis * per_axis);
                for (i, &(x0, x1)) in xs.iter().enumerate() {
                    for (j, &(y0, y1)) in ys.iter().enumerate() {
                        let measure = match &density {
                            Density::Uniform { c } => c * (x1 - x0) * (y1 - y0),
                            d => d.measure(x0, x1) * d.measure(y0, y1),
                        };
                        atoms.push(Atom {
                            index: i * per_axis + j,
                            bounds: Bounds::Rect { x: (x0, x1), y: (y0, y1) },
                            measure,
                            rep: Point::Plane(0.5 * (x0 + x1), 0.5 * (y0 + y1)),
                        });
                    }
                }
                atoms
            }
            _ => {
                let (lo, hi) = match kind {
                    DomainKind::Interval { a, b } => (a, b),
                    DomainKind::Circle { circumference } => (0.0, circumference),
                    _ => (0.0, window.expect("validated")),
                };
                axis_cells(lo, hi, per_axis)
                    .into_iter()
                    .enumerate()
                    .map(|(index, (l, h))| Atom {
                        index,
                        bounds: Bounds::Line { lo: l, hi: h },
                        measure: density.measure(l, h),
                        rep: Point::Line(0.5 * (l + h)),
                    })
                    .collect()
            }
        };
        if let Some(bad) = atoms.iter().find(|a| a.measure.is_nan() || a.measure < 0.0 || !a.measure.is_finite()) {
            return Err(Error::Density(format!(
                "atom {} has invalid measure {}",
                bad.index, bad.measure
            )));
        }
        Ok(Self { kind, density, atom_level, window, atoms })
    }

    /// Copy of the space with the given atoms given zero mass, as if the
    /// density vanished on them.
    pub fn with_null_atoms(&self, null: &[usize]) -> Result<Self> {
        let mut out = self.clone();
        for &i in null {
            let atom = out
                .atoms
                .get_mut(i)
                .ok_or_else(|| Error::Argument(format!("no atom {i}")))?;
            atom.measure = 0.0;
        }
        Ok(out)
    }

    pub fn kind(&self) -> &DomainKind {
        &self.kind
    }

    pub fn density(&self) -> &Density {
        &self.density
    }

    pub fn atom_level(&self) -> u32 {
        self.atom_level
    }

    pub fn window(&self) -> Option<f64> {
        self.window
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    /// Atoms per axis.
    pub fn per_axis(&self) -> usize {
        1 << self.atom_level
    }

    pub fn measures(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.measure).collect()
    }

    pub fn reps(&self) -> Vec<Point> {
        self.atoms.iter().map(|a| a.rep).collect()
    }

    /// Sum of atom measures in ascending atom order.
    pub fn total_measure(&self) -> f64 {
        self.atoms.iter().map(|a| a.measure).sum()
    }

    /// μ of the domain (or of the window on the half-line) from the
    /// cumulative density.
    pub fn closed_form_measure(&self) -> f64 {
        match (self.kind, &self.density) {
            (DomainKind::Interval { a, b }, d) => d.measure(a, b),
            (DomainKind::Circle { circumference }, d) => d.measure(0.0, circumference),
            (DomainKind::Torus2 { circumferences: [cx, cy] }, Density::Uniform { c }) => c * cx * cy,
            (DomainKind::Torus2 { circumferences: [cx, cy] }, d) => {
                d.measure(0.0, cx) * d.measure(0.0, cy)
            }
            (DomainKind::HalfLine, d) => d.measure(0.0, self.window.expect("half-line window")),
        }
    }

    /// Per-axis lower bound and length of the materialized domain.
    pub fn axis_extent(&self, axis: usize) -> (f64, f64) {
        match self.kind {
            DomainKind::Interval { a, b } => (a, b - a),
            DomainKind::Circle { circumference } => (0.0, circumference),
            DomainKind::Torus2 { circumferences } => (0.0, circumferences[axis]),
            DomainKind::HalfLine => (0.0, self.window.expect("half-line window")),
        }
    }

    /// Index of the atom whose half-open cell contains `x`.
    pub fn atom_of(&self, x: Point) -> Result<usize> {
        let n = self.per_axis();
        match (self.kind, x) {
            (DomainKind::Interval { a, b }, Point::Line(t)) => {
                if !(t >= a && t <= b) {
                    return Err(Error::OutsideDomain(x.to_string()));
                }
                Ok(grid_index(t - a, b - a, n))
            }
            (DomainKind::Circle { circumference }, Point::Line(t)) => {
                if !t.is_finite() {
                    return Err(Error::OutsideDomain(x.to_string()));
                }
                Ok(grid_index(wrap(t, circumference), circumference, n))
            }
            (DomainKind::Torus2 { circumferences: [cx, cy] }, Point::Plane(s, t)) => {
                if !(s.is_finite() && t.is_finite()) {
                    return Err(Error::OutsideDomain(x.to_string()));
                }
                let i = grid_index(wrap(s, cx), cx, n);
                let j = grid_index(wrap(t, cy), cy, n);
                Ok(i * n + j)
            }
            (DomainKind::HalfLine, Point::Line(t)) => {
                let window = self.window.expect("half-line window");
                if !(t >= 0.0 && t < window) {
                    return Err(Error::OutsideDomain(x.to_string()));
                }
                Ok(grid_index(t, window, n))
            }
            _ => Err(Error::OutsideDomain(format!("{x} (dimension mismatch)"))),
        }
    }

    /// Per-axis grid coordinates of an atom.
    pub fn axis_indices(&self, atom: usize) -> (usize, usize) {
        if self.dim() == 2 {
            (atom / self.per_axis(), atom % self.per_axis())
        } else {
            (atom, 0)
        }
    }
}

fn axis_cells(lo: f64, hi: f64, n: usize) -> Vec<(f64, f64)> {
    let edge = |i: usize| if i == n { hi } else { lo + (hi - lo) * i as f64 / n as f64 };
    (0..n).map(|i| (edge(i), edge(i + 1))).collect()
}

fn wrap(t: f64, period: f64) -> f64 {
    let r = t.rem_euclid(period);
    if r >= period {
        0.0
    } else {
        r
    }
}

/// Grid cell of offset `t ∈ [0, len]`; `t = len` maps to the last cell.
fn grid_index(t: f64, len: f64, n: usize) -> usize {
    let mut i = ((t / len) * n as f64).floor() as usize;
    if i >= n {
        i = n - 1;
    }
    // guard against rounding across a cell edge
    let lo = len * i as f64 / n as f64;
    if t < lo && i > 0 {
        i -= 1;
    } else if i + 1 < n && t >= len * (i + 1) as f64 / n as f64 {
        i += 1;
    }
    i
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unit(level: u32) -> MeasureSpace {
        MeasureSpace::build(
            DomainKind::Interval { a: 0.0, b: 1.0 },
            Density::Uniform { c: 1.0 },
            level,
            None,
        )
        .unwrap()
    }

    #[test]
    fn uniform_interval_atoms() {
        let s = unit(3);
        assert_eq!(s.len(), 8);
        assert!(s.atoms().iter().all(|a| a.measure == 0.125));
    }

    #[test]
    fn linear_density_halves() {
        let s = MeasureSpace::build(
            DomainKind::Interval { a: 0.0, b: 1.0 },
            Density::Polynomial { coeffs: vec![0.0, 2.0] },
            1,
            None,
        )
        .unwrap();
        // midpoint-rule refinement oracle for ∫ 2x over each half
        let oracle = |lo: f64, hi: f64| {
            let m = 1 << 14;
            let h = (hi - lo) / m as f64;
            (0..m).map(|i| 2.0 * (lo + (i as f64 + 0.5) * h) * h).sum::<f64>()
        };
        assert!((s.atoms()[0].measure - 0.25).abs() < 1e-15);
        assert!((s.atoms()[1].measure - 0.75).abs() < 1e-15);
        assert!((oracle(0.0, 0.5) - 0.25).abs() < 1e-12);
        assert!((oracle(0.5, 1.0) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn exponential_half_line_total() {
        let s = MeasureSpace::build(
            DomainKind::HalfLine,
            Density::ExponentialDecay { rate: 2.0 },
            4,
            Some(8.0),
        )
        .unwrap();
        let expected = (1.0 - (-16.0f64).exp()) / 2.0;
        // composite Simpson oracle on [0, 8]
        let m = 20_000;
        let h = 8.0 / m as f64;
        let f = |x: f64| (-2.0 * x).exp();
        let simpson = (0..=m)
            .map(|i| {
                let w = if i == 0 || i == m { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                w * f(i as f64 * h)
            })
            .sum::<f64>()
            * h
            / 3.0;
        assert!((simpson - expected).abs() < 1e-10);
        assert!((s.total_measure() - expected).abs() <= 1e-10 * expected);
    }

    #[test]
    fn rejects_bad_inputs() {
        let iv = DomainKind::Interval { a: 0.0, b: 1.0 };
        let u = Density::Uniform { c: 1.0 };
        assert_eq!(MeasureSpace::build(iv, u.clone(), 0, None), Err(Error::AtomLevel(0)));
        assert_eq!(MeasureSpace::build(iv, u.clone(), 17, None), Err(Error::AtomLevel(17)));
        assert_eq!(
            MeasureSpace::build(DomainKind::HalfLine, u.clone(), 3, None),
            Err(Error::MissingWindow)
        );
        let neg = Density::Polynomial { coeffs: vec![-0.1, 1.0] };
        assert!(matches!(MeasureSpace::build(iv, neg, 3, None), Err(Error::Density(_))));
        let exp = Density::ExponentialDecay { rate: 1.0 };
        assert!(matches!(MeasureSpace::build(iv, exp, 3, None), Err(Error::Density(_))));
    }

    #[test]
    fn atom_lookup() {
        let s = unit(3);
        assert_eq!(s.atom_of(0.3.into()).unwrap(), 2);
        assert_eq!(s.atom_of(1.0.into()).unwrap(), 7);
        assert_eq!(s.atom_of(0.0.into()).unwrap(), 0);
        assert!(s.atom_of(1.5.into()).is_err());

        let c = MeasureSpace::build(
            DomainKind::Circle { circumference: 2.0 * PI },
            Density::Uniform { c: 1.0 / (2.0 * PI) },
            2,
            None,
        )
        .unwrap();
        assert_eq!(c.atom_of((2.0 * PI).into()).unwrap(), 0);
        assert_eq!(c.atom_of((-0.1).into()).unwrap(), 3);

        let t = MeasureSpace::build(
            DomainKind::Torus2 { circumferences: [1.0, 2.0] },
            Density::Uniform { c: 1.0 },
            2,
            None,
        )
        .unwrap();
        assert_eq!(t.atom_of((0.0, 0.0).into()).unwrap(), 0);
        assert_eq!(t.axis_indices(t.atom_of((0.6, 1.9).into()).unwrap()), (2, 3));

        let h = MeasureSpace::build(DomainKind::HalfLine, Density::Uniform { c: 1.0 }, 3, Some(8.0))
            .unwrap();
        assert!(h.atom_of(8.0.into()).is_err());
        assert_eq!(h.atom_of(7.99.into()).unwrap(), 7);
    }
}
