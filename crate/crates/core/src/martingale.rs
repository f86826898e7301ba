//! Conditional expectations along a filtration, the martingale maximal
//! function, averaged kernels `E_n(K)` and the averaging operators `D_n`.
//!
//! All block sums run in ascending atom order, so results are bitwise
//! reproducible for a fixed filtration.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::filtration::{Filtration, Partition};
use crate::kernel::Kernel;
use crate::space::MeasureSpace;

/// Largest atom count for which `D_n` is materialized.
pub const DN_ATOM_BUDGET: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L1,
    L2,
    LInf,
}

/// A function constant on atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    space: Arc<MeasureSpace>,
    values: Vec<f64>,
    /// Atoms lying in null cells, where the value is undefined (stored 0).
    undefined: Vec<bool>,
}

impl GridFunction {
    pub fn new(space: Arc<MeasureSpace>, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.len() {
            return Err(Error::Dimension { expected: space.len(), got: values.len() });
        }
        let undefined = vec![false; values.len()];
        Ok(Self { space, values, undefined })
    }

    /// Samples `f` at atom midpoints.
    pub fn from_fn(space: Arc<MeasureSpace>, f: impl Fn(crate::space::Point) -> f64) -> Self {
        let values = space.atoms().iter().map(|a| f(a.rep)).collect();
        let undefined = vec![false; space.len()];
        Self { space, values, undefined }
    }

    pub fn constant(space: Arc<MeasureSpace>, c: f64) -> Self {
        let n = space.len();
        Self { space, values: vec![c; n], undefined: vec![false; n] }
    }

    pub fn space(&self) -> &Arc<MeasureSpace> {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn undefined(&self) -> &[bool] {
        &self.undefined
    }

    /// μ-weighted norm; zero-measure atoms are ignored.
    pub fn norm(&self, p: Norm) -> f64 {
        let atoms = self.space.atoms();
        let live = self.values.iter().zip(atoms).filter(|(_, a)| a.measure > 0.0);
        match p {
            Norm::L1 => live.map(|(v, a)| v.abs() * a.measure).sum(),
            Norm::L2 => live.map(|(v, a)| v * v * a.measure).sum::<f64>().sqrt(),
            Norm::LInf => live.map(|(v, _)| v.abs()).fold(0.0, f64::max),
        }
    }

    /// `⟨f, g⟩_μ`.
    pub fn inner(&self, other: &GridFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .zip(self.space.atoms())
            .map(|((a, b), atom)| a * b * atom.measure)
            .sum()
    }

    pub fn sub(&self, other: &GridFunction) -> GridFunction {
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        let undefined = self.undefined.iter().zip(&other.undefined).map(|(a, b)| *a || *b).collect();
        GridFunction { space: self.space.clone(), values, undefined }
    }

    pub fn abs(&self) -> GridFunction {
        GridFunction {
            space: self.space.clone(),
            values: self.values.iter().map(|v| v.abs()).collect(),
            undefined: self.undefined.clone(),
        }
    }
}

fn check_space(f: &GridFunction, filtration: &Filtration) -> Result<()> {
    if f.space.len() != filtration.space().len() {
        return Err(Error::Dimension { expected: filtration.space().len(), got: f.space.len() });
    }
    Ok(())
}

/// `E_n(f)`: the μ-weighted mean of `f` over each level-`n` cell. A
/// single-atom cell returns the atom's value unchanged.
pub fn conditional_expectation(f: &GridFunction, filtration: &Filtration, n: usize) -> Result<GridFunction> {
    check_space(f, filtration)?;
    let level = filtration.level(n)?;
    let atoms = f.space.atoms();
    let means: Vec<Option<f64>> = level
        .cells
        .iter()
        .map(|cell| {
            (cell.measure > 0.0).then(|| match cell.atoms[..] {
                [a] => f.values[a],
                _ => cell.atoms.iter().map(|&a| f.values[a] * atoms[a].measure).sum::<f64>() / cell.measure,
            })
        })
        .collect();
    let mut values = vec![0.0; f.values.len()];
    let mut undefined = vec![false; f.values.len()];
    for (a, &c) in level.atom_cell.iter().enumerate() {
        match means[c] {
            Some(m) => values[a] = m,
            None => undefined[a] = true,
        }
    }
    Ok(GridFunction { space: f.space.clone(), values, undefined })
}

/// `Mf = sup_{1 ≤ n ≤ depth} |E_n(f)|` atomwise.
pub fn maximal_function(f: &GridFunction, filtration: &Filtration) -> Result<GridFunction> {
    check_space(f, filtration)?;
    let first = filtration.depth().min(1);
    let mut out = conditional_expectation(f, filtration, first)?.abs();
    for n in first + 1..=filtration.depth() {
        let e = conditional_expectation(f, filtration, n)?;
        for (m, v) in out.values.iter_mut().zip(&e.values) {
            *m = m.max(v.abs());
        }
        for (u, v) in out.undefined.iter_mut().zip(&e.undefined) {
            *u |= *v;
        }
    }
    Ok(out)
}

/// `E_n(K)` as a cell × cell matrix.
#[derive(Debug, Clone, Serialize)]
pub struct AveragedKernel {
    pub level: usize,
    #[serde(skip)]
    pub values: DMatrix<f64>,
    pub cell_measures: Vec<f64>,
    /// Cells of zero measure; their rows and columns are undefined (stored 0).
    pub null: Vec<bool>,
}

impl AveragedKernel {
    /// Double cell-average of atom-midpoint kernel samples.
    pub fn from_samples(samples: &DMatrix<f64>, filtration: &Filtration, n: usize) -> Result<Self> {
        let space = filtration.space();
        let atoms = space.len();
        if samples.nrows() != atoms || samples.ncols() != atoms {
            return Err(Error::Dimension { expected: atoms, got: samples.nrows() });
        }
        let level = filtration.level(n)?;
        let w = space.measures();
        let cells = level.len();
        let measures = level.measures();
        let null: Vec<bool> = measures.iter().map(|m| *m == 0.0).collect();

        // column compression: r[:, v] = Σ_{b ∈ v} w_b K[:, b]
        let mut r = DMatrix::<f64>::zeros(atoms, cells);
        r.as_mut_slice()
            .par_chunks_mut(atoms)
            .zip(level.cells.par_iter())
            .for_each(|(col, cell)| {
                for &b in &cell.atoms {
                    let wb = w[b];
                    let kb = samples.column(b);
                    for (c, k) in col.iter_mut().zip(kb.iter()) {
                        *c += wb * k;
                    }
                }
            });
        let mut values = DMatrix::<f64>::zeros(cells, cells);
        values
            .as_mut_slice()
            .par_chunks_mut(cells)
            .enumerate()
            .for_each(|(v, col)| {
                if null[v] {
                    return;
                }
                let rv = r.column(v);
                for (u, cell) in level.cells.iter().enumerate() {
                    if null[u] {
                        continue;
                    }
                    let s: f64 = cell.atoms.iter().map(|&a| w[a] * rv[a]).sum();
                    col[u] = s / (measures[u] * measures[v]);
                }
            });
        Ok(Self { level: n, values, cell_measures: measures, null })
    }

    /// Atom-level kernel matrix, constant on cell × cell blocks.
    pub fn expand(&self, partition: &Partition) -> DMatrix<f64> {
        let cell = &partition.atom_cell;
        let n = cell.len();
        DMatrix::from_fn(n, n, |a, b| self.values[(cell[a], cell[b])])
    }

    /// `Σ_cells μ(c) E_n(K)(c, c) = ∫ E_n(K)(x, x) dμ`.
    pub fn diagonal_average(&self) -> f64 {
        self.cell_measures
            .iter()
            .enumerate()
            .filter(|(c, _)| !self.null[*c])
            .map(|(c, m)| m * self.values[(c, c)])
            .sum()
    }

    /// Cell-level operator `√μ(u) E(u, v) √μ(v)`; shares its nonzero
    /// spectrum with the atom-level operator of `E_n(K)`.
    pub fn symmetrized(&self) -> DMatrix<f64> {
        let sq: Vec<f64> = self.cell_measures.iter().map(|m| m.sqrt()).collect();
        let n = sq.len();
        DMatrix::from_fn(n, n, |u, v| {
            0.5 * (self.values[(u, v)] + self.values[(v, u)]) * sq[u] * sq[v]
        })
    }
}

/// `E_n(K)` for a catalog kernel.
pub fn averaged_kernel(kernel: &Kernel, filtration: &Filtration, n: usize) -> Result<AveragedKernel> {
    filtration.level(n)?;
    let samples = kernel.sample(filtration.space())?;
    AveragedKernel::from_samples(&samples, filtration, n)
}

/// Atom × atom matrix of `D_n(u, x) = χ_{O_n(u)}(x) / μ(O_n(u))`.
pub fn dn_operator_matrix(filtration: &Filtration, n: usize) -> Result<DMatrix<f64>> {
    let atoms = filtration.space().len();
    if atoms > DN_ATOM_BUDGET {
        return Err(Error::AtomBudget { atoms, budget: DN_ATOM_BUDGET });
    }
    let level = filtration.level(n)?;
    let mut d = DMatrix::zeros(atoms, atoms);
    for cell in &level.cells {
        if cell.measure == 0.0 {
            continue;
        }
        let inv = 1.0 / cell.measure;
        for &a in &cell.atoms {
            for &b in &cell.atoms {
                d[(a, b)] = inv;
            }
        }
    }
    Ok(d)
}

/// `x ↦ Σ_b D[x][b] f(b) μ(b)`.
pub fn apply_weighted(d: &DMatrix<f64>, f: &GridFunction) -> GridFunction {
    let wf: Vec<f64> = f.values.iter().zip(f.space.atoms()).map(|(v, a)| v * a.measure).collect();
    let values = (d * nalgebra::DVector::from_vec(wf)).as_slice().to_vec();
    GridFunction { space: f.space.clone(), values, undefined: f.undefined.clone() }
}

#[derive(Debug, Clone, Serialize)]
pub struct SandwichReport {
    pub level: usize,
    pub max_abs_diff: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Compares the kernel of `D_n 𝒦 D_n`, formed as a weighted triple product,
/// with the atom expansion of `E_n(K)` from block sums.
pub fn sandwich_identity_check(
    kernel: &Kernel,
    filtration: &Filtration,
    n: usize,
    tol: f64,
) -> Result<SandwichReport> {
    let samples = kernel.sample(filtration.space())?;
    sandwich_from_samples(&samples, filtration, n, tol)
}

pub fn sandwich_from_samples(
    samples: &DMatrix<f64>,
    filtration: &Filtration,
    n: usize,
    tol: f64,
) -> Result<SandwichReport> {
    let d = dn_operator_matrix(filtration, n)?;
    let w = filtration.space().measures();
    let mut dw = d;
    for (j, mut col) in dw.column_iter_mut().enumerate() {
        col *= w[j];
    }
    // kernel of D W K W D; D is symmetric so W D = (D W)ᵀ
    let sandwich = &dw * samples * dw.transpose();
    let averaged = AveragedKernel::from_samples(samples, filtration, n)?;
    let expanded = averaged.expand(filtration.level(n)?);
    let max_abs_diff = (sandwich - expanded).amax();
    Ok(SandwichReport { level: n, max_abs_diff, tol, pass: max_abs_diff <= tol })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{Density, DomainKind, Point};

    fn unit(level: u32) -> Arc<MeasureSpace> {
        Arc::new(
            MeasureSpace::build(DomainKind::Interval { a: 0.0, b: 1.0 }, Density::Uniform { c: 1.0 }, level, None)
                .unwrap(),
        )
    }

    fn x(p: Point) -> f64 {
        p.line().unwrap()
    }

    #[test]
    fn constants_are_fixed() {
        let f = Filtration::dyadic(unit(5), 5).unwrap();
        let c = GridFunction::constant(f.space().clone(), 2.5);
        for n in 0..=5 {
            let e = conditional_expectation(&c, &f, n).unwrap();
            assert!(e.values().iter().all(|v| (v - 2.5).abs() < 1e-15));
        }
        let m = maximal_function(&GridFunction::constant(f.space().clone(), -1.5), &f).unwrap();
        assert!(m.values().iter().all(|v| (v - 1.5).abs() < 1e-15));
    }

    #[test]
    fn identity_halves() {
        let f = Filtration::dyadic(unit(4), 4).unwrap();
        let id = GridFunction::from_fn(f.space().clone(), x);
        let e = conditional_expectation(&id, &f, 1).unwrap();
        // direct weighted-mean oracle
        let oracle = |lo: usize, hi: usize| (lo..hi).map(|a| id.values()[a]).sum::<f64>() / (hi - lo) as f64;
        assert!((oracle(0, 8) - 0.25).abs() < 1e-15 && (oracle(8, 16) - 0.75).abs() < 1e-15);
        assert!(e.values()[..8].iter().all(|v| (v - 0.25).abs() < 1e-15));
        assert!(e.values()[8..].iter().all(|v| (v - 0.75).abs() < 1e-15));
        let full = conditional_expectation(&id, &f, 4).unwrap();
        assert_eq!(full.values(), id.values());
    }

    #[test]
    fn doob_bound_for_identity() {
        let f = Filtration::dyadic(unit(10), 10).unwrap();
        let id = GridFunction::from_fn(f.space().clone(), x);
        let m = maximal_function(&id, &f).unwrap();
        assert!(m.norm(Norm::L2) <= 2.0 * id.norm(Norm::L2));
        for n in 1..=10 {
            let e = conditional_expectation(&id, &f, n).unwrap();
            assert!(m.values().iter().zip(e.values()).all(|(a, b)| *a >= b.abs()));
        }
    }

    #[test]
    fn null_cells_are_flagged() {
        let space = Arc::new(unit(3).with_null_atoms(&[0, 1]).unwrap());
        let f = Filtration::dyadic(space.clone(), 3).unwrap();
        let g = GridFunction::from_fn(space, |p| 1.0 + x(p));
        let e = conditional_expectation(&g, &f, 2).unwrap();
        assert_eq!(&e.undefined()[..3], &[true, true, false]);
        assert_eq!(e.values()[0], 0.0);
        assert_eq!(f.null_cells(2).unwrap().len(), 1);
        assert_eq!(f.null_cells(3).unwrap().len(), 2);
        let avg = averaged_kernel(&Kernel::constant(1.0).unwrap(), &f, 2).unwrap();
        assert!(avg.null[0] && avg.values[(0, 0)] == 0.0);
        assert!((avg.diagonal_average() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn averaged_kernel_examples() {
        let f = Filtration::dyadic(unit(5), 5).unwrap();
        let ones = averaged_kernel(&Kernel::constant(1.0).unwrap(), &f, 3).unwrap();
        assert!(ones.values.iter().all(|v| (v - 1.0).abs() < 1e-14));
        let finest = averaged_kernel(&Kernel::BrownianMin, &f, 5).unwrap();
        let samples = Kernel::BrownianMin.sample(f.space()).unwrap();
        assert!((finest.values.clone() - samples).amax() < 1e-15);
    }

    #[test]
    fn brownian_diagonal_cell_average() {
        // continuum ∫ E_n(K)(x,x) dμ = 1/2 - h/6; brute-force atom summation converges to it
        let n = 3;
        let h = 1.0 / 8.0;
        let mut prev_err = f64::INFINITY;
        for level in [6u32, 8, 10] {
            let f = Filtration::dyadic(unit(level), n).unwrap();
            let avg = averaged_kernel(&Kernel::BrownianMin, &f, n).unwrap();
            let reps: Vec<f64> = f.space().reps().into_iter().map(x).collect();
            let k = 1usize << (level as usize - n);
            let brute: f64 = (0..8)
                .map(|c| {
                    let block = &reps[c * k..(c + 1) * k];
                    let s: f64 = block.iter().flat_map(|a| block.iter().map(move |b| a.min(*b))).sum();
                    h * s / (k * k) as f64
                })
                .sum();
            assert!((avg.diagonal_average() - brute).abs() < 1e-13);
            let err = (brute - (0.5 - h / 6.0)).abs();
            assert!(err < prev_err);
            prev_err = err;
        }
        assert!(prev_err < 5e-6);
    }

    #[test]
    fn dn_rows_and_idempotence() {
        let f = Filtration::dyadic(unit(5), 5).unwrap();
        let w = f.space().measures();
        for n in 0..=5 {
            let d = dn_operator_matrix(&f, n).unwrap();
            for a in 0..32 {
                let row: f64 = (0..32).map(|b| d[(a, b)] * w[b]).sum();
                assert!((row - 1.0).abs() < 1e-14);
            }
            let c = GridFunction::constant(f.space().clone(), 3.0);
            assert!(apply_weighted(&d, &c).values().iter().all(|v| (v - 3.0).abs() < 1e-14));
            let wd = DMatrix::from_fn(32, 32, |a, b| d[(a, b)] * w[b]);
            assert!((&wd * &wd - &wd).amax() < 1e-13);
        }
    }

    #[test]
    fn sandwich_trivial_cases() {
        let f = Filtration::dyadic(unit(5), 5).unwrap();
        let zero = sandwich_identity_check(&Kernel::constant(0.0).unwrap(), &f, 2, 1e-10).unwrap();
        assert!(zero.pass && zero.max_abs_diff == 0.0);
        let full = sandwich_identity_check(&Kernel::BrownianMin, &f, 5, 1e-10).unwrap();
        assert!(full.pass);
    }
}
