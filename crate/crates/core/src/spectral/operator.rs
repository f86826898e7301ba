use std::sync::Arc;

use nalgebra::DMatrix;

use super::eigen::{eigendecompose, eigenvalues, EigenMethod, SpectralDecomposition};
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::space::MeasureSpace;

/// Largest atom count assembled densely.
pub const DENSE_ATOM_BUDGET: usize = 4096;

/// Measure-weighted discretization of `f ↦ ∫ K(·, y) f(y) dμ(y)`.
///
/// `samples` holds `K` at atom midpoints; `symmetric` is
/// `√w_a K[a][b] √w_b`, which is similar to `K·diag(w)`.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    space: Arc<MeasureSpace>,
    samples: DMatrix<f64>,
    weights: Vec<f64>,
    symmetric: DMatrix<f64>,
}

pub fn assemble(kernel: &Kernel, space: &Arc<MeasureSpace>) -> Result<OperatorMatrix> {
    if space.len() > DENSE_ATOM_BUDGET {
        return Err(Error::AtomBudget { atoms: space.len(), budget: DENSE_ATOM_BUDGET });
    }
    OperatorMatrix::from_samples(space.clone(), kernel.sample(space)?)
}

impl OperatorMatrix {
    pub fn from_samples(space: Arc<MeasureSpace>, samples: DMatrix<f64>) -> Result<Self> {
        let n = space.len();
        if samples.nrows() != n || samples.ncols() != n {
            return Err(Error::Dimension { expected: n, got: samples.nrows() });
        }
        let weights = space.measures();
        let sq: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
        let symmetric = DMatrix::from_fn(n, n, |a, b| sq[a] * samples[(a, b)] * sq[b]);
        Ok(Self { space, samples, weights, symmetric })
    }

    pub fn space(&self) -> &Arc<MeasureSpace> {
        &self.space
    }

    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn symmetric(&self) -> &DMatrix<f64> {
        &self.symmetric
    }

    /// Canonical-basis trace `Σ_a w_a K[a][a]`.
    pub fn trace(&self) -> f64 {
        self.symmetric.diagonal().iter().sum()
    }

    /// Zeroes every row and column whose mask entry is false.
    pub fn masked(&self, keep: &[bool]) -> Result<Self> {
        let n = self.space.len();
        if keep.len() != n {
            return Err(Error::Dimension { expected: n, got: keep.len() });
        }
        let zero = |m: &DMatrix<f64>| DMatrix::from_fn(n, n, |a, b| if keep[a] && keep[b] { m[(a, b)] } else { 0.0 });
        Ok(Self {
            space: self.space.clone(),
            samples: zero(&self.samples),
            weights: self.weights.clone(),
            symmetric: zero(&self.symmetric),
        })
    }

    pub fn decompose(&self, method: EigenMethod) -> Result<SpectralDecomposition> {
        eigendecompose(&self.symmetric, method)
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        eigenvalues(&self.symmetric)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{Density, DomainKind};

    #[test]
    fn zero_kernel_assembles_to_zero() {
        let space = Arc::new(
            MeasureSpace::build(DomainKind::Interval { a: 0.0, b: 1.0 }, Density::Uniform { c: 1.0 }, 4, None)
                .unwrap(),
        );
        let op = assemble(&Kernel::constant(0.0).unwrap(), &space).unwrap();
        assert_eq!(op.symmetric().amax(), 0.0);
    }

    #[test]
    fn rank_one_minors_vanish() {
        let space = Arc::new(
            MeasureSpace::build(DomainKind::HalfLine, Density::Uniform { c: 1.0 }, 5, Some(8.0)).unwrap(),
        );
        let s = assemble(&Kernel::RankOneExp, &space).unwrap().symmetric().clone();
        let n = s.nrows();
        for i in 0..n {
            for j in 0..n {
                let minor = s[(i, i)] * s[(j, j)] - s[(i, j)] * s[(j, i)];
                assert!(minor.abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn budget_is_enforced() {
        let space = Arc::new(
            MeasureSpace::build(DomainKind::Interval { a: 0.0, b: 1.0 }, Density::Uniform { c: 1.0 }, 13, None)
                .unwrap(),
        );
        assert!(matches!(assemble(&Kernel::BrownianMin, &space), Err(Error::AtomBudget { .. })));
    }

    #[test]
    fn symmetric_form_matches_nonsymmetric_eigensolve() {
        // oracle: real Schur form of K·diag(w), independent of the symmetric path
        let space = Arc::new(
            MeasureSpace::build(
                DomainKind::Interval { a: 0.0, b: 1.0 },
                Density::Polynomial { coeffs: vec![0.5, 1.0] },
                4,
                None,
            )
            .unwrap(),
        );
        let op = assemble(&Kernel::exp_abs(1.3).unwrap(), &space).unwrap();
        let w = op.weights().to_vec();
        let kw = DMatrix::from_fn(16, 16, |a, b| op.samples()[(a, b)] * w[b]);
        let mut oracle: Vec<f64> = nalgebra::linalg::Schur::new(kw)
            .eigenvalues()
            .expect("real spectrum")
            .iter()
            .copied()
            .collect();
        oracle.sort_by(|a, b| b.total_cmp(a));
        let ours = op.eigenvalues().unwrap();
        for (a, b) in ours.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}
