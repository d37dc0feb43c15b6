use nalgebra::DMatrix;

use super::BoundReport;
use crate::error::{Error, Result};
use crate::permanent::permanent;
use crate::state::{PureState, C64};

/// Gram matrix of unit vectors: Hermitian, PSD, unit diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix {
    entries: DMatrix<C64>,
}

impl GramMatrix {
    /// Validates the entries. A bad diagonal or a non-PSD matrix is a
    /// precondition failure rather than a bound failure.
    pub fn new(entries: DMatrix<C64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::NotSquare(entries.nrows(), entries.ncols()));
        }
        for i in 0..entries.nrows() {
            let z = entries[(i, i)];
            if (z.re - 1.0).abs() > 1e-12 || z.im.abs() > 1e-12 {
                return Err(Error::Precondition(format!("Gram diagonal entry {i} is {z}, not 1")));
            }
        }
        let herm = (&entries - entries.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if herm > 1e-10 {
            return Err(Error::Precondition(format!(
                "Gram matrix not Hermitian (error {herm:e})"
            )));
        }
        if entries.nrows() > 0 {
            let min = entries.clone().symmetric_eigen().eigenvalues.min();
            if min < -1e-10 {
                return Err(Error::Precondition(format!("Gram matrix has eigenvalue {min:e}")));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn frobenius_sqr(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `per(G)`, real for a Gram matrix.
    pub fn permanent(&self) -> Result<f64> {
        Ok(permanent(&self.entries)?.re)
    }
}

/// `G[i][j] = ⟨ψ_i|ψ_j⟩`.
pub fn gram(states: &[PureState]) -> Result<GramMatrix> {
    let first = states
        .first()
        .ok_or_else(|| Error::InvalidState("empty collection".into()))?;
    for s in states {
        if s.dim() != first.dim() {
            return Err(Error::DimensionMismatch {
                expected: first.dim(),
                got: s.dim(),
            });
        }
    }
    let t = states.len();
    let mut g = DMatrix::zeros(t, t);
    for i in 0..t {
        for j in i..t {
            let z = states[i].inner(&states[j])?;
            g[(i, j)] = z;
            g[(j, i)] = z.conj();
        }
    }
    GramMatrix::new(g)
}

/// `per(G) ≥ ‖G‖_F² / T`.
pub fn frobenius_bound_check(g: &GramMatrix) -> Result<BoundReport> {
    let t = g.size().max(1) as f64;
    Ok(BoundReport::new(g.permanent()?, g.frobenius_sqr() / t))
}

/// `per(G) ≥ 1` when `T ≤ d`, and `per(G) ≥ T/d` otherwise.
pub fn gram_regime_check(g: &GramMatrix, d: usize) -> Result<BoundReport> {
    let t = g.size();
    let rhs = if t <= d { 1.0 } else { t as f64 / d as f64 };
    Ok(BoundReport::new(g.permanent()?, rhs))
}
