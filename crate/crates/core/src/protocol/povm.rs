//! Rank-one POVMs, global or as a tensor product over sites.

use nalgebra::DMatrix;
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use crate::error::{Error, Result};
use crate::state::{haar_unitary, kron_vec, norm_sqr, State, C64, ONE, ZERO};

/// Probabilities must sum to 1 within this tolerance.
pub const PROB_TOL: f64 = 1e-8;

/// Elements `{D a_k |ψ_k⟩⟨ψ_k|}` with `Σ_k a_k = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Rank1Povm {
    weights: Vec<f64>,
    vectors: Vec<Vec<C64>>,
    dim: usize,
}

impl Rank1Povm {
    /// Checks unit vectors, `Σ a_k = 1` and completeness.
    pub fn new(elements: Vec<(f64, Vec<C64>)>, dim: usize) -> Result<Self> {
        if dim == 0 || elements.is_empty() {
            return Err(Error::InvalidPovm("empty POVM".into()));
        }
        let (weights, vectors): (Vec<f64>, Vec<Vec<C64>>) = elements.into_iter().unzip();
        if weights.iter().any(|&a| a.is_nan() || a < 0.0) {
            return Err(Error::InvalidPovm("negative weight".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidPovm(format!("weights sum to {total}")));
        }
        for v in &vectors {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
            if (norm_sqr(v) - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidPovm("element vector is not normalized".into()));
            }
        }
        let povm = Self { weights, vectors, dim };
        let err = povm.completeness_error();
        if err > 1e-8 {
            return Err(Error::InvalidPovm(format!("completeness error {err:e}")));
        }
        Ok(povm)
    }

    /// Measurement in the columns of a unitary.
    pub fn from_basis(u: &DMatrix<C64>) -> Result<Self> {
        let d = u.nrows();
        let a = 1.0 / d as f64;
        Self::new(
            (0..u.ncols())
                .map(|k| (a, u.column(k).iter().copied().collect()))
                .collect(),
            d,
        )
    }

    pub fn computational(dim: usize) -> Result<Self> {
        Self::from_basis(&DMatrix::identity(dim, dim))
    }

    /// Measurement in a Haar-random orthonormal basis.
    pub fn random_basis<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<Self> {
        Self::from_basis(&haar_unitary(dim, rng)?)
    }

    /// Rank-one refinement of a general POVM `{E_j}`: every `E_j` is split
    /// along its eigenvectors. Returns the refinement and, for each rank-one
    /// outcome, the index `j` it belongs to.
    pub fn refine(elements: &[DMatrix<C64>]) -> Result<(Self, Vec<usize>)> {
        let first = elements
            .first()
            .ok_or_else(|| Error::InvalidPovm("empty POVM".into()))?;
        let d = first.nrows();
        let mut out = Vec::new();
        let mut group = Vec::new();
        for (j, e) in elements.iter().enumerate() {
            if e.nrows() != d || e.ncols() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: e.nrows(),
                });
            }
            let eig = e.clone().symmetric_eigen();
            for (i, &mu) in eig.eigenvalues.iter().enumerate() {
                if mu < -1e-10 {
                    return Err(Error::InvalidPovm(format!("element {j} has eigenvalue {mu:e}")));
                }
                if mu > 1e-14 {
                    out.push((mu / d as f64, eig.eigenvectors.column(i).iter().copied().collect()));
                    group.push(j);
                }
            }
        }
        // Re-normalize weights to absorb eigen-solver round-off.
        let total: f64 = out.iter().map(|(a, _)| a).sum();
        if (total - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidPovm(format!(
                "elements sum to trace {}",
                total * d as f64
            )));
        }
        for (a, _) in &mut out {
            *a /= total;
        }
        Ok((Self::new(out, d)?, group))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.weights[k]
    }

    pub fn vector(&self, k: usize) -> &[C64] {
        &self.vectors[k]
    }

    /// `‖Σ_k D a_k ψ_k ψ_k† - I‖_F`.
    pub fn completeness_error(&self) -> f64 {
        let d = self.dim;
        let mut acc = DMatrix::<C64>::zeros(d, d);
        for (a, v) in self.weights.iter().zip(&self.vectors) {
            let w = C64::new(d as f64 * a, 0.0);
            for i in 0..d {
                for j in 0..d {
                    acc[(i, j)] += w * v[i] * v[j].conj();
                }
            }
        }
        (acc - DMatrix::identity(d, d)).norm()
    }

    /// `p_k = D a_k ⟨ψ_k|ρ|ψ_k⟩`.
    pub fn probabilities(&self, state: &State) -> Result<Vec<f64>> {
        if state.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: state.dim(),
            });
        }
        let d = self.dim as f64;
        let p = self
            .weights
            .iter()
            .zip(&self.vectors)
            .map(|(a, v)| (d * a * state.expectation(v)).max(0.0))
            .collect();
        normalized(p)
    }
}

fn normalized(mut p: Vec<f64>) -> Result<Vec<f64>> {
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > PROB_TOL {
        return Err(Error::InvalidDistribution(format!("outcome probabilities sum to {s}")));
    }
    p.iter_mut().for_each(|x| *x /= s);
    Ok(p)
}

/// Draws one outcome of `povm` on `state`.
pub fn sample_outcome<R: Rng + ?Sized>(povm: &Rank1Povm, state: &State, rng: &mut R) -> Result<usize> {
    sample_from(&povm.probabilities(state)?, 1, rng).map(|v| v[0])
}

/// `shots` independent draws from `p`.
pub fn sample_from<R: Rng + ?Sized>(p: &[f64], shots: usize, rng: &mut R) -> Result<Vec<usize>> {
    let dist = WeightedIndex::new(p).map_err(|e| Error::InvalidDistribution(e.to_string()))?;
    Ok((0..shots).map(|_| dist.sample(rng)).collect())
}

/// One round's measurement: a single POVM on the whole system, or one POVM
/// per site. Joint local outcomes are indexed with site 0 most significant.
#[derive(Clone, Debug, PartialEq)]
pub enum Measurement {
    Global(Rank1Povm),
    Local(Vec<Rank1Povm>),
}

impl Measurement {
    pub fn num_outcomes(&self) -> usize {
        match self {
            Measurement::Global(p) => p.len(),
            Measurement::Local(ps) => ps.iter().map(|p| p.len()).product(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Measurement::Global(p) => p.dim(),
            Measurement::Local(ps) => ps.iter().map(|p| p.dim()).product(),
        }
    }

    /// Splits a joint local outcome into per-site outcomes.
    pub fn split_outcome(&self, mut k: usize) -> Vec<usize> {
        match self {
            Measurement::Global(_) => vec![k],
            Measurement::Local(ps) => {
                let mut out = vec![0; ps.len()];
                for (s, p) in ps.iter().enumerate().rev() {
                    out[s] = k % p.len();
                    k /= p.len();
                }
                out
            }
        }
    }

    /// Outcome `k` as `(D a_k, ψ_k)` on the full space. Local outcomes
    /// become tensor products of the per-site vectors.
    pub fn element(&self, k: usize) -> (f64, Vec<C64>) {
        match self {
            Measurement::Global(p) => (p.dim() as f64 * p.weight(k), p.vector(k).to_vec()),
            Measurement::Local(ps) => {
                let mut w = 1.0;
                let mut v = vec![ONE];
                for (p, ks) in ps.iter().zip(self.split_outcome(k)) {
                    w *= p.dim() as f64 * p.weight(ks);
                    v = kron_vec(&v, p.vector(ks));
                }
                (w, v)
            }
        }
    }

    fn check_shape(&self, state: &State) -> Result<()> {
        match self {
            Measurement::Global(p) if p.dim() != state.dim() => Err(Error::DimensionMismatch {
                expected: p.dim(),
                got: state.dim(),
            }),
            Measurement::Local(ps)
                if ps.len() != state.num_factors() || ps.iter().any(|p| p.dim() != state.local_dim()) =>
            {
                Err(Error::DimensionMismatch {
                    expected: state.num_factors(),
                    got: ps.len(),
                })
            }
            _ => Ok(()),
        }
    }

    pub fn probabilities(&self, state: &State) -> Result<Vec<f64>> {
        self.check_shape(state)?;
        match (self, state) {
            (Measurement::Global(p), _) => p.probabilities(state),
            (Measurement::Local(ps), State::Pure(psi)) => normalized(local_pure_probabilities(ps, psi.amplitudes())),
            (Measurement::Local(_), State::Mixed(rho)) => {
                let p = (0..self.num_outcomes())
                    .map(|k| {
                        let (w, v) = self.element(k);
                        (w * rho.expectation(&v)).max(0.0)
                    })
                    .collect();
                normalized(p)
            }
        }
    }
}

/// Contracts a pure state site by site with `sqrt(d a_k) ⟨ψ_k|`.
fn local_pure_probabilities(ps: &[Rank1Povm], amps: &[C64]) -> Vec<f64> {
    let mut v = amps.to_vec();
    // Axis sizes: already-contracted sites hold outcome counts.
    let mut sizes: Vec<usize> = ps.iter().map(|p| p.dim()).collect();
    for (s, p) in ps.iter().enumerate() {
        let d = p.dim();
        let post: usize = sizes[s + 1..].iter().product();
        let pre: usize = sizes[..s].iter().product();
        let k_out = p.len();
        let mut next = vec![ZERO; pre * k_out * post];
        for k in 0..k_out {
            let scale = C64::new((d as f64 * p.weight(k)).sqrt(), 0.0);
            let bra = p.vector(k);
            for a in 0..pre {
                for b in 0..post {
                    let mut acc = ZERO;
                    for (i, c) in bra.iter().enumerate() {
                        acc += c.conj() * v[(a * d + i) * post + b];
                    }
                    next[(a * k_out + k) * post + b] = scale * acc;
                }
            }
        }
        sizes[s] = k_out;
        v = next;
    }
    v.iter().map(|z| z.norm_sqr()).collect()
}
