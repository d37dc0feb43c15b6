//! Dense pure and mixed states on `(C^d)^{⊗n}`.
//!
//! Basis ordering is big-endian in the factors: factor 0 is the most
//! significant digit, so `|i_0 i_1 … i_{n-1}⟩` sits at index
//! `Σ_k i_k d^{n-1-k}`. Factor indices are 0-based everywhere.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Squared-norm tolerance for pure states.
pub const NORM_TOL: f64 = 1e-12;
/// Hermiticity and trace tolerance for density matrices.
pub const DENSITY_TOL: f64 = 1e-12;
/// Smallest eigenvalue accepted as positive semi-definite.
pub const PSD_TOL: f64 = -1e-10;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// `d^n`, refusing anything that would not fit in memory anyway.
pub fn dim_pow(d: usize, n: usize) -> Result<usize> {
    if d == 0 {
        return Err(Error::InvalidDimension("local dimension must be positive".into()));
    }
    let mut acc: usize = 1;
    for _ in 0..n {
        acc = acc
            .checked_mul(d)
            .filter(|&v| v <= 1 << 28)
            .ok_or_else(|| Error::SizeCap(format!("{d}^{n} exceeds the dense-state cap")))?;
    }
    Ok(acc)
}

/// Digits of `x` in base `d`, most significant first.
pub(crate) fn digits(mut x: usize, d: usize, n: usize) -> Vec<usize> {
    let mut out = vec![0; n];
    for k in (0..n).rev() {
        out[k] = x % d;
        x /= d;
    }
    out
}

/// Sorted, de-duplicated, non-empty subset of `0..n`.
pub(crate) fn check_subset(subset: &[usize], n: usize) -> Result<Vec<usize>> {
    if subset.is_empty() {
        return Err(Error::InvalidSubset("subset is empty".into()));
    }
    let mut s = subset.to_vec();
    s.sort_unstable();
    if s.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidSubset(format!("repeated factor in {subset:?}")));
    }
    if let Some(&bad) = s.iter().find(|&&i| i >= n) {
        return Err(Error::InvalidSubset(format!("factor {bad} out of range for n={n}")));
    }
    Ok(s)
}

/// For every basis index, its index inside the `keep` block and inside the
/// complementary block.
pub(crate) fn split_indices(d: usize, n: usize, keep: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let dim = d.pow(n as u32);
    let mut in_keep = vec![false; n];
    for &k in keep {
        in_keep[k] = true;
    }
    let mut a_idx = Vec::with_capacity(dim);
    let mut b_idx = Vec::with_capacity(dim);
    for x in 0..dim {
        let (mut a, mut b) = (0, 0);
        for (k, digit) in digits(x, d, n).into_iter().enumerate() {
            if in_keep[k] {
                a = a * d + digit;
            } else {
                b = b * d + digit;
            }
        }
        a_idx.push(a);
        b_idx.push(b);
    }
    (a_idx, b_idx)
}

pub(crate) fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// `⟨a|b⟩`.
pub(crate) fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn kron_vec(a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            out.push(x * y);
        }
    }
    out
}

/// A normalized state vector on `(C^d)^{⊗n}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PureStateRepr", into = "PureStateRepr")]
pub struct PureState {
    amplitudes: Vec<C64>,
    local_dim: usize,
    num_factors: usize,
}

#[derive(Serialize, Deserialize)]
struct PureStateRepr {
    amplitudes: Vec<(f64, f64)>,
    local_dim: usize,
    num_factors: usize,
}

impl TryFrom<PureStateRepr> for PureState {
    type Error = Error;
    fn try_from(r: PureStateRepr) -> Result<Self> {
        let amps = r.amplitudes.into_iter().map(|(re, im)| C64::new(re, im)).collect();
        PureState::new(amps, r.local_dim, r.num_factors)
    }
}

impl From<PureState> for PureStateRepr {
    fn from(s: PureState) -> Self {
        PureStateRepr {
            amplitudes: s.amplitudes.iter().map(|z| (z.re, z.im)).collect(),
            local_dim: s.local_dim,
            num_factors: s.num_factors,
        }
    }
}

impl PureState {
    /// Wraps an already-normalized amplitude vector.
    pub fn new(amplitudes: Vec<C64>, local_dim: usize, num_factors: usize) -> Result<Self> {
        if num_factors == 0 {
            return Err(Error::InvalidDimension("need at least one factor".into()));
        }
        let dim = dim_pow(local_dim, num_factors)?;
        if amplitudes.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: amplitudes.len(),
            });
        }
        let nrm = norm_sqr(&amplitudes);
        if (nrm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("squared norm {nrm} is not 1")));
        }
        Ok(Self {
            amplitudes,
            local_dim,
            num_factors,
        })
    }

    /// Normalizes `amplitudes` first.
    pub fn normalized(mut amplitudes: Vec<C64>, local_dim: usize, num_factors: usize) -> Result<Self> {
        let nrm = norm_sqr(&amplitudes).sqrt();
        if nrm == 0.0 || !nrm.is_finite() {
            return Err(Error::InvalidState("cannot normalize a zero vector".into()));
        }
        for z in &mut amplitudes {
            *z /= nrm;
        }
        Self::new(amplitudes, local_dim, num_factors)
    }

    /// A single-factor state in `C^dim`.
    pub fn single(amplitudes: Vec<C64>) -> Result<Self> {
        let d = amplitudes.len();
        Self::normalized(amplitudes, d, 1)
    }

    /// Computational basis state `|digits⟩`.
    pub fn basis(local_dim: usize, digits: &[usize]) -> Result<Self> {
        let n = digits.len();
        let dim = dim_pow(local_dim, n)?;
        let mut idx = 0;
        for &x in digits {
            if x >= local_dim {
                return Err(Error::InvalidDimension(format!("digit {x} >= d={local_dim}")));
            }
            idx = idx * local_dim + x;
        }
        let mut amps = vec![ZERO; dim];
        amps[idx] = ONE;
        Self::new(amps, local_dim, n)
    }

    /// `|0…0⟩`.
    pub fn zero(local_dim: usize, num_factors: usize) -> Result<Self> {
        Self::basis(local_dim, &vec![0; num_factors])
    }

    /// Tensor product of states sharing the same local dimension.
    pub fn product(factors: &[PureState]) -> Result<Self> {
        let first = factors
            .first()
            .ok_or_else(|| Error::InvalidState("empty product".into()))?;
        let mut acc = first.clone();
        for f in &factors[1..] {
            acc = acc.kron(f)?;
        }
        Ok(acc)
    }

    pub fn kron(&self, other: &PureState) -> Result<Self> {
        if self.local_dim != other.local_dim {
            return Err(Error::DimensionMismatch {
                expected: self.local_dim,
                got: other.local_dim,
            });
        }
        let amps = kron_vec(&self.amplitudes, &other.amplitudes);
        Self::normalized(amps, self.local_dim, self.num_factors + other.num_factors)
    }

    /// Places `a` on the factors in `cut` and `b` on the rest.
    pub fn from_cut_product(a: &PureState, b: &PureState, cut: &[usize], num_factors: usize) -> Result<Self> {
        let cut = check_subset(cut, num_factors)?;
        let d = a.local_dim;
        if b.local_dim != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: b.local_dim,
            });
        }
        if a.num_factors != cut.len() || b.num_factors + cut.len() != num_factors {
            return Err(Error::InvalidCut("block sizes do not match the cut".into()));
        }
        let (ai, bi) = split_indices(d, num_factors, &cut);
        let amps = ai
            .iter()
            .zip(&bi)
            .map(|(&x, &y)| a.amplitudes[x] * b.amplitudes[y])
            .collect();
        Self::normalized(amps, d, num_factors)
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn num_factors(&self) -> usize {
        self.num_factors
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &PureState) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(inner(&self.amplitudes, &other.amplitudes))
    }

    pub fn projector(&self) -> DensityMatrix {
        let v = nalgebra::DVector::from_column_slice(&self.amplitudes);
        DensityMatrix {
            matrix: &v * v.adjoint(),
            local_dim: self.local_dim,
            num_factors: self.num_factors,
        }
    }

    /// Applies a `d×d` matrix to one factor.
    pub fn apply_local(&self, site: usize, op: &DMatrix<C64>) -> Result<Self> {
        let d = self.local_dim;
        if site >= self.num_factors {
            return Err(Error::InvalidSubset(format!("site {site} out of range")));
        }
        if op.nrows() != d || op.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: op.nrows(),
            });
        }
        let stride = d.pow((self.num_factors - 1 - site) as u32);
        let mut out = self.amplitudes.clone();
        let mut buf = vec![ZERO; d];
        for hi in 0..self.dim() / (stride * d) {
            for lo in 0..stride {
                let base = hi * stride * d + lo;
                for (i, b) in buf.iter_mut().enumerate() {
                    *b = (0..d).map(|j| op[(i, j)] * self.amplitudes[base + j * stride]).sum();
                }
                for (i, b) in buf.iter().enumerate() {
                    out[base + i * stride] = *b;
                }
            }
        }
        Self::normalized(out, d, self.num_factors)
    }

    /// Amplitudes reshaped into a `d^|cut| × d^(n-|cut|)` matrix.
    pub fn cut_matrix(&self, cut: &[usize]) -> Result<DMatrix<C64>> {
        let cut = check_subset(cut, self.num_factors)?;
        let d = self.local_dim;
        let rows = d.pow(cut.len() as u32);
        let cols = self.dim() / rows;
        let (ai, bi) = split_indices(d, self.num_factors, &cut);
        let mut m = DMatrix::zeros(rows, cols);
        for (x, amp) in self.amplitudes.iter().enumerate() {
            m[(ai[x], bi[x])] = *amp;
        }
        Ok(m)
    }

    /// Reduced state on `keep`, factors in ascending order.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        let m = self.cut_matrix(keep)?;
        let matrix = &m * m.adjoint();
        Ok(DensityMatrix {
            matrix,
            local_dim: self.local_dim,
            num_factors: keep.len(),
        })
    }

    /// `Tr[ρ_S²]`, computed on whichever side of the cut is smaller.
    pub fn marginal_purity(&self, subset: &[usize]) -> Result<f64> {
        let subset = check_subset(subset, self.num_factors)?;
        if subset.len() == self.num_factors {
            return Ok(1.0);
        }
        let m = self.cut_matrix(&subset)?;
        let g = if m.nrows() <= m.ncols() {
            &m * m.adjoint()
        } else {
            m.adjoint() * &m
        };
        Ok(g.iter().map(|z| z.norm_sqr()).sum())
    }
}

/// Hermitian, positive semi-definite, unit-trace matrix on `(C^d)^{⊗k}`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: DMatrix<C64>,
    local_dim: usize,
    num_factors: usize,
}

impl DensityMatrix {
    /// Validates Hermiticity, trace and positivity.
    pub fn new(matrix: DMatrix<C64>, local_dim: usize, num_factors: usize) -> Result<Self> {
        let dim = dim_pow(local_dim, num_factors)?;
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::NotSquare(matrix.nrows(), matrix.ncols()));
        }
        if matrix.nrows() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: matrix.nrows(),
            });
        }
        let herm_err = (&matrix - matrix.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if herm_err > DENSITY_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (error {herm_err:e})")));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > DENSITY_TOL || tr.im.abs() > DENSITY_TOL {
            return Err(Error::InvalidState(format!("trace {tr} is not 1")));
        }
        let min_eig = matrix.clone().symmetric_eigen().eigenvalues.min();
        if min_eig < PSD_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min_eig:e}")));
        }
        Ok(Self {
            matrix,
            local_dim,
            num_factors,
        })
    }

    pub fn from_pure(state: &PureState) -> Self {
        state.projector()
    }

    /// `I / d^n`.
    pub fn maximally_mixed(local_dim: usize, num_factors: usize) -> Result<Self> {
        let dim = dim_pow(local_dim, num_factors)?;
        if dim > 1 << 14 {
            return Err(Error::SizeCap(format!("dense {dim}x{dim} density matrix")));
        }
        let matrix = DMatrix::from_diagonal_element(dim, dim, C64::new(1.0 / dim as f64, 0.0));
        Ok(Self {
            matrix,
            local_dim,
            num_factors,
        })
    }

    /// Convex combination `Σ w_i ρ_i` of equally-shaped states.
    pub fn mixture(parts: &[(f64, DensityMatrix)]) -> Result<Self> {
        let (_, first) = parts
            .first()
            .ok_or_else(|| Error::InvalidState("empty mixture".into()))?;
        let mut m = DMatrix::zeros(first.dim(), first.dim());
        for (w, rho) in parts {
            if rho.dim() != first.dim() {
                return Err(Error::DimensionMismatch {
                    expected: first.dim(),
                    got: rho.dim(),
                });
            }
            m += rho.matrix.map(|z| z * *w);
        }
        Self::new(m, first.local_dim, first.num_factors)
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn num_factors(&self) -> usize {
        self.num_factors
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `⟨v|ρ|v⟩`.
    pub fn expectation(&self, v: &[C64]) -> f64 {
        let n = self.dim();
        let mut acc = ZERO;
        for i in 0..n {
            let mut row = ZERO;
            for j in 0..n {
                row += self.matrix[(i, j)] * v[j];
            }
            acc += v[i].conj() * row;
        }
        acc.re
    }

    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.matrix
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect()
    }

    /// Reduced state on `keep`, factors in ascending order.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        let keep = check_subset(keep, self.num_factors)?;
        let d = self.local_dim;
        let kd = d.pow(keep.len() as u32);
        let rd = self.dim() / kd;
        let (ai, bi) = split_indices(d, self.num_factors, &keep);
        let mut index = vec![0usize; self.dim()];
        for x in 0..self.dim() {
            index[ai[x] * rd + bi[x]] = x;
        }
        let mut out = DMatrix::zeros(kd, kd);
        for a in 0..kd {
            for b in 0..kd {
                let mut acc = ZERO;
                for r in 0..rd {
                    acc += self.matrix[(index[a * rd + r], index[b * rd + r])];
                }
                out[(a, b)] = acc;
            }
        }
        Ok(DensityMatrix {
            matrix: out,
            local_dim: d,
            num_factors: keep.len(),
        })
    }
}

/// Either representation, for operations that accept both.
#[derive(Clone, Debug, PartialEq)]
pub enum State {
    Pure(PureState),
    Mixed(DensityMatrix),
}

impl State {
    pub fn local_dim(&self) -> usize {
        match self {
            State::Pure(p) => p.local_dim(),
            State::Mixed(m) => m.local_dim(),
        }
    }

    pub fn num_factors(&self) -> usize {
        match self {
            State::Pure(p) => p.num_factors(),
            State::Mixed(m) => m.num_factors(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            State::Pure(p) => p.dim(),
            State::Mixed(m) => m.dim(),
        }
    }

    pub fn to_density(&self) -> DensityMatrix {
        match self {
            State::Pure(p) => p.projector(),
            State::Mixed(m) => m.clone(),
        }
    }

    pub fn as_pure(&self) -> Option<&PureState> {
        match self {
            State::Pure(p) => Some(p),
            State::Mixed(_) => None,
        }
    }

    /// `⟨v|ρ|v⟩`.
    pub fn expectation(&self, v: &[C64]) -> f64 {
        match self {
            State::Pure(p) => inner(v, p.amplitudes()).norm_sqr(),
            State::Mixed(m) => m.expectation(v),
        }
    }

    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        partial_trace(self, keep)
    }

    /// `Tr[ρ_S²]` for a non-empty subset.
    pub fn marginal_purity(&self, subset: &[usize]) -> Result<f64> {
        match self {
            State::Pure(p) => p.marginal_purity(subset),
            State::Mixed(m) => Ok(m.partial_trace(subset)?.purity()),
        }
    }
}

impl From<PureState> for State {
    fn from(p: PureState) -> Self {
        State::Pure(p)
    }
}

impl From<DensityMatrix> for State {
    fn from(m: DensityMatrix) -> Self {
        State::Mixed(m)
    }
}

/// Haar-random unit vector in `C^dim`, as a single-factor state.
pub fn haar_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<PureState> {
    let amps = gaussian_vector(dim, rng)?;
    PureState::normalized(amps, dim, 1)
}

/// Haar-random unit vector on `(C^d)^{⊗n}`, keeping the factor structure.
pub fn haar_state_on<R: Rng + ?Sized>(d: usize, n: usize, rng: &mut R) -> Result<PureState> {
    let dim = dim_pow(d, n)?;
    PureState::normalized(gaussian_vector(dim, rng)?, d, n)
}

fn gaussian_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<Vec<C64>> {
    if dim == 0 {
        return Err(Error::InvalidDimension("dimension must be at least 1".into()));
    }
    Ok((0..dim)
        .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect())
}

/// Haar-random unitary: Gram–Schmidt on a Ginibre matrix, which is QR with
/// a positive diagonal in `R`.
pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<DMatrix<C64>> {
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(dim);
    while cols.len() < dim {
        let mut v = gaussian_vector(dim, rng)?;
        for c in &cols {
            let proj = inner(c, &v);
            for (x, y) in v.iter_mut().zip(c) {
                *x -= proj * y;
            }
        }
        let nrm = norm_sqr(&v).sqrt();
        if nrm < 1e-8 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= nrm);
        cols.push(v);
    }
    Ok(DMatrix::from_fn(dim, dim, |i, j| cols[j][i]))
}

/// Reduced state of either representation.
pub fn partial_trace(state: &State, keep: &[usize]) -> Result<DensityMatrix> {
    match state {
        State::Pure(p) => p.partial_trace(keep),
        State::Mixed(m) => m.partial_trace(keep),
    }
}

/// `Tr[ρ²]`.
pub fn purity(rho: &DensityMatrix) -> f64 {
    rho.purity()
}

/// Half the trace norm of `a - b`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let diff = a.matrix() - b.matrix();
    let eig = diff.symmetric_eigen().eigenvalues;
    Ok((0.5 * eig.iter().map(|x| x.abs()).sum::<f64>()).min(1.0))
}

/// `sqrt(1 - |⟨ψ|φ⟩|²)`.
pub fn pure_trace_distance(a: &PureState, b: &PureState) -> Result<f64> {
    let ov = a.inner(b)?.norm_sqr();
    Ok((1.0 - ov).max(0.0).sqrt())
}
