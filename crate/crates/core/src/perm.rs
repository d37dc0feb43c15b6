//! Permutations of tensor factors and the symmetric subspace.
//!
//! Symbols are `0..T`. `compose(p, q)` is `p ∘ q` (apply `q` first). The
//! factor action sends input slot `j` to output slot `p(j)`, which makes it
//! a representation: `P(p ∘ q) = P(p) P(q)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{C64, ONE, ZERO};

/// Largest degree accepted by [`Permutation::all`].
pub const MAX_ENUM_DEGREE: usize = 8;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation {
    mapping: Vec<usize>,
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Permutation::new(v)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.mapping
    }
}

impl Permutation {
    /// One-line notation: `mapping[i]` is the image of `i`.
    pub fn new(mapping: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; mapping.len()];
        for &x in &mapping {
            if x >= mapping.len() || seen[x] {
                return Err(Error::NotAPermutation(format!("{mapping:?}")));
            }
            seen[x] = true;
        }
        Ok(Self { mapping })
    }

    pub fn identity(degree: usize) -> Self {
        Self {
            mapping: (0..degree).collect(),
        }
    }

    /// Swaps `i` and `j`; the identity when `i == j`.
    pub fn transposition(degree: usize, i: usize, j: usize) -> Result<Self> {
        if i >= degree || j >= degree {
            return Err(Error::NotAPermutation(format!("({i} {j}) in degree {degree}")));
        }
        let mut m: Vec<usize> = (0..degree).collect();
        m.swap(i, j);
        Ok(Self { mapping: m })
    }

    /// The cycle `c[0] → c[1] → … → c[0]`.
    pub fn cycle(degree: usize, c: &[usize]) -> Result<Self> {
        let mut m: Vec<usize> = (0..degree).collect();
        for (k, &x) in c.iter().enumerate() {
            if x >= degree {
                return Err(Error::NotAPermutation(format!("cycle {c:?} in degree {degree}")));
            }
            m[x] = c[(k + 1) % c.len()];
        }
        Self::new(m)
    }

    pub fn degree(&self) -> usize {
        self.mapping.len()
    }

    pub fn apply(&self, i: usize) -> usize {
        self.mapping[i]
    }

    pub fn images(&self) -> &[usize] {
        &self.mapping
    }

    pub fn is_identity(&self) -> bool {
        self.mapping.iter().enumerate().all(|(i, &x)| i == x)
    }

    pub fn fixes(&self, i: usize) -> bool {
        self.mapping[i] == i
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Permutation) -> Result<Self> {
        if self.degree() != other.degree() {
            return Err(Error::DegreeMismatch(self.degree(), other.degree()));
        }
        Ok(Self {
            mapping: other.mapping.iter().map(|&i| self.mapping[i]).collect(),
        })
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.degree()];
        for (i, &x) in self.mapping.iter().enumerate() {
            inv[x] = i;
        }
        Self { mapping: inv }
    }

    /// Disjoint cycles including fixed points, each led by its smallest symbol.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.degree()];
        let mut out = Vec::new();
        for start in 0..self.degree() {
            if seen[start] {
                continue;
            }
            let mut c = vec![start];
            seen[start] = true;
            let mut x = self.mapping[start];
            while x != start {
                seen[x] = true;
                c.push(x);
                x = self.mapping[x];
            }
            out.push(c);
        }
        out
    }

    /// `+1` or `-1`.
    pub fn sign(&self) -> i32 {
        let even = self.cycles().iter().map(|c| c.len() - 1).sum::<usize>() % 2 == 0;
        if even {
            1
        } else {
            -1
        }
    }

    /// All of `S_T` in lexicographic order of one-line notation.
    pub fn all(degree: usize) -> Result<Vec<Permutation>> {
        if degree > MAX_ENUM_DEGREE {
            return Err(Error::SizeCap(format!("enumerating S_{degree}")));
        }
        let mut cur: Vec<usize> = (0..degree).collect();
        let mut out = vec![Self { mapping: cur.clone() }];
        while next_permutation(&mut cur) {
            out.push(Self { mapping: cur.clone() });
        }
        Ok(out)
    }
}

fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

pub fn compose(p: &Permutation, q: &Permutation) -> Result<Permutation> {
    p.compose(q)
}

pub fn inverse(p: &Permutation) -> Permutation {
    p.inverse()
}

pub fn cycles(p: &Permutation) -> Vec<Vec<usize>> {
    p.cycles()
}

/// `p = alpha ∘ (0 1)^a ∘ beta` with `alpha` and `beta` fixing symbol 0.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CosetDecomposition {
    pub alpha: Permutation,
    pub a: u8,
    pub beta: Permutation,
}

impl CosetDecomposition {
    pub fn recompose(&self) -> Permutation {
        let deg = self.alpha.degree();
        let mid = if self.a == 1 {
            Permutation::transposition(deg, 0, 1).expect("degree >= 2")
        } else {
            Permutation::identity(deg)
        };
        self.alpha
            .compose(&mid)
            .and_then(|m| m.compose(&self.beta))
            .expect("equal degrees")
    }
}

/// Splits `p` across the double coset of the stabilizer of symbol 0.
pub fn double_coset_decompose(p: &Permutation) -> Result<CosetDecomposition> {
    let deg = p.degree();
    if deg < 2 {
        return Err(Error::InvalidDimension(format!("degree {deg} < 2")));
    }
    let j = p.apply(0);
    if j == 0 {
        return Ok(CosetDecomposition {
            alpha: p.clone(),
            a: 0,
            beta: Permutation::identity(deg),
        });
    }
    let gamma = Permutation::transposition(deg, 1, j)?;
    let tau = Permutation::transposition(deg, 0, 1)?;
    let beta = tau.compose(&gamma)?.compose(p)?;
    Ok(CosetDecomposition {
        alpha: gamma.inverse(),
        a: 1,
        beta,
    })
}

/// `T` such that `len == m^T`, given the expected `T`.
fn check_power(len: usize, m: usize, t: usize) -> Result<()> {
    let expect = m
        .checked_pow(t as u32)
        .ok_or_else(|| Error::SizeCap(format!("{m}^{t} overflows")))?;
    if m == 0 || expect != len {
        return Err(Error::DimensionMismatch {
            expected: expect,
            got: len,
        });
    }
    Ok(())
}

/// Index map of the factor action: input index `x` lands at `map[x]`.
pub fn factor_index_map(m: usize, p: &Permutation) -> Vec<usize> {
    let t = p.degree();
    let len = m.pow(t as u32);
    let strides: Vec<usize> = (0..t).map(|j| m.pow((t - 1 - p.apply(j)) as u32)).collect();
    let mut digits = vec![0usize; t];
    let mut y = 0usize;
    let mut map = Vec::with_capacity(len);
    for _ in 0..len {
        map.push(y);
        // Odometer increment on the input digits, last factor fastest.
        for j in (0..t).rev() {
            digits[j] += 1;
            y += strides[j];
            if digits[j] < m {
                break;
            }
            y -= m * strides[j];
            digits[j] = 0;
        }
    }
    map
}

/// Applies `P(p)` to a vector on `(C^m)^{⊗T}`.
pub fn permute_tensor_factors(v: &[C64], m: usize, p: &Permutation) -> Result<Vec<C64>> {
    check_power(v.len(), m, p.degree())?;
    let map = factor_index_map(m, p);
    let mut out = vec![ZERO; v.len()];
    for (x, &y) in map.iter().enumerate() {
        out[y] = v[x];
    }
    Ok(out)
}

/// `binom(d + T - 1, T)`.
pub fn sym_dim(d: u64, t: u64) -> Result<u128> {
    if d == 0 {
        return Err(Error::InvalidDimension("d must be positive".into()));
    }
    let mut r: u128 = 1;
    for i in 1..=t as u128 {
        r = r
            .checked_mul(d as u128 - 1 + i)
            .ok_or_else(|| Error::SizeCap(format!("sym_dim({d}, {t}) overflows")))?
            / i;
    }
    Ok(r)
}

/// Dense `P(p)`. Only for small oracle computations.
pub fn permutation_matrix(m: usize, p: &Permutation) -> Result<DMatrix<C64>> {
    let len = m.pow(p.degree() as u32);
    if len > 256 {
        return Err(Error::SizeCap(format!("dense permutation matrix of side {len}")));
    }
    let map = factor_index_map(m, p);
    let mut out = DMatrix::zeros(len, len);
    for (x, &y) in map.iter().enumerate() {
        out[(y, x)] = ONE;
    }
    Ok(out)
}

/// Dense `(1/T!) Σ_π P(π)` on `(C^m)^{⊗T}`. Only for small oracle computations.
pub fn symmetric_projector(m: usize, t: usize) -> Result<DMatrix<C64>> {
    let perms = Permutation::all(t)?;
    let len = m.pow(t as u32);
    let mut acc = DMatrix::zeros(len, len);
    for p in &perms {
        acc += permutation_matrix(m, p)?;
    }
    Ok(acc / C64::new(perms.len() as f64, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::state::haar_state;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;

    fn p(v: &[usize]) -> Permutation {
        Permutation::new(v.to_vec()).unwrap()
    }

    #[test]
    fn rejects_non_bijections() {
        assert!(Permutation::new(vec![0, 0]).is_err());
        assert!(Permutation::new(vec![0, 2]).is_err());
        assert!(p(&[0, 1]).compose(&p(&[0, 1, 2])).is_err());
    }

    #[test]
    fn composition_in_s3_matches_table() {
        let a = Permutation::transposition(3, 0, 1).unwrap();
        let b = Permutation::transposition(3, 1, 2).unwrap();
        let c = a.compose(&b).unwrap();
        // 0 → 1, 1 → 2, 2 → 0
        assert_eq!(c, Permutation::cycle(3, &[0, 1, 2]).unwrap());
        // Full table: (p∘q)(i) = p(q(i)).
        let all = Permutation::all(3).unwrap();
        for x in &all {
            for y in &all {
                let z = x.compose(y).unwrap();
                for i in 0..3 {
                    assert_eq!(z.apply(i), x.apply(y.apply(i)));
                }
            }
        }
    }

    #[test]
    fn cycles_and_inverse() {
        assert_eq!(
            Permutation::identity(4).cycles(),
            vec![vec![0], vec![1], vec![2], vec![3]]
        );
        let q = p(&[2, 0, 1, 3]);
        assert_eq!(q.cycles(), vec![vec![0, 2, 1], vec![3]]);
        assert!(q.compose(&q.inverse()).unwrap().is_identity());
        assert_eq!(q.sign(), 1);
        assert_eq!(p(&[1, 0]).sign(), -1);
    }

    #[test]
    fn enumeration_is_lexicographic_and_complete() {
        let all = Permutation::all(4).unwrap();
        assert_eq!(all.len(), 24);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(Permutation::all(0).unwrap().len(), 1);
        assert!(Permutation::all(9).is_err());
    }

    #[test]
    fn coset_examples() {
        let id = double_coset_decompose(&Permutation::identity(3)).unwrap();
        assert_eq!(id.a, 0);
        assert!(id.alpha.is_identity() && id.beta.is_identity());

        let t = double_coset_decompose(&Permutation::transposition(3, 0, 1).unwrap()).unwrap();
        assert_eq!(t.a, 1);
        assert!(t.alpha.is_identity() && t.beta.is_identity());

        assert!(double_coset_decompose(&Permutation::identity(1)).is_err());
    }

    #[test]
    fn coset_recomposition_exhaustive_s4() {
        for q in Permutation::all(4).unwrap() {
            let c = double_coset_decompose(&q).unwrap();
            assert_eq!(c.recompose(), q);
            assert!(c.alpha.fixes(0) && c.beta.fixes(0));
            assert_eq!(c.a == 0, q.fixes(0));
        }
    }

    #[test]
    fn swap_on_basis_state() {
        // |01⟩ → |10⟩
        let mut v = vec![ZERO; 4];
        v[1] = ONE;
        let out = permute_tensor_factors(&v, 2, &Permutation::transposition(2, 0, 1).unwrap()).unwrap();
        assert_eq!(out[2], ONE);
        assert!(permute_tensor_factors(&v, 3, &Permutation::identity(2)).is_err());
    }

    #[test]
    fn factor_action_moves_slots() {
        // Input digits (a, b, c) under 0→1, 1→2, 2→0 become (c, a, b).
        let q = Permutation::cycle(3, &[0, 1, 2]).unwrap();
        let map = factor_index_map(3, &q);
        let (a, b, c) = (2, 0, 1);
        assert_eq!(map[a * 9 + b * 3 + c], c * 9 + a * 3 + b);
    }

    #[test]
    fn three_cycle_has_order_three() {
        let mut rng = seeded(21);
        let v = haar_state(27, &mut rng).unwrap().amplitudes().to_vec();
        let q = Permutation::cycle(3, &[0, 1, 2]).unwrap();
        let mut w = v.clone();
        for _ in 0..3 {
            w = permute_tensor_factors(&w, 3, &q).unwrap();
        }
        let err: f64 = v.iter().zip(&w).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12);
        let id = permute_tensor_factors(&v, 3, &Permutation::identity(3)).unwrap();
        assert_eq!(id, v);
    }

    #[test]
    fn sym_dim_values() {
        assert_eq!(sym_dim(2, 2).unwrap(), 3);
        assert_eq!(sym_dim(5, 0).unwrap(), 1);
        assert_eq!(sym_dim(2, 3).unwrap(), 4);
        assert_eq!(sym_dim(16, 4).unwrap(), 3876);
        assert!(sym_dim(0, 2).is_err());
    }

    #[test]
    fn symmetric_projector_absorbs_permutations() {
        for m in 1..=2usize {
            for t in 0..=4usize {
                let proj = symmetric_projector(m, t).unwrap();
                let tr = proj.trace().re;
                assert!((tr - sym_dim(m as u64, t as u64).unwrap() as f64).abs() < 1e-9);
                for q in Permutation::all(t).unwrap() {
                    let pm = permutation_matrix(m, &q).unwrap();
                    assert!((&pm * &proj - &proj).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn permutation_matrix_matches_vector_action() {
        let mut rng = seeded(22);
        let v = haar_state(8, &mut rng).unwrap().amplitudes().to_vec();
        for q in Permutation::all(3).unwrap() {
            let pm = permutation_matrix(2, &q).unwrap();
            let dense = &pm * nalgebra::DVector::from_column_slice(&v);
            let fast = permute_tensor_factors(&v, 2, &q).unwrap();
            for (a, b) in dense.iter().zip(&fast) {
                assert!((a - b).norm() < 1e-14);
            }
        }
    }

    fn random_perm(t: usize, seed: u64) -> Permutation {
        let mut v: Vec<usize> = (0..t).collect();
        v.shuffle(&mut seeded(seed));
        Permutation::new(v).unwrap()
    }

    proptest! {
        #[test]
        fn representation_property(t in 1usize..=5, m in 1usize..=3, s1: u64, s2: u64, s3: u64) {
            let a = random_perm(t, s1);
            let b = random_perm(t, s2);
            let v = haar_state(m.pow(t as u32), &mut seeded(s3)).unwrap().amplitudes().to_vec();
            let lhs = permute_tensor_factors(&permute_tensor_factors(&v, m, &b).unwrap(), m, &a).unwrap();
            let rhs = permute_tensor_factors(&v, m, &a.compose(&b).unwrap()).unwrap();
            for (x, y) in lhs.iter().zip(&rhs) {
                prop_assert!((x - y).norm() < 1e-12);
            }
        }

        #[test]
        fn group_axioms(t in 1usize..=7, s1: u64, s2: u64, s3: u64) {
            let (a, b, c) = (random_perm(t, s1), random_perm(t, s2), random_perm(t, s3));
            let left = a.compose(&b).unwrap().compose(&c).unwrap();
            let right = a.compose(&b.compose(&c).unwrap()).unwrap();
            prop_assert_eq!(left, right);
            prop_assert!(a.inverse().compose(&a).unwrap().is_identity());
            let covered: usize = a.cycles().iter().map(|c| c.len()).sum();
            prop_assert_eq!(covered, t);
        }
    }
}
