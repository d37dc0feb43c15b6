//! Permutation-symmetrized overlap sums, globally and block by block.

use rand::Rng;
use rayon::prelude::*;

use super::gram::gram;
use super::BoundReport;
use crate::error::{Error, Result};
use crate::perm::{factor_index_map, permute_tensor_factors, Permutation, MAX_ENUM_DEGREE};
use crate::state::{haar_unitary, inner, kron_vec, PureState, C64, ONE, ZERO};

/// Largest tensor-power dimension that is ever materialized.
pub const MAX_CONTRACTION_DIM: usize = 65536;
/// Largest dimension for the contraction cross-check inside [`perm_overlap_sum`].
const CROSS_CHECK_DIM: usize = 4096;
/// Largest number of copies for block-wise sums.
const MAX_BLOCK_COPIES: usize = 4;

fn tensor_power(states: &[PureState]) -> Result<Vec<C64>> {
    let mut total: usize = 1;
    for s in states {
        total = total
            .checked_mul(s.dim())
            .filter(|&v| v <= MAX_CONTRACTION_DIM)
            .ok_or_else(|| Error::SizeCap(format!("tensor power exceeds {MAX_CONTRACTION_DIM}")))?;
    }
    let mut acc = vec![ONE];
    for s in states {
        acc = kron_vec(&acc, s.amplitudes());
    }
    Ok(acc)
}

/// `Σ_{π ∈ S_T} Tr[P(π) ⊗_t ψ_t]`, evaluated as `per(G)`.
///
/// When the tensor power is small the sum is also contracted explicitly and
/// the two values must agree to `1e-8` relative.
pub fn perm_overlap_sum(states: &[PureState]) -> Result<f64> {
    if states.len() > MAX_ENUM_DEGREE {
        return Err(Error::SizeCap(format!("{} copies > {MAX_ENUM_DEGREE}", states.len())));
    }
    let via_perm = gram(states)?.permanent()?;
    let power = states.iter().try_fold(1usize, |acc, s| acc.checked_mul(s.dim()));
    if power.is_some_and(|p| p <= CROSS_CHECK_DIM) {
        let direct = perm_overlap_sum_by_contraction(states)?;
        if (via_perm - direct).abs() > 1e-8 * via_perm.abs().max(1.0) {
            return Err(Error::Inconsistent(format!(
                "permanent {via_perm} vs contraction {direct}"
            )));
        }
    }
    Ok(via_perm)
}

/// The same sum as `Σ_π ⟨Ψ|P(π)|Ψ⟩` with `Ψ = ⊗_t ψ_t`.
pub fn perm_overlap_sum_by_contraction(states: &[PureState]) -> Result<f64> {
    let first = states
        .first()
        .ok_or_else(|| Error::InvalidState("empty collection".into()))?;
    let d = first.dim();
    if states.iter().any(|s| s.dim() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: 0 });
    }
    let psi = tensor_power(states)?;
    let mut acc = ZERO;
    for p in Permutation::all(states.len())? {
        let moved = permute_tensor_factors(&psi, d, &p)?;
        acc += inner(&psi, &moved);
    }
    Ok(acc.re)
}

/// Checks that `parts` partitions `0..n`, returning each factor's block.
pub fn validate_partition(parts: &[Vec<usize>], n: usize) -> Result<Vec<usize>> {
    let mut block = vec![usize::MAX; n];
    for (b, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(Error::InvalidCut("empty block".into()));
        }
        for &f in part {
            if f >= n || block[f] != usize::MAX {
                return Err(Error::InvalidCut(format!(
                    "{parts:?} is not a partition of {n} factors"
                )));
            }
            block[f] = b;
        }
    }
    if block.contains(&usize::MAX) {
        return Err(Error::InvalidCut(format!("{parts:?} does not cover all {n} factors")));
    }
    Ok(block)
}

struct BlockSetup {
    psi: Vec<C64>,
    d: usize,
    t: usize,
    n: usize,
    block_of: Vec<usize>,
}

fn block_setup(states: &[PureState], parts: &[Vec<usize>]) -> Result<BlockSetup> {
    let first = states
        .first()
        .ok_or_else(|| Error::InvalidState("empty collection".into()))?;
    let (d, n) = (first.local_dim(), first.num_factors());
    for s in states {
        if s.local_dim() != d || s.num_factors() != n {
            return Err(Error::DimensionMismatch {
                expected: first.dim(),
                got: s.dim(),
            });
        }
    }
    let t = states.len();
    if t > MAX_BLOCK_COPIES {
        return Err(Error::SizeCap(format!(
            "{t} copies > {MAX_BLOCK_COPIES} for block sums"
        )));
    }
    let block_of = validate_partition(parts, n)?;
    let psi = tensor_power(states)?;
    Ok(BlockSetup { psi, d, t, n, block_of })
}

/// Slot permutation on `T·n` slots that applies `perms[b]` to the copies of
/// every factor in block `b`. Slot `t·n + f` holds factor `f` of copy `t`.
fn slot_permutation(setup: &BlockSetup, perms: &[&Permutation]) -> Permutation {
    let (t, n) = (setup.t, setup.n);
    let mut m = vec![0; t * n];
    for c in 0..t {
        for f in 0..n {
            m[c * n + f] = perms[setup.block_of[f]].apply(c) * n + f;
        }
    }
    Permutation::new(m).expect("slot map is a bijection")
}

/// `Σ_{π_1..π_B} Tr[(⊗̃_b P_b(π_b)) ⊗_t ψ_t]`, summed over every tuple.
pub fn prod_perm_overlap_sum(states: &[PureState], parts: &[Vec<usize>]) -> Result<f64> {
    let setup = block_setup(states, parts)?;
    let perms = Permutation::all(setup.t)?;
    let blocks = parts.len();
    let tuples = perms.len().pow(blocks as u32);
    let terms: Vec<f64> = (0..tuples)
        .into_par_iter()
        .map(|mut k| {
            let mut choice = Vec::with_capacity(blocks);
            for _ in 0..blocks {
                choice.push(&perms[k % perms.len()]);
                k /= perms.len();
            }
            let sigma = slot_permutation(&setup, &choice);
            let map = factor_index_map(setup.d, &sigma);
            let mut acc = ZERO;
            for (x, &y) in map.iter().enumerate() {
                acc += setup.psi[y].conj() * setup.psi[x];
            }
            acc.re
        })
        .collect();
    Ok(terms.iter().sum())
}

/// The same sum as `Π_b T! · ⟨Ψ|Π_sym^{(1)} ⋯ Π_sym^{(B)}|Ψ⟩`, applying each
/// block symmetrizer to the vector in turn.
pub fn prod_perm_overlap_sum_by_symmetrizers(states: &[PureState], parts: &[Vec<usize>]) -> Result<f64> {
    let setup = block_setup(states, parts)?;
    let perms = Permutation::all(setup.t)?;
    let id = Permutation::identity(setup.t);
    let mut v = setup.psi.clone();
    for b in 0..parts.len() {
        let mut next = vec![ZERO; v.len()];
        for p in &perms {
            let choice: Vec<&Permutation> = (0..parts.len()).map(|c| if c == b { p } else { &id }).collect();
            let map = factor_index_map(setup.d, &slot_permutation(&setup, &choice));
            for (x, &y) in map.iter().enumerate() {
                next[y] += v[x];
            }
        }
        v = next;
    }
    Ok(inner(&setup.psi, &v).re)
}

/// `Tr[(⊗̃_b Π_sym) ⊗_t ψ_t] ≥ 1/(T!)^B`.
pub fn sym_overlap_check(states: &[PureState], parts: &[Vec<usize>]) -> Result<BoundReport> {
    let t = states.len();
    let fact: f64 = (1..=t).map(|i| i as f64).product();
    let norm = fact.powi(parts.len() as i32);
    Ok(BoundReport::new(
        prod_perm_overlap_sum(states, parts)? / norm,
        1.0 / norm,
    ))
}

/// Two-factor product states `a_t ⊗ b_t` with orthonormal `{a_t}` and
/// orthonormal `{b_t}`, which meet `1/(T!)²` exactly.
pub fn saturation_check_product_collection<R: Rng + ?Sized>(t: usize, d: usize, rng: &mut R) -> Result<BoundReport> {
    if t == 0 || t > d || d > 4 {
        return Err(Error::Domain(format!("need 1 <= T <= d <= 4, got T={t}, d={d}")));
    }
    let ua = haar_unitary(d, rng)?;
    let ub = haar_unitary(d, rng)?;
    let states: Vec<PureState> = (0..t)
        .map(|c| {
            let a = PureState::normalized(ua.column(c).iter().copied().collect(), d, 1)?;
            let b = PureState::normalized(ub.column(c).iter().copied().collect(), d, 1)?;
            a.kron(&b)
        })
        .collect::<Result<_>>()?;
    sym_overlap_check(&states, &[vec![0], vec![1]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::state::{haar_state, haar_state_on};
    use rand::Rng;

    fn ket(d: usize, i: usize) -> PureState {
        PureState::basis(d, &[i]).unwrap()
    }

    #[test]
    fn overlap_sum_examples() {
        let ortho: Vec<_> = (0..3).map(|i| ket(3, i)).collect();
        assert!((perm_overlap_sum(&ortho).unwrap() - 1.0).abs() < 1e-12);

        let s = haar_state(2, &mut seeded(50)).unwrap();
        let copies = vec![s; 4];
        assert!((perm_overlap_sum(&copies).unwrap() - 24.0).abs() < 1e-9);

        let mut rng = seeded(51);
        for _ in 0..50 {
            let states: Vec<_> = (0..4).map(|_| haar_state(2, &mut rng).unwrap()).collect();
            assert!(perm_overlap_sum(&states).unwrap() >= 2.0 - 1e-9);
        }
    }

    #[test]
    fn permanent_and_contraction_agree() {
        let mut rng = seeded(52);
        for _ in 0..200 {
            let t = rng.gen_range(1..=4);
            let d = rng.gen_range(1..=3);
            let states: Vec<_> = (0..t).map(|_| haar_state(d, &mut rng).unwrap()).collect();
            let a = gram(&states).unwrap().permanent().unwrap();
            let b = perm_overlap_sum_by_contraction(&states).unwrap();
            assert!((a - b).abs() <= 1e-8 * a.abs().max(1.0));
            assert!(a >= 1.0 - 1e-9);
        }
    }

    #[test]
    fn bipartite_base_case_values() {
        // Orthogonal on both sides: only the identity tuple survives.
        let s1 = ket(2, 0).kron(&ket(2, 0)).unwrap();
        let s2 = ket(2, 1).kron(&ket(2, 1)).unwrap();
        let parts = [vec![0], vec![1]];
        assert!((prod_perm_overlap_sum(&[s1.clone(), s2], &parts).unwrap() - 1.0).abs() < 1e-12);

        // Identical A factors, orthogonal B factors: 1 + Tr[ψ_1^A ψ_2^A] = 2.
        let s2 = ket(2, 0).kron(&ket(2, 1)).unwrap();
        assert!((prod_perm_overlap_sum(&[s1, s2], &parts).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn bipartite_base_case_formula() {
        // 1 + Tr[ψ1^A ψ2^A] + Tr[ψ1^B ψ2^B] + |⟨ψ1|ψ2⟩|²
        let mut rng = seeded(53);
        for _ in 0..20 {
            let a = haar_state_on(2, 2, &mut rng).unwrap();
            let b = haar_state_on(2, 2, &mut rng).unwrap();
            let ra = a.partial_trace(&[0]).unwrap();
            let rb = b.partial_trace(&[0]).unwrap();
            let ta = (ra.matrix() * rb.matrix()).trace().re;
            let qa = a.partial_trace(&[1]).unwrap();
            let qb = b.partial_trace(&[1]).unwrap();
            let tb = (qa.matrix() * qb.matrix()).trace().re;
            let full = a.inner(&b).unwrap().norm_sqr();
            let expect = 1.0 + ta + tb + full;
            let got = prod_perm_overlap_sum(&[a, b], &[vec![0], vec![1]]).unwrap();
            assert!((got - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn random_bipartite_sums_are_at_least_one() {
        let mut rng = seeded(54);
        for _ in 0..100 {
            let states: Vec<_> = (0..3).map(|_| haar_state_on(2, 2, &mut rng).unwrap()).collect();
            let parts = [vec![0], vec![1]];
            let v = prod_perm_overlap_sum(&states, &parts).unwrap();
            assert!(v >= 1.0 - 1e-9);
            let w = prod_perm_overlap_sum_by_symmetrizers(&states, &parts).unwrap();
            assert!((v - w).abs() < 1e-9 * v.max(1.0));
        }
    }

    #[test]
    fn tripartite_sums_match_symmetrizers() {
        let mut rng = seeded(55);
        let parts = [vec![0], vec![1], vec![2]];
        for _ in 0..10 {
            let states: Vec<_> = (0..2).map(|_| haar_state_on(2, 3, &mut rng).unwrap()).collect();
            let v = prod_perm_overlap_sum(&states, &parts).unwrap();
            let w = prod_perm_overlap_sum_by_symmetrizers(&states, &parts).unwrap();
            assert!(v >= 1.0 - 1e-9);
            assert!((v - w).abs() < 1e-9);
        }
    }

    #[test]
    fn saturation_values() {
        let mut rng = seeded(56);
        let r = saturation_check_product_collection(2, 2, &mut rng).unwrap();
        assert!((r.lhs - 0.25).abs() < 1e-9);
        let r = saturation_check_product_collection(3, 3, &mut rng).unwrap();
        assert!((r.lhs - 1.0 / 36.0).abs() < 1e-9);
        assert!(saturation_check_product_collection(3, 2, &mut rng).is_err());

        for _ in 0..20 {
            let states: Vec<_> = (0..2).map(|_| haar_state_on(2, 2, &mut rng).unwrap()).collect();
            assert!(sym_overlap_check(&states, &[vec![0], vec![1]]).unwrap().satisfied);
        }
    }

    #[test]
    fn partition_validation() {
        assert!(validate_partition(&[vec![0], vec![0, 1]], 2).is_err());
        assert!(validate_partition(&[vec![0]], 2).is_err());
        assert!(validate_partition(&[vec![1], vec![]], 2).is_err());
        assert_eq!(validate_partition(&[vec![1], vec![0, 2]], 3).unwrap(), vec![1, 0, 1]);
    }

    #[test]
    fn size_caps() {
        let states: Vec<_> = (0..5).map(|_| PureState::zero(2, 2).unwrap()).collect();
        assert!(matches!(
            prod_perm_overlap_sum(&states, &[vec![0], vec![1]]),
            Err(Error::SizeCap(_))
        ));
        let big: Vec<_> = (0..9).map(|_| ket(2, 0)).collect();
        assert!(matches!(perm_overlap_sum(&big), Err(Error::SizeCap(_))));
    }
}
