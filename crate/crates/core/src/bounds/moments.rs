use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::perm::{permutation_matrix, sym_dim, symmetric_projector, Permutation};
use crate::rng::stream;
use crate::state::{haar_state, kron_vec, DensityMatrix, C64, ONE};

const CHUNK: usize = 4096;

/// Frobenius distance between the sample mean of `(ψψ†)^{⊗T}` over Haar
/// `ψ ∈ C^dim` and `Π_sym / sym_dim(dim, T)`.
pub fn haar_moment_deviation(dim: usize, t: usize, samples: usize, seed: u64) -> Result<f64> {
    let side = dim
        .checked_pow(t as u32)
        .filter(|&s| s <= 256)
        .ok_or_else(|| Error::SizeCap(format!("{dim}^{t} > 256 for a dense moment")))?;
    if samples == 0 {
        return Err(Error::Domain("need at least one sample".into()));
    }
    let chunks = samples.div_ceil(CHUNK);
    let parts: Vec<DMatrix<C64>> = (0..chunks)
        .into_par_iter()
        .map(|c| -> Result<DMatrix<C64>> {
            let mut rng = stream(seed, c as u64);
            let mut acc = DMatrix::zeros(side, side);
            for _ in 0..CHUNK.min(samples - c * CHUNK) {
                let psi = haar_state(dim, &mut rng)?;
                let mut v = vec![ONE];
                for _ in 0..t {
                    v = kron_vec(&v, psi.amplitudes());
                }
                let v = nalgebra::DVector::from_vec(v);
                acc.ger(ONE, &v, &v.conjugate(), ONE);
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut mean = DMatrix::zeros(side, side);
    for p in parts {
        mean += p;
    }
    mean /= C64::new(samples as f64, 0.0);
    let target = symmetric_projector(dim, t)? / C64::new(sym_dim(dim as u64, t as u64)? as f64, 0.0);
    Ok((mean - target).norm())
}

/// `|Tr[F (ρ ⊗ σ)] - Tr[ρ σ]|` with `F` the swap of the two copies.
pub fn swap_trick_gap(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let swap = permutation_matrix(a.dim(), &Permutation::transposition(2, 0, 1)?)?;
    let lhs = (swap * a.matrix().kronecker(b.matrix())).trace();
    let rhs = (a.matrix() * b.matrix()).trace();
    Ok((lhs - rhs).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::state::haar_state_on;

    #[test]
    fn moment_deviation_shrinks_with_samples() {
        let small = haar_moment_deviation(4, 2, 1_000, 70).unwrap();
        let large = haar_moment_deviation(4, 2, 100_000, 70).unwrap();
        assert!(large < 0.02, "{large}");
        assert!(large < small);
    }

    #[test]
    fn moment_deviation_caps() {
        assert!(haar_moment_deviation(17, 2, 10, 0).is_err());
        assert!(haar_moment_deviation(2, 2, 0, 0).is_err());
    }

    #[test]
    fn swap_trick_holds() {
        let mut rng = seeded(71);
        for _ in 0..10 {
            let a = haar_state_on(2, 2, &mut rng).unwrap().partial_trace(&[0]).unwrap();
            let b = haar_state_on(2, 2, &mut rng)
                .unwrap()
                .projector()
                .partial_trace(&[1])
                .unwrap();
            assert!(swap_trick_gap(&a, &b).unwrap() < 1e-12);
        }
    }
}
