//! Matrix permanents: Ryser's formula with Gray-code subset order, plus a
//! direct sum over permutations as an oracle.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::state::{C64, ONE, ZERO};

/// Largest side accepted by [`permanent`].
pub const MAX_RYSER_SIDE: usize = 30;
/// Largest side accepted by [`brute_force_permanent`].
pub const MAX_BRUTE_SIDE: usize = 9;

/// Sides at or above this split the subset sum across threads.
const PARALLEL_SIDE: usize = 16;
/// Subsets per parallel chunk, as a power of two.
const CHUNK_BITS: usize = 12;

fn check_square(a: &DMatrix<C64>) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(Error::NotSquare(a.nrows(), a.ncols()));
    }
    Ok(a.nrows())
}

/// `per(A) = Σ_σ Π_i A[i, σ(i)]`.
pub fn permanent(a: &DMatrix<C64>) -> Result<C64> {
    let n = check_square(a)?;
    if n > MAX_RYSER_SIDE {
        return Err(Error::SizeCap(format!("permanent of side {n} > {MAX_RYSER_SIDE}")));
    }
    if n == 0 {
        return Ok(ONE);
    }
    let total: u64 = 1 << n;
    let sum = if n < PARALLEL_SIDE {
        ryser_range(a, 0, total)
    } else {
        let chunk = 1u64 << CHUNK_BITS;
        let parts: Vec<C64> = (0..total / chunk)
            .into_par_iter()
            .map(|c| ryser_range(a, c * chunk, (c + 1) * chunk))
            .collect();
        // Fixed-order reduction keeps the result independent of scheduling.
        parts.into_iter().fold(ZERO, |acc, x| acc + x)
    };
    Ok(if n % 2 == 1 { -sum } else { sum })
}

/// `Σ_k (-1)^{|S_k|} Π_i rowsum_i(S_k)` for Gray-code steps `k ∈ [start, end)`,
/// where `S_k` is the subset encoded by `k ^ (k >> 1)`.
fn ryser_range(a: &DMatrix<C64>, start: u64, end: u64) -> C64 {
    let n = a.nrows();
    let gray = start ^ (start >> 1);
    let mut rows = vec![ZERO; n];
    for j in 0..n {
        if gray >> j & 1 == 1 {
            for (i, r) in rows.iter_mut().enumerate() {
                *r += a[(i, j)];
            }
        }
    }
    let mut size = gray.count_ones() as usize;
    let mut acc = ZERO;
    let mut k = start;
    loop {
        if k != 0 {
            let prod: C64 = rows.iter().product();
            if size.is_multiple_of(2) {
                acc += prod;
            } else {
                acc -= prod;
            }
        }
        k += 1;
        if k >= end {
            break;
        }
        // Step k flips the column at the lowest set bit of k.
        let j = k.trailing_zeros() as usize;
        let now = k ^ (k >> 1);
        if now >> j & 1 == 1 {
            for (i, r) in rows.iter_mut().enumerate() {
                *r += a[(i, j)];
            }
            size += 1;
        } else {
            for (i, r) in rows.iter_mut().enumerate() {
                *r -= a[(i, j)];
            }
            size -= 1;
        }
    }
    acc
}

/// Direct sum over all `n!` permutations.
pub fn brute_force_permanent(a: &DMatrix<C64>) -> Result<C64> {
    let n = check_square(a)?;
    if n > MAX_BRUTE_SIDE {
        return Err(Error::SizeCap(format!(
            "brute-force permanent of side {n} > {MAX_BRUTE_SIDE}"
        )));
    }
    fn rec(a: &DMatrix<C64>, row: usize, used: &mut [bool], prod: C64) -> C64 {
        if row == a.nrows() {
            return prod;
        }
        let mut acc = ZERO;
        for j in 0..a.ncols() {
            if !used[j] {
                used[j] = true;
                acc += rec(a, row + 1, used, prod * a[(row, j)]);
                used[j] = false;
            }
        }
        acc
    }
    Ok(rec(a, 0, &mut vec![false; n], ONE))
}
