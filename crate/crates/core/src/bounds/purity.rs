use crate::error::{Error, Result};
use crate::state::{PureState, State};

/// Largest `n` for the subset sum in [`p_test`].
pub const MAX_PTEST_FACTORS: usize = 12;

/// `1 - (4/n) ε² (1 - ε²)`: the largest average single-site purity an
/// `ε`-far state can have.
pub fn avg_purity_bound(eps: f64, n: usize) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("eps = {eps} not in (0, 1)")));
    }
    if n < 2 {
        return Err(Error::Domain(format!("n = {n} < 2")));
    }
    let e2 = eps * eps;
    Ok(1.0 - 4.0 / n as f64 * e2 * (1.0 - e2))
}

/// `(1/n) Σ_i Tr[ψ_i²]` over single-site marginals.
pub fn average_marginal_purity(state: &PureState) -> Result<f64> {
    let n = state.num_factors();
    let mut acc = 0.0;
    for i in 0..n {
        acc += state.marginal_purity(&[i])?;
    }
    Ok(acc / n as f64)
}

/// `2^{-n} Σ_{S ⊆ [n]} Tr[ρ_S²]`, with the empty marginal counted as 1.
pub fn p_test(state: &State) -> Result<f64> {
    let n = state.num_factors();
    if n > MAX_PTEST_FACTORS {
        return Err(Error::SizeCap(format!("n = {n} > {MAX_PTEST_FACTORS}")));
    }
    let mut acc = 1.0;
    for mask in 1u32..(1 << n) {
        let subset: Vec<usize> = (0..n).filter(|k| mask >> k & 1 == 1).collect();
        acc += state.marginal_purity(&subset)?;
    }
    Ok(acc / (1u64 << n) as f64)
}
