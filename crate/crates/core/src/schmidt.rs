//! Schmidt coefficients across cuts and distances to product-state sets.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded;
use crate::state::{check_subset, haar_state, PureState, C64, ZERO};

/// Largest `n` accepted by [`distance_to_bp`].
pub const MAX_BP_FACTORS: usize = 20;

/// Squared Schmidt coefficients across a cut, in descending order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchmidtData {
    pub coefficients: Vec<f64>,
    pub cut: Vec<usize>,
}

impl SchmidtData {
    pub fn lambda_max(&self) -> f64 {
        self.coefficients[0]
    }

    pub fn rank(&self, tol: f64) -> usize {
        self.coefficients.iter().filter(|&&c| c > tol).count()
    }

    /// `Σ λ_i²`, the purity of either reduced state.
    pub fn purity(&self) -> f64 {
        self.coefficients.iter().map(|c| c * c).sum()
    }
}

fn check_cut(cut: &[usize], n: usize) -> Result<Vec<usize>> {
    if cut.is_empty() || cut.len() >= n {
        return Err(Error::InvalidCut(format!(
            "{cut:?} is not a proper non-empty subset of {n} factors"
        )));
    }
    check_subset(cut, n).map_err(|e| Error::InvalidCut(e.to_string()))
}

fn squared_singular_values(m: DMatrix<C64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.singular_values().iter().map(|x| x * x).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Schmidt decomposition of `state` across `cut : complement`.
pub fn schmidt(state: &PureState, cut: &[usize]) -> Result<SchmidtData> {
    let cut = check_cut(cut, state.num_factors())?;
    let coefficients = squared_singular_values(state.cut_matrix(&cut)?);
    Ok(SchmidtData { coefficients, cut })
}

/// Result of a search over bipartite cuts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BpDistance {
    pub distance: f64,
    /// Smaller side of the best cut; on a tie, the side holding factor 0.
    pub cut: Vec<usize>,
    pub lambda_max: f64,
}

/// Canonical side of a cut given as a bitmask over `n` factors.
pub(crate) fn canonical_side(mask: u64, n: usize) -> Vec<usize> {
    let side: Vec<usize> = (0..n).filter(|k| mask >> k & 1 == 1).collect();
    let rest: Vec<usize> = (0..n).filter(|k| mask >> k & 1 == 0).collect();
    match side.len().cmp(&rest.len()) {
        std::cmp::Ordering::Less => side,
        std::cmp::Ordering::Greater => rest,
        std::cmp::Ordering::Equal => {
            if side.contains(&0) {
                side
            } else {
                rest
            }
        }
    }
}

/// Every non-trivial cut up to complement, as the canonical side.
pub fn bipartite_cuts(n: usize) -> Vec<Vec<usize>> {
    if n < 2 {
        return Vec::new();
    }
    // Masks over factors 1..n; factor 0 always sits on the complement.
    (1..(1u64 << (n - 1))).map(|m| canonical_side(m << 1, n)).collect()
}

/// Largest Schmidt coefficient for every cut in [`bipartite_cuts`] order.
pub fn cut_lambdas(state: &PureState) -> Result<Vec<(Vec<usize>, f64)>> {
    let n = state.num_factors();
    if n < 2 {
        return Err(Error::InvalidDimension("need at least two factors".into()));
    }
    if n > MAX_BP_FACTORS {
        return Err(Error::SizeCap(format!(
            "cut enumeration limited to n <= {MAX_BP_FACTORS}"
        )));
    }
    let cuts = bipartite_cuts(n);
    let eval = |cut: &Vec<usize>| -> Result<(Vec<usize>, f64)> {
        let m = state.cut_matrix(cut)?;
        Ok((cut.clone(), squared_singular_values(m)[0]))
    };
    if cuts.len() >= 64 {
        cuts.par_iter().map(eval).collect()
    } else {
        cuts.iter().map(eval).collect()
    }
}

/// `sqrt(1 - max_S λ_1^{(S)})` over all non-trivial cuts.
pub fn distance_to_bp(state: &PureState) -> Result<BpDistance> {
    let lambdas = cut_lambdas(state)?;
    let (mut best_cut, mut best) = (Vec::new(), f64::NEG_INFINITY);
    for (cut, l) in lambdas {
        if l > best + 1e-14 {
            best = l;
            best_cut = cut;
        }
    }
    let lambda_max = best.min(1.0);
    Ok(BpDistance {
        distance: (1.0 - lambda_max).max(0.0).sqrt(),
        cut: best_cut,
        lambda_max,
    })
}

/// Settings for the alternating product-overlap search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MpOptions {
    pub restarts: usize,
    pub iters: usize,
    pub tol: f64,
    /// Seed for the random restarts; the first start is always deterministic.
    pub seed: u64,
}

impl Default for MpOptions {
    fn default() -> Self {
        Self {
            restarts: 16,
            iters: 200,
            tol: 1e-10,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MpDistance {
    pub distance: f64,
    /// Best squared overlap with a fully product state.
    pub max_overlap: f64,
    pub converged: bool,
}

/// Distance to the nearest fully product state. Exact for two factors.
pub fn distance_to_mp(state: &PureState, opts: &MpOptions) -> Result<MpDistance> {
    let n = state.num_factors();
    if n < 2 {
        return Err(Error::InvalidDimension("need at least two factors".into()));
    }
    if n == 2 {
        let lam = schmidt(state, &[0])?.lambda_max().min(1.0);
        return Ok(MpDistance {
            distance: (1.0 - lam).max(0.0).sqrt(),
            max_overlap: lam,
            converged: true,
        });
    }
    distance_to_mp_alternating(state, opts)
}

/// The iterative search on its own, for any `n ≥ 2`.
pub fn distance_to_mp_alternating(state: &PureState, opts: &MpOptions) -> Result<MpDistance> {
    let n = state.num_factors();
    let d = state.local_dim();
    if n < 2 {
        return Err(Error::InvalidDimension("need at least two factors".into()));
    }
    let mut rng = seeded(opts.seed);
    let mut best = (f64::NEG_INFINITY, false);
    for r in 0..opts.restarts.max(1) {
        let start: Vec<Vec<C64>> = if r == 0 {
            (0..n)
                .map(|k| top_eigenvector(&state.partial_trace(&[k])?.matrix().clone()))
                .collect::<Result<_>>()?
        } else {
            (0..n)
                .map(|_| haar_state(d, &mut rng).map(|s| s.amplitudes().to_vec()))
                .collect::<Result<_>>()?
        };
        let (ov, conv) = alternate(state, start, opts.iters, opts.tol);
        if ov > best.0 {
            best = (ov, conv);
        }
    }
    let lam = best.0.min(1.0);
    Ok(MpDistance {
        distance: (1.0 - lam).max(0.0).sqrt(),
        max_overlap: lam,
        converged: best.1,
    })
}

fn top_eigenvector(m: &DMatrix<C64>) -> Result<Vec<C64>> {
    let eig = m.clone().symmetric_eigen();
    let k = eig.eigenvalues.imax();
    Ok(eig.eigenvectors.column(k).iter().copied().collect())
}

/// Kronecker product of conjugated factors, big-endian.
fn conj_kron(factors: &[Vec<C64>]) -> Vec<C64> {
    let mut acc = vec![C64::new(1.0, 0.0)];
    for f in factors {
        let mut next = Vec::with_capacity(acc.len() * f.len());
        for a in &acc {
            for b in f {
                next.push(a * b.conj());
            }
        }
        acc = next;
    }
    acc
}

/// Contracts `state` with every factor except `site`.
fn contract_except(state: &PureState, factors: &[Vec<C64>], site: usize) -> Vec<C64> {
    let d = state.local_dim();
    let prefix = conj_kron(&factors[..site]);
    let suffix = conj_kron(&factors[site + 1..]);
    let stride = suffix.len();
    let amps = state.amplitudes();
    let mut v = vec![ZERO; d];
    for (hi, p) in prefix.iter().enumerate() {
        for (i, vi) in v.iter_mut().enumerate() {
            let base = (hi * d + i) * stride;
            let s: C64 = suffix.iter().zip(&amps[base..base + stride]).map(|(q, a)| q * a).sum();
            *vi += p * s;
        }
    }
    v
}

fn alternate(state: &PureState, mut factors: Vec<Vec<C64>>, iters: usize, tol: f64) -> (f64, bool) {
    let n = factors.len();
    let mut prev = f64::NEG_INFINITY;
    let mut overlap = 0.0;
    for _ in 0..iters {
        for k in 0..n {
            let v = contract_except(state, &factors, k);
            let nrm = DVector::from_column_slice(&v).norm();
            overlap = nrm * nrm;
            if nrm > 0.0 {
                factors[k] = v.iter().map(|z| z / nrm).collect();
            }
        }
        if overlap - prev < tol {
            return (overlap, true);
        }
        prev = overlap;
    }
    (overlap, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::state::{haar_state_on, haar_unitary};
    use approx::assert_abs_diff_eq;

    fn real(v: &[f64], d: usize, n: usize) -> PureState {
        PureState::normalized(v.iter().map(|&x| C64::new(x, 0.0)).collect(), d, n).unwrap()
    }

    fn ghz3() -> PureState {
        let mut v = vec![0.0; 8];
        v[0] = 1.0;
        v[7] = 1.0;
        real(&v, 2, 3)
    }

    fn w3() -> PureState {
        let mut v = vec![0.0; 8];
        v[1] = 1.0;
        v[2] = 1.0;
        v[4] = 1.0;
        real(&v, 2, 3)
    }

    #[test]
    fn schmidt_examples() {
        let bell = real(&[1.0, 0.0, 0.0, 1.0], 2, 2);
        let s = schmidt(&bell, &[0]).unwrap();
        assert_abs_diff_eq!(s.coefficients[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(s.coefficients[1], 0.5, epsilon = 1e-12);

        let e = real(&[0.8, 0.0, 0.0, 0.6], 2, 2);
        let s = schmidt(&e, &[0]).unwrap();
        assert_abs_diff_eq!(s.coefficients[0], 0.64, epsilon = 1e-12);
        assert_abs_diff_eq!(s.coefficients[1], 0.36, epsilon = 1e-12);

        let prod = PureState::basis(3, &[1, 2, 0]).unwrap();
        let s = schmidt(&prod, &[1]).unwrap();
        assert_abs_diff_eq!(s.lambda_max(), 1.0, epsilon = 1e-12);
        assert_eq!(s.rank(1e-12), 1);
    }

    #[test]
    fn schmidt_rejects_trivial_cuts() {
        let s = ghz3();
        assert!(matches!(schmidt(&s, &[]), Err(Error::InvalidCut(_))));
        assert!(matches!(schmidt(&s, &[0, 1, 2]), Err(Error::InvalidCut(_))));
    }

    #[test]
    fn schmidt_purity_matches_marginal_purity() {
        let mut rng = seeded(11);
        for n in 2..=4 {
            for d in 2..=3 {
                let psi = haar_state_on(d, n, &mut rng).unwrap();
                for cut in bipartite_cuts(n) {
                    let s = schmidt(&psi, &cut).unwrap();
                    let sum: f64 = s.coefficients.iter().sum();
                    assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-10);
                    let p = psi.partial_trace(&cut).unwrap().purity();
                    assert_abs_diff_eq!(p, s.purity(), epsilon = 1e-10);
                    let lo = 1.0 / (d.pow(cut.len() as u32).min(d.pow((n - cut.len()) as u32))) as f64;
                    assert!(s.lambda_max() >= lo - 1e-10 && s.lambda_max() <= 1.0 + 1e-10);
                }
            }
        }
    }

    #[test]
    fn cut_enumeration_counts() {
        assert_eq!(bipartite_cuts(2), vec![vec![0]]);
        assert_eq!(bipartite_cuts(3).len(), 3);
        assert_eq!(bipartite_cuts(5).len(), 15);
        for cut in bipartite_cuts(4) {
            assert!(cut.len() < 2 || (cut.len() == 2 && cut.contains(&0)));
        }
    }

    #[test]
    fn bp_distance_examples() {
        let g = distance_to_bp(&ghz3()).unwrap();
        assert_abs_diff_eq!(g.distance, 0.5f64.sqrt(), epsilon = 1e-12);

        let bell = real(&[1.0, 0.0, 0.0, 1.0], 2, 2);
        let zero = PureState::basis(2, &[0]).unwrap();
        let s = bell.kron(&zero).unwrap();
        let r = distance_to_bp(&s).unwrap();
        assert_abs_diff_eq!(r.distance, 0.0, epsilon = 1e-7);
        assert_eq!(r.cut, vec![2]);

        assert!(distance_to_bp(&zero).is_err());
    }

    #[test]
    fn mp_distance_examples() {
        let opts = MpOptions::default();
        let prod = PureState::basis(2, &[0, 1, 1]).unwrap();
        assert_abs_diff_eq!(distance_to_mp(&prod, &opts).unwrap().distance, 0.0, epsilon = 1e-7);

        let bell = real(&[1.0, 0.0, 0.0, 1.0], 2, 2);
        assert_abs_diff_eq!(
            distance_to_mp(&bell, &opts).unwrap().distance,
            0.5f64.sqrt(),
            epsilon = 1e-12
        );

        let w = distance_to_mp(&w3(), &opts).unwrap();
        assert_abs_diff_eq!(w.max_overlap, 4.0 / 9.0, epsilon = 1e-8);
        assert!(w.converged);
    }

    #[test]
    fn two_factor_iteration_agrees_with_svd() {
        let mut rng = seeded(12);
        let opts = MpOptions::default();
        for d in 2..=4 {
            for _ in 0..20 {
                let psi = haar_state_on(d, 2, &mut rng).unwrap();
                let exact = distance_to_mp(&psi, &opts).unwrap().distance;
                let iter = distance_to_mp_alternating(&psi, &opts).unwrap().distance;
                assert!((exact - iter).abs() < 1e-8, "{exact} vs {iter}");
            }
        }
    }

    #[test]
    fn mp_distance_dominates_bp_distance() {
        let mut rng = seeded(13);
        let opts = MpOptions::default();
        for _ in 0..20 {
            let psi = haar_state_on(2, 4, &mut rng).unwrap();
            let mp = distance_to_mp(&psi, &opts).unwrap().distance;
            let bp = distance_to_bp(&psi).unwrap().distance;
            assert!(mp >= bp - 1e-9);
        }
    }

    #[test]
    fn local_unitaries_leave_mp_distance_unchanged() {
        let mut rng = seeded(14);
        let opts = MpOptions::default();
        for _ in 0..5 {
            let psi = haar_state_on(2, 3, &mut rng).unwrap();
            let mut rot = psi.clone();
            for site in 0..3 {
                rot = rot.apply_local(site, &haar_unitary(2, &mut rng).unwrap()).unwrap();
            }
            let a = distance_to_mp(&psi, &opts).unwrap().distance;
            let b = distance_to_mp(&rot, &opts).unwrap().distance;
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }
}
