use super::BoundReport;
use crate::error::{Error, Result};

/// Non-negative entries summing to 1 within `1e-9`.
pub fn check_distribution(p: &[f64]) -> Result<()> {
    if p.iter().any(|&x| x < -1e-15 || !x.is_finite()) {
        return Err(Error::InvalidDistribution("negative or non-finite entry".into()));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidDistribution(format!("sums to {s}")));
    }
    Ok(())
}

fn check_pair(p: &[f64], q: &[f64]) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            got: q.len(),
        });
    }
    check_distribution(p)?;
    check_distribution(q)
}

/// `½ Σ |p - q|`.
pub fn tv_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    check_pair(p, q)?;
    Ok((0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()).min(1.0))
}

/// If `p/q ≥ 1 - δ` pointwise then `TV(p, q) ≤ δ`.
///
/// The report reads `lhs ≥ rhs` with `rhs` the TV distance. `lhs` is `δ` when
/// the ratio floor holds; otherwise it is `1 - min p/q`, which bounds TV by
/// the same argument.
pub fn one_sided_tv_check(p: &[f64], q: &[f64], delta: f64) -> Result<BoundReport> {
    check_pair(p, q)?;
    if q.iter().any(|&x| x <= 0.0) {
        return Err(Error::InvalidDistribution("q must be strictly positive".into()));
    }
    let min_ratio = p.iter().zip(q).map(|(a, b)| a / b).fold(f64::INFINITY, f64::min);
    let tv = tv_distance(p, q)?;
    let lhs = if min_ratio >= 1.0 - delta {
        delta
    } else {
        1.0 - min_ratio
    };
    Ok(BoundReport::new(lhs, tv))
}

/// Best success probability when guessing which of two equally likely
/// distributions produced a sample.
pub fn le_cam_success(tv: f64) -> f64 {
    0.5 + 0.5 * tv
}
