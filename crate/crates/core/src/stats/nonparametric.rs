use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use super::StatsError;
use crate::scalar::Scalar;

pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

/// Largest pooled sample for which the Mann–Whitney null distribution is
/// enumerated exactly (tie-free samples only).
pub const EXACT_MWU_MAX_N: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestMethod {
    /// H with tie correction, chi-square with k-1 degrees of freedom.
    KruskalWallisChiSquare,
    /// Exact permutation distribution of U.
    MannWhitneyExact,
    /// Normal approximation, tie-corrected variance, continuity correction.
    MannWhitneyNormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult<T> {
    pub statistic: T,
    pub p_value: T,
    pub method: TestMethod,
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks<T: Scalar>(values: &[T]) -> Vec<T> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite"));
    let mut ranks = vec![T::zero(); values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i..j hold ranks i+1..=j
        let avg = T::from_count((i + 1 + j) as u64) * T::half();
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

/// Sizes of the tie groups in a sample.
fn tie_sizes<T: Scalar>(values: &[T]) -> Vec<u64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let mut out = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        out.push((j - i) as u64);
        i = j;
    }
    out
}

fn tie_term(ties: &[u64]) -> f64 {
    ties.iter().map(|&t| (t * t * t - t) as f64).sum()
}

fn check_finite<T: Scalar>(groups: &[&[T]]) -> Result<(), StatsError> {
    if groups.iter().flat_map(|g| g.iter()).any(|x| !x.is_finite()) {
        Err(StatsError::NonFinite)
    } else {
        Ok(())
    }
}

/// Kruskal–Wallis H test across `k >= 2` groups.
pub fn kruskal_wallis<T: Scalar, G: AsRef<[T]>>(groups: &[G]) -> Result<TestResult<T>, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::TooFew {
            what: "groups",
            needed: 2,
            got: groups.len(),
        });
    }
    let slices: Vec<&[T]> = groups.iter().map(AsRef::as_ref).collect();
    if let Some(i) = slices.iter().position(|g| g.is_empty()) {
        return Err(StatsError::EmptySample(i));
    }
    check_finite(&slices)?;

    let pooled: Vec<T> = slices.iter().flat_map(|g| g.iter().copied()).collect();
    let n = pooled.len() as f64;
    let ties = tie_term(&tie_sizes(&pooled));
    let correction = 1.0 - ties / (n * n * n - n);
    if correction <= 0.0 {
        return Err(StatsError::AllTied);
    }
    let ranks = average_ranks(&pooled);
    let mut offset = 0;
    let mut sum_sq = 0.0;
    for g in &slices {
        let r: f64 = ranks[offset..offset + g.len()].iter().map(|r| r.to_f64_lossy()).sum();
        sum_sq += r * r / g.len() as f64;
        offset += g.len();
    }
    let h = ((12.0 / (n * (n + 1.0)) * sum_sq - 3.0 * (n + 1.0)) / correction).max(0.0);
    let dof = (slices.len() - 1) as f64;
    let p = ChiSquared::new(dof).expect("dof > 0").sf(h).clamp(0.0, 1.0);
    Ok(TestResult {
        statistic: T::from_f64_lossy(h),
        p_value: T::from_f64_lossy(p),
        method: TestMethod::KruskalWallisChiSquare,
    })
}

/// Exact `P(U <= u)` by enumerating every assignment of `nx` of the pooled
/// ranks `1..=nx+ny` to the first sample.
fn exact_u_cdf(nx: usize, ny: usize, u: f64) -> f64 {
    let n = nx + ny;
    let offset = (nx * (nx + 1) / 2) as u64;
    let (mut hits, mut total) = (0u64, 0u64);
    for mask in 0u32..(1u32 << n) {
        if mask.count_ones() as usize != nx {
            continue;
        }
        let rank_sum: u64 = (0..n).filter(|b| mask & (1 << b) != 0).map(|b| b as u64 + 1).sum();
        total += 1;
        if ((rank_sum - offset) as f64) <= u {
            hits += 1;
        }
    }
    hits as f64 / total as f64
}

/// Mann–Whitney U test. `U` is `min(U_x, U_y)`. The one-tailed p-value is
/// the probability of a `U` at least this small in the observed direction;
/// the two-tailed value doubles it (capped at 1).
pub fn mann_whitney_u<T: Scalar>(x: &[T], y: &[T], two_tailed: bool) -> Result<TestResult<T>, StatsError> {
    if x.is_empty() {
        return Err(StatsError::EmptySample(0));
    }
    if y.is_empty() {
        return Err(StatsError::EmptySample(1));
    }
    check_finite(&[x, y])?;
    let (nx, ny) = (x.len(), y.len());
    let pooled: Vec<T> = x.iter().chain(y).copied().collect();
    let ranks = average_ranks(&pooled);
    let rx: f64 = ranks[..nx].iter().map(|r| r.to_f64_lossy()).sum();
    let ux = rx - (nx * (nx + 1)) as f64 / 2.0;
    let u = ux.min((nx * ny) as f64 - ux);
    let ties = tie_sizes(&pooled);
    let tails = if two_tailed { 2.0 } else { 1.0 };

    let (p, method) = if nx + ny <= EXACT_MWU_MAX_N && ties.iter().all(|&t| t == 1) {
        (tails * exact_u_cdf(nx, ny, u), TestMethod::MannWhitneyExact)
    } else {
        let n = (nx + ny) as f64;
        let mu = (nx * ny) as f64 / 2.0;
        let var = (nx * ny) as f64 / 12.0 * ((n + 1.0) - tie_term(&ties) / (n * (n - 1.0)));
        let p = if var <= 0.0 {
            1.0
        } else {
            let z = ((u - mu).abs() - 0.5) / var.sqrt();
            tails * Normal::standard().sf(z)
        };
        (p, TestMethod::MannWhitneyNormal)
    };
    Ok(TestResult {
        statistic: T::from_f64_lossy(u),
        p_value: T::from_f64_lossy(p.clamp(0.0, 1.0)),
        method,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseComparison<T> {
    pub a: String,
    pub b: String,
    pub result: TestResult<T>,
    /// Bonferroni-adjusted per-pair level.
    pub threshold: T,
    pub significant: bool,
}

/// Two-tailed Mann–Whitney on every pair of groups, significant when
/// `p < 0.05 / pairs`.
pub fn pairwise_posthoc<T: Scalar, G: AsRef<[T]>>(
    groups: &[(String, G)],
) -> Result<Vec<PairwiseComparison<T>>, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::TooFew {
            what: "groups",
            needed: 2,
            got: groups.len(),
        });
    }
    let pairs = groups.len() * (groups.len() - 1) / 2;
    let threshold = SIGNIFICANCE_LEVEL / pairs as f64;
    let mut out = Vec::with_capacity(pairs);
    for i in 0..groups.len() {
        for j in i + 1..groups.len() {
            let result = mann_whitney_u(groups[i].1.as_ref(), groups[j].1.as_ref(), true)?;
            out.push(PairwiseComparison {
                a: groups[i].0.clone(),
                b: groups[j].0.clone(),
                significant: result.p_value.to_f64_lossy() < threshold,
                threshold: T::from_f64_lossy(threshold),
                result,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 30.0]), vec![1.5, 3.0, 1.5, 4.0]);
    }

    #[test]
    fn kruskal_wallis_separated_groups() {
        let r = kruskal_wallis(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0], vec![7.0, 8.0, 9.0]]).unwrap();
        assert!((r.statistic - 7.2f64).abs() < 1e-9);
        // chi-square sf(7.2, 2) = exp(-3.6)
        assert!((r.p_value - (-3.6f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn kruskal_wallis_identical_and_degenerate() {
        let r = kruskal_wallis(&[vec![1.0f64, 2.0, 3.0], vec![1.0, 2.0, 3.0]]).unwrap();
        assert!(r.statistic.abs() < 1e-12);
        assert!((r.p_value - 1.0f64).abs() < 1e-9);
        assert_eq!(
            kruskal_wallis(&[vec![5.0f64, 5.0], vec![5.0]]),
            Err(StatsError::AllTied)
        );
        assert!(matches!(
            kruskal_wallis(&[vec![1.0f64]]),
            Err(StatsError::TooFew { .. })
        ));
        assert_eq!(kruskal_wallis(&[vec![1.0f64], vec![]]), Err(StatsError::EmptySample(1)));
    }

    #[test]
    fn mann_whitney_exact_small() {
        let r = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0], true).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.method, TestMethod::MannWhitneyExact);
        assert!((r.p_value - 1.0f64 / 3.0).abs() < 1e-12);
        let one = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0], false).unwrap();
        assert!((one.p_value - 1.0f64 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn mann_whitney_identical_samples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let r = mann_whitney_u(&x, &x, true).unwrap();
        assert_eq!(r.statistic, 8.0);
        assert_eq!(r.method, TestMethod::MannWhitneyNormal);
        assert!((r.p_value - 1.0f64).abs() < 1e-12);
        assert_eq!(
            mann_whitney_u::<f64>(&[], &[1.0], true),
            Err(StatsError::EmptySample(0))
        );
    }

    #[test]
    fn posthoc_threshold_for_five_groups() {
        let groups: Vec<(String, Vec<f64>)> = (0..5)
            .map(|g| (format!("g{g}"), (0..6).map(|i| (i * 5 + g) as f64).collect()))
            .collect();
        let pairs = pairwise_posthoc(&groups).unwrap();
        assert_eq!(pairs.len(), 10);
        assert!(pairs.iter().all(|p| (p.threshold - 0.005).abs() < 1e-15));
    }
}
