//! Ordinal criticality index.
//!
//! For a cell of consequence counts `r_1..r_K` (rank 1 = catastrophic) with
//! `n = Σ r_l`, the empirical CDF is `F_k = Σ_{l≤k} r_l / n` and the index is
//! `I = (Σ_k F_k − 1) / (K − 1)`, which lies in `[0, 1]` with 1 meaning every
//! report was catastrophic.
//!
//! The variance estimate is
//!
//! ```text
//! Var(I) = 1/(n(K−1)) · [ Σ_{k<K} (K−k)² p_k(1−p_k) − 2 Σ_{k<K} (K−k) p_k Σ_{l<k} (K−l) p_l ]
//! ```
//!
//! with `p_k = r_k / n`. The bracket is `n` times the multinomial variance of
//! `Σ (K−k) p̂_k`, so the exact sampling variance of the index carries a
//! `(K−1)²` divisor instead; [`VarianceNormalization`] selects between them.
//! The default reproduces the published intervals.
//!
//! Every estimator here is evaluated in integer arithmetic up to the final
//! division, so results are exact to one rounding.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ConsequenceLevel, K};

/// Consequence counts of one contingency cell, ordered catastrophic first.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConsequenceFrequency {
    counts: [u64; K],
}

impl ConsequenceFrequency {
    pub const fn new(counts: [u64; K]) -> Self {
        Self { counts }
    }

    pub const fn zero() -> Self {
        Self { counts: [0; K] }
    }

    pub fn counts(&self) -> [u64; K] {
        self.counts
    }

    pub fn count(&self, level: ConsequenceLevel) -> u64 {
        self.counts[level.index()]
    }

    pub fn n(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.n() == 0
    }

    pub fn increment(&mut self, level: ConsequenceLevel) {
        self.counts[level.index()] += 1;
    }

    /// `p_k = r_k / n`.
    pub fn proportions(&self) -> Result<[f64; K]> {
        let n = self.require(1)?;
        Ok(self.counts.map(|c| c as f64 / n as f64))
    }

    fn require(&self, n_min: u64) -> Result<u64> {
        let n = self.n();
        if n == 0 || n < n_min {
            return Err(Error::InsufficientEvidence {
                n,
                required: n_min.max(1),
            });
        }
        Ok(n)
    }

    fn cumulative(&self) -> [u64; K] {
        let mut acc = 0;
        self.counts.map(|c| {
            acc += c;
            acc
        })
    }
}

impl From<[u64; K]> for ConsequenceFrequency {
    fn from(counts: [u64; K]) -> Self {
        Self::new(counts)
    }
}

impl fmt::Display for ConsequenceFrequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = self.counts;
        write!(f, "{{{},{},{},{},{}}}", c[0], c[1], c[2], c[3], c[4])
    }
}

/// Divisor applied to the variance bracket.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceNormalization {
    /// `n(K−1)`, the published form.
    #[default]
    Published,
    /// `n(K−1)²`, the multinomial sampling variance of the index.
    Multinomial,
}

impl VarianceNormalization {
    fn divisor(self) -> i128 {
        let km1 = (K - 1) as i128;
        match self {
            VarianceNormalization::Published => km1,
            VarianceNormalization::Multinomial => km1 * km1,
        }
    }
}

/// Point estimate, spread and interval for one cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalityResult {
    pub point: f64,
    pub variance: f64,
    pub std_dev: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub alpha: f64,
    pub n: u64,
}

/// `F_k` for k = 1..K. The last entry is exactly 1.
pub fn empirical_cdf(freq: &ConsequenceFrequency) -> Result<[f64; K]> {
    let n = freq.require(1)?;
    Ok(freq.cumulative().map(|c| c as f64 / n as f64))
}

/// The criticality index estimate in `[0, 1]`.
pub fn criticality_estimate(freq: &ConsequenceFrequency) -> Result<f64> {
    let n = freq.require(1)?;
    // Σ F_k − 1 = (Σ cum_k − n) / n
    let numerator: u64 = freq.cumulative().iter().sum::<u64>() - n;
    Ok(numerator as f64 / (n as f64 * (K - 1) as f64))
}

/// Variance of the index with the published normalization.
pub fn criticality_variance(freq: &ConsequenceFrequency) -> Result<f64> {
    variance_with(freq, VarianceNormalization::Published)
}

pub fn variance_with(
    freq: &ConsequenceFrequency,
    normalization: VarianceNormalization,
) -> Result<f64> {
    let n = freq.require(1)? as i128;
    let r = freq.counts.map(|c| c as i128);
    let weight = |k: usize| (K - k) as i128; // k is 1-based

    // bracket · n² with p_k = r_k / n
    let mut squares = 0i128;
    let mut cross = 0i128;
    let mut prefix = 0i128; // Σ_{l<k} (K−l) r_l
    for k in 1..K {
        let rk = r[k - 1];
        squares += weight(k) * weight(k) * rk * (n - rk);
        cross += weight(k) * rk * prefix;
        prefix += weight(k) * rk;
    }
    let bracket = squares - 2 * cross;
    debug_assert!(bracket >= 0, "variance bracket must be non-negative");
    let denom = n * n * n * normalization.divisor();
    Ok(bracket.max(0) as f64 / denom as f64)
}

/// Inverse of the standard normal CDF.
///
/// Acklam's rational approximation; relative error below 1.2e-9 over (0, 1).
pub fn normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;

    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -normal_quantile(1.0 - p)
    }
}

/// `Z_{α/2}`, the two-sided critical value.
pub fn two_sided_z(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(normal_quantile(1.0 - alpha / 2.0))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::validation(format!(
            "alpha must lie strictly between 0 and 1, got {alpha}"
        )))
    }
}

/// `(1 − α)` interval around the estimate, clamped into `[0, 1]`.
pub fn confidence_interval(freq: &ConsequenceFrequency, alpha: f64) -> Result<(f64, f64)> {
    let r = RiskEstimator::new(alpha).assess(freq)?;
    Ok((r.ci_lower, r.ci_upper))
}

/// Conservative severity: the upper confidence bound.
pub fn severity_score(freq: &ConsequenceFrequency, alpha: f64) -> Result<f64> {
    confidence_interval(freq, alpha).map(|(_, upper)| upper)
}

/// Estimator settings shared by the engine, the service and the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimator {
    pub alpha: f64,
    /// Minimum number of reports before a cell is scored.
    pub n_min: u64,
    pub normalization: VarianceNormalization,
}

impl Default for RiskEstimator {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            n_min: 1,
            normalization: VarianceNormalization::Published,
        }
    }
}

impl RiskEstimator {
    pub fn new(alpha: f64) -> Self {
        Self {
            alpha,
            ..Self::default()
        }
    }

    pub fn with_n_min(mut self, n_min: u64) -> Self {
        self.n_min = n_min;
        self
    }

    pub fn with_normalization(mut self, normalization: VarianceNormalization) -> Self {
        self.normalization = normalization;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)
    }

    pub fn assess(&self, freq: &ConsequenceFrequency) -> Result<CriticalityResult> {
        self.validate()?;
        let n = freq.require(self.n_min)?;
        let point = criticality_estimate(freq)?;
        let variance = variance_with(freq, self.normalization)?;
        let std_dev = variance.sqrt();
        let half = two_sided_z(self.alpha)? * std_dev;
        Ok(CriticalityResult {
            point,
            variance,
            std_dev,
            ci_lower: (point - half).clamp(0.0, 1.0),
            ci_upper: (point + half).clamp(0.0, 1.0),
            alpha: self.alpha,
            n,
        })
    }

    pub fn severity(&self, freq: &ConsequenceFrequency) -> Result<f64> {
        self.assess(freq).map(|r| r.ci_upper)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const JOB_LOSS: ConsequenceFrequency = ConsequenceFrequency::new([50, 48, 10, 0, 0]);
    const REPUTATION: ConsequenceFrequency = ConsequenceFrequency::new([0, 0, 44, 188, 90]);

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn cdf_worked_cell() {
        let f = empirical_cdf(&JOB_LOSS).unwrap();
        let expected = [25.0 / 54.0, 49.0 / 54.0, 1.0, 1.0, 1.0];
        for (a, b) in f.iter().zip(expected) {
            assert!(close(*a, b, 1e-15));
        }
        assert_eq!(f[4], 1.0);
    }

    #[test]
    fn cdf_degenerate_and_uniform() {
        assert_eq!(
            empirical_cdf(&[0, 0, 0, 0, 7].into()).unwrap(),
            [0.0, 0.0, 0.0, 0.0, 1.0]
        );
        let u = empirical_cdf(&[1, 1, 1, 1, 1].into()).unwrap();
        for (a, b) in u.iter().zip([0.2, 0.4, 0.6, 0.8, 1.0]) {
            assert!(close(*a, b, 1e-15));
        }
    }

    #[test]
    fn empty_cell_is_insufficient_evidence() {
        let zero = ConsequenceFrequency::zero();
        assert!(matches!(
            empirical_cdf(&zero),
            Err(Error::InsufficientEvidence { n: 0, .. })
        ));
        assert!(criticality_estimate(&zero).is_err());
        assert!(criticality_variance(&zero).is_err());
        assert!(confidence_interval(&zero, 0.05).is_err());
    }

    #[test]
    fn estimates() {
        assert!(close(criticality_estimate(&JOB_LOSS).unwrap(), 0.843, 5e-4));
        assert!(close(
            criticality_estimate(&REPUTATION).unwrap(),
            0.214,
            5e-4
        ));
        // 232/322 rather than the misprinted 232/161
        let by_hand = ((0.0 + 0.0 + 44.0 / 322.0 + 232.0 / 322.0 + 1.0) - 1.0) / 4.0;
        assert!(close(
            criticality_estimate(&REPUTATION).unwrap(),
            by_hand,
            1e-15
        ));
        for m in [1, 3, 250] {
            assert_eq!(criticality_estimate(&[m, 0, 0, 0, 0].into()).unwrap(), 1.0);
            assert_eq!(criticality_estimate(&[0, 0, 0, 0, m].into()).unwrap(), 0.0);
        }
    }

    #[test]
    fn variance_values() {
        assert!(close(
            criticality_variance(&JOB_LOSS).unwrap(),
            9.6848e-4,
            1e-7
        ));
        assert!(close(
            criticality_variance(&REPUTATION).unwrap(),
            3.0725e-4,
            1e-7
        ));
        assert_eq!(criticality_variance(&[7, 0, 0, 0, 0].into()).unwrap(), 0.0);
        let published = criticality_variance(&JOB_LOSS).unwrap();
        let multinomial = variance_with(&JOB_LOSS, VarianceNormalization::Multinomial).unwrap();
        assert!(close(published / multinomial, 4.0, 1e-12));
    }

    #[test]
    fn intervals() {
        let (lo, hi) = confidence_interval(&JOB_LOSS, 0.05).unwrap();
        assert!(
            close(lo, 0.782, 1e-3) && close(hi, 0.904, 1e-3),
            "{lo} {hi}"
        );
        let (lo, hi) = confidence_interval(&REPUTATION, 0.05).unwrap();
        assert!(
            close(lo, 0.180, 1e-3) && close(hi, 0.249, 1e-3),
            "{lo} {hi}"
        );
        assert_eq!(
            confidence_interval(&[7, 0, 0, 0, 0].into(), 0.3).unwrap(),
            (1.0, 1.0)
        );
    }

    #[test]
    fn severity_is_the_upper_bound() {
        assert!(close(severity_score(&JOB_LOSS, 0.05).unwrap(), 0.904, 1e-3));
        assert!(close(
            severity_score(&REPUTATION, 0.05).unwrap(),
            0.249,
            1e-3
        ));
        assert_eq!(severity_score(&[0, 0, 0, 0, 1].into(), 0.05).unwrap(), 0.0);
    }

    #[test]
    fn alpha_is_validated() {
        for alpha in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(
                confidence_interval(&JOB_LOSS, alpha),
                Err(Error::Validation(_))
            ));
        }
    }

    #[test]
    fn quantile_accuracy() {
        assert!(close(normal_quantile(0.975), 1.959_963_985, 1e-6));
        assert!(close(normal_quantile(0.995), 2.575_829_304, 1e-6));
        assert!(close(normal_quantile(0.5), 0.0, 1e-12));
        assert!(close(normal_quantile(0.01), -2.326_347_874, 1e-6));
        assert!(close(normal_quantile(1e-6), -4.753_424_309, 1e-6));
        assert!(close(two_sided_z(0.05).unwrap(), 1.959_964, 1e-6));
    }

    #[test]
    fn n_min_gate() {
        let est = RiskEstimator::new(0.05).with_n_min(200);
        assert!(matches!(
            est.assess(&JOB_LOSS),
            Err(Error::InsufficientEvidence {
                n: 108,
                required: 200
            })
        ));
        assert!(est.assess(&REPUTATION).is_ok());
    }

    #[test]
    fn frequency_json_is_a_plain_tuple() {
        assert_eq!(serde_json::to_string(&JOB_LOSS).unwrap(), "[50,48,10,0,0]");
        assert_eq!(JOB_LOSS.to_string(), "{50,48,10,0,0}");
    }
}
