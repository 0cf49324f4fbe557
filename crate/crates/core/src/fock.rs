//! Truncated phonon-number distributions and their basic characterization.

use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::Result;

/// Construction-time floor: entries in [-1e-12, 0) are clamped to zero,
/// anything more negative is rejected.
pub const NEGATIVITY_FLOOR: f64 = -1e-12;

/// Default tail tolerance below which a distribution counts as complete.
pub const DEFAULT_TAIL_TOL: f64 = 1e-9;

/// Slack allowed on the total probability.
pub const SUM_SLACK: f64 = 1e-9;

/// Probability vector over Fock states |0>..|n_max>.
///
/// Invariants enforced on construction:
/// - every entry is >= 0 (entries down to -1e-12 are clamped to 0);
/// - the total is <= 1 + 1e-9;
/// - the vector is nonempty.
///
/// The vector is intentionally not renormalized: truncation tail mass is
/// physically meaningful and tracked by callers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PhononDistribution {
    probs: Vec<f64>,
}

/// Growth strategy for operations that extend the truncated space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TruncationMode {
    /// Never grow past the initial length; excess mass is a reported loss.
    Fixed,
    /// Grow as needed, trimming suffixes lighter than `tail_tol`, up to
    /// `n_cap`.
    Adaptive,
}

/// Truncation policy: mode, hard cap, and tail tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruncationPolicy {
    pub mode: TruncationMode,
    pub n_cap: usize,
    pub tail_tol: f64,
}

impl TruncationPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.n_cap < 1 {
            return Err(SimError::Domain("truncation n_cap must be >= 1".into()));
        }
        if !(self.tail_tol > 0.0 && self.tail_tol < 1e-3) {
            return Err(SimError::Domain(format!(
                "truncation tail_tol must lie in (0, 1e-3), got {}",
                self.tail_tol
            )));
        }
        Ok(())
    }
}

impl Default for TruncationPolicy {
    /// Adaptive growth, tail tolerance 1e-9, hard cap at 128 Fock states.
    /// Twenty steps from a near-ground thermal state never need more; the cap
    /// guards against runaway growth under misconfigured pulse areas.
    fn default() -> Self {
        TruncationPolicy {
            mode: TruncationMode::Adaptive,
            n_cap: 128,
            tail_tol: DEFAULT_TAIL_TOL,
        }
    }
}

impl PhononDistribution {
    /// Validating constructor. Clamps entries in [-1e-12, 0) to zero and
    /// rejects anything more negative, an empty vector, non-finite entries,
    /// or a total above 1 + 1e-9.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(SimError::Domain(
                "distribution needs at least one entry".into(),
            ));
        }
        let mut clean = probs;
        for (n, p) in clean.iter_mut().enumerate() {
            if !p.is_finite() {
                return Err(SimError::Domain(format!("P({n}) is not finite")));
            }
            if *p < 0.0 {
                if *p < NEGATIVITY_FLOOR {
                    return Err(SimError::Domain(format!(
                        "P({n}) = {p:e} is below the -1e-12 negativity floor"
                    )));
                }
                *p = 0.0;
            }
        }
        let total: f64 = clean.iter().sum();
        if total > 1.0 + SUM_SLACK {
            return Err(SimError::Domain(format!(
                "total probability {total} exceeds 1 + 1e-9"
            )));
        }
        Ok(PhononDistribution { probs: clean })
    }

    /// Fock state |n> on a space truncated at `n_max`.
    pub fn fock(n: usize, n_max: usize) -> Result<Self> {
        if n > n_max {
            return Err(SimError::Domain(format!(
                "fock index {n} exceeds truncation {n_max}"
            )));
        }
        let mut probs = vec![0.0; n_max + 1];
        probs[n] = 1.0;
        Ok(PhononDistribution { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// P(n), zero beyond the truncation.
    pub fn p(&self, n: usize) -> f64 {
        self.probs.get(n).copied().unwrap_or(0.0)
    }

    /// Index of the last stored entry.
    pub fn n_max(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Total stored probability.
    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// True when the stored mass reaches 1 - tail_tol.
    pub fn is_complete(&self, tail_tol: f64) -> bool {
        self.total() >= 1.0 - tail_tol
    }

    /// Mean phonon number and an incompleteness flag.
    ///
    /// The mean is computed over the stored entries only; when the
    /// distribution is missing more than the default tail tolerance the flag
    /// is set instead of failing, since the partial mean is still useful.
    pub fn mean_phonon(&self) -> (f64, bool) {
        let mean = self
            .probs
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum();
        (mean, !self.is_complete(DEFAULT_TAIL_TOL))
    }

    /// Second moment <n^2> over the stored entries.
    pub fn second_moment(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(n, p)| (n as f64) * (n as f64) * p)
            .sum()
    }

    /// Probability-weighted index of the largest entry (first on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (n, p) in self.probs.iter().enumerate() {
            if *p > self.probs[best] {
                best = n;
            }
        }
        best
    }

    /// Shannon entropy in nats; zero entries contribute nothing.
    pub fn shannon_entropy(&self) -> f64 {
        self.probs
            .iter()
            .filter(|p| **p > 0.0)
            .map(|p| -p * p.ln())
            .sum()
    }

    /// Rescale so the total is exactly 1. Errors on an all-zero vector.
    pub fn renormalize(&self) -> Result<Self> {
        let total = self.total();
        if total <= 0.0 {
            return Err(SimError::Domain(
                "cannot renormalize a zero distribution".into(),
            ));
        }
        let probs = self.probs.iter().map(|p| p / total).collect();
        Ok(PhononDistribution { probs })
    }

    /// Drop the longest suffix whose mass is at most `tail_tol`, never below
    /// one entry. Returns the removed mass.
    pub fn trim_tail(&mut self, tail_tol: f64) -> f64 {
        let mut cut = self.probs.len();
        let mut mass = 0.0;
        for i in (0..self.probs.len()).rev() {
            if mass + self.probs[i] > tail_tol {
                break;
            }
            mass += self.probs[i];
            cut = i;
        }
        let cut = cut.max(1);
        let removed: f64 = self.probs[cut..].iter().sum();
        self.probs.truncate(cut);
        removed
    }

    /// Internal constructor for values produced by trusted numerics; clamps
    /// the same way as `from_probs` but panics on structural violations,
    /// which would be crate bugs rather than input errors.
    pub(crate) fn from_computed(probs: Vec<f64>) -> Self {
        PhononDistribution::from_probs(probs)
            .expect("internal numerics produced an invalid distribution")
    }
}

/// Bose-Einstein (thermal) distribution with mean `n_bar`, truncated at
/// `n_max`, not renormalized: P(n) = n_bar^n / (n_bar + 1)^(n + 1).
///
/// Entries are built by iterated ratio multiplication, which is stable for
/// any mean and truncation (no large powers or factorials appear).
pub fn thermal_distribution(n_bar: f64, n_max: usize) -> Result<PhononDistribution> {
    if !(n_bar >= 0.0) {
        return Err(SimError::Domain(format!(
            "thermal mean must be >= 0, got {n_bar}"
        )));
    }
    let mut probs = vec![0.0; n_max + 1];
    let ratio = n_bar / (n_bar + 1.0);
    probs[0] = 1.0 / (n_bar + 1.0);
    for n in 0..n_max {
        probs[n + 1] = probs[n] * ratio;
    }
    Ok(PhononDistribution { probs })
}

/// Poisson distribution with mean `n_bar`, truncated at `n_max`, not
/// renormalized: P(n) = e^(-n_bar) n_bar^n / n!.
pub fn poisson_distribution(n_bar: f64, n_max: usize) -> Result<PhononDistribution> {
    if !(n_bar >= 0.0) {
        return Err(SimError::Domain(format!(
            "poisson mean must be >= 0, got {n_bar}"
        )));
    }
    let mut probs = vec![0.0; n_max + 1];
    probs[0] = (-n_bar).exp();
    for n in 0..n_max {
        probs[n + 1] = probs[n] * n_bar / (n as f64 + 1.0);
    }
    Ok(PhononDistribution { probs })
}

/// Relative entropy between distributions sharing a truncation.
#[derive(Debug, Clone, Copy)]
pub struct RelativeEntropy {
    /// Sum of p ln(p/q) in nats; +infinity when the support condition fails.
    pub nats: f64,
    /// True when some p(n) > 0 has q(n) = 0.
    pub support_violated: bool,
}

/// Kullback-Leibler divergence sum p ln(p/q) in nats.
///
/// Requires equal truncations. A support violation (p > 0 where q = 0) is
/// reported with an infinite value and a flag rather than an error so scans
/// over near-degenerate references stay usable.
pub fn relative_entropy(
    p: &PhononDistribution,
    q: &PhononDistribution,
) -> Result<RelativeEntropy> {
    if p.len() != q.len() {
        return Err(SimError::Domain(format!(
            "relative entropy needs equal truncations, got {} and {}",
            p.n_max(),
            q.n_max()
        )));
    }
    let mut nats = 0.0;
    for (pn, qn) in p.probs().iter().zip(q.probs()) {
        if *pn > 0.0 {
            if *qn <= 0.0 {
                return Ok(RelativeEntropy {
                    nats: f64::INFINITY,
                    support_violated: true,
                });
            }
            nats += pn * (pn / qn).ln();
        }
    }
    Ok(RelativeEntropy {
        nats,
        support_violated: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn thermal_matches_closed_form() {
        let d = thermal_distribution(1.19, 7).unwrap();
        let expected = [
            0.456621, 0.248118, 0.134822, 0.073260, 0.039808, 0.021631, 0.011754, 0.006387,
        ];
        for (n, e) in expected.iter().enumerate() {
            assert_abs_diff_eq!(d.p(n), *e, epsilon = 5e-7);
        }
        // Head mass below n = 8 in closed form: 1 - (1.19/2.19)^8.
        assert_abs_diff_eq!(d.total(), 0.9923998393491215, epsilon = 1e-12);
    }

    #[test]
    fn thermal_head_mass_matches_asymptotic_weight() {
        // The mass below the first fixed point of a pi pulse is the
        // asymptotic occupation of that fixed point.
        let d = thermal_distribution(1.19, 3).unwrap();
        assert_abs_diff_eq!(d.total(), 0.9128210997380758, epsilon = 1e-12);
    }

    #[test]
    fn thermal_ground_state() {
        let d = thermal_distribution(0.0, 7).unwrap();
        assert_eq!(d.p(0), 1.0);
        assert_eq!(d.probs()[1..].iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn thermal_mean_converges() {
        let d = thermal_distribution(1.19, 60).unwrap();
        let (mean, incomplete) = d.mean_phonon();
        assert!(!incomplete);
        assert_abs_diff_eq!(mean, 1.19, epsilon = 1e-6);
    }

    #[test]
    fn thermal_stable_at_large_mean_and_truncation() {
        // Iterated ratios must not overflow or underflow spuriously.
        let d = thermal_distribution(9.0, 400).unwrap();
        assert!(d.probs().iter().all(|p| p.is_finite()));
        let (mean, _) = d.mean_phonon();
        assert_abs_diff_eq!(mean, 9.0, epsilon = 1e-9);
    }

    #[test]
    fn poisson_basics() {
        let d = poisson_distribution(1.0, 0).unwrap();
        assert_abs_diff_eq!(d.p(0), (-1.0f64).exp(), epsilon = 1e-15);
        let d = poisson_distribution(2.0, 40).unwrap();
        let (mean, _) = d.mean_phonon();
        assert_abs_diff_eq!(mean, 2.0, epsilon = 1e-6);
        let d0 = poisson_distribution(0.0, 5).unwrap();
        assert_eq!(d0.p(0), 1.0);
    }

    #[test]
    fn negative_mean_rejected() {
        assert!(thermal_distribution(-0.1, 5).is_err());
        assert!(poisson_distribution(-2.0, 5).is_err());
    }

    #[test]
    fn construction_clamps_and_rejects() {
        let d = PhononDistribution::from_probs(vec![0.5, -0.5e-12, 0.5]).unwrap();
        assert_eq!(d.p(1), 0.0);
        assert!(PhononDistribution::from_probs(vec![0.5, -1e-9]).is_err());
        assert!(PhononDistribution::from_probs(vec![0.7, 0.7]).is_err());
        assert!(PhononDistribution::from_probs(vec![]).is_err());
        assert!(PhononDistribution::from_probs(vec![f64::NAN]).is_err());
    }

    #[test]
    fn entropy_values() {
        assert_eq!(PhononDistribution::from_probs(vec![1.0, 0.0])
            .unwrap()
            .shannon_entropy(), 0.0);
        assert_abs_diff_eq!(
            PhononDistribution::from_probs(vec![0.5, 0.5])
                .unwrap()
                .shannon_entropy(),
            std::f64::consts::LN_2,
            epsilon = 1e-15
        );
        // Bose-Einstein closed form (n+1)ln(n+1) - n ln n at n = 1.
        let d = thermal_distribution(1.0, 60).unwrap();
        assert_abs_diff_eq!(d.shannon_entropy(), 2.0 * std::f64::consts::LN_2, epsilon = 1e-9);
    }

    #[test]
    fn relative_entropy_cases() {
        let d = thermal_distribution(1.0, 40).unwrap();
        let r = relative_entropy(&d, &d).unwrap();
        assert_eq!(r.nats, 0.0);
        assert!(!r.support_violated);

        let p = PhononDistribution::from_probs(vec![1.0, 0.0]).unwrap();
        let q = PhononDistribution::from_probs(vec![0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(
            relative_entropy(&p, &q).unwrap().nats,
            std::f64::consts::LN_2,
            epsilon = 1e-15
        );

        let t = thermal_distribution(1.0, 40).unwrap();
        let c = poisson_distribution(1.0, 40).unwrap();
        let r = relative_entropy(&t, &c).unwrap();
        assert!(r.nats > 0.0);

        let qz = PhononDistribution::from_probs(vec![0.0, 1.0]).unwrap();
        let r = relative_entropy(&p, &qz).unwrap();
        assert!(r.support_violated);
        assert!(r.nats.is_infinite());
    }

    #[test]
    fn renormalize_is_exact_and_idempotent() {
        let d = PhononDistribution::from_probs(vec![0.5, 0.25]).unwrap();
        let r = d.renormalize().unwrap();
        assert_abs_diff_eq!(r.p(0), 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.p(1), 1.0 / 3.0, epsilon = 1e-15);
        let rr = r.renormalize().unwrap();
        assert_eq!(r, rr);
        let t = thermal_distribution(1.19, 7).unwrap().renormalize().unwrap();
        assert_abs_diff_eq!(t.total(), 1.0, epsilon = 1e-15);
        assert!(PhononDistribution::from_probs(vec![0.0])
            .unwrap()
            .renormalize()
            .is_err());
    }

    #[test]
    fn trim_tail_keeps_heavy_entries() {
        let mut d = PhononDistribution::from_probs(vec![0.9, 0.1, 1e-12, 1e-13]).unwrap();
        let removed = d.trim_tail(1e-9);
        assert_eq!(d.len(), 2);
        assert!(removed <= 1e-9);
    }
}
