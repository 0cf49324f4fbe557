//! Quantum non-Gaussianity witness: compares P(n) and the cumulative tail
//! against the envelope attainable by pure displaced squeezed vacuum states.
//!
//! A linear functional P(n) + a * tail(n+1) is concave-closed over mixtures,
//! so its maximum over all Gaussian mixtures equals the maximum over pure
//! Gaussian states. A distribution exceeding that maximum for any slope a
//! therefore cannot be a Gaussian mixture.

use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::fock::PhononDistribution;
use crate::parallel::{map_indexed, map_indexed_seq};
use crate::Result;

/// Completeness required of witness inputs, so the tail term is meaningful.
pub const COMPLETENESS_TOL: f64 = 1e-3;

/// Search-box and grid configuration for the envelope maximization.
///
/// The grid/refinement scheme (coarse scan plus coordinate descent) is this
/// module's choice and deliberately exposed here rather than hard-coded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QngSearchConfig {
    /// Grid points along displacement in [0, d_max].
    pub d_points: usize,
    /// Grid points along squeezing in [-r_max, r_max].
    pub r_points: usize,
    pub d_max: f64,
    pub r_max: f64,
    /// Number of geometrically spaced positive slopes; slope 0 is always
    /// included in addition.
    pub slope_points: usize,
    pub slope_min: f64,
    pub slope_max: f64,
    /// Coordinate-descent step below which refinement stops.
    pub refine_tol: f64,
    /// Excess above the envelope required to claim a violation.
    pub margin_tol: f64,
}

impl Default for QngSearchConfig {
    fn default() -> Self {
        QngSearchConfig {
            d_points: 200,
            r_points: 200,
            d_max: 10.0,
            r_max: 5.0,
            slope_points: 60,
            slope_min: 1e-3,
            slope_max: 1e3,
            refine_tol: 1e-10,
            margin_tol: 1e-9,
        }
    }
}

impl QngSearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_points < 2 || self.r_points < 2 || self.slope_points < 2 {
            return Err(SimError::Domain(
                "QNG search needs at least 2 grid points per axis and 2 slopes".into(),
            ));
        }
        if !(self.d_max > 0.0 && self.r_max > 0.0) {
            return Err(SimError::Domain("QNG search box must be nonempty".into()));
        }
        if !(self.slope_min > 0.0 && self.slope_max > self.slope_min) {
            return Err(SimError::Domain(
                "QNG slope range must satisfy 0 < slope_min < slope_max".into(),
            ));
        }
        if !(self.refine_tol > 0.0 && self.margin_tol >= 0.0) {
            return Err(SimError::Domain(
                "QNG tolerances must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Slope grid: 0 followed by `slope_points` geometrically spaced values.
    pub fn slopes(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.slope_points + 1);
        out.push(0.0);
        let lg0 = self.slope_min.log10();
        let lg1 = self.slope_max.log10();
        for i in 0..self.slope_points {
            let t = i as f64 / (self.slope_points - 1) as f64;
            out.push(10f64.powf(lg0 + (lg1 - lg0) * t));
        }
        out
    }

    fn d_grid(&self) -> Vec<f64> {
        linspace(0.0, self.d_max, self.d_points)
    }

    fn r_grid(&self) -> Vec<f64> {
        linspace(-self.r_max, self.r_max, self.r_points)
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    let step = (b - a) / (n - 1) as f64;
    let mut out: Vec<f64> = (0..n).map(|i| a + i as f64 * step).collect();
    out[n - 1] = b;
    out
}

/// Pure displaced squeezed vacuum, parameterized by a nonnegative real
/// displacement and a real squeezing of either sign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianPureParams {
    pub displacement: f64,
    pub squeezing: f64,
}

impl GaussianPureParams {
    pub fn new(displacement: f64, squeezing: f64) -> Result<Self> {
        let g = GaussianPureParams {
            displacement,
            squeezing,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.displacement >= 0.0 && self.displacement <= 10.0) {
            return Err(SimError::Domain(format!(
                "displacement must lie in [0, 10], got {}",
                self.displacement
            )));
        }
        if !(self.squeezing.abs() <= 5.0) {
            return Err(SimError::Domain(format!(
                "squeezing must lie in [-5, 5], got {}",
                self.squeezing
            )));
        }
        Ok(())
    }
}

/// Fock probabilities P(0..=level) of the pure state, exact normalization
/// through the closed-form ground amplitude. The three-term recurrence is
/// sqrt(m+1) c_{m+1} = d (cosh r + sinh r)/cosh r * c_m - (sinh r / cosh r) sqrt(m) c_{m-1}.
fn pure_gaussian_heads(d: f64, r: f64, level: usize) -> Vec<f64> {
    let ch = r.cosh();
    let sh = r.sinh();
    let p0 = (1.0 / ch) * (-d * d * (1.0 + r.tanh())).exp();
    let f = d * (ch + sh) / ch;
    let g = sh / ch;
    let mut c_prev = 0.0;
    let mut c_cur = p0.sqrt();
    let mut out = Vec::with_capacity(level + 1);
    out.push(c_cur * c_cur);
    for m in 0..level {
        let c_next = (f * c_cur - g * (m as f64).sqrt() * c_prev) / ((m + 1) as f64).sqrt();
        c_prev = c_cur;
        c_cur = c_next;
        out.push(c_cur * c_cur);
    }
    out
}

/// Witness objective P(level) + a * (1 - head mass) for the pure state.
fn witness_objective(d: f64, r: f64, level: usize, a: f64) -> f64 {
    let heads = pure_gaussian_heads(d, r, level);
    let head_sum: f64 = heads.iter().sum();
    heads[level] + a * (1.0 - head_sum)
}

/// Fock probabilities of a displaced squeezed vacuum on |0>..|n_max>.
///
/// Amplitudes come from the three-term recurrence (see above), and the head
/// is normalized numerically. The requested truncation must capture all but
/// 1e-10 of the state; otherwise the error names a sufficient n_max.
pub fn gaussian_fock_probabilities(
    g: &GaussianPureParams,
    n_max: usize,
) -> Result<PhononDistribution> {
    g.validate()?;
    let heads = pure_gaussian_heads(g.displacement, g.squeezing, n_max);
    let head_sum: f64 = heads.iter().sum();
    if head_sum < 1.0 - 1e-10 {
        // Extend the recurrence until the cumulative mass is adequate, to
        // name a sufficient truncation. Inside the parameter box the state
        // always concentrates below ~2e5 phonons.
        const HARD_CAP: usize = 300_000;
        let long = pure_gaussian_heads(g.displacement, g.squeezing, HARD_CAP);
        let mut cum = 0.0;
        for (m, p) in long.iter().enumerate() {
            cum += p;
            if cum >= 1.0 - 1e-10 {
                return Err(SimError::Truncation {
                    msg: format!(
                        "Gaussian state (d = {}, r = {}) keeps {:.3e} of its mass above n_max = {}",
                        g.displacement,
                        g.squeezing,
                        1.0 - head_sum,
                        n_max
                    ),
                    suggested: m,
                });
            }
        }
        return Err(SimError::NonConvergence {
            msg: "Gaussian Fock mass did not concentrate below the hard cap".into(),
            residual: 1.0 - cum,
        });
    }
    let probs = heads.iter().map(|p| p / head_sum).collect();
    PhononDistribution::from_probs(probs)
}

/// One slope of the precomputed envelope: the maximal objective over the
/// Gaussian box and the maximizer location.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EnvelopePoint {
    pub slope: f64,
    pub bound: f64,
    pub d: f64,
    pub r: f64,
}

/// Verdict of the witness at one level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QngVerdict {
    pub violated: bool,
    /// Largest excess over the envelope across all slopes (negative when the
    /// distribution stays below it everywhere).
    pub margin: f64,
    /// True when a slope with positive excess was maximized on the search-box
    /// boundary, so the envelope value there is a lower bound only.
    pub unreliable: bool,
}

/// Envelope of the linear witness at a fixed level: for every slope, the
/// maximum of P_G(level) + a * tail_G(level+1) over the Gaussian box.
#[derive(Debug, Clone, Serialize)]
pub struct QngEnvelope {
    pub level: usize,
    pub points: Vec<EnvelopePoint>,
    pub config: QngSearchConfig,
}

impl QngEnvelope {
    /// Builds the envelope; slopes are maximized independently (in parallel
    /// when the `parallel` feature is on, with identical results).
    pub fn build(level: usize, config: &QngSearchConfig) -> Result<Self> {
        Self::build_inner(level, config, true)
    }

    /// Sequential build, for determinism comparisons and benches.
    pub fn build_seq(level: usize, config: &QngSearchConfig) -> Result<Self> {
        Self::build_inner(level, config, false)
    }

    fn build_inner(level: usize, config: &QngSearchConfig, par: bool) -> Result<Self> {
        config.validate()?;
        let ds = config.d_grid();
        let rs = config.r_grid();
        let cells = ds.len() * rs.len();
        let r_len = rs.len();
        // The grid of (P(level), tail) pairs is shared by all slopes.
        let eval_cell = |idx: usize| {
            let d = ds[idx / r_len];
            let r = rs[idx % r_len];
            let heads = pure_gaussian_heads(d, r, level);
            let head_sum: f64 = heads.iter().sum();
            (heads[level], 1.0 - head_sum)
        };
        let grid: Vec<(f64, f64)> = if par {
            map_indexed(cells, eval_cell)
        } else {
            map_indexed_seq(cells, eval_cell)
        };

        let slopes = config.slopes();
        let cfg = *config;
        let solve_slope = move |si: usize| -> EnvelopePoint {
            let a = slopes[si];
            // Coarse scan, first maximum wins on ties (row-major in d).
            let mut best_idx = 0usize;
            let mut best = f64::NEG_INFINITY;
            for (idx, (pn, tail)) in grid.iter().enumerate() {
                let v = pn + a * tail;
                if v > best {
                    best = v;
                    best_idx = idx;
                }
            }
            let (bound, d, r) = refine(
                ds[best_idx / r_len],
                rs[best_idx % r_len],
                level,
                a,
                &cfg,
            );
            EnvelopePoint {
                slope: a,
                bound,
                d,
                r,
            }
        };
        let n_slopes = config.slope_points + 1;
        let points = if par {
            map_indexed(n_slopes, solve_slope)
        } else {
            map_indexed_seq(n_slopes, solve_slope)
        };
        Ok(QngEnvelope {
            level,
            points,
            config: *config,
        })
    }

    /// Evaluates the witness for a distribution against this envelope.
    pub fn assess(&self, d: &PhononDistribution, margin_tol: f64) -> QngVerdict {
        let n = self.level;
        let total = d.total();
        let head: f64 = (0..=n).map(|m| d.p(m)).sum();
        let pn = d.p(n);
        let tail = total - head;
        let mut margin = f64::NEG_INFINITY;
        let mut unreliable = false;
        for pt in &self.points {
            let excess = pn + pt.slope * tail - pt.bound;
            if excess > margin {
                margin = excess;
            }
            if excess > margin_tol && on_boundary(pt.d, pt.r, &self.config) {
                unreliable = true;
            }
        }
        QngVerdict {
            violated: margin > margin_tol,
            margin,
            unreliable,
        }
    }
}

fn on_boundary(d: f64, r: f64, config: &QngSearchConfig) -> bool {
    // d = 0 is a genuine interior optimum for many slopes, not a wall.
    d >= config.d_max - 1e-8 || r.abs() >= config.r_max - 1e-8
}

/// Coordinate descent from a grid point: four axis neighbors per sweep,
/// accepted greedily; both steps halve when no neighbor improves.
fn refine(
    d0: f64,
    r0: f64,
    level: usize,
    a: f64,
    config: &QngSearchConfig,
) -> (f64, f64, f64) {
    let mut step_d = config.d_max / (config.d_points - 1) as f64;
    let mut step_r = 2.0 * config.r_max / (config.r_points - 1) as f64;
    let (mut d, mut r) = (d0, r0);
    let mut best = witness_objective(d, r, level, a);
    while step_d > config.refine_tol || step_r > config.refine_tol {
        let mut improved = false;
        let candidates = [
            (d + step_d, r),
            (d - step_d, r),
            (d, r + step_r),
            (d, r - step_r),
        ];
        for (dd, rr) in candidates {
            let dd = dd.clamp(0.0, config.d_max);
            let rr = rr.clamp(-config.r_max, config.r_max);
            let v = witness_objective(dd, rr, level, a);
            if v > best {
                best = v;
                d = dd;
                r = rr;
                improved = true;
            }
        }
        if !improved {
            step_d *= 0.5;
            step_r *= 0.5;
        }
    }
    (best, d, r)
}

/// One-shot witness at a level: builds the envelope and assesses `d`.
///
/// The input must be stored completely enough (1e-3) that its tail mass is
/// meaningful, and the level must lie strictly below the truncation.
pub fn qng_witness(
    d: &PhononDistribution,
    level: usize,
    config: &QngSearchConfig,
) -> Result<QngVerdict> {
    if level >= d.n_max() {
        return Err(SimError::Domain(format!(
            "witness level {level} needs a distribution truncated above it (n_max = {})",
            d.n_max()
        )));
    }
    if !d.is_complete(COMPLETENESS_TOL) {
        return Err(SimError::Domain(format!(
            "witness input keeps only {:.6} of its mass; tail term would be unreliable",
            d.total()
        )));
    }
    let env = QngEnvelope::build(level, config)?;
    Ok(env.assess(d, config.margin_tol))
}
