//! Inversion of Rabi traces to phonon distributions: constrained least
//! squares on the probability simplex, with multi-start projected-gradient
//! iteration and a support-restricted exact polish.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{perturb_trace, DecayModel, NoiseKind, RabiTrace};
use crate::error::SimError;
use crate::fock::{thermal_distribution, PhononDistribution};
use crate::math::project_simplex;
use crate::parallel::{map_indexed, map_indexed_seq};
use crate::Result;

const MAX_ITERS: usize = 20_000;
const X_TOL: f64 = 1e-14;

/// Central fit plus Monte-Carlo resampling statistics.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub distribution: PhononDistribution,
    /// Root-mean-square residual of the central fit.
    pub residual_rms: f64,
    /// Successful resample fits (failures are excluded).
    pub mc_samples: Vec<PhononDistribution>,
    /// Per-level sample standard deviation across `mc_samples`.
    pub per_bin_sigma: Vec<f64>,
}

fn design_matrix(trace: &RabiTrace, m: &DecayModel, n_max: usize) -> DMatrix<f64> {
    DMatrix::from_fn(trace.len(), n_max + 1, |row, n| {
        let t = trace.times[row];
        let s = (m.omega(n) * t).sin();
        s * s * (-m.gamma(n) * t).exp()
    })
}

/// The eight fixed starting points: uniform, the four lowest Fock states,
/// two renormalized thermal shapes, and a mid-band bump. Multi-start from
/// corners plus smooth interiors keeps the nonconvex-looking landscape
/// (it is convex, but support identification benefits) deterministic.
fn initializations(dim: usize) -> Vec<Vec<f64>> {
    let mut inits = Vec::with_capacity(8);
    inits.push(vec![1.0 / dim as f64; dim]);
    for k in 0..4usize {
        let mut v = vec![0.0; dim];
        v[k.min(dim - 1)] = 1.0;
        inits.push(v);
    }
    for n_bar in [1.0, 3.0] {
        let t = thermal_distribution(n_bar, dim - 1)
            .expect("positive mean")
            .renormalize()
            .expect("nonzero");
        inits.push(t.probs().to_vec());
    }
    let bump: Vec<f64> = (0..dim)
        .map(|n| (-0.5 * (n as f64 - 2.0) * (n as f64 - 2.0)).exp())
        .collect();
    let total: f64 = bump.iter().sum();
    inits.push(bump.iter().map(|b| b / total).collect());
    inits
}

fn sse(mat: &DMatrix<f64>, b: &DVector<f64>, x: &DVector<f64>) -> f64 {
    (mat * x - b).norm_squared()
}

/// Projected accelerated gradient descent with objective-increase restarts.
/// Returns the iterate, its squared residual, and whether the step-size
/// stopping rule fired before the iteration cap.
fn fista(
    mat: &DMatrix<f64>,
    mt: &DMatrix<f64>,
    b: &DVector<f64>,
    x0: &[f64],
    lipschitz: f64,
) -> (DVector<f64>, f64, bool) {
    let step = 1.0 / lipschitz;
    let mut x = DVector::from_column_slice(x0);
    let mut x_prev = x.clone();
    let mut t = 1.0f64;
    let mut f_x = sse(mat, b, &x);
    let mut converged = false;
    for _ in 0..MAX_ITERS {
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        let y = &x + (&x - &x_prev) * beta;
        let grad = mt * (mat * &y - b) * 2.0;
        let cand = DVector::from_vec(project_simplex((y - grad * step).as_slice()));
        let f_cand = sse(mat, b, &cand);
        if f_cand > f_x {
            // Momentum overshot: fall back to a plain descent step from x.
            let grad = mt * (mat * &x - b) * 2.0;
            let cand = DVector::from_vec(project_simplex((&x - grad * step).as_slice()));
            f_x = sse(mat, b, &cand);
            x_prev = std::mem::replace(&mut x, cand);
            t = 1.0;
        } else {
            f_x = f_cand;
            x_prev = std::mem::replace(&mut x, cand);
            t = t_next;
        }
        let dx = x
            .iter()
            .zip(x_prev.iter())
            .fold(0.0f64, |a, (u, v)| a.max((u - v).abs()));
        if dx < X_TOL {
            converged = true;
            break;
        }
    }
    (x, f_x, converged)
}

/// Equality-constrained least squares on the positive support of `x`:
/// solve the KKT system of min |M_S p - b|^2 with sum(p) = 1, and accept
/// the solution when it stays (numerically) nonnegative and lowers the
/// residual.
fn polish(
    mat: &DMatrix<f64>,
    b: &DVector<f64>,
    x: &DVector<f64>,
    f_x: f64,
) -> Option<(DVector<f64>, f64)> {
    let support: Vec<usize> = (0..x.len()).filter(|&i| x[i] > 1e-10).collect();
    let s = support.len();
    if s == 0 {
        return None;
    }
    let m_s = mat.select_columns(support.iter());
    let mut kkt = DMatrix::<f64>::zeros(s + 1, s + 1);
    kkt.view_mut((0, 0), (s, s))
        .copy_from(&(m_s.transpose() * &m_s * 2.0));
    for i in 0..s {
        kkt[(i, s)] = 1.0;
        kkt[(s, i)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(s + 1);
    rhs.rows_mut(0, s).copy_from(&(m_s.transpose() * b * 2.0));
    rhs[s] = 1.0;
    let sol = kkt.lu().solve(&rhs)?;
    if (0..s).any(|i| sol[i] < -1e-12) {
        return None;
    }
    let mut p = DVector::<f64>::zeros(x.len());
    let mut total = 0.0;
    for (k, &idx) in support.iter().enumerate() {
        let v = sol[k].max(0.0);
        p[idx] = v;
        total += v;
    }
    if total <= 0.0 {
        return None;
    }
    p /= total;
    let f_p = sse(mat, b, &p);
    if f_p < f_x {
        Some((p, f_p))
    } else {
        None
    }
}

fn fit_core(
    trace: &RabiTrace,
    m: &DecayModel,
    n_max: usize,
) -> Result<(PhononDistribution, f64)> {
    trace.validate()?;
    m.validate()?;
    let points = trace.len();
    if ((n_max + 1) * 3) > points {
        return Err(SimError::Domain(format!(
            "{points} points cannot constrain {} levels; need at least 3 per level",
            n_max + 1
        )));
    }
    if trace.span() < m.flop_period() {
        return Err(SimError::Domain(format!(
            "trace spans {:.3e} s but one full flop takes {:.3e} s",
            trace.span(),
            m.flop_period()
        )));
    }
    let mat = design_matrix(trace, m, n_max);
    let mt = mat.transpose();
    let b = DVector::from_column_slice(&trace.p_excited);
    let lipschitz = 2.0 * mat.norm_squared();

    let mut best: Option<(DVector<f64>, f64)> = None;
    let mut any_converged = false;
    for x0 in initializations(n_max + 1) {
        let (x, f_x, converged) = fista(&mat, &mt, &b, &x0, lipschitz);
        any_converged |= converged;
        let (x, f_x) = match polish(&mat, &b, &x, f_x) {
            Some((p, f_p)) => (p, f_p),
            None => (x, f_x),
        };
        match &best {
            Some((_, f_best)) if f_x >= *f_best => {}
            _ => best = Some((x, f_x)),
        }
    }
    let (x, f_x) = best.expect("at least one initialization");
    let rms = (f_x / points as f64).sqrt();
    if !any_converged {
        return Err(SimError::NonConvergence {
            msg: format!(
                "no start settled within {MAX_ITERS} iterations; best-so-far {:?}",
                x.as_slice()
            ),
            residual: rms,
        });
    }
    Ok((PhononDistribution::from_probs(x.as_slice().to_vec())?, rms))
}

/// Constrained least-squares reconstruction of P(0..=n_max) from a trace,
/// holding the decay model fixed. Deterministic: eight fixed starts, best
/// residual wins, ties keep the earliest start.
pub fn fit_distribution(
    trace: &RabiTrace,
    m: &DecayModel,
    n_max: usize,
) -> Result<PhononDistribution> {
    fit_core(trace, m, n_max).map(|(d, _)| d)
}

fn mc_inner(
    trace: &RabiTrace,
    m: &DecayModel,
    n_max: usize,
    n_resamples: usize,
    seed: u64,
    par: bool,
) -> Result<FitResult> {
    if n_resamples < 2 {
        return Err(SimError::Domain(
            "uncertainty estimation needs at least 2 resamples".into(),
        ));
    }
    let (central, residual_rms) = fit_core(trace, m, n_max)?;

    // Stream 0 belongs to direct measurement simulation; resample i draws
    // from stream i + 1, so results are independent of scheduling.
    let one = |i: usize| -> Result<PhononDistribution> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1 + i as u64);
        let noisy = perturb_trace(trace, &mut rng, NoiseKind::Gaussian);
        fit_core(&noisy, m, n_max).map(|(d, _)| d)
    };
    let outcomes: Vec<Result<PhononDistribution>> = if par {
        map_indexed(n_resamples, one)
    } else {
        map_indexed_seq(n_resamples, one)
    };

    let mut samples = Vec::with_capacity(n_resamples);
    let mut failures = 0usize;
    for r in outcomes {
        match r {
            Ok(d) => samples.push(d),
            Err(_) => failures += 1,
        }
    }
    if failures * 5 > n_resamples {
        return Err(SimError::NonConvergence {
            msg: format!("{failures} of {n_resamples} resample fits failed"),
            residual: failures as f64 / n_resamples as f64,
        });
    }
    let count = samples.len();
    let per_bin_sigma = (0..=n_max)
        .map(|n| {
            let mean: f64 = samples.iter().map(|d| d.p(n)).sum::<f64>() / count as f64;
            let ss: f64 = samples
                .iter()
                .map(|d| {
                    let e = d.p(n) - mean;
                    e * e
                })
                .sum();
            (ss / (count - 1) as f64).sqrt()
        })
        .collect();
    Ok(FitResult {
        distribution: central,
        residual_rms,
        mc_samples: samples,
        per_bin_sigma,
    })
}

/// Central fit plus `n_resamples` fits of projection-noise resamples of the
/// trace; per-level standard deviations quantify the reconstruction
/// uncertainty. Resample failures are excluded, and more than 20% of them
/// fail the whole estimate. Deterministic under `seed`.
pub fn monte_carlo_uncertainty(
    trace: &RabiTrace,
    m: &DecayModel,
    n_max: usize,
    n_resamples: usize,
    seed: u64,
) -> Result<FitResult> {
    mc_inner(trace, m, n_max, n_resamples, seed, true)
}

/// Sequential twin of [`monte_carlo_uncertainty`].
pub fn monte_carlo_uncertainty_seq(
    trace: &RabiTrace,
    m: &DecayModel,
    n_max: usize,
    n_resamples: usize,
    seed: u64,
) -> Result<FitResult> {
    mc_inner(trace, m, n_max, n_resamples, seed, false)
}

/// Total variation distance between two distributions, padding the shorter
/// truncation with zeros.
pub fn total_variation(a: &PhononDistribution, b: &PhononDistribution) -> f64 {
    let len = a.len().max(b.len());
    0.5 * (0..len).map(|n| (a.p(n) - b.p(n)).abs()).sum::<f64>()
}
