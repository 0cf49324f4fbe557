//! Nonclassicality and non-Gaussianity certification of phonon-number
//! distributions: Fano factor, Klyshko minors, Wigner parity values, the
//! Gaussian-envelope witness, and entanglement potential.

pub mod entanglement;
pub mod qng;

pub use entanglement::{
    beamsplit_fock, entanglement_potential, entanglement_potentials,
    entanglement_potentials_seq, log_negativity, TwoModeDensityMatrix,
};
pub use qng::{
    gaussian_fock_probabilities, qng_witness, GaussianPureParams, QngEnvelope,
    QngSearchConfig, QngVerdict,
};

use serde::Serialize;
use std::f64::consts::FRAC_2_PI;

use crate::error::SimError;
use crate::fock::PhononDistribution;
use crate::math::laguerre_row;
use crate::Result;

/// Variance over mean. `None` on zero mean (exact ground state), where the
/// ratio is undefined; Fock states give exactly zero, Poissonians one.
pub fn fano_factor(d: &PhononDistribution) -> Option<f64> {
    let (mean, _) = d.mean_phonon();
    if mean <= 0.0 {
        return None;
    }
    let var = d.second_moment() - mean * mean;
    Some(var / mean)
}

/// Klyshko minor K_n = n P(n)^2 - (n+1) P(n+1) P(n-1).
///
/// K_n > 0 certifies nonclassicality: coherent-state mixtures obey the
/// opposite inequality by Cauchy-Schwarz, thermal states give -P(n)^2 and
/// Poissonians exactly zero, while Fock states reach the maximum K_n = n.
pub fn klyshko(d: &PhononDistribution, n: usize) -> Result<f64> {
    if n < 1 || n + 1 > d.n_max() {
        return Err(SimError::Domain(format!(
            "Klyshko level must satisfy 1 <= n <= n_max - 1, got n = {n} at n_max = {}",
            d.n_max()
        )));
    }
    Ok(n as f64 * d.p(n) * d.p(n) - (n + 1) as f64 * d.p(n + 1) * d.p(n - 1))
}

fn alternating_sum(d: &PhononDistribution) -> f64 {
    d.probs()
        .iter()
        .enumerate()
        .map(|(n, p)| if n % 2 == 0 { *p } else { -*p })
        .sum()
}

/// Wigner function at the origin, (2/pi) sum (-1)^n P(n), and a flag set
/// when the stored mass misses completeness by more than 1e-3 (the
/// alternating sum is then only a truncation estimate).
pub fn wigner_origin(d: &PhononDistribution) -> (f64, bool) {
    (
        FRAC_2_PI * alternating_sum(d),
        !d.is_complete(qng::COMPLETENESS_TOL),
    )
}

/// Radial section W(x, 0) = (2/pi) e^(-2x^2) sum_n P(n) (-1)^n L_n(4x^2).
/// At x = 0 this reduces bit-for-bit to [`wigner_origin`].
pub fn wigner_radial(d: &PhononDistribution, xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|&x| {
            let z = 4.0 * x * x;
            let row = laguerre_row(d.n_max(), z);
            let s: f64 = d
                .probs()
                .iter()
                .enumerate()
                .map(|(n, p)| {
                    let t = p * row[n];
                    if n % 2 == 0 {
                        t
                    } else {
                        -t
                    }
                })
                .sum();
            FRAC_2_PI * (-2.0 * x * x).exp() * s
        })
        .collect()
}

/// Witness verdict at one level, as carried in a [`WitnessReport`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QngLevelReport {
    pub level: usize,
    pub violated: bool,
    pub margin: f64,
    pub unreliable: bool,
}

/// Aggregated nonclassicality metrics of one distribution. Metrics that
/// could not be computed are absent, with the reason recorded in
/// `metric_errors` instead of failing the whole report.
#[derive(Debug, Clone, Serialize)]
pub struct WitnessReport {
    pub fano: Option<f64>,
    pub klyshko: Vec<(usize, f64)>,
    pub wigner_origin: f64,
    pub wigner_incomplete: bool,
    pub qng_levels: Vec<QngLevelReport>,
    pub entanglement_potential: Option<f64>,
    pub metric_errors: Vec<String>,
}

/// Computes every metric at the requested levels. Deterministic given the
/// search configuration; per-metric failures are recorded, not propagated.
pub fn full_report(
    d: &PhononDistribution,
    levels: &[usize],
    config: &QngSearchConfig,
) -> WitnessReport {
    let mut errors = Vec::new();

    let fano = fano_factor(d);
    if fano.is_none() {
        errors.push("fano: undefined at zero mean phonon number".into());
    }

    let mut klyshko_vals = Vec::new();
    for &n in levels {
        match klyshko(d, n) {
            Ok(k) => klyshko_vals.push((n, k)),
            Err(e) => errors.push(format!("klyshko[{n}]: {e}")),
        }
    }

    let (w0, w_incomplete) = wigner_origin(d);

    let mut qng_levels = Vec::new();
    for &n in levels {
        match qng_witness(d, n, config) {
            Ok(v) => qng_levels.push(QngLevelReport {
                level: n,
                violated: v.violated,
                margin: v.margin,
                unreliable: v.unreliable,
            }),
            Err(e) => errors.push(format!("qng[{n}]: {e}")),
        }
    }

    let ep = match entanglement_potential(d) {
        Ok(v) => Some(v),
        Err(e) => {
            errors.push(format!("entanglement_potential: {e}"));
            None
        }
    };

    WitnessReport {
        fano,
        klyshko: klyshko_vals,
        wigner_origin: w0,
        wigner_incomplete: w_incomplete,
        qng_levels,
        entanglement_potential: ep,
        metric_errors: errors,
    }
}
