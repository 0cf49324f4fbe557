//! One accumulation step and its k-fold iteration.
//!
//! A step consists of an anti-Jaynes-Cummings pulse of area gt that moves
//! population up the Fock ladder with a number-dependent Rabi angle, followed
//! by an electronic reset that slightly heats the part of the population
//! whose internal state flipped. The pulse succeeds with probability kappa
//! (the interaction contrast); otherwise the motional state is untouched.

use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::fock::{PhononDistribution, TruncationMode, TruncationPolicy};
use crate::math;
use crate::Result;

/// Parameters of one accumulation step.
///
/// `pulse_area` is the dimensionless product gt in radians; a pulse of area
/// pi adds exactly one phonon to the ground state. `contrast` is the success
/// probability kappa of the pulse. `eta_eff` sets the reset-heating strength;
/// its square is the mean phonon gain per reset, and the second-order
/// expansion behind the heating map requires eta_eff^2 < 0.1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepParams {
    pub pulse_area: f64,
    pub contrast: f64,
    pub eta_eff: f64,
}

impl StepParams {
    pub fn new(pulse_area: f64, contrast: f64, eta_eff: f64) -> Result<Self> {
        let p = StepParams {
            pulse_area,
            contrast,
            eta_eff,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pulse_area > 0.0) {
            return Err(SimError::Domain(format!(
                "pulse_area must be > 0, got {}",
                self.pulse_area
            )));
        }
        if !(0.0..=1.0).contains(&self.contrast) {
            return Err(SimError::Domain(format!(
                "contrast must lie in [0, 1], got {}",
                self.contrast
            )));
        }
        if !(self.eta_eff >= 0.0) || self.eta_eff * self.eta_eff >= 0.1 {
            return Err(SimError::Domain(format!(
                "eta_eff must satisfy 0 <= eta_eff^2 < 0.1, got {}",
                self.eta_eff
            )));
        }
        Ok(())
    }
}

/// cos^2 of the half-area Rabi angle for the |n> -> |n+1> transition.
fn cos2_angle(pulse_area: f64, n: usize) -> f64 {
    let c = (0.5 * pulse_area * ((n + 1) as f64).sqrt()).cos();
    c * c
}

/// Pulse-only step: P'(n) = cos^2((gt/2) sqrt(n+1)) P(n)
///                        + sin^2((gt/2) sqrt(n)) P(n-1).
///
/// The output gains one entry. The moved fraction is computed as the
/// complement of the kept fraction (moved = p - kept), so the total is
/// conserved to rounding by construction.
pub fn ideal_step(d: &PhononDistribution, pulse_area: f64) -> PhononDistribution {
    let (stay, moved) = pulse_branches(d, pulse_area);
    let mut out = vec![0.0; d.len() + 1];
    for (n, v) in stay.iter().enumerate() {
        out[n] += v;
    }
    for (n, v) in moved.iter().enumerate() {
        out[n] += v;
    }
    PhononDistribution::from_computed(out)
}

/// Splits the population into the kept branch (internal state unchanged) and
/// the raised branch (one phonon added, internal state flipped). `kept` has
/// the input length, `raised` one more.
fn pulse_branches(d: &PhononDistribution, pulse_area: f64) -> (Vec<f64>, Vec<f64>) {
    let len = d.len();
    let mut kept = vec![0.0; len];
    let mut raised = vec![0.0; len + 1];
    for n in 0..len {
        let p = d.p(n);
        let stay = cos2_angle(pulse_area, n) * p;
        kept[n] = stay;
        raised[n + 1] = p - stay;
    }
    (kept, raised)
}

/// Second-order reset-heating map:
/// P'(n) = P(n) + eta^2 [(n+1) P(n+1) + n P(n-1) - (2n+1) P(n)].
///
/// Implemented as probability flows (up-flow eta^2 (n+1) P(n), down-flow
/// eta^2 n P(n)), which conserves the total by construction and raises the
/// truncation by one. If any output entry falls below -1e-12 the expansion
/// has been driven outside its validity regime and an error names the
/// offending level.
pub fn thermalization_map(d: &PhononDistribution, eta_eff: f64) -> Result<PhononDistribution> {
    if !(eta_eff >= 0.0) {
        return Err(SimError::Domain(format!(
            "eta_eff must be >= 0, got {eta_eff}"
        )));
    }
    if eta_eff == 0.0 {
        return Ok(d.clone());
    }
    let e2 = eta_eff * eta_eff;
    let len = d.len();
    let mut out = vec![0.0; len + 1];
    for n in 0..len {
        let p = d.p(n);
        let up = e2 * (n as f64 + 1.0) * p;
        let down = e2 * n as f64 * p;
        out[n] += p - (up + down);
        out[n + 1] += up;
        if n > 0 {
            out[n - 1] += down;
        }
    }
    for (n, v) in out.iter().enumerate() {
        if *v < -1e-12 {
            return Err(SimError::Validity(format!(
                "heating expansion gave P({n}) = {v:e}; eta_eff = {eta_eff} is too strong \
                 for populations near level {n}"
            )));
        }
    }
    Ok(PhononDistribution::from_computed(out))
}

/// Heating flows with the outflow of each level capped at the level's own
/// population. Wherever eta^2 (2n+1) <= 1 the cap is inactive and this is
/// the plain second-order update, arithmetic included; past that point the
/// raw update would overdraw the level (and repeated application amplifies
/// the overdraft), so the capped flow keeps the step a genuine probability
/// map at every truncation. Output is nonnegative and one entry longer, and
/// the total is conserved exactly.
fn capped_heating_flows(probs: &[f64], e2: f64) -> Vec<f64> {
    let mut out = vec![0.0; probs.len() + 1];
    for (n, &p) in probs.iter().enumerate() {
        let mut up = e2 * (n as f64 + 1.0) * p;
        let mut down = e2 * n as f64 * p;
        let flow = up + down;
        if flow > p {
            up = p * (up / flow);
            down = p - up;
        } else {
            out[n] += p - flow;
        }
        out[n + 1] += up;
        if n > 0 {
            out[n - 1] += down;
        }
    }
    out
}

/// Reference heating map: the diagonal of the Gaussian-weighted displacement
/// average (1/(pi eta^2)) integral e^(-|a|^2/eta^2) D(a) rho D(a)^+ d^2 a,
/// evaluated by Gauss-Laguerre quadrature in |a|^2 (the angular integral is
/// trivial for number-diagonal states). Agrees with [`thermalization_map`]
/// to O(eta^4).
///
/// The output space is padded until the total is conserved within 1e-8; if
/// padding up to an internal cap cannot achieve that, a truncation error
/// reports the size that would be needed.
pub fn exact_thermalization_oracle(
    d: &PhononDistribution,
    eta_eff: f64,
    quad_order: usize,
) -> Result<PhononDistribution> {
    if quad_order < 8 {
        return Err(SimError::Domain(format!(
            "quadrature order must be >= 8, got {quad_order}"
        )));
    }
    if !(eta_eff >= 0.0) {
        return Err(SimError::Domain(format!(
            "eta_eff must be >= 0, got {eta_eff}"
        )));
    }
    if eta_eff == 0.0 {
        return Ok(d.clone());
    }
    let e2 = eta_eff * eta_eff;
    let (nodes, weights) = math::gauss_laguerre(quad_order);
    let len = d.len();
    let total_in = d.total();
    let mut pad = 8usize;
    loop {
        let out_len = len + pad;
        let mut out = vec![0.0; out_len];
        for (x, w) in nodes.iter().zip(&weights) {
            let s = e2 * x;
            for n in 0..len {
                let p = d.p(n);
                if p == 0.0 {
                    continue;
                }
                for (m, slot) in out.iter_mut().enumerate() {
                    *slot += w * p * math::displacement_prob(m, n, s);
                }
            }
        }
        let total_out: f64 = out.iter().sum();
        if (total_out - total_in).abs() <= 1e-8 {
            return Ok(PhononDistribution::from_computed(out));
        }
        if pad >= 512 {
            return Err(SimError::Truncation {
                msg: format!(
                    "displacement average lost {:.3e} of the trace",
                    (total_in - total_out).abs()
                ),
                suggested: out_len * 2,
            });
        }
        pad *= 2;
    }
}

/// Full imperfect step:
/// out = (1 - kappa) P + kappa [ kept + heated(raised) ].
///
/// The pulse succeeds with probability kappa; the raised branch (internal
/// state flipped) passes through the reset heating before recombining. The
/// heating uses the capped flows of [`capped_heating_flows`]: identical to
/// [`thermalization_map`] on the expansion's validity region (which covers
/// every low-lying state), and a stable probability map beyond it, where
/// the raw expansion would turn high-level populations negative and error.
/// At eta = 0 the heating stage is skipped entirely.
pub fn full_step(d: &PhononDistribution, params: &StepParams) -> Result<PhononDistribution> {
    params.validate()?;
    let kappa = params.contrast;
    let (kept, raised) = pulse_branches(d, params.pulse_area);
    let heated = if params.eta_eff == 0.0 {
        raised
    } else {
        capped_heating_flows(&raised, params.eta_eff * params.eta_eff)
    };
    let mut out = vec![0.0; d.len().max(heated.len()).max(kept.len())];
    for (n, slot) in out.iter_mut().enumerate() {
        let pulsed =
            kept.get(n).copied().unwrap_or(0.0) + heated.get(n).copied().unwrap_or(0.0);
        *slot = (1.0 - kappa) * d.p(n) + kappa * pulsed;
    }
    Ok(PhononDistribution::from_computed(out))
}

/// The sequence of states rho_0..rho_K produced by repeating the full step,
/// together with the parameters and the truncation loss accumulated by the
/// growth policy.
#[derive(Debug, Clone, Serialize)]
pub struct IterationTrace {
    pub params: StepParams,
    pub policy: TruncationPolicy,
    pub states: Vec<PhononDistribution>,
    /// Probability removed by truncation over all steps.
    pub tail_loss: f64,
}

impl IterationTrace {
    pub fn final_state(&self) -> &PhononDistribution {
        self.states.last().expect("trace holds at least the input")
    }
}

/// Applies [`full_step`] k times, storing every intermediate state.
///
/// Under the adaptive policy the state grows as needed, suffixes lighter
/// than `tail_tol` are dropped, and exceeding `n_cap` is an error unless the
/// excess weighs no more than `tail_tol`. Under the fixed policy the state
/// never grows past its initial length; any step that would push more than
/// `tail_tol` of probability past the cap is an error.
pub fn iterate(
    d0: &PhononDistribution,
    params: &StepParams,
    k: usize,
    policy: &TruncationPolicy,
) -> Result<IterationTrace> {
    params.validate()?;
    policy.validate()?;
    let fixed_len = d0.len();
    let mut states = Vec::with_capacity(k + 1);
    let mut tail_loss = 0.0;
    states.push(d0.clone());
    for _ in 0..k {
        let mut next = full_step(states.last().expect("nonempty"), params)?;
        let cap_len = match policy.mode {
            TruncationMode::Fixed => fixed_len.min(policy.n_cap + 1),
            TruncationMode::Adaptive => policy.n_cap + 1,
        };
        if next.len() > cap_len {
            let lost: f64 = next.probs()[cap_len..].iter().sum();
            if lost > policy.tail_tol {
                return Err(SimError::Truncation {
                    msg: format!(
                        "step pushed {lost:.3e} of probability past the cap n = {}",
                        cap_len - 1
                    ),
                    suggested: next.len(),
                });
            }
            tail_loss += lost;
            next = PhononDistribution::from_computed(next.probs()[..cap_len].to_vec());
        }
        if policy.mode == TruncationMode::Adaptive {
            tail_loss += next.trim_tail(policy.tail_tol);
        }
        states.push(next);
    }
    Ok(IterationTrace {
        params: *params,
        policy: *policy,
        states,
        tail_loss,
    })
}
