//! Entanglement potential: split the oscillator state on a balanced
//! beam splitter against vacuum and quantify the two-mode entanglement by
//! logarithmic negativity.
//!
//! All states handled here are diagonal-input beam-splitter images, which are
//! real symmetric matrices; the dense type therefore stores real entries.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::SimError;
use crate::fock::PhononDistribution;
use crate::math::binomial_sqrt_amplitudes;
use crate::parallel::{map_indexed, map_indexed_seq};
use crate::Result;

/// Completeness required of inputs so the two-mode image is trace-faithful.
pub const COMPLETENESS_TOL: f64 = 1e-3;

/// Real symmetric two-mode density matrix on a (dim_a * dim_b)-dimensional
/// product space, basis |i, j> ordered with the second index fastest.
#[derive(Debug, Clone, Serialize)]
pub struct TwoModeDensityMatrix {
    pub dim_a: usize,
    pub dim_b: usize,
    #[serde(skip)]
    pub entries: DMatrix<f64>,
}

impl TwoModeDensityMatrix {
    /// Validating constructor: symmetric within 1e-12, unit trace within
    /// 1e-3 (matching the completeness tolerance of the states that feed
    /// this type), eigenvalues above -1e-9.
    pub fn new(dim_a: usize, dim_b: usize, entries: DMatrix<f64>) -> Result<Self> {
        let dim = dim_a * dim_b;
        if dim == 0 || entries.nrows() != dim || entries.ncols() != dim {
            return Err(SimError::Domain(format!(
                "matrix must be {dim} x {dim} for dims ({dim_a}, {dim_b})"
            )));
        }
        check_symmetric(&entries)?;
        let trace = entries.trace();
        if (trace - 1.0).abs() > COMPLETENESS_TOL {
            return Err(SimError::Domain(format!(
                "trace {trace} is not 1 within {COMPLETENESS_TOL}"
            )));
        }
        let min_eig = SymmetricEigen::new(entries.clone())
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |a, b| a.min(*b));
        if min_eig < -1e-9 {
            return Err(SimError::Domain(format!(
                "matrix has eigenvalue {min_eig:e}, below the -1e-9 positivity floor"
            )));
        }
        Ok(TwoModeDensityMatrix {
            dim_a,
            dim_b,
            entries,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim_a * self.dim_b
    }
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 {
                return Err(SimError::Domain(format!(
                    "matrix is not symmetric at ({i}, {j}): {} vs {}",
                    m[(i, j)],
                    m[(j, i)]
                )));
            }
        }
    }
    Ok(())
}

/// Image of a diagonal state under a balanced beam splitter against vacuum:
/// sum_n P(n) |psi_n><psi_n| with |psi_n> = sum_k sqrt(C(n,k)/2^n) |k, n-k>.
/// All amplitudes positive; both output modes are sized n_max + 1.
pub fn beamsplit_fock(d: &PhononDistribution) -> Result<TwoModeDensityMatrix> {
    if !d.is_complete(COMPLETENESS_TOL) {
        return Err(SimError::Domain(format!(
            "beam-splitter input keeps only {:.6} of its mass",
            d.total()
        )));
    }
    let dim = d.len();
    let mut rho = DMatrix::<f64>::zeros(dim * dim, dim * dim);
    for n in 0..dim {
        let pn = d.p(n);
        if pn == 0.0 {
            continue;
        }
        let c = binomial_sqrt_amplitudes(n);
        for (k, ck) in c.iter().enumerate() {
            let row = k * dim + (n - k);
            for (l, cl) in c.iter().enumerate() {
                let col = l * dim + (n - l);
                rho[(row, col)] += pn * ck * cl;
            }
        }
    }
    // Positive by construction (convex sum of projectors), so the eigenvalue
    // scan in `new` is skipped; the cheap invariants still hold.
    check_symmetric(&rho).expect("mixture construction is symmetric");
    Ok(TwoModeDensityMatrix {
        dim_a: dim,
        dim_b: dim,
        entries: rho,
    })
}

/// Logarithmic negativity in bits: log2 of the trace norm of the partial
/// transpose on the second mode, normalized by the trace. Clamped at zero,
/// where it sits for every separable state.
pub fn log_negativity(m: &TwoModeDensityMatrix) -> Result<f64> {
    check_symmetric(&m.entries)?;
    let (da, db) = (m.dim_a, m.dim_b);
    let dim = da * db;
    let mut pt = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..da {
        for j in 0..db {
            for k in 0..da {
                for l in 0..db {
                    // <i j| rho^PT |k l> = <i l| rho |k j>
                    pt[(i * db + j, k * db + l)] = m.entries[(i * db + l, k * db + j)];
                }
            }
        }
    }
    let trace = m.entries.trace();
    if trace <= 0.0 {
        return Err(SimError::Domain("matrix trace must be positive".into()));
    }
    let eig = SymmetricEigen::new(pt);
    let trace_norm: f64 = eig.eigenvalues.iter().map(|v| v.abs()).sum();
    Ok((trace_norm / trace).log2().max(0.0))
}

/// Entanglement potential in bits: log_negativity(beamsplit_fock(d)),
/// computed without materializing the dense two-mode matrix.
///
/// The partial transpose of the beam-splitter image is block diagonal over
/// the index difference delta = i - j = k - l, because every ket |i, n-i>
/// pairs only with bras of the same total n. Each block is eigensolved
/// separately, which keeps the cost at O(n_max) small eigenproblems instead
/// of one of dimension (n_max + 1)^2.
pub fn entanglement_potential(d: &PhononDistribution) -> Result<f64> {
    if !d.is_complete(COMPLETENESS_TOL) {
        return Err(SimError::Domain(format!(
            "beam-splitter input keeps only {:.6} of its mass",
            d.total()
        )));
    }
    let n_max = d.n_max();
    let rows: Vec<Vec<f64>> = (0..=n_max).map(binomial_sqrt_amplitudes).collect();
    let trace = d.total();
    let mut trace_norm = 0.0;
    let n = n_max as isize;
    for delta in -n..=n {
        let lo = delta.max(0) as usize;
        let size = (n - delta.abs() + 1) as usize;
        let mut block = DMatrix::<f64>::zeros(size, size);
        for a in 0..size {
            let i = lo + a;
            for b in a..size {
                let j = lo + b;
                let m = (i + j) as isize - delta;
                if m > n {
                    continue;
                }
                let m = m as usize;
                let v = d.p(m) * rows[m][i] * rows[m][j];
                block[(a, b)] = v;
                block[(b, a)] = v;
            }
        }
        let eig = SymmetricEigen::new(block);
        trace_norm += eig.eigenvalues.iter().map(|v| v.abs()).sum::<f64>();
    }
    Ok((trace_norm / trace).log2().max(0.0))
}

/// Entanglement potential of each distribution; fans out across a thread
/// pool when the `parallel` feature is on, with identical results.
pub fn entanglement_potentials(ds: &[PhononDistribution]) -> Result<Vec<f64>> {
    map_indexed(ds.len(), |i| entanglement_potential(&ds[i]))
        .into_iter()
        .collect()
}

/// Sequential twin of [`entanglement_potentials`].
pub fn entanglement_potentials_seq(ds: &[PhononDistribution]) -> Result<Vec<f64>> {
    map_indexed_seq(ds.len(), |i| entanglement_potential(&ds[i]))
        .into_iter()
        .collect()
}
