//! Small numerical kernels shared across modules: Laguerre recurrences,
//! Gauss-Laguerre quadrature, displacement-operator matrix elements, and a
//! Euclidean simplex projection.

use nalgebra::{DMatrix, SymmetricEigen};

/// Ordinary Laguerre polynomials L_0..L_n at z, by the three-term recurrence
/// (k+1) L_{k+1} = (2k + 1 - z) L_k - k L_{k-1}.
pub fn laguerre_row(n: usize, z: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(1.0);
    if n == 0 {
        return out;
    }
    out.push(1.0 - z);
    for k in 1..n {
        let k_f = k as f64;
        let next = ((2.0 * k_f + 1.0 - z) * out[k] - k_f * out[k - 1]) / (k_f + 1.0);
        out.push(next);
    }
    out
}

/// Associated Laguerre polynomial L_n^(alpha)(z) for integer alpha >= 0.
pub fn laguerre_assoc(n: usize, alpha: usize, z: f64) -> f64 {
    let a = alpha as f64;
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + a - z;
    for k in 1..n {
        let k_f = k as f64;
        let next = ((2.0 * k_f + a + 1.0 - z) * cur - (k_f + a) * prev) / (k_f + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Nodes and weights of N-point Gauss-Laguerre quadrature for
/// integral_0^inf e^(-x) f(x) dx, via the Golub-Welsch eigenproblem of the
/// Jacobi matrix (diagonal 2k+1, off-diagonal k). Nodes ascend.
pub fn gauss_laguerre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1);
    let mut jacobi = DMatrix::<f64>::zeros(order, order);
    for k in 0..order {
        jacobi[(k, k)] = 2.0 * k as f64 + 1.0;
        if k > 0 {
            jacobi[(k, k - 1)] = k as f64;
            jacobi[(k - 1, k)] = k as f64;
        }
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..order)
        .map(|j| {
            let node = eig.eigenvalues[j];
            let first = eig.eigenvectors[(0, j)];
            (node, first * first)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// |<m|D(r)|n>|^2 for a real displacement of squared magnitude s = r^2:
/// e^(-s) s^k (lo!/hi!) [L_lo^(k)(s)]^2 with lo = min(m,n), k = |m-n|.
/// The prefactor is accumulated multiplicatively to avoid factorial overflow.
pub fn displacement_prob(m: usize, n: usize, s: f64) -> f64 {
    let lo = m.min(n);
    let k = m.abs_diff(n);
    let mut acc = (-s).exp();
    for j in 1..=k {
        acc *= s / (lo + j) as f64;
    }
    let l = laguerre_assoc(lo, k, s);
    acc * l * l
}

/// sqrt(C(n, i) / 2^n) for i = 0..n, the amplitudes of a 50/50 split of |n>.
/// Built by ratio recursion so large n stays stable.
pub fn binomial_sqrt_amplitudes(n: usize) -> Vec<f64> {
    let mut c = Vec::with_capacity(n + 1);
    c.push(0.5f64.powi(n as i32).sqrt());
    for i in 0..n {
        let next = c[i] * ((n - i) as f64 / (i as f64 + 1.0)).sqrt();
        c.push(next);
    }
    c
}

/// Euclidean projection of v onto the probability simplex
/// { x : x_i >= 0, sum x_i = 1 } (sort-based algorithm).
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, u) in sorted.iter().enumerate() {
        cum += u;
        let t = (cum - 1.0) / (i as f64 + 1.0);
        if u - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}
