//! Closed-form measurement bounds: weighted n-ℓ1 recovery with prior
//! information, ℓ1-ℓ1 recovery with a single prior, and plain ℓ1 recovery.
//!
//! All bounds are returned as reals. Callers that need a measurement count
//! take the ceiling.

use nalgebra::DVector;

use crate::error::{invalid, CorpcaError, Result};

/// Entries with `|v| > NONZERO_TOL` count towards a support.
pub const NONZERO_TOL: f64 = 1e-12;

/// Default `ρ` for the n-ℓ1 bound under noise.
pub const RHO_NL1: f64 = 0.8 / 3.0;
/// Default `ρ` for the ℓ1-ℓ1 bound under noise.
pub const RHO_L1L1: f64 = 0.6 / 3.0;
/// Default `ρ` for the ℓ1 bound under noise.
pub const RHO_L1: f64 = 0.4 / 3.0;

fn domain(msg: impl Into<String>) -> CorpcaError {
    CorpcaError::Domain(msg.into())
}

/// Inputs of the n-ℓ1 bound.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundInputs {
    pub n: usize,
    /// `s_j = ‖x − z_j‖₀` for `j = 0..=J`. A perfect prior has `s_j = 0`;
    /// only `s̄` has to be positive.
    pub s: Vec<usize>,
    pub beta: Vec<f64>,
    /// Weights on the support of each difference `x − z_j`.
    pub w: Vec<Vec<f64>>,
    pub eps: f64,
    /// `η̂ = min_j η_j`.
    pub eta_hat: f64,
    /// Only used by the noisy bound.
    pub rho: f64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        let count = self.s.len();
        if count == 0 || self.beta.len() != count || self.w.len() != count {
            return Err(invalid("s, beta and w must all have J+1 entries"));
        }
        let total: f64 = self.beta.iter().sum();
        if (total - 1.0).abs() > 1e-12 || self.beta.iter().any(|b| !(*b >= 0.0)) {
            return Err(invalid(format!("β must be nonnegative and sum to 1, sums to {total}")));
        }
        for (j, (&s, w)) in self.s.iter().zip(&self.w).enumerate() {
            if s > self.n {
                return Err(invalid(format!("s_{j} = {s} exceeds n = {}", self.n)));
            }
            if w.len() != s {
                return Err(invalid(format!("w_{j} has {} entries, s_{j} = {s}", w.len())));
            }
        }
        if !(self.eps > 0.0) || !(self.eta_hat > 0.0) {
            return Err(invalid("ε and η̂ must be > 0"));
        }
        Ok(())
    }

    /// `s̄ = Σ β_j s_j`.
    pub fn s_bar(&self) -> f64 {
        self.beta.iter().zip(&self.s).map(|(b, &s)| b * s as f64).sum()
    }

    /// `α = (ε²/η̂²) Σ_j β_j Σ_i w_ji²`.
    pub fn alpha(&self) -> f64 {
        let inner: f64 = self
            .beta
            .iter()
            .zip(&self.w)
            .map(|(b, w)| b * w.iter().map(|v| v * v).sum::<f64>())
            .sum();
        (self.eps / self.eta_hat).powi(2) * inner
    }

    /// Inputs derived from a signal `x`, its priors `z_1..z_J` (with the
    /// implicit `z_0 = 0`) and mixture weights `β_0..β_J`.
    pub fn from_signal(x: &DVector<f64>, z: &[DVector<f64>], beta: &[f64], eps: f64, rho: f64) -> Result<Self> {
        let q = compute_alpha_eta(x, z, beta, eps)?;
        Ok(BoundInputs {
            n: x.len(),
            s: q.s,
            beta: beta.to_vec(),
            w: q.w,
            eps,
            eta_hat: q.eta_hat,
            rho,
        })
    }
}

/// Side-information quality terms computed from a signal and its priors.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaEta {
    pub alpha: f64,
    pub eta_hat: f64,
    /// `η_j` per prior, `j = 0..=J`.
    pub eta: Vec<f64>,
    pub s: Vec<usize>,
    /// On-support weights `w_ji = η_j / (|x_i − z_ji| + ε)`.
    pub w: Vec<Vec<f64>>,
}

pub fn compute_alpha_eta(x: &DVector<f64>, z: &[DVector<f64>], beta: &[f64], eps: f64) -> Result<AlphaEta> {
    let n = x.len();
    if n == 0 {
        return Err(invalid("empty signal"));
    }
    if beta.len() != z.len() + 1 {
        return Err(invalid(format!("expected {} mixture weights, got {}", z.len() + 1, beta.len())));
    }
    if z.iter().any(|zj| zj.len() != n) {
        return Err(invalid("prior length does not match the signal"));
    }
    if !(eps > 0.0) {
        return Err(invalid(format!("ε must be > 0, got {eps}")));
    }

    let mut eta = Vec::with_capacity(beta.len());
    let mut s = Vec::with_capacity(beta.len());
    let mut w = Vec::with_capacity(beta.len());
    for j in 0..beta.len() {
        let diff: Vec<f64> = match j {
            0 => x.iter().map(|v| v.abs()).collect(),
            _ => x.iter().zip(z[j - 1].iter()).map(|(a, b)| (a - b).abs()).collect(),
        };
        let inv_sum: f64 = diff.iter().map(|d| 1.0 / (d + eps)).sum();
        let eta_j = n as f64 / inv_sum;
        let on_support: Vec<f64> = diff
            .iter()
            .filter(|d| **d > NONZERO_TOL)
            .map(|d| eta_j / (d + eps))
            .collect();
        s.push(on_support.len());
        w.push(on_support);
        eta.push(eta_j);
    }
    let eta_hat = eta.iter().cloned().fold(f64::INFINITY, f64::min);
    let inner: f64 = beta
        .iter()
        .zip(&w)
        .map(|(b, wj)| b * wj.iter().map(|v| v * v).sum::<f64>())
        .sum();
    Ok(AlphaEta {
        alpha: (eps / eta_hat).powi(2) * inner,
        eta_hat,
        eta,
        s,
        w,
    })
}

/// Shared shape of every bound: `2a·ln(n/s) + 1.4·s + 1`.
fn shape(n: f64, s: f64, a: f64) -> Result<f64> {
    if !(s > 0.0) || !(s < n) {
        return Err(domain(format!("effective sparsity {s} must lie in (0, {n})")));
    }
    Ok(2.0 * a * (n / s).ln() + 1.4 * s + 1.0)
}

/// Converts a noiseless bound into its noisy counterpart for the same `ρ`:
/// `(m − 1)/ρ + 3/(2ρ)`.
pub fn noisy_from(noiseless: f64, rho: f64) -> Result<f64> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(invalid(format!("ρ must lie in (0, 1), got {rho}")));
    }
    Ok((noiseless - 1.0) / rho + 1.5 / rho)
}

/// Minimum measurement count for n-ℓ1 recovery. The noisy form is
/// `(2α/ρ)·ln(n/s̄) + 7s̄/(5ρ) + 3/(2ρ)`.
pub fn bound_nl1(inp: &BoundInputs, noisy: bool) -> Result<f64> {
    inp.validate()?;
    let alpha = inp.alpha();
    let s_bar = inp.s_bar();
    let n = inp.n as f64;
    if !noisy {
        return shape(n, s_bar, alpha);
    }
    if !(s_bar > 0.0) || !(s_bar < n) {
        return Err(domain(format!("s̄ = {s_bar} must lie in (0, {n})")));
    }
    let rho = inp.rho;
    if !(rho > 0.0 && rho < 1.0) {
        return Err(invalid(format!("ρ must lie in (0, 1), got {rho}")));
    }
    Ok(2.0 * alpha / rho * (n / s_bar).ln() + 7.0 * s_bar / (5.0 * rho) + 3.0 / (2.0 * rho))
}

/// `2s₀·ln(n/s₀) + 1.4·s₀ + 1`.
pub fn bound_l1(n: f64, s0: f64) -> Result<f64> {
    shape(n, s0, s0)
}

/// Set counts driving the ℓ1-ℓ1 bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct L1L1Counts {
    pub s0: usize,
    /// `|{z_i ≠ x_i = 0}| − |{z_i = x_i ≠ 0}|`.
    pub xi: i64,
    /// `|{x_i > 0, x_i > z_i} ∪ {x_i < 0, x_i < z_i}|`.
    pub h_bar: usize,
}

pub fn l1l1_counts(x: &DVector<f64>, z: &DVector<f64>) -> Result<L1L1Counts> {
    if x.len() != z.len() {
        return Err(invalid("x and z differ in length"));
    }
    let nz = |v: f64| v.abs() > NONZERO_TOL;
    let (mut s0, mut xi, mut h_bar) = (0usize, 0i64, 0usize);
    for (&a, &b) in x.iter().zip(z.iter()) {
        let same = !nz(a - b);
        if nz(a) {
            s0 += 1;
            if same {
                xi -= 1;
            }
        } else if !same {
            xi += 1;
        }
        if (a > NONZERO_TOL && a - b > NONZERO_TOL) || (a < -NONZERO_TOL && b - a > NONZERO_TOL) {
            h_bar += 1;
        }
    }
    Ok(L1L1Counts { s0, xi, h_bar })
}

/// `2h̄·ln(n/(s₀ + ξ/2)) + 1.4·(s₀ + ξ/2) + 1`.
pub fn bound_l1l1(n: usize, x: &DVector<f64>, z: &DVector<f64>) -> Result<f64> {
    if x.len() != n {
        return Err(invalid(format!("signal has length {}, expected {n}", x.len())));
    }
    let c = l1l1_counts(x, z)?;
    let eff = c.s0 as f64 + c.xi as f64 / 2.0;
    shape(n as f64, eff, c.h_bar as f64)
}
